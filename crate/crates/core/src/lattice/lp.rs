//! Small dense two-phase simplex for linear programs with free and nonnegative variables.

use crate::error::{Error, Result};

const EPS: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub(crate) struct Row {
    pub coef: Vec<f64>,
    pub cmp: Cmp,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Problem {
    /// Number of structural variables.
    pub n: usize,
    /// `free[j]` lets variable j take any sign; otherwise it is nonnegative.
    pub free: Vec<bool>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone)]
pub(crate) struct Solution {
    pub x: Vec<f64>,
    pub value: f64,
}

struct Tableau {
    // rows × (cols + 1), last column is the rhs
    a: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.a[r][c];
        for v in self.a[r].iter_mut() {
            *v /= p;
        }
        let pr = self.a[r].clone();
        for (i, row) in self.a.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, &w) in row.iter_mut().zip(&pr) {
                    *v -= f * w;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Minimises `cost · x` over the current basis with Bland's rule; `allowed` masks entering columns.
    fn run(&mut self, cost: &[f64], allowed: &[bool]) -> Result<()> {
        let m = self.a.len();
        for _ in 0..50_000 {
            // reduced costs
            let mut enter = None;
            for j in 0..self.cols {
                if !allowed[j] || self.basis.contains(&j) {
                    continue;
                }
                let mut d = cost[j];
                for i in 0..m {
                    d -= cost[self.basis[i]] * self.a[i][j];
                }
                if d < -EPS {
                    enter = Some(j);
                    break;
                }
            }
            let Some(c) = enter else { return Ok(()) };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let v = self.a[i][c];
                if v > EPS {
                    let ratio = self.a[i][self.cols] / v;
                    match leave {
                        Some((_, best)) if ratio > best + EPS => {}
                        Some((l, best)) if ratio > best - EPS && self.basis[i] > self.basis[l] => {}
                        _ => leave = Some((i, ratio)),
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::InvalidParameter("linear program is unbounded".into()));
            };
            self.pivot(r, c);
        }
        Err(Error::InvalidParameter("simplex iteration limit reached".into()))
    }
}

pub(crate) fn minimize(problem: &Problem, cost: &[f64]) -> Result<Solution> {
    let n = problem.n;
    if cost.len() != n || problem.free.len() != n || problem.rows.iter().any(|r| r.coef.len() != n) {
        return Err(Error::InvalidParameter("linear program dimensions disagree".into()));
    }
    // columns: x⁺ (n), x⁻ for free vars, slack/surplus per inequality, artificials
    let neg: Vec<usize> = (0..n).filter(|&j| problem.free[j]).collect();
    let m = problem.rows.len();
    let n_ineq = problem.rows.iter().filter(|r| r.cmp != Cmp::Eq).count();
    let base = n + neg.len();
    let art0 = base + n_ineq;
    let cols = art0 + m;
    let mut a = vec![vec![0.0; cols + 1]; m];
    let mut basis = vec![0; m];
    let mut slack = base;
    for (i, row) in problem.rows.iter().enumerate() {
        let sign = if row.rhs < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            a[i][j] = sign * row.coef[j];
        }
        for (k, &j) in neg.iter().enumerate() {
            a[i][n + k] = -sign * row.coef[j];
        }
        let cmp = match (row.cmp, sign < 0.0) {
            (Cmp::Le, true) => Cmp::Ge,
            (Cmp::Ge, true) => Cmp::Le,
            (c, _) => c,
        };
        match cmp {
            Cmp::Le => a[i][slack] = 1.0,
            Cmp::Ge => a[i][slack] = -1.0,
            Cmp::Eq => {}
        }
        if row.cmp != Cmp::Eq {
            slack += 1;
        }
        a[i][art0 + i] = 1.0;
        a[i][cols] = sign * row.rhs;
        basis[i] = art0 + i;
    }
    let mut t = Tableau { a, basis, cols };

    let mut phase1 = vec![0.0; cols];
    for c in phase1.iter_mut().skip(art0) {
        *c = 1.0;
    }
    t.run(&phase1, &vec![true; cols])?;
    let infeas: f64 = (0..m).filter(|&i| t.basis[i] >= art0).map(|i| t.a[i][cols]).sum();
    if infeas > 1e-8 {
        return Err(Error::InvalidParameter("linear program is infeasible".into()));
    }
    // drive zero-level artificials out of the basis
    for i in 0..m {
        if t.basis[i] >= art0 {
            if let Some(c) = (0..art0).find(|&c| t.a[i][c].abs() > EPS) {
                t.pivot(i, c);
            }
        }
    }

    let mut full = vec![0.0; cols];
    full[..n].copy_from_slice(cost);
    for (k, &j) in neg.iter().enumerate() {
        full[n + k] = -cost[j];
    }
    let allowed: Vec<bool> = (0..cols).map(|c| c < art0).collect();
    t.run(&full, &allowed)?;

    let mut col_val = vec![0.0; cols];
    for i in 0..m {
        col_val[t.basis[i]] = t.a[i][cols];
    }
    let mut x = col_val[..n].to_vec();
    for (k, &j) in neg.iter().enumerate() {
        x[j] -= col_val[n + k];
    }
    let value = cost.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(Solution { x, value })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_programs() {
        // min -x - y  s.t. x + 2y <= 4, 3x + y <= 6
        let p = Problem {
            n: 2,
            free: vec![false, false],
            rows: vec![
                Row { coef: vec![1.0, 2.0], cmp: Cmp::Le, rhs: 4.0 },
                Row { coef: vec![3.0, 1.0], cmp: Cmp::Le, rhs: 6.0 },
            ],
        };
        let s = minimize(&p, &[-1.0, -1.0]).unwrap();
        assert!((s.x[0] - 1.6).abs() < 1e-12 && (s.x[1] - 1.2).abs() < 1e-12);

        // min |x - 3| written with a free x and an epigraph variable
        let p = Problem {
            n: 2,
            free: vec![true, false],
            rows: vec![
                Row { coef: vec![-1.0, 1.0], cmp: Cmp::Ge, rhs: -3.0 },
                Row { coef: vec![1.0, 1.0], cmp: Cmp::Ge, rhs: 3.0 },
            ],
        };
        let s = minimize(&p, &[0.0, 1.0]).unwrap();
        assert!((s.x[0] - 3.0).abs() < 1e-12 && s.value.abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let p = Problem {
            n: 1,
            free: vec![false],
            rows: vec![Row { coef: vec![1.0], cmp: Cmp::Le, rhs: -1.0 }],
        };
        assert!(minimize(&p, &[1.0]).is_err());
        let p = Problem { n: 1, free: vec![true], rows: vec![Row { coef: vec![1.0], cmp: Cmp::Le, rhs: 1.0 }] };
        assert!(minimize(&p, &[1.0]).is_err());
    }
}
