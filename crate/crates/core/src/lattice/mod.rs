//! Exact two-period, five-branch lattice comparing the backward and the globally optimal
//! CVaR hedges. Both problems are piecewise linear and are solved exactly.

mod lp;

use std::fmt::Write as _;

use crate::accounting::{payoff, Payoff};
use crate::error::{Error, Result};
use crate::risk::{empirical_cvar, tail_count};

/// Branches per node.
pub const BRANCHES: usize = 5;

/// Recombining-factor lattice: `S₁[i] = s0·u^(2i−4)` and `S₂[i][j] = S₁[i]·u^(2j−4)`, i, j = 0..4,
/// every branch with probability 1/5. Nodes are in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeModel {
    pub s0: f64,
    pub up: f64,
    /// Per-period rate, with unit period length.
    pub rate: f64,
    pub s1: [f64; BRANCHES],
    pub s2: [[f64; BRANCHES]; BRANCHES],
}

impl LatticeModel {
    pub fn new(s0: f64, up: f64, rate: f64) -> Result<Self> {
        if !(s0 > 0.0 && up > 0.0 && s0.is_finite() && up.is_finite() && rate.is_finite()) {
            return Err(Error::InvalidParameter("lattice needs positive spot and factor".into()));
        }
        let mv = |s: f64, i: usize| s * up.powi(2 * i as i32 - 4);
        let s1: [f64; BRANCHES] = std::array::from_fn(|i| mv(s0, i));
        let s2 = std::array::from_fn(|i| std::array::from_fn(|j| mv(s1[i], j)));
        Ok(Self { s0, up, rate, s1, s2 })
    }

    fn growth(&self) -> f64 {
        self.rate.exp()
    }

    /// Terminal P&L on path (i, j) as `a + δ₀·b + δ₁·c` from date 0, capitalised to date 2.
    fn pl_terms(&self, phi: &Payoff<f64>, i: usize, j: usize) -> (f64, f64, f64) {
        let g = self.growth();
        let a = -payoff(phi, self.s2[i][j]);
        let b = (self.s1[i] - self.s0 * g) * g;
        let c = self.s2[i][j] - self.s1[i] * g;
        (a, b, c)
    }
}

/// The example lattice: s0 = 1, u = e^0.1, zero rate.
pub fn build_example_lattice() -> LatticeModel {
    LatticeModel::new(1.0, (0.2f64 * 0.25f64.sqrt()).exp(), 0.0).expect("constant inputs")
}

/// Holding at date 0 and one holding per date-1 node (ascending S₁).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeStrategy {
    pub delta0: f64,
    pub delta1: [f64; BRANCHES],
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeReport {
    /// CVaR of the date-0 to date-2 P&L over all 25 paths.
    pub cvar02: f64,
    /// Per date-1 node, CVaR of the date-1 to date-2 P&L over its 5 branches.
    pub cvar12: [f64; BRANCHES],
    pub pl02: [[f64; BRANCHES]; BRANCHES],
    pub pl12: [[f64; BRANCHES]; BRANCHES],
}

fn check_q(q: f64) -> Result<()> {
    if q > 0.0 && q <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("tail fraction {q} outside (0, 1]")))
    }
}

pub fn evaluate_lattice_cvar(
    lattice: &LatticeModel,
    strategy: &LatticeStrategy,
    phi: &Payoff<f64>,
    q: f64,
) -> Result<LatticeReport> {
    check_q(q)?;
    let mut pl02 = [[0.0; BRANCHES]; BRANCHES];
    let mut pl12 = [[0.0; BRANCHES]; BRANCHES];
    for i in 0..BRANCHES {
        for j in 0..BRANCHES {
            let (a, b, c) = lattice.pl_terms(phi, i, j);
            pl12[i][j] = a + strategy.delta1[i] * c;
            pl02[i][j] = pl12[i][j] + strategy.delta0 * b;
        }
    }
    let mut cvar12 = [0.0; BRANCHES];
    for i in 0..BRANCHES {
        cvar12[i] = empirical_cvar(&pl12[i], q)?;
    }
    let all: Vec<f64> = pl02.iter().flatten().copied().collect();
    Ok(LatticeReport {
        cvar02: empirical_cvar(&all, q)?,
        cvar12,
        pl02,
        pl12,
    })
}

/// Minimiser of a one-dimensional CVaR problem with the full optimal interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineMinimum {
    /// Midpoint of `range`.
    pub argmin: f64,
    pub value: f64,
    pub range: [f64; 2],
}

/// Exact minimum over `x` of the CVaR of the outcomes `a[p] + x·b[p]`.
///
/// The objective is convex and piecewise linear with kinks only where two outcomes cross,
/// so the minimum is attained on the set of crossing points.
fn line_minimum(a: &[f64], b: &[f64], q: f64) -> Result<LineMinimum> {
    let m = a.len();
    let k = tail_count(q, m);
    let f = |x: f64| {
        let v: Vec<f64> = a.iter().zip(b).map(|(a, b)| a + x * b).collect();
        empirical_cvar(&v, q)
    };
    // slope at +∞ is minus the mean of the k smallest b; at −∞ plus the mean of the k largest
    let mut sb = b.to_vec();
    sb.sort_by(|x, y| x.total_cmp(y));
    let low: f64 = sb[..k].iter().sum();
    let high: f64 = sb[m - k..].iter().sum();
    if low > 0.0 || high < 0.0 {
        return Err(Error::InvalidParameter("CVaR is unbounded below in the hedge".into()));
    }
    let mut cands = Vec::new();
    for p in 0..m {
        for r in p + 1..m {
            if b[p] != b[r] {
                cands.push((a[r] - a[p]) / (b[p] - b[r]));
            }
        }
    }
    if cands.is_empty() {
        cands.push(0.0);
    }
    let mut vals = Vec::with_capacity(cands.len());
    for &x in &cands {
        vals.push(f(x)?);
    }
    let best = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * (1.0 + best.abs());
    let mut range = [f64::INFINITY, f64::NEG_INFINITY];
    for (&x, &v) in cands.iter().zip(&vals) {
        if v <= best + tol {
            range[0] = range[0].min(x);
            range[1] = range[1].max(x);
        }
    }
    // A flat outermost segment would extend the optimal set to infinity.
    if low == 0.0 {
        range[1] = f64::INFINITY;
    }
    if high == 0.0 {
        range[0] = f64::NEG_INFINITY;
    }
    let argmin = if range[0].is_finite() && range[1].is_finite() {
        0.5 * (range[0] + range[1])
    } else if range[0].is_finite() {
        range[0]
    } else {
        range[1]
    };
    Ok(LineMinimum {
        argmin,
        value: f(argmin)?,
        range,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackwardLattice {
    pub strategy: LatticeStrategy,
    pub delta0: LineMinimum,
    pub delta1: [LineMinimum; BRANCHES],
}

/// Date-1 holdings minimise each node's CVaR over its branches; the date-0 holding then
/// minimises the two-period CVaR with the date-1 holdings fixed.
pub fn backward_lattice_strategy(lattice: &LatticeModel, phi: &Payoff<f64>, q: f64) -> Result<BackwardLattice> {
    check_q(q)?;
    let mut delta1 = Vec::with_capacity(BRANCHES);
    for i in 0..BRANCHES {
        let (a, c): (Vec<f64>, Vec<f64>) = (0..BRANCHES)
            .map(|j| {
                let (a, _, c) = lattice.pl_terms(phi, i, j);
                (a, c)
            })
            .unzip();
        delta1.push(line_minimum(&a, &c, q)?);
    }
    let d1: [f64; BRANCHES] = std::array::from_fn(|i| delta1[i].argmin);
    let mut a = Vec::with_capacity(BRANCHES * BRANCHES);
    let mut b = Vec::with_capacity(BRANCHES * BRANCHES);
    for i in 0..BRANCHES {
        for j in 0..BRANCHES {
            let (a0, b0, c0) = lattice.pl_terms(phi, i, j);
            a.push(a0 + d1[i] * c0);
            b.push(b0);
        }
    }
    let delta0 = line_minimum(&a, &b, q)?;
    Ok(BackwardLattice {
        strategy: LatticeStrategy {
            delta0: delta0.argmin,
            delta1: d1,
        },
        delta0,
        delta1: std::array::from_fn(|i| delta1[i]),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalLattice {
    /// A point in the relative interior of the optimal set.
    pub strategy: LatticeStrategy,
    pub value: f64,
    /// Per coordinate (δ₀, then δ₁ in node order), the range over all optimal strategies.
    pub ranges: [[f64; 2]; BRANCHES + 1],
}

/// Joint minimisation of the two-period CVaR over all six holdings, as the linear program
/// `min t + (1/k)·Σ z` with `z_p ≥ loss_p − t`, `z ≥ 0`.
pub fn global_lattice_strategy(lattice: &LatticeModel, phi: &Payoff<f64>, q: f64) -> Result<GlobalLattice> {
    check_q(q)?;
    let paths = BRANCHES * BRANCHES;
    let k = tail_count(q, paths) as f64;
    // variables: δ₀, δ₁[0..5], t, z[0..25]
    let n = 1 + BRANCHES + 1 + paths;
    let tv = 1 + BRANCHES;
    let mut rows = Vec::with_capacity(paths + 1);
    for i in 0..BRANCHES {
        for j in 0..BRANCHES {
            let (a, b, c) = lattice.pl_terms(phi, i, j);
            let mut coef = vec![0.0; n];
            coef[0] = b;
            coef[1 + i] = c;
            coef[tv] = 1.0;
            coef[tv + 1 + i * BRANCHES + j] = 1.0;
            rows.push(lp::Row {
                coef,
                cmp: lp::Cmp::Ge,
                rhs: -a,
            });
        }
    }
    let mut free = vec![false; n];
    free[..=tv].iter_mut().for_each(|f| *f = true);
    let mut cost = vec![0.0; n];
    cost[tv] = 1.0;
    cost[tv + 1..].iter_mut().for_each(|c| *c = 1.0 / k);
    let mut problem = lp::Problem { n, free, rows };
    let best = lp::minimize(&problem, &cost)?;

    // optimal face: objective pinned to the optimum, then each holding pushed both ways
    problem.rows.push(lp::Row {
        coef: cost.clone(),
        cmp: lp::Cmp::Le,
        rhs: best.value + 1e-10,
    });
    let mut ranges = [[0.0; 2]; BRANCHES + 1];
    let mut centre = vec![0.0; 1 + BRANCHES];
    for (c, range) in ranges.iter_mut().enumerate() {
        let mut dir = vec![0.0; n];
        dir[c] = 1.0;
        let lo = lp::minimize(&problem, &dir)?;
        dir[c] = -1.0;
        let hi = lp::minimize(&problem, &dir)?;
        *range = [lo.x[c], hi.x[c]];
        for (v, (l, h)) in centre.iter_mut().zip(lo.x.iter().zip(&hi.x)) {
            *v += (l + h) / (2.0 * (BRANCHES + 1) as f64);
        }
    }
    let strategy = LatticeStrategy {
        delta0: centre[0],
        delta1: std::array::from_fn(|i| centre[1 + i]),
    };
    let value = evaluate_lattice_cvar(lattice, &strategy, phi, q)?.cvar02;
    Ok(GlobalLattice { strategy, value, ranges })
}

/// Holdings of both strategies, one row per coordinate.
pub fn strategies_csv(global: &LatticeStrategy, backward: &LatticeStrategy) -> String {
    let mut s = String::from("index,s1,global,backward\n");
    let _ = writeln!(s, "0,,{:.4},{:.4}", global.delta0, backward.delta0);
    let lattice = build_example_lattice();
    for i in 0..BRANCHES {
        let _ = writeln!(
            s,
            "1.{},{:.4},{:.4},{:.4}",
            i + 1,
            lattice.s1[i],
            global.delta1[i],
            backward.delta1[i]
        );
    }
    s
}

/// Per-path P&L of both strategies, then per-node and total CVaR rows.
pub fn comparison_csv(
    lattice: &LatticeModel,
    phi: &Payoff<f64>,
    global: &LatticeReport,
    backward: &LatticeReport,
) -> String {
    let mut s = String::from("s1,s2,payoff,global_pl02,global_pl12,backward_pl02,backward_pl12\n");
    for i in 0..BRANCHES {
        for j in 0..BRANCHES {
            let _ = writeln!(
                s,
                "{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
                lattice.s1[i],
                lattice.s2[i][j],
                payoff(phi, lattice.s2[i][j]),
                global.pl02[i][j],
                global.pl12[i][j],
                backward.pl02[i][j],
                backward.pl12[i][j]
            );
        }
    }
    s.push_str("\nscope,s1,global_cvar,backward_cvar\n");
    for i in 0..BRANCHES {
        let _ = writeln!(
            s,
            "node,{:.4},{:.4},{:.4}",
            lattice.s1[i], global.cvar12[i], backward.cvar12[i]
        );
    }
    let _ = writeln!(s, "total,,{:.4},{:.4}", global.cvar02, backward.cvar02);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const STRANGLE: Payoff<f64> = Payoff::Strangle {
        call_strike: 0.8,
        put_strike: 1.3,
    };

    #[test]
    fn lattice_values() {
        let l = build_example_lattice();
        let want = [0.6703, 0.8187, 1.0, 1.2214, 1.4918];
        for (a, b) in l.s1.iter().zip(want) {
            assert!((a - b).abs() < 1e-4);
        }
        assert!((l.s2[4][4] - 2.2255).abs() < 1e-4);
        assert_eq!(l.s2[2][2], 1.0);
    }

    #[test]
    fn zero_strategy_zero_payoff() {
        let l = build_example_lattice();
        let s = LatticeStrategy { delta0: 0.0, delta1: [0.0; 5] };
        let r = evaluate_lattice_cvar(&l, &s, &Payoff::Call { strike: 1e9 }, 0.4).unwrap();
        assert_eq!(r.cvar02, 0.0);
        assert!(r.cvar12.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn line_minimum_of_absolute_spread() {
        // outcomes x and -x: CVaR at q = 1/2 is |x|
        let m = line_minimum(&[0.0, 0.0], &[1.0, -1.0], 0.5).unwrap();
        assert_eq!(m.argmin, 0.0);
        assert_eq!(m.value, 0.0);
        assert!(line_minimum(&[0.0, 0.0], &[1.0, 1.0], 0.5).is_err());
    }

    #[test]
    fn global_beats_backward_overall() {
        let l = build_example_lattice();
        let g = global_lattice_strategy(&l, &STRANGLE, 0.4).unwrap();
        let b = backward_lattice_strategy(&l, &STRANGLE, 0.4).unwrap();
        let rb = evaluate_lattice_cvar(&l, &b.strategy, &STRANGLE, 0.4).unwrap();
        let rg = evaluate_lattice_cvar(&l, &g.strategy, &STRANGLE, 0.4).unwrap();
        assert!(rg.cvar02 <= rb.cvar02 + 1e-12);
        for i in 0..BRANCHES {
            assert!(rb.cvar12[i] <= rg.cvar12[i] + 1e-12);
        }
        for (c, r) in g.ranges.iter().enumerate() {
            let x = if c == 0 { g.strategy.delta0 } else { g.strategy.delta1[c - 1] };
            assert!(r[0] - 1e-9 <= x && x <= r[1] + 1e-9);
        }
    }
}
