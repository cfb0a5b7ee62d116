//! Nelder-Mead downhill simplex in two dimensions (Lagarias et al. variant).

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexConfig<F> {
    pub x_tol: F,
    pub f_tol: F,
    pub max_iter: usize,
    pub initial_step: F,
    pub reflection: F,
    pub expansion: F,
    pub contraction: F,
    pub shrink: F,
}

impl<F: Real> Default for SimplexConfig<F> {
    fn default() -> Self {
        Self {
            x_tol: F::lit(1e-6),
            f_tol: F::lit(1e-6),
            max_iter: 400,
            initial_step: F::lit(0.1),
            reflection: F::one(),
            expansion: F::lit(2.0),
            contraction: F::lit(0.5),
            shrink: F::lit(0.5),
        }
    }
}

impl<F: Real> SimplexConfig<F> {
    pub fn validate(&self) -> Result<()> {
        let ok = self.x_tol > F::zero()
            && self.f_tol > F::zero()
            && self.max_iter >= 1
            && self.initial_step != F::zero()
            && self.reflection > F::zero()
            && self.expansion > F::one()
            && self.contraction > F::zero()
            && self.contraction < F::one()
            && self.shrink > F::zero()
            && self.shrink < F::one();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter("simplex configuration out of range".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexResult<F> {
    pub argmin: [F; 2],
    pub value: F,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

struct Counted<F, O> {
    f: O,
    evals: usize,
    _p: std::marker::PhantomData<F>,
}

impl<F: Real, O: FnMut([F; 2]) -> F> Counted<F, O> {
    fn eval(&mut self, x: [F; 2]) -> Result<F> {
        self.evals += 1;
        let v = (self.f)(x);
        if !v.is_finite() {
            return Err(Error::NonFiniteObjective {
                x: x[0].to_f64().unwrap_or(f64::NAN),
                y: x[1].to_f64().unwrap_or(f64::NAN),
                value: v.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(v)
    }
}

#[inline]
fn lerp<F: Real>(c: [F; 2], x: [F; 2], t: F) -> [F; 2] {
    [c[0] + t * (x[0] - c[0]), c[1] + t * (x[1] - c[1])]
}

/// Minimises `objective` from `start`. Stops when every vertex is within `x_tol` of the
/// best one (max-norm) and the value spread is below `f_tol`, or after `max_iter` iterations.
pub fn minimize_2d<F: Real, O: FnMut([F; 2]) -> F>(
    objective: O,
    start: [F; 2],
    config: &SimplexConfig<F>,
) -> Result<SimplexResult<F>> {
    config.validate()?;
    let mut f = Counted {
        f: objective,
        evals: 0,
        _p: std::marker::PhantomData,
    };
    let h = config.initial_step;
    let mut x = [start, [start[0] + h, start[1]], [start[0], start[1] + h]];
    let mut fx = [f.eval(x[0])?, f.eval(x[1])?, f.eval(x[2])?];
    let mut iterations = 0;
    let mut converged = false;
    loop {
        // Stable ordering keeps earlier vertices ahead on ties.
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| fx[a].partial_cmp(&fx[b]).unwrap());
        x = [x[order[0]], x[order[1]], x[order[2]]];
        fx = [fx[order[0]], fx[order[1]], fx[order[2]]];

        let spread_x = (1..3)
            .map(|k| (x[k][0] - x[0][0]).abs().max((x[k][1] - x[0][1]).abs()))
            .fold(F::zero(), F::max);
        let spread_f = (fx[2] - fx[0]).abs().max((fx[1] - fx[0]).abs());
        if spread_x <= config.x_tol && spread_f <= config.f_tol {
            converged = true;
            break;
        }
        if iterations >= config.max_iter {
            break;
        }
        iterations += 1;

        let c = [(x[0][0] + x[1][0]) * F::lit(0.5), (x[0][1] + x[1][1]) * F::lit(0.5)];
        let xr = lerp(c, x[2], -config.reflection);
        let fr = f.eval(xr)?;
        if fr < fx[0] {
            let xe = lerp(c, x[2], -config.reflection * config.expansion);
            let fe = f.eval(xe)?;
            if fe < fr {
                x[2] = xe;
                fx[2] = fe;
            } else {
                x[2] = xr;
                fx[2] = fr;
            }
            continue;
        }
        if fr < fx[1] {
            x[2] = xr;
            fx[2] = fr;
            continue;
        }
        if fr < fx[2] {
            let xc = lerp(c, x[2], -config.reflection * config.contraction);
            let fc = f.eval(xc)?;
            if fc <= fr {
                x[2] = xc;
                fx[2] = fc;
                continue;
            }
        } else {
            let xcc = lerp(c, x[2], config.contraction);
            let fcc = f.eval(xcc)?;
            if fcc < fx[2] {
                x[2] = xcc;
                fx[2] = fcc;
                continue;
            }
        }
        for k in 1..3 {
            x[k] = lerp(x[0], x[k], config.shrink);
            fx[k] = f.eval(x[k])?;
        }
    }
    Ok(SimplexResult {
        argmin: x[0],
        value: fx[0],
        iterations,
        evaluations: f.evals,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let r = minimize_2d(
            |p: [f64; 2]| (p[0] - 3.0).powi(2) + 2.0 * (p[1] + 1.0).powi(2),
            [0.0, 0.0],
            &SimplexConfig::default(),
        )
        .unwrap();
        assert!(r.converged);
        assert!((r.argmin[0] - 3.0).abs() < 1e-5 && (r.argmin[1] + 1.0).abs() < 1e-5);
    }

    #[test]
    fn nonsmooth_abs() {
        let r = minimize_2d(|p: [f64; 2]| p[0].abs() + p[1].abs(), [1.0, 1.0], &SimplexConfig::default()).unwrap();
        assert!(r.argmin[0].abs() < 1e-4 && r.argmin[1].abs() < 1e-4);
    }

    #[test]
    fn rosenbrock() {
        let r = minimize_2d(
            |p: [f64; 2]| (1.0 - p[0]).powi(2) + 100.0 * (p[1] - p[0] * p[0]).powi(2),
            [-1.2, 1.0],
            &SimplexConfig::default(),
        )
        .unwrap();
        assert!((r.argmin[0] - 1.0).abs() < 1e-3 && (r.argmin[1] - 1.0).abs() < 1e-3, "{r:?}");
    }

    #[test]
    fn non_finite_aborts() {
        let r = minimize_2d(|p: [f64; 2]| if p[0] > 0.05 { f64::NAN } else { 0.0 }, [0.0, 0.0], &SimplexConfig::default());
        assert!(matches!(r, Err(Error::NonFiniteObjective { .. })));
    }

    #[test]
    fn iteration_cap_reports_not_converged() {
        let cfg = SimplexConfig {
            max_iter: 3,
            ..SimplexConfig::default()
        };
        let r = minimize_2d(|p: [f64; 2]| p[0] * p[0] + p[1] * p[1], [5.0, 5.0], &cfg).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
    }
}
