//! Heston dynamics: parameters, CIR moments, the variance tree, path simulation
//! and the variance-swap price used as the second hedging asset.

mod paths;
mod rng;
mod tree;

pub(crate) use paths::simulate_from;
pub use paths::{simulate_paths, MarketState, PathBundle, TradingSlice};
pub use rng::{stream_rng, Purpose, StreamId};
pub use tree::{build_variance_tree, Transition, VarianceTree};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Heston model constants. `mu` drives simulation, `r` discounting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonParams<F> {
    pub s0: F,
    pub v0: F,
    pub mu: F,
    pub r: F,
    pub alpha: F,
    pub b: F,
    pub sigma: F,
    pub rho_bw: F,
    pub maturity: F,
}

impl<F: Real> HestonParams<F> {
    /// Reference market constants with `r = mu = rate`.
    pub fn reference(rate: F) -> Self {
        Self {
            s0: F::lit(100.0),
            v0: F::lit(0.04),
            mu: rate,
            r: rate,
            alpha: F::one(),
            b: F::lit(0.04),
            sigma: F::lit(2.0),
            rho_bw: F::lit(-0.7),
            maturity: F::one(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        let all = [
            self.s0,
            self.v0,
            self.mu,
            self.r,
            self.alpha,
            self.b,
            self.sigma,
            self.rho_bw,
            self.maturity,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return bad("non-finite Heston parameter");
        }
        if self.s0 <= F::zero() {
            return bad("s0 must be positive");
        }
        if self.v0 < F::zero() {
            return bad("v0 must be non-negative");
        }
        if self.alpha <= F::zero() {
            return bad("alpha must be positive");
        }
        if self.b < F::zero() {
            return bad("b must be non-negative");
        }
        if self.sigma <= F::zero() {
            return bad("sigma must be positive");
        }
        if self.rho_bw.abs() > F::one() {
            return bad("rho_bw must lie in [-1, 1]");
        }
        if self.maturity <= F::zero() {
            return bad("T must be positive");
        }
        Ok(())
    }
}

/// Exact CIR conditional mean and variance of `V_{t+dt}` given `V_t = v`.
pub fn cir_conditional_moments<F: Real>(v: F, dt: F, params: &HestonParams<F>) -> Result<(F, F)> {
    if !(v >= F::zero()) {
        return Err(Error::InvalidParameter(format!("negative variance {v}")));
    }
    if !(dt > F::zero()) {
        return Err(Error::InvalidParameter(format!("non-positive step {dt}")));
    }
    Ok(cir_moments_unchecked(v, dt, params))
}

#[inline]
pub(crate) fn cir_moments_unchecked<F: Real>(v: F, dt: F, p: &HestonParams<F>) -> (F, F) {
    let e = (-p.alpha * dt).exp();
    let one_minus = -(-p.alpha * dt).exp_m1();
    let s2 = p.sigma * p.sigma;
    let mean = v * e + p.b * one_minus;
    let var = v * s2 / p.alpha * e * one_minus
        + p.b * s2 / (F::lit(2.0) * p.alpha) * one_minus * one_minus;
    (mean, var)
}

fn check_time<F: Real>(t: F, p: &HestonParams<F>) -> Result<()> {
    if !(t >= F::zero() && t <= p.maturity) {
        return Err(Error::TimeOutOfRange(t.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(())
}

/// Expected integrated variance from `t` to maturity, `L(t, v)`.
pub fn variance_swap_rate<F: Real>(t: F, v: F, params: &HestonParams<F>) -> Result<F> {
    check_time(t, params)?;
    if !(v >= F::zero()) {
        return Err(Error::InvalidParameter(format!("negative variance {v}")));
    }
    Ok(swap_rate_unchecked(t, v, params))
}

#[inline]
pub(crate) fn swap_rate_unchecked<F: Real>(t: F, v: F, p: &HestonParams<F>) -> F {
    let tau = p.maturity - t;
    (v - p.b) / p.alpha * -(-p.alpha * tau).exp_m1() + p.b * tau
}

/// Price at `t` of the idealised variance swap paying the integrated variance at maturity.
pub fn variance_swap_price<F: Real>(t: F, i: F, v: F, params: &HestonParams<F>) -> Result<F> {
    check_time(t, params)?;
    if !(v >= F::zero()) || !(i >= F::zero()) {
        return Err(Error::InvalidParameter(format!("negative state (i={i}, v={v})")));
    }
    Ok(swap_price_unchecked(t, i, v, params))
}

#[inline]
pub(crate) fn swap_price_unchecked<F: Real>(t: F, i: F, v: F, p: &HestonParams<F>) -> F {
    (-p.r * (p.maturity - t)).exp() * (i + swap_rate_unchecked(t, v, p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> HestonParams<f64> {
        HestonParams::reference(0.0)
    }

    #[test]
    fn mean_fixed_point_at_long_run_level() {
        let (m, _) = cir_conditional_moments(0.04, 1.0 / 16.0, &p()).unwrap();
        assert!((m - 0.04).abs() < 1e-15);
    }

    #[test]
    fn variance_from_zero() {
        let dt: f64 = 1.0 / 16.0;
        let (_, var) = cir_conditional_moments(0.0, dt, &p()).unwrap();
        let om = 1.0 - (-dt).exp();
        assert!((var - 0.04 * 4.0 / 2.0 * om * om).abs() < 1e-16);
    }

    #[test]
    fn small_step_limit() {
        let (m, var) = cir_conditional_moments(0.09, 1e-12, &p()).unwrap();
        assert!((m - 0.09).abs() < 1e-12);
        assert!(var < 1e-11);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(cir_conditional_moments(-0.01, 0.1, &p()).is_err());
        assert!(cir_conditional_moments(0.01, 0.0, &p()).is_err());
        assert!(variance_swap_rate(1.5, 0.04, &p()).is_err());
        assert!(variance_swap_rate(-0.1, 0.04, &p()).is_err());
    }

    #[test]
    fn swap_rate_cases() {
        assert_eq!(variance_swap_rate(1.0, 0.3, &p()).unwrap(), 0.0);
        assert!((variance_swap_rate(0.0, 0.04, &p()).unwrap() - 0.04).abs() < 1e-16);
        let want = 0.05 * (1.0 - (-1.0f64).exp()) + 0.04;
        assert!((variance_swap_rate(0.0, 0.09, &p()).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn swap_price_cases() {
        assert_eq!(variance_swap_price(1.0, 0.037, 0.2, &p()).unwrap(), 0.037);
        assert!((variance_swap_price(0.0, 0.0, 0.04, &p()).unwrap() - 0.04).abs() < 1e-16);
        let q = HestonParams::reference(0.1);
        let want = 0.04 * (-0.1f64).exp();
        assert!((variance_swap_price(0.0, 0.0, 0.04, &q).unwrap() - want).abs() < 1e-16);
    }

    #[test]
    fn validation() {
        assert!(p().validate().is_ok());
        let mut q = p();
        q.rho_bw = -1.2;
        assert!(q.validate().is_err());
        q = p();
        q.sigma = 0.0;
        assert!(q.validate().is_err());
    }

    #[test]
    fn generic_over_f32() {
        let q = HestonParams::<f32>::reference(0.0);
        let (m, _) = cir_conditional_moments(0.04f32, 0.0625, &q).unwrap();
        assert!((m - 0.04).abs() < 1e-7);
    }
}
