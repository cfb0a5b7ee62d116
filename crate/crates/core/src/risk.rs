//! Empirical loss functionals on simulated P&L samples.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RiskSpec<F> {
    /// Expected loss over the worst `tail_fraction` of outcomes.
    Cvar { tail_fraction: F },
    /// Mean squared hedging error with the premium chosen optimally.
    Mse,
}

impl<F: Real> RiskSpec<F> {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RiskSpec::Cvar { tail_fraction: q } if !(q > F::zero() && q <= F::one()) => Err(
                Error::InvalidParameter(format!("tail fraction {q} outside (0, 1]")),
            ),
            _ => Ok(()),
        }
    }
}

/// Number of samples in the tail: ⌈qM⌉, guarded against `q·M` rounding just above an integer.
pub fn tail_count<F: Real>(q: F, m: usize) -> usize {
    let x = q.to_f64().unwrap_or(1.0) * m as f64;
    let k = (x * (1.0 - 1e-12)).ceil() as usize;
    k.clamp(1, m)
}

/// Negated mean of the `k` smallest entries; reorders `buf`.
///
/// The tail is summed in ascending order so the estimator is exactly monotone.
pub(crate) fn cvar_in_place<F: Real>(buf: &mut [F], k: usize) -> F {
    let cmp = |a: &F, b: &F| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal);
    if k < buf.len() {
        buf.select_nth_unstable_by(k - 1, cmp);
    }
    let tail = &mut buf[..k];
    tail.sort_unstable_by(cmp);
    let mut s = F::zero();
    for &x in tail.iter() {
        s = s + x;
    }
    -(s / F::from_usize_lossy(k))
}

pub fn empirical_cvar<F: Real>(pl_samples: &[F], q: F) -> Result<F> {
    if pl_samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    RiskSpec::Cvar { tail_fraction: q }.validate()?;
    let mut buf = pl_samples.to_vec();
    Ok(cvar_in_place(&mut buf, tail_count(q, pl_samples.len())))
}

pub fn sample_mean<F: Real>(x: &[F]) -> F {
    let mut s = F::zero();
    for &v in x {
        s = s + v;
    }
    s / F::from_usize_lossy(x.len())
}

/// Variance normalised by the sample count.
pub fn empirical_variance<F: Real>(pl_samples: &[F]) -> Result<F> {
    if pl_samples.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: pl_samples.len(),
        });
    }
    let mean = sample_mean(pl_samples);
    let mut s = F::zero();
    for &v in pl_samples {
        let d = v - mean;
        s = s + d * d;
    }
    Ok(s / F::from_usize_lossy(pl_samples.len()))
}

/// Premium that zeroes the mean terminal P&L, discounted to time 0.
pub fn optimal_premium<F: Real>(pl_samples_without_premium: &[F], r: F, maturity: F) -> Result<F> {
    if pl_samples_without_premium.is_empty() {
        return Err(Error::EmptySamples);
    }
    Ok(-(-r * maturity).exp() * sample_mean(pl_samples_without_premium))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cvar_examples() {
        let pl: [f64; 5] = [-0.7493, -0.7177, -0.6918, -0.7493, -0.9533];
        assert!((empirical_cvar(&pl, 0.4).unwrap() - 0.8513).abs() < 1e-12);
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(empirical_cvar(&x, 0.4).unwrap(), -1.5);
        assert_eq!(empirical_cvar(&x, 1.0).unwrap(), -3.0);
        assert!(empirical_cvar::<f64>(&[], 0.4).is_err());
        assert!(empirical_cvar(&x, 0.0).is_err());
    }

    #[test]
    fn tail_counts() {
        assert_eq!(tail_count(0.4, 25), 10);
        assert_eq!(tail_count(0.4, 5), 2);
        assert_eq!(tail_count(0.05, 10_000), 500);
        assert_eq!(tail_count(0.05, 10_001), 501);
        assert_eq!(tail_count(1e-9, 10), 1);
    }

    #[test]
    fn variance_examples() {
        assert_eq!(empirical_variance(&[3.0, 3.0, 3.0]).unwrap(), 0.0);
        assert_eq!(empirical_variance(&[0.0, 2.0]).unwrap(), 1.0);
        assert!(empirical_variance(&[1.0]).is_err());
    }

    #[test]
    fn premium_examples() {
        assert_eq!(optimal_premium(&[-2.0, -2.0], 0.0, 1.0).unwrap(), 2.0);
        let p = optimal_premium(&[-2.0, -2.0], 0.1, 1.0).unwrap();
        assert!((p - 2.0 * (-0.1f64).exp()).abs() < 1e-15);
    }
}
