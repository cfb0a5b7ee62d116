//! Payoffs, trading gains, transaction costs and terminal P&L, capitalised to maturity.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Payoff<F> {
    Put { strike: F },
    Call { strike: F },
    Strangle { call_strike: F, put_strike: F },
    /// Pays the spot itself.
    Spot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exercise {
    European,
    American,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionSpec<F> {
    pub payoff: Payoff<F>,
    pub exercise: Exercise,
}

impl<F: Real> OptionSpec<F> {
    pub fn european_put(strike: F) -> Self {
        Self {
            payoff: Payoff::Put { strike },
            exercise: Exercise::European,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.payoff {
            Payoff::Put { strike } | Payoff::Call { strike } => strike > F::zero(),
            Payoff::Strangle {
                call_strike,
                put_strike,
            } => call_strike > F::zero() && put_strike > F::zero(),
            Payoff::Spot => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter("strikes must be positive".into()))
        }
    }

    #[inline]
    pub fn payoff(&self, s: F) -> F {
        payoff(&self.payoff, s)
    }
}

#[inline]
pub fn payoff<F: Real>(kind: &Payoff<F>, s: F) -> F {
    let z = F::zero();
    match *kind {
        Payoff::Put { strike } => (strike - s).max(z),
        Payoff::Call { strike } => (s - strike).max(z),
        Payoff::Strangle {
            call_strike,
            put_strike,
        } => (s - call_strike).max(z) + (put_strike - s).max(z),
        Payoff::Spot => s,
    }
}

/// Proportional cost per currency unit traded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostSpec<F> {
    pub epsilon: F,
    /// Separate rate for the variance swap; `epsilon` applies when absent.
    pub swap_epsilon: Option<F>,
}

impl<F: Real> CostSpec<F> {
    pub fn uniform(epsilon: F) -> Self {
        Self {
            epsilon,
            swap_epsilon: None,
        }
    }

    /// Rates for (spot, variance swap).
    pub fn rates(&self) -> [F; 2] {
        [self.epsilon, self.swap_epsilon.unwrap_or(self.epsilon)]
    }

    pub fn is_free(&self) -> bool {
        self.rates().iter().all(|&e| e == F::zero())
    }

    pub fn validate(&self) -> Result<()> {
        if self.rates().iter().all(|&e| e >= F::zero() && e.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidParameter("cost rates must be non-negative".into()))
        }
    }
}

/// Holdings `(δ¹_k, δ²_k)` for `k = 0..N-1`; holdings before 0 and at `N` are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct HedgeSequence<F> {
    pub deltas: Vec<[F; 2]>,
}

impl<F: Real> HedgeSequence<F> {
    /// Holding at date `k` with the empty-portfolio convention at both ends.
    #[inline]
    pub fn at(&self, k: isize) -> [F; 2] {
        if k < 0 || k as usize >= self.deltas.len() {
            [F::zero(); 2]
        } else {
            self.deltas[k as usize]
        }
    }
}

/// Prices of both hedging assets at trading dates `0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePath<F> {
    pub s1: Vec<F>,
    pub s2: Vec<F>,
}

impl<F: Real> PricePath<F> {
    fn n(&self) -> usize {
        self.s1.len() - 1
    }

    fn time(&self, k: usize, maturity: F) -> F {
        maturity * F::from_usize_lossy(k) / F::from_usize_lossy(self.n())
    }
}

fn check_range<F: Real>(path: &PricePath<F>, deltas: &HedgeSequence<F>, n1: usize, n2: usize) -> Result<()> {
    if path.s1.len() < 2 || path.s1.len() != path.s2.len() {
        return Err(Error::InvalidParameter("price path needs matching legs with N >= 1".into()));
    }
    if deltas.deltas.len() != path.n() {
        return Err(Error::InvalidParameter(format!(
            "{} holdings for {} trading dates",
            deltas.deltas.len(),
            path.n()
        )));
    }
    if n1 > n2 || n2 > path.n() {
        return Err(Error::IndexOutOfRange(format!("[{n1}, {n2}] with N = {}", path.n())));
    }
    Ok(())
}

/// Gains of the strategy over `[n1, n2]`, each period capitalised to maturity.
pub fn trading_gain<F: Real>(
    path: &PricePath<F>,
    deltas: &HedgeSequence<F>,
    n1: usize,
    n2: usize,
    r: F,
    maturity: F,
) -> Result<F> {
    check_range(path, deltas, n1, n2)?;
    let dt = maturity / F::from_usize_lossy(path.n());
    let growth = (r * dt).exp();
    let mut g = F::zero();
    for k in n1..n2 {
        let d = deltas.at(k as isize);
        let cap = (r * (maturity - path.time(k + 1, maturity))).exp();
        g = g + (d[0] * (path.s1[k + 1] - path.s1[k] * growth)
            + d[1] * (path.s2[k + 1] - path.s2[k] * growth))
            * cap;
    }
    Ok(g)
}

/// Proportional rebalancing costs at dates `n1..=n2`, capitalised to maturity.
pub fn transaction_cost<F: Real>(
    path: &PricePath<F>,
    deltas: &HedgeSequence<F>,
    n1: usize,
    n2: usize,
    cost: &CostSpec<F>,
    r: F,
    maturity: F,
) -> Result<F> {
    check_range(path, deltas, n1, n2)?;
    let [e1, e2] = cost.rates();
    let mut c = F::zero();
    for k in n1..=n2 {
        let d = deltas.at(k as isize);
        let prev = deltas.at(k as isize - 1);
        let cap = (r * (maturity - path.time(k, maturity))).exp();
        c = c + (e1 * path.s1[k] * (d[0] - prev[0]).abs() + e2 * path.s2[k] * (d[1] - prev[1]).abs()) * cap;
    }
    Ok(c)
}

/// Terminal portfolio value of the hedger.
#[inline]
pub fn terminal_pl<F: Real>(payoff_value: F, p0: F, gain: F, cost: F, r: F, maturity: F) -> F {
    -payoff_value + p0 * (r * maturity).exp() + gain - cost
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strangle() -> Payoff<f64> {
        Payoff::Strangle {
            call_strike: 0.8,
            put_strike: 1.3,
        }
    }

    #[test]
    fn payoffs() {
        assert!((payoff(&strangle(), 2.2255) - 1.4255).abs() < 1e-12);
        assert!((payoff(&strangle(), 1.0) - 0.5).abs() < 1e-12);
        assert!((payoff(&strangle(), 0.8) - 0.5).abs() < 1e-12);
        assert_eq!(payoff(&Payoff::Put { strike: 100.0 }, 90.0), 10.0);
        assert_eq!(payoff(&Payoff::Call { strike: 100.0 }, 90.0), 0.0);
        assert_eq!(payoff(&Payoff::Spot, 90.0), 90.0);
    }

    fn flat(n: usize, d: [f64; 2]) -> HedgeSequence<f64> {
        HedgeSequence { deltas: vec![d; n] }
    }

    #[test]
    fn gain_cases() {
        let path = PricePath {
            s1: vec![100.0, 105.0, 103.0],
            s2: vec![0.04, 0.03, 0.02],
        };
        let d = flat(2, [1.0, 0.0]);
        assert_eq!(trading_gain(&path, &d, 0, 2, 0.0, 1.0).unwrap(), 3.0);
        assert_eq!(trading_gain(&path, &d, 1, 1, 0.0, 1.0).unwrap(), 0.0);
        assert!(trading_gain(&path, &d, 1, 3, 0.0, 1.0).is_err());
        assert!(trading_gain(&path, &d, 2, 1, 0.0, 1.0).is_err());
    }

    #[test]
    fn cost_cases() {
        let path = PricePath {
            s1: vec![100.0, 105.0, 103.0],
            s2: vec![0.04, 0.03, 0.02],
        };
        let d = flat(2, [1.0, 0.0]);
        let zero = CostSpec::uniform(0.0);
        assert_eq!(transaction_cost(&path, &d, 0, 2, &zero, 0.0, 1.0).unwrap(), 0.0);
        let one = CostSpec::uniform(0.01);
        let c = transaction_cost(&path, &d, 0, 0, &one, 0.0, 1.0).unwrap();
        assert!((c - 1.0).abs() < 1e-12);
        let c = transaction_cost(&path, &d, 0, 2, &one, 0.0, 1.0).unwrap();
        assert!((c - 0.01 * (100.0 + 103.0)).abs() < 1e-12);
    }

    #[test]
    fn terminal_value_cases() {
        assert_eq!(terminal_pl(0.0, 1.0, 0.0, 0.0, 0.0, 1.0), 1.0);
        assert!((terminal_pl(0.5f64, 0.0, -0.2493, 0.0, 0.0, 1.0) + 0.7493).abs() < 1e-12);
    }
}
