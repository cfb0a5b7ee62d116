use crate::accounting::{CostSpec, Exercise, OptionSpec, Payoff};
use crate::error::{Error, Result};
use crate::model::HestonParams;
use crate::risk::RiskSpec;
use crate::scalar::Real;
use crate::simplex::SimplexConfig;

/// Everything a backward hedging run depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig<F> {
    pub params: HestonParams<F>,
    pub option: OptionSpec<F>,
    pub risk: RiskSpec<F>,
    pub cost: CostSpec<F>,
    /// Trading dates N.
    pub n_trading: usize,
    /// Simulation steps N_T, a multiple of N.
    pub n_sim_steps: usize,
    /// Paths per node in the backward pass.
    pub m_backward: usize,
    /// Paths for the grid-bounds pass.
    pub m_quantile: usize,
    /// Paths for out-of-sample pricing.
    pub m_out_of_sample: usize,
    pub n_s: usize,
    pub n_i: usize,
    pub n_delta1: usize,
    pub n_delta2: usize,
    pub quantile_lo: F,
    pub quantile_hi: F,
    pub seed: u64,
    /// Unscaled tolerances; `f_tol` is multiplied by s₀ (CVaR) or s₀² (MSE).
    pub simplex: SimplexConfig<F>,
}

impl<F: Real> EngineConfig<F> {
    /// At-the-money put on the reference market with the default grid settings.
    pub fn reference(rate: F, risk: RiskSpec<F>, exercise: Exercise, n_trading: usize, m_backward: usize) -> Self {
        Self {
            params: HestonParams::reference(rate),
            option: OptionSpec {
                payoff: Payoff::Put { strike: F::lit(100.0) },
                exercise,
            },
            risk,
            cost: CostSpec::uniform(F::zero()),
            n_trading,
            n_sim_steps: 16,
            m_backward,
            m_quantile: 100_000,
            m_out_of_sample: 100_000,
            n_s: 15,
            n_i: 2,
            n_delta1: 3,
            n_delta2: 3,
            quantile_lo: F::lit(0.001),
            quantile_hi: F::lit(0.999),
            seed: 1,
            simplex: SimplexConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.option.validate()?;
        self.risk.validate()?;
        self.cost.validate()?;
        self.simplex.validate()?;
        let counts = [
            self.n_trading,
            self.n_sim_steps,
            self.m_backward,
            self.m_quantile,
            self.m_out_of_sample,
            self.n_s,
            self.n_i,
            self.n_delta1,
            self.n_delta2,
        ];
        if counts.contains(&0) {
            return Err(Error::InvalidParameter("all counts must be at least 1".into()));
        }
        if self.n_sim_steps % self.n_trading != 0 {
            return Err(Error::InvalidParameter(format!(
                "N_T = {} is not a multiple of N = {}",
                self.n_sim_steps, self.n_trading
            )));
        }
        if matches!(self.risk, RiskSpec::Mse) && self.m_backward < 2 {
            return Err(Error::InvalidParameter("variance objective needs M >= 2".into()));
        }
        if !(self.quantile_lo >= F::zero() && self.quantile_lo < self.quantile_hi && self.quantile_hi <= F::one()) {
            return Err(Error::InvalidParameter("quantile bounds must satisfy 0 <= lo < hi <= 1".into()));
        }
        Ok(())
    }

    pub fn frictionless(&self) -> Self {
        Self {
            cost: CostSpec::uniform(F::zero()),
            ..self.clone()
        }
    }

    pub fn is_american(&self) -> bool {
        self.option.exercise == Exercise::American
    }

    /// Simplex settings with the objective tolerance in the objective's units.
    pub fn scaled_simplex(&self) -> SimplexConfig<F> {
        let s0 = self.params.s0;
        let scale = match self.risk {
            RiskSpec::Cvar { .. } => s0,
            RiskSpec::Mse => s0 * s0,
        };
        SimplexConfig {
            f_tol: self.simplex.f_tol * scale,
            ..self.simplex
        }
    }

    pub(crate) fn timeline(&self) -> Timeline<F> {
        Timeline::new(&self.params, self.n_trading)
    }
}

/// Trading-date times and the capitalisation factors e^{r(T - t_k)}.
#[derive(Debug, Clone)]
pub(crate) struct Timeline<F> {
    pub t: Vec<F>,
    pub cap: Vec<F>,
    pub growth: F,
}

impl<F: Real> Timeline<F> {
    pub fn new(p: &HestonParams<F>, n: usize) -> Self {
        let nn = F::from_usize_lossy(n);
        let t: Vec<F> = (0..=n).map(|k| p.maturity * F::from_usize_lossy(k) / nn).collect();
        let cap = t.iter().map(|&tk| (p.r * (p.maturity - tk)).exp()).collect();
        Self {
            t,
            cap,
            growth: (p.r * p.maturity / nn).exp(),
        }
    }
}
