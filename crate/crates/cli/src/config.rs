//! Flat key-value run configuration and the resolved parameter set recorded in manifests.

use std::path::Path;

use anyhow::{bail, Context, Result};
use bhedge::accounting::{CostSpec, Exercise, OptionSpec, Payoff};
use bhedge::model::HestonParams;
use bhedge::risk::RiskSpec;
use bhedge::simplex::SimplexConfig;
use bhedge::Config;
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// 10⁵ paths for grid bounds and out-of-sample pricing.
    Desk,
    /// 10⁶ paths for grid bounds and out-of-sample pricing.
    Full,
}

impl Profile {
    fn pass_paths(self) -> usize {
        match self {
            Profile::Desk => 100_000,
            Profile::Full => 1_000_000,
        }
    }
}

/// Every key is optional; missing keys take the reference values.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub s0: Option<f64>,
    pub r: Option<f64>,
    pub mu: Option<f64>,
    pub v0: Option<f64>,
    pub alpha: Option<f64>,
    pub b: Option<f64>,
    pub sigma: Option<f64>,
    pub rho_bw: Option<f64>,
    #[serde(rename = "T")]
    pub maturity: Option<f64>,
    #[serde(rename = "K")]
    pub strike: Option<f64>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[serde(rename = "N_T")]
    pub n_t: Option<usize>,
    #[serde(rename = "M")]
    pub m: Option<usize>,
    #[serde(rename = "M0")]
    pub m0: Option<usize>,
    #[serde(rename = "M1")]
    pub m1: Option<usize>,
    #[serde(rename = "N_S")]
    pub n_s: Option<usize>,
    #[serde(rename = "N_I")]
    pub n_i: Option<usize>,
    #[serde(rename = "N_delta1")]
    pub n_delta1: Option<usize>,
    #[serde(rename = "N_delta2")]
    pub n_delta2: Option<usize>,
    pub epsilon: Option<f64>,
    /// Cost rate on the variance swap when it differs from `epsilon`.
    pub epsilon_swap: Option<f64>,
    pub risk: Option<String>,
    pub tail_fraction: Option<f64>,
    pub exercise: Option<String>,
    /// `put`, `call` or `spot`.
    pub payoff: Option<String>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Keys set in `over` replace those in `self`.
    pub fn merged(&self, over: &RunConfig) -> RunConfig {
        macro_rules! pick {
            ($($f:ident),*) => { RunConfig { $($f: over.$f.clone().or_else(|| self.$f.clone()),)* } };
        }
        pick!(
            s0, r, mu, v0, alpha, b, sigma, rho_bw, maturity, strike, n, n_t, m, m0, m1, n_s, n_i, n_delta1,
            n_delta2, epsilon, epsilon_swap, risk, tail_fraction, exercise, payoff, seed
        )
    }

    pub fn resolve(&self, profile: Profile) -> Result<Resolved> {
        let r = self.r.unwrap_or(0.0);
        let pass = profile.pass_paths();
        let risk = self.risk.clone().unwrap_or_else(|| "mse".into()).to_lowercase();
        if risk != "mse" && risk != "cvar" {
            bail!("risk must be `mse` or `cvar`, got `{risk}`");
        }
        let exercise = self.exercise.clone().unwrap_or_else(|| "european".into()).to_lowercase();
        if exercise != "european" && exercise != "american" {
            bail!("exercise must be `european` or `american`, got `{exercise}`");
        }
        let payoff = self.payoff.clone().unwrap_or_else(|| "put".into()).to_lowercase();
        if !["put", "call", "spot"].contains(&payoff.as_str()) {
            bail!("payoff must be `put`, `call` or `spot`, got `{payoff}`");
        }
        Ok(Resolved {
            profile,
            s0: self.s0.unwrap_or(100.0),
            r,
            mu: self.mu.unwrap_or(r),
            v0: self.v0.unwrap_or(0.04),
            alpha: self.alpha.unwrap_or(1.0),
            b: self.b.unwrap_or(0.04),
            sigma: self.sigma.unwrap_or(2.0),
            rho_bw: self.rho_bw.unwrap_or(-0.7),
            maturity: self.maturity.unwrap_or(1.0),
            strike: self.strike.unwrap_or(100.0),
            n: self.n.unwrap_or(8),
            n_t: self.n_t.unwrap_or(16),
            m: self.m.unwrap_or(10_000),
            m0: self.m0.unwrap_or(pass),
            m1: self.m1.unwrap_or(pass),
            n_s: self.n_s.unwrap_or(15),
            n_i: self.n_i.unwrap_or(2),
            n_delta1: self.n_delta1.unwrap_or(3),
            n_delta2: self.n_delta2.unwrap_or(3),
            epsilon: self.epsilon.unwrap_or(0.0),
            epsilon_swap: self.epsilon_swap,
            risk,
            tail_fraction: self.tail_fraction.unwrap_or(0.05),
            exercise,
            payoff,
            seed: self.seed.unwrap_or(1),
        })
    }
}

/// Fully specified run parameters, serialised under the same keys as the input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub profile: Profile,
    pub s0: f64,
    pub r: f64,
    pub mu: f64,
    pub v0: f64,
    pub alpha: f64,
    pub b: f64,
    pub sigma: f64,
    pub rho_bw: f64,
    #[serde(rename = "T")]
    pub maturity: f64,
    #[serde(rename = "K")]
    pub strike: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "N_T")]
    pub n_t: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "M0")]
    pub m0: usize,
    #[serde(rename = "M1")]
    pub m1: usize,
    #[serde(rename = "N_S")]
    pub n_s: usize,
    #[serde(rename = "N_I")]
    pub n_i: usize,
    #[serde(rename = "N_delta1")]
    pub n_delta1: usize,
    #[serde(rename = "N_delta2")]
    pub n_delta2: usize,
    pub epsilon: f64,
    pub epsilon_swap: Option<f64>,
    pub risk: String,
    pub tail_fraction: f64,
    pub exercise: String,
    pub payoff: String,
    pub seed: u64,
}

impl Resolved {
    pub fn engine(&self) -> Result<Config> {
        let payoff = match self.payoff.as_str() {
            "call" => Payoff::Call { strike: self.strike },
            "spot" => Payoff::Spot,
            _ => Payoff::Put { strike: self.strike },
        };
        let cfg = Config {
            params: HestonParams {
                s0: self.s0,
                v0: self.v0,
                mu: self.mu,
                r: self.r,
                alpha: self.alpha,
                b: self.b,
                sigma: self.sigma,
                rho_bw: self.rho_bw,
                maturity: self.maturity,
            },
            option: OptionSpec {
                payoff,
                exercise: if self.exercise == "american" {
                    Exercise::American
                } else {
                    Exercise::European
                },
            },
            risk: if self.risk == "cvar" {
                RiskSpec::Cvar {
                    tail_fraction: self.tail_fraction,
                }
            } else {
                RiskSpec::Mse
            },
            cost: CostSpec {
                epsilon: self.epsilon,
                swap_epsilon: self.epsilon_swap,
            },
            n_trading: self.n,
            n_sim_steps: self.n_t,
            m_backward: self.m,
            m_quantile: self.m0,
            m_out_of_sample: self.m1,
            n_s: self.n_s,
            n_i: self.n_i,
            n_delta1: self.n_delta1,
            n_delta2: self.n_delta2,
            quantile_lo: 0.001,
            quantile_hi: 0.999,
            seed: self.seed,
            simplex: SimplexConfig::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_to_reference() {
        let r = RunConfig::default().resolve(Profile::Desk).unwrap();
        let cfg = r.engine().unwrap();
        let want = Config::reference(0.0, RiskSpec::Mse, Exercise::European, 8, 10_000);
        assert_eq!(cfg, want);
    }

    #[test]
    fn keys_parse_and_merge() {
        let a: RunConfig = toml::from_str("N = 4\nr = 0.1\nrisk = \"cvar\"\nN_delta1 = 11").unwrap();
        let b: RunConfig = toml::from_str("N = 16\nepsilon = 0.01").unwrap();
        let m = a.merged(&b).resolve(Profile::Full).unwrap();
        assert_eq!((m.n, m.n_delta1, m.mu, m.m1), (16, 11, 0.1, 1_000_000));
        assert_eq!(m.epsilon, 0.01);
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
        assert!(RunConfig {
            risk: Some("var".into()),
            ..Default::default()
        }
        .resolve(Profile::Desk)
        .is_err());
    }
}
