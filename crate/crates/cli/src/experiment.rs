//! Experiment matrix: one solver run per (N, M, ε) cell and replication.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use anyhow::{Context, Result};
use bhedge::engine::{solve, solve_with_prior};
use bhedge::{Config, Outcome};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Profile, Resolved, RunConfig};

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Matrix {
    #[serde(rename = "N", default)]
    pub n: Vec<usize>,
    #[serde(rename = "M", default)]
    pub m: Vec<usize>,
    #[serde(default)]
    pub epsilon: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default)]
    pub base: RunConfig,
    pub matrix: Matrix,
}

fn default_name() -> String {
    "experiment".into()
}

fn one() -> usize {
    1
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// European MSE put over N ∈ {4, 8, 16}, M = 10³, without costs.
    pub fn reference() -> Self {
        Self {
            name: default_name(),
            replications: 1,
            base: RunConfig::default(),
            matrix: Matrix {
                n: vec![4, 8, 16],
                m: vec![1000],
                epsilon: vec![0.0],
            },
        }
    }

    /// Cells in (replication, M, N, ε) order; ε = 0 comes first within an (N, M) pair.
    pub fn cells(&self, profile: Profile, seed: Option<u64>) -> Result<Vec<Resolved>> {
        let mut eps = self.matrix.epsilon.clone();
        eps.sort_by(|a, b| a.total_cmp(b));
        let mut out = Vec::new();
        for rep in 0..self.replications {
            for &m in &self.matrix.m {
                for &n in &self.matrix.n {
                    for &e in &eps {
                        let over = RunConfig {
                            n: Some(n),
                            m: Some(m),
                            epsilon: Some(e),
                            seed: seed.or(self.base.seed).map(|s| s + rep as u64).or(Some(1 + rep as u64)),
                            ..Default::default()
                        };
                        out.push(self.base.merged(&over).resolve(profile)?);
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CellRow {
    pub scenario: String,
    pub replication: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub price: Option<f64>,
    pub std_error: Option<f64>,
    pub seconds: f64,
    pub convergence_rate: Option<f64>,
    pub status: String,
}

/// Runs every cell; a failing cell is recorded and the run continues.
pub fn run_experiment(spec: &ExperimentSpec, profile: Profile, seed: Option<u64>, parallel: bool) -> Result<Vec<CellRow>> {
    let cells = spec.cells(profile, seed)?;
    let per_rep = cells.len() / spec.replications.max(1);
    let priors: Mutex<Vec<(Config, Outcome)>> = Mutex::new(Vec::new());
    let run_cell = |(idx, cell): (usize, &Resolved)| -> CellRow {
        let clock = Instant::now();
        let result = cell.engine().and_then(|cfg| {
            let base = cfg.frictionless();
            let cached = priors.lock().unwrap().iter().find(|(c, _)| *c == base).map(|(_, o)| o.clone());
            let out = match cached {
                Some(prior) if !cfg.cost.is_free() => solve_with_prior(&cfg, &prior)?,
                _ => solve(&cfg)?,
            };
            if cfg.cost.is_free() {
                priors.lock().unwrap().push((cfg, out.clone()));
            }
            Ok(out)
        });
        let mut row = CellRow {
            scenario: spec.name.clone(),
            replication: if per_rep == 0 { 0 } else { idx / per_rep },
            n: cell.n,
            m: cell.m,
            epsilon: cell.epsilon,
            seed: cell.seed,
            price: None,
            std_error: None,
            seconds: 0.0,
            convergence_rate: None,
            status: "ok".into(),
        };
        match result {
            Ok(o) => {
                row.price = Some(o.price);
                row.std_error = Some(o.diagnostics.out_of_sample.std_error);
                row.convergence_rate = Some(o.diagnostics.convergence_rate());
            }
            Err(e) => row.status = format!("error: {e}"),
        }
        row.seconds = clock.elapsed().as_secs_f64();
        row
    };
    let rows = if parallel {
        cells.par_iter().enumerate().map(run_cell).collect()
    } else {
        cells.iter().enumerate().map(run_cell).collect()
    };
    Ok(rows)
}

pub fn rows_csv(rows: &[CellRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record([
        "scenario",
        "replication",
        "N",
        "M",
        "epsilon",
        "seed",
        "price",
        "std_error",
        "seconds",
        "convergence_rate",
        "status",
    ])?;
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Prices with wall-clock seconds in parentheses: one block per ε, rows M, columns N.
pub fn rows_table(rows: &[CellRow]) -> String {
    let eps: Vec<f64> = {
        let mut v: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v.dedup();
        v
    };
    let ns: BTreeSet<usize> = rows.iter().map(|r| r.n).collect();
    let ms: BTreeSet<usize> = rows.iter().map(|r| r.m).collect();
    let reps: BTreeSet<usize> = rows.iter().map(|r| r.replication).collect();
    let mut out = String::new();
    for rep in reps {
        for &e in &eps {
            let _ = writeln!(out, "replication {rep}, epsilon = {e}");
            let _ = write!(out, "{:>10}", "M \\ N");
            for n in &ns {
                let _ = write!(out, "{n:>20}");
            }
            out.push('\n');
            for &m in &ms {
                let _ = write!(out, "{m:>10}");
                for &n in &ns {
                    let cell = rows
                        .iter()
                        .find(|r| r.replication == rep && r.epsilon == e && r.n == n && r.m == m);
                    let text = match cell {
                        Some(CellRow { price: Some(p), seconds, .. }) => format!("{p:.4} ({seconds:.0}s)"),
                        Some(_) => "failed".into(),
                        None => "-".into(),
                    };
                    let _ = write!(out, "{text:>20}");
                }
                out.push('\n');
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_order_and_seeds() {
        let spec: ExperimentSpec = toml::from_str(
            "replications = 2\n[matrix]\nN = [4, 8]\nM = [100]\nepsilon = [0.01, 0.0]",
        )
        .unwrap();
        let cells = spec.cells(Profile::Desk, Some(7)).unwrap();
        assert_eq!(cells.len(), 8);
        assert_eq!((cells[0].n, cells[0].epsilon, cells[0].seed), (4, 0.0, 7));
        assert_eq!((cells[1].n, cells[1].epsilon), (4, 0.01));
        assert_eq!(cells[4].seed, 8);
    }

    #[test]
    fn empty_matrix_gives_header_only() {
        let spec: ExperimentSpec = toml::from_str("[matrix]").unwrap();
        let rows = run_experiment(&spec, Profile::Desk, None, false).unwrap();
        assert!(rows.is_empty());
        let csv = rows_csv(&rows).unwrap();
        assert_eq!(csv.lines().count(), 1);
        assert!(csv.starts_with("scenario,replication,N,M"));
    }
}
