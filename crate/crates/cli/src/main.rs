mod config;
mod experiment;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use bhedge::accounting::Payoff;
use bhedge::engine::{solve, solve_surface};
use bhedge::grid::write_policy;
use bhedge::lattice::{
    backward_lattice_strategy, build_example_lattice, comparison_csv, evaluate_lattice_cvar,
    global_lattice_strategy, strategies_csv,
};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::{Profile, RunConfig};
use experiment::{rows_csv, rows_table, run_experiment, ExperimentSpec};

#[derive(Parser, Debug)]
#[command(name = "bhedge", version, about = "Backward hedging of options under the Heston model")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// TOML file with run parameters (flat keys) or, for `experiment`, an experiment spec.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Profile::Desk)]
    profile: Profile,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one configuration and price it out of sample.
    Solve {
        /// Extra `key = value` settings applied over the config file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Reproduce the two-period lattice comparison of backward and global CVaR hedges.
    Lattice {
        #[arg(long, default_value_t = 0.4)]
        tail_fraction: f64,
    },
    /// Run an experiment matrix.
    Experiment {
        /// Run cells in parallel.
        #[arg(long)]
        parallel_cells: bool,
    },
    /// Export the holdings at one date as a function of the incoming holdings.
    Surface {
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Trading date; defaults to the last one.
        #[arg(long)]
        step: Option<usize>,
        #[arg(long)]
        s: Option<f64>,
        /// Integrated variance; defaults to v0 times the date's time.
        #[arg(long)]
        i: Option<f64>,
        #[arg(long)]
        v: Option<f64>,
    },
}

fn overrides(set: &[String]) -> Result<RunConfig> {
    let mut text = String::new();
    for kv in set {
        let Some((k, v)) = kv.split_once('=') else {
            bail!("expected KEY=VALUE, got `{kv}`");
        };
        let v = v.trim();
        let quoted = v.parse::<f64>().is_err() && !v.starts_with('"');
        if quoted {
            text.push_str(&format!("{} = \"{}\"\n", k.trim(), v));
        } else {
            text.push_str(&format!("{} = {}\n", k.trim(), v));
        }
    }
    Ok(toml::from_str(&text)?)
}

fn run_config(g: &Global, set: &[String]) -> Result<RunConfig> {
    let base = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut cli = overrides(set)?;
    if g.seed.is_some() {
        cli.seed = g.seed;
    }
    Ok(base.merged(&cli))
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn manifest(g: &Global, command: &str, body: serde_json::Value) -> Result<String> {
    let m = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "profile": g.profile,
        "threads": rayon::current_num_threads(),
        "run": body,
    });
    Ok(serde_json::to_string_pretty(&m)? + "\n")
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let g = &cli.global;
    if let Some(n) = g.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &cli.command {
        Command::Solve { set } => {
            let resolved = run_config(g, set)?.resolve(g.profile)?;
            let cfg = resolved.engine()?;
            let out = solve(&cfg)?;
            let d = &out.diagnostics;
            let summary = format!(
                "price,std_error,delta1_0,delta2_0,convergence_rate,seconds\n{},{},{},{},{},{}\n",
                out.price,
                d.out_of_sample.std_error,
                out.initial_deltas[0],
                out.initial_deltas[1],
                d.convergence_rate(),
                d.seconds
            );
            write(&g.out, "summary.csv", &summary)?;
            write(&g.out, "policy.txt", &write_policy(&out.policy))?;
            let body = json!({
                "config": resolved,
                "price": out.price,
                "std_error": d.out_of_sample.std_error,
                "initial_deltas": out.initial_deltas,
                "mean_exercise_time": d.mean_exercise_time,
                "flagged_tree_nodes": d.flagged_tree_nodes,
                "degenerate_grid_dates": d.degenerate_grid_dates,
            });
            write(&g.out, "manifest.json", &manifest(g, "solve", body)?)?;
            println!(
                "price {:.4} (se {:.4}), initial holdings ({:.4}, {:.4}), {:.1}s",
                out.price, d.out_of_sample.std_error, out.initial_deltas[0], out.initial_deltas[1], d.seconds
            );
        }
        Command::Lattice { tail_fraction } => {
            let q = *tail_fraction;
            let lattice = build_example_lattice();
            let phi = Payoff::Strangle {
                call_strike: 0.8,
                put_strike: 1.3,
            };
            let global = global_lattice_strategy(&lattice, &phi, q)?;
            let backward = backward_lattice_strategy(&lattice, &phi, q)?;
            let rg = evaluate_lattice_cvar(&lattice, &global.strategy, &phi, q)?;
            let rb = evaluate_lattice_cvar(&lattice, &backward.strategy, &phi, q)?;
            let strategies = strategies_csv(&global.strategy, &backward.strategy);
            let comparison = comparison_csv(&lattice, &phi, &rg, &rb);
            write(&g.out, "lattice_strategies.csv", &strategies)?;
            write(&g.out, "lattice_comparison.csv", &comparison)?;
            let ranges: Vec<[f64; 2]> = global.ranges.to_vec();
            let body = json!({ "tail_fraction": q, "global_optimal_ranges": ranges });
            write(&g.out, "manifest.json", &manifest(g, "lattice", body)?)?;
            print!("{strategies}\n{comparison}");
        }
        Command::Experiment { parallel_cells } => {
            let spec = match &g.config {
                Some(p) => ExperimentSpec::load(p)?,
                None => ExperimentSpec::reference(),
            };
            let clock = Instant::now();
            let rows = run_experiment(&spec, g.profile, g.seed, *parallel_cells)?;
            let table = rows_table(&rows);
            write(&g.out, "results.csv", &rows_csv(&rows)?)?;
            write(&g.out, "results.txt", &table)?;
            let cells = spec.cells(g.profile, g.seed)?;
            let body = json!({
                "spec": spec,
                "cells": cells,
                "seconds": clock.elapsed().as_secs_f64(),
            });
            write(&g.out, "manifest.json", &manifest(g, "experiment", body)?)?;
            print!("{table}");
            let failed = rows.iter().filter(|r| r.status != "ok").count();
            if failed > 0 {
                eprintln!("{failed} cell(s) failed, see results.csv");
            }
        }
        Command::Surface { set, step, s, i, v } => {
            let resolved = run_config(g, set)?.resolve(g.profile)?;
            let cfg = resolved.engine()?;
            if cfg.cost.is_free() {
                bail!("surfaces need a positive cost rate (epsilon > 0)");
            }
            let step = step.unwrap_or(cfg.n_trading - 1);
            let t = cfg.params.maturity * step as f64 / cfg.n_trading as f64;
            let fixed = (
                s.unwrap_or(cfg.params.s0),
                i.unwrap_or(cfg.params.v0 * t),
                v.unwrap_or(cfg.params.v0),
            );
            let prior = solve(&cfg.frictionless())?;
            let (_, surface) = solve_surface(&cfg, &prior, step, fixed)?;
            write(&g.out, "surface.csv", &surface.to_csv())?;
            write(&g.out, "surface_delta1.csv", &surface.delta1_grid_csv())?;
            write(&g.out, "surface_delta2.csv", &surface.delta2_grid_csv())?;
            let monotone = surface.nondecreasing_in_prev1(cfg.scaled_simplex().x_tol);
            let body = json!({
                "config": resolved,
                "step": step,
                "state": [fixed.0, fixed.1, fixed.2],
                "nondecreasing_in_prev_delta1": monotone,
            });
            write(&g.out, "manifest.json", &manifest(g, "surface", body)?)?;
            println!("surface at date {step} written to {}; non-decreasing in incoming delta1: {monotone}", g.out.display());
        }
    }
    Ok(())
}
