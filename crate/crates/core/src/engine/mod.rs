//! Backward hedging solver for European and American options, with and without
//! transaction costs, and out-of-sample pricing of the resulting policy.

mod backward;
mod config;
mod node;
mod oos;
mod quantile;

use std::time::Instant;

pub use config::EngineConfig;
pub use node::{NodeSolution, NodeState};
pub use oos::{evaluate_out_of_sample, worst_case_stopping, OutOfSample};
pub use quantile::{quantile_pass, GridBounds};

use backward::{run_backward, solve_step, Plan};
use config::Timeline;

use crate::accounting::Exercise;
use crate::error::{Error, Result};
use crate::grid::{export_delta_surface, DeltaSurface, GridAxis, PolicyStep, PolicyTable, StateGrid};
use crate::model::{build_variance_tree, PathBundle, VarianceTree};
use crate::scalar::Real;

/// Paths per random stream in the quantile and out-of-sample passes.
pub const CHUNK: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub step: usize,
    pub nodes: usize,
    /// Path bundles simulated (one per market-state node).
    pub bundles: usize,
    pub converged: usize,
    pub evaluations: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlSummary<F> {
    pub m: usize,
    pub mean: F,
    pub std_dev: F,
    pub std_error: F,
    /// CVaR or variance of the samples, by risk mode.
    pub risk: F,
}

impl<F: Real> PlSummary<F> {
    pub fn of(samples: &[F], risk: F) -> Self {
        let m = samples.len();
        let mf = F::from_usize_lossy(m);
        let mean = samples.iter().fold(F::zero(), |s, &x| s + x) / mf;
        let var = samples.iter().fold(F::zero(), |s, &x| s + (x - mean) * (x - mean)) / mf;
        let sd = var.sqrt();
        Self {
            m,
            mean,
            std_dev: sd,
            std_error: sd / mf.sqrt(),
            risk,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics<F> {
    pub steps: Vec<StepStats>,
    pub out_of_sample: PlSummary<F>,
    /// Clamp ranges of the realised holdings, used to build grids for a costly run.
    pub delta_ranges: Vec<[[F; 2]; 2]>,
    pub mean_exercise_time: Option<F>,
    /// Step-0 node hedging cost from the backward pass (in-sample), when the pass keeps one.
    pub backward_price: Option<F>,
    pub flagged_tree_nodes: usize,
    pub degenerate_grid_dates: Vec<usize>,
    pub seconds: f64,
}

impl<F: Real> Diagnostics<F> {
    pub fn convergence_rate(&self) -> f64 {
        let n: usize = self.steps.iter().map(|s| s.nodes).sum();
        let c: usize = self.steps.iter().map(|s| s.converged).sum();
        c as f64 / n.max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HedgeOutcome<F> {
    /// Out-of-sample price at time 0.
    pub price: F,
    pub policy: PolicyTable<F>,
    pub initial_deltas: [F; 2],
    pub diagnostics: Diagnostics<F>,
}

fn clamp_ranges<F: Real>(cfg: &EngineConfig<F>, prior: &HedgeOutcome<F>) -> Result<Vec<[[F; 2]; 2]>> {
    if cfg.cost.is_free() {
        return Err(Error::InvalidParameter("clamp ranges only apply with costs".into()));
    }
    let r = &prior.diagnostics.delta_ranges;
    if r.len() != cfg.n_trading {
        return Err(Error::InvalidParameter("frictionless run has a different number of dates".into()));
    }
    let mut out = r.clone();
    // The first holding is deterministic; its range is spanned by 0 and the holding itself.
    let d0 = prior.initial_deltas;
    out[0] = [[d0[0].min(F::zero()), d0[0].max(F::zero())], [d0[1].min(F::zero()), d0[1].max(F::zero())]];
    Ok(out)
}

fn finish<F: Real>(
    cfg: &EngineConfig<F>,
    steps: Vec<PolicyStep<F>>,
    stats: Vec<StepStats>,
    tree: &VarianceTree<F>,
    bounds: &GridBounds<F>,
    clock: Instant,
) -> Result<HedgeOutcome<F>> {
    let backward_price = steps[0].price.as_ref().map(|p| p[0]);
    let policy = PolicyTable {
        n_trading: cfg.n_trading,
        steps,
    };
    let oos = evaluate_out_of_sample(&policy, cfg, cfg.m_out_of_sample)?;
    if !oos.price.is_finite() {
        return Err(Error::InvalidParameter("non-finite out-of-sample price".into()));
    }
    let initial_deltas = policy.initial_deltas();
    Ok(HedgeOutcome {
        price: oos.price,
        initial_deltas,
        diagnostics: Diagnostics {
            steps: stats,
            out_of_sample: oos.summary,
            delta_ranges: oos.delta_ranges,
            mean_exercise_time: oos.mean_exercise_time,
            backward_price,
            flagged_tree_nodes: tree.flagged_nodes().len(),
            degenerate_grid_dates: bounds.degenerate.clone(),
            seconds: clock.elapsed().as_secs_f64(),
        },
        policy,
    })
}

fn run<F: Real>(cfg: &EngineConfig<F>, prior: Option<&HedgeOutcome<F>>) -> Result<HedgeOutcome<F>> {
    let clock = Instant::now();
    cfg.validate()?;
    let tree = build_variance_tree(&cfg.params, cfg.n_sim_steps)?;
    let time = Timeline::new(&cfg.params, cfg.n_trading);
    let bounds = quantile_pass(cfg, &tree)?;
    let ranges = match prior {
        Some(p) => Some(clamp_ranges(cfg, p)?),
        None => None,
    };
    let plan = Plan {
        cfg,
        tree: &tree,
        time: &time,
        bounds: &bounds,
        ranges: ranges.as_deref(),
    };
    let (mut steps, stats) = run_backward(&plan)?;
    if !cfg.is_american() {
        // Keep the step-0 in-sample cost for diagnostics only.
        let p0 = steps[0].price.take();
        let mut out = finish(cfg, steps, stats, &tree, &bounds, clock)?;
        if let Some(p) = p0 {
            out.diagnostics.backward_price = Some(p[0]);
        }
        return Ok(out);
    }
    finish(cfg, steps, stats, &tree, &bounds, clock)
}

/// Solves a frictionless problem, or a costly one after the frictionless run that
/// sizes its incoming-holding grids.
pub fn solve<F: Real>(cfg: &EngineConfig<F>) -> Result<HedgeOutcome<F>> {
    if cfg.cost.is_free() {
        run(cfg, None)
    } else {
        let prior = run(&cfg.frictionless(), None)?;
        run(cfg, Some(&prior))
    }
}

/// Costly solve reusing a finished frictionless run of the same configuration.
pub fn solve_with_prior<F: Real>(cfg: &EngineConfig<F>, frictionless: &HedgeOutcome<F>) -> Result<HedgeOutcome<F>> {
    if cfg.cost.is_free() {
        return run(cfg, None);
    }
    run(cfg, Some(frictionless))
}

pub fn solve_backward_european<F: Real>(cfg: &EngineConfig<F>) -> Result<HedgeOutcome<F>> {
    if cfg.option.exercise != Exercise::European {
        return Err(Error::InvalidParameter("European solver given an American option".into()));
    }
    solve(cfg)
}

pub fn solve_backward_american<F: Real>(cfg: &EngineConfig<F>) -> Result<HedgeOutcome<F>> {
    if cfg.option.exercise != Exercise::American {
        return Err(Error::InvalidParameter("American solver given a European option".into()));
    }
    solve(cfg)
}

/// Solves one node problem over the given bundle. `future` holds the policy at dates
/// `state.step + 1 .. N-1`. Returns one solution per incoming holding in `state.prevs`,
/// or a single one when the problem is frictionless.
pub fn solve_node<F: Real>(
    cfg: &EngineConfig<F>,
    future: &[PolicyStep<F>],
    state: &NodeState<F>,
    bundle: &PathBundle<F>,
    start: [F; 2],
) -> Result<Vec<NodeSolution<F>>> {
    cfg.validate()?;
    let tree = build_variance_tree(&cfg.params, cfg.n_sim_steps)?;
    let time = Timeline::new(&cfg.params, cfg.n_trading);
    if bundle.from_step != state.step || bundle.n_trading != cfg.n_trading {
        return Err(Error::InvalidParameter("bundle does not start at the node's date".into()));
    }
    if future.len() + state.step + 1 != cfg.n_trading {
        return Err(Error::MissingPolicy(state.step + 1));
    }
    let ctx = node::Ctx {
        cfg,
        tree: &tree,
        time: &time,
        future,
        n: state.step,
    };
    let starts = vec![start; state.prevs.len().max(1)];
    node::solve_bundle(&ctx, state, 0, bundle, &starts)
}

/// Costly policy at date `step` restricted to the market-state cell containing `fixed`,
/// and its projection onto the incoming-holding axes.
///
/// Later dates are solved in full; at `step` only the grid nodes whose S and I cells
/// contain `(s, i)` at variance `v` are solved, which yields the same interpolated
/// surface as the full grid at that state.
pub fn solve_surface<F: Real>(
    cfg: &EngineConfig<F>,
    frictionless: &HedgeOutcome<F>,
    step: usize,
    fixed: (F, F, F),
) -> Result<(PolicyStep<F>, DeltaSurface<F>)> {
    cfg.validate()?;
    if step == 0 || step >= cfg.n_trading {
        return Err(Error::IndexOutOfRange(format!("surface date {step}")));
    }
    let tree = build_variance_tree(&cfg.params, cfg.n_sim_steps)?;
    let time = Timeline::new(&cfg.params, cfg.n_trading);
    let bounds = quantile_pass(cfg, &tree)?;
    let ranges = clamp_ranges(cfg, frictionless)?;
    let plan = Plan {
        cfg,
        tree: &tree,
        time: &time,
        bounds: &bounds,
        ranges: Some(&ranges),
    };
    let mut future: Vec<PolicyStep<F>> = Vec::new();
    for n in (step + 1..cfg.n_trading).rev() {
        let grid = plan.grid(n)?;
        let (st, _) = solve_step(&plan, n, &grid, &grid, &future)?;
        future.insert(0, st);
    }
    let full = plan.grid(step)?;
    let cell = |ax: &GridAxis<F>, x: F| -> Result<GridAxis<F>> {
        let (c, _) = ax.locate(x);
        let hi = (c + 1).min(ax.len() - 1);
        GridAxis::new(ax.nodes()[c..=hi].to_vec())
    };
    if full.v.index_of(fixed.2).is_none() {
        return Err(Error::OffTree(fixed.2.to_f64().unwrap_or(f64::NAN), step));
    }
    let sub = StateGrid {
        step,
        s: cell(&full.s, fixed.0)?,
        i: cell(&full.i, fixed.1)?,
        v: GridAxis::single(fixed.2),
        delta: full.delta.clone(),
    };
    let (st, _) = solve_step(&plan, step, &sub, &full, &future)?;
    let mut steps: Vec<PolicyStep<F>> = (0..step)
        .map(|_| PolicyStep {
            grid: StateGrid::initial(cfg.params.s0, cfg.params.v0, true),
            delta1: vec![F::zero()],
            delta2: vec![F::zero()],
            price: None,
            clamp: None,
        })
        .collect();
    steps.push(st.clone());
    let table = PolicyTable {
        n_trading: cfg.n_trading,
        steps,
    };
    let surface = export_delta_surface(&table, step, fixed)?;
    Ok((st, surface))
}
