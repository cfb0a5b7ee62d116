use std::time::Instant;

use rayon::prelude::*;

use super::config::Timeline;
use super::node::{solve_bundle, Ctx, NodeSolution, NodeState};
use super::quantile::GridBounds;
use super::{EngineConfig, StepStats};
use crate::error::{Error, Result};
use crate::grid::{GridAxis, PolicyStep, StateGrid};
use crate::model::{simulate_from, stream_rng, Purpose, StreamId, VarianceTree};
use crate::scalar::Real;

/// Inputs fixed for a whole backward pass.
pub(crate) struct Plan<'a, F> {
    pub cfg: &'a EngineConfig<F>,
    pub tree: &'a VarianceTree<F>,
    pub time: &'a Timeline<F>,
    pub bounds: &'a GridBounds<F>,
    /// Clamp range of the holding at each date `0..N-1`; present iff costs apply.
    pub ranges: Option<&'a [[[F; 2]; 2]]>,
}

impl<'a, F: Real> Plan<'a, F> {
    pub fn sub(&self) -> usize {
        self.cfg.n_sim_steps / self.cfg.n_trading
    }

    pub fn grid(&self, n: usize) -> Result<StateGrid<F>> {
        let p = &self.cfg.params;
        if n == 0 {
            return Ok(StateGrid::initial(p.s0, p.v0, self.ranges.is_some()));
        }
        let delta = match self.ranges {
            Some(r) => {
                let [d1, d2] = r[n - 1];
                Some([
                    GridAxis::uniform(d1[0], d1[1], self.cfg.n_delta1)?,
                    GridAxis::uniform(d2[0], d2[1], self.cfg.n_delta2)?,
                ])
            }
            None => None,
        };
        Ok(StateGrid {
            step: n,
            s: self.bounds.s[n].clone(),
            i: self.bounds.i[n].clone(),
            v: GridAxis::new(self.tree.level_values(n * self.sub()))?,
            delta,
        })
    }
}

/// Start point from the next date's policy at the same coordinates, else the origin.
fn warm_start<F: Real>(next: Option<&PolicyStep<F>>, s: F, i: F, v: F, prev: Option<[F; 2]>) -> [F; 2] {
    let Some(st) = next else {
        return [F::zero(); 2];
    };
    let Some(iv) = st.grid.v.index_of(v) else {
        return [F::zero(); 2];
    };
    let prev = if st.grid.delta.is_some() { prev } else { None };
    let c = st.grid.corners_at(s, i, iv, prev);
    [c.apply(&st.delta1), c.apply(&st.delta2)]
}

/// Solves every node of `grid` at date `n`. `stream_grid` fixes the random stream of
/// each market-state node (a full grid when `grid` is a sub-grid of it).
pub(crate) fn solve_step<F: Real>(
    plan: &Plan<F>,
    n: usize,
    grid: &StateGrid<F>,
    stream_grid: &StateGrid<F>,
    future: &[PolicyStep<F>],
) -> Result<(PolicyStep<F>, StepStats)> {
    let clock = Instant::now();
    let cfg = plan.cfg;
    let sh = grid.shape();
    let n3 = sh[0] * sh[1] * sh[2];
    let prevs: Vec<[F; 2]> = match &grid.delta {
        Some([a, b]) => a
            .nodes()
            .iter()
            .flat_map(|&x| b.nodes().iter().map(move |&y| [x, y]))
            .collect(),
        None => Vec::new(),
    };
    let level = n * plan.sub();
    let ctx = Ctx {
        cfg,
        tree: plan.tree,
        time: plan.time,
        future,
        n,
    };
    let ssh = stream_grid.shape();
    let solved: Vec<Vec<NodeSolution<F>>> = (0..n3)
        .into_par_iter()
        .map(|j| {
            let (is, ii, iv) = (j / (sh[1] * sh[2]), j / sh[2] % sh[1], j % sh[2]);
            let s = grid.s.nodes()[is];
            let i = grid.i.nodes()[ii];
            let v = grid.v.nodes()[iv];
            let v_node = plan.tree.find(level, v).ok_or_else(|| Error::OffTree(v.to_f64().unwrap_or(f64::NAN), level))?;
            let at = |ax: &GridAxis<F>, x: F| ax.index_of(x).unwrap_or(0);
            let stream_index = (at(&stream_grid.s, s) * ssh[1] + at(&stream_grid.i, i)) * ssh[2] + at(&stream_grid.v, v);
            let mut rng = stream_rng(StreamId::new(cfg.seed, Purpose::Backward, n, stream_index));
            let bundle = simulate_from(&cfg.params, plan.tree, cfg.n_trading, n, s, i, v_node, cfg.m_backward, &mut rng);
            let next = future.first();
            let starts: Vec<[F; 2]> = if prevs.is_empty() {
                vec![warm_start(next, s, i, v, None)]
            } else {
                prevs.iter().map(|&d| warm_start(next, s, i, v, Some(d))).collect()
            };
            let node = NodeState {
                step: n,
                s,
                i,
                v_node,
                prevs: prevs.clone(),
            };
            solve_bundle(&ctx, &node, j, &bundle, &starts)
        })
        .collect::<Result<_>>()?;

    let total = grid.len();
    let mut d1 = Vec::with_capacity(total);
    let mut d2 = Vec::with_capacity(total);
    let mut price = Vec::with_capacity(total);
    let mut stats = StepStats {
        step: n,
        nodes: total,
        bundles: n3,
        converged: 0,
        evaluations: 0,
        seconds: 0.0,
    };
    for sols in &solved {
        for s in sols {
            d1.push(s.delta[0]);
            d2.push(s.delta[1]);
            price.push(s.price);
            stats.converged += s.converged as usize;
            stats.evaluations += s.evaluations;
        }
    }
    let step = PolicyStep {
        grid: grid.clone(),
        delta1: d1,
        delta2: d2,
        price: cfg.is_american().then_some(price),
        clamp: plan.ranges.map(|r| r[n]),
    };
    step.validate()?;
    stats.seconds = clock.elapsed().as_secs_f64();
    Ok((step, stats))
}

/// Backward induction over dates `N-1 .. 0`.
pub(crate) fn run_backward<F: Real>(plan: &Plan<F>) -> Result<(Vec<PolicyStep<F>>, Vec<StepStats>)> {
    let nn = plan.cfg.n_trading;
    let mut steps: Vec<PolicyStep<F>> = Vec::with_capacity(nn);
    let mut stats = Vec::with_capacity(nn);
    for n in (0..nn).rev() {
        let grid = plan.grid(n)?;
        let (st, ss) = solve_step(plan, n, &grid, &grid, &steps)?;
        steps.insert(0, st);
        stats.insert(0, ss);
    }
    Ok((steps, stats))
}

