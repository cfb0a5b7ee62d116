//! Node problems: the hedging error at a grid node as a function of the holding
//! chosen there, and its minimisation over a fixed path bundle.

use super::config::Timeline;
use super::EngineConfig;
use crate::accounting::Exercise;
use crate::error::{Error, Result};
use crate::grid::{GridAxis, PolicyStep};
use crate::model::{swap_price_unchecked, PathBundle, VarianceTree};
use crate::risk::{cvar_in_place, tail_count, RiskSpec};
use crate::scalar::Real;
use crate::simplex::{minimize_2d, SimplexConfig};

/// Grid node being solved. `prevs` lists the incoming holdings to solve for when
/// costs apply; it is empty for frictionless problems.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState<F> {
    pub step: usize,
    pub s: F,
    pub i: F,
    /// Lattice index of the node's variance.
    pub v_node: usize,
    pub prevs: Vec<[F; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeSolution<F> {
    pub delta: [F; 2],
    /// Objective at the argmin, capitalised to maturity.
    pub value: F,
    /// Hedging cost of the node in money of its own date.
    pub price: F,
    pub converged: bool,
    pub evaluations: usize,
}

/// Read-only inputs shared by all nodes of one trading date.
pub(crate) struct Ctx<'a, F> {
    pub cfg: &'a EngineConfig<F>,
    pub tree: &'a VarianceTree<F>,
    pub time: &'a Timeline<F>,
    /// Policy at dates `n+1 .. N-1`.
    pub future: &'a [PolicyStep<F>],
    pub n: usize,
}

impl<'a, F: Real> Ctx<'a, F> {
    fn future(&self, k: usize) -> Result<&'a PolicyStep<F>> {
        self.future.get(k - self.n - 1).ok_or(Error::MissingPolicy(k))
    }

    fn american(&self) -> bool {
        self.cfg.option.exercise == Exercise::American
    }

    /// e^{-r(T - t_n)}: converts maturity money to money at the node's date.
    fn discount(&self) -> F {
        F::one() / self.time.cap[self.n]
    }
}

fn price_field<F: Real>(st: &PolicyStep<F>) -> Result<&[F]> {
    st.price.as_deref().ok_or(Error::MissingPolicy(st.grid.step))
}

/// Hedging error `a + x·b + y·c` of the frictionless problem.
struct Linear<F> {
    a: Vec<F>,
    b: Vec<F>,
    c: Vec<F>,
}

fn current_gains<F: Real>(ctx: &Ctx<F>, bundle: &PathBundle<F>, s: F, swap: F) -> (Vec<F>, Vec<F>) {
    let nx = bundle.at(ctx.n + 1);
    let cap = ctx.time.cap[ctx.n + 1];
    let g = ctx.time.growth;
    let b = nx.s1.iter().map(|&x| (x - s * g) * cap).collect();
    let c = nx.s2.iter().map(|&x| (x - swap * g) * cap).collect();
    (b, c)
}

fn linear_terms<F: Real>(ctx: &Ctx<F>, bundle: &PathBundle<F>, s: F, swap: F) -> Result<Linear<F>> {
    let nn = ctx.cfg.n_trading;
    let opt = &ctx.cfg.option;
    let cap = &ctx.time.cap;
    let g = ctx.time.growth;
    let american = ctx.american();
    let mut a = vec![F::zero(); bundle.m];
    for k in ctx.n + 1..nn {
        ctx.future(k)?;
        if american {
            price_field(ctx.future(k)?)?;
        }
    }
    for q in 0..bundle.m {
        let mut acc = F::zero();
        let mut k = ctx.n + 1;
        loop {
            let sl = bundle.at(k);
            let pay = opt.payoff(sl.s1[q]);
            if k == nn {
                acc = acc - pay * cap[nn];
                break;
            }
            let st = ctx.future(k)?;
            let corners = st.grid.corners_at(sl.s1[q], sl.i[q], sl.v_node[q] as usize, None);
            if american && pay >= corners.apply(price_field(st)?) {
                acc = acc - pay * cap[k];
                break;
            }
            let d = st.clamp([corners.apply(&st.delta1), corners.apply(&st.delta2)]);
            let nx = bundle.at(k + 1);
            acc = acc + (d[0] * (nx.s1[q] - sl.s1[q] * g) + d[1] * (nx.s2[q] - sl.s2[q] * g)) * cap[k + 1];
            k += 1;
        }
        a[q] = acc;
    }
    let (b, c) = current_gains(ctx, bundle, s, swap);
    Ok(Linear { a, b, c })
}

/// Sample means and (divide-by-M) covariances of `a`, `b`, `c`.
struct Moments<F> {
    mean: [F; 3],
    cov: [[F; 3]; 3],
}

impl<F: Real> Moments<F> {
    fn of(l: &Linear<F>) -> Self {
        let m = F::from_usize_lossy(l.a.len());
        let cols = [&l.a, &l.b, &l.c];
        let mut mean = [F::zero(); 3];
        for (j, col) in cols.iter().enumerate() {
            mean[j] = col.iter().fold(F::zero(), |s, &x| s + x) / m;
        }
        let mut cov = [[F::zero(); 3]; 3];
        for q in 0..l.a.len() {
            let d = [l.a[q] - mean[0], l.b[q] - mean[1], l.c[q] - mean[2]];
            for r in 0..3 {
                for c in r..3 {
                    cov[r][c] = cov[r][c] + d[r] * d[c];
                }
            }
        }
        for r in 0..3 {
            for c in r..3 {
                cov[r][c] = cov[r][c] / m;
                cov[c][r] = cov[r][c];
            }
        }
        Self { mean, cov }
    }

    fn variance(&self, x: F, y: F) -> F {
        let w = [F::one(), x, y];
        let mut v = F::zero();
        for r in 0..3 {
            for c in 0..3 {
                v = v + w[r] * w[c] * self.cov[r][c];
            }
        }
        v
    }

    fn mean(&self, x: F, y: F) -> F {
        self.mean[0] + x * self.mean[1] + y * self.mean[2]
    }
}

/// One future date of the costly roll-forward: per-path multipliers and the policy
/// collapsed onto the incoming-holding axes at each path's market state.
struct RollStep<'a, F> {
    g1: Vec<F>,
    g2: Vec<F>,
    e1: Vec<F>,
    e2: Vec<F>,
    pay: Vec<F>,
    cap: F,
    /// Per path: δ¹ table, δ² table, then (American) price table, each `nd` long.
    table: Vec<F>,
    stride: usize,
    nd2: usize,
    ax1: &'a GridAxis<F>,
    ax2: &'a GridAxis<F>,
    clamp: Option<[[F; 2]; 2]>,
}

/// Hedging error of the costly problem, rolled forward path by path.
struct Roll<'a, F> {
    b: Vec<F>,
    c: Vec<F>,
    steps: Vec<RollStep<'a, F>>,
    pay_n: Vec<F>,
    e1_n: Vec<F>,
    e2_n: Vec<F>,
    american: bool,
}

#[inline]
fn bilinear<F: Real>(t: &[F], nd2: usize, c1: (usize, usize, F), c2: (usize, usize, F)) -> F {
    let v00 = t[c1.0 * nd2 + c2.0];
    let v01 = t[c1.0 * nd2 + c2.1];
    let v10 = t[c1.1 * nd2 + c2.0];
    let v11 = t[c1.1 * nd2 + c2.1];
    let lo = v00 + c2.2 * (v01 - v00);
    let hi = v10 + c2.2 * (v11 - v10);
    lo + c1.2 * (hi - lo)
}

#[inline]
fn cell<F: Real>(ax: &GridAxis<F>, x: F) -> (usize, usize, F) {
    let (c, w) = ax.locate(x);
    (c, (c + 1).min(ax.len() - 1), w)
}

impl<'a, F: Real> Roll<'a, F> {
    fn build(ctx: &Ctx<'a, F>, bundle: &PathBundle<F>, s: F, swap: F) -> Result<Self> {
        let nn = ctx.cfg.n_trading;
        let [eps1, eps2] = ctx.cfg.cost.rates();
        let cap = &ctx.time.cap;
        let g = ctx.time.growth;
        let american = ctx.american();
        let m = bundle.m;
        let mut steps = Vec::with_capacity(nn - ctx.n - 1);
        for k in ctx.n + 1..nn {
            let st = ctx.future(k)?;
            let [ax1, ax2] = st.grid.delta.as_ref().ok_or(Error::NoDeltaAxes(k))?;
            let nd = ax1.len() * ax2.len();
            let nout = if american { 3 } else { 2 };
            let price = if american { Some(price_field(st)?) } else { None };
            let sl = bundle.at(k);
            let nx = bundle.at(k + 1);
            let mut table = Vec::with_capacity(m * nd * nout);
            for q in 0..m {
                let corners = st.grid.corners_at(sl.s1[q], sl.i[q], sl.v_node[q] as usize, None);
                for j in 0..nd {
                    table.push(corners.apply_offset(&st.delta1, j));
                }
                for j in 0..nd {
                    table.push(corners.apply_offset(&st.delta2, j));
                }
                if let Some(p) = price {
                    for j in 0..nd {
                        table.push(corners.apply_offset(p, j));
                    }
                }
            }
            steps.push(RollStep {
                g1: (0..m).map(|q| (nx.s1[q] - sl.s1[q] * g) * cap[k + 1]).collect(),
                g2: (0..m).map(|q| (nx.s2[q] - sl.s2[q] * g) * cap[k + 1]).collect(),
                e1: sl.s1.iter().map(|&x| eps1 * x * cap[k]).collect(),
                e2: sl.s2.iter().map(|&x| eps2 * x * cap[k]).collect(),
                pay: sl.s1.iter().map(|&x| ctx.cfg.option.payoff(x)).collect(),
                cap: cap[k],
                table,
                stride: nd * nout,
                nd2: ax2.len(),
                ax1,
                ax2,
                clamp: st.clamp,
            });
        }
        let last = bundle.at(nn);
        let (b, c) = current_gains(ctx, bundle, s, swap);
        Ok(Self {
            b,
            c,
            steps,
            pay_n: last.s1.iter().map(|&x| ctx.cfg.option.payoff(x) * cap[nn]).collect(),
            e1_n: last.s1.iter().map(|&x| eps1 * x * cap[nn]).collect(),
            e2_n: last.s2.iter().map(|&x| eps2 * x * cap[nn]).collect(),
            american,
        })
    }

    /// Hedging error per path for holding `(x, y)` now, excluding the cost of
    /// trading into `(x, y)` at the node itself.
    fn run(&self, x: F, y: F, out: &mut [F], p1: &mut [F], p2: &mut [F], alive: &mut [bool]) {
        let m = out.len();
        for q in 0..m {
            out[q] = x * self.b[q] + y * self.c[q];
            p1[q] = x;
            p2[q] = y;
            alive[q] = true;
        }
        for st in &self.steps {
            let nd = st.stride / if self.american { 3 } else { 2 };
            for q in 0..m {
                if !alive[q] {
                    continue;
                }
                let row = &st.table[q * st.stride..(q + 1) * st.stride];
                let c1 = cell(st.ax1, p1[q]);
                let c2 = cell(st.ax2, p2[q]);
                if self.american {
                    let price = bilinear(&row[2 * nd..], st.nd2, c1, c2);
                    if st.pay[q] >= price {
                        out[q] = out[q] - st.pay[q] * st.cap - st.e1[q] * p1[q].abs() - st.e2[q] * p2[q].abs();
                        alive[q] = false;
                        continue;
                    }
                }
                let mut d1 = bilinear(row, st.nd2, c1, c2);
                let mut d2 = bilinear(&row[nd..], st.nd2, c1, c2);
                if let Some(cl) = &st.clamp {
                    d1 = d1.max(cl[0][0]).min(cl[0][1]);
                    d2 = d2.max(cl[1][0]).min(cl[1][1]);
                }
                out[q] = out[q] + d1 * st.g1[q] + d2 * st.g2[q]
                    - st.e1[q] * (d1 - p1[q]).abs()
                    - st.e2[q] * (d2 - p2[q]).abs();
                p1[q] = d1;
                p2[q] = d2;
            }
        }
        for q in 0..m {
            if alive[q] {
                out[q] = out[q] - self.pay_n[q] - self.e1_n[q] * p1[q].abs() - self.e2_n[q] * p2[q].abs();
            }
        }
    }
}

fn node_error(n: usize, node: usize, e: Error) -> Error {
    Error::Node {
        step: n,
        node,
        source: Box::new(e),
    }
}

fn variance_of<F: Real>(x: &[F]) -> (F, F) {
    let m = F::from_usize_lossy(x.len());
    let mean = x.iter().fold(F::zero(), |s, &v| s + v) / m;
    let var = x.iter().fold(F::zero(), |s, &v| s + (v - mean) * (v - mean)) / m;
    (mean, var)
}

/// Solves the node for every incoming holding in `node.prevs` (or once if frictionless)
/// over a single path bundle simulated from the node's market state.
pub(crate) fn solve_bundle<F: Real>(
    ctx: &Ctx<F>,
    node: &NodeState<F>,
    node_index: usize,
    bundle: &PathBundle<F>,
    starts: &[[F; 2]],
) -> Result<Vec<NodeSolution<F>>> {
    let cfg = ctx.cfg;
    let p = &cfg.params;
    let t_n = ctx.time.t[ctx.n];
    let v = ctx.tree.lattice()[node.v_node];
    let swap = swap_price_unchecked(t_n, node.i, v, p);
    let simplex: SimplexConfig<F> = cfg.scaled_simplex();
    let disc = ctx.discount();
    let wrap = |e: Error| node_error(ctx.n, node_index, e);
    let m = bundle.m;

    if node.prevs.is_empty() {
        let lin = linear_terms(ctx, bundle, node.s, swap).map_err(wrap)?;
        let start = starts.first().copied().unwrap_or([F::zero(); 2]);
        let sol = match cfg.risk {
            RiskSpec::Cvar { tail_fraction } => {
                let k = tail_count(tail_fraction, m);
                let mut buf = vec![F::zero(); m];
                let r = minimize_2d(
                    |d: [F; 2]| {
                        for q in 0..m {
                            buf[q] = lin.a[q] + d[0] * lin.b[q] + d[1] * lin.c[q];
                        }
                        cvar_in_place(&mut buf, k)
                    },
                    start,
                    &simplex,
                )
                .map_err(wrap)?;
                NodeSolution {
                    delta: r.argmin,
                    value: r.value,
                    price: r.value * disc,
                    converged: r.converged,
                    evaluations: r.evaluations,
                }
            }
            RiskSpec::Mse => {
                let mo = Moments::of(&lin);
                let r = minimize_2d(|d: [F; 2]| mo.variance(d[0], d[1]), start, &simplex).map_err(wrap)?;
                NodeSolution {
                    delta: r.argmin,
                    value: r.value,
                    price: -mo.mean(r.argmin[0], r.argmin[1]) * disc,
                    converged: r.converged,
                    evaluations: r.evaluations,
                }
            }
        };
        return Ok(vec![sol]);
    }

    let roll = Roll::build(ctx, bundle, node.s, swap).map_err(wrap)?;
    let [eps1, eps2] = cfg.cost.rates();
    let cap_n = ctx.time.cap[ctx.n];
    let c01 = eps1 * node.s * cap_n;
    let c02 = eps2 * swap * cap_n;
    let now_cost = |d: [F; 2], prev: [F; 2]| c01 * (d[0] - prev[0]).abs() + c02 * (d[1] - prev[1]).abs();
    let mut out = vec![F::zero(); m];
    let mut p1 = vec![F::zero(); m];
    let mut p2 = vec![F::zero(); m];
    let mut alive = vec![true; m];
    let mut sols = Vec::with_capacity(node.prevs.len());
    match cfg.risk {
        RiskSpec::Cvar { tail_fraction } => {
            let k = tail_count(tail_fraction, m);
            for (j, &prev) in node.prevs.iter().enumerate() {
                let start = starts.get(j).copied().unwrap_or([F::zero(); 2]);
                let r = minimize_2d(
                    |d: [F; 2]| {
                        roll.run(d[0], d[1], &mut out, &mut p1, &mut p2, &mut alive);
                        cvar_in_place(&mut out, k) + now_cost(d, prev)
                    },
                    start,
                    &simplex,
                )
                .map_err(wrap)?;
                sols.push(NodeSolution {
                    delta: r.argmin,
                    value: r.value,
                    price: r.value * disc,
                    converged: r.converged,
                    evaluations: r.evaluations,
                });
            }
        }
        RiskSpec::Mse => {
            // The node's own trading cost is deterministic, so the variance does not
            // depend on the incoming holding: one minimisation serves every δ-node.
            let start = starts.first().copied().unwrap_or([F::zero(); 2]);
            let r = minimize_2d(
                |d: [F; 2]| {
                    roll.run(d[0], d[1], &mut out, &mut p1, &mut p2, &mut alive);
                    variance_of(&out).1
                },
                start,
                &simplex,
            )
            .map_err(wrap)?;
            roll.run(r.argmin[0], r.argmin[1], &mut out, &mut p1, &mut p2, &mut alive);
            let mean = variance_of(&out).0;
            for &prev in &node.prevs {
                sols.push(NodeSolution {
                    delta: r.argmin,
                    value: r.value,
                    price: (now_cost(r.argmin, prev) - mean) * disc,
                    converged: r.converged,
                    evaluations: r.evaluations,
                });
            }
        }
    }
    Ok(sols)
}
