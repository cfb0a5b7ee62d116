use rayon::prelude::*;

use super::{EngineConfig, PlSummary, CHUNK};
use crate::accounting::{Exercise, HedgeSequence, OptionSpec};
use crate::error::{Error, Result};
use crate::grid::{quantile_sorted, Field, PolicyStep, PolicyTable};
use crate::model::{
    build_variance_tree, simulate_from, stream_rng, swap_price_unchecked, MarketState, Purpose, StreamId,
};
use crate::risk::{empirical_cvar, empirical_variance, optimal_premium, sample_mean, RiskSpec};
use crate::scalar::Real;

/// Result of playing a frozen policy on fresh paths.
#[derive(Debug, Clone, PartialEq)]
pub struct OutOfSample<F> {
    pub price: F,
    /// Terminal P&L per path, capitalised to maturity, premium excluded.
    pub samples: Vec<F>,
    pub summary: PlSummary<F>,
    /// Zero-extended quantile range of the realised holdings at dates `0..N-1`.
    pub delta_ranges: Vec<[[F; 2]; 2]>,
    /// Average exercise date in years (American only).
    pub mean_exercise_time: Option<F>,
}

struct Played<F> {
    pl: Vec<F>,
    held: Vec<Vec<[F; 2]>>,
    tau: Vec<usize>,
}

#[inline]
fn holding_at<F: Real>(st: &PolicyStep<F>, s: F, i: F, iv: usize, prev: [F; 2]) -> ([F; 2], Option<F>) {
    let d = st.grid.delta.is_some().then_some(prev);
    let c = st.grid.corners_at(s, i, iv, d);
    let h = st.clamp([c.apply(&st.delta1), c.apply(&st.delta2)]);
    (h, st.price.as_ref().map(|p| c.apply(p)))
}

/// Simulates `m1` paths from the initial state, plays `policy` forward with clamping
/// (and worst-case exercise for American options) and prices the terminal P&L.
pub fn evaluate_out_of_sample<F: Real>(policy: &PolicyTable<F>, cfg: &EngineConfig<F>, m1: usize) -> Result<OutOfSample<F>> {
    cfg.validate()?;
    if m1 == 0 {
        return Err(Error::EmptySamples);
    }
    let nn = cfg.n_trading;
    if policy.n_trading != nn || policy.steps.len() != nn {
        return Err(Error::MissingPolicy(policy.steps.len()));
    }
    let american = cfg.option.exercise == Exercise::American;
    if american && policy.steps[1..].iter().any(|s| s.price.is_none()) {
        return Err(Error::InvalidParameter("American policy needs continuation prices".into()));
    }
    let p = &cfg.params;
    let tree = build_variance_tree(p, cfg.n_sim_steps)?;
    let time = cfg.timeline();
    let [eps1, eps2] = cfg.cost.rates();
    let swap0 = swap_price_unchecked(F::zero(), F::zero(), p.v0, p);
    let chunks: Vec<(usize, usize)> = (0..m1)
        .step_by(CHUNK)
        .enumerate()
        .map(|(c, start)| (c, CHUNK.min(m1 - start)))
        .collect();

    let parts: Vec<Played<F>> = chunks
        .par_iter()
        .map(|&(c, m)| {
            let mut rng = stream_rng(StreamId::new(cfg.seed, Purpose::OutOfSample, 0, c));
            let b = simulate_from(p, &tree, nn, 0, p.s0, F::zero(), tree.root(), m, &mut rng);
            let root = tree.position(0, tree.root()).unwrap();
            let mut out = Played {
                pl: Vec::with_capacity(m),
                held: vec![Vec::with_capacity(m); nn],
                tau: Vec::with_capacity(m),
            };
            for q in 0..m {
                let mut prev = [F::zero(); 2];
                let mut pl = F::zero();
                let mut tau = nn;
                for k in 0..nn {
                    let (s1, s2, i, iv) = if k == 0 {
                        (p.s0, swap0, F::zero(), root)
                    } else {
                        let sl = b.at(k);
                        (sl.s1[q], sl.s2[q], sl.i[q], sl.v_node[q] as usize)
                    };
                    let (d, price) = holding_at(&policy.steps[k], s1, i, iv, prev);
                    if american && k > 0 {
                        let pay = cfg.option.payoff(s1);
                        if pay >= price.unwrap() {
                            pl = pl - (pay + eps1 * s1 * prev[0].abs() + eps2 * s2 * prev[1].abs()) * time.cap[k];
                            tau = k;
                            break;
                        }
                    }
                    pl = pl - (eps1 * s1 * (d[0] - prev[0]).abs() + eps2 * s2 * (d[1] - prev[1]).abs()) * time.cap[k];
                    let nx = b.at(k + 1);
                    pl = pl + (d[0] * (nx.s1[q] - s1 * time.growth) + d[1] * (nx.s2[q] - s2 * time.growth)) * time.cap[k + 1];
                    out.held[k].push(d);
                    prev = d;
                }
                if tau == nn {
                    let last = b.at(nn);
                    let pay = cfg.option.payoff(last.s1[q]);
                    pl = pl - (pay + eps1 * last.s1[q] * prev[0].abs() + eps2 * last.s2[q] * prev[1].abs()) * time.cap[nn];
                }
                out.pl.push(pl);
                out.tau.push(tau);
            }
            out
        })
        .collect();

    let samples: Vec<F> = parts.iter().flat_map(|x| x.pl.iter().copied()).collect();
    let mut delta_ranges = Vec::with_capacity(nn);
    for k in 0..nn {
        let held: Vec<[F; 2]> = parts.iter().flat_map(|x| x.held[k].iter().copied()).collect();
        let mut r = [[F::zero(); 2]; 2];
        if !held.is_empty() {
            for (c, slot) in r.iter_mut().enumerate() {
                let mut v: Vec<F> = held.iter().map(|h| h[c]).collect();
                v.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
                let lo = quantile_sorted(&v, cfg.quantile_lo).min(F::zero());
                let hi = quantile_sorted(&v, cfg.quantile_hi).max(F::zero());
                *slot = [lo, hi];
            }
        }
        delta_ranges.push(r);
    }
    let mean_exercise_time = american.then(|| {
        let taus: Vec<F> = parts
            .iter()
            .flat_map(|x| x.tau.iter().map(|&t| time.t[t]))
            .collect();
        sample_mean(&taus)
    });
    let disc = (-p.r * p.maturity).exp();
    let (price, risk) = match cfg.risk {
        RiskSpec::Cvar { tail_fraction } => {
            let c = empirical_cvar(&samples, tail_fraction)?;
            (c * disc, c)
        }
        RiskSpec::Mse => {
            let var = if samples.len() > 1 { empirical_variance(&samples)? } else { F::zero() };
            (optimal_premium(&samples, p.r, p.maturity)?, var)
        }
    };
    let summary = PlSummary::of(&samples, risk);
    Ok(OutOfSample {
        price,
        samples,
        summary,
        delta_ranges,
        mean_exercise_time,
    })
}

/// First date after `from_step` at which the payoff reaches the interpolated
/// continuation price; maturity if it never does. `path` holds the market state at
/// every date `0..=N`; `holdings` supplies the incoming holding for 5-D price tables.
pub fn worst_case_stopping<F: Real>(
    option: &OptionSpec<F>,
    policy: &PolicyTable<F>,
    path: &[MarketState<F>],
    holdings: Option<&HedgeSequence<F>>,
    from_step: usize,
) -> Result<usize> {
    let nn = policy.n_trading;
    if path.len() != nn + 1 || from_step >= nn {
        return Err(Error::IndexOutOfRange(format!("path of {} dates, from {from_step}", path.len())));
    }
    for k in from_step + 1..nn {
        let st = policy.step(k)?;
        let x = &path[k];
        let mut point = vec![x.s, x.i, x.v];
        if st.grid.delta.is_some() {
            let h = holdings.map(|h| h.at(k as isize - 1)).unwrap_or([F::zero(); 2]);
            point.extend_from_slice(&h);
        }
        let price = st.interpolate(Field::Price, &point)?;
        if option.payoff(x.s) >= price {
            return Ok(k);
        }
    }
    Ok(nn)
}
