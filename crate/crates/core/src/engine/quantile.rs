use rayon::prelude::*;

use super::{EngineConfig, CHUNK};
use crate::error::Result;
use crate::grid::{axis_from_quantiles, GridAxis};
use crate::model::{simulate_from, stream_rng, Purpose, StreamId, VarianceTree};
use crate::scalar::Real;

/// S and I axes per trading date; entry 0 is the initial singleton.
#[derive(Debug, Clone, PartialEq)]
pub struct GridBounds<F> {
    pub s: Vec<GridAxis<F>>,
    pub i: Vec<GridAxis<F>>,
    /// Dates whose samples were degenerate in S or I.
    pub degenerate: Vec<usize>,
}

/// Simulates `M₀` paths from the initial state and places the S and I axes between the
/// configured empirical quantiles at every trading date.
pub fn quantile_pass<F: Real>(cfg: &EngineConfig<F>, tree: &VarianceTree<F>) -> Result<GridBounds<F>> {
    cfg.validate()?;
    let n = cfg.n_trading;
    let p = &cfg.params;
    let chunks: Vec<(usize, usize)> = (0..cfg.m_quantile)
        .step_by(CHUNK)
        .enumerate()
        .map(|(c, start)| (c, CHUNK.min(cfg.m_quantile - start)))
        .collect();
    let parts: Vec<_> = chunks
        .par_iter()
        .map(|&(c, m)| {
            let mut rng = stream_rng(StreamId::new(cfg.seed, Purpose::Quantile, 0, c));
            simulate_from(p, tree, n, 0, p.s0, F::zero(), tree.root(), m, &mut rng)
        })
        .collect();
    let mut bounds = GridBounds {
        s: vec![GridAxis::single(p.s0)],
        i: vec![GridAxis::single(F::zero())],
        degenerate: Vec::new(),
    };
    for k in 1..n {
        let s: Vec<F> = parts.iter().flat_map(|b| b.at(k).s1.iter().copied()).collect();
        let i: Vec<F> = parts.iter().flat_map(|b| b.at(k).i.iter().copied()).collect();
        let (sa, ds) = axis_from_quantiles(&s, cfg.quantile_lo, cfg.quantile_hi, cfg.n_s)?;
        let (ia, di) = axis_from_quantiles(&i, cfg.quantile_lo, cfg.quantile_hi, cfg.n_i)?;
        if ds || di {
            bounds.degenerate.push(k);
        }
        bounds.s.push(sa);
        bounds.i.push(ia);
    }
    Ok(bounds)
}
