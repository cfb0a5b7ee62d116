use rand::Rng;

use super::{stream_rng, swap_price_unchecked, HestonParams, StreamId, VarianceTree};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Market state at a trading date: spot, integrated variance so far, variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketState<F> {
    pub step_index: usize,
    pub s: F,
    pub i: F,
    pub v: F,
}

/// Values of all paths at one trading date.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TradingSlice<F> {
    pub s1: Vec<F>,
    pub s2: Vec<F>,
    pub i: Vec<F>,
    pub v: Vec<F>,
    /// Position of `v` within the tree level of this trading date.
    pub v_node: Vec<u32>,
}

/// `m` paths simulated from a common state, sampled at the trading dates after `from_step`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle<F> {
    pub m: usize,
    pub from_step: usize,
    pub n_trading: usize,
    pub stream: Option<StreamId>,
    slices: Vec<TradingSlice<F>>,
}

impl<F: Real> PathBundle<F> {
    /// Values at trading date `k`, `from_step < k <= n_trading`.
    pub fn at(&self, k: usize) -> &TradingSlice<F> {
        &self.slices[k - self.from_step - 1]
    }

    pub fn slices(&self) -> &[TradingSlice<F>] {
        &self.slices
    }
}

fn sub_steps<F>(tree: &VarianceTree<F>, n_trading: usize) -> Result<usize> {
    if n_trading == 0 || tree.n_steps % n_trading != 0 {
        return Err(Error::InvalidParameter(format!(
            "simulation steps {} not a multiple of trading dates {}",
            tree.n_steps, n_trading
        )));
    }
    Ok(tree.n_steps / n_trading)
}

/// Simulates `m` paths from `state` on the tree-driven hybrid scheme.
pub fn simulate_paths<F: Real>(
    params: &HestonParams<F>,
    tree: &VarianceTree<F>,
    state: &MarketState<F>,
    n_trading: usize,
    m: usize,
    stream: StreamId,
) -> Result<PathBundle<F>> {
    let sub = sub_steps(tree, n_trading)?;
    if state.step_index >= n_trading {
        return Err(Error::IndexOutOfRange(format!(
            "state step {} not before maturity {}",
            state.step_index, n_trading
        )));
    }
    if !(state.s > F::zero()) || !(state.i >= F::zero()) {
        return Err(Error::InvalidParameter("state needs s > 0 and i >= 0".into()));
    }
    let level = state.step_index * sub;
    let node = tree
        .find(level, state.v)
        .ok_or_else(|| Error::OffTree(state.v.to_f64().unwrap_or(f64::NAN), level))?;
    let mut rng = stream_rng(stream);
    let mut bundle = simulate_from(
        params,
        tree,
        n_trading,
        state.step_index,
        state.s,
        state.i,
        node,
        m,
        &mut rng,
    );
    bundle.stream = Some(stream);
    Ok(bundle)
}

/// Lockstep simulation from lattice node `node` at trading date `from`.
/// Draw order is fixed: per simulation step, per path, one uniform then one normal.
#[allow(clippy::too_many_arguments)]
pub(crate) fn simulate_from<F: Real, R: Rng + ?Sized>(
    p: &HestonParams<F>,
    tree: &VarianceTree<F>,
    n_trading: usize,
    from: usize,
    s: F,
    i: F,
    node: usize,
    m: usize,
    rng: &mut R,
) -> PathBundle<F> {
    let sub = tree.n_steps / n_trading;
    let dt = tree.dt;
    let lat = tree.lattice();
    let half = F::lit(0.5);
    let half_dt = half * dt;
    let rho_s = p.rho_bw / p.sigma;
    let resid = (F::one() - p.rho_bw * p.rho_bw).max(F::zero());
    let drift = p.mu * dt - p.rho_bw / p.sigma * p.alpha * p.b * dt;
    let kick = half - rho_s * p.alpha;

    let mut lns = vec![s.ln(); m];
    let mut iv = vec![i; m];
    let mut nodes = vec![node; m];
    let mut slices = Vec::with_capacity(n_trading - from);
    for k in from + 1..=n_trading {
        for _ in 0..sub {
            for q in 0..m {
                let u = F::unit(rng);
                let z = F::standard_normal(rng);
                let j = nodes[q];
                let j1 = tree.step(j, u);
                let v = lat[j];
                let v1 = lat[j1];
                let ibar = (v + v1) * half_dt;
                lns[q] = lns[q] + drift + rho_s * (v1 - v) - kick * ibar + (resid * ibar).sqrt() * z;
                iv[q] = iv[q] + ibar;
                nodes[q] = j1;
            }
        }
        let level = k * sub;
        let t = p.maturity * F::from_usize_lossy(k) / F::from_usize_lossy(n_trading);
        let mut sl = TradingSlice {
            s1: Vec::with_capacity(m),
            s2: Vec::with_capacity(m),
            i: iv.clone(),
            v: Vec::with_capacity(m),
            v_node: Vec::with_capacity(m),
        };
        for q in 0..m {
            let v = lat[nodes[q]];
            sl.s1.push(lns[q].exp());
            sl.v.push(v);
            sl.v_node.push(tree.position(level, nodes[q]).expect("reachable node") as u32);
            sl.s2.push(swap_price_unchecked(t, iv[q], v, p));
        }
        slices.push(sl);
    }
    PathBundle {
        m,
        from_step: from,
        n_trading,
        stream: None,
        slices,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_variance_tree, Purpose};

    fn start(p: &HestonParams<f64>) -> MarketState<f64> {
        MarketState {
            step_index: 0,
            s: p.s0,
            i: 0.0,
            v: p.v0,
        }
    }

    #[test]
    fn same_stream_same_paths() {
        let p = HestonParams::reference(0.0);
        let tree = build_variance_tree(&p, 16).unwrap();
        let id = StreamId::new(5, Purpose::Test, 0, 0);
        let a = simulate_paths(&p, &tree, &start(&p), 4, 1, id).unwrap();
        let b = simulate_paths(&p, &tree, &start(&p), 4, 1, id).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_off_tree_variance() {
        let p = HestonParams::reference(0.0);
        let tree = build_variance_tree(&p, 16).unwrap();
        let mut st = start(&p);
        st.v = 0.041;
        let id = StreamId::new(5, Purpose::Test, 0, 0);
        assert!(matches!(
            simulate_paths(&p, &tree, &st, 4, 10, id),
            Err(Error::OffTree(..))
        ));
        assert!(simulate_paths(&p, &tree, &start(&p), 5, 10, id).is_err());
    }

    #[test]
    fn path_invariants() {
        let p = HestonParams::reference(0.1);
        let tree = build_variance_tree(&p, 16).unwrap();
        let id = StreamId::new(9, Purpose::Test, 0, 0);
        let b = simulate_paths(&p, &tree, &start(&p), 8, 500, id).unwrap();
        for k in 1..=8 {
            let sl = b.at(k);
            let level = tree.level_values(k * 2);
            for q in 0..b.m {
                assert!(sl.s1[q] > 0.0 && sl.s2[q] > 0.0);
                assert_eq!(level[sl.v_node[q] as usize].to_bits(), sl.v[q].to_bits());
                if k > 1 {
                    assert!(sl.i[q] >= b.at(k - 1).i[q]);
                }
            }
        }
        let last = b.at(8);
        for q in 0..b.m {
            assert!((last.s2[q] - last.i[q]).abs() <= 1e-12);
        }
    }
}
