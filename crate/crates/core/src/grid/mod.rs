//! Per-step state grids, policy tables and multilinear interpolation.

mod policy;
mod serial;
mod surface;

pub use policy::{multilinear_interpolate, Corners, Field, PolicyStep, PolicyTable, StateGrid};
pub use serial::{parse_policy, write_policy};
pub use surface::{export_delta_surface, DeltaSurface};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Strictly increasing, non-empty list of node coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis<F> {
    nodes: Vec<F>,
}

impl<F: Real> GridAxis<F> {
    pub fn new(nodes: Vec<F>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidParameter("axis needs at least one node".into()));
        }
        if nodes.iter().any(|x| !x.is_finite()) || nodes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter("axis nodes must be finite and strictly increasing".into()));
        }
        Ok(Self { nodes })
    }

    pub fn single(x: F) -> Self {
        Self { nodes: vec![x] }
    }

    /// `count` equally spaced nodes from `lo` to `hi`; collapses to one node when `lo == hi`.
    pub fn uniform(lo: F, hi: F, count: usize) -> Result<Self> {
        if count == 0 || !(lo <= hi) {
            return Err(Error::InvalidParameter(format!("bad uniform axis [{lo}, {hi}] x {count}")));
        }
        if lo == hi {
            return Ok(Self::single(lo));
        }
        if count == 1 {
            return Ok(Self::single((lo + hi) * F::lit(0.5)));
        }
        let last = F::from_usize_lossy(count - 1);
        let mut nodes: Vec<F> = (0..count)
            .map(|j| lo + (hi - lo) * F::from_usize_lossy(j) / last)
            .collect();
        nodes[count - 1] = hi;
        Self::new(nodes)
    }

    pub fn nodes(&self) -> &[F] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min(&self) -> F {
        self.nodes[0]
    }

    pub fn max(&self) -> F {
        self.nodes[self.nodes.len() - 1]
    }

    /// Lower node of the cell containing `x` after clamping, and the weight of the
    /// next node. The weight is exactly zero on nodes, including the last one.
    #[inline]
    pub fn locate(&self, x: F) -> (usize, F) {
        let n = self.nodes.len();
        if n == 1 || !(x > self.nodes[0]) {
            return (0, F::zero());
        }
        if x >= self.nodes[n - 1] {
            return (n - 1, F::zero());
        }
        let c = self.nodes.partition_point(|&a| a <= x) - 1;
        let w = (x - self.nodes[c]) / (self.nodes[c + 1] - self.nodes[c]);
        (c, w)
    }

    pub fn index_of(&self, x: F) -> Option<usize> {
        self.nodes.iter().position(|&a| a == x)
    }
}

/// Nearest-rank empirical quantile of sorted data.
pub fn quantile_sorted<F: Real>(sorted: &[F], q: F) -> F {
    let n = sorted.len();
    let rank = (q.to_f64().unwrap_or(0.0) * n as f64 * (1.0 - 1e-12)).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Uniform axis between two empirical quantiles.
///
/// Returns the axis and whether the samples were degenerate (quantiles equal), in
/// which case the axis has a single node.
pub fn axis_from_quantiles<F: Real>(samples: &[F], q_lo: F, q_hi: F, count: usize) -> Result<(GridAxis<F>, bool)> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if count == 0 || !(q_lo >= F::zero() && q_lo < q_hi && q_hi <= F::one()) {
        return Err(Error::InvalidParameter(format!("bad quantile axis ({q_lo}, {q_hi}) x {count}")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let lo = quantile_sorted(&sorted, q_lo);
    let hi = quantile_sorted(&sorted, q_hi);
    if lo == hi {
        return Ok((GridAxis::single(lo), true));
    }
    Ok((GridAxis::uniform(lo, hi, count)?, false))
}

/// Widens the axis range to contain 0, keeping the node count (at least two nodes if widened).
pub fn extend_axis_to_zero<F: Real>(axis: &GridAxis<F>) -> GridAxis<F> {
    let (lo, hi) = (axis.min(), axis.max());
    if lo <= F::zero() && hi >= F::zero() {
        return axis.clone();
    }
    let (lo, hi) = (lo.min(F::zero()), hi.max(F::zero()));
    GridAxis::uniform(lo, hi, axis.len().max(2)).expect("valid widened range")
}

#[inline]
pub fn clamp_delta<F: Real>(value: F, axis: &GridAxis<F>) -> F {
    value.max(axis.min()).min(axis.max())
}
