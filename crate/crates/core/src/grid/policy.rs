use super::GridAxis;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Grid of market states at one trading date, optionally with incoming-holding axes.
#[derive(Debug, Clone, PartialEq)]
pub struct StateGrid<F> {
    pub step: usize,
    pub s: GridAxis<F>,
    pub i: GridAxis<F>,
    pub v: GridAxis<F>,
    pub delta: Option<[GridAxis<F>; 2]>,
}

/// Interpolation stencil over up to four interpolated axes. Corner `c` takes the
/// upper node along axis `k` when bit `k` of `c` is set.
#[derive(Debug, Clone, Copy)]
pub struct Corners<F> {
    pub idx: [usize; 16],
    pub w: [F; 4],
    pub dims: usize,
}

impl<F: Real> Corners<F> {
    /// Nested linear interpolation, one axis at a time; exact on nodes and on constants.
    #[inline]
    pub fn apply(&self, field: &[F]) -> F {
        let mut vals = [F::zero(); 16];
        let n = 1usize << self.dims;
        for c in 0..n {
            vals[c] = field[self.idx[c]];
        }
        for k in (0..self.dims).rev() {
            let half = 1usize << k;
            let w = self.w[k];
            for j in 0..half {
                vals[j] = vals[j] + w * (vals[j + half] - vals[j]);
            }
        }
        vals[0]
    }

    /// Like [`Corners::apply`] with every corner index shifted by `offset`.
    #[inline]
    pub fn apply_offset(&self, field: &[F], offset: usize) -> F {
        let mut vals = [F::zero(); 16];
        let n = 1usize << self.dims;
        for c in 0..n {
            vals[c] = field[self.idx[c] + offset];
        }
        for k in (0..self.dims).rev() {
            let half = 1usize << k;
            let w = self.w[k];
            for j in 0..half {
                vals[j] = vals[j] + w * (vals[j + half] - vals[j]);
            }
        }
        vals[0]
    }

    /// Product weight of corner `c`.
    pub fn weight(&self, c: usize) -> F {
        (0..self.dims).fold(F::one(), |acc, k| {
            if c >> k & 1 == 1 {
                acc * self.w[k]
            } else {
                acc * (F::one() - self.w[k])
            }
        })
    }
}

impl<F: Real> StateGrid<F> {
    /// Singleton grid holding only the initial state.
    pub fn initial(s0: F, v0: F, with_delta: bool) -> Self {
        Self {
            step: 0,
            s: GridAxis::single(s0),
            i: GridAxis::single(F::zero()),
            v: GridAxis::single(v0),
            delta: with_delta.then(|| [GridAxis::single(F::zero()), GridAxis::single(F::zero())]),
        }
    }

    /// Axis lengths in (S, I, V, δ¹, δ²) order, 1 for absent axes.
    pub fn shape(&self) -> [usize; 5] {
        let (a, b) = match &self.delta {
            Some([a, b]) => (a.len(), b.len()),
            None => (1, 1),
        };
        [self.s.len(), self.i.len(), self.v.len(), a, b]
    }

    pub fn dims(&self) -> usize {
        if self.delta.is_some() {
            5
        } else {
            3
        }
    }

    pub fn len(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Row-major node index, S slowest and δ² fastest.
    #[inline]
    pub fn index(&self, at: [usize; 5]) -> usize {
        let sh = self.shape();
        (((at[0] * sh[1] + at[1]) * sh[2] + at[2]) * sh[3] + at[3]) * sh[4] + at[4]
    }

    pub fn unravel(&self, mut idx: usize) -> [usize; 5] {
        let sh = self.shape();
        let mut at = [0; 5];
        for d in (0..5).rev() {
            at[d] = idx % sh[d];
            idx /= sh[d];
        }
        at
    }

    /// Coordinates of a node, in (S, I, V[, δ¹, δ²]) order.
    pub fn coords(&self, idx: usize) -> Vec<F> {
        let at = self.unravel(idx);
        let mut c = vec![self.s.nodes()[at[0]], self.i.nodes()[at[1]], self.v.nodes()[at[2]]];
        if let Some([a, b]) = &self.delta {
            c.push(a.nodes()[at[3]]);
            c.push(b.nodes()[at[4]]);
        }
        c
    }

    /// Stencil for a point given with the V axis position instead of its value.
    #[inline]
    pub fn corners_at(&self, s: F, i: F, iv: usize, d: Option<[F; 2]>) -> Corners<F> {
        let sh = self.shape();
        let mut cells = [(0usize, F::zero()); 4];
        cells[0] = self.s.locate(s);
        cells[1] = self.i.locate(i);
        let mut dims = 2;
        if let (Some([a, b]), Some(d)) = (&self.delta, d) {
            cells[2] = a.locate(d[0]);
            cells[3] = b.locate(d[1]);
            dims = 4;
        }
        let slot = [0usize, 1, 3, 4];
        let mut out = Corners {
            idx: [0; 16],
            w: [F::zero(); 4],
            dims,
        };
        for k in 0..dims {
            out.w[k] = cells[k].1;
        }
        for mask in 0..(1usize << dims) {
            let mut at = [0usize, 0, iv, 0, 0];
            for k in 0..dims {
                let c = cells[k].0;
                let n = sh[slot[k]];
                at[slot[k]] = if mask >> k & 1 == 1 && c + 1 < n { c + 1 } else { c };
            }
            out.idx[mask] = self.index(at);
        }
        out
    }

    /// Stencil for a point in (S, I, V[, δ¹, δ²]) coordinates; V must be a node.
    pub fn corners(&self, point: &[F]) -> Result<Corners<F>> {
        if point.len() != self.dims() {
            return Err(Error::InvalidParameter(format!(
                "point has {} coordinates, grid has {}",
                point.len(),
                self.dims()
            )));
        }
        let iv = self
            .v
            .index_of(point[2])
            .ok_or_else(|| Error::OffTree(point[2].to_f64().unwrap_or(f64::NAN), self.step))?;
        let d = (point.len() == 5).then(|| [point[3], point[4]]);
        Ok(self.corners_at(point[0], point[1], iv, d))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Delta1,
    Delta2,
    Price,
}

/// Solved policy at one trading date.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyStep<F> {
    pub grid: StateGrid<F>,
    pub delta1: Vec<F>,
    pub delta2: Vec<F>,
    /// Continuation price per node, American exercise only (money at this date).
    pub price: Option<Vec<F>>,
    /// Range each holding is clamped to when played forward.
    pub clamp: Option<[[F; 2]; 2]>,
}

impl<F: Real> PolicyStep<F> {
    pub fn field(&self, f: Field) -> Option<&[F]> {
        match f {
            Field::Delta1 => Some(&self.delta1),
            Field::Delta2 => Some(&self.delta2),
            Field::Price => self.price.as_deref(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.grid.len();
        let ok_len = self.delta1.len() == n
            && self.delta2.len() == n
            && self.price.as_ref().map_or(true, |p| p.len() == n);
        let finite = self
            .delta1
            .iter()
            .chain(&self.delta2)
            .chain(self.price.iter().flatten())
            .all(|x| x.is_finite());
        if !ok_len || !finite {
            return Err(Error::InvalidParameter(format!(
                "policy step {} arrays do not match its grid or are not finite",
                self.grid.step
            )));
        }
        Ok(())
    }

    /// Clamps a holding pair to the stored range, if any.
    #[inline]
    pub fn clamp(&self, d: [F; 2]) -> [F; 2] {
        match &self.clamp {
            Some(c) => [d[0].max(c[0][0]).min(c[0][1]), d[1].max(c[1][0]).min(c[1][1])],
            None => d,
        }
    }

    pub fn interpolate(&self, f: Field, point: &[F]) -> Result<F> {
        let field = self.field(f).ok_or(Error::MissingPolicy(self.grid.step))?;
        Ok(self.grid.corners(point)?.apply(field))
    }
}

/// Policy at trading dates `0..N`; date 0 holds the singleton initial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable<F> {
    pub n_trading: usize,
    pub steps: Vec<PolicyStep<F>>,
}

impl<F: Real> PolicyTable<F> {
    pub fn step(&self, n: usize) -> Result<&PolicyStep<F>> {
        self.steps.get(n).ok_or(Error::MissingPolicy(n))
    }

    pub fn initial_deltas(&self) -> [F; 2] {
        [self.steps[0].delta1[0], self.steps[0].delta2[0]]
    }
}

/// Multilinear interpolation of one policy field; see [`StateGrid::corners`].
pub fn multilinear_interpolate<F: Real>(step: &PolicyStep<F>, f: Field, point: &[F]) -> Result<F> {
    step.interpolate(f, point)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid5() -> StateGrid<f64> {
        StateGrid {
            step: 2,
            s: GridAxis::new(vec![90.0, 100.0, 110.0]).unwrap(),
            i: GridAxis::new(vec![0.0, 0.1]).unwrap(),
            v: GridAxis::new(vec![0.01, 0.04]).unwrap(),
            delta: Some([
                GridAxis::new(vec![-1.0, 0.0]).unwrap(),
                GridAxis::new(vec![0.0, 1.0, 2.0]).unwrap(),
            ]),
        }
    }

    #[test]
    fn index_round_trip() {
        let g = grid5();
        for idx in 0..g.len() {
            assert_eq!(g.index(g.unravel(idx)), idx);
        }
    }

    #[test]
    fn exact_on_nodes() {
        let g = grid5();
        let vals: Vec<f64> = (0..g.len()).map(|k| (k as f64 * 0.37).sin()).collect();
        let step = PolicyStep {
            grid: g.clone(),
            delta1: vals.clone(),
            delta2: vals.clone(),
            price: None,
            clamp: None,
        };
        for idx in 0..g.len() {
            let p = g.coords(idx);
            assert_eq!(step.interpolate(Field::Delta1, &p).unwrap(), vals[idx]);
        }
        assert!(step.interpolate(Field::Price, &g.coords(0)).is_err());
        let mut off = g.coords(0);
        off[2] = 0.02;
        assert!(step.interpolate(Field::Delta1, &off).is_err());
    }

    #[test]
    fn one_dimensional_segment() {
        let g = StateGrid {
            step: 1,
            s: GridAxis::new(vec![0.0, 1.0]).unwrap(),
            i: GridAxis::single(0.0),
            v: GridAxis::single(0.04),
            delta: None,
        };
        let step = PolicyStep {
            grid: g,
            delta1: vec![10.0, 20.0],
            delta2: vec![0.0, 0.0],
            price: None,
            clamp: None,
        };
        let x = step.interpolate(Field::Delta1, &[0.25, 0.0, 0.04]).unwrap();
        assert_eq!(x, 12.5);
        let y = step.interpolate(Field::Delta1, &[7.0, 3.0, 0.04]).unwrap();
        assert_eq!(y, 20.0);
    }
}
