use std::fmt::Write as _;

use super::{Field, PolicyTable};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Holding at one date as a function of the incoming holding, at a fixed market state.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSurface<F> {
    pub step: usize,
    pub prev1: Vec<F>,
    pub prev2: Vec<F>,
    /// `delta1[j2][j1]`: row = incoming δ², column = incoming δ¹.
    pub delta1: Vec<Vec<F>>,
    pub delta2: Vec<Vec<F>>,
}

impl<F: Real> DeltaSurface<F> {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("prev_delta1,prev_delta2,delta1,delta2\n");
        for (j2, &b) in self.prev2.iter().enumerate() {
            for (j1, &a) in self.prev1.iter().enumerate() {
                writeln!(out, "{a},{b},{},{}", self.delta1[j2][j1], self.delta2[j2][j1]).unwrap();
            }
        }
        out
    }

    /// Rectangular layout of the new δ¹: one row per incoming δ², one column per incoming δ¹.
    pub fn delta1_grid_csv(&self) -> String {
        self.grid_csv(&self.delta1)
    }

    pub fn delta2_grid_csv(&self) -> String {
        self.grid_csv(&self.delta2)
    }

    fn grid_csv(&self, values: &[Vec<F>]) -> String {
        let mut out = String::from("prev_delta2");
        for a in &self.prev1 {
            write!(out, ",{a}").unwrap();
        }
        out.push('\n');
        for (b, row) in self.prev2.iter().zip(values) {
            write!(out, "{b}").unwrap();
            for v in row {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Whether both holdings are non-decreasing in the incoming δ¹ along every row, up to `tol`.
    pub fn nondecreasing_in_prev1(&self, tol: F) -> bool {
        [&self.delta1, &self.delta2]
            .iter()
            .all(|m| m.iter().all(|row| row.windows(2).all(|w| w[1] >= w[0] - tol)))
    }
}

/// Projects the policy at `step` onto its incoming-holding axes at market state `fixed = (s, i, v)`.
pub fn export_delta_surface<F: Real>(policy: &PolicyTable<F>, step: usize, fixed: (F, F, F)) -> Result<DeltaSurface<F>> {
    let st = policy.step(step)?;
    let [a, b] = st.grid.delta.as_ref().ok_or(Error::NoDeltaAxes(step))?;
    let mut d1 = Vec::with_capacity(b.len());
    let mut d2 = Vec::with_capacity(b.len());
    for &y in b.nodes() {
        let mut r1 = Vec::with_capacity(a.len());
        let mut r2 = Vec::with_capacity(a.len());
        for &x in a.nodes() {
            let p = [fixed.0, fixed.1, fixed.2, x, y];
            r1.push(st.interpolate(Field::Delta1, &p)?);
            r2.push(st.interpolate(Field::Delta2, &p)?);
        }
        d1.push(r1);
        d2.push(r2);
    }
    Ok(DeltaSurface {
        step,
        prev1: a.nodes().to_vec(),
        prev2: b.nodes().to_vec(),
        delta1: d1,
        delta2: d2,
    })
}
