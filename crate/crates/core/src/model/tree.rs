use super::{cir_moments_unchecked, HestonParams};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Lattice spacing in √V units, as a fraction of the one-step standard deviation of √V.
const SPACING: f64 = 0.7;
/// Lattice half-width in standard deviations of √V over the whole horizon.
const WIDTH: f64 = 2.0;
/// Negative probabilities this small are treated as rounding noise.
const PROB_SLACK: f64 = 1e-13;

/// One-step transition of a lattice node: successors ordered down, middle, up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition<F> {
    pub succ: [usize; 3],
    pub prob: [F; 3],
    /// Moments could not both be matched; the split only preserves the mean.
    pub flagged: bool,
}

/// Trinomial tree for the CIR variance on a fixed lattice in √V.
///
/// Every level is the subset of lattice nodes reachable from `v0`; transitions
/// depend only on the lattice node since the time step is constant.
#[derive(Debug, Clone)]
pub struct VarianceTree<F> {
    pub n_steps: usize,
    pub dt: F,
    lattice: Vec<F>,
    transitions: Vec<Transition<F>>,
    levels: Vec<Vec<usize>>,
    position: Vec<Vec<u32>>,
}

impl<F: Real> VarianceTree<F> {
    pub fn lattice(&self) -> &[F] {
        &self.lattice
    }

    pub fn transition(&self, node: usize) -> &Transition<F> {
        &self.transitions[node]
    }

    /// Lattice indices of the nodes at simulation step `k`, ascending in value.
    pub fn level(&self, k: usize) -> &[usize] {
        &self.levels[k]
    }

    pub fn level_values(&self, k: usize) -> Vec<F> {
        self.levels[k].iter().map(|&j| self.lattice[j]).collect()
    }

    /// Position of lattice node `node` within level `k`.
    #[inline]
    pub fn position(&self, k: usize, node: usize) -> Option<usize> {
        match self.position[k][node] {
            u32::MAX => None,
            p => Some(p as usize),
        }
    }

    /// Lattice index of the level-`k` node whose value equals `v` exactly.
    pub fn find(&self, k: usize, v: F) -> Option<usize> {
        self.levels
            .get(k)?
            .iter()
            .copied()
            .find(|&j| self.lattice[j] == v)
    }

    pub fn root(&self) -> usize {
        self.levels[0][0]
    }

    pub fn flagged_nodes(&self) -> Vec<usize> {
        (0..self.lattice.len())
            .filter(|&j| self.transitions[j].flagged)
            .collect()
    }

    /// Samples the successor of `node` from a uniform draw `u` in [0, 1).
    #[inline]
    pub fn step(&self, node: usize, u: F) -> usize {
        let t = &self.transitions[node];
        if u < t.prob[0] {
            t.succ[0]
        } else if u < t.prob[0] + t.prob[1] || t.prob[2] == F::zero() {
            if t.prob[1] == F::zero() {
                t.succ[0]
            } else {
                t.succ[1]
            }
        } else {
            t.succ[2]
        }
    }
}

fn solve_probs<F: Real>(lat: &[F], d: usize, m: usize, u: usize, mean: F, var: F) -> [F; 3] {
    let xu = lat[u] - lat[m];
    let xd = lat[d] - lat[m];
    let mu = mean - lat[m];
    let m2 = var + mu * mu;
    let pu = (m2 - mu * xd) / (xu * (xu - xd));
    let pd = (m2 - mu * xu) / (xd * (xd - xu));
    [pd, F::one() - pu - pd, pu]
}

fn lattice_nodes<F: Real>(p: &HestonParams<F>, dt: F) -> Vec<F> {
    let two = F::lit(2.0);
    let sv0 = p.v0.sqrt();
    let mut h = F::lit(SPACING) * p.sigma / two * dt.sqrt();
    let floor = F::lit(1e-4) * sv0.max(p.b.sqrt()).max(F::lit(1e-2));
    if h < floor {
        h = floor;
    }
    let reach = F::lit(WIDTH) * p.sigma / two * p.maturity.sqrt();
    // cover the drift of the mean towards b as well as the diffusion around it
    let drift = (p.b + (p.v0 - p.b) * (-p.alpha * p.maturity).exp()).max(F::zero()).sqrt() - sv0;
    let count = |x: F| (x / h).ceil().to_usize().unwrap_or(2).max(2);
    let above = count(reach + drift.max(F::zero()));
    let below = count(reach - drift.min(F::zero()));

    let mut nodes = vec![p.v0];
    for j in 1..=above {
        let x = sv0 + F::from_usize_lossy(j) * h;
        nodes.push(x * x);
    }
    for j in 1..=below {
        let x = sv0 - F::from_usize_lossy(j) * h;
        if x <= F::lit(1e-9) * h {
            nodes.push(F::zero());
            break;
        }
        nodes.push(x * x);
    }
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    nodes.dedup();
    nodes
}

fn node_transition<F: Real>(lat: &[F], mean: F, var: F) -> Transition<F> {
    let l = lat.len();
    let slack = F::lit(-PROB_SLACK);
    for s in 2..l {
        for d in 0..l - s {
            let u = d + s;
            if !(lat[d] <= mean && mean <= lat[u]) {
                continue;
            }
            let mut mids: Vec<usize> = (d + 1..u).collect();
            mids.sort_by(|&a, &b| {
                (lat[a] - mean)
                    .abs()
                    .partial_cmp(&(lat[b] - mean).abs())
                    .unwrap()
                    .then(a.cmp(&b))
            });
            for m in mids {
                let p = solve_probs(lat, d, m, u, mean, var);
                if p.iter().all(|&x| x >= slack && x <= F::one() - slack) {
                    let pd = p[0].max(F::zero());
                    let pu = p[2].max(F::zero());
                    return Transition {
                        succ: [d, m, u],
                        prob: [pd, F::one() - pd - pu, pu],
                        flagged: false,
                    };
                }
            }
        }
    }
    // Mean-preserving split over the adjacent bracketing pair.
    if mean >= lat[l - 1] {
        return Transition {
            succ: [l - 1; 3],
            prob: [F::zero(), F::one(), F::zero()],
            flagged: true,
        };
    }
    if mean <= lat[0] {
        return Transition {
            succ: [0; 3],
            prob: [F::zero(), F::one(), F::zero()],
            flagged: true,
        };
    }
    let hi = lat.partition_point(|&x| x <= mean);
    let lo = hi - 1;
    let w = (mean - lat[lo]) / (lat[hi] - lat[lo]);
    Transition {
        succ: [lo, hi, hi],
        prob: [F::one() - w, w, F::zero()],
        flagged: true,
    }
}

/// Builds the moment-matched variance tree with `n_steps` steps over `[0, T]`.
pub fn build_variance_tree<F: Real>(params: &HestonParams<F>, n_steps: usize) -> Result<VarianceTree<F>> {
    params.validate()?;
    if n_steps == 0 {
        return Err(Error::InvalidParameter("tree needs at least one step".into()));
    }
    let dt = params.maturity / F::from_usize_lossy(n_steps);
    let lattice = lattice_nodes(params, dt);
    let transitions: Vec<_> = lattice
        .iter()
        .map(|&v| {
            let (mean, var) = cir_moments_unchecked(v, dt, params);
            node_transition(&lattice, mean, var)
        })
        .collect();

    let root = lattice.iter().position(|&x| x == params.v0).expect("v0 on lattice");
    let mut levels = vec![vec![root]];
    for k in 0..n_steps {
        let mut next: Vec<usize> = Vec::new();
        for &j in &levels[k] {
            let t = &transitions[j];
            for b in 0..3 {
                if t.prob[b] > F::zero() {
                    next.push(t.succ[b]);
                }
            }
        }
        next.sort_unstable();
        next.dedup();
        levels.push(next);
    }
    let position = levels
        .iter()
        .map(|lv| {
            let mut pos = vec![u32::MAX; lattice.len()];
            for (p, &j) in lv.iter().enumerate() {
                pos[j] = p as u32;
            }
            pos
        })
        .collect();
    Ok(VarianceTree {
        n_steps,
        dt,
        lattice,
        transitions,
        levels,
        position,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::cir_conditional_moments;

    fn moments(tree: &VarianceTree<f64>, j: usize) -> (f64, f64) {
        let t = tree.transition(j);
        let lat = tree.lattice();
        let m: f64 = (0..3).map(|b| t.prob[b] * lat[t.succ[b]]).sum();
        let m2: f64 = (0..3).map(|b| t.prob[b] * lat[t.succ[b]] * lat[t.succ[b]]).sum();
        (m, m2)
    }

    #[test]
    fn reference_tree_matches_cir_moments() {
        let p = HestonParams::reference(0.0);
        let tree = build_variance_tree(&p, 16).unwrap();
        assert_eq!(tree.level_values(0), vec![0.04]);
        assert!(tree.flagged_nodes().is_empty());
        for k in 0..16 {
            for &j in tree.level(k) {
                let t = tree.transition(j);
                let s: f64 = t.prob.iter().sum();
                assert!((s - 1.0).abs() < 1e-12);
                assert!(t.prob.iter().all(|&x| (0.0..=1.0).contains(&x)));
                let v = tree.lattice()[j];
                let (mean, var) = cir_conditional_moments(v, tree.dt, &p).unwrap();
                let (m, m2) = moments(&tree, j);
                assert!((m - mean).abs() < 1e-12, "mean at {v}");
                assert!((m2 - (var + mean * mean)).abs() < 1e-12, "second moment at {v}");
            }
        }
    }

    #[test]
    fn single_step_tree() {
        let p = HestonParams::reference(0.0);
        let tree = build_variance_tree(&p, 1).unwrap();
        assert_eq!(tree.level_values(0), vec![p.v0]);
        assert!(tree.level(1).len() <= 3);
        let s: f64 = tree.transition(tree.root()).prob.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_variance_concentrates() {
        let mut p = HestonParams::reference(0.0);
        p.sigma = 1e-9;
        let tree = build_variance_tree(&p, 16).unwrap();
        let t = tree.transition(tree.root());
        let mid = t.prob[1];
        assert!(mid > 1.0 - 1e-9);
        assert_eq!(tree.lattice()[t.succ[1]], p.b);
    }

    #[test]
    fn zero_is_a_node_and_reachable_levels_grow() {
        let p = HestonParams::reference(0.0);
        let tree = build_variance_tree(&p, 16).unwrap();
        assert_eq!(tree.lattice()[0], 0.0);
        assert!(tree.level(16).len() >= tree.level(1).len());
        for k in 0..=16 {
            for (pos, &j) in tree.level(k).iter().enumerate() {
                assert_eq!(tree.position(k, j), Some(pos));
            }
        }
    }
}
