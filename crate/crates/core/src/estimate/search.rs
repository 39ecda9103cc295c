//! Parameter warping and start generation.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::ode::{ParamBounds, ParamScale};
use crate::seed::{self, stream};

/// Decades spanned by a log-scaled parameter whose lower bound is zero.
const ZERO_LO_DECADES: f64 = 8.0;

/// Starts are drawn in Latin-hypercube blocks of this size so that the
/// first `n` starts are the same whatever the total requested.
pub const LHS_BLOCK: usize = 10;

fn warp(b: &ParamBounds, u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    let v = match b.scale {
        ParamScale::Log if b.lo > 0.0 => b.lo * (b.hi / b.lo).powf(u),
        ParamScale::Log if b.lo == 0.0 => {
            let span = 10f64.powf(ZERO_LO_DECADES);
            b.hi * (10f64.powf(ZERO_LO_DECADES * u) - 1.0) / (span - 1.0)
        }
        _ => b.lo + (b.hi - b.lo) * u,
    };
    v.clamp(b.lo, b.hi)
}

fn unwarp(b: &ParamBounds, v: f64) -> f64 {
    let v = v.clamp(b.lo, b.hi);
    let u = match b.scale {
        ParamScale::Log if b.lo > 0.0 => (v / b.lo).ln() / (b.hi / b.lo).ln(),
        ParamScale::Log if b.lo == 0.0 => {
            let span = 10f64.powf(ZERO_LO_DECADES);
            (1.0 + v * (span - 1.0) / b.hi).log10() / ZERO_LO_DECADES
        }
        _ => (v - b.lo) / (b.hi - b.lo),
    };
    u.clamp(0.0, 1.0)
}

/// Map between the free parameters' unit cube and full parameter vectors.
#[derive(Debug, Clone)]
pub struct SearchSpace {
    bounds: Vec<ParamBounds>,
    free: Vec<usize>,
}

impl SearchSpace {
    pub fn new(bounds: &[ParamBounds]) -> Self {
        let free = (0..bounds.len()).filter(|&i| !bounds[i].is_fixed()).collect();
        Self {
            bounds: bounds.to_vec(),
            free,
        }
    }

    pub fn dim(&self) -> usize {
        self.free.len()
    }

    pub fn to_theta(&self, u: &[f64]) -> Vec<f64> {
        let mut theta: Vec<f64> = self.bounds.iter().map(|b| b.lo).collect();
        for (&i, &ui) in self.free.iter().zip(u) {
            theta[i] = warp(&self.bounds[i], ui);
        }
        theta
    }

    pub fn to_unit(&self, theta: &[f64]) -> Vec<f64> {
        self.free
            .iter()
            .map(|&i| unwarp(&self.bounds[i], theta[i]))
            .collect()
    }
}

/// Unit-cube start points: the given points first, then Latin-hypercube
/// blocks keyed by `seed`.
pub fn start_points(space: &SearchSpace, initial: &[Vec<f64>], n_starts: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = initial.iter().map(|t| space.to_unit(t)).collect();
    let d = space.dim();
    let mut block_idx = 0u64;
    while out.len() < n_starts.max(initial.len()) {
        let mut rng = seed::rng(&[seed, stream::OPTIMIZER, block_idx]);
        let mut block = vec![vec![0.0; d]; LHS_BLOCK];
        for j in 0..d {
            let mut perm: Vec<usize> = (0..LHS_BLOCK).collect();
            perm.shuffle(&mut rng);
            for (p, row) in block.iter_mut().enumerate() {
                row[j] = (perm[p] as f64 + rng.random::<f64>()) / LHS_BLOCK as f64;
            }
        }
        let need = n_starts - out.len();
        out.extend(block.into_iter().take(need));
        block_idx += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn warps_hit_the_bounds() {
        for b in [
            ParamBounds::linear(-2.0, 3.0),
            ParamBounds::log(1e-3, 10.0),
            ParamBounds::log(0.0, 1.0),
        ] {
            assert_eq!(warp(&b, 0.0), b.lo);
            assert!((warp(&b, 1.0) - b.hi).abs() <= 1e-12 * b.hi.abs());
        }
    }

    #[test]
    fn fixed_parameters_are_not_searched() {
        let s = SearchSpace::new(&[ParamBounds::fixed(0.0), ParamBounds::linear(0.0, 1.0)]);
        assert_eq!(s.dim(), 1);
        assert_eq!(s.to_theta(&[0.25]), vec![0.0, 0.25]);
    }

    #[test]
    fn start_sets_are_nested() {
        let s = SearchSpace::new(&[ParamBounds::linear(0.0, 1.0); 3]);
        let a = start_points(&s, &[], 7, 11);
        let b = start_points(&s, &[], 23, 11);
        assert_eq!(&b[..7], &a[..]);
        assert_ne!(start_points(&s, &[], 7, 12), a);
    }

    #[test]
    fn one_block_is_a_latin_hypercube() {
        let s = SearchSpace::new(&[ParamBounds::linear(0.0, 1.0); 4]);
        let pts = start_points(&s, &[], LHS_BLOCK, 5);
        for j in 0..4 {
            let mut cells: Vec<usize> = pts.iter().map(|p| (p[j] * LHS_BLOCK as f64) as usize).collect();
            cells.sort();
            assert_eq!(cells, (0..LHS_BLOCK).collect::<Vec<_>>());
        }
    }

    proptest! {
        #[test]
        fn warp_round_trips(u in 0.0f64..=1.0, which in 0usize..3) {
            let b = [
                ParamBounds::linear(1.0, 1000.0),
                ParamBounds::log(1e-4, 1e2),
                ParamBounds::log(0.0, 1.0),
            ][which];
            let v = warp(&b, u);
            prop_assert!(b.contains(v));
            prop_assert!((unwarp(&b, v) - u).abs() < 1e-9);
        }
    }
}
