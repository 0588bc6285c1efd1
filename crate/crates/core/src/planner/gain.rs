//! Covariance-trace information gain of hypothetical measurements.

use nalgebra::DMatrix;

use super::Scene;
use crate::field_map::{merge_observations, trace_reduction};
use crate::sensor::Viewpoint;

/// Reduction in `Tr(P)` from fusing the predicted observations of `vps`.
pub fn info_gain(cov: &DMatrix<f64>, vps: &[Viewpoint], scene: &Scene) -> f64 {
    let obs: Vec<(usize, f64)> = vps.iter().flat_map(|vp| scene.observations(vp)).collect();
    trace_reduction(cov, &obs).unwrap_or_else(|e| {
        log::warn!("info gain fell back to 0: {e}");
        0.0
    })
}

/// Evaluates many gains against one covariance. With `S = P_II + R` and
/// `G = (P²)_II` the gain is `tr(S⁻¹ G)`, so each call costs `O(m³)` once
/// `P²` is known.
pub struct GainEvaluator<'a> {
    cov: &'a DMatrix<f64>,
    cov_sq: DMatrix<f64>,
}

impl<'a> GainEvaluator<'a> {
    pub fn new(cov: &'a DMatrix<f64>) -> Self {
        Self {
            cov,
            cov_sq: cov * cov,
        }
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        self.cov
    }

    pub fn gain(&self, observations: &[(usize, f64)]) -> f64 {
        if observations.is_empty() {
            return 0.0;
        }
        let (idx, noise) = merge_observations(observations);
        let m = idx.len();
        let s = DMatrix::from_fn(m, m, |r, c| {
            let v = self.cov[(idx[r], idx[c])];
            if r == c {
                v + noise[r]
            } else {
                v
            }
        });
        let g = DMatrix::from_fn(m, m, |r, c| self.cov_sq[(idx[r], idx[c])]);
        match s.cholesky() {
            Some(ch) => ch.solve(&g).trace().max(0.0),
            None => {
                log::warn!("innovation matrix not positive definite; gain set to 0");
                0.0
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_spd(n: usize, seed: u64) -> DMatrix<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        a.transpose() * a + DMatrix::identity(n, n) * 0.01
    }

    #[test]
    fn scalar_case() {
        let cov = DMatrix::from_element(1, 1, 2.0);
        let ev = GainEvaluator::new(&cov);
        assert!((ev.gain(&[(0, 2.0)]) - 1.0).abs() < 1e-15);
        assert_eq!(ev.gain(&[]), 0.0);
    }

    proptest! {
        #[test]
        fn evaluator_matches_trace_reduction(seed in 0u64..1000, obs in proptest::collection::vec((0usize..12, 0.01f64..2.0), 1..20)) {
            let cov = random_spd(12, seed);
            let fast = GainEvaluator::new(&cov).gain(&obs);
            let slow = trace_reduction(&cov, &obs).unwrap();
            prop_assert!((fast - slow).abs() <= 1e-9 * (1.0 + slow));
        }
    }
}
