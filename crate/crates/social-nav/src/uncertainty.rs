//! Disentangled uncertainty estimation from repeated stochastic probes of the
//! policy at a fixed observation.
//!
//! A probe set comes either from Monte-Carlo dropout (one network, `K`
//! forward passes with test-rate dropout masks) or from a deep ensemble (`K`
//! independently trained networks, one clean pass each). Either way each
//! probe yields an action mean, a predicted action variance, and the
//! extractor feature vector, and the same estimators apply:
//!
//! * **epistemic** (per action dimension): population variance of the probe
//!   means — disagreement between probes;
//! * **aleatoric** (per action dimension): mean of the predicted variances —
//!   the noise the policy itself reports;
//! * **feature variance** (per feature): population variance of the feature
//!   entries across probes, condensed to one scalar by
//!   [`feature_uncertainty_dropout`] or [`feature_uncertainty_ensemble`].
//!
//! Population variance uses the `1/K` normalizer throughout, not `1/(K-1)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum UncertaintyError {
    #[error("need at least one probe to estimate uncertainty")]
    EmptySampleSet,
    #[error("need at least two probes for a spread estimate, got {0}")]
    InsufficientSamples(usize),
    #[error("probe feature vectors disagree in length ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("windowed mean needs a non-empty history")]
    EmptyHistory,
    #[error("windowed mean needs a window of at least one step")]
    ZeroWindow,
}

/// One stochastic probe of the policy at a fixed observation.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintySample {
    /// Predicted action mean, `[speed, heading]`.
    pub action_mean: [f64; 2],
    /// Predicted (clamped) action variance, `[speed, heading]`.
    pub action_variance: [f64; 2],
    /// Extractor features the actor consumed in this probe.
    pub features: Vec<f64>,
}

/// Disentangled estimates for one probe set.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyEstimate {
    /// Variance of probe means per action dimension, `[speed, heading]`.
    pub epistemic: [f64; 2],
    /// Mean of predicted variances per action dimension, `[speed, heading]`.
    pub aleatoric: [f64; 2],
    /// Per-feature variance of the probe features.
    pub feature_variance: Vec<f64>,
}

/// Compute all three estimates from a probe set.
///
/// At least two probes are required: spread over a single sample is
/// degenerate (identically zero epistemic and feature variance), so a
/// one-element set is treated as a caller bug rather than silently
/// reported as certainty.
pub fn estimate(samples: &[UncertaintySample]) -> Result<UncertaintyEstimate, UncertaintyError> {
    let k = samples.len();
    if k == 0 {
        return Err(UncertaintyError::EmptySampleSet);
    }
    if k < 2 {
        return Err(UncertaintyError::InsufficientSamples(k));
    }
    let feat_dim = samples[0].features.len();
    for s in samples {
        if s.features.len() != feat_dim {
            return Err(UncertaintyError::DimensionMismatch(feat_dim, s.features.len()));
        }
    }
    let kf = k as f64;

    let mut epistemic = [0.0; 2];
    let mut aleatoric = [0.0; 2];
    for dim in 0..2 {
        let mean = samples.iter().map(|s| s.action_mean[dim]).sum::<f64>() / kf;
        epistemic[dim] = samples
            .iter()
            .map(|s| {
                let d = s.action_mean[dim] - mean;
                d * d
            })
            .sum::<f64>()
            / kf;
        aleatoric[dim] = samples.iter().map(|s| s.action_variance[dim]).sum::<f64>() / kf;
    }

    let mut feature_variance = vec![0.0; feat_dim];
    for (d, var) in feature_variance.iter_mut().enumerate() {
        let mean = samples.iter().map(|s| s.features[d]).sum::<f64>() / kf;
        *var = samples
            .iter()
            .map(|s| {
                let diff = s.features[d] - mean;
                diff * diff
            })
            .sum::<f64>()
            / kf;
    }

    Ok(UncertaintyEstimate {
        epistemic,
        aleatoric,
        feature_variance,
    })
}

/// Running elementwise range of extractor features seen during training.
///
/// The range bounds the variance a feature can exhibit (a bounded variable's
/// variance is at most that of the uniform distribution over its range),
/// which normalizes the dropout feature uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBounds {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// Number of feature vectors absorbed; 0 means the tracker is empty.
    pub count: u64,
}

impl FeatureBounds {
    pub fn new(dim: usize) -> Self {
        FeatureBounds {
            min: vec![0.0; dim],
            max: vec![0.0; dim],
            count: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn update(&mut self, features: &[f64]) {
        assert_eq!(features.len(), self.dim(), "feature dimension changed");
        if self.count == 0 {
            self.min.copy_from_slice(features);
            self.max.copy_from_slice(features);
        } else {
            for (d, &f) in features.iter().enumerate() {
                self.min[d] = self.min[d].min(f);
                self.max[d] = self.max[d].max(f);
            }
        }
        self.count += 1;
    }

    /// Largest variance a value confined to `[min, max]` can have
    /// (the uniform-distribution variance, `range^2 / 12`).
    pub fn max_variance(&self, d: usize) -> f64 {
        let range = self.max[d] - self.min[d];
        range * range / 12.0
    }
}

/// Scalar feature uncertainty for Monte-Carlo dropout probes.
///
/// Each feature's variance is compared against the largest variance its
/// training-time range admits; the ratios (clamped to 1) are combined with
/// variance-proportional weights, so the result lies in `[0, 1]`. Features
/// whose training range is empty (`max == min`) are excluded; if the
/// remaining variances sum to zero the uncertainty is 0.
pub fn feature_uncertainty_dropout(
    feature_variance: &[f64],
    bounds: &FeatureBounds,
) -> Result<f64, UncertaintyError> {
    if feature_variance.len() != bounds.dim() {
        return Err(UncertaintyError::DimensionMismatch(
            feature_variance.len(),
            bounds.dim(),
        ));
    }
    let mut total_variance = 0.0;
    for (d, &v) in feature_variance.iter().enumerate() {
        if bounds.max[d] > bounds.min[d] {
            total_variance += v;
        }
    }
    if total_variance == 0.0 {
        return Ok(0.0);
    }
    let mut u = 0.0;
    for (d, &v) in feature_variance.iter().enumerate() {
        if bounds.max[d] > bounds.min[d] {
            let weight = v / total_variance;
            let ratio = (v / bounds.max_variance(d)).min(1.0);
            u += weight * ratio;
        }
    }
    // The weights sum to 1 mathematically but can land an ULP above it in
    // floating point once every ratio saturates; keep the contract u <= 1.
    Ok(u.min(1.0))
}

/// Scalar feature uncertainty for ensemble probes: the plain mean of the
/// per-feature variances (no range normalization — ensembles have no shared
/// training-time feature tracker).
pub fn feature_uncertainty_ensemble(feature_variance: &[f64]) -> Result<f64, UncertaintyError> {
    if feature_variance.is_empty() {
        return Err(UncertaintyError::EmptySampleSet);
    }
    Ok(feature_variance.iter().sum::<f64>() / feature_variance.len() as f64)
}

/// Mean of the most recent `window` entries (all of them while the history is
/// still shorter than the window).
pub fn windowed_mean(history: &[f64], window: usize) -> Result<f64, UncertaintyError> {
    if window == 0 {
        return Err(UncertaintyError::ZeroWindow);
    }
    if history.is_empty() {
        return Err(UncertaintyError::EmptyHistory);
    }
    let start = history.len().saturating_sub(window);
    let tail = &history[start..];
    Ok(tail.iter().sum::<f64>() / tail.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn sample(mean: [f64; 2], var: [f64; 2], features: &[f64]) -> UncertaintySample {
        UncertaintySample {
            action_mean: mean,
            action_variance: var,
            features: features.to_vec(),
        }
    }

    #[test]
    fn two_probe_hand_case() {
        // Means 1 and 3 per dimension: population variance about the mean 2
        // is exactly 1. Aleatoric is the average of the predicted variances.
        let samples = vec![
            sample([1.0, 1.0], [0.2, 0.4], &[0.0]),
            sample([3.0, 3.0], [0.6, 0.8], &[2.0]),
        ];
        let est = estimate(&samples).unwrap();
        assert_eq!(est.epistemic, [1.0, 1.0]);
        assert_eq!(est.aleatoric, [0.4, 0.6000000000000001]);
        // Features 0 and 2: mean 1, population variance 1.
        assert_eq!(est.feature_variance, vec![1.0]);
    }

    #[test]
    fn identical_probes_have_zero_epistemic() {
        // The mean of K identical f64s is not bit-exact (summation rounding),
        // so the spread is only zero up to squared rounding error (~1e-34).
        let probe = sample([0.3, -0.1], [0.5, 0.25], &[1.0, -2.0, 0.5]);
        let est = estimate(&vec![probe.clone(); 7]).unwrap();
        for d in 0..2 {
            assert!(est.epistemic[d] >= 0.0 && est.epistemic[d] < 1e-30);
        }
        assert_eq!(est.aleatoric, [0.5, 0.25]);
        for v in &est.feature_variance {
            assert!(*v >= 0.0 && *v < 1e-30);
        }
    }

    #[test]
    fn single_probe_is_rejected() {
        assert_eq!(
            estimate(&[sample([1.0, 2.0], [0.1, 0.2], &[5.0])]),
            Err(UncertaintyError::InsufficientSamples(1))
        );
    }

    #[test]
    fn empty_and_mismatched_sets_error() {
        assert_eq!(estimate(&[]), Err(UncertaintyError::EmptySampleSet));
        let bad = vec![
            sample([0.0; 2], [0.0; 2], &[1.0, 2.0]),
            sample([0.0; 2], [0.0; 2], &[1.0]),
        ];
        assert_eq!(
            estimate(&bad),
            Err(UncertaintyError::DimensionMismatch(2, 1))
        );
    }

    #[test]
    fn estimates_match_a_moment_based_oracle() {
        // Independent route: E[x^2] - E[x]^2 instead of centered two-pass.
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        for _ in 0..200 {
            let k = rng.gen_range(2..40);
            let d = rng.gen_range(1..16);
            let samples: Vec<UncertaintySample> = (0..k)
                .map(|_| UncertaintySample {
                    action_mean: [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)],
                    action_variance: [rng.gen_range(0.0..1.6), rng.gen_range(0.0..1.6)],
                    features: (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                })
                .collect();
            let est = estimate(&samples).unwrap();
            let kf = k as f64;
            for dim in 0..2 {
                let m1 = samples.iter().map(|s| s.action_mean[dim]).sum::<f64>() / kf;
                let m2 = samples
                    .iter()
                    .map(|s| s.action_mean[dim] * s.action_mean[dim])
                    .sum::<f64>()
                    / kf;
                assert!((est.epistemic[dim] - (m2 - m1 * m1)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dropout_feature_uncertainty_saturates_for_uniform_spread() {
        // Probes spread uniformly over the training range should be close to
        // the range-implied variance cap, so u approaches 1.
        let mut bounds = FeatureBounds::new(3);
        bounds.update(&[0.0, -1.0, 2.0]);
        bounds.update(&[1.0, 1.0, 4.0]);
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let samples: Vec<UncertaintySample> = (0..4000)
            .map(|_| {
                sample(
                    [0.0, 0.0],
                    [0.0, 0.0],
                    &[
                        rng.gen_range(0.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(2.0..4.0),
                    ],
                )
            })
            .collect();
        let est = estimate(&samples).unwrap();
        let u = feature_uncertainty_dropout(&est.feature_variance, &bounds).unwrap();
        assert!(u > 0.9 && u <= 1.0, "u = {u}");
    }

    #[test]
    fn dropout_feature_uncertainty_edge_cases() {
        let mut bounds = FeatureBounds::new(2);
        bounds.update(&[0.0, 3.0]);
        bounds.update(&[1.0, 3.0]); // second feature has an empty range

        // Zero variance everywhere: u = 0.
        assert_eq!(
            feature_uncertainty_dropout(&[0.0, 0.0], &bounds).unwrap(),
            0.0
        );
        // Variance only on the empty-range feature: excluded, so still 0.
        assert_eq!(
            feature_uncertainty_dropout(&[0.0, 5.0], &bounds).unwrap(),
            0.0
        );
        // Variance far beyond the cap clamps to ratio 1.
        assert_eq!(
            feature_uncertainty_dropout(&[100.0, 0.0], &bounds).unwrap(),
            1.0
        );
        // Dimension mismatch errors.
        assert!(feature_uncertainty_dropout(&[0.0], &bounds).is_err());
    }

    #[test]
    fn untouched_bounds_give_zero_uncertainty() {
        let bounds = FeatureBounds::new(4);
        assert_eq!(bounds.count, 0);
        let u = feature_uncertainty_dropout(&[0.3, 0.1, 0.0, 2.0], &bounds).unwrap();
        assert_eq!(u, 0.0);
    }

    #[test]
    fn ensemble_feature_uncertainty_is_the_mean_variance() {
        let u = feature_uncertainty_ensemble(&[0.1, 0.2, 0.3]).unwrap();
        assert!((u - 0.2).abs() < 1e-15);
        assert!(feature_uncertainty_ensemble(&[]).is_err());
    }

    #[test]
    fn windowed_mean_follows_the_partial_rule() {
        let h = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(windowed_mean(&h, 4).unwrap(), 3.5);
        assert_eq!(windowed_mean(&h[..2], 4).unwrap(), 1.5);
        assert_eq!(windowed_mean(&h, 1).unwrap(), 5.0);
        assert_eq!(windowed_mean(&[], 4), Err(UncertaintyError::EmptyHistory));
        assert_eq!(windowed_mean(&h, 0), Err(UncertaintyError::ZeroWindow));
    }

    proptest! {
        #[test]
        fn estimates_are_permutation_invariant(
            seed in 0u64..1000,
            k in 2usize..20,
        ) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let mut samples: Vec<UncertaintySample> = (0..k)
                .map(|_| UncertaintySample {
                    action_mean: [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
                    action_variance: [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)],
                    features: (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                })
                .collect();
            let a = estimate(&samples).unwrap();
            samples.reverse();
            samples.rotate_left(k / 2);
            let b = estimate(&samples).unwrap();
            for dim in 0..2 {
                prop_assert!((a.epistemic[dim] - b.epistemic[dim]).abs() < 1e-12);
                prop_assert!((a.aleatoric[dim] - b.aleatoric[dim]).abs() < 1e-12);
            }
            for d in 0..5 {
                prop_assert!((a.feature_variance[d] - b.feature_variance[d]).abs() < 1e-12);
            }
        }

        #[test]
        fn estimates_are_nonnegative_and_dropout_u_is_bounded(
            seed in 0u64..1000,
            k in 2usize..25,
        ) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let dim = 6;
            let mut bounds = FeatureBounds::new(dim);
            for _ in 0..10 {
                let f: Vec<f64> = (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
                bounds.update(&f);
            }
            let samples: Vec<UncertaintySample> = (0..k)
                .map(|_| UncertaintySample {
                    action_mean: [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)],
                    action_variance: [rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)],
                    features: (0..dim).map(|_| rng.gen_range(-6.0..6.0)).collect(),
                })
                .collect();
            let est = estimate(&samples).unwrap();
            prop_assert!(est.epistemic.iter().all(|&v| v >= 0.0));
            prop_assert!(est.aleatoric.iter().all(|&v| v >= 0.0));
            prop_assert!(est.feature_variance.iter().all(|&v| v >= 0.0));
            let u = feature_uncertainty_dropout(&est.feature_variance, &bounds).unwrap();
            prop_assert!((0.0..=1.0).contains(&u));
        }
    }
}
