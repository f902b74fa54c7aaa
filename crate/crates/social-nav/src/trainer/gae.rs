//! Generalized advantage estimation over a flat rollout segment.

/// Compute GAE advantages and value targets for one rollout segment.
///
/// `dones[t]` marks that the episode ended at step `t` (so step `t + 1`, if
/// any, started a fresh episode). `bootstrap_value` is the critic's estimate
/// at the observation after the last step; it is ignored when the segment
/// ends exactly on an episode boundary.
///
/// Returns `(advantages, returns)` with `returns[t] = advantages[t] +
/// values[t]`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap_value: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert_eq!(values.len(), n);
    assert_eq!(dones.len(), n);
    let mut advantages = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let (next_value, next_nonterminal) = if t == n - 1 {
            (bootstrap_value, !dones[t])
        } else {
            (values[t + 1], !dones[t])
        };
        let nonterminal = if next_nonterminal { 1.0 } else { 0.0 };
        let delta = rewards[t] + gamma * next_value * nonterminal - values[t];
        acc = delta + gamma * lambda * nonterminal * acc;
        advantages[t] = acc;
    }
    let returns = advantages
        .iter()
        .zip(values)
        .map(|(a, v)| a + v)
        .collect();
    (advantages, returns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    /// Direct-sum oracle: advantage at `t` is the discounted sum of TD
    /// residuals weighted by `(gamma * lambda)^l`, truncated at the episode
    /// boundary. Written independently of the reverse recursion above.
    fn direct_sum_gae(
        rewards: &[f64],
        values: &[f64],
        dones: &[bool],
        bootstrap: f64,
        gamma: f64,
        lambda: f64,
    ) -> Vec<f64> {
        let n = rewards.len();
        let delta = |t: usize| -> f64 {
            let next = if dones[t] {
                0.0
            } else if t == n - 1 {
                bootstrap
            } else {
                values[t + 1]
            };
            rewards[t] + gamma * next - values[t]
        };
        (0..n)
            .map(|t| {
                let mut sum = 0.0;
                let mut weight = 1.0;
                for l in t..n {
                    sum += weight * delta(l);
                    if dones[l] {
                        break;
                    }
                    weight *= gamma * lambda;
                }
                sum
            })
            .collect()
    }

    fn random_segment(seed: u64, n: usize) -> (Vec<f64>, Vec<f64>, Vec<bool>, f64) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let rewards = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let values = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let dones = (0..n).map(|_| rng.gen_bool(0.15)).collect();
        let bootstrap = rng.gen_range(-2.0..2.0);
        (rewards, values, dones, bootstrap)
    }

    #[test]
    fn recursion_matches_the_direct_sum_oracle() {
        for seed in 0..30 {
            let (r, v, d, b) = random_segment(seed, 40);
            let (adv, ret) = compute_gae(&r, &v, &d, b, 0.99, 0.95);
            let oracle = direct_sum_gae(&r, &v, &d, b, 0.99, 0.95);
            for t in 0..40 {
                assert!(
                    (adv[t] - oracle[t]).abs() < 1e-10,
                    "seed {seed} t {t}: {} vs {}",
                    adv[t],
                    oracle[t]
                );
                assert!((ret[t] - (adv[t] + v[t])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lambda_zero_reduces_to_one_step_td() {
        let (r, v, d, b) = random_segment(7, 25);
        let (adv, _) = compute_gae(&r, &v, &d, b, 0.99, 0.0);
        for t in 0..25 {
            let next = if d[t] {
                0.0
            } else if t == 24 {
                b
            } else {
                v[t + 1]
            };
            let delta = r[t] + 0.99 * next - v[t];
            assert!((adv[t] - delta).abs() < 1e-12);
        }
    }

    #[test]
    fn lambda_one_gives_discounted_monte_carlo_minus_baseline() {
        // Single full episode ending inside the segment: with lambda = 1 the
        // advantage at t telescopes to sum_l gamma^l r_{t+l} - V(t).
        let rewards = vec![1.0, -0.5, 2.0, 0.25];
        let values = vec![0.3, -0.1, 0.7, 0.2];
        let dones = vec![false, false, false, true];
        let gamma = 0.9;
        let (adv, _) = compute_gae(&rewards, &values, &dones, 123.0, gamma, 1.0);
        for t in 0..4 {
            let mc: f64 = (t..4).map(|l| gamma.powi((l - t) as i32) * rewards[l]).sum();
            assert!(
                (adv[t] - (mc - values[t])).abs() < 1e-12,
                "t {t}: {} vs {}",
                adv[t],
                mc - values[t]
            );
        }
    }

    #[test]
    fn done_at_segment_end_ignores_the_bootstrap() {
        let rewards = vec![1.0];
        let values = vec![0.4];
        let dones = vec![true];
        let (adv_a, _) = compute_gae(&rewards, &values, &dones, 0.0, 0.99, 0.95);
        let (adv_b, _) = compute_gae(&rewards, &values, &dones, 1e9, 0.99, 0.95);
        assert_eq!(adv_a, adv_b);
        assert!((adv_a[0] - (1.0 - 0.4)).abs() < 1e-12);
    }

    #[test]
    fn boundary_stops_credit_flowing_backwards() {
        // Two one-step episodes; the second reward must not leak into the
        // first advantage.
        let rewards = vec![0.0, 100.0];
        let values = vec![0.0, 0.0];
        let dones = vec![true, true];
        let (adv, _) = compute_gae(&rewards, &values, &dones, 0.0, 0.99, 0.95);
        assert!((adv[0] - 0.0).abs() < 1e-12);
        assert!((adv[1] - 100.0).abs() < 1e-12);
    }
}
