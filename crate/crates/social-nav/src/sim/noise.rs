//! Perturbation noise injection.
//!
//! Observation noise corrupts what the policy sees; action noise corrupts
//! what the robot executes. Human-speed scaling and extra humans are handled
//! at reset by the scenario sampler.

use super::agent::Observation;
use rand::Rng;
use rand_distr::StandardNormal;

/// Add i.i.d. zero-mean Gaussian noise with std-dev `sigma` to every
/// observation entry (padding included). `sigma = 0` leaves the observation
/// untouched without consuming randomness.
pub fn apply_observation_noise(obs: &mut Observation, sigma: f64, rng: &mut impl Rng) {
    if sigma == 0.0 {
        return;
    }
    for v in &mut obs.values {
        let z: f64 = rng.sample(StandardNormal);
        *v += sigma * z;
    }
}

/// Perturb an executed action: Gaussian heading noise (std `sigma_heading`,
/// radians) and a speed scale drawn from `U(1 - sigma_velocity, 1)`.
///
/// Returns `(executed_speed, executed_delta_heading)`. The inputs are the
/// already-projected command; noise is deliberately applied after projection
/// and not re-clamped, so large perturbations genuinely exceed the actuator
/// envelope. The speed scale never exceeds 1; for `sigma_velocity > 1` it can
/// go negative, which reverses the motion.
pub fn apply_action_noise(
    speed: f64,
    delta_heading: f64,
    sigma_heading: f64,
    sigma_velocity: f64,
    rng: &mut impl Rng,
) -> (f64, f64) {
    let heading = if sigma_heading > 0.0 {
        let z: f64 = rng.sample(StandardNormal);
        delta_heading + sigma_heading * z
    } else {
        delta_heading
    };
    let speed = if sigma_velocity > 0.0 {
        let scale = rng.gen_range((1.0 - sigma_velocity)..1.0);
        speed * scale
    } else {
        speed
    };
    (speed, heading)
}
