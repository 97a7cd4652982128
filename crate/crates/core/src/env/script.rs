//! Randomized data-acquisition action scripts.
//!
//! Piecewise-constant wheel commands: each segment draws both wheel speeds
//! uniformly from the active range and holds them for 4 to 20 timesteps.
//! Episodes last 60 to 120 timesteps (15 to 30 s at 4 Hz) and end with a
//! stop command.

use rand::Rng;

use super::{RobotAction, WHEEL_MAX, WHEEL_MIN};
use crate::scalar::Scalar;

pub const HOLD_MIN: usize = 4;
pub const HOLD_MAX: usize = 20;
pub const EPISODE_MIN: usize = 60;
pub const EPISODE_MAX: usize = 120;

/// Generates one scripted episode's action sequence.
pub fn random_action_script<T: Scalar, R: Rng>(rng: &mut R) -> Vec<RobotAction<T>> {
    random_action_script_with(rng, EPISODE_MIN, EPISODE_MAX)
}

/// Same as [`random_action_script`] with explicit episode length bounds.
pub fn random_action_script_with<T: Scalar, R: Rng>(
    rng: &mut R,
    min_len: usize,
    max_len: usize,
) -> Vec<RobotAction<T>> {
    let total = rng.random_range(min_len..=max_len);
    let mut actions = Vec::with_capacity(total);
    while actions.len() < total {
        let left = T::uniform(rng, T::c(WHEEL_MIN), T::c(WHEEL_MAX));
        let right = T::uniform(rng, T::c(WHEEL_MIN), T::c(WHEEL_MAX));
        let hold = rng.random_range(HOLD_MIN..=HOLD_MAX);
        for _ in 0..hold {
            if actions.len() == total {
                break;
            }
            actions.push(RobotAction::new(left, right, T::zero()));
        }
    }
    actions.last_mut().unwrap().stop_degree = T::one();
    actions
}
