//! Ground-truth synthetic guidance world.
//!
//! A differential-drive robot leads a spring-tethered human follower whose
//! behavior is parameterized per user (preferred side, lag, gait, noise).
//! The world produces the multimodal response channel the models consume:
//! a 2-D kinetic force from the haptic tether and a 16-D latent compressed
//! from a synthetic rear-facing depth frame.

pub mod depth;
pub mod episode;
pub mod script;
pub mod sim;

pub use episode::{Episode, EpisodeMeta, EpisodeRow};
pub use sim::{drive_step, human_step, rollout, sense_force, Controller, ControlDecision, EnvConfig, HumanState};

use rand::Rng;

use crate::geometry::Vec2;
use crate::scalar::Scalar;

/// Dimension of the depth latent.
pub const LATENT_DIM: usize = 16;
/// Force (2) plus depth latent (16).
pub const RESPONSE_DIM: usize = 2 + LATENT_DIM;
/// Wheel speed bounds in rad/s while the robot is active.
pub const WHEEL_MIN: f64 = 2.5;
pub const WHEEL_MAX: f64 = 5.0;

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error("non-finite state at step {step}: {what}")]
    NonFiniteState { step: usize, what: String },
    #[error("episode file malformed at line {line}: {msg}")]
    MalformedEpisode { line: usize, msg: String },
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A robot command: left/right wheel speeds (rad/s) plus a stop degree in
/// [0, 1]. The robot stops when the degree exceeds 0.5.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobotAction<T> {
    pub left: T,
    pub right: T,
    pub stop_degree: T,
}

impl<T: Scalar> RobotAction<T> {
    pub fn new(left: T, right: T, stop_degree: T) -> Self {
        RobotAction { left, right, stop_degree }
    }

    /// Clamps wheel speeds to the active range and the stop degree to [0, 1].
    pub fn clamped(self) -> Self {
        RobotAction {
            left: self.left.max(T::c(WHEEL_MIN)).min(T::c(WHEEL_MAX)),
            right: self.right.max(T::c(WHEEL_MIN)).min(T::c(WHEEL_MAX)),
            stop_degree: self.stop_degree.max(T::zero()).min(T::one()),
        }
    }

    pub fn is_stop(&self) -> bool {
        self.stop_degree > T::c(0.5)
    }

    /// The 2-D wheel-speed slice used as model input.
    pub fn wheels(&self) -> [T; 2] {
        [self.left, self.right]
    }
}

/// Robot base geometry and control interval.
#[derive(Clone, Copy, Debug)]
pub struct RobotParams<T> {
    pub wheel_radius: T,
    pub track_width: T,
    pub dt: T,
}

impl<T: Scalar> Default for RobotParams<T> {
    fn default() -> Self {
        // wheel_radius * 5 rad/s = 0.38 m/s, the top of the action range.
        RobotParams { wheel_radius: T::c(0.076), track_width: T::c(0.40), dt: T::c(0.25) }
    }
}

/// The multimodal human response: haptic force plus depth latent.
#[derive(Clone, Debug, PartialEq)]
pub struct HumanResponse<T> {
    pub force: Vec2<T>,
    pub depth_latent: Vec<T>,
}

impl<T: Scalar> HumanResponse<T> {
    pub fn zeros() -> Self {
        HumanResponse { force: Vec2::zero(), depth_latent: vec![T::zero(); LATENT_DIM] }
    }

    pub fn to_vec(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(RESPONSE_DIM);
        v.push(self.force.x);
        v.push(self.force.y);
        v.extend(self.depth_latent.iter().cloned());
        v
    }

    pub fn from_slice(s: &[T]) -> Self {
        assert_eq!(s.len(), RESPONSE_DIM);
        HumanResponse { force: Vec2::new(s[0], s[1]), depth_latent: s[2..].to_vec() }
    }
}

/// Behavioral parameters of one synthetic user.
#[derive(Clone, Debug)]
pub struct UserProfile<T> {
    pub id: String,
    /// Preferred lateral position relative to the robot, meters (+ = left).
    pub lateral_offset: T,
    /// Preferred trailing distance behind the robot, meters.
    pub follow_distance: T,
    /// First-order pursuit time constant, seconds.
    pub response_lag: T,
    /// Walking speed cap, m/s.
    pub max_speed: T,
    /// Lateral gait oscillation amplitude, meters.
    pub gait_amplitude: T,
    /// Gait frequency, Hz.
    pub gait_freq: T,
    /// Per-step positional noise, meters.
    pub noise_sigma: T,
    pub seed: u64,
}

impl<T: Scalar> UserProfile<T> {
    /// A quiet nominal user, handy in tests.
    pub fn nominal(id: &str) -> Self {
        UserProfile {
            id: id.to_string(),
            lateral_offset: T::zero(),
            follow_distance: T::c(0.6),
            response_lag: T::c(0.7),
            max_speed: T::c(0.45),
            gait_amplitude: T::zero(),
            gait_freq: T::c(0.9),
            noise_sigma: T::zero(),
            seed: 0,
        }
    }
}

/// Sampling ranges for synthetic user populations.
#[derive(Clone, Copy, Debug)]
pub struct ProfileRanges<T> {
    pub lateral_offset: (T, T),
    pub follow_distance: (T, T),
    pub response_lag: (T, T),
    pub max_speed: (T, T),
    pub gait_amplitude: (T, T),
    pub gait_freq: (T, T),
    pub noise_sigma: (T, T),
}

impl<T: Scalar> Default for ProfileRanges<T> {
    fn default() -> Self {
        ProfileRanges {
            lateral_offset: (T::c(-0.25), T::c(0.25)),
            follow_distance: (T::c(0.5), T::c(0.7)),
            response_lag: (T::c(0.5), T::c(1.1)),
            max_speed: (T::c(0.40), T::c(0.55)),
            gait_amplitude: (T::c(0.01), T::c(0.03)),
            gait_freq: (T::c(0.8), T::c(1.0)),
            noise_sigma: (T::c(0.004), T::c(0.012)),
        }
    }
}

impl<T: Scalar> ProfileRanges<T> {
    pub fn sample<R: Rng>(&self, rng: &mut R, id: &str, seed: u64) -> UserProfile<T> {
        let u = |rng: &mut R, (lo, hi): (T, T)| T::uniform(rng, lo, hi);
        UserProfile {
            id: id.to_string(),
            lateral_offset: u(rng, self.lateral_offset),
            follow_distance: u(rng, self.follow_distance),
            response_lag: u(rng, self.response_lag),
            max_speed: u(rng, self.max_speed),
            gait_amplitude: u(rng, self.gait_amplitude),
            gait_freq: u(rng, self.gait_freq),
            noise_sigma: u(rng, self.noise_sigma),
            seed,
        }
    }
}
