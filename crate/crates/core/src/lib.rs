//! Core library for training and evaluating a haptic robotic guide.
//!
//! The crate is organized around a synthetic guidance world and the models
//! trained against it:
//!
//! - [`geometry`]: SE(2) poses, arc-length path processing, goal paths.
//! - [`metrics`]: Fréchet distance, spectral arc length, cumulative rewards.
//! - [`nn`]: dense layers, LSTM stacks with BPTT, a small VAE, Adam, and
//!   finite-difference gradient checking.
//! - [`env`]: differential-drive robot, spring-tethered human follower,
//!   force/depth sensing, and episode recording.
//! - [`hppn`]: the dual-LSTM human path prediction network used as a
//!   simulator for policy training.
//! - [`policy`]: the linear guide policy and its feature assembly.
//! - [`baseline`]: the supervised recurrent baseline policy.
//! - [`cmaes`]: covariance matrix adaptation evolution strategy.
//!
//! All numeric code is generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the aliases at the crate root fix the pipeline's working precision.

pub mod baseline;
pub mod checkpoint;
pub mod cmaes;
pub mod eigen;
pub mod env;
pub mod fft;
pub mod geometry;
pub mod hppn;
pub mod metrics;
pub mod nn;
pub mod policy;
pub mod rng;
pub mod scalar;
pub mod text;

pub use rng::SeedStream;
pub use scalar::Scalar;

/// Working precision of the pipeline.
pub type Real = f64;

pub type Vec2 = geometry::Vec2<Real>;
pub type Pose2 = geometry::Pose2<Real>;
pub type Path = geometry::Path<Real>;
pub type GoalPathSpec = geometry::GoalPathSpec<Real>;
pub type SalConfig = metrics::SalConfig<Real>;
pub type RewardConfig = metrics::RewardConfig<Real>;
pub type RobotAction = env::RobotAction<Real>;
pub type RobotParams = env::RobotParams<Real>;
pub type UserProfile = env::UserProfile<Real>;
pub type HumanResponse = env::HumanResponse<Real>;
pub type Episode = env::Episode<Real>;
pub type Vae = nn::vae::Vae<Real>;
pub type HppnModel = hppn::HppnModel<Real>;
pub type HppnState = hppn::HppnState<Real>;
pub type PolicyParams = policy::PolicyParams<Real>;
pub type BaselineModel = baseline::BaselineModel<Real>;
pub type CmaesState = cmaes::CmaesState<Real>;
pub type EsConfig = cmaes::EsConfig<Real>;
