//! Pipeline configuration.
//!
//! One TOML file drives every stage. Unknown keys are rejected so typos
//! fail loudly instead of silently running defaults. `schema_version` is
//! checked on load.

use serde::Deserialize;

use guidetrain_core::env::depth::DepthConfig;
use guidetrain_core::env::sim::EnvConfig;
use guidetrain_core::env::{ProfileRanges, RobotParams};
use guidetrain_core::geometry::Vec2;
use guidetrain_core::hppn::HppnConfig;
use guidetrain_core::metrics::{RewardKind, TimeUnit};
use guidetrain_core::Real;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("unsupported schema_version {found} (this build understands {SCHEMA_VERSION})")]
    SchemaVersion { found: u32 },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub schema_version: u32,
    pub seed: u64,
    pub out_dir: String,
    pub dataset: DatasetSection,
    pub env: EnvSection,
    pub users: UsersSection,
    pub vae: VaeSection,
    pub hppn: HppnSection,
    pub baseline: BaselineSection,
    pub reward: RewardSection,
    pub sal: SalSection,
    pub es: EsSection,
    pub evaluation: EvaluationSection,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            schema_version: SCHEMA_VERSION,
            seed: 20240801,
            out_dir: "runs/default".into(),
            dataset: DatasetSection::default(),
            env: EnvSection::default(),
            users: UsersSection::default(),
            vae: VaeSection::default(),
            hppn: HppnSection::default(),
            baseline: BaselineSection::default(),
            reward: RewardSection::default(),
            sal: SalSection::default(),
            es: EsSection::default(),
            evaluation: EvaluationSection::default(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    pub episodes: usize,
    pub train_users: usize,
    pub episode_steps_min: usize,
    pub episode_steps_max: usize,
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection {
            episodes: 1500,
            train_users: 11,
            episode_steps_min: 60,
            episode_steps_max: 120,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvSection {
    pub wheel_radius: f64,
    pub track_width: f64,
    pub dt: f64,
    pub spring_constant: f64,
    pub workspace_radius: f64,
    pub handle_distance: f64,
    pub start_jitter: f64,
    pub depth_width: usize,
    pub depth_height: usize,
    pub depth_noise_sigma: f64,
    pub depth_fov_deg: f64,
    pub depth_max_range: f64,
}

impl Default for EnvSection {
    fn default() -> Self {
        EnvSection {
            wheel_radius: 0.076,
            track_width: 0.40,
            dt: 0.25,
            spring_constant: 500.0,
            workspace_radius: 0.075,
            handle_distance: 0.6,
            start_jitter: 0.03,
            depth_width: 32,
            depth_height: 24,
            depth_noise_sigma: 0.02,
            depth_fov_deg: 90.0,
            depth_max_range: 3.0,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UsersSection {
    pub lateral_offset: (f64, f64),
    pub follow_distance: (f64, f64),
    pub response_lag: (f64, f64),
    pub max_speed: (f64, f64),
    pub gait_amplitude: (f64, f64),
    pub gait_freq: (f64, f64),
    pub noise_sigma: (f64, f64),
}

impl Default for UsersSection {
    fn default() -> Self {
        let r = ProfileRanges::<Real>::default();
        UsersSection {
            lateral_offset: r.lateral_offset,
            follow_distance: r.follow_distance,
            response_lag: r.response_lag,
            max_speed: r.max_speed,
            gait_amplitude: r.gait_amplitude,
            gait_freq: r.gait_freq,
            noise_sigma: r.noise_sigma,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VaeSection {
    pub hidden: usize,
    pub latent: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub kl_weight: f64,
    /// 0 trains on every frame; otherwise an evenly strided subsample.
    pub frame_subsample: usize,
}

impl Default for VaeSection {
    fn default() -> Self {
        VaeSection {
            hidden: 64,
            latent: 16,
            epochs: 200,
            learning_rate: 0.001,
            batch_size: 256,
            kl_weight: 0.001,
            frame_subsample: 0,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HppnSection {
    pub window: usize,
    pub stride: usize,
    pub holdout_fraction: f64,
    pub robot_epochs: usize,
    pub human_epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// The checkpoint is rejected unless the held-out one-step relative-pose
    /// MSE is at most this multiple of the persistence predictor's.
    pub persistence_gate: f64,
}

impl Default for HppnSection {
    fn default() -> Self {
        HppnSection {
            window: 20,
            stride: 5,
            holdout_fraction: 0.2,
            robot_epochs: 500,
            human_epochs: 80,
            learning_rate: 0.01,
            batch_size: 64,
            persistence_gate: 0.5,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineSection {
    pub epochs: usize,
    pub learning_rate: f64,
    pub window: usize,
    pub stride: usize,
    pub batch_size: usize,
    pub target_speed: f64,
}

impl Default for BaselineSection {
    fn default() -> Self {
        BaselineSection {
            epochs: 80,
            learning_rate: 0.01,
            window: 20,
            stride: 5,
            batch_size: 64,
            target_speed: 0.36,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardSection {
    pub w_time: f64,
    pub w_frechet: f64,
    pub w_sal: f64,
    pub timeout_penalty: f64,
    pub max_timesteps: usize,
    /// "seconds" or "timesteps".
    pub time_unit: String,
    pub sal_fallback: f64,
}

impl Default for RewardSection {
    fn default() -> Self {
        RewardSection {
            w_time: 1.0,
            w_frechet: 100.0,
            w_sal: 30.0,
            timeout_penalty: 500.0,
            max_timesteps: 100,
            time_unit: "seconds".into(),
            sal_fallback: -10.0,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SalSection {
    pub sample_rate: f64,
    pub cutoff: f64,
    pub pad_factor: usize,
}

impl Default for SalSection {
    fn default() -> Self {
        SalSection { sample_rate: 4.0, cutoff: 2.0, pad_factor: 16 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EsSection {
    pub population: usize,
    pub episodes_per_candidate: usize,
    pub max_generations: usize,
    pub sigma0: f64,
    pub checkpoint_every: usize,
    /// 0 disables plateau stopping.
    pub plateau_window: usize,
    pub plateau_tol: f64,
}

impl Default for EsSection {
    fn default() -> Self {
        EsSection {
            population: 32,
            episodes_per_candidate: 16,
            max_generations: 200,
            sigma0: 0.3,
            checkpoint_every: 50,
            plateau_window: 80,
            plateau_tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSection {
    pub users: usize,
    pub trials: usize,
    pub max_steps: usize,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        EvaluationSection { users: 4, trials: 3, max_steps: 100 }
    }
}

impl Config {
    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::SchemaVersion { found: cfg.schema_version });
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.dataset.episodes == 0 {
            return Err(ConfigError::Parse("dataset.episodes must be > 0".into()));
        }
        if self.dataset.train_users == 0 || self.evaluation.users == 0 {
            return Err(ConfigError::Parse("user counts must be > 0".into()));
        }
        if self.reward.time_unit != "seconds" && self.reward.time_unit != "timesteps" {
            return Err(ConfigError::Parse(format!(
                "reward.time_unit must be 'seconds' or 'timesteps', got '{}'",
                self.reward.time_unit
            )));
        }
        if self.es.population < 4 {
            return Err(ConfigError::Parse("es.population must be >= 4".into()));
        }
        Ok(())
    }

    pub fn env_config(&self) -> EnvConfig<Real> {
        EnvConfig {
            robot: RobotParams {
                wheel_radius: self.env.wheel_radius,
                track_width: self.env.track_width,
                dt: self.env.dt,
            },
            spring_k: self.env.spring_constant,
            workspace_radius: self.env.workspace_radius,
            handle_origin: Vec2::new(-self.env.handle_distance, 0.0),
            depth: DepthConfig {
                width: self.env.depth_width,
                height: self.env.depth_height,
                fov: self.env.depth_fov_deg.to_radians(),
                noise_sigma: self.env.depth_noise_sigma,
                max_range: self.env.depth_max_range,
                ..DepthConfig::default()
            },
            start_jitter: self.env.start_jitter,
        }
    }

    pub fn profile_ranges(&self) -> ProfileRanges<Real> {
        ProfileRanges {
            lateral_offset: self.users.lateral_offset,
            follow_distance: self.users.follow_distance,
            response_lag: self.users.response_lag,
            max_speed: self.users.max_speed,
            gait_amplitude: self.users.gait_amplitude,
            gait_freq: self.users.gait_freq,
            noise_sigma: self.users.noise_sigma,
        }
    }

    pub fn hppn_config(&self) -> HppnConfig<Real> {
        HppnConfig {
            window: self.hppn.window,
            stride: self.hppn.stride,
            holdout_fraction: self.hppn.holdout_fraction,
            robot_epochs: self.hppn.robot_epochs,
            human_epochs: self.hppn.human_epochs,
            learning_rate: self.hppn.learning_rate,
            batch_size: self.hppn.batch_size,
            seed: guidetrain_core::SeedStream::root(self.seed).tag("hppn").seed(),
        }
    }

    pub fn reward_config(&self, kind: RewardKind) -> guidetrain_core::RewardConfig {
        guidetrain_core::RewardConfig {
            kind,
            w_time: self.reward.w_time,
            w_frechet: self.reward.w_frechet,
            w_sal: self.reward.w_sal,
            timeout_penalty: self.reward.timeout_penalty,
            max_timesteps: self.reward.max_timesteps,
            time_unit: if self.reward.time_unit == "timesteps" {
                TimeUnit::Timesteps
            } else {
                TimeUnit::Seconds
            },
            dt: self.env.dt,
            resample_ds: guidetrain_core::geometry::PATH_RESOLUTION,
            sal: guidetrain_core::SalConfig {
                sample_rate: self.sal.sample_rate,
                cutoff_freq: self.sal.cutoff,
                pad_factor: self.sal.pad_factor,
            },
            sal_fallback: self.reward.sal_fallback,
        }
    }
}
