//! Guidance evaluation metrics and the cumulative reward.
//!
//! Path accuracy uses the discrete Fréchet distance, human motion smoothness
//! uses the spectral arc length of the speed profile, and the two reward
//! flavors combine them with completion time.

use crate::fft::{next_power_of_two, real_magnitude_spectrum};
use crate::geometry::{Path, Vec2};
use crate::scalar::Scalar;

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("empty path")]
    EmptyPath,
    #[error("speed profile needs at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("smoothness undefined for an all-zero speed profile")]
    AllZeroProfile,
    #[error("invalid smoothness config: {0}")]
    InvalidConfig(String),
}

/// Discrete Fréchet distance between two point sequences, via dynamic
/// programming over the coupling lattice in O(|p| * |q|).
pub fn discrete_frechet<T: Scalar>(p: &[Vec2<T>], q: &[Vec2<T>]) -> Result<T, MetricError> {
    if p.is_empty() || q.is_empty() {
        return Err(MetricError::EmptyPath);
    }
    let m = q.len();
    let mut prev: Vec<T> = Vec::with_capacity(m);
    let mut row: Vec<T> = vec![T::zero(); m];

    for (i, &pi) in p.iter().enumerate() {
        for (j, &qj) in q.iter().enumerate() {
            let d = pi.dist(qj);
            let reach = if i == 0 && j == 0 {
                d
            } else if i == 0 {
                row[j - 1].max(d)
            } else if j == 0 {
                prev[0].max(d)
            } else {
                prev[j].min(prev[j - 1]).min(row[j - 1]).max(d)
            };
            row[j] = reach;
        }
        std::mem::swap(&mut prev, &mut row);
        if i == 0 {
            row.resize(m, T::zero());
        }
    }
    Ok(prev[m - 1])
}

/// Speed profile of a position sequence sampled at fixed `dt`:
/// `v[t] = |pos[t+1] - pos[t]| / dt`.
pub fn speed_profile<T: Scalar>(positions: &[Vec2<T>], dt: T) -> Result<Vec<T>, MetricError> {
    if positions.len() < 2 {
        return Err(MetricError::TooFewSamples { need: 2, got: positions.len() });
    }
    Ok(positions.windows(2).map(|w| w[0].dist(w[1]) / dt).collect())
}

/// Spectral arc length configuration.
#[derive(Clone, Copy, Debug)]
pub struct SalConfig<T> {
    /// Sampling rate of the speed profile in Hz.
    pub sample_rate: T,
    /// Spectrum cutoff in Hz; must not exceed Nyquist.
    pub cutoff_freq: T,
    /// Zero-padding factor (power of two) applied on top of the next power of
    /// two of the profile length.
    pub pad_factor: usize,
}

impl<T: Scalar> Default for SalConfig<T> {
    fn default() -> Self {
        SalConfig { sample_rate: T::c(4.0), cutoff_freq: T::c(2.0), pad_factor: 16 }
    }
}

impl<T: Scalar> SalConfig<T> {
    fn validate(&self) -> Result<(), MetricError> {
        if self.cutoff_freq <= T::zero() || self.cutoff_freq > self.sample_rate / T::c(2.0) {
            return Err(MetricError::InvalidConfig(
                "cutoff must be in (0, sample_rate / 2]".into(),
            ));
        }
        if self.pad_factor == 0 || !self.pad_factor.is_power_of_two() {
            return Err(MetricError::InvalidConfig("pad_factor must be a power of two".into()));
        }
        Ok(())
    }
}

/// Spectral arc length of a speed profile. Always <= 0; values closer to zero
/// indicate smoother motion.
///
/// Trailing zeros are trimmed (the profile's support defines it), the rest is
/// zero-padded to `pad_factor * next_power_of_two(support)`, the magnitude
/// spectrum is normalized by its maximum, and the arc length of the
/// normalized spectrum is accumulated over bins up to the cutoff frequency,
/// with the frequency axis normalized by the cutoff. Trimming makes the
/// value exactly invariant to zeros appended past the support.
pub fn spectral_arc_length<T: Scalar>(v: &[T], cfg: &SalConfig<T>) -> Result<T, MetricError> {
    cfg.validate()?;
    if v.len() < 4 {
        return Err(MetricError::TooFewSamples { need: 4, got: v.len() });
    }
    let support = v.len() - v.iter().rev().take_while(|&&x| x == T::zero()).count();
    if support == 0 {
        return Err(MetricError::AllZeroProfile);
    }
    let v = &v[..support];

    let n = cfg.pad_factor * next_power_of_two(v.len());
    let mags = real_magnitude_spectrum(v, n);
    let vmax = mags.iter().cloned().fold(T::zero(), T::max);

    let df = cfg.sample_rate / T::c(n as f64);
    let k_max = ((cfg.cutoff_freq / df).floor().f64() as usize).min(n / 2);
    let df_hat = df / cfg.cutoff_freq;

    let mut arc = T::zero();
    for k in 1..=k_max {
        let dv = (mags[k] - mags[k - 1]) / vmax;
        arc += (df_hat * df_hat + dv * dv).sqrt();
    }
    Ok(-arc)
}

/// Which terms enter the cumulative reward.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RewardKind {
    /// Goal efficiency only: completion time and path error.
    GOnly,
    /// Goal efficiency plus human motion smoothness.
    GPlusH,
}

impl RewardKind {
    pub fn label(self) -> &'static str {
        match self {
            RewardKind::GOnly => "g-only",
            RewardKind::GPlusH => "g-plus-h",
        }
    }
}

/// Unit in which completion time enters the reward.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeUnit {
    Seconds,
    Timesteps,
}

/// Cumulative reward configuration.
#[derive(Clone, Copy, Debug)]
pub struct RewardConfig<T> {
    pub kind: RewardKind,
    pub w_time: T,
    pub w_frechet: T,
    pub w_sal: T,
    pub timeout_penalty: T,
    pub max_timesteps: usize,
    pub time_unit: TimeUnit,
    /// Timestep duration in seconds.
    pub dt: T,
    /// Paths are resampled at this spacing before the Fréchet distance.
    pub resample_ds: T,
    pub sal: SalConfig<T>,
    /// Smoothness value substituted when the episode is too short or too
    /// still for the spectral arc length to be defined.
    pub sal_fallback: T,
}

impl<T: Scalar> RewardConfig<T> {
    pub fn new(kind: RewardKind) -> Self {
        RewardConfig {
            kind,
            w_time: T::one(),
            w_frechet: T::c(100.0),
            w_sal: T::c(30.0),
            timeout_penalty: T::c(500.0),
            max_timesteps: 100,
            time_unit: TimeUnit::Seconds,
            dt: T::c(0.25),
            resample_ds: T::c(crate::geometry::PATH_RESOLUTION),
            sal: SalConfig::default(),
            sal_fallback: T::c(-10.0),
        }
    }
}

/// Per-episode metric values feeding the reward.
#[derive(Clone, Copy, Debug)]
pub struct EpisodeMetrics<T> {
    pub steps: usize,
    pub frechet: T,
    /// `None` when the spectral arc length was undefined for the episode.
    pub sal: Option<T>,
    pub timed_out: bool,
}

/// The cumulative reward formula applied to precomputed metric values.
pub fn reward_from_metrics<T: Scalar>(m: &EpisodeMetrics<T>, cfg: &RewardConfig<T>) -> T {
    let time = match cfg.time_unit {
        TimeUnit::Seconds => T::c(m.steps as f64) * cfg.dt,
        TimeUnit::Timesteps => T::c(m.steps as f64),
    };
    let mut reward = -cfg.w_time * time - cfg.w_frechet * m.frechet;
    if cfg.kind == RewardKind::GPlusH {
        reward += cfg.w_sal * m.sal.unwrap_or(cfg.sal_fallback);
    }
    if m.timed_out {
        reward -= cfg.timeout_penalty;
    }
    reward
}

/// Computes the metrics of a walked path against a goal path and applies the
/// reward formula. `positions` is the human position per timestep.
pub fn cumulative_reward<T: Scalar>(
    positions: &[Vec2<T>],
    timed_out: bool,
    goal: &Path<T>,
    cfg: &RewardConfig<T>,
) -> Result<(T, EpisodeMetrics<T>), MetricError> {
    if positions.is_empty() {
        return Err(MetricError::EmptyPath);
    }
    let goal_rs = goal.resample(cfg.resample_ds).map_err(|_| MetricError::EmptyPath)?;

    // Resample the walked path when it has enough extent; a near-stationary
    // path is compared point-by-point.
    let walked: Vec<Vec2<T>> = match Path::new(positions.to_vec()) {
        Ok(p) if p.arc_length() > cfg.resample_ds => {
            p.resample(cfg.resample_ds).map(|r| r.points().to_vec()).unwrap_or_else(|_| positions.to_vec())
        }
        _ => positions.to_vec(),
    };
    let frechet = discrete_frechet(&walked, goal_rs.points())?;

    let sal = if cfg.kind == RewardKind::GPlusH {
        speed_profile(positions, cfg.dt)
            .ok()
            .and_then(|v| spectral_arc_length(&v, &cfg.sal).ok())
    } else {
        None
    };

    let metrics = EpisodeMetrics { steps: positions.len(), frechet, sal, timed_out };
    Ok((reward_from_metrics(&metrics, cfg), metrics))
}
