//! World stepping: robot kinematics, the human-follower oracle, haptic force
//! sensing, and episode rollouts.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::depth::{render_depth, DepthConfig};
use super::{EnvError, Episode, EpisodeMeta, EpisodeRow, HumanResponse, RobotAction, RobotParams, UserProfile};
use crate::geometry::{wrap_angle, Pose2, Vec2};
use crate::nn::vae::Vae;
use crate::rng::SeedStream;
use crate::scalar::Scalar;

/// Full environment configuration.
#[derive(Clone, Debug)]
pub struct EnvConfig<T> {
    pub robot: RobotParams<T>,
    /// Haptic spring constant, N/m.
    pub spring_k: T,
    /// Handle workspace radius, m.
    pub workspace_radius: T,
    /// Handle rest position in the robot frame (where the follower's grip sits
    /// at the nominal trailing distance).
    pub handle_origin: Vec2<T>,
    pub depth: DepthConfig<T>,
    /// Standard deviation of the follower's initial position jitter.
    pub start_jitter: T,
}

impl<T: Scalar> Default for EnvConfig<T> {
    fn default() -> Self {
        EnvConfig {
            robot: RobotParams::default(),
            spring_k: T::c(500.0),
            workspace_radius: T::c(0.075),
            handle_origin: Vec2::new(T::c(-0.6), T::zero()),
            depth: DepthConfig::default(),
            start_jitter: T::c(0.03),
        }
    }
}

/// Differential-drive update over one control interval with exact arc
/// integration.
pub fn drive_step<T: Scalar>(pose: Pose2<T>, action: &RobotAction<T>, params: &RobotParams<T>) -> Pose2<T> {
    let v = params.wheel_radius * (action.left + action.right) * T::c(0.5);
    let omega = params.wheel_radius * (action.right - action.left) / params.track_width;
    let dt = params.dt;
    if omega.abs() < T::c(1e-9) {
        let (s, c) = pose.theta.sin_cos();
        Pose2::new(pose.x + v * dt * c, pose.y + v * dt * s, pose.theta)
    } else {
        let theta1 = pose.theta + omega * dt;
        let r = v / omega;
        Pose2::new(
            pose.x + r * (theta1.sin() - pose.theta.sin()),
            pose.y - r * (theta1.cos() - pose.theta.cos()),
            theta1,
        )
    }
}

/// The follower's internal state. The emitted (observable) pose adds the
/// gait oscillation on top of the core position.
#[derive(Clone, Copy, Debug)]
pub struct HumanState<T> {
    pub core: Vec2<T>,
    pub heading: T,
    pub step: usize,
}

impl<T: Scalar> HumanState<T> {
    pub fn new(core: Vec2<T>, heading: T) -> Self {
        HumanState { core, heading, step: 0 }
    }

    /// Observable pose: core position plus the lateral gait offset.
    pub fn emitted_pose(&self, profile: &UserProfile<T>, dt: T) -> Pose2<T> {
        let t = T::c(self.step as f64) * dt;
        let gait = profile.gait_amplitude * (T::TAU() * profile.gait_freq * t).sin();
        let normal = Vec2::new(-self.heading.sin(), self.heading.cos());
        let p = self.core + normal.scale(gait);
        Pose2::new(p.x, p.y, self.heading)
    }
}

/// Advances the follower one step: first-order pursuit of the preferred
/// station behind the robot, speed-capped, with rate-limited heading and
/// bounded positional noise.
pub fn human_step<T: Scalar, R: Rng>(
    state: &mut HumanState<T>,
    robot: Pose2<T>,
    profile: &UserProfile<T>,
    dt: T,
    rng: &mut R,
) {
    let target = robot.to_world(Vec2::new(-profile.follow_distance, profile.lateral_offset));
    let v = (target - state.core)
        .scale(T::one() / profile.response_lag)
        .clamp_norm(profile.max_speed);
    state.core = state.core + v.scale(dt);

    if profile.noise_sigma > T::zero() {
        let noise = Vec2::new(
            profile.noise_sigma * T::standard_normal(rng),
            profile.noise_sigma * T::standard_normal(rng),
        )
        .clamp_norm(profile.noise_sigma * T::c(3.0));
        state.core = state.core + noise;
    }

    let speed = v.norm();
    if speed > T::c(1e-6) {
        let desired = v.y.atan2(v.x);
        let diff = wrap_angle(desired - state.heading);
        let max_turn = T::FRAC_PI_2() * dt;
        let turn = diff.max(-max_turn).min(max_turn);
        state.heading = wrap_angle(state.heading + turn);
    }
    state.step += 1;
}

/// Spring force exerted through the haptic handle, in the robot frame.
/// The handle displacement is the follower's position in the robot frame
/// relative to the handle rest position, clamped to the workspace radius.
pub fn sense_force<T: Scalar>(robot: Pose2<T>, human_position: Vec2<T>, cfg: &EnvConfig<T>) -> Vec2<T> {
    let disp = (robot.to_local(human_position) - cfg.handle_origin).clamp_norm(cfg.workspace_radius);
    disp.scale(cfg.spring_k)
}

/// A controller decision for one timestep.
pub enum ControlDecision<T> {
    Act(RobotAction<T>),
    /// End the episode without recording a row (script or target stream
    /// exhausted).
    Stop,
}

/// Chooses the robot action each timestep from the latest sensed response.
pub trait Controller<T: Scalar> {
    fn act(&mut self, t: usize, response: &HumanResponse<T>) -> ControlDecision<T>;
}

/// Replays a fixed action sequence.
pub struct ScriptController<T> {
    pub actions: Vec<RobotAction<T>>,
}

impl<T: Scalar> Controller<T> for ScriptController<T> {
    fn act(&mut self, t: usize, _response: &HumanResponse<T>) -> ControlDecision<T> {
        match self.actions.get(t) {
            Some(a) => ControlDecision::Act(*a),
            None => ControlDecision::Stop,
        }
    }
}

/// Derives the per-purpose RNG for depth noise at a given step, so frames
/// can be re-rendered identically outside the rollout.
pub fn depth_noise_rng(episode_stream: SeedStream, t: usize) -> ChaCha8Rng {
    episode_stream.tag("depth").index(t as u64).rng()
}

/// Rolls out one episode in the oracle world.
///
/// Per timestep: sense (force, depth, latent), let the controller act,
/// record the row, then integrate the robot and the follower. An episode
/// ends on a stop action (the stop row is recorded but not driven), on
/// controller exhaustion, or at `max_steps` (flagged as timed out).
///
/// `encoder` compresses depth frames into the response latent; without one
/// (data acquisition happens before any encoder exists) the latent is zero.
pub fn rollout<T: Scalar>(
    controller: &mut dyn Controller<T>,
    profile: &UserProfile<T>,
    cfg: &EnvConfig<T>,
    encoder: Option<&Vae<T>>,
    max_steps: usize,
    stream: SeedStream,
    goal_id: Option<String>,
) -> Result<Episode<T>, EnvError> {
    let dt = cfg.robot.dt;
    let mut rng_human = stream.tag("human").rng();
    let mut rng_init = stream.tag("init").rng();

    let jitter = Vec2::new(
        cfg.start_jitter * T::standard_normal(&mut rng_init),
        cfg.start_jitter * T::standard_normal(&mut rng_init),
    )
    .clamp_norm(cfg.start_jitter * T::c(3.0));
    let mut human = HumanState::new(jitter, T::zero());
    let mut robot = Pose2::new(-cfg.handle_origin.x, T::zero(), T::zero());

    let mut rows: Vec<EpisodeRow<T>> = Vec::new();
    let mut stopped = false;

    for t in 0..max_steps {
        let human_pose = human.emitted_pose(profile, dt);
        if !robot.x.is_finite() || !robot.y.is_finite() || !human_pose.x.is_finite() || !human_pose.y.is_finite() {
            return Err(EnvError::NonFiniteState {
                step: t,
                what: format!("robot={robot:?} human={human_pose:?} after {} rows", rows.len()),
            });
        }

        let force = sense_force(robot, human_pose.position(), cfg);
        let depth_latent = match encoder {
            Some(vae) => {
                let mut rng_depth = depth_noise_rng(stream, t);
                let frame = render_depth(&robot, human_pose.position(), &cfg.depth, &mut rng_depth);
                vae.encode_mean(&frame)
            }
            None => vec![T::zero(); super::LATENT_DIM],
        };
        let response = HumanResponse { force, depth_latent };

        let action = match controller.act(t, &response) {
            ControlDecision::Act(a) => a,
            ControlDecision::Stop => {
                stopped = true;
                break;
            }
        };
        rows.push(EpisodeRow { robot, human: human_pose, action: action.clone(), response });

        if action.is_stop() {
            stopped = true;
            break;
        }
        robot = drive_step(robot, &action, &cfg.robot);
        human_step(&mut human, robot, profile, dt, &mut rng_human);
    }

    let timed_out = !stopped && rows.len() >= max_steps;
    Ok(Episode {
        rows,
        meta: EpisodeMeta {
            seed: stream.seed(),
            profile_id: profile.id.clone(),
            timed_out,
            goal_id,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::script::random_action_script;
    use approx::assert_abs_diff_eq;

    fn cfg() -> EnvConfig<f64> {
        EnvConfig::default()
    }

    #[test]
    fn straight_drive_advances_at_mapped_speed() {
        let a = RobotAction::new(5.0, 5.0, 0.0);
        let p = drive_step(Pose2::identity(), &a, &RobotParams::<f64>::default());
        assert_abs_diff_eq!(p.x, 0.095, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.theta, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn opposite_wheels_rotate_in_place() {
        let a = RobotAction::new(-3.0, 3.0, 0.0);
        let p = drive_step(Pose2::new(1.0, 2.0, 0.4), &a, &RobotParams::<f64>::default());
        assert_abs_diff_eq!(p.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 2.0, epsilon = 1e-12);
        assert!(p.theta > 0.4);
    }

    #[test]
    fn drive_matches_fine_euler_integration() {
        use rand::Rng;
        let params = RobotParams::<f64>::default();
        let mut rng = crate::SeedStream::root(30).rng();
        for _ in 0..50 {
            let a = RobotAction::new(
                rng.random_range(2.5..5.0),
                rng.random_range(2.5..5.0),
                0.0,
            );
            let start = Pose2::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-3.0..3.0),
            );
            let exact = drive_step(start, &a, &params);

            // Oracle: midpoint integration at dt/1000.
            let v = params.wheel_radius * (a.left + a.right) / 2.0;
            let w = params.wheel_radius * (a.right - a.left) / params.track_width;
            let n = 1000;
            let h = params.dt / n as f64;
            let (mut x, mut y, mut th) = (start.x, start.y, start.theta);
            for _ in 0..n {
                let mid = th + 0.5 * w * h;
                x += v * h * mid.cos();
                y += v * h * mid.sin();
                th += w * h;
            }
            assert!((exact.x - x).abs() < 1e-6);
            assert!((exact.y - y).abs() < 1e-6);
        }
    }

    #[test]
    fn force_is_spring_times_clamped_displacement() {
        let c = cfg();
        let robot = Pose2::identity();
        // At the handle rest position: zero force.
        let f0 = sense_force(robot, Vec2::new(-0.6, 0.0), &c);
        assert_abs_diff_eq!(f0.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f0.y, 0.0, epsilon = 1e-12);
        // 0.02 m forward displacement: 10 N.
        let f = sense_force(robot, Vec2::new(-0.58, 0.0), &c);
        assert_abs_diff_eq!(f.x, 10.0, epsilon = 1e-9);
        assert_abs_diff_eq!(f.y, 0.0, epsilon = 1e-12);
        // Far beyond the workspace: clamped to k * radius.
        let f = sense_force(robot, Vec2::new(-1.6, 0.4), &c);
        assert_abs_diff_eq!(f.norm(), 37.5, epsilon = 1e-9);
    }

    #[test]
    fn follower_fixed_point() {
        let c = cfg();
        let mut profile = UserProfile::<f64>::nominal("fp");
        profile.noise_sigma = 0.0;
        profile.gait_amplitude = 0.0;
        let robot = Pose2::new(0.6, 0.0, 0.0);
        let target = robot.to_world(Vec2::new(-profile.follow_distance, profile.lateral_offset));
        let mut state = HumanState::new(target, 0.0);
        let mut rng = crate::SeedStream::root(1).rng();
        for _ in 0..30 {
            human_step(&mut state, robot, &profile, c.robot.dt, &mut rng);
        }
        assert!(state.core.dist(target) < 1e-12);
    }

    #[test]
    fn follower_converges_to_lateral_offset() {
        let c = cfg();
        let mut profile = UserProfile::<f64>::nominal("conv");
        profile.lateral_offset = 0.2;
        let mut robot = Pose2::new(0.6, 0.0, 0.0);
        let mut state = HumanState::new(Vec2::zero(), 0.0);
        let mut rng = crate::SeedStream::root(2).rng();
        let action = RobotAction::new(4.0, 4.0, 0.0);
        for _ in 0..40 {
            robot = drive_step(robot, &action, &c.robot);
            human_step(&mut state, robot, &profile, c.robot.dt, &mut rng);
        }
        // Robot heads along +x, so the lateral position is y.
        assert!((state.core.y - 0.2).abs() < 0.02, "lateral = {}", state.core.y);
    }

    #[test]
    fn gait_oscillation_peaks_at_gait_frequency() {
        let c = cfg();
        let mut profile = UserProfile::<f64>::nominal("gait");
        profile.gait_amplitude = 0.02;
        profile.gait_freq = 0.9;
        let mut robot = Pose2::new(0.6, 0.0, 0.0);
        let mut state = HumanState::new(Vec2::zero(), 0.0);
        let mut rng = crate::SeedStream::root(3).rng();
        let action = RobotAction::new(4.0, 4.0, 0.0);
        let mut lateral = Vec::new();
        for _ in 0..256 {
            robot = drive_step(robot, &action, &c.robot);
            human_step(&mut state, robot, &profile, c.robot.dt, &mut rng);
            lateral.push(state.emitted_pose(&profile, c.robot.dt).y);
        }
        // Drop the transient, remove the mean, locate the spectral peak.
        let tail: Vec<f64> = lateral[64..].to_vec();
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        let centered: Vec<f64> = tail.iter().map(|v| v - mean).collect();
        let n = 1024;
        let mags = crate::fft::real_magnitude_spectrum(&centered, n);
        let fs = 4.0;
        let peak = mags
            .iter()
            .enumerate()
            .skip(1)
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(k, _)| k as f64 * fs / n as f64)
            .unwrap();
        assert!((peak - 0.9).abs() < 0.15, "peak at {peak} Hz");
    }

    #[test]
    fn follower_never_teleports() {
        let c = cfg();
        let ranges = crate::env::ProfileRanges::<f64>::default();
        let mut rng = crate::SeedStream::root(4).rng();
        for k in 0..5u64 {
            let profile = ranges.sample(&mut rng, &format!("nt{k}"), k);
            let mut script_rng = crate::SeedStream::root(100 + k).rng();
            let script = random_action_script::<f64, _>(&mut script_rng);
            let mut ctrl = ScriptController { actions: script };
            let ep = rollout(
                &mut ctrl,
                &profile,
                &c,
                None,
                200,
                crate::SeedStream::root(200 + k),
                None,
            )
            .unwrap();
            let bound = profile.max_speed * c.robot.dt
                + 2.0 * profile.gait_amplitude
                + 3.0 * profile.noise_sigma;
            for w in ep.rows.windows(2) {
                let d = w[0].human.position().dist(w[1].human.position());
                assert!(d <= bound + 1e-9, "step displacement {d} > {bound}");
            }
        }
    }

    #[test]
    fn scripted_rollout_has_script_length() {
        let c = cfg();
        let profile = UserProfile::<f64>::nominal("len");
        let mut script_rng = crate::SeedStream::root(7).rng();
        let mut script = random_action_script_sized(&mut script_rng, 80);
        script.last_mut().unwrap().stop_degree = 1.0;
        let mut ctrl = ScriptController { actions: script };
        let ep = rollout(&mut ctrl, &profile, &c, None, 200, crate::SeedStream::root(8), None).unwrap();
        assert_eq!(ep.len(), 80);
        assert!(!ep.meta.timed_out);
    }

    fn random_action_script_sized(rng: &mut impl rand::Rng, len: usize) -> Vec<RobotAction<f64>> {
        crate::env::script::random_action_script_with(rng, len, len)
    }

    #[test]
    fn stop_at_first_step_gives_one_row() {
        let c = cfg();
        let profile = UserProfile::<f64>::nominal("stop");
        let mut ctrl = ScriptController { actions: vec![RobotAction::new(3.0, 3.0, 1.0)] };
        let ep = rollout(&mut ctrl, &profile, &c, None, 100, crate::SeedStream::root(9), None).unwrap();
        assert_eq!(ep.len(), 1);
        // The stop row is recorded but never driven.
        assert_eq!(ep.rows[0].robot.x, 0.6);
    }

    #[test]
    fn rollouts_are_deterministic() {
        let c = cfg();
        let ranges = crate::env::ProfileRanges::<f64>::default();
        let mut rng = crate::SeedStream::root(5).rng();
        let profile = ranges.sample(&mut rng, "det", 5);
        let mut s1 = crate::SeedStream::root(42).rng();
        let script: Vec<RobotAction<f64>> = random_action_script(&mut s1);
        let run = || {
            let mut ctrl = ScriptController { actions: script.clone() };
            rollout(&mut ctrl, &profile, &c, None, 200, crate::SeedStream::root(77), None).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.len(), b.len());
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.human, rb.human);
            assert_eq!(ra.robot, rb.robot);
            assert_eq!(ra.response, rb.response);
        }
    }

    #[test]
    fn zero_noise_zero_gait_is_seed_independent() {
        let c = cfg();
        let mut profile = UserProfile::<f64>::nominal("pure");
        profile.noise_sigma = 0.0;
        profile.gait_amplitude = 0.0;
        let mut s = crate::SeedStream::root(50).rng();
        let script: Vec<RobotAction<f64>> = random_action_script(&mut s);
        // Different episode streams only feed noise and jitter; with both at
        // zero the rollouts must coincide except for start jitter.
        let c_nojitter = EnvConfig { start_jitter: 0.0, ..c };
        let mut c1 = ScriptController { actions: script.clone() };
        let mut c2 = ScriptController { actions: script.clone() };
        let a = rollout(&mut c1, &profile, &c_nojitter, None, 200, crate::SeedStream::root(1), None).unwrap();
        let b = rollout(&mut c2, &profile, &c_nojitter, None, 200, crate::SeedStream::root(2), None).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.human, rb.human);
        }
    }

    #[test]
    fn robot_speed_never_exceeds_cap() {
        let c = cfg();
        let profile = UserProfile::<f64>::nominal("cap");
        let mut s = crate::SeedStream::root(51).rng();
        let script: Vec<RobotAction<f64>> = random_action_script(&mut s);
        let mut ctrl = ScriptController { actions: script };
        let ep = rollout(&mut ctrl, &profile, &c, None, 200, crate::SeedStream::root(52), None).unwrap();
        for w in ep.rows.windows(2) {
            let v = w[0].robot.position().dist(w[1].robot.position()) / c.robot.dt;
            assert!(v <= 0.38 + 1e-9, "robot speed {v}");
        }
    }
}
