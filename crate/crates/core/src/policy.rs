//! The trainable linear guide policy.
//!
//! Per timestep the policy maps a 176-feature vector (144 recurrent hidden
//! units from the world model plus 16 upcoming goal points in the predicted
//! human's local frame) through one affine layer to a 3-D action. The flat
//! parameter vector (3x176 weights plus 3 biases, 531 values) is what the
//! evolution strategy optimizes.

use std::io::{BufRead, Write};

use ndarray::ArrayView1;

use crate::env::sim::{ControlDecision, Controller};
use crate::env::{HumanResponse, RobotAction};
use crate::geometry::{GeometryError, Path, Pose2, Vec2, PATH_RESOLUTION};
use crate::hppn::{HppnModel, HppnState, HIDDEN_DIM};
use crate::metrics::{RewardConfig, RewardKind};
use crate::rng::SeedStream;
use crate::scalar::Scalar;

/// Number of upcoming goal points in the feature vector.
pub const GOAL_SLICE_POINTS: usize = 16;
/// Feature vector width: hidden state plus the flattened goal slice.
pub const FEATURE_DIM: usize = HIDDEN_DIM + 2 * GOAL_SLICE_POINTS;
/// Flat policy parameter count: 3 x FEATURE_DIM weights plus 3 biases.
pub const PARAM_DIM: usize = 3 * FEATURE_DIM + 3;
/// A goal point must be within this distance of the predicted human for the
/// slice cursor to advance to it.
pub const SLICE_SEARCH_RADIUS: f64 = 0.5;

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("policy parameter vector must have length {PARAM_DIM}, got {0}")]
    BadLength(usize),
    #[error("feature vector must have length {FEATURE_DIM}, got {0}")]
    BadFeatureLength(usize),
    #[error("malformed policy file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Flat affine policy parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams<T> {
    flat: Vec<T>,
    /// Reward flavor this policy was trained under, for bookkeeping.
    pub reward_kind: Option<RewardKind>,
    pub training_seed: u64,
}

impl<T: Scalar> PolicyParams<T> {
    pub fn zeros() -> Self {
        PolicyParams { flat: vec![T::zero(); PARAM_DIM], reward_kind: None, training_seed: 0 }
    }

    pub fn from_flat(flat: Vec<T>) -> Result<Self, PolicyError> {
        if flat.len() != PARAM_DIM {
            return Err(PolicyError::BadLength(flat.len()));
        }
        Ok(PolicyParams { flat, reward_kind: None, training_seed: 0 })
    }

    pub fn flat(&self) -> &[T] {
        &self.flat
    }

    /// Pre-clamp affine output `W f + b`.
    pub fn raw_output(&self, features: &[T]) -> Result<[T; 3], PolicyError> {
        if features.len() != FEATURE_DIM {
            return Err(PolicyError::BadFeatureLength(features.len()));
        }
        let mut out = [T::zero(); 3];
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.flat[r * FEATURE_DIM..(r + 1) * FEATURE_DIM];
            let mut acc = T::zero();
            for (w, f) in row.iter().zip(features) {
                acc += *w * *f;
            }
            *o = acc + self.flat[3 * FEATURE_DIM + r];
        }
        Ok(out)
    }

    /// The policy action: affine output with wheel speeds clamped to the
    /// active range and the stop degree clamped to [0, 1].
    pub fn act(&self, features: &[T]) -> Result<RobotAction<T>, PolicyError> {
        let raw = self.raw_output(features)?;
        Ok(RobotAction::new(raw[0], raw[1], raw[2]).clamped())
    }

    /// Writes the interchange form: three header lines (kind, reward type,
    /// training seed) followed by the 531 parameters, one per line.
    pub fn write<W: Write>(&self, mut w: W) -> Result<(), PolicyError> {
        writeln!(w, "linear-policy")?;
        writeln!(w, "{}", self.reward_kind.map_or("none", RewardKind::label))?;
        writeln!(w, "{}", self.training_seed)?;
        for v in &self.flat {
            writeln!(w, "{v}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self, PolicyError> {
        let mut lines = r.lines();
        let kind = lines
            .next()
            .ok_or_else(|| PolicyError::Malformed("empty file".into()))??;
        if kind.trim() != "linear-policy" {
            return Err(PolicyError::Malformed(format!("unknown kind '{kind}'")));
        }
        let reward = lines
            .next()
            .ok_or_else(|| PolicyError::Malformed("missing reward line".into()))??;
        let reward_kind = match reward.trim() {
            "g-only" => Some(RewardKind::GOnly),
            "g-plus-h" => Some(RewardKind::GPlusH),
            "none" => None,
            other => return Err(PolicyError::Malformed(format!("unknown reward '{other}'"))),
        };
        let seed: u64 = lines
            .next()
            .ok_or_else(|| PolicyError::Malformed("missing seed line".into()))??
            .trim()
            .parse()
            .map_err(|_| PolicyError::Malformed("bad seed".into()))?;
        let mut flat = Vec::with_capacity(PARAM_DIM);
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let v: f64 =
                t.parse().map_err(|_| PolicyError::Malformed(format!("bad value '{t}'")))?;
            flat.push(T::c(v));
        }
        let mut p = Self::from_flat(flat)?;
        p.reward_kind = reward_kind;
        p.training_seed = seed;
        Ok(p)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), PolicyError> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        self.write(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, PolicyError> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Walks a goal path with a monotone progress cursor and produces the local
/// goal slice at each step.
#[derive(Clone, Debug)]
pub struct GoalSlicer<T> {
    points: Vec<Vec2<T>>,
    cursor: usize,
    search_radius: T,
}

impl<T: Scalar> GoalSlicer<T> {
    /// `goal` is resampled at the standard slicing resolution.
    pub fn new(goal: &Path<T>) -> Result<Self, PolicyError> {
        let resampled = goal.resample(T::c(PATH_RESOLUTION))?;
        Ok(GoalSlicer {
            points: resampled.points().to_vec(),
            cursor: 0,
            search_radius: T::c(SLICE_SEARCH_RADIUS),
        })
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    /// Advances the cursor to the goal point nearest the observer, never
    /// backward and only within the search radius (so self-approaching paths
    /// cannot yank the cursor ahead), breaking ties toward larger progress.
    /// Returns the next 16 points in the observer's local frame, padding with
    /// the final point once the path end is reached.
    pub fn slice(&mut self, observer: Pose2<T>) -> [Vec2<T>; GOAL_SLICE_POINTS] {
        let pos = observer.position();
        let mut best = self.cursor;
        let mut best_dist = T::infinity();
        for j in self.cursor..self.points.len() {
            let d = self.points[j].dist(pos);
            if d <= self.search_radius && d <= best_dist {
                best = j;
                best_dist = d;
            }
        }
        self.cursor = best;

        let mut out = [Vec2::zero(); GOAL_SLICE_POINTS];
        let last = self.points.len() - 1;
        for (k, slot) in out.iter_mut().enumerate() {
            let idx = (self.cursor + 1 + k).min(last);
            *slot = observer.to_local(self.points[idx]);
        }
        out
    }
}

/// Assembles the policy feature vector: hidden state then the flattened goal
/// slice (x, y per point).
pub fn assemble_features<T: Scalar>(
    hidden: ArrayView1<T>,
    slice: &[Vec2<T>; GOAL_SLICE_POINTS],
) -> Vec<T> {
    let mut f = Vec::with_capacity(FEATURE_DIM);
    f.extend(hidden.iter().cloned());
    for p in slice {
        f.push(p.x);
        f.push(p.y);
    }
    debug_assert_eq!(f.len(), FEATURE_DIM);
    f
}

/// Deploys a policy against the live world: the feature stream comes from
/// stepping the world model on the robot's own actions and sensed responses,
/// never from ground-truth poses.
pub struct PolicyController<'a, T: Scalar> {
    params: &'a PolicyParams<T>,
    hppn: &'a HppnModel<T>,
    state: HppnState<T>,
    slicer: GoalSlicer<T>,
}

impl<'a, T: Scalar> PolicyController<'a, T> {
    pub fn new(
        params: &'a PolicyParams<T>,
        hppn: &'a HppnModel<T>,
        goal: &Path<T>,
    ) -> Result<Self, PolicyError> {
        Ok(PolicyController {
            params,
            hppn,
            state: hppn.init_state(1),
            slicer: GoalSlicer::new(goal)?,
        })
    }
}

impl<'a, T: Scalar> Controller<T> for PolicyController<'a, T> {
    fn act(&mut self, _t: usize, response: &HumanResponse<T>) -> ControlDecision<T> {
        let hidden = self.hppn.hidden(&self.state);
        let slice = self.slicer.slice(self.state.predicted_human(0));
        let features = assemble_features(hidden.row(0), &slice);
        let action = self.params.act(&features).expect("feature width is fixed");
        if !action.is_stop() {
            self.hppn
                .predict_step_batch(
                    &mut self.state,
                    &[[action.left, action.right]],
                    Some(std::slice::from_ref(response)),
                )
                .expect("model dimensions are fixed");
        }
        ControlDecision::Act(action)
    }
}

/// One closed-loop episode simulated entirely inside the world model.
#[derive(Clone, Debug)]
pub struct VirtualEpisode<T> {
    pub human_path: Vec<Vec2<T>>,
    pub robot_path: Vec<Vec2<T>>,
    pub steps: usize,
    pub timed_out: bool,
    pub failed: bool,
}

/// Simulates every (candidate, goal) pair in lockstep. All lanes share the
/// world-model weights, so the recurrent updates batch into matrix products.
pub fn simulate_virtual_batch<T: Scalar>(
    hppn: &HppnModel<T>,
    candidates: &[PolicyParams<T>],
    goals: &[Path<T>],
    max_steps: usize,
) -> Vec<Vec<VirtualEpisode<T>>> {
    let n_goals = goals.len();
    let lanes = candidates.len() * n_goals;
    let mut state = hppn.init_state(lanes);
    let slicer_protos: Vec<GoalSlicer<T>> = goals
        .iter()
        .map(|g| GoalSlicer::new(g).expect("goal paths are valid"))
        .collect();
    let mut slicers: Vec<GoalSlicer<T>> = (0..lanes)
        .map(|lane| slicer_protos[lane % n_goals].clone())
        .collect();

    let mut human_paths: Vec<Vec<Vec2<T>>> = vec![Vec::with_capacity(max_steps); lanes];
    let mut robot_paths: Vec<Vec<Vec2<T>>> = vec![Vec::with_capacity(max_steps); lanes];
    let mut finished = vec![false; lanes];
    let mut failed = vec![false; lanes];
    let mut steps = vec![0usize; lanes];
    let mut actions = vec![[T::zero(); 2]; lanes];

    for t in 0..max_steps {
        let hidden = hppn.hidden(&state);
        let mut any_active = false;
        for lane in 0..lanes {
            if finished[lane] {
                continue;
            }
            any_active = true;
            let human = state.predicted_human(lane);
            human_paths[lane].push(human.position());
            robot_paths[lane].push(state.robot_pose[lane].position());
            steps[lane] = t + 1;

            let slice = slicers[lane].slice(human);
            let features = assemble_features(hidden.row(lane), &slice);
            let action = candidates[lane / n_goals]
                .act(&features)
                .expect("feature width is fixed");
            if action.is_stop() {
                finished[lane] = true;
            }
            actions[lane] = [action.left, action.right];
        }
        if !any_active {
            break;
        }
        hppn.predict_step_batch(&mut state, &actions, None).expect("model dimensions are fixed");
        for lane in 0..lanes {
            if finished[lane] {
                continue;
            }
            let p = state.predicted_human(lane).position();
            if !p.x.is_finite() || !p.y.is_finite() {
                failed[lane] = true;
                finished[lane] = true;
            }
        }
    }

    (0..candidates.len())
        .map(|c| {
            (0..n_goals)
                .map(|g| {
                    let lane = c * n_goals + g;
                    VirtualEpisode {
                        human_path: std::mem::take(&mut human_paths[lane]),
                        robot_path: std::mem::take(&mut robot_paths[lane]),
                        steps: steps[lane],
                        timed_out: !finished[lane],
                        failed: failed[lane],
                    }
                })
                .collect()
        })
        .collect()
}

/// Convenience wrapper for one candidate on one goal.
pub fn simulate_virtual<T: Scalar>(
    hppn: &HppnModel<T>,
    params: &PolicyParams<T>,
    goal: &Path<T>,
    max_steps: usize,
) -> VirtualEpisode<T> {
    let mut out = simulate_virtual_batch(hppn, std::slice::from_ref(params), std::slice::from_ref(goal), max_steps);
    out.remove(0).remove(0)
}

/// Scores one virtual episode under a reward configuration.
pub fn virtual_episode_reward<T: Scalar>(
    episode: &VirtualEpisode<T>,
    goal: &Path<T>,
    cfg: &RewardConfig<T>,
) -> T {
    if episode.failed || episode.human_path.is_empty() {
        return -(cfg.timeout_penalty + cfg.w_frechet * goal.arc_length());
    }
    match crate::metrics::cumulative_reward(&episode.human_path, episode.timed_out, goal, cfg) {
        Ok((r, _)) => r,
        Err(_) => {
            // Degenerate path; score it like a failure so optimization goes on.
            -(cfg.timeout_penalty + cfg.w_frechet * goal.arc_length())
        }
    }
}

/// The evolution-strategy objective: average cumulative reward over a fresh
/// set of random goal paths, shared by every candidate of a generation.
pub struct PolicyObjective<'a, T: Scalar> {
    pub hppn: &'a HppnModel<T>,
    pub reward: RewardConfig<T>,
    pub episodes_per_candidate: usize,
    pub goal_length_curvatures: SeedStream,
    /// Total virtual episodes simulated so far.
    pub virtual_episodes: usize,
}

impl<'a, T: Scalar> PolicyObjective<'a, T> {
    pub fn new(hppn: &'a HppnModel<T>, reward: RewardConfig<T>, episodes_per_candidate: usize, seed_stream: SeedStream) -> Self {
        PolicyObjective {
            hppn,
            reward,
            episodes_per_candidate,
            goal_length_curvatures: seed_stream,
            virtual_episodes: 0,
        }
    }

    /// The goal set of one generation, shared across candidates.
    pub fn generation_goals(&self, generation: usize) -> Vec<Path<T>> {
        let stream = self.goal_length_curvatures.tag("goals").index(generation as u64);
        (0..self.episodes_per_candidate)
            .map(|k| {
                let mut rng = stream.index(k as u64).rng();
                let spec = crate::geometry::random_goal_spec::<T, _>(
                    &mut rng,
                    stream.index(k as u64).seed(),
                );
                crate::geometry::generate_goal_path(&spec)
                    .expect("goal spec is valid")
                    .resample(T::c(PATH_RESOLUTION))
                    .expect("goal paths are resampleable")
            })
            .collect()
    }

    /// Mean cumulative reward of one candidate on a fixed goal set.
    pub fn evaluate_candidate(&mut self, flat: &[T], goals: &[Path<T>]) -> T {
        let params = PolicyParams::from_flat(flat.to_vec()).expect("candidate length");
        let eps = simulate_virtual_batch(self.hppn, std::slice::from_ref(&params), goals, self.reward.max_timesteps);
        self.virtual_episodes += goals.len();
        let sum: T = eps[0]
            .iter()
            .zip(goals)
            .map(|(ep, goal)| virtual_episode_reward(ep, goal, &self.reward))
            .sum();
        sum / T::c(goals.len() as f64)
    }
}

impl<'a, T: Scalar> crate::cmaes::BatchObjective<T> for PolicyObjective<'a, T> {
    fn evaluate(&mut self, generation: usize, candidates: &[Vec<T>]) -> Vec<T> {
        let goals = self.generation_goals(generation);
        let params: Vec<PolicyParams<T>> = candidates
            .iter()
            .map(|c| PolicyParams::from_flat(c.clone()).expect("candidate length"))
            .collect();
        let episodes =
            simulate_virtual_batch(self.hppn, &params, &goals, self.reward.max_timesteps);
        self.virtual_episodes += candidates.len() * goals.len();
        episodes
            .iter()
            .map(|per_goal| {
                let sum: T = per_goal
                    .iter()
                    .zip(&goals)
                    .map(|(ep, goal)| virtual_episode_reward(ep, goal, &self.reward))
                    .sum();
                sum / T::c(goals.len() as f64)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GoalPathSpec;
    use ndarray::Array1;

    fn straight_goal() -> Path<f64> {
        crate::geometry::generate_goal_path(&GoalPathSpec::new(0, false, 1)).unwrap()
    }

    #[test]
    fn dimension_constants() {
        assert_eq!(FEATURE_DIM, 176);
        assert_eq!(PARAM_DIM, 531);
        assert_eq!(GOAL_SLICE_POINTS, 16);
    }

    #[test]
    fn zero_policy_with_bias_outputs_the_bias() {
        let mut p = PolicyParams::<f64>::zeros();
        let flat = {
            let mut f = p.flat().to_vec();
            f[3 * FEATURE_DIM] = 3.75;
            f[3 * FEATURE_DIM + 1] = 3.75;
            f
        };
        p = PolicyParams::from_flat(flat).unwrap();
        let features = vec![0.0; FEATURE_DIM];
        let a = p.act(&features).unwrap();
        assert_eq!(a.left, 3.75);
        assert_eq!(a.right, 3.75);
        assert_eq!(a.stop_degree, 0.0);
        assert!(!a.is_stop());
    }

    #[test]
    fn stop_output_above_half_triggers_stop() {
        let mut flat = vec![0.0; PARAM_DIM];
        flat[3 * FEATURE_DIM + 2] = 0.6;
        let p = PolicyParams::<f64>::from_flat(flat).unwrap();
        let a = p.act(&vec![0.0; FEATURE_DIM]).unwrap();
        assert!(a.is_stop());
    }

    #[test]
    fn wheel_outputs_clamp_to_active_range() {
        let mut flat = vec![0.0; PARAM_DIM];
        flat[3 * FEATURE_DIM] = 7.2;
        flat[3 * FEATURE_DIM + 1] = -1.0;
        let p = PolicyParams::<f64>::from_flat(flat).unwrap();
        let a = p.act(&vec![0.0; FEATURE_DIM]).unwrap();
        assert_eq!(a.left, 5.0);
        assert_eq!(a.right, 2.5);
    }

    #[test]
    fn raw_output_is_affine_in_features() {
        use rand::Rng;
        let mut rng = crate::SeedStream::root(3).rng();
        let flat: Vec<f64> = (0..PARAM_DIM).map(|_| rng.random_range(-0.5..0.5)).collect();
        let p = PolicyParams::from_flat(flat).unwrap();
        let f1: Vec<f64> = (0..FEATURE_DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f2: Vec<f64> = (0..FEATURE_DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
        let alpha = 0.3;
        let blend: Vec<f64> =
            f1.iter().zip(&f2).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect();
        let y1 = p.raw_output(&f1).unwrap();
        let y2 = p.raw_output(&f2).unwrap();
        let yb = p.raw_output(&blend).unwrap();
        for r in 0..3 {
            let want = alpha * y1[r] + (1.0 - alpha) * y2[r];
            assert!((yb[r] - want).abs() < 1e-9);
        }
    }

    #[test]
    fn feature_length_is_enforced() {
        let p = PolicyParams::<f64>::zeros();
        assert!(matches!(p.act(&vec![0.0; 50]), Err(PolicyError::BadFeatureLength(50))));
        assert!(matches!(
            PolicyParams::<f64>::from_flat(vec![0.0; 100]),
            Err(PolicyError::BadLength(100))
        ));
    }

    #[test]
    fn slice_at_path_start_walks_forward() {
        let goal = straight_goal();
        let mut slicer = GoalSlicer::new(&goal).unwrap();
        let s = slicer.slice(Pose2::identity());
        for (k, p) in s.iter().enumerate() {
            assert!((p.x - 0.1 * (k + 1) as f64).abs() < 1e-9, "k={k} x={}", p.x);
            assert!(p.y.abs() < 1e-12);
        }
    }

    #[test]
    fn slice_at_path_end_pads_with_final_point() {
        let goal = straight_goal();
        let mut slicer = GoalSlicer::new(&goal).unwrap();
        let end = Pose2::new(4.0, 0.0, 0.0);
        let s = slicer.slice(end);
        for p in &s {
            assert!(p.x.abs() < 1e-9);
            assert!(p.y.abs() < 1e-12);
        }
    }

    #[test]
    fn slice_reflects_lateral_displacement() {
        let goal = straight_goal();
        let mut slicer = GoalSlicer::new(&goal).unwrap();
        // 0.2 m left of the path, heading along it.
        let s = slicer.slice(Pose2::new(0.0, 0.2, 0.0));
        for p in &s {
            assert!((p.y + 0.2).abs() < 1e-9, "y = {}", p.y);
        }
    }

    #[test]
    fn slice_cursor_is_monotone() {
        let goal = crate::geometry::generate_goal_path(&GoalPathSpec::new(3, false, 13)).unwrap();
        let resampled = goal.resample(0.1).unwrap();
        let mut slicer = GoalSlicer::new(&goal).unwrap();
        let mut last = 0usize;
        // Walk forward then jump back near the start; the cursor must not
        // regress even though early points are near again.
        let mut observers: Vec<Pose2<f64>> = resampled
            .points()
            .iter()
            .step_by(4)
            .map(|p| Pose2::new(p.x, p.y, 0.0))
            .collect();
        observers.push(Pose2::new(resampled.points()[0].x, resampled.points()[0].y, 0.0));
        for obs in observers {
            slicer.slice(obs);
            assert!(slicer.cursor() >= last);
            last = slicer.cursor();
        }
    }

    #[test]
    fn policy_file_round_trip() {
        use rand::Rng;
        let mut rng = crate::SeedStream::root(9).rng();
        let flat: Vec<f64> = (0..PARAM_DIM).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut p = PolicyParams::from_flat(flat).unwrap();
        p.reward_kind = Some(RewardKind::GPlusH);
        p.training_seed = 77;
        let mut buf = Vec::new();
        p.write(&mut buf).unwrap();
        let q = PolicyParams::<f64>::read(std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn assemble_features_layout() {
        let hidden = Array1::from_vec((0..HIDDEN_DIM).map(|i| i as f64).collect());
        let mut slice = [Vec2::zero(); GOAL_SLICE_POINTS];
        slice[0] = Vec2::new(101.0, 102.0);
        slice[15] = Vec2::new(201.0, 202.0);
        let f = assemble_features(hidden.view(), &slice);
        assert_eq!(f.len(), FEATURE_DIM);
        assert_eq!(f[0], 0.0);
        assert_eq!(f[HIDDEN_DIM - 1], 143.0);
        assert_eq!(f[HIDDEN_DIM], 101.0);
        assert_eq!(f[HIDDEN_DIM + 1], 102.0);
        assert_eq!(f[FEATURE_DIM - 2], 201.0);
        assert_eq!(f[FEATURE_DIM - 1], 202.0);
    }

    #[test]
    fn virtual_simulation_respects_step_cap_and_determinism() {
        let model = HppnModel::<f64>::new(3);
        let goal = straight_goal();
        let p = PolicyParams::zeros();
        let a = simulate_virtual(&model, &p, &goal, 100);
        assert!(a.steps <= 100);
        assert_eq!(a.human_path.len(), a.steps);
        let b = simulate_virtual(&model, &p, &goal, 100);
        assert_eq!(a.human_path, b.human_path);
        assert_eq!(a.steps, b.steps);
    }

    #[test]
    fn stop_biased_policy_ends_immediately() {
        let model = HppnModel::<f64>::new(4);
        let goal = straight_goal();
        let mut flat = vec![0.0; PARAM_DIM];
        flat[3 * FEATURE_DIM + 2] = 1.0;
        let p = PolicyParams::from_flat(flat).unwrap();
        let ep = simulate_virtual(&model, &p, &goal, 100);
        assert_eq!(ep.steps, 1);
        assert!(!ep.timed_out);
    }

    #[test]
    fn batch_simulation_matches_single_lane() {
        let model = HppnModel::<f64>::new(5);
        let goals: Vec<Path<f64>> = vec![
            straight_goal().resample(0.1).unwrap(),
            crate::geometry::generate_goal_path(&GoalPathSpec::new(1, false, 2))
                .unwrap()
                .resample(0.1)
                .unwrap(),
        ];
        use rand::Rng;
        let mut rng = crate::SeedStream::root(21).rng();
        let cands: Vec<PolicyParams<f64>> = (0..3)
            .map(|_| {
                let flat: Vec<f64> =
                    (0..PARAM_DIM).map(|_| rng.random_range(-0.05..0.05)).collect();
                PolicyParams::from_flat(flat).unwrap()
            })
            .collect();
        let batch = simulate_virtual_batch(&model, &cands, &goals, 40);
        for (c, cand) in cands.iter().enumerate() {
            for (g, goal) in goals.iter().enumerate() {
                let single = simulate_virtual(&model, cand, goal, 40);
                assert_eq!(batch[c][g].steps, single.steps, "c={c} g={g}");
                for (a, b) in batch[c][g].human_path.iter().zip(&single.human_path) {
                    assert!((a.x - b.x).abs() < 1e-12);
                    assert!((a.y - b.y).abs() < 1e-12);
                }
            }
        }
    }
}
