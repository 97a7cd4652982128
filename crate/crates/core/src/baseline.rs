//! Supervised recurrent baseline policy.
//!
//! A four-layer LSTM regressor trained by behavior cloning on the acquired
//! episodes: from the current action, the human response, and the human's
//! next movement it predicts the next action. At deployment the "next human
//! movement" channel is fed from a target-movement schedule derived from the
//! goal path at a fixed walking speed, so guidance always lasts exactly the
//! schedule length.

use ndarray::{Array2, Axis};

use crate::checkpoint::{Checkpoint, CheckpointError};
use crate::env::episode::Dataset;
use crate::env::sim::{ControlDecision, Controller};
use crate::env::{HumanResponse, RobotAction, RESPONSE_DIM};
use crate::geometry::{Path, Pose2};
use crate::hppn::HppnError;
use crate::nn::adam::Adam;
use crate::nn::lstm::{LstmBatchState, SeqRegressor};
use crate::nn::Normalizer;
use crate::rng::SeedStream;
use crate::scalar::Scalar;

/// Hidden sizes of the baseline network.
pub const BASELINE_HIDDEN: [usize; 4] = [8, 8, 8, 8];
/// Input width: current action (3) + response (18) + target movement (3).
pub const BASELINE_IN: usize = 3 + RESPONSE_DIM + 3;
/// Default target walking speed for the movement schedule, m/s.
pub const TARGET_SPEED: f64 = 0.36;

#[derive(Clone, Debug)]
pub struct BaselineConfig<T> {
    pub epochs: usize,
    pub learning_rate: T,
    pub window: usize,
    pub stride: usize,
    pub batch_size: usize,
    pub holdout_fraction: T,
    pub target_speed: T,
    pub seed: u64,
}

impl<T: Scalar> Default for BaselineConfig<T> {
    fn default() -> Self {
        BaselineConfig {
            epochs: 80,
            learning_rate: T::c(0.01),
            window: 20,
            stride: 5,
            batch_size: 64,
            holdout_fraction: T::c(0.2),
            target_speed: T::c(TARGET_SPEED),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BaselineModel<T> {
    pub net: SeqRegressor<T>,
    pub norm_in: Normalizer<T>,
    pub norm_out: Normalizer<T>,
    /// Mean logged action, used as the "previous action" before the first
    /// step of a deployment.
    pub mean_action: [T; 3],
    pub target_speed: T,
}

/// Held-out skill summary: the model must beat predicting the mean action.
#[derive(Clone, Copy, Debug, Default)]
pub struct BaselineHoldout {
    pub action_mse_model: f64,
    pub action_variance: f64,
}

impl<T: Scalar> BaselineModel<T> {
    pub fn new(seed: u64) -> Self {
        let mut rng = SeedStream::root(seed).tag("baseline-init").rng();
        BaselineModel {
            net: SeqRegressor::new(&mut rng, BASELINE_IN, &BASELINE_HIDDEN, 3),
            norm_in: Normalizer::identity(BASELINE_IN),
            norm_out: Normalizer::identity(3),
            mean_action: [T::zero(); 3],
            target_speed: T::c(TARGET_SPEED),
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint::new("baseline");
        c.set_meta("target_speed", self.target_speed.f64());
        let f = |v: &[T]| v.iter().map(|x| x.f64()).collect::<Vec<f64>>();
        c.push_array("net.params", f(&self.net.params_flat()));
        c.push_array("norm.in.mean", f(self.norm_in.mean.as_slice().unwrap()));
        c.push_array("norm.in.std", f(self.norm_in.std.as_slice().unwrap()));
        c.push_array("norm.out.mean", f(self.norm_out.mean.as_slice().unwrap()));
        c.push_array("norm.out.std", f(self.norm_out.std.as_slice().unwrap()));
        c.push_array("mean_action", f(&self.mean_action));
        c
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self, CheckpointError> {
        c.expect_kind("baseline")?;
        let mut model = BaselineModel::new(0);
        let to_t = |v: &[f64]| v.iter().map(|&x| T::c(x)).collect::<Vec<T>>();
        model.net.set_params_flat(&to_t(c.array_exact("net.params", model.net.num_params())?));
        let norm = |mean: &[f64], std: &[f64]| Normalizer {
            mean: ndarray::Array1::from_vec(to_t(mean)),
            std: ndarray::Array1::from_vec(to_t(std)),
        };
        model.norm_in = norm(c.array("norm.in.mean")?, c.array("norm.in.std")?);
        model.norm_out = norm(c.array("norm.out.mean")?, c.array("norm.out.std")?);
        let ma = c.array_exact("mean_action", 3)?;
        model.mean_action = [T::c(ma[0]), T::c(ma[1]), T::c(ma[2])];
        model.target_speed = T::c(c.meta_parse::<f64>("target_speed")?);
        Ok(model)
    }
}

/// Point and unit tangent at a given arc length along a polyline.
fn point_and_heading_at<T: Scalar>(path: &Path<T>, s: T) -> Pose2<T> {
    let pts = path.points();
    let mut acc = T::zero();
    for w in pts.windows(2) {
        let seg = w[0].dist(w[1]);
        if acc + seg >= s || seg == T::zero() {
            let frac = if seg > T::zero() { ((s - acc) / seg).max(T::zero()).min(T::one()) } else { T::zero() };
            let p = w[0] + (w[1] - w[0]).scale(frac);
            let heading = (w[1].y - w[0].y).atan2(w[1].x - w[0].x);
            return Pose2::new(p.x, p.y, heading);
        }
        acc += seg;
    }
    let last2 = &pts[pts.len() - 2..];
    let heading = (last2[1].y - last2[0].y).atan2(last2[1].x - last2[0].x);
    Pose2::new(last2[1].x, last2[1].y, heading)
}

/// Converts a goal path into per-step target human movements (forward,
/// lateral, heading change in the walker's local frame) at a constant
/// walking speed. The schedule has `ceil(length / (speed * dt))` entries;
/// the final one covers the leftover distance.
pub fn goal_to_target_movements<T: Scalar>(goal: &Path<T>, speed: T, dt: T) -> Vec<[T; 3]> {
    let total = goal.arc_length();
    let step = speed * dt;
    let n = (total / step).ceil().f64() as usize;
    let mut out = Vec::with_capacity(n);
    let mut prev = point_and_heading_at(goal, T::zero());
    for k in 1..=n {
        let s = (T::c(k as f64) * step).min(total);
        let here = point_and_heading_at(goal, s);
        let d = Pose2::relative(prev, here);
        out.push([d.x, d.y, d.theta]);
        prev = here;
    }
    out
}

/// The human's logged local-frame movement over one step.
fn human_movement<T: Scalar>(from: Pose2<T>, to: Pose2<T>) -> [T; 3] {
    let d = Pose2::relative(from, to);
    [d.x, d.y, d.theta]
}

struct Windows<T> {
    xs: Vec<Array2<T>>,
    ts: Vec<Array2<T>>,
}

fn build_windows<T: Scalar>(
    episodes: &[crate::env::Episode<T>],
    idx: &[usize],
    window: usize,
    stride: usize,
) -> Windows<T> {
    let mut count = 0usize;
    for &e in idx {
        let len = episodes[e].len();
        // Each step t needs rows t, t+1 for both channels.
        if len >= window + 1 {
            count += (len - window - 1) / stride + 1;
        }
    }
    let mut xs: Vec<Array2<T>> = (0..window).map(|_| Array2::zeros((count, BASELINE_IN))).collect();
    let mut ts: Vec<Array2<T>> = (0..window).map(|_| Array2::zeros((count, 3))).collect();

    let mut w = 0usize;
    for &e in idx {
        let ep = &episodes[e];
        if ep.len() < window + 1 {
            continue;
        }
        let mut start = 0usize;
        while start + window + 1 <= ep.len() {
            for t in 0..window {
                let row = &ep.rows[start + t];
                let next = &ep.rows[start + t + 1];
                xs[t][[w, 0]] = row.action.left;
                xs[t][[w, 1]] = row.action.right;
                xs[t][[w, 2]] = row.action.stop_degree;
                for (k, v) in row.response.to_vec().into_iter().enumerate() {
                    xs[t][[w, 3 + k]] = v;
                }
                let m = human_movement(row.human, next.human);
                for k in 0..3 {
                    xs[t][[w, 3 + RESPONSE_DIM + k]] = m[k];
                }
                ts[t][[w, 0]] = next.action.left;
                ts[t][[w, 1]] = next.action.right;
                ts[t][[w, 2]] = next.action.stop_degree;
            }
            w += 1;
            start += stride;
        }
    }
    debug_assert_eq!(w, count);
    Windows { xs, ts }
}

/// Behavior-clones the baseline policy from logged episodes.
pub fn train_baseline<T: Scalar>(
    dataset: &Dataset<T>,
    cfg: &BaselineConfig<T>,
) -> Result<(BaselineModel<T>, Vec<f64>, BaselineHoldout), HppnError> {
    if dataset.episodes.is_empty() {
        return Err(HppnError::EmptyDataset);
    }
    let mut idx: Vec<usize> = (0..dataset.episodes.len()).collect();
    use rand::seq::SliceRandom;
    let mut rng = SeedStream::root(cfg.seed).tag("baseline-holdout").rng();
    idx.shuffle(&mut rng);
    let n_hold = ((dataset.episodes.len() as f64 * cfg.holdout_fraction.f64()).round() as usize)
        .min(dataset.episodes.len().saturating_sub(1));
    let (hold_idx, train_idx) = idx.split_at(n_hold);

    let mut set = build_windows(&dataset.episodes, train_idx, cfg.window, cfg.stride);
    if set.xs[0].nrows() == 0 {
        return Err(HppnError::NoWindows);
    }

    let mut model = BaselineModel::new(cfg.seed);
    model.target_speed = cfg.target_speed;
    let stack_in = {
        let views: Vec<_> = set.xs.iter().map(|m| m.view()).collect();
        ndarray::concatenate(Axis(0), &views).unwrap()
    };
    let stack_out = {
        let views: Vec<_> = set.ts.iter().map(|m| m.view()).collect();
        ndarray::concatenate(Axis(0), &views).unwrap()
    };
    model.norm_in = Normalizer::fit(&stack_in);
    model.norm_out = Normalizer::fit(&stack_out);
    model.mean_action = [
        model.norm_out.mean[0],
        model.norm_out.mean[1],
        model.norm_out.mean[2],
    ];
    for t in 0..cfg.window {
        model.norm_in.apply(&mut set.xs[t]);
        model.norm_out.apply(&mut set.ts[t]);
    }

    let mut adam = Adam::new(cfg.learning_rate, model.net.num_params());
    let mut params = model.net.params_flat();
    let mut order: Vec<usize> = (0..set.xs[0].nrows()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut erng = SeedStream::root(cfg.seed).tag("baseline-epoch").index(epoch as u64).rng();
        order.shuffle(&mut erng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let xs: Vec<Array2<T>> = set.xs.iter().map(|m| m.select(Axis(0), chunk)).collect();
            let ts: Vec<Array2<T>> = set.ts.iter().map(|m| m.select(Axis(0), chunk)).collect();
            let (loss, grad) = model.net.loss_and_grads(&xs, &ts)?;
            if !loss.is_finite() {
                return Err(HppnError::NonFiniteLoss { part: "baseline", epoch });
            }
            adam.step(&mut params, &grad.params_flat())?;
            model.net.set_params_flat(&params);
            loss_sum += loss.f64();
            batches += 1;
        }
        curve.push(loss_sum / batches.max(1) as f64);
    }

    // Held-out next-action error in raw units vs the mean-action predictor.
    let mut mse = 0.0f64;
    let mut var = 0.0f64;
    let mut n = 0usize;
    for &e in hold_idx {
        let ep = &dataset.episodes[e];
        if ep.len() < 2 {
            continue;
        }
        let mut state = model.net.stack.zero_state(1);
        for t in 0..ep.len() - 1 {
            let row = &ep.rows[t];
            let next = &ep.rows[t + 1];
            let m = human_movement(row.human, next.human);
            let pred = model.step_raw(
                &mut state,
                [row.action.left, row.action.right, row.action.stop_degree],
                &row.response,
                m,
            );
            let actual = [next.action.left, next.action.right, next.action.stop_degree];
            for k in 0..3 {
                mse += (pred[k] - actual[k]).f64().powi(2);
                var += (model.norm_out.mean[k] - actual[k]).f64().powi(2);
            }
            n += 1;
        }
    }
    let holdout = BaselineHoldout {
        action_mse_model: mse / (3 * n.max(1)) as f64,
        action_variance: var / (3 * n.max(1)) as f64,
    };
    Ok((model, curve, holdout))
}

impl<T: Scalar> BaselineModel<T> {
    /// One recurrent step; returns the denormalized raw action prediction.
    fn step_raw(
        &self,
        state: &mut LstmBatchState<T>,
        prev_action: [T; 3],
        response: &HumanResponse<T>,
        movement: [T; 3],
    ) -> [T; 3] {
        let mut row = vec![T::zero(); BASELINE_IN];
        row[..3].copy_from_slice(&prev_action);
        for (k, v) in response.to_vec().into_iter().enumerate() {
            row[3 + k] = v;
        }
        row[3 + RESPONSE_DIM..].copy_from_slice(&movement);
        self.norm_in.apply_vec(&mut row);
        let x = Array2::from_shape_vec((1, BASELINE_IN), row).unwrap();
        let y = self.net.step(state, &x).expect("fixed dimensions");
        let mut out = [y[[0, 0]], y[[0, 1]], y[[0, 2]]];
        self.norm_out.invert_vec(&mut out);
        out
    }
}

/// Deploys the baseline: feeds the target-movement schedule and stops when
/// it is exhausted, so the completion time is a pure function of the goal
/// path length. The network's stop output is recorded as zero during
/// scheduled steps because termination is schedule-driven.
pub struct BaselineController<'a, T: Scalar> {
    model: &'a BaselineModel<T>,
    state: LstmBatchState<T>,
    targets: Vec<[T; 3]>,
    prev_action: [T; 3],
}

impl<'a, T: Scalar> BaselineController<'a, T> {
    pub fn new(model: &'a BaselineModel<T>, goal: &Path<T>, dt: T) -> Self {
        let targets = goal_to_target_movements(goal, model.target_speed, dt);
        BaselineController {
            model,
            state: model.net.stack.zero_state(1),
            targets,
            prev_action: model.mean_action,
        }
    }

    pub fn schedule_len(&self) -> usize {
        self.targets.len()
    }
}

impl<'a, T: Scalar> Controller<T> for BaselineController<'a, T> {
    fn act(&mut self, t: usize, response: &HumanResponse<T>) -> ControlDecision<T> {
        let Some(&movement) = self.targets.get(t) else {
            return ControlDecision::Stop;
        };
        let raw = self.model.step_raw(&mut self.state, self.prev_action, response, movement);
        let action = RobotAction::new(raw[0], raw[1], T::zero()).clamped();
        self.prev_action = [action.left, action.right, action.stop_degree];
        ControlDecision::Act(action)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::episode::Dataset;
    use crate::env::script::random_action_script_with;
    use crate::env::sim::{rollout, EnvConfig, ScriptController};
    use crate::env::ProfileRanges;
    use crate::geometry::{generate_goal_path, GoalPathSpec};

    fn tiny_dataset(n: usize, seed: u64) -> Dataset<f64> {
        let cfg = EnvConfig::default();
        let ranges = ProfileRanges::default();
        let mut prof_rng = SeedStream::root(seed).tag("p").rng();
        let profiles: Vec<_> =
            (0..2).map(|i| ranges.sample(&mut prof_rng, &format!("u{i}"), i as u64)).collect();
        let episodes = (0..n)
            .map(|i| {
                let stream = SeedStream::root(seed).tag("ep").index(i as u64);
                let mut srng = stream.tag("script").rng();
                let mut ctrl =
                    ScriptController { actions: random_action_script_with(&mut srng, 40, 60) };
                rollout(&mut ctrl, &profiles[i % 2], &cfg, None, 200, stream, None).unwrap()
            })
            .collect();
        Dataset { episodes, profiles }
    }

    #[test]
    fn straight_goal_schedule_is_45_steps_of_9cm() {
        let goal = generate_goal_path(&GoalPathSpec::<f64>::new(0, false, 1)).unwrap();
        let moves = goal_to_target_movements(&goal, 0.36, 0.25);
        assert_eq!(moves.len(), 45);
        for m in &moves[..44] {
            assert!((m[0] - 0.09).abs() < 1e-9, "forward {}", m[0]);
            assert!(m[1].abs() < 1e-9);
            assert!(m[2].abs() < 1e-9);
        }
        // Final step covers the remaining 4.0 - 44 * 0.09 = 0.04 m.
        assert!((moves[44][0] - 0.04).abs() < 1e-6, "last {}", moves[44][0]);
    }

    #[test]
    fn curved_goal_has_constant_heading_change() {
        let goal = generate_goal_path(&GoalPathSpec::<f64>::new(1, false, 3)).unwrap();
        let moves = goal_to_target_movements(&goal, 0.36, 0.25);
        // Single-arc goal: interior heading deltas are constant.
        let dtheta: Vec<f64> = moves[..moves.len() - 2].iter().map(|m| m[2]).collect();
        for d in &dtheta {
            assert!((d - dtheta[0]).abs() < 1e-6, "{d} vs {}", dtheta[0]);
        }
    }

    #[test]
    fn training_reduces_loss_and_beats_mean_predictor() {
        let ds = tiny_dataset(20, 31);
        let cfg = BaselineConfig {
            epochs: 15,
            stride: 4,
            seed: 3,
            ..Default::default()
        };
        let (_, curve, holdout) = train_baseline(&ds, &cfg).unwrap();
        assert!(curve.last().unwrap() < &curve[0]);
        assert!(
            holdout.action_mse_model < holdout.action_variance,
            "mse {} vs variance {}",
            holdout.action_mse_model,
            holdout.action_variance
        );
    }

    #[test]
    fn deployment_length_is_schedule_length() {
        let ds = tiny_dataset(8, 32);
        let cfg = BaselineConfig { epochs: 2, stride: 8, seed: 4, ..Default::default() };
        let (model, _, _) = train_baseline(&ds, &cfg).unwrap();
        let goal = generate_goal_path(&GoalPathSpec::<f64>::new(0, false, 1)).unwrap();

        let env_cfg = EnvConfig::default();
        let ranges = ProfileRanges::default();
        let mut prng = SeedStream::root(9).rng();
        for trial in 0..3u64 {
            let profile = ranges.sample(&mut prng, &format!("e{trial}"), trial);
            let mut ctrl = BaselineController::new(&model, &goal, env_cfg.robot.dt);
            assert_eq!(ctrl.schedule_len(), 45);
            let ep = rollout(
                &mut ctrl,
                &profile,
                &env_cfg,
                None,
                100,
                SeedStream::root(50).index(trial),
                None,
            )
            .unwrap();
            assert_eq!(ep.len(), 45, "trial {trial}");
        }
    }

    #[test]
    fn actions_are_clamped_and_deterministic() {
        let ds = tiny_dataset(6, 33);
        let cfg = BaselineConfig { epochs: 2, stride: 8, seed: 5, ..Default::default() };
        let (model, _, _) = train_baseline(&ds, &cfg).unwrap();
        let goal = generate_goal_path(&GoalPathSpec::<f64>::new(1, false, 7)).unwrap();
        let run = || {
            let mut ctrl = BaselineController::new(&model, &goal, 0.25);
            let resp = HumanResponse::zeros();
            let mut actions = Vec::new();
            for t in 0..10 {
                match ctrl.act(t, &resp) {
                    ControlDecision::Act(a) => actions.push(a),
                    ControlDecision::Stop => break,
                }
            }
            actions
        };
        let (a, b) = (run(), run());
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x, y);
            assert!((2.5..=5.0).contains(&x.left));
            assert!((2.5..=5.0).contains(&x.right));
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let ds = tiny_dataset(6, 34);
        let cfg = BaselineConfig { epochs: 2, stride: 8, seed: 6, ..Default::default() };
        let (model, _, _) = train_baseline(&ds, &cfg).unwrap();
        let ckpt = model.to_checkpoint();
        let mut buf = Vec::new();
        ckpt.write(&mut buf).unwrap();
        let back = Checkpoint::read(std::io::BufReader::new(&buf[..])).unwrap();
        let model2 = BaselineModel::<f64>::from_checkpoint(&back).unwrap();
        let goal = generate_goal_path(&GoalPathSpec::<f64>::new(0, false, 1)).unwrap();
        let resp = HumanResponse::zeros();
        let mut c1 = BaselineController::new(&model, &goal, 0.25);
        let mut c2 = BaselineController::new(&model2, &goal, 0.25);
        for t in 0..5 {
            match (c1.act(t, &resp), c2.act(t, &resp)) {
                (ControlDecision::Act(a), ControlDecision::Act(b)) => assert_eq!(a, b),
                _ => panic!("unexpected stop"),
            }
        }
    }
}
