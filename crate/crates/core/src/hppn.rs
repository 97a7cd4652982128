//! Human Path Prediction Network: a dual-LSTM world model.
//!
//! Two independent recurrent parts share only the action input. The robot
//! part maps wheel commands to per-step robot pose deltas in the robot's
//! local frame. The human part maps (action, response) to the next
//! human-robot relative pose and, through a residual connection, the next
//! human response. Stacking the robot deltas and composing with the relative
//! pose yields a full closed-loop simulator of human movement driven only by
//! robot actions.

use ndarray::{Array2, Axis};

use crate::env::episode::Dataset;
use crate::env::{Episode, HumanResponse, RESPONSE_DIM};
use crate::geometry::Pose2;
use crate::nn::adam::Adam;
use crate::nn::lstm::{LstmBatchState, SeqRegressor};
use crate::nn::{NnError, Normalizer};
use crate::rng::SeedStream;
use crate::scalar::Scalar;

/// Robot-part recurrent sizes.
pub const ROBOT_HIDDEN: [usize; 2] = [8, 8];
/// Human-part recurrent sizes.
pub const HUMAN_HIDDEN: [usize; 2] = [64, 64];
/// Action input width (left and right wheel speeds).
pub const ACTION_DIM: usize = 2;
/// Width of the concatenated hidden state handed to the policy.
pub const HIDDEN_DIM: usize = 2 * 8 + 2 * 64;

const HUMAN_IN: usize = ACTION_DIM + RESPONSE_DIM; // 20
const HUMAN_OUT: usize = 3 + RESPONSE_DIM; // relative pose + response delta

#[derive(Debug, thiserror::Error)]
pub enum HppnError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("no training windows: episodes shorter than window+1")]
    NoWindows,
    #[error("non-finite {part} loss at epoch {epoch}")]
    NonFiniteLoss { part: &'static str, epoch: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Clone, Debug)]
pub struct HppnConfig<T> {
    pub window: usize,
    pub stride: usize,
    pub holdout_fraction: T,
    pub robot_epochs: usize,
    pub human_epochs: usize,
    pub learning_rate: T,
    pub batch_size: usize,
    pub seed: u64,
}

impl<T: Scalar> Default for HppnConfig<T> {
    fn default() -> Self {
        HppnConfig {
            window: 20,
            stride: 5,
            holdout_fraction: T::c(0.2),
            robot_epochs: 500,
            human_epochs: 80,
            learning_rate: T::c(0.01),
            batch_size: 64,
            seed: 0,
        }
    }
}

/// The trained world model with its frozen normalization statistics.
#[derive(Clone, Debug)]
pub struct HppnModel<T> {
    pub robot: SeqRegressor<T>,
    pub human: SeqRegressor<T>,
    pub norm_robot_in: Normalizer<T>,
    pub norm_robot_out: Normalizer<T>,
    pub norm_human_in: Normalizer<T>,
    pub norm_rel_out: Normalizer<T>,
    /// Scale-only statistics: the residual head's zero output must map to a
    /// zero response change.
    pub norm_resp_delta: Normalizer<T>,
    /// Mean initial relative pose across training episodes.
    pub init_rel: [T; 3],
    /// Mean initial response across training episodes.
    pub init_response: Vec<T>,
    /// Mean wheel speeds, used as the "previous action" before the first step.
    pub mean_action: [T; 2],
}

/// Mutable simulation state for a batch of independent lanes.
#[derive(Clone, Debug)]
pub struct HppnState<T> {
    robot_lstm: LstmBatchState<T>,
    human_lstm: LstmBatchState<T>,
    pub robot_pose: Vec<Pose2<T>>,
    pub rel_pose: Vec<Pose2<T>>,
    pub response: Vec<HumanResponse<T>>,
}

impl<T: Scalar> HppnState<T> {
    pub fn lanes(&self) -> usize {
        self.robot_pose.len()
    }

    /// Predicted human pose of a lane: robot pose composed with the relative
    /// pose.
    pub fn predicted_human(&self, lane: usize) -> Pose2<T> {
        self.robot_pose[lane].compose(self.rel_pose[lane])
    }
}

impl<T: Scalar> HppnModel<T> {
    pub fn new(seed: u64) -> Self {
        let mut rng = SeedStream::root(seed).tag("hppn-init").rng();
        let robot = SeqRegressor::new(&mut rng, ACTION_DIM, &ROBOT_HIDDEN, 3);
        let human = SeqRegressor::new(&mut rng, HUMAN_IN, &HUMAN_HIDDEN, HUMAN_OUT);
        HppnModel {
            robot,
            human,
            norm_robot_in: Normalizer::identity(ACTION_DIM),
            norm_robot_out: Normalizer::identity(3),
            norm_human_in: Normalizer::identity(HUMAN_IN),
            norm_rel_out: Normalizer::identity(3),
            norm_resp_delta: Normalizer::identity(RESPONSE_DIM),
            init_rel: [T::zero(); 3],
            init_response: vec![T::zero(); RESPONSE_DIM],
            mean_action: [T::zero(); 2],
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.robot.stack.total_hidden() + self.human.stack.total_hidden()
    }

    /// Fresh state with the model's canonical initial condition: the
    /// predicted human sits at the origin heading +x, the robot ahead of it
    /// by the inverse of the mean initial relative pose.
    pub fn init_state(&self, lanes: usize) -> HppnState<T> {
        let rel = Pose2::new(self.init_rel[0], self.init_rel[1], self.init_rel[2]);
        self.init_state_from(rel.inverse(), rel, HumanResponse::from_slice(&self.init_response), lanes)
    }

    /// Fresh state from an explicit initial condition (used when replaying
    /// logged episodes and when deploying against the live world).
    pub fn init_state_from(
        &self,
        robot: Pose2<T>,
        rel: Pose2<T>,
        response: HumanResponse<T>,
        lanes: usize,
    ) -> HppnState<T> {
        HppnState {
            robot_lstm: self.robot.stack.zero_state(lanes),
            human_lstm: self.human.stack.zero_state(lanes),
            robot_pose: vec![robot; lanes],
            rel_pose: vec![rel; lanes],
            response: vec![response; lanes],
        }
    }

    /// Concatenated per-layer hidden activations (robot layers then human
    /// layers), one row per lane. All zeros before the first step.
    pub fn hidden(&self, state: &HppnState<T>) -> Array2<T> {
        let lanes = state.lanes();
        let mut out = Array2::zeros((lanes, self.hidden_dim()));
        let mut col = 0;
        for h in state.robot_lstm.h.iter().chain(state.human_lstm.h.iter()) {
            let width = h.ncols();
            out.slice_mut(ndarray::s![.., col..col + width]).assign(h);
            col += width;
        }
        out
    }

    /// Advances every lane one step.
    ///
    /// `actions` holds wheel speeds per lane. `responses` supplies the sensed
    /// response per lane when running against the live world; `None` feeds
    /// back the model's own predicted responses (closed-loop simulation).
    /// Returns the concatenated hidden state after the step.
    pub fn predict_step_batch(
        &self,
        state: &mut HppnState<T>,
        actions: &[[T; 2]],
        responses: Option<&[HumanResponse<T>]>,
    ) -> Result<Array2<T>, NnError> {
        let lanes = state.lanes();
        assert_eq!(actions.len(), lanes);
        if let Some(r) = responses {
            assert_eq!(r.len(), lanes);
        }

        // Assemble normalized inputs.
        let mut x_robot = Array2::zeros((lanes, ACTION_DIM));
        let mut x_human = Array2::zeros((lanes, HUMAN_IN));
        for lane in 0..lanes {
            let resp = match responses {
                Some(r) => &r[lane],
                None => &state.response[lane],
            };
            let mut row = [T::zero(); HUMAN_IN];
            row[0] = actions[lane][0];
            row[1] = actions[lane][1];
            for (k, v) in resp.to_vec().into_iter().enumerate() {
                row[2 + k] = v;
            }
            self.norm_human_in.apply_vec(&mut row);
            for k in 0..HUMAN_IN {
                x_human[[lane, k]] = row[k];
            }

            let mut arow = [actions[lane][0], actions[lane][1]];
            self.norm_robot_in.apply_vec(&mut arow);
            x_robot[[lane, 0]] = arow[0];
            x_robot[[lane, 1]] = arow[1];
        }

        let y_robot = self.robot.step(&mut state.robot_lstm, &x_robot)?;
        let y_human = self.human.step(&mut state.human_lstm, &x_human)?;

        for lane in 0..lanes {
            // Robot pose accumulates the predicted local-frame delta.
            let mut delta = [y_robot[[lane, 0]], y_robot[[lane, 1]], y_robot[[lane, 2]]];
            self.norm_robot_out.invert_vec(&mut delta);
            state.robot_pose[lane] = state.robot_pose[lane]
                .compose(Pose2::new(delta[0], delta[1], delta[2]));

            // Relative pose is regressed directly.
            let mut rel = [y_human[[lane, 0]], y_human[[lane, 1]], y_human[[lane, 2]]];
            self.norm_rel_out.invert_vec(&mut rel);
            state.rel_pose[lane] = Pose2::new(rel[0], rel[1], rel[2]);

            // Response advances residually from the input response.
            let mut delta_resp = vec![T::zero(); RESPONSE_DIM];
            for k in 0..RESPONSE_DIM {
                delta_resp[k] = y_human[[lane, 3 + k]];
            }
            self.norm_resp_delta.invert_vec(&mut delta_resp);
            let base = match responses {
                Some(r) => r[lane].to_vec(),
                None => state.response[lane].to_vec(),
            };
            let next: Vec<T> = base.iter().zip(&delta_resp).map(|(&b, &d)| b + d).collect();
            state.response[lane] = HumanResponse::from_slice(&next);
        }
        Ok(self.hidden(state))
    }

    /// Single-lane convenience wrapper around [`Self::predict_step_batch`].
    pub fn predict_step(
        &self,
        state: &mut HppnState<T>,
        action: [T; 2],
        response: Option<&HumanResponse<T>>,
    ) -> Result<Vec<T>, NnError> {
        let responses_vec;
        let responses = match response {
            Some(r) => {
                responses_vec = vec![r.clone()];
                Some(responses_vec.as_slice())
            }
            None => None,
        };
        let hidden = self.predict_step_batch(state, &[action], responses)?;
        Ok(hidden.row(0).to_vec())
    }
}

/// Per-epoch training losses and the held-out skill summary.
#[derive(Clone, Debug, Default)]
pub struct HppnTrainReport {
    pub robot_loss: Vec<f64>,
    pub human_loss: Vec<f64>,
    pub holdout: HoldoutReport,
    /// Dataset indices of the held-out episodes.
    pub holdout_idx: Vec<usize>,
}

/// One-step prediction error on held-out episodes, model vs the persistence
/// predictor (predict no change).
#[derive(Clone, Debug, Default)]
pub struct HoldoutReport {
    pub rel_mse_model: f64,
    pub rel_mse_persistence: f64,
    pub resp_mse_model: f64,
    pub resp_mse_persistence: f64,
    pub episodes: usize,
}

struct WindowSet<T> {
    /// Per-step input matrices, each (windows, input_dim).
    xs: Vec<Array2<T>>,
    /// Per-step target matrices, each (windows, output_dim).
    ts: Vec<Array2<T>>,
}

impl<T: Scalar> WindowSet<T> {
    fn windows(&self) -> usize {
        self.xs[0].nrows()
    }

    fn gather(&self, idx: &[usize]) -> (Vec<Array2<T>>, Vec<Array2<T>>) {
        let xs = self.xs.iter().map(|m| m.select(Axis(0), idx)).collect();
        let ts = self.ts.iter().map(|m| m.select(Axis(0), idx)).collect();
        (xs, ts)
    }
}

/// The local-frame pose delta of the robot over one step.
fn robot_delta<T: Scalar>(from: Pose2<T>, to: Pose2<T>) -> [T; 3] {
    let d = Pose2::relative(from, to);
    [d.x, d.y, d.theta]
}

/// Human pose relative to the robot.
fn relative_pose<T: Scalar>(robot: Pose2<T>, human: Pose2<T>) -> [T; 3] {
    let r = Pose2::relative(robot, human);
    [r.x, r.y, r.theta]
}

fn split_holdout<T: Scalar>(
    episodes: &[Episode<T>],
    fraction: T,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..episodes.len()).collect();
    use rand::seq::SliceRandom;
    let mut rng = SeedStream::root(seed).tag("holdout").rng();
    idx.shuffle(&mut rng);
    let n_hold = ((T::c(episodes.len() as f64) * fraction).f64().round() as usize)
        .min(episodes.len().saturating_sub(1));
    let holdout = idx[..n_hold].to_vec();
    let train = idx[n_hold..].to_vec();
    (train, holdout)
}

fn build_windows<T: Scalar>(
    episodes: &[Episode<T>],
    idx: &[usize],
    window: usize,
    stride: usize,
) -> (WindowSet<T>, WindowSet<T>) {
    // First pass: count windows.
    let mut count = 0usize;
    for &e in idx {
        let len = episodes[e].len();
        if len >= window + 1 {
            count += (len - window - 1) / stride + 1;
        }
    }
    let mut robot = WindowSet {
        xs: (0..window).map(|_| Array2::zeros((count, ACTION_DIM))).collect(),
        ts: (0..window).map(|_| Array2::zeros((count, 3))).collect(),
    };
    let mut human = WindowSet {
        xs: (0..window).map(|_| Array2::zeros((count, HUMAN_IN))).collect(),
        ts: (0..window).map(|_| Array2::zeros((count, HUMAN_OUT))).collect(),
    };

    let mut w = 0usize;
    for &e in idx {
        let ep = &episodes[e];
        let len = ep.len();
        if len < window + 1 {
            continue;
        }
        let mut start = 0usize;
        while start + window + 1 <= len {
            for t in 0..window {
                let row = &ep.rows[start + t];
                let next = &ep.rows[start + t + 1];
                robot.xs[t][[w, 0]] = row.action.left;
                robot.xs[t][[w, 1]] = row.action.right;
                let rd = robot_delta(row.robot, next.robot);
                for k in 0..3 {
                    robot.ts[t][[w, k]] = rd[k];
                }

                human.xs[t][[w, 0]] = row.action.left;
                human.xs[t][[w, 1]] = row.action.right;
                for (k, v) in row.response.to_vec().into_iter().enumerate() {
                    human.xs[t][[w, 2 + k]] = v;
                }
                let rel = relative_pose(next.robot, next.human);
                for k in 0..3 {
                    human.ts[t][[w, k]] = rel[k];
                }
                let resp_now = row.response.to_vec();
                let resp_next = next.response.to_vec();
                for k in 0..RESPONSE_DIM {
                    human.ts[t][[w, 3 + k]] = resp_next[k] - resp_now[k];
                }
            }
            w += 1;
            start += stride;
        }
    }
    debug_assert_eq!(w, count);
    (robot, human)
}

fn stack_steps<T: Scalar>(set: &WindowSet<T>, targets: bool) -> Array2<T> {
    let mats = if targets { &set.ts } else { &set.xs };
    let views: Vec<_> = mats.iter().map(|m| m.view()).collect();
    ndarray::concatenate(Axis(0), &views).expect("stacking windows")
}

fn train_part<T: Scalar>(
    part: &mut SeqRegressor<T>,
    set: &WindowSet<T>,
    epochs: usize,
    lr: T,
    batch_size: usize,
    seed: u64,
    label: &'static str,
) -> Result<Vec<f64>, HppnError> {
    let n = set.windows();
    let mut adam = Adam::new(lr, part.num_params());
    let mut params = part.params_flat();
    let mut order: Vec<usize> = (0..n).collect();
    let mut curve = Vec::with_capacity(epochs);

    for epoch in 0..epochs {
        use rand::seq::SliceRandom;
        let mut rng = SeedStream::root(seed).tag(label).index(epoch as u64).rng();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0f64;
        let mut batches = 0usize;
        for chunk in order.chunks(batch_size) {
            let (xs, ts) = set.gather(chunk);
            let (loss, grad) = part.loss_and_grads(&xs, &ts)?;
            if !loss.is_finite() {
                return Err(HppnError::NonFiniteLoss { part: label, epoch });
            }
            adam.step(&mut params, &grad.params_flat())?;
            part.set_params_flat(&params);
            loss_sum += loss.f64();
            batches += 1;
        }
        curve.push(loss_sum / batches.max(1) as f64);
    }
    Ok(curve)
}

/// Trains both parts on 20-step windows with teacher forcing and freezes the
/// normalization statistics into the returned model.
pub fn train_hppn<T: Scalar>(
    dataset: &Dataset<T>,
    cfg: &HppnConfig<T>,
) -> Result<(HppnModel<T>, HppnTrainReport), HppnError> {
    if dataset.episodes.is_empty() {
        return Err(HppnError::EmptyDataset);
    }
    let (train_idx, holdout_idx) =
        split_holdout(&dataset.episodes, cfg.holdout_fraction, cfg.seed);
    let (mut robot_set, mut human_set) =
        build_windows(&dataset.episodes, &train_idx, cfg.window, cfg.stride);
    if robot_set.windows() == 0 {
        return Err(HppnError::NoWindows);
    }

    let mut model = HppnModel::new(cfg.seed);

    // Freeze normalization statistics from the raw training windows.
    model.norm_robot_in = Normalizer::fit(&stack_steps(&robot_set, false));
    model.norm_robot_out = Normalizer::fit(&stack_steps(&robot_set, true));
    model.norm_human_in = Normalizer::fit(&stack_steps(&human_set, false));
    let human_targets = stack_steps(&human_set, true);
    let rel_cols = human_targets.slice(ndarray::s![.., 0..3]).to_owned();
    let delta_cols = human_targets.slice(ndarray::s![.., 3..]).to_owned();
    model.norm_rel_out = Normalizer::fit(&rel_cols);
    model.norm_resp_delta = Normalizer::fit_scale_only(&delta_cols);

    // Initial-condition statistics.
    let mut init_rel = [T::zero(); 3];
    let mut init_resp = vec![T::zero(); RESPONSE_DIM];
    let mut act_sum = [T::zero(); 2];
    let mut act_count = T::zero();
    for &e in &train_idx {
        let ep = &dataset.episodes[e];
        if ep.is_empty() {
            continue;
        }
        let first = &ep.rows[0];
        let rel = relative_pose(first.robot, first.human);
        for k in 0..3 {
            init_rel[k] += rel[k];
        }
        for (k, v) in first.response.to_vec().into_iter().enumerate() {
            init_resp[k] += v;
        }
        for row in &ep.rows {
            act_sum[0] += row.action.left;
            act_sum[1] += row.action.right;
            act_count += T::one();
        }
    }
    let n_eps = T::c(train_idx.len().max(1) as f64);
    for k in 0..3 {
        model.init_rel[k] = init_rel[k] / n_eps;
    }
    for k in 0..RESPONSE_DIM {
        model.init_response[k] = init_resp[k] / n_eps;
    }
    model.mean_action = [act_sum[0] / act_count, act_sum[1] / act_count];

    // Normalize windows in place.
    for t in 0..cfg.window {
        model.norm_robot_in.apply(&mut robot_set.xs[t]);
        model.norm_robot_out.apply(&mut robot_set.ts[t]);
        model.norm_human_in.apply(&mut human_set.xs[t]);
        let mut rel = human_set.ts[t].slice_mut(ndarray::s![.., 0..3]);
        for mut row in rel.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - model.norm_rel_out.mean[j]) / model.norm_rel_out.std[j];
            }
        }
        let mut dl = human_set.ts[t].slice_mut(ndarray::s![.., 3..]);
        for mut row in dl.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = *v / model.norm_resp_delta.std[j];
            }
        }
    }

    let robot_loss = train_part(
        &mut model.robot,
        &robot_set,
        cfg.robot_epochs,
        cfg.learning_rate,
        cfg.batch_size,
        cfg.seed,
        "robot-part",
    )?;
    let human_loss = train_part(
        &mut model.human,
        &human_set,
        cfg.human_epochs,
        cfg.learning_rate,
        cfg.batch_size,
        cfg.seed,
        "human-part",
    )?;

    let holdout = holdout_one_step(&model, &dataset.episodes, &holdout_idx, cfg.window);
    Ok((model, HppnTrainReport { robot_loss, human_loss, holdout, holdout_idx }))
}

/// Teacher-forced one-step errors on held-out episodes, in raw units,
/// against the persistence predictor.
///
/// Evaluation matches the training regime: the model is scored over
/// `window`-step spans started from a fresh recurrent state, exactly how it
/// is trained and how the simulator drives it.
pub fn holdout_one_step<T: Scalar>(
    model: &HppnModel<T>,
    episodes: &[Episode<T>],
    idx: &[usize],
    window: usize,
) -> HoldoutReport {
    let mut rel_model = 0.0f64;
    let mut rel_persist = 0.0f64;
    let mut resp_model = 0.0f64;
    let mut resp_persist = 0.0f64;
    let mut steps = 0usize;

    for &e in idx {
        let ep = &episodes[e];
        if ep.len() < 2 {
            continue;
        }
        let mut start = 0usize;
        while start + 1 < ep.len() {
            let first = &ep.rows[start];
            let rel0 = relative_pose(first.robot, first.human);
            let mut state = model.init_state_from(
                first.robot,
                Pose2::new(rel0[0], rel0[1], rel0[2]),
                first.response.clone(),
                1,
            );
            let end = (start + window).min(ep.len() - 1);
            for t in start..end {
                let row = &ep.rows[t];
                let next = &ep.rows[t + 1];
                model
                    .predict_step_batch(
                        &mut state,
                        &[[row.action.left, row.action.right]],
                        Some(std::slice::from_ref(&row.response)),
                    )
                    .expect("holdout step");
                let rel_true = relative_pose(next.robot, next.human);
                let rel_prev = relative_pose(row.robot, row.human);
                let pred = state.rel_pose[0];
                let pred_arr = [pred.x, pred.y, pred.theta];
                for k in 0..3 {
                    rel_model += (pred_arr[k] - rel_true[k]).f64().powi(2);
                    rel_persist += (rel_prev[k] - rel_true[k]).f64().powi(2);
                }
                let resp_true = next.response.to_vec();
                let resp_prev = row.response.to_vec();
                let resp_pred = state.response[0].to_vec();
                for k in 0..RESPONSE_DIM {
                    resp_model += (resp_pred[k] - resp_true[k]).f64().powi(2);
                    resp_persist += (resp_prev[k] - resp_true[k]).f64().powi(2);
                }
                steps += 1;
            }
            start = end;
        }
    }
    let denom_rel = (steps * 3).max(1) as f64;
    let denom_resp = (steps * RESPONSE_DIM).max(1) as f64;
    HoldoutReport {
        rel_mse_model: rel_model / denom_rel,
        rel_mse_persistence: rel_persist / denom_rel,
        resp_mse_model: resp_model / denom_resp,
        resp_mse_persistence: resp_persist / denom_resp,
        episodes: idx.len(),
    }
}

/// Closed-loop human-position error when replaying an episode's logged
/// actions with the model feeding back its own responses. Returns the
/// position error at each requested horizon (skipping horizons beyond the
/// episode).
pub fn closed_loop_errors<T: Scalar>(
    model: &HppnModel<T>,
    episode: &Episode<T>,
    horizons: &[usize],
) -> Vec<(usize, f64)> {
    if episode.len() < 2 {
        return Vec::new();
    }
    let first = &episode.rows[0];
    let rel0 = relative_pose(first.robot, first.human);
    let mut state = model.init_state_from(
        first.robot,
        Pose2::new(rel0[0], rel0[1], rel0[2]),
        first.response.clone(),
        1,
    );
    let mut out = Vec::new();
    let max_h = *horizons.iter().max().unwrap_or(&0);
    for t in 0..episode.len() - 1 {
        let row = &episode.rows[t];
        // First step uses the logged initial response; afterwards the model
        // feeds back its own predictions.
        let resp_override = if t == 0 { Some(std::slice::from_ref(&row.response)) } else { None };
        model
            .predict_step_batch(&mut state, &[[row.action.left, row.action.right]], resp_override)
            .expect("closed-loop step");
        let h = t + 1;
        if horizons.contains(&h) {
            let pred = state.predicted_human(0).position();
            let actual = episode.rows[h].human.position();
            out.push((h, pred.dist(actual).f64()));
        }
        if h >= max_h {
            break;
        }
    }
    out
}

/// Checkpoint (de)serialization.
impl<T: Scalar> HppnModel<T> {
    pub fn to_checkpoint(&self) -> crate::checkpoint::Checkpoint {
        use crate::checkpoint::Checkpoint;
        let mut c = Checkpoint::new("hppn");
        c.set_meta("hidden_dim", HIDDEN_DIM);
        let f = |v: &[T]| v.iter().map(|x| x.f64()).collect::<Vec<f64>>();
        c.push_array("robot.params", f(&self.robot.params_flat()));
        c.push_array("human.params", f(&self.human.params_flat()));
        for (name, norm) in [
            ("robot_in", &self.norm_robot_in),
            ("robot_out", &self.norm_robot_out),
            ("human_in", &self.norm_human_in),
            ("rel_out", &self.norm_rel_out),
            ("resp_delta", &self.norm_resp_delta),
        ] {
            c.push_array(&format!("norm.{name}.mean"), f(norm.mean.as_slice().unwrap()));
            c.push_array(&format!("norm.{name}.std"), f(norm.std.as_slice().unwrap()));
        }
        c.push_array("init.rel", f(&self.init_rel));
        c.push_array("init.response", f(&self.init_response));
        c.push_array("init.mean_action", f(&self.mean_action));
        c
    }

    pub fn from_checkpoint(
        c: &crate::checkpoint::Checkpoint,
    ) -> Result<Self, crate::checkpoint::CheckpointError> {
        c.expect_kind("hppn")?;
        let mut model = HppnModel::new(0);
        let to_t = |v: &[f64]| v.iter().map(|&x| T::c(x)).collect::<Vec<T>>();
        model
            .robot
            .set_params_flat(&to_t(c.array_exact("robot.params", model.robot.num_params())?));
        model
            .human
            .set_params_flat(&to_t(c.array_exact("human.params", model.human.num_params())?));
        let norm = |mean: &[f64], std: &[f64]| Normalizer {
            mean: ndarray::Array1::from_vec(to_t(mean)),
            std: ndarray::Array1::from_vec(to_t(std)),
        };
        model.norm_robot_in = norm(c.array("norm.robot_in.mean")?, c.array("norm.robot_in.std")?);
        model.norm_robot_out = norm(c.array("norm.robot_out.mean")?, c.array("norm.robot_out.std")?);
        model.norm_human_in = norm(c.array("norm.human_in.mean")?, c.array("norm.human_in.std")?);
        model.norm_rel_out = norm(c.array("norm.rel_out.mean")?, c.array("norm.rel_out.std")?);
        model.norm_resp_delta =
            norm(c.array("norm.resp_delta.mean")?, c.array("norm.resp_delta.std")?);
        let rel = c.array_exact("init.rel", 3)?;
        model.init_rel = [T::c(rel[0]), T::c(rel[1]), T::c(rel[2])];
        model.init_response = to_t(c.array_exact("init.response", RESPONSE_DIM)?);
        let ma = c.array_exact("init.mean_action", 2)?;
        model.mean_action = [T::c(ma[0]), T::c(ma[1])];
        Ok(model)
    }
}
