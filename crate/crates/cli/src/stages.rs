//! Pipeline stages: data generation, model training, evaluation, reporting.
//!
//! Every stage is a pure function of (artifacts on disk, config, seed):
//! re-running one reproduces its outputs byte-identically. Stage inputs are
//! checked up front so a missing upstream artifact fails fast with its path.

use std::io::Write;
use std::path::{Path as FsPath, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;

use guidetrain_core::baseline::{train_baseline, BaselineConfig, BaselineController, BaselineModel};
use guidetrain_core::checkpoint::Checkpoint;
use guidetrain_core::cmaes::{optimize_with_callback, EsConfig, PlateauConfig};
use guidetrain_core::env::depth::render_depth;
use guidetrain_core::env::episode::Dataset;
use guidetrain_core::env::script::random_action_script_with;
use guidetrain_core::env::sim::{depth_noise_rng, rollout, Controller, ScriptController};
use guidetrain_core::env::UserProfile;
use guidetrain_core::geometry::{eval_path_family, Path, PATH_RESOLUTION};
use guidetrain_core::hppn::{closed_loop_errors, train_hppn, HppnModel};
use guidetrain_core::metrics::{
    discrete_frechet, spectral_arc_length, speed_profile, RewardKind,
};
use guidetrain_core::nn::vae::{train_vae, Vae, VaeTrainConfig};
use guidetrain_core::policy::{PolicyController, PolicyObjective, PolicyParams, PARAM_DIM};
use guidetrain_core::text::sig9;
use guidetrain_core::{Episode, Real, SeedStream};

use crate::config::Config;
use crate::report;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("stage {stage}: missing artifact {path}")]
    MissingArtifact { stage: &'static str, path: PathBuf },
    #[error("stage {stage}: {message}")]
    Failed { stage: &'static str, message: String },
    #[error("stage {stage}: held-out model quality gate failed: {message}")]
    QualityGate { stage: &'static str, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn stage_err(stage: &'static str, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Failed { stage, message: e.to_string() }
}

/// Canonical artifact locations under the output directory.
pub struct Artifacts {
    pub out: PathBuf,
}

impl Artifacts {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        Artifacts { out: out.into() }
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.out.join("dataset")
    }

    pub fn vae_ckpt(&self) -> PathBuf {
        self.out.join("vae.ckpt")
    }

    pub fn vae_loss(&self) -> PathBuf {
        self.out.join("vae_loss.csv")
    }

    pub fn hppn_ckpt(&self) -> PathBuf {
        self.out.join("hppn.ckpt")
    }

    pub fn baseline_ckpt(&self) -> PathBuf {
        self.out.join("baseline.ckpt")
    }

    pub fn policy_ckpt(&self, kind: RewardKind) -> PathBuf {
        self.out.join(format!("policy_{}.ckpt", kind.label().replace('-', "_")))
    }

    pub fn policy_history(&self, kind: RewardKind) -> PathBuf {
        self.out.join(format!("policy_{}_history.csv", kind.label().replace('-', "_")))
    }

    pub fn policy_stats(&self, kind: RewardKind) -> PathBuf {
        self.out.join(format!("policy_{}_training.txt", kind.label().replace('-', "_")))
    }

    pub fn evaluation_dir(&self) -> PathBuf {
        self.out.join("evaluation")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.out.join("report")
    }

    fn require(&self, stage: &'static str, path: PathBuf) -> Result<PathBuf, PipelineError> {
        if path.exists() {
            Ok(path)
        } else {
            Err(PipelineError::MissingArtifact { stage, path })
        }
    }
}

/// Generates the scripted-robot training dataset.
pub fn cmd_datagen(cfg: &Config, art: &Artifacts) -> Result<(), PipelineError> {
    const STAGE: &str = "datagen";
    let env_cfg = cfg.env_config();
    let ranges = cfg.profile_ranges();
    let users_stream = SeedStream::root(cfg.seed).tag("users").tag("train");
    let profiles: Vec<UserProfile<Real>> = (0..cfg.dataset.train_users)
        .map(|i| {
            let s = users_stream.index(i as u64);
            ranges.sample(&mut s.rng(), &format!("train-{i:03}"), s.seed())
        })
        .collect();

    let episodes: Vec<Episode> = (0..cfg.dataset.episodes)
        .into_par_iter()
        .map(|i| {
            let stream = SeedStream::root(cfg.seed).tag("datagen").index(i as u64);
            let mut script_rng = stream.tag("script").rng();
            let script = random_action_script_with(
                &mut script_rng,
                cfg.dataset.episode_steps_min,
                cfg.dataset.episode_steps_max,
            );
            let mut ctrl = ScriptController { actions: script };
            rollout(
                &mut ctrl,
                &profiles[i % profiles.len()],
                &env_cfg,
                None,
                cfg.dataset.episode_steps_max,
                stream,
                None,
            )
        })
        .collect::<Result<_, _>>()
        .map_err(|e| stage_err(STAGE, e))?;

    let ds = Dataset { episodes, profiles };
    ds.save(&art.dataset_dir()).map_err(|e| stage_err(STAGE, e))?;
    Ok(())
}

/// Re-renders the depth frames of an episode from its recorded poses and its
/// per-step noise streams. Identical to what a live rollout would sense.
fn rendered_frames(ep: &Episode, cfg: &Config) -> Array2<Real> {
    let env_cfg = cfg.env_config();
    let pixels = env_cfg.depth.pixels();
    let mut frames = Array2::zeros((ep.len(), pixels));
    let stream = SeedStream::from_raw(ep.meta.seed);
    for (t, row) in ep.rows.iter().enumerate() {
        let mut rng = depth_noise_rng(stream, t);
        let frame = render_depth(&row.robot, row.human.position(), &env_cfg.depth, &mut rng);
        for (k, v) in frame.into_iter().enumerate() {
            frames[[t, k]] = v;
        }
    }
    frames
}

/// Trains the depth-frame autoencoder.
pub fn cmd_train_vae(cfg: &Config, art: &Artifacts) -> Result<(), PipelineError> {
    const STAGE: &str = "train-vae";
    let dir = art.require(STAGE, art.dataset_dir())?;
    let ds = Dataset::<Real>::load(&dir).map_err(|e| stage_err(STAGE, e))?;

    // Collect (episode, step) pairs, optionally subsampled with an even
    // stride for determinism.
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (e, ep) in ds.episodes.iter().enumerate() {
        for t in 0..ep.len() {
            pairs.push((e, t));
        }
    }
    if cfg.vae.frame_subsample > 0 && pairs.len() > cfg.vae.frame_subsample {
        let stride = pairs.len().div_ceil(cfg.vae.frame_subsample);
        pairs = pairs.into_iter().step_by(stride).collect();
    }

    let env_cfg = cfg.env_config();
    let pixels = env_cfg.depth.pixels();
    let rendered: Vec<Vec<Real>> = pairs
        .par_iter()
        .map(|&(e, t)| {
            let ep = &ds.episodes[e];
            let mut rng = depth_noise_rng(SeedStream::from_raw(ep.meta.seed), t);
            render_depth(&ep.rows[t].robot, ep.rows[t].human.position(), &env_cfg.depth, &mut rng)
        })
        .collect();
    let mut frames = Array2::zeros((pairs.len(), pixels));
    for (row, frame) in rendered.into_iter().enumerate() {
        for (k, v) in frame.into_iter().enumerate() {
            frames[[row, k]] = v;
        }
    }

    let mut init_rng = SeedStream::root(cfg.seed).tag("vae-init").rng();
    let vae0 = Vae::new(&mut init_rng, pixels, cfg.vae.hidden, cfg.vae.latent);
    let train_cfg = VaeTrainConfig {
        epochs: cfg.vae.epochs,
        learning_rate: cfg.vae.learning_rate,
        batch_size: cfg.vae.batch_size,
        kl_weight: cfg.vae.kl_weight,
        seed: SeedStream::root(cfg.seed).tag("vae").seed(),
    };
    let (vae, curve) = train_vae(vae0, &frames, &train_cfg).map_err(|e| stage_err(STAGE, e))?;

    vae.to_checkpoint().save(&art.vae_ckpt()).map_err(|e| stage_err(STAGE, e))?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(art.vae_loss())?);
    writeln!(f, "epoch,reconstruction,kl,total")?;
    for (e, row) in curve.iter().enumerate() {
        writeln!(f, "{},{},{},{}", e, sig9(row.reconstruction), sig9(row.kl), sig9(row.total))?;
    }
    Ok(())
}

/// Loads the dataset with depth latents restored through the trained encoder.
fn latent_dataset(cfg: &Config, art: &Artifacts, stage: &'static str) -> Result<(Dataset<Real>, Vae<Real>), PipelineError> {
    let dir = art.require(stage, art.dataset_dir())?;
    let vae_path = art.require(stage, art.vae_ckpt())?;
    let mut ds = Dataset::<Real>::load(&dir).map_err(|e| stage_err(stage, e))?;
    let vae = Vae::<Real>::from_checkpoint(&Checkpoint::load(&vae_path).map_err(|e| stage_err(stage, e))?)
        .map_err(|e| stage_err(stage, e))?;

    let latents: Vec<Array2<Real>> = ds
        .episodes
        .par_iter()
        .map(|ep| vae.encode_mean_batch(&rendered_frames(ep, cfg)))
        .collect();
    for (ep, z) in ds.episodes.iter_mut().zip(latents) {
        for (t, row) in ep.rows.iter_mut().enumerate() {
            row.response.depth_latent = z.row(t).to_vec();
        }
    }
    Ok((ds, vae))
}

/// Trains the world model, writing loss curves, the held-out skill report,
/// and per-horizon closed-loop errors.
pub fn cmd_train_hppn(cfg: &Config, art: &Artifacts) -> Result<(), PipelineError> {
    const STAGE: &str = "train-hppn";
    let (ds, _) = latent_dataset(cfg, art, STAGE)?;
    let (model, rep) = train_hppn(&ds, &cfg.hppn_config()).map_err(|e| stage_err(STAGE, e))?;

    for (name, curve) in
        [("hppn_loss_robot.csv", &rep.robot_loss), ("hppn_loss_human.csv", &rep.human_loss)]
    {
        let mut f = std::io::BufWriter::new(std::fs::File::create(art.out.join(name))?);
        writeln!(f, "epoch,loss")?;
        for (e, l) in curve.iter().enumerate() {
            writeln!(f, "{},{}", e, sig9(*l))?;
        }
    }

    let mut f = std::io::BufWriter::new(std::fs::File::create(art.out.join("hppn_holdout.csv"))?);
    writeln!(f, "rel_mse_model,rel_mse_persistence,resp_mse_model,resp_mse_persistence,episodes")?;
    writeln!(
        f,
        "{},{},{},{},{}",
        sig9(rep.holdout.rel_mse_model),
        sig9(rep.holdout.rel_mse_persistence),
        sig9(rep.holdout.resp_mse_model),
        sig9(rep.holdout.resp_mse_persistence),
        rep.holdout.episodes
    )?;
    drop(f);

    // Held-out one-step skill must beat the persistence predictor before the
    // checkpoint is worth keeping. The curves above stay on disk either way
    // for diagnosis.
    let gate = cfg.hppn.persistence_gate;
    if rep.holdout.rel_mse_model > gate * rep.holdout.rel_mse_persistence {
        return Err(PipelineError::QualityGate {
            stage: STAGE,
            message: format!(
                "relative-pose mse {:.6e} exceeds {gate} x persistence {:.6e}",
                rep.holdout.rel_mse_model, rep.holdout.rel_mse_persistence
            ),
        });
    }
    model.to_checkpoint().save(&art.hppn_ckpt()).map_err(|e| stage_err(STAGE, e))?;

    // Closed-loop human-position error at standard horizons on the holdout.
    let horizons = [1usize, 5, 10, 20];
    let mut f = std::io::BufWriter::new(std::fs::File::create(art.out.join("hppn_eval.csv"))?);
    writeln!(f, "episode,horizon,error_m")?;
    let mut per_h: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    for &e in &rep.holdout_idx {
        for (h, err) in closed_loop_errors(&model, &ds.episodes[e], &horizons) {
            writeln!(f, "{},{},{}", e, h, sig9(err))?;
            per_h.entry(h).or_default().push(err);
        }
    }
    drop(f);
    let mut f =
        std::io::BufWriter::new(std::fs::File::create(art.out.join("hppn_eval_summary.csv"))?);
    writeln!(f, "horizon,median_m,mean_m,count")?;
    for (h, mut errs) in per_h {
        errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = report::quantile(&errs, 0.5);
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        writeln!(f, "{},{},{},{}", h, sig9(median), sig9(mean), errs.len())?;
    }
    Ok(())
}

/// Trains the supervised baseline policy.
pub fn cmd_train_baseline(cfg: &Config, art: &Artifacts) -> Result<(), PipelineError> {
    const STAGE: &str = "train-baseline";
    let (ds, _) = latent_dataset(cfg, art, STAGE)?;
    let bl_cfg = BaselineConfig {
        epochs: cfg.baseline.epochs,
        learning_rate: cfg.baseline.learning_rate,
        window: cfg.baseline.window,
        stride: cfg.baseline.stride,
        batch_size: cfg.baseline.batch_size,
        holdout_fraction: 0.2,
        target_speed: cfg.baseline.target_speed,
        seed: SeedStream::root(cfg.seed).tag("baseline").seed(),
    };
    let (model, curve, holdout) = train_baseline(&ds, &bl_cfg).map_err(|e| stage_err(STAGE, e))?;
    model.to_checkpoint().save(&art.baseline_ckpt()).map_err(|e| stage_err(STAGE, e))?;

    let mut f = std::io::BufWriter::new(std::fs::File::create(art.out.join("baseline_loss.csv"))?);
    writeln!(f, "epoch,loss")?;
    for (e, l) in curve.iter().enumerate() {
        writeln!(f, "{},{}", e, sig9(*l))?;
    }
    let mut f =
        std::io::BufWriter::new(std::fs::File::create(art.out.join("baseline_holdout.csv"))?);
    writeln!(f, "action_mse_model,action_variance")?;
    writeln!(f, "{},{}", sig9(holdout.action_mse_model), sig9(holdout.action_variance))?;
    Ok(())
}

/// Optimizes policy parameters on the world-model simulator.
pub fn cmd_train_policy(cfg: &Config, art: &Artifacts, kind: RewardKind) -> Result<(), PipelineError> {
    const STAGE: &str = "train-policy";
    let hppn_path = art.require(STAGE, art.hppn_ckpt())?;
    let model = HppnModel::<Real>::from_checkpoint(
        &Checkpoint::load(&hppn_path).map_err(|e| stage_err(STAGE, e))?,
    )
    .map_err(|e| stage_err(STAGE, e))?;

    let reward = cfg.reward_config(kind);
    let policy_stream = SeedStream::root(cfg.seed).tag("policy").tag(kind.label());
    let mut objective = PolicyObjective::new(
        &model,
        reward,
        cfg.es.episodes_per_candidate,
        policy_stream,
    );
    let es_cfg = EsConfig {
        population: cfg.es.population,
        episodes_per_candidate: cfg.es.episodes_per_candidate,
        max_generations: cfg.es.max_generations,
        sigma0: cfg.es.sigma0,
        seed: policy_stream.tag("es").seed(),
        plateau: (cfg.es.plateau_window > 0).then_some(PlateauConfig {
            window: cfg.es.plateau_window,
            tol: cfg.es.plateau_tol,
        }),
    };

    let x0 = vec![0.0 as Real; PARAM_DIM];
    let mut history_rows: Vec<String> = Vec::with_capacity(cfg.es.max_generations);
    let checkpoint_every = cfg.es.checkpoint_every;
    let art_out = art.out.clone();
    let result = {
        let mut on_gen = |row: &guidetrain_core::cmaes::EsHistoryRow, best: &[Real]| {
            history_rows.push(format!(
                "{},{},{},{},{}",
                row.generation,
                sig9(row.best),
                sig9(row.mean),
                sig9(row.worst),
                sig9(row.sigma)
            ));
            if checkpoint_every > 0 && (row.generation + 1) % checkpoint_every == 0 {
                let mut p = PolicyParams::from_flat(best.to_vec()).expect("candidate length");
                p.reward_kind = Some(kind);
                p.training_seed = es_cfg.seed;
                let path = art_out.join(format!(
                    "policy_{}_gen{:04}.ckpt",
                    kind.label().replace('-', "_"),
                    row.generation + 1
                ));
                p.save(&path).expect("periodic checkpoint");
            }
        };
        optimize_with_callback(&mut objective, &x0, &es_cfg, &mut on_gen)
            .map_err(|e| stage_err(STAGE, e))?
    };

    let mut best = PolicyParams::from_flat(result.best.clone()).map_err(|e| stage_err(STAGE, e))?;
    best.reward_kind = Some(kind);
    best.training_seed = es_cfg.seed;
    best.save(&art.policy_ckpt(kind)).map_err(|e| stage_err(STAGE, e))?;

    let mut f = std::io::BufWriter::new(std::fs::File::create(art.policy_history(kind))?);
    writeln!(f, "generation,best,mean,worst,sigma")?;
    for row in &history_rows {
        writeln!(f, "{row}")?;
    }
    drop(f);

    let mut f = std::io::BufWriter::new(std::fs::File::create(art.policy_stats(kind))?);
    writeln!(f, "reward={}", kind.label())?;
    writeln!(f, "generations={}", result.generations)?;
    writeln!(f, "candidate_evaluations={}", result.evaluations)?;
    writeln!(f, "virtual_episodes={}", objective.virtual_episodes)?;
    writeln!(f, "best_fitness={}", sig9(result.best_fitness))?;
    Ok(())
}

/// One evaluation rollout's summary row.
#[derive(Clone, Debug)]
pub struct EvalRow {
    pub policy: String,
    pub path: String,
    pub user: usize,
    pub trial: usize,
    pub steps: usize,
    pub time_s: f64,
    pub frechet: f64,
    pub sal: Option<f64>,
    pub timed_out: bool,
}

enum PolicyUnderTest<'a> {
    Baseline(&'a BaselineModel<Real>),
    Linear(&'a PolicyParams<Real>, &'a HppnModel<Real>),
}

/// Runs the virtual user test: every policy against held-out synthetic users
/// on the fixed goal-path family, in the oracle world, with policy features
/// coming only from live world-model stepping.
pub fn cmd_evaluate(cfg: &Config, art: &Artifacts) -> Result<(), PipelineError> {
    const STAGE: &str = "evaluate";
    let vae = Vae::<Real>::from_checkpoint(
        &Checkpoint::load(&art.require(STAGE, art.vae_ckpt())?).map_err(|e| stage_err(STAGE, e))?,
    )
    .map_err(|e| stage_err(STAGE, e))?;
    let hppn = HppnModel::<Real>::from_checkpoint(
        &Checkpoint::load(&art.require(STAGE, art.hppn_ckpt())?).map_err(|e| stage_err(STAGE, e))?,
    )
    .map_err(|e| stage_err(STAGE, e))?;
    let baseline = BaselineModel::<Real>::from_checkpoint(
        &Checkpoint::load(&art.require(STAGE, art.baseline_ckpt())?)
            .map_err(|e| stage_err(STAGE, e))?,
    )
    .map_err(|e| stage_err(STAGE, e))?;
    let g_only = PolicyParams::<Real>::load(&art.require(STAGE, art.policy_ckpt(RewardKind::GOnly))?)
        .map_err(|e| stage_err(STAGE, e))?;
    let g_plus_h =
        PolicyParams::<Real>::load(&art.require(STAGE, art.policy_ckpt(RewardKind::GPlusH))?)
            .map_err(|e| stage_err(STAGE, e))?;

    let env_cfg = cfg.env_config();
    let ranges = cfg.profile_ranges();
    let eval_stream = SeedStream::root(cfg.seed).tag("users").tag("eval");
    let users: Vec<UserProfile<Real>> = (0..cfg.evaluation.users)
        .map(|i| {
            let s = eval_stream.index(i as u64);
            ranges.sample(&mut s.rng(), &format!("eval-{i:03}"), s.seed())
        })
        .collect();

    let family = eval_path_family::<Real>();
    let goals: Vec<(String, Path<Real>)> = family
        .into_iter()
        .map(|(name, p)| {
            let resampled = p.resample(PATH_RESOLUTION).expect("goal paths resample");
            (name, resampled)
        })
        .collect();

    let policies: Vec<(&str, PolicyUnderTest)> = vec![
        ("baseline", PolicyUnderTest::Baseline(&baseline)),
        ("g-only", PolicyUnderTest::Linear(&g_only, &hppn)),
        ("g-plus-h", PolicyUnderTest::Linear(&g_plus_h, &hppn)),
    ];

    // Build the full combination list, then roll out in parallel with
    // deterministic per-episode streams shared across policies.
    struct Task<'a> {
        policy_idx: usize,
        policy_name: &'a str,
        goal_name: &'a str,
        goal: &'a Path<Real>,
        user_idx: usize,
        trial: usize,
    }
    let mut tasks = Vec::new();
    for (pi, (pname, _)) in policies.iter().enumerate() {
        for (gname, goal) in &goals {
            for ui in 0..users.len() {
                for trial in 0..cfg.evaluation.trials {
                    tasks.push(Task {
                        policy_idx: pi,
                        policy_name: pname,
                        goal_name: gname,
                        goal,
                        user_idx: ui,
                        trial,
                    });
                }
            }
        }
    }

    let reward_cfg = cfg.reward_config(RewardKind::GPlusH);
    let results: Vec<(EvalRow, Episode)> = tasks
        .par_iter()
        .map(|task| {
            let stream = SeedStream::root(cfg.seed)
                .tag("evaluate")
                .tag(task.goal_name)
                .index(task.user_idx as u64)
                .index(task.trial as u64);
            let mut controller: Box<dyn Controller<Real>> = match &policies[task.policy_idx].1 {
                PolicyUnderTest::Baseline(m) => {
                    Box::new(BaselineController::new(m, task.goal, env_cfg.robot.dt))
                }
                PolicyUnderTest::Linear(p, h) => {
                    Box::new(PolicyController::new(p, h, task.goal).expect("valid goal"))
                }
            };
            let mut episode = rollout(
                controller.as_mut(),
                &users[task.user_idx],
                &env_cfg,
                Some(&vae),
                cfg.evaluation.max_steps,
                stream,
                Some(task.goal_name.to_string()),
            )
            .expect("finite rollout");
            episode.meta.profile_id = users[task.user_idx].id.clone();

            let human = episode.human_positions();
            let frechet = {
                let walked: Vec<_> = match guidetrain_core::geometry::Path::new(human.clone()) {
                    Ok(p) if p.arc_length() > PATH_RESOLUTION => p
                        .resample(PATH_RESOLUTION)
                        .map(|r| r.points().to_vec())
                        .unwrap_or_else(|_| human.clone()),
                    _ => human.clone(),
                };
                discrete_frechet(&walked, task.goal.points()).expect("non-empty paths")
            };
            let sal = speed_profile(&human, env_cfg.robot.dt)
                .ok()
                .and_then(|v| spectral_arc_length(&v, &reward_cfg.sal).ok());

            let row = EvalRow {
                policy: task.policy_name.to_string(),
                path: task.goal_name.to_string(),
                user: task.user_idx,
                trial: task.trial,
                steps: episode.len(),
                time_s: episode.len() as f64 * env_cfg.robot.dt,
                frechet,
                sal,
                timed_out: episode.meta.timed_out,
            };
            (row, episode)
        })
        .collect();

    let eval_dir = art.evaluation_dir();
    std::fs::create_dir_all(eval_dir.join("trajectories"))?;

    let mut f = std::io::BufWriter::new(std::fs::File::create(eval_dir.join("episodes.csv"))?);
    writeln!(f, "policy,path,user,trial,steps,time_s,frechet_m,sal,timed_out")?;
    for (row, episode) in &results {
        writeln!(
            f,
            "{},{},{},{},{},{},{},{},{}",
            row.policy,
            row.path,
            row.user,
            row.trial,
            row.steps,
            sig9(row.time_s),
            sig9(row.frechet),
            row.sal.map(sig9).unwrap_or_default(),
            u8::from(row.timed_out)
        )?;
        let name = format!(
            "traj_{}_{}_u{}_t{}.csv",
            row.policy, row.path, row.user, row.trial
        );
        let tf = std::io::BufWriter::new(std::fs::File::create(
            eval_dir.join("trajectories").join(name),
        )?);
        episode.write_csv(tf).map_err(|e| stage_err(STAGE, e))?;
    }
    drop(f);

    // Aggregate summary per policy and metric.
    let mut f = std::io::BufWriter::new(std::fs::File::create(eval_dir.join("summary.csv"))?);
    writeln!(f, "policy,metric,count,min,q1,median,q3,max,mean")?;
    for (pname, _) in &policies {
        for metric in ["time_s", "frechet_m", "sal"] {
            let mut values: Vec<f64> = results
                .iter()
                .filter(|(r, _)| r.policy == *pname)
                .filter_map(|(r, _)| match metric {
                    "time_s" => Some(r.time_s),
                    "frechet_m" => Some(r.frechet),
                    _ => r.sal,
                })
                .collect();
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            if values.is_empty() {
                continue;
            }
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            writeln!(
                f,
                "{},{},{},{},{},{},{},{},{}",
                pname,
                metric,
                values.len(),
                sig9(values[0]),
                sig9(report::quantile(&values, 0.25)),
                sig9(report::quantile(&values, 0.5)),
                sig9(report::quantile(&values, 0.75)),
                sig9(values[values.len() - 1]),
                sig9(mean)
            )?;
        }
    }
    drop(f);

    // Deceleration profiles: mean robot and human speeds over the final 20
    // steps before the stop, per policy.
    const DECEL_WINDOW: usize = 20;
    let mut f = std::io::BufWriter::new(std::fs::File::create(eval_dir.join("deceleration.csv"))?);
    writeln!(f, "policy,offset,robot_speed,human_speed,episodes")?;
    for (pname, _) in &policies {
        let mut robot_sum = [0.0f64; DECEL_WINDOW];
        let mut human_sum = [0.0f64; DECEL_WINDOW];
        let mut count = 0usize;
        for (row, episode) in &results {
            if row.policy != *pname || episode.len() < DECEL_WINDOW + 1 {
                continue;
            }
            let robot = episode.robot_positions();
            let human = episode.human_positions();
            let n = episode.len();
            for k in 0..DECEL_WINDOW {
                let t = n - 1 - DECEL_WINDOW + k;
                robot_sum[k] += robot[t].dist(robot[t + 1]) / env_cfg.robot.dt;
                human_sum[k] += human[t].dist(human[t + 1]) / env_cfg.robot.dt;
            }
            count += 1;
        }
        for k in 0..DECEL_WINDOW {
            let offset = -(DECEL_WINDOW as i64) + k as i64;
            let denom = count.max(1) as f64;
            writeln!(
                f,
                "{},{},{},{},{}",
                pname,
                offset,
                sig9(robot_sum[k] / denom),
                sig9(human_sum[k] / denom),
                count
            )?;
        }
    }
    drop(f);

    let mut f = std::io::BufWriter::new(std::fs::File::create(eval_dir.join("eval_users.csv"))?);
    writeln!(
        f,
        "id,lateral_offset,follow_distance,response_lag,max_speed,gait_amplitude,gait_freq,noise_sigma"
    )?;
    for u in &users {
        writeln!(
            f,
            "{},{},{},{},{},{},{},{}",
            u.id,
            sig9(u.lateral_offset),
            sig9(u.follow_distance),
            sig9(u.response_lag),
            sig9(u.max_speed),
            sig9(u.gait_amplitude),
            sig9(u.gait_freq),
            sig9(u.noise_sigma)
        )?;
    }
    Ok(())
}

/// Renders the SVG/CSV report bundle from the evaluation CSVs.
pub fn cmd_report(cfg: &Config, art: &Artifacts) -> Result<(), PipelineError> {
    const STAGE: &str = "report";
    let eval_dir = art.require(STAGE, art.evaluation_dir())?;
    art.require(STAGE, eval_dir.join("episodes.csv"))?;
    art.require(STAGE, eval_dir.join("deceleration.csv"))?;
    report::write_report(cfg, &eval_dir, &art.report_dir()).map_err(|e| stage_err(STAGE, e))
}

/// The whole training and evaluation pipeline in order.
pub fn cmd_run_all(cfg: &Config, art: &Artifacts) -> Result<(), PipelineError> {
    cmd_datagen(cfg, art)?;
    cmd_train_vae(cfg, art)?;
    cmd_train_hppn(cfg, art)?;
    cmd_train_baseline(cfg, art)?;
    cmd_train_policy(cfg, art, RewardKind::GOnly)?;
    cmd_train_policy(cfg, art, RewardKind::GPlusH)?;
    cmd_evaluate(cfg, art)?;
    cmd_report(cfg, art)?;
    Ok(())
}

/// Reads the evaluation episode rows back (used by the report and tests).
pub fn read_eval_rows(path: &FsPath) -> Result<Vec<EvalRow>, PipelineError> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(PipelineError::Failed {
                stage: "read-eval",
                message: format!("episodes.csv line {} has {} fields", i + 1, fields.len()),
            });
        }
        rows.push(EvalRow {
            policy: fields[0].to_string(),
            path: fields[1].to_string(),
            user: fields[2].parse().unwrap_or(0),
            trial: fields[3].parse().unwrap_or(0),
            steps: fields[4].parse().unwrap_or(0),
            time_s: fields[5].parse().unwrap_or(f64::NAN),
            frechet: fields[6].parse().unwrap_or(f64::NAN),
            sal: fields[7].parse().ok(),
            timed_out: fields[8].trim() == "1",
        });
    }
    Ok(rows)
}
