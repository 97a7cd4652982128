//! Episode records and their on-disk form.
//!
//! An episode file is one metadata line of `key=value` pairs followed by one
//! CSV row per timestep:
//!
//! ```text
//! seed=123 profile=train-000 steps=87 timed_out=0 goal=none
//! t,rx,ry,rth,hx,hy,hth,wl,wr,stop,fx,fy,z1..z16
//! ```
//!
//! A dataset directory holds episode files plus `manifest.csv` (file,
//! profile, seed, steps) and `profiles.csv` with the sampled user
//! parameters.

use std::collections::BTreeMap;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path as FsPath;

use super::{EnvError, HumanResponse, RobotAction, UserProfile, LATENT_DIM};
use crate::geometry::{Pose2, Vec2};
use crate::metrics::{cumulative_reward, EpisodeMetrics, MetricError, RewardConfig};
use crate::scalar::Scalar;
use crate::text::{parse_f64, sig9};

/// One recorded timestep: the world state before the action, the action
/// chosen, and the response sensed at that state.
#[derive(Clone, Debug)]
pub struct EpisodeRow<T> {
    pub robot: Pose2<T>,
    pub human: Pose2<T>,
    pub action: RobotAction<T>,
    pub response: HumanResponse<T>,
}

#[derive(Clone, Debug)]
pub struct EpisodeMeta {
    pub seed: u64,
    pub profile_id: String,
    pub timed_out: bool,
    pub goal_id: Option<String>,
}

/// A complete guidance episode at 4 Hz.
#[derive(Clone, Debug)]
pub struct Episode<T> {
    pub rows: Vec<EpisodeRow<T>>,
    pub meta: EpisodeMeta,
}

impl<T: Scalar> Episode<T> {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Completion time in seconds.
    pub fn duration(&self, dt: T) -> T {
        T::c(self.rows.len() as f64) * dt
    }

    pub fn human_positions(&self) -> Vec<Vec2<T>> {
        self.rows.iter().map(|r| r.human.position()).collect()
    }

    pub fn robot_positions(&self) -> Vec<Vec2<T>> {
        self.rows.iter().map(|r| r.robot.position()).collect()
    }

    /// Cumulative reward of this episode against a goal path.
    pub fn reward(
        &self,
        goal: &crate::geometry::Path<T>,
        cfg: &RewardConfig<T>,
    ) -> Result<(T, EpisodeMetrics<T>), MetricError> {
        cumulative_reward(&self.human_positions(), self.meta.timed_out, goal, cfg)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), EnvError> {
        writeln!(
            w,
            "seed={} profile={} steps={} timed_out={} goal={}",
            self.meta.seed,
            self.meta.profile_id,
            self.rows.len(),
            u8::from(self.meta.timed_out),
            self.meta.goal_id.as_deref().unwrap_or("none"),
        )?;
        for (t, row) in self.rows.iter().enumerate() {
            let mut fields = vec![
                t.to_string(),
                sig9(row.robot.x.f64()),
                sig9(row.robot.y.f64()),
                sig9(row.robot.theta.f64()),
                sig9(row.human.x.f64()),
                sig9(row.human.y.f64()),
                sig9(row.human.theta.f64()),
                sig9(row.action.left.f64()),
                sig9(row.action.right.f64()),
                sig9(row.action.stop_degree.f64()),
                sig9(row.response.force.x.f64()),
                sig9(row.response.force.y.f64()),
            ];
            fields.extend(row.response.depth_latent.iter().map(|z| sig9(z.f64())));
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, EnvError> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or(EnvError::MalformedEpisode { line: 1, msg: "empty file".into() })??;
        let mut kv = BTreeMap::new();
        for pair in header.split_whitespace() {
            if let Some((k, v)) = pair.split_once('=') {
                kv.insert(k.to_string(), v.to_string());
            }
        }
        let get = |k: &str| -> Result<String, EnvError> {
            kv.get(k)
                .cloned()
                .ok_or_else(|| EnvError::MalformedEpisode { line: 1, msg: format!("missing {k}") })
        };
        let meta = EpisodeMeta {
            seed: get("seed")?.parse().map_err(|_| EnvError::MalformedEpisode {
                line: 1,
                msg: "bad seed".into(),
            })?,
            profile_id: get("profile")?,
            timed_out: get("timed_out")? == "1",
            goal_id: match get("goal")?.as_str() {
                "none" => None,
                g => Some(g.to_string()),
            },
        };

        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| parse_f64(s).ok_or(()))
                .collect::<Result<_, _>>()
                .map_err(|_| EnvError::MalformedEpisode { line: i + 2, msg: "bad number".into() })?;
            if vals.len() != 12 + LATENT_DIM {
                return Err(EnvError::MalformedEpisode {
                    line: i + 2,
                    msg: format!("expected {} fields, got {}", 12 + LATENT_DIM, vals.len()),
                });
            }
            rows.push(EpisodeRow {
                robot: Pose2::new(T::c(vals[1]), T::c(vals[2]), T::c(vals[3])),
                human: Pose2::new(T::c(vals[4]), T::c(vals[5]), T::c(vals[6])),
                action: RobotAction::new(T::c(vals[7]), T::c(vals[8]), T::c(vals[9])),
                response: HumanResponse {
                    force: Vec2::new(T::c(vals[10]), T::c(vals[11])),
                    depth_latent: vals[12..].iter().map(|&v| T::c(v)).collect(),
                },
            });
        }
        Ok(Episode { rows, meta })
    }
}

/// A dataset: episodes plus the user profiles that produced them.
#[derive(Clone, Debug)]
pub struct Dataset<T> {
    pub episodes: Vec<Episode<T>>,
    pub profiles: Vec<UserProfile<T>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn save(&self, dir: &FsPath) -> Result<(), EnvError> {
        std::fs::create_dir_all(dir)?;
        let mut manifest = BufWriter::new(std::fs::File::create(dir.join("manifest.csv"))?);
        writeln!(manifest, "file,profile,seed,steps")?;
        for (i, ep) in self.episodes.iter().enumerate() {
            let name = format!("ep{i:05}.csv");
            let f = BufWriter::new(std::fs::File::create(dir.join(&name))?);
            ep.write_csv(f)?;
            writeln!(
                manifest,
                "{},{},{},{}",
                name,
                ep.meta.profile_id,
                ep.meta.seed,
                ep.rows.len()
            )?;
        }
        drop(manifest);

        let mut profs = BufWriter::new(std::fs::File::create(dir.join("profiles.csv"))?);
        writeln!(
            profs,
            "id,lateral_offset,follow_distance,response_lag,max_speed,gait_amplitude,gait_freq,noise_sigma,seed"
        )?;
        for p in &self.profiles {
            writeln!(
                profs,
                "{},{},{},{},{},{},{},{},{}",
                p.id,
                sig9(p.lateral_offset.f64()),
                sig9(p.follow_distance.f64()),
                sig9(p.response_lag.f64()),
                sig9(p.max_speed.f64()),
                sig9(p.gait_amplitude.f64()),
                sig9(p.gait_freq.f64()),
                sig9(p.noise_sigma.f64()),
                p.seed
            )?;
        }
        Ok(())
    }

    pub fn load(dir: &FsPath) -> Result<Self, EnvError> {
        let manifest = std::fs::read_to_string(dir.join("manifest.csv"))
            .map_err(|e| EnvError::Dataset(format!("missing manifest in {}: {e}", dir.display())))?;
        let mut episodes = Vec::new();
        for line in manifest.lines().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let file = line
                .split(',')
                .next()
                .ok_or_else(|| EnvError::Dataset("manifest row missing file".into()))?;
            let f = std::io::BufReader::new(std::fs::File::open(dir.join(file))?);
            episodes.push(Episode::read_csv(f)?);
        }

        let mut profiles = Vec::new();
        let profs = std::fs::read_to_string(dir.join("profiles.csv"))
            .map_err(|e| EnvError::Dataset(format!("missing profiles.csv: {e}")))?;
        for (i, line) in profs.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 9 {
                return Err(EnvError::Dataset(format!("profiles.csv line {} malformed", i + 1)));
            }
            let num = |k: usize| -> Result<T, EnvError> {
                parse_f64(fields[k])
                    .map(T::c)
                    .ok_or_else(|| EnvError::Dataset(format!("profiles.csv line {} field {k}", i + 1)))
            };
            profiles.push(UserProfile {
                id: fields[0].to_string(),
                lateral_offset: num(1)?,
                follow_distance: num(2)?,
                response_lag: num(3)?,
                max_speed: num(4)?,
                gait_amplitude: num(5)?,
                gait_freq: num(6)?,
                noise_sigma: num(7)?,
                seed: fields[8]
                    .trim()
                    .parse()
                    .map_err(|_| EnvError::Dataset(format!("profiles.csv line {} seed", i + 1)))?,
            });
        }
        Ok(Dataset { episodes, profiles })
    }
}
