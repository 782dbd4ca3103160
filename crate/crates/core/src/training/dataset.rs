//! Line-delimited demonstration datasets.
//!
//! The first line is a JSON header; every following line is one path:
//!
//! ```text
//! {"format":"gaide-dataset","version":1,"chain":"<digest>","dof":2,"master_seed":7,"cloud_seed":9,"scenes":["table-000"]}
//! {"scene":"table-000","seed":123,"configs":[[0.1,0.2],[0.3,0.2]]}
//! ```
//!
//! Scenes are referenced by id; point clouds are regenerated from the
//! recorded seeds rather than stored.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::families::sample_problem;
use super::oracle::{generate_oracle_path, resample_path, OracleSettings};
use super::{Result, TrainingError};
use crate::derive_seed;
use crate::kinematics::{Config, KinematicChain, Scene};

pub const DATASET_FORMAT: &str = "gaide-dataset";
pub const DATASET_VERSION: u32 = 1;

/// Per-step bound on regression targets, radians.
pub const MAX_TARGET_NORM: f64 = 0.3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    /// Digest of the kinematic chain the paths belong to.
    pub chain: String,
    pub dof: usize,
    pub master_seed: u64,
    /// Scene point clouds are drawn from `derive_seed(cloud_seed, [scene index])`.
    pub cloud_seed: u64,
    pub scenes: Vec<String>,
}

/// One demonstration: waypoints from start to goal in one scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathRecord {
    #[serde(rename = "scene")]
    pub scene_id: String,
    /// Seed for the robot clouds of this record's samples.
    pub seed: u64,
    pub configs: Vec<Config>,
}

/// One supervised step toward the goal.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSample {
    /// Index into the header's scene list.
    pub scene: usize,
    pub q_t: Config,
    pub q_goal: Config,
    pub target: Vec<f64>,
    /// Seed for the robot cloud at `q_t`.
    pub seed: u64,
}

impl PathRecord {
    /// Samples `q_t -> q_{t+1}` toward the final waypoint; with `both_directions`
    /// the reversed path contributes as well.
    pub fn samples(&self, scene: usize, both_directions: bool) -> Vec<TrainingSample> {
        let mut out = Vec::new();
        let forward: Vec<&Config> = self.configs.iter().collect();
        let backward: Vec<&Config> = self.configs.iter().rev().collect();
        let dirs: &[&Vec<&Config>] = if both_directions { &[&forward, &backward] } else { &[&forward] };
        for (d, path) in dirs.iter().enumerate() {
            let goal = path[path.len() - 1];
            for t in 0..path.len() - 1 {
                out.push(TrainingSample {
                    scene,
                    q_t: path[t].clone(),
                    q_goal: goal.clone(),
                    target: path[t + 1].sub(path[t]),
                    seed: derive_seed(self.seed, &[d as u64, t as u64]),
                });
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<PathRecord>,
}

fn invalid(line: usize, msg: impl std::fmt::Display) -> TrainingError {
    TrainingError::Dataset(format!("line {line}: {msg}"))
}

impl Dataset {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or_else(|| TrainingError::Dataset("empty dataset file".into()))?;
        let header: DatasetHeader = serde_json::from_str(first).map_err(|e| invalid(1, e))?;
        if header.format != DATASET_FORMAT {
            return Err(invalid(1, format!("unknown format {:?}", header.format)));
        }
        if header.version != DATASET_VERSION {
            return Err(invalid(1, format!("unsupported version {}", header.version)));
        }
        if header.dof == 0 {
            return Err(invalid(1, "zero joints"));
        }
        let ids: BTreeSet<&str> = header.scenes.iter().map(String::as_str).collect();
        if ids.len() != header.scenes.len() {
            return Err(invalid(1, "duplicate scene id"));
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            let r: PathRecord = serde_json::from_str(line).map_err(|e| invalid(i + 1, e))?;
            if !ids.contains(r.scene_id.as_str()) {
                return Err(invalid(i + 1, format!("unknown scene {:?}", r.scene_id)));
            }
            if r.configs.len() < 2 {
                return Err(invalid(i + 1, "path needs at least two configurations"));
            }
            for q in &r.configs {
                if q.len() != header.dof || q.iter().any(|x| !x.is_finite()) {
                    return Err(invalid(i + 1, "malformed configuration"));
                }
            }
            records.push(r);
        }
        Ok(Self { header, records })
    }

    pub fn to_text(&self) -> String {
        let mut s = serde_json::to_string(&self.header).expect("header serializes");
        s.push('\n');
        for r in &self.records {
            s.push_str(&serde_json::to_string(r).expect("record serializes"));
            s.push('\n');
        }
        s
    }

    pub fn scene_index(&self, id: &str) -> Option<usize> {
        self.header.scenes.iter().position(|s| s == id)
    }

    /// Every sample of every record, in file order.
    pub fn samples(&self, both_directions: bool) -> Vec<TrainingSample> {
        let index: HashMap<&str, usize> = self.header.scenes.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        self.records
            .iter()
            .flat_map(|r| r.samples(index[r.scene_id.as_str()], both_directions))
            .collect()
    }

    /// Splits by scene: a shuffled `val_fraction` of the scenes (at least one
    /// when there are two or more) goes to validation with all its paths.
    /// Both halves keep the full scene list so indices stay comparable.
    pub fn split_by_scene(&self, val_fraction: f64, seed: u64) -> (Dataset, Dataset) {
        let mut scenes = self.header.scenes.clone();
        scenes.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_val = if scenes.len() < 2 {
            0
        } else {
            ((scenes.len() as f64 * val_fraction).round() as usize).clamp(1, scenes.len() - 1)
        };
        let val: BTreeSet<&str> = scenes[..n_val].iter().map(String::as_str).collect();
        let (v, t): (Vec<PathRecord>, Vec<PathRecord>) =
            self.records.iter().cloned().partition(|r| val.contains(r.scene_id.as_str()));
        (
            Dataset {
                header: self.header.clone(),
                records: t,
            },
            Dataset {
                header: self.header.clone(),
                records: v,
            },
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenerationSettings {
    pub paths_per_scene: usize,
    /// Minimum joint-space distance between start and goal.
    pub min_distance: f64,
    /// Keep only problems whose straight edge collides.
    pub require_blocked: bool,
    /// Problem draws per path before the slot is given up.
    pub attempts: usize,
    pub oracle: OracleSettings,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        Self {
            paths_per_scene: 10,
            min_distance: 1.0,
            require_blocked: true,
            attempts: 20,
            oracle: OracleSettings::default(),
        }
    }
}

/// Oracle demonstrations for every scene, generated in parallel with
/// per-slot seeds so the output is independent of scheduling.
pub fn generate_dataset(
    chain: &Arc<KinematicChain>,
    scenes: &[(String, Arc<Scene>)],
    settings: &GenerationSettings,
    master_seed: u64,
) -> Dataset {
    let slots: Vec<(usize, usize)> = (0..scenes.len())
        .flat_map(|s| (0..settings.paths_per_scene).map(move |k| (s, k)))
        .collect();
    let records: Vec<Option<PathRecord>> = slots
        .par_iter()
        .map(|&(s, k)| {
            let (id, scene) = &scenes[s];
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(master_seed, &[s as u64, k as u64]));
            for _ in 0..settings.attempts {
                let Some(problem) = sample_problem(
                    chain,
                    scene,
                    settings.min_distance,
                    settings.require_blocked,
                    settings.oracle.resolution,
                    1000,
                    &mut rng,
                ) else {
                    continue;
                };
                if let Ok(path) = generate_oracle_path(&problem, &settings.oracle, &mut rng) {
                    if path.len() < 2 {
                        continue;
                    }
                    return Some(PathRecord {
                        scene_id: id.clone(),
                        seed: derive_seed(master_seed, &[s as u64, k as u64, 1]),
                        configs: resample_path(&path, MAX_TARGET_NORM),
                    });
                }
            }
            None
        })
        .collect();
    Dataset {
        header: DatasetHeader {
            format: DATASET_FORMAT.into(),
            version: DATASET_VERSION,
            chain: chain.digest(),
            dof: chain.dof(),
            master_seed,
            cloud_seed: derive_seed(master_seed, &[u64::MAX]),
            scenes: scenes.iter().map(|(id, _)| id.clone()).collect(),
        },
        records: records.into_iter().flatten().collect(),
    }
}
