//! Versioned JSON benchmark suites.
//!
//! A suite carries the chain, every scene inline, its start/goal pairs and
//! the planner settings, so a run depends on nothing but the document and
//! the master seed.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BenchError, Result};
use crate::derive_seed;
use crate::kinematics::{
    BoundsSpec, ChainSpec, Config, KinematicChain, ObstacleSpec, PlanningProblem, Scene, SceneDocument,
    DOCUMENT_VERSION,
};
use crate::model::SampleMode;
use crate::planners::DEFAULT_RESOLUTION;
use crate::training::{generate_oracle_path, generate_scene, sample_problem, OracleSettings, SceneFamily};

pub const SUITE_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetUnit {
    /// Collision-checked configurations; reproducible across machines.
    Checks,
    /// Wall-clock seconds, as in the original protocol.
    Seconds,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NeuralOptions {
    pub steps: usize,
    pub max_step_norm: f64,
    /// Neural attempts per colliding edge during replanning; 0 disables replanning.
    pub replan_steps: usize,
    /// Bi-RRT fallback budget during replanning, in collision checks.
    pub fallback_checks: u64,
    pub mode: SampleMode,
    /// Step length of the uniform-random baseline.
    pub random_magnitude: f64,
}

impl Default for NeuralOptions {
    fn default() -> Self {
        Self {
            steps: 50,
            max_step_norm: 0.5,
            replan_steps: 10,
            fallback_checks: 20_000,
            mode: SampleMode::Stochastic,
            random_magnitude: 0.3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassicalOptions {
    pub step_size: f64,
    /// Budget used when no neural planner sets one, in `budget_unit`.
    pub default_budget: f64,
}

impl Default for ClassicalOptions {
    fn default() -> Self {
        Self {
            step_size: 0.3,
            default_budget: 50_000.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub start: Config,
    pub goal: Config,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub id: String,
    pub obstacles: Vec<ObstacleSpec>,
    pub problems: Vec<ProblemSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub name: String,
    pub scenes: Vec<SceneSpec>,
}

fn default_trials() -> usize {
    1
}

fn default_resolution() -> f64 {
    DEFAULT_RESOLUTION
}

fn default_unit() -> BudgetUnit {
    BudgetUnit::Checks
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteDocument {
    pub version: u32,
    pub name: String,
    pub master_seed: u64,
    /// Trials (distinct seeds) per problem.
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub chain: ChainSpec,
    pub bounds: BoundsSpec,
    #[serde(default = "default_resolution")]
    pub resolution: f64,
    #[serde(default = "default_unit")]
    pub budget_unit: BudgetUnit,
    #[serde(default)]
    pub neural: NeuralOptions,
    #[serde(default)]
    pub classical: ClassicalOptions,
    pub tasks: Vec<TaskSpec>,
}

/// A validated scene with its problems.
#[derive(Clone, Debug)]
pub struct SuiteScene {
    pub id: String,
    pub scene: Arc<Scene>,
    pub problems: Vec<PlanningProblem>,
}

#[derive(Clone, Debug)]
pub struct SuiteTask {
    pub name: String,
    pub scenes: Vec<SuiteScene>,
}

/// A suite whose every problem has been checked against its scene.
#[derive(Clone, Debug)]
pub struct BenchmarkSuite {
    pub document: SuiteDocument,
    pub chain: Arc<KinematicChain>,
    pub tasks: Vec<SuiteTask>,
}

fn bad(msg: impl Into<String>) -> BenchError {
    BenchError::Suite(msg.into())
}

impl SuiteDocument {
    pub fn parse(text: &str) -> Result<Self> {
        let doc: SuiteDocument = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        if doc.version != SUITE_VERSION {
            return Err(bad(format!("unsupported suite version {}", doc.version)));
        }
        Ok(doc)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("suite serializes")
    }

    fn scene_document(&self, obstacles: &[ObstacleSpec]) -> SceneDocument {
        SceneDocument {
            version: DOCUMENT_VERSION,
            chain: self.chain.clone(),
            obstacles: obstacles.to_vec(),
            bounds: self.bounds,
        }
    }
}

impl BenchmarkSuite {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_document(SuiteDocument::parse(text)?)
    }

    pub fn from_document(doc: SuiteDocument) -> Result<Self> {
        if doc.trials == 0 {
            return Err(bad("trials must be positive"));
        }
        if !(doc.resolution > 0.0 && doc.resolution.is_finite()) {
            return Err(bad("resolution must be positive"));
        }
        let n = &doc.neural;
        if !(n.max_step_norm > 0.0 && n.max_step_norm.is_finite() && n.random_magnitude.is_finite()) {
            return Err(bad("invalid neural options"));
        }
        let c = &doc.classical;
        if !(c.step_size > 0.0 && c.step_size.is_finite() && c.default_budget >= 0.0 && c.default_budget.is_finite()) {
            return Err(bad("invalid classical options"));
        }
        if doc.tasks.is_empty() {
            return Err(bad("suite has no tasks"));
        }
        let chain = Arc::new(doc.scene_document(&[]).build_chain()?);
        let mut task_names = BTreeSet::new();
        let mut scene_ids = BTreeSet::new();
        let mut tasks = Vec::new();
        for t in &doc.tasks {
            if !task_names.insert(t.name.as_str()) || t.name.is_empty() || t.name == super::ALL_TASKS {
                return Err(bad(format!("invalid or duplicate task name {:?}", t.name)));
            }
            if t.scenes.is_empty() {
                return Err(bad(format!("task {} has no scenes", t.name)));
            }
            let mut scenes = Vec::new();
            for s in &t.scenes {
                if !scene_ids.insert(s.id.as_str()) {
                    return Err(bad(format!("duplicate scene id {:?}", s.id)));
                }
                if s.problems.is_empty() {
                    return Err(bad(format!("scene {} has no problems", s.id)));
                }
                let scene = Arc::new(doc.scene_document(&s.obstacles).build_scene()?);
                let problems = s
                    .problems
                    .iter()
                    .map(|p| PlanningProblem::new(chain.clone(), scene.clone(), p.start.clone(), p.goal.clone()))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| bad(format!("scene {}: {e}", s.id)))?;
                scenes.push(SuiteScene {
                    id: s.id.clone(),
                    scene,
                    problems,
                });
            }
            tasks.push(SuiteTask {
                name: t.name.clone(),
                scenes,
            });
        }
        Ok(Self {
            document: doc,
            chain,
            tasks,
        })
    }

    pub fn num_problems(&self) -> usize {
        self.tasks.iter().flat_map(|t| &t.scenes).map(|s| s.problems.len()).sum()
    }
}

/// Desk-scale suite over the planar scene families: one task per family,
/// `scenes` scenes each with `problems` blocked start/goal pairs that the
/// oracle can connect.
pub fn generate_suite(
    name: &str,
    chain: &KinematicChain,
    families: &[SceneFamily],
    scenes: usize,
    problems: usize,
    trials: usize,
    seed: u64,
) -> SuiteDocument {
    let arc_chain = Arc::new(chain.clone());
    let oracle = OracleSettings::default();
    let template = SceneDocument::from_parts(chain, &Scene::empty(crate::kinematics::presets::planar_bounds()));
    let tasks = families
        .iter()
        .enumerate()
        .map(|(fi, &family)| TaskSpec {
            name: family.name().to_string(),
            scenes: (0..scenes)
                .map(|si| {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[fi as u64, si as u64]));
                    loop {
                        let scene = Arc::new(generate_scene(family, &mut rng));
                        let drawn: Vec<ProblemSpec> = (0..problems)
                            .map_while(|_| {
                                // Disconnected start/goal pairs would only measure the budget.
                                (0..20).find_map(|_| {
                                    let p = sample_problem(&arc_chain, &scene, 1.0, true, DEFAULT_RESOLUTION, 10_000, &mut rng)?;
                                    generate_oracle_path(&p, &oracle, &mut rng).ok()?;
                                    Some(ProblemSpec {
                                        start: p.q_start,
                                        goal: p.q_goal,
                                    })
                                })
                            })
                            .collect();
                        if drawn.len() == problems {
                            break SceneSpec {
                                id: format!("{}-{si:03}", family.name()),
                                obstacles: SceneDocument::from_parts(chain, &scene).obstacles,
                                problems: drawn,
                            };
                        }
                    }
                })
                .collect(),
        })
        .collect();
    SuiteDocument {
        version: SUITE_VERSION,
        name: name.to_string(),
        master_seed: seed,
        trials,
        chain: template.chain,
        bounds: template.bounds,
        resolution: DEFAULT_RESOLUTION,
        budget_unit: BudgetUnit::Checks,
        neural: NeuralOptions::default(),
        classical: ClassicalOptions::default(),
        tasks,
    }
}
