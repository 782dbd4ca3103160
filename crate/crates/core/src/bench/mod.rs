//! Benchmark harness: suites, the two-phase evaluation protocol, metrics
//! and reports.

pub mod report;
pub mod suite;
pub mod svg;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use report::{aggregate, mean_std, write_report, CostRow, MetricsRow};
pub use suite::{generate_suite, BenchmarkSuite, BudgetUnit, SuiteDocument, SUITE_VERSION};

use crate::derive_seed;
use crate::kinematics::{KinematicsError, PlanningProblem};
use crate::model::{GaideModel, MaskSchedule};
use crate::planners::{
    birrt_plan, informed_rrt_star_plan, neural_plan, rrt_star_plan, Budget, NeuralSampler, NeuralSettings,
    PlanResult, PlannerError, PlannerSettings, RandomDeltaSampler, ReplanSettings,
};

/// Task label of the cross-task rows.
pub const ALL_TASKS: &str = "all";

/// Environment variable overriding a suite's master seed.
pub const SEED_ENV: &str = "GAIDE_SEED";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid suite: {0}")]
    Suite(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("malformed report file: {0}")]
    Report(String),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PlannerId {
    #[serde(rename = "gaide")]
    Gaide,
    #[serde(rename = "gaide-v")]
    GaideV,
    #[serde(rename = "gaide-h")]
    GaideH,
    /// The neural planner driven by uniformly random steps.
    #[serde(rename = "random")]
    Random,
    #[serde(rename = "birrt")]
    BiRrt,
    #[serde(rename = "rrtstar")]
    RrtStar,
    #[serde(rename = "informed-rrtstar")]
    InformedRrtStar,
}

impl PlannerId {
    pub const ALL: [PlannerId; 7] = [
        PlannerId::Gaide,
        PlannerId::GaideV,
        PlannerId::GaideH,
        PlannerId::Random,
        PlannerId::BiRrt,
        PlannerId::RrtStar,
        PlannerId::InformedRrtStar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlannerId::Gaide => "gaide",
            PlannerId::GaideV => "gaide-v",
            PlannerId::GaideH => "gaide-h",
            PlannerId::Random => "random",
            PlannerId::BiRrt => "birrt",
            PlannerId::RrtStar => "rrtstar",
            PlannerId::InformedRrtStar => "informed-rrtstar",
        }
    }

    /// Mask schedule of the model a learned planner needs.
    pub fn schedule(self) -> Option<MaskSchedule> {
        match self {
            PlannerId::Gaide => Some(MaskSchedule::Interleaved),
            PlannerId::GaideV => Some(MaskSchedule::NoneMask),
            PlannerId::GaideH => Some(MaskSchedule::AllMask),
            _ => None,
        }
    }

    pub fn needs_model(self) -> bool {
        self.schedule().is_some()
    }

    /// Planners run in the first phase, before budgets are fixed.
    pub fn is_step_limited(self) -> bool {
        self.needs_model() || self == PlannerId::Random
    }

    pub fn parse_list(s: &str) -> Result<Vec<PlannerId>> {
        let ids = s
            .split(',')
            .map(str::trim)
            .filter(|x| !x.is_empty())
            .map(|x| x.parse().map_err(BenchError::Config))
            .collect::<Result<Vec<PlannerId>>>()?;
        if ids.is_empty() {
            return Err(BenchError::Config("no planners given".into()));
        }
        Ok(ids)
    }
}

impl fmt::Display for PlannerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlannerId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        PlannerId::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown planner {s:?}"))
    }
}

/// Raw outcome of one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialRecord {
    pub planner: PlannerId,
    pub task: String,
    pub scene: String,
    pub problem: usize,
    pub trial: usize,
    pub seed: u64,
    pub success: bool,
    pub cost: Option<f64>,
    pub time_s: f64,
    pub collision_checks: u64,
    pub iterations: u64,
    pub replanning: bool,
    /// Budget the planner ran under; `None` for step-limited planners.
    pub budget: Option<Budget>,
}

/// Per-task budget handed from the first phase to the second.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetRecord {
    pub task: String,
    /// Planner whose mean effort set the budget, if any ran.
    pub reference: Option<PlannerId>,
    pub reference_mean_time_s: Option<f64>,
    pub reference_mean_checks: Option<f64>,
    pub classical_budget: Budget,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BenchRun {
    pub records: Vec<TrialRecord>,
    pub budgets: Vec<BudgetRecord>,
}

struct Job<'a> {
    planner: PlannerId,
    task: usize,
    scene: usize,
    problem_index: usize,
    trial: usize,
    problem: &'a PlanningProblem,
}

fn run_trial(
    suite: &BenchmarkSuite,
    job: &Job<'_>,
    models: &BTreeMap<PlannerId, GaideModel>,
    budget: Option<Budget>,
) -> Result<TrialRecord> {
    let doc = &suite.document;
    let seed = derive_seed(doc.master_seed, &[job.task as u64, job.scene as u64, job.problem_index as u64, job.trial as u64]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let neural = NeuralSettings {
        steps: doc.neural.steps,
        max_step_norm: doc.neural.max_step_norm,
        resolution: doc.resolution,
        replan: (doc.neural.replan_steps > 0).then_some(ReplanSettings {
            neural_steps: doc.neural.replan_steps,
            fallback: PlannerSettings {
                step_size: doc.classical.step_size,
                resolution: doc.resolution,
                budget: Budget::Checks(doc.neural.fallback_checks),
            },
        }),
    };
    let classical = |budget: Budget| PlannerSettings {
        step_size: doc.classical.step_size,
        resolution: doc.resolution,
        budget,
    };
    let p = job.problem;
    let result: PlanResult = match job.planner {
        PlannerId::Gaide | PlannerId::GaideV | PlannerId::GaideH => {
            let sampler = NeuralSampler {
                model: &models[&job.planner],
                mode: doc.neural.mode,
            };
            neural_plan(p, &sampler, &neural, &mut rng)?
        }
        PlannerId::Random => {
            let sampler = RandomDeltaSampler {
                dof: suite.chain.dof(),
                magnitude: doc.neural.random_magnitude,
            };
            neural_plan(p, &sampler, &neural, &mut rng)?
        }
        PlannerId::BiRrt => birrt_plan(p, &classical(budget.expect("classical budget")), &mut rng),
        PlannerId::RrtStar => rrt_star_plan(p, &classical(budget.expect("classical budget")), &mut rng),
        PlannerId::InformedRrtStar => informed_rrt_star_plan(p, &classical(budget.expect("classical budget")), &mut rng),
    };
    Ok(TrialRecord {
        planner: job.planner,
        task: suite.tasks[job.task].name.clone(),
        scene: suite.tasks[job.task].scenes[job.scene].id.clone(),
        problem: job.problem_index,
        trial: job.trial,
        seed,
        success: result.success,
        cost: result.cost,
        time_s: result.planning_time,
        collision_checks: result.stats.collision_checks,
        iterations: result.stats.iterations,
        replanning: result.stats.replanning_invoked,
        budget,
    })
}

fn jobs<'a>(suite: &'a BenchmarkSuite, planner: PlannerId) -> Vec<Job<'a>> {
    let mut out = Vec::new();
    for (ti, task) in suite.tasks.iter().enumerate() {
        for (si, scene) in task.scenes.iter().enumerate() {
            for (pi, problem) in scene.problems.iter().enumerate() {
                for trial in 0..suite.document.trials {
                    out.push(Job {
                        planner,
                        task: ti,
                        scene: si,
                        problem_index: pi,
                        trial,
                        problem,
                    });
                }
            }
        }
    }
    out
}

/// Checks planners and models before any trial runs.
pub fn check_configuration(
    suite: &BenchmarkSuite,
    planners: &[PlannerId],
    models: &BTreeMap<PlannerId, GaideModel>,
) -> Result<()> {
    if planners.is_empty() {
        return Err(BenchError::Config("no planners selected".into()));
    }
    for (i, p) in planners.iter().enumerate() {
        if planners[..i].contains(p) {
            return Err(BenchError::Config(format!("planner {p} listed twice")));
        }
        if let Some(schedule) = p.schedule() {
            let model = models
                .get(p)
                .ok_or_else(|| BenchError::Config(format!("planner {p} needs a checkpoint")))?;
            if model.hyper().schedule != schedule {
                return Err(BenchError::Config(format!(
                    "checkpoint for {p} was built with the {} schedule",
                    model.hyper().schedule.name()
                )));
            }
            if model.hyper().dof != suite.chain.dof() {
                return Err(BenchError::Config(format!(
                    "checkpoint for {p} has {} joints, suite chain has {}",
                    model.hyper().dof,
                    suite.chain.dof()
                )));
            }
        }
    }
    Ok(())
}

/// Two-phase protocol. Step-limited planners (learned and random-step) run
/// first; the mean effort of the first of them per task becomes the budget
/// of the classical planners in the second phase, in the suite's budget
/// unit. Trials run on `workers` threads; records come back in a fixed
/// order regardless of scheduling.
pub fn run_suite(
    suite: &BenchmarkSuite,
    planners: &[PlannerId],
    models: &BTreeMap<PlannerId, GaideModel>,
    workers: usize,
) -> Result<BenchRun> {
    check_configuration(suite, planners, models)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| BenchError::Config(e.to_string()))?;
    let run_phase = |selected: &[PlannerId], budgets: &BTreeMap<usize, Budget>| -> Result<Vec<TrialRecord>> {
        let all: Vec<Job<'_>> = selected.iter().flat_map(|&p| jobs(suite, p)).collect();
        pool.install(|| {
            all.par_iter()
                .map(|job| run_trial(suite, job, models, budgets.get(&job.task).copied()))
                .collect()
        })
    };

    let first: Vec<PlannerId> = planners.iter().copied().filter(|p| p.is_step_limited()).collect();
    let second: Vec<PlannerId> = planners.iter().copied().filter(|p| !p.is_step_limited()).collect();
    let mut records = run_phase(&first, &BTreeMap::new())?;

    let reference = first.iter().copied().find(|p| p.needs_model()).or(first.first().copied());
    let doc = &suite.document;
    let mut budgets = Vec::new();
    let mut by_task = BTreeMap::new();
    for (ti, task) in suite.tasks.iter().enumerate() {
        let (mean_time, mean_checks) = match reference {
            Some(r) => {
                let rs: Vec<&TrialRecord> = records.iter().filter(|x| x.planner == r && x.task == task.name).collect();
                let n = rs.len() as f64;
                (
                    Some(rs.iter().map(|x| x.time_s).sum::<f64>() / n),
                    Some(rs.iter().map(|x| x.collision_checks as f64).sum::<f64>() / n),
                )
            }
            None => (None, None),
        };
        let budget = match doc.budget_unit {
            BudgetUnit::Checks => Budget::Checks(mean_checks.unwrap_or(doc.classical.default_budget).round() as u64),
            BudgetUnit::Seconds => Budget::Seconds(mean_time.unwrap_or(doc.classical.default_budget)),
        };
        by_task.insert(ti, budget);
        budgets.push(BudgetRecord {
            task: task.name.clone(),
            reference,
            reference_mean_time_s: mean_time,
            reference_mean_checks: mean_checks,
            classical_budget: budget,
        });
    }
    records.extend(run_phase(&second, &by_task)?);
    let rank = |p: PlannerId| planners.iter().position(|&x| x == p).expect("selected planner");
    // Stable: within a planner the job order is kept.
    records.sort_by_key(|r| rank(r.planner));
    Ok(BenchRun { records, budgets })
}

/// Master seed from the environment, when set.
pub fn seed_override() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| BenchError::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(BenchError::Config(format!("{SEED_ENV}: {e}"))),
    }
}
