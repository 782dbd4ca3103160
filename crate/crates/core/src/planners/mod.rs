//! Sampling-based planners: Bi-RRT, RRT*, informed RRT* and the neural
//! bidirectional planner, plus the path utilities they share.

mod birrt;
mod neural;
mod rrtstar;
mod tree;

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{CollisionChecker, Config, KinematicChain, KinematicsError, PlanningProblem};
use crate::model::ModelError;

pub use birrt::birrt_plan;
pub use neural::{
    neural_plan, replanning, scene_cloud, DeltaSampler, NeuralSampler, NeuralSettings, RandomDeltaSampler, ReplanSettings,
};
pub use rrtstar::{informed_rrt_star_plan, informed_sample, rrt_star_plan, rrt_star_gamma};
pub use tree::Tree;

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

pub type Result<T, E = PlannerError> = std::result::Result<T, E>;

/// Planning budget. `Checks` counts collision-checked configurations and
/// makes runs reproducible independent of machine speed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    Seconds(f64),
    Checks(u64),
}

pub(crate) struct Clock {
    budget: Budget,
    start: Instant,
}

impl Clock {
    pub(crate) fn start(budget: Budget) -> Self {
        Self {
            budget,
            start: Instant::now(),
        }
    }

    pub(crate) fn exhausted(&self, checker: &CollisionChecker<'_>) -> bool {
        match self.budget {
            Budget::Seconds(s) => self.start.elapsed().as_secs_f64() >= s,
            Budget::Checks(n) => checker.checks() >= n,
        }
    }

    pub(crate) fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannerSettings {
    /// Maximum tree extension, radians.
    pub step_size: f64,
    /// Edge collision-check resolution, radians.
    pub resolution: f64,
    pub budget: Budget,
}

impl Default for PlannerSettings {
    fn default() -> Self {
        Self {
            step_size: 0.3,
            resolution: DEFAULT_RESOLUTION,
            budget: Budget::Checks(50_000),
        }
    }
}

pub const DEFAULT_RESOLUTION: f64 = 0.02;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanStats {
    pub samples: u64,
    pub collision_checks: u64,
    pub iterations: u64,
    pub replanning_invoked: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub success: bool,
    pub path: Option<Vec<Config>>,
    pub cost: Option<f64>,
    /// Wall-clock seconds inside the planner.
    pub planning_time: f64,
    pub stats: PlanStats,
    /// Best solution cost after each iteration (RRT* variants only;
    /// infinite until the first solution).
    #[serde(skip)]
    pub best_cost_trace: Vec<f64>,
}

impl PlanResult {
    pub(crate) fn finish(path: Option<Vec<Config>>, planning_time: f64, stats: PlanStats) -> Self {
        let cost = path.as_deref().map(path_cost);
        Self {
            success: path.is_some(),
            path,
            cost,
            planning_time,
            stats,
            best_cost_trace: Vec::new(),
        }
    }
}

/// Joint-space length `sum ||q_{i+1} - q_i||`.
pub fn path_cost(path: &[Config]) -> f64 {
    path.windows(2).map(|w| w[0].distance(&w[1])).sum()
}

/// Uniform configuration within joint limits.
pub fn uniform_config(chain: &KinematicChain, rng: &mut impl Rng) -> Config {
    Config(
        chain
            .joints()
            .iter()
            .map(|j| rng.gen_range(j.lower..=j.upper))
            .collect(),
    )
}

/// Point at most `step` from `from` toward `to`.
pub fn steer(from: &Config, to: &Config, step: f64) -> Config {
    let d = from.distance(to);
    if d <= step {
        to.clone()
    } else {
        from.lerp(to, step / d)
    }
}

/// Checks the contract every returned path must meet: exact endpoints,
/// configurations within limits, every edge collision-free at
/// `resolution`.
pub fn validate_path(problem: &PlanningProblem, path: &[Config], resolution: f64) -> Result<(), String> {
    let (first, last) = match (path.first(), path.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err("empty path".into()),
    };
    if first != &problem.q_start || last != &problem.q_goal {
        return Err("endpoints differ from the problem".into());
    }
    for q in path {
        problem.chain.check_config(q).map_err(|e| e.to_string())?;
    }
    let checker = CollisionChecker::new(&problem.chain, &problem.scene, resolution);
    for (i, w) in path.windows(2).enumerate() {
        if !checker.edge_free(&w[0], &w[1]) {
            return Err(format!("edge {i} in collision"));
        }
    }
    if path.len() == 1 && checker.in_collision(first) {
        return Err("single configuration in collision".into());
    }
    Ok(())
}

/// Greedy shortcutting: from each kept node jump to the farthest later node
/// reachable by a collision-free straight edge. A node whose successor
/// cannot be reached directly keeps that edge, so colliding edges survive
/// for repair. Endpoints are preserved and the cost never increases.
pub fn path_contraction(path: &[Config], checker: &CollisionChecker<'_>) -> Vec<Config> {
    if path.len() <= 2 {
        return path.to_vec();
    }
    let last = path.len() - 1;
    let mut out = vec![path[0].clone()];
    let mut i = 0;
    while i < last {
        let mut next = i + 1;
        for j in (i + 2..=last).rev() {
            if checker.edge_free(&path[i], &path[j]) {
                next = j;
                break;
            }
        }
        out.push(path[next].clone());
        i = next;
    }
    out
}

/// Random shortcutting: `iterations` times pick two nodes and splice in the
/// straight edge between them when it is collision-free.
pub fn shortcut(path: &[Config], checker: &CollisionChecker<'_>, iterations: usize, rng: &mut impl Rng) -> Vec<Config> {
    let mut p = path.to_vec();
    for _ in 0..iterations {
        if p.len() <= 2 {
            break;
        }
        let i = rng.gen_range(0..p.len() - 2);
        let j = rng.gen_range(i + 2..p.len());
        if checker.edge_free(&p[i], &p[j]) {
            p.drain(i + 1..j);
        }
    }
    p
}

pub(crate) fn check_problem_dof(problem: &PlanningProblem, dof: usize) -> Result<()> {
    if problem.dof() != dof {
        return Err(PlannerError::Config(format!(
            "planner expects {dof} joints, problem has {}",
            problem.dof()
        )));
    }
    Ok(())
}
