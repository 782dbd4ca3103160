//! Bidirectional neural planner.
//!
//! Two waypoint lists grow from the start and the goal. Each iteration asks
//! the sampler for a step from the end of the active list toward the end of
//! the other, appends it (clamped to joint limits and a maximum norm), tests
//! the straight edge between the two ends, and swaps roles. New waypoints are
//! not collision-checked when appended; the joined path is contracted,
//! checked once, and repaired edge by edge if needed. The loop runs until the
//! step budget is exhausted rather than stopping at the first failed
//! connection.

use rand::{Rng, RngCore};

use super::{
    birrt_plan, check_problem_dof, path_contraction, Budget, Clock, PlanResult, PlanStats, PlannerError, PlannerSettings,
    Result,
};
use crate::encoding::Grouping;
use crate::kinematics::{
    sample_robot_pointcloud, sample_scene_pointcloud, CollisionChecker, Config, KinematicChain, PlanningProblem,
    PointCloud, Scene,
};
use crate::model::{GaideModel, SampleMode};

/// Source of joint-space steps for [`neural_plan`].
pub trait DeltaSampler {
    /// Per-problem state computed before the timed region.
    type Context;

    fn dof(&self) -> usize;

    fn prepare(&self, problem: &PlanningProblem, rng: &mut dyn RngCore) -> Result<Self::Context>;

    fn delta(
        &self,
        ctx: &Self::Context,
        chain: &KinematicChain,
        q_a: &Config,
        q_b: &Config,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<f64>>;
}

/// Workspace cloud as the model sees it. An obstacle-free scene becomes a
/// single point at the workspace corner so the token set is never empty.
pub fn scene_cloud(scene: &Scene, n_points: usize, rng: &mut impl Rng) -> PointCloud {
    let cloud = sample_scene_pointcloud(scene, n_points, rng);
    if cloud.is_empty() {
        PointCloud::new(vec![scene.bounds().min])
    } else {
        cloud
    }
}

/// Steps predicted by a trained model.
pub struct NeuralSampler<'m> {
    pub model: &'m GaideModel,
    pub mode: SampleMode,
}

impl DeltaSampler for NeuralSampler<'_> {
    type Context = Grouping;

    fn dof(&self) -> usize {
        self.model.hyper().dof
    }

    fn prepare(&self, problem: &PlanningProblem, mut rng: &mut dyn RngCore) -> Result<Grouping> {
        let cloud = scene_cloud(&problem.scene, self.model.hyper().n_work_points, &mut rng);
        Ok(self.model.scene_grouping(&cloud)?)
    }

    fn delta(
        &self,
        ctx: &Grouping,
        chain: &KinematicChain,
        q_a: &Config,
        q_b: &Config,
        mut rng: &mut dyn RngCore,
    ) -> Result<Vec<f64>> {
        let robot = sample_robot_pointcloud(chain, q_a, self.model.hyper().n_robot_points, &mut rng)?;
        Ok(self.model.predict(q_a, q_b, &robot, ctx, self.mode, &mut rng)?)
    }
}

/// Uniformly random directions with a fixed step length.
pub struct RandomDeltaSampler {
    pub dof: usize,
    pub magnitude: f64,
}

impl DeltaSampler for RandomDeltaSampler {
    type Context = ();

    fn dof(&self) -> usize {
        self.dof
    }

    fn prepare(&self, _: &PlanningProblem, _: &mut dyn RngCore) -> Result<()> {
        Ok(())
    }

    fn delta(&self, _: &(), _: &KinematicChain, _: &Config, _: &Config, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let v: Vec<f64> = (0..self.dof).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
        Ok(v.into_iter().map(|x| x / n * self.magnitude).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReplanSettings {
    /// Step budget of the neural attempt on each colliding edge.
    pub neural_steps: usize,
    /// Classical fallback for edges the neural attempt cannot repair.
    pub fallback: PlannerSettings,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeuralSettings {
    pub steps: usize,
    /// Steps longer than this are rescaled, radians.
    pub max_step_norm: f64,
    pub resolution: f64,
    pub replan: Option<ReplanSettings>,
}

impl Default for NeuralSettings {
    fn default() -> Self {
        Self {
            steps: 50,
            max_step_norm: 0.5,
            resolution: super::DEFAULT_RESOLUTION,
            replan: Some(ReplanSettings {
                neural_steps: 10,
                fallback: PlannerSettings {
                    budget: Budget::Checks(20_000),
                    ..PlannerSettings::default()
                },
            }),
        }
    }
}

fn clamp_step(chain: &KinematicChain, from: &Config, delta: &[f64], max_norm: f64) -> Config {
    let n = delta.iter().map(|x| x * x).sum::<f64>().sqrt();
    let s = if n > max_norm { max_norm / n } else { 1.0 };
    let mut q: Vec<f64> = from.iter().zip(delta).map(|(a, d)| a + s * d).collect();
    for (v, (lo, hi)) in q.iter_mut().zip(chain.lower_limits().into_iter().zip(chain.upper_limits())) {
        if !v.is_finite() {
            *v = 0.5 * (lo + hi);
        }
    }
    chain.clamp(&mut q);
    Config(q)
}

/// Grows the two lists for at most `steps` iterations; returns the joined,
/// unvalidated waypoint list on connection.
#[allow(clippy::too_many_arguments)]
fn grow<S: DeltaSampler>(
    problem: &PlanningProblem,
    sampler: &S,
    ctx: &S::Context,
    steps: usize,
    max_norm: f64,
    checker: &CollisionChecker<'_>,
    stats: &mut PlanStats,
    rng: &mut dyn RngCore,
) -> Result<Option<Vec<Config>>> {
    let chain = &*problem.chain;
    let mut a = vec![problem.q_start.clone()];
    let mut b = vec![problem.q_goal.clone()];
    let mut a_is_start = true;
    for _ in 0..steps {
        stats.iterations += 1;
        stats.samples += 1;
        let (qa, qb) = (a.last().expect("non-empty"), b.last().expect("non-empty"));
        let delta = sampler.delta(ctx, chain, qa, qb, rng)?;
        let q_new = clamp_step(chain, qa, &delta, max_norm);
        a.push(q_new);
        if checker.edge_free(a.last().expect("non-empty"), b.last().expect("non-empty")) {
            let (mut s, mut g) = if a_is_start { (a, b) } else { (b, a) };
            g.reverse();
            s.extend(g);
            return Ok(Some(s));
        }
        std::mem::swap(&mut a, &mut b);
        a_is_start = !a_is_start;
    }
    Ok(None)
}

#[allow(clippy::too_many_arguments)]
fn solve<S: DeltaSampler>(
    problem: &PlanningProblem,
    sampler: &S,
    ctx: &S::Context,
    settings: &NeuralSettings,
    checker: &CollisionChecker<'_>,
    stats: &mut PlanStats,
    rng: &mut dyn RngCore,
) -> Result<Option<Vec<Config>>> {
    if problem.q_start == problem.q_goal {
        return Ok(Some(vec![problem.q_start.clone()]));
    }
    if checker.edge_free(&problem.q_start, &problem.q_goal) {
        stats.iterations += 1;
        return Ok(Some(vec![problem.q_start.clone(), problem.q_goal.clone()]));
    }
    let Some(raw) = grow(problem, sampler, ctx, settings.steps, settings.max_step_norm, checker, stats, rng)? else {
        return Ok(None);
    };
    let path = path_contraction(&raw, checker);
    if checker.path_free(&path) {
        return Ok(Some(path));
    }
    let Some(replan) = settings.replan else {
        return Ok(None);
    };
    stats.replanning_invoked = true;
    let Some(repaired) = repair(problem, sampler, ctx, &path, &replan, settings, checker, stats, rng)? else {
        return Ok(None);
    };
    let path = path_contraction(&repaired, checker);
    Ok(checker.path_free(&path).then_some(path))
}

#[allow(clippy::too_many_arguments)]
fn repair<S: DeltaSampler>(
    problem: &PlanningProblem,
    sampler: &S,
    ctx: &S::Context,
    path: &[Config],
    replan: &ReplanSettings,
    settings: &NeuralSettings,
    checker: &CollisionChecker<'_>,
    stats: &mut PlanStats,
    rng: &mut dyn RngCore,
) -> Result<Option<Vec<Config>>> {
    // Colliding waypoints cannot anchor a repair; drop them first.
    let last = path.len() - 1;
    let nodes: Vec<&Config> = path
        .iter()
        .enumerate()
        .filter(|&(i, q)| i == 0 || i == last || !checker.in_collision(q))
        .map(|(_, q)| q)
        .collect();
    let inner = NeuralSettings {
        steps: replan.neural_steps,
        replan: None,
        ..*settings
    };
    let mut out = vec![nodes[0].clone()];
    for w in nodes.windows(2) {
        if checker.edge_free(w[0], w[1]) {
            out.push(w[1].clone());
            continue;
        }
        let sub = problem.with_endpoints(w[0].clone(), w[1].clone())?;
        let mut segment = solve(&sub, sampler, ctx, &inner, checker, stats, rng)?;
        if segment.is_none() {
            let r = birrt_plan(&sub, &replan.fallback, &mut &mut *rng);
            stats.collision_checks += r.stats.collision_checks;
            segment = r.path;
        }
        let Some(segment) = segment else {
            return Ok(None);
        };
        out.extend(segment.into_iter().skip(1));
    }
    Ok(Some(out))
}

/// Neural bidirectional planning with lazy contraction and replanning.
pub fn neural_plan<S: DeltaSampler, R: RngCore>(
    problem: &PlanningProblem,
    sampler: &S,
    settings: &NeuralSettings,
    rng: &mut R,
) -> Result<PlanResult> {
    check_problem_dof(problem, sampler.dof())?;
    let ctx = sampler.prepare(problem, rng)?;
    let clock = Clock::start(Budget::Seconds(f64::INFINITY));
    let checker = CollisionChecker::new(&problem.chain, &problem.scene, settings.resolution);
    let mut stats = PlanStats::default();
    let path = solve(problem, sampler, &ctx, settings, &checker, &mut stats, rng)?;
    stats.collision_checks += checker.checks();
    Ok(PlanResult::finish(path, clock.elapsed(), stats))
}

/// Repairs every colliding edge of `path`: a short neural attempt first,
/// then Bi-RRT. Returns `None` when any segment cannot be planned.
pub fn replanning<S: DeltaSampler, R: RngCore>(
    path: &[Config],
    sampler: &S,
    problem: &PlanningProblem,
    settings: &NeuralSettings,
    rng: &mut R,
) -> Result<Option<Vec<Config>>> {
    check_problem_dof(problem, sampler.dof())?;
    if path.is_empty() {
        return Err(PlannerError::Parameter("empty path".into()));
    }
    let replan = settings.replan.ok_or_else(|| PlannerError::Parameter("replanning disabled".into()))?;
    let ctx = sampler.prepare(problem, rng)?;
    let checker = CollisionChecker::new(&problem.chain, &problem.scene, settings.resolution);
    if checker.path_free(path) {
        return Ok(Some(path.to_vec()));
    }
    let mut stats = PlanStats::default();
    repair(problem, sampler, &ctx, path, &replan, settings, &checker, &mut stats, rng)
}
