use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{steer, uniform_config, Clock, PlanResult, PlanStats, PlannerError, PlannerSettings, Result, Tree};
use crate::kinematics::{CollisionChecker, Config, KinematicChain, PlanningProblem};

/// Rejection attempts before an informed sample falls back to uniform.
const INFORMED_TRIES: usize = 1000;

fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / d as f64 * unit_ball_volume(d - 2),
    }
}

/// `2 (1 + 1/d)^(1/d) (mu / zeta_d)^(1/d)` with `mu` the joint-box volume,
/// capped at the joint-box diagonal.
pub fn rrt_star_gamma(chain: &KinematicChain) -> f64 {
    let d = chain.dof() as f64;
    let spans: Vec<f64> = chain.joints().iter().map(|j| j.upper - j.lower).collect();
    let mu: f64 = spans.iter().product();
    let gamma = 2.0 * (1.0 + 1.0 / d).powf(1.0 / d) * (mu / unit_ball_volume(chain.dof())).powf(1.0 / d);
    let diagonal = spans.iter().map(|s| s * s).sum::<f64>().sqrt();
    gamma.min(diagonal)
}

fn within_limits(chain: &KinematicChain, q: &[f64]) -> bool {
    chain.joints().iter().zip(q).all(|(j, v)| (j.lower..=j.upper).contains(v))
}

/// Uniform sample from the prolate hyperspheroid with foci `q_start`,
/// `q_goal` and transverse diameter `c_best`, rejected until it lies within
/// joint limits. The unit-ball sample is scaled, mapped onto the focal axis
/// by a Householder reflection (the scaled ball is symmetric, so a
/// reflection serves as well as a rotation) and translated to the centre.
pub fn informed_sample(
    chain: &KinematicChain,
    q_start: &Config,
    q_goal: &Config,
    c_best: f64,
    rng: &mut impl Rng,
) -> Result<Config> {
    let n = q_start.len();
    let c_min = q_start.distance(q_goal);
    if !(c_best >= c_min) {
        return Err(PlannerError::Parameter(format!(
            "c_best {c_best} below the focal distance {c_min}"
        )));
    }
    let center: Vec<f64> = q_start.iter().zip(q_goal.iter()).map(|(a, b)| 0.5 * (a + b)).collect();
    let r1 = 0.5 * c_best;
    let r2 = 0.5 * (c_best * c_best - c_min * c_min).max(0.0).sqrt();
    // Householder vector taking e1 to the focal direction.
    let mut v = vec![0.0; n];
    if c_min > 0.0 {
        for i in 0..n {
            v[i] = -(q_goal[i] - q_start[i]) / c_min;
        }
        v[0] += 1.0;
    }
    let vv: f64 = v.iter().map(|x| x * x).sum();
    for _ in 0..INFORMED_TRIES {
        let mut x: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        let radius = rng.gen::<f64>().powf(1.0 / n as f64);
        for (i, xi) in x.iter_mut().enumerate() {
            *xi *= radius / norm * if i == 0 { r1 } else { r2 };
        }
        if vv > 1e-24 {
            let dot: f64 = v.iter().zip(&x).map(|(a, b)| a * b).sum();
            for (xi, vi) in x.iter_mut().zip(&v) {
                *xi -= 2.0 * dot / vv * vi;
            }
        }
        let q: Vec<f64> = x.iter().zip(&center).map(|(a, c)| a + c).collect();
        if within_limits(chain, &q) {
            return Ok(Config(q));
        }
    }
    Ok(uniform_config(chain, rng))
}

fn plan(problem: &PlanningProblem, settings: &PlannerSettings, informed: bool, rng: &mut impl Rng) -> PlanResult {
    let clock = Clock::start(settings.budget);
    let chain = &*problem.chain;
    let checker = CollisionChecker::new(chain, &problem.scene, settings.resolution);
    let mut stats = PlanStats::default();
    if problem.q_start == problem.q_goal {
        return PlanResult::finish(Some(vec![problem.q_start.clone()]), clock.elapsed(), stats);
    }
    let gamma = rrt_star_gamma(chain);
    let d = chain.dof() as f64;
    let goal = &problem.q_goal;
    let c_min = problem.q_start.distance(goal);
    let mut tree = Tree::new(problem.q_start.clone());
    // Nodes with a collision-free straight edge to the goal.
    let mut goal_parents: Vec<usize> = Vec::new();
    let mut best = (f64::INFINITY, None::<usize>);
    let mut trace = Vec::new();

    while !clock.exhausted(&checker) {
        stats.iterations += 1;
        stats.samples += 1;
        let q_rand = if informed && best.0.is_finite() {
            informed_sample(chain, &problem.q_start, goal, best.0.max(c_min), rng).expect("c_best >= c_min")
        } else {
            uniform_config(chain, rng)
        };
        let nearest = tree.nearest(&q_rand);
        let q_new = steer(tree.node(nearest), &q_rand, settings.step_size);
        if checker.edge_free(tree.node(nearest), &q_new) {
            let n = (tree.len() + 1) as f64;
            let radius = (gamma * (n.ln() / n).powf(1.0 / d)).min(4.0 * settings.step_size);
            let mut near = tree.near(&q_new, radius);
            near.sort_by(|&x, &y| {
                let cx = tree.cost(x) + tree.node(x).distance(&q_new);
                let cy = tree.cost(y) + tree.node(y).distance(&q_new);
                cx.total_cmp(&cy).then(x.cmp(&y))
            });
            // Cheapest collision-free parent; the nearest node is known free.
            let mut parent = nearest;
            let parent_cost = tree.cost(nearest) + tree.node(nearest).distance(&q_new);
            for &c in &near {
                let cost = tree.cost(c) + tree.node(c).distance(&q_new);
                if cost >= parent_cost {
                    break;
                }
                if checker.edge_free(tree.node(c), &q_new) {
                    parent = c;
                    break;
                }
            }
            let new = tree.add(q_new, parent);
            for &c in &near {
                if c == parent {
                    continue;
                }
                let via = tree.cost(new) + tree.node(new).distance(tree.node(c));
                if via < tree.cost(c) && checker.edge_free(tree.node(new), tree.node(c)) {
                    tree.reparent(c, new);
                }
            }
            if tree.node(new).distance(goal) <= settings.step_size && checker.edge_free(tree.node(new), goal) {
                goal_parents.push(new);
            }
            for &g in &goal_parents {
                let c = tree.cost(g) + tree.node(g).distance(goal);
                if c < best.0 {
                    best = (c, Some(g));
                }
            }
        }
        trace.push(best.0);
    }
    stats.collision_checks = checker.checks();
    debug_assert!(tree.costs_consistent(1e-9));
    let path = best.1.map(|g| {
        let mut p = tree.path_to(g);
        p.push(goal.clone());
        p
    });
    let mut result = PlanResult::finish(path, clock.elapsed(), stats);
    result.best_cost_trace = trace;
    result
}

/// RRT* with choose-parent and rewiring; runs until the budget is spent and
/// returns the best goal-connected path.
pub fn rrt_star_plan(problem: &PlanningProblem, settings: &PlannerSettings, rng: &mut impl Rng) -> PlanResult {
    plan(problem, settings, false, rng)
}

/// RRT* that samples the informed hyperspheroid once a solution exists.
pub fn informed_rrt_star_plan(problem: &PlanningProblem, settings: &PlannerSettings, rng: &mut impl Rng) -> PlanResult {
    plan(problem, settings, true, rng)
}
