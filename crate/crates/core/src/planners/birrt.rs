use rand::Rng;

use super::{steer, uniform_config, Clock, PlanResult, PlanStats, PlannerSettings, Tree};
use crate::kinematics::{CollisionChecker, Config, PlanningProblem};

enum Extend {
    Trapped,
    Advanced(usize),
    Reached(usize),
}

fn extend(tree: &mut Tree, target: &Config, step: f64, checker: &CollisionChecker<'_>) -> Extend {
    let near = tree.nearest(target);
    let q = steer(tree.node(near), target, step);
    if !checker.edge_free(tree.node(near), &q) {
        return Extend::Trapped;
    }
    let reached = &q == target;
    let id = tree.add(q, near);
    if reached {
        Extend::Reached(id)
    } else {
        Extend::Advanced(id)
    }
}

/// Bidirectional RRT with the connect heuristic: one tree extends toward a
/// uniform sample, the other greedily connects to the new node, then the
/// trees swap roles.
pub fn birrt_plan(problem: &PlanningProblem, settings: &PlannerSettings, rng: &mut impl Rng) -> PlanResult {
    let clock = Clock::start(settings.budget);
    let checker = CollisionChecker::new(&problem.chain, &problem.scene, settings.resolution);
    let mut stats = PlanStats::default();
    if problem.q_start == problem.q_goal {
        stats.collision_checks = checker.checks();
        return PlanResult::finish(Some(vec![problem.q_start.clone()]), clock.elapsed(), stats);
    }
    let mut a = Tree::new(problem.q_start.clone());
    let mut b = Tree::new(problem.q_goal.clone());
    let mut a_is_start = true;
    let mut path = None;
    while !clock.exhausted(&checker) {
        stats.iterations += 1;
        stats.samples += 1;
        let q_rand = uniform_config(&problem.chain, rng);
        if let Extend::Advanced(new) | Extend::Reached(new) = extend(&mut a, &q_rand, settings.step_size, &checker) {
            let target = a.node(new).clone();
            let joined = loop {
                match extend(&mut b, &target, settings.step_size, &checker) {
                    Extend::Advanced(_) => continue,
                    Extend::Reached(id) => break Some(id),
                    Extend::Trapped => break None,
                }
            };
            if let Some(bid) = joined {
                let mut from_a = a.path_to(new);
                let mut from_b = b.path_to(bid);
                from_b.pop();
                from_b.reverse();
                from_a.extend(from_b);
                if !a_is_start {
                    from_a.reverse();
                }
                path = Some(from_a);
                break;
            }
        }
        std::mem::swap(&mut a, &mut b);
        a_is_start = !a_is_start;
    }
    stats.collision_checks = checker.checks();
    PlanResult::finish(path, clock.elapsed(), stats)
}
