//! Demonstration oracle: grid search for low-DOF chains, Bi-RRT with
//! shortcutting otherwise.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;

use super::{Result, TrainingError};
use crate::kinematics::{CollisionChecker, Config, PlanningProblem};
use crate::planners::{birrt_plan, path_contraction, path_cost, shortcut, validate_path, Budget, PlannerSettings};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleSettings {
    /// Grid search is used up to this many joints.
    pub grid_max_dof: usize,
    /// Nodes per joint; `None` picks 64 for two joints and 32 above.
    pub grid_nodes: Option<usize>,
    pub resolution: f64,
    /// Sampling-based fallback for chains beyond `grid_max_dof`.
    pub birrt: PlannerSettings,
    pub shortcut_iterations: usize,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            grid_max_dof: 3,
            grid_nodes: None,
            resolution: crate::planners::DEFAULT_RESOLUTION,
            birrt: PlannerSettings {
                budget: Budget::Checks(200_000),
                ..PlannerSettings::default()
            },
            shortcut_iterations: 200,
        }
    }
}

impl OracleSettings {
    fn nodes_per_joint(&self, dof: usize) -> usize {
        self.grid_nodes.unwrap_or(if dof <= 2 { 64 } else { 32 })
    }
}

/// Subdivides every edge into equal pieces no longer than `max_step`.
/// Original waypoints are kept bit-exact.
pub fn resample_path(path: &[Config], max_step: f64) -> Vec<Config> {
    assert!(max_step > 0.0, "step bound must be positive");
    let Some(first) = path.first() else {
        return Vec::new();
    };
    let mut out = vec![first.clone()];
    for w in path.windows(2) {
        let d = w[0].distance(&w[1]);
        let pieces = ((d / max_step) * (1.0 + 1e-12)).ceil().max(1.0) as usize;
        for k in 1..pieces {
            out.push(w[0].lerp(&w[1], k as f64 / pieces as f64));
        }
        out.push(w[1].clone());
    }
    out
}

/// Pulls the path taut around obstacles: repeated rounds of dense
/// resampling, greedy contraction in both directions and random
/// shortcutting, until a round no longer shortens it.
fn tighten(path: Vec<Config>, checker: &CollisionChecker<'_>, rounds: usize, rng: &mut impl Rng) -> Vec<Config> {
    let step = 2.0 * checker.resolution();
    let mut p = path_contraction(&path, checker);
    for _ in 0..rounds {
        let forward = path_contraction(&resample_path(&p, step), checker);
        let mut back: Vec<Config> = resample_path(&forward, step).into_iter().rev().collect();
        back = path_contraction(&back, checker);
        back.reverse();
        let next = path_contraction(&shortcut(&resample_path(&back, step), checker, 200, rng), checker);
        if !checker.path_free(&next) || path_cost(&next) >= path_cost(&p) - 1e-12 {
            break;
        }
        p = next;
    }
    p
}

/// Shortest path on a regular joint grid. Nodes differ by one step in at
/// most two coordinates; colliding nodes are excluded up front and edges are
/// checked lazily when they would improve a distance. The start and goal
/// attach to the corners of their cells, and a free direct edge is always
/// considered.
pub fn grid_search(problem: &PlanningProblem, nodes: usize, checker: &CollisionChecker<'_>) -> Option<Vec<Config>> {
    assert!(nodes >= 2, "grid needs two nodes per joint");
    let chain = &*problem.chain;
    let dof = chain.dof();
    let lower = chain.lower_limits();
    let upper = chain.upper_limits();
    let spacing: Vec<f64> = lower.iter().zip(&upper).map(|(l, u)| (u - l) / (nodes - 1) as f64).collect();
    let total = nodes.checked_pow(dof as u32)?;
    let coords = |mut id: usize| -> Vec<usize> {
        let mut c = vec![0; dof];
        for slot in c.iter_mut() {
            *slot = id % nodes;
            id /= nodes;
        }
        c
    };
    let index = |c: &[usize]| c.iter().rev().fold(0, |acc, &x| acc * nodes + x);
    let config = |c: &[usize]| Config(c.iter().enumerate().map(|(i, &k)| (lower[i] + spacing[i] * k as f64).min(upper[i])).collect());
    let free: Vec<bool> = (0..total).map(|id| !checker.in_collision(&config(&coords(id)))).collect();

    // Neighbour offsets: one or two coordinates change by one.
    let mut offsets: Vec<Vec<i64>> = Vec::new();
    for i in 0..dof {
        for si in [-1i64, 1] {
            let mut o = vec![0; dof];
            o[i] = si;
            offsets.push(o.clone());
            for j in i + 1..dof {
                for sj in [-1i64, 1] {
                    let mut o2 = o.clone();
                    o2[j] = sj;
                    offsets.push(o2);
                }
            }
        }
    }

    let cell_corners = |q: &Config| -> Vec<usize> {
        let base: Vec<usize> = (0..dof)
            .map(|i| (((q[i] - lower[i]) / spacing[i]).floor().max(0.0) as usize).min(nodes - 2))
            .collect();
        (0..1usize << dof)
            .map(|mask| {
                let c: Vec<usize> = (0..dof).map(|i| base[i] + ((mask >> i) & 1)).collect();
                index(&c)
            })
            .collect()
    };

    let start = &problem.q_start;
    let goal = &problem.q_goal;
    let mut best: (f64, Option<usize>) = (f64::INFINITY, None);
    if checker.edge_free(start, goal) {
        best = (start.distance(goal), None);
    }
    let mut goal_links: Vec<(usize, f64)> = Vec::new();
    for id in cell_corners(goal) {
        let c = config(&coords(id));
        if free[id] && checker.edge_free(&c, goal) {
            goal_links.push((id, c.distance(goal)));
        }
    }
    let mut dist = vec![f64::INFINITY; total];
    let mut parent = vec![usize::MAX; total];
    let mut heap = BinaryHeap::new();
    // Sentinel parent for nodes attached directly to the start.
    const FROM_START: usize = usize::MAX - 1;
    for id in cell_corners(start) {
        let c = config(&coords(id));
        if free[id] && checker.edge_free(start, &c) {
            let d = start.distance(&c);
            if d < dist[id] {
                dist[id] = d;
                parent[id] = FROM_START;
                heap.push(Reverse((Ordered(d), id)));
            }
        }
    }
    let mut done = vec![false; total];
    while let Some(Reverse((d, u))) = heap.pop() {
        let d = d.0;
        if done[u] || d > dist[u] {
            continue;
        }
        if d >= best.0 {
            break;
        }
        done[u] = true;
        if let Some(&(_, link)) = goal_links.iter().find(|(id, _)| *id == u) {
            if d + link < best.0 {
                best = (d + link, Some(u));
            }
        }
        let cu = coords(u);
        let qu = config(&cu);
        for o in &offsets {
            let mut cv = Vec::with_capacity(dof);
            let mut inside = true;
            for (a, b) in cu.iter().zip(o) {
                let x = *a as i64 + b;
                if x < 0 || x >= nodes as i64 {
                    inside = false;
                    break;
                }
                cv.push(x as usize);
            }
            if !inside {
                continue;
            }
            let v = index(&cv);
            if !free[v] || done[v] {
                continue;
            }
            let qv = config(&cv);
            let nd = d + qu.distance(&qv);
            if nd < dist[v] && checker.edge_free(&qu, &qv) {
                dist[v] = nd;
                parent[v] = u;
                heap.push(Reverse((Ordered(nd), v)));
            }
        }
    }
    if !best.0.is_finite() {
        return None;
    }
    let mut path = vec![goal.clone()];
    if let Some(mut u) = best.1 {
        while u != FROM_START {
            path.push(config(&coords(u)));
            u = parent[u];
        }
    }
    path.push(start.clone());
    path.reverse();
    Some(path)
}

#[derive(Clone, Copy, Debug)]
struct Ordered(f64);

impl PartialEq for Ordered {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for Ordered {}

impl PartialOrd for Ordered {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ordered {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Near-optimal demonstration for `problem`. Start equal to goal yields the
/// single-configuration path. The result is re-validated edge by edge with
/// a fresh checker before it is returned.
pub fn generate_oracle_path(
    problem: &PlanningProblem,
    settings: &OracleSettings,
    rng: &mut impl Rng,
) -> Result<Vec<Config>> {
    let checker = CollisionChecker::new(&problem.chain, &problem.scene, settings.resolution);
    if checker.in_collision(&problem.q_start) || checker.in_collision(&problem.q_goal) {
        return Err(TrainingError::Oracle("endpoint in collision".into()));
    }
    if problem.q_start == problem.q_goal {
        return Ok(vec![problem.q_start.clone()]);
    }
    let dof = problem.dof();
    let path = if dof <= settings.grid_max_dof {
        let raw = grid_search(problem, settings.nodes_per_joint(dof), &checker)
            .ok_or_else(|| TrainingError::Oracle("no grid path".into()))?;
        tighten(raw, &checker, 8, rng)
    } else {
        let r = birrt_plan(problem, &settings.birrt, rng);
        let raw = r.path.ok_or_else(|| TrainingError::Oracle("Bi-RRT found no path within budget".into()))?;
        shortcut(&raw, &checker, settings.shortcut_iterations, rng)
    };
    validate_path(problem, &path, settings.resolution).map_err(TrainingError::Oracle)?;
    Ok(path)
}
