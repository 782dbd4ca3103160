//! Randomized planar scene families and problem sampling.
//!
//! Four families for the planar arms, loosely after common manipulation
//! benchmarks: an open table with one or two objects, a wall with a narrow
//! gap, cluttered bins, and a shelf slot. Obstacles stay out of a disc
//! around the base so the arm always has collision-free configurations.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::kinematics::{
    presets, Aabb, CollisionChecker, Config, KinematicChain, Obstacle, PlanningProblem, Scene, Sphere, Vec3,
};
use crate::planners::uniform_config;

/// Obstacles never reach inside this radius around the base.
pub const BASE_CLEARANCE: f64 = 0.3;
const HALF_THICKNESS: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneFamily {
    Table,
    NarrowGap,
    Bins,
    Shelf,
}

impl SceneFamily {
    pub const ALL: [SceneFamily; 4] = [
        SceneFamily::Table,
        SceneFamily::NarrowGap,
        SceneFamily::Bins,
        SceneFamily::Shelf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SceneFamily::Table => "table",
            SceneFamily::NarrowGap => "narrow_gap",
            SceneFamily::Bins => "bins",
            SceneFamily::Shelf => "shelf",
        }
    }
}

impl fmt::Display for SceneFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SceneFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        SceneFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown scene family {s:?}"))
    }
}

/// Rotates the planar point by a multiple of a quarter turn.
fn quarter_turn(p: [f64; 2], k: usize) -> [f64; 2] {
    match k % 4 {
        0 => p,
        1 => [-p[1], p[0]],
        2 => [-p[0], -p[1]],
        _ => [p[1], -p[0]],
    }
}

/// Axis-aligned box from planar corners, rotated by `k` quarter turns.
fn planar_box(a: [f64; 2], b: [f64; 2], k: usize) -> Obstacle {
    let (a, b) = (quarter_turn(a, k), quarter_turn(b, k));
    Obstacle::Box(Aabb {
        min: [a[0].min(b[0]), a[1].min(b[1]), -HALF_THICKNESS],
        max: [a[0].max(b[0]), a[1].max(b[1]), HALF_THICKNESS],
    })
}

fn polar(r: f64, theta: f64) -> Vec3 {
    [r * theta.cos(), r * theta.sin(), 0.0]
}

fn random_object(rng: &mut impl Rng, r_min: f64, r_max: f64) -> Obstacle {
    let c = polar(rng.gen_range(r_min..r_max), rng.gen_range(-PI..PI));
    if rng.gen::<bool>() {
        Obstacle::Sphere(Sphere {
            center: c,
            radius: rng.gen_range(0.07..0.13),
        })
    } else {
        let (hx, hy) = (rng.gen_range(0.05..0.11), rng.gen_range(0.05..0.11));
        Obstacle::Box(Aabb {
            min: [c[0] - hx, c[1] - hy, -HALF_THICKNESS],
            max: [c[0] + hx, c[1] + hy, HALF_THICKNESS],
        })
    }
}

fn clears_base(o: &Obstacle) -> bool {
    !o.intersects_sphere(&Sphere {
        center: [0.0; 3],
        radius: BASE_CLEARANCE,
    })
}

/// One random scene of `family` inside the planar workspace bounds.
pub fn generate_scene(family: SceneFamily, rng: &mut impl Rng) -> Scene {
    let bounds = presets::planar_bounds();
    loop {
        let k = rng.gen_range(0..4);
        let obstacles: Vec<Obstacle> = match family {
            SceneFamily::Table => (0..rng.gen_range(1..=2)).map(|_| random_object(rng, 0.45, 0.85)).collect(),
            SceneFamily::NarrowGap => {
                let gap_at = rng.gen_range(0.5..0.75);
                let gap = rng.gen_range(0.22..0.3);
                let w = 0.04;
                vec![
                    planar_box([0.32, -w], [gap_at - gap / 2.0, w], k),
                    planar_box([gap_at + gap / 2.0, -w], [1.1, w], k),
                ]
            }
            SceneFamily::Bins => (0..rng.gen_range(3..=5)).map(|_| random_object(rng, 0.4, 0.95)).collect(),
            SceneFamily::Shelf => {
                let center = rng.gen_range(-0.15..0.15);
                let half = rng.gen_range(0.14..0.2);
                let depth = rng.gen_range(0.45..0.6);
                let t = 0.04;
                vec![
                    planar_box([depth, center + half], [1.1, center + half + t], k),
                    planar_box([depth, center - half - t], [1.1, center - half], k),
                    planar_box([1.0, center - half - t], [1.1, center + half + t], k),
                ]
            }
        };
        if obstacles.iter().all(clears_base) {
            if let Ok(scene) = Scene::new(obstacles, bounds) {
                return scene;
            }
        }
    }
}

/// Draws a valid problem: both endpoints collision-free, at least
/// `min_distance` apart and, when `require_blocked`, with a colliding
/// straight edge. Gives up after `tries` draws.
pub fn sample_problem(
    chain: &Arc<KinematicChain>,
    scene: &Arc<Scene>,
    min_distance: f64,
    require_blocked: bool,
    resolution: f64,
    tries: usize,
    rng: &mut impl Rng,
) -> Option<PlanningProblem> {
    let checker = CollisionChecker::new(chain, scene, resolution);
    for _ in 0..tries {
        let s = uniform_config(chain, rng);
        let g = uniform_config(chain, rng);
        if s.distance(&g) < min_distance || checker.in_collision(&s) || checker.in_collision(&g) {
            continue;
        }
        if require_blocked && checker.edge_free(&s, &g) {
            continue;
        }
        return PlanningProblem::new(chain.clone(), scene.clone(), s, g).ok();
    }
    None
}

/// Configuration with the first joint at `angle` and the rest zero.
pub fn pointing(chain: &KinematicChain, angle: f64) -> Config {
    let mut q = vec![0.0; chain.dof()];
    q[0] = angle;
    Config(q)
}

/// Quarter-turn multiples used by the families, exposed for tests.
pub const QUARTER: f64 = FRAC_PI_2;
