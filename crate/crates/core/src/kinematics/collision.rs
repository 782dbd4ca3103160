use std::cell::Cell;

use super::chain::{Config, KinematicChain, Pose};
use super::scene::{dist2, Scene};
use super::Result;

/// Collision queries against one chain and scene, counting every
/// configuration tested.
pub struct CollisionChecker<'a> {
    chain: &'a KinematicChain,
    scene: &'a Scene,
    resolution: f64,
    checks: Cell<u64>,
}

impl<'a> CollisionChecker<'a> {
    pub fn new(chain: &'a KinematicChain, scene: &'a Scene, resolution: f64) -> Self {
        assert!(resolution > 0.0, "edge resolution must be positive");
        Self {
            chain,
            scene,
            resolution,
            checks: Cell::new(0),
        }
    }

    pub fn chain(&self) -> &'a KinematicChain {
        self.chain
    }

    pub fn scene(&self) -> &'a Scene {
        self.scene
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    /// Configurations tested so far.
    pub fn checks(&self) -> u64 {
        self.checks.get()
    }

    /// `q` must be within limits; use [`in_collision`] for validated input.
    pub fn in_collision(&self, q: &[f64]) -> bool {
        debug_assert!(self.chain.check_config(q).is_ok());
        self.checks.set(self.checks.get() + 1);
        let poses = self.chain.fk_unchecked(q);
        collides_at(self.chain, self.scene, &poses)
    }

    /// Checks interpolated configurations spaced at most `resolution`
    /// apart, endpoints included.
    pub fn edge_free(&self, a: &[f64], b: &[f64]) -> bool {
        // A fixed orientation makes the result independent of argument order.
        let (a, b) = if a.partial_cmp(b) == Some(std::cmp::Ordering::Greater) {
            (b, a)
        } else {
            (a, b)
        };
        if self.in_collision(a) || self.in_collision(b) {
            return false;
        }
        let d = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        let segments = (d / self.resolution).ceil() as usize;
        let mut q = vec![0.0; a.len()];
        for k in 1..segments {
            let t = k as f64 / segments as f64;
            for (i, v) in q.iter_mut().enumerate() {
                *v = a[i] + t * (b[i] - a[i]);
            }
            if self.in_collision(&q) {
                return false;
            }
        }
        true
    }

    /// Every consecutive edge of `path` is collision-free.
    pub fn path_free(&self, path: &[Config]) -> bool {
        match path {
            [] => true,
            [q] => !self.in_collision(q),
            _ => path.windows(2).all(|w| self.edge_free(&w[0], &w[1])),
        }
    }
}

fn collides_at(chain: &KinematicChain, scene: &Scene, poses: &[Pose]) -> bool {
    let spheres = chain.spheres_at(poses);
    for (_, s) in &spheres {
        if scene.obstacles().iter().any(|o| o.intersects_sphere(s)) {
            return true;
        }
    }
    // self-collision only between links at least two joints apart
    for (i, (li, a)) in spheres.iter().enumerate() {
        for (lj, b) in &spheres[i + 1..] {
            if lj.abs_diff(*li) >= 2 {
                let r = a.radius + b.radius;
                if dist2(&a.center, &b.center) < r * r {
                    return true;
                }
            }
        }
    }
    false
}

/// Whether any link sphere overlaps an obstacle or a link two or more
/// joints away.
pub fn in_collision(chain: &KinematicChain, scene: &Scene, q: &[f64]) -> Result<bool> {
    let poses = chain.forward_kinematics(q)?;
    Ok(collides_at(chain, scene, &poses))
}

pub fn edge_collision_free(
    chain: &KinematicChain,
    scene: &Scene,
    qa: &[f64],
    qb: &[f64],
    resolution: f64,
) -> Result<bool> {
    chain.check_config(qa)?;
    chain.check_config(qb)?;
    Ok(CollisionChecker::new(chain, scene, resolution).edge_free(qa, qb))
}
