//! Serial revolute chains, workspace scenes, point-cloud sampling and
//! primitive-geometry collision checking.

mod chain;
mod collision;
mod document;
pub mod presets;
mod scene;

pub use chain::{Config, Joint, KinematicChain, Link, Pose, Sphere};
pub use collision::{edge_collision_free, in_collision, CollisionChecker};
pub use document::{
    BoundsSpec, ChainSpec, JointSpec, ObstacleSpec, SceneDocument, SphereSpec, DOCUMENT_VERSION,
};
pub use scene::{
    allocate_proportional, sample_robot_pointcloud, sample_scene_pointcloud, Aabb, Obstacle,
    PointCloud, Scene,
};

use std::sync::Arc;

use thiserror::Error;

pub type Vec3 = [f64; 3];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("configuration has {got} joints, chain has {expected}")]
    DofMismatch { expected: usize, got: usize },
    #[error("joint {joint} value {value} outside limits [{lower}, {upper}]")]
    OutOfLimits {
        joint: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("invalid scene document: {0}")]
    Document(String),
    #[error("invalid planning problem: {0}")]
    Problem(String),
}

pub type Result<T, E = KinematicsError> = std::result::Result<T, E>;

/// Start and goal configurations for one chain in one scene.
#[derive(Clone, Debug)]
pub struct PlanningProblem {
    pub chain: Arc<KinematicChain>,
    pub scene: Arc<Scene>,
    pub q_start: Config,
    pub q_goal: Config,
}

impl PlanningProblem {
    /// Validates limits and that both endpoints are collision-free.
    pub fn new(
        chain: Arc<KinematicChain>,
        scene: Arc<Scene>,
        q_start: Config,
        q_goal: Config,
    ) -> Result<Self> {
        for (name, q) in [("start", &q_start), ("goal", &q_goal)] {
            chain.check_config(q)?;
            if in_collision(&chain, &scene, q)? {
                return Err(KinematicsError::Problem(format!("{name} configuration in collision")));
            }
        }
        Ok(Self {
            chain,
            scene,
            q_start,
            q_goal,
        })
    }

    pub fn dof(&self) -> usize {
        self.chain.dof()
    }

    /// Same environment, different endpoints (validated).
    pub fn with_endpoints(&self, q_start: Config, q_goal: Config) -> Result<Self> {
        Self::new(self.chain.clone(), self.scene.clone(), q_start, q_goal)
    }
}

pub(crate) fn norm(v: &Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[cfg(test)]
pub(crate) fn dist3(a: &Vec3, b: &Vec3) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    norm(&d)
}
