//! Versioned JSON description of a chain and its scene.
//!
//! ```json
//! {
//!   "version": 1,
//!   "chain": {
//!     "joints": [
//!       {"axis": [0, 0, 1], "origin": [0, 0, 0], "limits": [-3.14, 3.14],
//!        "spheres": [{"center": [0.1, 0, 0], "radius": 0.05}]}
//!     ],
//!     "tip": [0.4, 0, 0]
//!   },
//!   "obstacles": [
//!     {"type": "sphere", "center": [0.5, 0.2, 0], "radius": 0.1},
//!     {"type": "box", "min": [-0.6, -0.6, -0.1], "max": [-0.4, -0.3, 0.1]}
//!   ],
//!   "bounds": {"min": [-1.2, -1.2, -0.3], "max": [1.2, 1.2, 0.3]}
//! }
//! ```
//!
//! Unknown fields anywhere in the document are rejected.

use serde::{Deserialize, Serialize};

use super::chain::{Joint, KinematicChain, Link, Sphere};
use super::scene::{Aabb, Obstacle, Scene};
use super::{KinematicsError, Result, Vec3};

pub const DOCUMENT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDocument {
    pub version: u32,
    pub chain: ChainSpec,
    pub obstacles: Vec<ObstacleSpec>,
    pub bounds: BoundsSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub joints: Vec<JointSpec>,
    #[serde(default)]
    pub tip: Vec3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    pub axis: Vec3,
    pub origin: Vec3,
    pub limits: [f64; 2],
    pub spheres: Vec<SphereSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereSpec {
    pub center: Vec3,
    pub radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ObstacleSpec {
    Sphere { center: Vec3, radius: f64 },
    Box { min: Vec3, max: Vec3 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    pub min: Vec3,
    pub max: Vec3,
}

impl SceneDocument {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let doc: SceneDocument =
            serde_json::from_str(s).map_err(|e| KinematicsError::Document(e.to_string()))?;
        if doc.version != DOCUMENT_VERSION {
            return Err(KinematicsError::Document(format!(
                "unsupported version {} (expected {DOCUMENT_VERSION})",
                doc.version
            )));
        }
        Ok(doc)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("document serializes")
    }

    /// Parses and validates in one step.
    pub fn parse(s: &str) -> Result<(KinematicChain, Scene)> {
        Self::from_json_str(s)?.build()
    }

    pub fn build(&self) -> Result<(KinematicChain, Scene)> {
        Ok((self.build_chain()?, self.build_scene()?))
    }

    pub fn build_chain(&self) -> Result<KinematicChain> {
        let mut joints = Vec::with_capacity(self.chain.joints.len());
        let mut links = Vec::with_capacity(self.chain.joints.len());
        for j in &self.chain.joints {
            joints.push(Joint {
                axis: j.axis,
                origin: j.origin,
                lower: j.limits[0],
                upper: j.limits[1],
            });
            links.push(Link {
                spheres: j
                    .spheres
                    .iter()
                    .map(|s| Sphere {
                        center: s.center,
                        radius: s.radius,
                    })
                    .collect(),
            });
        }
        KinematicChain::new(joints, links, self.chain.tip)
    }

    pub fn build_scene(&self) -> Result<Scene> {
        let bounds = Aabb::new(self.bounds.min, self.bounds.max)?;
        let obstacles = self
            .obstacles
            .iter()
            .map(|o| match *o {
                ObstacleSpec::Sphere { center, radius } => Ok(Obstacle::Sphere(Sphere { center, radius })),
                ObstacleSpec::Box { min, max } => Aabb::new(min, max).map(Obstacle::Box),
            })
            .collect::<Result<Vec<_>>>()?;
        Scene::new(obstacles, bounds)
    }

    pub fn from_parts(chain: &KinematicChain, scene: &Scene) -> Self {
        let joints = chain
            .joints()
            .iter()
            .zip(chain.links())
            .map(|(j, l)| JointSpec {
                axis: j.axis,
                origin: j.origin,
                limits: [j.lower, j.upper],
                spheres: l
                    .spheres
                    .iter()
                    .map(|s| SphereSpec {
                        center: s.center,
                        radius: s.radius,
                    })
                    .collect(),
            })
            .collect();
        let obstacles = scene
            .obstacles()
            .iter()
            .map(|o| match o {
                Obstacle::Sphere(s) => ObstacleSpec::Sphere {
                    center: s.center,
                    radius: s.radius,
                },
                Obstacle::Box(b) => ObstacleSpec::Box { min: b.min, max: b.max },
            })
            .collect();
        let b = scene.bounds();
        Self {
            version: DOCUMENT_VERSION,
            chain: ChainSpec {
                joints,
                tip: chain.tip(),
            },
            obstacles,
            bounds: BoundsSpec { min: b.min, max: b.max },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::presets;
    use super::*;

    const SAMPLE: &str = r#"{
      "version": 1,
      "chain": {
        "joints": [
          {"axis": [0, 0, 1], "origin": [0, 0, 0], "limits": [-3.14, 3.14],
           "spheres": [{"center": [0.1, 0, 0], "radius": 0.05}]},
          {"axis": [0, 0, 2], "origin": [0.5, 0, 0], "limits": [-3.14, 3.14],
           "spheres": [{"center": [0.1, 0, 0], "radius": 0.05}]}
        ],
        "tip": [0.4, 0, 0]
      },
      "obstacles": [
        {"type": "sphere", "center": [0.5, 0.2, 0], "radius": 0.1},
        {"type": "box", "min": [-0.6, -0.6, -0.1], "max": [-0.4, -0.3, 0.1]}
      ],
      "bounds": {"min": [-1.2, -1.2, -0.3], "max": [1.2, 1.2, 0.3]}
    }"#;

    #[test]
    fn parses_sample_document() {
        let (chain, scene) = SceneDocument::parse(SAMPLE).unwrap();
        assert_eq!(chain.dof(), 2);
        assert_eq!(chain.joints()[1].axis, [0.0, 0.0, 1.0]);
        assert_eq!(scene.obstacles().len(), 2);
    }

    #[test]
    fn unknown_fields_rejected() {
        let extra_top = SAMPLE.replacen("\"version\": 1,", "\"version\": 1, \"colour\": 3,", 1);
        assert!(SceneDocument::parse(&extra_top).is_err());
        let extra_obstacle = SAMPLE.replacen("\"radius\": 0.1}", "\"radius\": 0.1, \"mass\": 2}", 1);
        assert!(SceneDocument::parse(&extra_obstacle).is_err());
        let extra_joint = SAMPLE.replacen("\"limits\"", "\"damping\": 1, \"limits\"", 1);
        assert!(SceneDocument::parse(&extra_joint).is_err());
    }

    #[test]
    fn wrong_version_rejected() {
        let v2 = SAMPLE.replacen("\"version\": 1", "\"version\": 2", 1);
        assert!(matches!(
            SceneDocument::parse(&v2),
            Err(KinematicsError::Document(_))
        ));
    }

    #[test]
    fn geometry_validated() {
        let outside = SAMPLE.replacen("[0.5, 0.2, 0], \"radius\": 0.1", "[1.15, 0.2, 0], \"radius\": 0.1", 1);
        assert!(matches!(
            SceneDocument::parse(&outside),
            Err(KinematicsError::Geometry(_))
        ));
    }

    #[test]
    fn roundtrip_through_parts() {
        let chain = presets::planar_2dof();
        let scene = Scene::empty(presets::planar_bounds());
        let doc = SceneDocument::from_parts(&chain, &scene);
        let (c2, s2) = SceneDocument::parse(&doc.to_json_string()).unwrap();
        assert_eq!(c2, chain);
        assert_eq!(s2, scene);
    }
}
