//! Built-in embodiments: planar arms with exact low-dimensional oracles and a
//! six-joint spatial chain.

use std::f64::consts::PI;

use super::chain::{Joint, KinematicChain, Link, Sphere};
use super::scene::Aabb;

/// Planar arm rotating about +z, links along the local x axis, each covered
/// by overlapping spheres of `radius` spaced `radius` apart.
pub fn planar_arm(lengths: &[f64], radius: f64, limit: f64) -> KinematicChain {
    let mut joints = Vec::new();
    let mut links = Vec::new();
    let mut offset = 0.0;
    for &len in lengths {
        joints.push(Joint {
            axis: [0.0, 0.0, 1.0],
            origin: [offset, 0.0, 0.0],
            lower: -limit,
            upper: limit,
        });
        let count = (len / radius).ceil() as usize;
        let spheres = (0..=count)
            .map(|k| Sphere {
                center: [len * k as f64 / count as f64, 0.0, 0.0],
                radius,
            })
            .collect();
        links.push(Link { spheres });
        offset = len;
    }
    let tip = [*lengths.last().expect("at least one link"), 0.0, 0.0];
    KinematicChain::new(joints, links, tip).expect("valid planar arm")
}

pub fn planar_2dof() -> KinematicChain {
    planar_arm(&[0.5, 0.4], 0.05, PI)
}

pub fn planar_3dof() -> KinematicChain {
    planar_arm(&[0.4, 0.35, 0.3], 0.04, PI)
}

/// Workspace box for the planar presets.
pub fn planar_bounds() -> Aabb {
    Aabb {
        min: [-1.2, -1.2, -0.3],
        max: [1.2, 1.2, 0.3],
    }
}

/// Six revolute joints (z, y, y, z, y, z) stacked along +z at home.
pub fn synthetic_6dof() -> KinematicChain {
    let spec: [([f64; 3], f64, f64); 6] = [
        ([0.0, 0.0, 1.0], 0.3, 2.8),
        ([0.0, 1.0, 0.0], 0.4, 2.0),
        ([0.0, 1.0, 0.0], 0.35, 2.0),
        ([0.0, 0.0, 1.0], 0.1, 2.8),
        ([0.0, 1.0, 0.0], 0.15, 2.0),
        ([0.0, 0.0, 1.0], 0.08, 2.8),
    ];
    let radius = 0.04;
    let mut joints = Vec::new();
    let mut links = Vec::new();
    let mut offset = 0.0;
    for (axis, len, limit) in spec {
        joints.push(Joint {
            axis,
            origin: [0.0, 0.0, offset],
            lower: -limit,
            upper: limit,
        });
        let count = ((len / radius).ceil() as usize).max(1);
        links.push(Link {
            spheres: (0..=count)
                .map(|k| Sphere {
                    center: [0.0, 0.0, len * k as f64 / count as f64],
                    radius,
                })
                .collect(),
        });
        offset = len;
    }
    KinematicChain::new(joints, links, [0.0, 0.0, 0.08]).expect("valid chain")
}

pub fn spatial_bounds() -> Aabb {
    Aabb {
        min: [-1.6, -1.6, -0.2],
        max: [1.6, 1.6, 1.8],
    }
}
