use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use super::{norm, KinematicsError, Result, Vec3};

/// Joint-space point, radians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Config(pub Vec<f64>);

impl Config {
    pub fn new(q: Vec<f64>) -> Self {
        Self(q)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn distance(&self, other: &Config) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// `self + t (other - self)`.
    pub fn lerp(&self, other: &Config, t: f64) -> Config {
        Config(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + t * (b - a))
                .collect(),
        )
    }

    pub fn add(&self, delta: &[f64]) -> Config {
        Config(self.0.iter().zip(delta).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Config) -> Vec<f64> {
        self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()
    }
}

impl Deref for Config {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Config {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for Config {
    fn from(q: Vec<f64>) -> Self {
        Self(q)
    }
}

/// Rigid transform.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub rotation: [[f64; 3]; 3],
    pub translation: Vec3,
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        translation: [0.0; 3],
    };

    pub fn translation(t: Vec3) -> Pose {
        Pose {
            translation: t,
            ..Pose::IDENTITY
        }
    }

    /// Rotation by `angle` about the unit `axis` (Rodrigues).
    pub fn rotation(axis: Vec3, angle: f64) -> Pose {
        let [x, y, z] = axis;
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        Pose {
            rotation: [
                [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
                [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
                [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
            ],
            translation: [0.0; 3],
        }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Pose) -> Pose {
        let mut r = [[0.0; 3]; 3];
        for (i, row) in r.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.rotation[i][k] * other.rotation[k][j]).sum();
            }
        }
        Pose {
            rotation: r,
            translation: self.apply(&other.translation),
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        let mut out = self.translation;
        for (i, o) in out.iter_mut().enumerate() {
            *o += (0..3).map(|k| self.rotation[i][k] * p[k]).sum::<f64>();
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sphere {
    pub center: Vec3,
    pub radius: f64,
}

impl Sphere {
    pub fn area(&self) -> f64 {
        4.0 * std::f64::consts::PI * self.radius * self.radius
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Joint {
    /// Unit rotation axis in the parent frame.
    pub axis: Vec3,
    /// Offset from the parent link frame to this joint.
    pub origin: Vec3,
    pub lower: f64,
    pub upper: f64,
}

/// Collision geometry of the link driven by the joint with the same index.
#[derive(Clone, Debug, PartialEq)]
pub struct Link {
    pub spheres: Vec<Sphere>,
}

impl Link {
    pub fn area(&self) -> f64 {
        self.spheres.iter().map(Sphere::area).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KinematicChain {
    joints: Vec<Joint>,
    links: Vec<Link>,
    tip: Vec3,
}

impl KinematicChain {
    pub fn new(joints: Vec<Joint>, links: Vec<Link>, tip: Vec3) -> Result<Self> {
        if joints.is_empty() {
            return Err(KinematicsError::Geometry("chain needs at least one joint".into()));
        }
        if joints.len() != links.len() {
            return Err(KinematicsError::Geometry(format!(
                "{} joints but {} links",
                joints.len(),
                links.len()
            )));
        }
        let mut joints = joints;
        for (i, j) in joints.iter_mut().enumerate() {
            let n = norm(&j.axis);
            if !(n.is_finite() && n > 1e-12) {
                return Err(KinematicsError::Geometry(format!("joint {i} has a zero axis")));
            }
            j.axis = [j.axis[0] / n, j.axis[1] / n, j.axis[2] / n];
            if !(j.lower.is_finite() && j.upper.is_finite() && j.lower < j.upper) {
                return Err(KinematicsError::Geometry(format!(
                    "joint {i} limits [{}, {}] are empty",
                    j.lower, j.upper
                )));
            }
            if j.origin.iter().any(|v| !v.is_finite()) {
                return Err(KinematicsError::Geometry(format!("joint {i} origin not finite")));
            }
        }
        for (i, l) in links.iter().enumerate() {
            if l.spheres.is_empty() {
                return Err(KinematicsError::Geometry(format!("link {i} has no spheres")));
            }
            for s in &l.spheres {
                if !(s.radius > 0.0 && s.radius.is_finite()) || s.center.iter().any(|v| !v.is_finite()) {
                    return Err(KinematicsError::Geometry(format!(
                        "link {i} sphere radius {} invalid",
                        s.radius
                    )));
                }
            }
        }
        if tip.iter().any(|v| !v.is_finite()) {
            return Err(KinematicsError::Geometry("tip offset not finite".into()));
        }
        Ok(Self { joints, links, tip })
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn tip(&self) -> Vec3 {
        self.tip
    }

    pub fn lower_limits(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.lower).collect()
    }

    pub fn upper_limits(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.upper).collect()
    }

    pub fn check_config(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dof() {
            return Err(KinematicsError::DofMismatch {
                expected: self.dof(),
                got: q.len(),
            });
        }
        for (i, (v, j)) in q.iter().zip(&self.joints).enumerate() {
            if !(v.is_finite() && *v >= j.lower - 1e-12 && *v <= j.upper + 1e-12) {
                return Err(KinematicsError::OutOfLimits {
                    joint: i,
                    value: *v,
                    lower: j.lower,
                    upper: j.upper,
                });
            }
        }
        Ok(())
    }

    pub fn clamp(&self, q: &mut [f64]) {
        for (v, j) in q.iter_mut().zip(&self.joints) {
            *v = v.clamp(j.lower, j.upper);
        }
    }

    /// World pose of every link frame.
    pub fn forward_kinematics(&self, q: &[f64]) -> Result<Vec<Pose>> {
        self.check_config(q)?;
        Ok(self.fk_unchecked(q))
    }

    pub(crate) fn fk_unchecked(&self, q: &[f64]) -> Vec<Pose> {
        let mut poses = Vec::with_capacity(self.dof());
        let mut current = Pose::IDENTITY;
        for (j, &angle) in self.joints.iter().zip(q) {
            current = current
                .compose(&Pose::translation(j.origin))
                .compose(&Pose::rotation(j.axis, angle));
            poses.push(current);
        }
        poses
    }

    /// Poses at the zero configuration.
    pub fn home_poses(&self) -> Vec<Pose> {
        self.fk_unchecked(&vec![0.0; self.dof()])
    }

    pub fn end_effector(&self, q: &[f64]) -> Result<Vec3> {
        let poses = self.forward_kinematics(q)?;
        Ok(poses.last().expect("non-empty chain").apply(&self.tip))
    }

    /// Link spheres transformed to world coordinates, with link index.
    pub fn world_spheres(&self, q: &[f64]) -> Result<Vec<(usize, Sphere)>> {
        let poses = self.forward_kinematics(q)?;
        Ok(self.spheres_at(&poses))
    }

    pub(crate) fn spheres_at(&self, poses: &[Pose]) -> Vec<(usize, Sphere)> {
        let mut out = Vec::new();
        for (i, (link, pose)) in self.links.iter().zip(poses).enumerate() {
            for s in &link.spheres {
                out.push((
                    i,
                    Sphere {
                        center: pose.apply(&s.center),
                        radius: s.radius,
                    },
                ));
            }
        }
        out
    }

    /// Stable digest of the chain geometry, used to tie datasets and
    /// checkpoints to an embodiment.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for (j, l) in self.joints.iter().zip(&self.links) {
            for v in j.axis.iter().chain(&j.origin).chain([&j.lower, &j.upper]) {
                h.update(v.to_le_bytes());
            }
            for s in &l.spheres {
                for v in s.center.iter().chain([&s.radius]) {
                    h.update(v.to_le_bytes());
                }
            }
        }
        for v in &self.tip {
            h.update(v.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
