use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::chain::{KinematicChain, Sphere};
use super::{KinematicsError, Result, Vec3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Result<Self> {
        for k in 0..3 {
            if !(min[k].is_finite() && max[k].is_finite() && min[k] <= max[k]) {
                return Err(KinematicsError::Geometry(format!(
                    "box min {min:?} exceeds max {max:?}"
                )));
            }
        }
        Ok(Self { min, max })
    }

    pub fn contains_point(&self, p: &Vec3) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        self.contains_point(&other.min) && self.contains_point(&other.max)
    }

    pub fn extent(&self) -> Vec3 {
        [
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        ]
    }

    pub fn center(&self) -> Vec3 {
        [
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        ]
    }

    /// Nearest point of the box to `p`.
    pub fn clamp_point(&self, p: &Vec3) -> Vec3 {
        [
            p[0].clamp(self.min[0], self.max[0]),
            p[1].clamp(self.min[1], self.max[1]),
            p[2].clamp(self.min[2], self.max[2]),
        ]
    }

    pub fn area(&self) -> f64 {
        let [x, y, z] = self.extent();
        2.0 * (x * y + y * z + x * z)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Obstacle {
    Sphere(Sphere),
    Box(Aabb),
}

impl Obstacle {
    pub fn area(&self) -> f64 {
        match self {
            Obstacle::Sphere(s) => s.area(),
            Obstacle::Box(b) => b.area(),
        }
    }

    pub fn bounding_box(&self) -> Aabb {
        match self {
            Obstacle::Sphere(s) => Aabb {
                min: [s.center[0] - s.radius, s.center[1] - s.radius, s.center[2] - s.radius],
                max: [s.center[0] + s.radius, s.center[1] + s.radius, s.center[2] + s.radius],
            },
            Obstacle::Box(b) => *b,
        }
    }

    /// Strict overlap test against a sphere.
    pub fn intersects_sphere(&self, s: &Sphere) -> bool {
        match self {
            Obstacle::Sphere(o) => {
                let r = o.radius + s.radius;
                dist2(&o.center, &s.center) < r * r
            }
            Obstacle::Box(b) => {
                let c = b.clamp_point(&s.center);
                dist2(&c, &s.center) < s.radius * s.radius
            }
        }
    }

    /// Whether `p` lies inside or on the obstacle.
    pub fn contains_point(&self, p: &Vec3) -> bool {
        match self {
            Obstacle::Sphere(o) => dist2(&o.center, p) <= o.radius * o.radius,
            Obstacle::Box(b) => b.contains_point(p),
        }
    }
}

pub(crate) fn dist2(a: &Vec3, b: &Vec3) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    obstacles: Vec<Obstacle>,
    bounds: Aabb,
}

impl Scene {
    pub fn new(obstacles: Vec<Obstacle>, bounds: Aabb) -> Result<Self> {
        for (i, o) in obstacles.iter().enumerate() {
            if let Obstacle::Sphere(s) = o {
                if !(s.radius > 0.0 && s.radius.is_finite()) || s.center.iter().any(|v| !v.is_finite()) {
                    return Err(KinematicsError::Geometry(format!("obstacle {i} has invalid radius")));
                }
            }
            if let Obstacle::Box(b) = o {
                Aabb::new(b.min, b.max)?;
            }
            if !bounds.contains_box(&o.bounding_box()) {
                return Err(KinematicsError::Geometry(format!(
                    "obstacle {i} extends outside workspace bounds"
                )));
            }
        }
        Ok(Self { obstacles, bounds })
    }

    pub fn empty(bounds: Aabb) -> Self {
        Self {
            obstacles: Vec::new(),
            bounds,
        }
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds
    }

    pub fn is_empty(&self) -> bool {
        self.obstacles.is_empty()
    }
}

/// `N x 3` points; robot clouds carry the source link of each point.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub tags: Option<Vec<usize>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        Self { points, tags: None }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// An empty cloud stands for an obstacle-free scene.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn tag(&self, i: usize) -> Option<usize> {
        self.tags.as_ref().map(|t| t[i])
    }

    pub fn translated(&self, d: Vec3) -> PointCloud {
        PointCloud {
            points: self
                .points
                .iter()
                .map(|p| [p[0] + d[0], p[1] + d[1], p[2] + d[2]])
                .collect(),
            tags: self.tags.clone(),
        }
    }
}

/// Splits `total` into counts proportional to `weights` by largest
/// remainder, then raises every entry to at least `floor` by taking from
/// the largest counts. Ties go to the lower index.
pub fn allocate_proportional(total: usize, weights: &[f64], floor: usize) -> Vec<usize> {
    let n = weights.len();
    if n == 0 {
        return Vec::new();
    }
    let sum: f64 = weights.iter().sum();
    let shares: Vec<f64> = if sum > 0.0 {
        weights.iter().map(|w| w / sum * total as f64).collect()
    } else {
        vec![total as f64 / n as f64; n]
    };
    let mut counts: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let ra = shares[a] - shares[a].floor();
        let rb = shares[b] - shares[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    if floor > 0 && total >= floor * n {
        while let Some(low) = (0..n).find(|&i| counts[i] < floor) {
            let high = (0..n)
                .filter(|&i| counts[i] > floor)
                .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))
                .expect("total covers floors");
            counts[high] -= 1;
            counts[low] += 1;
        }
    }
    counts
}

fn unit_vector(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v: Vec3 = [
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        ];
        let n = super::norm(&v);
        if n > 1e-12 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

fn on_sphere(s: &Sphere, rng: &mut impl Rng) -> Vec3 {
    let u = unit_vector(rng);
    [
        s.center[0] + s.radius * u[0],
        s.center[1] + s.radius * u[1],
        s.center[2] + s.radius * u[2],
    ]
}

fn on_box(b: &Aabb, rng: &mut impl Rng) -> Vec3 {
    let [ex, ey, ez] = b.extent();
    // faces normal to x, y, z (two each)
    let areas = [ey * ez, ex * ez, ex * ey];
    let total: f64 = areas.iter().sum::<f64>();
    let axis = if total <= 0.0 {
        0
    } else {
        let mut r = rng.gen::<f64>() * total;
        let mut axis = 2;
        for (k, a) in areas.iter().enumerate() {
            if r < *a {
                axis = k;
                break;
            }
            r -= a;
        }
        axis
    };
    let mut p = [0.0; 3];
    for k in 0..3 {
        p[k] = b.min[k] + rng.gen::<f64>() * (b.max[k] - b.min[k]);
    }
    p[axis] = if rng.gen::<bool>() { b.max[axis] } else { b.min[axis] };
    p
}

/// Uniform surface samples over the link spheres at configuration `q`.
/// Points are allocated to links by surface area with at least one per link
/// whenever `n_points` allows, and tagged with their link index.
pub fn sample_robot_pointcloud(
    chain: &KinematicChain,
    q: &[f64],
    n_points: usize,
    rng: &mut impl Rng,
) -> Result<PointCloud> {
    let poses = chain.forward_kinematics(q)?;
    let link_areas: Vec<f64> = chain.links().iter().map(|l| l.area()).collect();
    let per_link = allocate_proportional(n_points, &link_areas, 1);
    let mut points = Vec::with_capacity(n_points);
    let mut tags = Vec::with_capacity(n_points);
    for (li, (link, &count)) in chain.links().iter().zip(&per_link).enumerate() {
        let areas: Vec<f64> = link.spheres.iter().map(Sphere::area).collect();
        let per_sphere = allocate_proportional(count, &areas, 0);
        for (s, &c) in link.spheres.iter().zip(&per_sphere) {
            for _ in 0..c {
                let local = on_sphere(s, rng);
                points.push(poses[li].apply(&local));
                tags.push(li);
            }
        }
    }
    Ok(PointCloud {
        points,
        tags: Some(tags),
    })
}

/// Uniform surface samples over all obstacles, allocated by surface area.
/// An obstacle-free scene yields an empty cloud.
pub fn sample_scene_pointcloud(scene: &Scene, n_points: usize, rng: &mut impl Rng) -> PointCloud {
    if scene.is_empty() {
        return PointCloud::default();
    }
    let areas: Vec<f64> = scene.obstacles().iter().map(Obstacle::area).collect();
    let counts = allocate_proportional(n_points, &areas, 0);
    let mut points = Vec::with_capacity(n_points);
    for (o, &c) in scene.obstacles().iter().zip(&counts) {
        for _ in 0..c {
            points.push(match o {
                Obstacle::Sphere(s) => on_sphere(s, rng),
                Obstacle::Box(b) => on_box(b, rng),
            });
        }
    }
    PointCloud::new(points)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::super::{dist3, presets};
    use super::*;

    fn bounds() -> Aabb {
        Aabb::new([-5.0; 3], [5.0; 3]).unwrap()
    }

    #[test]
    fn robot_points_lie_on_transformed_spheres() {
        let chain = presets::synthetic_6dof();
        let q = [0.4, -0.3, 0.8, 0.1, 0.5, -0.6];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cloud = sample_robot_pointcloud(&chain, &q, 300, &mut rng).unwrap();
        assert_eq!(cloud.len(), 300);
        let spheres = chain.world_spheres(&q).unwrap();
        for (i, p) in cloud.points.iter().enumerate() {
            let tag = cloud.tag(i).unwrap();
            let on_surface = spheres
                .iter()
                .filter(|(l, _)| *l == tag)
                .any(|(_, s)| (dist3(p, &s.center) - s.radius).abs() < 1e-9);
            assert!(on_surface, "point {i} not on link {tag}");
        }
    }

    #[test]
    fn every_link_gets_points() {
        let chain = presets::synthetic_6dof();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 4 * chain.links().len();
        let cloud = sample_robot_pointcloud(&chain, &[0.0; 6], n, &mut rng).unwrap();
        let tags = cloud.tags.unwrap();
        for l in 0..chain.links().len() {
            assert!(tags.contains(&l), "link {l} missing");
        }
    }

    #[test]
    fn robot_cloud_is_seed_deterministic() {
        let chain = presets::planar_3dof();
        let a = sample_robot_pointcloud(&chain, &[0.1, 0.2, 0.3], 64, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = sample_robot_pointcloud(&chain, &[0.1, 0.2, 0.3], 64, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unit_sphere_scene_points() {
        let scene = Scene::new(
            vec![Obstacle::Sphere(Sphere {
                center: [0.0; 3],
                radius: 1.0,
            })],
            bounds(),
        )
        .unwrap();
        let cloud = sample_scene_pointcloud(&scene, 500, &mut ChaCha8Rng::seed_from_u64(4));
        for p in &cloud.points {
            assert!((dist3(p, &[0.0; 3]) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn box_scene_points_on_faces() {
        let b = Aabb::new([0.0; 3], [1.0; 3]).unwrap();
        let scene = Scene::new(vec![Obstacle::Box(b)], bounds()).unwrap();
        let cloud = sample_scene_pointcloud(&scene, 500, &mut ChaCha8Rng::seed_from_u64(5));
        for p in &cloud.points {
            let on_face = (0..3).any(|k| p[k] == 0.0 || p[k] == 1.0);
            assert!(on_face && b.contains_point(p), "{p:?}");
        }
    }

    #[test]
    fn area_proportional_allocation() {
        let scene = Scene::new(
            vec![
                Obstacle::Sphere(Sphere {
                    center: [-2.0, 0.0, 0.0],
                    radius: 1.0,
                }),
                Obstacle::Sphere(Sphere {
                    center: [2.0, 0.0, 0.0],
                    radius: 2.0,
                }),
            ],
            bounds(),
        )
        .unwrap();
        let cloud = sample_scene_pointcloud(&scene, 2000, &mut ChaCha8Rng::seed_from_u64(6));
        let small = cloud.points.iter().filter(|p| p[0] < 0.0 && dist3(p, &[-2.0, 0.0, 0.0]) < 1.0 + 1e-9).count();
        let large = cloud.len() - small;
        let ratio = large as f64 / small as f64;
        assert!((ratio - 4.0).abs() / 4.0 < 0.1, "ratio {ratio}");
    }

    #[test]
    fn empty_scene_yields_empty_cloud() {
        let scene = Scene::empty(bounds());
        assert!(sample_scene_pointcloud(&scene, 100, &mut ChaCha8Rng::seed_from_u64(7)).is_empty());
    }

    #[test]
    fn allocation_floor_and_total() {
        assert_eq!(allocate_proportional(10, &[1.0, 1.0], 0), vec![5, 5]);
        assert_eq!(allocate_proportional(5, &[100.0, 0.0, 0.0], 1), vec![3, 1, 1]);
        let c = allocate_proportional(17, &[0.3, 2.0, 5.0, 0.01], 1);
        assert_eq!(c.iter().sum::<usize>(), 17);
        assert!(c.iter().all(|&v| v >= 1));
    }

    #[test]
    fn obstacles_outside_bounds_rejected() {
        let small = Aabb::new([0.0; 3], [1.0; 3]).unwrap();
        let err = Scene::new(
            vec![Obstacle::Sphere(Sphere {
                center: [0.9, 0.5, 0.5],
                radius: 0.5,
            })],
            small,
        );
        assert!(err.is_err());
        assert!(Aabb::new([1.0, 0.0, 0.0], [0.0, 1.0, 1.0]).is_err());
    }
}
