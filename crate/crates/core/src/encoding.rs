//! Point-cloud downsampling and embedding, configuration embedding, robot
//! token fusion and sinusoidal positional encoding.

use rand::Rng;
use thiserror::Error;

use crate::kinematics::{PointCloud, Vec3};
use crate::nn::{Binder, Mlp, ParamStore};
use crate::tensor::{Tensor, TensorError, Var};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncodingError {
    #[error("cannot sample {k} points from a cloud of {n}")]
    Size { k: usize, n: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub type Result<T, E = EncodingError> = std::result::Result<T, E>;

fn d2(a: &Vec3, b: &Vec3) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

/// Greedy maximin selection of `k` indices starting at `seed_index`. Ties
/// resolve to the lowest index.
pub fn farthest_point_sample(cloud: &PointCloud, k: usize, seed_index: usize) -> Result<Vec<usize>> {
    let n = cloud.len();
    if k > n {
        return Err(EncodingError::Size { k, n });
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    if seed_index >= n {
        return Err(EncodingError::Parameter(format!("seed index {seed_index} >= {n}")));
    }
    let pts = &cloud.points;
    let mut chosen = Vec::with_capacity(k);
    let mut min_d = vec![f64::INFINITY; n];
    let mut taken = vec![false; n];
    let mut current = seed_index;
    for _ in 0..k {
        chosen.push(current);
        taken[current] = true;
        let c = pts[current];
        let mut best = None;
        let mut best_d = f64::NEG_INFINITY;
        for i in 0..n {
            let d = d2(&pts[i], &c);
            if d < min_d[i] {
                min_d[i] = d;
            }
            if !taken[i] && min_d[i] > best_d {
                best_d = min_d[i];
                best = Some(i);
            }
        }
        match best {
            Some(b) => current = b,
            None => break,
        }
    }
    Ok(chosen)
}

/// Members of each centroid's ball: cloud indices within `radius`, nearest
/// first (ties by index), truncated to `max_group`. Centroids are cloud
/// indices, so each group contains at least its own centroid.
pub fn ball_group(cloud: &PointCloud, centroids: &[usize], radius: f64, max_group: usize) -> Result<Vec<Vec<usize>>> {
    if !(radius > 0.0) || max_group == 0 {
        return Err(EncodingError::Parameter(format!(
            "radius {radius} and max_group {max_group} must be positive"
        )));
    }
    let r2 = radius * radius;
    centroids
        .iter()
        .map(|&c| {
            let cp = *cloud
                .points
                .get(c)
                .ok_or_else(|| EncodingError::Parameter(format!("centroid {c} out of range")))?;
            let mut members: Vec<(f64, usize)> = cloud
                .points
                .iter()
                .enumerate()
                .filter_map(|(i, p)| {
                    let d = d2(p, &cp);
                    (d <= r2).then_some((d, i))
                })
                .collect();
            members.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            members.truncate(max_group);
            if members.is_empty() {
                members.push((0.0, c));
            }
            Ok(members.into_iter().map(|(_, i)| i).collect())
        })
        .collect()
}

/// Non-learned half of set abstraction: sampled centroids, their groups and
/// the centroid-relative member coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Grouping {
    pub centroid_indices: Vec<usize>,
    pub centroids: Vec<Vec3>,
    /// Link tag of each centroid, when the cloud is tagged.
    pub tags: Option<Vec<usize>>,
    /// Rows of `relative` belonging to each centroid.
    pub row_groups: Vec<Vec<usize>>,
    /// `M x 3` member coordinates minus their centroid.
    pub relative: Tensor,
}

/// One downsample-group-pool stage with a pointwise MLP on relative
/// coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct SetAbstractionLayer {
    pub k: usize,
    pub radius: f64,
    pub max_group: usize,
    pub local_mlp: Mlp,
}

impl SetAbstractionLayer {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        k: usize,
        radius: f64,
        max_group: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if k == 0 || !(radius > 0.0) || max_group == 0 {
            return Err(EncodingError::Parameter(format!(
                "set abstraction needs k >= 1, radius > 0, max_group >= 1 (got {k}, {radius}, {max_group})"
            )));
        }
        Ok(Self {
            k,
            radius,
            max_group,
            local_mlp: Mlp::new(store, &format!("{name}.mlp"), &[3, hidden, hidden], rng),
        })
    }

    pub fn width(&self) -> usize {
        self.local_mlp.output_width()
    }

    pub fn group(&self, cloud: &PointCloud) -> Result<Grouping> {
        let idx = farthest_point_sample(cloud, self.k, 0)?;
        let groups = ball_group(cloud, &idx, self.radius, self.max_group)?;
        Ok(grouping_from(cloud, idx, groups))
    }

    /// `K x H` features: pointwise MLP on relative coordinates, max-pooled
    /// per group.
    pub fn embed<'t>(&self, b: &Binder<'_, 't>, g: &Grouping) -> Result<Var<'t>> {
        let rel = b.tape().constant(&g.relative);
        let h = self.local_mlp.forward(b, &rel)?;
        Ok(h.group_max(&g.row_groups)?)
    }

    /// Centroids and their features.
    pub fn forward<'t>(&self, b: &Binder<'_, 't>, cloud: &PointCloud) -> Result<(Vec<Vec3>, Var<'t>)> {
        let g = self.group(cloud)?;
        let feats = self.embed(b, &g)?;
        Ok((g.centroids, feats))
    }
}

/// Builds a [`Grouping`] from explicit centroid indices and member lists.
pub fn grouping_from(cloud: &PointCloud, centroid_indices: Vec<usize>, groups: Vec<Vec<usize>>) -> Grouping {
    let mut rel = Vec::new();
    let mut row_groups = Vec::with_capacity(groups.len());
    let mut row = 0;
    for (&c, members) in centroid_indices.iter().zip(&groups) {
        let cp = cloud.points[c];
        let mut rows = Vec::with_capacity(members.len());
        for &m in members {
            let p = cloud.points[m];
            rel.extend_from_slice(&[p[0] - cp[0], p[1] - cp[1], p[2] - cp[2]]);
            rows.push(row);
            row += 1;
        }
        row_groups.push(rows);
    }
    Grouping {
        centroids: centroid_indices.iter().map(|&i| cloud.points[i]).collect(),
        tags: cloud
            .tags
            .as_ref()
            .map(|t| centroid_indices.iter().map(|&i| t[i]).collect()),
        centroid_indices,
        row_groups,
        relative: Tensor::new(vec![row, 3], rel).expect("rows of three"),
    }
}

/// Shared MLP mapping a configuration to an `H`-vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigEmbedder {
    pub mlp: Mlp,
}

impl ConfigEmbedder {
    pub fn new(store: &mut ParamStore, name: &str, dof: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        Self {
            mlp: Mlp::new(store, name, &[dof, hidden, hidden, hidden], rng),
        }
    }

    pub fn dof(&self) -> usize {
        self.mlp.input_width()
    }

    /// Length-`H` embedding of `q`.
    pub fn embed<'t>(&self, b: &Binder<'_, 't>, q: &[f64]) -> Result<Var<'t>> {
        if q.len() != self.dof() {
            return Err(TensorError::Dimension {
                op: "embed_config",
                lhs: vec![q.len()],
                rhs: vec![self.dof()],
            }
            .into());
        }
        let x = b.tape().constant_from(vec![1, q.len()], q.to_vec())?;
        let h = self.mlp.forward(b, &x)?;
        Ok(h.reshape(vec![self.mlp.output_width()])?)
    }
}

/// Adds the current and goal embeddings to every robot token.
pub fn fuse_robot_tokens<'t>(z_r: &Var<'t>, z_t: &Var<'t>, z_goal: &Var<'t>) -> Result<Var<'t>> {
    Ok(z_r.add_row(z_t)?.add_row(z_goal)?)
}

/// `pe[pos][2i] = sin(pos / 10000^(2i/H))`, `pe[pos][2i+1] = cos(...)`.
pub fn sinusoidal_pe(seq_len: usize, width: usize) -> Result<Tensor> {
    if !width.is_multiple_of(2) {
        return Err(EncodingError::Parameter(format!(
            "positional encoding width {width} must be even"
        )));
    }
    let mut data = vec![0.0; seq_len * width];
    for pos in 0..seq_len {
        for i in 0..width / 2 {
            let freq = 10000f64.powf(-((2 * i) as f64) / width as f64);
            let angle = pos as f64 * freq;
            data[pos * width + 2 * i] = angle.sin();
            data[pos * width + 2 * i + 1] = angle.cos();
        }
    }
    Ok(Tensor::new(vec![seq_len, width], data)?)
}
