//! Transformer encoder-decoder that maps the current configuration, the goal
//! and point clouds of robot and scene to a joint-space step.
//!
//! Tokens: robot set-abstraction features plus a projection of each
//! centroid's position, fused with the current and goal embeddings; scene
//! features plus their centroid projection. The encoder applies the
//! structure-graph mask on the layers chosen by the [`MaskSchedule`]; a
//! single learnable token cross-attends to the encoder output and a linear
//! head emits the step.

mod checkpoint;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{fuse_robot_tokens, sinusoidal_pe, ConfigEmbedder, EncodingError, Grouping, SetAbstractionLayer};
use crate::graph::{adjacency_to_bias, AttentionBias, GraphError, StructureGraph};
use crate::kinematics::{Config, KinematicsError, PointCloud};
use crate::nn::{Binder, LayerNorm, Linear, Mlp, ParamId, ParamStore};
use crate::tensor::{DropoutMode, Tape, Tensor, TensorError, Var};

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid hyperparameters: {0}")]
    Hyper(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

/// Which encoder layers apply the structure-graph mask.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskSchedule {
    /// Even layers masked, starting with layer 0.
    Interleaved,
    /// No layer masked.
    NoneMask,
    /// Every layer masked.
    AllMask,
}

impl MaskSchedule {
    pub fn is_masked(self, layer: usize) -> bool {
        match self {
            MaskSchedule::Interleaved => layer.is_multiple_of(2),
            MaskSchedule::NoneMask => false,
            MaskSchedule::AllMask => true,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MaskSchedule::Interleaved => "gaide",
            MaskSchedule::NoneMask => "gaide-v",
            MaskSchedule::AllMask => "gaide-h",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyper {
    pub dof: usize,
    pub hidden: usize,
    pub heads: usize,
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub dropout_p: f64,
    pub schedule: MaskSchedule,
    pub k_robot: usize,
    pub k_work: usize,
    pub n_robot_points: usize,
    pub n_work_points: usize,
    pub robot_radius: f64,
    pub work_radius: f64,
    pub max_group: usize,
}

impl Hyper {
    pub fn new(dof: usize) -> Self {
        Self {
            dof,
            hidden: 64,
            heads: 4,
            enc_layers: 4,
            dec_layers: 2,
            dropout_p: 0.1,
            schedule: MaskSchedule::Interleaved,
            k_robot: 16,
            k_work: 16,
            n_robot_points: 256,
            n_work_points: 512,
            robot_radius: 0.15,
            work_radius: 0.3,
            max_group: 16,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(ModelError::Hyper(m));
        if self.dof == 0 {
            return fail("dof must be positive".into());
        }
        if self.hidden == 0 || self.heads == 0 || !self.hidden.is_multiple_of(self.heads) {
            return fail(format!("hidden {} not divisible by heads {}", self.hidden, self.heads));
        }
        if !self.hidden.is_multiple_of(2) {
            return fail(format!("hidden {} must be even", self.hidden));
        }
        if self.enc_layers == 0 || self.dec_layers == 0 {
            return fail("need at least one encoder and one decoder layer".into());
        }
        if self.schedule == MaskSchedule::Interleaved && self.enc_layers < 2 {
            return fail("interleaved schedule needs at least two encoder layers".into());
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return fail(format!("dropout {} outside [0, 1)", self.dropout_p));
        }
        if self.k_robot == 0 || self.k_work == 0 || self.max_group == 0 {
            return fail("centroid counts and group size must be positive".into());
        }
        if self.n_robot_points < self.k_robot || self.n_work_points < self.k_work {
            return fail("point counts must be at least the centroid counts".into());
        }
        if !(self.robot_radius > 0.0 && self.work_radius > 0.0) {
            return fail("ball radii must be positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    /// Dropout stays active, so repeated calls differ.
    Stochastic,
    Deterministic,
}

impl SampleMode {
    pub fn dropout(self) -> DropoutMode {
        match self {
            SampleMode::Stochastic => DropoutMode::StochasticInfer,
            SampleMode::Deterministic => DropoutMode::Eval,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerInput {
    pub q_t: Config,
    pub q_goal: Config,
    pub robot_cloud: PointCloud,
    pub scene_cloud: PointCloud,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionWeights {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
}

impl AttentionWeights {
    pub fn new(store: &mut ParamStore, name: &str, h: usize, rng: &mut impl Rng) -> Self {
        Self {
            q: Linear::new(store, &format!("{name}.q"), h, h, rng),
            k: Linear::new(store, &format!("{name}.k"), h, h, rng),
            v: Linear::new(store, &format!("{name}.v"), h, h, rng),
            o: Linear::new(store, &format!("{name}.o"), h, h, rng),
        }
    }
}

/// Attention output and the per-head `Lq x Lk` weight matrices.
pub struct Attention<'t> {
    pub output: Var<'t>,
    pub weights: Vec<Var<'t>>,
}

/// Multi-head scaled dot-product attention of `queries` over `keys`, with
/// an optional additive bias. With `bias == None` no addition is recorded,
/// so the result is bitwise what a zero bias gives.
pub fn masked_multihead_attention<'t>(
    b: &Binder<'_, 't>,
    w: &AttentionWeights,
    heads: usize,
    queries: &Var<'t>,
    keys: &Var<'t>,
    bias: Option<&AttentionBias>,
) -> Result<Attention<'t>> {
    let h = queries.cols();
    let (lq, lk) = (queries.rows(), keys.rows());
    if let Some(bias) = bias {
        if bias.size() != lq || bias.size() != lk {
            return Err(TensorError::Dimension {
                op: "attention bias",
                lhs: vec![bias.size(), bias.size()],
                rhs: vec![lq, lk],
            }
            .into());
        }
    }
    let d = h / heads;
    let q = w.q.forward(b, queries)?;
    let k = w.k.forward(b, keys)?;
    let v = w.v.forward(b, keys)?;
    let scale = 1.0 / (d as f64).sqrt();
    let mut outs = Vec::with_capacity(heads);
    let mut weights = Vec::with_capacity(heads);
    for hd in 0..heads {
        let qh = q.slice_cols(hd * d, d)?;
        let kh = k.slice_cols(hd * d, d)?;
        let vh = v.slice_cols(hd * d, d)?;
        let mut scores = qh.matmul(&kh.transpose()?)?.scale(scale);
        if let Some(bias) = bias {
            scores = scores.add_const(bias.values())?;
        }
        let a = scores.softmax_lastdim()?;
        outs.push(a.matmul(&vh)?);
        weights.push(a);
    }
    let cat = Var::concat_cols(&outs)?;
    Ok(Attention {
        output: w.o.forward(b, &cat)?,
        weights,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderLayer {
    pub attn: AttentionWeights,
    pub ff: Mlp,
    pub norm1: LayerNorm,
    pub norm2: LayerNorm,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecoderLayer {
    pub self_attn: AttentionWeights,
    pub cross_attn: AttentionWeights,
    pub ff: Mlp,
    pub norm1: LayerNorm,
    pub norm2: LayerNorm,
    pub norm3: LayerNorm,
}

/// Encoder result with per-layer outputs and attention weights.
pub struct Encoded<'t> {
    pub memory: Var<'t>,
    pub layer_outputs: Vec<Var<'t>>,
    pub attention: Vec<Vec<Var<'t>>>,
}

pub struct Forward<'t> {
    pub delta: Var<'t>,
    pub encoded: Encoded<'t>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaideModel {
    hyper: Hyper,
    store: ParamStore,
    config_embedder: ConfigEmbedder,
    robot_sa: SetAbstractionLayer,
    scene_sa: SetAbstractionLayer,
    robot_pos: Linear,
    scene_pos: Linear,
    encoder: Vec<EncoderLayer>,
    encoder_norm: LayerNorm,
    decoder: Vec<DecoderLayer>,
    decoder_norm: LayerNorm,
    start_token: ParamId,
    head: Linear,
}

fn feed_forward(store: &mut ParamStore, name: &str, h: usize, rng: &mut impl Rng) -> Mlp {
    Mlp::new(store, name, &[h, 4 * h, h], rng)
}

/// Repeats points cyclically until the cloud has at least `k` of them.
fn pad_cloud(cloud: &PointCloud, k: usize) -> PointCloud {
    if cloud.len() >= k {
        return cloud.clone();
    }
    let n = cloud.len();
    PointCloud {
        points: (0..k).map(|i| cloud.points[i % n]).collect(),
        tags: cloud.tags.as_ref().map(|t| (0..k).map(|i| t[i % n]).collect()),
    }
}

impl GaideModel {
    pub fn new(hyper: Hyper, rng: &mut impl Rng) -> Result<Self> {
        hyper.validate()?;
        let h = hyper.hidden;
        let mut s = ParamStore::new();
        let config_embedder = ConfigEmbedder::new(&mut s, "config", hyper.dof, h, rng);
        let robot_sa = SetAbstractionLayer::new(&mut s, "robot_sa", hyper.k_robot, hyper.robot_radius, hyper.max_group, h, rng)?;
        let scene_sa = SetAbstractionLayer::new(&mut s, "scene_sa", hyper.k_work, hyper.work_radius, hyper.max_group, h, rng)?;
        let robot_pos = Linear::new(&mut s, "robot_pos", 3, h, rng);
        let scene_pos = Linear::new(&mut s, "scene_pos", 3, h, rng);
        let encoder = (0..hyper.enc_layers)
            .map(|i| EncoderLayer {
                attn: AttentionWeights::new(&mut s, &format!("enc{i}.attn"), h, rng),
                ff: feed_forward(&mut s, &format!("enc{i}.ff"), h, rng),
                norm1: LayerNorm::new(&mut s, &format!("enc{i}.norm1"), h),
                norm2: LayerNorm::new(&mut s, &format!("enc{i}.norm2"), h),
            })
            .collect();
        let encoder_norm = LayerNorm::new(&mut s, "enc.norm", h);
        let decoder = (0..hyper.dec_layers)
            .map(|i| DecoderLayer {
                self_attn: AttentionWeights::new(&mut s, &format!("dec{i}.self"), h, rng),
                cross_attn: AttentionWeights::new(&mut s, &format!("dec{i}.cross"), h, rng),
                ff: feed_forward(&mut s, &format!("dec{i}.ff"), h, rng),
                norm1: LayerNorm::new(&mut s, &format!("dec{i}.norm1"), h),
                norm2: LayerNorm::new(&mut s, &format!("dec{i}.norm2"), h),
                norm3: LayerNorm::new(&mut s, &format!("dec{i}.norm3"), h),
            })
            .collect();
        let decoder_norm = LayerNorm::new(&mut s, "dec.norm", h);
        let start_token = s.add_uniform("start_token", &[1, h], 1.0, rng);
        let head = Linear::new(&mut s, "head", h, hyper.dof, rng);
        Ok(Self {
            hyper,
            store: s,
            config_embedder,
            robot_sa,
            scene_sa,
            robot_pos,
            scene_pos,
            encoder,
            encoder_norm,
            decoder,
            decoder_norm,
            start_token,
            head,
        })
    }

    pub fn hyper(&self) -> &Hyper {
        &self.hyper
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn start_token(&self) -> ParamId {
        self.start_token
    }

    pub fn head(&self) -> Linear {
        self.head
    }

    /// Same weights under a different mask schedule.
    pub fn with_schedule(&self, schedule: MaskSchedule) -> Result<Self> {
        let mut m = self.clone();
        m.hyper.schedule = schedule;
        m.hyper.validate()?;
        Ok(m)
    }

    pub fn robot_grouping(&self, cloud: &PointCloud) -> Result<Grouping> {
        if cloud.is_empty() || cloud.tags.is_none() {
            return Err(ModelError::Input("robot cloud must be non-empty and link-tagged".into()));
        }
        Ok(self.robot_sa.group(&pad_cloud(cloud, self.hyper.k_robot))?)
    }

    /// Grouping of the scene cloud; it depends only on the scene, so
    /// planners compute it once per problem.
    pub fn scene_grouping(&self, cloud: &PointCloud) -> Result<Grouping> {
        if cloud.is_empty() {
            return Err(ModelError::Input("scene cloud is empty".into()));
        }
        Ok(self.scene_sa.group(&pad_cloud(cloud, self.hyper.k_work))?)
    }

    /// Structure graph for a robot grouping.
    pub fn structure_graph(&self, robot: &Grouping) -> Result<StructureGraph> {
        let tags = robot
            .tags
            .as_ref()
            .ok_or_else(|| ModelError::Input("robot grouping has no link tags".into()))?;
        Ok(StructureGraph::build(tags, self.hyper.k_work)?)
    }

    pub fn encode<'t, R: Rng>(
        &self,
        b: &Binder<'_, 't>,
        z_robot: &Var<'t>,
        z_w: &Var<'t>,
        graph: &StructureGraph,
        mode: DropoutMode,
        rng: &mut R,
    ) -> Result<Encoded<'t>> {
        let h = self.hyper.hidden;
        if z_robot.cols() != h || z_w.cols() != h || graph.n_robot() != z_robot.rows() || graph.n_work() != z_w.rows() {
            return Err(TensorError::Dimension {
                op: "encode",
                lhs: vec![z_robot.rows(), z_w.rows(), z_robot.cols(), z_w.cols()],
                rhs: vec![graph.n_robot(), graph.n_work(), h, h],
            }
            .into());
        }
        let bias = adjacency_to_bias(graph)?;
        let tokens = Var::concat_rows(&[*z_robot, *z_w])?;
        let pe = sinusoidal_pe(graph.len(), h)?;
        let mut x = tokens.add(&b.tape().constant(&pe))?;
        let p = self.hyper.dropout_p;
        let mut layer_outputs = Vec::with_capacity(self.encoder.len());
        let mut attention = Vec::with_capacity(self.encoder.len());
        for (i, layer) in self.encoder.iter().enumerate() {
            let masked = self.hyper.schedule.is_masked(i).then_some(&bias);
            let n1 = layer.norm1.forward(b, &x)?;
            let att = masked_multihead_attention(b, &layer.attn, self.hyper.heads, &n1, &n1, masked)?;
            x = x.add(&att.output.dropout(p, mode, rng)?)?;
            let n2 = layer.norm2.forward(b, &x)?;
            x = x.add(&layer.ff.forward(b, &n2)?.dropout(p, mode, rng)?)?;
            layer_outputs.push(x);
            attention.push(att.weights);
        }
        Ok(Encoded {
            memory: self.encoder_norm.forward(b, &x)?,
            layer_outputs,
            attention,
        })
    }

    /// Length-`dof` step from the encoder memory.
    pub fn decode<'t, R: Rng>(&self, b: &Binder<'_, 't>, memory: &Var<'t>, mode: DropoutMode, rng: &mut R) -> Result<Var<'t>> {
        let p = self.hyper.dropout_p;
        let heads = self.hyper.heads;
        let mut t = b.get(self.start_token);
        for layer in &self.decoder {
            let n1 = layer.norm1.forward(b, &t)?;
            let sa = masked_multihead_attention(b, &layer.self_attn, heads, &n1, &n1, None)?;
            t = t.add(&sa.output.dropout(p, mode, rng)?)?;
            let n2 = layer.norm2.forward(b, &t)?;
            let ca = masked_multihead_attention(b, &layer.cross_attn, heads, &n2, memory, None)?;
            t = t.add(&ca.output.dropout(p, mode, rng)?)?;
            let n3 = layer.norm3.forward(b, &t)?;
            t = t.add(&layer.ff.forward(b, &n3)?.dropout(p, mode, rng)?)?;
        }
        let t = self.decoder_norm.forward(b, &t)?;
        Ok(self.head.forward(b, &t)?.reshape(vec![self.hyper.dof])?)
    }

    fn tokens<'t>(&self, b: &Binder<'_, 't>, sa: &SetAbstractionLayer, pos: &Linear, g: &Grouping) -> Result<Var<'t>> {
        let feats = sa.embed(b, g)?;
        let flat: Vec<f64> = g.centroids.iter().flatten().copied().collect();
        let c = b.tape().constant_from(vec![g.centroids.len(), 3], flat)?;
        Ok(feats.add(&pos.forward(b, &c)?)?)
    }

    /// Full pipeline on an existing tape.
    #[allow(clippy::too_many_arguments)]
    pub fn forward<'t, R: Rng>(
        &self,
        b: &Binder<'_, 't>,
        q_t: &[f64],
        q_goal: &[f64],
        robot: &Grouping,
        scene: &Grouping,
        mode: DropoutMode,
        rng: &mut R,
    ) -> Result<Forward<'t>> {
        let z_t = self.config_embedder.embed(b, q_t)?;
        let z_goal = self.config_embedder.embed(b, q_goal)?;
        let z_r = self.tokens(b, &self.robot_sa, &self.robot_pos, robot)?;
        let z_robot = fuse_robot_tokens(&z_r, &z_t, &z_goal)?;
        let z_w = self.tokens(b, &self.scene_sa, &self.scene_pos, scene)?;
        let graph = self.structure_graph(robot)?;
        let encoded = self.encode(b, &z_robot, &z_w, &graph, mode, rng)?;
        let delta = self.decode(b, &encoded.memory, mode, rng)?;
        Ok(Forward { delta, encoded })
    }

    /// Step for a prepared scene grouping.
    pub fn predict<R: Rng>(
        &self,
        q_t: &[f64],
        q_goal: &[f64],
        robot_cloud: &PointCloud,
        scene: &Grouping,
        mode: SampleMode,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let robot = self.robot_grouping(robot_cloud)?;
        let tape = Tape::new();
        let b = Binder::new(&self.store, &tape);
        Ok(self.forward(&b, q_t, q_goal, &robot, scene, mode.dropout(), rng)?.delta.data())
    }

    pub fn sample_delta<R: Rng>(&self, input: &SamplerInput, mode: SampleMode, rng: &mut R) -> Result<Vec<f64>> {
        let scene = self.scene_grouping(&input.scene_cloud)?;
        self.predict(&input.q_t, &input.q_goal, &input.robot_cloud, &scene, mode, rng)
    }

    pub fn num_parameters(&self) -> usize {
        self.store.num_scalars()
    }

    /// Copies parameter values from `tensors` (store order), checking shapes.
    pub fn load_tensors(&mut self, named: &[(String, Tensor)]) -> Result<()> {
        if named.len() != self.store.len() {
            return Err(ModelError::Checkpoint(format!(
                "expected {} tensors, found {}",
                self.store.len(),
                named.len()
            )));
        }
        for (i, (name, t)) in named.iter().enumerate() {
            let id = ParamId(i);
            if self.store.name(id) != name {
                return Err(ModelError::Checkpoint(format!(
                    "tensor {i} is {name}, expected {}",
                    self.store.name(id)
                )));
            }
            let dst = self.store.get_mut(id);
            if dst.shape() != t.shape() {
                return Err(ModelError::Checkpoint(format!(
                    "{name} has shape {:?}, expected {:?}",
                    t.shape(),
                    dst.shape()
                )));
            }
            dst.data_mut().copy_from_slice(t.data());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
