//! Oracle demonstrations, supervised training and checkpointing.

pub mod dataset;
pub mod families;
pub mod oracle;

use std::path::PathBuf;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

pub use dataset::{
    generate_dataset, Dataset, DatasetHeader, GenerationSettings, PathRecord, TrainingSample, MAX_TARGET_NORM,
};
pub use families::{generate_scene, sample_problem, SceneFamily};
pub use oracle::{generate_oracle_path, grid_search, resample_path, OracleSettings};

use crate::derive_seed;
use crate::encoding::Grouping;
use crate::kinematics::{sample_robot_pointcloud, Config, KinematicChain, KinematicsError, Scene};
use crate::model::{Checkpoint, GaideModel, ModelError};
use crate::nn::Binder;
use crate::planners::scene_cloud;
use crate::tensor::{Adam, AdamConfig, DropoutMode, Tape, TensorError, Var};

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("oracle failed: {0}")]
    Oracle(String),
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error("training diverged at step {step}")]
    Diverged { step: u64, last_good: Box<Checkpoint> },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = TrainingError> = std::result::Result<T, E>;

/// Mean over the batch of the summed squared per-joint errors; both inputs
/// are `B x n` (or a single length-`n` vector).
pub fn mse_loss<'t>(predicted: &Var<'t>, target: &Var<'t>) -> Result<Var<'t>> {
    let (ps, ts) = (predicted.shape(), target.shape());
    if ps != ts || ps.is_empty() {
        return Err(TensorError::Dimension {
            op: "mse_loss",
            lhs: ps,
            rhs: ts,
        }
        .into());
    }
    let batch = if ps.len() == 1 { 1 } else { ps[0] };
    Ok(predicted.sub(target)?.square().sum().scale(1.0 / batch as f64))
}

/// A training sample with its robot cloud already grouped.
#[derive(Clone, Debug)]
pub struct PreparedSample {
    pub scene: usize,
    pub q_t: Config,
    pub q_goal: Config,
    pub target: Vec<f64>,
    pub robot: Grouping,
}

/// Samples plus one scene grouping per header scene, regenerated from the
/// recorded seeds.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub scenes: Vec<Grouping>,
    pub samples: Vec<PreparedSample>,
}

impl PreparedData {
    /// `scenes` is aligned with `header.scenes`.
    pub fn new(
        model: &GaideModel,
        chain: &KinematicChain,
        header: &DatasetHeader,
        scenes: &[Arc<Scene>],
        samples: &[TrainingSample],
    ) -> Result<Self> {
        if header.chain != chain.digest() || header.dof != chain.dof() || model.hyper().dof != chain.dof() {
            return Err(TrainingError::Dataset("dataset, chain and model disagree".into()));
        }
        if scenes.len() != header.scenes.len() {
            return Err(TrainingError::Dataset(format!(
                "{} scenes given for {} referenced",
                scenes.len(),
                header.scenes.len()
            )));
        }
        let hyper = model.hyper();
        let groupings = scenes
            .par_iter()
            .enumerate()
            .map(|(i, scene)| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(header.cloud_seed, &[i as u64]));
                model.scene_grouping(&scene_cloud(scene, hyper.n_work_points, &mut rng))
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        let prepared = samples
            .par_iter()
            .map(|s| {
                if s.scene >= scenes.len() {
                    return Err(TrainingError::Dataset(format!("scene index {} out of range", s.scene)));
                }
                let n = s.target.iter().map(|x| x * x).sum::<f64>().sqrt();
                if !(n <= MAX_TARGET_NORM + 1e-9) {
                    return Err(TrainingError::Dataset(format!("target norm {n} exceeds the step bound")));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
                let cloud = sample_robot_pointcloud(chain, &s.q_t, hyper.n_robot_points, &mut rng)?;
                Ok(PreparedSample {
                    scene: s.scene,
                    q_t: s.q_t.clone(),
                    q_goal: s.q_goal.clone(),
                    target: s.target.clone(),
                    robot: model.robot_grouping(&cloud)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            scenes: groupings,
            samples: prepared,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub steps: u64,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    /// Write a checkpoint every this many steps (0 disables).
    pub checkpoint_every: u64,
    pub checkpoint_dir: Option<PathBuf>,
    /// Validation loss every this many steps (0 disables).
    pub eval_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 1000,
            batch_size: 32,
            lr: 1e-3,
            seed: 0,
            checkpoint_every: 0,
            checkpoint_dir: None,
            eval_every: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    /// Mini-batch loss before each update.
    pub loss_curve: Vec<f64>,
    /// `(step, loss)` on the validation data, step 0 being the initial model.
    pub val_curve: Vec<(u64, f64)>,
}

fn sample_loss(
    model: &GaideModel,
    data: &PreparedData,
    s: &PreparedSample,
    mode: DropoutMode,
    seed: u64,
    with_grad: bool,
) -> Result<(f64, Option<Vec<Vec<f64>>>)> {
    let tape = Tape::new();
    let b = Binder::new(model.params(), &tape);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = model.forward(&b, &s.q_t, &s.q_goal, &s.robot, &data.scenes[s.scene], mode, &mut rng)?;
    let target = tape.constant_from(vec![s.target.len()], s.target.clone())?;
    let loss = mse_loss(&f.delta, &target)?;
    let value = loss.item();
    if !with_grad || !value.is_finite() {
        return Ok((value, None));
    }
    let grads = tape.backward(loss)?;
    Ok((value, Some(b.gradients(&grads))))
}

/// Mean loss over `data` with dropout off.
pub fn evaluate(model: &GaideModel, data: &PreparedData) -> Result<f64> {
    if data.is_empty() {
        return Err(TrainingError::Dataset("no samples to evaluate".into()));
    }
    let losses = data
        .samples
        .par_iter()
        .map(|s| sample_loss(model, data, s, DropoutMode::Eval, 0, false).map(|(l, _)| l))
        .collect::<Result<Vec<_>>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Shuffled mini-batches, Adam updates, periodic checkpoints.
///
/// Each sample of a batch is run on its own tape in parallel against the
/// read-only weights; per-sample gradients are reduced in batch order, so
/// results do not depend on thread scheduling. On a non-finite loss the
/// model is rolled back to the last parameters that produced a finite loss
/// and the error carries them as a checkpoint.
pub fn train(
    model: &mut GaideModel,
    data: &PreparedData,
    val: Option<&PreparedData>,
    config: &TrainConfig,
) -> Result<TrainReport> {
    if data.is_empty() {
        return Err(TrainingError::Dataset("empty training set".into()));
    }
    if config.batch_size == 0 {
        return Err(TrainingError::Dataset("batch size must be positive".into()));
    }
    if let Some(dir) = &config.checkpoint_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut adam = Adam::new(
        AdamConfig {
            lr: config.lr,
            ..AdamConfig::default()
        },
        model.params().tensors(),
    );
    let mut report = TrainReport::default();
    let val = val.filter(|v| !v.is_empty());
    if let (Some(v), true) = (val, config.eval_every > 0) {
        report.val_curve.push((0, evaluate(model, v)?));
    }
    let batch = config.batch_size.min(data.len());
    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    let mut epoch = 0u64;
    let mut last_good = Checkpoint::from_model(model, 0);
    for step in 0..config.steps {
        let mut indices = Vec::with_capacity(batch);
        while indices.len() < batch {
            if cursor == order.len() {
                order = (0..data.len()).collect();
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[0, epoch])));
                epoch += 1;
                cursor = 0;
            }
            indices.push(order[cursor]);
            cursor += 1;
        }
        let results = indices
            .par_iter()
            .enumerate()
            .map(|(slot, &i)| {
                let seed = derive_seed(config.seed, &[1, step, slot as u64]);
                sample_loss(model, data, &data.samples[i], DropoutMode::Train, seed, true)
            })
            .collect::<Result<Vec<_>>>()?;
        let loss = results.iter().map(|(l, _)| l).sum::<f64>() / batch as f64;
        if !loss.is_finite() {
            model.load_tensors(&last_good.tensors)?;
            return Err(TrainingError::Diverged {
                step,
                last_good: Box::new(last_good),
            });
        }
        report.loss_curve.push(loss);
        last_good = Checkpoint::from_model(model, step);

        let store = model.params_mut();
        store.zero_grad();
        let scale = 1.0 / batch as f64;
        for (_, grads) in &results {
            let grads = grads.as_ref().expect("finite loss has gradients");
            for (t, g) in store.tensors_mut().iter_mut().zip(grads) {
                let g: Vec<f64> = g.iter().map(|x| x * scale).collect();
                t.accumulate_grad(&g)?;
            }
        }
        adam.step(store.tensors_mut())?;

        let done = step + 1;
        if config.checkpoint_every > 0 && done % config.checkpoint_every == 0 {
            if let Some(dir) = &config.checkpoint_dir {
                Checkpoint::from_model(model, done).save(&dir.join(format!("step-{done:07}.ckpt")))?;
            }
        }
        if let (Some(v), true) = (val, config.eval_every > 0 && done % config.eval_every.max(1) == 0) {
            report.val_curve.push((done, evaluate(model, v)?));
        }
    }
    Ok(report)
}
