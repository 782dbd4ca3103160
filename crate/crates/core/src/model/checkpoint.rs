//! Binary checkpoint container.
//!
//! Layout (little endian):
//!
//! ```text
//! magic      8 bytes  "GAIDECKP"
//! version    u32
//! hyper      u32 length + JSON bytes
//! step       u64
//! count      u32
//! per tensor u32 name length + UTF-8 name, u32 rank, rank x u64 dims,
//!            prod(dims) x f64
//! ```

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{GaideModel, Hyper, ModelError, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"GAIDECKP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub hyper: Hyper,
    pub step: u64,
    pub tensors: Vec<(String, Tensor)>,
}

fn bad(msg: impl Into<String>) -> ModelError {
    ModelError::Checkpoint(msg.into())
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.buf.len() {
            return Err(bad("truncated"));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len_prefixed(&mut self) -> Result<&'a [u8]> {
        let n = self.u32()? as usize;
        self.take(n)
    }
}

impl Checkpoint {
    pub fn from_model(model: &GaideModel, step: u64) -> Self {
        let store = model.params();
        Self {
            hyper: model.hyper().clone(),
            step,
            tensors: store
                .names()
                .iter()
                .zip(store.tensors())
                .map(|(n, t)| (n.clone(), Tensor::new(t.shape().to_vec(), t.data().to_vec()).expect("shape")))
                .collect(),
        }
    }

    /// Rebuilds the model, validating every tensor name and shape.
    pub fn to_model(&self) -> Result<GaideModel> {
        let mut model = GaideModel::new(self.hyper.clone(), &mut ChaCha8Rng::seed_from_u64(0))?;
        model.load_tensors(&self.tensors)?;
        Ok(model)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let hyper = serde_json::to_vec(&self.hyper).expect("hyper serializes");
        out.extend_from_slice(&(hyper.len() as u32).to_le_bytes());
        out.extend_from_slice(&hyper);
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Parses the container. Shapes are checked against the hyperparameters
    /// by [`Checkpoint::to_model`].
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(bad("bad magic"));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let hyper: Hyper = serde_json::from_slice(r.len_prefixed()?).map_err(|e| bad(format!("hyper: {e}")))?;
        hyper.validate()?;
        let step = r.u64()?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(4096));
        for _ in 0..count {
            let name = std::str::from_utf8(r.len_prefixed()?)
                .map_err(|_| bad("tensor name is not UTF-8"))?
                .to_owned();
            let rank = r.u32()? as usize;
            if rank > 8 {
                return Err(bad(format!("{name}: rank {rank} too large")));
            }
            let mut shape = Vec::with_capacity(rank);
            let mut numel: usize = 1;
            for _ in 0..rank {
                let d = usize::try_from(r.u64()?).map_err(|_| bad("dimension overflow"))?;
                numel = numel.checked_mul(d).ok_or_else(|| bad("dimension overflow"))?;
                shape.push(d);
            }
            let bytes = numel.checked_mul(8).ok_or_else(|| bad("dimension overflow"))?;
            let raw = r.take(bytes)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            tensors.push((name, Tensor::new(shape, data)?));
        }
        if !r.buf.is_empty() {
            return Err(bad(format!("{} trailing bytes", r.buf.len())));
        }
        Ok(Self { hyper, step, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
