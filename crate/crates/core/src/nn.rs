//! Named parameter storage and the small set of layers built on it.

use std::cell::RefCell;

use rand::Rng;

use crate::tensor::{Gradients, Result, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

/// Flat, ordered collection of named parameter tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, t: Tensor) -> ParamId {
        let name = name.into();
        debug_assert!(!self.names.contains(&name), "duplicate parameter {name}");
        self.names.push(name);
        self.tensors.push(t.with_grad());
        ParamId(self.tensors.len() - 1)
    }

    /// Uniform in `[-bound, bound]`.
    pub fn add_uniform(&mut self, name: impl Into<String>, shape: &[usize], bound: f64, rng: &mut impl Rng) -> ParamId {
        let n = shape.iter().product();
        let data = (0..n).map(|_| rng.gen_range(-bound..=bound)).collect();
        self.add(name, Tensor::new(shape.to_vec(), data).expect("shape"))
    }

    pub fn add_filled(&mut self, name: impl Into<String>, shape: &[usize], value: f64) -> ParamId {
        let n = shape.iter().product();
        self.add(name, Tensor::new(shape.to_vec(), vec![value; n]).expect("shape"))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    pub fn zero_grad(&mut self) {
        self.tensors.iter_mut().for_each(Tensor::zero_grad);
    }
}

/// Lazily records parameters on a tape the first time a layer uses them.
pub struct Binder<'s, 't> {
    store: &'s ParamStore,
    tape: &'t Tape,
    vars: RefCell<Vec<Option<Var<'t>>>>,
}

impl<'s, 't> Binder<'s, 't> {
    pub fn new(store: &'s ParamStore, tape: &'t Tape) -> Self {
        Self {
            store,
            tape,
            vars: RefCell::new(vec![None; store.len()]),
        }
    }

    /// Binds every parameter to an already-recorded variable, in store order.
    pub fn from_vars(store: &'s ParamStore, tape: &'t Tape, vars: &[Var<'t>]) -> Self {
        assert_eq!(vars.len(), store.len(), "one variable per parameter");
        Self {
            store,
            tape,
            vars: RefCell::new(vars.iter().copied().map(Some).collect()),
        }
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn store(&self) -> &'s ParamStore {
        self.store
    }

    pub fn get(&self, id: ParamId) -> Var<'t> {
        let mut vars = self.vars.borrow_mut();
        *vars[id.0].get_or_insert_with(|| self.tape.param(self.store.get(id)))
    }

    /// Per-parameter gradients aligned with the store; parameters that were
    /// never used get zeros.
    pub fn gradients(&self, grads: &Gradients) -> Vec<Vec<f64>> {
        let vars = self.vars.borrow();
        vars.iter()
            .zip(self.store.tensors())
            .map(|(v, t)| {
                v.and_then(|v| grads.wrt(v).map(<[f64]>::to_vec))
                    .unwrap_or_else(|| vec![0.0; t.numel()])
            })
            .collect()
    }
}

/// Affine map `x W + b` with `W: in x out`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub inputs: usize,
    pub outputs: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let weight = store.add_uniform(format!("{name}.weight"), &[inputs, outputs], bound, rng);
        let bias = store.add_uniform(format!("{name}.bias"), &[outputs], bound, rng);
        Self {
            weight,
            bias,
            inputs,
            outputs,
        }
    }

    pub fn forward<'t>(&self, b: &Binder<'_, 't>, x: &Var<'t>) -> Result<Var<'t>> {
        x.matmul(&b.get(self.weight))?.add_row(&b.get(self.bias))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, width: usize) -> Self {
        Self {
            gain: store.add_filled(format!("{name}.gain"), &[width], 1.0),
            bias: store.add_filled(format!("{name}.bias"), &[width], 0.0),
        }
    }

    pub fn forward<'t>(&self, b: &Binder<'_, 't>, x: &Var<'t>) -> Result<Var<'t>> {
        x.layer_norm(&b.get(self.gain), &b.get(self.bias), LAYER_NORM_EPS)
    }
}

/// Linear layers with SiLU between them (none after the last).
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    pub fn new(store: &mut ParamStore, name: &str, widths: &[usize], rng: &mut impl Rng) -> Self {
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{name}.{i}"), w[0], w[1], rng))
            .collect();
        Self { layers }
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().expect("non-empty").outputs
    }

    pub fn forward<'t>(&self, b: &Binder<'_, 't>, x: &Var<'t>) -> Result<Var<'t>> {
        let mut h = *x;
        for (i, l) in self.layers.iter().enumerate() {
            if i > 0 {
                h = h.silu();
            }
            h = l.forward(b, &h)?;
        }
        Ok(h)
    }
}
