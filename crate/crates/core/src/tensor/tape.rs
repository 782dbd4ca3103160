use std::cell::RefCell;

use super::{Result, Tensor, TensorError};

/// How dropout behaves for a forward pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropoutMode {
    Train,
    /// Dropout kept active at deployment so repeated queries differ.
    StochasticInfer,
    Eval,
}

impl DropoutMode {
    pub fn is_active(self) -> bool {
        !matches!(self, DropoutMode::Eval)
    }
}

pub(super) enum Op {
    Leaf,
    MatMul {
        a: usize,
        b: usize,
        m: usize,
        k: usize,
        n: usize,
    },
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    AddRow {
        a: usize,
        row: usize,
    },
    AddConst(usize),
    Scale(usize, f64),
    Silu(usize),
    Sum(usize),
    Transpose {
        a: usize,
        m: usize,
        n: usize,
    },
    SliceCols {
        a: usize,
        start: usize,
        len: usize,
    },
    ConcatCols(Vec<usize>),
    ConcatRows(Vec<usize>),
    Softmax(usize),
    LayerNorm {
        x: usize,
        gain: usize,
        bias: usize,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Dropout {
        a: usize,
        mask: Vec<f64>,
    },
    GroupMax {
        a: usize,
        argmax: Vec<usize>,
    },
    Reshape(usize),
}

pub(super) struct Node {
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub op: Op,
    pub requires_grad: bool,
}

/// Record of executed operations for one forward pass.
///
/// Nodes are appended in execution order, so every node's parents precede
/// it and a reverse sweep visits each node once.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    pub(super) tape: &'t Tape,
    pub(super) id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.id)
            .field("shape", &self.shape())
            .finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&mut self) {
        self.nodes.get_mut().clear();
    }

    pub(super) fn push(&self, shape: Vec<usize>, value: Vec<f64>, op: Op, requires_grad: bool) -> Var<'_> {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            shape,
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    pub(super) fn with_node<R>(&self, id: usize, f: impl FnOnce(&Node) -> R) -> R {
        f(&self.nodes.borrow()[id])
    }

    /// Records a leaf; it is differentiable iff `t.requires_grad()`.
    pub fn leaf(&self, t: &Tensor) -> Var<'_> {
        self.push(t.shape.clone(), t.data.clone(), Op::Leaf, t.requires_grad)
    }

    /// Records a differentiable leaf regardless of the tensor's flag.
    pub fn param(&self, t: &Tensor) -> Var<'_> {
        self.push(t.shape.clone(), t.data.clone(), Op::Leaf, true)
    }

    pub fn constant(&self, t: &Tensor) -> Var<'_> {
        self.push(t.shape.clone(), t.data.clone(), Op::Leaf, false)
    }

    pub fn constant_from(&self, shape: Vec<usize>, data: Vec<f64>) -> Result<Var<'_>> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(TensorError::Shape {
                shape,
                len: data.len(),
            });
        }
        Ok(self.push(shape, data, Op::Leaf, false))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        let root = &nodes[loss.id];
        if root.value.len() != 1 {
            return Err(TensorError::NonScalarLoss(root.shape.clone()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.id + 1];
        grads[loss.id] = Some(vec![1.0]);

        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            propagate(&nodes, node, &g, &mut grads);
            grads[id] = Some(g);
        }
        Ok(Gradients { grads })
    }
}

fn accumulate(nodes: &[Node], grads: &mut [Option<Vec<f64>>], id: usize, f: impl FnOnce(&mut [f64])) {
    if !nodes[id].requires_grad {
        return;
    }
    let slot = grads[id].get_or_insert_with(|| vec![0.0; nodes[id].value.len()]);
    f(slot);
}

fn propagate(nodes: &[Node], node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
    match &node.op {
        Op::Leaf => {}
        &Op::MatMul { a, b, m, k, n } => {
            let av = &nodes[a].value;
            let bv = &nodes[b].value;
            // dA = G Bᵀ
            accumulate(nodes, grads, a, |ga| {
                for i in 0..m {
                    let grow = &g[i * n..(i + 1) * n];
                    for p in 0..k {
                        let brow = &bv[p * n..(p + 1) * n];
                        ga[i * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                    }
                }
            });
            // dB = Aᵀ G
            accumulate(nodes, grads, b, |gb| {
                for i in 0..m {
                    let grow = &g[i * n..(i + 1) * n];
                    for p in 0..k {
                        let aip = av[i * k + p];
                        if aip == 0.0 {
                            continue;
                        }
                        let dst = &mut gb[p * n..(p + 1) * n];
                        dst.iter_mut().zip(grow).for_each(|(d, x)| *d += aip * x);
                    }
                }
            });
        }
        &Op::Add(a, b) => {
            accumulate(nodes, grads, a, |ga| add_into(ga, g));
            accumulate(nodes, grads, b, |gb| add_into(gb, g));
        }
        &Op::Sub(a, b) => {
            accumulate(nodes, grads, a, |ga| add_into(ga, g));
            accumulate(nodes, grads, b, |gb| gb.iter_mut().zip(g).for_each(|(d, x)| *d -= x));
        }
        &Op::Mul(a, b) => {
            let av = &nodes[a].value;
            let bv = &nodes[b].value;
            accumulate(nodes, grads, a, |ga| {
                for i in 0..g.len() {
                    ga[i] += g[i] * bv[i];
                }
            });
            accumulate(nodes, grads, b, |gb| {
                for i in 0..g.len() {
                    gb[i] += g[i] * av[i];
                }
            });
        }
        &Op::AddRow { a, row } => {
            accumulate(nodes, grads, a, |ga| add_into(ga, g));
            let n = nodes[row].value.len();
            accumulate(nodes, grads, row, |gr| {
                for chunk in g.chunks_exact(n) {
                    add_into(gr, chunk);
                }
            });
        }
        &Op::AddConst(a) | &Op::Reshape(a) => accumulate(nodes, grads, a, |ga| add_into(ga, g)),
        &Op::Scale(a, s) => accumulate(nodes, grads, a, |ga| {
            ga.iter_mut().zip(g).for_each(|(d, x)| *d += s * x)
        }),
        &Op::Silu(a) => {
            let av = &nodes[a].value;
            accumulate(nodes, grads, a, |ga| {
                for i in 0..g.len() {
                    let s = sigmoid(av[i]);
                    ga[i] += g[i] * s * (1.0 + av[i] * (1.0 - s));
                }
            });
        }
        &Op::Sum(a) => accumulate(nodes, grads, a, |ga| ga.iter_mut().for_each(|d| *d += g[0])),
        &Op::Transpose { a, m, n } => accumulate(nodes, grads, a, |ga| {
            // output is n x m
            for i in 0..m {
                for j in 0..n {
                    ga[i * n + j] += g[j * m + i];
                }
            }
        }),
        &Op::SliceCols { a, start, len } => {
            let cols = *nodes[a].shape.last().unwrap();
            accumulate(nodes, grads, a, |ga| {
                for (r, grow) in g.chunks_exact(len).enumerate() {
                    add_into(&mut ga[r * cols + start..r * cols + start + len], grow);
                }
            });
        }
        Op::ConcatCols(parts) => {
            let total = *node.shape.last().unwrap();
            let mut offset = 0;
            for &p in parts {
                let w = *nodes[p].shape.last().unwrap();
                accumulate(nodes, grads, p, |gp| {
                    for (r, dst) in gp.chunks_exact_mut(w).enumerate() {
                        add_into(dst, &g[r * total + offset..r * total + offset + w]);
                    }
                });
                offset += w;
            }
        }
        Op::ConcatRows(parts) => {
            let mut offset = 0;
            for &p in parts {
                let len = nodes[p].value.len();
                accumulate(nodes, grads, p, |gp| add_into(gp, &g[offset..offset + len]));
                offset += len;
            }
        }
        &Op::Softmax(a) => {
            let y = &node.value;
            let n = *node.shape.last().unwrap();
            accumulate(nodes, grads, a, |ga| {
                for ((yr, gr), dr) in y.chunks_exact(n).zip(g.chunks_exact(n)).zip(ga.chunks_exact_mut(n)) {
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for j in 0..n {
                        // masked entries have y == 0 exactly
                        if yr[j] != 0.0 {
                            dr[j] += yr[j] * (gr[j] - dot);
                        }
                    }
                }
            });
        }
        Op::LayerNorm {
            x,
            gain,
            bias,
            xhat,
            inv_std,
        } => {
            let h = nodes[*gain].value.len();
            let gv = &nodes[*gain].value;
            accumulate(nodes, grads, *gain, |dg| {
                for (xr, gr) in xhat.chunks_exact(h).zip(g.chunks_exact(h)) {
                    for j in 0..h {
                        dg[j] += gr[j] * xr[j];
                    }
                }
            });
            accumulate(nodes, grads, *bias, |db| {
                for gr in g.chunks_exact(h) {
                    add_into(db, gr);
                }
            });
            accumulate(nodes, grads, *x, |dx| {
                let hf = h as f64;
                for (r, ((xr, gr), dr)) in xhat
                    .chunks_exact(h)
                    .zip(g.chunks_exact(h))
                    .zip(dx.chunks_exact_mut(h))
                    .enumerate()
                {
                    let mut sum_dxhat = 0.0;
                    let mut sum_dxhat_xhat = 0.0;
                    for j in 0..h {
                        let d = gr[j] * gv[j];
                        sum_dxhat += d;
                        sum_dxhat_xhat += d * xr[j];
                    }
                    let s = inv_std[r];
                    for j in 0..h {
                        let d = gr[j] * gv[j];
                        dr[j] += s * (d - sum_dxhat / hf - xr[j] * sum_dxhat_xhat / hf);
                    }
                }
            });
        }
        Op::Dropout { a, mask } => accumulate(nodes, grads, *a, |ga| {
            for i in 0..g.len() {
                ga[i] += g[i] * mask[i];
            }
        }),
        Op::GroupMax { a, argmax } => accumulate(nodes, grads, *a, |ga| {
            for (i, &src) in argmax.iter().enumerate() {
                ga[src] += g[i];
            }
        }),
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

pub(super) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Gradients produced by one [`Tape::backward`] call, indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// `None` when `v` does not influence the loss or does not require grad.
    pub fn wrt(&self, v: Var<'_>) -> Option<&[f64]> {
        self.grads.get(v.id).and_then(|g| g.as_deref())
    }

    /// Accumulates the gradient of `v` into `t.grad`, zero-filling when `v`
    /// did not reach the loss.
    pub fn write_into(&self, v: Var<'_>, t: &mut Tensor) -> Result<()> {
        match self.wrt(v) {
            Some(g) => t.accumulate_grad(g),
            None => t.accumulate_grad(&vec![0.0; t.numel()]),
        }
    }
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.with_node(self.id, |n| n.shape.clone())
    }

    pub fn data(&self) -> Vec<f64> {
        self.tape.with_node(self.id, |n| n.value.clone())
    }

    pub fn to_tensor(&self) -> Tensor {
        self.tape.with_node(self.id, |n| Tensor {
            shape: n.shape.clone(),
            data: n.value.clone(),
            requires_grad: false,
            grad: None,
        })
    }

    /// Value of a single-element variable.
    pub fn item(&self) -> f64 {
        self.tape.with_node(self.id, |n| n.value[0])
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.with_node(self.id, |n| n.requires_grad)
    }

    pub fn cols(&self) -> usize {
        self.tape.with_node(self.id, |n| n.shape.last().copied().unwrap_or(1))
    }

    pub fn rows(&self) -> usize {
        self.tape.with_node(self.id, |n| {
            let c = n.shape.last().copied().unwrap_or(1);
            if c == 0 {
                0
            } else {
                n.value.len() / c
            }
        })
    }
}
