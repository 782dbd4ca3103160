use rand::Rng;

use super::tape::{sigmoid, DropoutMode, Op, Var};
use super::{Result, TensorError};

fn dim_err(op: &'static str, lhs: Vec<usize>, rhs: Vec<usize>) -> TensorError {
    TensorError::Dimension { op, lhs, rhs }
}

impl<'t> Var<'t> {
    fn same_tape(&self, other: &Var<'_>) {
        assert!(
            std::ptr::eq(self.tape, other.tape),
            "variables recorded on different tapes"
        );
    }

    fn rg(&self) -> bool {
        self.requires_grad()
    }

    fn unary(&self, shape: Vec<usize>, value: Vec<f64>, op: Op) -> Var<'t> {
        let rg = self.rg();
        self.tape.push(shape, value, op, rg)
    }

    fn binary(&self, other: &Var<'_>, shape: Vec<usize>, value: Vec<f64>, op: Op) -> Var<'t> {
        let rg = self.rg() || other.rg();
        self.tape.push(shape, value, op, rg)
    }

    /// `[m x k] · [k x n]`.
    pub fn matmul(&self, other: &Var<'_>) -> Result<Var<'t>> {
        self.same_tape(other);
        let (sa, sb) = (self.shape(), other.shape());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(dim_err("matmul", sa, sb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let a = self.data();
        let b = other.data();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let orow = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let aip = a[i * k + p];
                if aip == 0.0 {
                    continue;
                }
                let brow = &b[p * n..(p + 1) * n];
                orow.iter_mut().zip(brow).for_each(|(o, x)| *o += aip * x);
            }
        }
        Ok(self.binary(
            other,
            vec![m, n],
            out,
            Op::MatMul {
                a: self.id,
                b: other.id,
                m,
                k,
                n,
            },
        ))
    }

    fn elementwise(
        &self,
        other: &Var<'_>,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var<'t>> {
        self.same_tape(other);
        let (sa, sb) = (self.shape(), other.shape());
        if sa != sb {
            return Err(dim_err(name, sa, sb));
        }
        let a = self.data();
        let b = other.data();
        let out = a.iter().zip(&b).map(|(x, y)| f(*x, *y)).collect();
        Ok(self.binary(other, sa, out, op))
    }

    pub fn add(&self, other: &Var<'_>) -> Result<Var<'t>> {
        self.elementwise(other, "add", |x, y| x + y, Op::Add(self.id, other.id))
    }

    pub fn sub(&self, other: &Var<'_>) -> Result<Var<'t>> {
        self.elementwise(other, "sub", |x, y| x - y, Op::Sub(self.id, other.id))
    }

    pub fn mul(&self, other: &Var<'_>) -> Result<Var<'t>> {
        self.elementwise(other, "mul", |x, y| x * y, Op::Mul(self.id, other.id))
    }

    /// Adds a length-`n` vector to every trailing slice of `self`.
    pub fn add_row(&self, row: &Var<'_>) -> Result<Var<'t>> {
        self.same_tape(row);
        let (sa, sr) = (self.shape(), row.shape());
        let n = sa.last().copied().unwrap_or(1);
        if sr.len() != 1 || sr[0] != n {
            return Err(dim_err("add_row", sa, sr));
        }
        let r = row.data();
        let mut out = self.data();
        for chunk in out.chunks_exact_mut(n) {
            chunk.iter_mut().zip(&r).for_each(|(o, x)| *o += x);
        }
        Ok(self.binary(row, sa, out, Op::AddRow { a: self.id, row: row.id }))
    }

    /// Adds a non-differentiable constant of the same shape. Entries of `c`
    /// may be `-inf`.
    pub fn add_const(&self, c: &[f64]) -> Result<Var<'t>> {
        let sa = self.shape();
        if c.len() != sa.iter().product::<usize>() {
            return Err(dim_err("add_const", sa, vec![c.len()]));
        }
        let out = self.data().iter().zip(c).map(|(x, y)| x + y).collect();
        Ok(self.unary(sa, out, Op::AddConst(self.id)))
    }

    pub fn scale(&self, s: f64) -> Var<'t> {
        let out = self.data().iter().map(|x| x * s).collect();
        self.unary(self.shape(), out, Op::Scale(self.id, s))
    }

    /// `x * sigmoid(x)`.
    pub fn silu(&self) -> Var<'t> {
        let out = self.data().iter().map(|&x| x * sigmoid(x)).collect();
        self.unary(self.shape(), out, Op::Silu(self.id))
    }

    pub fn square(&self) -> Var<'t> {
        self.mul(self).expect("same shape")
    }

    pub fn sum(&self) -> Var<'t> {
        let s = self.data().iter().sum();
        self.unary(Vec::new(), vec![s], Op::Sum(self.id))
    }

    pub fn mean(&self) -> Var<'t> {
        let n = self.tape.with_node(self.id, |n| n.value.len()).max(1);
        self.sum().scale(1.0 / n as f64)
    }

    pub fn transpose(&self) -> Result<Var<'t>> {
        let s = self.shape();
        if s.len() != 2 {
            return Err(dim_err("transpose", s, vec![2]));
        }
        let (m, n) = (s[0], s[1]);
        let a = self.data();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = a[i * n + j];
            }
        }
        Ok(self.unary(vec![n, m], out, Op::Transpose { a: self.id, m, n }))
    }

    pub fn reshape(&self, shape: Vec<usize>) -> Result<Var<'t>> {
        let cur = self.shape();
        if shape.iter().product::<usize>() != cur.iter().product::<usize>() {
            return Err(dim_err("reshape", cur, shape));
        }
        Ok(self.unary(shape, self.data(), Op::Reshape(self.id)))
    }

    /// Columns `start..start+len` of every trailing slice.
    pub fn slice_cols(&self, start: usize, len: usize) -> Result<Var<'t>> {
        let s = self.shape();
        let cols = s.last().copied().unwrap_or(1);
        if start + len > cols || s.is_empty() {
            return Err(dim_err("slice_cols", s, vec![start, len]));
        }
        let a = self.data();
        let out: Vec<f64> = a
            .chunks_exact(cols)
            .flat_map(|r| r[start..start + len].iter().copied())
            .collect();
        let mut shape = s;
        *shape.last_mut().unwrap() = len;
        Ok(self.unary(shape, out, Op::SliceCols { a: self.id, start, len }))
    }

    /// Side-by-side concatenation of 2-D variables with equal row counts.
    pub fn concat_cols(parts: &[Var<'t>]) -> Result<Var<'t>> {
        let first = parts
            .first()
            .ok_or_else(|| TensorError::Parameter("concat of nothing".into()))?;
        let rows = first.rows();
        let shapes: Vec<Vec<usize>> = parts.iter().map(Var::shape).collect();
        for s in &shapes {
            if s.len() != 2 || s[0] != rows {
                return Err(dim_err("concat_cols", shapes[0].clone(), s.clone()));
            }
        }
        let total: usize = shapes.iter().map(|s| s[1]).sum();
        let datas: Vec<Vec<f64>> = parts.iter().map(Var::data).collect();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (d, s) in datas.iter().zip(&shapes) {
                out.extend_from_slice(&d[r * s[1]..(r + 1) * s[1]]);
            }
        }
        let rg = parts.iter().any(Var::rg);
        Ok(first.tape.push(
            vec![rows, total],
            out,
            Op::ConcatCols(parts.iter().map(|p| p.id).collect()),
            rg,
        ))
    }

    /// Stacks 2-D variables with equal column counts.
    pub fn concat_rows(parts: &[Var<'t>]) -> Result<Var<'t>> {
        let first = parts
            .first()
            .ok_or_else(|| TensorError::Parameter("concat of nothing".into()))?;
        let cols = first.cols();
        let mut rows = 0;
        let mut out = Vec::new();
        for p in parts {
            let s = p.shape();
            if s.len() != 2 || s[1] != cols {
                return Err(dim_err("concat_rows", first.shape(), s));
            }
            rows += s[0];
            out.extend(p.data());
        }
        let rg = parts.iter().any(Var::rg);
        Ok(first.tape.push(
            vec![rows, cols],
            out,
            Op::ConcatRows(parts.iter().map(|p| p.id).collect()),
            rg,
        ))
    }

    /// Softmax over the trailing dimension with max subtraction. Entries at
    /// `-inf` receive exactly zero weight.
    pub fn softmax_lastdim(&self) -> Result<Var<'t>> {
        let s = self.shape();
        let n = s.last().copied().unwrap_or(1);
        if n == 0 {
            return Err(TensorError::Parameter("softmax over empty dimension".into()));
        }
        let mut out = self.data();
        for (r, row) in out.chunks_exact_mut(n).enumerate() {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                return Err(TensorError::MaskedRow { row: r });
            }
            let mut z = 0.0;
            for v in row.iter_mut() {
                *v = if *v == f64::NEG_INFINITY {
                    0.0
                } else {
                    let e = (*v - max).exp();
                    z += e;
                    e
                };
            }
            row.iter_mut().for_each(|v| *v /= z);
        }
        Ok(self.unary(s, out, Op::Softmax(self.id)))
    }

    /// Normalizes each trailing slice to zero mean and unit variance, then
    /// applies `gain` and `bias`.
    pub fn layer_norm(&self, gain: &Var<'_>, bias: &Var<'_>, eps: f64) -> Result<Var<'t>> {
        self.same_tape(gain);
        self.same_tape(bias);
        let s = self.shape();
        let h = s.last().copied().unwrap_or(1);
        if h == 0 || gain.shape() != [h] || bias.shape() != [h] {
            return Err(dim_err("layer_norm", s, gain.shape()));
        }
        let x = self.data();
        let gv = gain.data();
        let bv = bias.data();
        let rows = x.len() / h;
        let mut xhat = vec![0.0; x.len()];
        let mut inv_std = vec![0.0; rows];
        let mut out = vec![0.0; x.len()];
        for r in 0..rows {
            let xr = &x[r * h..(r + 1) * h];
            let mean = xr.iter().sum::<f64>() / h as f64;
            let var = xr.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / h as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std[r] = is;
            for j in 0..h {
                let xh = (xr[j] - mean) * is;
                xhat[r * h + j] = xh;
                out[r * h + j] = xh * gv[j] + bv[j];
            }
        }
        let rg = self.rg() || gain.rg() || bias.rg();
        Ok(self.tape.push(
            s,
            out,
            Op::LayerNorm {
                x: self.id,
                gain: gain.id,
                bias: bias.id,
                xhat,
                inv_std,
            },
            rg,
        ))
    }

    /// Inverted dropout: zero each element with probability `p` and scale
    /// survivors by `1/(1-p)`. Identity in [`DropoutMode::Eval`] or at `p == 0`.
    pub fn dropout(&self, p: f64, mode: DropoutMode, rng: &mut impl Rng) -> Result<Var<'t>> {
        if !(0.0..1.0).contains(&p) {
            return Err(TensorError::Parameter(format!(
                "dropout probability {p} outside [0, 1)"
            )));
        }
        if p == 0.0 || !mode.is_active() {
            return Ok(*self);
        }
        let keep = 1.0 / (1.0 - p);
        let x = self.data();
        let mask: Vec<f64> = (0..x.len())
            .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
            .collect();
        let out = x.iter().zip(&mask).map(|(a, m)| a * m).collect();
        Ok(self.unary(self.shape(), out, Op::Dropout { a: self.id, mask }))
    }

    /// Max over each group of rows of a 2-D variable, one output row per
    /// group. Ties resolve to the earliest member.
    pub fn group_max(&self, groups: &[Vec<usize>]) -> Result<Var<'t>> {
        let s = self.shape();
        if s.len() != 2 {
            return Err(dim_err("group_max", s, vec![2]));
        }
        let (rows, h) = (s[0], s[1]);
        let x = self.data();
        let mut out = Vec::with_capacity(groups.len() * h);
        let mut argmax = Vec::with_capacity(groups.len() * h);
        for g in groups {
            if g.is_empty() || g.iter().any(|&r| r >= rows) {
                return Err(TensorError::Parameter(format!(
                    "group {g:?} invalid for {rows} rows"
                )));
            }
            for j in 0..h {
                let mut best = g[0] * h + j;
                for &r in &g[1..] {
                    if x[r * h + j] > x[best] {
                        best = r * h + j;
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
        Ok(self.unary(
            vec![groups.len(), h],
            out,
            Op::GroupMax { a: self.id, argmax },
        ))
    }
}
