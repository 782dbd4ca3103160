//! Central finite-difference gradient checking.
//!
//! The numeric side only ever evaluates the forward pass, so it stays
//! independent of the backward rules it validates.

use rand::Rng;

use super::{Result, Tape, Tensor, Var};

/// Denominator floor for the relative error. Below this magnitude the
/// comparison is effectively absolute.
pub const REL_ERROR_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(input index, element index)` of the worst element.
    pub worst: (usize, usize),
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR);
    (analytic - numeric).abs() / denom
}

/// Uniform entries in `[-1, 1]`.
pub fn random_tensor(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches")
}

/// Compares the tape gradient of the scalar `f(inputs)` against central
/// differences with step `h`, for every element of every input.
pub fn check_gradients<F>(inputs: &[Tensor], h: f64, f: F) -> Result<GradCheckReport>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    let eval = |ts: &[Tensor]| -> Result<f64> {
        let tape = Tape::new();
        let vars: Vec<Var> = ts.iter().map(|t| tape.constant(t)).collect();
        Ok(f(&tape, &vars)?.item())
    };

    let tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t)).collect();
    let loss = f(&tape, &vars)?;
    let grads = tape.backward(loss)?;

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (0, 0),
        checked: 0,
    };
    let mut probe: Vec<Tensor> = inputs.to_vec();
    for (i, v) in vars.iter().enumerate() {
        let analytic = grads
            .wrt(*v)
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; inputs[i].numel()]);
        for j in 0..inputs[i].numel() {
            let orig = inputs[i].data()[j];
            probe[i].data_mut()[j] = orig + h;
            let up = eval(&probe)?;
            probe[i].data_mut()[j] = orig - h;
            let down = eval(&probe)?;
            probe[i].data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let err = relative_error(analytic[j], numeric);
            if err > report.max_rel_error || err.is_nan() {
                report.max_rel_error = if err.is_nan() { f64::INFINITY } else { err };
                report.worst = (i, j);
            }
            report.checked += 1;
        }
    }
    Ok(report)
}
