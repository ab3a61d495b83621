use crate::error::{Error, Result};

use super::Tensor;

/// Default central-difference step for 64-bit checks.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Central-difference gradient `(f(x + h e_i) - f(x - h e_i)) / 2h` of a scalar function.
pub fn finite_diff_grad<F>(f: F, x: &Tensor, h: f64) -> Result<Tensor>
where
    F: Fn(&Tensor) -> Result<f64>,
{
    let mut probe = x.clone();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let plus = f(&probe)?;
        probe.data_mut()[i] = orig - h;
        let minus = f(&probe)?;
        probe.data_mut()[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite { op: "finite_diff_grad" });
        }
        out.push((plus - minus) / (2.0 * h));
    }
    Tensor::new(x.shape().to_vec(), out)
}

/// Largest relative error between two gradients, `|a - b| / max(|a|, |b|, floor)`.
///
/// The floor keeps entries that are zero in both from dominating.
pub fn max_relative_error(a: &Tensor, b: &Tensor, floor: f64) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Compares tape gradients of a scalar graph against central differences for
/// every input, returning the worst relative error across all of them.
pub fn tape_gradient_error<F>(inputs: &[Tensor], build: F) -> Result<f64>
where
    F: Fn(&mut super::Tape, &[super::Var]) -> Result<super::Var>,
{
    let mut tape = super::Tape::new();
    let vars = inputs
        .iter()
        .map(|t| tape.param(t.clone()))
        .collect::<Result<Vec<_>>>()?;
    let loss = build(&mut tape, &vars)?;
    let grads = tape.backward(loss)?;
    let mut worst: f64 = 0.0;
    for (k, input) in inputs.iter().enumerate() {
        let analytic = grads
            .get(vars[k])
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(input.shape().to_vec()));
        let numeric = finite_diff_grad(
            |probe| {
                let mut tape = super::Tape::new();
                let vars = inputs
                    .iter()
                    .enumerate()
                    .map(|(j, t)| tape.constant(if j == k { probe.clone() } else { t.clone() }))
                    .collect::<Result<Vec<_>>>()?;
                let out = build(&mut tape, &vars)?;
                tape.value(out).item().ok_or(Error::NonScalarLoss(vec![]))
            },
            input,
            DEFAULT_STEP,
        )?;
        worst = worst.max(max_relative_error(&analytic, &numeric, 1e-6));
    }
    Ok(worst)
}
