use ndarray::{Array2, Zip};

use crate::{Error, Result};

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Hard decoding; exactly 0.5 rounds to 1.
pub fn round_half_up(p: f64) -> f64 {
    if p >= 0.5 {
        1.0
    } else {
        0.0
    }
}

/// Surrogate derivative of rounding at `p`:
/// `k e^{-k(p-0.5)} / (e^{-k(p-0.5)} + 1)^2`.
pub fn surrogate_grad(p: f64, k: f64) -> f64 {
    let e = (-k * (p - 0.5)).exp();
    if e.is_infinite() {
        return 0.0;
    }
    k * e / ((e + 1.0) * (e + 1.0))
}

/// The smooth function whose derivative is [`surrogate_grad`]:
/// a sigmoid of sharpness `k` centred at 0.5. Used to build a
/// differentiable stand-in for rounding when checking gradients.
pub fn surrogate_smooth(p: f64, k: f64) -> f64 {
    sigmoid(k * (p - 0.5))
}

/// `upstream ⊙ s'(p)`, the backward rule substituted for rounding.
pub fn surrogate_round_backward(p: &Array2<f64>, upstream: &Array2<f64>, k: f64) -> Result<Array2<f64>> {
    if p.dim() != upstream.dim() {
        return Err(Error::Shape(format!("{:?} vs {:?}", p.dim(), upstream.dim())));
    }
    Ok(Zip::from(p)
        .and(upstream)
        .map_collect(|&p, &g| g * surrogate_grad(p, k)))
}

/// Binary cross entropy on logits: batch mean of the per-instance sum over
/// items. Returns the loss and its gradient with respect to the logits.
pub fn bce_loss(logits: &Array2<f64>, labels: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    if logits.dim() != labels.dim() {
        return Err(Error::Shape(format!(
            "logits {:?} vs labels {:?}",
            logits.dim(),
            labels.dim()
        )));
    }
    let b = logits.nrows() as f64;
    let mut total = 0.0;
    let grad = Zip::from(logits).and(labels).map_collect(|&z, &y| {
        total += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
        (sigmoid(z) - y) / b
    });
    Ok((total / b, grad))
}
