//! Squared error of the equilibrium implied by the network's `α̂`, and its
//! gradient through the closed-form equilibrium.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::network::{Gradients, OmegaNetwork};
use super::SurrogateError;
use crate::scalar::Scalar;

/// Row-wise `q̂_c = α̂_c/2 - δ_c Q̂`, `Q̂ = ½ Σ α̂ / (1 + Σ δ)`.
pub fn ne_batch<T: Scalar>(alpha: ArrayView2<T>, delta: &[T]) -> Array2<T> {
    let half = T::of(0.5);
    let kappa = half / (T::one() + delta.iter().fold(T::zero(), |s, &d| s + d));
    let d = Array1::from(delta.to_vec());
    let q_w = alpha.sum_axis(Axis(1)) * kappa;
    let mut q = &alpha * half;
    for (mut row, &qw) in q.rows_mut().into_iter().zip(&q_w) {
        row.zip_mut_with(&d, |x, &dc| *x = *x - dc * qw);
    }
    q
}

/// `∂L/∂α̂_k = ½ g_k - κ Σ_c g_c δ_c` per row, with `g = ∂L/∂q̂`.
pub fn ne_backward<T: Scalar>(grad_q: ArrayView2<T>, delta: &[T]) -> Array2<T> {
    let half = T::of(0.5);
    let kappa = half / (T::one() + delta.iter().fold(T::zero(), |s, &d| s + d));
    let d = Array1::from(delta.to_vec());
    let shared = grad_q.dot(&d) * kappa;
    let mut out = &grad_q * half;
    for (mut row, &s) in out.rows_mut().into_iter().zip(&shared) {
        row.mapv_inplace(|x| x - s);
    }
    out
}

/// `L = Σ_j Σ_c (q̂_c(λ_j) - q_{jc})²` over the rows of `lambdas` and
/// `targets`, and its gradient in the network parameters.
pub fn loss_and_gradient<T: Scalar>(
    net: &OmegaNetwork<T>,
    lambdas: ArrayView2<T>,
    targets: ArrayView2<T>,
    delta: &[T],
) -> Result<(T, Gradients<T>), SurrogateError> {
    if lambdas.nrows() == 0 {
        return Err(SurrogateError::InvalidConfig("empty batch".into()));
    }
    if targets.dim() != (lambdas.nrows(), net.output_dim()) || delta.len() != net.output_dim() {
        return Err(SurrogateError::ShapeMismatch {
            expected: net.output_dim(),
            got: if delta.len() != net.output_dim() {
                delta.len()
            } else {
                targets.ncols()
            },
        });
    }
    let cache = net.forward_cached(lambdas)?;
    if !cache.output.iter().all(|x| x.is_finite()) {
        return Err(SurrogateError::NonFinite {
            epoch: None,
            what: "network output".into(),
        });
    }
    let residual = ne_batch(cache.output.view(), delta) - targets;
    let loss = residual.iter().fold(T::zero(), |s, &r| s + r * r);
    let grad_q = residual * T::of(2.0);
    let grad_alpha = ne_backward(grad_q.view(), delta);
    let grads = net.backward(&cache, grad_alpha.view());
    if !loss.is_finite() || !grads.is_finite() {
        return Err(SurrogateError::NonFinite {
            epoch: None,
            what: "loss or gradient".into(),
        });
    }
    Ok((loss, grads))
}
