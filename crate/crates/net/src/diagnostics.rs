//! Central-finite-difference verification of the analytic gradients.
//!
//! The network draws noise in an order that depends only on the layer
//! list and batch size, never on parameter values, so recreating the
//! same [`StreamRng`] freezes the noise realization. That turns the
//! noisy loss into a deterministic function of the parameters, which a
//! central difference can probe one parameter at a time.

use infoplane_core::{Error, Matrix, Result, StreamRng};

use crate::network::{Gradients, Layer, LayerGrad, Network};

/// One parameter where the analytic gradient and the central difference
/// disagree beyond both tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdFailure {
    /// Flat parameter index (weights before bias within each
    /// parameterized layer, in layer order).
    pub index: usize,
    pub analytic: f64,
    pub finite_difference: f64,
}

/// Outcome of a full finite-difference sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    pub parameter_count: usize,
    /// Largest |analytic − finite difference| over all parameters.
    pub max_abs_error: f64,
    pub failures: Vec<FdFailure>,
}

impl FdReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Adds `delta` to the parameter at flat index `idx`. Returns false
/// once the index walks off the end of the parameter list.
fn nudge<S: infoplane_core::Real>(net: &mut Network<S>, mut idx: usize, delta: S) -> bool {
    for layer in net.layers_mut() {
        let params = match layer {
            Layer::Dense(p) => p,
            Layer::InfoDropout { head, .. } => head,
            _ => continue,
        };
        let w = params.weight.data_mut();
        if idx < w.len() {
            w[idx] += delta;
            return true;
        }
        idx -= w.len();
        if idx < params.bias.len() {
            params.bias[idx] += delta;
            return true;
        }
        idx -= params.bias.len();
    }
    false
}

/// Reads the analytic gradient at the same flat index.
fn grad_at(grads: &Gradients<f64>, mut idx: usize) -> Option<f64> {
    for layer in &grads.layers {
        let params = match layer {
            LayerGrad::Dense(p) => p,
            LayerGrad::InfoDropout(p) => p,
            LayerGrad::None => continue,
        };
        let w = params.weight.data();
        if idx < w.len() {
            return Some(w[idx]);
        }
        idx -= w.len();
        if idx < params.bias.len() {
            return Some(params.bias[idx]);
        }
        idx -= params.bias.len();
    }
    None
}

/// Loss under the frozen noise realization `(seed, stream)`.
fn frozen_loss(
    net: &Network<f64>,
    inputs: &Matrix<f64>,
    labels: &[u8],
    beta: f64,
    seed: u64,
    stream: u64,
) -> Result<f64> {
    let mut rng = StreamRng::new(seed, stream);
    let (loss, _) = net.loss_and_gradients(inputs, labels, beta, &mut rng)?;
    Ok(loss.total)
}

/// Sweeps every parameter of `net`, comparing the analytic gradient of
/// the frozen-noise loss against a central difference with step `step`.
/// A parameter fails when its absolute error exceeds `abs_tol` *and*
/// its relative error (denominator max(|fd|, 1e-12)) exceeds `rel_tol`.
pub fn finite_difference_check(
    net: &Network<f64>,
    inputs: &Matrix<f64>,
    labels: &[u8],
    beta: f64,
    noise_seed: u64,
    noise_stream: u64,
    step: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<FdReport> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::Domain {
            what: "finite-difference step",
            requirement: "positive and finite",
            got: step,
        });
    }
    let mut rng = StreamRng::new(noise_seed, noise_stream);
    let (_, analytic) = net.loss_and_gradients(inputs, labels, beta, &mut rng)?;

    let parameter_count = net.parameter_count();
    let mut max_abs_error = 0.0f64;
    let mut failures = Vec::new();
    for idx in 0..parameter_count {
        let g = grad_at(&analytic, idx)
            .ok_or(Error::Degenerate(format!("parameter index {idx} unreachable")))?;
        let mut plus = net.clone();
        if !nudge(&mut plus, idx, step) {
            return Err(Error::Degenerate(format!(
                "parameter walker ended before index {idx}"
            )));
        }
        let mut minus = net.clone();
        nudge(&mut minus, idx, -step);
        let fd = (frozen_loss(&plus, inputs, labels, beta, noise_seed, noise_stream)?
            - frozen_loss(&minus, inputs, labels, beta, noise_seed, noise_stream)?)
            / (2.0 * step);

        let abs_err = (g - fd).abs();
        let rel_err = abs_err / fd.abs().max(1e-12);
        max_abs_error = max_abs_error.max(abs_err);
        if abs_err > abs_tol && rel_err > rel_tol {
            failures.push(FdFailure {
                index: idx,
                analytic: g,
                finite_difference: fd,
            });
        }
    }
    // The walker and the gradient reader must agree on where the
    // parameters end.
    if grad_at(&analytic, parameter_count).is_some() || nudge(&mut net.clone(), parameter_count, 0.0)
    {
        return Err(Error::Degenerate(
            "parameter walkers disagree on the parameter count".to_string(),
        ));
    }
    Ok(FdReport {
        parameter_count,
        max_abs_error,
        failures,
    })
}
