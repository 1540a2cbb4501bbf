//! Layer descriptions, parameters, and the dense/activation kernels.

use serde::{Deserialize, Serialize};

use infoplane_core::{Error, Matrix, Real, Result, StreamRng};

/// Elementwise nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Softplus,
}

impl Activation {
    #[inline]
    pub fn apply<S: Real>(self, x: S) -> S {
        match self {
            Activation::Relu => x.max(S::zero()),
            // ln(1 + e^x) = max(x, 0) + ln(1 + e^-|x|), overflow-safe.
            Activation::Softplus => x.max(S::zero()) + (-x.abs()).exp().ln_1p(),
        }
    }

    /// Derivative expressed in terms of the layer *input* x.
    #[inline]
    pub fn derivative<S: Real>(self, x: S) -> S {
        match self {
            Activation::Relu => {
                if x > S::zero() {
                    S::one()
                } else {
                    S::zero()
                }
            }
            // σ(x) = 1/(1+e^-x), evaluated overflow-safe from -|x|.
            Activation::Softplus => {
                let e = (-x.abs()).exp();
                if x >= S::zero() {
                    (S::one() + e).recip()
                } else {
                    e / (S::one() + e)
                }
            }
        }
    }
}

/// One layer of the feed-forward architecture description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LayerSpec {
    /// Fully connected affine map.
    Dense { fan_in: usize, fan_out: usize },
    /// Elementwise nonlinearity.
    Activation(Activation),
    /// Multiplicative Gaussian noise D ~ N(1, σ²), elementwise.
    GaussianDropout { sigma_sq: f64 },
    /// Multiplicative log-normal noise D = exp(α(x)·ε) with a learned,
    /// input-dependent α clipped at √alpha_max_sq.
    InfoDropout { alpha_max_sq: f64 },
}

impl LayerSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LayerSpec::Dense { fan_in, fan_out } => {
                if fan_in == 0 || fan_out == 0 {
                    return Err(Error::Domain {
                        what: "dense layer fan",
                        requirement: "positive",
                        got: 0.0,
                    });
                }
                Ok(())
            }
            LayerSpec::Activation(_) => Ok(()),
            LayerSpec::GaussianDropout { sigma_sq } => {
                if !(sigma_sq.is_finite() && sigma_sq > 0.0) {
                    return Err(Error::Domain {
                        what: "gaussian dropout sigma_sq",
                        requirement: "positive and finite",
                        got: sigma_sq,
                    });
                }
                Ok(())
            }
            LayerSpec::InfoDropout { alpha_max_sq } => {
                if !(alpha_max_sq > 0.0 && alpha_max_sq < 1.0) {
                    return Err(Error::Domain {
                        what: "info dropout alpha_max_sq",
                        requirement: "inside (0, 1)",
                        got: alpha_max_sq,
                    });
                }
                Ok(())
            }
        }
    }

    /// True for the layer kinds that inject multiplicative noise.
    pub fn is_dropout(&self) -> bool {
        matches!(
            self,
            LayerSpec::GaussianDropout { .. } | LayerSpec::InfoDropout { .. }
        )
    }
}

/// Weights and bias of one affine map, stored fan_in × fan_out so a
/// row of `weight` is the output-space image of one input coordinate
/// (keeps both forward and weight-gradient loops on contiguous rows).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseParams<S> {
    pub weight: Matrix<S>,
    pub bias: Vec<S>,
}

impl<S: Real> DenseParams<S> {
    /// Uniform init in ±√(6/(fan_in+fan_out)); bias defaults to
    /// `bias_init` (0 for ordinary layers).
    pub fn init(fan_in: usize, fan_out: usize, bias_init: S, rng: &mut StreamRng) -> Self {
        let limit = S::of((6.0 / (fan_in + fan_out) as f64).sqrt());
        let mut weight = Matrix::zeros(fan_in, fan_out);
        for w in weight.data_mut() {
            // Uniform in [-limit, limit) from a 53-bit mantissa draw.
            let u = infoplane_core::sampling::uniform_unit(rng);
            *w = (S::of(2.0) * S::of(u) - S::one()) * limit;
        }
        Self {
            weight,
            bias: vec![bias_init; fan_out],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            weight: Matrix::zeros(self.weight.rows(), self.weight.cols()),
            bias: vec![S::zero(); self.bias.len()],
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.cols()
    }

    pub fn parameter_count(&self) -> usize {
        self.weight.rows() * self.weight.cols() + self.bias.len()
    }

    /// y = x·W + b for a batch of row vectors.
    pub fn forward(&self, x: &Matrix<S>) -> Result<Matrix<S>> {
        if x.cols() != self.fan_in() {
            return Err(Error::ShapeMismatch {
                what: "dense input",
                expected_rows: x.rows(),
                expected_cols: self.fan_in(),
                got_rows: x.rows(),
                got_cols: x.cols(),
            });
        }
        let mut y = Matrix::zeros(x.rows(), self.fan_out());
        for (i, xi) in x.iter_rows().enumerate() {
            let yi = y.row_mut(i);
            yi.copy_from_slice(&self.bias);
            for (k, &xv) in xi.iter().enumerate() {
                if xv == S::zero() {
                    continue; // ReLU inputs are often sparse
                }
                for (yv, &wv) in yi.iter_mut().zip(self.weight.row(k)) {
                    *yv += xv * wv;
                }
            }
        }
        Ok(y)
    }

    /// Backward pass: given x and ∂L/∂y, accumulates ∂L/∂W and ∂L/∂b
    /// into `grad` and returns ∂L/∂x unless `need_dx` is false (the
    /// first layer has no upstream to feed).
    pub fn backward(
        &self,
        x: &Matrix<S>,
        dy: &Matrix<S>,
        grad: &mut Self,
        need_dx: bool,
    ) -> Option<Matrix<S>> {
        for (i, dyi) in dy.iter_rows().enumerate() {
            let xi = x.row(i);
            for (db, &d) in grad.bias.iter_mut().zip(dyi) {
                *db += d;
            }
            for (k, &xv) in xi.iter().enumerate() {
                if xv == S::zero() {
                    continue;
                }
                for (gw, &d) in grad.weight.row_mut(k).iter_mut().zip(dyi) {
                    *gw += xv * d;
                }
            }
        }
        if !need_dx {
            return None;
        }
        let mut dx = Matrix::zeros(x.rows(), self.fan_in());
        for (i, dyi) in dy.iter_rows().enumerate() {
            let dxi = dx.row_mut(i);
            for (k, dxv) in dxi.iter_mut().enumerate() {
                let mut acc = S::zero();
                for (&d, &wv) in dyi.iter().zip(self.weight.row(k)) {
                    acc += d * wv;
                }
                *dxv = acc;
            }
        }
        Some(dx)
    }
}
