//! Stable reductions, sample covariance, and Gaussian entropies (nats).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::StreamRng;
use crate::scalar::Real;
use crate::SINGULARITY_RATIO;

/// Compensated (Kahan–Neumaier) accumulator.
///
/// Summation order is always caller-fixed in this workspace, so results
/// are reproducible across runs; the compensation keeps million-term
/// entropy averages accurate to near machine precision.
#[derive(Debug, Clone, Copy)]
pub struct KahanSum<S> {
    sum: S,
    compensation: S,
}

impl<S: Real> Default for KahanSum<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Real> KahanSum<S> {
    pub fn new() -> Self {
        Self {
            sum: S::zero(),
            compensation: S::zero(),
        }
    }

    #[inline]
    pub fn add(&mut self, v: S) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.compensation += (self.sum - t) + v;
        } else {
            self.compensation += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> S {
        self.sum + self.compensation
    }
}

/// Sums in slice order with compensation.
pub fn kahan_sum<S: Real>(values: impl IntoIterator<Item = S>) -> S {
    let mut acc = KahanSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// log Σ exp(values[i]), computed by shifting with the maximum so that
/// inputs anywhere within ±1e300 cannot overflow.
pub fn log_sum_exp<S: Real>(values: &[S]) -> Result<S> {
    let Some(&first) = values.first() else {
        return Err(Error::EmptyInput("log_sum_exp values"));
    };
    let max = values.iter().skip(1).fold(first, |m, &v| m.max(v));
    if max == S::neg_infinity() {
        // All terms are exp(-inf) = 0; log of zero sum.
        return Ok(S::neg_infinity());
    }
    let mut acc = KahanSum::new();
    for &v in values {
        acc.add((v - max).exp());
    }
    Ok(max + acc.value().ln())
}

/// Mean and standard error of the mean (sample standard deviation over
/// √n; zero for a single value).
pub fn mean_and_standard_error<S: Real>(values: &[S]) -> Result<(S, S)> {
    if values.is_empty() {
        return Err(Error::EmptyInput("mean_and_standard_error values"));
    }
    let n = S::of(values.len() as f64);
    let mean = kahan_sum(values.iter().copied()) / n;
    if values.len() == 1 {
        return Ok((mean, S::zero()));
    }
    let ss = kahan_sum(values.iter().map(|&v| (v - mean) * (v - mean)));
    let var = ss / (n - S::one());
    Ok((mean, (var / n).sqrt()))
}

/// Symmetric positive semi-definite matrix with validated structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceMatrix<S> {
    dim: usize,
    entries: Matrix<S>,
}

impl<S: Real> CovarianceMatrix<S> {
    /// Validates squareness, finiteness, symmetry (1e-12 relative), and
    /// non-negative diagonal.
    pub fn new(entries: Matrix<S>) -> Result<Self> {
        let dim = entries.rows();
        if entries.cols() != dim {
            return Err(Error::ShapeMismatch {
                what: "covariance matrix",
                expected_rows: dim,
                expected_cols: dim,
                got_rows: entries.rows(),
                got_cols: entries.cols(),
            });
        }
        if !entries.is_finite() {
            return Err(Error::NonFinite("covariance matrix"));
        }
        for i in 0..dim {
            if entries.get(i, i) < S::zero() {
                return Err(Error::Domain {
                    what: "covariance diagonal",
                    requirement: "non-negative",
                    got: entries.get(i, i).as_f64(),
                });
            }
            for j in (i + 1)..dim {
                let a = entries.get(i, j).as_f64();
                let b = entries.get(j, i).as_f64();
                let scale = a.abs().max(b.abs());
                if (a - b).abs() > 1e-12 * scale.max(1.0) {
                    return Err(Error::Domain {
                        what: "covariance matrix",
                        requirement: "symmetric within 1e-12 relative",
                        got: (a - b).abs(),
                    });
                }
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &Matrix<S> {
        &self.entries
    }
}

/// Unbiased sample covariance (divisor `rows - 1`) of row-vector samples.
///
/// Two-pass: column means first, then centered cross-products. The result
/// is symmetric by construction; permuting sample rows changes it only at
/// rounding level.
pub fn sample_covariance<S: Real>(samples: &Matrix<S>) -> Result<CovarianceMatrix<S>> {
    let m = samples.rows();
    let n = samples.cols();
    if m < 2 {
        return Err(Error::Domain {
            what: "sample count",
            requirement: "at least 2",
            got: m as f64,
        });
    }
    let mut means = vec![KahanSum::<S>::new(); n];
    for row in samples.iter_rows() {
        for (acc, &v) in means.iter_mut().zip(row) {
            acc.add(v);
        }
    }
    let inv_m = S::one() / S::of(m as f64);
    let means: Vec<S> = means.iter().map(|a| a.value() * inv_m).collect();

    let mut upper: Matrix<S> = Matrix::zeros(n, n);
    let mut centered = vec![S::zero(); n];
    for row in samples.iter_rows() {
        for ((c, &v), &mu) in centered.iter_mut().zip(row).zip(&means) {
            *c = v - mu;
        }
        for i in 0..n {
            let ci = centered[i];
            let dst = &mut upper.row_mut(i)[i..];
            for (d, &cj) in dst.iter_mut().zip(&centered[i..]) {
                *d += ci * cj;
            }
        }
    }
    let denom = S::one() / S::of((m - 1) as f64);
    let mut entries = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = upper.get(i, j) * denom;
            // Rounding can push a zero-variance diagonal slightly negative.
            let v = if i == j { v.max(S::zero()) } else { v };
            entries.set(i, j, v);
            entries.set(j, i, v);
        }
    }
    CovarianceMatrix::new(entries)
}

/// Entropy of a Gaussian with the given covariance, in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianEntropy<S> {
    /// N/2·ln(2π) + ½·ln det(Σ) + N/2 when the factorization succeeds;
    /// the Hadamard relaxation N/2·ln(2πe) + ½·Σᵢ ln σᵢᵢ² otherwise.
    pub nats: S,
    /// True when the covariance was numerically singular and the value
    /// is the Hadamard diagonal-product relaxation (which upper-bounds
    /// the true Gaussian entropy: det(Σ) ≤ ∏ σᵢᵢ²).
    pub hadamard_relaxed: bool,
}

/// Closed-form Gaussian entropy with a singularity fallback.
///
/// "Numerically singular" means a Cholesky pivot ≤ 0 or smaller than
/// [`SINGULARITY_RATIO`] times the largest pivot. The factorization runs
/// in `f64` regardless of `S`.
pub fn gaussian_entropy<S: Real>(cov: &CovarianceMatrix<S>) -> GaussianEntropy<S> {
    let n = cov.dim();
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    if n == 0 {
        return GaussianEntropy {
            nats: S::zero(),
            hadamard_relaxed: false,
        };
    }

    if let Some(ln_det) = cholesky_ln_det(cov) {
        let nats = 0.5 * (n as f64) * ln_2pi + 0.5 * ln_det + 0.5 * (n as f64);
        GaussianEntropy {
            nats: S::of(nats),
            hadamard_relaxed: false,
        }
    } else {
        let mut ln_diag = KahanSum::new();
        for i in 0..n {
            ln_diag.add(cov.entries().get(i, i).as_f64().ln());
        }
        let nats = 0.5 * (n as f64) * (ln_2pi + 1.0) + 0.5 * ln_diag.value();
        GaussianEntropy {
            nats: S::of(nats),
            hadamard_relaxed: true,
        }
    }
}

/// ln det(Σ) via an in-place Cholesky factorization, or `None` when a
/// pivot signals numerical singularity.
fn cholesky_ln_det<S: Real>(cov: &CovarianceMatrix<S>) -> Option<f64> {
    let n = cov.dim();
    let mut a = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = cov.entries().get(i, j).as_f64();
        }
    }
    let mut pivots = Vec::with_capacity(n);
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d <= 0.0 {
            return None;
        }
        pivots.push(d);
        let l_jj = d.sqrt();
        a[j * n + j] = l_jj;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / l_jj;
        }
    }
    let max_pivot = pivots.iter().cloned().fold(f64::MIN, f64::max);
    let min_pivot = pivots.iter().cloned().fold(f64::MAX, f64::min);
    if min_pivot < SINGULARITY_RATIO * max_pivot {
        return None;
    }
    Some(kahan_sum(pivots.iter().map(|p| p.ln())))
}

/// Gaussian with diagonal covariance, parameterized by per-dimension
/// mean and standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagGaussian<S> {
    mean: Vec<S>,
    std: Vec<S>,
}

impl<S: Real> DiagGaussian<S> {
    /// Validates matching lengths and strictly positive standard
    /// deviations.
    pub fn new(mean: Vec<S>, std: Vec<S>) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::EmptyInput("DiagGaussian mean"));
        }
        if mean.len() != std.len() {
            return Err(Error::LengthMismatch {
                what: "DiagGaussian std",
                expected: mean.len(),
                got: std.len(),
            });
        }
        for &s in &std {
            if !(s > S::zero()) || !s.is_finite() {
                return Err(Error::Domain {
                    what: "DiagGaussian std",
                    requirement: "strictly positive and finite",
                    got: s.as_f64(),
                });
            }
        }
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[S] {
        &self.mean
    }

    pub fn std(&self) -> &[S] {
        &self.std
    }

    /// Log density at `z`, in nats.
    pub fn log_density(&self, z: &[S]) -> Result<S> {
        if z.len() != self.mean.len() {
            return Err(Error::LengthMismatch {
                what: "DiagGaussian query point",
                expected: self.mean.len(),
                got: z.len(),
            });
        }
        let half_ln_2pi = S::of(0.5 * (2.0 * std::f64::consts::PI).ln());
        let mut acc = KahanSum::new();
        for ((&zi, &mu), &sd) in z.iter().zip(&self.mean).zip(&self.std) {
            let u = (zi - mu) / sd;
            acc.add(-S::of(0.5) * u * u - sd.ln() - half_ln_2pi);
        }
        Ok(acc.value())
    }

    /// Differential entropy Σᵢ ln(σᵢ·√(2πe)), in nats.
    pub fn entropy(&self) -> S {
        let half_ln_2pi_e = S::of(0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln());
        kahan_sum(self.std.iter().map(|&s| s.ln() + half_ln_2pi_e))
    }

    /// One draw.
    pub fn sample(&self, rng: &mut StreamRng) -> Vec<S> {
        self.mean
            .iter()
            .zip(&self.std)
            .map(|(&mu, &sd)| mu + sd * S::standard_normal(rng))
            .collect()
    }
}
