//! Plug-in discrete MI after per-dimension quantization of the
//! representation.

use serde::{Deserialize, Serialize};

use infoplane_core::{Error, KahanSum, Matrix, Real, Result};

/// How each representation dimension is quantized. Bin edges always span
/// the observed per-dimension `[min, max]` of the noisy samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BinningMode<S> {
    /// A fixed number of equal-width bins per dimension.
    FixedCount(usize),
    /// Equal-width bins of the given width, anchored at the observed
    /// minimum; the count per dimension becomes ⌈range/width⌉.
    FixedWidth(S),
}

/// Quantization settings for the binning estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinningConfig<S> {
    pub mode: BinningMode<S>,
}

impl<S: Real> BinningConfig<S> {
    pub fn fixed_count(bins_per_dimension: usize) -> Self {
        Self {
            mode: BinningMode::FixedCount(bins_per_dimension),
        }
    }

    pub fn fixed_width(width: S) -> Self {
        Self {
            mode: BinningMode::FixedWidth(width),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            BinningMode::FixedCount(b) if b == 0 => Err(Error::Domain {
                what: "bins per dimension",
                requirement: "at least 1",
                got: 0.0,
            }),
            // Bin indices are packed into u32 keys.
            BinningMode::FixedCount(b) if b > u32::MAX as usize => Err(Error::Domain {
                what: "bins per dimension",
                requirement: "at most 2^32 - 1",
                got: b as f64,
            }),
            BinningMode::FixedCount(_) => Ok(()),
            BinningMode::FixedWidth(w) if w.is_finite() && w > S::zero() => Ok(()),
            BinningMode::FixedWidth(w) => Err(Error::Domain {
                what: "bin width",
                requirement: "positive and finite",
                got: w.as_f64(),
            }),
        }
    }
}

/// Per-dimension affine quantizer fitted to observed ranges. Index
/// arithmetic runs in f64 (exact for f32 inputs) so the same data bins
/// identically regardless of the scalar type that produced it.
struct Quantizer {
    mins: Vec<f64>,
    inv_widths: Vec<f64>,
    /// Highest admissible index per dimension (count − 1); 0 collapses
    /// the dimension to a single bin.
    tops: Vec<i64>,
}

impl Quantizer {
    fn fit<S: Real>(data: &Matrix<S>, config: &BinningConfig<S>) -> Result<Self> {
        config.validate()?;
        if data.rows() == 0 || data.cols() == 0 {
            return Err(Error::EmptyInput("samples to bin"));
        }
        if !data.is_finite() {
            return Err(Error::NonFinite("samples to bin"));
        }
        let dims = data.cols();
        let mut mins = vec![f64::INFINITY; dims];
        let mut maxs = vec![f64::NEG_INFINITY; dims];
        for row in data.iter_rows() {
            for (i, &v) in row.iter().enumerate() {
                let v = v.as_f64();
                mins[i] = mins[i].min(v);
                maxs[i] = maxs[i].max(v);
            }
        }
        let mut inv_widths = vec![0.0; dims];
        let mut tops = vec![0i64; dims];
        for i in 0..dims {
            let range = maxs[i] - mins[i];
            if range <= 0.0 {
                continue; // constant dimension: single bin
            }
            let count = match config.mode {
                BinningMode::FixedCount(b) => b as f64,
                BinningMode::FixedWidth(w) => (range / w.as_f64()).ceil().max(1.0),
            };
            let width = match config.mode {
                BinningMode::FixedCount(b) => range / b as f64,
                BinningMode::FixedWidth(w) => w.as_f64(),
            };
            inv_widths[i] = width.recip();
            // Saturating cast: absurdly narrow widths degrade to
            // "every value its own bin", never to wrap-around.
            tops[i] = (count as i64 - 1).clamp(0, u32::MAX as i64);
        }
        Ok(Self {
            mins,
            inv_widths,
            tops,
        })
    }

    fn key<S: Real>(&self, row: &[S]) -> Vec<u32> {
        row.iter()
            .enumerate()
            .map(|(i, &v)| {
                if self.tops[i] == 0 {
                    0
                } else {
                    let t = (v.as_f64() - self.mins[i]) * self.inv_widths[i];
                    (t.floor() as i64).clamp(0, self.tops[i]) as u32
                }
            })
            .collect()
    }
}

/// c·ln c term of a plug-in entropy, with 0·ln 0 = 0.
fn count_ln_count(c: usize) -> f64 {
    if c == 0 {
        0.0
    } else {
        let c = c as f64;
        c * c.ln()
    }
}

/// Plug-in entropy Ĥ = ln M − (1/M) Σ c·ln c over the multiset of keys.
/// Sort-based run counting; exact 0 for a single symbol and exact ln M
/// when all keys are distinct.
fn plugin_entropy(mut keys: Vec<Vec<u32>>) -> f64 {
    let m = keys.len();
    keys.sort_unstable();
    let mut sum = KahanSum::<f64>::new();
    let mut run = 1usize;
    for i in 1..m {
        if keys[i] == keys[i - 1] {
            run += 1;
        } else {
            sum.add(count_ln_count(run));
            run = 1;
        }
    }
    sum.add(count_ln_count(run));
    (m as f64).ln() - sum.value() / m as f64
}

/// Binning estimate of I(X;Ẑ) in nats: Ĥ(Ẑ) − Ĥ(Ẑ|X) with plug-in
/// entropies. `noisy_samples` must hold the masks for input j in rows
/// `j·masks .. (j+1)·masks` (the layout [`draw_noisy_samples`] emits);
/// Ĥ(Ẑ|X) averages the per-input mask entropies, so a deterministic
/// representation with one mask per input reduces to Ĥ(Ẑ).
///
/// [`draw_noisy_samples`]: crate::mi::draw_noisy_samples
pub fn mi_binning<S: Real>(
    pre_noise: &Matrix<S>,
    noisy_samples: &Matrix<S>,
    config: &BinningConfig<S>,
) -> Result<S> {
    if pre_noise.rows() == 0 {
        return Err(Error::EmptyInput("pre-noise representations"));
    }
    if noisy_samples.cols() != pre_noise.cols() {
        return Err(Error::ShapeMismatch {
            what: "noisy samples",
            expected_rows: noisy_samples.rows(),
            expected_cols: pre_noise.cols(),
            got_rows: noisy_samples.rows(),
            got_cols: noisy_samples.cols(),
        });
    }
    if noisy_samples.rows() % pre_noise.rows() != 0 {
        return Err(Error::Domain {
            what: "noisy sample rows",
            requirement: "an integer multiple of the pre-noise rows",
            got: noisy_samples.rows() as f64,
        });
    }
    let quantizer = Quantizer::fit(noisy_samples, config)?;
    let keys: Vec<Vec<u32>> = noisy_samples.iter_rows().map(|r| quantizer.key(r)).collect();

    let h_z = plugin_entropy(keys.clone());

    let masks = noisy_samples.rows() / pre_noise.rows();
    let mut cond = KahanSum::<f64>::new();
    for j in 0..pre_noise.rows() {
        cond.add(plugin_entropy(keys[j * masks..(j + 1) * masks].to_vec()));
    }
    let h_z_given_x = cond.value() / pre_noise.rows() as f64;

    Ok(S::of(h_z - h_z_given_x))
}

/// Binning estimate of I(Y;Ẑ) in nats: Ĥ(Ẑ) + Ĥ(Y) − Ĥ(Ẑ,Y), all
/// plug-in. `labels` must align row-for-row with `noisy_samples`
/// (repeat each input's label once per mask).
pub fn mi_labels_binning<S: Real>(
    noisy_samples: &Matrix<S>,
    labels: &[u8],
    config: &BinningConfig<S>,
) -> Result<S> {
    if labels.len() != noisy_samples.rows() {
        return Err(Error::LengthMismatch {
            what: "labels",
            expected: noisy_samples.rows(),
            got: labels.len(),
        });
    }
    let quantizer = Quantizer::fit(noisy_samples, config)?;
    let z_keys: Vec<Vec<u32>> = noisy_samples.iter_rows().map(|r| quantizer.key(r)).collect();

    let joint_keys: Vec<Vec<u32>> = z_keys
        .iter()
        .zip(labels)
        .map(|(k, &y)| {
            let mut joint = k.clone();
            joint.push(y as u32);
            joint
        })
        .collect();
    let y_keys: Vec<Vec<u32>> = labels.iter().map(|&y| vec![y as u32]).collect();

    let h_z = plugin_entropy(z_keys);
    let h_y = plugin_entropy(y_keys);
    let h_joint = plugin_entropy(joint_keys);
    Ok(S::of(h_z + h_y - h_joint))
}
