//! Feed-forward network with multiplicative-noise layers: construction,
//! forward passes, and manual backpropagation.

use serde::{Deserialize, Serialize};

use infoplane_core::{Error, KahanSum, Matrix, Real, Result, StreamRng};

use crate::layer::{Activation, DenseParams, LayerSpec};
use crate::loss::softmax_cross_entropy;

/// Derivation tag for the parameter-init stream (offset clear of the
/// per-epoch tags 2e and 2e+1 used by the training loop).
const TAG_INIT: u64 = 1_000_003;

/// Initial α produced by a freshly initialized α-head (bias = ln of
/// this). Kept well under the admissible caps so the clip's
/// zero-gradient region does not freeze the head at birth.
const ALPHA_HEAD_INITIAL: f64 = 0.3;

/// Lower clamp on the learned α. ln α enters the loss, so letting
/// exp(head output) underflow to zero would poison training with
/// infinities. Clamped units pass head gradients only in the direction
/// that re-enters the feasible range, so no unit can wedge itself
/// permanently against a clamp.
const ALPHA_MIN: f64 = 1e-6;

/// How a forward pass treats the noise layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ForwardMode {
    /// Fresh multiplicative noise per call; used by the optimizer.
    Train,
    /// Fresh noise per call on held-out data (MC-dropout inference).
    McInference,
    /// Noise ≡ 1 everywhere.
    Deterministic,
}

impl ForwardMode {
    fn samples_noise(self) -> bool {
        !matches!(self, ForwardMode::Deterministic)
    }
}

/// One parameterized layer instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Layer<S> {
    Dense(DenseParams<S>),
    Activation(Activation),
    GaussianDropout { sigma: S },
    /// Learned input-dependent noise scale: α = clamp(exp(f·W + b)).
    InfoDropout { alpha_max: S, head: DenseParams<S> },
}

/// Gradient (or momentum-velocity) storage for one layer.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerGrad<S> {
    None,
    Dense(DenseParams<S>),
    /// Gradient of the α-head parameters.
    InfoDropout(DenseParams<S>),
}

/// Parameter gradients aligned with the network's layer list.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<S> {
    pub layers: Vec<LayerGrad<S>>,
}

impl<S: Real> Gradients<S> {
    pub fn zeros_like(net: &Network<S>) -> Self {
        let layers = net
            .layers
            .iter()
            .map(|layer| match layer {
                Layer::Dense(p) => LayerGrad::Dense(p.zeros_like()),
                Layer::InfoDropout { head, .. } => LayerGrad::InfoDropout(head.zeros_like()),
                _ => LayerGrad::None,
            })
            .collect();
        Self { layers }
    }
}

/// Loss decomposition for one batch, in nats.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown<S> {
    /// Optimized objective: cross_entropy + β·kl.
    pub total: S,
    /// Batch-mean softmax cross-entropy.
    pub cross_entropy: S,
    /// Batch-mean information-dropout KL, summed over noise units
    /// (log-normal prior with mu = 0, sigma = 1). Left at zero when
    /// β = 0 so the β = 0 objective is cross-entropy *exactly*.
    pub kl: S,
}

/// Result of a public forward pass. The probe fields describe the first
/// dropout layer when one exists: its input f(x) (pre-noise), its output
/// z = f(x) ∘ D (noisy; equals f(x) in deterministic mode), and — for an
/// information-dropout probe — the learned α(x).
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput<S> {
    pub logits: Matrix<S>,
    pub probe_pre_noise: Option<Matrix<S>>,
    pub probe_noisy: Option<Matrix<S>>,
    pub probe_alpha: Option<Matrix<S>>,
}

/// Where a learned α landed relative to its clamp.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Clamp {
    Inside,
    AtMax,
    AtMin,
}

/// Per-layer noise records kept for backpropagation.
enum NoiseCache<S> {
    Gaussian {
        factors: Matrix<S>,
    },
    Info {
        alpha: Matrix<S>,
        eps: Matrix<S>,
        factors: Matrix<S>,
        /// Per-entry clamp state of α.
        clamp: Vec<Clamp>,
    },
    /// Deterministic pass: factors ≡ 1, no record needed (α for an
    /// info layer is still stored for probing).
    Unit {
        alpha: Option<Matrix<S>>,
    },
}

/// Everything backward needs from one forward pass.
pub(crate) struct ForwardCache<S> {
    /// activations[i] = input of layer i; activations[L] = logits.
    activations: Vec<Matrix<S>>,
    noise: Vec<Option<NoiseCache<S>>>,
}

/// A dense feed-forward network with optional multiplicative-noise
/// layers. The first noise layer is the designated probe layer for
/// information-plane analysis; everything before it is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network<S> {
    spec: Vec<LayerSpec>,
    layers: Vec<Layer<S>>,
    input_dim: usize,
    output_dim: usize,
    probe_layer: Option<usize>,
    init_seed: u64,
}

impl<S: Real> Network<S> {
    /// Builds and initializes a network from its layer list. The first
    /// layer must be dense (it fixes the input dimension); widths must
    /// chain; an information-dropout layer must directly follow a
    /// softplus activation, which keeps its activations positive and
    /// the log-normal-prior KL term of the loss well-defined.
    pub fn new(spec: &[LayerSpec], seed: u64) -> Result<Self> {
        if spec.is_empty() {
            return Err(Error::EmptyInput("layer spec"));
        }
        for layer in spec {
            layer.validate()?;
        }
        let input_dim = match spec[0] {
            LayerSpec::Dense { fan_in, .. } => fan_in,
            _ => {
                return Err(Error::Domain {
                    what: "first layer",
                    requirement: "dense (it fixes the input dimension)",
                    got: 0.0,
                })
            }
        };

        let mut rng = StreamRng::new(seed, 0).derive(TAG_INIT);
        let mut width = input_dim;
        let mut layers = Vec::with_capacity(spec.len());
        let mut probe_layer = None;
        for (i, layer) in spec.iter().enumerate() {
            match *layer {
                LayerSpec::Dense { fan_in, fan_out } => {
                    if fan_in != width {
                        return Err(Error::ShapeMismatch {
                            what: "dense layer fan_in",
                            expected_rows: width,
                            expected_cols: fan_out,
                            got_rows: fan_in,
                            got_cols: fan_out,
                        });
                    }
                    layers.push(Layer::Dense(DenseParams::init(
                        fan_in,
                        fan_out,
                        S::zero(),
                        &mut rng,
                    )));
                    width = fan_out;
                }
                LayerSpec::Activation(a) => layers.push(Layer::Activation(a)),
                LayerSpec::GaussianDropout { sigma_sq } => {
                    layers.push(Layer::GaussianDropout {
                        sigma: S::of(sigma_sq.sqrt()),
                    });
                    probe_layer.get_or_insert(i);
                }
                LayerSpec::InfoDropout { alpha_max_sq } => {
                    if !matches!(
                        spec.get(i.wrapping_sub(1)),
                        Some(LayerSpec::Activation(Activation::Softplus))
                    ) {
                        return Err(Error::Domain {
                            what: "info dropout placement",
                            requirement: "directly after a softplus activation",
                            got: i as f64,
                        });
                    }
                    // Zero weights: α starts input-independent at the
                    // initial value, strictly inside the clamp, so every
                    // head unit is live from the first step. (Random
                    // weights can start units beyond α_max, where only
                    // the re-entry direction of the gradient survives.)
                    layers.push(Layer::InfoDropout {
                        alpha_max: S::of(alpha_max_sq.sqrt()),
                        head: DenseParams {
                            weight: Matrix::zeros(width, width),
                            bias: vec![S::of(ALPHA_HEAD_INITIAL.ln()); width],
                        },
                    });
                    probe_layer.get_or_insert(i);
                }
            }
        }
        Ok(Self {
            spec: spec.to_vec(),
            layers,
            input_dim,
            output_dim: width,
            probe_layer,
            init_seed: seed,
        })
    }

    pub fn spec(&self) -> &[LayerSpec] {
        &self.spec
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed
    }

    /// Index (into the layer list) of the first dropout layer.
    pub fn probe_layer(&self) -> Option<usize> {
        self.probe_layer
    }

    /// Spec of the probe layer, when one exists.
    pub fn probe_spec(&self) -> Option<LayerSpec> {
        self.probe_layer.map(|i| self.spec[i])
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::Dense(p) => p.parameter_count(),
                Layer::InfoDropout { head, .. } => head.parameter_count(),
                _ => 0,
            })
            .sum()
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer<S>] {
        &mut self.layers
    }

    fn check_input(&self, inputs: &Matrix<S>) -> Result<()> {
        if inputs.rows() == 0 {
            return Err(Error::EmptyInput("input batch"));
        }
        if inputs.cols() != self.input_dim {
            return Err(Error::ShapeMismatch {
                what: "input batch",
                expected_rows: inputs.rows(),
                expected_cols: self.input_dim,
                got_rows: inputs.rows(),
                got_cols: inputs.cols(),
            });
        }
        Ok(())
    }

    /// Forward pass keeping everything backward needs. Noise is drawn
    /// from `rng` in a fixed order that depends only on the layer list
    /// and batch size, so recreating the rng freezes the realization.
    pub(crate) fn forward_cached(
        &self,
        inputs: &Matrix<S>,
        mode: ForwardMode,
        rng: &mut StreamRng,
    ) -> Result<ForwardCache<S>> {
        self.check_input(inputs)?;
        let rows = inputs.rows();
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(inputs.clone());
        let mut noise = Vec::with_capacity(self.layers.len());

        for layer in &self.layers {
            let x = activations.last().unwrap();
            match layer {
                Layer::Dense(p) => {
                    let y = p.forward(x)?;
                    noise.push(None);
                    activations.push(y);
                }
                Layer::Activation(a) => {
                    let mut y = x.clone();
                    for v in y.data_mut() {
                        *v = a.apply(*v);
                    }
                    noise.push(None);
                    activations.push(y);
                }
                Layer::GaussianDropout { sigma } => {
                    if mode.samples_noise() {
                        let mut factors = Matrix::zeros(rows, x.cols());
                        for f in factors.data_mut() {
                            *f = S::one() + *sigma * S::standard_normal(rng);
                        }
                        let mut z = x.clone();
                        for (zv, &fv) in z.data_mut().iter_mut().zip(factors.data()) {
                            *zv *= fv;
                        }
                        noise.push(Some(NoiseCache::Gaussian { factors }));
                        activations.push(z);
                    } else {
                        noise.push(Some(NoiseCache::Unit { alpha: None }));
                        activations.push(x.clone());
                    }
                }
                Layer::InfoDropout { alpha_max, head } => {
                    let u = head.forward(x)?;
                    let mut alpha = u;
                    let mut clamp = Vec::with_capacity(alpha.data().len());
                    let alpha_min = S::of(ALPHA_MIN);
                    for a in alpha.data_mut() {
                        let raw = a.exp();
                        let clamped = raw.min(*alpha_max).max(alpha_min);
                        clamp.push(if clamped == raw {
                            Clamp::Inside
                        } else if raw > *alpha_max {
                            Clamp::AtMax
                        } else {
                            Clamp::AtMin
                        });
                        *a = clamped;
                    }
                    if mode.samples_noise() {
                        let mut eps = Matrix::zeros(rows, x.cols());
                        for e in eps.data_mut() {
                            *e = S::standard_normal(rng);
                        }
                        let mut factors = Matrix::zeros(rows, x.cols());
                        for ((fv, &av), &ev) in factors
                            .data_mut()
                            .iter_mut()
                            .zip(alpha.data())
                            .zip(eps.data())
                        {
                            *fv = (av * ev).exp();
                        }
                        let mut z = x.clone();
                        for (zv, &fv) in z.data_mut().iter_mut().zip(factors.data()) {
                            *zv *= fv;
                        }
                        noise.push(Some(NoiseCache::Info {
                            alpha,
                            eps,
                            factors,
                            clamp,
                        }));
                        activations.push(z);
                    } else {
                        noise.push(Some(NoiseCache::Unit { alpha: Some(alpha) }));
                        activations.push(x.clone());
                    }
                }
            }
        }
        Ok(ForwardCache { activations, noise })
    }

    /// Forward pass returning logits and the probe layer's view.
    pub fn forward(
        &self,
        inputs: &Matrix<S>,
        mode: ForwardMode,
        rng: &mut StreamRng,
    ) -> Result<ForwardOutput<S>> {
        let mut cache = self.forward_cached(inputs, mode, rng)?;
        let logits = cache.activations.pop().unwrap();
        let (probe_pre_noise, probe_noisy, probe_alpha) = match self.probe_layer {
            None => (None, None, None),
            Some(i) => {
                let pre = cache.activations[i].clone();
                let noisy = if i + 1 < cache.activations.len() {
                    cache.activations[i + 1].clone()
                } else {
                    // The probe layer is last; its output was popped.
                    logits.clone()
                };
                let alpha = match cache.noise[i].take() {
                    Some(NoiseCache::Info { alpha, .. }) => Some(alpha),
                    Some(NoiseCache::Unit { alpha }) => alpha,
                    _ => None,
                };
                (Some(pre), Some(noisy), alpha)
            }
        };
        Ok(ForwardOutput {
            logits,
            probe_pre_noise,
            probe_noisy,
            probe_alpha,
        })
    }

    /// Mean information-dropout KL of the batch from a cache's learned
    /// alphas, summed over noise units (mu = 0, sigma = 1 prior).
    fn kl_from_cache(&self, cache: &ForwardCache<S>) -> S {
        let mut sum = KahanSum::<S>::new();
        let mut batch = 0usize;
        let half = S::of(0.5);
        for record in cache.noise.iter().flatten() {
            let alpha = match record {
                NoiseCache::Info { alpha, .. } => alpha,
                NoiseCache::Unit { alpha: Some(a) } => a,
                _ => continue,
            };
            batch = alpha.rows();
            for &a in alpha.data() {
                sum.add(half * a * a - a.ln() - half);
            }
        }
        if batch == 0 {
            S::zero()
        } else {
            sum.value() / S::of(batch as f64)
        }
    }

    /// Backpropagates ∂L/∂logits through the cached pass, adding the
    /// β-weighted KL gradient at information-dropout layers.
    fn backward(
        &self,
        cache: &ForwardCache<S>,
        dlogits: Matrix<S>,
        beta_over_batch: S,
        grads: &mut Gradients<S>,
    ) {
        let mut dz = dlogits;
        for i in (0..self.layers.len()).rev() {
            let x = &cache.activations[i];
            match (&self.layers[i], &mut grads.layers[i]) {
                (Layer::Dense(p), LayerGrad::Dense(g)) => {
                    let dx = p.backward(x, &dz, g, i > 0);
                    match dx {
                        Some(d) => dz = d,
                        None => break,
                    }
                }
                (Layer::Activation(a), _) => {
                    for (d, &xv) in dz.data_mut().iter_mut().zip(x.data()) {
                        *d *= a.derivative(xv);
                    }
                }
                (Layer::GaussianDropout { .. }, _) => {
                    let Some(NoiseCache::Gaussian { factors }) = &cache.noise[i] else {
                        unreachable!("gaussian dropout backward without sampled noise");
                    };
                    for (d, &f) in dz.data_mut().iter_mut().zip(factors.data()) {
                        *d *= f;
                    }
                }
                (Layer::InfoDropout { head, .. }, LayerGrad::InfoDropout(g)) => {
                    let Some(NoiseCache::Info {
                        alpha,
                        eps,
                        factors,
                        clamp,
                    }) = &cache.noise[i]
                    else {
                        unreachable!("info dropout backward without sampled noise");
                    };
                    // du = (dz·f·D·ε + (β/B)(α − 1/α)) · α. Inside the
                    // clamp this is the exact exp-map gradient; at a
                    // clamp it passes only when the step re-enters the
                    // range (dα < 0 at the max, dα > 0 at the min), so
                    // clamped units recover instead of freezing.
                    let mut du = Matrix::zeros(dz.rows(), dz.cols());
                    for (j, duv) in du.data_mut().iter_mut().enumerate() {
                        let a = alpha.data()[j];
                        let mut da = dz.data()[j] * x.data()[j] * factors.data()[j] * eps.data()[j];
                        if beta_over_batch != S::zero() {
                            da += beta_over_batch * (a - a.recip());
                        }
                        let pass = match clamp[j] {
                            Clamp::Inside => true,
                            Clamp::AtMax => da > S::zero(),
                            Clamp::AtMin => da < S::zero(),
                        };
                        if pass {
                            *duv = da * a;
                        }
                    }
                    let df_head = head
                        .backward(x, &du, g, true)
                        .expect("head backward with need_dx");
                    for ((d, &f), &h) in dz
                        .data_mut()
                        .iter_mut()
                        .zip(factors.data())
                        .zip(df_head.data())
                    {
                        *d = *d * f + h;
                    }
                }
                _ => unreachable!("gradient storage misaligned with layers"),
            }
        }
    }

    /// Noise-free loss over one labeled batch: deterministic-mode
    /// logits and cross-entropy, plus the information-dropout KL (the
    /// learned α exists without sampling). Returns the logits too so
    /// callers can read accuracy off the same pass.
    pub fn deterministic_loss(
        &self,
        inputs: &Matrix<S>,
        labels: &[u8],
        beta: S,
    ) -> Result<(LossBreakdown<S>, Matrix<S>)> {
        let mut rng = StreamRng::new(0, 0); // deterministic mode draws nothing
        let mut cache = self.forward_cached(inputs, ForwardMode::Deterministic, &mut rng)?;
        let logits = cache.activations.pop().unwrap();
        let cross_entropy = crate::loss::cross_entropy_loss(&logits, labels)?;
        let kl = self.kl_from_cache(&cache);
        Ok((
            LossBreakdown {
                total: cross_entropy + beta * kl,
                cross_entropy,
                kl,
            },
            logits,
        ))
    }

    /// Loss and parameter gradients for one labeled batch in train mode.
    /// The objective is batch-mean cross-entropy plus β times the
    /// batch-mean information-dropout KL (summed over noise units);
    /// with β = 0 the KL term is skipped entirely.
    pub fn loss_and_gradients(
        &self,
        inputs: &Matrix<S>,
        labels: &[u8],
        beta: S,
        rng: &mut StreamRng,
    ) -> Result<(LossBreakdown<S>, Gradients<S>)> {
        self.loss_and_gradients_full(inputs, labels, beta, rng)
            .map(|(loss, grads, _)| (loss, grads))
    }

    /// As [`Self::loss_and_gradients`], also returning the noisy logits
    /// (the training loop reads batch accuracy off them for free).
    pub(crate) fn loss_and_gradients_full(
        &self,
        inputs: &Matrix<S>,
        labels: &[u8],
        beta: S,
        rng: &mut StreamRng,
    ) -> Result<(LossBreakdown<S>, Gradients<S>, Matrix<S>)> {
        if !(beta.is_finite() && beta >= S::zero()) {
            return Err(Error::Domain {
                what: "beta",
                requirement: "finite and non-negative",
                got: beta.as_f64(),
            });
        }
        let cache = self.forward_cached(inputs, ForwardMode::Train, rng)?;
        let logits = cache.activations.last().unwrap();
        let (cross_entropy, dlogits) = softmax_cross_entropy(logits, labels)?;

        let kl = if beta == S::zero() {
            S::zero()
        } else {
            self.kl_from_cache(&cache)
        };
        let total = cross_entropy + beta * kl;

        let mut grads = Gradients::zeros_like(self);
        let beta_over_batch = beta / S::of(inputs.rows() as f64);
        self.backward(&cache, dlogits, beta_over_batch, &mut grads);
        let logits = cache.activations.last().unwrap().clone();
        Ok((
            LossBreakdown {
                total,
                cross_entropy,
                kl,
            },
            grads,
            logits,
        ))
    }
}
