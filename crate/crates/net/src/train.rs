//! SGD-with-momentum training loop with probe hooks.

use serde::{Deserialize, Serialize};

use infoplane_core::{Error, KahanSum, Matrix, Real, Result, StreamRng};

use crate::layer::DenseParams;
use crate::loss::accuracy;
use crate::network::{Gradients, Layer, LayerGrad, LossBreakdown, Network};

/// A dataset slice: input rows with optional class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch<S> {
    pub inputs: Matrix<S>,
    pub labels: Option<Vec<u8>>,
}

impl<S: Real> SampleBatch<S> {
    pub fn labeled(inputs: Matrix<S>, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != inputs.rows() {
            return Err(Error::LengthMismatch {
                what: "labels",
                expected: inputs.rows(),
                got: labels.len(),
            });
        }
        Ok(Self {
            inputs,
            labels: Some(labels),
        })
    }

    pub fn unlabeled(inputs: Matrix<S>) -> Self {
        Self {
            inputs,
            labels: None,
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn labels(&self) -> Result<&[u8]> {
        self.labels
            .as_deref()
            .ok_or(Error::EmptyInput("labels (required for training)"))
    }

    /// Copies the given rows (and labels) into a fresh batch.
    pub fn gather(&self, idx: &[usize]) -> Self {
        let mut inputs = Matrix::zeros(idx.len(), self.inputs.cols());
        for (dst, &src) in idx.iter().enumerate() {
            inputs.row_mut(dst).copy_from_slice(self.inputs.row(src));
        }
        let labels = self
            .labels
            .as_ref()
            .map(|l| idx.iter().map(|&i| l[i]).collect());
        Self { inputs, labels }
    }
}

/// Optimization settings. `lr_schedule` entries (epoch, multiplier)
/// rescale the learning rate at the *start* of that 1-based epoch.
/// `probe_epochs` lists when the probe hook fires: 0 means before any
/// step, e ≥ 1 after epoch e completes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub lr_schedule: Vec<(usize, f64)>,
    pub seed: u64,
    /// Weight of the information-dropout KL penalty.
    pub beta: f64,
    pub probe_epochs: Vec<usize>,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Domain {
                what: "batch size",
                requirement: "at least 1",
                got: 0.0,
            });
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Domain {
                what: "learning rate",
                requirement: "positive and finite",
                got: self.learning_rate,
            });
        }
        if !(self.momentum.is_finite() && (0.0..1.0).contains(&self.momentum)) {
            return Err(Error::Domain {
                what: "momentum",
                requirement: "within [0, 1)",
                got: self.momentum,
            });
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::Domain {
                what: "beta",
                requirement: "finite and non-negative",
                got: self.beta,
            });
        }
        if let Some(&(_, m)) = self
            .lr_schedule
            .iter()
            .find(|(_, m)| !(m.is_finite() && *m > 0.0))
        {
            return Err(Error::Domain {
                what: "learning-rate multiplier",
                requirement: "positive and finite",
                got: m,
            });
        }
        Ok(())
    }
}

/// Per-epoch training statistics (epoch 0 rows come from a
/// deterministic pre-training evaluation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean optimized objective over the epoch's samples.
    pub loss: f64,
    pub cross_entropy: f64,
    pub kl: f64,
    pub accuracy: f64,
    pub learning_rate: f64,
}

/// The training loop's own record (the information-plane trace is the
/// probe hook's concern).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainRecord {
    pub epochs: Vec<EpochStats>,
}

/// Snapshot handed to the probe hook.
pub struct ProbeEvent<'a, S> {
    pub epoch: usize,
    pub net: &'a Network<S>,
    pub stats: &'a EpochStats,
}

/// Mean noise-free loss and accuracy over a labeled set, processed in
/// `batch_size` chunks to bound memory.
pub fn evaluate<S: Real>(
    net: &Network<S>,
    data: &SampleBatch<S>,
    beta: f64,
    batch_size: usize,
) -> Result<(LossBreakdown<f64>, f64)> {
    let labels = data.labels()?;
    if data.is_empty() {
        return Err(Error::EmptyInput("evaluation set"));
    }
    let mut ce = KahanSum::<f64>::new();
    let mut kl = KahanSum::<f64>::new();
    let mut correct = 0.0f64;
    let mut start = 0usize;
    while start < data.len() {
        let end = (start + batch_size.max(1)).min(data.len());
        let idx: Vec<usize> = (start..end).collect();
        let chunk = data.gather(&idx);
        let chunk_labels = &labels[start..end];
        let (loss, logits) =
            net.deterministic_loss(&chunk.inputs, chunk_labels, S::of(beta))?;
        let weight = (end - start) as f64;
        ce.add(loss.cross_entropy.as_f64() * weight);
        kl.add(loss.kl.as_f64() * weight);
        correct += accuracy(&logits, chunk_labels)? * weight;
        start = end;
    }
    let n = data.len() as f64;
    let cross_entropy = ce.value() / n;
    let kl = kl.value() / n;
    Ok((
        LossBreakdown {
            total: cross_entropy + beta * kl,
            cross_entropy,
            kl,
        },
        correct / n,
    ))
}

/// Applies one SGD-with-momentum step: v ← μ·v + g, p ← p − lr·v.
fn sgd_step<S: Real>(
    net: &mut Network<S>,
    grads: &Gradients<S>,
    velocity: &mut Gradients<S>,
    lr: S,
    momentum: S,
) {
    fn update<S: Real>(p: &mut DenseParams<S>, g: &DenseParams<S>, v: &mut DenseParams<S>, lr: S, mu: S) {
        for ((pv, &gv), vv) in p
            .weight
            .data_mut()
            .iter_mut()
            .zip(g.weight.data())
            .zip(v.weight.data_mut())
        {
            *vv = mu * *vv + gv;
            *pv -= lr * *vv;
        }
        for ((pb, &gb), vb) in p.bias.iter_mut().zip(&g.bias).zip(v.bias.iter_mut()) {
            *vb = mu * *vb + gb;
            *pb -= lr * *vb;
        }
    }

    for ((layer, grad), vel) in net
        .layers_mut()
        .iter_mut()
        .zip(&grads.layers)
        .zip(&mut velocity.layers)
    {
        match (layer, grad, vel) {
            (Layer::Dense(p), LayerGrad::Dense(g), LayerGrad::Dense(v)) => {
                update(p, g, v, lr, momentum)
            }
            (
                Layer::InfoDropout { head, .. },
                LayerGrad::InfoDropout(g),
                LayerGrad::InfoDropout(v),
            ) => update(head, g, v, lr, momentum),
            _ => {}
        }
    }
}

/// Trains in place with SGD + momentum; fires `probe` per
/// `config.probe_epochs`. Reproducible: everything random derives from
/// `config.seed`. A non-finite loss aborts with the failing epoch.
pub fn train<S: Real, F>(
    net: &mut Network<S>,
    data: &SampleBatch<S>,
    config: &TrainConfig,
    mut probe: F,
) -> Result<TrainRecord>
where
    F: FnMut(ProbeEvent<'_, S>) -> Result<()>,
{
    config.validate()?;
    let labels = data.labels()?;
    let n = data.len();
    if n == 0 {
        return Err(Error::EmptyInput("training set"));
    }
    if config.batch_size > n {
        return Err(Error::Domain {
            what: "batch size",
            requirement: "at most the dataset size",
            got: config.batch_size as f64,
        });
    }

    let root = StreamRng::new(config.seed, 0);
    let mut record = TrainRecord::default();
    let mut velocity = Gradients::zeros_like(net);
    let mut lr = config.learning_rate;

    if config.probe_epochs.contains(&0) {
        let (loss, acc) = evaluate(net, data, config.beta, config.batch_size)?;
        let stats = EpochStats {
            epoch: 0,
            loss: loss.total,
            cross_entropy: loss.cross_entropy,
            kl: loss.kl,
            accuracy: acc,
            learning_rate: lr,
        };
        record.epochs.push(stats);
        probe(ProbeEvent {
            epoch: 0,
            net,
            stats: record.epochs.last().unwrap(),
        })?;
    }

    for epoch in 1..=config.epochs {
        for &(at, mult) in &config.lr_schedule {
            if at == epoch {
                lr *= mult;
            }
        }
        let mut shuffle_rng = root.derive(2 * epoch as u64);
        let order = shuffle_rng.choose_k_indices(n, n);
        let mut noise_rng = root.derive(2 * epoch as u64 + 1);

        let mut loss_sum = KahanSum::<f64>::new();
        let mut ce_sum = KahanSum::<f64>::new();
        let mut kl_sum = KahanSum::<f64>::new();
        let mut correct = 0.0f64;
        for chunk in order.chunks(config.batch_size) {
            let mb = data.gather(chunk);
            let mb_labels: Vec<u8> = chunk.iter().map(|&i| labels[i]).collect();
            let (loss, grads, logits) = net.loss_and_gradients_full(
                &mb.inputs,
                &mb_labels,
                S::of(config.beta),
                &mut noise_rng,
            )?;
            if !loss.total.is_finite() {
                return Err(Error::Training {
                    epoch,
                    what: "non-finite loss (training diverged)".to_string(),
                });
            }
            let w = chunk.len() as f64;
            loss_sum.add(loss.total.as_f64() * w);
            ce_sum.add(loss.cross_entropy.as_f64() * w);
            kl_sum.add(loss.kl.as_f64() * w);
            correct += accuracy(&logits, &mb_labels)? * w;
            sgd_step(net, &grads, &mut velocity, S::of(lr), S::of(config.momentum));
        }

        let stats = EpochStats {
            epoch,
            loss: loss_sum.value() / n as f64,
            cross_entropy: ce_sum.value() / n as f64,
            kl: kl_sum.value() / n as f64,
            accuracy: correct / n as f64,
            learning_rate: lr,
        };
        record.epochs.push(stats);
        if config.probe_epochs.contains(&epoch) {
            probe(ProbeEvent {
                epoch,
                net,
                stats: record.epochs.last().unwrap(),
            })?;
        }
    }
    Ok(record)
}
