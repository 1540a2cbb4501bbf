//! Softmax cross-entropy in nats, with its gradient.

use infoplane_core::{log_sum_exp, Error, KahanSum, Matrix, Real, Result};

fn check_labels<S: Real>(logits: &Matrix<S>, labels: &[u8]) -> Result<()> {
    if logits.rows() == 0 {
        return Err(Error::EmptyInput("logits"));
    }
    if labels.len() != logits.rows() {
        return Err(Error::LengthMismatch {
            what: "labels",
            expected: logits.rows(),
            got: labels.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&y| (y as usize) >= logits.cols()) {
        return Err(Error::Domain {
            what: "label",
            requirement: "less than the number of classes",
            got: bad as f64,
        });
    }
    Ok(())
}

/// Batch-mean cross-entropy between softmax(logits) and the labels.
pub fn cross_entropy_loss<S: Real>(logits: &Matrix<S>, labels: &[u8]) -> Result<S> {
    check_labels(logits, labels)?;
    let mut sum = KahanSum::<S>::new();
    for (row, &y) in logits.iter_rows().zip(labels) {
        sum.add(log_sum_exp(row)? - row[y as usize]);
    }
    Ok(sum.value() / S::of(logits.rows() as f64))
}

/// Batch-mean cross-entropy and ∂loss/∂logits (softmax − onehot, divided
/// by the batch size so the gradient matches the mean loss).
pub fn softmax_cross_entropy<S: Real>(
    logits: &Matrix<S>,
    labels: &[u8],
) -> Result<(S, Matrix<S>)> {
    check_labels(logits, labels)?;
    let batch = logits.rows();
    let inv_batch = S::of(batch as f64).recip();
    let mut sum = KahanSum::<S>::new();
    let mut dlogits = Matrix::zeros(batch, logits.cols());
    for (i, (row, &y)) in logits.iter_rows().zip(labels).enumerate() {
        let lse = log_sum_exp(row)?;
        sum.add(lse - row[y as usize]);
        let drow = dlogits.row_mut(i);
        for (d, &l) in drow.iter_mut().zip(row) {
            *d = (l - lse).exp() * inv_batch;
        }
        drow[y as usize] -= inv_batch;
    }
    Ok((sum.value() * inv_batch, dlogits))
}

/// Fraction of rows whose argmax matches the label (first max wins ties).
pub fn accuracy<S: Real>(logits: &Matrix<S>, labels: &[u8]) -> Result<f64> {
    check_labels(logits, labels)?;
    let mut correct = 0usize;
    for (row, &y) in logits.iter_rows().zip(labels) {
        let mut best = 0usize;
        for (j, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = j;
            }
        }
        if best == y as usize {
            correct += 1;
        }
    }
    Ok(correct as f64 / labels.len() as f64)
}
