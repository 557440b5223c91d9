use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn check_labels(logits: &Tensor, labels: &[usize]) -> Result<(usize, usize)> {
    let shape = logits.shape();
    if shape.len() != 2 || shape[0] != labels.len() || labels.is_empty() {
        return Err(Error::invalid(format!(
            "logits {shape:?} do not match {} labels",
            labels.len()
        )));
    }
    let classes = shape[1];
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::invalid(format!("label {bad} outside 0..{classes}")));
    }
    Ok((shape[0], classes))
}

/// Mean over the batch of `−log softmax(logits)[label]`, max-shifted.
pub fn cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<f64> {
    cross_entropy_with_grad(logits, labels).map(|(loss, _)| loss)
}

/// Cross-entropy and its gradient with respect to the logits.
pub fn cross_entropy_with_grad(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let (batch, classes) = check_labels(logits, labels)?;
    let mut grad = Tensor::zeros(logits.shape());
    let mut total = 0.0;
    let inv = 1.0 / batch as f64;
    for (n, &label) in labels.iter().enumerate() {
        let row = &logits.data()[n * classes..(n + 1) * classes];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_z = max + sum.ln();
        total += log_z - row[label];
        let g = &mut grad.data_mut()[n * classes..(n + 1) * classes];
        for (j, gv) in g.iter_mut().enumerate() {
            let p = (row[j] - log_z).exp();
            *gv = inv * (p - if j == label { 1.0 } else { 0.0 });
        }
    }
    Ok((total * inv, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_logits_give_log_classes() {
        let logits = Tensor::zeros(&[3, 10]);
        let loss = cross_entropy(&logits, &[0, 4, 9]).unwrap();
        assert!((loss - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_margin_is_near_zero() {
        let logits = Tensor::new(&[1, 3], vec![20.0, 0.0, 0.0]).unwrap();
        assert!(cross_entropy(&logits, &[0]).unwrap() < 1e-8);
    }

    #[test]
    fn matches_direct_softmax_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let logits = Tensor::randn(&[4, 3], &mut rng);
        let labels = [2, 0, 1, 1];
        let mut oracle = 0.0;
        for (n, &l) in labels.iter().enumerate() {
            let row = &logits.data()[n * 3..n * 3 + 3];
            let z: f64 = row.iter().map(|v| v.exp()).sum();
            oracle += -(row[l].exp() / z).ln();
        }
        oracle /= 4.0;
        assert!((cross_entropy(&logits, &labels).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_range_label() {
        assert!(cross_entropy(&Tensor::zeros(&[1, 3]), &[3]).is_err());
    }
}
