use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::datasets::LabeledDataset;
use crate::error::{Error, Result};

const MAX_DRAWS: u64 = 100;

/// Dirichlet(α·1) sample, drawn in log space so that tiny α does not
/// underflow every component to zero: `Gamma(α) = Gamma(α+1) · U^{1/α}`.
fn dirichlet<R: Rng + ?Sized>(k: usize, alpha: f64, rng: &mut R) -> Vec<f64> {
    let gamma = Gamma::new(alpha + 1.0, 1.0).expect("positive shape");
    let logs: Vec<f64> = (0..k)
        .map(|_| {
            let g: f64 = gamma.sample(rng);
            let u: f64 = 1.0 - rng.random::<f64>();
            g.ln() + u.ln() / alpha
        })
        .collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Integer counts summing to `n`, each the floor of `p·n` plus one for the
/// largest fractional parts (ties to the lower index).
fn largest_remainder(p: &[f64], n: usize) -> Vec<usize> {
    let exact: Vec<f64> = p.iter().map(|q| q * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

fn draw(labels: &[usize], class_count: usize, clients: usize, alpha: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut shards = vec![Vec::new(); clients];
    for c in 0..class_count {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if idx.is_empty() {
            continue;
        }
        idx.shuffle(rng);
        let counts = largest_remainder(&dirichlet(clients, alpha, rng), idx.len());
        let mut at = 0;
        for (shard, n) in shards.iter_mut().zip(counts) {
            shard.extend_from_slice(&idx[at..at + n]);
            at += n;
        }
    }
    shards
}

/// Split sample indices across `clients` with per-class Dirichlet(α)
/// proportions. Draws are repeated until every client is nonempty; after
/// the last draw, empty clients take one sample from the largest shard.
pub fn dirichlet_partition(
    labels: &[usize],
    class_count: usize,
    clients: usize,
    alpha: f64,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if clients == 0 {
        return Err(Error::invalid("need at least one client"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= class_count) {
        return Err(Error::invalid(format!("label {l} outside 0..{class_count}")));
    }
    if labels.len() < clients {
        return Err(Error::PartitionExhausted { seed, alpha });
    }
    let mut shards = Vec::new();
    for attempt in 0..MAX_DRAWS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt);
        shards = draw(labels, class_count, clients, alpha, &mut rng);
        if shards.iter().all(|s| !s.is_empty()) {
            break;
        }
    }
    for k in 0..clients {
        if shards[k].is_empty() {
            let largest = (0..clients).max_by_key(|&j| (shards[j].len(), std::cmp::Reverse(j))).unwrap();
            if shards[largest].len() < 2 {
                return Err(Error::PartitionExhausted { seed, alpha });
            }
            let moved = shards[largest].pop().unwrap();
            shards[k].push(moved);
        }
    }
    for s in &mut shards {
        s.sort_unstable();
    }
    Ok(shards)
}

/// [`dirichlet_partition`] applied to a dataset.
pub fn partition_dataset(data: &LabeledDataset, clients: usize, alpha: f64, seed: u64) -> Result<Vec<LabeledDataset>> {
    let shards = dirichlet_partition(data.labels(), data.class_count(), clients, alpha, seed)?;
    Ok(shards.iter().map(|idx| data.subset(idx)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn remainder_rounding_conserves() {
        assert_eq!(largest_remainder(&[0.5, 0.25, 0.25], 3), vec![1, 1, 1]);
        assert_eq!(largest_remainder(&[1.0 / 3.0; 3], 10), vec![4, 3, 3]);
        assert_eq!(largest_remainder(&[0.0, 1.0], 7), vec![0, 7]);
    }

    #[test]
    fn tiny_alpha_stays_normalised() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let p = dirichlet(10, 0.001, &mut rng);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0));
        }
    }

    #[test]
    fn too_few_samples_rejected() {
        let err = dirichlet_partition(&[0, 1], 2, 3, 1.0, 4).unwrap_err();
        assert!(matches!(err, Error::PartitionExhausted { seed: 4, .. }));
    }
}
