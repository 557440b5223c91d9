use std::fs;
use std::path::Path;

use csv::Writer;
use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::federation::{contraction_experiment, run_quadratic, ContractionReport};

/// Quadratic family swept by [`cmd_contraction`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuadraticFamily {
    /// Seeded random positive-definite `A`.
    #[default]
    Random,
    /// `A = I`, `b = 1`, `θ₀ = −(seed + 1)·1`.
    Identity,
}

fn identity_report(dim: usize, seed: u64, steps: usize) -> Result<ContractionReport> {
    let a = DMatrix::identity(dim, dim);
    let b = DVector::from_element(dim, 1.0);
    let theta0 = DVector::from_element(dim, -(seed as f64 + 1.0));
    Ok(ContractionReport {
        seed,
        ..run_quadratic(&a, &b, &theta0, steps)?
    })
}

/// One report per `(seed, dim)` pair, seeds outermost.
pub fn contraction_sweep(
    dims: &[usize],
    seeds: &[u64],
    steps: usize,
    family: QuadraticFamily,
) -> Result<Vec<ContractionReport>> {
    let mut out = Vec::with_capacity(dims.len() * seeds.len());
    for &seed in seeds {
        for &dim in dims {
            out.push(match family {
                QuadraticFamily::Random => contraction_experiment(dim, seed, steps)?,
                QuadraticFamily::Identity => identity_report(dim, seed, steps)?,
            });
        }
    }
    Ok(out)
}

/// Write `contraction.csv` (`seed, dim, alpha, beta, kappa, max_ratio, bound_satisfied`).
pub fn cmd_contraction(
    dims: &[usize],
    seeds: &[u64],
    steps: usize,
    family: QuadraticFamily,
    out: &Path,
) -> Result<Vec<ContractionReport>> {
    let reports = contraction_sweep(dims, seeds, steps, family)?;
    fs::create_dir_all(out)?;
    let mut w = Writer::from_path(out.join("contraction.csv"))?;
    w.write_record(["seed", "dim", "alpha", "beta", "kappa", "max_ratio", "bound_satisfied"])?;
    for r in &reports {
        w.write_record([
            r.seed.to_string(),
            r.dim.to_string(),
            r.alpha.to_string(),
            r.beta.to_string(),
            r.kappa.to_string(),
            r.max_ratio().to_string(),
            r.bound_satisfied().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(reports)
}
