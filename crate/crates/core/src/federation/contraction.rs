use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Slack on the ratio and `T`-step comparisons for floating-point rounding.
pub const BOUND_SLACK: f64 = 1e-12;

/// Gradient descent on a strongly convex quadratic, measured against the
/// contraction factor `κ = 1 − ηα + η²β²` at step `η = α / (2β²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    pub seed: u64,
    pub dim: usize,
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    pub kappa: f64,
    /// `‖θ_{t+1} − θ*‖² / ‖θ_t − θ*‖²`, zero once the iterate sits on `θ*`.
    pub ratios: Vec<f64>,
    pub initial_sq_dist: f64,
    pub final_sq_dist: f64,
}

impl ContractionReport {
    pub fn steps(&self) -> usize {
        self.ratios.len()
    }

    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().cloned().fold(0.0, f64::max)
    }

    /// Every per-step ratio is at most `κ`.
    pub fn per_step_bound_holds(&self) -> bool {
        self.ratios.iter().all(|&r| r <= self.kappa + BOUND_SLACK)
    }

    /// `‖θ_T − θ*‖² ≤ κ^T ‖θ_0 − θ*‖²`.
    pub fn t_step_bound_holds(&self) -> bool {
        let bound = self.kappa.powi(self.steps() as i32) * self.initial_sq_dist;
        self.final_sq_dist <= bound * (1.0 + BOUND_SLACK) + f64::MIN_POSITIVE
    }

    pub fn bound_satisfied(&self) -> bool {
        self.per_step_bound_holds() && self.t_step_bound_holds()
    }
}

pub fn kappa(alpha: f64, beta: f64) -> f64 {
    let eta = alpha / (2.0 * beta * beta);
    1.0 - eta * alpha + eta * eta * beta * beta
}

/// Run `steps` iterations of gradient descent on `½θᵀAθ − bᵀθ` from
/// `theta0` with `α, β` the extreme eigenvalues of the symmetric matrix `a`.
///
/// The iteration is carried on the displacement `e = θ − θ*`, where the
/// gradient is `A e`; this is the same update as on `θ` but keeps the
/// measured distances free of the cancellation floor of `θ − θ*`.
pub fn run_quadratic(a: &DMatrix<f64>, b: &DVector<f64>, theta0: &DVector<f64>, steps: usize) -> Result<ContractionReport> {
    let eig = SymmetricEigen::new(a.clone());
    let alpha = eig.eigenvalues.min();
    let beta = eig.eigenvalues.max();
    if !(alpha > 0.0) {
        return Err(Error::invalid(format!("matrix is not positive definite (min eigenvalue {alpha})")));
    }
    let optimum = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::invalid("matrix is not positive definite"))?
        .solve(b);
    let eta = alpha / (2.0 * beta * beta);
    let mut e = theta0 - optimum;
    let initial = e.norm_squared();
    let mut ratios = Vec::with_capacity(steps);
    for _ in 0..steps {
        let before = e.norm_squared();
        e -= eta * (a * &e);
        let after = e.norm_squared();
        ratios.push(if before == 0.0 { 0.0 } else { after / before });
    }
    Ok(ContractionReport {
        seed: 0,
        dim: a.nrows(),
        alpha,
        beta,
        eta,
        kappa: kappa(alpha, beta),
        ratios,
        initial_sq_dist: initial,
        final_sq_dist: e.norm_squared(),
    })
}

/// Seeded instance: `A = MᵀM/dim + I/10` with Gaussian `M`, Gaussian `b`
/// and `θ₀`. A draw that is not numerically positive definite is redrawn
/// from the next generator stream.
pub fn contraction_experiment(dim: usize, seed: u64, steps: usize) -> Result<ContractionReport> {
    if dim == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    for stream in 0..16u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
        let m = DMatrix::from_fn(dim, dim, |_, _| normal());
        let b = DVector::from_fn(dim, |_, _| normal());
        let theta0 = DVector::from_fn(dim, |_, _| normal());
        let a = (m.transpose() * &m) / dim as f64 + DMatrix::identity(dim, dim) * 0.1;
        let a = (&a + a.transpose()) * 0.5;
        if let Ok(report) = run_quadratic(&a, &b, &theta0, steps) {
            return Ok(ContractionReport { seed, ..report });
        }
    }
    Err(Error::invalid(format!("no positive-definite draw for seed {seed}")))
}
