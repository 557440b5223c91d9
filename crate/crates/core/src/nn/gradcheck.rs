use crate::tensor::Tensor;

/// Largest per-coordinate relative error between `analytic` and a central
/// finite difference of `f` at `point`:
/// `|a − n| / max(1e-8, |a| + |n|)`.
pub fn finite_diff_check(
    f: impl Fn(&Tensor) -> f64,
    analytic: &Tensor,
    point: &Tensor,
    step: f64,
) -> f64 {
    let mut probe = point.clone();
    let mut worst = 0.0f64;
    for i in 0..point.len() {
        let orig = probe[i];
        probe[i] = orig + step;
        let up = f(&probe);
        probe[i] = orig - step;
        let down = f(&probe);
        probe[i] = orig;
        let numeric = (up - down) / (2.0 * step);
        let a = analytic[i];
        let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
        worst = worst.max(err);
    }
    worst
}
