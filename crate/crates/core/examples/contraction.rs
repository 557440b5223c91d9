//! Gradient descent on strongly convex quadratics: the per-step distance
//! ratio never exceeds the contraction factor.

use fedfd::federation::contraction_experiment;

fn main() -> fedfd::Result<()> {
    println!("{:>4} {:>8} {:>8} {:>8} {:>10}", "dim", "alpha", "beta", "kappa", "max ratio");
    for dim in [1, 4, 16, 64] {
        let r = contraction_experiment(dim, 0, 200)?;
        println!(
            "{dim:>4} {:>8.4} {:>8.4} {:>8.5} {:>10.5}  {}",
            r.alpha,
            r.beta,
            r.kappa,
            r.max_ratio(),
            if r.bound_satisfied() { "holds" } else { "violated" }
        );
    }
    Ok(())
}
