//! Pixels versus DCT coefficients: how many positions hold 99% of the energy.

use fedfd::commands::{energy_analysis, ENERGY_LEVEL};
use fedfd::datasets::gen_blobs;

fn main() -> fedfd::Result<()> {
    let data = gen_blobs(4, 8, 16, 1, 0)?;
    let summary = energy_analysis(&data, None)?;
    let first = &summary.images[0];
    for (domain, curves) in [("spatial", &first.spatial), ("frequency", &first.frequency)] {
        for c in curves {
            println!(
                "{domain:>9} {:<18} reaches {ENERGY_LEVEL} after {:>3} of {}",
                c.ordering.name(),
                c.count_to_reach(ENERGY_LEVEL),
                c.cumulative_ratio.len()
            );
        }
    }
    println!(
        "frequency concentrates first on {:.1}% of {} images",
        100.0 * summary.concentration_fraction(),
        summary.images.len()
    );
    Ok(())
}
