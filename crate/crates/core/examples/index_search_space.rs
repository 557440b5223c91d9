//! Search space of an attacker placing the received coefficients on the full
//! grid, and the per-image payload of each encoding.

use fedfd::commands::cmd_security;

fn main() -> fedfd::Result<()> {
    for (d, s) in [(28, 7), (28, 14), (32, 8), (32, 16)] {
        let r = cmd_security(d, s, if d == 28 { 1 } else { 3 })?;
        println!(
            "d {d:>2} s {s:>2}: 10^{:.1} placements, {} vs {} bytes",
            r.log10_count, r.spectral_bytes, r.spatial_bytes
        );
    }
    Ok(())
}
