//! Index-guessing cost of an untagged low-frequency window.

use crate::error::{Error, Result};

/// `log10((d·d)! / (d·d − l)!)`: the number of ordered position assignments an
/// attacker must consider for `l` coefficients sent without indices.
pub fn attack_combination_logcount(d: usize, l: usize) -> Result<f64> {
    let total = d
        .checked_mul(d)
        .ok_or_else(|| Error::invalid("side too large"))?;
    if l > total {
        return Err(Error::invalid(format!("kept count {l} exceeds d*d = {total}")));
    }
    Ok((0..l).map(|i| ((total - i) as f64).log10()).sum())
}
