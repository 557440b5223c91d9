//! Finite-difference checks of every layer and matching loss.

use fedfd::commands::gradcheck_suite;

fn main() -> fedfd::Result<()> {
    for c in gradcheck_suite(0, None)? {
        let params = c.param_error.map_or("-".into(), |e| format!("{e:.2e}"));
        println!("{:<18} input {:.2e}  params {params}", c.name, c.input_error);
    }
    Ok(())
}
