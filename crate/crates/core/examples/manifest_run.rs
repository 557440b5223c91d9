//! Drive a run from a TOML manifest and write its CSVs to a scratch directory.

use fedfd::commands::cmd_run;
use fedfd::manifest::RunManifest;

const MANIFEST: &str = r#"
[dataset]
kind = "blobs"
classes = 3
per_class = 20
test_per_class = 10
side = 16
channels = 1

[run]
method = "fedfd"
clients = 3
alpha = 0.1
rounds = 4
window = 8
seeds = [0, 1]

[schedule]
m = 1
b = 2
stages = 2

[distill]
local_steps = 20

[server]
epochs = 10
"#;

fn main() -> fedfd::Result<()> {
    let manifest = RunManifest::from_toml(MANIFEST)?;
    let out = std::env::temp_dir().join("fedfd-manifest-run");
    let results = cmd_run(&manifest, &out, None, |r| {
        println!("seed {} round {} accuracy {:.3}", r.seed, r.round, r.test_accuracy);
    })?;
    for r in &results {
        println!("seed {}: {} bytes uploaded", r.seed, r.ledger.total(&r.label)?);
    }
    println!("csv files in {}", out.display());
    Ok(())
}
