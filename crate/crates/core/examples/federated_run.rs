//! FedFD against FedAvg on a non-IID blob federation, with the bytes each
//! method moved.

use fedfd::manifest::{Method, RunManifest};
use fedfd::federation::run_experiment;

fn main() -> fedfd::Result<()> {
    let mut totals = Vec::new();
    for method in [Method::Fedfd, Method::Fedavg] {
        let mut m = RunManifest::desk(method);
        m.distill.local_steps = 60;
        m.server.epochs = 30;
        let (train, test) = m.dataset.load()?;
        let spec = m.model_spec(&train)?;
        let result = run_experiment(&train, test, spec, m.experiment(0)?)?;
        let trace: Vec<String> = result.accuracy_trace().iter().map(|a| format!("{a:.2}")).collect();
        let bytes = result.ledger.total(&result.label)?;
        println!("{:<7} accuracy {}  bytes {bytes}", result.label, trace.join(" "));
        totals.push(bytes);
    }
    println!("fedfd / fedavg bytes: {:.4}", totals[0] as f64 / totals[1] as f64);
    Ok(())
}
