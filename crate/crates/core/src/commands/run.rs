use std::fs::{self, File};
use std::path::Path;

use csv::Writer;

use crate::error::Result;
use crate::federation::{dirichlet_partition, partition_seed, RoundRecord, RunResult, Simulation};
use crate::manifest::RunManifest;

struct RunWriters {
    results: Writer<File>,
    ledger: Writer<File>,
    traces: Writer<File>,
}

impl RunWriters {
    fn create(out: &Path) -> Result<Self> {
        fs::create_dir_all(out)?;
        let mut results = Writer::from_path(out.join("results.csv"))?;
        results.write_record(["round", "method", "seed", "test_accuracy", "train_loss"])?;
        let mut ledger = Writer::from_path(out.join("ledger.csv"))?;
        ledger.write_record(["round", "client", "method", "seed", "bytes"])?;
        let mut traces = Writer::from_path(out.join("traces.csv"))?;
        traces.write_record([
            "round", "client", "iteration", "loss_fdd", "loss_fda", "loss_rsc", "real_acc", "seed",
        ])?;
        Ok(Self {
            results,
            ledger,
            traces,
        })
    }

    fn flush(&mut self) -> Result<()> {
        self.results.flush()?;
        self.ledger.flush()?;
        self.traces.flush()?;
        Ok(())
    }

    /// Append everything produced by `round` of `result`.
    fn write_round(&mut self, result: &RunResult, round: usize) -> Result<()> {
        let seed = result.seed.to_string();
        if let Some(r) = result.records.iter().find(|r| r.round == round) {
            self.results.write_record([
                r.round.to_string(),
                r.method.clone(),
                seed.clone(),
                r.test_accuracy.to_string(),
                r.train_loss.to_string(),
            ])?;
        }
        for e in result.ledger.entries().into_iter().filter(|e| e.round == round) {
            self.ledger
                .write_record([e.round.to_string(), e.client.to_string(), e.method, seed.clone(), e.bytes.to_string()])?;
        }
        for t in result.traces.iter().filter(|t| t.round == round) {
            self.traces.write_record([
                t.round.to_string(),
                t.client.to_string(),
                t.iteration.to_string(),
                t.loss_fdd.to_string(),
                t.loss_fda.to_string(),
                t.loss_rsc.to_string(),
                t.real_acc.to_string(),
                seed.clone(),
            ])?;
        }
        self.flush()
    }
}

/// Run the manifest's method once per seed, writing `results.csv`,
/// `ledger.csv` and `traces.csv` under `out` round by round. On a failed
/// round the rows written so far stay on disk.
pub fn cmd_run(
    manifest: &RunManifest,
    out: &Path,
    seeds: Option<&[u64]>,
    mut progress: impl FnMut(&RoundRecord),
) -> Result<Vec<RunResult>> {
    manifest.validate()?;
    let seeds = seeds.unwrap_or(&manifest.run.seeds).to_vec();
    let (train, test) = manifest.dataset.load()?;
    let spec = manifest.model_spec(&train)?;
    let mut writers = RunWriters::create(out)?;
    let mut results = Vec::new();
    for seed in seeds {
        let mut sim = Simulation::new(&train, test.clone(), spec.clone(), manifest.experiment(seed)?)?;
        while !sim.is_finished() {
            let outcome = sim.step().cloned();
            let round = sim.completed_rounds();
            match outcome {
                Ok(record) => {
                    writers.write_round(sim.result(), round)?;
                    progress(&record);
                }
                Err(e) => {
                    writers.flush()?;
                    return Err(e);
                }
            }
        }
        results.push(sim.into_result());
    }
    Ok(results)
}

/// Per-client, per-class sample counts of the manifest's partition.
pub fn cmd_partition(manifest: &RunManifest, seed: u64, out: &Path) -> Result<Vec<Vec<usize>>> {
    manifest.validate()?;
    let (train, _) = manifest.dataset.load()?;
    let shards = dirichlet_partition(
        train.labels(),
        train.class_count(),
        manifest.run.clients,
        manifest.run.alpha,
        partition_seed(seed),
    )?;
    let matrix: Vec<Vec<usize>> = shards
        .iter()
        .map(|idx| {
            let mut counts = vec![0; train.class_count()];
            for &i in idx {
                counts[train.labels()[i]] += 1;
            }
            counts
        })
        .collect();
    fs::create_dir_all(out)?;
    let mut w = Writer::from_path(out.join("partition.csv"))?;
    w.write_record(["client", "class", "count"])?;
    for (k, row) in matrix.iter().enumerate() {
        for (c, n) in row.iter().enumerate() {
            w.write_record([k.to_string(), c.to_string(), n.to_string()])?;
        }
    }
    w.flush()?;
    Ok(matrix)
}
