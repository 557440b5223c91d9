use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fedfd::commands::{
    cmd_contraction, cmd_energy, cmd_gradcheck, cmd_partition, cmd_run, cmd_security, QuadraticFamily, ENERGY_LEVEL,
};
use fedfd::manifest::{DatasetSpec, Method, RunManifest};
use fedfd::Error;

/// Aggregation-free federated learning simulator.
#[derive(Debug, Parser)]
#[command(name = "fedfd", version)]
struct Cli {
    /// TOML run manifest; commands that need one fall back to the desk preset.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Output directory (default: the manifest's `output_dir`, else `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated seeds overriding the manifest or command default.
    #[arg(long, global = true, value_delimiter = ',')]
    seed: Vec<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a federated experiment and write results, ledger and trace CSVs.
    Run {
        /// Method of the desk preset used when no manifest is given.
        #[arg(long, default_value = "fedfd")]
        method: String,
    },
    /// Cumulative-energy curves of dataset images in both domains.
    Energy {
        /// Analyse only the first N training images.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Gradient descent on seeded strongly convex quadratics.
    Contraction {
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32")]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        /// Use `A = I` instead of a random positive-definite matrix.
        #[arg(long)]
        identity: bool,
    },
    /// Finite-difference checks of every layer and loss.
    Gradcheck {
        /// Corrupt the named check's analytic gradient.
        #[arg(long, hide = true)]
        sabotage: Option<String>,
    },
    /// Index-guessing search space and payload sizes of a spectral window.
    Security {
        #[arg(long, default_value_t = 32)]
        d: usize,
        #[arg(long, default_value_t = 16)]
        s: usize,
        #[arg(long, default_value_t = 3)]
        channels: usize,
    },
    /// Per-client class counts of the manifest's Dirichlet partition.
    Partition,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Manifest(_) | Error::InvalidArgument(_) => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn load_manifest(path: Option<&Path>, method: Method) -> Result<RunManifest, Failure> {
    match path {
        Some(p) => Ok(RunManifest::load(p)?),
        None => Ok(RunManifest::desk(method)),
    }
}

fn out_dir(cli: &Cli, manifest: Option<&RunManifest>) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| manifest.and_then(|m| m.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn first_seed(cli: &Cli) -> u64 {
    cli.seed.first().copied().unwrap_or(0)
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let manifest_path = cli.manifest.as_deref();
    match &cli.command {
        Command::Run { method } => {
            let method = match method.as_str() {
                "fedfd" => Method::Fedfd,
                "feddm" => Method::Feddm,
                "fedavg" => Method::Fedavg,
                other => return Err(Failure::Config(format!("unknown method `{other}`"))),
            };
            let manifest = load_manifest(manifest_path, method)?;
            let out = out_dir(cli, Some(&manifest));
            let seeds = (!cli.seed.is_empty()).then_some(cli.seed.as_slice());
            let results = cmd_run(&manifest, &out, seeds, |r| {
                println!(
                    "{} seed {} round {:>3}  test_accuracy {:.4}  train_loss {:.4}",
                    r.method, r.seed, r.round, r.test_accuracy, r.train_loss
                );
            })?;
            for r in &results {
                let bytes: u64 = r.ledger.entries().iter().map(|e| e.bytes).sum();
                println!("{} seed {}: final accuracy {:.4}, {} bytes", r.label, r.seed, r.final_accuracy(), bytes);
            }
            println!("wrote {}", out.display());
        }
        Command::Energy { limit } => {
            let manifest = manifest_path.map(RunManifest::load).transpose()?;
            let dataset = manifest.as_ref().map_or_else(DatasetSpec::desk_blobs, |m| m.dataset.clone());
            let (train, _) = dataset.load()?;
            let out = out_dir(cli, manifest.as_ref());
            let summary = cmd_energy(&train, *limit, &out)?;
            let dominated = summary.images.iter().all(|e| e.descending_dominates());
            println!(
                "{} images ({} skipped): frequency reaches {ENERGY_LEVEL} first on {:.1}%, descending dominates: {dominated}",
                summary.images.len(),
                summary.skipped.len(),
                100.0 * summary.concentration_fraction()
            );
        }
        Command::Contraction { dims, steps, identity } => {
            let seeds: Vec<u64> = if cli.seed.is_empty() { (0..20).collect() } else { cli.seed.clone() };
            let family = if *identity { QuadraticFamily::Identity } else { QuadraticFamily::Random };
            let out = out_dir(cli, None);
            let reports = cmd_contraction(dims, &seeds, *steps, family, &out)?;
            let held = reports.iter().filter(|r| r.bound_satisfied()).count();
            let worst = reports.iter().map(|r| r.max_ratio() / r.kappa).fold(0.0, f64::max);
            println!("bound satisfied in {held}/{} runs; worst ratio/kappa {worst:.6}", reports.len());
            if held != reports.len() {
                return Err(Failure::Runtime("contraction bound violated".into()));
            }
        }
        Command::Gradcheck { sabotage } => {
            let out = out_dir(cli, None);
            let checks = cmd_gradcheck(first_seed(cli), sabotage.as_deref(), &out)?;
            println!("{:<18} {:>12} {:>12}  status", "check", "input", "params");
            for c in &checks {
                let params = c.param_error.map_or("-".to_string(), |e| format!("{e:.3e}"));
                let status = if c.passed() { "PASS" } else { "FAIL" };
                println!("{:<18} {:>12.3e} {:>12}  {status}", c.name, c.input_error, params);
            }
            let failed: Vec<_> = checks.iter().filter(|c| !c.passed()).collect();
            if let Some(worst) = failed.iter().max_by(|a, b| a.max_error().total_cmp(&b.max_error())) {
                return Err(Failure::Runtime(format!(
                    "{} gradient checks failed; worst {} at {:.3e}",
                    failed.len(),
                    worst.name,
                    worst.max_error()
                )));
            }
        }
        Command::Security { d, s, channels } => {
            let r = cmd_security(*d, *s, *channels)?;
            println!("d = {}, s = {}, l = {}", r.side, r.window, r.kept);
            println!("log10 placements: {:.6}", r.log10_count);
            println!(
                "bytes per image: spectral {} vs spatial {} (ratio {:.4})",
                r.spectral_bytes,
                r.spatial_bytes,
                r.payload_ratio()
            );
        }
        Command::Partition => {
            let manifest = load_manifest(manifest_path, Method::Fedfd)?;
            let out = out_dir(cli, Some(&manifest));
            let matrix = cmd_partition(&manifest, first_seed(cli), &out)?;
            for (k, row) in matrix.iter().enumerate() {
                println!("client {k}: {row:?}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
