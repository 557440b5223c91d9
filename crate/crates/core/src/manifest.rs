//! TOML run manifests: dataset, method, partitioning, schedule and
//! optimiser settings. Every section except `[dataset]` may be omitted and
//! falls back to the desk-scale preset.
//!
//! ```toml
//! [dataset]
//! kind = "blobs"          # or "cifar" / "idx"
//! classes = 4
//! per_class = 64
//! test_per_class = 50
//! side = 16
//! channels = 1
//!
//! [run]
//! method = "fedfd"        # fedfd | feddm | fedavg
//! clients = 4
//! alpha = 0.01
//! rounds = 8
//! window = 8
//! seeds = [0, 1, 2]
//!
//! [schedule]
//! m = 2
//! b = 2
//! stages = 4
//!
//! [distill]
//! local_steps = 200
//!
//! [server]
//! epochs = 100
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datasets::{load_cifar_binary, load_idx, BlobConfig, LabeledDataset, Split};
use crate::distill::DistillConfig;
use crate::error::{Error, Result};
use crate::federation::{
    AggregationFreeConfig, CurriculumSchedule, ExperimentConfig, ExtractorSeeds, FedAvgConfig, MethodConfig,
    ServerConfig, Transmission,
};
use crate::nn::ModelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Fedfd,
    Feddm,
    Fedavg,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Fedfd => "fedfd",
            Method::Feddm => "feddm",
            Method::Fedavg => "fedavg",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSpec {
    Blobs {
        classes: usize,
        per_class: usize,
        test_per_class: usize,
        side: usize,
        channels: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_noise")]
        noise: f64,
    },
    /// CIFAR-10 binary record files.
    Cifar { train: PathBuf, test: PathBuf },
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        classes: usize,
    },
}

fn default_noise() -> f64 {
    0.05
}

impl DatasetSpec {
    /// Four 16×16 single-channel blob classes.
    pub fn desk_blobs() -> Self {
        Self::Blobs {
            classes: 4,
            per_class: 64,
            test_per_class: 50,
            side: 16,
            channels: 1,
            seed: 0,
            noise: default_noise(),
        }
    }

    fn paths(&self) -> Vec<(&'static str, &Path)> {
        match self {
            Self::Blobs { .. } => Vec::new(),
            Self::Cifar { train, test } => vec![("dataset.train", train), ("dataset.test", test)],
            Self::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
                ..
            } => vec![
                ("dataset.train_images", train_images),
                ("dataset.train_labels", train_labels),
                ("dataset.test_images", test_images),
                ("dataset.test_labels", test_labels),
            ],
        }
    }

    fn check(&self, errors: &mut Vec<String>) {
        for (field, path) in self.paths() {
            if !path.is_file() {
                errors.push(format!("{field}: file `{}` does not exist", path.display()));
            }
        }
        if let Self::Blobs {
            classes,
            per_class,
            test_per_class,
            side,
            channels,
            noise,
            ..
        } = *self
        {
            for (name, v) in [
                ("classes", classes),
                ("per_class", per_class),
                ("test_per_class", test_per_class),
                ("channels", channels),
            ] {
                if v == 0 {
                    errors.push(format!("dataset.{name}: must be positive"));
                }
            }
            if side < 4 {
                errors.push("dataset.side: must be at least 4".into());
            }
            if !(noise >= 0.0 && noise.is_finite()) {
                errors.push("dataset.noise: must be a finite nonnegative number".into());
            }
        }
        if let Self::Idx { classes: 0, .. } = self {
            errors.push("dataset.classes: must be positive".into());
        }
    }

    /// Train and test splits.
    pub fn load(&self) -> Result<(LabeledDataset, LabeledDataset)> {
        match self {
            Self::Blobs {
                classes,
                per_class,
                test_per_class,
                side,
                channels,
                seed,
                noise,
            } => {
                let base = BlobConfig {
                    noise: *noise,
                    ..BlobConfig::new(*classes, *per_class, *side, *channels, *seed)
                };
                let test = BlobConfig {
                    per_class: *test_per_class,
                    ..base.clone()
                };
                Ok((base.generate(Split::Train)?, test.generate(Split::Test)?))
            }
            Self::Cifar { train, test } => {
                Ok((load_cifar_binary(train, Split::Train)?, load_cifar_binary(test, Split::Test)?))
            }
            Self::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
                classes,
            } => Ok((
                load_idx(train_images, train_labels, *classes, Split::Train)?,
                load_idx(test_images, test_labels, *classes, Split::Test)?,
            )),
        }
    }

    /// `(channels, side)` known without loading, when the dataset kind fixes them.
    fn declared_shape(&self) -> Option<(usize, usize)> {
        match *self {
            Self::Blobs { side, channels, .. } => Some((channels, side)),
            Self::Cifar { .. } => Some((3, 32)),
            Self::Idx { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub method: Method,
    /// Name written to results and ledger rows; defaults to the method.
    pub label: Option<String>,
    pub clients: usize,
    pub alpha: f64,
    pub rounds: usize,
    /// Side of the transmitted low-frequency window.
    pub window: usize,
    pub seeds: Vec<u64>,
    /// Images per class of the distribution-matching baseline; defaults to `schedule.b`.
    pub feddm_ipc: Option<usize>,
    pub extractor_seeds: ExtractorSeeds,
    /// Overrides the method's default upload encoding.
    pub transmission: Option<Transmission>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            method: Method::Fedfd,
            label: None,
            clients: 4,
            alpha: 0.01,
            rounds: 8,
            window: 8,
            seeds: vec![0],
            feddm_ipc: None,
            extractor_seeds: ExtractorSeeds::Shared,
            transmission: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSection {
    pub m: usize,
    pub b: usize,
    pub stages: usize,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self { m: 2, b: 2, stages: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// Channels of both convolution blocks.
    pub width: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { width: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub distill: DistillConfig,
    #[serde(default)]
    pub server: ServerConfig,
    #[serde(default)]
    pub fedavg: FedAvgConfig,
    #[serde(default)]
    pub model: ModelSection,
    pub output_dir: Option<PathBuf>,
}

impl RunManifest {
    /// Blob dataset with every section at its desk-scale default.
    pub fn desk(method: Method) -> Self {
        Self {
            dataset: DatasetSpec::desk_blobs(),
            run: RunSection {
                method,
                ..RunSection::default()
            },
            schedule: ScheduleSection::default(),
            distill: DistillConfig::desk(),
            server: ServerConfig::desk(),
            fedavg: FedAvgConfig::default(),
            model: ModelSection::default(),
            output_dir: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let manifest: Self = toml::from_str(text).map_err(|e| Error::Manifest(e.to_string()))?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Manifest(format!("cannot read `{}`: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Manifest(m) => Error::Manifest(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn label(&self) -> String {
        self.run.label.clone().unwrap_or_else(|| self.run.method.to_string())
    }

    /// Every field-level problem, reported together.
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        self.dataset.check(&mut errors);
        let r = &self.run;
        if r.clients == 0 {
            errors.push("run.clients: must be at least 1".into());
        }
        if !(r.alpha > 0.0 && r.alpha.is_finite()) {
            errors.push("run.alpha: must be a positive number".into());
        }
        if r.rounds == 0 {
            errors.push("run.rounds: must be at least 1".into());
        }
        if r.seeds.is_empty() {
            errors.push("run.seeds: list at least one seed".into());
        }
        if r.feddm_ipc == Some(0) {
            errors.push("run.feddm_ipc: must be positive".into());
        }
        let windowed = match (r.method, r.transmission) {
            (Method::Fedavg, _) => false,
            (_, Some(t)) => t != Transmission::Spatial,
            (m, None) => m == Method::Fedfd,
        };
        if windowed {
            if r.window == 0 {
                errors.push("run.window: must be positive".into());
            }
            if let Some((_, side)) = self.dataset.declared_shape() {
                if r.window > side {
                    errors.push(format!("run.window: {} exceeds the image side {side}", r.window));
                }
            }
        }
        let s = &self.schedule;
        if s.b == 0 {
            errors.push("schedule.b: must be positive".into());
        }
        if s.stages == 0 {
            errors.push("schedule.stages: must be positive".into());
        } else if !r.rounds.is_multiple_of(s.stages) && r.method == Method::Fedfd {
            errors.push(format!("schedule.stages: {} does not divide run.rounds = {}", s.stages, r.rounds));
        }
        if let Err(e) = self.distill.validate() {
            errors.push(format!("distill: {}", strip(e)));
        }
        if let Err(e) = self.server.validate() {
            errors.push(format!("server: {}", strip(e)));
        }
        if self.fedavg.batch_size == 0 {
            errors.push("fedavg.batch_size: must be positive".into());
        }
        if !(self.fedavg.lr >= 0.0 && self.fedavg.lr.is_finite()) {
            errors.push("fedavg.lr: must be a nonnegative number".into());
        }
        if self.model.width == 0 {
            errors.push("model.width: must be positive".into());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Manifest(errors.join("; ")))
        }
    }

    pub fn model_spec(&self, data: &LabeledDataset) -> Result<ModelSpec> {
        ModelSpec::convnet(data.channels(), data.side(), data.class_count(), self.model.width)
    }

    /// The configuration of one seeded run.
    pub fn experiment(&self, seed: u64) -> Result<ExperimentConfig> {
        let r = &self.run;
        let method = match r.method {
            Method::Fedavg => MethodConfig::FedAvg(self.fedavg),
            Method::Fedfd => {
                let schedule = CurriculumSchedule::new(self.schedule.m, self.schedule.b, self.schedule.stages, r.rounds)?;
                let mut af = AggregationFreeConfig::fedfd(schedule, r.window, self.distill, self.server);
                af.distill.objective = self.distill.objective;
                MethodConfig::AggregationFree(self.adjust(af))
            }
            Method::Feddm => {
                let ipc = r.feddm_ipc.unwrap_or(self.schedule.b);
                let mut af = AggregationFreeConfig::feddm(ipc, r.rounds, self.distill, self.server)?;
                af.window = r.window;
                MethodConfig::AggregationFree(self.adjust(af))
            }
        };
        Ok(ExperimentConfig {
            label: self.label(),
            method,
            clients: r.clients,
            alpha: r.alpha,
            rounds: r.rounds,
            seed,
        })
    }

    fn adjust(&self, mut af: AggregationFreeConfig) -> AggregationFreeConfig {
        af.extractor_seeds = self.run.extractor_seeds;
        if let Some(t) = self.run.transmission {
            af.transmission = t;
        }
        af
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::InvalidArgument(m) => m,
        other => other.to_string(),
    }
}
