use super::ledger::CommLedger;
use super::partition::partition_dataset;
use super::round::{fedavg_round, run_round, AggregationFreeConfig, FedAvgConfig, GlobalModel, Server};
use super::seeds::{derive_seed, partition_seed, tag};
use crate::datasets::LabeledDataset;
use crate::distill::{ClientState, TraceRow};
use crate::error::{Error, Result};
use crate::nn::{Model, ModelSpec};

#[derive(Debug, Clone, PartialEq)]
pub enum MethodConfig {
    AggregationFree(AggregationFreeConfig),
    FedAvg(FedAvgConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Name used in results and ledger rows.
    pub label: String,
    pub method: MethodConfig,
    pub clients: usize,
    pub alpha: f64,
    pub rounds: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub method: String,
    pub seed: u64,
    pub test_accuracy: f64,
    pub train_loss: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub label: String,
    pub seed: u64,
    /// Test accuracy of the initial global model.
    pub initial_accuracy: f64,
    pub records: Vec<RoundRecord>,
    pub ledger: CommLedger,
    pub traces: Vec<TraceRow>,
}

impl RunResult {
    pub fn final_accuracy(&self) -> f64 {
        self.records.last().map_or(self.initial_accuracy, |r| r.test_accuracy)
    }

    /// Test accuracy before round 1 followed by the accuracy after every round.
    pub fn accuracy_trace(&self) -> Vec<f64> {
        std::iter::once(self.initial_accuracy)
            .chain(self.records.iter().map(|r| r.test_accuracy))
            .collect()
    }

    /// Rounds whose accuracy is at least the previous round's.
    pub fn nondecreasing_rounds(&self) -> usize {
        self.accuracy_trace().windows(2).filter(|w| w[1] >= w[0]).count()
    }
}

enum Participants {
    AggregationFree { server: Server, clients: Vec<ClientState> },
    FedAvg { global: GlobalModel, shards: Vec<LabeledDataset> },
}

/// A seeded run advanced one round at a time.
pub struct Simulation {
    cfg: ExperimentConfig,
    test: LabeledDataset,
    participants: Participants,
    result: RunResult,
}

impl Simulation {
    pub fn new(train: &LabeledDataset, test: LabeledDataset, spec: ModelSpec, cfg: ExperimentConfig) -> Result<Self> {
        if cfg.rounds == 0 {
            return Err(Error::invalid("rounds must be positive"));
        }
        if (train.channels(), train.side(), train.class_count()) != (test.channels(), test.side(), test.class_count()) {
            return Err(Error::invalid("train and test splits disagree on channels, side or classes"));
        }
        if spec.input_shape() != [train.channels(), train.side(), train.side()] || spec.class_count() != train.class_count() {
            return Err(Error::invalid("model architecture does not fit the dataset"));
        }
        let shards = partition_dataset(train, cfg.clients, cfg.alpha, partition_seed(cfg.seed))?;
        let model = Model::init(spec, derive_seed(cfg.seed, &[tag::MODEL]));
        let initial_accuracy = model.accuracy(test.images(), test.labels())?;
        let participants = match &cfg.method {
            MethodConfig::AggregationFree(af) => {
                af.validate(train.side())?;
                if af.schedule.total_rounds != cfg.rounds {
                    return Err(Error::invalid(format!(
                        "schedule spans {} rounds, run has {}",
                        af.schedule.total_rounds, cfg.rounds
                    )));
                }
                let ipc = af.schedule.ipc_for_round(1)?;
                let client_seed = derive_seed(cfg.seed, &[tag::CLIENT]);
                let clients = shards
                    .into_iter()
                    .enumerate()
                    .map(|(k, shard)| ClientState::new(k, shard, ipc, client_seed))
                    .collect::<Result<_>>()?;
                Participants::AggregationFree {
                    server: Server::new(model, cfg.seed),
                    clients,
                }
            }
            MethodConfig::FedAvg(_) => Participants::FedAvg {
                global: GlobalModel::new(model),
                shards,
            },
        };
        Ok(Self {
            result: RunResult {
                label: cfg.label.clone(),
                seed: cfg.seed,
                initial_accuracy,
                records: Vec::new(),
                ledger: CommLedger::new(),
                traces: Vec::new(),
            },
            cfg,
            test,
            participants,
        })
    }

    pub fn completed_rounds(&self) -> usize {
        self.result.records.len()
    }

    pub fn is_finished(&self) -> bool {
        self.completed_rounds() >= self.cfg.rounds
    }

    pub fn global_model(&self) -> &Model {
        match &self.participants {
            Participants::AggregationFree { server, .. } => &server.global.model,
            Participants::FedAvg { global, .. } => &global.model,
        }
    }

    pub fn clients(&self) -> Option<&[ClientState]> {
        match &self.participants {
            Participants::AggregationFree { clients, .. } => Some(clients),
            Participants::FedAvg { .. } => None,
        }
    }

    /// Run the next round and evaluate the global model on the test split.
    pub fn step(&mut self) -> Result<&RoundRecord> {
        if self.is_finished() {
            return Err(Error::invalid("all rounds already ran"));
        }
        let round = self.completed_rounds() + 1;
        let label = self.cfg.label.as_str();
        let train_loss = match (&mut self.participants, &self.cfg.method) {
            (Participants::AggregationFree { server, clients }, MethodConfig::AggregationFree(af)) => {
                let out = run_round(server, clients, round, af, label, &mut self.result.ledger)?;
                self.result.traces.extend(out.traces);
                out.train_loss
            }
            (Participants::FedAvg { global, shards }, MethodConfig::FedAvg(fa)) => {
                fedavg_round(global, shards, round, fa, self.cfg.seed, label, &mut self.result.ledger)?
            }
            _ => unreachable!("participants follow the method"),
        };
        let test_accuracy = self.global_model().accuracy(self.test.images(), self.test.labels())?;
        self.result.records.push(RoundRecord {
            round,
            method: self.cfg.label.clone(),
            seed: self.cfg.seed,
            test_accuracy,
            train_loss,
        });
        Ok(self.result.records.last().unwrap())
    }

    /// Results so far.
    pub fn result(&self) -> &RunResult {
        &self.result
    }

    pub fn into_result(self) -> RunResult {
        self.result
    }
}

/// Run every round of an experiment.
pub fn run_experiment(train: &LabeledDataset, test: LabeledDataset, spec: ModelSpec, cfg: ExperimentConfig) -> Result<RunResult> {
    let mut sim = Simulation::new(train, test, spec, cfg)?;
    while !sim.is_finished() {
        sim.step()?;
    }
    Ok(sim.into_result())
}
