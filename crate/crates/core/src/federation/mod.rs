//! Round orchestration: the curriculum, server reconstruction and training,
//! the FedAvg baseline, byte accounting, partitioning and the contraction
//! experiment.

mod accounting;
mod contraction;
mod curriculum;
mod ledger;
mod partition;
mod round;
mod seeds;
mod server;
mod simulation;

pub use accounting::{account_fedavg, account_schedule, Population};
pub use contraction::{contraction_experiment, kappa, run_quadratic, ContractionReport, BOUND_SLACK};
pub use curriculum::CurriculumSchedule;
pub use ledger::{CommLedger, LedgerEntry};
pub use partition::{dirichlet_partition, partition_dataset};
pub use round::{
    fedavg_round, fedavg_weights, run_round, AggregationFreeConfig, ExtractorSeeds, FedAvgConfig, GlobalModel,
    RoundOutcome, Server, SyntheticPool, Transmission,
};
pub use seeds::{derive_seed, partition_seed};
pub use server::{mean_loss, server_train, PoolMode, ServerConfig, ServerInit};
pub use simulation::{run_experiment, ExperimentConfig, MethodConfig, RoundRecord, RunResult, Simulation};
