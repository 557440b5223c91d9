//! The operations behind each CLI subcommand. Every command writes CSV
//! into an output directory and returns the rows it wrote.

mod contraction;
mod energy;
mod gradcheck;
mod run;
mod security;

pub use contraction::{cmd_contraction, contraction_sweep, QuadraticFamily};
pub use energy::{cmd_energy, energy_analysis, image_energy, EnergySummary, ImageEnergy, ENERGY_LEVEL};
pub use gradcheck::{cmd_gradcheck, gradcheck_suite, GradCheck, CHECK_NAMES, GRADCHECK_TOL};
pub use run::{cmd_partition, cmd_run};
pub use security::{cmd_security, SecurityReport};
