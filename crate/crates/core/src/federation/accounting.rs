use super::curriculum::CurriculumSchedule;
use super::ledger::CommLedger;
use super::round::Transmission;
use crate::distill::spatial_select_baseline;
use crate::error::{Error, Result};
use crate::frequency::{apply_mask, dct2};
use crate::nn::Model;
use crate::tensor::Tensor;
use crate::wire;

/// Shape of a federation whose clients all hold every class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Population {
    pub clients: usize,
    pub classes: usize,
    pub channels: usize,
    pub side: usize,
}

/// Ledger of an aggregation-free run without running it: each round, every
/// client uploads `ipc × classes` messages. One zero image per transmission
/// kind is encoded and its buffer length recorded.
pub fn account_schedule(
    ledger: &mut CommLedger,
    method: &str,
    pop: Population,
    schedule: &CurriculumSchedule,
    transmission: Transmission,
    window: usize,
) -> Result<()> {
    schedule.validate()?;
    if transmission != Transmission::Spatial && (window == 0 || window > pop.side) {
        return Err(Error::invalid(format!("window {window} outside 1..={}", pop.side)));
    }
    let image = Tensor::zeros(&[pop.channels, pop.side, pop.side]);
    let message = match transmission {
        Transmission::Spectral => wire::encode_spectral_block(&apply_mask(&dct2(&image)?, window, 0)?)?,
        Transmission::Spatial => wire::encode_spatial_image(&image, 0)?,
        Transmission::Select(m) => wire::encode_spatial_image(&spatial_select_baseline(&image, window, m, 0)?, 0)?,
    };
    for round in 1..=schedule.total_rounds {
        let count = schedule.ipc_for_round(round)? * pop.classes;
        for client in 0..pop.clients {
            ledger.record(round, client, method, std::iter::repeat_n(message.as_slice(), count));
        }
    }
    Ok(())
}

/// Ledger of `rounds` FedAvg rounds: one model download and one upload per client.
pub fn account_fedavg(ledger: &mut CommLedger, method: &str, clients: usize, rounds: usize, model: &Model) -> Result<()> {
    let payload = wire::encode_params(model.params());
    for round in 1..=rounds {
        for client in 0..clients {
            ledger.record(round, client, method, [payload.as_slice(), payload.as_slice()]);
        }
    }
    Ok(())
}
