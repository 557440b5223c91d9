use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::curriculum::CurriculumSchedule;
use super::ledger::CommLedger;
use super::seeds::{derive_seed, tag};
use super::server::{server_train, PoolMode, ServerConfig, ServerInit};
use crate::datasets::LabeledDataset;
use crate::distill::{client_update, distill, Broadcast, ClientState, DistillConfig, Objective, SpatialMethod, TraceRow};
use crate::distill::{spatial_reconstruct, spatial_select_baseline};
use crate::error::{Error, Result};
use crate::frequency::{idct2, zero_pad};
use crate::nn::Model;
use crate::tensor::Tensor;
use crate::wire;

/// The server's model and the number of completed rounds.
#[derive(Debug, Clone)]
pub struct GlobalModel {
    pub model: Model,
    pub round: usize,
}

impl GlobalModel {
    pub fn new(model: Model) -> Self {
        Self { model, round: 0 }
    }
}

/// How clients encode their synthetic images for upload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transmission {
    /// Top-left `s × s` DCT window per image.
    Spectral,
    /// Full images in the pixel domain.
    Spatial,
    /// Pixel-domain `s × s` reduction.
    Select(SpatialMethod),
}

/// Whether all clients draw the same random feature extractor in a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtractorSeeds {
    Shared,
    Independent,
}

/// Configuration of an aggregation-free method (the frequency-domain method,
/// the distribution-matching baseline and everything in between).
#[derive(Debug, Clone, PartialEq)]
pub struct AggregationFreeConfig {
    pub distill: DistillConfig,
    pub schedule: CurriculumSchedule,
    pub window: usize,
    pub transmission: Transmission,
    pub extractor_seeds: ExtractorSeeds,
    pub server: ServerConfig,
}

impl AggregationFreeConfig {
    /// Combined objective, curriculum and spectral windows.
    pub fn fedfd(schedule: CurriculumSchedule, window: usize, distill: DistillConfig, server: ServerConfig) -> Self {
        Self {
            distill: DistillConfig {
                objective: Objective::Fdd,
                ..distill
            },
            schedule,
            window,
            transmission: Transmission::Spectral,
            extractor_seeds: ExtractorSeeds::Shared,
            server,
        }
    }

    /// Distribution matching with a fixed per-class count and full images.
    pub fn feddm(ipc: usize, rounds: usize, distill: DistillConfig, server: ServerConfig) -> Result<Self> {
        Ok(Self {
            distill: DistillConfig {
                objective: Objective::Dm,
                ..distill
            },
            schedule: CurriculumSchedule::fixed(ipc, rounds)?,
            window: 0,
            transmission: Transmission::Spatial,
            extractor_seeds: ExtractorSeeds::Shared,
            server,
        })
    }

    pub fn validate(&self, side: usize) -> Result<()> {
        self.distill.validate()?;
        self.schedule.validate()?;
        self.server.validate()?;
        if self.transmission != Transmission::Spatial && (self.window == 0 || self.window > side) {
            return Err(Error::invalid(format!("window {} outside 1..={side}", self.window)));
        }
        Ok(())
    }
}

/// What one round produced.
#[derive(Debug, Clone)]
pub struct RoundOutcome {
    pub train_loss: f64,
    pub traces: Vec<TraceRow>,
    /// Server-side reconstructions received this round, with labels.
    pub received: Vec<(Tensor, usize)>,
}

/// Images the server has accumulated across rounds.
#[derive(Debug, Clone, Default)]
pub struct SyntheticPool {
    images: Vec<Tensor>,
    labels: Vec<usize>,
}

impl SyntheticPool {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn images(&self) -> Result<Tensor> {
        let refs: Vec<&Tensor> = self.images.iter().collect();
        Tensor::stack(&refs)
    }

    fn extend(&mut self, items: &[(Tensor, usize)]) {
        for (img, label) in items {
            self.images.push(img.clone());
            self.labels.push(*label);
        }
    }
}

/// Server state of an aggregation-free run.
#[derive(Debug, Clone)]
pub struct Server {
    pub global: GlobalModel,
    pub pool: SyntheticPool,
    /// Parameters restored when every round trains from scratch.
    pub initial: Model,
    pub seed: u64,
}

impl Server {
    pub fn new(model: Model, seed: u64) -> Self {
        Self {
            initial: model.clone(),
            global: GlobalModel::new(model),
            pool: SyntheticPool::default(),
            seed,
        }
    }
}

fn select_seed(seed: u64, round: usize, client: usize, index: usize) -> u64 {
    derive_seed(seed, &[tag::SELECT, round as u64, client as u64, index as u64])
}

/// Client side of one round: grow, distill, encode.
fn client_round(
    client: &mut ClientState,
    broadcast: Broadcast<'_>,
    cfg: &AggregationFreeConfig,
    ipc: usize,
    seed: u64,
) -> Result<(Vec<Vec<u8>>, Vec<TraceRow>)> {
    client.grow_ipc(ipc)?;
    match cfg.transmission {
        Transmission::Spectral => {
            let (blocks, trace) = client_update(client, broadcast, &cfg.distill, cfg.window)?;
            let msgs = blocks.iter().map(wire::encode_spectral_block).collect::<Result<_>>()?;
            Ok((msgs, trace))
        }
        Transmission::Spatial | Transmission::Select(_) => {
            let trace = distill(client, broadcast, &cfg.distill)?;
            let mut msgs = Vec::new();
            for (class, images) in client.synthetic().iter() {
                for i in 0..images.shape()[0] {
                    let img = images.slice_row(i);
                    let payload = match cfg.transmission {
                        Transmission::Select(m) => spatial_select_baseline(
                            &img,
                            cfg.window,
                            m,
                            select_seed(seed, broadcast.round, client.id(), msgs.len()),
                        )?,
                        _ => img,
                    };
                    msgs.push(wire::encode_spatial_image(&payload, class)?);
                }
            }
            Ok((msgs, trace))
        }
    }
}

/// Server-side decoding of one client's upload into full-size images.
fn reconstruct(
    msgs: &[Vec<u8>],
    cfg: &AggregationFreeConfig,
    side: usize,
    seed: u64,
    round: usize,
    client: usize,
) -> Result<Vec<(Tensor, usize)>> {
    msgs.iter()
        .enumerate()
        .map(|(i, m)| match cfg.transmission {
            Transmission::Spectral => {
                let block = wire::decode_spectral_block(m)?;
                Ok((idct2(&zero_pad(&block))?, block.class_label()))
            }
            Transmission::Spatial => {
                let img = wire::decode_spatial_image(m)?;
                Ok((img.pixels, img.class_label))
            }
            Transmission::Select(method) => {
                let img = wire::decode_spatial_image(m)?;
                let full = spatial_reconstruct(&img.pixels, side, method, select_seed(seed, round, client, i))?;
                Ok((full, img.class_label))
            }
        })
        .collect()
}

/// One aggregation-free round. On any failure the server and every client
/// are left exactly as they were.
pub fn run_round(
    server: &mut Server,
    clients: &mut [ClientState],
    round: usize,
    cfg: &AggregationFreeConfig,
    method: &str,
    ledger: &mut CommLedger,
) -> Result<RoundOutcome> {
    let side = clients
        .first()
        .ok_or_else(|| Error::invalid("a round needs at least one client"))?
        .shard()
        .side();
    cfg.validate(side)?;
    let ipc = cfg.schedule.ipc_for_round(round)?;
    let seed = server.seed;
    let global = &server.global.model;
    let shared = derive_seed(seed, &[tag::EXTRACTOR, round as u64]);

    let mut working: Vec<ClientState> = clients.to_vec();
    let uploads: Vec<(Vec<Vec<u8>>, Vec<TraceRow>)> = working
        .par_iter_mut()
        .map(|client| {
            let extractor_seed = match cfg.extractor_seeds {
                ExtractorSeeds::Shared => shared,
                ExtractorSeeds::Independent => derive_seed(shared, &[client.id() as u64]),
            };
            let broadcast = Broadcast {
                round,
                global,
                extractor_seed,
            };
            client_round(client, broadcast, cfg, ipc, seed)
        })
        .collect::<Result<_>>()?;

    let mut round_ledger = CommLedger::new();
    let mut received = Vec::new();
    let mut traces = Vec::new();
    for (client, (msgs, trace)) in working.iter().zip(uploads) {
        round_ledger.record(round, client.id(), method, msgs.iter().map(Vec::as_slice));
        received.extend(reconstruct(&msgs, cfg, side, seed, round, client.id())?);
        traces.extend(trace);
    }

    let mut pool = match cfg.server.pool {
        PoolMode::Cumulative => server.pool.clone(),
        PoolMode::FreshPool => SyntheticPool::default(),
    };
    pool.extend(&received);
    let mut model = match cfg.server.init {
        ServerInit::Continue => server.global.model.clone(),
        ServerInit::Scratch => server.initial.clone(),
    };
    let train_loss = server_train(
        &mut model,
        &pool.images()?,
        pool.labels(),
        cfg.server.epochs,
        cfg.server.lr,
        cfg.server.batch_size,
        derive_seed(seed, &[tag::SERVER, round as u64]),
    )?;
    model.params().iter().try_for_each(|p| p.ensure_finite("global model"))?;

    server.global = GlobalModel { model, round };
    server.pool = pool;
    clients.clone_from_slice(&working);
    ledger.extend(round_ledger);
    Ok(RoundOutcome {
        train_loss,
        traces,
        received,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FedAvgConfig {
    pub local_epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
}

impl Default for FedAvgConfig {
    fn default() -> Self {
        Self {
            local_epochs: 5,
            lr: 0.01,
            batch_size: 64,
        }
    }
}

/// Aggregation weights `p_k = |D_k| / |D|`.
pub fn fedavg_weights(shards: &[LabeledDataset]) -> Vec<f64> {
    let total: usize = shards.iter().map(LabeledDataset::len).sum();
    shards.iter().map(|s| s.len() as f64 / total as f64).collect()
}

/// One FedAvg round: broadcast, local SGD on every shard, weighted average.
/// Both directions travel as `f32` parameter payloads. Returns the
/// weighted mean of the clients' final local losses.
pub fn fedavg_round(
    global: &mut GlobalModel,
    shards: &[LabeledDataset],
    round: usize,
    cfg: &FedAvgConfig,
    seed: u64,
    method: &str,
    ledger: &mut CommLedger,
) -> Result<f64> {
    if shards.is_empty() || shards.iter().any(LabeledDataset::is_empty) {
        return Err(Error::invalid("FedAvg needs nonempty shards"));
    }
    let spec = global.model.spec().clone();
    let shapes = spec.param_shapes();
    let down = wire::encode_params(global.model.params());
    let results: Vec<(Vec<u8>, f64)> = shards
        .par_iter()
        .enumerate()
        .map(|(k, shard)| {
            let mut local = Model::from_params(spec.clone(), wire::decode_params(&down, &shapes)?)?;
            let loss = server_train(
                &mut local,
                shard.images(),
                shard.labels(),
                cfg.local_epochs,
                cfg.lr,
                cfg.batch_size,
                derive_seed(seed, &[tag::FEDAVG, round as u64, k as u64]),
            )?;
            Ok((wire::encode_params(local.params()), loss))
        })
        .collect::<Result<_>>()?;

    let weights = fedavg_weights(shards);
    let mut acc: Vec<Tensor> = shapes.iter().map(|s| Tensor::zeros(s)).collect();
    let mut loss = 0.0;
    for (k, (up, local_loss)) in results.iter().enumerate() {
        let params = wire::decode_params(up, &shapes)?;
        for (a, p) in acc.iter_mut().zip(&params) {
            *a = a.add_scaled(p, weights[k])?;
        }
        loss += weights[k] * local_loss;
    }
    let model = Model::from_params(spec, acc)?;
    for (k, (up, _)) in results.iter().enumerate() {
        ledger.record(round, k, method, [down.as_slice(), up.as_slice()]);
    }
    *global = GlobalModel { model, round };
    Ok(loss)
}
