use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::objective::{
    matching_input_grad, matching_inputs, mean_rows, FdaOptions, FeatureNorm, LossWeights, Matching,
};
use crate::datasets::{init_synthetic, LabeledDataset, SyntheticSet};
use crate::error::{Error, Result};
use crate::frequency::{apply_mask, dct2, SpectralBlock};
use crate::nn::{cross_entropy_with_grad, Model};
use crate::tensor::Tensor;

/// Real-shard size up to which the classification factor uses the whole shard.
pub const FULL_SHARD_LIMIT: usize = 4096;

/// What a client minimises over its synthetic pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// `λ1 · L_DM`
    Dm,
    /// `λ1 · L_FDA`
    Fda,
    /// `λ1 · L_FDA + λ2 · L_RSC`
    Fdd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RscAccuracy {
    /// Full shard when it holds at most [`FULL_SHARD_LIMIT`] samples, else the sampled batch.
    Auto,
    FullShard,
    MiniBatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistillConfig {
    pub local_steps: usize,
    pub local_lr: f64,
    pub batch_size: usize,
    pub objective: Objective,
    pub fda: FdaOptions,
    pub weights: LossWeights,
    pub rsc_accuracy: RscAccuracy,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl DistillConfig {
    /// 1000 local steps at learning rate 1 with batches of 64.
    pub fn full_scale() -> Self {
        Self {
            local_steps: 1000,
            ..Self::desk()
        }
    }

    pub fn desk() -> Self {
        Self {
            local_steps: 200,
            local_lr: 1.0,
            batch_size: 64,
            objective: Objective::Fdd,
            fda: FdaOptions::default(),
            weights: LossWeights::default(),
            rsc_accuracy: RscAccuracy::Auto,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.local_steps == 0 {
            return Err(Error::invalid("local_steps must be positive"));
        }
        if !(self.local_lr.is_finite() && self.local_lr >= 0.0) {
            return Err(Error::invalid("local_lr must be a nonnegative real"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be positive"));
        }
        let w = self.weights;
        if !(w.lambda1 >= 0.0 && w.lambda2 >= 0.0 && w.lambda1.is_finite() && w.lambda2.is_finite()) {
            return Err(Error::invalid("loss weights must be nonnegative reals"));
        }
        Ok(())
    }

    fn matching(&self) -> Matching {
        match self.objective {
            Objective::Dm => Matching::Dm,
            Objective::Fda | Objective::Fdd => Matching::Fda(self.fda),
        }
    }
}

/// One client's local data and persistent synthetic set.
#[derive(Debug, Clone)]
pub struct ClientState {
    id: usize,
    shard: LabeledDataset,
    synthetic: SyntheticSet,
    class_inventory: BTreeSet<usize>,
    rng: ChaCha8Rng,
}

impl ClientState {
    /// Initialise `ipc` synthetic images per present class from the shard.
    pub fn new(id: usize, shard: LabeledDataset, ipc: usize, seed: u64) -> Result<Self> {
        if shard.is_empty() {
            return Err(Error::invalid(format!("client {id} has an empty shard")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(id as u64);
        let synthetic = init_synthetic(&shard, ipc, &mut rng)?;
        let class_inventory = shard.classes_present();
        Ok(Self {
            id,
            shard,
            synthetic,
            class_inventory,
            rng,
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn shard(&self) -> &LabeledDataset {
        &self.shard
    }

    pub fn synthetic(&self) -> &SyntheticSet {
        &self.synthetic
    }

    pub fn synthetic_mut(&mut self) -> &mut SyntheticSet {
        &mut self.synthetic
    }

    pub fn class_inventory(&self) -> &BTreeSet<usize> {
        &self.class_inventory
    }

    /// Raise the per-class image count with fresh real-sample initialisations.
    pub fn grow_ipc(&mut self, ipc: usize) -> Result<()> {
        self.synthetic.grow(&self.shard, ipc, &mut self.rng)
    }
}

/// What the server hands to every client at the start of a round.
#[derive(Debug, Clone, Copy)]
pub struct Broadcast<'a> {
    pub round: usize,
    pub global: &'a Model,
    /// Seed of the random feature extractor for this client and round.
    pub extractor_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub round: usize,
    pub client: usize,
    pub iteration: usize,
    pub loss_fdd: f64,
    pub loss_fda: f64,
    pub loss_rsc: f64,
    pub real_acc: f64,
}

fn forward_features(model: &Model, images: &Tensor) -> Result<Tensor> {
    const CHUNK: usize = 256;
    let n = images.shape()[0];
    let mut parts = Vec::new();
    for start in (0..n).step_by(CHUNK) {
        let rows: Vec<usize> = (start..(start + CHUNK).min(n)).collect();
        parts.push(model.forward(&images.gather_rows(&rows))?.features().clone());
    }
    let f = parts[0].shape()[1];
    let data: Vec<f64> = parts.into_iter().flat_map(Tensor::into_data).collect();
    Tensor::new(&[n, f], data)
}

/// Runs the local synthetic-pixel optimisation and returns the loss trace.
/// The extractor and the broadcast model stay frozen.
pub fn distill(client: &mut ClientState, broadcast: Broadcast<'_>, cfg: &DistillConfig) -> Result<Vec<TraceRow>> {
    cfg.validate()?;
    let global = broadcast.global;
    let extractor = Model::init(global.spec().clone(), broadcast.extractor_seed);
    let matching = cfg.matching();
    let norm = FeatureNorm::resolve(matching, &extractor)?;
    let uses_rsc = cfg.objective == Objective::Fdd;

    // The extractor is fixed for the whole round, so real features are computed once.
    let shard = &client.shard;
    let real_features = forward_features(&extractor, &matching_inputs(matching, shard.images()))?;
    let correct: Vec<bool> = if uses_rsc {
        let mut preds = Vec::with_capacity(shard.len());
        for start in (0..shard.len()).step_by(256) {
            let rows: Vec<usize> = (start..(start + 256).min(shard.len())).collect();
            preds.extend(global.predict(&shard.images().gather_rows(&rows))?);
        }
        preds.iter().zip(shard.labels()).map(|(p, l)| p == l).collect()
    } else {
        Vec::new()
    };
    let full_shard = match cfg.rsc_accuracy {
        RscAccuracy::FullShard => true,
        RscAccuracy::MiniBatch => false,
        RscAccuracy::Auto => shard.len() <= FULL_SHARD_LIMIT,
    };
    let shard_acc = if uses_rsc {
        correct.iter().filter(|&&c| c).count() as f64 / correct.len() as f64
    } else {
        0.0
    };

    let classes: Vec<usize> = client.synthetic.classes().collect();
    let class_rows: Vec<Vec<usize>> = classes.iter().map(|&c| shard.class_indices(c)).collect();
    let ipc = client.synthetic.ipc();
    let mut labels = Vec::with_capacity(classes.len() * ipc);
    for &c in &classes {
        labels.extend(std::iter::repeat_n(c, ipc));
    }
    let stacked = {
        let refs: Vec<&Tensor> = classes.iter().map(|&c| client.synthetic.images(c).unwrap()).collect();
        let per_image: Vec<Tensor> = refs
            .iter()
            .flat_map(|t| (0..t.shape()[0]).map(|i| t.slice_row(i)))
            .collect();
        let r: Vec<&Tensor> = per_image.iter().collect();
        Tensor::stack(&r)?
    };
    let mut syn = stacked;
    let f = real_features.shape()[1];
    let w = cfg.weights;
    let mut trace = Vec::with_capacity(cfg.local_steps);

    for iteration in 0..cfg.local_steps {
        let mut sampled_correct = 0usize;
        let mut sampled_total = 0usize;
        let mut real_means = Vec::with_capacity(classes.len());
        for rows in &class_rows {
            let k = cfg.batch_size.min(rows.len());
            let picked: Vec<usize> = sample(&mut client.rng, rows.len(), k).into_iter().map(|i| rows[i]).collect();
            if uses_rsc && !full_shard {
                sampled_correct += picked.iter().filter(|&&i| correct[i]).count();
                sampled_total += picked.len();
            }
            real_means.push(mean_rows(&real_features, picked.into_iter()));
        }

        let syn_in = matching_inputs(matching, &syn);
        let pass = extractor.forward(&syn_in)?;
        let mut feat_grad = Tensor::zeros(&[syn.shape()[0], f]);
        let mut matched = 0.0;
        for (ci, mu_r) in real_means.iter().enumerate() {
            let rows = ci * ipc..(ci + 1) * ipc;
            let mu_s = mean_rows(pass.features(), rows.clone());
            let diff: Vec<f64> = mu_s.iter().zip(mu_r).map(|(a, b)| a - b).collect();
            let (v, g) = norm.value_and_grad(&diff);
            matched += v;
            for r in rows {
                for (o, gv) in feat_grad.row_mut(r).iter_mut().zip(&g) {
                    *o = gv / ipc as f64;
                }
            }
        }
        let back = extractor.backward(&pass, Some(&feat_grad), None, false)?;
        let mut grad = matching_input_grad(matching, back.input_grad).scale(w.lambda1);

        let (mut rsc, mut acc) = (0.0, 0.0);
        if uses_rsc {
            acc = if full_shard {
                shard_acc
            } else {
                sampled_correct as f64 / sampled_total as f64
            };
            let cpass = global.forward(&syn)?;
            let (ce, mut gl) = cross_entropy_with_grad(cpass.logits(), &labels)?;
            gl.data_mut().iter_mut().for_each(|g| *g *= acc);
            let cg = global.backward(&cpass, None, Some(&gl), false)?;
            grad = grad.add_scaled(&cg.input_grad, w.lambda2)?;
            rsc = ce * acc;
        }

        let loss = w.lambda1 * matched + if uses_rsc { w.lambda2 * rsc } else { 0.0 };
        if !loss.is_finite() || grad.data().iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged {
                client: client.id,
                iteration,
                loss,
            });
        }
        trace.push(TraceRow {
            round: broadcast.round,
            client: client.id,
            iteration,
            loss_fdd: loss,
            loss_fda: matched,
            loss_rsc: rsc,
            real_acc: acc,
        });
        syn = syn.add_scaled(&grad, -cfg.local_lr)?;
    }

    for (ci, &c) in classes.iter().enumerate() {
        let rows: Vec<usize> = (ci * ipc..(ci + 1) * ipc).collect();
        *client.synthetic.images_mut(c).unwrap() = syn.gather_rows(&rows);
    }
    Ok(trace)
}

/// Frequency-domain view of every synthetic image: `apply_mask(dct2(x), s)`,
/// classes in ascending order.
pub fn compress(synthetic: &SyntheticSet, s: usize) -> Result<Vec<SpectralBlock>> {
    let mut blocks = Vec::with_capacity(synthetic.total_images());
    for (class, images) in synthetic.iter() {
        for i in 0..images.shape()[0] {
            blocks.push(apply_mask(&dct2(&images.slice_row(i))?, s, class)?);
        }
    }
    Ok(blocks)
}

/// Local distillation followed by low-frequency compression.
pub fn client_update(
    client: &mut ClientState,
    broadcast: Broadcast<'_>,
    cfg: &DistillConfig,
    s: usize,
) -> Result<(Vec<SpectralBlock>, Vec<TraceRow>)> {
    let d = client.shard.side();
    if s == 0 || s > d {
        return Err(Error::invalid(format!("window size {s} outside 1..={d}")));
    }
    let trace = distill(client, broadcast, cfg)?;
    Ok((compress(&client.synthetic, s)?, trace))
}
