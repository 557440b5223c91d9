//! Client-side synthetic-data optimisation: matching objectives, the local
//! update loop and pixel-domain selection baselines.

mod client;
mod objective;
mod spatial;

pub use client::{
    client_update, compress, distill, Broadcast, ClientState, DistillConfig, Objective, RscAccuracy, TraceRow,
    FULL_SHARD_LIMIT,
};
pub use objective::{
    feature_mean, loss_dm, loss_fda, loss_fdd, loss_fdd_with_grad, loss_rsc, loss_rsc_with_grad,
    matching_loss_with_grad, real_accuracy, rsc_with_grad, ClassBatch, FddBreakdown, FdaMode, FdaOptions,
    FdaTarget, FeatureDct, GradParts, LossGrad, LossWeights, Matching,
};
pub use spatial::{spatial_reconstruct, spatial_select_baseline, SpatialMethod};
