//! Dense feed-forward networks over a fixed layer menu with hand-written
//! reverse-mode gradients.

mod checkpoint;
mod gradcheck;
pub(crate) mod layers;
mod loss;
mod model;
mod spec;

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use gradcheck::finite_diff_check;
pub use loss::{cross_entropy, cross_entropy_with_grad};
pub use model::{ForwardPass, GradBundle, Model};
pub use spec::{Layer, ModelSpec};


/// Plain SGD on a model given a full set of parameter gradients.
pub fn sgd_step(model: &mut Model, grads: &GradBundle, lr: f64) -> crate::Result<()> {
    let params = grads
        .param_grads
        .as_ref()
        .ok_or_else(|| crate::Error::InvalidArgument("gradient bundle has no parameter gradients".into()))?;
    model.sgd_step(params, lr)
}
