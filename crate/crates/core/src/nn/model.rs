use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::layers;
use crate::nn::spec::{Layer, ModelSpec};
use crate::tensor::Tensor;

static NEXT_UID: AtomicU64 = AtomicU64::new(1);

fn fresh_uid() -> u64 {
    NEXT_UID.fetch_add(1, Ordering::Relaxed)
}

/// A [`ModelSpec`] together with its parameter tensors.
#[derive(Debug)]
pub struct Model {
    spec: ModelSpec,
    params: Vec<Tensor>,
    uid: u64,
    version: u64,
}

impl Clone for Model {
    fn clone(&self) -> Self {
        Self {
            spec: self.spec.clone(),
            params: self.params.clone(),
            uid: fresh_uid(),
            version: 0,
        }
    }
}

/// Gradients of a scalar loss with respect to parameters and inputs.
#[derive(Debug, Clone)]
pub struct GradBundle {
    /// One tensor per parameter, present when requested.
    pub param_grads: Option<Vec<Tensor>>,
    pub input_grad: Tensor,
}

/// Activations recorded by [`Model::forward`], consumed by [`Model::backward`].
#[derive(Debug, Clone)]
pub struct ForwardPass {
    uid: u64,
    version: u64,
    /// `activations[i]` enters layer `i`; the last entry is the logits.
    activations: Vec<Tensor>,
}

impl ForwardPass {
    pub fn batch_size(&self) -> usize {
        self.activations[0].shape()[0]
    }

    /// Flattened input of the classification head, `(B, F)`.
    pub fn features(&self) -> &Tensor {
        &self.activations[self.activations.len() - 2]
    }

    pub fn logits(&self) -> &Tensor {
        self.activations.last().unwrap()
    }
}

impl Model {
    /// Fan-in scaled uniform initialisation: weights in `±√(6/fan_in)`,
    /// biases in `±1/√fan_in`.
    pub fn init(spec: ModelSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        for layer in spec.layers() {
            let shapes = layer.param_shapes();
            if shapes.is_empty() {
                continue;
            }
            let fan_in = layer.fan_in() as f64;
            let wb = (6.0 / fan_in).sqrt();
            let bb = 1.0 / fan_in.sqrt();
            params.push(Tensor::from_fn(&shapes[0], |_| rng.random_range(-wb..wb)));
            params.push(Tensor::from_fn(&shapes[1], |_| rng.random_range(-bb..bb)));
        }
        Self::assemble(spec, params)
    }

    pub fn zeros(spec: ModelSpec) -> Self {
        let params = spec.param_shapes().iter().map(|s| Tensor::zeros(s)).collect();
        Self::assemble(spec, params)
    }

    pub fn from_params(spec: ModelSpec, params: Vec<Tensor>) -> Result<Self> {
        let shapes = spec.param_shapes();
        if shapes.len() != params.len() {
            return Err(Error::invalid(format!(
                "expected {} parameter tensors, got {}",
                shapes.len(),
                params.len()
            )));
        }
        for (s, p) in shapes.iter().zip(&params) {
            p.expect_shape("model parameter", s)?;
            p.ensure_finite("model parameter")?;
        }
        Ok(Self::assemble(spec, params))
    }

    fn assemble(spec: ModelSpec, params: Vec<Tensor>) -> Self {
        Self {
            spec,
            params,
            uid: fresh_uid(),
            version: 0,
        }
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Replace every parameter; bumps the version so older passes go stale.
    pub fn set_params(&mut self, params: Vec<Tensor>) -> Result<()> {
        let rebuilt = Self::from_params(self.spec.clone(), params)?;
        self.params = rebuilt.params;
        self.version += 1;
        Ok(())
    }

    fn check_batch(&self, batch: &Tensor) -> Result<()> {
        let expected = self.spec.input_shape();
        let shape = batch.shape();
        if shape.len() != expected.len() + 1 || &shape[1..] != expected || shape[0] == 0 {
            let mut want = vec![shape.first().copied().unwrap_or(1).max(1)];
            want.extend_from_slice(expected);
            return Err(Error::shape("model input batch", &want, shape));
        }
        Ok(())
    }

    pub fn forward(&self, batch: &Tensor) -> Result<ForwardPass> {
        self.check_batch(batch)?;
        let mut activations = Vec::with_capacity(self.spec.layers().len() + 1);
        activations.push(batch.clone());
        let mut p = 0;
        for (i, layer) in self.spec.layers().iter().enumerate() {
            let x = &activations[i];
            let y = match layer {
                Layer::Linear { .. } => {
                    p += 2;
                    layers::linear_forward(x, &self.params[p - 2], &self.params[p - 1])
                }
                Layer::Conv3x3 { .. } => {
                    p += 2;
                    layers::conv3x3_forward(x, &self.params[p - 2], &self.params[p - 1])
                }
                Layer::Relu => layers::relu_forward(x),
                Layer::AvgPool2 => layers::avgpool2_forward(x),
                Layer::Flatten => {
                    let n = x.shape()[0];
                    x.clone().reshape(&[n, x.row_len()])?
                }
            };
            activations.push(y);
        }
        Ok(ForwardPass {
            uid: self.uid,
            version: self.version,
            activations,
        })
    }

    /// Reverse-mode gradients given upstream gradients on the features and/or
    /// the logits of a pass recorded by this model with its current parameters.
    pub fn backward(
        &self,
        pass: &ForwardPass,
        grad_features: Option<&Tensor>,
        grad_logits: Option<&Tensor>,
        want_params: bool,
    ) -> Result<GradBundle> {
        if pass.uid != self.uid || pass.version != self.version {
            return Err(Error::StaleForward);
        }
        let layers = self.spec.layers();
        let head = layers.len() - 1;
        let acts = &pass.activations;
        let mut param_grads: Vec<Option<Tensor>> = vec![None; self.params.len()];

        // Gradient arriving at the input of the head (the features).
        let mut grad = match grad_features {
            Some(g) => {
                g.expect_shape("feature gradient", acts[head].shape())?;
                g.clone()
            }
            None => Tensor::zeros(acts[head].shape()),
        };
        let np = self.params.len();
        if let Some(gl) = grad_logits {
            gl.expect_shape("logit gradient", acts[head + 1].shape())?;
            let (dx, dp) =
                layers::linear_backward(&acts[head], &self.params[np - 2], gl, want_params);
            grad = grad.add_scaled(&dx, 1.0)?;
            if let Some((dw, db)) = dp {
                param_grads[np - 2] = Some(dw);
                param_grads[np - 1] = Some(db);
            }
        }

        let mut p = np - 2;
        for i in (0..head).rev() {
            let x = &acts[i];
            grad = match layers[i] {
                Layer::Linear { .. } | Layer::Conv3x3 { .. } => {
                    p -= 2;
                    let (dx, dp) = if matches!(layers[i], Layer::Linear { .. }) {
                        layers::linear_backward(x, &self.params[p], &grad, want_params)
                    } else {
                        layers::conv3x3_backward(x, &self.params[p], &grad, want_params)
                    };
                    if let Some((dw, db)) = dp {
                        param_grads[p] = Some(dw);
                        param_grads[p + 1] = Some(db);
                    }
                    dx
                }
                Layer::Relu => layers::relu_backward(x, &grad),
                Layer::AvgPool2 => layers::avgpool2_backward(x.shape(), &grad),
                Layer::Flatten => grad.reshape(x.shape())?,
            };
        }

        let param_grads = want_params.then(|| {
            param_grads
                .into_iter()
                .zip(&self.params)
                .map(|(g, p)| g.unwrap_or_else(|| Tensor::zeros(p.shape())))
                .collect()
        });
        Ok(GradBundle {
            param_grads,
            input_grad: grad,
        })
    }

    /// `p ← p − lr · g` for every parameter.
    pub fn sgd_step(&mut self, grads: &[Tensor], lr: f64) -> Result<()> {
        if grads.len() != self.params.len() {
            return Err(Error::invalid(format!(
                "expected {} gradient tensors, got {}",
                self.params.len(),
                grads.len()
            )));
        }
        for (g, p) in grads.iter().zip(&self.params) {
            g.expect_shape("parameter gradient", p.shape())?;
            g.ensure_finite("parameter gradient")?;
        }
        for (p, g) in self.params.iter_mut().zip(grads) {
            for (pv, gv) in p.data_mut().iter_mut().zip(g.data()) {
                *pv -= lr * gv;
            }
        }
        self.version += 1;
        Ok(())
    }

    /// Predicted class per sample.
    pub fn predict(&self, batch: &Tensor) -> Result<Vec<usize>> {
        let pass = self.forward(batch)?;
        Ok(argmax_rows(pass.logits()))
    }

    /// Fraction of samples classified correctly, evaluated in chunks.
    pub fn accuracy(&self, images: &Tensor, labels: &[usize]) -> Result<f64> {
        const CHUNK: usize = 256;
        let n = labels.len();
        if n == 0 {
            return Err(Error::invalid("accuracy of an empty set"));
        }
        let mut correct = 0;
        for start in (0..n).step_by(CHUNK) {
            let rows: Vec<usize> = (start..(start + CHUNK).min(n)).collect();
            let preds = self.predict(&images.gather_rows(&rows))?;
            correct += preds
                .iter()
                .zip(&labels[start..start + rows.len()])
                .filter(|(p, l)| p == l)
                .count();
        }
        Ok(correct as f64 / n as f64)
    }
}

pub(crate) fn argmax_rows(logits: &Tensor) -> Vec<usize> {
    let c = logits.shape()[1];
    (0..logits.shape()[0])
        .map(|n| {
            let row = &logits.data()[n * c..(n + 1) * c];
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::loss::cross_entropy_with_grad;

    #[test]
    fn zero_model_outputs_zero() {
        let spec = ModelSpec::mlp(&[3], 4, 2).unwrap();
        let model = Model::zeros(spec);
        let pass = model.forward(&Tensor::zeros(&[5, 3])).unwrap();
        assert!(pass.features().data().iter().all(|&v| v == 0.0));
        assert!(pass.logits().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_linear_passes_input_through() {
        let spec = ModelSpec::new(
            &[3],
            vec![
                Layer::Linear {
                    inputs: 3,
                    outputs: 3,
                },
                Layer::Linear {
                    inputs: 3,
                    outputs: 2,
                },
            ],
            2,
        )
        .unwrap();
        let eye = Tensor::from_fn(&[3, 3], |i| if i / 3 == i % 3 { 1.0 } else { 0.0 });
        let model = Model::from_params(
            spec,
            vec![eye, Tensor::zeros(&[3]), Tensor::zeros(&[2, 3]), Tensor::zeros(&[2])],
        )
        .unwrap();
        let x = Tensor::new(&[2, 3], vec![1.0, -2.0, 3.0, 0.5, 0.0, 4.0]).unwrap();
        let pass = model.forward(&x).unwrap();
        assert_eq!(pass.features(), &x);

        // d(sum(features))/dx = 1 through the identity layer.
        let ones = Tensor::filled(&[2, 3], 1.0);
        let grads = model.backward(&pass, Some(&ones), None, false).unwrap();
        assert!(grads.input_grad.data().iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn shape_mismatch_reports_both_shapes() {
        let model = Model::init(ModelSpec::convnet_mini(1, 8, 3).unwrap(), 0);
        let err = model.forward(&Tensor::zeros(&[2, 1, 4, 4])).unwrap_err();
        match err {
            Error::ShapeMismatch {
                expected, actual, ..
            } => {
                assert_eq!(expected, vec![2, 1, 8, 8]);
                assert_eq!(actual, vec![2, 1, 4, 4]);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn stale_pass_rejected_after_update() {
        let mut model = Model::init(ModelSpec::mlp(&[2], 3, 2).unwrap(), 1);
        let x = Tensor::filled(&[1, 2], 0.5);
        let pass = model.forward(&x).unwrap();
        let (_, gl) = cross_entropy_with_grad(pass.logits(), &[1]).unwrap();
        let g = model.backward(&pass, None, Some(&gl), true).unwrap();
        model.sgd_step(&g.param_grads.unwrap(), 0.1).unwrap();
        assert!(matches!(
            model.backward(&pass, None, Some(&gl), true),
            Err(Error::StaleForward)
        ));
        let other = model.clone();
        assert!(matches!(
            other.backward(&model.forward(&x).unwrap(), None, Some(&gl), false),
            Err(Error::StaleForward)
        ));
    }

    #[test]
    fn sgd_arithmetic() {
        let spec = ModelSpec::new(
            &[1],
            vec![Layer::Linear {
                inputs: 1,
                outputs: 1,
            }],
            1,
        )
        .unwrap();
        let mut m = Model::from_params(
            spec,
            vec![Tensor::filled(&[1, 1], 1.0), Tensor::filled(&[1], 1.0)],
        )
        .unwrap();
        let g = vec![Tensor::filled(&[1, 1], 2.0), Tensor::filled(&[1], 2.0)];
        m.sgd_step(&g, 0.0).unwrap();
        assert_eq!(m.params()[0][0], 1.0);
        m.sgd_step(&g, 0.5).unwrap();
        assert_eq!(m.params()[0][0], 0.0);
        let bad = vec![Tensor::filled(&[1, 1], f64::NAN), Tensor::filled(&[1], 0.0)];
        assert!(m.sgd_step(&bad, 0.1).is_err());
    }

    #[test]
    fn init_is_deterministic() {
        let spec = ModelSpec::convnet_mini(1, 8, 4).unwrap();
        let a = Model::init(spec.clone(), 42);
        let b = Model::init(spec, 42);
        assert_eq!(a.params(), b.params());
        let x = Tensor::filled(&[2, 1, 8, 8], 0.3);
        assert_eq!(
            a.forward(&x).unwrap().logits(),
            b.forward(&x).unwrap().logits()
        );
    }
}
