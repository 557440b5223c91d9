//! Distribution-matching objectives over per-class feature means, and the
//! real-data-weighted synthetic classification term.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frequency::{dct1_slice, dct2_tensor, idct1_slice, idct2_tensor};
use crate::nn::{cross_entropy_with_grad, Model};
use crate::tensor::Tensor;

/// Which frequency coordinates of the feature statistics enter the norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FdaMode {
    FullSpectrum,
    /// Flat features: the first `⌈F/4⌉` coefficients. Feature maps: the
    /// top-left `⌈h/2⌉ × ⌈w/2⌉` window of every channel.
    MaskedLowfreq,
}

/// How the frequency transform is applied to extractor features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureDct {
    /// 1D DCT of the flattened feature vector.
    #[serde(rename = "1d-flat")]
    Flat1d,
    /// Per-channel 2D DCT of the feature maps before flattening.
    #[serde(rename = "2d-maps")]
    Maps2d,
}

/// What the transform is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FdaTarget {
    /// Transform the extractor features (the defined loss).
    Features,
    /// Transform the raw image batches, then extract and match plain features.
    Batches,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdaOptions {
    pub mode: FdaMode,
    pub feature_dct: FeatureDct,
    pub target: FdaTarget,
}

impl Default for FdaOptions {
    fn default() -> Self {
        Self {
            mode: FdaMode::MaskedLowfreq,
            feature_dct: FeatureDct::Flat1d,
            target: FdaTarget::Features,
        }
    }
}

impl FdaOptions {
    pub fn full_spectrum() -> Self {
        Self {
            mode: FdaMode::FullSpectrum,
            ..Self::default()
        }
    }
}

/// Feature statistic compared between synthetic and real means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Matching {
    /// Plain feature means.
    Dm,
    /// Means of frequency-transformed features.
    Fda(FdaOptions),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda1: 0.01,
            lambda2: 0.01,
        }
    }
}

/// Synthetic and real images of one class.
#[derive(Debug, Clone, Copy)]
pub struct ClassBatch<'a> {
    pub class: usize,
    pub real: &'a Tensor,
    pub synthetic: &'a Tensor,
}

/// A loss value with gradients for the synthetic images of every class batch
/// (same order) and, on request, for model parameters.
#[derive(Debug, Clone)]
pub struct LossGrad {
    pub value: f64,
    pub synthetic: Vec<Tensor>,
    pub extractor_params: Option<Vec<Tensor>>,
    pub classifier_params: Option<Vec<Tensor>>,
}

/// The norm-and-transform applied to a mean difference, resolved against a
/// concrete feature layout.
#[derive(Debug, Clone, Copy)]
pub(crate) enum FeatureNorm {
    Plain,
    Flat { keep: Option<usize> },
    Maps { shape: [usize; 3], keep: Option<usize> },
}

impl FeatureNorm {
    pub(crate) fn resolve(matching: Matching, extractor: &Model) -> Result<Self> {
        let opts = match matching {
            Matching::Dm => return Ok(Self::Plain),
            // The transform sits in front of the extractor; features are matched plainly.
            Matching::Fda(o) if o.target == FdaTarget::Batches => return Ok(Self::Plain),
            Matching::Fda(o) => o,
        };
        let masked = opts.mode == FdaMode::MaskedLowfreq;
        match opts.feature_dct {
            FeatureDct::Flat1d => {
                let f = extractor.spec().feature_len();
                Ok(Self::Flat {
                    keep: masked.then(|| f.div_ceil(4)),
                })
            }
            FeatureDct::Maps2d => {
                let shape = extractor.spec().feature_map_shape().ok_or_else(|| {
                    Error::invalid("2d-maps feature transform needs an extractor ending in flatten")
                })?;
                if shape[1] != shape[2] {
                    return Err(Error::invalid(format!(
                        "2d-maps feature transform needs square maps, got {shape:?}"
                    )));
                }
                Ok(Self::Maps {
                    shape,
                    keep: masked.then(|| shape[1].div_ceil(2)),
                })
            }
        }
    }

    /// `(‖P T diff‖², 2 Tᵀ Pᵀ P T diff)` for orthonormal `T` and a 0/1 mask `P`.
    pub(crate) fn value_and_grad(&self, diff: &[f64]) -> (f64, Vec<f64>) {
        match *self {
            Self::Plain => (
                diff.iter().map(|v| v * v).sum(),
                diff.iter().map(|v| 2.0 * v).collect(),
            ),
            Self::Flat { keep } => {
                let mut t = dct1_slice(diff);
                if let Some(k) = keep {
                    t[k..].fill(0.0);
                }
                let value = t.iter().map(|v| v * v).sum();
                let back = idct1_slice(&t);
                (value, back.into_iter().map(|v| 2.0 * v).collect())
            }
            Self::Maps { shape, keep } => {
                let maps = Tensor::new(&shape, diff.to_vec()).expect("feature length matches maps");
                let t = masked_spectrum(dct2_tensor(&maps), keep);
                let value = t.sum_sq();
                let back = idct2_tensor(&t);
                (value, back.data().iter().map(|v| 2.0 * v).collect())
            }
        }
    }
}

/// Batch-target FDA compares features of DCT-transformed images; the masked
/// mode keeps the top-left `⌈d/2⌉` window of each image spectrum.
pub(crate) fn matching_inputs(matching: Matching, images: &Tensor) -> Tensor {
    match matching {
        Matching::Fda(o) if o.target == FdaTarget::Batches => {
            let keep = (o.mode == FdaMode::MaskedLowfreq).then(|| images.shape()[2].div_ceil(2));
            per_image(images, |x| masked_spectrum(dct2_tensor(x), keep))
        }
        _ => images.clone(),
    }
}

pub(crate) fn matching_input_grad(matching: Matching, grad: Tensor) -> Tensor {
    match matching {
        Matching::Fda(o) if o.target == FdaTarget::Batches => {
            let keep = (o.mode == FdaMode::MaskedLowfreq).then(|| grad.shape()[2].div_ceil(2));
            per_image(&grad, |g| idct2_tensor(&masked_spectrum(g.clone(), keep)))
        }
        _ => grad,
    }
}

/// Zero every coefficient outside the top-left `keep × keep` window of each channel.
fn masked_spectrum(mut t: Tensor, keep: Option<usize>) -> Tensor {
    if let Some(k) = keep {
        let (c, h, w) = (t.shape()[0], t.shape()[1], t.shape()[2]);
        for ch in 0..c {
            for r in 0..h {
                for col in 0..w {
                    if r >= k || col >= k {
                        t[(ch * h + r) * w + col] = 0.0;
                    }
                }
            }
        }
    }
    t
}

fn per_image(images: &Tensor, f: impl Fn(&Tensor) -> Tensor) -> Tensor {
    let n = images.shape()[0];
    let mut out = Tensor::zeros(images.shape());
    for i in 0..n {
        let t = f(&images.slice_row(i));
        out.row_mut(i).copy_from_slice(t.data());
    }
    out
}

/// Mean of rows `[start, end)` of a `(B, F)` feature tensor.
pub(crate) fn mean_rows(features: &Tensor, rows: impl Iterator<Item = usize>) -> Vec<f64> {
    let f = features.shape()[1];
    let mut acc = vec![0.0; f];
    let mut n = 0usize;
    for r in rows {
        for (a, v) in acc.iter_mut().zip(features.row(r)) {
            *a += v;
        }
        n += 1;
    }
    let inv = 1.0 / n as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    acc
}

/// Mean extractor feature over a nonempty batch `(n, c, d, d)`.
pub fn feature_mean(batch: &Tensor, extractor: &Model) -> Result<Tensor> {
    if batch.shape().first().copied().unwrap_or(0) == 0 {
        return Err(Error::invalid("feature mean of an empty class batch"));
    }
    let pass = extractor.forward(batch)?;
    let n = batch.shape()[0];
    Tensor::new(&[pass.features().shape()[1]], mean_rows(pass.features(), 0..n))
}

fn validate_batches(batches: &[ClassBatch<'_>]) -> Result<()> {
    if batches.is_empty() {
        return Err(Error::invalid("no class batches"));
    }
    for (i, b) in batches.iter().enumerate() {
        if b.real.shape().first().copied().unwrap_or(0) == 0 {
            return Err(Error::invalid(format!("class {} has no real samples", b.class)));
        }
        if b.synthetic.shape().first().copied().unwrap_or(0) == 0 {
            return Err(Error::invalid(format!("class {} has no synthetic samples", b.class)));
        }
        if batches[..i].iter().any(|o| o.class == b.class) {
            return Err(Error::invalid(format!("class {} appears twice", b.class)));
        }
    }
    Ok(())
}

/// Σ_c of the matching norm between synthetic and real class statistics,
/// with gradients for the synthetic images and optionally the extractor.
pub fn matching_loss_with_grad(
    matching: Matching,
    batches: &[ClassBatch<'_>],
    extractor: &Model,
    want_params: bool,
) -> Result<LossGrad> {
    validate_batches(batches)?;
    let norm = FeatureNorm::resolve(matching, extractor)?;
    let mut value = 0.0;
    let mut synthetic = Vec::with_capacity(batches.len());
    let mut params: Option<Vec<Tensor>> = None;
    let mut accumulate = |grads: Option<Vec<Tensor>>| -> Result<()> {
        if let Some(g) = grads {
            params = Some(match params.take() {
                None => g,
                Some(acc) => acc
                    .iter()
                    .zip(&g)
                    .map(|(a, b)| a.add_scaled(b, 1.0))
                    .collect::<Result<_>>()?,
            });
        }
        Ok(())
    };
    for b in batches {
        let syn_in = matching_inputs(matching, b.synthetic);
        let real_in = matching_inputs(matching, b.real);
        let syn_pass = extractor.forward(&syn_in)?;
        let real_pass = extractor.forward(&real_in)?;
        let (ns, nr) = (syn_in.shape()[0], real_in.shape()[0]);
        let mu_s = mean_rows(syn_pass.features(), 0..ns);
        let mu_r = mean_rows(real_pass.features(), 0..nr);
        let diff: Vec<f64> = mu_s.iter().zip(&mu_r).map(|(a, b)| a - b).collect();
        let (v, g) = norm.value_and_grad(&diff);
        value += v;

        let f = diff.len();
        let syn_feat_grad = Tensor::from_fn(&[ns, f], |i| g[i % f] / ns as f64);
        let sg = extractor.backward(&syn_pass, Some(&syn_feat_grad), None, want_params)?;
        synthetic.push(matching_input_grad(matching, sg.input_grad));
        accumulate(sg.param_grads)?;
        if want_params {
            let real_feat_grad = Tensor::from_fn(&[nr, f], |i| -g[i % f] / nr as f64);
            let rg = extractor.backward(&real_pass, Some(&real_feat_grad), None, true)?;
            accumulate(rg.param_grads)?;
        }
    }
    Ok(LossGrad {
        value,
        synthetic,
        extractor_params: params,
        classifier_params: None,
    })
}

/// Σ_c ‖μ_c^S − μ_c^D‖² over extractor features.
pub fn loss_dm(batches: &[ClassBatch<'_>], extractor: &Model) -> Result<f64> {
    matching_loss_with_grad(Matching::Dm, batches, extractor, false).map(|l| l.value)
}

/// Σ_c ‖ν_c^S − ν_c^D‖² over frequency-transformed extractor features.
pub fn loss_fda(batches: &[ClassBatch<'_>], extractor: &Model, options: FdaOptions) -> Result<f64> {
    matching_loss_with_grad(Matching::Fda(options), batches, extractor, false).map(|l| l.value)
}

/// Classification accuracy of `model` on labeled images.
pub fn real_accuracy(model: &Model, images: &Tensor, labels: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::invalid("real-data accuracy needs a nonempty shard"));
    }
    model.accuracy(images, labels)
}

/// Stack the synthetic images of all batches with their class labels.
pub(crate) fn stack_synthetic(batches: &[ClassBatch<'_>]) -> Result<(Tensor, Vec<usize>)> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for b in batches {
        for i in 0..b.synthetic.shape()[0] {
            rows.push(b.synthetic.slice_row(i));
            labels.push(b.class);
        }
    }
    let refs: Vec<&Tensor> = rows.iter().collect();
    Ok((Tensor::stack(&refs)?, labels))
}

/// Split a stacked `(N, ...)` gradient back into per-batch blocks.
pub(crate) fn unstack_like(stacked: &Tensor, batches: &[ClassBatch<'_>]) -> Vec<Tensor> {
    let mut out = Vec::with_capacity(batches.len());
    let mut start = 0;
    for b in batches {
        let n = b.synthetic.shape()[0];
        let rows: Vec<usize> = (start..start + n).collect();
        out.push(stacked.gather_rows(&rows));
        start += n;
    }
    out
}

/// Synthetic cross-entropy scaled by a constant real-data accuracy.
pub fn rsc_with_grad(
    synthetic: &Tensor,
    labels: &[usize],
    classifier: &Model,
    real_acc: f64,
    want_params: bool,
) -> Result<(f64, GradParts)> {
    let pass = classifier.forward(synthetic)?;
    let (ce, mut gl) = cross_entropy_with_grad(pass.logits(), labels)?;
    gl.data_mut().iter_mut().for_each(|g| *g *= real_acc);
    let g = classifier.backward(&pass, None, Some(&gl), want_params)?;
    Ok((
        ce * real_acc,
        GradParts {
            input: g.input_grad,
            params: g.param_grads,
            cross_entropy: ce,
        },
    ))
}

#[derive(Debug, Clone)]
pub struct GradParts {
    pub input: Tensor,
    pub params: Option<Vec<Tensor>>,
    pub cross_entropy: f64,
}

/// `L_CE(S) · acc(D)` where the accuracy factor carries no gradient.
pub fn loss_rsc_with_grad(batches: &[ClassBatch<'_>], classifier: &Model, want_params: bool) -> Result<(LossGrad, f64)> {
    validate_batches(batches)?;
    let (real, real_labels) = {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for b in batches {
            for i in 0..b.real.shape()[0] {
                rows.push(b.real.slice_row(i));
                labels.push(b.class);
            }
        }
        let refs: Vec<&Tensor> = rows.iter().collect();
        (Tensor::stack(&refs)?, labels)
    };
    let acc = real_accuracy(classifier, &real, &real_labels)?;
    let (syn, labels) = stack_synthetic(batches)?;
    let (value, parts) = rsc_with_grad(&syn, &labels, classifier, acc, want_params)?;
    Ok((
        LossGrad {
            value,
            synthetic: unstack_like(&parts.input, batches),
            extractor_params: None,
            classifier_params: parts.params,
        },
        acc,
    ))
}

pub fn loss_rsc(batches: &[ClassBatch<'_>], classifier: &Model) -> Result<f64> {
    loss_rsc_with_grad(batches, classifier, false).map(|(l, _)| l.value)
}

/// Per-term values of the combined objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FddBreakdown {
    pub fdd: f64,
    pub fda: f64,
    pub rsc: f64,
    pub real_acc: f64,
}

/// `λ1 · L_FDA + λ2 · L_RSC` with gradients for synthetic pixels and both models.
pub fn loss_fdd_with_grad(
    batches: &[ClassBatch<'_>],
    extractor: &Model,
    classifier: &Model,
    weights: LossWeights,
    options: FdaOptions,
    want_params: bool,
) -> Result<(LossGrad, FddBreakdown)> {
    let fda = matching_loss_with_grad(Matching::Fda(options), batches, extractor, want_params)?;
    let (rsc, acc) = loss_rsc_with_grad(batches, classifier, want_params)?;
    let synthetic = fda
        .synthetic
        .iter()
        .zip(&rsc.synthetic)
        .map(|(a, b)| a.scale(weights.lambda1).add_scaled(b, weights.lambda2))
        .collect::<Result<Vec<_>>>()?;
    let scale_all = |v: Option<Vec<Tensor>>, k: f64| v.map(|g| g.iter().map(|t| t.scale(k)).collect());
    let value = weights.lambda1 * fda.value + weights.lambda2 * rsc.value;
    Ok((
        LossGrad {
            value,
            synthetic,
            extractor_params: scale_all(fda.extractor_params, weights.lambda1),
            classifier_params: scale_all(rsc.classifier_params, weights.lambda2),
        },
        FddBreakdown {
            fdd: value,
            fda: fda.value,
            rsc: rsc.value,
            real_acc: acc,
        },
    ))
}

pub fn loss_fdd(
    batches: &[ClassBatch<'_>],
    extractor: &Model,
    classifier: &Model,
    weights: LossWeights,
    options: FdaOptions,
) -> Result<f64> {
    loss_fdd_with_grad(batches, extractor, classifier, weights, options, false).map(|(l, _)| l.value)
}
