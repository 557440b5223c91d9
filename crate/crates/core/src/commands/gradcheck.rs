use std::fs;
use std::path::Path;

use csv::Writer;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::distill::{
    loss_fdd_with_grad, loss_rsc_with_grad, matching_loss_with_grad, ClassBatch, FdaMode, FdaOptions, FdaTarget,
    FeatureDct, LossGrad, LossWeights, Matching,
};
use crate::error::Result;
use crate::federation::derive_seed;
use crate::nn::layers;
use crate::nn::{cross_entropy_with_grad, finite_diff_check, Model, ModelSpec};
use crate::tensor::Tensor;

/// Largest accepted relative error.
pub const GRADCHECK_TOL: f64 = 1e-4;

const STEP: f64 = 1e-5;

/// Every check, layers first.
pub const CHECK_NAMES: [&str; 13] = [
    "linear",
    "conv3x3",
    "relu",
    "avgpool2",
    "flatten",
    "cross_entropy",
    "loss_dm",
    "loss_fda_full",
    "loss_fda_masked",
    "loss_fda_2d_maps",
    "loss_fda_batches",
    "loss_rsc",
    "loss_fdd",
];

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub name: String,
    /// Worst relative error on the input (layers) or synthetic pixels (losses).
    pub input_error: f64,
    /// Worst relative error over all parameters, when the check has any.
    pub param_error: Option<f64>,
}

impl GradCheck {
    pub fn max_error(&self) -> f64 {
        self.input_error.max(self.param_error.unwrap_or(0.0))
    }

    pub fn passed(&self) -> bool {
        self.max_error() <= GRADCHECK_TOL
    }
}

/// Perturbs the analytic gradient of the named check so the table must report it.
fn corrupt(g: &Tensor, name: &str, sabotage: Option<&str>) -> Tensor {
    if sabotage == Some(name) {
        g.map(|v| 1.1 * v + 1e-3)
    } else {
        g.clone()
    }
}

fn probe(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::randn(shape, rng)
}

fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn layer_checks(rng: &mut ChaCha8Rng, sabotage: Option<&str>) -> Result<Vec<GradCheck>> {
    let mut out = Vec::new();

    let x = probe(&[3, 5], rng);
    let w = probe(&[4, 5], rng);
    let b = probe(&[4], rng);
    let r = probe(&[3, 4], rng);
    let (dx, dp) = layers::linear_backward(&x, &w, &r, true);
    let (dw, db) = dp.unwrap();
    let f = |x: &Tensor, w: &Tensor, b: &Tensor| dot(&r, &layers::linear_forward(x, w, b));
    out.push(GradCheck {
        name: "linear".into(),
        input_error: finite_diff_check(|t| f(t, &w, &b), &corrupt(&dx, "linear", sabotage), &x, STEP),
        param_error: Some(
            finite_diff_check(|t| f(&x, t, &b), &dw, &w, STEP).max(finite_diff_check(|t| f(&x, &w, t), &db, &b, STEP)),
        ),
    });

    let x = probe(&[2, 2, 5, 4], rng);
    let w = probe(&[3, 2, 3, 3], rng);
    let b = probe(&[3], rng);
    let r = probe(&[2, 3, 5, 4], rng);
    let (dx, dp) = layers::conv3x3_backward(&x, &w, &r, true);
    let (dw, db) = dp.unwrap();
    let f = |x: &Tensor, w: &Tensor, b: &Tensor| dot(&r, &layers::conv3x3_forward(x, w, b));
    out.push(GradCheck {
        name: "conv3x3".into(),
        input_error: finite_diff_check(|t| f(t, &w, &b), &corrupt(&dx, "conv3x3", sabotage), &x, STEP),
        param_error: Some(
            finite_diff_check(|t| f(&x, t, &b), &dw, &w, STEP).max(finite_diff_check(|t| f(&x, &w, t), &db, &b, STEP)),
        ),
    });

    // Keep inputs away from the kink so central differences are exact.
    let x = probe(&[2, 3, 4], rng).map(|v| if v.abs() < 0.1 { v + 0.2f64.copysign(v) } else { v });
    let r = probe(&[2, 3, 4], rng);
    let dx = layers::relu_backward(&x, &r);
    out.push(GradCheck {
        name: "relu".into(),
        input_error: finite_diff_check(
            |t| dot(&r, &layers::relu_forward(t)),
            &corrupt(&dx, "relu", sabotage),
            &x,
            STEP,
        ),
        param_error: None,
    });

    let x = probe(&[2, 2, 5, 6], rng);
    let r = probe(&[2, 2, 2, 3], rng);
    let dx = layers::avgpool2_backward(x.shape(), &r);
    out.push(GradCheck {
        name: "avgpool2".into(),
        input_error: finite_diff_check(
            |t| dot(&r, &layers::avgpool2_forward(t)),
            &corrupt(&dx, "avgpool2", sabotage),
            &x,
            STEP,
        ),
        param_error: None,
    });

    let x = probe(&[2, 2, 3, 3], rng);
    let r = probe(&[2, 18], rng);
    let dx = r.clone().reshape(x.shape())?;
    out.push(GradCheck {
        name: "flatten".into(),
        input_error: finite_diff_check(
            |t| dot(&r, &t.clone().reshape(&[2, 18]).unwrap()),
            &corrupt(&dx, "flatten", sabotage),
            &x,
            STEP,
        ),
        param_error: None,
    });

    let logits = probe(&[4, 3], rng);
    let labels = [0, 2, 1, 2];
    let (_, g) = cross_entropy_with_grad(&logits, &labels)?;
    out.push(GradCheck {
        name: "cross_entropy".into(),
        input_error: finite_diff_check(
            |t| cross_entropy_with_grad(t, &labels).unwrap().0,
            &corrupt(&g, "cross_entropy", sabotage),
            &logits,
            STEP,
        ),
        param_error: None,
    });
    Ok(out)
}

/// Synthetic and real images of a two-class instance.
struct Instance {
    real: Vec<Tensor>,
    synthetic: Vec<Tensor>,
    extractor: Model,
    classifier: Model,
}

impl Instance {
    fn new(seed: u64, rng: &mut ChaCha8Rng) -> Result<Self> {
        let spec = ModelSpec::convnet(1, 8, 2, 4)?;
        Ok(Self {
            real: (0..2).map(|_| probe(&[3, 1, 8, 8], rng)).collect(),
            synthetic: (0..2).map(|_| probe(&[2, 1, 8, 8], rng)).collect(),
            extractor: Model::init(spec.clone(), derive_seed(seed, &[1])),
            classifier: Model::init(spec, derive_seed(seed, &[2])),
        })
    }

    fn batches<'a>(&'a self, synthetic: &'a [Tensor]) -> Vec<ClassBatch<'a>> {
        (0..2)
            .map(|c| ClassBatch {
                class: c,
                real: &self.real[c],
                synthetic: &synthetic[c],
            })
            .collect()
    }
}

type LossFn<'a> = dyn Fn(&[ClassBatch<'_>], &Model, &Model, bool) -> Result<LossGrad> + 'a;

fn loss_check(name: &str, inst: &Instance, loss: &LossFn<'_>, sabotage: Option<&str>) -> Result<GradCheck> {
    let value = |syn: &[Tensor], ext: &Model, cls: &Model| loss(&inst.batches(syn), ext, cls, false).unwrap().value;
    let grad = loss(&inst.batches(&inst.synthetic), &inst.extractor, &inst.classifier, true)?;

    let mut input_error = 0.0f64;
    for c in 0..inst.synthetic.len() {
        let analytic = corrupt(&grad.synthetic[c], name, sabotage);
        let err = finite_diff_check(
            |t| {
                let mut syn = inst.synthetic.clone();
                syn[c] = t.clone();
                value(&syn, &inst.extractor, &inst.classifier)
            },
            &analytic,
            &inst.synthetic[c],
            STEP,
        );
        input_error = input_error.max(err);
    }

    let mut param_error = None;
    for (which, grads) in [(0, &grad.extractor_params), (1, &grad.classifier_params)] {
        let Some(grads) = grads else { continue };
        let model = if which == 0 { &inst.extractor } else { &inst.classifier };
        for (j, g) in grads.iter().enumerate() {
            let err = finite_diff_check(
                |t| {
                    let mut params = model.params().to_vec();
                    params[j] = t.clone();
                    let m = Model::from_params(model.spec().clone(), params).unwrap();
                    if which == 0 {
                        value(&inst.synthetic, &m, &inst.classifier)
                    } else {
                        value(&inst.synthetic, &inst.extractor, &m)
                    }
                },
                g,
                &model.params()[j],
                STEP,
            );
            param_error = Some(param_error.unwrap_or(0.0f64).max(err));
        }
    }
    Ok(GradCheck {
        name: name.into(),
        input_error,
        param_error,
    })
}

fn loss_checks(seed: u64, rng: &mut ChaCha8Rng, sabotage: Option<&str>) -> Result<Vec<GradCheck>> {
    let inst = Instance::new(seed, rng)?;
    let fda = |options: FdaOptions| {
        move |b: &[ClassBatch<'_>], e: &Model, _: &Model, p: bool| matching_loss_with_grad(Matching::Fda(options), b, e, p)
    };
    let masked = FdaOptions::default();
    let maps = FdaOptions {
        feature_dct: FeatureDct::Maps2d,
        ..masked
    };
    let batches = FdaOptions {
        target: FdaTarget::Batches,
        mode: FdaMode::MaskedLowfreq,
        ..masked
    };
    let weights = LossWeights::default();
    let dm = |b: &[ClassBatch<'_>], e: &Model, _: &Model, p: bool| matching_loss_with_grad(Matching::Dm, b, e, p);
    let rsc = |b: &[ClassBatch<'_>], _: &Model, c: &Model, p: bool| loss_rsc_with_grad(b, c, p).map(|(l, _)| l);
    let fdd = |b: &[ClassBatch<'_>], e: &Model, c: &Model, p: bool| {
        loss_fdd_with_grad(b, e, c, weights, masked, p).map(|(l, _)| l)
    };
    let checks: [(&str, &LossFn<'_>); 7] = [
        ("loss_dm", &dm),
        ("loss_fda_full", &fda(FdaOptions::full_spectrum())),
        ("loss_fda_masked", &fda(masked)),
        ("loss_fda_2d_maps", &fda(maps)),
        ("loss_fda_batches", &fda(batches)),
        ("loss_rsc", &rsc),
        ("loss_fdd", &fdd),
    ];
    checks
        .iter()
        .map(|(name, f)| loss_check(name, &inst, *f, sabotage))
        .collect()
}

/// Finite-difference checks of every layer and loss on tiny seeded
/// instances. `sabotage` names a check whose analytic gradient is corrupted.
pub fn gradcheck_suite(seed: u64, sabotage: Option<&str>) -> Result<Vec<GradCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = layer_checks(&mut rng, sabotage)?;
    out.extend(loss_checks(seed, &mut rng, sabotage)?);
    Ok(out)
}

/// Run the suite and write `gradcheck.csv` (`name, input_error, param_error, max_error, status`).
pub fn cmd_gradcheck(seed: u64, sabotage: Option<&str>, out: &Path) -> Result<Vec<GradCheck>> {
    let checks = gradcheck_suite(seed, sabotage)?;
    fs::create_dir_all(out)?;
    let mut w = Writer::from_path(out.join("gradcheck.csv"))?;
    w.write_record(["name", "input_error", "param_error", "max_error", "status"])?;
    for c in &checks {
        w.write_record([
            c.name.clone(),
            format!("{:e}", c.input_error),
            c.param_error.map_or(String::new(), |e| format!("{e:e}")),
            format!("{:e}", c.max_error()),
            if c.passed() { "PASS" } else { "FAIL" }.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(checks)
}
