use fedfd::datasets::{gen_blobs, LabeledDataset, Split};
use fedfd::distill::{
    client_update, distill, feature_mean, loss_dm, loss_fda, loss_fdd, loss_fdd_with_grad, loss_rsc, Broadcast,
    ClassBatch, ClientState, DistillConfig, FdaMode, FdaOptions, FdaTarget, FeatureDct, LossWeights, Objective,
    RscAccuracy,
};
use fedfd::frequency::{apply_mask, dct1, dct2};
use fedfd::nn::{cross_entropy, Model, ModelSpec};
use fedfd::{Error, Tensor};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Features equal the flattened input.
fn identity_extractor(c: usize, d: usize, classes: usize) -> Model {
    Model::zeros(ModelSpec::linear(&[c, d, d], classes).unwrap())
}

fn batches<'a>(pairs: &'a [(Tensor, Tensor)]) -> Vec<ClassBatch<'a>> {
    pairs
        .iter()
        .enumerate()
        .map(|(class, (real, synthetic))| ClassBatch { class, real, synthetic })
        .collect()
}

fn seeded_pairs(seed: u64, classes: usize, d: usize) -> Vec<(Tensor, Tensor)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..classes)
        .map(|_| (Tensor::randn(&[5, 1, d, d], &mut rng), Tensor::randn(&[3, 1, d, d], &mut rng)))
        .collect()
}

fn loop_mean(features: &Tensor) -> Vec<f64> {
    let (n, f) = (features.shape()[0], features.shape()[1]);
    let mut out = vec![0.0; f];
    for r in 0..n {
        for j in 0..f {
            out[j] += features.row(r)[j];
        }
    }
    out.iter().map(|v| v / n as f64).collect()
}

#[test]
fn feature_mean_of_identical_samples_is_that_feature() {
    let extractor = Model::init(ModelSpec::convnet(1, 8, 2, 4).unwrap(), 0);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let one = Tensor::randn(&[1, 1, 8, 8], &mut rng);
    let many = Tensor::stack(&[&one.slice_row(0), &one.slice_row(0), &one.slice_row(0)]).unwrap();
    let single = feature_mean(&one, &extractor).unwrap();
    assert!(feature_mean(&many, &extractor).unwrap().max_abs_diff(&single) < 1e-12);
}

#[test]
fn feature_mean_through_identity_is_elementwise_average() {
    let x = Tensor::new(&[2, 1, 1, 2], vec![1.0, 2.0, 3.0, 6.0]).unwrap();
    let extractor = Model::zeros(ModelSpec::linear(&[1, 1, 2], 2).unwrap());
    let m = feature_mean(&x, &extractor).unwrap();
    assert_eq!(m.data(), &[2.0, 4.0]);
}

#[test]
fn feature_mean_matches_loop_oracle() {
    let extractor = Model::init(ModelSpec::convnet(1, 8, 3, 4).unwrap(), 2);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = Tensor::randn(&[8, 1, 8, 8], &mut rng);
    let got = feature_mean(&x, &extractor).unwrap();
    let want = loop_mean(extractor.forward(&x).unwrap().features());
    for (a, b) in got.data().iter().zip(want) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn dm_vanishes_when_synthetic_copies_real() {
    let extractor = Model::init(ModelSpec::convnet(1, 8, 2, 4).unwrap(), 1);
    let pairs: Vec<(Tensor, Tensor)> = seeded_pairs(1, 2, 8).into_iter().map(|(r, _)| (r.clone(), r)).collect();
    assert!(loss_dm(&batches(&pairs), &extractor).unwrap().abs() < 1e-20);
    let fda = loss_fda(&batches(&pairs), &extractor, FdaOptions::default()).unwrap();
    assert!(fda.abs() < 1e-20);
}

#[test]
fn dm_of_single_images_is_squared_distance() {
    let a = Tensor::new(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let b = Tensor::new(&[1, 1, 2, 2], vec![0.0, 2.5, 3.0, 1.0]).unwrap();
    let pairs = vec![(a, b)];
    let v = loss_dm(&batches(&pairs), &identity_extractor(1, 2, 1)).unwrap();
    assert!((v - (1.0 + 0.25 + 9.0)).abs() < 1e-12);
}

fn mean_diffs(pairs: &[(Tensor, Tensor)], extractor: &Model) -> Vec<Vec<f64>> {
    pairs
        .iter()
        .map(|(real, syn)| {
            let ms = loop_mean(extractor.forward(syn).unwrap().features());
            let mr = loop_mean(extractor.forward(real).unwrap().features());
            ms.iter().zip(mr).map(|(a, b)| a - b).collect()
        })
        .collect()
}

#[test]
fn dm_matches_mean_then_distance_oracle() {
    let extractor = Model::init(ModelSpec::convnet(1, 8, 3, 4).unwrap(), 4);
    let pairs = seeded_pairs(4, 3, 8);
    let want: f64 = mean_diffs(&pairs, &extractor).iter().flatten().map(|v| v * v).sum();
    let got = loss_dm(&batches(&pairs), &extractor).unwrap();
    assert!((got - want).abs() <= 1e-10 * want.max(1.0));
}

#[test]
fn masked_fda_matches_transform_truncate_oracle() {
    let extractor = Model::init(ModelSpec::convnet(1, 8, 3, 4).unwrap(), 5);
    let pairs = seeded_pairs(5, 3, 8);
    let want: f64 = mean_diffs(&pairs, &extractor)
        .into_iter()
        .map(|d| {
            let keep = d.len().div_ceil(4);
            let spec = dct1(&Tensor::new(&[d.len()], d).unwrap()).unwrap();
            spec.data()[..keep].iter().map(|v| v * v).sum::<f64>()
        })
        .sum();
    let got = loss_fda(&batches(&pairs), &extractor, FdaOptions::default()).unwrap();
    assert!((got - want).abs() <= 1e-10 * want.max(1.0), "{got} vs {want}");
}

#[test]
fn masked_maps_fda_matches_per_channel_window_oracle() {
    // convnet(1, 8, ..) ends in 4 maps of 2×2; the window keeps 1×1 per map.
    let extractor = Model::init(ModelSpec::convnet(1, 8, 3, 4).unwrap(), 6);
    let pairs = seeded_pairs(6, 3, 8);
    let want: f64 = mean_diffs(&pairs, &extractor)
        .into_iter()
        .map(|d| {
            let maps = Tensor::new(&[4, 2, 2], d).unwrap();
            let spec = dct2(&maps).unwrap();
            (0..4).map(|c| spec.coefficients()[c * 4].powi(2)).sum::<f64>()
        })
        .sum();
    let options = FdaOptions {
        feature_dct: FeatureDct::Maps2d,
        ..FdaOptions::default()
    };
    let got = loss_fda(&batches(&pairs), &extractor, options).unwrap();
    assert!((got - want).abs() <= 1e-10 * want.max(1.0), "{got} vs {want}");
}

#[test]
fn full_spectrum_batch_target_equals_dm_on_spectra() {
    let extractor = Model::init(ModelSpec::convnet(1, 8, 2, 4).unwrap(), 7);
    let pairs = seeded_pairs(7, 2, 8);
    let spectra: Vec<(Tensor, Tensor)> = pairs
        .iter()
        .map(|(r, s)| {
            let t = |x: &Tensor| {
                let rows: Vec<Tensor> = (0..x.shape()[0])
                    .map(|i| dct2(&x.slice_row(i)).unwrap().into_coefficients())
                    .collect();
                Tensor::stack(&rows.iter().collect::<Vec<_>>()).unwrap()
            };
            (t(r), t(s))
        })
        .collect();
    let options = FdaOptions {
        mode: FdaMode::FullSpectrum,
        target: FdaTarget::Batches,
        ..FdaOptions::default()
    };
    let got = loss_fda(&batches(&pairs), &extractor, options).unwrap();
    let want = loss_dm(&batches(&spectra), &extractor).unwrap();
    assert!((got - want).abs() <= 1e-10 * want.max(1.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn full_spectrum_fda_equals_dm(seed in 0u64..10_000, classes in 1usize..4) {
        let extractor = Model::init(ModelSpec::convnet(1, 8, classes.max(2), 3).unwrap(), seed);
        let pairs = seeded_pairs(seed, classes, 8);
        let dm = loss_dm(&batches(&pairs), &extractor).unwrap();
        for feature_dct in [FeatureDct::Flat1d, FeatureDct::Maps2d] {
            let options = FdaOptions { feature_dct, ..FdaOptions::full_spectrum() };
            let fda = loss_fda(&batches(&pairs), &extractor, options).unwrap();
            prop_assert!((fda - dm).abs() <= 1e-6 * dm);
        }
    }

    #[test]
    fn masked_fda_never_exceeds_full(seed in 0u64..10_000) {
        let extractor = Model::init(ModelSpec::convnet(1, 8, 2, 3).unwrap(), seed);
        let pairs = seeded_pairs(seed, 2, 8);
        let full = loss_fda(&batches(&pairs), &extractor, FdaOptions::full_spectrum()).unwrap();
        let masked = loss_fda(&batches(&pairs), &extractor, FdaOptions::default()).unwrap();
        prop_assert!(masked <= full * (1.0 + 1e-12));
    }
}

/// Two classes of 2×2 single-channel images and a zero ten-way classifier:
/// uniform logits, ties predicted as class 0.
fn rsc_instance(real_classes: &[usize]) -> (Vec<(Tensor, Tensor)>, Model) {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let pairs = real_classes
        .iter()
        .map(|_| (Tensor::randn(&[2, 1, 2, 2], &mut rng), Tensor::randn(&[2, 1, 2, 2], &mut rng)))
        .collect();
    (pairs, Model::zeros(ModelSpec::linear(&[1, 2, 2], 10).unwrap()))
}

fn batches_with_classes<'a>(pairs: &'a [(Tensor, Tensor)], classes: &[usize]) -> Vec<ClassBatch<'a>> {
    pairs
        .iter()
        .zip(classes)
        .map(|((real, synthetic), &class)| ClassBatch { class, real, synthetic })
        .collect()
}

#[test]
fn rsc_is_zero_when_real_accuracy_is_zero() {
    let (pairs, model) = rsc_instance(&[1, 2]);
    assert_eq!(loss_rsc(&batches_with_classes(&pairs, &[1, 2]), &model).unwrap(), 0.0);
}

#[test]
fn rsc_is_plain_cross_entropy_at_full_accuracy() {
    let (pairs, model) = rsc_instance(&[0]);
    let ce = cross_entropy(model.forward(&pairs[0].1).unwrap().logits(), &[0, 0]).unwrap();
    let v = loss_rsc(&batches_with_classes(&pairs, &[0]), &model).unwrap();
    assert!((v - ce).abs() < 1e-12);
}

#[test]
fn rsc_is_accuracy_times_cross_entropy() {
    let (pairs, model) = rsc_instance(&[0, 1]);
    let v = loss_rsc(&batches_with_classes(&pairs, &[0, 1]), &model).unwrap();
    assert!((v - 0.5 * 10f64.ln()).abs() < 1e-12);
    assert!((v - 1.1512925).abs() < 1e-7);
}

#[test]
fn fdd_is_the_weighted_sum() {
    let extractor = Model::init(ModelSpec::convnet(1, 8, 2, 4).unwrap(), 9);
    let classifier = Model::init(ModelSpec::convnet(1, 8, 2, 4).unwrap(), 10);
    let pairs = seeded_pairs(9, 2, 8);
    let b = batches(&pairs);
    let options = FdaOptions::default();
    let fda = loss_fda(&b, &extractor, options).unwrap();
    let rsc = loss_rsc(&b, &classifier).unwrap();
    let w = |lambda1, lambda2| LossWeights { lambda1, lambda2 };
    assert_eq!(loss_fdd(&b, &extractor, &classifier, w(0.0, 0.0), options).unwrap(), 0.0);
    assert!((loss_fdd(&b, &extractor, &classifier, w(1.0, 0.0), options).unwrap() - fda).abs() < 1e-14);
    let v = loss_fdd(&b, &extractor, &classifier, w(0.01, 0.01), options).unwrap();
    assert!((v - 0.01 * (fda + rsc)).abs() < 1e-12);
}

#[test]
fn empty_and_duplicate_batches_rejected() {
    let extractor = Model::init(ModelSpec::convnet(1, 8, 2, 4).unwrap(), 0);
    assert!(loss_dm(&[], &extractor).is_err());
    let pairs = seeded_pairs(0, 1, 8);
    let dup = [batches(&pairs)[0], batches(&pairs)[0]];
    assert!(loss_dm(&dup, &extractor).is_err());
}

fn toy_client(ipc: usize) -> (ClientState, Model) {
    let shard = gen_blobs(2, 12, 8, 1, 3).unwrap();
    let client = ClientState::new(0, shard, ipc, 11).unwrap();
    let global = Model::init(ModelSpec::convnet(1, 8, 2, 4).unwrap(), 12);
    (client, global)
}

fn cfg(steps: usize, lr: f64) -> DistillConfig {
    DistillConfig {
        local_steps: steps,
        local_lr: lr,
        batch_size: 64,
        ..DistillConfig::desk()
    }
}

#[test]
fn zero_step_size_sends_the_initial_window() {
    let (mut client, global) = toy_client(3);
    let initial = client.synthetic().clone();
    let b = Broadcast { round: 1, global: &global, extractor_seed: 5 };
    let (blocks, trace) = client_update(&mut client, b, &cfg(1, 0.0), 4).unwrap();
    assert_eq!(trace.len(), 1);
    assert_eq!(client.synthetic(), &initial);
    let mut i = 0;
    for (class, images) in initial.iter() {
        for k in 0..images.shape()[0] {
            let want = apply_mask(&dct2(&images.slice_row(k)).unwrap(), 4, class).unwrap();
            assert_eq!(blocks[i], want);
            i += 1;
        }
    }
    assert_eq!(blocks.len(), 2 * 3);
}

#[test]
fn one_step_follows_the_objective_gradient() {
    let (mut client, global) = toy_client(2);
    let config = DistillConfig {
        rsc_accuracy: RscAccuracy::FullShard,
        ..cfg(1, 0.5)
    };
    let before = client.synthetic().clone();
    let b = Broadcast { round: 1, global: &global, extractor_seed: 21 };
    distill(&mut client, b, &config).unwrap();

    let extractor = Model::init(global.spec().clone(), 21);
    let shard = client.shard();
    let reals: Vec<Tensor> = (0..2).map(|c| shard.images().gather_rows(&shard.class_indices(c))).collect();
    let syn: Vec<&Tensor> = (0..2).map(|c| before.images(c).unwrap()).collect();
    let batches: Vec<ClassBatch> = (0..2)
        .map(|c| ClassBatch { class: c, real: &reals[c], synthetic: syn[c] })
        .collect();
    let (grad, _) = loss_fdd_with_grad(&batches, &extractor, &global, config.weights, config.fda, false).unwrap();
    for c in 0..2 {
        let want = syn[c].add_scaled(&grad.synthetic[c], -0.5).unwrap();
        assert!(client.synthetic().images(c).unwrap().max_abs_diff(&want) < 1e-12);
    }
}

#[test]
fn long_run_lowers_the_objective() {
    let (mut client, global) = toy_client(2);
    let b = Broadcast { round: 1, global: &global, extractor_seed: 2 };
    let trace = distill(&mut client, b, &cfg(200, 1.0)).unwrap();
    let head: f64 = trace[..20].iter().map(|t| t.loss_fdd).sum();
    let tail: f64 = trace[180..].iter().map(|t| t.loss_fdd).sum();
    assert!(tail < head, "{head} -> {tail}");
}

#[test]
fn block_count_is_classes_times_ipc() {
    let shard = gen_blobs(3, 10, 8, 1, 0).unwrap();
    let mut client = ClientState::new(2, shard.subset(&shard.class_indices(1)), 4, 0).unwrap();
    let global = Model::init(ModelSpec::convnet(1, 8, 3, 4).unwrap(), 0);
    let b = Broadcast { round: 1, global: &global, extractor_seed: 0 };
    let (blocks, _) = client_update(&mut client, b, &cfg(2, 1.0), 8).unwrap();
    assert_eq!(blocks.len(), 4);
    assert!(blocks.iter().all(|b| b.class_label() == 1 && b.side() == 8));
}

#[test]
fn dm_objective_runs_without_the_classifier_term() {
    let (mut client, global) = toy_client(2);
    let config = DistillConfig {
        objective: Objective::Dm,
        ..cfg(3, 1.0)
    };
    let b = Broadcast { round: 1, global: &global, extractor_seed: 0 };
    let trace = distill(&mut client, b, &config).unwrap();
    assert!(trace.iter().all(|t| t.loss_rsc == 0.0 && t.real_acc == 0.0));
}

#[test]
fn runaway_step_size_reports_divergence() {
    let (mut client, global) = toy_client(2);
    let b = Broadcast { round: 1, global: &global, extractor_seed: 0 };
    match distill(&mut client, b, &cfg(50, 1e300)) {
        Err(Error::Diverged { client: 0, iteration, .. }) => assert!(iteration < 50),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn window_outside_image_rejected() {
    let (mut client, global) = toy_client(1);
    let b = Broadcast { round: 1, global: &global, extractor_seed: 0 };
    assert!(client_update(&mut client, b, &cfg(1, 1.0), 9).is_err());
    let b = Broadcast { round: 1, global: &global, extractor_seed: 0 };
    assert!(client_update(&mut client, b, &cfg(1, 1.0), 0).is_err());
}

#[test]
fn empty_shard_rejected() {
    let empty = LabeledDataset::new(Tensor::zeros(&[0, 1, 4, 4]), vec![], 2, Split::Train).unwrap();
    assert!(ClientState::new(0, empty, 1, 0).is_err());
}
