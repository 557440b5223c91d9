use fedfd::datasets::{
    init_synthetic, load_cifar_binary, parse_cifar_binary, parse_idx, BlobConfig, Split, CIFAR_RECORD_BYTES,
};
use fedfd::federation::server_train;
use fedfd::nn::{Model, ModelSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::Write;

fn cifar_record(label: u8, pixel: impl Fn(usize) -> u8) -> Vec<u8> {
    let mut rec = vec![label];
    rec.extend((0..CIFAR_RECORD_BYTES - 1).map(pixel));
    rec
}

fn idx_pair(n: usize, side: usize, labels: &[u8]) -> (Vec<u8>, Vec<u8>) {
    let mut images = Vec::new();
    for v in [0x0803u32, n as u32, side as u32, side as u32] {
        images.extend(v.to_be_bytes());
    }
    images.extend((0..n * side * side).map(|i| (i * 7 % 256) as u8));
    let mut l = Vec::new();
    for v in [0x0801u32, n as u32] {
        l.extend(v.to_be_bytes());
    }
    l.extend(labels);
    (images, l)
}

#[test]
fn cifar_file_scales_bytes_to_unit_interval() {
    let mut bytes = cifar_record(0, |_| 255);
    bytes.extend(cifar_record(7, |_| 0));
    let mut file = tempfile::NamedTempFile::new().unwrap();
    file.write_all(&bytes).unwrap();
    let ds = load_cifar_binary(file.path(), Split::Test).unwrap();
    assert_eq!(ds.len(), 2);
    assert_eq!(ds.labels(), &[0, 7]);
    assert_eq!(ds.split(), Split::Test);
    let row = 3 * 32 * 32;
    assert!(ds.images().data()[..row].iter().all(|&v| v == 1.0));
    assert!(ds.images().data()[row..].iter().all(|&v| v == 0.0));
}

#[test]
fn cifar_rejects_empty_partial_and_bad_labels() {
    assert!(parse_cifar_binary(&[], Split::Train).is_err());
    let mut bytes = cifar_record(1, |i| i as u8);
    bytes.pop();
    assert!(parse_cifar_binary(&bytes, Split::Train).is_err());
    assert!(parse_cifar_binary(&cifar_record(10, |_| 0), Split::Train).is_err());
}

#[test]
fn idx_fixture_parses_row_major() {
    let (images, labels) = idx_pair(3, 4, &[2, 0, 1]);
    let ds = parse_idx(&images, &labels, 3, Split::Train).unwrap();
    assert_eq!(ds.images().shape(), &[3, 1, 4, 4]);
    assert_eq!(ds.labels(), &[2, 0, 1]);
    assert_eq!(ds.images()[17], (17 * 7 % 256) as f64 / 255.0);
}

#[test]
fn idx_rejects_truncation_and_out_of_range_labels() {
    let (mut images, labels) = idx_pair(2, 4, &[0, 1]);
    images.pop();
    assert!(parse_idx(&images, &labels, 10, Split::Train).is_err());

    let (images, mut labels) = idx_pair(2, 4, &[0, 1]);
    labels.pop();
    assert!(parse_idx(&images, &labels, 10, Split::Train).is_err());

    let (images, labels) = idx_pair(2, 4, &[0, 10]);
    assert!(parse_idx(&images, &labels, 10, Split::Train).is_err());
    assert!(parse_idx(&images, &labels, 11, Split::Train).is_ok());
}

#[test]
fn blobs_are_deterministic_per_seed_and_split() {
    let cfg = BlobConfig::new(3, 5, 8, 2, 11);
    let a = cfg.generate(Split::Train).unwrap();
    let b = cfg.generate(Split::Train).unwrap();
    assert_eq!(a.images(), b.images());
    assert_eq!(a.labels(), b.labels());
    let test = cfg.generate(Split::Test).unwrap();
    assert_ne!(a.images(), test.images());
    let other = BlobConfig::new(3, 5, 8, 2, 12).generate(Split::Train).unwrap();
    assert_ne!(a.images(), other.images());
    assert!(a.images().data().iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn noiseless_blobs_repeat_their_template() {
    let cfg = BlobConfig {
        noise: 0.0,
        ..BlobConfig::new(2, 3, 8, 1, 5)
    };
    let templates = cfg.templates().unwrap();
    let ds = cfg.generate(Split::Train).unwrap();
    for i in 0..ds.len() {
        let expected = templates[ds.labels()[i]].map(|v| v.clamp(0.0, 1.0));
        assert_eq!(ds.image(i).data(), expected.data());
    }
}

#[test]
fn blobs_are_linearly_separable() {
    let cfg = BlobConfig::new(4, 32, 16, 1, 0);
    let train = cfg.generate(Split::Train).unwrap();
    let mut model = Model::init(ModelSpec::linear(&[1, 16, 16], 4).unwrap(), 3);
    server_train(&mut model, train.images(), train.labels(), 50, 0.5, 32, 1).unwrap();
    let acc = model.accuracy(train.images(), train.labels()).unwrap();
    assert!(acc >= 0.95, "train accuracy {acc}");
}

#[test]
fn synthetic_init_draws_real_images_per_present_class() {
    let train = BlobConfig::new(3, 6, 8, 1, 2).generate(Split::Train).unwrap();
    let shard = train.subset(&(0..12).collect::<Vec<_>>());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let set = init_synthetic(&shard, 4, &mut rng).unwrap();
    assert_eq!(set.classes().collect::<Vec<_>>(), vec![0, 1]);
    assert_eq!(set.total_images(), 8);
    for (class, images) in set.iter() {
        let real: Vec<Vec<f64>> = shard.class_indices(class).iter().map(|&i| shard.image(i).data().to_vec()).collect();
        for r in 0..images.shape()[0] {
            assert!(real.contains(&images.slice_row(r).data().to_vec()));
        }
    }
    assert!(init_synthetic(&shard, 0, &mut rng).is_err());
}
