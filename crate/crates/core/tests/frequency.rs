use fedfd::frequency::{
    apply_mask, attack_combination_logcount, binary_mask, cumulative_energy, dct1, dct2, idct1, idct2, zero_pad,
    EnergyOrdering, Spectrum,
};
use fedfd::wire::{decode_spectral_block, encode_spectral_block, spectral_block_bytes};
use fedfd::Tensor;
use proptest::prelude::*;

fn tensor(shape: Vec<usize>) -> impl Strategy<Value = Tensor> {
    let n: usize = shape.iter().product();
    prop::collection::vec(-3.0f64..3.0, n).prop_map(move |v| Tensor::new(&shape, v).unwrap())
}

fn image() -> impl Strategy<Value = Tensor> {
    (1usize..4, 1usize..20).prop_flat_map(|(c, d)| tensor(vec![c, d, d]))
}

fn image_and_window() -> impl Strategy<Value = (Tensor, usize)> {
    image().prop_flat_map(|x| {
        let d = x.shape()[1];
        (Just(x), 1..=d)
    })
}

proptest! {
    #[test]
    fn transform_roundtrip(x in image()) {
        let back = idct2(&dct2(&x).unwrap()).unwrap();
        prop_assert!(back.max_abs_diff(&x) <= 1e-9);
    }

    #[test]
    fn transform_preserves_energy(x in image()) {
        let e = x.sum_sq();
        prop_assert!((dct2(&x).unwrap().energy() - e).abs() <= 1e-9 * e.max(1.0));
    }

    #[test]
    fn transform_is_linear(x in tensor(vec![2, 6, 6]), y in tensor(vec![2, 6, 6]), k in -2.0f64..2.0) {
        let lhs = dct2(&x.add_scaled(&y, k).unwrap()).unwrap();
        let rhs = dct2(&x).unwrap().coefficients().add_scaled(dct2(&y).unwrap().coefficients(), k).unwrap();
        prop_assert!(lhs.coefficients().max_abs_diff(&rhs) <= 1e-10);
    }

    #[test]
    fn dct1_is_orthonormal(v in (1usize..40).prop_flat_map(|n| tensor(vec![n]))) {
        let f = dct1(&v).unwrap();
        prop_assert!((f.sum_sq() - v.sum_sq()).abs() <= 1e-9 * v.sum_sq().max(1.0));
        prop_assert!(idct1(&f).unwrap().max_abs_diff(&v) <= 1e-10);
    }

    #[test]
    fn pad_then_mask_is_identity((x, s) in image_and_window()) {
        let block = apply_mask(&dct2(&x).unwrap(), s, 3).unwrap();
        let again = apply_mask(&zero_pad(&block), s, 3).unwrap();
        prop_assert_eq!(again.window(), block.window());
        prop_assert_eq!(zero_pad(&block).energy(), block.energy());
    }

    #[test]
    fn mask_keeps_exactly_the_window((x, s) in image_and_window()) {
        let d = x.shape()[1];
        let spec = dct2(&x).unwrap();
        let padded = zero_pad(&apply_mask(&spec, s, 0).unwrap());
        let mask = binary_mask(d, s).unwrap();
        for (i, (&p, &c)) in padded.coefficients().data().iter().zip(spec.coefficients().data()).enumerate() {
            prop_assert_eq!(p, c * mask.data()[i % (d * d)]);
        }
    }

    #[test]
    fn descending_dominates_sequential(x in (1usize..16).prop_flat_map(|d| tensor(vec![d, d]))) {
        prop_assume!(x.sum_sq() > 0.0);
        let seq = cumulative_energy(&x, EnergyOrdering::SequentialTopLeft).unwrap();
        let desc = cumulative_energy(&x, EnergyOrdering::DescendingEnergy).unwrap();
        for (a, b) in desc.cumulative_ratio.iter().zip(&seq.cumulative_ratio) {
            prop_assert!(*a >= *b - 1e-12);
        }
        prop_assert!((seq.cumulative_ratio.last().unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn spectral_wire_roundtrip((x, s) in image_and_window(), class in 0usize..1000) {
        let block = apply_mask(&dct2(&x).unwrap(), s, class).unwrap();
        let bytes = encode_spectral_block(&block).unwrap();
        prop_assert_eq!(bytes.len(), spectral_block_bytes(x.shape()[0], s));
        let back = decode_spectral_block(&bytes).unwrap();
        prop_assert_eq!(back.class_label(), class);
        prop_assert_eq!(back.original_side(), x.shape()[1]);
        let tol = block.window().data().iter().fold(0.0f64, |m, v| m.max(v.abs())) * 1e-7;
        prop_assert!(back.window().max_abs_diff(block.window()) <= tol);
    }

    #[test]
    fn logcount_is_monotone(d in 1usize..12, l in 0usize..143) {
        prop_assume!(l < d * d);
        let a = attack_combination_logcount(d, l).unwrap();
        let b = attack_combination_logcount(d, l + 1).unwrap();
        prop_assert!(b >= a);
    }
}

#[test]
fn constant_image_is_dc_only() {
    let x = Tensor::filled(&[1, 4, 4], 1.0);
    let spec = dct2(&x).unwrap();
    assert!((spec.coefficients()[0] - 4.0).abs() < 1e-12);
    assert!(spec.coefficients().data()[1..].iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn zero_spectrum_inverts_to_zero_image() {
    let spec = Spectrum::new(Tensor::zeros(&[2, 5, 5])).unwrap();
    assert_eq!(idct2(&spec).unwrap(), Tensor::zeros(&[2, 5, 5]));
}

#[test]
fn dct1_of_constant() {
    let v = dct1(&Tensor::filled(&[4], 1.0)).unwrap();
    assert!((v[0] - 2.0).abs() < 1e-12);
    assert!(v.data()[1..].iter().all(|x| x.abs() < 1e-12));
}

#[test]
fn dct1_three_point_definition() {
    let v = Tensor::new(&[3], vec![0.3, -1.2, 2.0]).unwrap();
    let got = dct1(&v).unwrap();
    for k in 0..3 {
        let scale = if k == 0 { (1.0f64 / 3.0).sqrt() } else { (2.0f64 / 3.0).sqrt() };
        let want: f64 = (0..3)
            .map(|i| v[i] * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / 6.0).cos())
            .sum::<f64>()
            * scale;
        assert!((got[k] - want).abs() < 1e-12);
    }
}

#[test]
fn quarter_of_coefficients_at_sixteen_of_thirty_two() {
    let x = Tensor::filled(&[3, 32, 32], 0.5);
    let block = apply_mask(&dct2(&x).unwrap(), 16, 0).unwrap();
    assert_eq!(block.window().len(), 3 * 256);
}

#[test]
fn constant_image_spectrum_saturates_at_first_coefficient() {
    let spec = dct2(&Tensor::filled(&[1, 8, 8], 2.0)).unwrap();
    let plane = spec.coefficients().clone().reshape(&[8, 8]).unwrap();
    let curve = cumulative_energy(&plane, EnergyOrdering::SequentialTopLeft).unwrap();
    assert!((curve.cumulative_ratio[0] - 1.0).abs() < 1e-12);
}

#[test]
fn logcount_small_values() {
    assert_eq!(attack_combination_logcount(32, 0).unwrap(), 0.0);
    assert!((attack_combination_logcount(2, 2).unwrap() - 1.0791812460476249).abs() < 1e-12);
}
