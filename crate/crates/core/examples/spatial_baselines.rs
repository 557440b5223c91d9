//! Reconstruction error of a low-frequency window against spatial selections
//! that send the same number of values.

use fedfd::datasets::gen_blobs;
use fedfd::distill::{spatial_reconstruct, spatial_select_baseline, SpatialMethod};
use fedfd::frequency::{apply_mask, dct2, idct2, zero_pad};

fn main() -> fedfd::Result<()> {
    let data = gen_blobs(4, 4, 32, 1, 2)?;
    let (d, s) = (32, 16);
    let mut errors = vec![0.0; 1 + SpatialMethod::ALL.len()];
    for i in 0..data.len() {
        let image = data.image(i);
        let freq = idct2(&zero_pad(&apply_mask(&dct2(&image)?, s, 0)?))?;
        errors[0] += freq.sub(&image)?.sum_sq();
        for (j, &method) in SpatialMethod::ALL.iter().enumerate() {
            let reduced = spatial_select_baseline(&image, s, method, i as u64)?;
            let back = spatial_reconstruct(&reduced, d, method, i as u64)?;
            errors[j + 1] += back.sub(&image)?.sum_sq();
        }
    }
    let n = data.len() as f64;
    println!("{:<10} {:.5}", "frequency", errors[0] / n);
    for (j, method) in SpatialMethod::ALL.iter().enumerate() {
        println!("{:<10} {:.5}", method.name(), errors[j + 1] / n);
    }
    Ok(())
}
