//! Keep the top-left `s × s` DCT coefficients of a blob image, ship them
//! through the wire format and measure what the inverse transform recovers.

use fedfd::datasets::gen_blobs;
use fedfd::frequency::{apply_mask, dct2, idct2, zero_pad};
use fedfd::wire::{decode_spectral_block, encode_spatial_image, encode_spectral_block};

fn main() -> fedfd::Result<()> {
    let data = gen_blobs(3, 1, 32, 3, 7)?;
    let image = data.image(0);
    let spectrum = dct2(&image)?;
    println!("image energy {:.4}", image.sum_sq());
    println!("spectrum energy {:.4}", spectrum.energy());

    let spatial_bytes = encode_spatial_image(&image, data.labels()[0])?.len();
    println!("{:>3} {:>9} {:>8} {:>10}", "s", "energy", "bytes", "max error");
    for s in [2, 4, 8, 16, 32] {
        let block = apply_mask(&spectrum, s, data.labels()[0])?;
        let bytes = encode_spectral_block(&block)?;
        let received = decode_spectral_block(&bytes)?;
        let restored = idct2(&zero_pad(&received))?;
        println!(
            "{s:>3} {:>9.5} {:>8} {:>10.2e}",
            block.energy() / spectrum.energy(),
            bytes.len(),
            restored.max_abs_diff(&image)
        );
    }
    println!("spatial image: {spatial_bytes} bytes");
    Ok(())
}
