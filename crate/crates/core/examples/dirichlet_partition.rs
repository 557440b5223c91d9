//! How the concentration parameter skews class counts across clients.

use fedfd::datasets::gen_blobs;
use fedfd::federation::dirichlet_partition;

fn main() -> fedfd::Result<()> {
    let data = gen_blobs(5, 40, 4, 1, 0)?;
    for alpha in [100.0, 1.0, 0.01] {
        println!("alpha = {alpha}");
        let shards = dirichlet_partition(data.labels(), 5, 4, alpha, 3)?;
        for (k, shard) in shards.iter().enumerate() {
            let mut counts = [0usize; 5];
            for &i in shard {
                counts[data.labels()[i]] += 1;
            }
            println!("  client {k}: {counts:?}");
        }
    }
    Ok(())
}
