//! One client condenses its shard into a handful of synthetic images per
//! class, then compresses them to low-frequency blocks.

use fedfd::datasets::{BlobConfig, Split};
use fedfd::distill::{client_update, Broadcast, ClientState, DistillConfig, Objective};
use fedfd::nn::{Model, ModelSpec};

fn main() -> fedfd::Result<()> {
    let shard = BlobConfig::new(3, 40, 16, 1, 1).generate(Split::Train)?;
    let global = Model::init(ModelSpec::convnet(1, 16, 3, 8)?, 0);
    let cfg = DistillConfig {
        local_steps: 100,
        objective: Objective::Fdd,
        ..DistillConfig::desk()
    };

    let mut client = ClientState::new(0, shard, 4, 42)?;
    let broadcast = Broadcast {
        round: 1,
        global: &global,
        extractor_seed: 9,
    };
    let (blocks, trace) = client_update(&mut client, broadcast, &cfg, 8)?;
    for row in trace.iter().step_by(20).chain(trace.last()) {
        println!(
            "step {:>3}  fdd {:.5}  fda {:.5}  rsc {:.5}  real acc {:.3}",
            row.iteration, row.loss_fdd, row.loss_fda, row.loss_rsc, row.real_acc
        );
    }
    println!(
        "{} blocks of {}x{}x{} for classes {:?}",
        blocks.len(),
        blocks[0].channels(),
        blocks[0].side(),
        blocks[0].side(),
        client.class_inventory()
    );
    Ok(())
}
