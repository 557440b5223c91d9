//! Byte accounting of the growing curriculum against a fixed budget sent as
//! full-resolution pixels.

use fedfd::federation::{account_schedule, CommLedger, CurriculumSchedule, Population, Transmission};

fn main() -> fedfd::Result<()> {
    let pop = Population {
        clients: 10,
        classes: 10,
        channels: 3,
        side: 32,
    };
    let curriculum = CurriculumSchedule::new(10, 10, 4, 20)?;
    let fixed = CurriculumSchedule::fixed(40, 20)?;
    let ipcs: Vec<usize> = (1..=20).map(|r| curriculum.ipc_for_round(r)).collect::<fedfd::Result<_>>()?;
    println!("images per class by round: {ipcs:?}");

    let mut ledger = CommLedger::new();
    account_schedule(&mut ledger, "fedfd", pop, &curriculum, Transmission::Spectral, 16)?;
    account_schedule(&mut ledger, "fixed", pop, &fixed, Transmission::Spatial, 32)?;
    for method in ["fedfd", "fixed"] {
        let cumulative = ledger.cumulative_by_round(method)?;
        println!("{method:>5} after round 5: {} bytes, total {}", cumulative[4].1, ledger.total(method)?);
    }
    println!("ratio {:.5}", ledger.comm_ratio("fedfd", "fixed")?);
    Ok(())
}
