// Aligned collision of two frames, resolved after one retransmission.
//
// `cargo run --example sync_elimination`

use std::error::Error;

use chirp_collide::channel::{superpose, NodeId, Transmission};
use chirp_collide::chirp::{encode_frame, symbols, Frame, RadioConfig};
use chirp_collide::desync::detect_frontiers;
use chirp_collide::sync::{eliminate, record_collision};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let cfg = RadioConfig::lorawan(7)?;
    let a = [12, 99, 5, 5, 127, 64];
    let b = [40, 99, 17, 3, 0, 64];

    let txs = [a, b]
        .iter()
        .enumerate()
        .map(|(i, f)| {
            Ok(Transmission {
                node_id: NodeId(i as u32),
                start_tick: 0,
                schedule: encode_frame(&Frame::known(f, &cfg)?, &cfg)?,
            })
        })
        .collect::<Result<Vec<_>, Box<dyn Error>>>()?;
    let trace = superpose(&txs, &cfg);

    // Both frames share one grid.
    let grid = detect_frontiers(&trace, &cfg, 1)?;
    let record = record_collision(&trace, &grid, &cfg, 2)?;
    print!("{record}");

    let got = eliminate(&record, &symbols(&a))?;
    println!(
        "after resending a: b = {:?} ({} positions where both agreed)",
        got.frame.iter().map(|s| s.value()).collect::<Vec<_>>(),
        got.positions_forced_by_singleton
    );
    assert_eq!(got.frame, symbols(&b));
    assert_eq!(eliminate(&record, &symbols(&b))?.frame, symbols(&a));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
