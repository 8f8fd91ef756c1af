// Two frames offset by one tick at SF2, decoded frontier by frontier.
//
// `cargo run --example fig3_walkthrough`

use std::error::Error;

use chirp_collide::channel::{superpose, NodeId, Transmission};
use chirp_collide::chirp::{encode_frame, Frame, RadioConfig};
use chirp_collide::desync::{decode_two, detect_frontiers, LengthHint};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let cfg = RadioConfig::new(2, 125_000, 2)?.with_delta(1)?;
    let frames = [[1, 1, 3, 2, 2], [3, 0, 2, 3, 1]];

    let mut txs = Vec::new();
    for (i, f) in frames.iter().enumerate() {
        txs.push(Transmission {
            node_id: NodeId(i as u32),
            start_tick: i as u64,
            schedule: encode_frame(&Frame::known(f, &cfg)?, &cfg)?,
        });
    }
    let trace = superpose(&txs, &cfg);
    for (tick, obs) in trace.iter() {
        println!("{tick:>3}  {obs}");
    }

    let info = detect_frontiers(&trace, &cfg, 2)?;
    for n in &info.nodes {
        println!("start {} data {}", n.start_tick, n.data_start_tick);
    }
    let report = decode_two(&trace, &info, &cfg, &LengthHint::UntilSilence)?;
    for entry in &report.ledger {
        println!("{entry}");
    }
    println!("{}", report.summary());
    assert_eq!(report.summary(), "n1=(1,1,3,2,2) n2=(3,0,2,3,1)");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
