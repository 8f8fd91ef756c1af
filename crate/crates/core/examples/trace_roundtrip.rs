// Receiver traces as text, and the lazy view that avoids building them.
//
// `cargo run --example trace_roundtrip`

use std::error::Error;

use chirp_collide::channel::{
    parse_trace, trace_to_string, NodeId, ObservationSource, ObservationTrace, Superposition,
    Transmission,
};
use chirp_collide::chirp::{encode_frame, Frame, RadioConfig};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let cfg = RadioConfig::new(3, 125_000, 2)?;
    let txs = vec![
        Transmission {
            node_id: NodeId(0),
            start_tick: 0,
            schedule: encode_frame(&Frame::known(&[1, 6, 6], &cfg)?, &cfg)?,
        },
        Transmission {
            node_id: NodeId(1),
            start_tick: 3,
            schedule: encode_frame(&Frame::known(&[7, 2, 0], &cfg)?, &cfg)?,
        },
    ];
    let lazy = Superposition::new(txs, cfg);
    let dense = ObservationTrace::materialize(&lazy);

    let text = trace_to_string(&dense);
    print!("{text}");
    let back = parse_trace(&text, &cfg)?;
    assert_eq!(back, dense);

    let (first, last) = lazy.span().ok_or("empty superposition")?;
    for t in first..=last + 2 {
        assert_eq!(lazy.observe(t), dense.observe(t));
    }
    println!("{} ticks round-tripped", dense.len());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
