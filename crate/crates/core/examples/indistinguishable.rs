// Three tiny frames can yield the same trace as a different triple.
// Decoding such a trace leaves candidate sets instead of guesses.
//
// `cargo run --example indistinguishable`

use std::error::Error;

use chirp_collide::chirp::RadioConfig;
use chirp_collide::desync::{decode_n, detect_frontiers, find_indistinguishable, LengthHint};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let cfg = RadioConfig::new(2, 125_000, 2)?;

    let pairs = find_indistinguishable(2, 3, &cfg, 1 << 20);
    println!("two nodes: {} ambiguous groups", pairs.len());
    assert!(pairs.is_empty());

    let groups = find_indistinguishable(3, 3, &cfg, 1 << 20);
    println!("three nodes: {} ambiguous groups", groups.len());
    let g = groups.first().ok_or("expected an ambiguous group")?;
    for inst in &g.instances {
        let frames: Vec<Vec<u16>> = inst
            .frames
            .iter()
            .map(|f| f.iter().map(|s| s.value()).collect())
            .collect();
        println!("  {frames:?}");
    }

    let info = detect_frontiers(&g.trace, &cfg, 3)?;
    let report = decode_n(&g.trace, &info, &cfg, &LengthHint::Declared(vec![3; 3]))?;
    print!("{}", report.to_text());
    assert!(!report.fully_decoded);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
