// Fraction of frames recovered when exactly n frames collide.
//
// `cargo run --release --example decode_rate -- 10000`

use std::error::Error;

use chirp_collide::chirp::RadioConfig;
use chirp_collide::netsim::{decode_rate_vs_collision_size, Mode, Scenario};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let trials = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(100);
    println!("mode,sf,n,rate");
    for mode in [Mode::BaselineLoRa, Mode::Desync, Mode::Sync] {
        for sf in [7, 12] {
            let mut s = Scenario::new(mode, RadioConfig::lorawan(sf)?, 7);
            s.trials = trials;
            for row in decode_rate_vs_collision_size(&s, &[1, 2, 3, 4])? {
                println!("{mode},{sf},{},{:.4}", row.size, row.rate());
            }
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
