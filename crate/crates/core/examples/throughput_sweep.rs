// Throughput gain over plain LoRa as the duty cycle grows.
//
// `cargo run --release --example throughput_sweep -- 100000`

use std::error::Error;

use chirp_collide::chirp::RadioConfig;
use chirp_collide::netsim::{sweep, Mode, Scenario, SweepParam, SweepResult};

fn throughputs(mode: Mode, slots: u64, duty: &[f64]) -> Result<Vec<f64>, Box<dyn Error>> {
    let mut s = Scenario::new(mode, RadioConfig::lorawan(7)?, 2024);
    s.slots = slots;
    Ok(sweep(&s, SweepParam::DutyCycle, duty)?
        .into_iter()
        .map(|row| match row.result {
            SweepResult::Metrics(m) => m.throughput_bps,
            SweepResult::DecodeRate(_) => unreachable!("duty-cycle sweeps yield metrics"),
        })
        .collect())
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let slots = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(5_000);
    let duty = [0.002, 0.005, 0.01];
    let base = throughputs(Mode::BaselineLoRa, slots, &duty)?;
    let desync = throughputs(Mode::Desync, slots, &duty)?;
    let sync = throughputs(Mode::Sync, slots, &duty)?;
    println!("duty_cycle,baseline_bps,desync_gain_pct,sync_gain_pct");
    for i in 0..duty.len() {
        println!(
            "{},{:.1},{:.1},{:.1}",
            duty[i],
            base[i],
            100.0 * (desync[i] / base[i] - 1.0),
            100.0 * (sync[i] / base[i] - 1.0)
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
