//! Slotted network simulator.
//!
//! One slot lasts one frame airtime. Each eligible end device (ED) sends in
//! a slot with probability `p`, then stays silent for
//! `duty_silence_factor` frame airtimes. Transmissions sharing a slot
//! collide and are resolved according to [`Mode`].
//!
//! # Random streams
//!
//! Every random draw comes from `ChaCha8Rng::seed_from_u64(seed)` with a
//! stream selected by [`stream_id`]: arrivals, frame contents and
//! retransmission choices of replication `r`, and trial batch `b` of a
//! forced collision size, each get their own stream. Arrivals do not depend
//! on the mode, so runs of different modes with one seed see the same
//! traffic. Work is split by stream, never by thread, so results do not
//! depend on the thread count.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::channel::{validate_offsets, NodeId, Superposition, Transmission};
use crate::chirp::{airtime, schedule_from_data, symbols_per_frame, RadioConfig, SymbolValue, Tick};
use crate::desync::{decode_n, detect_frontiers, LengthHint};
use crate::sync::{eliminate, record_collision};

/// Env var capping worker threads.
pub const THREADS_ENV: &str = "CHIRP_COLLIDE_THREADS";

/// Forced-size trials per RNG stream.
const TRIAL_BATCH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    BaselineLoRa,
    Desync,
    Sync,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::BaselineLoRa, Mode::Desync, Mode::Sync];

    pub fn name(self) -> &'static str {
        match self {
            Mode::BaselineLoRa => "baseline",
            Mode::Desync => "desync",
            Mode::Sync => "sync",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.name() == s.to_ascii_lowercase())
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Start offsets of colliding frames inside a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum OffsetLayout {
    /// Node `i` starts at `i * delta`.
    #[default]
    Multiples,
    /// Sorted uniform draws over one symbol; invalid draws lose the slot.
    UniformRandom,
}

impl OffsetLayout {
    pub fn name(self) -> &'static str {
        match self {
            OffsetLayout::Multiples => "multiples",
            OffsetLayout::UniformRandom => "uniform",
        }
    }

    pub fn parse(s: &str) -> Option<OffsetLayout> {
        [OffsetLayout::Multiples, OffsetLayout::UniformRandom]
            .into_iter()
            .find(|l| l.name() == s.to_ascii_lowercase())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub num_eds: usize,
    /// Per-slot transmit probability of an eligible ED.
    pub p: f64,
    pub slots: u64,
    pub cfg: RadioConfig,
    pub payload_bytes: usize,
    pub mode: Mode,
    pub seed: u64,
    /// Silent frame airtimes after each transmission.
    pub duty_silence_factor: u64,
    /// Trials per size in [`decode_rate_vs_collision_size`].
    pub trials: usize,
    /// Independent runs summed by [`run_scenario`].
    pub replications: usize,
    pub offset_layout: OffsetLayout,
    /// Whether a sync retransmission starts a new silence period.
    pub retransmission_silence: bool,
}

impl Scenario {
    pub fn new(mode: Mode, cfg: RadioConfig, seed: u64) -> Self {
        Scenario {
            num_eds: 100,
            p: 0.01,
            slots: 100_000,
            cfg,
            payload_bytes: 50,
            mode,
            seed,
            duty_silence_factor: 99,
            trials: 10_000,
            replications: 1,
            offset_layout: OffsetLayout::Multiples,
            retransmission_silence: false,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |field: &'static str, reason: String| Err(ScenarioError { field, reason });
        if !(0.0..=0.01).contains(&self.p) {
            return bad("p", format!("{} is outside [0, 0.01]", self.p));
        }
        if self.num_eds == 0 {
            return bad("num_eds", "must be at least 1".into());
        }
        if self.slots == 0 {
            return bad("slots", "must be at least 1".into());
        }
        if self.payload_bytes == 0 {
            return bad("payload_bytes", "must be at least 1".into());
        }
        if self.trials == 0 {
            return bad("trials", "must be at least 1".into());
        }
        if self.replications == 0 {
            return bad("replications", "must be at least 1".into());
        }
        if let Err(e) = self.cfg.validate() {
            return bad("cfg", e.to_string());
        }
        Ok(())
    }

    pub fn frame_symbols(&self) -> usize {
        symbols_per_frame(self.payload_bytes, &self.cfg)
    }

    pub fn slot_seconds(&self) -> f64 {
        airtime(self.frame_symbols(), &self.cfg)
    }

    /// Silent slots after each transmission (one slot per frame airtime).
    pub fn silence_slots(&self) -> u64 {
        self.duty_silence_factor
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid scenario field {field}: {reason}")]
pub struct ScenarioError {
    pub field: &'static str,
    pub reason: String,
}

/// Frames involved and decoded for one collision size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SizeTally {
    pub frames: u64,
    /// Net of retransmissions in sync mode.
    pub decoded: u64,
}

impl SizeTally {
    pub fn rate(&self) -> Option<f64> {
        (self.frames > 0).then(|| self.decoded as f64 / self.frames as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Metrics {
    pub frames_offered: u64,
    /// Distinct frames received, including both frames of a sync pair.
    pub frames_delivered: u64,
    pub frames_lost: u64,
    /// Sync pairs whose retransmission falls after the last slot.
    pub frames_pending: u64,
    /// Slots by number of transmitters (size ≥ 1).
    pub collision_histogram: BTreeMap<usize, u64>,
    pub frames_decoded_from_collisions: u64,
    pub retransmissions: u64,
    pub simulated_time_seconds: f64,
    pub throughput_bps: f64,
    pub decode_by_collision_size: BTreeMap<usize, SizeTally>,
    /// Largest airtime fraction of any ED.
    pub max_ed_duty: f64,
    /// Known symbols that disagreed with the sent frame; always 0 for a sound decoder.
    pub unsound_symbols: u64,
}

impl Metrics {
    pub fn decode_rate(&self, size: usize) -> Option<f64> {
        self.decode_by_collision_size.get(&size).and_then(SizeTally::rate)
    }

    pub fn conserved(&self) -> bool {
        self.frames_offered == self.frames_delivered + self.frames_lost + self.frames_pending
    }

    /// Airtime fraction of every ED stays within `limit` plus one frame.
    pub fn duty_compliant(&self, limit: f64, slots: u64) -> bool {
        self.max_ed_duty <= limit + 1.0 / slots as f64
    }

    fn absorb(&mut self, other: Metrics) {
        self.frames_offered += other.frames_offered;
        self.frames_delivered += other.frames_delivered;
        self.frames_lost += other.frames_lost;
        self.frames_pending += other.frames_pending;
        for (k, v) in other.collision_histogram {
            *self.collision_histogram.entry(k).or_default() += v;
        }
        self.frames_decoded_from_collisions += other.frames_decoded_from_collisions;
        self.retransmissions += other.retransmissions;
        self.simulated_time_seconds += other.simulated_time_seconds;
        for (k, v) in other.decode_by_collision_size {
            let e = self.decode_by_collision_size.entry(k).or_default();
            e.frames += v.frames;
            e.decoded += v.decoded;
        }
        self.max_ed_duty = self.max_ed_duty.max(other.max_ed_duty);
        self.unsound_symbols += other.unsound_symbols;
    }
}

#[derive(Debug, Clone, Copy)]
enum Purpose {
    Arrivals = 0,
    Contents = 1,
    Choice = 2,
    Trials = 3,
}

/// Stream of replication (or batch) `index` for `purpose`; `size` separates
/// forced collision sizes.
fn stream_id(purpose: Purpose, size: usize, index: u64) -> u64 {
    ((size as u64) << 40) | (index << 3) | purpose as u64
}

fn rng(seed: u64, purpose: Purpose, size: usize, index: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream_id(purpose, size, index));
    r
}

fn random_frame(r: &mut ChaCha8Rng, len: usize, cfg: &RadioConfig, need_change: bool) -> Vec<SymbolValue> {
    loop {
        let f: Vec<SymbolValue> = (0..len)
            .map(|_| SymbolValue(r.gen_range(0..cfg.bins()) as u16))
            .collect();
        if !need_change || len < 2 || f.windows(2).any(|w| w[0] != w[1]) {
            return f;
        }
    }
}

fn multiples(k: usize, cfg: &RadioConfig) -> Vec<Tick> {
    (0..k as Tick).map(|i| i * cfg.delta_ticks).collect()
}

fn offsets(k: usize, layout: OffsetLayout, cfg: &RadioConfig, r: &mut ChaCha8Rng) -> Vec<Tick> {
    match layout {
        OffsetLayout::Multiples => multiples(k, cfg),
        OffsetLayout::UniformRandom => {
            let mut v: Vec<Tick> = (0..k).map(|_| r.gen_range(0..cfg.ticks_per_symbol())).collect();
            v.sort_unstable();
            let base = v[0];
            v.iter().map(|t| t - base).collect()
        }
    }
}

/// A collision's frames and offsets, drawn from the content stream.
struct Collision {
    frames: Vec<Vec<SymbolValue>>,
    starts: Vec<Tick>,
}

/// Outcome of one collision for the desync decoder.
#[derive(Default)]
struct Outcome {
    decoded: u64,
    unsound: u64,
}

fn decode_desync(c: &Collision, cfg: &RadioConfig) -> Outcome {
    let k = c.frames.len();
    if validate_offsets(&c.starts, cfg).is_err() {
        return Outcome::default();
    }
    let txs: Vec<Transmission> = c
        .frames
        .iter()
        .zip(&c.starts)
        .enumerate()
        .map(|(i, (f, &s))| Transmission {
            node_id: NodeId(i as u32),
            start_tick: s,
            schedule: schedule_from_data(f, cfg),
        })
        .collect();
    let len = c.frames[0].len();
    let sp = Superposition::new(txs, *cfg);
    let Ok(info) = detect_frontiers(&sp, cfg, k) else {
        return Outcome::default();
    };
    let Ok(report) = decode_n(&sp, &info, cfg, &LengthHint::Declared(vec![len; k])) else {
        return Outcome::default();
    };
    let mut out = Outcome::default();
    for (node, sent) in report.nodes.iter().zip(&c.frames) {
        let wrong = node
            .symbols
            .iter()
            .zip(sent)
            .filter(|(s, want)| s.known().is_some_and(|v| v != **want))
            .count() as u64;
        out.unsound += wrong;
        if wrong == 0 && node.fully_decoded() {
            out.decoded += 1;
        }
    }
    out
}

/// Runs the aligned two-frame scheme; true when elimination recovers the other frame.
fn decode_sync(frames: &[Vec<SymbolValue>], resend: usize, cfg: &RadioConfig) -> bool {
    let txs: Vec<Transmission> = frames
        .iter()
        .enumerate()
        .map(|(i, f)| Transmission {
            node_id: NodeId(i as u32),
            start_tick: 0,
            schedule: schedule_from_data(f, cfg),
        })
        .collect();
    let sp = Superposition::new(txs, *cfg);
    let Ok(info) = detect_frontiers(&sp, cfg, 1) else {
        return false;
    };
    let Ok(record) = record_collision(&sp, &info, cfg, frames.len()) else {
        return false;
    };
    eliminate(&record, &frames[resend]).is_ok_and(|r| r.frame == frames[1 - resend])
}

/// Runs one replication of the slotted simulation.
fn replicate(s: &Scenario, rep: u64) -> Metrics {
    let mut arrivals = rng(s.seed, Purpose::Arrivals, 0, rep);
    let mut contents = rng(s.seed, Purpose::Contents, 0, rep);
    let mut choice = rng(s.seed, Purpose::Choice, 0, rep);
    let len = s.frame_symbols();
    let silence = s.silence_slots();

    let mut m = Metrics::default();
    // First slot at which each ED may transmit again.
    let mut eligible_at = vec![0u64; s.num_eds];
    let mut airtime_slots = vec![0u64; s.num_eds];
    // Sync retransmissions: (slot, ed).
    let mut pending: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    let mut collisions: Vec<Collision> = Vec::new();
    let mut senders = Vec::new();

    for slot in 0..s.slots {
        // Granted retransmissions are collision free and do not draw.
        let resending: Vec<usize> = pending.remove(&slot).unwrap_or_default();
        for &ed in &resending {
            airtime_slots[ed] += 1;
            m.retransmissions += 1;
            m.frames_delivered += 2;
            m.frames_decoded_from_collisions += 2;
            let t = m.decode_by_collision_size.entry(2).or_default();
            t.decoded += 1;
            if s.retransmission_silence {
                eligible_at[ed] = slot + 1 + silence;
            }
        }

        senders.clear();
        for (ed, &ready) in eligible_at.iter().enumerate() {
            let draw: f64 = arrivals.gen();
            if ready <= slot && !resending.contains(&ed) && draw < s.p {
                senders.push(ed);
            }
        }
        let k = senders.len();
        if k == 0 {
            continue;
        }
        for &ed in &senders {
            eligible_at[ed] = slot + 1 + silence;
            airtime_slots[ed] += 1;
        }
        m.frames_offered += k as u64;
        *m.collision_histogram.entry(k).or_default() += 1;
        if k == 1 {
            m.frames_delivered += 1;
            continue;
        }
        m.decode_by_collision_size.entry(k).or_default().frames += k as u64;
        match s.mode {
            Mode::BaselineLoRa => m.frames_lost += k as u64,
            Mode::Desync => {
                let starts = offsets(k, s.offset_layout, &s.cfg, &mut contents);
                let frames = (0..k).map(|_| random_frame(&mut contents, len, &s.cfg, true)).collect();
                collisions.push(Collision { frames, starts });
            }
            Mode::Sync if k == 2 => {
                let resend = senders[choice.gen_range(0..2)];
                // Next eligible slot of the chosen ED.
                let at = eligible_at[resend].max(slot + 1);
                if at < s.slots {
                    pending.entry(at).or_default().push(resend);
                } else {
                    m.frames_pending += 2;
                }
            }
            Mode::Sync => m.frames_lost += k as u64,
        }
    }
    for eds in pending.values() {
        m.frames_pending += 2 * eds.len() as u64;
    }

    let outcomes: Vec<Outcome> = collisions.par_iter().map(|c| decode_desync(c, &s.cfg)).collect();
    for (c, o) in collisions.iter().zip(outcomes) {
        let k = c.frames.len();
        m.frames_delivered += o.decoded;
        m.frames_decoded_from_collisions += o.decoded;
        m.frames_lost += k as u64 - o.decoded;
        m.unsound_symbols += o.unsound;
        m.decode_by_collision_size.entry(k).or_default().decoded += o.decoded;
    }

    m.simulated_time_seconds = s.slots as f64 * s.slot_seconds();
    m.max_ed_duty = airtime_slots.iter().copied().max().unwrap_or(0) as f64 / s.slots as f64;
    m
}

/// Runs `s.replications` independent simulations and sums them.
pub fn run_scenario(s: &Scenario) -> Result<Metrics, ScenarioError> {
    s.validate()?;
    let reps: Vec<Metrics> = (0..s.replications as u64)
        .into_par_iter()
        .map(|rep| replicate(s, rep))
        .collect();
    let mut total = Metrics::default();
    for r in reps {
        total.absorb(r);
    }
    let net = total.frames_delivered.saturating_sub(total.retransmissions);
    total.throughput_bps =
        net as f64 * (8 * s.payload_bytes) as f64 / total.simulated_time_seconds;
    Ok(total)
}

/// Decode rate for one forced collision size.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeRateRow {
    pub size: usize,
    pub frames: u64,
    /// Net of retransmissions in sync mode.
    pub decoded: u64,
    /// False when the offset layout can never be valid for this size.
    pub feasible: bool,
    pub unsound_symbols: u64,
}

impl DecodeRateRow {
    pub fn rate(&self) -> f64 {
        if self.frames == 0 {
            0.0
        } else {
            self.decoded as f64 / self.frames as f64
        }
    }
}

fn trial_batch(s: &Scenario, size: usize, batch: u64, count: usize) -> Outcome {
    let mut r = rng(s.seed, Purpose::Trials, size, batch);
    let len = s.frame_symbols();
    let mut out = Outcome::default();
    for _ in 0..count {
        match (s.mode, size) {
            (_, 1) => out.decoded += 1,
            (Mode::BaselineLoRa, _) => {}
            (Mode::Desync, _) => {
                let starts = offsets(size, s.offset_layout, &s.cfg, &mut r);
                let frames = (0..size).map(|_| random_frame(&mut r, len, &s.cfg, true)).collect();
                let o = decode_desync(&Collision { frames, starts }, &s.cfg);
                out.decoded += o.decoded;
                out.unsound += o.unsound;
            }
            (Mode::Sync, 2) => {
                let frames: Vec<_> = (0..2).map(|_| random_frame(&mut r, len, &s.cfg, false)).collect();
                let resend = r.gen_range(0..2);
                if decode_sync(&frames, resend, &s.cfg) {
                    // Two frames for two transmissions plus one retransmission.
                    out.decoded += 1;
                }
            }
            (Mode::Sync, _) => {}
        }
    }
    out
}

/// Fraction of frames decoded when exactly `size` frames collide, `s.trials` times per size.
pub fn decode_rate_vs_collision_size(
    s: &Scenario,
    sizes: &[usize],
) -> Result<Vec<DecodeRateRow>, ScenarioError> {
    s.validate()?;
    Ok(sizes
        .iter()
        .map(|&size| {
            let feasible = size >= 1
                && (s.mode != Mode::Desync
                    || s.offset_layout != OffsetLayout::Multiples
                    || validate_offsets(&multiples(size, &s.cfg), &s.cfg).is_ok());
            if !feasible {
                return DecodeRateRow {
                    size,
                    frames: (s.trials * size) as u64,
                    decoded: 0,
                    feasible,
                    unsound_symbols: 0,
                };
            }
            let batches = s.trials.div_ceil(TRIAL_BATCH);
            let outcomes: Vec<Outcome> = (0..batches)
                .into_par_iter()
                .map(|b| {
                    let count = TRIAL_BATCH.min(s.trials - b * TRIAL_BATCH);
                    trial_batch(s, size, b as u64, count)
                })
                .collect();
            DecodeRateRow {
                size,
                frames: (s.trials * size) as u64,
                decoded: outcomes.iter().map(|o| o.decoded).sum(),
                feasible,
                unsound_symbols: outcomes.iter().map(|o| o.unsound).sum(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Sf,
    DutyCycle,
    CollisionSize,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Sf => "sf",
            SweepParam::DutyCycle => "duty_cycle",
            SweepParam::CollisionSize => "collision_size",
        }
    }

    pub fn parse(s: &str) -> Option<SweepParam> {
        [SweepParam::Sf, SweepParam::DutyCycle, SweepParam::CollisionSize]
            .into_iter()
            .find(|p| p.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepResult {
    Metrics(Metrics),
    DecodeRate(DecodeRateRow),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub scenario: Scenario,
    pub result: SweepResult,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("sweep value {value}: {error}")]
pub struct SweepError {
    pub value: f64,
    pub error: ScenarioError,
}

/// Runs one cell per value, all with the base seed; rows keep input order.
///
/// `Sf` and `DutyCycle` cells run [`run_scenario`] (duty cycle sets `p`);
/// `CollisionSize` cells run [`decode_rate_vs_collision_size`].
pub fn sweep(s: &Scenario, param: SweepParam, values: &[f64]) -> Result<Vec<SweepRow>, SweepError> {
    values
        .par_iter()
        .map(|&value| {
            let err = |error| SweepError { value, error };
            let mut cell = s.clone();
            match param {
                SweepParam::Sf => {
                    let sf = value as u8;
                    if value.fract() != 0.0 || !(7.0..=12.0).contains(&value) {
                        return Err(err(ScenarioError {
                            field: "sf",
                            reason: format!("{value} is not a spreading factor in 7..=12"),
                        }));
                    }
                    cell.cfg = RadioConfig::new(sf, s.cfg.bw, s.cfg.preamble_len).map_err(|e| {
                        err(ScenarioError { field: "sf", reason: e.to_string() })
                    })?;
                }
                SweepParam::DutyCycle => cell.p = value,
                SweepParam::CollisionSize => {
                    if value.fract() != 0.0 || value < 1.0 {
                        return Err(err(ScenarioError {
                            field: "collision_size",
                            reason: format!("{value} is not a positive integer"),
                        }));
                    }
                }
            }
            let result = match param {
                SweepParam::CollisionSize => {
                    let rows = decode_rate_vs_collision_size(&cell, &[value as usize]).map_err(err)?;
                    SweepResult::DecodeRate(rows.into_iter().next().expect("one size"))
                }
                _ => SweepResult::Metrics(run_scenario(&cell).map_err(err)?),
            };
            Ok(SweepRow { value, scenario: cell, result })
        })
        .collect()
}

/// Thread cap from [`THREADS_ENV`], if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Runs `f` on a pool of `threads` workers (all cores when `None`).
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .expect("thread pool");
    pool.install(f)
}
