use crate::channel::{Observation, ObservationSource};
use crate::chirp::{RadioConfig, Tick};

use super::DecodeError;

/// Frontier grid of one transmitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeFrontiers {
    pub start_tick: Tick,
    pub data_start_tick: Tick,
}

impl NodeFrontiers {
    /// Tick at which data symbol `index` starts.
    pub fn frontier(&self, index: usize, cfg: &RadioConfig) -> Tick {
        self.data_start_tick + index as Tick * cfg.ticks_per_symbol()
    }

    pub fn frontiers(&self, count: usize, cfg: &RadioConfig) -> Vec<Tick> {
        (0..count).map(|i| self.frontier(i, cfg)).collect()
    }
}

/// Frontier grids of all transmitters, ordered by start tick.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrontierInfo {
    pub nodes: Vec<NodeFrontiers>,
}

impl FrontierInfo {
    /// Grids for known start ticks (sorted ascending by the caller).
    pub fn from_starts(starts: &[Tick], cfg: &RadioConfig) -> Self {
        Self {
            nodes: starts
                .iter()
                .map(|&s| NodeFrontiers {
                    start_tick: s,
                    data_start_tick: s + cfg.preamble_ticks(),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Recovers the start tick of each of `n` transmitters from the preamble.
///
/// An up-chirp started at tick `s` reads bin 0 exactly at ticks `s + k * 2^sf`.
/// All starts fall inside one symbol of the first non-silent tick, so the
/// ticks of that first symbol where bin 0 is present are the start ticks.
pub fn detect_frontiers<S: ObservationSource>(
    source: &S,
    cfg: &RadioConfig,
    n: usize,
) -> Result<FrontierInfo, DecodeError> {
    let fail = |msg: String| Err(DecodeError::FrontierDetection(msg));
    let Some((first, last)) = source.span() else {
        return fail("no transmissions detected".into());
    };
    let Some(t0) = (first..=last).find(|&t| source.observe(t) != Observation::Silence) else {
        return fail("no transmissions detected".into());
    };

    let symbol = cfg.ticks_per_symbol();
    let mut starts = Vec::new();
    for t in t0..t0 + symbol {
        match source.observe(t) {
            Observation::Freqs(set) if set.contains(0) => starts.push(t),
            Observation::Freqs(_) => {}
            Observation::Mixed => {
                return fail(format!("up/down overlap at tick {t} inside the first preamble symbol"))
            }
            Observation::Silence => {
                return fail(format!("silence at tick {t} inside the first preamble symbol"))
            }
        }
    }
    if starts.len() != n {
        return fail(format!(
            "found {} wrap residue(s) in the preamble, expected {n}",
            starts.len()
        ));
    }
    // Wraps recur one symbol later, still inside every preamble.
    for &s in &starts {
        if !matches!(source.observe(s + symbol), Observation::Freqs(ref set) if set.contains(0)) {
            return fail(format!("wrap at tick {s} does not recur at tick {}", s + symbol));
        }
    }

    let info = FrontierInfo::from_starts(&starts, cfg);
    // With two or more transmitters, the first data chirp lands on the
    // preamble of the others.
    if n >= 2 {
        let d0 = info.nodes[0].data_start_tick;
        let first_mixed = (t0..=d0).find(|&t| source.observe(t) == Observation::Mixed);
        if first_mixed != Some(d0) {
            return fail(format!(
                "first up/down overlap at {first_mixed:?}, expected tick {d0}"
            ));
        }
    }
    Ok(info)
}
