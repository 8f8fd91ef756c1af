//! Aligned two-frame collisions resolved by one retransmission.
//!
//! With equal start ticks every symbol boundary is shared, so each data
//! position reads as the set of symbols sent there. Once either frame is
//! received again on its own, the other follows by elimination.

use std::fmt;

use thiserror::Error;

use crate::channel::{FreqSet, Observation, ObservationSource};
use crate::chirp::{RadioConfig, SymbolValue};
use crate::desync::{inconsistent, DecodeError, FrontierInfo};

/// Per-position symbol sets seen during an aligned collision.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CollisionRecord {
    sets: Vec<FreqSet>,
    node_count: usize,
}

impl CollisionRecord {
    pub fn new(sets: Vec<FreqSet>, node_count: usize) -> Result<Self, String> {
        for (i, s) in sets.iter().enumerate() {
            if s.is_empty() || s.len() > node_count {
                return Err(format!(
                    "position {i} holds {} values with {node_count} node(s)",
                    s.len()
                ));
            }
        }
        Ok(Self { sets, node_count })
    }

    pub fn sets(&self) -> &[FreqSet] {
        &self.sets
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// One line per position, values ascending.
    pub fn to_text(&self) -> String {
        self.to_string()
    }

    pub fn parse(text: &str, node_count: usize) -> Result<Self, String> {
        let mut sets = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let set = line
                .split(',')
                .map(|v| v.trim().parse::<u16>())
                .collect::<Result<FreqSet, _>>()
                .map_err(|e| format!("line {}: {e}", n + 1))?;
            sets.push(set);
        }
        Self::new(sets, node_count)
    }
}

impl fmt::Display for CollisionRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for set in &self.sets {
            let vals: Vec<String> = set.iter().map(|v| v.to_string()).collect();
            writeln!(f, "{}", vals.join(","))?;
        }
        Ok(())
    }
}

/// Reads the data positions of an aligned collision.
///
/// `frontiers` must describe a single grid (see [`crate::desync::detect_frontiers`]
/// with `n = 1`); positions run until the first silent frontier.
pub fn record_collision<S: ObservationSource>(
    source: &S,
    frontiers: &FrontierInfo,
    cfg: &RadioConfig,
    node_count: usize,
) -> Result<CollisionRecord, DecodeError> {
    let Some(grid) = frontiers.nodes.first() else {
        return Err(DecodeError::Arity { expected: 1, found: 0 });
    };
    let mut sets = Vec::new();
    loop {
        let t = grid.frontier(sets.len(), cfg);
        match source.observe(t) {
            Observation::Silence => break,
            Observation::Mixed => return Err(inconsistent(t, "up/down overlap inside data")),
            Observation::Freqs(set) => {
                if set.len() > node_count {
                    return Err(inconsistent(
                        t,
                        format!("{} values with {node_count} node(s)", set.len()),
                    ));
                }
                sets.push(set);
            }
        }
    }
    Ok(CollisionRecord { sets, node_count })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EliminationResult {
    pub frame: Vec<SymbolValue>,
    /// Positions where both frames carried the same symbol.
    pub positions_forced_by_singleton: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EliminationError {
    #[error("retransmitted frame has {frame} symbols, record has {record}")]
    LengthMismatch { record: usize, frame: usize },
    #[error("retransmitted symbol {symbol} at position {position} was not seen in the collision")]
    Mismatch { position: usize, symbol: SymbolValue },
    #[error("cannot eliminate a collision of {nodes} frames with one retransmission")]
    UnsupportedArity { nodes: usize },
}

/// Recovers the other frame of a two-frame collision from one retransmission.
pub fn eliminate(
    record: &CollisionRecord,
    retransmitted: &[SymbolValue],
) -> Result<EliminationResult, EliminationError> {
    if record.node_count > 2 || record.sets.iter().any(|s| s.len() > 2) {
        return Err(EliminationError::UnsupportedArity {
            nodes: record.node_count.max(3),
        });
    }
    if retransmitted.len() != record.len() {
        return Err(EliminationError::LengthMismatch {
            record: record.len(),
            frame: retransmitted.len(),
        });
    }
    let mut forced = 0;
    let mut frame = Vec::with_capacity(record.len());
    for (position, (set, &symbol)) in record.sets.iter().zip(retransmitted).enumerate() {
        if !set.contains(symbol.value()) {
            return Err(EliminationError::Mismatch { position, symbol });
        }
        match set.as_slice() {
            [v] => {
                forced += 1;
                frame.push(SymbolValue(*v));
            }
            [a, b] => frame.push(SymbolValue(if *a == symbol.value() { *b } else { *a })),
            _ => unreachable!("set sizes checked above"),
        }
    }
    Ok(EliminationResult {
        frame,
        positions_forced_by_singleton: forced,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{superpose, NodeId, Transmission};
    use crate::chirp::{encode_frame, symbols, Frame};
    use crate::desync::detect_frontiers;

    fn record(frames: &[&[u16]], cfg: &RadioConfig) -> CollisionRecord {
        let txs: Vec<Transmission> = frames
            .iter()
            .enumerate()
            .map(|(i, f)| Transmission {
                node_id: NodeId(i as u32),
                start_tick: 0,
                schedule: encode_frame(&Frame::known(f, cfg).unwrap(), cfg).unwrap(),
            })
            .collect();
        let trace = superpose(&txs, cfg);
        let info = detect_frontiers(&trace, cfg, 1).unwrap();
        record_collision(&trace, &info, cfg, frames.len()).unwrap()
    }

    #[test]
    fn fig3_frames_aligned() {
        let cfg = RadioConfig::new(2, 125_000, 2).unwrap();
        let rec = record(&[&[1, 1, 3, 2, 2], &[3, 0, 2, 3, 1]], &cfg);
        assert_eq!(rec.to_text(), "1,3\n0,1\n2,3\n2,3\n1,2\n");
        let a = eliminate(&rec, &symbols(&[1, 1, 3, 2, 2])).unwrap();
        assert_eq!(a.frame, symbols(&[3, 0, 2, 3, 1]));
        assert_eq!(a.positions_forced_by_singleton, 0);
        let b = eliminate(&rec, &symbols(&[3, 0, 2, 3, 1])).unwrap();
        assert_eq!(b.frame, symbols(&[1, 1, 3, 2, 2]));
        assert_eq!(CollisionRecord::parse(&rec.to_text(), 2).unwrap(), rec);
    }

    #[test]
    fn identical_frames() {
        let cfg = RadioConfig::lorawan(7).unwrap();
        let rec = record(&[&[5, 6, 7], &[5, 6, 7]], &cfg);
        assert!(rec.sets().iter().all(|s| s.len() == 1));
        let r = eliminate(&rec, &symbols(&[5, 6, 7])).unwrap();
        assert_eq!(r.frame, symbols(&[5, 6, 7]));
        assert_eq!(r.positions_forced_by_singleton, 3);
    }

    #[test]
    fn errors() {
        let cfg = RadioConfig::new(2, 125_000, 2).unwrap();
        let rec = record(&[&[1, 1, 3, 2, 2], &[3, 0, 2, 3, 1]], &cfg);
        assert_eq!(
            eliminate(&rec, &symbols(&[1, 2, 3, 2, 2])),
            Err(EliminationError::Mismatch { position: 1, symbol: SymbolValue(2) })
        );
        assert!(matches!(
            eliminate(&rec, &symbols(&[1, 1])),
            Err(EliminationError::LengthMismatch { .. })
        ));
        let three = record(&[&[0, 1], &[1, 2], &[2, 3]], &cfg);
        assert!(matches!(
            eliminate(&three, &symbols(&[0, 1])),
            Err(EliminationError::UnsupportedArity { .. })
        ));
        assert!(CollisionRecord::parse("1,x\n", 2).is_err());
    }
}
