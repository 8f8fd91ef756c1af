//! Decoding of slightly desynchronized same-SF collisions.
//!
//! The receiver learns every transmitter's symbol frontiers from the wraps in
//! the superposed preambles ([`detect_frontiers`]), then walks the data
//! frontiers in time order. Between frontiers every down-chirp drifts by one
//! bin per tick, so the set detected at one frontier predicts the set at the
//! next; whatever differs belongs to the transmitter whose frontier it is.
//!
//! [`decode_two`] is the two-transmitter walk with its per-frontier ledger.
//! [`decode_n`] generalizes it with per-node candidate sets and stays sound
//! when attribution is ambiguous. [`find_indistinguishable`] searches for
//! distinct inputs that produce identical traces.

mod frontier;
mod nary;
mod search;
mod two;

use std::fmt;

use thiserror::Error;

use crate::channel::FreqSet;
use crate::chirp::{RadioConfig, SymbolValue, Tick};

pub use frontier::{detect_frontiers, FrontierInfo, NodeFrontiers};
pub use nary::decode_n;
pub use search::{find_indistinguishable, IndistinguishableGroup, SearchInstance};
pub use two::decode_two;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("frontier detection failed: {0}")]
    FrontierDetection(String),
    #[error("inconsistent trace at tick {tick}: {reason}")]
    InconsistentTrace { tick: Tick, reason: String },
    #[error("trace ends at tick {tick} before the closing silence")]
    TruncatedTrace { tick: Tick },
    #[error("decoder expects {expected} transmitters, frontiers describe {found}")]
    Arity { expected: usize, found: usize },
}

pub(crate) fn inconsistent(tick: Tick, reason: impl Into<String>) -> DecodeError {
    DecodeError::InconsistentTrace {
        tick,
        reason: reason.into(),
    }
}

/// How the decoder learns where each frame ends.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum LengthHint {
    /// Frames have equal lengths and end at the first silent frontier.
    #[default]
    UntilSilence,
    /// Data symbol count per node, in start order.
    Declared(Vec<usize>),
    /// Two leading symbols of each frame carry its payload length.
    Header,
}

impl LengthHint {
    pub(crate) fn declared(&self, node: usize) -> Option<usize> {
        match self {
            LengthHint::Declared(lens) => lens.get(node).copied(),
            _ => None,
        }
    }
}

/// One decoded position.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum DecodedSymbol {
    Known(SymbolValue),
    /// Leading repeated symbol whose value was never observed.
    Star,
    /// Remaining candidates; only arises with three or more transmitters.
    Unknown(Vec<SymbolValue>),
}

impl DecodedSymbol {
    pub fn known(&self) -> Option<SymbolValue> {
        match self {
            DecodedSymbol::Known(s) => Some(*s),
            _ => None,
        }
    }
}

impl fmt::Display for DecodedSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecodedSymbol::Known(s) => write!(f, "{s}"),
            DecodedSymbol::Star => write!(f, "*"),
            DecodedSymbol::Unknown(c) => {
                let list: Vec<String> = c.iter().map(|s| s.to_string()).collect();
                write!(f, "{{{}}}", list.join("|"))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeReport {
    /// Position in start order, 0-based.
    pub node: usize,
    pub start_tick: Tick,
    pub symbols: Vec<DecodedSymbol>,
    pub stars_backfilled: usize,
    pub unknowns: usize,
}

impl NodeReport {
    pub fn fully_decoded(&self) -> bool {
        self.symbols.iter().all(|s| matches!(s, DecodedSymbol::Known(_)))
    }

    /// The decoded symbols when every position is known.
    pub fn frame(&self) -> Option<Vec<SymbolValue>> {
        self.symbols.iter().map(DecodedSymbol::known).collect()
    }
}

/// One step of the frontier walk, kept for transcripts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerEntry {
    /// 1-based position of the frontier in the walk (`t_1`, `t_2`, ...).
    pub label: usize,
    pub tick: Tick,
    pub node: usize,
    /// Data symbol index of `node` starting at this frontier.
    pub index: usize,
    pub step: LedgerStep,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LedgerStep {
    /// Up/down overlap, nothing readable.
    Skipped,
    /// First readable frontier: only `F_lim-` is stored.
    Recorded { f_minus: FreqSet },
    Compared {
        f_plus: FreqSet,
        f_minus: FreqSet,
        changed: FreqSet,
        departed: FreqSet,
    },
    /// Node reached its declared length.
    Ended { f_minus: FreqSet },
    /// Closing silence; `removed` lists nodes whose last prediction was dropped.
    Silence { removed: Vec<usize> },
}

impl fmt::Display for LedgerEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "t{} (tick {}) n{}[{}]: ",
            self.label,
            self.tick,
            self.node + 1,
            self.index
        )?;
        match &self.step {
            LedgerStep::Skipped => write!(f, "mixed up/down chirps, skipped"),
            LedgerStep::Recorded { f_minus } => write!(f, "F_lim-={f_minus} recorded"),
            LedgerStep::Compared {
                f_plus,
                f_minus,
                changed,
                departed,
            } => write!(
                f,
                "F_lim+={f_plus} F_lim-={f_minus} changedF={changed} departed={departed}"
            ),
            LedgerStep::Ended { f_minus } => write!(f, "frame ended, F_lim-={f_minus}"),
            LedgerStep::Silence { removed } => {
                write!(f, "silence")?;
                for n in removed {
                    write!(f, ", removed last prediction of n{}", n + 1)?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeReport {
    pub nodes: Vec<NodeReport>,
    pub fully_decoded: bool,
    /// Per-frontier ledger; filled by [`decode_two`] only.
    pub ledger: Vec<LedgerEntry>,
}

impl DecodeReport {
    pub(crate) fn new(nodes: Vec<NodeReport>, ledger: Vec<LedgerEntry>) -> Self {
        let fully_decoded = nodes.iter().all(NodeReport::fully_decoded);
        Self {
            nodes,
            fully_decoded,
            ledger,
        }
    }

    /// `n1=(1,1,3,2,2) n2=(3,0,2,3,1)`
    pub fn summary(&self) -> String {
        self.nodes
            .iter()
            .map(|n| {
                let syms: Vec<String> = n.symbols.iter().map(|s| s.to_string()).collect();
                format!("n{}=({})", n.node + 1, syms.join(","))
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// One line per node: `node<TAB>symbols<TAB>status`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            let syms: Vec<String> = n.symbols.iter().map(|s| s.to_string()).collect();
            let status = if n.fully_decoded() {
                "decoded".to_string()
            } else {
                format!("partial ({} unresolved)", n.unknowns)
            };
            out.push_str(&format!("n{}\t{}\t{}\n", n.node + 1, syms.join(","), status));
        }
        out
    }
}

/// `F_lim+`: the set `F` as it reads `elapsed` ticks later on down-chirps.
pub fn update_frequencies(set: &FreqSet, elapsed: Tick, cfg: &RadioConfig) -> FreqSet {
    set.advance(elapsed, cfg)
}
