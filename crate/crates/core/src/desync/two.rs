//! Two-transmitter frontier walk.
//!
//! Frequency sets are handled as multisets with one entry per active
//! transmitter, so a single detected bin while two chirps are on air reads
//! as that bin twice.

use crate::channel::{FreqSet, Observation, ObservationSource};
use crate::chirp::{RadioConfig, SymbolValue, Tick, HEADER_SYMBOLS, decode_length_header};

use super::{
    inconsistent, DecodeError, DecodeReport, DecodedSymbol, FrontierInfo, LedgerEntry, LedgerStep,
    LengthHint, NodeReport,
};

type Multiset = Vec<u16>;

fn multiset(set: &FreqSet, count: usize, tick: Tick) -> Result<Multiset, DecodeError> {
    match (set.len(), count) {
        (a, b) if a == b => Ok(set.as_slice().to_vec()),
        (1, 2) => Ok(vec![set.as_slice()[0]; 2]),
        (a, b) => Err(inconsistent(
            tick,
            format!("{a} frequencies detected with {b} transmitter(s) on air"),
        )),
    }
}

/// Elements of `a` left after removing one occurrence per element of `b`.
fn minus(a: &[u16], b: &[u16]) -> Multiset {
    let mut rest = b.to_vec();
    let mut out = Vec::new();
    for &x in a {
        match rest.iter().position(|&y| y == x) {
            Some(pos) => {
                rest.swap_remove(pos);
            }
            None => out.push(x),
        }
    }
    out
}

fn advance(ms: &[u16], elapsed: Tick, cfg: &RadioConfig) -> Multiset {
    let shift = (elapsed % cfg.ticks_per_symbol()) as i64;
    let mut out: Multiset = ms.iter().map(|&f| cfg.wrap(f as i64 - shift)).collect();
    out.sort_unstable();
    out
}

fn as_set(ms: &[u16]) -> FreqSet {
    ms.iter().copied().collect()
}

struct Node {
    symbols: Vec<Option<SymbolValue>>,
    next_index: usize,
    active: bool,
    last_frontier: Option<Tick>,
}

impl Node {
    /// Fills or confirms the symbol at the current (last) position.
    fn settle_last(&mut self, value: SymbolValue, tick: Tick) -> Result<(), DecodeError> {
        match self.symbols.last_mut() {
            Some(slot @ None) => {
                *slot = Some(value);
                Ok(())
            }
            Some(Some(v)) if *v == value => Ok(()),
            Some(Some(v)) => Err(inconsistent(
                tick,
                format!("symbol already decoded as {v}, trace implies {value}"),
            )),
            None => Err(inconsistent(tick, "no symbol to settle")),
        }
    }

    fn declared_len(&self, hint: &LengthHint, index: usize, cfg: &RadioConfig) -> Option<usize> {
        match hint {
            LengthHint::Declared(_) => hint.declared(index),
            LengthHint::Header => match self.symbols.get(..HEADER_SYMBOLS) {
                Some([Some(hi), Some(lo)]) => {
                    Some(HEADER_SYMBOLS + decode_length_header([*hi, *lo], cfg))
                }
                _ => None,
            },
            LengthHint::UntilSilence => None,
        }
    }
}

/// Symbol value of a down-chirp reading `freq` at `tick`, relative to `frontier`.
fn value_at(freq: u16, tick: Tick, frontier: Tick, cfg: &RadioConfig) -> SymbolValue {
    SymbolValue(cfg.wrap(freq as i64 + (tick - frontier) as i64))
}

/// Decodes two slightly desynchronized superposed frames.
pub fn decode_two<S: ObservationSource>(
    source: &S,
    frontiers: &FrontierInfo,
    cfg: &RadioConfig,
    lengths: &LengthHint,
) -> Result<DecodeReport, DecodeError> {
    if frontiers.len() != 2 {
        return Err(DecodeError::Arity {
            expected: 2,
            found: frontiers.len(),
        });
    }
    let grid = &frontiers.nodes;
    let symbol = cfg.ticks_per_symbol();
    let horizon = source.span().map_or(0, |(_, last)| last) + symbol;

    let mut nodes: Vec<Node> = (0..2)
        .map(|_| Node {
            symbols: Vec::new(),
            next_index: 0,
            active: true,
            last_frontier: None,
        })
        .collect();
    let mut prev: Option<(Tick, Multiset)> = None;
    let mut ledger = Vec::new();

    while let Some((c, t)) = (0..2)
        .filter(|&k| nodes[k].active)
        .map(|k| (k, grid[k].frontier(nodes[k].next_index, cfg)))
        .min_by_key(|&(_, t)| t)
    {
        if t > horizon {
            return Err(DecodeError::TruncatedTrace { tick: t });
        }
        let o = 1 - c;
        let i = nodes[c].next_index;
        nodes[c].next_index += 1;
        let label = ledger.len() + 1;
        let entry = |step| LedgerEntry {
            label,
            tick: t,
            node: c,
            index: i,
            step,
        };
        let obs = source.observe(t);

        if nodes[c].declared_len(lengths, c, cfg) == Some(i) {
            // Declared end: the node's last chirp leaves the set.
            nodes[c].active = false;
            let on_air = nodes.iter().filter(|n| n.active).count();
            let d = match &obs {
                Observation::Silence if on_air == 0 => Vec::new(),
                Observation::Freqs(set) => multiset(set, on_air, t)?,
                _ => return Err(inconsistent(t, "unexpected observation at frame end")),
            };
            if let Some((tp, p)) = &prev {
                let p = advance(p, t - tp, cfg);
                let departed = minus(&p, &d);
                if departed.len() != 1 || !minus(&d, &p).is_empty() {
                    return Err(inconsistent(t, "frame end does not remove exactly one chirp"));
                }
                let last = grid[c].frontier(i - 1, cfg);
                nodes[c].settle_last(value_at(departed[0], t, last, cfg), t)?;
            }
            ledger.push(entry(LedgerStep::Ended { f_minus: as_set(&d) }));
            prev = Some((t, d));
            continue;
        }

        match obs {
            Observation::Mixed if prev.is_none() && i == 0 => {
                nodes[c].symbols.push(None);
                ledger.push(entry(LedgerStep::Skipped));
            }
            Observation::Mixed => return Err(inconsistent(t, "up/down overlap inside data")),
            Observation::Silence => {
                if prev.is_none() {
                    return Err(inconsistent(t, "silence before any data was read"));
                }
                if matches!(lengths, LengthHint::Declared(_)) {
                    return Err(inconsistent(t, "silence before the declared frame end"));
                }
                // The other node's prediction made after our last frontier is a phantom.
                let mut removed = Vec::new();
                let other = &mut nodes[o];
                if other.active && other.last_frontier.is_some_and(|lf| lf + symbol > t) {
                    other.symbols.pop();
                    removed.push(o);
                }
                ledger.push(entry(LedgerStep::Silence { removed }));
                break;
            }
            Observation::Freqs(set) => {
                let on_air = nodes.iter().filter(|n| n.active).count();
                let d = multiset(&set, on_air, t)?;
                match &prev {
                    None => {
                        nodes[c].symbols.push(None);
                        ledger.push(entry(LedgerStep::Recorded { f_minus: set }));
                    }
                    Some((tp, p)) => {
                        let p = advance(p, t - tp, cfg);
                        let changed = minus(&d, &p);
                        let departed = minus(&p, &d);
                        match (changed.len(), departed.len()) {
                            // No frequency changed: the new symbol repeats the previous one.
                            (0, 0) => {
                                let last = nodes[c].symbols.last().copied().flatten();
                                nodes[c].symbols.push(last);
                            }
                            // One frequency changed.
                            (1, 1) => {
                                if i > 0 {
                                    let last = grid[c].frontier(i - 1, cfg);
                                    nodes[c].settle_last(value_at(departed[0], t, last, cfg), t)?;
                                }
                                nodes[c].symbols.push(Some(SymbolValue(changed[0])));
                                if nodes[o].active {
                                    let kept = minus(&p, &departed);
                                    let of = nodes[o].last_frontier.ok_or_else(|| {
                                        inconsistent(t, "other node has no frontier yet")
                                    })?;
                                    nodes[o].settle_last(value_at(kept[0], t, of, cfg), t)?;
                                }
                            }
                            (a, b) => {
                                return Err(inconsistent(
                                    t,
                                    format!("{a} frequencies appeared and {b} disappeared"),
                                ))
                            }
                        }
                        ledger.push(entry(LedgerStep::Compared {
                            f_plus: as_set(&p),
                            f_minus: set,
                            changed: as_set(&changed),
                            departed: as_set(&departed),
                        }));
                    }
                }
                prev = Some((t, d));
            }
        }
        nodes[c].last_frontier = Some(t);
    }

    let reports = nodes
        .into_iter()
        .enumerate()
        .map(|(k, node)| finish(k, grid[k].start_tick, node.symbols, lengths, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DecodeReport::new(reports, ledger))
}

/// Backfills leading stars with the first known value and truncates to the
/// header length when one is carried.
fn finish(
    node: usize,
    start_tick: Tick,
    mut symbols: Vec<Option<SymbolValue>>,
    lengths: &LengthHint,
    cfg: &RadioConfig,
) -> Result<NodeReport, DecodeError> {
    let mut stars_backfilled = 0;
    if let Some(first) = symbols.iter().flatten().next().copied() {
        for s in symbols.iter_mut().take_while(|s| s.is_none()) {
            *s = Some(first);
            stars_backfilled += 1;
        }
    }
    if *lengths == LengthHint::Header {
        if let [Some(hi), Some(lo), ..] = symbols[..] {
            let len = HEADER_SYMBOLS + decode_length_header([hi, lo], cfg);
            if len > symbols.len() {
                return Err(inconsistent(
                    start_tick,
                    format!("header of n{} declares {len} symbols, {} decoded", node + 1, symbols.len()),
                ));
            }
            symbols.truncate(len);
        }
    }
    let symbols: Vec<DecodedSymbol> = symbols
        .into_iter()
        .map(|s| s.map_or(DecodedSymbol::Star, DecodedSymbol::Known))
        .collect();
    let unknowns = symbols.iter().filter(|s| s.known().is_none()).count();
    Ok(NodeReport {
        node,
        start_tick,
        symbols,
        stars_backfilled,
        unknowns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{superpose, NodeId, Transmission};
    use crate::chirp::{encode_frame, symbols, Frame, LengthMode};
    use crate::desync::detect_frontiers;

    fn instance(frames: &[Frame], starts: &[Tick], cfg: &RadioConfig) -> crate::channel::ObservationTrace {
        let txs: Vec<Transmission> = frames
            .iter()
            .zip(starts)
            .enumerate()
            .map(|(i, (f, &s))| Transmission {
                node_id: NodeId(i as u32),
                start_tick: s,
                schedule: encode_frame(f, cfg).unwrap(),
            })
            .collect();
        superpose(&txs, cfg)
    }

    fn decode(frames: &[&[u16]], starts: &[Tick], cfg: &RadioConfig, hint: LengthHint) -> DecodeReport {
        let frames: Vec<Frame> = frames.iter().map(|f| Frame::known(f, cfg).unwrap()).collect();
        let trace = instance(&frames, starts, cfg);
        let info = detect_frontiers(&trace, cfg, 2).unwrap();
        decode_two(&trace, &info, cfg, &hint).unwrap()
    }

    #[test]
    fn fig3_example() {
        let cfg = RadioConfig::new(2, 125_000, 2).unwrap();
        let report = decode(&[&[1, 1, 3, 2, 2], &[3, 0, 2, 3, 1]], &[0, 1], &cfg, LengthHint::UntilSilence);
        assert_eq!(report.summary(), "n1=(1,1,3,2,2) n2=(3,0,2,3,1)");
        assert!(report.fully_decoded);
        assert_eq!(report.nodes[0].stars_backfilled, 1);

        let f = |v: &[u16]| v.iter().copied().collect::<FreqSet>();
        let at = |label: usize| &report.ledger[label - 1];
        assert_eq!(at(1).step, LedgerStep::Skipped);
        assert_eq!(at(2).step, LedgerStep::Recorded { f_minus: f(&[0, 3]) });
        match &at(3).step {
            LedgerStep::Compared { f_plus, f_minus, changed, .. } => {
                assert_eq!((f_plus, f_minus), (&f(&[0, 1]), &f(&[0, 1])));
                assert!(changed.is_empty());
            }
            other => panic!("{other:?}"),
        }
        match &at(4).step {
            LedgerStep::Compared { f_plus, f_minus, departed, .. } => {
                assert_eq!((f_plus, f_minus, departed), (&f(&[0, 3]), &f(&[0]), &f(&[3])));
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(report.ledger.last().unwrap().step, LedgerStep::Silence { removed: vec![0] });
        assert_eq!(report.ledger.len(), 12);
    }

    #[test]
    fn declared_lengths_match_silence_walk() {
        let cfg = RadioConfig::new(2, 125_000, 2).unwrap();
        let a = decode(&[&[1, 1, 3, 2, 2], &[3, 0, 2, 3, 1]], &[0, 1], &cfg, LengthHint::Declared(vec![5, 5]));
        assert_eq!(a.summary(), "n1=(1,1,3,2,2) n2=(3,0,2,3,1)");
    }

    #[test]
    fn unequal_declared_lengths() {
        let cfg = RadioConfig::new(3, 125_000, 2).unwrap();
        let r = decode(&[&[1, 7, 7], &[3, 0, 2, 3, 1, 6]], &[0, 3], &cfg, LengthHint::Declared(vec![3, 6]));
        assert_eq!(r.summary(), "n1=(1,7,7) n2=(3,0,2,3,1,6)");
        let r = decode(&[&[1, 7, 7, 2, 2, 0], &[3, 0, 2]], &[0, 2], &cfg, LengthHint::Declared(vec![6, 3]));
        assert_eq!(r.summary(), "n1=(1,7,7,2,2,0) n2=(3,0,2)");
    }

    #[test]
    fn header_mode_truncates() {
        let cfg = RadioConfig::new(3, 125_000, 2).unwrap();
        let frames = [
            Frame::new(symbols(&[5, 5, 1]), LengthMode::Header, &cfg).unwrap(),
            Frame::new(symbols(&[2, 6, 6, 6, 0]), LengthMode::Header, &cfg).unwrap(),
        ];
        let trace = instance(&frames, &[0, 2], &cfg);
        let info = detect_frontiers(&trace, &cfg, 2).unwrap();
        let r = decode_two(&trace, &info, &cfg, &LengthHint::Header).unwrap();
        assert_eq!(r.summary(), "n1=(0,3,5,5,1) n2=(0,5,2,6,6,6,0)");
    }

    #[test]
    fn repeated_prefix_backfills_one_star() {
        let cfg = RadioConfig::new(2, 125_000, 2).unwrap();
        let r = decode(&[&[2, 2, 2, 3], &[0, 1, 0, 1]], &[0, 1], &cfg, LengthHint::UntilSilence);
        assert_eq!(r.summary(), "n1=(2,2,2,3) n2=(0,1,0,1)");
        assert_eq!(r.nodes[0].stars_backfilled, 1);
    }

    #[test]
    fn wrong_arity() {
        let cfg = RadioConfig::new(2, 125_000, 2).unwrap();
        let info = FrontierInfo::from_starts(&[0], &cfg);
        let trace = crate::channel::ObservationTrace::default();
        assert_eq!(
            decode_two(&trace, &info, &cfg, &LengthHint::UntilSilence),
            Err(DecodeError::Arity { expected: 2, found: 1 })
        );
    }

    #[test]
    fn truncated_trace() {
        let cfg = RadioConfig::new(2, 125_000, 2).unwrap();
        let frames = [Frame::known(&[1, 1, 3, 2, 2], &cfg).unwrap(), Frame::known(&[3, 0, 2, 3, 1], &cfg).unwrap()];
        let full = instance(&frames, &[0, 1], &cfg);
        // Keep only the first 20 ticks.
        let cut: Vec<_> = full.iter().take(20).map(|(_, o)| o.clone()).collect();
        let cut = crate::channel::ObservationTrace::from_observations(0, cut);
        let info = detect_frontiers(&cut, &cfg, 2).unwrap();
        // Past the end every tick reads as silence, which ends the walk early
        // with a partial frame rather than an error.
        let r = decode_two(&cut, &info, &cfg, &LengthHint::UntilSilence).unwrap();
        assert!(r.nodes[0].symbols.len() < 5);
        // With declared lengths the early silence is an inconsistency.
        assert!(decode_two(&cut, &info, &cfg, &LengthHint::Declared(vec![5, 5])).is_err());
    }
}
