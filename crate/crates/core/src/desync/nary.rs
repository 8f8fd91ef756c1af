//! Frontier walk for any number of transmitters.
//!
//! Each node keeps one candidate cell per data symbol. At a frontier of node
//! `c` the observation before it (`P`) holds the current frequencies of every
//! other node plus `c`'s finishing symbol, and the observation at it (`D`)
//! holds the same others plus `c`'s new symbol. Every assignment consistent
//! with both sets is enumerated and the cells shrink to the values that
//! appear in some assignment. Nothing is guessed, so a singleton cell is
//! always the transmitted value.

use crate::channel::{FreqSet, Observation, ObservationSource};
use crate::chirp::{decode_length_header, RadioConfig, SymbolValue, Tick, HEADER_SYMBOLS};

use super::{
    inconsistent, DecodeError, DecodeReport, DecodedSymbol, FrontierInfo, LengthHint, NodeReport,
};

/// Candidate symbol values; `None` means unconstrained.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Cell(Option<Vec<u16>>);

impl Cell {
    const ANY: Cell = Cell(None);

    fn allows(&self, v: u16) -> bool {
        self.0.as_ref().is_none_or(|c| c.binary_search(&v).is_ok())
    }

    fn singleton(&self) -> Option<u16> {
        match self.0.as_deref() {
            Some([v]) => Some(*v),
            _ => None,
        }
    }

    /// Returns true when the cell shrank.
    fn restrict(&mut self, other: &Cell) -> bool {
        let Some(o) = &other.0 else { return false };
        let next: Vec<u16> = o.iter().copied().filter(|&v| self.allows(v)).collect();
        let shrank = self.0.as_ref().is_none_or(|c| c.len() != next.len());
        self.0 = Some(next);
        shrank
    }
}

struct Node {
    cells: Vec<Cell>,
    /// `linked[i]`: symbol `i` repeats symbol `i - 1`.
    linked: Vec<bool>,
    via_link: Vec<bool>,
    active: bool,
    last_frontier: Option<Tick>,
}

impl Node {
    fn new() -> Self {
        Node {
            cells: Vec::new(),
            linked: Vec::new(),
            via_link: Vec::new(),
            active: true,
            last_frontier: None,
        }
    }

    fn push(&mut self, cell: Cell, linked: bool) {
        self.cells.push(cell);
        self.linked.push(linked);
        self.via_link.push(false);
    }

    fn known_len(&self, hint: &LengthHint, index: usize, cfg: &RadioConfig) -> Option<usize> {
        match hint {
            LengthHint::Declared(_) => hint.declared(index),
            LengthHint::Header => {
                let hi = self.cells.first()?.singleton()?;
                let lo = self.cells.get(1)?.singleton()?;
                Some(HEADER_SYMBOLS + decode_length_header([SymbolValue(hi), SymbolValue(lo)], cfg))
            }
            LengthHint::UntilSilence => None,
        }
    }

    /// Narrows along repeat links until stable. Errors on an empty cell.
    fn propagate(&mut self, tick: Tick) -> Result<(), DecodeError> {
        let len = self.cells.len();
        let mut i = 1;
        while i < len {
            if !self.linked[i] {
                i += 1;
                continue;
            }
            // Chain [lo, hi] of mutually linked cells.
            let lo = i - 1;
            let mut hi = i;
            while hi + 1 < len && self.linked[hi + 1] {
                hi += 1;
            }
            let mut merged = Cell::ANY;
            for c in &self.cells[lo..=hi] {
                merged.restrict(c);
            }
            if merged.0.as_ref().is_some_and(Vec::is_empty) {
                return Err(inconsistent(tick, "repeated symbol has no consistent value"));
            }
            for k in lo..=hi {
                let before = self.cells[k].singleton();
                self.cells[k].restrict(&merged);
                if before.is_none() && self.cells[k].singleton().is_some() {
                    self.via_link[k] = true;
                }
            }
            i = hi + 1;
        }
        Ok(())
    }
}

/// One participant of the enumeration: a cell read at a known tick offset.
struct Slot {
    node: usize,
    index: usize,
    /// Ticks elapsed since the symbol started.
    offset: Tick,
    in_prev: bool,
    in_now: bool,
    /// Frequencies allowed by the cell and the sets it belongs to.
    options: Vec<u16>,
}

fn value(f: u16, offset: Tick, cfg: &RadioConfig) -> u16 {
    cfg.wrap(f as i64 + (offset % cfg.ticks_per_symbol()) as i64)
}

/// All assignments of frequencies to slots whose unions equal `prev` and `now`.
fn enumerate(slots: &[Slot], prev: Option<&FreqSet>, now: &FreqSet) -> Vec<Vec<u16>> {
    fn go(
        slots: &[Slot],
        k: usize,
        pick: &mut Vec<u16>,
        prev: Option<&FreqSet>,
        now: &FreqSet,
        out: &mut Vec<Vec<u16>>,
    ) {
        let missing = |set: &FreqSet, side: fn(&Slot) -> bool| {
            set.iter()
                .filter(|&f| !slots[..k].iter().zip(pick.iter()).any(|(s, &p)| side(s) && p == f))
                .count()
        };
        let left_prev = slots[k..].iter().filter(|s| s.in_prev).count();
        let left_now = slots[k..].iter().filter(|s| s.in_now).count();
        if prev.is_some_and(|p| missing(p, |s| s.in_prev) > left_prev)
            || missing(now, |s| s.in_now) > left_now
        {
            return;
        }
        if k == slots.len() {
            out.push(pick.clone());
            return;
        }
        for &f in &slots[k].options {
            pick.push(f);
            go(slots, k + 1, pick, prev, now, out);
            pick.pop();
        }
    }
    let mut out = Vec::new();
    go(slots, 0, &mut Vec::new(), prev, now, &mut out);
    out
}

/// Decodes `n` desynchronized superposed frames.
///
/// Positions whose attribution stays ambiguous are reported as
/// [`DecodedSymbol::Unknown`] (or `Star` when never constrained).
pub fn decode_n<S: ObservationSource>(
    source: &S,
    frontiers: &FrontierInfo,
    cfg: &RadioConfig,
    lengths: &LengthHint,
) -> Result<DecodeReport, DecodeError> {
    let n = frontiers.len();
    if n < 2 {
        return Err(DecodeError::Arity { expected: 2, found: n });
    }
    let grid = &frontiers.nodes;
    let symbol = cfg.ticks_per_symbol();
    let horizon = source.span().map_or(0, |(_, last)| last) + symbol;

    let mut nodes: Vec<Node> = (0..n).map(|_| Node::new()).collect();
    let mut prev: Option<(Tick, FreqSet)> = None;

    while let Some((c, t)) = (0..n)
        .filter(|&k| nodes[k].active)
        .map(|k| (k, grid[k].frontier(nodes[k].cells.len(), cfg)))
        .min_by_key(|&(_, t)| t)
    {
        if t > horizon {
            return Err(DecodeError::TruncatedTrace { tick: t });
        }
        let i = nodes[c].cells.len();

        let known = nodes[c].known_len(lengths, c, cfg);
        if known.is_some_and(|len| i > len) {
            // Header resolved after its end frontier passed: drop the extras.
            let node = &mut nodes[c];
            let len = known.unwrap_or(i);
            node.cells.truncate(len);
            node.linked.truncate(len);
            node.via_link.truncate(len);
            node.active = false;
            continue;
        }
        let ending = known == Some(i);

        let obs = source.observe(t);
        let closing = obs == Observation::Silence && !ending;
        let now = match obs {
            Observation::Mixed if prev.is_none() && i == 0 && !ending => {
                nodes[c].push(Cell::ANY, false);
                nodes[c].last_frontier = Some(t);
                continue;
            }
            Observation::Mixed => return Err(inconsistent(t, "up/down overlap inside data")),
            Observation::Silence if ending => FreqSet::new(),
            Observation::Silence => {
                if prev.is_none() {
                    return Err(inconsistent(t, "silence before any data was read"));
                }
                if matches!(lengths, LengthHint::Declared(_)) {
                    return Err(inconsistent(t, "silence before the declared frame end"));
                }
                // Predictions made by others during our last symbol are phantoms.
                for (k, node) in nodes.iter_mut().enumerate() {
                    if k != c && node.active && node.last_frontier.is_some_and(|lf| lf + symbol > t) {
                        node.cells.pop();
                        node.linked.pop();
                        node.via_link.pop();
                        node.active = false;
                    }
                }
                nodes[c].active = false;
                FreqSet::new()
            }
            Observation::Freqs(set) => set,
        };
        let finishing = !nodes[c].active || ending;
        let p = prev.as_ref().map(|(tp, set)| set.advance(t - tp, cfg));

        // Participants: every other active node, c's previous and new symbol.
        let mut slots = Vec::new();
        for (k, node) in nodes.iter().enumerate() {
            if k == c || !node.active {
                continue;
            }
            let index = node.cells.len() - 1;
            let offset = t - grid[k].frontier(index, cfg);
            slots.push(Slot {
                node: k,
                index,
                offset,
                in_prev: p.is_some(),
                in_now: true,
                options: Vec::new(),
            });
        }
        if i > 0 && p.is_some() {
            slots.push(Slot {
                node: c,
                index: i - 1,
                offset: symbol,
                in_prev: true,
                in_now: false,
                options: Vec::new(),
            });
        }
        if !finishing {
            nodes[c].push(Cell::ANY, false);
            slots.push(Slot {
                node: c,
                index: i,
                offset: 0,
                in_prev: false,
                in_now: true,
                options: Vec::new(),
            });
        }
        for s in &mut slots {
            let cell = &nodes[s.node].cells[s.index];
            let base = match (&p, s.in_prev, s.in_now) {
                (Some(p), true, true) => p.intersection(&now),
                (Some(p), true, false) => p.clone(),
                _ => now.clone(),
            };
            s.options = base
                .iter()
                .filter(|&f| cell.allows(value(f, s.offset, cfg)))
                .collect();
        }

        let combos = enumerate(&slots, p.as_ref(), &now);
        if combos.is_empty() {
            return Err(inconsistent(t, "no attribution of frequencies is consistent"));
        }
        for (k, s) in slots.iter().enumerate() {
            let mut vals: Vec<u16> = combos.iter().map(|cb| value(cb[k], s.offset, cfg)).collect();
            vals.sort_unstable();
            vals.dedup();
            nodes[s.node].cells[s.index].restrict(&Cell(Some(vals)));
        }
        // The new symbol repeats the old one in every consistent attribution.
        let old = slots.iter().position(|s| s.node == c && s.index + 1 == i);
        let new = slots.iter().position(|s| s.node == c && s.index == i);
        if let (Some(o), Some(x)) = (old, new) {
            if combos.iter().all(|cb| cb[o] == cb[x]) {
                nodes[c].linked[i] = true;
            }
        }
        let touched: Vec<usize> = {
            let mut v: Vec<usize> = slots.iter().map(|s| s.node).collect();
            v.dedup();
            v
        };
        for k in touched {
            nodes[k].propagate(t)?;
        }

        if ending {
            nodes[c].active = false;
        }
        nodes[c].last_frontier = Some(t);
        prev = Some((t, now));
        if closing {
            break;
        }
    }

    let reports = nodes
        .into_iter()
        .enumerate()
        .map(|(k, node)| finish(k, grid[k].start_tick, node, lengths, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DecodeReport::new(reports, Vec::new()))
}

fn finish(
    node: usize,
    start_tick: Tick,
    mut n: Node,
    lengths: &LengthHint,
    cfg: &RadioConfig,
) -> Result<NodeReport, DecodeError> {
    if let Some(len) = n.known_len(lengths, node, cfg).filter(|_| *lengths == LengthHint::Header) {
        if len > n.cells.len() {
            return Err(inconsistent(
                start_tick,
                format!("header of n{} declares {len} symbols, {} decoded", node + 1, n.cells.len()),
            ));
        }
        n.cells.truncate(len);
        n.via_link.truncate(len);
    }
    let symbols: Vec<DecodedSymbol> = n
        .cells
        .iter()
        .map(|cell| match &cell.0 {
            None => DecodedSymbol::Star,
            Some(v) if v.len() == 1 => DecodedSymbol::Known(SymbolValue(v[0])),
            Some(v) if v.len() == cfg.bins() as usize => DecodedSymbol::Star,
            Some(v) => DecodedSymbol::Unknown(v.iter().map(|&s| SymbolValue(s)).collect()),
        })
        .collect();
    let unknowns = symbols.iter().filter(|s| s.known().is_none()).count();
    let stars_backfilled = n
        .via_link
        .iter()
        .zip(&symbols)
        .filter(|(v, s)| **v && s.known().is_some())
        .count();
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
    use crate::channel::{superpose, NodeId, ObservationTrace, Transmission};
    use crate::chirp::{encode_frame, Frame};
    use crate::desync::{decode_two, detect_frontiers};

    fn trace(frames: &[&[u16]], starts: &[Tick], cfg: &RadioConfig) -> ObservationTrace {
        let txs: Vec<Transmission> = frames
            .iter()
            .zip(starts)
            .enumerate()
            .map(|(i, (f, &s))| Transmission {
                node_id: NodeId(i as u32),
                start_tick: s,
                schedule: encode_frame(&Frame::known(f, cfg).unwrap(), cfg).unwrap(),
            })
            .collect();
        superpose(&txs, cfg)
    }

    fn run(frames: &[&[u16]], starts: &[Tick], cfg: &RadioConfig, hint: LengthHint) -> DecodeReport {
        let tr = trace(frames, starts, cfg);
        let info = detect_frontiers(&tr, cfg, frames.len()).unwrap();
        decode_n(&tr, &info, cfg, &hint).unwrap()
    }

    #[test]
    fn fig3_matches_two_node_walk() {
        let cfg = RadioConfig::new(2, 125_000, 2).unwrap();
        let frames: [&[u16]; 2] = [&[1, 1, 3, 2, 2], &[3, 0, 2, 3, 1]];
        for hint in [LengthHint::UntilSilence, LengthHint::Declared(vec![5, 5])] {
            let r = run(&frames, &[0, 1], &cfg, hint.clone());
            assert_eq!(r.summary(), "n1=(1,1,3,2,2) n2=(3,0,2,3,1)");
            let tr = trace(&frames, &[0, 1], &cfg);
            let info = detect_frontiers(&tr, &cfg, 2).unwrap();
            let two = decode_two(&tr, &info, &cfg, &hint).unwrap();
            assert_eq!(r.nodes[0].symbols, two.nodes[0].symbols);
        }
    }

    #[test]
    fn three_nodes_distinct_symbols_decode() {
        let cfg = RadioConfig::lorawan(7).unwrap();
        let d = cfg.delta_ticks;
        let frames: [&[u16]; 3] = [&[5, 9, 100, 7], &[40, 41, 41, 3], &[77, 12, 60, 90]];
        let r = run(&frames, &[0, d, 2 * d], &cfg, LengthHint::Declared(vec![4, 4, 4]));
        assert!(r.fully_decoded, "{}", r.summary());
        assert_eq!(r.summary(), "n1=(5,9,100,7) n2=(40,41,41,3) n3=(77,12,60,90)");
        let r = run(&frames, &[0, d, 2 * d], &cfg, LengthHint::UntilSilence);
        assert_eq!(r.summary(), "n1=(5,9,100,7) n2=(40,41,41,3) n3=(77,12,60,90)");
    }

    #[test]
    fn ambiguity_stays_unknown() {
        // Three nodes sharing frequencies leave some positions open, but
        // anything reported as known must be right.
        let cfg = RadioConfig::new(2, 125_000, 2).unwrap();
        let frames: [&[u16]; 3] = [&[0, 1, 1], &[1, 0, 0], &[1, 1, 0]];
        let tr = trace(&frames, &[0, 1, 2], &cfg);
        let info = detect_frontiers(&tr, &cfg, 3).unwrap();
        let r = decode_n(&tr, &info, &cfg, &LengthHint::Declared(vec![3, 3, 3])).unwrap();
        for (node, frame) in r.nodes.iter().zip(frames) {
            for (s, &want) in node.symbols.iter().zip(frame) {
                if let Some(v) = s.known() {
                    assert_eq!(v.value(), want);
                }
            }
        }
    }

    #[test]
    fn single_node_is_an_arity_error() {
        let cfg = RadioConfig::new(2, 125_000, 2).unwrap();
        let info = FrontierInfo::from_starts(&[0], &cfg);
        assert!(matches!(
            decode_n(&ObservationTrace::default(), &info, &cfg, &LengthHint::UntilSilence),
            Err(DecodeError::Arity { .. })
        ));
    }
}
