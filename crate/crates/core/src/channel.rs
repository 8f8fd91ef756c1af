//! Receiver-side superposition of concurrent transmissions.
//!
//! Every tick the receiver sees one of three things: nothing, an unreadable
//! mix of up- and down-chirps, or the *set* of frequency bins of the active
//! same-direction chirps. Equal frequencies collapse into one element; no
//! amplitude, noise or capture is modeled.
//!
//! [`superpose`] materializes the dense [`ObservationTrace`]. [`Superposition`]
//! answers the same per-tick queries lazily, which is what long SF12 frames
//! need inside the network simulator.

use std::fmt;
use std::io::{self, Write};

use thiserror::Error;

use crate::chirp::{frequency_unchecked, ChirpKind, ChirpSchedule, FreqBin, RadioConfig, Tick};

// ---------------------------------------------------------------------------
// Frequency sets
// ---------------------------------------------------------------------------

/// Sorted, duplicate-free set of frequency bins.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FreqSet(Vec<FreqBin>);

impl FreqSet {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    pub fn insert(&mut self, f: FreqBin) {
        if let Err(pos) = self.0.binary_search(&f) {
            self.0.insert(pos, f);
        }
    }

    pub fn contains(&self, f: FreqBin) -> bool {
        self.0.binary_search(&f).is_ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = FreqBin> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[FreqBin] {
        &self.0
    }

    /// Elements of `self` not in `other`.
    pub fn difference(&self, other: &FreqSet) -> FreqSet {
        self.iter().filter(|&f| !other.contains(f)).collect()
    }

    pub fn intersection(&self, other: &FreqSet) -> FreqSet {
        self.iter().filter(|&f| other.contains(f)).collect()
    }

    pub fn union(&self, other: &FreqSet) -> FreqSet {
        self.iter().chain(other.iter()).collect()
    }

    /// Every bin shifted by `-elapsed` modulo `2^sf`: where down-chirps
    /// observed at some tick sit `elapsed` ticks later.
    pub fn advance(&self, elapsed: Tick, cfg: &RadioConfig) -> FreqSet {
        let shift = (elapsed % cfg.ticks_per_symbol()) as i64;
        self.iter().map(|f| cfg.wrap(f as i64 - shift)).collect()
    }
}

impl FromIterator<FreqBin> for FreqSet {
    fn from_iter<I: IntoIterator<Item = FreqBin>>(iter: I) -> Self {
        let mut v: Vec<FreqBin> = iter.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }
}

impl fmt::Display for FreqSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "}}")
    }
}

// ---------------------------------------------------------------------------
// Observations
// ---------------------------------------------------------------------------

/// What the receiver resolves at one tick.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Observation {
    Silence,
    /// Up- and down-chirps overlap; no frequency is readable.
    Mixed,
    /// Non-empty set of bins of same-direction chirps.
    Freqs(FreqSet),
}

impl Observation {
    pub fn freqs(&self) -> Option<&FreqSet> {
        match self {
            Observation::Freqs(set) => Some(set),
            _ => None,
        }
    }
}

/// `S`, `M` or `F:f1,f2,...`, as in the trace text format.
impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observation::Silence => f.write_str("S"),
            Observation::Mixed => f.write_str("M"),
            Observation::Freqs(set) => {
                let list: Vec<String> = set.iter().map(|b| b.to_string()).collect();
                write!(f, "F:{}", list.join(","))
            }
        }
    }
}

/// Opaque transmitter identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// One transmission as heard by the receiver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transmission {
    pub node_id: NodeId,
    pub start_tick: Tick,
    pub schedule: ChirpSchedule,
}

impl Transmission {
    pub fn end_tick(&self, cfg: &RadioConfig) -> Tick {
        self.start_tick + self.schedule.duration_ticks(cfg)
    }
}

/// Anything that can report the receiver's view at a tick.
pub trait ObservationSource {
    fn observe(&self, tick: Tick) -> Observation;

    /// First and last tick that may be non-silent, if any.
    fn span(&self) -> Option<(Tick, Tick)>;
}

/// Lazy per-tick view over a set of transmissions.
#[derive(Debug, Clone)]
pub struct Superposition {
    transmissions: Vec<Transmission>,
    cfg: RadioConfig,
}

impl Superposition {
    pub fn new(transmissions: Vec<Transmission>, cfg: RadioConfig) -> Self {
        Self { transmissions, cfg }
    }

    pub fn transmissions(&self) -> &[Transmission] {
        &self.transmissions
    }

    pub fn cfg(&self) -> &RadioConfig {
        &self.cfg
    }
}

impl ObservationSource for Superposition {
    fn observe(&self, tick: Tick) -> Observation {
        let mut up = false;
        let mut down = false;
        let mut set = FreqSet::new();
        for tx in &self.transmissions {
            let Some(rel) = tick.checked_sub(tx.start_tick) else {
                continue;
            };
            if let Some((kind, symbol, offset)) = tx.schedule.chirp_at(rel, &self.cfg) {
                match kind {
                    ChirpKind::Up => up = true,
                    ChirpKind::Down => down = true,
                }
                set.insert(frequency_unchecked(kind, symbol, offset, &self.cfg));
            }
        }
        match (up, down) {
            (false, false) => Observation::Silence,
            (true, true) => Observation::Mixed,
            _ => Observation::Freqs(set),
        }
    }

    fn span(&self) -> Option<(Tick, Tick)> {
        let first = self.transmissions.iter().map(|t| t.start_tick).min()?;
        let last = self
            .transmissions
            .iter()
            .map(|t| t.end_tick(&self.cfg))
            .max()?;
        (last > first).then(|| (first, last - 1))
    }
}

/// Dense receiver trace: one observation per tick of `[first_tick, last_tick]`,
/// silence everywhere else.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct ObservationTrace {
    first_tick: Tick,
    observations: Vec<Observation>,
}

impl ObservationTrace {
    pub fn from_observations(first_tick: Tick, observations: Vec<Observation>) -> Self {
        Self {
            first_tick,
            observations,
        }
    }

    /// Samples a source over its whole span.
    pub fn materialize<S: ObservationSource>(source: &S) -> Self {
        match source.span() {
            None => Self::default(),
            Some((first, last)) => Self {
                first_tick: first,
                observations: (first..=last).map(|t| source.observe(t)).collect(),
            },
        }
    }

    pub fn first_tick(&self) -> Tick {
        self.first_tick
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Tick, &Observation)> + '_ {
        self.observations
            .iter()
            .enumerate()
            .map(move |(i, o)| (self.first_tick + i as Tick, o))
    }

    /// True when every tick is silent.
    pub fn is_silent(&self) -> bool {
        self.observations.iter().all(|o| *o == Observation::Silence)
    }
}

impl ObservationSource for ObservationTrace {
    fn observe(&self, tick: Tick) -> Observation {
        tick.checked_sub(self.first_tick)
            .and_then(|i| self.observations.get(i as usize))
            .cloned()
            .unwrap_or(Observation::Silence)
    }

    fn span(&self) -> Option<(Tick, Tick)> {
        (!self.observations.is_empty())
            .then(|| (self.first_tick, self.first_tick + self.observations.len() as Tick - 1))
    }
}

/// Dense trace of all transmissions superposed at the receiver.
pub fn superpose(transmissions: &[Transmission], cfg: &RadioConfig) -> ObservationTrace {
    ObservationTrace::materialize(&Superposition::new(transmissions.to_vec(), *cfg))
}

// ---------------------------------------------------------------------------
// Start-offset constraints
// ---------------------------------------------------------------------------

/// Why a set of start ticks is not a slightly-desynchronized collision.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OffsetViolation {
    #[error("no start ticks given")]
    Empty,
    #[error("start ticks not sorted at {first} > {second}")]
    Unsorted { first: Tick, second: Tick },
    #[error("starts {first} and {second} are {gap} ticks apart, below delta = {delta}")]
    GapTooSmall {
        first: Tick,
        second: Tick,
        gap: Tick,
        delta: Tick,
    },
    #[error("starts {first} and {last} span {span} ticks, above symbol - delta = {limit}")]
    SpanTooWide {
        first: Tick,
        last: Tick,
        span: Tick,
        limit: Tick,
    },
}

/// Checks that all starts fit in `SD - delta` and are pairwise `delta` apart.
pub fn validate_offsets(start_ticks: &[Tick], cfg: &RadioConfig) -> Result<(), OffsetViolation> {
    let (&first, &last) = match (start_ticks.first(), start_ticks.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(OffsetViolation::Empty),
    };
    for w in start_ticks.windows(2) {
        if w[1] < w[0] {
            return Err(OffsetViolation::Unsorted {
                first: w[0],
                second: w[1],
            });
        }
        let gap = w[1] - w[0];
        if gap < cfg.delta_ticks {
            return Err(OffsetViolation::GapTooSmall {
                first: w[0],
                second: w[1],
                gap,
                delta: cfg.delta_ticks,
            });
        }
    }
    let limit = cfg.ticks_per_symbol() - cfg.delta_ticks;
    if last - first > limit {
        return Err(OffsetViolation::SpanTooWide {
            first,
            last,
            span: last - first,
            limit,
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Text format: `tick<TAB>S|M|F:f1,f2,...`
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("trace line {line}: {message}")]
pub struct TraceParseError {
    pub line: usize,
    pub message: String,
}

/// Writes one line per tick of the trace span.
pub fn write_trace<W: Write>(trace: &ObservationTrace, mut out: W) -> io::Result<()> {
    for (tick, obs) in trace.iter() {
        writeln!(out, "{tick}\t{obs}")?;
    }
    Ok(())
}

pub fn trace_to_string(trace: &ObservationTrace) -> String {
    let mut buf = Vec::new();
    write_trace(trace, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("trace text is ASCII")
}

/// Parses the text format. Ticks must be strictly increasing; gaps are silence.
/// Blank lines and `#` comments are skipped.
pub fn parse_trace(text: &str, cfg: &RadioConfig) -> Result<ObservationTrace, TraceParseError> {
    let mut first: Option<Tick> = None;
    let mut observations: Vec<Observation> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let err = |message: String| TraceParseError { line, message };
        let content = raw.trim_end_matches('\r');
        if content.trim().is_empty() || content.trim_start().starts_with('#') {
            continue;
        }
        let (tick_str, obs_str) = content
            .split_once('\t')
            .ok_or_else(|| err("expected `tick<TAB>observation`".into()))?;
        let tick: Tick = tick_str
            .trim()
            .parse()
            .map_err(|_| err(format!("bad tick `{tick_str}`")))?;
        let obs = match obs_str.trim() {
            "S" => Observation::Silence,
            "M" => Observation::Mixed,
            other => {
                let list = other
                    .strip_prefix("F:")
                    .ok_or_else(|| err(format!("bad observation `{other}`")))?;
                let mut set = FreqSet::new();
                for item in list.split(',') {
                    let f: FreqBin = item
                        .trim()
                        .parse()
                        .map_err(|_| err(format!("bad frequency `{item}`")))?;
                    if u32::from(f) >= cfg.bins() {
                        return Err(err(format!("frequency {f} outside [0, {})", cfg.bins())));
                    }
                    set.insert(f);
                }
                Observation::Freqs(set)
            }
        };
        let start = *first.get_or_insert(tick);
        let expected = start + observations.len() as Tick;
        if tick < expected {
            return Err(err(format!("tick {tick} not after previous tick")));
        }
        observations.resize((tick - start) as usize, Observation::Silence);
        observations.push(obs);
    }
    Ok(ObservationTrace::from_observations(first.unwrap_or(0), observations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chirp::{encode_frame, Frame};

    fn sf2() -> RadioConfig {
        RadioConfig::new(2, 125_000, 2).unwrap()
    }

    fn tx(id: u32, start: Tick, payload: &[u16], cfg: &RadioConfig) -> Transmission {
        Transmission {
            node_id: NodeId(id),
            start_tick: start,
            schedule: encode_frame(&Frame::known(payload, cfg).unwrap(), cfg).unwrap(),
        }
    }

    fn fig3(cfg: &RadioConfig) -> Vec<Transmission> {
        vec![tx(1, 0, &[1, 1, 3, 2, 2], cfg), tx(2, 1, &[3, 0, 2, 3, 1], cfg)]
    }

    #[test]
    fn fig3_checkpoints() {
        let cfg = sf2();
        let trace = superpose(&fig3(&cfg), &cfg);
        // n1 data starts at tick 8 while n2 is still in its preamble.
        assert_eq!(trace.observe(8), Observation::Mixed);
        assert_eq!(trace.observe(9), Observation::Freqs([0, 3].into_iter().collect()));
        assert_eq!(trace.observe(13), Observation::Freqs([0].into_iter().collect()));
        assert_eq!(trace.observe(29), Observation::Silence);
        assert_eq!(trace.span(), Some((0, 28)));
    }

    #[test]
    fn single_transmission_is_never_mixed() {
        let cfg = sf2();
        let trace = superpose(&[tx(7, 3, &[3, 0, 2, 2], &cfg)], &cfg);
        for (_, obs) in trace.iter() {
            assert_eq!(obs.freqs().map(FreqSet::len), Some(1));
        }
    }

    #[test]
    fn duplicate_transmission_collapses() {
        let cfg = sf2();
        let one = superpose(&[tx(1, 0, &[1, 2, 3], &cfg)], &cfg);
        let two = superpose(&[tx(1, 0, &[1, 2, 3], &cfg), tx(2, 0, &[1, 2, 3], &cfg)], &cfg);
        assert_eq!(one, two);
    }

    #[test]
    fn offset_examples() {
        let cfg = RadioConfig::new(4, 125_000, 8).unwrap();
        let d = cfg.delta_ticks;
        assert_eq!(validate_offsets(&[0, d, 2 * d], &cfg), Ok(()));
        assert!(matches!(
            validate_offsets(&[0, 0], &cfg),
            Err(OffsetViolation::GapTooSmall { gap: 0, .. })
        ));
        assert!(matches!(
            validate_offsets(&[0, d, 2 * d, 3 * d, 4 * d], &cfg),
            Err(OffsetViolation::SpanTooWide { span: 16, limit: 12, .. })
        ));
        assert_eq!(validate_offsets(&[], &cfg), Err(OffsetViolation::Empty));
        assert!(matches!(
            validate_offsets(&[5, 1], &cfg),
            Err(OffsetViolation::Unsorted { .. })
        ));
    }

    #[test]
    fn text_roundtrip_and_errors() {
        let cfg = sf2();
        let trace = superpose(&fig3(&cfg), &cfg);
        let text = trace_to_string(&trace);
        assert!(text.starts_with("0\tF:0\n1\tF:0,1\n"));
        assert!(text.contains("8\tM\n"));
        assert_eq!(parse_trace(&text, &cfg).unwrap(), trace);

        let err = parse_trace("0\tF:1\n1\tX\n", &cfg).unwrap_err();
        assert_eq!(err.line, 2);
        assert_eq!(parse_trace("0\tF:9\n", &cfg).unwrap_err().line, 1);
        assert_eq!(parse_trace("4\tS\n2\tS\n", &cfg).unwrap_err().line, 2);
        assert_eq!(parse_trace("3 F:1\n", &cfg).unwrap_err().line, 1);

        let gappy = parse_trace("# comment\n2\tF:1\n5\tM\n", &cfg).unwrap();
        assert_eq!(gappy.observe(3), Observation::Silence);
        assert_eq!(gappy.observe(5), Observation::Mixed);
    }

    #[test]
    fn freqset_advance() {
        let cfg = sf2();
        let set: FreqSet = [0, 3].into_iter().collect();
        assert_eq!(set.advance(3, &cfg), [0, 1].into_iter().collect());
        assert_eq!(set.advance(0, &cfg), set);
        assert_eq!(set.to_string(), "{0,3}");
    }
}
