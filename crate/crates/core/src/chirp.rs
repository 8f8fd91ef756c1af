//! Discrete chirp model.
//!
//! Time is quantized in ticks of `1 / bw` seconds, so one tick moves a chirp
//! by exactly one frequency bin. A symbol lasts `2^sf` ticks and a chirp
//! carrying value `s` starts its sweep at bin `s`:
//!
//! ```text
//! up-chirp   f(offset) = (s + offset) mod 2^sf
//! down-chirp f(offset) = (s - offset) mod 2^sf
//! ```
//!
//! Uplink frames are a preamble of `(Up, 0)` chirps followed by down-chirp
//! data symbols.

use std::fmt;

use thiserror::Error;

/// Frequency bin in `[0, 2^sf)`.
pub type FreqBin = u16;

/// Tick index (one tick = `1 / bw` seconds).
pub type Tick = u64;

/// Errors raised by the chirp model.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChirpError {
    #[error("invalid radio config: {0}")]
    InvalidConfig(String),
    #[error("offset {offset} outside symbol of {ticks} ticks")]
    OffsetOutOfRange { offset: Tick, ticks: Tick },
    #[error("frequency bin {freq} outside [0, {bins})")]
    FreqOutOfRange { freq: FreqBin, bins: u32 },
    #[error("frame invariant violated: {0}")]
    Frame(String),
}

// ---------------------------------------------------------------------------
// Radio configuration
// ---------------------------------------------------------------------------

/// Spreading factor, bandwidth and preamble parameters.
///
/// Fields are public for struct-literal construction; [`RadioConfig::validate`]
/// checks the invariants and every constructor calls it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RadioConfig {
    /// Bits per symbol, 2..=12.
    pub sf: u8,
    /// Channel bandwidth in Hz.
    pub bw: u32,
    /// Number of preamble up-chirps.
    pub preamble_len: usize,
    /// Receiver detection window in ticks.
    pub delta_ticks: Tick,
}

impl RadioConfig {
    pub const MIN_SF: u8 = 2;
    pub const MAX_SF: u8 = 12;

    /// Config with the default detection window `2^(sf-2)` ticks (a quarter symbol).
    pub fn new(sf: u8, bw: u32, preamble_len: usize) -> Result<Self, ChirpError> {
        if !(Self::MIN_SF..=Self::MAX_SF).contains(&sf) {
            return Err(ChirpError::InvalidConfig(format!(
                "sf {sf} outside {}..={}",
                Self::MIN_SF,
                Self::MAX_SF
            )));
        }
        let cfg = Self {
            sf,
            bw,
            preamble_len,
            delta_ticks: 1 << (sf - 2),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// EU868 LoRaWAN settings: 125 kHz and an 8-symbol preamble.
    pub fn lorawan(sf: u8) -> Result<Self, ChirpError> {
        Self::new(sf, 125_000, 8)
    }

    pub fn with_delta(mut self, delta_ticks: Tick) -> Result<Self, ChirpError> {
        self.delta_ticks = delta_ticks;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ChirpError> {
        let bad = |msg: String| Err(ChirpError::InvalidConfig(msg));
        if !(Self::MIN_SF..=Self::MAX_SF).contains(&self.sf) {
            return bad(format!("sf {} outside 2..=12", self.sf));
        }
        if self.bw == 0 {
            return bad("bandwidth must be positive".into());
        }
        if self.preamble_len < 2 {
            return bad(format!("preamble_len {} < 2", self.preamble_len));
        }
        let max_delta = 1u64 << (self.sf - 1);
        if self.delta_ticks == 0 || self.delta_ticks > max_delta {
            return bad(format!(
                "delta_ticks {} outside 1..={max_delta}",
                self.delta_ticks
            ));
        }
        Ok(())
    }

    /// Number of symbol values and frequency bins, `2^sf`.
    pub fn bins(&self) -> u32 {
        1 << self.sf
    }

    /// Ticks per symbol, `2^sf`.
    pub fn ticks_per_symbol(&self) -> Tick {
        1 << self.sf
    }

    pub fn tick_seconds(&self) -> f64 {
        1.0 / self.bw as f64
    }

    /// Symbol duration `2^sf / bw` in seconds.
    pub fn symbol_duration(&self) -> f64 {
        self.ticks_per_symbol() as f64 / self.bw as f64
    }

    /// Ticks taken by the preamble.
    pub fn preamble_ticks(&self) -> Tick {
        self.preamble_len as Tick * self.ticks_per_symbol()
    }

    /// Reduces an arbitrary signed bin count modulo `2^sf`.
    pub(crate) fn wrap(&self, value: i64) -> FreqBin {
        value.rem_euclid(self.bins() as i64) as FreqBin
    }
}

// ---------------------------------------------------------------------------
// Symbols and chirps
// ---------------------------------------------------------------------------

/// A symbol value: the frequency shift of a chirp, `0 <= value < 2^sf`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SymbolValue(pub u16);

impl SymbolValue {
    pub fn new(value: u16, cfg: &RadioConfig) -> Result<Self, ChirpError> {
        if u32::from(value) >= cfg.bins() {
            return Err(ChirpError::Frame(format!(
                "symbol {value} outside [0, {})",
                cfg.bins()
            )));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> u16 {
        self.0
    }
}

impl fmt::Display for SymbolValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Convenience conversion for literal symbol sequences.
pub fn symbols(values: &[u16]) -> Vec<SymbolValue> {
    values.iter().copied().map(SymbolValue).collect()
}

/// Sweep direction of a chirp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChirpKind {
    Up,
    Down,
}

fn check_offset(offset: Tick, cfg: &RadioConfig) -> Result<(), ChirpError> {
    if offset >= cfg.ticks_per_symbol() {
        return Err(ChirpError::OffsetOutOfRange {
            offset,
            ticks: cfg.ticks_per_symbol(),
        });
    }
    Ok(())
}

/// Frequency bin of a chirp `offset` ticks after its symbol frontier.
pub fn instantaneous_frequency(
    kind: ChirpKind,
    symbol: SymbolValue,
    offset: Tick,
    cfg: &RadioConfig,
) -> Result<FreqBin, ChirpError> {
    check_offset(offset, cfg)?;
    Ok(frequency_unchecked(kind, symbol, offset, cfg))
}

#[inline]
pub(crate) fn frequency_unchecked(
    kind: ChirpKind,
    symbol: SymbolValue,
    offset: Tick,
    cfg: &RadioConfig,
) -> FreqBin {
    let mask = cfg.ticks_per_symbol() - 1;
    let s = u64::from(symbol.0);
    let f = match kind {
        ChirpKind::Up => s.wrapping_add(offset),
        ChirpKind::Down => s.wrapping_sub(offset),
    };
    (f & mask) as FreqBin
}

/// Inverse of [`instantaneous_frequency`]: the symbol whose chirp shows bin
/// `freq` at `offset` ticks past the frontier.
pub fn symbol_from_frequency(
    freq: FreqBin,
    offset: Tick,
    kind: ChirpKind,
    cfg: &RadioConfig,
) -> Result<SymbolValue, ChirpError> {
    if u32::from(freq) >= cfg.bins() {
        return Err(ChirpError::FreqOutOfRange {
            freq,
            bins: cfg.bins(),
        });
    }
    check_offset(offset, cfg)?;
    // The inverse sweep is the opposite chirp evaluated at the same offset.
    let inverse = match kind {
        ChirpKind::Up => ChirpKind::Down,
        ChirpKind::Down => ChirpKind::Up,
    };
    Ok(SymbolValue(frequency_unchecked(
        inverse,
        SymbolValue(freq),
        offset,
        cfg,
    )))
}

// ---------------------------------------------------------------------------
// Frames
// ---------------------------------------------------------------------------

/// How a receiver learns a frame's length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LengthMode {
    /// Length is out-of-band metadata.
    Known,
    /// Two leading symbols carry the payload length, big-endian base `2^sf`.
    Header,
}

/// Number of symbols used by the length header.
pub const HEADER_SYMBOLS: usize = 2;

/// An uplink data frame.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Frame {
    payload: Vec<SymbolValue>,
    length_mode: LengthMode,
}

impl Frame {
    /// Builds a frame, checking symbol range and the at-least-one-change rule.
    pub fn new(
        payload: Vec<SymbolValue>,
        length_mode: LengthMode,
        cfg: &RadioConfig,
    ) -> Result<Self, ChirpError> {
        let frame = Self {
            payload,
            length_mode,
        };
        frame.validate(cfg)?;
        Ok(frame)
    }

    pub fn known(payload: &[u16], cfg: &RadioConfig) -> Result<Self, ChirpError> {
        Self::new(symbols(payload), LengthMode::Known, cfg)
    }

    pub fn validate(&self, cfg: &RadioConfig) -> Result<(), ChirpError> {
        if self.payload.is_empty() {
            return Err(ChirpError::Frame("payload is empty".into()));
        }
        for s in &self.payload {
            SymbolValue::new(s.0, cfg)?;
        }
        if !has_symbol_change(&self.payload) {
            return Err(ChirpError::Frame(
                "payload needs at least one symbol change".into(),
            ));
        }
        if self.length_mode == LengthMode::Header {
            let max = (cfg.bins() as usize).pow(HEADER_SYMBOLS as u32) - 1;
            if self.payload.len() > max {
                return Err(ChirpError::Frame(format!(
                    "payload length {} does not fit a {HEADER_SYMBOLS}-symbol header (max {max})",
                    self.payload.len()
                )));
            }
        }
        Ok(())
    }

    pub fn payload(&self) -> &[SymbolValue] {
        &self.payload
    }

    pub fn length_mode(&self) -> LengthMode {
        self.length_mode
    }

    /// Data symbols as sent on air: header (if any) followed by payload.
    pub fn on_air_symbols(&self, cfg: &RadioConfig) -> Vec<SymbolValue> {
        let mut out = Vec::with_capacity(self.payload.len() + HEADER_SYMBOLS);
        if self.length_mode == LengthMode::Header {
            out.extend(encode_length_header(self.payload.len(), cfg));
        }
        out.extend_from_slice(&self.payload);
        out
    }
}

/// True when some adjacent pair of symbols differs.
pub fn has_symbol_change(symbols: &[SymbolValue]) -> bool {
    symbols.windows(2).any(|w| w[0] != w[1])
}

/// Big-endian base-`2^sf` length header.
pub fn encode_length_header(len: usize, cfg: &RadioConfig) -> [SymbolValue; HEADER_SYMBOLS] {
    let base = cfg.bins() as usize;
    [
        SymbolValue(((len / base) % base) as u16),
        SymbolValue((len % base) as u16),
    ]
}

pub fn decode_length_header(header: [SymbolValue; HEADER_SYMBOLS], cfg: &RadioConfig) -> usize {
    header[0].0 as usize * cfg.bins() as usize + header[1].0 as usize
}

// ---------------------------------------------------------------------------
// Schedules
// ---------------------------------------------------------------------------

/// Per-symbol chirp layout of one transmission: preamble then data.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChirpSchedule {
    entries: Vec<(ChirpKind, SymbolValue)>,
}

impl ChirpSchedule {
    pub fn entries(&self) -> &[(ChirpKind, SymbolValue)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn duration_ticks(&self, cfg: &RadioConfig) -> Tick {
        self.entries.len() as Tick * cfg.ticks_per_symbol()
    }

    /// Down-chirp data symbols, without the preamble.
    pub fn data_symbols(&self) -> impl Iterator<Item = SymbolValue> + '_ {
        self.entries
            .iter()
            .filter(|(kind, _)| *kind == ChirpKind::Down)
            .map(|&(_, s)| s)
    }

    /// Chirp active `tick` ticks after the start of the transmission, with
    /// its offset inside the symbol.
    #[inline]
    pub fn chirp_at(&self, tick: Tick, cfg: &RadioConfig) -> Option<(ChirpKind, SymbolValue, Tick)> {
        let index = (tick >> cfg.sf) as usize;
        let offset = tick & (cfg.ticks_per_symbol() - 1);
        self.entries
            .get(index)
            .map(|&(kind, symbol)| (kind, symbol, offset))
    }
}

/// Lays out a frame as preamble up-chirps followed by down-chirp data.
pub fn encode_frame(frame: &Frame, cfg: &RadioConfig) -> Result<ChirpSchedule, ChirpError> {
    cfg.validate()?;
    frame.validate(cfg)?;
    Ok(schedule_from_data(&frame.on_air_symbols(cfg), cfg))
}

/// Schedule for raw on-air data symbols; no frame invariants are checked
/// beyond what the caller guarantees.
pub fn schedule_from_data(data: &[SymbolValue], cfg: &RadioConfig) -> ChirpSchedule {
    let mut entries = Vec::with_capacity(cfg.preamble_len + data.len());
    entries.extend(std::iter::repeat_n((ChirpKind::Up, SymbolValue(0)), cfg.preamble_len));
    entries.extend(data.iter().map(|&s| (ChirpKind::Down, s)));
    ChirpSchedule { entries }
}

// ---------------------------------------------------------------------------
// Airtime
// ---------------------------------------------------------------------------

/// Data symbols needed for `payload_bytes` at `sf` raw bits per symbol.
pub fn symbols_per_frame(payload_bytes: usize, cfg: &RadioConfig) -> usize {
    (8 * payload_bytes).div_ceil(cfg.sf as usize)
}

/// Time on air in seconds of a frame with `frame_symbols` data symbols.
pub fn airtime(frame_symbols: usize, cfg: &RadioConfig) -> f64 {
    (cfg.preamble_len + frame_symbols) as f64 * cfg.symbol_duration()
}
