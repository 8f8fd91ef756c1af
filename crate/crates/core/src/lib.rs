//! Symbolic model of LoRa chirp collisions and decoders that separate them.
//!
//! Time is counted in ticks of `1/bw` seconds and every chirp is reduced to
//! the frequency bin it occupies at each tick. A receiver sees, per tick,
//! the set of occupied bins, or [`Observation::Mixed`] when up- and
//! down-chirps overlap.
//!
//! - [`chirp`]: configuration, frames and chirp schedules.
//! - [`channel`]: superposition of transmissions into receiver traces.
//! - [`desync`]: decoding of collisions whose starts differ by a few ticks.
//! - [`sync`]: decoding of aligned collisions with one retransmission.
//! - [`netsim`]: slotted network simulator.
//! - [`cli`]: the command-line front end.

pub mod channel;
pub mod cli;
pub mod chirp;
pub mod desync;
pub mod netsim;
pub mod sync;

pub use channel::{Observation, ObservationSource, ObservationTrace, Superposition, Transmission};
pub use chirp::{Frame, RadioConfig, SymbolValue};
