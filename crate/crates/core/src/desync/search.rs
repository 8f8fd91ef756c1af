//! Search for distinct transmissions that the receiver cannot tell apart.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{superpose, NodeId, ObservationTrace, Transmission};
use crate::chirp::{has_symbol_change, schedule_from_data, RadioConfig, SymbolValue, Tick};

const SAMPLING_SEED: u64 = 0x5eed;

/// Data frames of `n` nodes, node `i` starting at tick `i * delta`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SearchInstance {
    pub frames: Vec<Vec<SymbolValue>>,
    pub offsets: Vec<Tick>,
}

impl SearchInstance {
    pub fn transmissions(&self, cfg: &RadioConfig) -> Vec<Transmission> {
        self.frames
            .iter()
            .zip(&self.offsets)
            .enumerate()
            .map(|(i, (f, &start))| Transmission {
                node_id: NodeId(i as u32),
                start_tick: start,
                schedule: schedule_from_data(f, cfg),
            })
            .collect()
    }

    pub fn trace(&self, cfg: &RadioConfig) -> ObservationTrace {
        superpose(&self.transmissions(cfg), cfg)
    }
}

/// Inputs sharing one trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndistinguishableGroup {
    pub trace: ObservationTrace,
    /// Sorted, at least two.
    pub instances: Vec<SearchInstance>,
}

/// Frames of `len` symbols containing a change, by index among all `bins^len` words.
fn frame_at(mut index: u64, len: usize, bins: u64) -> Vec<SymbolValue> {
    let mut out = vec![SymbolValue(0); len];
    for slot in out.iter_mut().rev() {
        *slot = SymbolValue((index % bins) as u16);
        index /= bins;
    }
    out
}

/// Groups inputs of `n` nodes with `frame_len`-symbol frames by their trace.
///
/// The domain is enumerated when it has at most `budget` instances and
/// sampled `budget` times with a fixed seed otherwise.
pub fn find_indistinguishable(
    n: usize,
    frame_len: usize,
    cfg: &RadioConfig,
    budget: u64,
) -> Vec<IndistinguishableGroup> {
    let offsets: Vec<Tick> = (0..n as Tick).map(|i| i * cfg.delta_ticks).collect();
    let bins = cfg.bins() as u64;
    let words = bins.checked_pow(frame_len as u32);
    let frames: Option<Vec<Vec<SymbolValue>>> = words.filter(|&w| w <= budget).map(|w| {
        (0..w)
            .map(|i| frame_at(i, frame_len, bins))
            .filter(|f| has_symbol_change(f))
            .collect()
    });
    let domain = frames
        .as_ref()
        .and_then(|f| (f.len() as u64).checked_pow(n as u32));

    let mut groups: HashMap<ObservationTrace, Vec<SearchInstance>> = HashMap::new();
    let mut add = |frames: Vec<Vec<SymbolValue>>| {
        let inst = SearchInstance {
            frames,
            offsets: offsets.clone(),
        };
        groups.entry(inst.trace(cfg)).or_default().push(inst);
    };

    match (frames, domain) {
        (Some(frames), Some(size)) if size <= budget => {
            let mut idx = vec![0usize; n];
            for _ in 0..size {
                add(idx.iter().map(|&i| frames[i].clone()).collect());
                for d in idx.iter_mut().rev() {
                    *d += 1;
                    if *d < frames.len() {
                        break;
                    }
                    *d = 0;
                }
            }
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(SAMPLING_SEED);
            for _ in 0..budget {
                let inst = (0..n)
                    .map(|_| loop {
                        let f: Vec<SymbolValue> = (0..frame_len)
                            .map(|_| SymbolValue(rng.gen_range(0..bins) as u16))
                            .collect();
                        if has_symbol_change(&f) {
                            break f;
                        }
                    })
                    .collect();
                add(inst);
            }
        }
    }

    let mut out: BTreeMap<SearchInstance, IndistinguishableGroup> = BTreeMap::new();
    for (trace, mut instances) in groups {
        instances.sort();
        instances.dedup();
        if instances.len() >= 2 {
            out.insert(instances[0].clone(), IndistinguishableGroup { trace, instances });
        }
    }
    out.into_values().collect()
}
