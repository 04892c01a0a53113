//! Deterministic, splittable random-number streams.
//!
//! Every source of randomness in the crate is an [`RngStream`]: a
//! (seed, stream id) pair that fully determines the draw sequence. Streams
//! are split by deriving new stream ids, never by advancing shared state, so
//! results do not depend on thread schedule or evaluation order. Generation
//! uses ChaCha8, a counter-based generator, with the stream id selecting an
//! independent keystream for the seed-derived key.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{Dataset, Origin};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer; good bit diffusion for id derivation.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable 64-bit FNV-1a hash. Used for label-to-stream-id derivation and for
/// canonical cell strings in the sweep harness; must never change, or stored
/// sweep results stop matching their streams.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// A reproducible random stream: identical (seed, stream id) pairs yield
/// bit-identical draw sequences across runs and thread schedules, and
/// distinct stream ids yield independent ChaCha keystreams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream_id: 0 }
    }

    pub fn with_stream(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Derive an independent stream for `label`.
    pub fn substream(&self, label: &str) -> Self {
        Self {
            seed: self.seed,
            stream_id: splitmix64(self.stream_id ^ fnv1a64(label.as_bytes())),
        }
    }

    /// Derive an independent stream for (`label`, `index`), e.g. one per
    /// loop iteration or per sweep seed.
    pub fn substream_indexed(&self, label: &str, index: u64) -> Self {
        let mixed = self.stream_id ^ fnv1a64(label.as_bytes()) ^ index.wrapping_mul(GOLDEN_GAMMA);
        Self {
            seed: self.seed,
            stream_id: splitmix64(mixed),
        }
    }

    /// Instantiate the generator for this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        // Expand the 64-bit seed into the 256-bit ChaCha key; the stream id
        // then selects an independent keystream for that key.
        let mut key = [0u8; 32];
        let mut s = self.seed;
        for chunk in key.chunks_exact_mut(8) {
            s = splitmix64(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Draw `count` i.i.d. standard-normal rows of dimension `dim`, tagged with
/// the caller-supplied origin.
pub fn sample_standard_normal(stream: RngStream, count: usize, dim: usize, origin: Origin) -> Dataset {
    assert!(count >= 1 && dim >= 1, "count and dim must be positive");
    let mut rng = stream.rng();
    let mut data = Vec::with_capacity(count * dim);
    for _ in 0..count * dim {
        data.push(rng.sample::<f64, _>(StandardNormal));
    }
    Dataset::from_flat(dim, data, vec![origin; count]).expect("normal draws are finite")
}
