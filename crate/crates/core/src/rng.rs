//! Counter-based random streams.
//!
//! A stream is identified by `(seed, stream_id)`. Draw `k` of a stream uses
//! the ChaCha keystream keyed by `(seed, stream_id)` with stream counter `k`,
//! so the `k`-th sample of an estimator depends only on those three numbers
//! and never on scheduling or worker count.
//!
//! Derivation of experiment streams from the single top-level seed is done
//! with [`RngStream::child`], which mixes a label into the stream id.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use num_complex::Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub const fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// An independent stream labelled by `label`.
    pub fn child(&self, label: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id: splitmix64(self.stream_id ^ splitmix64(label.wrapping_add(0x5851_f42d_4c95_7f2d))),
        }
    }

    /// Child stream labelled by a string, for readable derivations such as
    /// `root.named("blowup-scan")`.
    pub fn named(&self, label: &str) -> Self {
        // FNV-1a
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in label.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        self.child(h)
    }

    fn key(&self) -> [u8; 32] {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.stream_id.to_le_bytes());
        key[16..24].copy_from_slice(&splitmix64(self.seed ^ 0xa076_1d64_78bd_642f).to_le_bytes());
        key[24..].copy_from_slice(&splitmix64(self.stream_id ^ 0xe703_7ed1_a0b4_28db).to_le_bytes());
        key
    }

    /// Generator for draw `index` of this stream.
    pub fn substream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key());
        rng.set_stream(index);
        rng
    }

    /// Sequential generator (draw index 0).
    pub fn rng(&self) -> ChaCha8Rng {
        self.substream(0)
    }
}

/// Complex Gaussian with `E g = 0`, `E|g|^2 = 1` (real and imaginary parts
/// independent with variance 1/2 each).
#[inline]
pub fn complex_gaussian<R: rand::Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}
