//! Named random substreams.
//!
//! Every random draw is keyed by `(master seed, iteration, tag)` and, for
//! per-sample draws, by the sample index. Results therefore do not depend on
//! how sample evaluation is scheduled across threads, and changing the number
//! of Monte-Carlo samples leaves the noise sequence untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Substream tag for the objective's noise draw `U_n`.
pub const NOISE: &str = "noise";
/// Substream tag for the Gaussian perturbations of the gradient estimate.
pub const MONTE_CARLO: &str = "mc";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Substream {
    key: u64,
}

impl Substream {
    pub fn new(master_seed: u64, iteration: u64, tag: &str) -> Self {
        let mut key = splitmix(master_seed);
        key = splitmix(key ^ iteration);
        key = splitmix(key ^ fnv1a(tag.as_bytes()));
        Substream { key }
    }

    /// Stream for a single sequential consumer.
    pub fn rng(&self) -> ChaCha8Rng {
        self.sample_rng(0)
    }

    /// Independent stream for sample `index`.
    pub fn sample_rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.key);
        rng.set_stream(index);
        rng
    }
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}
