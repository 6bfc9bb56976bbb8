//! Deterministic random streams.
//!
//! Every stream is a ChaCha20 generator keyed by the run's root seed
//! (`seed_from_u64`) with the 64-bit ChaCha stream id set to a fixed purpose
//! label. Streams for different purposes therefore never overlap, and any
//! implementation of ChaCha20 can reproduce them.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

/// Fixed stream labels, one per consumer of randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Topology,
    PolicyNoise,
    BufferSampling,
    NetworkInit,
    Evaluation,
}

impl Purpose {
    pub const fn label(self) -> u64 {
        match self {
            Purpose::Topology => 0x746f_706f,
            Purpose::PolicyNoise => 0x706f_6c69,
            Purpose::BufferSampling => 0x6275_6666,
            Purpose::NetworkInit => 0x696e_6974,
            Purpose::Evaluation => 0x6576_616c,
        }
    }
}

/// Opens the stream for `purpose` under `root_seed`.
pub fn stream(root_seed: u64, purpose: Purpose) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(root_seed);
    rng.set_stream(purpose.label());
    rng
}

/// Position of a stream, enough to resume it exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamState {
    pub root_seed: u64,
    pub purpose: Purpose,
    pub word_pos: u128,
}

impl StreamState {
    pub fn capture(root_seed: u64, purpose: Purpose, rng: &ChaCha20Rng) -> Self {
        Self {
            root_seed,
            purpose,
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> ChaCha20Rng {
        let mut rng = stream(self.root_seed, self.purpose);
        rng.set_word_pos(self.word_pos);
        rng
    }
}
