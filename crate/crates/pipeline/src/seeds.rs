//! Deterministic sub-seeds and hash-based data splits.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Independent random streams derived from the experiment seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Speech = 1,
    Noise = 2,
    TrainRoom = 3,
    EvalRoom = 4,
    TrainMix = 5,
    EvalMix = 6,
    Model = 7,
    Epoch = 8,
}

/// Seed for item `index` of `stream`: the experiment seed xor a mixed stream
/// tag xor the index, passed through a SplitMix64 finalizer.
pub fn sub_seed(seed: u64, stream: Stream, index: u64) -> u64 {
    let tag = (stream as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    splitmix(seed ^ tag ^ index)
}

pub fn rng_for(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(sub_seed(seed, stream, index))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

/// Split of a source file, from the hash of its file name.
pub fn split_of(name: &str, modulo: u64) -> Split {
    match fnv1a(name.as_bytes()) % modulo {
        0 => Split::Test,
        1 => Split::Valid,
        _ => Split::Train,
    }
}
