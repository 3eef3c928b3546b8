//! Counter-based seed derivation.
//!
//! Every random stream in a simulation is keyed by `(master seed, drop index,
//! stream tag)`, so drops can run in any order or in parallel and still draw
//! identical numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Stream tags. Distinct tags give statistically independent generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Channel = 1,
    Pilot = 2,
    Data = 3,
    Noise = 4,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, drop: u64, stream: Stream) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ drop) ^ (stream as u64).wrapping_mul(0xA24B_AED4_963E_E407))
}

pub fn stream_rng(master: u64, drop: u64, stream: Stream) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(derive_seed(master, drop, stream))
}
