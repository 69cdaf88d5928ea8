//! Named sub-streams of the master seed. Each consumer gets its own ChaCha
//! stream, so adding a new random step never shifts existing ones.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn stream_id(name: &str) -> u64 {
    // FNV-1a; stable across platforms and Rust versions.
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn rng(seed: u64, name: &str, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(name).wrapping_add(index));
    rng
}

pub fn seed(master: u64, name: &str, index: u64) -> u64 {
    rng(master, name, index).next_u64()
}
