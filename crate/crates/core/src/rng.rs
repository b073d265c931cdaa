//! Seeded random streams.
//!
//! Every random draw in the crate goes through [`ChaCha8Rng`], a portable
//! counter-based generator whose output is identical on every platform.
//! Independent consumers of one user seed read from distinct ChaCha streams
//! so that, for example, changing the number of instances does not perturb
//! the split shuffle of another run.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// Stream identifiers for the distinct consumers of a seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Instances = 1,
    Split = 2,
    Init = 3,
    Shuffle = 4,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
