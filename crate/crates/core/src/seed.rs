//! Seed derivation from one root seed.
//!
//! Every stochastic component draws from `ChaCha8Rng::seed_from_u64(derive(root, tag))`
//! where `derive` mixes the FNV-1a hash of the component tag into the root seed
//! and finalizes with SplitMix64. Tags in use: `init`, `split`, `contamination`,
//! `batches`, `synth`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn derive(root: u64, tag: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(root ^ hash)
}

pub fn rng_for(root: u64, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(root, tag))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
