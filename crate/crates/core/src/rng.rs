//! Counter-based seeding: every (master seed, stream, step) triple gets its own
//! generator, so ensembles reproduce under any parallel schedule.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for one step of one trajectory.
pub fn step_rng(master_seed: u64, trajectory: u64, step: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let words = [
        splitmix64(master_seed),
        splitmix64(master_seed ^ 0x5DEE_CE66_D1CE_4E5B),
        splitmix64(trajectory.wrapping_add(0xA076_1D64_78BD_642F)),
        splitmix64(trajectory ^ 0xE703_7ED1_A0B4_28DB),
    ];
    for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(step);
    rng
}

/// Derives a task seed from a master seed and a task index.
pub fn derive_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master_seed) ^ splitmix64(index.wrapping_mul(0x2545_F491_4F6C_DD1D)))
}
