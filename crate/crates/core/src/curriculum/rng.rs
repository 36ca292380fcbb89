use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// What a random stream is used for. Each purpose gets its own stream so that
/// changing how many draws one consumer makes never shifts another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Purpose {
    Sample = 1,
    Winners = 2,
    Losers = 3,
}

/// Independent stream for one (run seed, stage, step, agent, purpose).
/// The key is laid out directly in the ChaCha seed, so distinct keys never collide.
pub fn stream_rng(seed: u64, stage: usize, step: usize, agent: usize, purpose: Purpose) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..12].copy_from_slice(&(stage as u32).to_le_bytes());
    key[12..20].copy_from_slice(&(step as u64).to_le_bytes());
    key[20..24].copy_from_slice(&(agent as u32).to_le_bytes());
    key[24..28].copy_from_slice(&(purpose as u32).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

pub fn derive_seed(seed: u64, stage: usize, step: usize, agent: usize, purpose: Purpose) -> u64 {
    stream_rng(seed, stage, step, agent, purpose).next_u64()
}
