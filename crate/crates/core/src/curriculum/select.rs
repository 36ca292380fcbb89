use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::memory::{Memory, ScoredMolecule, ScoredSample};
use super::CurriculumError;
use crate::dpo::PreferencePair;

/// `n` draws with replacement from `candidates`, weighted by exp(score / tau).
pub fn select_winners_from<R: Rng>(
    candidates: &[&ScoredMolecule],
    n: usize,
    tau: f64,
    rng: &mut R,
) -> Result<Vec<ScoredMolecule>, CurriculumError> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(CurriculumError::InvalidTau(tau));
    }
    if candidates.is_empty() {
        return Err(CurriculumError::EmptyMemory);
    }
    let best = candidates.iter().map(|c| c.score).fold(f64::NEG_INFINITY, f64::max);
    // shifting by the best score keeps the weights finite; small tau underflows the rest to 0
    let weights: Vec<f64> = candidates.iter().map(|c| ((c.score - best) / tau).exp()).collect();
    let dist = WeightedIndex::new(&weights).expect("best candidate has weight 1");
    Ok((0..n).map(|_| candidates[dist.sample(rng)].clone()).collect())
}

/// Softmax-over-scores draws from the whole memory.
pub fn select_winners(mem: &Memory, n: usize, tau: f64, seed: u64) -> Result<Vec<ScoredMolecule>, CurriculumError> {
    let all = mem.top(mem.len());
    select_winners_from(&all, n, tau, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// `n` uniform draws with replacement from the batch.
pub fn select_losers<T: Clone, R: Rng>(batch: &[T], n: usize, rng: &mut R) -> Result<Vec<T>, CurriculumError> {
    if batch.is_empty() {
        return Err(CurriculumError::EmptyBatch);
    }
    Ok((0..n).map(|_| batch[rng.random_range(0..batch.len())].clone()).collect())
}

/// Zips winners with losers and keeps pairs whose gap reaches `min_gap` and
/// whose two molecules differ.
pub fn build_pairs(
    winners: &[ScoredMolecule],
    losers: &[ScoredSample],
    min_gap: f64,
) -> Result<Vec<PreferencePair>, CurriculumError> {
    if winners.len() != losers.len() {
        return Err(CurriculumError::LengthMismatch { winners: winners.len(), losers: losers.len() });
    }
    Ok(winners
        .iter()
        .zip(losers)
        .filter(|(w, l)| w.score - l.score >= min_gap && w.score >= l.score && w.canonical != l.key())
        .map(|(w, l)| PreferencePair {
            winner: w.tokens.clone(),
            loser: l.tokens.clone(),
            winner_score: w.score,
            loser_score: l.score,
            winner_key: w.canonical.clone(),
            loser_key: l.key().to_string(),
        })
        .collect())
}
