//! Monte-Carlo sampler for the exponentiated random-utility form of the eUnit
//! model.
//!
//! Each route draws `ε_r ~ U(0, 1)` and has utility `U_r = ε_r^(1/w_r)`; the
//! chosen route is the argmax. Because `x ↦ ln x / w` preserves the ordering of
//! `x^(1/w)` on `(0, 1)`, utilities are compared as `ln ε_r / w_r`.
//!
//! Randomness is keyed by `(seed, sample index)`: sample `i` lives in ChaCha
//! stream `i / ERUM_CHUNK` at a fixed word offset, so any sample can be
//! regenerated alone and tallies do not depend on how samples are split
//! across workers.

use rand::distributions::{Distribution, Open01};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ProbVector;
use crate::error::{Error, Result};

/// Samples per ChaCha stream.
pub const ERUM_CHUNK: u64 = 1 << 14;

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::Empty("ERUM weight vector".into()));
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
        return Err(Error::domain(format!("ERUM weights must be positive and finite, got {w}")));
    }
    Ok(())
}

fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

#[inline]
fn draw_choice(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let mut best = 0;
    let mut best_utility = f64::NEG_INFINITY;
    for (r, &w) in weights.iter().enumerate() {
        let eps: f64 = Open01.sample(rng);
        let utility = eps.ln() / w;
        if utility > best_utility {
            best_utility = utility;
            best = r;
        }
    }
    best
}

/// The route chosen by sample `index` of the stream keyed by `seed`.
pub fn erum_sample_choice(weights: &[f64], seed: u64, index: u64) -> Result<usize> {
    check_weights(weights)?;
    let mut rng = chunk_rng(seed, index / ERUM_CHUNK);
    // Each f64 consumes two 32-bit words.
    rng.set_word_pos(u128::from(index % ERUM_CHUNK) * 2 * weights.len() as u128);
    Ok(draw_choice(weights, &mut rng))
}

fn tally_chunks(weights: &[f64], n_samples: u64, seed: u64, chunks: impl Iterator<Item = u64>) -> Vec<u64> {
    let mut counts = vec![0u64; weights.len()];
    for chunk in chunks {
        let start = chunk * ERUM_CHUNK;
        let end = (start + ERUM_CHUNK).min(n_samples);
        let mut rng = chunk_rng(seed, chunk);
        for _ in start..end {
            counts[draw_choice(weights, &mut rng)] += 1;
        }
    }
    counts
}

/// Empirical choice frequencies over `n_samples` draws.
pub fn erum_choice_frequencies(weights: &[f64], n_samples: u64, seed: u64) -> Result<ProbVector<f64>> {
    erum_choice_frequencies_with_workers(weights, n_samples, seed, 1)
}

/// As [`erum_choice_frequencies`], fanning chunks out over `workers` threads.
/// The result is identical for every worker count.
pub fn erum_choice_frequencies_with_workers(
    weights: &[f64],
    n_samples: u64,
    seed: u64,
    workers: usize,
) -> Result<ProbVector<f64>> {
    check_weights(weights)?;
    if n_samples == 0 {
        return Err(Error::domain("ERUM needs at least one sample"));
    }
    let n_chunks = n_samples.div_ceil(ERUM_CHUNK);
    let workers = workers.clamp(1, n_chunks as usize) as u64;
    let counts = if workers == 1 {
        tally_chunks(weights, n_samples, seed, 0..n_chunks)
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    s.spawn(move || {
                        tally_chunks(weights, n_samples, seed, (w..n_chunks).step_by(workers as usize))
                    })
                })
                .collect();
            let mut total = vec![0u64; weights.len()];
            for h in handles {
                for (t, c) in total.iter_mut().zip(h.join().expect("ERUM worker panicked")) {
                    *t += c;
                }
            }
            total
        })
    };
    ProbVector::from_weights(counts.into_iter().map(|c| c as f64).collect())
}

/// Standard error of a binomial proportion `p` estimated from `n` draws.
pub fn binomial_standard_error(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}
