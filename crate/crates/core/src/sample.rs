use moldpo_chem::Vocabulary;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{causal_softmax_row, forward, gelu, layer_norm};
use crate::params::*;
use crate::scalar::{mat, Scalar};
use crate::sequence::TokenSequence;
use crate::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleOptions {
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    /// longest sequence produced, counting `<bos>` and `<eos>`
    #[serde(default = "default_max_len")]
    pub max_len: usize,
}

fn default_temperature() -> f64 {
    1.0
}
fn default_max_len() -> usize {
    128
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions { temperature: default_temperature(), max_len: default_max_len() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub seq: TokenSequence,
    /// no `<eos>` was drawn within `max_len`; one was appended
    pub truncated: bool,
}

/// Draws a token from `logits / temperature`; `<bos>` and `<pad>` are never drawn.
fn draw<T: Scalar>(logits: &[T], temperature: f64, rng: &mut ChaCha8Rng) -> u32 {
    let allowed = |j: usize| j as u32 != Vocabulary::BOS && j as u32 != Vocabulary::PAD;
    let max = (0..logits.len()).filter(|&j| allowed(j)).map(|j| logits[j].f64()).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = (0..logits.len())
        .map(|j| if allowed(j) { ((logits[j].f64() - max) / temperature).exp() } else { 0.0 })
        .collect();
    let total: f64 = weights.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = Vocabulary::EOS;
    for (j, w) in weights.iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        acc += w;
        last = j as u32;
        if u < acc {
            return j as u32;
        }
    }
    last
}

fn check_options(config: &crate::ModelConfig, opts: &SampleOptions) -> Result<(), ModelError> {
    if !(opts.temperature > 0.0 && opts.temperature.is_finite()) {
        return Err(ModelError::InvalidTemperature(opts.temperature));
    }
    if opts.max_len < 2 || opts.max_len > config.context_length {
        return Err(ModelError::SequenceTooLong { len: opts.max_len, max: config.context_length });
    }
    Ok(())
}

/// Ancestral sampling of `n` sequences from `<bos>`, decoding all of them in
/// lock-step with cached keys and values.
pub fn sample<T: Scalar>(
    params: &Parameters<T>,
    n: usize,
    opts: &SampleOptions,
    seed: u64,
) -> Result<Vec<Sample>, ModelError> {
    let cfg = &params.config;
    check_options(cfg, opts)?;
    let (d, v, nh, hd) = (cfg.embed_dim, cfg.vocab_size, cfg.heads, cfg.head_dim());
    let ctx = opts.max_len;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seqs: Vec<Vec<u32>> = vec![vec![Vocabulary::BOS]; n];
    let mut truncated = vec![false; n];
    let mut active: Vec<usize> = (0..n).collect();
    let mut kcache = vec![vec![T::zero(); n * ctx * d]; cfg.layers];
    let mut vcache = vec![vec![T::zero(); n * ctx * d]; cfg.layers];
    let scale = T::one() / T::of(hd as f64).sqrt();
    let (wte, wpe) = (params.tok_embed(), params.pos_embed());
    for pos in 0..ctx - 1 {
        let b = active.len();
        if b == 0 {
            break;
        }
        let mut x = vec![T::zero(); b * d];
        for (r, &s) in active.iter().enumerate() {
            let tok = *seqs[s].last().expect("starts with <bos>") as usize;
            for i in 0..d {
                x[r * d + i] = wte[tok * d + i] + wpe[pos * d + i];
            }
        }
        let mut ln = vec![T::zero(); b * d];
        let mut qkv = vec![T::zero(); b * 3 * d];
        let mut y = vec![T::zero(); b * d];
        let mut tmp = vec![T::zero(); b * d];
        let mut h = vec![T::zero(); b * 4 * d];
        let mut scores = vec![T::zero(); pos + 1];
        for l in 0..cfg.layers {
            layer_norm(&x, params.layer(l, LN1_G), params.layer(l, LN1_B), &mut ln, None);
            mat::nn(b, d, 3 * d, &ln, params.layer(l, ATTN_W), T::zero(), &mut qkv);
            let bias = params.layer(l, ATTN_B);
            for row in qkv.chunks_exact_mut(3 * d) {
                for (q, bb) in row.iter_mut().zip(bias) {
                    *q += *bb;
                }
            }
            for (r, &s) in active.iter().enumerate() {
                let at = (s * ctx + pos) * d;
                kcache[l][at..at + d].copy_from_slice(&qkv[r * 3 * d + d..r * 3 * d + 2 * d]);
                vcache[l][at..at + d].copy_from_slice(&qkv[r * 3 * d + 2 * d..r * 3 * d + 3 * d]);
                for hh in 0..nh {
                    let q = &qkv[r * 3 * d + hh * hd..r * 3 * d + (hh + 1) * hd];
                    for (j, sc) in scores.iter_mut().enumerate() {
                        let k = &kcache[l][(s * ctx + j) * d + hh * hd..];
                        *sc = (0..hd).map(|i| q[i] * k[i]).sum::<T>() * scale;
                    }
                    causal_softmax_row(&mut scores, pos);
                    let out = &mut y[r * d + hh * hd..r * d + (hh + 1) * hd];
                    out.fill(T::zero());
                    for (j, p) in scores.iter().enumerate() {
                        let vv = &vcache[l][(s * ctx + j) * d + hh * hd..];
                        for i in 0..hd {
                            out[i] += *p * vv[i];
                        }
                    }
                }
            }
            mat::nn(b, d, d, &y, params.layer(l, PROJ_W), T::zero(), &mut tmp);
            residual(&mut x, &tmp, params.layer(l, PROJ_B));
            layer_norm(&x, params.layer(l, LN2_G), params.layer(l, LN2_B), &mut ln, None);
            mat::nn(b, d, 4 * d, &ln, params.layer(l, FC_W), T::zero(), &mut h);
            let fb = params.layer(l, FC_B);
            for row in h.chunks_exact_mut(4 * d) {
                for (hv, bb) in row.iter_mut().zip(fb) {
                    *hv = gelu(*hv + *bb);
                }
            }
            mat::nn(b, 4 * d, d, &h, params.layer(l, OUT_W), T::zero(), &mut tmp);
            residual(&mut x, &tmp, params.layer(l, OUT_B));
        }
        layer_norm(&x, params.lnf_gain(), params.lnf_bias(), &mut ln, None);
        let mut logits = vec![T::zero(); b * v];
        mat::nn(b, d, v, &ln, params.head(), T::zero(), &mut logits);
        let last_slot = pos + 2 == ctx;
        for (r, &s) in active.iter().enumerate() {
            let tok = draw(&logits[r * v..(r + 1) * v], opts.temperature, &mut rng);
            if last_slot && tok != Vocabulary::EOS {
                truncated[s] = true;
                seqs[s].push(Vocabulary::EOS);
            } else {
                seqs[s].push(tok);
            }
        }
        active.retain(|&s| *seqs[s].last().expect("non-empty") != Vocabulary::EOS);
    }
    seqs.into_iter()
        .zip(truncated)
        .map(|(ids, truncated)| Ok(Sample { seq: TokenSequence::new(ids)?, truncated }))
        .collect()
}

fn residual<T: Scalar>(x: &mut [T], delta: &[T], bias: &[T]) {
    let d = bias.len();
    for (i, (xi, di)) in x.iter_mut().zip(delta).enumerate() {
        *xi += *di + bias[i % d];
    }
}

/// Argmax decoding recomputed with full forward passes (no cache).
pub fn greedy_decode<T: Scalar>(params: &Parameters<T>, max_len: usize) -> Result<Sample, ModelError> {
    check_options(&params.config, &SampleOptions { temperature: 1.0, max_len })?;
    let mut ids = vec![Vocabulary::BOS];
    loop {
        // a placeholder target lets the packed forward pass score the last prefix
        let mut probe = ids.clone();
        probe.push(Vocabulary::EOS);
        let fwd = forward(params, &[&probe])?;
        let dist = fwd.distribution(ids.len() - 1);
        let next = (0..dist.len())
            .filter(|&j| j as u32 != Vocabulary::BOS && j as u32 != Vocabulary::PAD)
            .fold(None, |best: Option<usize>, j| match best {
                Some(b) if dist[b] >= dist[j] => Some(b),
                _ => Some(j),
            })
            .expect("vocabulary has ordinary tokens") as u32;
        if ids.len() + 1 == max_len && next != Vocabulary::EOS {
            ids.push(Vocabulary::EOS);
            return Ok(Sample { seq: TokenSequence::new(ids)?, truncated: true });
        }
        ids.push(next);
        if next == Vocabulary::EOS {
            return Ok(Sample { seq: TokenSequence::new(ids)?, truncated: false });
        }
    }
}
