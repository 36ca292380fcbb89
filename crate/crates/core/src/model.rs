//! Pre-norm GPT-style decoder: forward pass over packed (unpadded) rows and
//! a hand-written reverse pass.

use moldpo_chem::Vocabulary;

use crate::params::*;
use crate::scalar::{mat, Scalar};
use crate::sequence::TokenSequence;
use crate::ModelError;

pub(crate) const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044715;

pub(crate) fn gelu<T: Scalar>(x: T) -> T {
    let (c, a, half) = (T::of(GELU_C), T::of(GELU_A), T::of(0.5));
    half * x * (T::one() + (c * (x + a * x * x * x)).tanh())
}

fn gelu_grad<T: Scalar>(x: T) -> T {
    let (c, a, half) = (T::of(GELU_C), T::of(GELU_A), T::of(0.5));
    let t = (c * (x + a * x * x * x)).tanh();
    half * (T::one() + t) + half * x * (T::one() - t * t) * c * (T::one() + T::of(3.0) * a * x * x)
}

/// Row-wise layer norm; returns (mean, rstd) per row.
pub(crate) fn layer_norm<T: Scalar>(x: &[T], g: &[T], b: &[T], out: &mut [T], stats: Option<(&mut [T], &mut [T])>) {
    let d = g.len();
    let eps = T::of(LN_EPS);
    let dt = T::of(d as f64);
    let mut stats = stats;
    for (r, (xr, yr)) in x.chunks_exact(d).zip(out.chunks_exact_mut(d)).enumerate() {
        let mean = xr.iter().copied().sum::<T>() / dt;
        let var = xr.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / dt;
        let rstd = T::one() / (var + eps).sqrt();
        for i in 0..d {
            yr[i] = (xr[i] - mean) * rstd * g[i] + b[i];
        }
        if let Some((m, s)) = stats.as_mut() {
            m[r] = mean;
            s[r] = rstd;
        }
    }
}

fn layer_norm_backward<T: Scalar>(
    x: &[T],
    mean: &[T],
    rstd: &[T],
    g: &[T],
    dout: &[T],
    dx: &mut [T],
    dg: &mut [T],
    db: &mut [T],
) {
    let d = g.len();
    let dt = T::of(d as f64);
    let mut dxhat = vec![T::zero(); d];
    for r in 0..mean.len() {
        let xr = &x[r * d..(r + 1) * d];
        let dy = &dout[r * d..(r + 1) * d];
        let (mu, rs) = (mean[r], rstd[r]);
        let mut sum_dxhat = T::zero();
        let mut sum_dxhat_xhat = T::zero();
        for i in 0..d {
            let xhat = (xr[i] - mu) * rs;
            dg[i] += dy[i] * xhat;
            db[i] += dy[i];
            dxhat[i] = dy[i] * g[i];
            sum_dxhat += dxhat[i];
            sum_dxhat_xhat += dxhat[i] * xhat;
        }
        let dxr = &mut dx[r * d..(r + 1) * d];
        for i in 0..d {
            let xhat = (xr[i] - mu) * rs;
            dxr[i] += rs * (dxhat[i] - sum_dxhat / dt - xhat * sum_dxhat_xhat / dt);
        }
    }
}

fn add_bias<T: Scalar>(y: &mut [T], b: &[T]) {
    for row in y.chunks_exact_mut(b.len()) {
        for (v, bb) in row.iter_mut().zip(b) {
            *v += *bb;
        }
    }
}

fn bias_grad<T: Scalar>(dy: &[T], db: &mut [T]) {
    for row in dy.chunks_exact(db.len()) {
        for (g, v) in db.iter_mut().zip(row) {
            *g += *v;
        }
    }
}

/// In-place softmax over `row[..=last]`, zeroing the masked tail.
pub(crate) fn causal_softmax_row<T: Scalar>(row: &mut [T], last: usize) {
    let max = row[..=last].iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in &mut row[..=last] {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in &mut row[..=last] {
        *v /= sum;
    }
    for v in &mut row[last + 1..] {
        *v = T::zero();
    }
}

struct LayerCache<T> {
    x: Vec<T>,
    ln1: Vec<T>,
    ln1_mean: Vec<T>,
    ln1_rstd: Vec<T>,
    qkv: Vec<T>,
    att: Vec<T>,
    y: Vec<T>,
    mid: Vec<T>,
    ln2: Vec<T>,
    ln2_mean: Vec<T>,
    ln2_rstd: Vec<T>,
    h_pre: Vec<T>,
    h: Vec<T>,
}

/// Activations of one packed batch, kept for the reverse pass.
pub struct Forward<T> {
    /// first row of each sequence
    offsets: Vec<usize>,
    /// rows (predicted positions) of each sequence
    lens: Vec<usize>,
    /// start of each sequence's attention maps inside `LayerCache::att`
    att_offsets: Vec<usize>,
    inputs: Vec<u32>,
    targets: Vec<u32>,
    positions: Vec<usize>,
    layers: Vec<LayerCache<T>>,
    x_final: Vec<T>,
    lnf: Vec<T>,
    lnf_mean: Vec<T>,
    lnf_rstd: Vec<T>,
    /// log-softmax over the vocabulary, one row per input position
    logp: Vec<T>,
    vocab: usize,
}

impl<T: Scalar> Forward<T> {
    pub fn rows(&self) -> usize {
        self.inputs.len()
    }

    pub fn num_sequences(&self) -> usize {
        self.lens.len()
    }

    pub fn targets(&self) -> &[u32] {
        &self.targets
    }

    /// log P(target | prefix) for every row.
    pub fn row_log_probs(&self) -> Vec<f64> {
        (0..self.rows()).map(|r| self.logp[r * self.vocab + self.targets[r] as usize].f64()).collect()
    }

    /// Full next-token log distribution at a row.
    pub fn distribution(&self, row: usize) -> &[T] {
        &self.logp[row * self.vocab..(row + 1) * self.vocab]
    }

    pub fn sequence_rows(&self, s: usize) -> std::ops::Range<usize> {
        self.offsets[s]..self.offsets[s] + self.lens[s]
    }

    /// Summed log-probability per sequence.
    pub fn sequence_log_probs(&self) -> Vec<f64> {
        let rows = self.row_log_probs();
        (0..self.num_sequences()).map(|s| rows[self.sequence_rows(s)].iter().sum()).collect()
    }
}

fn check_sequence(config: &crate::ModelConfig, ids: &[u32]) -> Result<(), ModelError> {
    if ids.len() < 2 {
        return Err(ModelError::InvalidSequence("needs at least two tokens".into()));
    }
    if ids.len() > config.context_length {
        return Err(ModelError::SequenceTooLong { len: ids.len(), max: config.context_length });
    }
    if let Some(&id) = ids.iter().find(|&&id| id as usize >= config.vocab_size) {
        return Err(ModelError::TokenOutOfRange { id, vocab_size: config.vocab_size });
    }
    Ok(())
}

/// Runs the model over every sequence; sequence s contributes len−1 rows.
pub fn forward<T: Scalar, S: AsRef<[u32]>>(params: &Parameters<T>, seqs: &[S]) -> Result<Forward<T>, ModelError> {
    let cfg = &params.config;
    let (d, v, nh, hd) = (cfg.embed_dim, cfg.vocab_size, cfg.heads, cfg.head_dim());
    let mut offsets = Vec::with_capacity(seqs.len());
    let mut lens = Vec::with_capacity(seqs.len());
    let mut att_offsets = Vec::with_capacity(seqs.len());
    let (mut inputs, mut targets, mut positions) = (Vec::new(), Vec::new(), Vec::new());
    let mut att_len = 0;
    for s in seqs {
        let ids = s.as_ref();
        check_sequence(cfg, ids)?;
        let t = ids.len() - 1;
        offsets.push(inputs.len());
        lens.push(t);
        att_offsets.push(att_len);
        att_len += nh * t * t;
        inputs.extend_from_slice(&ids[..t]);
        targets.extend_from_slice(&ids[1..]);
        positions.extend(0..t);
    }
    let n = inputs.len();
    let mut x = vec![T::zero(); n * d];
    let (wte, wpe) = (params.tok_embed(), params.pos_embed());
    for r in 0..n {
        let (ti, pi) = (inputs[r] as usize, positions[r]);
        for i in 0..d {
            x[r * d + i] = wte[ti * d + i] + wpe[pi * d + i];
        }
    }
    let scale = T::one() / T::of(hd as f64).sqrt();
    let mut layers = Vec::with_capacity(cfg.layers);
    for l in 0..cfg.layers {
        let mut c = LayerCache {
            x: x.clone(),
            ln1: vec![T::zero(); n * d],
            ln1_mean: vec![T::zero(); n],
            ln1_rstd: vec![T::zero(); n],
            qkv: vec![T::zero(); n * 3 * d],
            att: vec![T::zero(); att_len],
            y: vec![T::zero(); n * d],
            mid: Vec::new(),
            ln2: vec![T::zero(); n * d],
            ln2_mean: vec![T::zero(); n],
            ln2_rstd: vec![T::zero(); n],
            h_pre: vec![T::zero(); n * 4 * d],
            h: vec![T::zero(); n * 4 * d],
        };
        layer_norm(
            &x,
            params.layer(l, LN1_G),
            params.layer(l, LN1_B),
            &mut c.ln1,
            Some((&mut c.ln1_mean, &mut c.ln1_rstd)),
        );
        mat::nn(n, d, 3 * d, &c.ln1, params.layer(l, ATTN_W), T::zero(), &mut c.qkv);
        add_bias(&mut c.qkv, params.layer(l, ATTN_B));
        for s in 0..seqs.len() {
            let (off, t) = (offsets[s], lens[s]);
            for h in 0..nh {
                let a0 = att_offsets[s] + h * t * t;
                let p = &mut c.att[a0..a0 + t * t];
                let q = &c.qkv[off * 3 * d + h * hd..];
                let k = &c.qkv[off * 3 * d + d + h * hd..];
                T::gemm_raw(t, hd, t, scale, q, 3 * d as isize, 1, k, 1, 3 * d as isize, T::zero(), p, t as isize, 1);
                for i in 0..t {
                    causal_softmax_row(&mut p[i * t..(i + 1) * t], i);
                }
                let vv = &c.qkv[off * 3 * d + 2 * d + h * hd..];
                let y = &mut c.y[off * d + h * hd..];
                T::gemm_raw(t, t, hd, T::one(), p, t as isize, 1, vv, 3 * d as isize, 1, T::zero(), y, d as isize, 1);
            }
        }
        let mut proj = vec![T::zero(); n * d];
        mat::nn(n, d, d, &c.y, params.layer(l, PROJ_W), T::zero(), &mut proj);
        add_bias(&mut proj, params.layer(l, PROJ_B));
        for (xi, pi) in x.iter_mut().zip(&proj) {
            *xi += *pi;
        }
        c.mid = x.clone();
        layer_norm(
            &x,
            params.layer(l, LN2_G),
            params.layer(l, LN2_B),
            &mut c.ln2,
            Some((&mut c.ln2_mean, &mut c.ln2_rstd)),
        );
        mat::nn(n, d, 4 * d, &c.ln2, params.layer(l, FC_W), T::zero(), &mut c.h_pre);
        add_bias(&mut c.h_pre, params.layer(l, FC_B));
        for (h, hp) in c.h.iter_mut().zip(&c.h_pre) {
            *h = gelu(*hp);
        }
        let mut out = vec![T::zero(); n * d];
        mat::nn(n, 4 * d, d, &c.h, params.layer(l, OUT_W), T::zero(), &mut out);
        add_bias(&mut out, params.layer(l, OUT_B));
        for (xi, oi) in x.iter_mut().zip(&out) {
            *xi += *oi;
        }
        layers.push(c);
    }
    let mut lnf = vec![T::zero(); n * d];
    let mut lnf_mean = vec![T::zero(); n];
    let mut lnf_rstd = vec![T::zero(); n];
    layer_norm(&x, params.lnf_gain(), params.lnf_bias(), &mut lnf, Some((&mut lnf_mean, &mut lnf_rstd)));
    let mut logp = vec![T::zero(); n * v];
    mat::nn(n, d, v, &lnf, params.head(), T::zero(), &mut logp);
    for row in logp.chunks_exact_mut(v) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = row.iter().map(|&z| (z - max).exp()).sum::<T>().ln() + max;
        for z in row.iter_mut() {
            *z -= lse;
        }
    }
    Ok(Forward {
        offsets,
        lens,
        att_offsets,
        inputs,
        targets,
        positions,
        layers,
        x_final: x,
        lnf,
        lnf_mean,
        lnf_rstd,
        logp,
        vocab: v,
    })
}

/// Gradient of Σ_r coef[r] · log P(target_r | prefix_r) with respect to every parameter.
pub fn backward<T: Scalar>(params: &Parameters<T>, fwd: &Forward<T>, coef: &[T]) -> Parameters<T> {
    let cfg = &params.config;
    let (d, v, nh, hd) = (cfg.embed_dim, cfg.vocab_size, cfg.heads, cfg.head_dim());
    let n = fwd.rows();
    assert_eq!(coef.len(), n, "one coefficient per row");
    let mut grads = params.zeros_like();
    let fi = params.final_index();

    let mut dlogits = vec![T::zero(); n * v];
    for r in 0..n {
        let c = coef[r];
        if c == T::zero() {
            continue;
        }
        let lp = &fwd.logp[r * v..(r + 1) * v];
        let dl = &mut dlogits[r * v..(r + 1) * v];
        for j in 0..v {
            dl[j] = -c * lp[j].exp();
        }
        dl[fwd.targets[r] as usize] += c;
    }
    mat::tn(d, n, v, &fwd.lnf, &dlogits, T::one(), &mut grads.tensors[fi + 2].data);
    let mut dlnf = vec![T::zero(); n * d];
    mat::nt(n, v, d, &dlogits, params.head(), T::zero(), &mut dlnf);
    drop(dlogits);

    let mut dx = vec![T::zero(); n * d];
    {
        let (dg, rest) = grads.tensors[fi..].split_at_mut(1);
        layer_norm_backward(
            &fwd.x_final,
            &fwd.lnf_mean,
            &fwd.lnf_rstd,
            params.lnf_gain(),
            &dlnf,
            &mut dx,
            &mut dg[0].data,
            &mut rest[0].data,
        );
    }

    let scale = T::one() / T::of(hd as f64).sqrt();
    for l in (0..cfg.layers).rev() {
        let c = &fwd.layers[l];
        // MLP block: x_out = x_mid + out(gelu(fc(ln2(x_mid))))
        let mut dh = vec![T::zero(); n * 4 * d];
        mat::tn(4 * d, n, d, &c.h, &dx, T::one(), grads.layer_mut(l, OUT_W));
        bias_grad(&dx, grads.layer_mut(l, OUT_B));
        mat::nt(n, d, 4 * d, &dx, params.layer(l, OUT_W), T::zero(), &mut dh);
        for (g, hp) in dh.iter_mut().zip(&c.h_pre) {
            *g *= gelu_grad(*hp);
        }
        mat::tn(d, n, 4 * d, &c.ln2, &dh, T::one(), grads.layer_mut(l, FC_W));
        bias_grad(&dh, grads.layer_mut(l, FC_B));
        let mut dln2 = vec![T::zero(); n * d];
        mat::nt(n, 4 * d, d, &dh, params.layer(l, FC_W), T::zero(), &mut dln2);
        drop(dh);
        {
            let base = 2 + l * 12;
            let (g, b) = grads.tensors[base + LN2_G..=base + LN2_B].split_at_mut(1);
            layer_norm_backward(
                &c.mid,
                &c.ln2_mean,
                &c.ln2_rstd,
                params.layer(l, LN2_G),
                &dln2,
                &mut dx,
                &mut g[0].data,
                &mut b[0].data,
            );
        }
        // attention block: x_mid = x + proj(attn(ln1(x)))
        mat::tn(d, n, d, &c.y, &dx, T::one(), grads.layer_mut(l, PROJ_W));
        bias_grad(&dx, grads.layer_mut(l, PROJ_B));
        let mut dy = vec![T::zero(); n * d];
        mat::nt(n, d, d, &dx, params.layer(l, PROJ_W), T::zero(), &mut dy);
        let mut dqkv = vec![T::zero(); n * 3 * d];
        for s in 0..fwd.num_sequences() {
            let (off, t) = (fwd.offsets[s], fwd.lens[s]);
            let mut dp = vec![T::zero(); t * t];
            for h in 0..nh {
                let a0 = fwd.att_offsets[s] + h * t * t;
                let p = &c.att[a0..a0 + t * t];
                let q0 = off * 3 * d + h * hd;
                let (k0, v0) = (q0 + d, q0 + 2 * d);
                let dy_h = &dy[off * d + h * hd..];
                let rs3 = 3 * d as isize;
                // dP = dY Vᵀ
                T::gemm_raw(t, hd, t, T::one(), dy_h, d as isize, 1, &c.qkv[v0..], 1, rs3, T::zero(), &mut dp, t as isize, 1);
                // dV = Pᵀ dY
                T::gemm_raw(t, t, hd, T::one(), p, 1, t as isize, dy_h, d as isize, 1, T::one(), &mut dqkv[v0..], rs3, 1);
                for i in 0..t {
                    let pr = &p[i * t..(i + 1) * t];
                    let dr = &mut dp[i * t..(i + 1) * t];
                    let dot: T = (0..=i).map(|j| pr[j] * dr[j]).sum();
                    for j in 0..t {
                        dr[j] = if j <= i { pr[j] * (dr[j] - dot) * scale } else { T::zero() };
                    }
                }
                // dQ = dS K, dK = dSᵀ Q
                T::gemm_raw(t, t, hd, T::one(), &dp, t as isize, 1, &c.qkv[k0..], rs3, 1, T::one(), &mut dqkv[q0..], rs3, 1);
                T::gemm_raw(t, t, hd, T::one(), &dp, 1, t as isize, &c.qkv[q0..], rs3, 1, T::one(), &mut dqkv[k0..], rs3, 1);
            }
        }
        drop(dy);
        mat::tn(d, n, 3 * d, &c.ln1, &dqkv, T::one(), grads.layer_mut(l, ATTN_W));
        bias_grad(&dqkv, grads.layer_mut(l, ATTN_B));
        let mut dln1 = vec![T::zero(); n * d];
        mat::nt(n, 3 * d, d, &dqkv, params.layer(l, ATTN_W), T::zero(), &mut dln1);
        {
            let base = 2 + l * 12;
            let (g, b) = grads.tensors[base + LN1_G..=base + LN1_B].split_at_mut(1);
            layer_norm_backward(
                &c.x,
                &c.ln1_mean,
                &c.ln1_rstd,
                params.layer(l, LN1_G),
                &dln1,
                &mut dx,
                &mut g[0].data,
                &mut b[0].data,
            );
        }
    }
    for r in 0..n {
        let (ti, pi) = (fwd.inputs[r] as usize, fwd.positions[r]);
        let row = &dx[r * d..(r + 1) * d];
        for (g, x) in grads.tensors[0].data[ti * d..(ti + 1) * d].iter_mut().zip(row) {
            *g += *x;
        }
        for (g, x) in grads.tensors[1].data[pi * d..(pi + 1) * d].iter_mut().zip(row) {
            *g += *x;
        }
    }
    grads
}

/// log P(id_{i+1} | ids ≤ i) for every position of one sequence.
pub fn log_probs<T: Scalar>(params: &Parameters<T>, seq: &[u32]) -> Result<Vec<f64>, ModelError> {
    Ok(forward(params, &[seq])?.row_log_probs())
}

pub fn sequence_log_prob<T: Scalar>(params: &Parameters<T>, seq: &[u32]) -> Result<f64, ModelError> {
    Ok(log_probs(params, seq)?.iter().sum())
}

/// Summed log-probability of each sequence, batched into one pass.
pub fn batch_sequence_log_probs<T: Scalar, S: AsRef<[u32]>>(
    params: &Parameters<T>,
    seqs: &[S],
) -> Result<Vec<f64>, ModelError> {
    if seqs.is_empty() {
        return Ok(Vec::new());
    }
    Ok(forward(params, seqs)?.sequence_log_probs())
}

/// Mean per-token negative log-likelihood and its gradient. Positions whose
/// target is `<pad>` are excluded from both.
pub fn nll_loss_and_grad<T: Scalar>(
    params: &Parameters<T>,
    batch: &[TokenSequence],
) -> Result<(f64, Parameters<T>), ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let fwd = forward(params, batch)?;
    let counted: Vec<bool> = fwd.targets().iter().map(|&t| t != Vocabulary::PAD).collect();
    let n_tok = counted.iter().filter(|c| **c).count().max(1);
    let rows = fwd.row_log_probs();
    let loss = -rows.iter().zip(&counted).filter(|(_, c)| **c).map(|(lp, _)| lp).sum::<f64>() / n_tok as f64;
    let w = T::of(-1.0 / n_tok as f64);
    let coef: Vec<T> = counted.iter().map(|&c| if c { w } else { T::zero() }).collect();
    Ok((loss, backward(params, &fwd, &coef)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelConfig;

    #[test]
    fn gelu_derivative_matches_difference() {
        for x in [-3.0f64, -0.5, 0.0, 0.7, 2.5] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_grad(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn packed_rows_match_single_sequences() {
        let p: Parameters<f64> = init_params(&ModelConfig::tiny(8, 1)).unwrap();
        let a = [1u32, 4, 5, 6, 2];
        let b = [1u32, 7, 2];
        let joint = forward(&p, &[&a[..], &b[..]]).unwrap().sequence_log_probs();
        assert!((joint[0] - sequence_log_prob(&p, &a).unwrap()).abs() < 1e-12);
        assert!((joint[1] - sequence_log_prob(&p, &b).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn rejects_long_or_foreign_sequences() {
        let p: Parameters<f32> = init_params(&ModelConfig::tiny(8, 1)).unwrap();
        let long: Vec<u32> = std::iter::once(1).chain(std::iter::repeat_n(4, 20)).chain([2]).collect();
        assert!(matches!(log_probs(&p, &long), Err(ModelError::SequenceTooLong { .. })));
        assert!(matches!(log_probs(&p, &[1, 9, 2]), Err(ModelError::TokenOutOfRange { .. })));
    }
}
