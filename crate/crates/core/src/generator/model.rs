//! Forward and backward passes of the attention encoder-decoder.
//!
//! Encoder: single-layer unidirectional GRU over source embeddings, starting
//! from a zero state. Decoder: GRU over target embeddings, initialised with
//! the last encoder state. At every step the new decoder state `s` attends
//! over encoder states `h_j` with additive scores
//! `e_j = v . tanh(W_enc h_j + W_dec s)`, and the output distribution is
//! `softmax(W_out [s; c] + b_out)` with `c` the attention-weighted context.

use crate::corpus::{BOS, EOS};
use crate::error::{Error, Result};
use crate::generator::params::{Dims, GruParams, Seq2SeqParams};
use crate::generator::tensor::{axpy, dot, sigmoid, softmax, Mat, Scalar};

/// One training pair in id space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingExample {
    /// `<s> ... </s>`
    pub source: Vec<u32>,
    /// Output ids without `</s>`; the loss appends it.
    pub target: Vec<u32>,
}

impl TrainingExample {
    pub fn new(source: &[u32], target: &[u32]) -> Self {
        let mut s = Vec::with_capacity(source.len() + 2);
        s.push(BOS);
        s.extend_from_slice(source);
        s.push(EOS);
        TrainingExample { source: s, target: target.to_vec() }
    }

    /// Number of predicted tokens, `</s>` included.
    pub fn target_len(&self) -> usize {
        self.target.len() + 1
    }
}

/// Deliberate gradient defects, for checking that the gradient check bites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientFault {
    /// Treat attention weights as constants: no gradient through the scores.
    DetachAttentionScores,
}

#[derive(Debug, Clone)]
struct GruCache<F> {
    x: Vec<F>,
    h_prev: Vec<F>,
    z: Vec<F>,
    r: Vec<F>,
    n: Vec<F>,
}

fn gru_forward<F: Scalar>(p: &GruParams<F>, x: &[F], h_prev: &[F]) -> (Vec<F>, GruCache<F>) {
    let gate = |w: &Mat<F>, u: &Mat<F>, b: &Mat<F>, h: &[F]| {
        let mut a = b.data.clone();
        w.mul_vec_acc(x, &mut a);
        u.mul_vec_acc(h, &mut a);
        a
    };
    let z: Vec<F> = gate(&p.w_z, &p.u_z, &p.b_z, h_prev).into_iter().map(sigmoid).collect();
    let r: Vec<F> = gate(&p.w_r, &p.u_r, &p.b_r, h_prev).into_iter().map(sigmoid).collect();
    let rh: Vec<F> = r.iter().zip(h_prev).map(|(&a, &b)| a * b).collect();
    let n: Vec<F> = gate(&p.w_h, &p.u_h, &p.b_h, &rh).into_iter().map(F::tanh).collect();
    let h: Vec<F> = (0..h_prev.len()).map(|i| (F::one() - z[i]) * h_prev[i] + z[i] * n[i]).collect();
    (h, GruCache { x: x.to_vec(), h_prev: h_prev.to_vec(), z, r, n })
}

/// Accumulates parameter gradients; adds input and previous-state gradients
/// into `dx` and `dh_prev`.
fn gru_backward<F: Scalar>(
    p: &GruParams<F>,
    g: &mut GruParams<F>,
    c: &GruCache<F>,
    dh: &[F],
    dx: &mut [F],
    dh_prev: &mut [F],
) {
    let one = F::one();
    let hidden = dh.len();
    let mut da_z = vec![F::zero(); hidden];
    let mut da_h = vec![F::zero(); hidden];
    for i in 0..hidden {
        dh_prev[i] += dh[i] * (one - c.z[i]);
        da_z[i] = dh[i] * (c.n[i] - c.h_prev[i]) * c.z[i] * (one - c.z[i]);
        da_h[i] = dh[i] * c.z[i] * (one - c.n[i] * c.n[i]);
    }
    let rh: Vec<F> = c.r.iter().zip(&c.h_prev).map(|(&a, &b)| a * b).collect();
    g.w_h.add_outer(&da_h, &c.x);
    g.u_h.add_outer(&da_h, &rh);
    axpy(one, &da_h, &mut g.b_h.data);
    p.w_h.mul_vec_t_acc(&da_h, dx);
    let mut d_rh = vec![F::zero(); hidden];
    p.u_h.mul_vec_t_acc(&da_h, &mut d_rh);
    let mut da_r = vec![F::zero(); hidden];
    for i in 0..hidden {
        dh_prev[i] += d_rh[i] * c.r[i];
        da_r[i] = d_rh[i] * c.h_prev[i] * c.r[i] * (one - c.r[i]);
    }
    for (w, u, b, da) in [(&mut g.w_r, &mut g.u_r, &mut g.b_r, &da_r), (&mut g.w_z, &mut g.u_z, &mut g.b_z, &da_z)] {
        w.add_outer(da, &c.x);
        u.add_outer(da, &c.h_prev);
        axpy(one, da, &mut b.data);
    }
    p.w_r.mul_vec_t_acc(&da_r, dx);
    p.u_r.mul_vec_t_acc(&da_r, dh_prev);
    p.w_z.mul_vec_t_acc(&da_z, dx);
    p.u_z.mul_vec_t_acc(&da_z, dh_prev);
}

fn check_ids(dims: Dims, ids: &[u32]) -> Result<()> {
    match ids.iter().find(|&&i| i as usize >= dims.vocab) {
        Some(i) => Err(Error::contract(format!("token id {i} outside vocabulary of {}", dims.vocab))),
        None => Ok(()),
    }
}

/// Encoder states and their attention keys for one source sentence.
#[derive(Debug, Clone)]
pub struct EncodedSource<F> {
    pub states: Vec<Vec<F>>,
    keys: Vec<Vec<F>>,
    caches: Vec<GruCache<F>>,
}

impl<F: Scalar> EncodedSource<F> {
    /// Decoder start state: the last encoder state.
    pub fn initial_state(&self) -> Vec<F> {
        self.states.last().cloned().expect("encoder states are non-empty")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

pub fn encode_source<F: Scalar>(params: &Seq2SeqParams<F>, source: &[u32]) -> Result<EncodedSource<F>> {
    check_ids(params.dims, source)?;
    if source.is_empty() {
        return Err(Error::contract("empty source sequence"));
    }
    let mut h = vec![F::zero(); params.dims.hidden];
    let mut states = Vec::with_capacity(source.len());
    let mut caches = Vec::with_capacity(source.len());
    for &id in source {
        let (next, cache) = gru_forward(&params.enc, params.src_embed.row(id as usize), &h);
        states.push(next.clone());
        caches.push(cache);
        h = next;
    }
    let keys = states.iter().map(|s| params.att_enc.mul_vec(s)).collect();
    Ok(EncodedSource { states, keys, caches })
}

/// Encoder states `[T x H]`; state `t` only sees ids `0..=t`.
pub fn encode_sequence<F: Scalar>(params: &Seq2SeqParams<F>, source: &[u32]) -> Result<Vec<Vec<F>>> {
    Ok(encode_source(params, source)?.states)
}

#[derive(Debug, Clone)]
pub struct StepOutput<F> {
    pub logits: Vec<F>,
    pub probs: Vec<F>,
    pub state: Vec<F>,
    pub attention: Vec<F>,
}

struct StepCache<F> {
    gru: GruCache<F>,
    state: Vec<F>,
    /// `tanh(W_enc h_j + W_dec s)` per source position.
    act: Vec<Vec<F>>,
    attention: Vec<F>,
    readout: Vec<F>,
    logits: Vec<F>,
    probs: Vec<F>,
}

fn step_forward<F: Scalar>(p: &Seq2SeqParams<F>, enc: &EncodedSource<F>, state: &[F], prev: u32) -> StepCache<F> {
    let (s, gru) = gru_forward(&p.dec, p.tgt_embed.row(prev as usize), state);
    let q = p.att_dec.mul_vec(&s);
    let act: Vec<Vec<F>> =
        enc.keys.iter().map(|k| k.iter().zip(&q).map(|(&a, &b)| (a + b).tanh()).collect()).collect();
    let scores: Vec<F> = act.iter().map(|u| dot(&p.att_v.data, u)).collect();
    let attention = softmax(&scores);
    let hidden = s.len();
    let mut readout = Vec::with_capacity(2 * hidden);
    readout.extend_from_slice(&s);
    readout.resize(2 * hidden, F::zero());
    for (a, h) in attention.iter().zip(&enc.states) {
        axpy(*a, h, &mut readout[hidden..]);
    }
    let mut logits = p.out_b.data.clone();
    p.out_w.mul_vec_acc(&readout, &mut logits);
    let probs = softmax(&logits);
    StepCache { gru, state: s, act, attention, readout, logits, probs }
}

/// One decoder step from `state` after emitting `prev`.
pub fn decode_step<F: Scalar>(
    params: &Seq2SeqParams<F>,
    enc: &EncodedSource<F>,
    state: &[F],
    prev: u32,
) -> Result<StepOutput<F>> {
    check_ids(params.dims, &[prev])?;
    if state.len() != params.dims.hidden {
        return Err(Error::contract(format!("decoder state has {} dims, expected {}", state.len(), params.dims.hidden)));
    }
    let c = step_forward(params, enc, state, prev);
    Ok(StepOutput { logits: c.logits, probs: c.probs, state: c.state, attention: c.attention })
}

/// Summed token cross-entropy of one example under teacher forcing.
pub fn example_loss<F: Scalar>(params: &Seq2SeqParams<F>, ex: &TrainingExample) -> Result<f64> {
    forward_backward(params, ex, None, None)
}

/// Summed token cross-entropy; adds `scale * d(loss)/d(params)` into `grad`.
pub fn loss_and_gradient<F: Scalar>(
    params: &Seq2SeqParams<F>,
    ex: &TrainingExample,
    grad: &mut Seq2SeqParams<F>,
    scale: F,
    fault: Option<GradientFault>,
) -> Result<f64> {
    forward_backward(params, ex, Some((grad, scale)), fault)
}

fn forward_backward<F: Scalar>(
    p: &Seq2SeqParams<F>,
    ex: &TrainingExample,
    grad: Option<(&mut Seq2SeqParams<F>, F)>,
    fault: Option<GradientFault>,
) -> Result<f64> {
    check_ids(p.dims, &ex.target)?;
    let enc = encode_source(p, &ex.source)?;
    let inputs: Vec<u32> = std::iter::once(BOS).chain(ex.target.iter().copied()).collect();
    let outputs: Vec<u32> = ex.target.iter().copied().chain(std::iter::once(EOS)).collect();

    let mut steps = Vec::with_capacity(outputs.len());
    let mut state = enc.initial_state();
    let mut loss = 0.0;
    for (&prev, &gold) in inputs.iter().zip(&outputs) {
        let c = step_forward(p, &enc, &state, prev);
        loss -= c.probs[gold as usize].f64().ln();
        state = c.state.clone();
        steps.push(c);
    }
    let Some((g, scale)) = grad else { return Ok(loss) };

    let hidden = p.dims.hidden;
    let src_len = enc.states.len();
    let mut d_states = vec![vec![F::zero(); hidden]; src_len];
    let mut d_keys = vec![vec![F::zero(); hidden]; src_len];
    let mut ds_next = vec![F::zero(); hidden];

    for (t, c) in steps.iter().enumerate().rev() {
        let mut dlogits: Vec<F> = c.probs.iter().map(|&x| x * scale).collect();
        dlogits[outputs[t] as usize] -= scale;
        axpy(F::one(), &dlogits, &mut g.out_b.data);
        g.out_w.add_outer(&dlogits, &c.readout);
        let mut d_readout = vec![F::zero(); 2 * hidden];
        p.out_w.mul_vec_t_acc(&dlogits, &mut d_readout);

        let mut ds: Vec<F> = d_readout[..hidden].iter().zip(&ds_next).map(|(&a, &b)| a + b).collect();
        let d_context = &d_readout[hidden..];

        let d_att: Vec<F> = enc.states.iter().map(|h| dot(d_context, h)).collect();
        for (dh, &a) in d_states.iter_mut().zip(&c.attention) {
            axpy(a, d_context, dh);
        }

        if fault != Some(GradientFault::DetachAttentionScores) {
            let mean: F = c.attention.iter().zip(&d_att).map(|(&a, &d)| a * d).sum();
            let mut dq = vec![F::zero(); hidden];
            for j in 0..src_len {
                let de = c.attention[j] * (d_att[j] - mean);
                if de == F::zero() {
                    continue;
                }
                axpy(de, &c.act[j], &mut g.att_v.data);
                for i in 0..hidden {
                    let u = c.act[j][i];
                    let dpre = de * p.att_v.data[i] * (F::one() - u * u);
                    d_keys[j][i] += dpre;
                    dq[i] += dpre;
                }
            }
            g.att_dec.add_outer(&dq, &c.state);
            p.att_dec.mul_vec_t_acc(&dq, &mut ds);
        }

        let mut dx = vec![F::zero(); p.dims.embed];
        let mut ds_prev = vec![F::zero(); hidden];
        gru_backward(&p.dec, &mut g.dec, &c.gru, &ds, &mut dx, &mut ds_prev);
        axpy(F::one(), &dx, g.tgt_embed.row_mut(inputs[t] as usize));
        ds_next = ds_prev;
    }

    axpy(F::one(), &ds_next, &mut d_states[src_len - 1]);
    for (j, dk) in d_keys.iter().enumerate() {
        g.att_enc.add_outer(dk, &enc.states[j]);
        p.att_enc.mul_vec_t_acc(dk, &mut d_states[j]);
    }

    let mut dh_next = vec![F::zero(); hidden];
    for t in (0..src_len).rev() {
        let dh: Vec<F> = d_states[t].iter().zip(&dh_next).map(|(&a, &b)| a + b).collect();
        let mut dx = vec![F::zero(); p.dims.embed];
        let mut dh_prev = vec![F::zero(); hidden];
        gru_backward(&p.enc, &mut g.enc, &enc.caches[t], &dh, &mut dx, &mut dh_prev);
        axpy(F::one(), &dx, g.src_embed.row_mut(ex.source[t] as usize));
        dh_next = dh_prev;
    }
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Seq2SeqParams<f64> {
        Seq2SeqParams::init(Dims::new(7, 3, 2), 11)
    }

    #[test]
    fn bare_source_gives_two_finite_states() {
        let s = encode_sequence(&tiny(), &[BOS, EOS]).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.iter().flatten().all(|x| x.is_finite()));
    }

    #[test]
    fn encoder_is_causal() {
        let p = tiny();
        let full = encode_sequence(&p, &[1, 6, 5, 4, 2]).unwrap();
        for k in 1..=5 {
            let prefix = encode_sequence(&p, &[1, 6, 5, 4, 2][..k]).unwrap();
            assert_eq!(prefix[..], full[..k]);
        }
    }

    #[test]
    fn rejects_out_of_range_ids() {
        let p = tiny();
        assert!(encode_sequence(&p, &[1, 7]).is_err());
        let enc = encode_source(&p, &[1, 2]).unwrap();
        assert!(decode_step(&p, &enc, &enc.initial_state(), 9).is_err());
        assert!(decode_step(&p, &enc, &[0.0; 3], 1).is_err());
    }

    #[test]
    fn single_state_gets_full_attention() {
        let p = tiny();
        let enc = encode_source(&p, &[1]).unwrap();
        let out = decode_step(&p, &enc, &enc.initial_state(), BOS).unwrap();
        assert_eq!(out.attention, vec![1.0]);
    }

    #[test]
    fn distributions_are_normalized() {
        let p = Seq2SeqParams::<f64>::init(Dims::new(12, 4, 5), 3);
        let enc = encode_source(&p, &[1, 7, 8, 9, 2]).unwrap();
        let mut state = enc.initial_state();
        let mut prev = BOS;
        for _ in 0..6 {
            let out = decode_step(&p, &enc, &state, prev).unwrap();
            assert!((out.attention.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!((out.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(out.attention.iter().all(|&a| a >= 0.0));
            assert!(out.probs.iter().all(|&x| x > 0.0 && x < 1.0));
            prev = (prev + 3) % 12;
            state = out.state;
        }
    }

    #[test]
    fn loss_matches_step_by_step_decoding() {
        let p = tiny();
        let ex = TrainingExample::new(&[6, 5], &[4, 6]);
        let enc = encode_source(&p, &ex.source).unwrap();
        let mut state = enc.initial_state();
        let mut expected = 0.0;
        for (prev, gold) in [(BOS, 4), (4, 6), (6, EOS)] {
            let out = decode_step(&p, &enc, &state, prev).unwrap();
            expected -= out.probs[gold as usize].ln();
            state = out.state;
        }
        assert!((example_loss(&p, &ex).unwrap() - expected).abs() < 1e-12);
    }
}
