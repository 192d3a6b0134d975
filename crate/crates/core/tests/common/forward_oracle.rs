//! Straight-line forward pass of the GRU attention encoder-decoder over raw
//! parameter buffers, written without the library's matrix helpers.

use clausegen::generator::params::GruParams;
use clausegen::generator::tensor::Mat;
use clausegen::generator::Seq2SeqParams;

fn mv(m: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    (0..m.rows).map(|i| (0..m.cols).map(|j| m.data[i * m.cols + j] * x[j]).sum()).collect()
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn gru(p: &GruParams<f64>, x: &[f64], h: &[f64]) -> Vec<f64> {
    let (wz, uz) = (mv(&p.w_z, x), mv(&p.u_z, h));
    let (wr, ur) = (mv(&p.w_r, x), mv(&p.u_r, h));
    let n_h = h.len();
    let z: Vec<f64> = (0..n_h).map(|i| sig(wz[i] + uz[i] + p.b_z.data[i])).collect();
    let r: Vec<f64> = (0..n_h).map(|i| sig(wr[i] + ur[i] + p.b_r.data[i])).collect();
    let rh: Vec<f64> = (0..n_h).map(|i| r[i] * h[i]).collect();
    let (wh, uh) = (mv(&p.w_h, x), mv(&p.u_h, &rh));
    (0..n_h)
        .map(|i| {
            let n = (wh[i] + uh[i] + p.b_h.data[i]).tanh();
            (1.0 - z[i]) * h[i] + z[i] * n
        })
        .collect()
}

pub fn encode(p: &Seq2SeqParams<f64>, ids: &[u32]) -> Vec<Vec<f64>> {
    let mut h = vec![0.0; p.dims.hidden];
    let mut out = Vec::new();
    for &id in ids {
        h = gru(&p.enc, p.src_embed.row(id as usize), &h);
        out.push(h.clone());
    }
    out
}

/// `(distribution, new state, attention)` for one decoder step.
pub fn step(p: &Seq2SeqParams<f64>, enc: &[Vec<f64>], state: &[f64], prev: u32) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let s = gru(&p.dec, p.tgt_embed.row(prev as usize), state);
    let q = mv(&p.att_dec, &s);
    let scores: Vec<f64> = enc
        .iter()
        .map(|h| {
            let k = mv(&p.att_enc, h);
            (0..s.len()).map(|i| p.att_v.data[i] * (k[i] + q[i]).tanh()).sum()
        })
        .collect();
    let z: f64 = scores.iter().map(|e| e.exp()).sum();
    let att: Vec<f64> = scores.iter().map(|e| e.exp() / z).collect();
    let mut readout = s.clone();
    readout.extend((0..s.len()).map(|i| enc.iter().zip(&att).map(|(h, a)| a * h[i]).sum::<f64>()));
    let logits: Vec<f64> = mv(&p.out_w, &readout).iter().zip(&p.out_b.data).map(|(a, b)| a + b).collect();
    let zl: f64 = logits.iter().map(|l| l.exp()).sum();
    (logits.iter().map(|l| l.exp() / zl).collect(), s, att)
}
