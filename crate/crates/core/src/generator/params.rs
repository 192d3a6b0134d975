//! Model weights and the binary checkpoint format.
//!
//! Checkpoint layout (all integers `u32` little-endian):
//!
//! ```text
//! magic  "CGS2S\0\0\0" (8 bytes)
//! version (= 1)
//! vocab, embed, hidden
//! tensor count (= 25)
//! per tensor, in TENSOR_NAMES order: rows, cols, rows*cols f32 little-endian
//! ```

use std::io::{Read, Write};

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::generator::tensor::{Mat, Scalar};
use crate::rng;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CGS2S\0\0\0";
pub const CHECKPOINT_VERSION: u32 = 1;
pub const INIT_RANGE: f64 = 0.08;

/// Tensor order used by checkpoints, initialization and gradient checks.
pub const TENSOR_NAMES: [&str; 25] = [
    "src_embed",
    "tgt_embed",
    "enc.w_z",
    "enc.w_r",
    "enc.w_h",
    "enc.u_z",
    "enc.u_r",
    "enc.u_h",
    "enc.b_z",
    "enc.b_r",
    "enc.b_h",
    "dec.w_z",
    "dec.w_r",
    "dec.w_h",
    "dec.u_z",
    "dec.u_r",
    "dec.u_h",
    "dec.b_z",
    "dec.b_r",
    "dec.b_h",
    "att.w_enc",
    "att.w_dec",
    "att.v",
    "out.w",
    "out.b",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
}

impl Dims {
    pub fn new(vocab: usize, embed: usize, hidden: usize) -> Self {
        Dims { vocab, embed, hidden }
    }

    /// Vocabulary 10,000, embedding 512, hidden 512.
    pub fn paper() -> Self {
        Dims::new(10_000, 512, 512)
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("vocab-cap", self.vocab), ("embed-dim", self.embed), ("hidden-dim", self.hidden)] {
            if v == 0 {
                return Err(Error::config(field, "must be positive"));
            }
        }
        if self.vocab < crate::corpus::RESERVED_TOKENS.len() {
            return Err(Error::config("vocab-cap", "must cover the reserved tokens"));
        }
        Ok(())
    }
}

/// Gated recurrent cell: update gate `z`, reset gate `r`, candidate `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams<F> {
    pub w_z: Mat<F>,
    pub w_r: Mat<F>,
    pub w_h: Mat<F>,
    pub u_z: Mat<F>,
    pub u_r: Mat<F>,
    pub u_h: Mat<F>,
    pub b_z: Mat<F>,
    pub b_r: Mat<F>,
    pub b_h: Mat<F>,
}

impl<F: Scalar> GruParams<F> {
    fn zeros(input: usize, hidden: usize) -> Self {
        GruParams {
            w_z: Mat::zeros(hidden, input),
            w_r: Mat::zeros(hidden, input),
            w_h: Mat::zeros(hidden, input),
            u_z: Mat::zeros(hidden, hidden),
            u_r: Mat::zeros(hidden, hidden),
            u_h: Mat::zeros(hidden, hidden),
            b_z: Mat::zeros(hidden, 1),
            b_r: Mat::zeros(hidden, 1),
            b_h: Mat::zeros(hidden, 1),
        }
    }

    fn tensors(&self) -> [&Mat<F>; 9] {
        [&self.w_z, &self.w_r, &self.w_h, &self.u_z, &self.u_r, &self.u_h, &self.b_z, &self.b_r, &self.b_h]
    }

    fn tensors_mut(&mut self) -> [&mut Mat<F>; 9] {
        [
            &mut self.w_z,
            &mut self.w_r,
            &mut self.w_h,
            &mut self.u_z,
            &mut self.u_r,
            &mut self.u_h,
            &mut self.b_z,
            &mut self.b_r,
            &mut self.b_h,
        ]
    }
}

/// All weights of the attention encoder-decoder. The same shape doubles as
/// the gradient and the optimizer accumulator container.
#[derive(Debug, Clone, PartialEq)]
pub struct Seq2SeqParams<F> {
    pub dims: Dims,
    pub src_embed: Mat<F>,
    pub tgt_embed: Mat<F>,
    pub enc: GruParams<F>,
    pub dec: GruParams<F>,
    /// `[H x H]`, applied to encoder states.
    pub att_enc: Mat<F>,
    /// `[H x H]`, applied to the decoder state.
    pub att_dec: Mat<F>,
    /// `[H x 1]`
    pub att_v: Mat<F>,
    /// `[V x 2H]` over `[decoder state; context]`.
    pub out_w: Mat<F>,
    pub out_b: Mat<F>,
}

impl<F: Scalar> Seq2SeqParams<F> {
    pub fn zeros(dims: Dims) -> Self {
        let Dims { vocab: v, embed: e, hidden: h } = dims;
        Seq2SeqParams {
            dims,
            src_embed: Mat::zeros(v, e),
            tgt_embed: Mat::zeros(v, e),
            enc: GruParams::zeros(e, h),
            dec: GruParams::zeros(e, h),
            att_enc: Mat::zeros(h, h),
            att_dec: Mat::zeros(h, h),
            att_v: Mat::zeros(h, 1),
            out_w: Mat::zeros(v, 2 * h),
            out_b: Mat::zeros(v, 1),
        }
    }

    /// Every weight drawn uniformly from `[-0.08, 0.08)`, tensors filled in
    /// [`TENSOR_NAMES`] order.
    pub fn init(dims: Dims, seed: u64) -> Self {
        let mut p = Self::zeros(dims);
        let mut rng = rng::seeded(seed);
        for t in p.tensors_mut() {
            for x in &mut t.data {
                *x = F::of(rng.random_range(-INIT_RANGE..INIT_RANGE));
            }
        }
        p
    }

    pub fn tensors(&self) -> Vec<&Mat<F>> {
        let mut v = vec![&self.src_embed, &self.tgt_embed];
        v.extend(self.enc.tensors());
        v.extend(self.dec.tensors());
        v.extend([&self.att_enc, &self.att_dec, &self.att_v, &self.out_w, &self.out_b]);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Mat<F>> {
        let mut v = vec![&mut self.src_embed, &mut self.tgt_embed];
        v.extend(self.enc.tensors_mut());
        v.extend(self.dec.tensors_mut());
        v.extend([&mut self.att_enc, &mut self.att_dec, &mut self.att_v, &mut self.out_w, &mut self.out_b]);
        v
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.data.iter().all(|x| x.is_finite()))
    }

    pub fn cast<G: Scalar>(&self) -> Seq2SeqParams<G> {
        let mut out = Seq2SeqParams::<G>::zeros(self.dims);
        for (dst, src) in out.tensors_mut().into_iter().zip(self.tensors()) {
            *dst = src.cast();
        }
        out
    }

    pub fn fill_zero(&mut self) {
        self.tensors_mut().into_iter().for_each(Mat::fill_zero);
    }

    /// `self += other`
    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.data.iter_mut().zip(&b.data).for_each(|(x, &y)| *x += y);
        }
    }

    pub fn scale(&mut self, k: F) {
        for t in self.tensors_mut() {
            t.data.iter_mut().for_each(|x| *x *= k);
        }
    }

    pub fn norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.data.iter())
            .map(|x| x.f64() * x.f64())
            .sum::<f64>()
            .sqrt()
    }

    pub fn write_checkpoint<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(CHECKPOINT_MAGIC)?;
        let header = [CHECKPOINT_VERSION, self.dims.vocab as u32, self.dims.embed as u32, self.dims.hidden as u32, 25];
        for h in header {
            out.write_all(&h.to_le_bytes())?;
        }
        for t in self.tensors() {
            out.write_all(&(t.rows as u32).to_le_bytes())?;
            out.write_all(&(t.cols as u32).to_le_bytes())?;
            let mut buf = Vec::with_capacity(t.data.len() * 4);
            for x in &t.data {
                buf.extend_from_slice(&(x.f64() as f32).to_le_bytes());
            }
            out.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let read_u32 = |input: &mut R| -> Result<u32> {
            let mut b = [0u8; 4];
            input.read_exact(&mut b)?;
            Ok(u32::from_le_bytes(b))
        };
        let version = read_u32(&mut input)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let dims = Dims::new(
            read_u32(&mut input)? as usize,
            read_u32(&mut input)? as usize,
            read_u32(&mut input)? as usize,
        );
        dims.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;
        if read_u32(&mut input)? != TENSOR_NAMES.len() as u32 {
            return Err(Error::Checkpoint("unexpected tensor count".into()));
        }
        let mut p = Self::zeros(dims);
        for (name, t) in TENSOR_NAMES.iter().zip(p.tensors_mut()) {
            let (rows, cols) = (read_u32(&mut input)? as usize, read_u32(&mut input)? as usize);
            if (rows, cols) != (t.rows, t.cols) {
                return Err(Error::Checkpoint(format!(
                    "{name}: shape {rows}x{cols}, expected {}x{}",
                    t.rows, t.cols
                )));
            }
            let mut buf = vec![0u8; rows * cols * 4];
            input.read_exact(&mut buf)?;
            for (x, b) in t.data.iter_mut().zip(buf.chunks_exact(4)) {
                *x = F::of(f32::from_le_bytes(b.try_into().unwrap()) as f64);
            }
        }
        if !p.is_finite() {
            return Err(Error::Checkpoint("non-finite weights".into()));
        }
        Ok(p)
    }
}
