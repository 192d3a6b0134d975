use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::eval::bleu;
use crate::generator::beam::greedy_decode;
use crate::generator::model::{example_loss, loss_and_gradient, TrainingExample};
use crate::generator::params::Seq2SeqParams;
use crate::generator::tensor::Scalar;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Global gradient-norm clip.
    pub clip_norm: f64,
    pub adagrad_epsilon: f64,
    /// Worker threads for the per-batch gradient. Results are bit-identical
    /// for a fixed value.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { lr: 0.01, batch_size: 128, epochs: 20, seed: 0, clip_norm: 5.0, adagrad_epsilon: 1e-8, threads: 1 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be a positive finite number, got {x}")))
            }
        };
        positive("lr", self.lr)?;
        positive("clip_norm", self.clip_norm)?;
        positive("adagrad_epsilon", self.adagrad_epsilon)?;
        for (field, v) in [("batch_size", self.batch_size), ("epochs", self.epochs), ("threads", self.threads)] {
            if v == 0 {
                return Err(Error::config(field, "must be at least 1"));
            }
        }
        Ok(())
    }
}

/// Adagrad with one squared-gradient accumulator per parameter.
#[derive(Debug, Clone)]
pub struct Adagrad<F> {
    pub accumulators: Seq2SeqParams<F>,
    lr: F,
    epsilon: F,
}

impl<F: Scalar> Adagrad<F> {
    pub fn new(params: &Seq2SeqParams<F>, lr: f64, epsilon: f64) -> Self {
        Adagrad { accumulators: Seq2SeqParams::zeros(params.dims), lr: F::of(lr), epsilon: F::of(epsilon) }
    }

    pub fn step(&mut self, params: &mut Seq2SeqParams<F>, grad: &Seq2SeqParams<F>) {
        for ((p, g), acc) in params.tensors_mut().into_iter().zip(grad.tensors()).zip(self.accumulators.tensors_mut()) {
            for ((p, &g), a) in p.data.iter_mut().zip(&g.data).zip(acc.data.iter_mut()) {
                if g != F::zero() {
                    *a += g * g;
                    *p -= self.lr * g / (a.sqrt() + self.epsilon);
                }
            }
        }
    }
}

/// Held-out sentence scored by greedy decoding after every epoch.
#[derive(Debug, Clone)]
pub struct DevExample {
    /// `<s> ... </s>`
    pub source: Vec<u32>,
    /// Surfaces aligned with `source`, for UNK substitution.
    pub source_surfaces: Vec<String>,
    pub reference: Vec<String>,
}

impl DevExample {
    pub fn new(source_ids: &[u32], source_surfaces: &[String], reference: Vec<String>) -> Self {
        let ex = TrainingExample::new(source_ids, &[]);
        let mut surfaces = Vec::with_capacity(source_surfaces.len() + 2);
        surfaces.push("<s>".to_string());
        surfaces.extend_from_slice(source_surfaces);
        surfaces.push("</s>".to_string());
        DevExample { source: ex.source, source_surfaces: surfaces, reference }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    /// Mean per-token cross-entropy over the epoch's updates.
    pub loss: f64,
    pub dev_bleu: f64,
}

/// Epoch with the highest dev BLEU; the earliest one on ties.
pub fn select_best(reports: &[EpochReport]) -> Option<&EpochReport> {
    reports.iter().fold(None, |best: Option<&EpochReport>, r| match best {
        Some(b) if b.dev_bleu >= r.dev_bleu => Some(b),
        _ => Some(r),
    })
}

/// Mean per-token cross-entropy over `examples`.
pub fn corpus_loss<F: Scalar>(params: &Seq2SeqParams<F>, examples: &[TrainingExample]) -> Result<f64> {
    let mut total = 0.0;
    let mut tokens = 0;
    for ex in examples {
        total += example_loss(params, ex)?;
        tokens += ex.target_len();
    }
    Ok(if tokens == 0 { 0.0 } else { total / tokens as f64 })
}

/// Corpus BLEU of greedy decodes against the dev references.
pub fn dev_bleu(params: &Seq2SeqParams<f32>, dev: &[DevExample], vocab: &Vocabulary, max_extra: usize) -> Result<f64> {
    if dev.is_empty() {
        return Ok(0.0);
    }
    let outputs: Vec<Vec<String>> = dev
        .par_iter()
        .map(|d| {
            let hyp = greedy_decode(params, &d.source, d.source.len() + max_extra)?;
            hyp.surfaces(vocab, &d.source_surfaces)
        })
        .collect::<Result<_>>()?;
    let refs: Vec<Vec<String>> = dev.iter().map(|d| d.reference.clone()).collect();
    bleu(&outputs, &refs)
}

/// Gradient of the mean token loss over `batch`, summed in a fixed order
/// over `threads` contiguous shards.
fn batch_gradient<F: Scalar>(
    params: &Seq2SeqParams<F>,
    batch: &[&TrainingExample],
    threads: usize,
) -> Result<(Seq2SeqParams<F>, f64)> {
    let tokens: usize = batch.iter().map(|e| e.target_len()).sum();
    let scale = F::of(1.0 / tokens as f64);
    let shard = batch.len().div_ceil(threads).max(1);
    let shards: Vec<(Seq2SeqParams<F>, f64)> = batch
        .par_chunks(shard)
        .map(|part| {
            let mut grad = Seq2SeqParams::zeros(params.dims);
            let mut loss = 0.0;
            for ex in part {
                loss += loss_and_gradient(params, ex, &mut grad, scale, None)?;
            }
            Ok((grad, loss))
        })
        .collect::<Result<_>>()?;
    let mut iter = shards.into_iter();
    let (mut grad, mut loss) = iter.next().expect("non-empty batch");
    for (g, l) in iter {
        grad.add_assign(&g);
        loss += l;
    }
    Ok((grad, loss))
}

/// Teacher-forced training with Adagrad.
///
/// `on_epoch` sees each epoch's report and parameters (for checkpointing).
/// Dev BLEU uses greedy decoding with a cap of source length + `max_extra`.
#[allow(clippy::too_many_arguments)]
pub fn train<C>(
    params: &mut Seq2SeqParams<f32>,
    examples: &[TrainingExample],
    dev: &[DevExample],
    vocab: &Vocabulary,
    config: &TrainConfig,
    max_extra: usize,
    mut on_epoch: C,
) -> Result<Vec<EpochReport>>
where
    C: FnMut(&EpochReport, &Seq2SeqParams<f32>) -> Result<()>,
{
    config.validate()?;
    if examples.is_empty() {
        return Err(Error::Sizing("no training examples".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::config("threads", e.to_string()))?;
    let mut rng = rng::seeded(config.seed);
    let mut optimizer = Adagrad::new(params, config.lr, config.adagrad_epsilon);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut reports = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut tokens = 0usize;
        for (b, idx) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&TrainingExample> = idx.iter().map(|&i| &examples[i]).collect();
            let (mut grad, loss) = pool.install(|| batch_gradient(params, &batch, config.threads))?;
            let norm = grad.norm();
            if !loss.is_finite() || !norm.is_finite() {
                return Err(Error::Divergence { epoch, batch: b, loss });
            }
            if norm > config.clip_norm {
                grad.scale((config.clip_norm / norm) as f32);
            }
            optimizer.step(params, &grad);
            total += loss;
            tokens += batch.iter().map(|e| e.target_len()).sum::<usize>();
        }
        let bleu = pool.install(|| dev_bleu(params, dev, vocab, max_extra))?;
        let report = EpochReport { epoch, loss: total / tokens as f64, dev_bleu: bleu };
        log::info!("epoch {epoch}: loss {:.4}, dev BLEU {:.4}", report.loss, report.dev_bleu);
        on_epoch(&report, params)?;
        reports.push(report);
    }
    Ok(reports)
}
