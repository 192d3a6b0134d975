use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::chunk::is_reserved_surface;
use crate::error::{Error, Result};
use crate::eval::kn::{perplexity, NgramLm};

/// Precision floor for n-gram orders with no matches.
pub const BLEU_EPSILON: f64 = 1e-9;

/// Mean number of distinct surfaces per sentence. Markers and other reserved
/// tokens are not counted. An empty corpus scores 0.
pub fn avg_word_types<S: AsRef<str>>(corpus: &[Vec<S>]) -> f64 {
    if corpus.is_empty() {
        return 0.0;
    }
    let total: usize = corpus
        .iter()
        .map(|s| s.iter().map(AsRef::as_ref).filter(|t| !is_reserved_surface(t)).collect::<HashSet<_>>().len())
        .sum();
    total as f64 / corpus.len() as f64
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w.iter().map(AsRef::as_ref).collect()).or_default() += 1;
        }
    }
    counts
}

/// Corpus-level BLEU-4 with one reference per candidate.
pub fn bleu<S: AsRef<str>, T: AsRef<str>>(candidates: &[Vec<S>], references: &[Vec<T>]) -> Result<f64> {
    if candidates.len() != references.len() {
        return Err(Error::contract(format!(
            "{} candidates but {} references",
            candidates.len(),
            references.len()
        )));
    }
    let mut matches = [0usize; 4];
    let mut totals = [0usize; 4];
    let (mut cand_len, mut ref_len) = (0usize, 0usize);
    for (c, r) in candidates.iter().zip(references) {
        cand_len += c.len();
        ref_len += r.len();
        for n in 1..=4 {
            let rc = ngram_counts(r, n);
            for (gram, count) in ngram_counts(c, n) {
                matches[n - 1] += count.min(rc.get(&gram).copied().unwrap_or(0));
                totals[n - 1] += count;
            }
        }
    }
    if cand_len == 0 {
        return Ok(0.0);
    }
    let log_precision: f64 = (0..4)
        .map(|i| {
            let p = if matches[i] == 0 { BLEU_EPSILON } else { matches[i] as f64 / totals[i] as f64 };
            p.ln()
        })
        .sum::<f64>()
        / 4.0;
    let bp = if cand_len > ref_len { 1.0 } else { (1.0 - ref_len as f64 / cand_len as f64).exp() };
    Ok(bp * log_precision.exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub perplexity: f64,
    pub avg_word_types: f64,
    pub sentences: usize,
    /// Share of scored tokens (excluding `</s>`) missing from the LM vocabulary.
    pub oov_rate: f64,
}

pub fn evaluate<S: AsRef<str>>(lm: &NgramLm, generated: &[Vec<S>]) -> Result<MetricReport> {
    let perplexity = perplexity(lm, generated)?;
    let tokens: usize = generated.iter().map(Vec::len).sum();
    let oov = generated.iter().flatten().filter(|t| !lm.contains(t.as_ref())).count();
    Ok(MetricReport {
        perplexity,
        avg_word_types: avg_word_types(generated),
        sentences: generated.len(),
        oov_rate: if tokens == 0 { 0.0 } else { oov as f64 / tokens as f64 },
    })
}
