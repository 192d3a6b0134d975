use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::chunk::is_reserved_surface;
use crate::corpus::{decode, Vocabulary, BOS, EOS};
use crate::error::{Error, Result};
use crate::generator::model::{decode_step, encode_source, EncodedSource};
use crate::generator::params::Seq2SeqParams;
use crate::generator::tensor::{log_softmax_f64, Scalar};

/// A (possibly partial) output sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    /// Emitted ids, `</s>` included when finished by it.
    pub tokens: Vec<u32>,
    pub log_prob: f64,
    /// Attention weights over the source, one row per emitted token.
    pub attention: Vec<Vec<f64>>,
    pub finished: bool,
}

impl Hypothesis {
    /// Surfaces with `<unk>` replaced through attention over `source`.
    pub fn surfaces<S: AsRef<str>>(&self, vocab: &Vocabulary, source: &[S]) -> Result<Vec<String>> {
        decode(&self.tokens, vocab, source, Some(&self.attention))
    }
}

/// Score descending, then token sequence ascending (smaller id first,
/// shorter first on a shared prefix).
fn rank(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.log_prob.total_cmp(&a.log_prob).then_with(|| a.tokens.cmp(&b.tokens))
}

fn check_source(source: &[u32]) -> Result<()> {
    if source.is_empty() {
        return Err(Error::contract("empty source"));
    }
    Ok(())
}

/// Arg-max decoding; lower id wins exact ties.
pub fn greedy_decode<F: Scalar>(params: &Seq2SeqParams<F>, source: &[u32], max_len: usize) -> Result<Hypothesis> {
    check_source(source)?;
    let enc = encode_source(params, source)?;
    let mut state = enc.initial_state();
    let mut hyp = Hypothesis { tokens: Vec::new(), log_prob: 0.0, attention: Vec::new(), finished: false };
    let mut prev = BOS;
    while hyp.tokens.len() < max_len {
        let out = decode_step(params, &enc, &state, prev)?;
        let lp = log_softmax_f64(&out.logits);
        let (best, &score) = lp
            .iter()
            .enumerate()
            .fold(None, |acc: Option<(usize, &f64)>, (i, s)| match acc {
                Some((_, b)) if *b >= *s => acc,
                _ => Some((i, s)),
            })
            .expect("non-empty vocabulary");
        hyp.tokens.push(best as u32);
        hyp.log_prob += score;
        hyp.attention.push(out.attention.iter().map(|a| a.f64()).collect());
        state = out.state;
        prev = best as u32;
        if prev == EOS {
            break;
        }
    }
    hyp.finished = true;
    Ok(hyp)
}

struct Live<F> {
    hyp: Hypothesis,
    state: Vec<F>,
}

/// Length-capped beam search; returns up to `width` finished hypotheses,
/// best first. A hypothesis finishes on `</s>` or after `max_len` tokens.
pub fn beam_decode<F: Scalar>(
    params: &Seq2SeqParams<F>,
    source: &[u32],
    width: usize,
    max_len: usize,
) -> Result<Vec<Hypothesis>> {
    if width == 0 {
        return Err(Error::config("beam_width", "must be at least 1"));
    }
    check_source(source)?;
    let enc: EncodedSource<F> = encode_source(params, source)?;
    let empty = Hypothesis { tokens: Vec::new(), log_prob: 0.0, attention: Vec::new(), finished: max_len == 0 };
    if max_len == 0 {
        return Ok(vec![empty]);
    }
    let mut live = vec![Live { hyp: empty, state: enc.initial_state() }];
    let mut finished: Vec<Hypothesis> = Vec::new();

    while !live.is_empty() {
        let mut candidates: Vec<(Hypothesis, usize)> = Vec::new();
        let mut steps = Vec::with_capacity(live.len());
        for (parent, l) in live.iter().enumerate() {
            let prev = l.hyp.tokens.last().copied().unwrap_or(BOS);
            let out = decode_step(params, &enc, &l.state, prev)?;
            let attention: Vec<f64> = out.attention.iter().map(|a| a.f64()).collect();
            let mut scored: Vec<(usize, f64)> = log_softmax_f64(&out.logits).into_iter().enumerate().collect();
            // At most `width` children of one parent can survive the cut.
            if scored.len() > width {
                scored.select_nth_unstable_by(width - 1, |a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                scored.truncate(width);
            }
            for (id, lp) in scored {
                let mut tokens = l.hyp.tokens.clone();
                tokens.push(id as u32);
                let done = id as u32 == EOS || tokens.len() >= max_len;
                candidates.push((
                    Hypothesis { tokens, log_prob: l.hyp.log_prob + lp, attention: Vec::new(), finished: done },
                    parent,
                ));
            }
            steps.push((out.state, attention));
        }
        candidates.sort_by(|a, b| rank(&a.0, &b.0));
        candidates.truncate(width);

        let mut next = Vec::with_capacity(width);
        for (mut hyp, parent) in candidates {
            hyp.attention = live[parent].hyp.attention.clone();
            hyp.attention.push(steps[parent].1.clone());
            if hyp.finished {
                finished.push(hyp);
            } else {
                next.push(Live { hyp, state: steps[parent].0.clone() });
            }
        }
        live = next;

        // Scores only fall as tokens append, so once the n-best is full and
        // no live hypothesis can beat its worst entry, the search is over.
        if finished.len() >= width {
            finished.sort_by(rank);
            finished.truncate(width);
            let worst = finished[width - 1].log_prob;
            if live.iter().all(|l| l.hyp.log_prob < worst) {
                break;
            }
        }
    }
    finished.sort_by(rank);
    finished.truncate(width);
    Ok(finished)
}

/// Particles and auxiliaries that may repeat freely.
pub const DEFAULT_PARTICLES: &[&str] = &[
    "は", "が", "を", "に", "で", "と", "の", "も", "へ", "や", "から", "まで", "より", "て", "た", "だ", "です", "ます",
    "ない", "れ", "られ", "せ", "い", "し", "な", "か", "ね", "よ", "、", "。",
];

/// Re-ranking penalty for repeated content tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct DuplicationPenalty {
    pub lambda: f64,
    pub stoplist: HashSet<String>,
}

impl DuplicationPenalty {
    pub fn new(lambda: f64) -> Result<Self> {
        Self::with_stoplist(lambda, DEFAULT_PARTICLES.iter().map(|s| s.to_string()))
    }

    pub fn with_stoplist(lambda: f64, stoplist: impl IntoIterator<Item = String>) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::config("dup_lambda", format!("must be finite and non-negative, got {lambda}")));
        }
        Ok(DuplicationPenalty { lambda, stoplist: stoplist.into_iter().collect() })
    }

    /// Occurrences of content tokens beyond their first.
    pub fn repeats<S: AsRef<str>>(&self, tokens: &[S]) -> usize {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in tokens.iter().map(AsRef::as_ref) {
            if !is_reserved_surface(t) && !self.stoplist.contains(t) {
                *counts.entry(t).or_default() += 1;
            }
        }
        counts.values().map(|c| c - 1).sum()
    }

    pub fn adjusted<S: AsRef<str>>(&self, log_prob: f64, tokens: &[S]) -> f64 {
        if self.lambda == 0.0 {
            return log_prob;
        }
        log_prob - self.lambda * self.repeats(tokens) as f64
    }
}

/// A decoded n-best entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub tokens: Vec<String>,
    pub log_prob: f64,
    pub adjusted: f64,
}

impl Candidate {
    pub fn new(tokens: Vec<String>, log_prob: f64) -> Self {
        Candidate { tokens, log_prob, adjusted: log_prob }
    }
}

/// Recomputes adjusted scores and stable-sorts by them, best first. A zero
/// lambda leaves the order untouched.
pub fn rerank_duplication_penalty(mut candidates: Vec<Candidate>, penalty: &DuplicationPenalty) -> Vec<Candidate> {
    for c in &mut candidates {
        c.adjusted = penalty.adjusted(c.log_prob, &c.tokens);
    }
    if penalty.lambda > 0.0 {
        candidates.sort_by(|a, b| b.adjusted.total_cmp(&a.adjusted));
    }
    candidates
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::params::Dims;

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn hero_called_a_hero_loses_to_clean_alternative() {
        let p = DuplicationPenalty::new(1.0).unwrap();
        assert_eq!(p.repeats(&words("英雄 と 呼ば れ た 英雄")), 1);
        let ranked = rerank_duplication_penalty(
            vec![Candidate::new(words("英雄 と 呼ば れ た 英雄"), -3.0), Candidate::new(words("王 と 呼ば れ た 英雄"), -3.5)],
            &p,
        );
        assert_eq!(ranked[0].tokens, words("王 と 呼ば れ た 英雄"));
        assert_eq!(ranked[1].adjusted, -4.0);
    }

    #[test]
    fn zero_lambda_is_identity_and_negative_rejected() {
        let p = DuplicationPenalty::new(0.0).unwrap();
        let c = vec![Candidate::new(words("a a a"), -1.0), Candidate::new(words("b"), -1.0), Candidate::new(words("c"), -2.0)];
        assert_eq!(rerank_duplication_penalty(c.clone(), &p), c);
        assert!(DuplicationPenalty::new(-0.1).is_err());
        assert!(DuplicationPenalty::new(f64::NAN).is_err());
    }

    #[test]
    fn reserved_and_particles_are_free() {
        let p = DuplicationPenalty::new(1.0).unwrap();
        assert_eq!(p.repeats(&words("<ins> 車 </ins> <ins> が が 車 車")), 2);
    }

    #[test]
    fn width_one_matches_greedy() {
        let params = Seq2SeqParams::<f32>::init(Dims::new(9, 4, 4), 2);
        for seed in 0..10u32 {
            let src = [BOS, 6 + seed % 3, 5 + seed % 4, EOS];
            let g = greedy_decode(&params, &src, 12).unwrap();
            let b = beam_decode(&params, &src, 1, 12).unwrap();
            assert_eq!(b.len(), 1);
            assert_eq!(b[0].tokens, g.tokens);
            assert!((b[0].log_prob - g.log_prob).abs() < 1e-12);
        }
    }

    #[test]
    fn nbest_sorted_and_log_probs_consistent() {
        let params = Seq2SeqParams::<f64>::init(Dims::new(6, 3, 3), 9);
        let hyps = beam_decode(&params, &[BOS, 4, EOS], 5, 4).unwrap();
        assert_eq!(hyps.len(), 5);
        assert!(hyps.windows(2).all(|w| w[0].log_prob >= w[1].log_prob));
        for h in &hyps {
            assert!(h.finished);
            assert_eq!(h.attention.len(), h.tokens.len());
            assert!(h.tokens.last() == Some(&EOS) || h.tokens.len() == 4);
        }
        assert!(beam_decode(&params, &[BOS], 0, 4).is_err());
    }
}
