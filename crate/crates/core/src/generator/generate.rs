use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chunk::ParsedSentence;
use crate::corpus::{encode, Vocabulary, BOS, EOS};
use crate::error::{Error, Result};
use crate::extract::ExtractionRecord;
use crate::generator::beam::{beam_decode, rerank_duplication_penalty, Candidate, DuplicationPenalty};
use crate::generator::params::Seq2SeqParams;
use crate::mark::{
    detect_insertion_position_with, marker_position, render_marked, strip_markers, ChildRule, MarkedTarget, INS_CLOSE,
    INS_OPEN,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenerationMode {
    /// Raw simple sentence in, complex sentence out.
    End2End,
    /// Rule-marked simple sentence in, complex sentence (or clause) out.
    Pipeline,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeConfig {
    pub beam_width: usize,
    pub nbest: usize,
    pub penalty: DuplicationPenalty,
    /// Output cap beyond the input length.
    pub max_extra: usize,
    pub child_rule: ChildRule,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            beam_width: 10,
            nbest: 1,
            penalty: DuplicationPenalty::new(0.0).expect("zero lambda is valid"),
            max_extra: 40,
            child_rule: ChildRule::default(),
        }
    }
}

/// Output for one simple sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generated {
    pub id: String,
    /// What the model was fed (marked in pipeline mode).
    pub input: Vec<String>,
    /// Surviving n-best, best first.
    pub candidates: Vec<Candidate>,
    /// Pipeline candidates dropped for not being a single insertion into the input.
    pub violations: usize,
}

impl Generated {
    /// Best candidate, or the unmarked input when nothing survived.
    pub fn output(&self) -> Vec<String> {
        match self.candidates.first() {
            Some(c) => c.tokens.clone(),
            None => strip_markers(&self.input),
        }
    }
}

/// Whether `output` is `base` with one non-empty run inserted at a single position.
pub fn inserted_once<S: AsRef<str>, T: AsRef<str>>(base: &[S], output: &[T]) -> bool {
    if output.len() <= base.len() {
        return false;
    }
    let prefix = base.iter().zip(output).take_while(|(a, b)| a.as_ref() == b.as_ref()).count();
    let suffix = base.iter().rev().zip(output.iter().rev()).take_while(|(a, b)| a.as_ref() == b.as_ref()).count();
    prefix + suffix >= base.len()
}

pub struct Generator<'a> {
    pub params: &'a Seq2SeqParams<f32>,
    pub vocab: &'a Vocabulary,
    pub mode: GenerationMode,
    pub target: MarkedTarget,
    pub config: DecodeConfig,
}

impl Generator<'_> {
    /// Surfaces fed to the encoder, without `<s>`/`</s>`.
    pub fn model_input(&self, sentence: &ParsedSentence) -> Result<Vec<String>> {
        match self.mode {
            GenerationMode::End2End => Ok(sentence.surfaces()),
            GenerationMode::Pipeline => {
                let mark = detect_insertion_position_with(sentence, self.config.child_rule)?;
                render_marked(sentence, &mark)
            }
        }
    }

    /// Fails with `NoInsertionPoint` in pipeline mode when the sentence has no noun.
    pub fn generate(&self, sentence: &ParsedSentence) -> Result<Generated> {
        let input = self.model_input(sentence)?;
        self.generate_from(sentence.id(), input)
    }

    pub fn generate_from(&self, id: &str, input: Vec<String>) -> Result<Generated> {
        let encoded = encode(&input, self.vocab);
        let mut source = Vec::with_capacity(input.len() + 2);
        source.push(BOS);
        source.extend_from_slice(&encoded.ids);
        source.push(EOS);
        let mut surfaces = Vec::with_capacity(input.len() + 2);
        surfaces.push("<s>".to_string());
        surfaces.extend(input.iter().cloned());
        surfaces.push("</s>".to_string());

        let hyps = beam_decode(self.params, &source, self.config.beam_width, input.len() + self.config.max_extra)?;
        let plain = strip_markers(&input);
        let mut candidates = Vec::with_capacity(hyps.len());
        for h in &hyps {
            let mut tokens = h.surfaces(self.vocab, &surfaces)?;
            if self.mode == GenerationMode::Pipeline && self.target == MarkedTarget::ClauseOnly {
                let at = marker_position(&input).unwrap_or(0);
                tokens = plain[..at].iter().cloned().chain(strip_markers(&tokens)).chain(plain[at..].iter().cloned()).collect();
            }
            candidates.push(Candidate::new(tokens, h.log_prob));
        }
        let mut candidates = rerank_duplication_penalty(candidates, &self.config.penalty);
        let mut violations = 0;
        if self.mode == GenerationMode::Pipeline {
            let before = candidates.len();
            candidates.retain(|c| inserted_once(&plain, &c.tokens));
            violations = before - candidates.len();
        }
        candidates.truncate(self.config.nbest.max(1));
        Ok(Generated { id: id.to_string(), input, candidates, violations })
    }

    /// One result per sentence, in input order.
    pub fn generate_all(&self, sentences: &[ParsedSentence]) -> Vec<Result<Generated>> {
        sentences.par_iter().map(|s| self.generate(s)).collect()
    }
}

/// Training clauses indexed by the noun they modified.
#[derive(Debug, Clone, Default)]
pub struct ClauseTable {
    by_noun: HashMap<String, HashMap<Vec<String>, usize>>,
    global: HashMap<Vec<String>, usize>,
}

fn most_frequent(counts: &HashMap<Vec<String>, usize>) -> Option<&Vec<String>> {
    counts.iter().max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0))).map(|(c, _)| c)
}

impl ClauseTable {
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a ExtractionRecord>) -> Self {
        let mut table = ClauseTable::default();
        for r in records {
            let clause = r.clause_surfaces();
            *table.by_noun.entry(r.modified_noun()).or_default().entry(clause.clone()).or_default() += 1;
            *table.global.entry(clause).or_default() += 1;
        }
        table
    }

    pub fn is_empty(&self) -> bool {
        self.global.is_empty()
    }

    /// Most frequent clause for `noun` (fewest-first lexicographic on ties),
    /// falling back to the most frequent clause overall.
    pub fn lookup(&self, noun: &str) -> Option<&Vec<String>> {
        self.by_noun.get(noun).and_then(most_frequent).or_else(|| most_frequent(&self.global))
    }
}

/// Inserts the best-matching training clause in front of the marked noun.
pub fn retrieval_baseline<S: AsRef<str>>(marked: &[S], table: &ClauseTable) -> Result<Vec<String>> {
    let open = marked.iter().position(|t| t.as_ref() == INS_OPEN);
    let close = marked.iter().position(|t| t.as_ref() == INS_CLOSE);
    let (open, close) = match (open, close) {
        (Some(o), Some(c)) if o < c => (o, c),
        _ => return Err(Error::contract("input carries no well-formed insertion mark")),
    };
    let noun: String = marked[open + 1..close].iter().map(AsRef::as_ref).collect();
    let clause = table.lookup(&noun).ok_or_else(|| Error::Sizing("clause table is empty".into()))?;
    let plain = strip_markers(marked);
    Ok(plain[..open].iter().chain(clause).chain(&plain[open..]).cloned().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn single_insertion_check() {
        let base = w("車 に 乗り まし た");
        assert!(inserted_once(&base, &w("彼 に 借り た 車 に 乗り まし た")));
        assert!(inserted_once(&base, &w("車 に 乗り まし た よ")));
        assert!(!inserted_once(&base, &base));
        assert!(!inserted_once(&base, &w("赤い 車 に 速く 乗り まし た")));
        assert!(!inserted_once(&base, &w("車 に 乗り")));
    }
}
