//! Pseudo-parallel corpus construction: pairs, dedup, splitting, vocabulary
//! and id encoding.

use std::collections::{HashMap, HashSet};
use std::io::{self, BufRead, Write};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::chunk::is_reserved_surface;
use crate::error::{Error, Result};
use crate::extract::ExtractionRecord;
use crate::mark::{build_marked_pair, MarkedTarget, INS_CLOSE, INS_OPEN};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PairMode {
    #[serde(rename = "END2END")]
    End2End,
    #[serde(rename = "MARKED")]
    Marked,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelPair {
    pub id: String,
    pub mode: PairMode,
    pub input: Vec<String>,
    pub output: Vec<String>,
    /// Concatenated clause surface; the dedup key.
    pub clause: String,
}

impl ParallelPair {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("pair serialization is infallible")
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        let pair: ParallelPair = serde_json::from_str(line)?;
        pair.check()?;
        Ok(pair)
    }

    fn check(&self) -> Result<()> {
        let opens = self.input.iter().filter(|t| *t == INS_OPEN).count();
        let closes = self.input.iter().filter(|t| *t == INS_CLOSE).count();
        let ok = match self.mode {
            PairMode::End2End => opens == 0 && closes == 0,
            PairMode::Marked => {
                let o = self.input.iter().position(|t| t == INS_OPEN);
                let c = self.input.iter().position(|t| t == INS_CLOSE);
                opens == 1 && closes == 1 && matches!((o, c), (Some(o), Some(c)) if o + 1 < c)
            }
        };
        if !ok {
            return Err(Error::Validation(format!("pair {}: bad insertion markers for {:?}", self.id, self.mode)));
        }
        Ok(())
    }
}

pub fn build_end2end_pair(record: &ExtractionRecord) -> ParallelPair {
    ParallelPair {
        id: record.id().to_string(),
        mode: PairMode::End2End,
        input: record.simple.surfaces(),
        output: record.complex_surfaces(),
        clause: record.clause_string(),
    }
}

/// Which kind of training pairs a corpus build produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusMode {
    End2End,
    Marked(MarkedTarget),
}

impl CorpusMode {
    pub fn build_pair(self, record: &ExtractionRecord) -> Result<ParallelPair> {
        match self {
            CorpusMode::End2End => Ok(build_end2end_pair(record)),
            CorpusMode::Marked(target) => build_marked_pair(record, target),
        }
    }
}

/// Keeps the first pair for each distinct clause string.
pub fn dedup_by_clause(pairs: Vec<ParallelPair>) -> Vec<ParallelPair> {
    let mut seen = HashSet::new();
    pairs.into_iter().filter(|p| seen.insert(p.clause.clone())).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSplit {
    pub train: Vec<ParallelPair>,
    /// The records behind `train`, in the same order.
    pub train_records: Vec<ExtractionRecord>,
    pub dev: Vec<ExtractionRecord>,
    pub test: Vec<ExtractionRecord>,
    /// Ids of training pairs removed by clause deduplication.
    pub deduplicated: Vec<String>,
}

/// Shuffles, carves off test then dev, turns the rest into deduplicated
/// training pairs.
pub fn split_corpus(
    mut records: Vec<ExtractionRecord>,
    dev_size: usize,
    test_size: usize,
    seed: u64,
    mode: CorpusMode,
) -> Result<CorpusSplit> {
    if records.len() <= dev_size + test_size {
        return Err(Error::Sizing(format!(
            "{} records cannot fill dev {dev_size} + test {test_size} and leave training data",
            records.len()
        )));
    }
    let mut ids = HashSet::new();
    if let Some(dup) = records.iter().find(|r| !ids.insert(r.id().to_string())) {
        return Err(Error::Validation(format!("duplicate sentence id {:?}", dup.id())));
    }

    records.shuffle(&mut rng::seeded(seed));
    let rest = records.split_off(test_size);
    let test = records;
    let mut rest = rest;
    let train_records = rest.split_off(dev_size);
    let dev = rest;

    let mut seen = HashSet::new();
    let (mut train, mut kept, mut deduplicated) = (Vec::new(), Vec::new(), Vec::new());
    for r in train_records {
        let pair = mode.build_pair(&r)?;
        if seen.insert(pair.clause.clone()) {
            train.push(pair);
            kept.push(r);
        } else {
            deduplicated.push(pair.id);
        }
    }
    Ok(CorpusSplit { train, train_records: kept, dev, test, deduplicated })
}

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
pub const UNK: u32 = 3;
pub const INS: u32 = 4;
pub const INS_END: u32 = 5;
pub const RESERVED_TOKENS: [&str; 6] = ["<pad>", "<s>", "</s>", "<unk>", INS_OPEN, INS_CLOSE];

/// Token/id bijection with the six reserved tokens at fixed ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < RESERVED_TOKENS.len() || tokens[..RESERVED_TOKENS.len()] != RESERVED_TOKENS {
            return Err(Error::Validation("vocabulary must start with the reserved tokens".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::Validation(format!("vocabulary entry {i} is not a token: {t:?}")));
            }
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::Validation(format!("duplicate vocabulary entry {t:?}")));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn is_reserved(id: u32) -> bool {
        (id as usize) < RESERVED_TOKENS.len()
    }

    pub fn write<W: Write>(&self, mut out: W) -> io::Result<()> {
        for t in &self.tokens {
            writeln!(out, "{t}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let tokens = input.lines().collect::<io::Result<Vec<_>>>()?;
        Self::from_tokens(tokens)
    }
}

/// Frequency-ranked vocabulary over both sides of the training pairs; ties go
/// to the lexicographically smaller byte string. `cap` counts the reserved
/// tokens.
pub fn build_vocab(pairs: &[ParallelPair], cap: usize) -> Result<Vocabulary> {
    if pairs.is_empty() {
        return Err(Error::contract("cannot build a vocabulary from an empty corpus"));
    }
    build_vocab_from(pairs.iter().flat_map(|p| p.input.iter().chain(&p.output)), cap)
}

pub fn build_vocab_from<'a, I>(tokens: I, cap: usize) -> Result<Vocabulary>
where
    I: IntoIterator<Item = &'a String>,
{
    if cap < RESERVED_TOKENS.len() {
        return Err(Error::config("vocab-cap", format!("must be at least {}", RESERVED_TOKENS.len())));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in tokens {
        if !is_reserved_surface(t) {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.as_bytes().cmp(b.0.as_bytes())));
    let all = RESERVED_TOKENS
        .iter()
        .map(|s| s.to_string())
        .chain(ranked.into_iter().map(|(t, _)| t.to_string()))
        .take(cap)
        .collect();
    Vocabulary::from_tokens(all)
}

/// Ids plus the surfaces that fell out of the vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoded {
    pub ids: Vec<u32>,
    /// `(position, original surface)` for every `<unk>`.
    pub unknown: Vec<(usize, String)>,
}

impl Encoded {
    /// Human-readable dump; unknown words render as `<unk:surface>`.
    pub fn render(&self, vocab: &Vocabulary) -> Vec<String> {
        let mut unknown = self.unknown.iter().peekable();
        self.ids
            .iter()
            .enumerate()
            .map(|(i, &id)| match unknown.peek() {
                Some((pos, s)) if *pos == i => {
                    let out = format!("<unk:{s}>");
                    unknown.next();
                    out
                }
                _ => vocab.token(id).unwrap_or("<unk>").to_string(),
            })
            .collect()
    }
}

pub fn encode<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> Encoded {
    let mut ids = Vec::with_capacity(tokens.len());
    let mut unknown = Vec::new();
    for (i, t) in tokens.iter().enumerate() {
        let t = t.as_ref();
        match vocab.id(t) {
            Some(id) => ids.push(id),
            None => {
                ids.push(UNK);
                unknown.push((i, t.to_string()));
            }
        }
    }
    Encoded { ids, unknown }
}

/// Maps ids back to surfaces, stopping at `</s>`.
///
/// With `attention` (one row per output step, one column per entry of
/// `source`), an output `<unk>` becomes the non-reserved source surface with
/// the highest weight at that step; without it `<unk>` stays literal.
pub fn decode<S: AsRef<str>>(
    ids: &[u32],
    vocab: &Vocabulary,
    source: &[S],
    attention: Option<&[Vec<f64>]>,
) -> Result<Vec<String>> {
    let mut out = Vec::with_capacity(ids.len());
    for (step, &id) in ids.iter().enumerate() {
        let token = vocab.token(id).ok_or_else(|| Error::contract(format!("unknown token id {id}")))?;
        match id {
            EOS => break,
            PAD | BOS => continue,
            UNK => {
                let replacement = attention.and_then(|a| a.get(step)).and_then(|row| {
                    row.iter()
                        .zip(source)
                        .enumerate()
                        .filter(|(_, (_, s))| !is_reserved_surface(s.as_ref()))
                        .fold(None::<(usize, f64)>, |best, (j, (&w, _))| match best {
                            Some((_, bw)) if bw >= w => best,
                            _ => Some((j, w)),
                        })
                        .map(|(j, _)| source[j].as_ref().to_string())
                });
                out.push(replacement.unwrap_or_else(|| token.to_string()));
            }
            _ => out.push(token.to_string()),
        }
    }
    Ok(out)
}
