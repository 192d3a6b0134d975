//! Modifier-clause extraction from complex sentences.
//!
//! The extractor scans chunks right to left. A verb phrase (or noun
//! predicate) whose head chunk carries a general or proper noun opens a new
//! clause; chunks that depend on a chunk of the clause being accumulated join
//! it. Removing one chosen clause yields the pseudo-simple side of a training
//! pair.

use std::collections::BTreeSet;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::chunk::{contains_modifiable_noun, is_verb_phrase, Chunk, ParsedSentence, Span};
use crate::error::{Error, Result};
use crate::rng;

/// A clause candidate, indexed against the complex sentence it came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModifierClause {
    /// Member chunks, ascending.
    pub chunk_indices: Vec<usize>,
    pub head_index: usize,
    pub modified_index: usize,
    pub noun_span: Span,
}

impl ModifierClause {
    /// Checks every clause invariant against `sentence`.
    pub fn validate(&self, sentence: &ParsedSentence) -> Result<()> {
        let chunks = sentence.chunks();
        let n = chunks.len();
        let fail = |m: String| Err(Error::contract(format!("clause in {}: {m}", sentence.id())));
        if self.chunk_indices.is_empty() || self.modified_index >= n {
            return fail("indices out of range".into());
        }
        if !self.chunk_indices.windows(2).all(|w| w[0] < w[1]) {
            return fail("chunk indices not strictly ascending".into());
        }
        if !self.chunk_indices.contains(&self.head_index) {
            return fail("head is not a member".into());
        }
        if self.chunk_indices.iter().any(|&i| i >= self.modified_index) {
            return fail("member at or after the modified chunk".into());
        }
        if chunks[self.head_index].dest() != Some(self.modified_index) {
            return fail("head does not depend on the modified chunk".into());
        }
        if !is_verb_phrase(&chunks[self.head_index]) {
            return fail("head is not a verb phrase".into());
        }
        if contains_modifiable_noun(&chunks[self.modified_index]) != Some(self.noun_span) {
            return fail("noun span does not match the modified chunk".into());
        }
        for &i in &self.chunk_indices {
            if i == self.head_index {
                continue;
            }
            match chunks[i].dest() {
                Some(d) if self.chunk_indices.binary_search(&d).is_ok() => {}
                _ => return fail(format!("member {i} depends outside the clause")),
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.chunk_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunk_indices.is_empty()
    }

    /// Token surfaces of the clause in sentence order.
    pub fn surfaces(&self, sentence: &ParsedSentence) -> Vec<String> {
        self.chunk_indices
            .iter()
            .flat_map(|&i| sentence.chunks()[i].tokens().iter().map(|t| t.surface().to_string()))
            .collect()
    }
}

/// How literally to follow the extraction loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExtractMode {
    /// Clear the accumulation after each flush and flush once after the loop.
    #[default]
    Corrected,
    /// Never clear, never flush at the end, and only test dependency
    /// membership when the dest chunk has no modifiable noun. Kept for study;
    /// the returned clauses may break the usual invariants.
    Literal,
}

pub fn find_modifier_candidates(sentence: &ParsedSentence) -> Vec<ModifierClause> {
    find_modifier_candidates_with(sentence, ExtractMode::Corrected)
}

pub fn find_modifier_candidates_with(sentence: &ParsedSentence, mode: ExtractMode) -> Vec<ModifierClause> {
    let chunks = sentence.chunks();
    let mut found = Vec::new();
    let mut elements: Vec<usize> = Vec::new();

    for i in (0..chunks.len()).rev() {
        let Some(dest) = chunks[i].dest() else { continue };
        let dest_has_noun = contains_modifiable_noun(&chunks[dest]).is_some();
        let opens = dest_has_noun && is_verb_phrase(&chunks[i]);
        match mode {
            ExtractMode::Corrected => {
                if opens {
                    if !elements.is_empty() {
                        found.push(to_clause(chunks, &elements));
                    }
                    elements.clear();
                    elements.push(i);
                } else if elements.contains(&dest) {
                    elements.push(i);
                }
            }
            ExtractMode::Literal => {
                if dest_has_noun {
                    if opens {
                        if !elements.is_empty() {
                            found.push(to_clause(chunks, &elements));
                        }
                        elements.push(i);
                    }
                } else if elements.contains(&dest) {
                    elements.push(i);
                }
            }
        }
    }
    if mode == ExtractMode::Corrected && !elements.is_empty() {
        found.push(to_clause(chunks, &elements));
    }
    found
}

// The first accumulated element is always the head.
fn to_clause(chunks: &[Chunk], elements: &[usize]) -> ModifierClause {
    let head_index = elements[0];
    let modified_index = chunks[head_index].dest().expect("clause head has a dest");
    let noun_span = contains_modifiable_noun(&chunks[modified_index]).expect("head dest carries a noun");
    let mut chunk_indices = elements.to_vec();
    chunk_indices.sort_unstable();
    ModifierClause { chunk_indices, head_index, modified_index, noun_span }
}

/// Uniform choice driven by `seed`.
pub fn choose_modifier(candidates: &[ModifierClause], seed: u64) -> Option<&ModifierClause> {
    match candidates.len() {
        0 => None,
        1 => Some(&candidates[0]),
        n => Some(&candidates[rng::seeded(seed).random_range(0..n)]),
    }
}

/// Deletes the clause chunks and re-points the survivors.
///
/// A surviving chunk that depended on a deleted chunk is re-attached to the
/// first surviving chunk on its original dependency path (at the latest the
/// modified chunk).
pub fn remove_modifier(sentence: &ParsedSentence, clause: &ModifierClause) -> Result<ParsedSentence> {
    clause.validate(sentence)?;
    let chunks = sentence.chunks();
    let removed: BTreeSet<usize> = clause.chunk_indices.iter().copied().collect();

    let mut new_index = vec![usize::MAX; chunks.len()];
    let mut next = 0;
    for (i, slot) in new_index.iter_mut().enumerate() {
        if !removed.contains(&i) {
            *slot = next;
            next += 1;
        }
    }

    let mut out = Vec::with_capacity(next);
    for (i, c) in chunks.iter().enumerate() {
        if removed.contains(&i) {
            continue;
        }
        let mut dest = c.dest();
        while let Some(d) = dest.filter(|d| removed.contains(d)) {
            dest = chunks[d].dest();
        }
        out.push(c.with_dest(dest.map(|d| new_index[d])));
    }
    ParsedSentence::new(sentence.id(), out)
}

/// One complex sentence with the clause chosen for removal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionRecord {
    pub source: ParsedSentence,
    pub clause: ModifierClause,
    pub simple: ParsedSentence,
}

impl ExtractionRecord {
    pub fn new(source: ParsedSentence, clause: ModifierClause) -> Result<Self> {
        let simple = remove_modifier(&source, &clause)?;
        Ok(ExtractionRecord { source, clause, simple })
    }

    pub fn id(&self) -> &str {
        self.source.id()
    }

    pub fn complex_surfaces(&self) -> Vec<String> {
        self.source.surfaces()
    }

    pub fn clause_surfaces(&self) -> Vec<String> {
        self.clause.surfaces(&self.source)
    }

    /// Clause identity used for deduplication.
    pub fn clause_string(&self) -> String {
        self.clause_surfaces().concat()
    }

    pub fn modified_noun(&self) -> String {
        let chunk = &self.source.chunks()[self.clause.modified_index];
        chunk.tokens()[self.clause.noun_span.start..self.clause.noun_span.end]
            .iter()
            .map(|t| t.surface())
            .collect()
    }

    /// Index of the modified chunk inside `simple`, and its noun span.
    pub fn simple_mark(&self) -> (usize, Span) {
        (self.clause.modified_index - self.clause.len(), self.clause.noun_span)
    }

    pub fn to_json_line(&self) -> String {
        let wire = RecordWire {
            id: self.id().to_string(),
            simple: self.simple.surfaces(),
            complex: self.complex_surfaces(),
            clause: self.clause_surfaces(),
            modified_noun: self.modified_noun(),
            clause_chunks: self.clause.chunk_indices.clone(),
            head: self.clause.head_index,
            source: serde_json::from_str(&self.source.to_json_line()).expect("valid json"),
        };
        serde_json::to_string(&wire).expect("record serialization is infallible")
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        let wire: RecordWire = serde_json::from_str(line)?;
        let source = ParsedSentence::from_json_line(&wire.source.to_string())
            .map_err(|e| Error::Validation(format!("record {}: {e:?}", wire.id)))?;
        let head_index = wire.head;
        let modified_index = source
            .chunks()
            .get(head_index)
            .and_then(Chunk::dest)
            .ok_or_else(|| Error::contract(format!("record {}: bad clause head", wire.id)))?;
        let noun_span = contains_modifiable_noun(&source.chunks()[modified_index])
            .ok_or_else(|| Error::contract(format!("record {}: modified chunk has no noun", wire.id)))?;
        let clause = ModifierClause { chunk_indices: wire.clause_chunks, head_index, modified_index, noun_span };
        let record = ExtractionRecord::new(source, clause)?;
        if record.simple.surfaces() != wire.simple
            || record.complex_surfaces() != wire.complex
            || record.clause_surfaces() != wire.clause
            || record.modified_noun() != wire.modified_noun
        {
            return Err(Error::Validation(format!("record {}: surfaces disagree with source", wire.id)));
        }
        Ok(record)
    }
}

#[derive(Serialize, Deserialize)]
struct RecordWire {
    id: String,
    simple: Vec<String>,
    complex: Vec<String>,
    clause: Vec<String>,
    modified_noun: String,
    clause_chunks: Vec<usize>,
    head: usize,
    source: serde_json::Value,
}

/// Find, choose and remove. `None` when the sentence has no candidate.
pub fn build_pair(sentence: &ParsedSentence, seed: u64) -> Result<Option<ExtractionRecord>> {
    let candidates = find_modifier_candidates(sentence);
    match choose_modifier(&candidates, rng::sentence_seed(seed, sentence.id())) {
        None => Ok(None),
        Some(clause) => ExtractionRecord::new(sentence.clone(), clause.clone()).map(Some),
    }
}
