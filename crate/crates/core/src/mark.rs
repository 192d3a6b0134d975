//! Insertion-position detection and `<ins>`/`</ins>` marking.
//!
//! At test time the noun to modify is chosen by rule: the leftmost
//! noun-bearing chunk that no verb phrase depends on, falling back to the
//! leftmost noun-bearing chunk. At training time the mark is the ground-truth
//! position of the removed clause instead.

use crate::chunk::{first_noun_run, has_verb, is_verb_phrase, Chunk, ParsedSentence, Span};
use crate::corpus::{PairMode, ParallelPair};
use crate::error::{Error, Result};
use crate::extract::ExtractionRecord;

pub const INS_OPEN: &str = "<ins>";
pub const INS_CLOSE: &str = "</ins>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct InsertionMark {
    pub chunk_index: usize,
    pub noun_span: Span,
}

/// Which dependents disqualify a noun chunk from being marked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChildRule {
    /// Verb phrases and noun predicates.
    #[default]
    VerbPhrase,
    /// Only chunks containing a verb.
    VerbOnly,
}

impl ChildRule {
    fn matches(self, chunk: &Chunk) -> bool {
        match self {
            ChildRule::VerbPhrase => is_verb_phrase(chunk),
            ChildRule::VerbOnly => has_verb(chunk),
        }
    }
}

pub fn detect_insertion_position(sentence: &ParsedSentence) -> Result<InsertionMark> {
    detect_insertion_position_with(sentence, ChildRule::default())
}

pub fn detect_insertion_position_with(sentence: &ParsedSentence, rule: ChildRule) -> Result<InsertionMark> {
    let chunks = sentence.chunks();
    let mut noun_index = Vec::new();
    let mut marked = None;
    for (i, c) in chunks.iter().enumerate() {
        if !c.has_noun() {
            continue;
        }
        noun_index.push(i);
        let has_verb_child = chunks.iter().any(|j| j.dest() == Some(i) && rule.matches(j));
        if !has_verb_child {
            marked = Some(i);
            break;
        }
    }
    let chunk_index = marked
        .or_else(|| noun_index.iter().copied().min())
        .ok_or_else(|| Error::NoInsertionPoint(sentence.id().to_string()))?;
    let noun_span = first_noun_run(&chunks[chunk_index]).expect("noun-bearing chunk has a noun run");
    Ok(InsertionMark { chunk_index, noun_span })
}

/// Flat surfaces with `<ins>` and `</ins>` around the marked noun run.
pub fn render_marked(sentence: &ParsedSentence, mark: &InsertionMark) -> Result<Vec<String>> {
    let chunk = sentence
        .chunks()
        .get(mark.chunk_index)
        .ok_or_else(|| Error::contract(format!("mark chunk {} out of bounds", mark.chunk_index)))?;
    if mark.noun_span.is_empty() || mark.noun_span.end > chunk.tokens().len() {
        return Err(Error::contract(format!("mark span {:?} out of bounds", mark.noun_span)));
    }
    let start = sentence.token_offset(mark.chunk_index) + mark.noun_span.start;
    let end = start + mark.noun_span.len();
    let mut out = Vec::with_capacity(sentence.token_count() + 2);
    for (i, t) in sentence.tokens().enumerate() {
        if i == start {
            out.push(INS_OPEN.to_string());
        }
        out.push(t.surface().to_string());
        if i + 1 == end {
            out.push(INS_CLOSE.to_string());
        }
    }
    Ok(out)
}

pub fn strip_markers<S: AsRef<str>>(tokens: &[S]) -> Vec<String> {
    tokens
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| *t != INS_OPEN && *t != INS_CLOSE)
        .map(str::to_string)
        .collect()
}

/// Position of `<ins>` in a marked sequence once markers are stripped.
pub fn marker_position<S: AsRef<str>>(tokens: &[S]) -> Option<usize> {
    tokens.iter().position(|t| t.as_ref() == INS_OPEN)
}

/// What the marked model is trained to emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MarkedTarget {
    /// The whole complex sentence.
    #[default]
    FullSentence,
    /// Just the clause tokens.
    ClauseOnly,
}

/// Training pair for the pipeline model, marked at the ground-truth noun.
pub fn build_marked_pair(record: &ExtractionRecord, target: MarkedTarget) -> Result<ParallelPair> {
    let (chunk_index, noun_span) = record.simple_mark();
    let input = render_marked(&record.simple, &InsertionMark { chunk_index, noun_span })?;
    let output = match target {
        MarkedTarget::FullSentence => record.complex_surfaces(),
        MarkedTarget::ClauseOnly => record.clause_surfaces(),
    };
    Ok(ParallelPair {
        id: record.id().to_string(),
        mode: PairMode::Marked,
        input,
        output,
        clause: record.clause_string(),
    })
}
