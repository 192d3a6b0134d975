//! Dependency-chunked sentences and their JSONL serialization.
//!
//! A sentence is a list of chunks (bunsetsu). Every chunk holds one or more
//! POS-tagged tokens and points at the chunk it depends on. Dependencies are
//! head-final: a non-root chunk always points at a strictly later chunk, and
//! exactly one chunk is the root.
//!
//! The wire format is one JSON object per line:
//!
//! ```text
//! {"id":"s0001","chunks":[{"tokens":[{"s":"車","p":"NOUN_GENERAL"},{"s":"に","p":"PARTICLE"}],"dest":1},{"tokens":[{"s":"乗り","p":"VERB"},{"s":"ました","p":"OTHER"}],"dest":-1}]}
//! ```
//!
//! Output field order is fixed (`id`, `chunks`; `tokens`, `dest`; `s`, `p`),
//! so reading and re-writing a canonical file reproduces it byte for byte.

use std::fmt;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};

/// Surfaces that are reserved for markers and decoder bookkeeping.
pub const RESERVED_SURFACES: [&str; 6] = ["<pad>", "<s>", "</s>", "<unk>", "<ins>", "</ins>"];

/// Coarse part-of-speech tags. Fine-grained analyzer tags are collapsed onto
/// this set before ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Pos {
    NounGeneral,
    NounProper,
    NounOther,
    Verb,
    Copula,
    Particle,
    Adjective,
    Symbol,
    Other,
}

impl Pos {
    pub fn is_noun(self) -> bool {
        matches!(self, Pos::NounGeneral | Pos::NounProper | Pos::NounOther)
    }

    /// General or proper noun: the nouns a modifier clause may attach to.
    pub fn is_modifiable_noun(self) -> bool {
        matches!(self, Pos::NounGeneral | Pos::NounProper)
    }
}

pub fn is_reserved_surface(s: &str) -> bool {
    RESERVED_SURFACES.contains(&s) || (s.starts_with("<unk:") && s.ends_with('>'))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    #[serde(rename = "s")]
    surface: String,
    #[serde(rename = "p")]
    pos: Pos,
}

impl Token {
    pub fn new(surface: impl Into<String>, pos: Pos) -> Result<Self> {
        let surface = surface.into();
        check_surface(&surface).map_err(Error::Validation)?;
        Ok(Token { surface, pos })
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }

    pub fn pos(&self) -> Pos {
        self.pos
    }
}

fn check_surface(s: &str) -> std::result::Result<(), String> {
    if s.is_empty() {
        return Err("empty token surface".into());
    }
    if s.chars().any(char::is_whitespace) {
        return Err(format!("token surface {s:?} contains whitespace"));
    }
    if is_reserved_surface(s) {
        return Err(format!("token surface {s:?} is reserved"));
    }
    Ok(())
}

/// Half-open token range `[start, end)` inside a chunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Chunk {
    tokens: Vec<Token>,
    dest: Option<usize>,
}

impl Chunk {
    /// `dest` is `None` for the root chunk. Ordering constraints on `dest`
    /// are checked when the chunk is placed in a [`ParsedSentence`].
    pub fn new(tokens: Vec<Token>, dest: Option<usize>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::Validation("chunk has no tokens".into()));
        }
        Ok(Chunk { tokens, dest })
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn dest(&self) -> Option<usize> {
        self.dest
    }

    pub fn is_root(&self) -> bool {
        self.dest.is_none()
    }

    /// Concatenated surface of the chunk's tokens.
    pub fn surface(&self) -> String {
        self.tokens.iter().map(|t| t.surface.as_str()).collect()
    }

    pub fn has_noun(&self) -> bool {
        self.tokens.iter().any(|t| t.pos.is_noun())
    }

    pub(crate) fn with_dest(&self, dest: Option<usize>) -> Chunk {
        Chunk { tokens: self.tokens.clone(), dest }
    }
}

/// A chunk is a verb phrase if it has a verb, or a noun predicate if a noun
/// is immediately followed by a copula inside the same chunk.
pub fn is_verb_phrase(chunk: &Chunk) -> bool {
    let tokens = &chunk.tokens;
    tokens.iter().any(|t| t.pos == Pos::Verb)
        || tokens.windows(2).any(|w| w[0].pos.is_noun() && w[1].pos == Pos::Copula)
}

/// Like [`is_verb_phrase`] but ignores noun predicates.
pub fn has_verb(chunk: &Chunk) -> bool {
    chunk.tokens.iter().any(|t| t.pos == Pos::Verb)
}

/// First maximal run of general/proper noun tokens.
pub fn contains_modifiable_noun(chunk: &Chunk) -> Option<Span> {
    first_run(chunk, Pos::is_modifiable_noun)
}

/// First maximal run of tokens tagged with any noun tag.
pub fn first_noun_run(chunk: &Chunk) -> Option<Span> {
    first_run(chunk, Pos::is_noun)
}

fn first_run(chunk: &Chunk, pred: impl Fn(Pos) -> bool) -> Option<Span> {
    let start = chunk.tokens.iter().position(|t| pred(t.pos))?;
    let len = chunk.tokens[start..].iter().take_while(|t| pred(t.pos)).count();
    Some(Span::new(start, start + len))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ParsedSentence {
    id: String,
    chunks: Vec<Chunk>,
}

impl ParsedSentence {
    pub fn new(id: impl Into<String>, chunks: Vec<Chunk>) -> Result<Self> {
        validate_chunks(&chunks).map_err(Error::Validation)?;
        Ok(ParsedSentence { id: id.into(), chunks })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.chunks.iter().flat_map(|c| c.tokens.iter())
    }

    /// Token surfaces in sentence order.
    pub fn surfaces(&self) -> Vec<String> {
        self.tokens().map(|t| t.surface.clone()).collect()
    }

    pub fn surface(&self) -> String {
        self.tokens().map(|t| t.surface.as_str()).collect()
    }

    pub fn token_count(&self) -> usize {
        self.chunks.iter().map(|c| c.tokens.len()).sum()
    }

    /// Offset of the first token of `chunk` in the flat token sequence.
    pub fn token_offset(&self, chunk: usize) -> usize {
        self.chunks[..chunk].iter().map(|c| c.tokens.len()).sum()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&SentenceWire::from(self)).expect("sentence serialization is infallible")
    }

    pub fn from_json_line(line: &str) -> std::result::Result<Self, ReadErrorKind> {
        let wire: SentenceWire =
            serde_json::from_str(line).map_err(|e| ReadErrorKind::Json(e.to_string()))?;
        wire.try_into().map_err(ReadErrorKind::Invalid)
    }
}

impl fmt::Display for ParsedSentence {
    /// Chunks separated by spaces, tokens concatenated.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.chunks.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(&c.surface())?;
        }
        Ok(())
    }
}

fn validate_chunks(chunks: &[Chunk]) -> std::result::Result<(), String> {
    if chunks.is_empty() {
        return Err("sentence has no chunks".into());
    }
    let mut roots = 0;
    for (i, c) in chunks.iter().enumerate() {
        if c.tokens.is_empty() {
            return Err(format!("chunk {i} has no tokens"));
        }
        for t in &c.tokens {
            check_surface(&t.surface).map_err(|e| format!("chunk {i}: {e}"))?;
        }
        match c.dest {
            None => roots += 1,
            Some(d) if d == i => return Err(format!("self-dependency at chunk {i}")),
            Some(d) if d < i => return Err(format!("backward dependency {i} -> {d}")),
            Some(d) if d >= chunks.len() => {
                return Err(format!("dest out of range at chunk {i}: {d} >= {}", chunks.len()))
            }
            Some(_) => {}
        }
    }
    match roots {
        1 => Ok(()),
        0 => Err("sentence has no root chunk".into()),
        n => Err(format!("sentence has {n} root chunks")),
    }
}

#[derive(Serialize, Deserialize)]
struct TokenWire {
    s: String,
    p: Pos,
}

#[derive(Serialize, Deserialize)]
struct ChunkWire {
    tokens: Vec<TokenWire>,
    dest: i64,
}

#[derive(Serialize, Deserialize)]
struct SentenceWire {
    id: String,
    chunks: Vec<ChunkWire>,
}

impl From<&ParsedSentence> for SentenceWire {
    fn from(s: &ParsedSentence) -> Self {
        SentenceWire {
            id: s.id.clone(),
            chunks: s
                .chunks
                .iter()
                .map(|c| ChunkWire {
                    tokens: c.tokens.iter().map(|t| TokenWire { s: t.surface.clone(), p: t.pos }).collect(),
                    dest: c.dest.map_or(-1, |d| d as i64),
                })
                .collect(),
        }
    }
}

impl TryFrom<SentenceWire> for ParsedSentence {
    type Error = String;

    fn try_from(w: SentenceWire) -> std::result::Result<Self, String> {
        let mut chunks = Vec::with_capacity(w.chunks.len());
        for (i, c) in w.chunks.into_iter().enumerate() {
            let dest = match c.dest {
                -1 => None,
                d if d < 0 => return Err(format!("negative dest {d} at chunk {i}")),
                d => Some(d as usize),
            };
            let tokens = c.tokens.into_iter().map(|t| Token { surface: t.s, pos: t.p }).collect();
            chunks.push(Chunk { tokens, dest });
        }
        validate_chunks(&chunks)?;
        Ok(ParsedSentence { id: w.id, chunks })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReadErrorKind {
    Json(String),
    Invalid(String),
    Io(String),
}

/// A per-line ingestion failure.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {}", match kind {
    ReadErrorKind::Json(m) => format!("parse error: {m}"),
    ReadErrorKind::Invalid(m) => format!("validation error: {m}"),
    ReadErrorKind::Io(m) => format!("i/o error: {m}"),
})]
pub struct ReadError {
    /// 1-based line number.
    pub line: usize,
    pub kind: ReadErrorKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReadMode {
    /// Stop at the first bad line.
    #[default]
    Strict,
    /// Skip bad lines and keep their diagnostics.
    Lenient,
}

/// Streaming reader over a JSONL chunk corpus.
///
/// In [`ReadMode::Strict`] the first bad line is yielded as an error and the
/// iterator ends. In [`ReadMode::Lenient`] bad lines are skipped and recorded
/// in [`ParsedCorpusReader::diagnostics`]. Blank lines are ignored.
pub struct ParsedCorpusReader<R> {
    lines: io::Lines<R>,
    line_no: usize,
    mode: ReadMode,
    diagnostics: Vec<ReadError>,
    done: bool,
}

pub fn read_parsed_corpus<R: BufRead>(reader: R, mode: ReadMode) -> ParsedCorpusReader<R> {
    ParsedCorpusReader { lines: reader.lines(), line_no: 0, mode, diagnostics: Vec::new(), done: false }
}

impl<R> ParsedCorpusReader<R> {
    pub fn diagnostics(&self) -> &[ReadError] {
        &self.diagnostics
    }
}

impl<R: BufRead> Iterator for ParsedCorpusReader<R> {
    type Item = std::result::Result<ParsedSentence, ReadError>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            let line = self.lines.next()?;
            self.line_no += 1;
            let parsed = match line {
                Ok(l) if l.trim().is_empty() => continue,
                Ok(l) => ParsedSentence::from_json_line(&l),
                Err(e) => {
                    // Unreadable bytes are fatal in either mode.
                    self.done = true;
                    Err(ReadErrorKind::Io(e.to_string()))
                }
            };
            match parsed {
                Ok(s) => return Some(Ok(s)),
                Err(kind) => {
                    let err = ReadError { line: self.line_no, kind };
                    if self.mode == ReadMode::Strict || self.done {
                        self.done = true;
                        return Some(Err(err));
                    }
                    log::warn!("skipping {err}");
                    self.diagnostics.push(err);
                }
            }
        }
        None
    }
}

pub fn write_parsed_corpus<'a, W, I>(mut out: W, sentences: I) -> io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a ParsedSentence>,
{
    for s in sentences {
        writeln!(out, "{}", s.to_json_line())?;
    }
    Ok(())
}

/// Builds a sentence from `(surface, pos)` token lists and dests; handy for
/// fixtures. Panics on invalid input.
#[doc(hidden)]
pub fn sentence_from_parts(id: &str, parts: &[(&[(&str, Pos)], i64)]) -> ParsedSentence {
    let chunks = parts
        .iter()
        .map(|(toks, dest)| {
            let tokens = toks.iter().map(|(s, p)| Token::new(*s, *p).unwrap()).collect();
            Chunk::new(tokens, if *dest < 0 { None } else { Some(*dest as usize) }).unwrap()
        })
        .collect();
    ParsedSentence::new(id, chunks).unwrap()
}
