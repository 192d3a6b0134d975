//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

pub mod fixtures;
pub mod forward_oracle;
pub mod kn_oracle;

pub fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

use clausegen::chunk::{Chunk, ParsedSentence, Pos, Token};
use proptest::prelude::*;

const SURFACES: &[&str] = &["猫", "犬", "車", "見", "た", "が", "を", "に", "だ", "走る", "赤い", "の", "本", "東京"];
const TAGS: &[Pos] = &[
    Pos::NounGeneral,
    Pos::NounProper,
    Pos::NounOther,
    Pos::Verb,
    Pos::Copula,
    Pos::Particle,
    Pos::Adjective,
    Pos::Symbol,
    Pos::Other,
];

fn arb_token() -> impl Strategy<Value = Token> {
    (0..SURFACES.len(), 0..TAGS.len()).prop_map(|(s, p)| Token::new(SURFACES[s], TAGS[p]).unwrap())
}

/// Well-formed head-final projective sentences of 1..=`max_chunks` chunks.
///
/// Chunk `i` attaches to some chunk on the dependency path that starts at
/// `i + 1`, which keeps arcs from crossing.
pub fn arb_sentence(max_chunks: usize) -> impl Strategy<Value = ParsedSentence> {
    (1..=max_chunks)
        .prop_flat_map(|n| (prop::collection::vec(prop::collection::vec(arb_token(), 1..4), n), prop::collection::vec(any::<u8>(), n)))
        .prop_map(|(tokens, picks)| {
            let n = tokens.len();
            let mut dest: Vec<Option<usize>> = vec![None; n];
            for i in (0..n.saturating_sub(1)).rev() {
                let mut path = vec![i + 1];
                while let Some(d) = dest[*path.last().unwrap()] {
                    path.push(d);
                }
                dest[i] = Some(path[picks[i] as usize % path.len()]);
            }
            let chunks = tokens.into_iter().zip(dest).map(|(t, d)| Chunk::new(t, d).unwrap()).collect();
            ParsedSentence::new("p", chunks).unwrap()
        })
}
