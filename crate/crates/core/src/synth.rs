//! Synthetic parsed sentences with one planted modifier clause.
//!
//! Every sentence has the shape
//! `[main args] [adjective] [clause args] [clause head] [noun] [main args] [root]`
//! where only the clause head is a verb phrase depending on a noun chunk, so
//! the planted clause is the sole extraction candidate. The matching simple
//! sentence is built directly, not by deletion, so tests can check extraction
//! against it.

use rand::seq::IndexedRandom;
use rand::Rng as _;

use crate::chunk::{Chunk, ParsedSentence, Pos, Token};
use crate::rng;

const NOUNS: &[&str] = &["車", "本", "猫", "家", "道", "町", "店", "手紙", "友人", "先生", "方法", "部屋"];
const ARG_NOUNS: &[&str] = &["彼", "母", "駅", "森", "昨日", "雨", "子供", "海"];
const VERBS: &[&str] = &["借り", "買っ", "見", "書い", "作っ", "知っ", "選ん", "探し"];
const MAIN_VERBS: &[&str] = &["乗り", "読み", "行き", "使い", "会い"];
const ADJECTIVES: &[&str] = &["古い", "赤い", "静かな", "大きな"];
const ARG_PARTICLES: &[&str] = &["に", "が", "で", "から"];
const NOUN_PARTICLES: &[&str] = &["を", "に", "が", "は"];

/// A complex sentence with its known clause and the expected simple sentence.
#[derive(Debug, Clone)]
pub struct PlantedSentence {
    pub sentence: ParsedSentence,
    pub simple: ParsedSentence,
    /// Clause chunk indices in `sentence`, ascending.
    pub clause_chunks: Vec<usize>,
    pub head: usize,
    pub modified: usize,
    pub clause_surfaces: Vec<String>,
    /// Token offset in `simple` where the clause belongs.
    pub insert_at: usize,
}

enum Role {
    Main,
    Adjective,
    ClauseArg,
    ClauseHead,
    Noun,
    Root,
}

fn tok(s: &str, p: Pos) -> Token {
    Token::new(s, p).expect("fixture surfaces are valid")
}

fn pick<'a>(rng: &mut rng::Rng, xs: &'a [&'a str]) -> &'a str {
    xs.choose(rng).expect("non-empty word list")
}

pub fn planted_sentence(id: &str, seed: u64) -> PlantedSentence {
    let mut rng = rng::seeded(seed);
    let mut roles: Vec<(Role, Vec<Token>)> = Vec::new();
    for _ in 0..rng.random_range(0..=1) {
        roles.push((Role::Main, vec![tok(pick(&mut rng, ARG_NOUNS), Pos::NounGeneral), tok("は", Pos::Particle)]));
    }
    if rng.random_bool(0.3) {
        roles.push((Role::Adjective, vec![tok(pick(&mut rng, ADJECTIVES), Pos::Adjective)]));
    }
    for _ in 0..rng.random_range(0..=2) {
        let noun = tok(pick(&mut rng, ARG_NOUNS), Pos::NounGeneral);
        roles.push((Role::ClauseArg, vec![noun, tok(pick(&mut rng, ARG_PARTICLES), Pos::Particle)]));
    }
    let head = if rng.random_bool(0.2) {
        vec![tok(pick(&mut rng, ARG_NOUNS), Pos::NounGeneral), tok("だっ", Pos::Copula), tok("た", Pos::Other)]
    } else {
        vec![tok(pick(&mut rng, VERBS), Pos::Verb), tok("た", Pos::Other)]
    };
    roles.push((Role::ClauseHead, head));
    roles.push((Role::Noun, vec![tok(pick(&mut rng, NOUNS), Pos::NounGeneral), tok(pick(&mut rng, NOUN_PARTICLES), Pos::Particle)]));
    for _ in 0..rng.random_range(0..=1) {
        roles.push((Role::Main, vec![tok(pick(&mut rng, ARG_NOUNS), Pos::NounGeneral), tok("で", Pos::Particle)]));
    }
    roles.push((Role::Root, vec![tok(pick(&mut rng, MAIN_VERBS), Pos::Verb), tok("ました", Pos::Other)]));

    let head = roles.iter().position(|(r, _)| matches!(r, Role::ClauseHead)).expect("head present");
    let noun = head + 1;
    let root = roles.len() - 1;
    let dest_of = |r: &Role| match r {
        Role::Main | Role::Noun => Some(root),
        Role::Adjective | Role::ClauseHead => Some(noun),
        Role::ClauseArg => Some(head),
        Role::Root => None,
    };
    let clause_chunks: Vec<usize> =
        (0..roles.len()).filter(|&i| matches!(roles[i].0, Role::ClauseArg | Role::ClauseHead)).collect();

    let build = |keep: &dyn Fn(usize) -> bool| {
        let index: Vec<usize> = (0..roles.len()).scan(0, |n, i| {
            let out = *n;
            if keep(i) {
                *n += 1;
            }
            Some(out)
        }).collect();
        let chunks = roles
            .iter()
            .enumerate()
            .filter(|&(i, _)| keep(i))
            .map(|(_, (r, toks))| Chunk::new(toks.clone(), dest_of(r).map(|d| index[d])).expect("valid chunk"))
            .collect();
        ParsedSentence::new(id, chunks).expect("planted sentence is well-formed")
    };
    let sentence = build(&|_| true);
    let simple = build(&|i| !clause_chunks.contains(&i));
    let clause_surfaces =
        clause_chunks.iter().flat_map(|&i| roles[i].1.iter().map(|t| t.surface().to_string())).collect();
    let insert_at = sentence.token_offset(clause_chunks[0]);
    PlantedSentence { sentence, simple, clause_chunks, head, modified: noun, clause_surfaces, insert_at }
}

/// `n` planted sentences with ids `planted-00000`, `planted-00001`, ...
pub fn planted_corpus(n: usize, seed: u64) -> Vec<PlantedSentence> {
    (0..n)
        .map(|i| {
            let id = format!("planted-{i:05}");
            let s = rng::sentence_seed(seed, &id);
            planted_sentence(&id, s)
        })
        .collect()
}
