use clausegen::chunk::{sentence_from_parts, ParsedSentence, Pos::*};
use rand::seq::IndexedRandom;
use rand::Rng;

use super::words;

fn lines(ls: &[&str]) -> Vec<Vec<String>> {
    ls.iter().map(|l| words(l)).collect()
}

/// 彼に借りた車に乗りました
pub fn borrowed_car() -> ParsedSentence {
    sentence_from_parts(
        "table1-1",
        &[
            (&[("彼", NounGeneral), ("に", Particle)], 1),
            (&[("借り", Verb), ("た", Other)], 2),
            (&[("車", NounGeneral), ("に", Particle)], 3),
            (&[("乗り", Verb), ("ました", Other)], -1),
        ],
    )
}

/// 方法を探しています
pub fn searching_method() -> ParsedSentence {
    sentence_from_parts(
        "table1-2",
        &[
            (&[("方法", NounGeneral), ("を", Particle)], 1),
            (&[("探し", Verb), ("て", Particle), ("い", Verb), ("ます", Other)], -1),
        ],
    )
}

/// Expected insertion point: `(chunk, noun span start, end)`, or `None` for
/// a sentence without nouns.
pub type Trace = (&'static str, ParsedSentence, Option<(usize, usize, usize)>);

/// Insertion-point fixtures, each traced by hand through the rule
/// "leftmost noun chunk without a verb-phrase dependent, else leftmost noun chunk".
pub fn insertion_traces() -> Vec<Trace> {
    let s = sentence_from_parts;
    vec![
        ("bare object noun", searching_method(), Some((0, 0, 1))),
        ("bare noun before verb", s("a2", &[(&[("車", NounGeneral), ("に", Particle)], 1), (&[("乗り", Verb), ("ました", Other)], -1)]), Some((0, 0, 1))),
        (
            "any noun tag counts",
            s("a3", &[
                (&[("昨日", NounOther)], 3),
                (&[("友人", NounGeneral), ("と", Particle)], 3),
                (&[("映画", NounGeneral), ("を", Particle)], 3),
                (&[("見", Verb), ("た", Other)], -1),
            ]),
            Some((0, 0, 1)),
        ),
        (
            "only noun already modified: fallback",
            s("a4", &[(&[("走る", Verb)], 1), (&[("犬", NounGeneral), ("が", Particle)], 2), (&[("吠え", Verb), ("た", Other)], -1)]),
            Some((1, 0, 1)),
        ),
        (
            "skip modified noun, take next bare one",
            s("a5", &[
                (&[("走る", Verb)], 1),
                (&[("犬", NounGeneral), ("が", Particle)], 3),
                (&[("公園", NounGeneral), ("で", Particle)], 3),
                (&[("吠え", Verb), ("た", Other)], -1),
            ]),
            Some((2, 0, 1)),
        ),
        (
            "adjective dependent does not disqualify",
            s("a6", &[(&[("赤い", Adjective)], 1), (&[("花", NounGeneral), ("が", Particle)], 2), (&[("咲い", Verb), ("た", Other)], -1)]),
            Some((1, 0, 1)),
        ),
        (
            "noun predicate chunk is itself bare",
            s("a7", &[
                (&[("学生", NounGeneral), ("だっ", Copula), ("た", Other)], 1),
                (&[("人", NounGeneral), ("が", Particle)], 2),
                (&[("来", Verb), ("た", Other)], -1),
            ]),
            Some((0, 0, 1)),
        ),
        ("verbs only", s("a8", &[(&[("歩き", Verb)], 1), (&[("疲れ", Verb), ("た", Other)], -1)]), None),
        (
            "adverbs and adjectives only",
            s("a9", &[(&[("とても", Other)], 2), (&[("速く", Adjective)], 2), (&[("走っ", Verb), ("た", Other)], -1)]),
            None,
        ),
        (
            "compound proper noun run",
            s("a10", &[(&[("東京", NounProper), ("タワー", NounProper), ("に", Particle)], 1), (&[("行っ", Verb), ("た", Other)], -1)]),
            Some((0, 0, 2)),
        ),
        (
            "determiner chunk has no noun",
            s("a11", &[(&[("この", Other)], 1), (&[("本", NounGeneral), ("は", Particle)], 2), (&[("面白い", Adjective)], -1)]),
            Some((1, 0, 1)),
        ),
        (
            "genitive noun first",
            s("a12", &[
                (&[("私", NounGeneral), ("の", Particle)], 1),
                (&[("父", NounGeneral), ("が", Particle)], 2),
                (&[("買っ", Verb), ("た", Other)], 3),
                (&[("車", NounGeneral), ("を", Particle)], 4),
                (&[("見", Verb), ("た", Other)], -1),
            ]),
            Some((0, 0, 1)),
        ),
        (
            "subject of a relative clause is bare",
            s("a13", &[
                (&[("彼", NounGeneral), ("が", Particle)], 1),
                (&[("書い", Verb), ("た", Other)], 2),
                (&[("手紙", NounGeneral), ("を", Particle)], 3),
                (&[("読ん", Verb), ("だ", Other)], -1),
            ]),
            Some((0, 0, 1)),
        ),
        (
            "relative clause head noun only: fallback",
            s("a14", &[
                (&[("書い", Verb), ("た", Other)], 1),
                (&[("手紙", NounGeneral), ("を", Particle)], 2),
                (&[("読ん", Verb), ("だ", Other)], -1),
            ]),
            Some((1, 0, 1)),
        ),
        (
            "every noun modified: fallback to leftmost",
            s("a15", &[
                (&[("書い", Verb), ("た", Other)], 1),
                (&[("手紙", NounGeneral), ("を", Particle)], 2),
                (&[("読ん", Verb), ("だ", Other)], 3),
                (&[("友人", NounGeneral), ("が", Particle)], 4),
                (&[("笑っ", Verb), ("た", Other)], -1),
            ]),
            Some((1, 0, 1)),
        ),
        (
            "prefix before the noun",
            s("a16", &[(&[("お", Other), ("茶", NounGeneral), ("を", Particle)], 1), (&[("飲ん", Verb), ("だ", Other)], -1)]),
            Some((0, 1, 2)),
        ),
        (
            "numeral noun run",
            s("a17", &[
                (&[("３", NounOther), ("個", NounOther), ("の", Particle)], 1),
                (&[("りんご", NounGeneral), ("を", Particle)], 2),
                (&[("買っ", Verb), ("た", Other)], -1),
            ]),
            Some((0, 0, 2)),
        ),
        (
            "adjective-modified noun before verb-modified noun",
            s("a18", &[
                (&[("静かな", Adjective)], 1),
                (&[("部屋", NounGeneral), ("で", Particle)], 2),
                (&[("眠っ", Verb), ("た", Other)], 3),
                (&[("猫", NounGeneral), ("が", Particle)], 4),
                (&[("起き", Verb), ("た", Other)], -1),
            ]),
            Some((1, 0, 1)),
        ),
        (
            "noun predicate dependent disqualifies: fallback",
            s("a19", &[
                (&[("走る", Verb)], 1),
                (&[("医者", NounGeneral), ("だっ", Copula), ("た", Other)], 2),
                (&[("人", NounGeneral), ("が", Particle)], 3),
                (&[("来", Verb), ("た", Other)], -1),
            ]),
            Some((1, 0, 1)),
        ),
        (
            "first of several bare nouns",
            s("a20", &[
                (&[("雨", NounGeneral), ("が", Particle)], 1),
                (&[("降る", Verb)], 2),
                (&[("日", NounGeneral), ("に", Particle)], 4),
                (&[("公園", NounGeneral), ("へ", Particle)], 4),
                (&[("行っ", Verb), ("た", Other)], -1),
            ]),
            Some((0, 0, 1)),
        ),
    ]
}

/// Small corpora (each at most 20 tokens) used for the oracle comparison.
pub fn kn_corpora() -> Vec<Vec<Vec<String>>> {
    let mut out = vec![
        lines(&["a"]),
        lines(&["a b", "b a"]),
        lines(&["a b c", "a b d", "b c"]),
        lines(&["the cat sat", "the cat ran", "a dog sat"]),
        lines(&["a a a a", "a b a b", "b b"]),
        lines(&["x y z x y z", "z y x", "x x y y z z"]),
        lines(&["車 に 乗り ました", "彼 に 借り た 車 に 乗り ました"]),
    ];
    let mut rng = clausegen::rng::seeded(99);
    let alphabet = ["a", "b", "c", "d", "e"];
    for _ in 0..20 {
        let mut c = Vec::new();
        let mut budget = rng.random_range(1..=20);
        while budget > 0 {
            let len = rng.random_range(0..=budget.min(6));
            c.push((0..len).map(|_| alphabet.choose(&mut rng).unwrap().to_string()).collect());
            budget -= len.max(1);
        }
        out.push(c);
    }
    assert!(out.iter().all(|c: &Vec<Vec<String>>| c.iter().map(Vec::len).sum::<usize>() <= 20));
    out
}
