//! Interpolated modified Kneser-Ney n-gram language model.
//!
//! Sentences are padded with `N-1` copies of `<s>` and terminated with
//! `</s>`. The highest order uses raw counts; every lower order uses
//! continuation counts (the number of distinct left extensions). Each order
//! has three discounts taken from its counts-of-counts:
//!
//! ```text
//! Y   = n1 / (n1 + 2 n2)
//! D1  = 1 - 2 Y n2 / n1
//! D2  = 2 - 3 Y n3 / n2
//! D3+ = 3 - 4 Y n4 / n3
//! ```
//!
//! and the recursion bottoms out in the uniform distribution over the
//! vocabulary (which contains `<s>`, `</s>` and `<unk>`).

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

/// Discount used for an order whose counts-of-counts leave the modified
/// discounts undefined or out of range.
pub const FALLBACK_DISCOUNT: f64 = 0.75;

#[derive(Debug, Clone, Default, PartialEq)]
struct ContextStats {
    total: u64,
    /// Number of continuations seen once, twice, and three or more times.
    n: [u64; 3],
}

#[derive(Debug, Clone, PartialEq)]
struct OrderTable {
    counts: HashMap<Vec<u32>, u64>,
    contexts: HashMap<Vec<u32>, ContextStats>,
    discounts: [f64; 3],
}

impl OrderTable {
    fn from_counts(counts: HashMap<Vec<u32>, u64>, discounts: [f64; 3]) -> Self {
        let mut contexts: HashMap<Vec<u32>, ContextStats> = HashMap::new();
        for (gram, &c) in &counts {
            let st = contexts.entry(gram[..gram.len() - 1].to_vec()).or_default();
            st.total += c;
            st.n[(c.min(3) - 1) as usize] += 1;
        }
        OrderTable { counts, contexts, discounts }
    }

    fn discount(&self, count: u64) -> f64 {
        match count {
            0 => 0.0,
            1 => self.discounts[0],
            2 => self.discounts[1],
            _ => self.discounts[2],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NgramLm {
    order: usize,
    vocab: Vec<String>,
    ids: HashMap<String, u32>,
    /// `tables[k - 1]` holds the order-`k` statistics.
    tables: Vec<OrderTable>,
}

/// Modified discounts from counts-of-counts `[n1, n2, n3, n4]`, or `None`
/// when they are undefined or fall outside `D1 <= 1, D2 <= 2, D3+ <= 3`.
pub fn modified_discounts(n: [u64; 4]) -> Option<[f64; 3]> {
    let [n1, n2, n3, n4] = n.map(|x| x as f64);
    if n1 == 0.0 || n2 == 0.0 || n3 == 0.0 {
        return None;
    }
    let y = n1 / (n1 + 2.0 * n2);
    let d = [1.0 - 2.0 * y * n2 / n1, 2.0 - 3.0 * y * n3 / n2, 3.0 - 4.0 * y * n4 / n3];
    let in_range = d.iter().zip([1.0, 2.0, 3.0]).all(|(&x, hi)| (0.0..=hi).contains(&x));
    in_range.then_some(d)
}

impl NgramLm {
    pub fn fit<S: AsRef<str>>(corpus: &[Vec<S>], order: usize) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::contract("cannot fit a language model on an empty corpus"));
        }
        if order == 0 {
            return Err(Error::config("ngram-order", "must be at least 1"));
        }
        let mut vocab_set: BTreeSet<&str> = [BOS, EOS, UNK].into_iter().collect();
        for s in corpus {
            vocab_set.extend(s.iter().map(AsRef::as_ref));
        }
        let mut lm = Self::with_vocab(vocab_set.into_iter().map(String::from).collect(), order);
        let bos = lm.ids[BOS];
        let eos = lm.ids[EOS];

        let mut top: HashMap<Vec<u32>, u64> = HashMap::new();
        for s in corpus {
            let mut padded = vec![bos; order - 1];
            padded.extend(s.iter().map(|t| lm.ids[t.as_ref()]));
            padded.push(eos);
            for end in order - 1..padded.len() {
                *top.entry(padded[end + 1 - order..=end].to_vec()).or_default() += 1;
            }
        }

        let mut per_order = vec![top];
        for _ in 1..order {
            let higher = per_order.last().unwrap();
            let mut lower: HashMap<Vec<u32>, u64> = HashMap::new();
            for gram in higher.keys() {
                *lower.entry(gram[1..].to_vec()).or_default() += 1;
            }
            per_order.push(lower);
        }
        per_order.reverse();

        lm.tables = per_order
            .into_iter()
            .enumerate()
            .map(|(k, counts)| {
                let mut n = [0u64; 4];
                for &c in counts.values() {
                    if (1..=4).contains(&c) {
                        n[c as usize - 1] += 1;
                    }
                }
                let discounts = modified_discounts(n).unwrap_or_else(|| {
                    log::warn!(
                        "order {}: counts-of-counts {n:?} give no valid modified discounts, using {FALLBACK_DISCOUNT}",
                        k + 1
                    );
                    [FALLBACK_DISCOUNT; 3]
                });
                OrderTable::from_counts(counts, discounts)
            })
            .collect();
        Ok(lm)
    }

    /// The uniform distribution over `vocab` plus `<s>`, `</s>` and `<unk>`.
    pub fn uniform<S: AsRef<str>>(vocab: impl IntoIterator<Item = S>) -> Self {
        let mut set: BTreeSet<String> = [BOS, EOS, UNK].into_iter().map(String::from).collect();
        set.extend(vocab.into_iter().map(|s| s.as_ref().to_string()));
        Self::with_vocab(set.into_iter().collect(), 0)
    }

    fn with_vocab(vocab: Vec<String>, order: usize) -> Self {
        let ids = vocab.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        NgramLm { order, vocab, ids, tables: Vec::new() }
    }

    /// Model order; 0 for the uniform model.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.ids.contains_key(token)
    }

    /// `(D1, D2, D3+)` for order `k` (1-based).
    pub fn discounts(&self, k: usize) -> [f64; 3] {
        self.tables[k - 1].discounts
    }

    /// Adjusted count of an n-gram: raw at the top order, continuation below.
    pub fn count(&self, gram: &[&str]) -> u64 {
        let Some(ids) = gram.iter().map(|t| self.ids.get(*t).copied()).collect::<Option<Vec<_>>>() else {
            return 0;
        };
        self.tables
            .get(gram.len().wrapping_sub(1))
            .and_then(|t| t.counts.get(&ids))
            .copied()
            .unwrap_or(0)
    }

    fn id_or_unk(&self, token: &str) -> u32 {
        self.ids.get(token).copied().unwrap_or(self.ids[UNK])
    }

    /// P(token | history). Only the last `N-1` history tokens matter; unknown
    /// tokens are scored as `<unk>`.
    pub fn prob<S: AsRef<str>>(&self, token: &str, history: &[S]) -> f64 {
        let keep = self.order.saturating_sub(1).min(history.len());
        let ctx: Vec<u32> = history[history.len() - keep..].iter().map(|t| self.id_or_unk(t.as_ref())).collect();
        self.prob_ids(self.id_or_unk(token), &ctx)
    }

    fn prob_ids(&self, word: u32, ctx: &[u32]) -> f64 {
        let uniform = 1.0 / self.vocab.len() as f64;
        let top = self.order.min(ctx.len() + 1);
        let mut p = uniform;
        // Build up from unigrams to the longest usable context.
        for k in 1..=top {
            let table = &self.tables[k - 1];
            let context = &ctx[ctx.len() + 1 - k..];
            let Some(stats) = table.contexts.get(context) else { continue };
            let mut gram = context.to_vec();
            gram.push(word);
            let c = table.counts.get(&gram).copied().unwrap_or(0);
            let d = table.discount(c);
            let [d1, d2, d3] = table.discounts;
            let backoff_mass = d1 * stats.n[0] as f64 + d2 * stats.n[1] as f64 + d3 * stats.n[2] as f64;
            p = ((c as f64 - d).max(0.0) + backoff_mass * p) / stats.total as f64;
        }
        p
    }

    /// Log-probabilities of each token of `sentence` followed by `</s>`.
    pub fn sentence_log_probs<S: AsRef<str>>(&self, sentence: &[S]) -> Vec<f64> {
        let bos = self.ids[BOS];
        let mut history = vec![bos; self.order.saturating_sub(1)];
        let mut out = Vec::with_capacity(sentence.len() + 1);
        let words = sentence.iter().map(|t| self.id_or_unk(t.as_ref())).chain(std::iter::once(self.ids[EOS]));
        for w in words {
            let ctx = &history[history.len() - self.order.saturating_sub(1)..];
            out.push(self.prob_ids(w, ctx).ln());
            history.push(w);
        }
        out
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "#ngram-lm\t1")?;
        writeln!(out, "#order\t{}", self.order)?;
        for (k, t) in self.tables.iter().enumerate() {
            let [d1, d2, d3] = t.discounts;
            writeln!(out, "#discount\t{}\t{d1}\t{d2}\t{d3}", k + 1)?;
        }
        for v in &self.vocab {
            writeln!(out, "#vocab\t{v}")?;
        }
        let mut lines = Vec::new();
        for (k, t) in self.tables.iter().enumerate() {
            for (gram, c) in &t.counts {
                let ctx: Vec<&str> = gram[..k].iter().map(|&i| self.vocab[i as usize].as_str()).collect();
                lines.push((k + 1, ctx.join(" "), self.vocab[gram[k] as usize].as_str(), *c));
            }
        }
        lines.sort_unstable();
        for (k, ctx, tok, c) in lines {
            writeln!(out, "{k}\t{ctx}\t{tok}\t{c}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let bad = |line: usize, message: &str| Error::LmFormat { line, message: message.to_string() };
        let mut order = None;
        let mut discounts: Vec<(usize, [f64; 3])> = Vec::new();
        let mut vocab = Vec::new();
        let mut grams: Vec<(usize, Vec<String>, u64)> = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let no = i + 1;
            let fields: Vec<&str> = line.split('\t').collect();
            match fields[0] {
                "#ngram-lm" => {}
                "#order" => order = Some(fields.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| bad(no, "bad order"))?),
                "#discount" => {
                    let nums: Option<Vec<f64>> = fields[1..].iter().map(|s| s.parse().ok()).collect();
                    match nums.as_deref() {
                        Some(&[k, d1, d2, d3]) => discounts.push((k as usize, [d1, d2, d3])),
                        _ => return Err(bad(no, "bad discount line")),
                    }
                }
                "#vocab" => vocab.push(fields.get(1).ok_or_else(|| bad(no, "bad vocab line"))?.to_string()),
                _ => {
                    let [k, ctx, tok, c] = fields[..] else { return Err(bad(no, "expected 4 fields")) };
                    let k: usize = k.parse().map_err(|_| bad(no, "bad order field"))?;
                    let c: u64 = c.parse().map_err(|_| bad(no, "bad count"))?;
                    let mut gram: Vec<String> = ctx.split(' ').filter(|s| !s.is_empty()).map(String::from).collect();
                    gram.push(tok.to_string());
                    if gram.len() != k {
                        return Err(bad(no, "context length does not match order"));
                    }
                    grams.push((k, gram, c));
                }
            }
        }
        let order = order.ok_or_else(|| bad(0, "missing #order header"))?;
        let mut lm = Self::with_vocab(vocab, order);
        if lm.ids.len() != lm.vocab.len() || !lm.ids.contains_key(UNK) || !lm.ids.contains_key(BOS) {
            return Err(bad(0, "vocabulary must be unique and contain <s> and <unk>"));
        }
        let mut counts: Vec<HashMap<Vec<u32>, u64>> = vec![HashMap::new(); order];
        for (k, gram, c) in grams {
            if k == 0 || k > order {
                return Err(bad(0, "n-gram order out of range"));
            }
            let ids = gram.iter().map(|t| lm.ids.get(t).copied()).collect::<Option<Vec<_>>>();
            counts[k - 1].insert(ids.ok_or_else(|| bad(0, "n-gram token missing from vocabulary"))?, c);
        }
        let mut d_by_order = vec![None; order];
        for (k, d) in discounts {
            if k == 0 || k > order {
                return Err(bad(0, "discount order out of range"));
            }
            d_by_order[k - 1] = Some(d);
        }
        lm.tables = counts
            .into_iter()
            .zip(d_by_order)
            .map(|(c, d)| d.map(|d| OrderTable::from_counts(c, d)))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| bad(0, "missing discount header"))?;
        Ok(lm)
    }
}

/// exp of the negative mean log-probability per token, `</s>` included.
pub fn perplexity<S: AsRef<str>>(lm: &NgramLm, corpus: &[Vec<S>]) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::contract("cannot score an empty corpus"));
    }
    if lm.order() == 0 {
        // Closed form; exp(ln V) does not always round back to V.
        return Ok(lm.vocab_size() as f64);
    }
    let (sum, n) = corpus.iter().fold((0.0, 0usize), |(sum, n), s| {
        let lp = lm.sentence_log_probs(s);
        (sum + lp.iter().sum::<f64>(), n + lp.len())
    });
    Ok((-sum / n as f64).exp())
}
