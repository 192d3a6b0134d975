//! Interpolated modified Kneser-Ney computed the slow way: string n-grams,
//! counts re-enumerated from the padded corpus, and a top-down recursion that
//! sums over the whole vocabulary for every backoff weight.

use std::collections::{BTreeSet, HashMap, HashSet};

pub struct BruteKn {
    pub order: usize,
    pub vocab: Vec<String>,
    /// `counts[k - 1]`: adjusted count of every order-`k` gram.
    counts: Vec<HashMap<Vec<String>, u64>>,
    pub discounts: Vec<[f64; 3]>,
}

fn discounts_from(counts: &HashMap<Vec<String>, u64>) -> [f64; 3] {
    let n = |c: u64| counts.values().filter(|&&x| x == c).count() as f64;
    let (n1, n2, n3, n4) = (n(1), n(2), n(3), n(4));
    if n1 == 0.0 || n2 == 0.0 || n3 == 0.0 {
        return [0.75; 3];
    }
    let y = n1 / (n1 + 2.0 * n2);
    let d = [1.0 - 2.0 * y * n2 / n1, 2.0 - 3.0 * y * n3 / n2, 3.0 - 4.0 * y * n4 / n3];
    if d[0] < 0.0 || d[0] > 1.0 || d[1] < 0.0 || d[1] > 2.0 || d[2] < 0.0 || d[2] > 3.0 {
        return [0.75; 3];
    }
    d
}

impl BruteKn {
    pub fn fit(corpus: &[Vec<String>], order: usize) -> Self {
        let mut vocab: BTreeSet<String> = ["<s>", "</s>", "<unk>"].iter().map(|s| s.to_string()).collect();
        for s in corpus {
            vocab.extend(s.iter().cloned());
        }
        let padded: Vec<Vec<String>> = corpus
            .iter()
            .map(|s| {
                let mut p = vec!["<s>".to_string(); order - 1];
                p.extend(s.iter().cloned());
                p.push("</s>".to_string());
                p
            })
            .collect();

        let mut counts = vec![HashMap::new(); order];
        for p in &padded {
            for e in order - 1..p.len() {
                *counts[order - 1].entry(p[e + 1 - order..=e].to_vec()).or_insert(0u64) += 1;
            }
        }
        // Continuation counts: distinct left extensions among the order-(k+1)
        // windows that end where a full-order window ends.
        for k in (1..order).rev() {
            let mut left: HashMap<Vec<String>, HashSet<String>> = HashMap::new();
            for p in &padded {
                for e in order - 1..p.len() {
                    let window = &p[e - k..=e];
                    left.entry(window[1..].to_vec()).or_default().insert(window[0].clone());
                }
            }
            counts[k - 1] = left.into_iter().map(|(g, s)| (g, s.len() as u64)).collect();
        }
        let discounts = counts.iter().map(discounts_from).collect();
        BruteKn { order, vocab: vocab.into_iter().collect(), counts, discounts }
    }

    fn c(&self, gram: &[String]) -> u64 {
        self.counts[gram.len() - 1].get(gram).copied().unwrap_or(0)
    }

    fn d(&self, k: usize, c: u64) -> f64 {
        match c {
            0 => 0.0,
            1 => self.discounts[k - 1][0],
            2 => self.discounts[k - 1][1],
            _ => self.discounts[k - 1][2],
        }
    }

    fn p(&self, w: &str, ctx: &[String]) -> f64 {
        let lower = if ctx.is_empty() { 1.0 / self.vocab.len() as f64 } else { self.p(w, &ctx[1..]) };
        let k = ctx.len() + 1;
        let extend = |v: &str| {
            let mut g = ctx.to_vec();
            g.push(v.to_string());
            g
        };
        let mut total = 0u64;
        let mut gamma = 0.0;
        for v in &self.vocab {
            let c = self.c(&extend(v));
            total += c;
            gamma += self.d(k, c);
        }
        if total == 0 {
            return lower;
        }
        let c = self.c(&extend(w));
        ((c as f64 - self.d(k, c)).max(0.0) + gamma * lower) / total as f64
    }

    fn known(&self, t: &str) -> String {
        if self.vocab.iter().any(|v| v == t) { t.to_string() } else { "<unk>".to_string() }
    }

    pub fn prob(&self, w: &str, history: &[String]) -> f64 {
        let keep = (self.order - 1).min(history.len());
        let ctx: Vec<String> = history[history.len() - keep..].iter().map(|t| self.known(t)).collect();
        self.p(&self.known(w), &ctx)
    }

    pub fn perplexity(&self, corpus: &[Vec<String>]) -> f64 {
        let mut log_sum = 0.0;
        let mut n = 0usize;
        for s in corpus {
            let mut history = vec!["<s>".to_string(); self.order - 1];
            for w in s.iter().cloned().chain(["</s>".to_string()]) {
                log_sum += self.prob(&w, &history).ln();
                history.push(w);
                n += 1;
            }
        }
        (-log_sum / n as f64).exp()
    }
}
