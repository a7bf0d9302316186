//! Independent reference implementations used by the integration tests.
//! They work on plain strings and recompute everything from raw sentences,
//! sharing no code with the library beyond the token constants.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::rngs::StdRng;
use rand::Rng;

use sublm::lm::LanguageModel;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

/// Random sentences over `vocab`, with a skewed word distribution so that
/// count tiers 1..4 all occur.
pub fn random_corpus(rng: &mut StdRng, vocab: &[String], sentences: usize, max_len: usize) -> Vec<Vec<String>> {
    (0..sentences)
        .map(|_| {
            let len = rng.gen_range(1..=max_len);
            (0..len)
                .map(|_| {
                    // Squaring a uniform draw favours the front of the list.
                    let u: f64 = rng.gen();
                    vocab[((u * u) * vocab.len() as f64) as usize].clone()
                })
                .collect()
        })
        .collect()
}

/// Replaces tokens at the given rate with words that occur nowhere else.
/// Natural text has such hapaxes; without them the unigram continuation
/// counts of a small vocabulary have no singletons and estimation refuses
/// the corpus.
pub fn sprinkle_hapaxes(rng: &mut StdRng, sentences: &mut [Vec<String>], rate: f64, tag: &str) {
    let mut next = 0;
    for s in sentences.iter_mut() {
        for t in s.iter_mut() {
            if rng.gen_bool(rate) {
                *t = format!("{tag}{next}");
                next += 1;
            }
        }
    }
}

pub fn words(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn padded(sentence: &[String]) -> Vec<String> {
    let mut p = vec![BOS.to_owned()];
    p.extend(sentence.iter().cloned());
    p.push(EOS.to_owned());
    p
}

/// Counts of every window of length 1..=order of every padded sentence.
pub fn brute_force_counts(sentences: &[Vec<String>], order: usize) -> Vec<BTreeMap<Vec<String>, u64>> {
    let mut tables = vec![BTreeMap::new(); order];
    for s in sentences {
        let p = padded(s);
        for k in 1..=order {
            if p.len() < k {
                continue;
            }
            for start in 0..=p.len() - k {
                *tables[k - 1].entry(p[start..start + k].to_vec()).or_insert(0) += 1;
            }
        }
    }
    tables
}

/// Interpolated modified Kneser-Ney computed by direct summation over the
/// adjusted counts for every query.
pub struct MknOracle {
    order: usize,
    adjusted: Vec<BTreeMap<Vec<String>, u64>>,
    discounts: Vec<Option<[f64; 3]>>,
    events: BTreeSet<String>,
}

/// Error value for corpora where some order has no singletons.
#[derive(Debug)]
pub struct NoSingletons(pub usize);

impl MknOracle {
    pub fn new(sentences: &[Vec<String>], order: usize) -> Result<Self, NoSingletons> {
        let raw = brute_force_counts(sentences, order);
        let mut adjusted = Vec::with_capacity(order);
        for k in 1..=order {
            let mut level = BTreeMap::new();
            for (g, &c) in &raw[k - 1] {
                if k == 1 && g[0] == BOS {
                    continue;
                }
                let a = if k == order || g[0] == BOS {
                    c
                } else {
                    // Distinct left neighbours.
                    raw[k].keys().filter(|longer| longer[1..] == g[..]).count() as u64
                };
                if a > 0 {
                    level.insert(g.clone(), a);
                }
            }
            adjusted.push(level);
        }

        let mut discounts = Vec::with_capacity(order);
        for (k, level) in adjusted.iter().enumerate() {
            if level.is_empty() {
                discounts.push(None);
                continue;
            }
            let n = |r: u64| level.values().filter(|&&a| a == r).count() as f64;
            let (n1, n2, n3, n4) = (n(1), n(2), n(3), n(4));
            if n1 == 0.0 {
                return Err(NoSingletons(k + 1));
            }
            let y = n1 / (n1 + 2.0 * n2);
            let d1 = 1.0 - 2.0 * y * n2 / n1;
            let d2 = if n2 > 0.0 { 2.0 - 3.0 * y * n3 / n2 } else { 0.0 };
            let d2 = if d2 > 0.0 { d2 } else { d1 };
            let d3 = if n3 > 0.0 && n4 > 0.0 { 3.0 - 4.0 * y * n4 / n3 } else { 0.0 };
            let d3 = if d3 > 0.0 { d3 } else { d2 };
            discounts.push(Some([d1, d2, d3]));
        }

        let mut events: BTreeSet<String> = sentences.iter().flatten().cloned().collect();
        events.insert(EOS.to_owned());
        events.insert(UNK.to_owned());
        Ok(MknOracle {
            order,
            adjusted,
            discounts,
            events,
        })
    }

    pub fn events(&self) -> Vec<String> {
        self.events.iter().cloned().collect()
    }

    fn discount(&self, k: usize, a: u64) -> f64 {
        match (a, self.discounts[k - 1]) {
            (0, _) | (_, None) => 0.0,
            (1, Some(d)) => d[0],
            (2, Some(d)) => d[1],
            (_, Some(d)) => d[2],
        }
    }

    /// P(word | context) with out-of-vocabulary tokens read as `<unk>`.
    pub fn prob(&self, context: &[&str], word: &str) -> f64 {
        let map = |t: &str| -> String {
            if t == BOS || self.events.contains(t) {
                t.to_owned()
            } else {
                UNK.to_owned()
            }
        };
        let keep = context.len().min(self.order - 1);
        let h: Vec<String> = context[context.len() - keep..].iter().map(|t| map(t)).collect();
        self.prob_mapped(&h, &map(word))
    }

    fn prob_mapped(&self, h: &[String], w: &str) -> f64 {
        let k = h.len() + 1;
        let mut total = 0u64;
        let mut leftover = 0.0;
        let mut a_hw = 0u64;
        for (g, &a) in &self.adjusted[k - 1] {
            if g[..k - 1] == *h {
                total += a;
                leftover += self.discount(k, a);
                if g[k - 1] == w {
                    a_hw = a;
                }
            }
        }
        if k == 1 {
            let uniform = 1.0 / self.events.len() as f64;
            return (a_hw as f64 - self.discount(1, a_hw)) / total as f64 + leftover / total as f64 * uniform;
        }
        let lower = self.prob_mapped(&h[1..], w);
        if total == 0 {
            return lower;
        }
        (a_hw as f64 - self.discount(k, a_hw)) / total as f64 + leftover / total as f64 * lower
    }
}

/// Edit distance by the textbook recurrence on two rows.
pub fn edit_distance(a: &[String], b: &[String]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j]
            } else {
                1 + prev[j].min(prev[j + 1]).min(cur[j])
            };
        }
        prev = cur;
    }
    prev[b.len()]
}

/// Linear probabilities of every dev token (words and `</s>`) under each
/// model, one row per token.
pub fn token_probs(models: &[&dyn LanguageModel], dev: &[Vec<String>]) -> Vec<Vec<f64>> {
    let mut rows = Vec::new();
    for s in dev {
        let mut history = vec![BOS];
        for w in s.iter().map(String::as_str).chain([EOS]) {
            rows.push(models.iter().map(|m| 10f64.powf(m.log10_prob(&history, w))).collect());
            history.push(w);
        }
    }
    rows
}

pub fn mixture_loglik(rows: &[Vec<f64>], lambda: &[f64]) -> f64 {
    rows.iter()
        .map(|r| r.iter().zip(lambda).map(|(p, l)| p * l).sum::<f64>().log10())
        .sum()
}

/// Best weight of the first of two components on a grid of step 0.001,
/// with its log10 likelihood.
pub fn grid_search_two(rows: &[Vec<f64>]) -> (f64, f64) {
    (0..=1000)
        .map(|i| {
            let l = i as f64 / 1000.0;
            (l, mixture_loglik(rows, &[l, 1.0 - l]))
        })
        .fold((0.0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
}
