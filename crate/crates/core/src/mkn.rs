//! Interpolated modified Kneser-Ney estimation.
//!
//! For a k-gram `h w` with adjusted count `a`, context total
//! `T(h) = sum_v a(h v)` and `N_r(h)` the number of continuations of `h`
//! whose adjusted count is 1, 2 or at least 3:
//!
//! ```text
//! gamma(h)  = (D1 N1(h) + D2 N2(h) + D3+ N3+(h)) / T(h)
//! P(w | h)  = (a(h w) - D(a(h w))) / T(h) + gamma(h) P(w | h')
//! P(w)      = (a(w) - D(a(w))) / T + gamma / |V|
//! ```
//!
//! where `h'` drops the oldest token of `h` and `V` is the set of predictable
//! events (the vocabulary without `<s>`, always including `</s>` and
//! `<unk>`). The highest order uses raw counts; lower orders use
//! continuation counts (the number of distinct left neighbours), except for
//! n-grams starting with `<s>`, which have no left neighbour and keep their
//! raw counts. Discounts come from count-of-counts of the adjusted counts at
//! each order.
//!
//! Emitted ARPA probabilities are the interpolated `P(w | h)` and backoff
//! weights are `gamma(h)`, so standard backoff lookup reproduces the
//! interpolated distribution exactly.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::arpa::{ArpaModel, NgramEntry, NON_EVENT};
use crate::counts::{limit_vocab, CountTable, VocabPolicy, UNK};
use crate::textnorm::{BOS, EOS};

#[derive(Debug, Error, PartialEq)]
pub enum MknError {
    #[error(
        "insufficient statistics at order {order}: n1={} n2={} n3={} n4={}",
        n[0], n[1], n[2], n[3]
    )]
    InsufficientStatistics { order: usize, n: [u64; 4] },
    #[error("count table has order {table} but the model order is {config}")]
    OrderMismatch { table: usize, config: usize },
    #[error("invalid <unk> floor {0}: must lie in (0, 1)")]
    InvalidUnkFloor(f64),
}

/// Absolute discounts of one order, indexed by count tier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discounts {
    pub d1: f64,
    pub d2: f64,
    pub d3plus: f64,
    /// Number of n-grams with adjusted count exactly 1, 2, 3 and 4.
    pub count_of_counts: [u64; 4],
}

impl Discounts {
    /// Closed-form estimates from count-of-counts. Needs n1 and n2 to be
    /// positive. A D3+ that cannot be computed (n3 or n4 zero) or comes out
    /// nonpositive takes the value of D2.
    pub fn from_count_of_counts(n: [u64; 4], order: usize) -> Result<Self, MknError> {
        if n[0] == 0 || n[1] == 0 {
            return Err(MknError::InsufficientStatistics { order, n });
        }
        Ok(Self::derive(n))
    }

    /// As [`Discounts::from_count_of_counts`] but also tolerates n2 = 0, in
    /// which case D2 falls back to D1. Only n1 = 0 is fatal.
    pub fn with_fallback(n: [u64; 4], order: usize) -> Result<Self, MknError> {
        if n[0] == 0 {
            return Err(MknError::InsufficientStatistics { order, n });
        }
        Ok(Self::derive(n))
    }

    fn derive(n: [u64; 4]) -> Self {
        let [n1, n2, n3, n4] = n.map(|c| c as f64);
        let y = n1 / (n1 + 2.0 * n2);
        let d1 = (1.0 - 2.0 * y * n2 / n1).clamp(0.0, 1.0);
        let d2 = if n2 > 0.0 {
            2.0 - 3.0 * y * n3 / n2
        } else {
            f64::NAN
        };
        let d2 = if d2 > 0.0 { d2.min(2.0) } else { d1 };
        let d3plus = if n3 > 0.0 && n4 > 0.0 {
            3.0 - 4.0 * y * n4 / n3
        } else {
            f64::NAN
        };
        let d3plus = if d3plus > 0.0 { d3plus.min(3.0) } else { d2 };
        Discounts {
            d1,
            d2,
            d3plus,
            count_of_counts: n,
        }
    }

    pub fn for_count(&self, count: u64) -> f64 {
        match count {
            0 => 0.0,
            1 => self.d1,
            2 => self.d2,
            _ => self.d3plus,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub order: usize,
    pub vocab_policy: VocabPolicy,
    /// Minimum unigram probability for `<unk>`. When set and not met, the
    /// other unigram probabilities are scaled down to make room.
    pub unk_floor: Option<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            order: 5,
            vocab_policy: VocabPolicy::OpenFull,
            unk_floor: None,
        }
    }
}

impl ModelConfig {
    pub fn with_order(order: usize) -> Self {
        ModelConfig {
            order,
            ..Self::default()
        }
    }
}

type Ids = Vec<u32>;

/// Adjusted counts of every order, keyed by interned n-grams.
struct Adjusted {
    words: Vec<String>,
    bos: u32,
    /// `orders[k - 1]`: k-gram -> adjusted count, sorted by key for a fixed
    /// summation order.
    orders: Vec<Vec<(Ids, u64)>>,
}

impl Adjusted {
    fn from_table(table: &CountTable) -> Self {
        let mut vocab: BTreeSet<&str> = table.vocab();
        vocab.insert(BOS);
        vocab.insert(EOS);
        vocab.insert(UNK);
        let words: Vec<String> = vocab.into_iter().map(str::to_owned).collect();
        let ids: HashMap<&str, u32> = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.as_str(), i as u32))
            .collect();
        let bos = ids[BOS];
        let intern = |g: &[String]| -> Ids { g.iter().map(|t| ids[t.as_str()]).collect() };

        let n = table.order();
        let mut orders = Vec::with_capacity(n);
        for k in 1..=n {
            let mut continuation: HashMap<Ids, u64> = HashMap::new();
            if k < n {
                // Keys are unique, so each (left neighbour, suffix) pair
                // counts once.
                for longer in table.table(k + 1).keys() {
                    *continuation.entry(intern(&longer[1..])).or_insert(0) += 1;
                }
            }
            let mut entries: Vec<(Ids, u64)> = table
                .table(k)
                .iter()
                .filter(|(g, _)| !(k == 1 && g[0] == BOS))
                .map(|(g, &raw)| {
                    let key = intern(g);
                    let adjusted = if k == n || key[0] == bos {
                        raw
                    } else {
                        continuation.get(&key).copied().unwrap_or(0)
                    };
                    (key, adjusted)
                })
                .filter(|(_, a)| *a > 0)
                .collect();
            entries.sort_unstable();
            orders.push(entries);
        }
        Adjusted { words, bos, orders }
    }

    fn count_of_counts(&self, k: usize) -> [u64; 4] {
        let mut n = [0u64; 4];
        for (_, a) in &self.orders[k - 1] {
            if (1..=4).contains(a) {
                n[*a as usize - 1] += 1;
            }
        }
        n
    }
}

/// Discounts for order `k` of a count table, from the adjusted counts the
/// estimator uses at that order.
pub fn compute_discounts(table: &CountTable, k: usize) -> Result<Discounts, MknError> {
    assert!((1..=table.order()).contains(&k), "order {k} outside the table");
    Discounts::from_count_of_counts(Adjusted::from_table(table).count_of_counts(k), k)
}

#[derive(Debug, Default, Clone, Copy)]
struct ContextStats {
    total: u64,
    tiers: [u64; 3],
}

impl ContextStats {
    fn gamma(&self, d: &Discounts) -> f64 {
        (d.d1 * self.tiers[0] as f64 + d.d2 * self.tiers[1] as f64 + d.d3plus * self.tiers[2] as f64)
            / self.total as f64
    }
}

/// Per-order discounts and the estimated model.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub model: ArpaModel,
    /// `discounts[k - 1]`, `None` for orders without any n-gram.
    pub discounts: Vec<Option<Discounts>>,
}

/// Estimates an interpolated modified Kneser-Ney model.
pub fn estimate(table: &CountTable, config: &ModelConfig) -> Result<ArpaModel, MknError> {
    estimate_with_discounts(table, config).map(|e| e.model)
}

pub fn estimate_with_discounts(table: &CountTable, config: &ModelConfig) -> Result<Estimate, MknError> {
    if table.order() != config.order {
        return Err(MknError::OrderMismatch {
            table: table.order(),
            config: config.order,
        });
    }
    if let Some(floor) = config.unk_floor {
        if !(floor > 0.0 && floor < 1.0) {
            return Err(MknError::InvalidUnkFloor(floor));
        }
    }
    let table = limit_vocab(table, config.vocab_policy);
    let adjusted = Adjusted::from_table(&table);
    let order = config.order;

    let mut discounts = Vec::with_capacity(order);
    for k in 1..=order {
        if adjusted.orders[k - 1].is_empty() {
            if k == 1 {
                return Err(MknError::InsufficientStatistics { order: 1, n: [0; 4] });
            }
            discounts.push(None);
        } else {
            discounts.push(Some(Discounts::with_fallback(adjusted.count_of_counts(k), k)?));
        }
    }

    // Context statistics per order: context (k-1 tokens) -> totals.
    let mut contexts: Vec<HashMap<Ids, ContextStats>> = Vec::with_capacity(order);
    for k in 1..=order {
        let mut stats: HashMap<Ids, ContextStats> = HashMap::new();
        for (g, a) in &adjusted.orders[k - 1] {
            let s = stats.entry(g[..k - 1].to_vec()).or_default();
            s.total += a;
            s.tiers[(*a).min(3) as usize - 1] += 1;
        }
        contexts.push(stats);
    }

    // Linear-space probabilities per order, n-gram -> P(w | h).
    let mut probs: Vec<HashMap<Ids, f64>> = Vec::with_capacity(order);

    let uni_discounts = discounts[0].expect("order 1 is never empty");
    let uni_stats = contexts[0][&Vec::new()];
    let uni_gamma = uni_stats.gamma(&uni_discounts);
    let seen: HashMap<u32, u64> = adjusted.orders[0].iter().map(|(g, a)| (g[0], *a)).collect();
    let events: Vec<u32> = (0..adjusted.words.len() as u32)
        .filter(|&w| w != adjusted.bos)
        .collect();
    let uniform = 1.0 / events.len() as f64;
    let mut unigrams: HashMap<Ids, f64> = events
        .iter()
        .map(|&w| {
            let a = seen.get(&w).copied().unwrap_or(0);
            let p = (a as f64 - uni_discounts.for_count(a)) / uni_stats.total as f64 + uni_gamma * uniform;
            (vec![w], p)
        })
        .collect();
    if let Some(floor) = config.unk_floor {
        let unk = vec![adjusted.words.binary_search_by(|w| w.as_str().cmp(UNK)).unwrap() as u32];
        let current = unigrams[&unk];
        if current < floor {
            let scale = (1.0 - floor) / (1.0 - current);
            for (g, p) in unigrams.iter_mut() {
                *p = if *g == unk { floor } else { *p * scale };
            }
        }
    }
    probs.push(unigrams);

    for k in 2..=order {
        let Some(d) = discounts[k - 1] else {
            probs.push(HashMap::new());
            continue;
        };
        let mut level = HashMap::with_capacity(adjusted.orders[k - 1].len());
        for (g, a) in &adjusted.orders[k - 1] {
            let stats = &contexts[k - 1][&g[..k - 1]];
            let lower = interpolated(&probs, &contexts, &discounts, &g[1..]);
            let p = (*a as f64 - d.for_count(*a)) / stats.total as f64 + stats.gamma(&d) * lower;
            level.insert(g.clone(), p);
        }
        probs.push(level);
    }

    let mut model = ArpaModel::new(order);
    let name = |g: &[u32]| -> Vec<String> { g.iter().map(|&i| adjusted.words[i as usize].clone()).collect() };
    let backoff_of = |g: &Ids| -> Option<f64> {
        let k = g.len();
        if k >= order {
            return None;
        }
        let d = discounts[k].as_ref()?;
        contexts[k].get(g).map(|s| s.gamma(d).log10())
    };
    let bos = vec![adjusted.bos];
    model.insert(
        name(&bos),
        NgramEntry {
            logprob: NON_EVENT,
            backoff: backoff_of(&bos),
        },
    );
    for level in &probs {
        for (g, p) in level {
            model.insert(
                name(g),
                NgramEntry {
                    logprob: p.log10(),
                    backoff: backoff_of(g),
                },
            );
        }
    }
    Ok(Estimate { model, discounts })
}

/// P(w | h) for `ngram = h w` from the orders built so far, following the
/// interpolation recursion for n-grams that are not stored.
fn interpolated(
    probs: &[HashMap<Ids, f64>],
    contexts: &[HashMap<Ids, ContextStats>],
    discounts: &[Option<Discounts>],
    ngram: &[u32],
) -> f64 {
    let k = ngram.len();
    if let Some(p) = probs[k - 1].get(ngram) {
        return *p;
    }
    // Not stored: the context either was never seen (full backoff) or
    // leaves only its leftover mass for this word.
    let lower = interpolated(probs, contexts, discounts, &ngram[1..]);
    match (contexts[k - 1].get(&ngram[..k - 1]), &discounts[k - 1]) {
        (Some(stats), Some(d)) => stats.gamma(d) * lower,
        _ => lower,
    }
}
