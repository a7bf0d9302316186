//! N-gram counting with sentence boundary tokens, vocabulary capping, and
//! the tab-separated count file format.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::textnorm::{NormalizedCorpus, BOS, EOS};

pub const UNK: &str = "<unk>";

pub type Ngram = Vec<String>;

#[derive(Debug, Error)]
pub enum CountError {
    #[error("n-gram order must be at least 1")]
    InvalidOrder,
    #[error("sentence {index} is empty")]
    EmptySentence { index: usize },
    #[error("sentence {index} contains the reserved token {token}")]
    ReservedToken { index: usize, token: String },
    #[error("cannot merge count tables of order {left} and {right}")]
    OrderMismatch { left: usize, right: usize },
    #[error("line {line}: malformed count line: {reason}")]
    MalformedCountLine { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Per-order n-gram counts. Zero counts are never stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    order: usize,
    /// `tables[k - 1]` holds the k-grams.
    tables: Vec<BTreeMap<Ngram, u64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VocabPolicy {
    /// Every training word stays in the vocabulary.
    #[default]
    OpenFull,
    /// Keep the `cap` most frequent words; map the rest to `<unk>`.
    OpenCapped { cap: usize },
}

impl CountTable {
    pub fn new(order: usize) -> Result<Self, CountError> {
        if order == 0 {
            return Err(CountError::InvalidOrder);
        }
        Ok(CountTable {
            order,
            tables: vec![BTreeMap::new(); order],
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// The k-gram table, `1 <= k <= order`.
    pub fn table(&self, k: usize) -> &BTreeMap<Ngram, u64> {
        &self.tables[k - 1]
    }

    pub fn get(&self, ngram: &[&str]) -> u64 {
        if ngram.is_empty() || ngram.len() > self.order {
            return 0;
        }
        let key: Ngram = ngram.iter().map(|s| s.to_string()).collect();
        self.tables[ngram.len() - 1].get(&key).copied().unwrap_or(0)
    }

    /// Adds `count` to an n-gram. Adding zero is a no-op.
    pub fn add(&mut self, ngram: Ngram, count: u64) {
        assert!(
            !ngram.is_empty() && ngram.len() <= self.order,
            "n-gram length {} outside 1..={}",
            ngram.len(),
            self.order
        );
        if count > 0 {
            *self.tables[ngram.len() - 1].entry(ngram).or_insert(0) += count;
        }
    }

    /// All tokens seen as unigrams, boundary tokens and `<unk>` included.
    pub fn vocab(&self) -> BTreeSet<&str> {
        self.tables[0].keys().map(|k| k[0].as_str()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.iter().all(BTreeMap::is_empty)
    }

    pub fn len(&self) -> usize {
        self.tables.iter().map(BTreeMap::len).sum()
    }

    /// Raises the order, leaving the new higher orders empty. Lowering is
    /// not supported.
    pub fn with_order(mut self, order: usize) -> Self {
        if order > self.order {
            self.tables.resize(order, BTreeMap::new());
            self.order = order;
        }
        self
    }

    /// Iterates over every (n-gram, count) by order, then token order.
    pub fn iter(&self) -> impl Iterator<Item = (&Ngram, u64)> {
        self.tables.iter().flat_map(|t| t.iter().map(|(k, v)| (k, *v)))
    }
}

/// Counts all n-grams up to order `order`. Each sentence is padded with one
/// `<s>` and one `</s>`; `<s>` is counted as a unigram and as context but
/// never as the last token of a longer n-gram.
pub fn count_ngrams(corpus: &NormalizedCorpus, order: usize) -> Result<CountTable, CountError> {
    let mut table = CountTable::new(order)?;
    let mut scratch: HashMap<&[String], u64> = HashMap::new();
    let padded: Vec<Vec<String>> = corpus
        .sentences
        .iter()
        .enumerate()
        .map(|(index, sentence)| {
            if sentence.is_empty() {
                return Err(CountError::EmptySentence { index });
            }
            if let Some(token) = sentence.iter().find(|t| *t == BOS || *t == EOS) {
                return Err(CountError::ReservedToken {
                    index,
                    token: token.clone(),
                });
            }
            let mut p = Vec::with_capacity(sentence.len() + 2);
            p.push(BOS.to_owned());
            p.extend(sentence.iter().cloned());
            p.push(EOS.to_owned());
            Ok(p)
        })
        .collect::<Result<_, _>>()?;
    for p in &padded {
        for end in 0..p.len() {
            // <s> sits only at position 0, so no window of length >= 2 ends on it.
            for k in 1..=order.min(end + 1) {
                *scratch.entry(&p[end + 1 - k..=end]).or_insert(0) += 1;
            }
        }
    }
    for (ngram, count) in scratch {
        table.add(ngram.to_vec(), count);
    }
    Ok(table)
}

/// Pointwise sum of tables of equal order.
pub fn merge<'a>(tables: impl IntoIterator<Item = &'a CountTable>) -> Result<Option<CountTable>, CountError> {
    let mut out: Option<CountTable> = None;
    for t in tables {
        match out.as_mut() {
            None => out = Some(t.clone()),
            Some(acc) => merge_into(acc, t)?,
        }
    }
    Ok(out)
}

pub fn merge_into(acc: &mut CountTable, other: &CountTable) -> Result<(), CountError> {
    if acc.order != other.order {
        return Err(CountError::OrderMismatch {
            left: acc.order,
            right: other.order,
        });
    }
    for (ngram, count) in other.iter() {
        acc.add(ngram.clone(), count);
    }
    Ok(())
}

/// Caps the vocabulary. The `cap` words with the highest unigram counts
/// are kept, ties going to the bytewise smaller word; `<s>`, `</s>` and
/// `<unk>` are always kept and take no slot. Every other word becomes
/// `<unk>` in every n-gram, and n-grams that collide are summed.
pub fn limit_vocab(table: &CountTable, policy: VocabPolicy) -> CountTable {
    let VocabPolicy::OpenCapped { cap } = policy else {
        return table.clone();
    };
    let mut ranked: Vec<(&str, u64)> = table.tables[0]
        .iter()
        .map(|(k, &c)| (k[0].as_str(), c))
        .filter(|(w, _)| !matches!(*w, BOS | EOS | UNK))
        .collect();
    if ranked.len() <= cap {
        return table.clone();
    }
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let keep: BTreeSet<&str> = ranked[..cap].iter().map(|(w, _)| *w).collect();
    let mut out = CountTable::new(table.order).expect("order already validated");
    for (ngram, count) in table.iter() {
        let rewritten: Ngram = ngram
            .iter()
            .map(|w| {
                if matches!(w.as_str(), BOS | EOS | UNK) || keep.contains(w.as_str()) {
                    w.clone()
                } else {
                    UNK.to_owned()
                }
            })
            .collect();
        out.add(rewritten, count);
    }
    out
}

/// Writes `tok1 tok2 ... tokk<TAB>count` lines, orders ascending, n-grams in
/// token order within each order.
pub fn write_counts(table: &CountTable, path: &Path) -> Result<(), CountError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    write_counts_to(table, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_counts_to<W: Write>(table: &CountTable, w: &mut W) -> io::Result<()> {
    for (ngram, count) in table.iter() {
        writeln!(w, "{}\t{}", ngram.join(" "), count)?;
    }
    Ok(())
}

/// Reads a count file. The table order is the longest n-gram found (at
/// least 1); use [`read_counts_with_order`] when higher orders may be empty.
pub fn read_counts(path: &Path) -> Result<CountTable, CountError> {
    parse_counts(&fs::read_to_string(path)?, None)
}

pub fn read_counts_with_order(path: &Path, order: usize) -> Result<CountTable, CountError> {
    parse_counts(&fs::read_to_string(path)?, Some(order))
}

pub fn parse_counts(text: &str, order: Option<usize>) -> Result<CountTable, CountError> {
    let mut entries: Vec<(Ngram, u64)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: &str| CountError::MalformedCountLine {
            line: line_no,
            reason: reason.to_owned(),
        };
        let (ngram, count) = line.rsplit_once('\t').ok_or_else(|| malformed("missing tab"))?;
        let count: u64 = count
            .trim()
            .parse()
            .map_err(|_| malformed("count is not a nonnegative integer"))?;
        let ngram: Ngram = ngram.split_whitespace().map(str::to_owned).collect();
        if ngram.is_empty() {
            return Err(malformed("empty n-gram"));
        }
        if let Some(order) = order {
            if ngram.len() > order {
                return Err(malformed("n-gram longer than the requested order"));
            }
        }
        entries.push((ngram, count));
    }
    let inferred = entries.iter().map(|(n, _)| n.len()).max().unwrap_or(1);
    let mut table = CountTable::new(order.unwrap_or(inferred))?;
    for (ngram, count) in entries {
        table.add(ngram, count);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(lines: &[&str]) -> NormalizedCorpus {
        NormalizedCorpus::from_text(&lines.join("\n"))
    }

    fn ng(s: &str) -> Vec<&str> {
        s.split(' ').collect()
    }

    #[test]
    fn bigram_example() {
        let t = count_ngrams(&corpus(&["a b"]), 2).unwrap();
        let uni: Vec<_> = t.table(1).iter().map(|(k, v)| (k.join(" "), *v)).collect();
        assert_eq!(
            uni,
            vec![("</s>".into(), 1), ("<s>".into(), 1), ("a".into(), 1), ("b".into(), 1)]
        );
        let bi: Vec<_> = t.table(2).iter().map(|(k, v)| (k.join(" "), *v)).collect();
        assert_eq!(
            bi,
            vec![("<s> a".into(), 1), ("a b".into(), 1), ("b </s>".into(), 1)]
        );
    }

    #[test]
    fn unigram_repeated_sentences() {
        let t = count_ngrams(&corpus(&["a", "a"]), 1).unwrap();
        assert_eq!(t.get(&["<s>"]), 2);
        assert_eq!(t.get(&["a"]), 2);
        assert_eq!(t.get(&["</s>"]), 2);
        assert_eq!(t.len(), 3);
    }

    #[test]
    fn empty_corpus_and_bad_input() {
        assert!(count_ngrams(&NormalizedCorpus::default(), 3).unwrap().is_empty());
        assert!(matches!(
            count_ngrams(&NormalizedCorpus::default(), 0),
            Err(CountError::InvalidOrder)
        ));
        let bad = NormalizedCorpus::new(vec![vec!["a".into()], vec![]]);
        assert!(matches!(
            count_ngrams(&bad, 2),
            Err(CountError::EmptySentence { index: 1 })
        ));
        let bad = NormalizedCorpus::new(vec![vec!["a".into(), "</s>".into()]]);
        assert!(matches!(count_ngrams(&bad, 2), Err(CountError::ReservedToken { .. })));
    }

    #[test]
    fn bos_is_never_predicted() {
        let t = count_ngrams(&corpus(&["a b c", "c a"]), 4).unwrap();
        for k in 2..=4 {
            assert!(t.table(k).keys().all(|g| g.last().unwrap() != BOS));
        }
        assert_eq!(t.get(&ng("<s> a b c")), 1);
        assert_eq!(t.get(&ng("b c </s>")), 1);
    }

    #[test]
    fn merge_identities() {
        let t = count_ngrams(&corpus(&["a b", "b c a"]), 3).unwrap();
        let empty = CountTable::new(3).unwrap();
        assert_eq!(merge([&t, &empty]).unwrap().unwrap(), t);
        let doubled = merge([&t, &t]).unwrap().unwrap();
        for (g, c) in t.iter() {
            let key: Vec<&str> = g.iter().map(String::as_str).collect();
            assert_eq!(doubled.get(&key), 2 * c);
        }
        let other = CountTable::new(2).unwrap();
        assert!(matches!(
            merge([&t, &other]),
            Err(CountError::OrderMismatch { left: 3, right: 2 })
        ));
        assert!(merge(std::iter::empty()).unwrap().is_none());
    }

    #[test]
    fn vocab_cap_rewrites_to_unk() {
        let t = count_ngrams(&corpus(&["a b", "a", "a", "a", "a"]), 2).unwrap();
        let capped = limit_vocab(&t, VocabPolicy::OpenCapped { cap: 1 });
        assert_eq!(capped.get(&ng("a <unk>")), 1);
        assert_eq!(capped.get(&ng("<unk> </s>")), 1);
        assert_eq!(capped.get(&["b"]), 0);
        assert!(capped.vocab().contains(UNK));
        assert_eq!(limit_vocab(&t, VocabPolicy::OpenCapped { cap: 2 }), t);
        assert_eq!(limit_vocab(&t, VocabPolicy::OpenFull), t);
    }

    #[test]
    fn vocab_cap_ties_keep_smaller_word() {
        let t = count_ngrams(&corpus(&["b a"]), 2).unwrap();
        let capped = limit_vocab(&t, VocabPolicy::OpenCapped { cap: 1 });
        assert_eq!(capped.get(&["a"]), 1);
        assert_eq!(capped.get(&["<unk>"]), 1);
        assert_eq!(capped.get(&ng("<unk> a")), 1);
    }

    #[test]
    fn vocab_cap_merges_collisions() {
        let t = count_ngrams(&corpus(&["x a", "y a", "z a", "a"]), 2).unwrap();
        let capped = limit_vocab(&t, VocabPolicy::OpenCapped { cap: 1 });
        assert_eq!(capped.get(&ng("<unk> a")), 3);
        assert_eq!(capped.get(&ng("<s> <unk>")), 3);
        assert_eq!(capped.get(&["<unk>"]), 3);
    }

    #[test]
    fn count_file_format() {
        let t = count_ngrams(&corpus(&["a b"]), 2).unwrap();
        let mut buf = Vec::new();
        write_counts_to(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "</s>\t1\n<s>\t1\na\t1\nb\t1\n<s> a\t1\na b\t1\nb </s>\t1\n"
        );
        assert_eq!(text.lines().count(), 7);
        assert_eq!(parse_counts(&text, None).unwrap(), t);
    }

    #[test]
    fn malformed_count_lines() {
        assert!(matches!(
            parse_counts("a b\n", None),
            Err(CountError::MalformedCountLine { line: 1, .. })
        ));
        assert!(matches!(
            parse_counts("a\t1\na b\tx\n", None),
            Err(CountError::MalformedCountLine { line: 2, .. })
        ));
        assert!(matches!(
            parse_counts("a b c\t1\n", Some(2)),
            Err(CountError::MalformedCountLine { line: 1, .. })
        ));
    }

    #[test]
    fn empty_higher_orders_survive_explicit_order() {
        let t = count_ngrams(&corpus(&["a"]), 5).unwrap();
        assert!(t.table(4).is_empty());
        let mut buf = Vec::new();
        write_counts_to(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(parse_counts(&text, None).unwrap().order(), 3);
        assert_eq!(parse_counts(&text, Some(5)).unwrap(), t);
    }
}
