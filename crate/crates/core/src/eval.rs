//! Perplexity and word error rate.

use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::lm::LanguageModel;
use crate::textnorm::{NormalizedCorpus, BOS, EOS};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("corpus contains no sentences")]
    EmptyCorpus,
    #[error("reference is empty")]
    EmptyReference,
}

/// What to do with words outside the model vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OovPolicy {
    /// Score them as `<unk>`.
    #[default]
    Score,
    /// Leave them out of the total; they still count in `oov_count` and stay
    /// in the history of later tokens.
    Skip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceScore {
    /// Words plus the closing `</s>`.
    pub tokens: usize,
    pub oov: usize,
    pub scored: usize,
    pub log10_prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Words plus one `</s>` per sentence.
    pub token_count: usize,
    pub oov_count: usize,
    pub scored_token_count: usize,
    pub log10_prob_total: f64,
    pub perplexity: f64,
    pub per_sentence: Vec<SentenceScore>,
}

fn score_sentence(model: &dyn LanguageModel, sentence: &[String], policy: OovPolicy) -> SentenceScore {
    let mut history: Vec<&str> = Vec::with_capacity(sentence.len() + 1);
    history.push(BOS);
    let mut score = SentenceScore {
        tokens: sentence.len() + 1,
        oov: 0,
        scored: 0,
        log10_prob: 0.0,
    };
    for word in sentence.iter().map(String::as_str).chain([EOS]) {
        let oov = model.is_oov(word);
        if oov {
            score.oov += 1;
        }
        if !(oov && policy == OovPolicy::Skip) {
            score.log10_prob += model.log10_prob(&history, word);
            score.scored += 1;
        }
        history.push(word);
    }
    score
}

/// Scores every word and the closing `</s>` of each sentence, given the
/// sentence history starting at `<s>`. `<s>` itself is never scored.
pub fn perplexity(
    model: &dyn LanguageModel,
    corpus: &NormalizedCorpus,
    policy: OovPolicy,
) -> Result<EvalReport, EvalError> {
    if corpus.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let per_sentence: Vec<SentenceScore> = corpus
        .sentences
        .par_iter()
        .map(|s| score_sentence(model, s, policy))
        .collect();
    let mut report = EvalReport {
        token_count: 0,
        oov_count: 0,
        scored_token_count: 0,
        log10_prob_total: 0.0,
        perplexity: 0.0,
        per_sentence: Vec::new(),
    };
    for s in &per_sentence {
        report.token_count += s.tokens;
        report.oov_count += s.oov;
        report.scored_token_count += s.scored;
        report.log10_prob_total += s.log10_prob;
    }
    report.perplexity = if report.scored_token_count == 0 {
        f64::NAN
    } else {
        10f64.powf(-report.log10_prob_total / report.scored_token_count as f64)
    };
    report.per_sentence = per_sentence;
    Ok(report)
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        format!(
            "{} sentences, {} tokens, {} OOVs\nlog10 prob = {}, ppl = {}\n",
            self.per_sentence.len(),
            self.token_count,
            self.oov_count,
            self.log10_prob_total,
            self.perplexity
        )
    }

    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "sentences\t{}", self.per_sentence.len());
        let _ = writeln!(out, "tokens\t{}", self.token_count);
        let _ = writeln!(out, "oov\t{}", self.oov_count);
        let _ = writeln!(out, "scored_tokens\t{}", self.scored_token_count);
        let _ = writeln!(out, "log10_prob\t{}", self.log10_prob_total);
        let _ = writeln!(out, "perplexity\t{}", self.perplexity);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WerReport {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub ref_len: usize,
    pub wer: f64,
}

impl WerReport {
    pub fn errors(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }

    pub fn to_text(&self) -> String {
        format!(
            "WER {:.2}% ({} errors / {} reference words: {} sub, {} ins, {} del)\n",
            self.wer * 100.0,
            self.errors(),
            self.ref_len,
            self.substitutions,
            self.insertions,
            self.deletions
        )
    }

    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "substitutions\t{}", self.substitutions);
        let _ = writeln!(out, "insertions\t{}", self.insertions);
        let _ = writeln!(out, "deletions\t{}", self.deletions);
        let _ = writeln!(out, "ref_len\t{}", self.ref_len);
        let _ = writeln!(out, "wer\t{}", self.wer);
        out
    }
}

/// Unit-cost Levenshtein alignment. Among minimal alignments the backtrace
/// prefers a substitution (or match), then an insertion, then a deletion.
pub fn wer<S: AsRef<str>, T: AsRef<str>>(reference: &[S], hypothesis: &[T]) -> Result<WerReport, EvalError> {
    if reference.is_empty() {
        return Err(EvalError::EmptyReference);
    }
    let (n, m) = (reference.len(), hypothesis.len());
    let w = m + 1;
    let mut d = vec![0usize; (n + 1) * w];
    for (j, cell) in d[..w].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=n {
        d[i * w] = i;
        for j in 1..=m {
            let sub = usize::from(reference[i - 1].as_ref() != hypothesis[j - 1].as_ref());
            d[i * w + j] = (d[(i - 1) * w + j - 1] + sub)
                .min(d[i * w + j - 1] + 1)
                .min(d[(i - 1) * w + j] + 1);
        }
    }
    let (mut s, mut ins, mut del) = (0, 0, 0);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 {
            let sub = usize::from(reference[i - 1].as_ref() != hypothesis[j - 1].as_ref());
            if here == d[(i - 1) * w + j - 1] + sub {
                s += sub;
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if j > 0 && here == d[i * w + j - 1] + 1 {
            ins += 1;
            j -= 1;
        } else {
            del += 1;
            i -= 1;
        }
    }
    Ok(WerReport {
        substitutions: s,
        insertions: ins,
        deletions: del,
        ref_len: n,
        wer: (s + ins + del) as f64 / n as f64,
    })
}
