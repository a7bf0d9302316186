//! Subtitle preprocessing: sentence resegmentation, script-line removal,
//! abbreviation and number expansion, punctuation stripping, sentence-initial
//! decapitalization and spelling normalization.
//!
//! The stages run in a fixed order (see [`normalize`]). Each stage is also
//! exposed on its own and works on whitespace-separated tokens.

pub mod numbers;
pub mod rules;
pub mod srt;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub use rules::{NormRuleSet, NumberLocale};
pub use srt::{ingest, ingest_str, RawSubtitleDoc, SourceFormat, Utf8Policy};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";

#[derive(Debug, Error)]
pub enum TextNormError {
    #[error("cannot read {path}: {source}")]
    UnreadableFile {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed SubRip file: timestamp on line {line} has no preceding cue index")]
    MalformedSrt { line: usize },
    #[error("{file}:{line}: {reason}")]
    InvalidRule {
        file: String,
        line: usize,
        reason: String,
    },
}

/// Non-fatal observations made while normalizing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NormWarning {
    /// The numeral is beyond the verbalization grammar; it was read out
    /// digit by digit instead.
    NumberTooLarge { token: String },
}

impl fmt::Display for NormWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormWarning::NumberTooLarge { token } => {
                write!(f, "number too large to verbalize: {token}")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    /// Only uppercase words: script information, not speech.
    ScriptLine,
    /// Nothing left once punctuation was removed.
    EmptyAfterStrip,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DroppedSentence {
    pub text: String,
    pub reason: DropReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NormReport {
    pub source_id: String,
    pub input_lines: usize,
    pub sentences_out: usize,
    pub dropped: Vec<DroppedSentence>,
    pub warnings: Vec<NormWarning>,
}

/// Clean training text: one token sequence per sentence. Boundary tokens
/// are not stored; counting adds them.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NormalizedCorpus {
    pub sentences: Vec<Vec<String>>,
}

impl NormalizedCorpus {
    pub fn new(sentences: Vec<Vec<String>>) -> Self {
        NormalizedCorpus { sentences }
    }

    /// Reads one-sentence-per-line text, splitting tokens on whitespace.
    /// Blank lines are skipped.
    pub fn from_text(text: &str) -> Self {
        let sentences = text
            .lines()
            .map(|l| l.split_whitespace().map(str::to_owned).collect::<Vec<_>>())
            .filter(|s| !s.is_empty())
            .collect();
        NormalizedCorpus { sentences }
    }

    pub fn bos_token(&self) -> &'static str {
        BOS
    }

    pub fn eos_token(&self) -> &'static str {
        EOS
    }

    /// One sentence per line, single spaces, LF endings.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for sentence in &self.sentences {
            out.push_str(&sentence.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn extend(&mut self, other: NormalizedCorpus) {
        self.sentences.extend(other.sentences);
    }
}

fn tokens(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_owned).collect()
}

/// True when the token (minus closing quotes and brackets) ends in `.`, `!`,
/// `?` or an ellipsis.
fn ends_sentence(token: &str) -> bool {
    let core = token.trim_end_matches(['"', '\'', '”', '’', '»', ')', ']']);
    core.ends_with(['.', '!', '?', '…'])
}

/// Splits lines holding several sentences and joins sentences spread over
/// several lines. A terminator that belongs to a known abbreviation does
/// not end the sentence; the end of the document flushes whatever is
/// pending.
pub fn resegment(doc: &RawSubtitleDoc, rules: &NormRuleSet) -> Vec<String> {
    let mut out = Vec::new();
    let mut pending: Vec<&str> = Vec::new();
    for line in &doc.lines {
        for token in line.split_whitespace() {
            pending.push(token);
            if ends_sentence(token) && rules.abbreviation(token).is_none() {
                out.push(pending.join(" "));
                pending.clear();
            }
        }
    }
    if !pending.is_empty() {
        out.push(pending.join(" "));
    }
    out
}

fn letter_count(token: &str) -> usize {
    token.chars().filter(|c| c.is_alphabetic()).count()
}

fn is_all_caps(token: &str) -> bool {
    let mut letters = token.chars().filter(|c| c.is_alphabetic()).peekable();
    letters.peek().is_some() && letters.all(char::is_uppercase)
}

/// True when every word (token with at least one letter) of the text is
/// fully uppercase and there is at least one word.
pub fn is_script_line(text: &str) -> bool {
    let mut words = text.split_whitespace().filter(|t| letter_count(t) > 0).peekable();
    words.peek().is_some() && words.all(is_all_caps)
}

/// Removes script information. A sentence whose words (tokens with at least
/// one letter) are all fully uppercase is dropped; otherwise only uppercase
/// words longer than `caps_word_max_len` letters go.
pub fn drop_script_lines(sentence: &[String], caps_word_max_len: usize) -> Option<Vec<String>> {
    if is_script_line(&sentence.join(" ")) {
        return None;
    }
    Some(
        sentence
            .iter()
            .filter(|t| !(is_all_caps(t) && letter_count(t) > caps_word_max_len))
            .cloned()
            .collect(),
    )
}

pub fn expand_abbreviations(sentence: &[String], rules: &NormRuleSet) -> Vec<String> {
    let mut out = Vec::with_capacity(sentence.len());
    for token in sentence {
        match rules.abbreviation(token) {
            Some(full) => out.extend(full.iter().cloned()),
            None => out.push(token.clone()),
        }
    }
    out
}

/// Replaces numerals by their split Dutch verbalization. Plain cardinals,
/// ordinals (`2e`, `21ste`), thousands groupings (`1.500`), decimals
/// (`3,5`) and digit groups joined by separators (`12:30`) are handled;
/// a trailing `%` adds `procent`, a leading `€` adds `euro`. Tokens mixing
/// letters and digits are left alone. Numerals beyond the grammar pass
/// through unchanged and are recorded as warnings.
pub fn verbalize_numbers(sentence: &[String], warnings: &mut Vec<NormWarning>) -> Vec<String> {
    let mut out = Vec::with_capacity(sentence.len());
    for token in sentence {
        if !token.bytes().any(|b| b.is_ascii_digit()) {
            out.push(token.clone());
            continue;
        }
        match verbalize_token(token) {
            Verbalized::Words(words) => out.extend(words),
            Verbalized::NotNumeric => out.push(token.clone()),
            Verbalized::TooLarge => {
                warnings.push(NormWarning::NumberTooLarge {
                    token: token.clone(),
                });
                out.push(token.clone());
            }
        }
    }
    out
}

enum Verbalized {
    Words(Vec<String>),
    NotNumeric,
    TooLarge,
}

fn verbalize_token(token: &str) -> Verbalized {
    let core_start = token
        .char_indices()
        .find(|(_, c)| c.is_alphanumeric())
        .map(|(i, _)| i)
        .unwrap_or(token.len());
    let core_end = token
        .char_indices()
        .rev()
        .find(|(_, c)| c.is_alphanumeric())
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(core_start);
    let (lead, core, trail) = (
        &token[..core_start],
        &token[core_start..core_end],
        &token[core_end..],
    );
    let is_digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());

    let words = if is_digits(core) {
        numbers::digit_group(core)
    } else if let Some(digits) = ["ste", "de", "e"]
        .iter()
        .find_map(|suffix| core.strip_suffix(suffix).filter(|d| is_digits(d)))
    {
        if digits.len() > 12 {
            None
        } else {
            digits.parse().ok().and_then(numbers::ordinal)
        }
    } else if is_thousands_grouping(core) {
        let digits: String = core.chars().filter(|c| *c != '.').collect();
        numbers::digit_group(&digits)
    } else if let Some((int, frac)) = core.split_once(',').filter(|(i, f)| is_digits(i) && is_digits(f)) {
        numbers::digit_group(int).zip(numbers::digit_group(frac)).map(|(mut a, b)| {
            a.push("komma".into());
            a.extend(b);
            a
        })
    } else if core.chars().all(|c| c.is_ascii_digit() || !c.is_alphanumeric()) {
        core.split(|c: char| !c.is_ascii_digit())
            .filter(|g| !g.is_empty())
            .map(numbers::digit_group)
            .collect::<Option<Vec<_>>>()
            .map(|groups| groups.concat())
    } else {
        return Verbalized::NotNumeric;
    };

    match words {
        None => Verbalized::TooLarge,
        Some(mut words) => {
            if trail.contains('%') {
                words.push("procent".into());
            }
            if lead.contains('€') {
                words.push("euro".into());
            }
            Verbalized::Words(words)
        }
    }
}

/// `1.500`, `12.000.000`: groups of three digits after the first.
fn is_thousands_grouping(core: &str) -> bool {
    let mut groups = core.split('.');
    let first = groups.next().unwrap_or("");
    let rest: Vec<&str> = groups.collect();
    !rest.is_empty()
        && (1..=3).contains(&first.len())
        && first.bytes().all(|b| b.is_ascii_digit())
        && rest
            .iter()
            .all(|g| g.len() == 3 && g.bytes().all(|b| b.is_ascii_digit()))
}

fn is_combining_mark(c: char) -> bool {
    matches!(c as u32,
        0x0300..=0x036F | 0x1AB0..=0x1AFF | 0x1DC0..=0x1DFF | 0x20D0..=0x20FF | 0xFE20..=0xFE2F)
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || is_combining_mark(c)
}

/// Removes all punctuation. Hyphens and apostrophes survive only between
/// two word characters (`vier-en`, `on-line`, `z'n`); any other punctuation
/// inside a token splits it. Returns `None` when nothing is left.
pub fn strip_punctuation(sentence: &[String]) -> Option<Vec<String>> {
    let mut out = Vec::with_capacity(sentence.len());
    for token in sentence {
        let chars: Vec<char> = token.chars().collect();
        let mut piece = String::new();
        for (i, &c) in chars.iter().enumerate() {
            if is_word_char(c) {
                piece.push(c);
                continue;
            }
            let joiner = matches!(c, '-' | '\'' | '’');
            let inside = piece.chars().last().is_some_and(is_word_char)
                && chars.get(i + 1).is_some_and(|&n| is_word_char(n));
            if joiner && inside {
                piece.push(if c == '’' { '\'' } else { c });
            } else if !piece.is_empty() {
                out.push(std::mem::take(&mut piece));
            }
        }
        if !piece.is_empty() {
            out.push(piece);
        }
    }
    if out.is_empty() {
        None
    } else {
        Some(out)
    }
}

/// Lowercases the first token when its lowercase form is strictly more
/// frequent. Equal counts or a form missing from the list keep the token
/// as it is.
pub fn decapitalize_initial(sentence: &[String], case_freq: &BTreeMap<String, u64>) -> Vec<String> {
    let mut out = sentence.to_vec();
    if let Some(first) = out.first_mut() {
        let lower = first.to_lowercase();
        if lower != *first {
            if let (Some(capital), Some(small)) = (case_freq.get(first.as_str()), case_freq.get(&lower)) {
                if capital < small {
                    *first = lower;
                }
            }
        }
    }
    out
}

pub fn apply_spelling_map(sentence: &[String], rules: &NormRuleSet) -> Vec<String> {
    sentence
        .iter()
        .map(|t| rules.spelling_map.get(t).cloned().unwrap_or_else(|| t.clone()))
        .collect()
}

/// Numerals that survived verbalization (too large) are read out digit by
/// digit so that no bare digit string reaches the corpus.
fn spell_leftover_digits(sentence: Vec<String>) -> Vec<String> {
    if !sentence.iter().any(|t| t.bytes().all(|b| b.is_ascii_digit())) {
        return sentence;
    }
    sentence
        .into_iter()
        .flat_map(|t| {
            if t.bytes().all(|b| b.is_ascii_digit()) {
                numbers::digitwise(&t)
            } else {
                vec![t]
            }
        })
        .collect()
}

/// Runs every stage after resegmentation on one sentence.
fn normalize_sentence(sentence: &str, rules: &NormRuleSet, report: &mut NormReport) -> Option<Vec<String>> {
    let toks = tokens(sentence);
    if toks.is_empty() {
        return None;
    }
    let Some(toks) = drop_script_lines(&toks, rules.caps_word_max_len) else {
        report.dropped.push(DroppedSentence {
            text: sentence.to_owned(),
            reason: DropReason::ScriptLine,
        });
        return None;
    };
    let toks = expand_abbreviations(&toks, rules);
    let toks = verbalize_numbers(&toks, &mut report.warnings);
    let Some(toks) = strip_punctuation(&toks) else {
        report.dropped.push(DroppedSentence {
            text: sentence.to_owned(),
            reason: DropReason::EmptyAfterStrip,
        });
        return None;
    };
    let toks = spell_leftover_digits(toks);
    let toks = decapitalize_initial(&toks, &rules.case_freq);
    Some(apply_spelling_map(&toks, rules))
}

/// Full preprocessing of one document: resegment, drop script lines, expand
/// abbreviations, verbalize numbers, strip punctuation, decapitalize the
/// sentence-initial word, apply the spelling map.
///
/// Source lines made only of capital words are removed before
/// resegmentation, so a caption such as `JAN LOOPT` is not merged into the
/// dialogue that follows it.
pub fn normalize(doc: &RawSubtitleDoc, rules: &NormRuleSet) -> (NormalizedCorpus, NormReport) {
    let mut report = NormReport {
        source_id: doc.source_id.clone(),
        input_lines: doc.lines.len(),
        ..NormReport::default()
    };
    let mut spoken = doc.clone();
    spoken.lines.retain(|line| {
        let script = is_script_line(line);
        if script {
            report.dropped.push(DroppedSentence {
                text: line.clone(),
                reason: DropReason::ScriptLine,
            });
        }
        !script
    });
    let sentences: Vec<Vec<String>> = resegment(&spoken, rules)
        .iter()
        .filter_map(|s| normalize_sentence(s, rules, &mut report))
        .collect();
    report.sentences_out = sentences.len();
    (NormalizedCorpus::new(sentences), report)
}

/// Like [`normalize`] but for text that is already one sentence per line,
/// such as the rendered output of a previous run. Line boundaries are kept
/// as sentence boundaries.
pub fn normalize_segmented<S: AsRef<str>>(
    source_id: &str,
    lines: &[S],
    rules: &NormRuleSet,
) -> (NormalizedCorpus, NormReport) {
    let mut report = NormReport {
        source_id: source_id.to_owned(),
        input_lines: lines.len(),
        ..NormReport::default()
    };
    let sentences: Vec<Vec<String>> = lines
        .iter()
        .filter_map(|s| normalize_sentence(s.as_ref(), rules, &mut report))
        .collect();
    report.sentences_out = sentences.len();
    (NormalizedCorpus::new(sentences), report)
}
