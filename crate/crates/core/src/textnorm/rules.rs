//! Rule tables driving normalization: abbreviations, spelling variants and
//! the case-frequency list.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::TextNormError;

pub const ABBREVIATIONS_FILE: &str = "abbreviations.tsv";
pub const SPELLING_FILE: &str = "spelling.tsv";
pub const CASE_FREQ_FILE: &str = "case_freq.tsv";

const DEFAULT_ABBREVIATIONS: &str = include_str!("../../rules/abbreviations.tsv");
const DEFAULT_SPELLING: &str = include_str!("../../rules/spelling.tsv");
const DEFAULT_CASE_FREQ: &str = include_str!("../../rules/case_freq.tsv");

/// Identifier of the number verbalization grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NumberLocale {
    #[default]
    Dutch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormRuleSet {
    /// Dotted abbreviations and apostrophe contractions to their full forms.
    pub abbreviations: BTreeMap<String, Vec<String>>,
    /// Orthographic variant to canonical form.
    pub spelling_map: BTreeMap<String, String>,
    /// Corpus frequency of upper- and lowercase word forms.
    pub case_freq: BTreeMap<String, u64>,
    /// Fully uppercase tokens with more letters than this are treated as
    /// script information and removed.
    pub caps_word_max_len: usize,
    pub locale: NumberLocale,
}

impl Default for NormRuleSet {
    fn default() -> Self {
        Self::dutch_default()
    }
}

impl NormRuleSet {
    /// Rule set with no table entries.
    pub fn empty() -> Self {
        NormRuleSet {
            abbreviations: BTreeMap::new(),
            spelling_map: BTreeMap::new(),
            case_freq: BTreeMap::new(),
            caps_word_max_len: 4,
            locale: NumberLocale::Dutch,
        }
    }

    /// The curated Dutch tables shipped with the crate.
    pub fn dutch_default() -> Self {
        Self::from_sources(
            DEFAULT_ABBREVIATIONS,
            DEFAULT_SPELLING,
            DEFAULT_CASE_FREQ,
        )
        .expect("shipped rule tables are valid")
    }

    /// Parses the three rule tables from their text contents.
    pub fn from_sources(
        abbreviations: &str,
        spelling: &str,
        case_freq: &str,
    ) -> Result<Self, TextNormError> {
        let mut rules = Self::empty();
        for (line_no, key, value) in tab_lines(abbreviations, ABBREVIATIONS_FILE)? {
            if !key.contains('.') && !key.contains('\'') {
                return Err(TextNormError::InvalidRule {
                    file: ABBREVIATIONS_FILE.into(),
                    line: line_no,
                    reason: format!("abbreviation key {key:?} has no dot or apostrophe"),
                });
            }
            let expansion: Vec<String> = value.split_whitespace().map(str::to_owned).collect();
            if expansion.is_empty() {
                return Err(TextNormError::InvalidRule {
                    file: ABBREVIATIONS_FILE.into(),
                    line: line_no,
                    reason: "empty expansion".into(),
                });
            }
            rules.abbreviations.insert(key.to_owned(), expansion);
        }
        for (line_no, key, value) in tab_lines(spelling, SPELLING_FILE)? {
            if value.split_whitespace().count() != 1 {
                return Err(TextNormError::InvalidRule {
                    file: SPELLING_FILE.into(),
                    line: line_no,
                    reason: format!("canonical form {value:?} must be a single token"),
                });
            }
            rules
                .spelling_map
                .insert(key.to_owned(), value.trim().to_owned());
        }
        for (line_no, key, value) in tab_lines(case_freq, CASE_FREQ_FILE)? {
            let count = value
                .trim()
                .parse::<u64>()
                .map_err(|_| TextNormError::InvalidRule {
                    file: CASE_FREQ_FILE.into(),
                    line: line_no,
                    reason: format!("count {value:?} is not a nonnegative integer"),
                })?;
            rules.case_freq.insert(key.to_owned(), count);
        }
        rules.check_spelling_idempotent()?;
        Ok(rules)
    }

    /// Loads `abbreviations.tsv`, `spelling.tsv` and `case_freq.tsv` from a
    /// directory. A missing file yields an empty table.
    pub fn load_dir(dir: &Path) -> Result<Self, TextNormError> {
        let read = |name: &str| -> Result<String, TextNormError> {
            let path = dir.join(name);
            if !path.exists() {
                return Ok(String::new());
            }
            fs::read_to_string(&path).map_err(|source| TextNormError::UnreadableFile {
                path: path.display().to_string(),
                source,
            })
        };
        Self::from_sources(
            &read(ABBREVIATIONS_FILE)?,
            &read(SPELLING_FILE)?,
            &read(CASE_FREQ_FILE)?,
        )
    }

    /// Looks a token up in the abbreviation table, first verbatim, then
    /// lowercased, then with surrounding quotes and clause punctuation
    /// removed.
    pub fn abbreviation(&self, token: &str) -> Option<&[String]> {
        let lookup = |t: &str| {
            self.abbreviations
                .get(t)
                .or_else(|| self.abbreviations.get(&t.to_lowercase()))
                .map(Vec::as_slice)
        };
        lookup(token).or_else(|| {
            let trimmed = token
                .trim_start_matches(['"', '(', '[', '«', '“', '„'])
                .trim_end_matches([',', ';', ':', '"', ')', ']', '»', '”']);
            if trimmed.is_empty() || trimmed == token {
                None
            } else {
                lookup(trimmed)
            }
        })
    }

    fn check_spelling_idempotent(&self) -> Result<(), TextNormError> {
        for (key, value) in &self.spelling_map {
            if let Some(next) = self.spelling_map.get(value) {
                if next != value {
                    return Err(TextNormError::InvalidRule {
                        file: SPELLING_FILE.into(),
                        line: 0,
                        reason: format!(
                            "{key:?} maps to {value:?}, which itself maps to {next:?}"
                        ),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Yields `(line_number, key, value)` for every non-blank, non-comment line.
fn tab_lines<'a>(
    text: &'a str,
    file: &str,
) -> Result<Vec<(usize, &'a str, &'a str)>, TextNormError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('\t') else {
            return Err(TextNormError::InvalidRule {
                file: file.into(),
                line: idx + 1,
                reason: "missing tab separator".into(),
            });
        };
        let key = key.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(TextNormError::InvalidRule {
                file: file.into(),
                line: idx + 1,
                reason: format!("key {key:?} must be a single token"),
            });
        }
        out.push((idx + 1, key, value.trim()));
    }
    Ok(out)
}
