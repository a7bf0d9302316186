//! The ARPA backoff n-gram format.
//!
//! Output is canonical: sections in order, n-grams sorted by token sequence
//! within a section, log10 values printed with seven decimals and the
//! non-event marker printed as `-99`. Writing a model that was read back
//! from canonical output reproduces the same bytes.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use thiserror::Error;

use crate::counts::Ngram;

/// Log10 probability that marks a token which is never predicted (`<s>`).
pub const NON_EVENT: f64 = -99.0;

#[derive(Debug, Error)]
pub enum ArpaError {
    #[error("line {line}: {reason}")]
    MalformedArpa { line: usize, reason: String },
    #[error("invalid model: {0}")]
    InvariantViolation(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn malformed(line: usize, reason: impl Into<String>) -> ArpaError {
    ArpaError::MalformedArpa {
        line,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NgramEntry {
    pub logprob: f64,
    pub backoff: Option<f64>,
}

impl NgramEntry {
    pub fn is_non_event(&self) -> bool {
        self.logprob == NON_EVENT
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArpaModel {
    order: usize,
    sections: Vec<BTreeMap<Ngram, NgramEntry>>,
}

impl ArpaModel {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "ARPA model order must be at least 1");
        ArpaModel {
            order,
            sections: vec![BTreeMap::new(); order],
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Entries of order `k`, `1 <= k <= order`.
    pub fn section(&self, k: usize) -> &BTreeMap<Ngram, NgramEntry> {
        &self.sections[k - 1]
    }

    /// Number of entries per order, as in the `\data\` header.
    pub fn counts(&self) -> Vec<usize> {
        self.sections.iter().map(BTreeMap::len).collect()
    }

    /// Inserts an entry, returning the previous one for the same n-gram.
    pub fn insert(&mut self, ngram: Ngram, entry: NgramEntry) -> Option<NgramEntry> {
        assert!(
            !ngram.is_empty() && ngram.len() <= self.order,
            "n-gram length {} outside 1..={}",
            ngram.len(),
            self.order
        );
        self.sections[ngram.len() - 1].insert(ngram, entry)
    }

    pub fn get(&self, ngram: &[String]) -> Option<&NgramEntry> {
        if ngram.is_empty() || ngram.len() > self.order {
            return None;
        }
        self.sections[ngram.len() - 1].get(ngram)
    }

    /// Checks the invariants the writer relies on.
    pub fn validate(&self) -> Result<(), ArpaError> {
        for (k, section) in self.sections.iter().enumerate() {
            let k = k + 1;
            for (ngram, entry) in section {
                let name = ngram.join(" ");
                if ngram.iter().any(|t| t.is_empty() || t.contains(char::is_whitespace)) {
                    return Err(ArpaError::InvariantViolation(format!(
                        "token with whitespace in {name:?}"
                    )));
                }
                if !entry.logprob.is_finite() || (entry.logprob > 0.0) {
                    return Err(ArpaError::InvariantViolation(format!(
                        "log probability {} of {name:?} is not a finite value <= 0",
                        entry.logprob
                    )));
                }
                if let Some(bow) = entry.backoff {
                    if k == self.order {
                        return Err(ArpaError::InvariantViolation(format!(
                            "highest-order n-gram {name:?} carries a backoff weight"
                        )));
                    }
                    if !bow.is_finite() {
                        return Err(ArpaError::InvariantViolation(format!(
                            "backoff weight of {name:?} is not finite"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn fmt_log10(x: f64) -> String {
    if x == NON_EVENT {
        return "-99".to_owned();
    }
    let s = format!("{x:.7}");
    match s.as_str() {
        "-0.0000000" => "0.0000000".to_owned(),
        // Reads back as the marker, so print it as one.
        "-99.0000000" => "-99".to_owned(),
        _ => s,
    }
}

pub fn write_arpa(model: &ArpaModel, path: &Path) -> Result<(), ArpaError> {
    model.validate()?;
    let mut w = BufWriter::new(fs::File::create(path)?);
    write_arpa_to(model, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_arpa_to<W: Write>(model: &ArpaModel, w: &mut W) -> Result<(), ArpaError> {
    model.validate()?;
    writeln!(w, "\\data\\")?;
    for (k, n) in model.counts().iter().enumerate() {
        writeln!(w, "ngram {}={}", k + 1, n)?;
    }
    for (k, section) in model.sections.iter().enumerate() {
        writeln!(w)?;
        writeln!(w, "\\{}-grams:", k + 1)?;
        for (ngram, entry) in section {
            write!(w, "{}\t{}", fmt_log10(entry.logprob), ngram.join(" "))?;
            if let Some(bow) = entry.backoff {
                write!(w, "\t{}", fmt_log10(bow))?;
            }
            writeln!(w)?;
        }
    }
    writeln!(w)?;
    writeln!(w, "\\end\\")?;
    Ok(())
}

pub fn to_arpa_string(model: &ArpaModel) -> Result<String, ArpaError> {
    let mut buf = Vec::new();
    write_arpa_to(model, &mut buf)?;
    Ok(String::from_utf8(buf).expect("ARPA output is UTF-8"))
}

/// Reads an ARPA file; `.gz` files are decompressed first.
pub fn read_arpa(path: &Path) -> Result<ArpaModel, ArpaError> {
    let file = fs::File::open(path)?;
    let mut text = String::new();
    if path.extension().is_some_and(|e| e == "gz") {
        GzDecoder::new(file).read_to_string(&mut text)?;
    } else {
        io::BufReader::new(file).read_to_string(&mut text)?;
    }
    parse_arpa(&text)
}

enum State {
    Preamble,
    Header,
    Section(usize),
    End,
}

/// Parses ARPA text. Anything before `\data\` is ignored, blank lines are
/// skipped, and fields may be separated by tabs or spaces.
pub fn parse_arpa(text: &str) -> Result<ArpaModel, ArpaError> {
    let mut state = State::Preamble;
    let mut declared: Vec<usize> = Vec::new();
    let mut model: Option<ArpaModel> = None;
    let mut next_section = 1;
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        match state {
            State::Preamble => {
                if line == "\\data\\" {
                    state = State::Header;
                }
            }
            State::Header if is_ngram_header(line) => {
                let spec = line["ngram".len()..].trim();
                let (k, n) = spec
                    .split_once('=')
                    .ok_or_else(|| malformed(line_no, "header line without '='"))?;
                let k: usize = k.trim().parse().map_err(|_| malformed(line_no, "bad order in header"))?;
                let n: usize = n.trim().parse().map_err(|_| malformed(line_no, "bad count in header"))?;
                if k != declared.len() + 1 {
                    return Err(malformed(line_no, format!("header declares order {k} out of sequence")));
                }
                declared.push(n);
            }
            State::Header | State::Section(_) => {
                if line == "\\end\\" {
                    finish_section(&state, &model, &declared, line_no)?;
                    if next_section != declared.len() + 1 {
                        return Err(malformed(line_no, format!("missing \\{next_section}-grams: section")));
                    }
                    state = State::End;
                    continue;
                }
                if let Some(k) = section_header(line) {
                    finish_section(&state, &model, &declared, line_no)?;
                    if declared.is_empty() {
                        return Err(malformed(line_no, "section before any ngram header line"));
                    }
                    if k != next_section || k > declared.len() {
                        return Err(malformed(line_no, format!("section \\{k}-grams: out of order")));
                    }
                    if model.is_none() {
                        model = Some(ArpaModel::new(declared.len()));
                    }
                    next_section += 1;
                    state = State::Section(k);
                    continue;
                }
                let State::Section(k) = state else {
                    return Err(malformed(line_no, format!("unexpected line in header: {line:?}")));
                };
                let m = model.as_mut().expect("section implies model");
                let (ngram, entry) = parse_entry(line, k, m.order(), line_no)?;
                if m.insert(ngram, entry).is_some() {
                    return Err(malformed(line_no, "duplicate n-gram"));
                }
            }
            State::End => {
                return Err(malformed(line_no, "content after \\end\\"));
            }
        }
    }
    match state {
        State::End => Ok(model.expect("end implies model")),
        State::Preamble => Err(malformed(last_line, "no \\data\\ marker")),
        _ => Err(malformed(last_line, "missing \\end\\ marker")),
    }
}

fn is_ngram_header(line: &str) -> bool {
    line.strip_prefix("ngram")
        .is_some_and(|rest| rest.starts_with(char::is_whitespace))
}

fn section_header(line: &str) -> Option<usize> {
    line.strip_prefix('\\')?
        .strip_suffix("-grams:")?
        .parse()
        .ok()
}

fn finish_section(
    state: &State,
    model: &Option<ArpaModel>,
    declared: &[usize],
    line_no: usize,
) -> Result<(), ArpaError> {
    if let (State::Section(k), Some(m)) = (state, model) {
        let found = m.section(*k).len();
        if found != declared[k - 1] {
            return Err(malformed(
                line_no,
                format!("header declares {} {k}-grams but section has {found}", declared[k - 1]),
            ));
        }
    }
    Ok(())
}

fn parse_entry(line: &str, k: usize, order: usize, line_no: usize) -> Result<(Ngram, NgramEntry), ArpaError> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    let with_backoff = match fields.len() {
        n if n == k + 1 => false,
        n if n == k + 2 && k < order => true,
        n => {
            return Err(malformed(line_no, format!("expected {} or {} fields for a {k}-gram, found {n}", k + 1, k + 2)))
        }
    };
    let parse_log = |s: &str, what: &str| -> Result<f64, ArpaError> {
        let v: f64 = s
            .parse()
            .map_err(|_| malformed(line_no, format!("unparsable {what} {s:?}")))?;
        if !v.is_finite() {
            return Err(malformed(line_no, format!("non-finite {what}")));
        }
        Ok(v)
    };
    let logprob = parse_log(fields[0], "log probability")?;
    if logprob > 0.0 {
        return Err(malformed(line_no, "positive log probability"));
    }
    let ngram: Ngram = fields[1..=k].iter().map(|s| s.to_string()).collect();
    let backoff = if with_backoff {
        Some(parse_log(fields[k + 1], "backoff weight")?)
    } else {
        None
    };
    Ok((ngram, NgramEntry { logprob, backoff }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(logprob: f64, backoff: Option<f64>) -> NgramEntry {
        NgramEntry { logprob, backoff }
    }

    fn ng(s: &str) -> Ngram {
        s.split(' ').map(str::to_owned).collect()
    }

    #[test]
    fn hand_built_unigram_model() {
        let mut m = ArpaModel::new(1);
        m.insert(ng("a"), entry(-0.25, None));
        m.insert(ng("</s>"), entry(-0.25, None));
        let text = to_arpa_string(&m).unwrap();
        assert_eq!(
            text,
            "\\data\\\nngram 1=2\n\n\\1-grams:\n-0.2500000\t</s>\n-0.2500000\ta\n\n\\end\\\n"
        );
    }

    #[test]
    fn header_counts_follow_sections() {
        let mut m = ArpaModel::new(2);
        m.insert(ng("<s>"), entry(NON_EVENT, Some(-0.5)));
        m.insert(ng("a"), entry(-0.2, Some(-0.1)));
        m.insert(ng("</s>"), entry(-0.7, None));
        m.insert(ng("<s> a"), entry(-0.1, None));
        let text = to_arpa_string(&m).unwrap();
        assert!(text.starts_with("\\data\\\nngram 1=3\nngram 2=1\n"));
        assert!(text.contains("-99\t<s>\t-0.5000000\n"));
        let back = parse_arpa(&text).unwrap();
        assert_eq!(back, m);
        assert!(back.get(&ng("<s>")).unwrap().is_non_event());
        assert_eq!(to_arpa_string(&back).unwrap(), text);
    }

    #[test]
    fn count_mismatch_is_malformed() {
        let text = "\\data\\\nngram 1=2\n\n\\1-grams:\n-1\ta\n-1\tb\n-1\tc\n\n\\end\\\n";
        assert!(matches!(parse_arpa(text), Err(ArpaError::MalformedArpa { line: 9, .. })));
    }

    #[test]
    fn spaces_parse_like_tabs() {
        // As emitted by common toolkits: space separation, a preamble and
        // extra blank lines.
        let external = "generated by some toolkit\n\n\\data\\\nngram 1=3\nngram 2=2\n\n\n\\1-grams:\n-0.4771213 </s>\n-99 <s> -0.30103\n-0.4771213 a -0.1760913\n\n\\2-grams:\n-0.1 <s> a\n-0.2 a </s>\n\n\\end\\\n";
        let tabbed = external.replace(' ', "\t").replace("generated\tby\tsome\ttoolkit", "");
        assert_eq!(parse_arpa(external).unwrap(), parse_arpa(&tabbed).unwrap());
        let m = parse_arpa(external).unwrap();
        assert_eq!(m.counts(), vec![3, 2]);
        assert_eq!(m.get(&ng("a")).unwrap().backoff, Some(-0.1760913));
    }

    #[test]
    fn structural_errors() {
        let cases = [
            ("no data", "hello\n"),
            ("no end", "\\data\\\nngram 1=1\n\n\\1-grams:\n-1\ta\n"),
            ("out of order", "\\data\\\nngram 1=1\nngram 2=1\n\\2-grams:\n-1\ta b\n\\1-grams:\n-1\ta\n\\end\\\n"),
            ("bad logprob", "\\data\\\nngram 1=1\n\\1-grams:\nx\ta\n\\end\\\n"),
            ("positive logprob", "\\data\\\nngram 1=1\n\\1-grams:\n0.5\ta\n\\end\\\n"),
            ("duplicate", "\\data\\\nngram 1=2\n\\1-grams:\n-1\ta\n-1\ta\n\\end\\\n"),
            ("missing section", "\\data\\\nngram 1=1\nngram 2=0\n\\1-grams:\n-1\ta\n\\end\\\n"),
            ("backoff at top order", "\\data\\\nngram 1=1\n\\1-grams:\n-1\ta\t-0.5\n\\end\\\n"),
            ("trailing content", "\\data\\\nngram 1=1\n\\1-grams:\n-1\ta\n\\end\\\nmore\n"),
        ];
        for (name, text) in cases {
            assert!(
                matches!(parse_arpa(text), Err(ArpaError::MalformedArpa { .. })),
                "{name} should be rejected"
            );
        }
    }

    #[test]
    fn writer_rejects_invalid_models() {
        let mut m = ArpaModel::new(1);
        m.insert(ng("a"), entry(0.5, None));
        assert!(matches!(to_arpa_string(&m), Err(ArpaError::InvariantViolation(_))));
        let mut m = ArpaModel::new(1);
        m.insert(ng("a"), entry(-0.5, Some(-0.1)));
        assert!(matches!(to_arpa_string(&m), Err(ArpaError::InvariantViolation(_))));
    }

    #[test]
    fn gzip_input() {
        use flate2::write::GzEncoder;
        let mut m = ArpaModel::new(1);
        m.insert(ng("a"), entry(-0.25, None));
        m.insert(ng("</s>"), entry(-0.25, None));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lm.arpa.gz");
        let mut enc = GzEncoder::new(fs::File::create(&path).unwrap(), flate2::Compression::default());
        enc.write_all(to_arpa_string(&m).unwrap().as_bytes()).unwrap();
        enc.finish().unwrap();
        assert_eq!(read_arpa(&path).unwrap(), m);
    }

    #[test]
    fn negative_zero_prints_as_zero() {
        assert_eq!(fmt_log10(-1e-12), "0.0000000");
        assert_eq!(fmt_log10(NON_EVENT), "-99");
        assert_eq!(fmt_log10(-99.00000001), "-99");
        assert_eq!(fmt_log10(-1.23456789), "-1.2345679");
    }
}
