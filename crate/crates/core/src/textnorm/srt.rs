//! Ingestion of plain text and SubRip files.

use std::fs;
use std::path::Path;

use super::TextNormError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceFormat {
    Plain,
    Srt,
}

impl SourceFormat {
    /// `.srt` files are SubRip, everything else plain text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("srt") => SourceFormat::Srt,
            _ => SourceFormat::Plain,
        }
    }
}

/// Subtitle text before normalization, in source order. For SubRip input
/// only cue text survives.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSubtitleDoc {
    pub lines: Vec<String>,
    pub source_format: SourceFormat,
    pub source_id: String,
}

impl RawSubtitleDoc {
    pub fn from_lines<S: Into<String>>(
        source_id: &str,
        lines: impl IntoIterator<Item = S>,
    ) -> Self {
        RawSubtitleDoc {
            lines: lines.into_iter().map(Into::into).collect(),
            source_format: SourceFormat::Plain,
            source_id: source_id.to_owned(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Utf8Policy {
    /// Invalid byte sequences are an error.
    #[default]
    Strict,
    /// Invalid byte sequences become U+FFFD.
    Lossy,
}

pub fn ingest(
    path: &Path,
    format: SourceFormat,
    utf8: Utf8Policy,
) -> Result<RawSubtitleDoc, TextNormError> {
    let unreadable = |source| TextNormError::UnreadableFile {
        path: path.display().to_string(),
        source,
    };
    let bytes = fs::read(path).map_err(unreadable)?;
    let text = match utf8 {
        Utf8Policy::Strict => String::from_utf8(bytes).map_err(|e| {
            unreadable(std::io::Error::new(std::io::ErrorKind::InvalidData, e))
        })?,
        Utf8Policy::Lossy => String::from_utf8_lossy(&bytes).into_owned(),
    };
    let source_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    ingest_str(&source_id, &text, format)
}

pub fn ingest_str(
    source_id: &str,
    text: &str,
    format: SourceFormat,
) -> Result<RawSubtitleDoc, TextNormError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let lines = match format {
        SourceFormat::Plain => text
            .lines()
            .map(|l| l.trim_end_matches('\r').to_owned())
            .collect(),
        SourceFormat::Srt => parse_srt(text)?,
    };
    Ok(RawSubtitleDoc {
        lines,
        source_format: format,
        source_id: source_id.to_owned(),
    })
}

fn parse_srt(text: &str) -> Result<Vec<String>, TextNormError> {
    let raw: Vec<&str> = text.lines().map(|l| l.trim_end_matches('\r').trim()).collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < raw.len() {
        let line = raw[i];
        if line.is_empty() {
            i += 1;
            continue;
        }
        if is_timestamp(line) {
            let has_index = i > 0 && is_cue_index(raw[i - 1]);
            if !has_index {
                return Err(TextNormError::MalformedSrt { line: i + 1 });
            }
            i += 1;
            continue;
        }
        if is_cue_index(line) && raw.get(i + 1).is_some_and(|next| is_timestamp(next)) {
            i += 1;
            continue;
        }
        let cleaned = strip_markup(line);
        let cleaned = cleaned.trim();
        if !cleaned.is_empty() {
            out.push(cleaned.to_owned());
        }
        i += 1;
    }
    Ok(out)
}

fn is_cue_index(line: &str) -> bool {
    !line.is_empty() && line.bytes().all(|b| b.is_ascii_digit())
}

/// `HH:MM:SS,mmm --> HH:MM:SS,mmm`, optionally followed by position data.
fn is_timestamp(line: &str) -> bool {
    let Some((start, rest)) = line.split_once("-->") else {
        return false;
    };
    let end = rest.split_whitespace().next().unwrap_or("");
    is_clock(start.trim()) && is_clock(end)
}

fn is_clock(s: &str) -> bool {
    let fields: Vec<&str> = s.split([':', ',', '.']).collect();
    fields.len() == 4
        && fields
            .iter()
            .all(|f| !f.is_empty() && f.bytes().all(|b| b.is_ascii_digit()))
}

/// Removes `<...>` tags and `{...}` override blocks.
fn strip_markup(line: &str) -> String {
    let mut out = String::with_capacity(line.len());
    let mut closing: Option<char> = None;
    for c in line.chars() {
        match closing {
            Some(end) if c == end => closing = None,
            Some(_) => {}
            None if c == '<' => closing = Some('>'),
            None if c == '{' => closing = Some('}'),
            None => out.push(c),
        }
    }
    out
}
