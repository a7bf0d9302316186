//! Command-line driver. [`run`] parses arguments, executes one subcommand
//! and returns the process exit code: 0 on success, 1 when a batch finished
//! with per-item failures, 2 on a usage or input error.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Deserialize;

use crate::arpa::{read_arpa, write_arpa};
use crate::counts::{count_ngrams, merge_into, read_counts, write_counts, CountTable, VocabPolicy};
use crate::eval::{perplexity, wer, OovPolicy};
use crate::interp::{fit_em, format_weights, parse_weights, InterpolatedModel, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use crate::lm::{BackoffModel, LanguageModel};
use crate::mkn::{estimate, ModelConfig};
use crate::textnorm::{ingest, normalize, NormRuleSet, NormalizedCorpus, NormReport, SourceFormat, Utf8Policy};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_FATAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "sublm", version, about = "Subtitle corpora to n-gram language models")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normalize subtitle files into one-sentence-per-line training text.
    Normalize {
        /// Corpus manifest (TOML) listing the sources.
        #[arg(long, conflicts_with = "inputs")]
        manifest: Option<PathBuf>,
        /// Source files (.srt is read as SubRip, anything else as plain text).
        inputs: Vec<PathBuf>,
        #[arg(long)]
        rules_dir: Option<PathBuf>,
        /// Replace invalid UTF-8 instead of failing the file.
        #[arg(long)]
        lossy: bool,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Count n-grams of normalized text files into one count file.
    Count {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = 5)]
        order: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate a modified Kneser-Ney model and write it as ARPA.
    Train {
        /// Normalized text files.
        #[arg(required_unless_present = "counts", conflicts_with = "counts")]
        inputs: Vec<PathBuf>,
        /// Count file to train from instead of text.
        #[arg(long)]
        counts: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        order: usize,
        /// Keep only the most frequent words; the rest become <unk>.
        #[arg(long)]
        vocab_cap: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model per show type or per domain listed in a manifest.
    TrainGroups {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum)]
        by: GroupBy,
        #[arg(long, default_value_t = 5)]
        order: usize,
        #[arg(long)]
        vocab_cap: Option<usize>,
        #[arg(long)]
        rules_dir: Option<PathBuf>,
        #[arg(long)]
        lossy: bool,
        /// Output directory for `<group>.arpa` files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit interpolation weights of several models on a development set.
    Interp {
        /// ARPA models (optionally gzipped).
        #[arg(required = true)]
        models: Vec<PathBuf>,
        /// Normalized development text.
        #[arg(long)]
        dev: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
        max_iters: usize,
        /// Weights report.
        #[arg(long)]
        out: PathBuf,
    },
    /// Perplexity of a model, or of a weighted mixture, on normalized text.
    Ppl {
        #[arg(required = true)]
        models: Vec<PathBuf>,
        #[arg(long)]
        test: PathBuf,
        /// Weights report from `interp`; required with several models.
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Leave OOV words out of the score instead of scoring them as <unk>.
        #[arg(long)]
        skip_oov: bool,
        /// Write `metric<TAB>value` lines here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Word error rate of a hypothesis transcript against a reference. Both
    /// sides are normalized first.
    Wer {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long)]
        rules_dir: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GroupBy {
    Type,
    Domain,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub show_id: String,
    pub show_type: String,
    #[serde(default)]
    pub domains: Vec<String>,
    /// `srt` or `plain`; defaults to the file extension.
    #[serde(default)]
    pub format: Option<String>,
}

/// Sources of a corpus with their show type and domain labels.
///
/// ```toml
/// [[show]]
/// path = "drama/episode_0001.srt"
/// show_id = "drama"
/// show_type = "fiction"
/// domains = ["family", "relationships"]
/// ```
///
/// Relative paths are resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusManifest {
    #[serde(default, rename = "show")]
    pub entries: Vec<ManifestEntry>,
}

impl CorpusManifest {
    pub fn parse(text: &str) -> Result<Self, String> {
        let manifest: CorpusManifest = toml::from_str(text).map_err(|e| e.to_string())?;
        let mut seen = HashSet::new();
        for entry in &manifest.entries {
            if !seen.insert(&entry.path) {
                return Err(format!("duplicate path {}", entry.path.display()));
            }
            if let Some(f) = &entry.format {
                parse_format(f)?;
            }
        }
        Ok(manifest)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let mut manifest = Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for entry in &mut manifest.entries {
            if entry.path.is_relative() {
                entry.path = base.join(&entry.path);
            }
        }
        Ok(manifest)
    }
}

fn parse_format(name: &str) -> Result<SourceFormat, String> {
    match name {
        "srt" => Ok(SourceFormat::Srt),
        "plain" | "txt" => Ok(SourceFormat::Plain),
        other => Err(format!("unknown format {other:?} (expected srt or plain)")),
    }
}

struct Source {
    path: PathBuf,
    format: SourceFormat,
}

impl Source {
    fn from_entry(entry: &ManifestEntry) -> Self {
        let format = match &entry.format {
            Some(f) => parse_format(f).expect("validated when the manifest was parsed"),
            None => SourceFormat::from_path(&entry.path),
        };
        Source {
            path: entry.path.clone(),
            format,
        }
    }

    fn from_path(path: &Path) -> Self {
        Source {
            path: path.to_owned(),
            format: SourceFormat::from_path(path),
        }
    }
}

type Fatal = String;

fn rules(dir: Option<&Path>) -> Result<NormRuleSet, Fatal> {
    match dir {
        Some(d) => NormRuleSet::load_dir(d).map_err(|e| e.to_string()),
        None => Ok(NormRuleSet::dutch_default()),
    }
}

fn normalize_source(
    source: &Source,
    rules: &NormRuleSet,
    utf8: Utf8Policy,
) -> Result<(NormalizedCorpus, NormReport), String> {
    let doc = ingest(&source.path, source.format, utf8).map_err(|e| match e {
        e @ crate::textnorm::TextNormError::UnreadableFile { .. } => e.to_string(),
        e => format!("{}: {e}", source.path.display()),
    })?;
    Ok(normalize(&doc, rules))
}

fn read_text(path: &Path) -> Result<NormalizedCorpus, Fatal> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    Ok(NormalizedCorpus::from_text(&text))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Fatal> {
    create_parent(path)?;
    fs::write(path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn create_parent(path: &Path) -> Result<(), Fatal> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => {
            fs::create_dir_all(p).map_err(|e| format!("cannot create {}: {e}", p.display()))
        }
        _ => Ok(()),
    }
}

fn load_model(path: &Path) -> Result<BackoffModel, Fatal> {
    let model = read_arpa(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(BackoffModel::new(&model))
}

/// Output names `<stem>.txt`, with `-2`, `-3`, ... appended on collisions.
fn output_names(sources: &[Source]) -> Vec<String> {
    let mut used = HashSet::new();
    sources
        .iter()
        .map(|s| {
            let stem = s
                .path
                .file_stem()
                .map(|x| x.to_string_lossy().into_owned())
                .unwrap_or_else(|| "source".to_owned());
            let mut name = format!("{stem}.txt");
            let mut n = 2;
            while !used.insert(name.clone()) {
                name = format!("{stem}-{n}.txt");
                n += 1;
            }
            name
        })
        .collect()
}

fn cmd_normalize(sources: Vec<Source>, rules: &NormRuleSet, utf8: Utf8Policy, out: &Path) -> Result<i32, Fatal> {
    fs::create_dir_all(out).map_err(|e| format!("cannot create {}: {e}", out.display()))?;
    let names = output_names(&sources);
    let results: Vec<_> = sources.par_iter().map(|s| normalize_source(s, rules, utf8)).collect();

    let mut report = String::from("source\toutput\tstatus\tinput_lines\tsentences\tdropped\twarnings\n");
    let mut failed = 0;
    for ((source, name), result) in sources.iter().zip(&names).zip(results) {
        let src = source.path.display();
        match result {
            Ok((corpus, norm)) => {
                write_file(&out.join(name), &corpus.render())?;
                let _ = writeln!(
                    report,
                    "{src}\t{name}\tok\t{}\t{}\t{}\t{}",
                    norm.input_lines,
                    norm.sentences_out,
                    norm.dropped.len(),
                    norm.warnings.len()
                );
                for w in &norm.warnings {
                    eprintln!("warning: {src}: {w}");
                }
            }
            Err(e) => {
                failed += 1;
                eprintln!("error: {e}");
                let _ = writeln!(report, "{src}\t-\terror: {}\t-\t-\t-\t-", e.replace(['\t', '\n'], " "));
            }
        }
    }
    write_file(&out.join("normalize_report.tsv"), &report)?;
    Ok(if failed > 0 { EXIT_PARTIAL } else { EXIT_OK })
}

fn count_files(inputs: &[PathBuf], order: usize) -> Result<CountTable, Fatal> {
    let tables: Vec<Result<CountTable, Fatal>> = inputs
        .par_iter()
        .map(|p| {
            let corpus = read_text(p)?;
            count_ngrams(&corpus, order).map_err(|e| format!("{}: {e}", p.display()))
        })
        .collect();
    let mut acc = CountTable::new(order).map_err(|e| e.to_string())?;
    for t in tables {
        merge_into(&mut acc, &t?).map_err(|e| e.to_string())?;
    }
    Ok(acc)
}

fn model_config(order: usize, vocab_cap: Option<usize>) -> ModelConfig {
    ModelConfig {
        vocab_policy: match vocab_cap {
            Some(cap) => VocabPolicy::OpenCapped { cap },
            None => VocabPolicy::OpenFull,
        },
        ..ModelConfig::with_order(order)
    }
}

fn train_and_write(table: &CountTable, config: &ModelConfig, out: &Path) -> Result<(), String> {
    let model = estimate(table, config).map_err(|e| e.to_string())?;
    create_parent(out)?;
    write_arpa(&model, out).map_err(|e| format!("cannot write {}: {e}", out.display()))
}

/// Replaces characters that are awkward in file names.
fn group_file_name(group: &str) -> String {
    let clean: String = group
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{clean}.arpa")
}

fn cmd_train_groups(
    manifest: &CorpusManifest,
    by: GroupBy,
    config: &ModelConfig,
    rules: &NormRuleSet,
    utf8: Utf8Policy,
    out: &Path,
) -> Result<i32, Fatal> {
    fs::create_dir_all(out).map_err(|e| format!("cannot create {}: {e}", out.display()))?;
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, entry) in manifest.entries.iter().enumerate() {
        let labels: Vec<&str> = match by {
            GroupBy::Type => vec![entry.show_type.as_str()],
            GroupBy::Domain => entry.domains.iter().map(String::as_str).collect::<BTreeSet<_>>().into_iter().collect(),
        };
        for label in labels {
            groups.entry(label).or_default().push(i);
        }
    }

    let counted: Vec<Result<CountTable, String>> = manifest
        .entries
        .par_iter()
        .map(|entry| {
            let (corpus, _) = normalize_source(&Source::from_entry(entry), rules, utf8)?;
            count_ngrams(&corpus, config.order).map_err(|e| format!("{}: {e}", entry.path.display()))
        })
        .collect();
    let mut failed = 0;
    for r in &counted {
        if let Err(e) = r {
            failed += 1;
            eprintln!("error: {e}");
        }
    }

    let names: Vec<&str> = groups.keys().copied().collect();
    let trained: Vec<Result<Option<()>, String>> = names
        .par_iter()
        .map(|group| {
            let mut table = CountTable::new(config.order).map_err(|e| e.to_string())?;
            for &i in &groups[group] {
                if let Ok(t) = &counted[i] {
                    merge_into(&mut table, t).map_err(|e| e.to_string())?;
                }
            }
            if table.is_empty() {
                return Ok(None);
            }
            train_and_write(&table, config, &out.join(group_file_name(group))).map(Some)
        })
        .collect();
    for (group, result) in names.iter().zip(trained) {
        match result {
            Ok(Some(())) => println!("{group}\t{}", out.join(group_file_name(group)).display()),
            Ok(None) => eprintln!("warning: group {group:?} has no text; skipped"),
            Err(e) => {
                failed += 1;
                eprintln!("warning: group {group:?} skipped: {e}");
            }
        }
    }
    Ok(if failed > 0 { EXIT_PARTIAL } else { EXIT_OK })
}

fn cmd_interp(models: &[PathBuf], dev: &Path, tol: f64, max_iters: usize, out: &Path) -> Result<i32, Fatal> {
    let loaded = models.iter().map(|p| load_model(p)).collect::<Result<Vec<_>, _>>()?;
    let components: Vec<&dyn LanguageModel> = loaded.iter().map(|m| m as &dyn LanguageModel).collect();
    let dev = read_text(dev)?;
    let weights = fit_em(&components, &dev, tol, max_iters).map_err(|e| e.to_string())?;
    let names: Vec<String> = models.iter().map(|p| p.display().to_string()).collect();
    let report = format_weights(&names, &weights);
    write_file(out, &report)?;
    print!("{report}");
    if !weights.converged {
        eprintln!("warning: EM stopped after {} iterations without converging", weights.iterations);
    }
    Ok(EXIT_OK)
}

fn cmd_ppl(
    models: &[PathBuf],
    test: &Path,
    weights: Option<&Path>,
    policy: OovPolicy,
    out: Option<&Path>,
) -> Result<i32, Fatal> {
    let loaded = models.iter().map(|p| load_model(p)).collect::<Result<Vec<_>, _>>()?;
    let components: Vec<&dyn LanguageModel> = loaded.iter().map(|m| m as &dyn LanguageModel).collect();
    let lambda = match weights {
        Some(w) => {
            let text = fs::read_to_string(w).map_err(|e| format!("cannot read {}: {e}", w.display()))?;
            let parsed = parse_weights(&text).map_err(|e| format!("{}: {e}", w.display()))?;
            parsed.into_iter().map(|(_, l)| l).collect()
        }
        None if models.len() == 1 => vec![1.0],
        None => return Err("several models need --weights".to_owned()),
    };
    let mixture = InterpolatedModel::new(components, lambda).map_err(|e| e.to_string())?;
    let corpus = read_text(test)?;
    let report = perplexity(&mixture, &corpus, policy).map_err(|e| e.to_string())?;
    print!("{}", report.to_text());
    if let Some(out) = out {
        write_file(out, &report.to_kv())?;
    }
    Ok(EXIT_OK)
}

fn transcript_tokens(path: &Path, rules: &NormRuleSet) -> Result<Vec<String>, Fatal> {
    let (corpus, _) = normalize_source(&Source::from_path(path), rules, Utf8Policy::Strict)?;
    Ok(corpus.sentences.into_iter().flatten().collect())
}

fn cmd_wer(reference: &Path, hyp: &Path, rules: &NormRuleSet, out: Option<&Path>) -> Result<i32, Fatal> {
    let r = transcript_tokens(reference, rules)?;
    let h = transcript_tokens(hyp, rules)?;
    let report = wer(&r, &h).map_err(|e| format!("{}: {e}", reference.display()))?;
    print!("{}", report.to_text());
    if let Some(out) = out {
        write_file(out, &report.to_kv())?;
    }
    Ok(EXIT_OK)
}

fn execute(cli: Cli) -> Result<i32, Fatal> {
    let utf8 = |lossy: bool| if lossy { Utf8Policy::Lossy } else { Utf8Policy::Strict };
    match cli.command {
        Command::Normalize {
            manifest,
            inputs,
            rules_dir,
            lossy,
            out,
        } => {
            let rules = rules(rules_dir.as_deref())?;
            let sources = match manifest {
                Some(m) => CorpusManifest::load(&m)?.entries.iter().map(Source::from_entry).collect(),
                None => inputs.iter().map(|p| Source::from_path(p)).collect(),
            };
            cmd_normalize(sources, &rules, utf8(lossy), &out)
        }
        Command::Count { inputs, order, out } => {
            let table = count_files(&inputs, order)?;
            create_parent(&out)?;
            write_counts(&table, &out).map_err(|e| format!("cannot write {}: {e}", out.display()))?;
            Ok(EXIT_OK)
        }
        Command::Train {
            inputs,
            counts,
            order,
            vocab_cap,
            out,
        } => {
            let table = match counts {
                Some(c) => {
                    let t = read_counts(&c).map_err(|e| format!("{}: {e}", c.display()))?;
                    if t.order() > order {
                        return Err(format!(
                            "{} holds {}-grams but the model order is {order}",
                            c.display(),
                            t.order()
                        ));
                    }
                    t.with_order(order)
                }
                None => count_files(&inputs, order)?,
            };
            train_and_write(&table, &model_config(order, vocab_cap), &out)?;
            Ok(EXIT_OK)
        }
        Command::TrainGroups {
            manifest,
            by,
            order,
            vocab_cap,
            rules_dir,
            lossy,
            out,
        } => {
            let rules = rules(rules_dir.as_deref())?;
            let manifest = CorpusManifest::load(&manifest)?;
            cmd_train_groups(&manifest, by, &model_config(order, vocab_cap), &rules, utf8(lossy), &out)
        }
        Command::Interp {
            models,
            dev,
            tol,
            max_iters,
            out,
        } => cmd_interp(&models, &dev, tol, max_iters, &out),
        Command::Ppl {
            models,
            test,
            weights,
            skip_oov,
            out,
        } => {
            let policy = if skip_oov { OovPolicy::Skip } else { OovPolicy::Score };
            cmd_ppl(&models, &test, weights.as_deref(), policy, out.as_deref())
        }
        Command::Wer {
            reference,
            hyp,
            rules_dir,
            out,
        } => {
            let rules = rules(rules_dir.as_deref())?;
            cmd_wer(&reference, &hyp, &rules, out.as_deref())
        }
    }
}

/// Runs the command line `args` (including the program name) and returns
/// the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_FATAL } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FATAL
        }
    }
}
