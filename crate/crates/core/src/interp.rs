//! Static linear interpolation of backoff models, with mixture weights
//! fitted by EM on held-out text.

use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::lm::LanguageModel;
use crate::textnorm::{NormalizedCorpus, BOS, EOS};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITERS: usize = 200;

#[derive(Debug, Error, PartialEq)]
pub enum InterpError {
    #[error("no components to interpolate")]
    NoComponents,
    #[error("development set contains no sentences")]
    EmptyDevSet,
    #[error("sentence {sentence}, token {position} ({token:?}) has zero probability under every component")]
    AllZeroLikelihood {
        sentence: usize,
        position: usize,
        token: String,
    },
    #[error("{components} components but {weights} weights")]
    WeightCount { components: usize, weights: usize },
    #[error("weights must be nonnegative and sum to 1, got {0:?}")]
    InvalidWeights(Vec<f64>),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("line {line}: {reason}")]
    MalformedWeights { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationWeights {
    pub lambda: Vec<f64>,
    pub iterations: usize,
    /// log10 likelihood of the development set under the returned weights.
    pub final_dev_loglik: f64,
    pub converged: bool,
    /// Development log10 likelihood before the first update and after each
    /// iteration.
    pub loglik_trace: Vec<f64>,
    /// Weights matching each entry of `loglik_trace`.
    pub lambda_trace: Vec<Vec<f64>>,
}

impl InterpolationWeights {
    pub fn uniform(n: usize) -> Self {
        InterpolationWeights {
            lambda: vec![1.0 / n as f64; n],
            iterations: 0,
            final_dev_loglik: 0.0,
            converged: true,
            loglik_trace: Vec::new(),
            lambda_trace: Vec::new(),
        }
    }
}

fn check_simplex(lambda: &[f64]) -> Result<(), InterpError> {
    let sum: f64 = lambda.iter().sum();
    if lambda.iter().any(|l| l.is_nan() || *l < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(InterpError::InvalidWeights(lambda.to_vec()));
    }
    Ok(())
}

/// `sum_i lambda_i P_i(w | h)`, each component queried with its own
/// vocabulary and backoff.
pub struct InterpolatedModel<'a> {
    components: Vec<&'a dyn LanguageModel>,
    lambda: Vec<f64>,
}

impl<'a> InterpolatedModel<'a> {
    pub fn new(components: Vec<&'a dyn LanguageModel>, lambda: Vec<f64>) -> Result<Self, InterpError> {
        if components.is_empty() {
            return Err(InterpError::NoComponents);
        }
        if components.len() != lambda.len() {
            return Err(InterpError::WeightCount {
                components: components.len(),
                weights: lambda.len(),
            });
        }
        check_simplex(&lambda)?;
        Ok(InterpolatedModel { components, lambda })
    }

    pub fn weights(&self) -> &[f64] {
        &self.lambda
    }

    pub fn components(&self) -> &[&'a dyn LanguageModel] {
        &self.components
    }
}

/// log10 of `sum_i lambda_i 10^p_i`, skipping zero weights so that a vertex
/// of the simplex reproduces its component exactly.
fn log10_mix(lambda: &[f64], logprobs: impl Iterator<Item = f64>) -> f64 {
    let terms: Vec<f64> = lambda
        .iter()
        .zip(logprobs)
        .filter(|(l, p)| **l > 0.0 && *p > f64::NEG_INFINITY)
        .map(|(l, p)| l.log10() + p)
        .collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let sum: f64 = terms.iter().map(|t| 10f64.powf(t - max)).sum();
    max + sum.log10()
}

impl LanguageModel for InterpolatedModel<'_> {
    fn order(&self) -> usize {
        self.components.iter().map(|c| c.order()).max().unwrap_or(1)
    }

    fn log10_prob(&self, context: &[&str], word: &str) -> f64 {
        log10_mix(
            &self.lambda,
            self.components.iter().map(|c| c.log10_prob(context, word)),
        )
    }

    /// OOV only when every component would map the word to `<unk>`.
    fn is_oov(&self, word: &str) -> bool {
        self.components.iter().all(|c| c.is_oov(word))
    }
}

/// Linear probabilities of every scored dev token (words and `</s>`) under
/// each component: `probs[t * k + i]` for token `t`, component `i`.
fn token_probs(
    components: &[&dyn LanguageModel],
    dev: &NormalizedCorpus,
) -> Result<Vec<f64>, InterpError> {
    let k = components.len();
    let per_sentence: Vec<Result<Vec<f64>, InterpError>> = dev
        .sentences
        .par_iter()
        .enumerate()
        .map(|(s, sentence)| {
            let mut history: Vec<&str> = Vec::with_capacity(sentence.len() + 1);
            history.push(BOS);
            let mut out = Vec::with_capacity((sentence.len() + 1) * k);
            for (pos, word) in sentence.iter().map(String::as_str).chain([EOS]).enumerate() {
                let row: Vec<f64> = components
                    .iter()
                    .map(|c| 10f64.powf(c.log10_prob(&history, word)))
                    .collect();
                if row.iter().all(|p| *p == 0.0) {
                    return Err(InterpError::AllZeroLikelihood {
                        sentence: s,
                        position: pos,
                        token: word.to_owned(),
                    });
                }
                out.extend(row);
                history.push(word);
            }
            Ok(out)
        })
        .collect();
    let mut probs = Vec::new();
    for sentence in per_sentence {
        probs.extend(sentence?);
    }
    Ok(probs)
}

fn loglik(probs: &[f64], lambda: &[f64]) -> f64 {
    probs
        .chunks_exact(lambda.len())
        .map(|row| row.iter().zip(lambda).map(|(p, l)| p * l).sum::<f64>().log10())
        .sum()
}

/// Fits mixture weights by EM, starting from uniform weights, until the
/// relative change in dev log-likelihood drops below `tol` or `max_iters`
/// updates have been made.
///
/// The objective is concave in the weights, but EM approaches an optimum on
/// the boundary of the simplex only asymptotically. If a single component
/// scores the dev set strictly better than the EM iterate, that vertex is
/// returned instead.
pub fn fit_em(
    components: &[&dyn LanguageModel],
    dev: &NormalizedCorpus,
    tol: f64,
    max_iters: usize,
) -> Result<InterpolationWeights, InterpError> {
    if components.is_empty() {
        return Err(InterpError::NoComponents);
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(InterpError::InvalidTolerance(tol));
    }
    if dev.is_empty() {
        return Err(InterpError::EmptyDevSet);
    }
    let k = components.len();
    let probs = token_probs(components, dev)?;

    let mut lambda = vec![1.0 / k as f64; k];
    let mut current = loglik(&probs, &lambda);
    let mut trace = vec![current];
    let mut lambda_trace = vec![lambda.clone()];
    if k == 1 {
        return Ok(InterpolationWeights {
            lambda,
            iterations: 0,
            final_dev_loglik: current,
            converged: true,
            loglik_trace: trace,
            lambda_trace,
        });
    }

    let mut iterations = 0;
    let mut converged = false;
    let mut resp = vec![0.0; k];
    while iterations < max_iters {
        resp.iter_mut().for_each(|r| *r = 0.0);
        for row in probs.chunks_exact(k) {
            let mix: f64 = row.iter().zip(&lambda).map(|(p, l)| p * l).sum();
            for i in 0..k {
                resp[i] += lambda[i] * row[i] / mix;
            }
        }
        let total: f64 = resp.iter().sum();
        let next: Vec<f64> = resp.iter().map(|r| r / total).collect();
        let next_ll = loglik(&probs, &next);
        iterations += 1;
        // Rounding can make a converged update look marginally worse.
        if next_ll < current {
            trace.push(current);
            lambda_trace.push(lambda.clone());
            converged = true;
            break;
        }
        let change = (next_ll - current).abs() / current.abs().max(f64::MIN_POSITIVE);
        lambda = next;
        current = next_ll;
        trace.push(current);
        lambda_trace.push(lambda.clone());
        if change < tol {
            converged = true;
            break;
        }
    }

    for i in 0..k {
        let mut vertex = vec![0.0; k];
        vertex[i] = 1.0;
        let ll = loglik(&probs, &vertex);
        if ll > current {
            lambda = vertex;
            current = ll;
        }
    }

    Ok(InterpolationWeights {
        lambda,
        iterations,
        final_dev_loglik: current,
        converged,
        loglik_trace: trace,
        lambda_trace,
    })
}

/// Dev log10 likelihood of fixed weights, scored the same way as in
/// [`fit_em`].
pub fn dev_loglik(
    components: &[&dyn LanguageModel],
    dev: &NormalizedCorpus,
    lambda: &[f64],
) -> Result<f64, InterpError> {
    if components.len() != lambda.len() {
        return Err(InterpError::WeightCount {
            components: components.len(),
            weights: lambda.len(),
        });
    }
    if dev.is_empty() {
        return Err(InterpError::EmptyDevSet);
    }
    let probs = token_probs(components, dev)?;
    Ok(loglik(&probs, lambda))
}

/// Report format: one `name<TAB>lambda` line per component, then
/// `#`-prefixed summary lines.
pub fn format_weights(names: &[String], weights: &InterpolationWeights) -> String {
    let mut out = String::new();
    for (name, l) in names.iter().zip(&weights.lambda) {
        let _ = writeln!(out, "{name}\t{l}");
    }
    let _ = writeln!(out, "#dev_log10_likelihood\t{}", weights.final_dev_loglik);
    let _ = writeln!(out, "#iterations\t{}", weights.iterations);
    let _ = writeln!(out, "#converged\t{}", weights.converged);
    out
}

/// Reads the `name<TAB>lambda` lines of a weights report.
pub fn parse_weights(text: &str) -> Result<Vec<(String, f64)>, InterpError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: &str| InterpError::MalformedWeights {
            line: i + 1,
            reason: reason.to_owned(),
        };
        let (name, value) = line.rsplit_once('\t').ok_or_else(|| bad("expected name<TAB>lambda"))?;
        let value: f64 = value.trim().parse().map_err(|_| bad("lambda is not a number"))?;
        out.push((name.to_owned(), value));
    }
    Ok(out)
}
