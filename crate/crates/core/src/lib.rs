//! Subtitle corpora to n-gram language models: text normalization, n-gram
//! counting, interpolated modified Kneser-Ney estimation, ARPA and count
//! file I/O, linear interpolation with EM-fitted weights, and evaluation by
//! perplexity and word error rate.

pub mod textnorm;
pub mod counts;
pub mod arpa;
pub mod lm;
pub mod mkn;
pub mod interp;
pub mod eval;
pub mod cli;
