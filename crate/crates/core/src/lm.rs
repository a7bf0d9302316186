//! Querying backoff models.

use std::collections::HashMap;

use crate::arpa::{ArpaModel, NgramEntry, NON_EVENT};
use crate::counts::UNK;
use crate::textnorm::BOS;

/// Conditional word probabilities, in log10.
pub trait LanguageModel: Sync {
    fn order(&self) -> usize;

    /// log10 P(word | context). The context lists preceding tokens oldest
    /// first and may be longer than the model order. Returns negative
    /// infinity for events the model cannot produce.
    fn log10_prob(&self, context: &[&str], word: &str) -> f64;

    /// True when `word` is outside the model vocabulary and would be scored
    /// as `<unk>` (or not at all, for a closed-vocabulary model).
    fn is_oov(&self, word: &str) -> bool;
}

const NO_ID: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Stored {
    logprob: f64,
    backoff: f64,
}

/// An [`ArpaModel`] indexed for lookups, implementing standard backoff:
/// `P(w | h) = p(h w)` when stored, otherwise `bow(h) * P(w | h')`.
#[derive(Debug, Clone)]
pub struct BackoffModel {
    order: usize,
    ids: HashMap<String, u32>,
    words: Vec<String>,
    unk: Option<u32>,
    sections: Vec<HashMap<Vec<u32>, Stored>>,
}

impl BackoffModel {
    pub fn new(model: &ArpaModel) -> Self {
        let mut ids = HashMap::new();
        let mut words = Vec::new();
        for ngram in model.section(1).keys() {
            let w = &ngram[0];
            ids.insert(w.clone(), words.len() as u32);
            words.push(w.clone());
        }
        let intern = |t: &String, ids: &mut HashMap<String, u32>, words: &mut Vec<String>| -> u32 {
            *ids.entry(t.clone()).or_insert_with(|| {
                words.push(t.clone());
                (words.len() - 1) as u32
            })
        };
        let mut sections = Vec::with_capacity(model.order());
        for k in 1..=model.order() {
            let mut section = HashMap::with_capacity(model.section(k).len());
            for (ngram, NgramEntry { logprob, backoff }) in model.section(k) {
                let key: Vec<u32> = ngram.iter().map(|t| intern(t, &mut ids, &mut words)).collect();
                section.insert(
                    key,
                    Stored {
                        logprob: *logprob,
                        backoff: backoff.unwrap_or(0.0),
                    },
                );
            }
            sections.push(section);
        }
        let unk = model
            .section(1)
            .contains_key(&[UNK.to_owned()][..])
            .then(|| ids[UNK]);
        BackoffModel {
            order: model.order(),
            ids,
            words,
            unk,
            sections,
        }
    }

    pub fn has_unk(&self) -> bool {
        self.unk.is_some()
    }

    /// Words the model can predict: every unigram except `<s>`.
    pub fn events(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.sections[0]
            .iter()
            .filter(|(_, s)| s.logprob != NON_EVENT)
            .map(|(k, _)| self.words[k[0] as usize].as_str())
            .collect();
        out.sort_unstable();
        out
    }

    fn id(&self, token: &str) -> u32 {
        match self.ids.get(token) {
            Some(&id) if self.sections[0].contains_key(&[id][..]) => id,
            _ => self.unk.unwrap_or(NO_ID),
        }
    }

    fn query(&self, context: &[u32], word: u32) -> f64 {
        let mut key: Vec<u32> = Vec::with_capacity(context.len() + 1);
        let mut backoff = 0.0;
        for start in 0..=context.len() {
            let history = &context[start..];
            key.clear();
            key.extend_from_slice(history);
            key.push(word);
            if let Some(stored) = self.sections[key.len() - 1].get(key.as_slice()) {
                if stored.logprob == NON_EVENT {
                    return f64::NEG_INFINITY;
                }
                return backoff + stored.logprob;
            }
            if !history.is_empty() {
                if let Some(h) = self.sections[history.len() - 1].get(history) {
                    backoff += h.backoff;
                }
            }
        }
        f64::NEG_INFINITY
    }
}

impl LanguageModel for BackoffModel {
    fn order(&self) -> usize {
        self.order
    }

    fn log10_prob(&self, context: &[&str], word: &str) -> f64 {
        let word = self.id(word);
        if word == NO_ID {
            return f64::NEG_INFINITY;
        }
        let keep = context.len().min(self.order - 1);
        let ctx: Vec<u32> = context[context.len() - keep..]
            .iter()
            .map(|t| self.id(t))
            .collect();
        // An unknown token in a closed-vocabulary model cuts the history.
        let cut = ctx.iter().rposition(|&id| id == NO_ID).map_or(0, |p| p + 1);
        self.query(&ctx[cut..], word)
    }

    fn is_oov(&self, word: &str) -> bool {
        word != BOS && self.ids.get(word).is_none_or(|id| !self.sections[0].contains_key(&[*id][..]))
    }
}
