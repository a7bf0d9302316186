mod common;

use proptest::prelude::*;

use sublm::counts::count_ngrams;
use sublm::lm::{BackoffModel, LanguageModel};
use sublm::mkn::{estimate, estimate_with_discounts, MknError, ModelConfig};
use sublm::textnorm::NormalizedCorpus;

/// Sentences over a small alphabet, each word position having some chance
/// of a word that occurs nowhere else.
fn sentences() -> impl Strategy<Value = Vec<Vec<String>>> {
    let word = prop_oneof![
        4 => prop::sample::select(vec!["a", "b", "c", "d", "e"]).prop_map(str::to_owned),
        1 => Just(String::new()),
    ];
    prop::collection::vec(prop::collection::vec(word, 1..7), 1..16).prop_map(|mut s| {
        let mut next = 0;
        for t in s.iter_mut().flatten() {
            if t.is_empty() {
                *t = format!("h{next}");
                next += 1;
            }
        }
        s
    })
}

fn train(s: &[Vec<String>], order: usize) -> Result<sublm::arpa::ArpaModel, MknError> {
    let t = count_ngrams(&NormalizedCorpus::new(s.to_vec()), order).unwrap();
    estimate(&t, &ModelConfig::with_order(order))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn stored_contexts_sum_to_one(s in sentences(), order in 1usize..=4) {
        let Ok(model) = train(&s, order) else { return Ok(()) };
        let lm = BackoffModel::new(&model);
        let events = lm.events();
        let mut contexts: Vec<Vec<String>> = vec![vec![]];
        for k in 1..order {
            contexts.extend(model.section(k).iter().filter(|(_, e)| e.backoff.is_some()).map(|(g, _)| g.clone()));
        }
        for h in &contexts {
            let h: Vec<&str> = h.iter().map(String::as_str).collect();
            let sum: f64 = events.iter().map(|w| 10f64.powf(lm.log10_prob(&h, w))).sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9, "context {:?} sums to {}", h, sum);
        }
    }

    #[test]
    fn prefixes_and_suffixes_are_stored(s in sentences(), order in 2usize..=5) {
        let Ok(model) = train(&s, order) else { return Ok(()) };
        for k in 2..=order {
            for g in model.section(k).keys() {
                let prefix = model.get(&g[..k - 1]);
                prop_assert!(prefix.is_some_and(|e| e.backoff.is_some()), "prefix of {:?}", g);
                prop_assert!(model.get(&g[1..]).is_some(), "suffix of {:?}", g);
            }
        }
    }

    #[test]
    fn leftover_mass_is_positive(s in sentences(), order in 1usize..=4) {
        let t = count_ngrams(&NormalizedCorpus::new(s.clone()), order).unwrap();
        let Ok(est) = estimate_with_discounts(&t, &ModelConfig::with_order(order)) else { return Ok(()) };
        for d in est.discounts.iter().flatten() {
            prop_assert!(d.d1 > 0.0 && d.d2 > 0.0 && d.d3plus > 0.0, "{:?}", d);
        }
        for k in 1..=order {
            for (g, e) in est.model.section(k) {
                prop_assert!(e.logprob.is_finite() || e.is_non_event(), "{:?}", g);
                if let Some(b) = e.backoff {
                    prop_assert!(b.is_finite(), "backoff of {:?}", g);
                }
            }
        }
    }

    #[test]
    fn agrees_with_oracle(s in sentences(), order in 1usize..=3) {
        let oracle = common::MknOracle::new(&s, order);
        let model = train(&s, order);
        match (oracle, model) {
            (Ok(oracle), Ok(model)) => {
                let lm = BackoffModel::new(&model);
                let events = oracle.events();
                for h in events.iter().map(|e| vec!["<s>", e.as_str()]).chain(events.iter().map(|e| vec![e.as_str(), e.as_str()])) {
                    for w in events.iter().map(String::as_str).chain(["unseen"]) {
                        let got = 10f64.powf(lm.log10_prob(&h, w));
                        let expect = oracle.prob(&h, w);
                        prop_assert!((got - expect).abs() <= 1e-12, "P({} | {:?}) = {} vs {}", w, h, got, expect);
                    }
                }
            }
            (Err(_), Err(MknError::InsufficientStatistics { .. })) => {}
            (o, m) => prop_assert!(false, "oracle {:?} vs model {:?}", o.err(), m.err()),
        }
    }
}
