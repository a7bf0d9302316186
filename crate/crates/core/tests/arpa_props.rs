use proptest::prelude::*;

use sublm::arpa::{parse_arpa, read_arpa, to_arpa_string, write_arpa, ArpaError, ArpaModel, NgramEntry, NON_EVENT};

/// Values on the seven-decimal grid the writer prints, so the model value
/// itself survives a round trip.
fn log10_value() -> impl Strategy<Value = f64> {
    (-90_000_000i64..=0).prop_map(|n| n as f64 / 1e7)
}

fn model() -> impl Strategy<Value = ArpaModel> {
    let token = prop::sample::select(vec!["a", "b", "</s>", "<unk>", "Zoë", "vier-en", "z'n"]);
    (1usize..=4, any::<bool>())
        .prop_flat_map(move |(order, bos)| {
            let entries = prop::collection::vec(
                (
                    1..=order,
                    prop::collection::vec(token.clone(), order),
                    log10_value(),
                    prop::option::of((-45_000_000i64..=45_000_000).prop_map(|n| n as f64 / 1e7)),
                ),
                0..25,
            );
            (Just(order), Just(bos), entries)
        })
        .prop_map(|(order, bos, entries)| {
            let mut m = ArpaModel::new(order);
            if bos {
                m.insert(vec!["<s>".into()], NgramEntry { logprob: NON_EVENT, backoff: (order > 1).then_some(-0.5) });
            }
            for (k, tokens, logprob, backoff) in entries {
                let g: Vec<String> = tokens[..k].iter().map(|t| (*t).to_owned()).collect();
                m.insert(g, NgramEntry { logprob, backoff: backoff.filter(|_| k < order) });
            }
            m
        })
}

proptest! {
    #[test]
    fn parse_inverts_write(m in model()) {
        let text = to_arpa_string(&m).unwrap();
        let back = parse_arpa(&text).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(to_arpa_string(&back).unwrap(), text);
    }

    #[test]
    fn spacing_variants_parse_to_the_same_model(m in model()) {
        let text = to_arpa_string(&m).unwrap();
        let spaced = format!("written by another tool\n\n{}", text.replace('\t', "  "));
        prop_assert_eq!(parse_arpa(&spaced).unwrap(), m);
    }
}

#[test]
fn file_round_trip() {
    let mut m = ArpaModel::new(2);
    m.insert(vec!["<s>".into()], NgramEntry { logprob: NON_EVENT, backoff: Some(-0.25) });
    m.insert(vec!["a".into()], NgramEntry { logprob: -0.5, backoff: Some(-0.125) });
    m.insert(vec!["</s>".into()], NgramEntry { logprob: -0.5, backoff: None });
    m.insert(vec!["<s>".into(), "a".into()], NgramEntry { logprob: -0.0625, backoff: None });
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lm.arpa");
    write_arpa(&m, &path).unwrap();
    let first = std::fs::read(&path).unwrap();
    let back = read_arpa(&path).unwrap();
    assert_eq!(back, m);
    write_arpa(&back, &path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);
}

#[test]
fn malformed_files() {
    let cases = [
        // header count disagrees with the section
        "\\data\\\nngram 1=3\n\n\\1-grams:\n-0.5\t</s>\n-0.5\ta\n\n\\end\\\n",
        // positive log probability
        "\\data\\\nngram 1=1\n\n\\1-grams:\n0.5\ta\n\n\\end\\\n",
        // missing \end\
        "\\data\\\nngram 1=1\n\n\\1-grams:\n-0.5\ta\n",
        // backoff on the highest order
        "\\data\\\nngram 1=1\n\n\\1-grams:\n-0.5\ta\t-0.1\t-0.2\n\n\\end\\\n",
        // no \data\ section
        "\\1-grams:\n-0.5\ta\n\\end\\\n",
    ];
    for (i, text) in cases.iter().enumerate() {
        assert!(matches!(parse_arpa(text), Err(ArpaError::MalformedArpa { .. })), "case {i}");
    }
}
