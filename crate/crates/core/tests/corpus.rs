use ctxtag::corpus::{
    extract_spans, labels_from_spans, merge_corpora, parse_conll, write_conll, ColumnSpec, Sentence, Span, TaggedCorpus,
};
use proptest::prelude::*;

fn label() -> impl Strategy<Value = String> {
    prop_oneof![
        3 => Just("O".to_string()),
        1 => prop::sample::select(vec!["Disease", "Chemical", "Gene-Protein"]).prop_map(|t| format!("B-{t}")),
        1 => prop::sample::select(vec!["Disease", "Chemical", "Gene-Protein"]).prop_map(|t| format!("I-{t}")),
    ]
}

fn sentence() -> impl Strategy<Value = Sentence> {
    prop::collection::vec(("[a-zA-Z0-9.,()-]{1,8}", label()), 1..12)
        .prop_map(|pairs| Sentence::from_pairs(&pairs).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn conll_roundtrip(split in prop::collection::vec(sentence(), 0..15)) {
        let text = write_conll(&split);
        let back = parse_conll(&text, ColumnSpec::default()).unwrap();
        prop_assert_eq!(&back, &split);
        prop_assert_eq!(write_conll(&back), text);
    }

    #[test]
    fn spans_reencode_to_a_fixed_point(s in sentence()) {
        let spans = s.spans();
        let canonical = labels_from_spans(&spans, s.len());
        prop_assert_eq!(extract_spans(&canonical), spans.clone());
        for sp in &spans {
            prop_assert!(sp.start < sp.end && sp.end <= s.len());
        }
        for w in spans.windows(2) {
            prop_assert!(w[0].end <= w[1].start);
        }
        // Already-canonical labels never need repair.
        let pairs: Vec<(&str, &str)> = s.texts().into_iter().zip(canonical.iter().map(String::as_str)).collect();
        prop_assert!(!Sentence::from_pairs(&pairs).unwrap().needs_repair());
    }

    #[test]
    fn merged_splits_are_concatenations(
        a in prop::collection::vec(sentence(), 0..6),
        b in prop::collection::vec(sentence(), 0..6),
        t in prop::collection::vec(sentence(), 0..4),
    ) {
        let x = TaggedCorpus::new("x", a.clone(), b.clone(), t.clone());
        let y = TaggedCorpus::new("y", b.clone(), a.clone(), a.clone());
        let m = merge_corpora(&x, &y);
        prop_assert_eq!(m.train.len(), a.len() + b.len());
        prop_assert_eq!(m.dev.len(), b.len() + a.len());
        prop_assert_eq!(&m.test, &t);
        prop_assert!(x.tag_set.is_subset(&m.tag_set) && y.tag_set.is_subset(&m.tag_set));
    }
}

#[test]
fn illegal_inside_opens_a_new_entity() {
    let labels = ["O", "I-Disease", "I-Disease", "B-Chemical", "I-Disease", "O", "I-Chemical"];
    assert_eq!(
        extract_spans(&labels),
        [Span::new(1, 3, "Disease"), Span::new(3, 4, "Chemical"), Span::new(4, 5, "Disease"), Span::new(6, 7, "Chemical")]
    );
    assert_eq!(
        labels_from_spans(&extract_spans(&labels), labels.len()),
        ["O", "B-Disease", "I-Disease", "B-Chemical", "B-Disease", "O", "B-Chemical"]
    );
}

#[test]
fn tab_separated_and_windows_line_endings() {
    let text = "Aspirin\tNNP\tB-Chemical\r\nworks\tVBZ\tO\r\n\r\n";
    let s = parse_conll(text, ColumnSpec::default()).unwrap();
    assert_eq!(s.len(), 1);
    assert_eq!(s[0].labels(), ["B-Chemical", "O"]);
    let pos = parse_conll(text, ColumnSpec { token_col: 0, label_col: Some(1) });
    assert!(pos.is_err(), "NNP is not a BIO label");
}

#[test]
fn corpus_files_load_with_optional_dev() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.txt");
    let test = dir.path().join("test.txt");
    std::fs::write(&train, "a B-X\nb I-X\n\nc O\n").unwrap();
    std::fs::write(&test, "d B-Y\n").unwrap();
    let c = TaggedCorpus::load("c", &train, None, &test, ColumnSpec::default()).unwrap();
    assert_eq!((c.train.len(), c.dev.len(), c.test.len()), (2, 0, 1));
    assert_eq!(c.tag_set.iter().map(String::as_str).collect::<Vec<_>>(), ["X", "Y"]);
    assert!(TaggedCorpus::load("c", &dir.path().join("missing"), None, &test, ColumnSpec::default()).is_err());
}
