use ctxtag::corpus::TaggedCorpus;
use ctxtag::embeddings::{Embedder, EmbedderStack};
use ctxtag::eval::render_study;
use ctxtag::study::{run_study, LabeledStack, StudyKind, StudySpec};
use ctxtag::synthetic::{corpus_vocabulary, gazetteer_corpus, random_static_table, GazetteerConfig};
use ctxtag::tagger::{write_tagger, TagTrainConfig, TaggerDims};

fn corpus(name: &str, types: &[&str], train: usize, seed: u64) -> TaggedCorpus {
    gazetteer_corpus(&GazetteerConfig {
        name: name.into(),
        types: types.iter().map(|t| t.to_string()).collect(),
        train,
        dev: 10,
        test: 15,
        surfaces: 8,
        seed,
    })
}

fn table_stack(label: &str, corpora: &[&TaggedCorpus], dim: usize, seed: u64) -> LabeledStack<f64> {
    let mut words: Vec<String> = corpora.iter().flat_map(|c| corpus_vocabulary(c, true)).collect();
    words.sort();
    words.dedup();
    let table = random_static_table(&words, dim, seed).unwrap();
    let stack = EmbedderStack::new(vec![Embedder::Static { label: label.into(), table }]).unwrap();
    LabeledStack::new(stack)
}

fn cfg() -> TagTrainConfig {
    TagTrainConfig { max_epochs: 2, dims: TaggerDims { hidden_dim: 6, ..Default::default() }, ..Default::default() }
}

#[test]
fn merging_emits_four_legs_with_summed_sizes() {
    let a = corpus("A", &["DIS", "CHEM"], 40, 1);
    let b = corpus("B", &["DIS", "SPE"], 25, 2);
    let spec = StudySpec {
        kind: StudyKind::Merging,
        stacks: vec![table_stack("words", &[&a, &b], 6, 3)],
        corpora: vec![a.clone(), b.clone()],
    };
    let out = run_study(&spec, &cfg(), false).unwrap();
    let labels: Vec<&str> = out.report.rows.iter().map(|r| r.dataset.as_str()).collect();
    assert_eq!(labels, ["A", "A (+B)", "B", "B (+A)"]);
    let sizes: Vec<usize> = out.legs.iter().map(|l| l.train_sentences).collect();
    assert_eq!(sizes, [40, 65, 25, 65]);
    let tests: Vec<(&str, usize)> = out.legs.iter().map(|l| (l.test_corpus.as_str(), l.test_sentences)).collect();
    assert_eq!(tests, [("A", 15), ("A", 15), ("B", 15), ("B", 15)]);
    let groups: Vec<&str> = out.report.rows.iter().map(|r| r.group.as_str()).collect();
    assert_eq!(groups, ["A", "A", "B", "B"]);
    let table = render_study(&out.report, &[]);
    assert_eq!(table.lines().count(), 6);
}

#[test]
fn stacking_rows_follow_stack_labels() {
    let c = corpus("syn", &["DIS", "CHEM"], 30, 4);
    let one = table_stack("glove", &[&c], 4, 5);
    let two = {
        let t1 = random_static_table(&corpus_vocabulary(&c, true), 4, 5).unwrap();
        let t2 = random_static_table(&corpus_vocabulary(&c, true), 3, 6).unwrap();
        LabeledStack::new(
            EmbedderStack::new(vec![
                Embedder::Static { label: "glove".into(), table: t1 },
                Embedder::Static { label: "extra".into(), table: t2 },
            ])
            .unwrap(),
        )
    };
    let spec = StudySpec { kind: StudyKind::Stacking, corpora: vec![c], stacks: vec![one, two] };
    let out = run_study(&spec, &cfg(), false).unwrap();
    let models: Vec<&str> = out.report.rows.iter().map(|r| r.model.as_str()).collect();
    assert_eq!(models, ["glove", "glove + extra"]);
}

#[test]
fn parallel_and_sequential_runs_agree() {
    let a = corpus("A", &["DIS", "CHEM"], 20, 7);
    let b = corpus("B", &["DIS", "SPE"], 20, 8);
    let spec = StudySpec {
        kind: StudyKind::Merging,
        stacks: vec![table_stack("words", &[&a, &b], 5, 9)],
        corpora: vec![a, b],
    };
    let seq = run_study(&spec, &cfg(), false).unwrap();
    let par = run_study(&spec, &cfg(), true).unwrap();
    assert_eq!(seq.report, par.report);
    let bytes = |o: &ctxtag::study::StudyOutcome<f64>| o.models.iter().map(|m| write_tagger(m).unwrap()).collect::<Vec<_>>();
    assert_eq!(bytes(&seq), bytes(&par));
}

#[test]
fn study_kinds_parse_and_print() {
    for k in [StudyKind::PretrainAmount, StudyKind::Stacking, StudyKind::Merging] {
        assert_eq!(k.to_string().parse::<StudyKind>().unwrap(), k);
    }
    assert!("tables".parse::<StudyKind>().is_err());
}
