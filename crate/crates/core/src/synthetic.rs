//! Seeded synthetic data: gazetteer-templated NER corpora, raw text for
//! language-model pretraining, and random static embedding tables.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng as _;

use crate::corpus::{Sentence, TaggedCorpus, Token};
use crate::embeddings::StaticTable;
use crate::error::Result;
use crate::numerics::rng::{seeded, Rng};
use crate::scalar::Scalar;

const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "tr", "kl"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "eo"];

/// Word endings and multi-word modifiers that make each entity type
/// recognisable from its spelling.
fn type_morphology(ty: &str) -> (&'static [&'static str], &'static [&'static str]) {
    match ty {
        "DIS" => (&["itis", "oma", "osis", "algia"], &["acute", "chronic"]),
        "CHEM" => (&["ine", "ol", "ate", "azide"], &["sodium", "methyl"]),
        "SPE" => (&["ia", "us", "ella", "ops"], &["wild", "dwarf"]),
        _ => (&["ex", "ix", "ax"], &["big", "small"]),
    }
}

/// Carrier sentences; `{0}` and `{1}` are slots for the first and second
/// entity type of the corpus.
const TEMPLATES: &[&str] = &[
    "patients with {0} were given {1} daily .",
    "the {1} dose reduced symptoms of {0} .",
    "no {0} was observed after {1} treatment .",
    "{0} is frequently reported in older adults .",
    "we measured {1} levels in serum samples .",
    "results suggest that {1} may prevent {0} .",
    "cases of {0} and {0} were excluded from the cohort .",
    "the study found no effect on survival .",
    "{1} and {1} were compared in a randomized trial .",
    "a history of {0} increased the risk .",
    "treatment with {1} was well tolerated .",
    "in this report we describe a novel case .",
];

#[derive(Debug, Clone, PartialEq)]
pub struct GazetteerConfig {
    pub name: String,
    /// Entity types; the first two fill template slots `{0}` and `{1}`.
    pub types: Vec<String>,
    /// Distinct entity surface forms, spread evenly over the types.
    pub surfaces: usize,
    pub train: usize,
    pub dev: usize,
    pub test: usize,
    pub seed: u64,
}

impl Default for GazetteerConfig {
    fn default() -> Self {
        GazetteerConfig {
            name: "synthetic".into(),
            types: vec!["DIS".into(), "CHEM".into()],
            surfaces: 30,
            train: 500,
            dev: 100,
            test: 100,
            seed: 7,
        }
    }
}

fn pseudo_word(rng: &mut Rng, ending: &str) -> String {
    let syllables = rng.random_range(2..=3);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS.choose(rng).unwrap());
        w.push_str(VOWELS.choose(rng).unwrap());
    }
    w.push_str(ending);
    w
}

/// Entity surface forms per type, each a list of tokens.
pub fn gazetteer(cfg: &GazetteerConfig) -> Vec<Vec<Vec<String>>> {
    let mut rng = seeded(cfg.seed ^ 0x9E37_79B9);
    let n_types = cfg.types.len().max(1);
    let mut seen = BTreeSet::new();
    let mut out = vec![Vec::new(); n_types];
    for i in 0..cfg.surfaces {
        let ty = i % n_types;
        let (endings, modifiers) = type_morphology(&cfg.types[ty]);
        loop {
            let ending = *endings.choose(&mut rng).unwrap();
            let head = pseudo_word(&mut rng, ending);
            let mut toks = Vec::new();
            // Every fourth surface is a two-token name.
            if (i / n_types) % 4 == 3 {
                toks.push(modifiers.choose(&mut rng).unwrap().to_string());
            }
            toks.push(head);
            if seen.insert(toks.join(" ")) {
                out[ty].push(toks);
                break;
            }
        }
    }
    out
}

fn render(rng: &mut Rng, cfg: &GazetteerConfig, gaz: &[Vec<Vec<String>>]) -> Vec<(String, String)> {
    let template = TEMPLATES.choose(rng).unwrap();
    let mut pairs = Vec::new();
    for word in template.split(' ') {
        let slot = match word {
            "{0}" => Some(0),
            "{1}" => Some(1 % gaz.len()),
            _ => None,
        };
        match slot {
            Some(ty) => {
                let surface = gaz[ty].choose(rng).unwrap();
                for (k, tok) in surface.iter().enumerate() {
                    let prefix = if k == 0 { "B" } else { "I" };
                    pairs.push((tok.clone(), format!("{prefix}-{}", cfg.types[ty])));
                }
            }
            None => pairs.push((word.to_string(), "O".to_string())),
        }
    }
    let first = &mut pairs[0].0;
    let mut cs = first.chars();
    if let Some(c) = cs.next() {
        *first = c.to_uppercase().chain(cs).collect();
    }
    pairs
}

fn sentences(rng: &mut Rng, n: usize, cfg: &GazetteerConfig, gaz: &[Vec<Vec<String>>]) -> Vec<Sentence> {
    (0..n)
        .map(|_| {
            let tokens = render(rng, cfg, gaz)
                .into_iter()
                .map(|(t, l)| Token::new(t, l).expect("generated token is valid"))
                .collect();
            Sentence::new(tokens).expect("generated sentence is valid")
        })
        .collect()
}

/// Labelled corpus of templated sentences whose entities come from a seeded
/// gazetteer; train, dev and test share the gazetteer.
pub fn gazetteer_corpus(cfg: &GazetteerConfig) -> TaggedCorpus {
    let gaz = gazetteer(cfg);
    let mut rng = seeded(cfg.seed);
    let train = sentences(&mut rng, cfg.train, cfg, &gaz);
    let dev = sentences(&mut rng, cfg.dev, cfg, &gaz);
    let test = sentences(&mut rng, cfg.test, cfg, &gaz);
    TaggedCorpus::new(cfg.name.clone(), train, dev, test)
}

/// Unlabelled documents drawn from the same distribution as
/// [`gazetteer_corpus`]; `stream_seed` varies the sentences, not the gazetteer.
pub fn gazetteer_raw_text(cfg: &GazetteerConfig, documents: usize, sentences_per_doc: usize, stream_seed: u64) -> Vec<String> {
    let gaz = gazetteer(cfg);
    let mut rng = seeded(stream_seed);
    (0..documents)
        .map(|_| {
            sentences(&mut rng, sentences_per_doc, cfg, &gaz)
                .iter()
                .map(|s| s.texts().join(" "))
                .collect::<Vec<_>>()
                .join("\n")
        })
        .collect()
}

/// Every distinct token text of `corpus`, sorted, optionally lower-cased.
pub fn corpus_vocabulary(corpus: &TaggedCorpus, lowercase: bool) -> Vec<String> {
    let mut words = BTreeSet::new();
    for s in corpus.train.iter().chain(&corpus.dev).chain(&corpus.test) {
        for t in &s.tokens {
            words.insert(if lowercase { t.text.to_lowercase() } else { t.text.clone() });
        }
    }
    words.into_iter().collect()
}

/// Table of uniform(−1, 1) vectors, one per word, drawn in the given order.
pub fn random_static_table<T: Scalar>(words: &[String], dim: usize, seed: u64) -> Result<StaticTable<T>> {
    let mut rng = seeded(seed);
    let mut entries = Vec::with_capacity(words.len());
    for w in words {
        let v: Vec<T> = (0..dim).map(|_| T::lit(rng.random_range(-1.0..1.0))).collect();
        entries.push((w.clone(), v));
    }
    StaticTable::from_entries(dim, entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_shape() {
        let cfg = GazetteerConfig::default();
        let c = gazetteer_corpus(&cfg);
        assert_eq!((c.train.len(), c.dev.len(), c.test.len()), (500, 100, 100));
        let gaz = gazetteer(&cfg);
        assert_eq!(gaz.iter().map(Vec::len).sum::<usize>(), 30);
        let types: BTreeSet<_> = c.train.iter().flat_map(|s| s.spans()).map(|s| s.entity_type).collect();
        assert_eq!(types.len(), 2);
        assert!(c.train.iter().all(|s| !s.needs_repair()));
    }

    #[test]
    fn deterministic() {
        let cfg = GazetteerConfig::default();
        assert_eq!(gazetteer_corpus(&cfg), gazetteer_corpus(&cfg));
        let other = GazetteerConfig { seed: 8, ..cfg.clone() };
        assert_ne!(gazetteer(&cfg), gazetteer(&other));
    }

    #[test]
    fn static_table_covers_vocabulary() {
        let c = gazetteer_corpus(&GazetteerConfig::default());
        let words = corpus_vocabulary(&c, false);
        let t = random_static_table::<f64>(&words, 4, 1).unwrap();
        assert_eq!(t.len(), words.len());
    }
}
