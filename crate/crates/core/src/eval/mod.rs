//! Exact-span micro-averaged precision / recall / F1 and study tables.

mod render;

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

pub use render::{format_percent, render_study, ExternalRow, StudyReport, StudyRow};

use crate::corpus::{extract_spans, Sentence, Span};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SpanCounts {
    pub gold: usize,
    pub predicted: usize,
    pub correct: usize,
}

impl SpanCounts {
    pub fn precision(&self) -> f64 {
        ratio(self.correct, self.predicted)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.correct, self.gold)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        }
    }

    fn add(&mut self, other: SpanCounts) {
        self.gold += other.gold;
        self.predicted += other.predicted;
        self.correct += other.correct;
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: SpanCounts,
}

impl From<SpanCounts> for TypeScores {
    fn from(counts: SpanCounts) -> Self {
        TypeScores {
            precision: counts.precision(),
            recall: counts.recall(),
            f1: counts.f1(),
            counts,
        }
    }
}

/// Scores for one labelled split. Serialises to the JSON report format.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub corpus: String,
    pub model: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: SpanCounts,
    pub per_type: BTreeMap<String, TypeScores>,
}

impl EvalReport {
    pub fn named(mut self, corpus: impl Into<String>, model: impl Into<String>) -> Self {
        self.corpus = corpus.into();
        self.model = model.into();
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

fn count_by_type(spans: &[Span], into: &mut BTreeMap<String, SpanCounts>, gold: bool) {
    for s in spans {
        let c = into.entry(s.entity_type.clone()).or_default();
        if gold {
            c.gold += 1;
        } else {
            c.predicted += 1;
        }
    }
}

/// Span-level scores of `predicted` label sequences against `gold`. Both sides
/// go through [`extract_spans`], so illegal BIO sequences are repaired rather
/// than rejected.
pub fn evaluate<S: AsRef<str>>(gold: &[Sentence], predicted: &[Vec<S>]) -> Result<EvalReport> {
    if gold.len() != predicted.len() {
        return Err(Error::Evaluation {
            sentence: gold.len().min(predicted.len()),
            message: format!(
                "{} gold sentences but {} predictions",
                gold.len(),
                predicted.len()
            ),
        });
    }
    let mut total = SpanCounts::default();
    let mut per_type: BTreeMap<String, SpanCounts> = BTreeMap::new();
    for (i, (g, p)) in gold.iter().zip(predicted).enumerate() {
        if g.len() != p.len() {
            return Err(Error::Evaluation {
                sentence: i,
                message: format!("{} gold tokens but {} predicted labels", g.len(), p.len()),
            });
        }
        let gs = g.spans();
        let ps = extract_spans(p);
        count_by_type(&gs, &mut per_type, true);
        count_by_type(&ps, &mut per_type, false);
        let gold_set: HashSet<&Span> = gs.iter().collect();
        let mut sentence = SpanCounts {
            gold: gs.len(),
            predicted: ps.len(),
            correct: 0,
        };
        for s in ps.iter().filter(|s| gold_set.contains(s)) {
            sentence.correct += 1;
            per_type.get_mut(&s.entity_type).unwrap().correct += 1;
        }
        total.add(sentence);
    }
    Ok(EvalReport {
        corpus: String::new(),
        model: String::new(),
        precision: total.precision(),
        recall: total.recall(),
        f1: total.f1(),
        counts: total,
        per_type: per_type.into_iter().map(|(k, c)| (k, c.into())).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sent(labels: &[&str]) -> Sentence {
        let pairs: Vec<(String, &str)> = labels.iter().enumerate().map(|(i, l)| (format!("w{i}"), *l)).collect();
        Sentence::from_pairs(&pairs).unwrap()
    }

    #[test]
    fn perfect_prediction() {
        let g = vec![sent(&["B-X", "I-X", "O", "B-Y"])];
        let r = evaluate(&g, &[g[0].labels()]).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
        assert_eq!(r.per_type.len(), 2);
    }

    #[test]
    fn one_of_two_correct() {
        let g = vec![sent(&["B-X", "O", "O"])];
        let r = evaluate(&g, &[vec!["B-X", "O", "B-X"]]).unwrap();
        assert_eq!(r.precision, 0.5);
        assert_eq!(r.recall, 1.0);
        assert!((r.f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn all_outside() {
        let g = vec![sent(&["B-X", "O"])];
        let r = evaluate(&g, &[vec!["O", "O"]]).unwrap();
        assert_eq!((r.recall, r.f1), (0.0, 0.0));
    }

    #[test]
    fn misalignment_names_sentence() {
        let g = vec![sent(&["O"]), sent(&["O", "O"])];
        match evaluate(&g, &[vec!["O"], vec!["O"]]) {
            Err(Error::Evaluation { sentence: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(evaluate(&g, &[vec!["O"]]).is_err());
    }

    #[test]
    fn json_has_counts() {
        let g = vec![sent(&["B-X"])];
        let r = evaluate(&g, &[vec!["B-X"]]).unwrap().named("c", "m");
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["counts"]["correct"], 1);
        assert_eq!(v["per_type"]["X"]["f1"], 1.0);
        assert_eq!(v["corpus"], "c");
    }
}
