//! Experiment runner for three comparison shapes: one tagger per
//! language-model stage, one per embedding stack, and the four-way corpus
//! merging comparison.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::corpus::{merge_corpora, Split, TaggedCorpus};
use crate::embeddings::EmbedderStack;
use crate::error::{Error, Result};
use crate::eval::{evaluate, StudyReport, StudyRow};
use crate::scalar::Scalar;
use crate::tagger::{predict_split, train_tagger, TagTrainConfig, TaggerModel, TrainHistory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    PretrainAmount,
    Stacking,
    Merging,
}

impl fmt::Display for StudyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StudyKind::PretrainAmount => "pretrain-amount",
            StudyKind::Stacking => "stacking",
            StudyKind::Merging => "merging",
        })
    }
}

impl FromStr for StudyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pretrain-amount" => Ok(StudyKind::PretrainAmount),
            "stacking" => Ok(StudyKind::Stacking),
            "merging" => Ok(StudyKind::Merging),
            other => Err(Error::Config(format!(
                "unknown study kind {other:?} (expected pretrain-amount, stacking or merging)"
            ))),
        }
    }
}

/// An embedding stack with the label it gets in the table.
#[derive(Debug, Clone)]
pub struct LabeledStack<T: Scalar> {
    pub label: String,
    pub stack: EmbedderStack<T>,
}

impl<T: Scalar> LabeledStack<T> {
    /// Labels the stack with its members' labels joined by `" + "`.
    pub fn new(stack: EmbedderStack<T>) -> Self {
        LabeledStack {
            label: stack.label(),
            stack,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StudySpec<T: Scalar> {
    pub kind: StudyKind,
    /// One corpus, or exactly two for merging.
    pub corpora: Vec<TaggedCorpus>,
    /// One stack per language-model stage, per stacking configuration, or the
    /// single stack shared by all merging legs.
    pub stacks: Vec<LabeledStack<T>>,
}

impl<T: Scalar> StudySpec<T> {
    pub fn validate(&self) -> Result<()> {
        let (want_corpora, stacks_ok, stacks_rule) = match self.kind {
            StudyKind::PretrainAmount => (1, self.stacks.len() >= 2, "at least 2 language-model stages"),
            StudyKind::Stacking => (1, !self.stacks.is_empty(), "at least 1 stack"),
            StudyKind::Merging => (2, self.stacks.len() == 1, "exactly 1 stack"),
        };
        if self.corpora.len() != want_corpora {
            return Err(Error::Config(format!(
                "{} study needs exactly {want_corpora} corpora, got {}",
                self.kind,
                self.corpora.len()
            )));
        }
        if !stacks_ok {
            return Err(Error::Config(format!(
                "{} study needs {stacks_rule}, got {}",
                self.kind,
                self.stacks.len()
            )));
        }
        Ok(())
    }

    /// Training corpus, dataset label and stack of every leg, in table order.
    fn legs(&self) -> Vec<Leg<'_, T>> {
        match self.kind {
            StudyKind::PretrainAmount | StudyKind::Stacking => self
                .stacks
                .iter()
                .map(|s| Leg {
                    dataset: self.corpora[0].name.clone(),
                    test_corpus: self.corpora[0].name.clone(),
                    corpus: self.corpora[0].clone(),
                    stack: s,
                })
                .collect(),
            StudyKind::Merging => {
                let (a, b) = (&self.corpora[0], &self.corpora[1]);
                let stack = &self.stacks[0];
                let leg = |dataset: String, own: &TaggedCorpus, corpus: TaggedCorpus| Leg {
                    dataset,
                    test_corpus: own.name.clone(),
                    corpus,
                    stack,
                };
                // A merged corpus keeps the first corpus's test split.
                vec![
                    leg(a.name.clone(), a, a.clone()),
                    leg(format!("{} (+{})", a.name, b.name), a, merge_corpora(a, b)),
                    leg(b.name.clone(), b, b.clone()),
                    leg(format!("{} (+{})", b.name, a.name), b, merge_corpora(b, a)),
                ]
            }
        }
    }
}

struct Leg<'a, T: Scalar> {
    dataset: String,
    test_corpus: String,
    corpus: TaggedCorpus,
    stack: &'a LabeledStack<T>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LegSummary {
    pub dataset: String,
    pub model: String,
    pub train_sentences: usize,
    /// Corpus whose test split scored this leg.
    pub test_corpus: String,
    pub test_sentences: usize,
    pub history: TrainHistory,
}

#[derive(Debug, Clone)]
pub struct StudyOutcome<T: Scalar> {
    pub report: StudyReport,
    pub legs: Vec<LegSummary>,
    pub models: Vec<TaggerModel<T>>,
}

fn run_leg<T: Scalar>(leg: &Leg<'_, T>, cfg: &TagTrainConfig) -> Result<(StudyRow, LegSummary, TaggerModel<T>)> {
    let mut stack = leg.stack.stack.clone();
    let (model, history) = train_tagger(&leg.corpus, &mut stack, cfg)?;
    let predicted = predict_split(&model, &mut stack, &leg.corpus, Split::Test)?;
    let report = evaluate(&leg.corpus.test, &predicted)?.named(leg.corpus.name.clone(), leg.stack.label.clone());
    let row = StudyRow {
        dataset: leg.dataset.clone(),
        group: leg.test_corpus.clone(),
        model: leg.stack.label.clone(),
        report,
    };
    let summary = LegSummary {
        dataset: leg.dataset.clone(),
        model: leg.stack.label.clone(),
        train_sentences: leg.corpus.train.len(),
        test_corpus: leg.test_corpus.clone(),
        test_sentences: leg.corpus.test.len(),
        history,
    };
    Ok((row, summary, model))
}

/// Trains and evaluates every leg of `spec`. With `parallel` set the legs run
/// on separate threads, each with its own copy of its stack.
pub fn run_study<T: Scalar>(spec: &StudySpec<T>, cfg: &TagTrainConfig, parallel: bool) -> Result<StudyOutcome<T>> {
    spec.validate()?;
    cfg.validate()?;
    let legs = spec.legs();
    let results: Vec<Result<_>> = if parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> = legs
                .iter()
                .map(|leg| scope.spawn(move || run_leg(leg, cfg)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("study leg panicked")).collect()
        })
    } else {
        legs.iter().map(|leg| run_leg(leg, cfg)).collect()
    };
    let mut report = StudyReport::new(spec.kind.to_string());
    let mut summaries = Vec::new();
    let mut models = Vec::new();
    for r in results {
        let (row, summary, model) = r?;
        report.push(row)?;
        summaries.push(summary);
        models.push(model);
    }
    Ok(StudyOutcome {
        report,
        legs: summaries,
        models,
    })
}
