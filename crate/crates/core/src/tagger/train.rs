use serde::Serialize;

use crate::corpus::{SentenceRef, Split, TaggedCorpus};
use crate::embeddings::EmbedderStack;
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::numerics::rng::seeded;
use crate::numerics::{sgd_step, ParamSet, Tape};
use crate::scalar::Scalar;

use super::network::TaggerIds;
use super::{emissions, viterbi, TagSet, TaggerDims, TaggerModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TagTrainConfig {
    pub lr: f64,
    /// Factor applied to `lr` after `patience` epochs without a better score.
    pub anneal: f64,
    pub patience: usize,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub clip_norm: f64,
    pub seed: u64,
    pub dims: TaggerDims,
    /// Empty pooled memories at the start of every epoch.
    pub reset_memory_each_epoch: bool,
}

impl Default for TagTrainConfig {
    fn default() -> Self {
        TagTrainConfig {
            lr: 0.1,
            anneal: 0.5,
            patience: 3,
            max_epochs: 20,
            batch_size: 8,
            clip_norm: 5.0,
            seed: 1,
            dims: TaggerDims::default(),
            reset_memory_each_epoch: true,
        }
    }
}

impl TagTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("tagger lr must be positive, got {}", self.lr)));
        }
        if !(self.anneal > 0.0 && self.anneal <= 1.0) {
            return Err(Error::Config(format!("anneal factor must be in (0, 1], got {}", self.anneal)));
        }
        if self.batch_size == 0 || self.patience == 0 {
            return Err(Error::Config("batch size and patience must be positive".into()));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::Config(format!("clip norm must be positive, got {}", self.clip_norm)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    /// 0 is the untrained model.
    pub epoch: usize,
    /// Mean per-sentence negative log-likelihood; absent for epoch 0.
    pub train_loss: Option<f64>,
    /// Span F1 on the selection split.
    pub dev_f1: f64,
    /// Learning rate used for this epoch.
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    /// Split used for model selection (train when the corpus has no dev split).
    pub selection_split: Split,
}

#[derive(Debug, Clone, Copy)]
pub enum TrainEvent<'a> {
    EpochStart { epoch: usize, memory_len: usize },
    EpochEnd(&'a EpochRecord),
}

/// Labels for every sentence of `split`, read in corpus order with pooled
/// memories starting empty.
pub fn predict_split<T: Scalar>(
    m: &TaggerModel<T>,
    stack: &mut EmbedderStack<T>,
    corpus: &TaggedCorpus,
    split: Split,
) -> Result<Vec<Vec<String>>> {
    m.check_stack(stack)?;
    stack.reset_memories();
    corpus
        .split(split)
        .iter()
        .enumerate()
        .map(|(index, s)| {
            let x = stack.embed(s, Some(SentenceRef { split, index }))?;
            let (tags, _) = viterbi(&emissions(m, &x)?, &m.trans)?;
            Ok(tags.into_iter().map(|t| m.tag_set.label(t).to_owned()).collect())
        })
        .collect()
}

fn split_f1<T: Scalar>(
    m: &TaggerModel<T>,
    stack: &mut EmbedderStack<T>,
    corpus: &TaggedCorpus,
    split: Split,
) -> Result<f64> {
    let predicted = predict_split(m, stack, corpus, split)?;
    Ok(evaluate(corpus.split(split), &predicted)?.f1)
}

pub fn train_tagger<T: Scalar>(
    corpus: &TaggedCorpus,
    stack: &mut EmbedderStack<T>,
    cfg: &TagTrainConfig,
) -> Result<(TaggerModel<T>, TrainHistory)> {
    train_tagger_observed(corpus, stack, cfg, &mut |_| {})
}

/// Trains a tagger on `corpus.train`, selecting the epoch with the best dev F1
/// (earliest on ties). `observer` sees every epoch start and end.
pub fn train_tagger_observed<T: Scalar>(
    corpus: &TaggedCorpus,
    stack: &mut EmbedderStack<T>,
    cfg: &TagTrainConfig,
    observer: &mut dyn FnMut(TrainEvent<'_>),
) -> Result<(TaggerModel<T>, TrainHistory)> {
    cfg.validate()?;
    if corpus.train.is_empty() {
        return Err(Error::Config(format!("corpus {:?} has an empty train split", corpus.name)));
    }
    let selection_split = if corpus.dev.is_empty() { Split::Train } else { Split::Dev };
    stack.check_coverage(corpus, &[Split::Train, selection_split])?;
    let tag_set = TagSet::from_corpus(corpus)?;
    let gold: Vec<Vec<usize>> = corpus.train.iter().map(|s| tag_set.encode(s)).collect::<Result<_>>()?;

    let mut rng = seeded(cfg.seed);
    let mut model = TaggerModel::init(tag_set, stack, cfg.dims, &mut rng)?;
    let mut ps = ParamSet::new();
    let ids = TaggerIds::register(&model, &mut ps);
    let pinned = model.tag_set.pinned_transitions(model.bio_constraints);

    let mut lr = cfg.lr;
    let first = EpochRecord {
        epoch: 0,
        train_loss: None,
        dev_f1: split_f1(&model, stack, corpus, selection_split)?,
        lr,
    };
    observer(TrainEvent::EpochEnd(&first));
    let mut best = (first.dev_f1, 0, model.clone());
    let mut history = vec![first];
    let mut stale = 0;

    for epoch in 1..=cfg.max_epochs {
        if cfg.reset_memory_each_epoch {
            stack.reset_memories();
        }
        observer(TrainEvent::EpochStart {
            epoch,
            memory_len: stack.memory_len(),
        });
        let mut loss_sum = 0.0;
        for (b, batch) in corpus.train.chunks(cfg.batch_size).enumerate() {
            let start = b * cfg.batch_size;
            let mut tape = Tape::new();
            let bound = ids.bind(&mut tape, &ps);
            let mut losses = Vec::with_capacity(batch.len());
            for (i, s) in batch.iter().enumerate() {
                let index = start + i;
                let x = stack.embed(s, Some(SentenceRef { split: Split::Train, index }))?;
                losses.push(bound.sentence_nll(&mut tape, &x, &gold[index])?);
            }
            let total = tape.concat_rows(&losses)?;
            let total = tape.sum(total);
            let mean = tape.scale(total, T::one() / T::from_usize(batch.len()).unwrap());
            let value = tape.value(total).item().to_f64_lossy();
            if !value.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite tagger loss at epoch {epoch}, batch {b}"
                )));
            }
            loss_sum += value;
            tape.backward(mean, &mut ps)?;
            let grad = &mut ps.get_mut(ids.trans).grad;
            for &(i, j) in &pinned {
                grad[(i, j)] = T::zero();
            }
            sgd_step(&mut ps, T::lit(lr), T::lit(cfg.clip_norm))?;
        }
        ids.write_back(&mut model, &ps);

        let record = EpochRecord {
            epoch,
            train_loss: Some(loss_sum / corpus.train.len() as f64),
            dev_f1: split_f1(&model, stack, corpus, selection_split)?,
            lr,
        };
        observer(TrainEvent::EpochEnd(&record));
        if record.dev_f1 > best.0 {
            best = (record.dev_f1, epoch, model.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                lr *= cfg.anneal;
                stale = 0;
            }
        }
        history.push(record);
    }
    let (_, best_epoch, best_model) = best;
    Ok((
        best_model,
        TrainHistory {
            epochs: history,
            best_epoch,
            selection_split,
        },
    ))
}
