//! BiLSTM-CRF tagger: optional linear reprojection of the stacked token
//! vectors, a bidirectional LSTM, an affine emission layer and a linear-chain
//! CRF. Embedders stay frozen; only the tagger's own parameters train.

mod crf;
mod io;
mod network;
mod train;

use serde::Serialize;

pub use crf::{crf_log_partition, crf_nll, crf_nll_on_tape, score_path, viterbi, FORBIDDEN};
pub use io::{load_tagger, read_tagger, save_tagger, write_tagger, TAGGER_MAGIC};
pub use network::TaggerLoss;
pub use train::{
    predict_split, train_tagger, train_tagger_observed, EpochRecord, TagTrainConfig, TrainEvent, TrainHistory,
};

use crate::corpus::{Bio, Sentence, SentenceRef, TaggedCorpus};
use crate::embeddings::{EmbedSignature, Embedder, EmbedderStack, PoolOp};
use crate::error::{Error, Result};
use crate::numerics::rng::{fan_in_uniform, Rng};
use crate::numerics::{LstmCellParams, Matrix};
use crate::scalar::Scalar;

/// Sorted BIO labels (always including `"O"`). Index `len()` is the virtual
/// START tag and `len() + 1` the virtual STOP tag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TagSet {
    labels: Vec<String>,
}

impl TagSet {
    pub fn from_labels<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        labels.push("O".into());
        labels.sort();
        labels.dedup();
        if let Some(bad) = labels.iter().find(|l| Bio::parse(l).is_none()) {
            return Err(Error::TagSet(format!("{bad:?} is not a BIO label")));
        }
        Ok(TagSet { labels })
    }

    /// `B-X` and `I-X` for every entity type of the corpus, plus `"O"`.
    pub fn from_corpus(corpus: &TaggedCorpus) -> Result<Self> {
        Self::from_labels(
            corpus
                .tag_set
                .iter()
                .flat_map(|ty| [format!("B-{ty}"), format!("I-{ty}")]),
        )
    }

    /// Entity types covered by the tag set.
    pub fn entity_types(&self) -> Vec<&str> {
        let mut types: Vec<&str> = self
            .labels
            .iter()
            .filter_map(|l| Bio::parse(l).and_then(Bio::entity_type))
            .collect();
        types.sort_unstable();
        types.dedup();
        types
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn start(&self) -> usize {
        self.labels.len()
    }

    pub fn stop(&self) -> usize {
        self.labels.len() + 1
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index(&self, label: &str) -> Option<usize> {
        self.labels.binary_search_by(|l| l.as_str().cmp(label)).ok()
    }

    pub fn encode(&self, s: &Sentence) -> Result<Vec<usize>> {
        s.tokens
            .iter()
            .map(|t| {
                self.index(&t.gold_label)
                    .ok_or_else(|| Error::TagSet(format!("label {:?} not in the model's tag set", t.gold_label)))
            })
            .collect()
    }

    /// Transitions held at [`FORBIDDEN`]: into START, out of STOP, and with
    /// `bio` set, every move that opens an `I-X` without a preceding `B-X`/`I-X`.
    pub fn pinned_transitions(&self, bio: bool) -> Vec<(usize, usize)> {
        let k = self.len();
        let mut out: Vec<(usize, usize)> = (0..k + 2).map(|i| (i, self.start())).collect();
        out.extend((0..k + 2).map(|j| (self.stop(), j)).filter(|&(_, j)| j != self.start()));
        if bio {
            for (j, to) in self.labels.iter().enumerate() {
                let Some(Bio::Inside(ty)) = Bio::parse(to) else { continue };
                out.push((self.start(), j));
                for (i, from) in self.labels.iter().enumerate() {
                    if Bio::parse(from).and_then(Bio::entity_type) != Some(ty) {
                        out.push((i, j));
                    }
                }
            }
        }
        out
    }
}

/// Model-shape settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TaggerDims {
    /// BiLSTM width per direction.
    pub hidden_dim: usize,
    /// Inputs wider than this are linearly projected down to it.
    pub reproj_width: usize,
    pub bio_constraints: bool,
}

impl Default for TaggerDims {
    fn default() -> Self {
        TaggerDims {
            hidden_dim: 32,
            reproj_width: 256,
            bio_constraints: false,
        }
    }
}

/// Pool settings of one pooled embedder in a stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PoolingRecord {
    pub op: PoolOp,
    pub case_fold: bool,
}

pub fn stack_pooling<T: Scalar>(stack: &EmbedderStack<T>) -> Vec<PoolingRecord> {
    stack
        .embedders()
        .iter()
        .filter_map(|e| match e {
            Embedder::Pooled(p) => Some(PoolingRecord {
                op: p.pool,
                case_fold: p.memory.case_fold,
            }),
            _ => None,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaggerModel<T: Scalar> {
    pub tag_set: TagSet,
    pub signature: EmbedSignature,
    pub pooling: Vec<PoolingRecord>,
    pub bio_constraints: bool,
    /// `(R × D, R × 1)` when the stack is wider than the reprojection width.
    pub reproj: Option<(Matrix<T>, Matrix<T>)>,
    pub fwd: LstmCellParams<T>,
    pub bwd: LstmCellParams<T>,
    /// `K × 2W`
    pub emit: Matrix<T>,
    /// `K × 1`
    pub emit_bias: Matrix<T>,
    /// `(K + 2) × (K + 2)`, row = from, column = to.
    pub trans: Matrix<T>,
}

impl<T: Scalar> TaggerModel<T> {
    pub fn init(
        tag_set: TagSet,
        stack: &EmbedderStack<T>,
        dims: TaggerDims,
        rng: &mut Rng,
    ) -> Result<Self> {
        if dims.hidden_dim == 0 || dims.reproj_width == 0 {
            return Err(Error::Config("tagger widths must be positive".into()));
        }
        let signature = stack.signature();
        let d = signature.dim();
        let reproj = (d > dims.reproj_width)
            .then(|| (fan_in_uniform(rng, dims.reproj_width, d), Matrix::zeros(dims.reproj_width, 1)));
        let r = d.min(dims.reproj_width);
        let (k, w) = (tag_set.len(), dims.hidden_dim);
        let fwd = LstmCellParams::init(r, w, rng);
        let bwd = LstmCellParams::init(r, w, rng);
        let emit = fan_in_uniform(rng, k, 2 * w);
        let mut model = TaggerModel {
            pooling: stack_pooling(stack),
            bio_constraints: dims.bio_constraints,
            signature,
            reproj,
            fwd,
            bwd,
            emit,
            emit_bias: Matrix::zeros(k, 1),
            trans: Matrix::zeros(k + 2, k + 2),
            tag_set,
        };
        model.pin_transitions();
        Ok(model)
    }

    pub fn num_tags(&self) -> usize {
        self.tag_set.len()
    }

    pub fn hidden_dim(&self) -> usize {
        self.fwd.hidden_dim
    }

    pub fn input_dim(&self) -> usize {
        self.signature.dim()
    }

    pub(crate) fn pin_transitions(&mut self) {
        for (i, j) in self.tag_set.pinned_transitions(self.bio_constraints) {
            self.trans[(i, j)] = T::lit(FORBIDDEN);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (k, w, d) = (self.num_tags(), self.hidden_dim(), self.input_dim());
        let r = match &self.reproj {
            Some((m, b)) => {
                if m.cols() != d || b.shape() != (m.rows(), 1) {
                    return Err(Error::dim("tagger.reproj", (m.rows(), d), m.shape()));
                }
                m.rows()
            }
            None => d,
        };
        self.fwd.validate()?;
        self.bwd.validate()?;
        let checks = [
            ("tagger.fwd", (self.fwd.input_dim, self.fwd.hidden_dim), (r, w)),
            ("tagger.bwd", (self.bwd.input_dim, self.bwd.hidden_dim), (r, w)),
            ("tagger.emit", self.emit.shape(), (k, 2 * w)),
            ("tagger.emit_bias", self.emit_bias.shape(), (k, 1)),
            ("tagger.trans", self.trans.shape(), (k + 2, k + 2)),
        ];
        for (op, got, want) in checks {
            if got != want {
                return Err(Error::dim(op, want, got));
            }
        }
        Ok(())
    }

    /// Fails unless `stack` produces the inputs this model was trained on.
    pub fn check_stack(&self, stack: &EmbedderStack<T>) -> Result<()> {
        let sig = stack.signature();
        if sig != self.signature {
            return Err(Error::Model(format!(
                "embedding stack {sig} does not match the model's {}",
                self.signature
            )));
        }
        let pooling = stack_pooling(stack);
        if pooling != self.pooling {
            return Err(Error::Model(format!(
                "pooling settings {pooling:?} differ from the model's {:?}",
                self.pooling
            )));
        }
        Ok(())
    }

    /// Fails if `corpus` uses labels outside the model's tag set.
    pub fn check_corpus(&self, corpus: &TaggedCorpus) -> Result<()> {
        let known = self.tag_set.entity_types();
        match corpus.tag_set.iter().find(|ty| !known.contains(&ty.as_str())) {
            Some(bad) => Err(Error::TagSet(format!(
                "corpus {:?} has entity type {bad:?}, model knows {known:?}",
                corpus.name
            ))),
            None => Ok(()),
        }
    }
}

/// Emission scores (`tokens × K`) for stacked token vectors (`tokens × D`).
pub fn emissions<T: Scalar>(m: &TaggerModel<T>, token_vectors: &Matrix<T>) -> Result<Matrix<T>> {
    network::emissions(m, token_vectors)
}

/// Viterbi labels for one sentence. `at` locates the sentence in its corpus
/// for external embedders.
pub fn predict<T: Scalar>(
    m: &TaggerModel<T>,
    stack: &mut EmbedderStack<T>,
    s: &Sentence,
    at: Option<SentenceRef>,
) -> Result<Vec<String>> {
    m.check_stack(stack)?;
    let x = stack.embed(s, at)?;
    let e = emissions(m, &x)?;
    let (tags, _) = viterbi(&e, &m.trans)?;
    Ok(tags.into_iter().map(|t| m.tag_set.label(t).to_owned()).collect())
}
