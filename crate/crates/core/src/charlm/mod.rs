//! Directional character-level LSTM language models.
//!
//! A backward model is an ordinary forward LSTM run over the reversed
//! character sequence; only the direction tag differs. Hidden state is reset
//! to zero whenever the document sentinel is about to be consumed.

mod io;
mod train;
mod vocab;

use std::fmt;

use serde::Serialize;

pub use io::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, LM_MAGIC};
pub use train::{
    continue_pretrain, train_lm, train_lm_logged, LmEvaluation, LmTrainConfig, LmTrainLog, WindowLoss,
};
pub use vocab::{build_char_vocab, CharVocabulary, NEWLINE_ID, SENTINEL_ID, UNK_ID};

use crate::corpus::CharStream;
use crate::error::{Error, Result};
use crate::numerics::{matmul, LstmCellParams, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        })
    }
}

/// One pretraining stage: which corpus and how many optimisation steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LineageRecord {
    pub corpus: String,
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharLMCheckpoint<T: Scalar> {
    pub direction: Direction,
    pub vocab: CharVocabulary,
    /// `V × E`
    pub char_embed: Matrix<T>,
    pub lstm: LstmCellParams<T>,
    /// `V × H`
    pub out_proj: Matrix<T>,
    /// `V × 1`
    pub out_bias: Matrix<T>,
    pub lineage: Vec<LineageRecord>,
}

impl<T: Scalar> CharLMCheckpoint<T> {
    pub fn hidden_dim(&self) -> usize {
        self.lstm.hidden_dim
    }

    pub fn embed_dim(&self) -> usize {
        self.char_embed.cols()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (v, e, h) = (self.vocab_size(), self.embed_dim(), self.hidden_dim());
        self.lstm.validate()?;
        let checks = [
            ("char_embed", self.char_embed.shape(), (v, e)),
            ("lstm.w", self.lstm.w.shape(), (4 * h, e)),
            ("out_proj", self.out_proj.shape(), (v, h)),
            ("out_bias", self.out_bias.shape(), (v, 1)),
        ];
        for (op, got, want) in checks {
            if got != want {
                return Err(Error::dim(op, want, got));
            }
        }
        Ok(())
    }

    /// Encodes characters in reading order for this model's direction.
    fn oriented_ids(&self, ids: &[usize]) -> Vec<usize> {
        match self.direction {
            Direction::Forward => ids.to_vec(),
            Direction::Backward => ids.iter().rev().copied().collect(),
        }
    }

    /// `W · embed(c)` for every vocabulary entry, as rows (`V × 4H`).
    fn input_table(&self) -> Result<Matrix<T>> {
        matmul(&self.char_embed, &self.lstm.w.transpose())
    }

    /// Runs the LSTM over `ids` (already in reading order) and calls `visit`
    /// with the position and hidden state after each character.
    fn scan(&self, ids: &[usize], mut visit: impl FnMut(usize, &[T])) -> Result<()> {
        let v = self.vocab_size();
        if let Some(&bad) = ids.iter().find(|&&i| i >= v) {
            return Err(Error::Model(format!("char id {bad} outside vocabulary of {v}")));
        }
        let table = self.input_table()?;
        let hd = self.hidden_dim();
        let mut h = vec![T::zero(); hd];
        let mut c = vec![T::zero(); hd];
        for (t, &id) in ids.iter().enumerate() {
            if id == SENTINEL_ID {
                h.fill(T::zero());
                c.fill(T::zero());
            }
            self.lstm.step_projected(table.row(id), &mut h, &mut c);
            visit(t, &h);
        }
        Ok(())
    }

    /// Hidden state after each character, one row per position. For backward
    /// models row `t` summarises `ids[t..]` read right to left.
    pub fn hidden_states(&self, ids: &[usize]) -> Result<Matrix<T>> {
        let n = ids.len();
        let hd = self.hidden_dim();
        let mut out = Matrix::zeros(n, hd);
        let oriented = self.oriented_ids(ids);
        let backward = self.direction == Direction::Backward;
        self.scan(&oriented, |t, h| {
            let row = if backward { n - 1 - t } else { t };
            out.row_mut(row).copy_from_slice(h);
        })?;
        Ok(out)
    }

    /// Per-prediction terms `(S, zmax − z_target)` where `S = Σ exp(z − zmax)`;
    /// the negative log-likelihood of a prediction is `ln S + (zmax − z_target)`.
    fn prediction_terms(&self, ids: &[usize]) -> Result<Vec<(T, T)>> {
        let mut terms = Vec::with_capacity(ids.len().saturating_sub(1));
        let mut logits = vec![T::zero(); self.vocab_size()];
        self.scan(ids, |t, h| {
            let Some(&target) = ids.get(t + 1) else { return };
            for (r, z) in logits.iter_mut().enumerate() {
                let mut acc = self.out_bias[(r, 0)];
                for (&w, &hv) in self.out_proj.row(r).iter().zip(h) {
                    acc += w * hv;
                }
                *z = acc;
            }
            let zmax = logits.iter().copied().fold(T::neg_infinity(), T::max);
            let s: T = logits.iter().map(|&z| (z - zmax).exp()).sum();
            terms.push((s, zmax - logits[target]));
        })?;
        Ok(terms)
    }

    /// Mean next-character negative log-likelihood over encoded ids given in
    /// reading order for this model.
    pub(crate) fn mean_nll_oriented(&self, ids: &[usize]) -> Result<Option<T>> {
        let terms = self.prediction_terms(ids)?;
        if terms.is_empty() {
            return Ok(None);
        }
        let n = T::from_usize(terms.len()).unwrap();
        Ok(Some(terms.iter().map(|&(s, gap)| s.ln() + gap).sum::<T>() / n))
    }
}

/// Mean next-character cross-entropy (nats) of `stream` under `ckpt`.
pub fn cross_entropy<T: Scalar>(ckpt: &CharLMCheckpoint<T>, stream: &CharStream) -> Result<T> {
    let ids = ckpt.oriented_ids(&ckpt.vocab.encode(&stream.chars));
    Ok(ckpt.mean_nll_oriented(&ids)?.unwrap_or(T::zero()))
}

/// `exp` of the mean next-character negative log-likelihood; always ≥ 1.
///
/// Computed as a geometric mean of the per-prediction inverse probabilities
/// `rᵢ = S·exp(zmax − z_target)` shifted by the smallest `r`, so a model that
/// assigns identical probability everywhere reproduces `1/p` exactly.
/// Streams with fewer than two characters have no predictions and score 1.
pub fn perplexity<T: Scalar>(ckpt: &CharLMCheckpoint<T>, stream: &CharStream) -> Result<T> {
    let ids = ckpt.oriented_ids(&ckpt.vocab.encode(&stream.chars));
    let terms = ckpt.prediction_terms(&ids)?;
    if terms.is_empty() {
        return Ok(T::one());
    }
    let (ref_s, ref_gap) = terms
        .iter()
        .copied()
        .min_by(|a, b| {
            (a.0.ln() + a.1)
                .partial_cmp(&(b.0.ln() + b.1))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .unwrap();
    let ref_ln_s = ref_s.ln();
    let n = T::from_usize(terms.len()).unwrap();
    let shift: T = terms
        .iter()
        .map(|&(s, gap)| (s.ln() - ref_ln_s) + (gap - ref_gap))
        .sum::<T>()
        / n;
    let reference = ref_s * ref_gap.exp();
    let ppl = if reference.is_finite() {
        reference * shift.exp()
    } else {
        (ref_ln_s + ref_gap + shift).exp()
    };
    Ok(ppl.max(T::one()))
}
