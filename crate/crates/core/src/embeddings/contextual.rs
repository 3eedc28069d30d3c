use std::collections::HashMap;

use crate::charlm::{CharLMCheckpoint, Direction};
use crate::corpus::Sentence;
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::scalar::Scalar;

/// Character layout of a sentence as the language models read it: a leading
/// newline, tokens joined by single spaces, and a trailing space. Returns the
/// characters with each token's first and last character position.
pub fn render_sentence(s: &Sentence) -> (Vec<char>, Vec<(usize, usize)>) {
    let mut chars = vec!['\n'];
    let mut bounds = Vec::with_capacity(s.len());
    for (i, tok) in s.tokens.iter().enumerate() {
        if i > 0 {
            chars.push(' ');
        }
        let first = chars.len();
        chars.extend(tok.text.chars());
        bounds.push((first, chars.len() - 1));
    }
    chars.push(' ');
    (chars, bounds)
}

fn check_pair<T: Scalar>(fwd: &CharLMCheckpoint<T>, bwd: &CharLMCheckpoint<T>) -> Result<()> {
    if fwd.direction != Direction::Forward || bwd.direction != Direction::Backward {
        return Err(Error::Config(format!(
            "contextual embeddings need a forward and a backward model, got {} and {}",
            fwd.direction, bwd.direction
        )));
    }
    if fwd.hidden_dim() != bwd.hidden_dim() {
        return Err(Error::Config(format!(
            "forward and backward hidden sizes differ ({} vs {})",
            fwd.hidden_dim(),
            bwd.hidden_dim()
        )));
    }
    Ok(())
}

/// Per-token `[forward state at last char; backward state at first char]`
/// (`tokens × 2H`).
pub fn contextual_string_embed<T: Scalar>(
    fwd: &CharLMCheckpoint<T>,
    bwd: &CharLMCheckpoint<T>,
    s: &Sentence,
) -> Result<Matrix<T>> {
    check_pair(fwd, bwd)?;
    let (chars, bounds) = render_sentence(s);
    let hf = fwd.hidden_states(&fwd.vocab.encode(&chars))?;
    let hb = bwd.hidden_states(&bwd.vocab.encode(&chars))?;
    let h = fwd.hidden_dim();
    let mut out = Matrix::zeros(bounds.len(), 2 * h);
    for (t, &(first, last)) in bounds.iter().enumerate() {
        let row = out.row_mut(t);
        row[..h].copy_from_slice(hf.row(last));
        row[h..].copy_from_slice(hb.row(first));
    }
    Ok(out)
}

const CACHE_LIMIT: usize = 200_000;

/// A frozen forward/backward language-model pair.
#[derive(Debug, Clone)]
pub struct ContextualEmbedder<T: Scalar> {
    pub label: String,
    fwd: CharLMCheckpoint<T>,
    bwd: CharLMCheckpoint<T>,
    cache: HashMap<Vec<String>, Matrix<T>>,
}

impl<T: Scalar> ContextualEmbedder<T> {
    pub fn new(
        label: impl Into<String>,
        fwd: CharLMCheckpoint<T>,
        bwd: CharLMCheckpoint<T>,
    ) -> Result<Self> {
        check_pair(&fwd, &bwd)?;
        Ok(ContextualEmbedder {
            label: label.into(),
            fwd,
            bwd,
            cache: HashMap::new(),
        })
    }

    pub fn dim(&self) -> usize {
        2 * self.fwd.hidden_dim()
    }

    pub fn forward_model(&self) -> &CharLMCheckpoint<T> {
        &self.fwd
    }

    pub fn backward_model(&self) -> &CharLMCheckpoint<T> {
        &self.bwd
    }

    /// Same result as [`contextual_string_embed`], memoised per token sequence.
    pub fn embed(&mut self, s: &Sentence) -> Result<Matrix<T>> {
        let key: Vec<String> = s.tokens.iter().map(|t| t.text.clone()).collect();
        if let Some(m) = self.cache.get(&key) {
            return Ok(m.clone());
        }
        let m = contextual_string_embed(&self.fwd, &self.bwd, s)?;
        if self.cache.len() < CACHE_LIMIT {
            self.cache.insert(key, m.clone());
        }
        Ok(m)
    }
}
