use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::corpus::Sentence;
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::scalar::Scalar;

use super::ContextualEmbedder;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolOp {
    #[default]
    Mean,
    Min,
    Max,
}

impl PoolOp {
    pub fn code(self) -> u8 {
        match self {
            PoolOp::Mean => 0,
            PoolOp::Min => 1,
            PoolOp::Max => 2,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(PoolOp::Mean),
            1 => Some(PoolOp::Min),
            2 => Some(PoolOp::Max),
            _ => None,
        }
    }
}

impl fmt::Display for PoolOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PoolOp::Mean => "mean",
            PoolOp::Min => "min",
            PoolOp::Max => "max",
        })
    }
}

impl FromStr for PoolOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(PoolOp::Mean),
            "min" => Ok(PoolOp::Min),
            "max" => Ok(PoolOp::Max),
            other => Err(Error::Config(format!("unknown pooling operation {other:?}"))),
        }
    }
}

/// Running statistics of every contextual vector seen for one word.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate<T> {
    pub count: usize,
    pub mean: Vec<T>,
    pub min: Vec<T>,
    pub max: Vec<T>,
}

impl<T: Scalar> Aggregate<T> {
    fn first(v: &[T]) -> Self {
        Aggregate {
            count: 1,
            mean: v.to_vec(),
            min: v.to_vec(),
            max: v.to_vec(),
        }
    }

    fn update(&mut self, v: &[T]) {
        self.count += 1;
        let n = T::from_usize(self.count).unwrap();
        for (k, &x) in v.iter().enumerate() {
            let m = self.mean[k];
            self.mean[k] = m + (x - m) / n;
            self.min[k] = self.min[k].min(x);
            self.max[k] = self.max[k].max(x);
        }
    }

    pub fn pooled(&self, op: PoolOp) -> &[T] {
        match op {
            PoolOp::Mean => &self.mean,
            PoolOp::Min => &self.min,
            PoolOp::Max => &self.max,
        }
    }
}

/// Cross-sentence memory keyed by token surface string.
#[derive(Debug, Clone, Default)]
pub struct PooledMemory<T> {
    map: HashMap<String, Aggregate<T>>,
    /// Lower-case keys before lookup.
    pub case_fold: bool,
    /// A frozen memory pools the current vector with the stored history but
    /// does not record it.
    pub frozen: bool,
}

impl<T: Scalar> PooledMemory<T> {
    pub fn new() -> Self {
        PooledMemory {
            map: HashMap::new(),
            case_fold: false,
            frozen: false,
        }
    }

    fn key(&self, word: &str) -> String {
        if self.case_fold {
            word.to_lowercase()
        } else {
            word.to_owned()
        }
    }

    pub fn reset(&mut self) {
        self.map.clear();
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn aggregate(&self, word: &str) -> Option<&Aggregate<T>> {
        self.map.get(&self.key(word))
    }
}

/// Records `current` for `token_text` (unless the memory is frozen) and
/// returns `[pool(history including current); current]`.
pub fn pooled_embed<T: Scalar>(
    mem: &mut PooledMemory<T>,
    pool: PoolOp,
    token_text: &str,
    current: &[T],
) -> Vec<T> {
    let key = mem.key(token_text);
    let mut out = Vec::with_capacity(2 * current.len());
    if mem.frozen {
        let mut agg = mem
            .map
            .get(&key)
            .cloned()
            .unwrap_or_else(|| Aggregate::first(current));
        if mem.map.contains_key(&key) {
            agg.update(current);
        }
        out.extend_from_slice(agg.pooled(pool));
    } else {
        let agg = mem
            .map
            .entry(key)
            .and_modify(|a| a.update(current))
            .or_insert_with(|| Aggregate::first(current));
        out.extend_from_slice(agg.pooled(pool));
    }
    out.extend_from_slice(current);
    out
}

pub fn reset_memory<T: Scalar>(mem: &mut PooledMemory<T>) {
    mem.reset();
}

/// Contextual embeddings concatenated with their pooled memory (`tokens × 4H`).
#[derive(Debug, Clone)]
pub struct PooledEmbedder<T: Scalar> {
    pub contextual: ContextualEmbedder<T>,
    pub memory: PooledMemory<T>,
    pub pool: PoolOp,
}

impl<T: Scalar> PooledEmbedder<T> {
    pub fn new(contextual: ContextualEmbedder<T>, pool: PoolOp) -> Self {
        PooledEmbedder {
            contextual,
            memory: PooledMemory::new(),
            pool,
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.contextual.dim()
    }

    pub fn embed(&mut self, s: &Sentence) -> Result<Matrix<T>> {
        let ctx = self.contextual.embed(s)?;
        let mut out = Matrix::zeros(s.len(), self.dim());
        for (t, tok) in s.tokens.iter().enumerate() {
            let v = pooled_embed(&mut self.memory, self.pool, &tok.text, ctx.row(t));
            out.row_mut(t).copy_from_slice(&v);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_occurrence_is_identity() {
        for op in [PoolOp::Mean, PoolOp::Min, PoolOp::Max] {
            let mut m = PooledMemory::<f64>::new();
            let v = pooled_embed(&mut m, op, "w", &[0.5, -2.0]);
            assert_eq!(v, vec![0.5, -2.0, 0.5, -2.0]);
        }
    }

    #[test]
    fn two_occurrences() {
        let mut m = PooledMemory::<f64>::new();
        pooled_embed(&mut m, PoolOp::Mean, "w", &[1.0, 3.0]);
        let v = pooled_embed(&mut m, PoolOp::Mean, "w", &[3.0, 1.0]);
        assert_eq!(&v[..2], &[2.0, 2.0]);
        let agg = m.aggregate("w").unwrap();
        assert_eq!(agg.pooled(PoolOp::Min), &[1.0, 1.0]);
        assert_eq!(agg.pooled(PoolOp::Max), &[3.0, 3.0]);
        assert_eq!(agg.count, 2);
    }

    #[test]
    fn reset_restores_identity_and_is_idempotent() {
        let mut m = PooledMemory::<f64>::new();
        pooled_embed(&mut m, PoolOp::Max, "w", &[9.0]);
        reset_memory(&mut m);
        reset_memory(&mut m);
        assert!(m.is_empty());
        assert_eq!(pooled_embed(&mut m, PoolOp::Max, "w", &[1.0]), vec![1.0, 1.0]);
    }

    #[test]
    fn frozen_memory_does_not_grow() {
        let mut m = PooledMemory::<f64>::new();
        pooled_embed(&mut m, PoolOp::Mean, "w", &[1.0]);
        m.frozen = true;
        let a = pooled_embed(&mut m, PoolOp::Mean, "w", &[3.0]);
        let b = pooled_embed(&mut m, PoolOp::Mean, "w", &[3.0]);
        assert_eq!(a, vec![2.0, 3.0]);
        assert_eq!(a, b);
        assert_eq!(pooled_embed(&mut m, PoolOp::Mean, "new", &[5.0]), vec![5.0, 5.0]);
        assert_eq!(m.len(), 1);
    }

    #[test]
    fn case_folding_is_opt_in() {
        let mut m = PooledMemory::<f64>::new();
        pooled_embed(&mut m, PoolOp::Mean, "Word", &[1.0]);
        assert!(m.aggregate("word").is_none());
        let mut m = PooledMemory::<f64> {
            case_fold: true,
            ..PooledMemory::new()
        };
        pooled_embed(&mut m, PoolOp::Mean, "Word", &[1.0]);
        assert!(m.aggregate("word").is_some());
    }
}
