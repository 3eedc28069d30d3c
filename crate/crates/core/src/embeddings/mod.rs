//! Per-token vector producers and their stacking.
//!
//! Every embedder maps a sentence to a `tokens × dim` matrix. A stack
//! concatenates its members' outputs column-wise, in declaration order.

mod contextual;
mod external;
mod pooled;
mod table;

use std::fmt;

use serde::Serialize;

pub use contextual::{contextual_string_embed, render_sentence, ContextualEmbedder};
pub use external::{external_embed, format_entry, ExternalVectors};
pub use pooled::{pooled_embed, reset_memory, Aggregate, PoolOp, PooledEmbedder, PooledMemory};
pub use table::{static_lookup, StaticTable};

use crate::corpus::{Sentence, SentenceRef, Split, TaggedCorpus};
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbedderKind {
    Contextual,
    PooledContextual,
    Static,
    External,
}

impl EmbedderKind {
    pub fn code(self) -> u8 {
        match self {
            EmbedderKind::Contextual => 0,
            EmbedderKind::PooledContextual => 1,
            EmbedderKind::Static => 2,
            EmbedderKind::External => 3,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(EmbedderKind::Contextual),
            1 => Some(EmbedderKind::PooledContextual),
            2 => Some(EmbedderKind::Static),
            3 => Some(EmbedderKind::External),
            _ => None,
        }
    }
}

impl fmt::Display for EmbedderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbedderKind::Contextual => "contextual",
            EmbedderKind::PooledContextual => "pooled-contextual",
            EmbedderKind::Static => "static",
            EmbedderKind::External => "external",
        })
    }
}

/// Kinds and widths of a stack, in order. Stored with tagger models so a
/// model is only ever fed the inputs it was trained on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EmbedSignature(pub Vec<(EmbedderKind, usize)>);

impl EmbedSignature {
    pub fn dim(&self) -> usize {
        self.0.iter().map(|&(_, d)| d).sum()
    }
}

impl fmt::Display for EmbedSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (kind, dim)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{kind}[{dim}]")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum Embedder<T: Scalar> {
    Contextual(ContextualEmbedder<T>),
    Pooled(PooledEmbedder<T>),
    Static { label: String, table: StaticTable<T> },
    External { label: String, vectors: ExternalVectors<T> },
}

impl<T: Scalar> Embedder<T> {
    pub fn kind(&self) -> EmbedderKind {
        match self {
            Embedder::Contextual(_) => EmbedderKind::Contextual,
            Embedder::Pooled(_) => EmbedderKind::PooledContextual,
            Embedder::Static { .. } => EmbedderKind::Static,
            Embedder::External { .. } => EmbedderKind::External,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Embedder::Contextual(c) => c.dim(),
            Embedder::Pooled(p) => p.dim(),
            Embedder::Static { table, .. } => table.dim(),
            Embedder::External { vectors, .. } => vectors.dim(),
        }
    }

    pub fn label(&self) -> &str {
        match self {
            Embedder::Contextual(c) => &c.label,
            Embedder::Pooled(p) => &p.contextual.label,
            Embedder::Static { label, .. } | Embedder::External { label, .. } => label,
        }
    }

    /// `tokens × dim`. External embedders need the sentence's position in
    /// its corpus; the others ignore it.
    pub fn embed(&mut self, s: &Sentence, at: Option<SentenceRef>) -> Result<Matrix<T>> {
        match self {
            Embedder::Contextual(c) => c.embed(s),
            Embedder::Pooled(p) => p.embed(s),
            Embedder::Static { table, .. } => {
                let mut out = Matrix::zeros(s.len(), table.dim());
                for (t, tok) in s.tokens.iter().enumerate() {
                    out.row_mut(t).copy_from_slice(&static_lookup(table, &tok.text));
                }
                Ok(out)
            }
            Embedder::External { vectors, label } => {
                let at = at.ok_or_else(|| {
                    Error::Config(format!("external embedder {label:?} needs a corpus position"))
                })?;
                let mut out = Matrix::zeros(s.len(), vectors.dim());
                for t in 0..s.len() {
                    out.row_mut(t)
                        .copy_from_slice(external_embed(vectors, at.split, at.index, t)?);
                }
                Ok(out)
            }
        }
    }

    pub fn memory_mut(&mut self) -> Option<&mut PooledMemory<T>> {
        match self {
            Embedder::Pooled(p) => Some(&mut p.memory),
            _ => None,
        }
    }

    pub fn memory(&self) -> Option<&PooledMemory<T>> {
        match self {
            Embedder::Pooled(p) => Some(&p.memory),
            _ => None,
        }
    }
}

/// Ordered concatenation of embedders.
#[derive(Debug, Clone)]
pub struct EmbedderStack<T: Scalar> {
    embedders: Vec<Embedder<T>>,
}

impl<T: Scalar> EmbedderStack<T> {
    pub fn new(embedders: Vec<Embedder<T>>) -> Result<Self> {
        if embedders.is_empty() {
            return Err(Error::Config("an embedder stack needs at least one embedder".into()));
        }
        if let Some(e) = embedders.iter().find(|e| e.dim() == 0) {
            return Err(Error::Config(format!("embedder {:?} has zero width", e.label())));
        }
        Ok(EmbedderStack { embedders })
    }

    pub fn embedders(&self) -> &[Embedder<T>] {
        &self.embedders
    }

    pub fn dim(&self) -> usize {
        self.embedders.iter().map(Embedder::dim).sum()
    }

    pub fn signature(&self) -> EmbedSignature {
        EmbedSignature(self.embedders.iter().map(|e| (e.kind(), e.dim())).collect())
    }

    /// Member labels joined with `" + "`.
    pub fn label(&self) -> String {
        self.embedders
            .iter()
            .map(Embedder::label)
            .collect::<Vec<_>>()
            .join(" + ")
    }

    pub fn embed(&mut self, s: &Sentence, at: Option<SentenceRef>) -> Result<Matrix<T>> {
        let mut out = Matrix::zeros(s.len(), self.dim());
        let mut offset = 0;
        for e in &mut self.embedders {
            let part = e.embed(s, at)?;
            let w = part.cols();
            for t in 0..s.len() {
                out.row_mut(t)[offset..offset + w].copy_from_slice(part.row(t));
            }
            offset += w;
        }
        Ok(out)
    }

    pub fn reset_memories(&mut self) {
        for m in self.embedders.iter_mut().filter_map(Embedder::memory_mut) {
            m.reset();
        }
    }

    /// Number of distinct words held across all pooled memories.
    pub fn memory_len(&self) -> usize {
        self.embedders.iter().filter_map(Embedder::memory).map(PooledMemory::len).sum()
    }

    pub fn set_memory_frozen(&mut self, frozen: bool) {
        for m in self.embedders.iter_mut().filter_map(Embedder::memory_mut) {
            m.frozen = frozen;
        }
    }

    /// Verifies that every external embedder covers every token of `splits`.
    pub fn check_coverage(&self, corpus: &TaggedCorpus, splits: &[Split]) -> Result<()> {
        for e in &self.embedders {
            let Embedder::External { vectors, .. } = e else { continue };
            for &split in splits {
                for (i, s) in corpus.split(split).iter().enumerate() {
                    for t in 0..s.len() {
                        external_embed(vectors, split, i, t)?;
                    }
                }
            }
        }
        Ok(())
    }
}
