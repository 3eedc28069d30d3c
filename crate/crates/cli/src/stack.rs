//! Embedder stack declarations: `kind:path[@label]` entries joined by commas.
//!
//! Kinds are `contextual` and `pooled` (path is a checkpoint prefix `P`,
//! read from `P.fwd.ctxlm` / `P.bwd.ctxlm`), `static` (word-vector table) and
//! `external` (per-token vector file).

use std::path::{Path, PathBuf};

use ctxtag::charlm::{load_checkpoint, CharLMCheckpoint, Direction};
use ctxtag::embeddings::{ContextualEmbedder, Embedder, EmbedderStack, ExternalVectors, PoolOp, PooledEmbedder, StaticTable};
use ctxtag::Real;

use crate::config::must_exist;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemberKind {
    Contextual,
    Pooled,
    Static,
    External,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemberDecl {
    pub kind: MemberKind,
    pub path: PathBuf,
    pub label: String,
}

pub fn lm_paths(prefix: &Path) -> [PathBuf; 2] {
    let with = |suffix: &str| {
        let mut s = prefix.as_os_str().to_owned();
        s.push(suffix);
        PathBuf::from(s)
    };
    [with(".fwd.ctxlm"), with(".bwd.ctxlm")]
}

/// Parses one stack; `resolve` turns a written path into a real one.
pub fn parse_stack(decl: &str, resolve: impl Fn(&str) -> PathBuf) -> Result<Vec<MemberDecl>, CliError> {
    let entries = crate::config::list(decl);
    if entries.is_empty() {
        return Err(CliError::Config(format!("empty stack declaration {decl:?}")));
    }
    entries
        .iter()
        .map(|e| {
            let (kind, rest) =
                e.split_once(':').ok_or_else(|| CliError::Config(format!("stack entry {e:?} is not kind:path")))?;
            let kind = match kind.trim() {
                "contextual" => MemberKind::Contextual,
                "pooled" => MemberKind::Pooled,
                "static" => MemberKind::Static,
                "external" => MemberKind::External,
                other => return Err(CliError::Config(format!("unknown embedder kind {other:?} in {e:?}"))),
            };
            let (path, label) = match rest.split_once('@') {
                Some((p, l)) => (p.trim(), l.trim().to_string()),
                None => (rest.trim(), String::new()),
            };
            if path.is_empty() {
                return Err(CliError::Config(format!("stack entry {e:?} has no path")));
            }
            let path = resolve(path);
            let label = if label.is_empty() {
                path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
            } else {
                label
            };
            Ok(MemberDecl { kind, path, label })
        })
        .collect()
}

/// Checks that every file a stack needs exists.
pub fn check_stack(members: &[MemberDecl], key: &str) -> Result<(), CliError> {
    for m in members {
        match m.kind {
            MemberKind::Contextual | MemberKind::Pooled => {
                for p in lm_paths(&m.path) {
                    must_exist(&p, key)?;
                }
            }
            MemberKind::Static | MemberKind::External => must_exist(&m.path, key)?,
        }
    }
    Ok(())
}

pub fn load_lm_pair(prefix: &Path) -> Result<(CharLMCheckpoint<Real>, CharLMCheckpoint<Real>), CliError> {
    let [f, b] = lm_paths(prefix);
    let fwd: CharLMCheckpoint<Real> = load_checkpoint(&f)?;
    let bwd: CharLMCheckpoint<Real> = load_checkpoint(&b)?;
    if fwd.direction != Direction::Forward || bwd.direction != Direction::Backward {
        return Err(CliError::Config(format!(
            "{} / {} must hold a forward and a backward model, found {} / {}",
            f.display(),
            b.display(),
            fwd.direction,
            bwd.direction
        )));
    }
    Ok((fwd, bwd))
}

/// Loads a declared stack. The language models of contextual members are
/// returned too, for the manifest.
pub fn load_stack(
    members: &[MemberDecl],
    pool: PoolOp,
) -> Result<(EmbedderStack<Real>, Vec<CharLMCheckpoint<Real>>), CliError> {
    let mut embedders = Vec::new();
    let mut lms = Vec::new();
    for m in members {
        let e = match m.kind {
            MemberKind::Contextual | MemberKind::Pooled => {
                let (fwd, bwd) = load_lm_pair(&m.path)?;
                lms.push(fwd.clone());
                lms.push(bwd.clone());
                let ctx = ContextualEmbedder::new(m.label.clone(), fwd, bwd)?;
                if m.kind == MemberKind::Pooled {
                    Embedder::Pooled(PooledEmbedder::new(ctx, pool))
                } else {
                    Embedder::Contextual(ctx)
                }
            }
            MemberKind::Static => Embedder::Static { label: m.label.clone(), table: StaticTable::load(&m.path)? },
            MemberKind::External => {
                Embedder::External { label: m.label.clone(), vectors: ExternalVectors::load(&m.path)? }
            }
        };
        embedders.push(e);
    }
    Ok((EmbedderStack::new(embedders)?, lms))
}
