//! Tagger model file layout (integers little-endian):
//!
//! ```text
//! magic      8 bytes  "CTXTAG1\0"
//! precision  u8       bytes per value (4 or 8)
//! tag set    u32 count, then per label u32 len + UTF-8
//! D, R, W    u32 ×3   input width, reprojected width (= D without reprojection), LSTM width
//! flags      u8 has_reproj, u8 bio_constraints
//! signature  u32 count, then per embedder u8 kind + u32 dim
//! pooling    u32 count, then per pooled embedder u8 op + u8 case_fold
//! matrices   [reproj.w, reproj.b], fwd.w, fwd.u, fwd.b, bwd.w, bwd.u, bwd.b,
//!            emit, emit_bias, trans; each u32 rows, u32 cols, values row-major
//! ```

use std::path::Path;

use crate::binio::{ByteReader, ByteWriter};
use crate::embeddings::{EmbedSignature, EmbedderKind, PoolOp};
use crate::error::{Error, Result};
use crate::numerics::LstmCellParams;
use crate::scalar::Scalar;

use super::{PoolingRecord, TagSet, TaggerModel};

pub const TAGGER_MAGIC: &[u8; 8] = b"CTXTAG1\0";

pub fn write_tagger<T: Scalar>(m: &TaggerModel<T>) -> Result<Vec<u8>> {
    m.validate()?;
    let mut w = ByteWriter::default();
    w.bytes(TAGGER_MAGIC);
    w.u8(T::PRECISION.byte_width());
    w.u32(m.tag_set.len());
    for l in m.tag_set.labels() {
        w.str(l);
    }
    w.u32(m.input_dim());
    w.u32(m.fwd.input_dim);
    w.u32(m.hidden_dim());
    w.u8(m.reproj.is_some() as u8);
    w.u8(m.bio_constraints as u8);
    w.u32(m.signature.0.len());
    for &(kind, dim) in &m.signature.0 {
        w.u8(kind.code());
        w.u32(dim);
    }
    w.u32(m.pooling.len());
    for p in &m.pooling {
        w.u8(p.op.code());
        w.u8(p.case_fold as u8);
    }
    if let Some((rw, rb)) = &m.reproj {
        w.matrix(rw);
        w.matrix(rb);
    }
    for lstm in [&m.fwd, &m.bwd] {
        w.matrix(&lstm.w);
        w.matrix(&lstm.u);
        w.matrix(&lstm.b);
    }
    w.matrix(&m.emit);
    w.matrix(&m.emit_bias);
    w.matrix(&m.trans);
    Ok(w.buf)
}

fn flag(r: &mut ByteReader<'_>, what: &str) -> Result<bool> {
    match r.u8(what)? {
        0 => Ok(false),
        1 => Ok(true),
        b => Err(Error::Format(format!("{what} flag must be 0 or 1, got {b}"))),
    }
}

pub fn read_tagger<T: Scalar>(bytes: &[u8]) -> Result<TaggerModel<T>> {
    let mut r = ByteReader::new(bytes);
    let magic = r
        .take(TAGGER_MAGIC.len(), "magic")
        .map_err(|_| Error::Format("file too short for a tagger model".into()))?;
    if magic != TAGGER_MAGIC {
        return Err(Error::Format("bad magic: not a CTXTAG1 model".into()));
    }
    r.precision::<T>()?;
    let k = r.u32("tag count")?;
    let mut labels = Vec::with_capacity(k.min(4096));
    for _ in 0..k {
        labels.push(r.str("tag label")?);
    }
    let tag_set = TagSet::from_labels(labels.iter().cloned())?;
    if tag_set.labels() != labels.as_slice() {
        return Err(Error::Format("stored tag set is not sorted or lacks \"O\"".into()));
    }
    let (d, rd, hw) = (r.u32("D")?, r.u32("R")?, r.u32("W")?);
    let has_reproj = flag(&mut r, "reprojection")?;
    let bio_constraints = flag(&mut r, "bio constraints")?;
    let n_sig = r.u32("signature length")?;
    let mut sig = Vec::with_capacity(n_sig.min(64));
    for _ in 0..n_sig {
        let code = r.u8("embedder kind")?;
        let kind = EmbedderKind::from_code(code)
            .ok_or_else(|| Error::Format(format!("unknown embedder kind {code}")))?;
        sig.push((kind, r.u32("embedder dim")?));
    }
    let signature = EmbedSignature(sig);
    if signature.dim() != d {
        return Err(Error::Format(format!(
            "signature width {} disagrees with input width {d}",
            signature.dim()
        )));
    }
    let n_pool = r.u32("pooling count")?;
    let mut pooling = Vec::with_capacity(n_pool.min(64));
    for _ in 0..n_pool {
        let code = r.u8("pool op")?;
        let op = PoolOp::from_code(code).ok_or_else(|| Error::Format(format!("unknown pool op {code}")))?;
        pooling.push(PoolingRecord {
            op,
            case_fold: flag(&mut r, "case fold")?,
        });
    }
    let reproj = if has_reproj {
        Some((r.matrix("reproj.w", (rd, d))?, r.matrix("reproj.b", (rd, 1))?))
    } else {
        if rd != d {
            return Err(Error::Format(format!("R = {rd} without reprojection but D = {d}")));
        }
        None
    };
    let mut lstm = |name: &str| -> Result<LstmCellParams<T>> {
        Ok(LstmCellParams {
            input_dim: rd,
            hidden_dim: hw,
            w: r.matrix(&format!("{name}.w"), (4 * hw, rd))?,
            u: r.matrix(&format!("{name}.u"), (4 * hw, hw))?,
            b: r.matrix(&format!("{name}.b"), (4 * hw, 1))?,
        })
    };
    let fwd = lstm("fwd")?;
    let bwd = lstm("bwd")?;
    let emit = r.matrix("emit", (k, 2 * hw))?;
    let emit_bias = r.matrix("emit_bias", (k, 1))?;
    let trans = r.matrix("trans", (k + 2, k + 2))?;
    r.finish()?;
    let m = TaggerModel {
        tag_set,
        signature,
        pooling,
        bio_constraints,
        reproj,
        fwd,
        bwd,
        emit,
        emit_bias,
        trans,
    };
    m.validate()?;
    Ok(m)
}

pub fn save_tagger<T: Scalar>(m: &TaggerModel<T>, path: &Path) -> Result<()> {
    let bytes = write_tagger(m)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_tagger<T: Scalar>(path: &Path) -> Result<TaggerModel<T>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_tagger(&bytes)
}
