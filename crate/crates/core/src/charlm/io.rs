//! Checkpoint file layout (all integers little-endian):
//!
//! ```text
//! magic      7 bytes  "CTXLM1\0"
//! direction  u8       0 = forward, 1 = backward
//! precision  u8       bytes per value (4 or 8)
//! V, E, H    u32 ×3
//! vocab      u32 count (= V − 3), then count × u32 code points for ids 3..V
//! lineage    u32 count, then per record: u32 len + UTF-8 corpus id, u64 steps
//! matrices   char_embed, lstm.w, lstm.u, lstm.b, out_proj, out_bias;
//!            each u32 rows, u32 cols, rows·cols values row-major
//! ```

use std::path::Path;

use crate::binio::{ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::numerics::LstmCellParams;
use crate::scalar::Scalar;

use super::{CharLMCheckpoint, CharVocabulary, Direction, LineageRecord};

pub const LM_MAGIC: &[u8; 7] = b"CTXLM1\0";

pub fn write_checkpoint<T: Scalar>(ckpt: &CharLMCheckpoint<T>) -> Result<Vec<u8>> {
    ckpt.validate()?;
    let mut w = ByteWriter::default();
    w.bytes(LM_MAGIC);
    w.u8(match ckpt.direction {
        Direction::Forward => 0,
        Direction::Backward => 1,
    });
    w.u8(T::PRECISION.byte_width());
    w.u32(ckpt.vocab_size());
    w.u32(ckpt.embed_dim());
    w.u32(ckpt.hidden_dim());
    w.u32(ckpt.vocab.chars().len());
    for &c in ckpt.vocab.chars() {
        w.u32(c as usize);
    }
    w.u32(ckpt.lineage.len());
    for rec in &ckpt.lineage {
        w.str(&rec.corpus);
        w.u64(rec.steps);
    }
    w.matrix(&ckpt.char_embed);
    w.matrix(&ckpt.lstm.w);
    w.matrix(&ckpt.lstm.u);
    w.matrix(&ckpt.lstm.b);
    w.matrix(&ckpt.out_proj);
    w.matrix(&ckpt.out_bias);
    Ok(w.buf)
}

pub fn read_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<CharLMCheckpoint<T>> {
    let mut r = ByteReader::new(bytes);
    let magic = r
        .take(LM_MAGIC.len(), "magic")
        .map_err(|_| Error::Format("file too short for a language-model checkpoint".into()))?;
    if magic != LM_MAGIC {
        return Err(Error::Format("bad magic: not a CTXLM1 checkpoint".into()));
    }
    let direction = match r.u8("direction")? {
        0 => Direction::Forward,
        1 => Direction::Backward,
        d => return Err(Error::Format(format!("unknown direction byte {d}"))),
    };
    r.precision::<T>()?;
    let v = r.u32("V")?;
    let e = r.u32("E")?;
    let h = r.u32("H")?;
    let n_chars = r.u32("vocabulary size")?;
    if n_chars + 3 != v {
        return Err(Error::Format(format!(
            "vocabulary lists {n_chars} characters but V = {v}"
        )));
    }
    let mut chars = Vec::with_capacity(n_chars);
    for _ in 0..n_chars {
        let cp = r.u32("vocabulary entry")? as u32;
        chars.push(
            char::from_u32(cp)
                .ok_or_else(|| Error::Format(format!("invalid code point {cp:#x}")))?,
        );
    }
    let n_lineage = r.u32("lineage count")?;
    let mut lineage = Vec::with_capacity(n_lineage.min(1024));
    for _ in 0..n_lineage {
        let corpus = r.str("lineage corpus")?;
        let steps = r.u64("lineage steps")?;
        lineage.push(LineageRecord { corpus, steps });
    }
    let char_embed = r.matrix("char_embed", (v, e))?;
    let w = r.matrix("lstm.w", (4 * h, e))?;
    let u = r.matrix("lstm.u", (4 * h, h))?;
    let b = r.matrix("lstm.b", (4 * h, 1))?;
    let out_proj = r.matrix("out_proj", (v, h))?;
    let out_bias = r.matrix("out_bias", (v, 1))?;
    r.finish()?;
    Ok(CharLMCheckpoint {
        direction,
        vocab: CharVocabulary::from_chars(chars),
        char_embed,
        lstm: LstmCellParams {
            input_dim: e,
            hidden_dim: h,
            w,
            u,
            b,
        },
        out_proj,
        out_bias,
        lineage,
    })
}

pub fn save_checkpoint<T: Scalar>(ckpt: &CharLMCheckpoint<T>, path: &Path) -> Result<()> {
    let bytes = write_checkpoint(ckpt)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<CharLMCheckpoint<T>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes)
}
