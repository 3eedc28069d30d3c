//! Little-endian primitives shared by the checkpoint formats.

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::scalar::{Precision, Scalar};

#[derive(Default)]
pub(crate) struct ByteWriter {
    pub buf: Vec<u8>,
}

impl ByteWriter {
    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: usize) {
        let v = u32::try_from(v).expect("value exceeds u32 range");
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn str(&mut self, s: &str) {
        self.u32(s.len());
        self.bytes(s.as_bytes());
    }

    pub fn matrix<T: Scalar>(&mut self, m: &Matrix<T>) {
        self.u32(m.rows());
        self.u32(m.cols());
        for &v in m.as_slice() {
            v.write_le(&mut self.buf);
        }
    }
}

pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        ByteReader { buf, pos: 0 }
    }

    pub fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format(format!(
                "truncated while reading {what} at byte {}",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    pub fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    pub fn u64(&mut self, what: &str) -> Result<u64> {
        let b = self.take(8, what)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(u64::from_le_bytes(a))
    }

    pub fn str(&mut self, what: &str) -> Result<String> {
        let n = self.u32(what)?;
        let b = self.take(n, what)?;
        String::from_utf8(b.to_vec()).map_err(|_| Error::Format(format!("{what} is not UTF-8")))
    }

    pub fn precision<T: Scalar>(&mut self) -> Result<()> {
        let w = self.u8("precision")?;
        let found = Precision::from_byte_width(w)
            .ok_or_else(|| Error::Format(format!("unknown precision byte {w}")))?;
        if found != T::PRECISION {
            return Err(Error::PrecisionMismatch {
                expected: T::PRECISION,
                found,
            });
        }
        Ok(())
    }

    /// Reads a matrix and checks it has the expected shape.
    pub fn matrix<T: Scalar>(&mut self, what: &str, shape: (usize, usize)) -> Result<Matrix<T>> {
        let rows = self.u32(what)?;
        let cols = self.u32(what)?;
        if (rows, cols) != shape {
            return Err(Error::Format(format!(
                "{what} has shape {:?}, header implies {:?}",
                (rows, cols),
                shape
            )));
        }
        let w = T::PRECISION.byte_width() as usize;
        let n = rows.checked_mul(cols).ok_or_else(|| Error::Format(format!("{what} too large")))?;
        let bytes = self.take(n * w, what)?;
        let data = bytes.chunks_exact(w).map(T::read_le).collect();
        Matrix::from_vec(rows, cols, data)
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after payload",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}
