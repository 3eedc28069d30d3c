use std::collections::HashMap;
use std::path::Path;

use crate::corpus::Split;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::table::{parse_values, read_text};

/// Precomputed vectors addressed by `(split, sentence, token)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalVectors<T> {
    dim: usize,
    vectors: HashMap<(Split, usize, usize), Vec<T>>,
}

impl<T: Scalar> ExternalVectors<T> {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("external vector dimension must be positive".into()));
        }
        Ok(ExternalVectors {
            dim,
            vectors: HashMap::new(),
        })
    }

    pub fn insert(&mut self, split: Split, sent: usize, tok: usize, v: Vec<T>) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::dim("external_vectors", (1, self.dim), (1, v.len())));
        }
        if self.vectors.insert((split, sent, tok), v).is_some() {
            return Err(Error::Config(format!("duplicate external vector key ({split}, {sent}, {tok})")));
        }
        Ok(())
    }

    /// Parses `split sent_idx tok_idx v1 … vd` lines.
    pub fn parse(text: &str) -> Result<Self> {
        let mut out: Option<Self> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let fields: Vec<&str> = raw.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            let bad = |message: String| Error::Parse { line, message };
            if fields.len() < 4 {
                return Err(bad(format!("expected split, indices and values, found {} fields", fields.len())));
            }
            let split: Split = fields[0].parse().map_err(|_| bad(format!("unknown split {:?}", fields[0])))?;
            let idx = |f: &str| f.parse::<usize>().map_err(|_| bad(format!("bad index {f:?}")));
            let (sent, tok) = (idx(fields[1])?, idx(fields[2])?);
            let values = parse_values(&fields[3..], line)?;
            let ev = match out.as_mut() {
                Some(ev) => ev,
                None => out.insert(Self::new(values.len())?),
            };
            if values.len() != ev.dim {
                return Err(bad(format!("expected {} values, found {}", ev.dim, values.len())));
            }
            if ev.vectors.insert((split, sent, tok), values).is_some() {
                return Err(bad(format!("duplicate key ({split}, {sent}, {tok})")));
            }
        }
        out.ok_or_else(|| Error::Parse {
            line: 1,
            message: "external vector file has no entries".into(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&read_text(path.as_ref())?)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Keys sorted by split, sentence, token.
    pub fn to_text(&self) -> String {
        let mut keys: Vec<&(Split, usize, usize)> = self.vectors.keys().collect();
        keys.sort();
        let mut out = String::new();
        for k in keys {
            out.push_str(&format_entry(k.0, k.1, k.2, &self.vectors[k]));
        }
        out
    }
}

/// One line of the external-vector file format, newline included.
pub fn format_entry<T: Scalar>(split: Split, sent: usize, tok: usize, v: &[T]) -> String {
    let mut line = format!("{split} {sent} {tok}");
    for x in v {
        line.push(' ');
        line.push_str(&x.to_string());
    }
    line.push('\n');
    line
}

pub fn external_embed<T: Scalar>(ev: &ExternalVectors<T>, split: Split, sent: usize, tok: usize) -> Result<&[T]> {
    ev.vectors
        .get(&(split, sent, tok))
        .map(Vec::as_slice)
        .ok_or_else(|| Error::Coverage {
            split: split.to_string(),
            sentence: sent,
            token: tok,
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn present_and_missing() {
        let ev = ExternalVectors::<f64>::parse("train 0 0 1 2\ntest 3 1 -1 0.5\n").unwrap();
        assert_eq!(external_embed(&ev, Split::Test, 3, 1).unwrap(), &[-1.0, 0.5]);
        match external_embed(&ev, Split::Dev, 0, 0) {
            Err(Error::Coverage { split, sentence: 0, token: 0 }) => assert_eq!(split, "dev"),
            other => panic!("{other:?}"),
        }
        assert_eq!(ExternalVectors::parse(&ev.to_text()).unwrap(), ev);
    }

    #[test]
    fn duplicates_and_garbage_rejected() {
        assert!(ExternalVectors::<f64>::parse("train 0 0 1\ntrain 0 0 2\n").is_err());
        assert!(ExternalVectors::<f64>::parse("train 0 0 1\ntrain 0 1 2 3\n").is_err());
        assert!(ExternalVectors::<f64>::parse("valid 0 0 1\n").is_err());
        assert!(ExternalVectors::<f64>::parse("train 0 0\n").is_err());
    }
}
