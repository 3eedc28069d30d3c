use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub(crate) fn parse_values<T: Scalar>(fields: &[&str], line: usize) -> Result<Vec<T>> {
    fields
        .iter()
        .map(|f| match f.parse::<T>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(Error::Parse {
                line,
                message: format!("expected a finite number, found {f:?}"),
            }),
        })
        .collect()
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Word-level lookup table; out-of-vocabulary words map to zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticTable<T> {
    dim: usize,
    vectors: HashMap<String, Vec<T>>,
}

impl<T: Scalar> StaticTable<T> {
    pub fn from_entries(dim: usize, entries: impl IntoIterator<Item = (String, Vec<T>)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("static table dimension must be positive".into()));
        }
        let mut vectors = HashMap::new();
        for (word, v) in entries {
            if v.len() != dim {
                return Err(Error::dim("static_table", (1, dim), (1, v.len())));
            }
            if vectors.insert(word.clone(), v).is_some() {
                return Err(Error::Config(format!("duplicate static table entry {word:?}")));
            }
        }
        Ok(StaticTable { dim, vectors })
    }

    /// Parses `word v1 … vd` lines, with an optional leading `count dim` header.
    pub fn parse(text: &str) -> Result<Self> {
        let mut dim = None;
        let mut expected_count = None;
        let mut vectors: HashMap<String, Vec<T>> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let fields: Vec<&str> = raw.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if i == 0 && fields.len() == 2 {
                if let (Ok(n), Ok(d)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                    expected_count = Some(n);
                    dim = Some(d);
                    continue;
                }
            }
            let (word, values) = (fields[0], &fields[1..]);
            let d = *dim.get_or_insert(values.len());
            if values.len() != d || d == 0 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {d} values after {word:?}, found {}", values.len()),
                });
            }
            let v = parse_values(values, line)?;
            if vectors.insert(word.to_owned(), v).is_some() {
                return Err(Error::Parse {
                    line,
                    message: format!("duplicate entry {word:?}"),
                });
            }
        }
        if let Some(n) = expected_count {
            if n != vectors.len() {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("header declares {n} entries, file has {}", vectors.len()),
                });
            }
        }
        match dim {
            Some(d) if d > 0 => Ok(StaticTable { dim: d, vectors }),
            _ => Err(Error::Parse {
                line: 1,
                message: "static table has no entries".into(),
            }),
        }
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

    /// Serialises with a `count dim` header, words sorted.
    pub fn to_text(&self) -> String {
        let mut words: Vec<&String> = self.vectors.keys().collect();
        words.sort();
        let mut out = format!("{} {}\n", self.vectors.len(), self.dim);
        for w in words {
            out.push_str(w);
            for v in &self.vectors[w] {
                out.push(' ');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Exact match, then lower-case match, then the zero vector.
pub fn static_lookup<T: Scalar>(table: &StaticTable<T>, token_text: &str) -> Vec<T> {
    if let Some(v) = table.vectors.get(token_text) {
        return v.clone();
    }
    let lower = token_text.to_lowercase();
    if lower != token_text {
        if let Some(v) = table.vectors.get(&lower) {
            return v.clone();
        }
    }
    vec![T::zero(); table.dim]
}
