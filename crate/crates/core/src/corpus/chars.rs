use std::path::Path;

use crate::error::{Error, Result};

/// Separator inserted between documents. It may not occur in source text.
pub const DOCUMENT_SENTINEL: char = '\u{0}';

/// Raw character stream for language-model training.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharStream {
    pub source: String,
    pub chars: Vec<char>,
}

impl CharStream {
    /// Joins documents with one sentinel between consecutive documents.
    pub fn from_documents<S: AsRef<str>>(source: impl Into<String>, docs: &[S]) -> Result<Self> {
        let source = source.into();
        let mut chars = Vec::new();
        for (i, d) in docs.iter().enumerate() {
            let d = d.as_ref();
            if let Some(pos) = d.find(DOCUMENT_SENTINEL) {
                return Err(Error::Ingest {
                    path: source.clone().into(),
                    offset: pos,
                    message: "document contains the reserved U+0000 sentinel".into(),
                });
            }
            if i > 0 {
                chars.push(DOCUMENT_SENTINEL);
            }
            chars.extend(d.chars());
        }
        Ok(CharStream { source, chars })
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    /// Splits off the trailing `fraction` of characters as a second stream.
    pub fn split_tail(&self, fraction: f64) -> (CharStream, CharStream) {
        let n = self.chars.len();
        let tail = ((n as f64) * fraction.clamp(0.0, 1.0)).floor() as usize;
        let cut = n - tail;
        (
            CharStream {
                source: self.source.clone(),
                chars: self.chars[..cut].to_vec(),
            },
            CharStream {
                source: format!("{}#heldout", self.source),
                chars: self.chars[cut..].to_vec(),
            },
        )
    }
}

/// Reads UTF-8 files and concatenates them in order, one sentinel between files.
/// The stream's source id joins the file stems with `+`.
pub fn load_char_stream<P: AsRef<Path>>(paths: &[P]) -> Result<CharStream> {
    let mut docs = Vec::with_capacity(paths.len());
    let mut names = Vec::with_capacity(paths.len());
    for p in paths {
        let p = p.as_ref();
        let bytes = std::fs::read(p).map_err(|e| Error::io(p, e))?;
        let text = String::from_utf8(bytes).map_err(|e| Error::Ingest {
            path: p.to_path_buf(),
            offset: e.utf8_error().valid_up_to(),
            message: "invalid UTF-8".into(),
        })?;
        if let Some(offset) = text.find(DOCUMENT_SENTINEL) {
            return Err(Error::Ingest {
                path: p.to_path_buf(),
                offset,
                message: "text contains the reserved U+0000 sentinel".into(),
            });
        }
        names.push(
            p.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string()),
        );
        docs.push(text);
    }
    CharStream::from_documents(names.join("+"), &docs)
}
