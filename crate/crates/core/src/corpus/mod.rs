//! Labelled corpora in column format, BIO spans, corpus merging and raw
//! character streams for language-model pretraining.

mod chars;
mod conll;
mod spans;

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

pub use chars::{load_char_stream, CharStream, DOCUMENT_SENTINEL};
pub use conll::{parse_conll, write_conll, ColumnSpec};
pub use spans::{extract_spans, labels_from_spans, Span};

use crate::error::{Error, Result};

/// A parsed BIO label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bio<'a> {
    Outside,
    Begin(&'a str),
    Inside(&'a str),
}

impl<'a> Bio<'a> {
    pub fn parse(label: &'a str) -> Option<Self> {
        if label == "O" {
            return Some(Bio::Outside);
        }
        let (prefix, ty) = label.split_once('-')?;
        if ty.is_empty() || ty.chars().any(char::is_whitespace) {
            return None;
        }
        match prefix {
            "B" => Some(Bio::Begin(ty)),
            "I" => Some(Bio::Inside(ty)),
            _ => None,
        }
    }

    pub fn entity_type(self) -> Option<&'a str> {
        match self {
            Bio::Outside => None,
            Bio::Begin(t) | Bio::Inside(t) => Some(t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub gold_label: String,
}

impl Token {
    pub fn new(text: impl Into<String>, gold_label: impl Into<String>) -> Result<Self> {
        let text = text.into();
        let gold_label = gold_label.into();
        if text.is_empty() || text.chars().any(char::is_whitespace) {
            return Err(Error::Parse {
                line: 0,
                message: format!("token text {text:?} is empty or contains whitespace"),
            });
        }
        if Bio::parse(&gold_label).is_none() {
            return Err(Error::Parse {
                line: 0,
                message: format!("label {gold_label:?} is not O, B-TYPE or I-TYPE"),
            });
        }
        Ok(Token { text, gold_label })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::Parse {
                line: 0,
                message: "sentence has no tokens".into(),
            });
        }
        Ok(Sentence { tokens })
    }

    /// Convenience constructor from `(text, label)` pairs.
    pub fn from_pairs<S: AsRef<str>, L: AsRef<str>>(pairs: &[(S, L)]) -> Result<Self> {
        let tokens = pairs
            .iter()
            .map(|(t, l)| Token::new(t.as_ref(), l.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Sentence::new(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.gold_label.as_str()).collect()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.text.as_str()).collect()
    }

    pub fn spans(&self) -> Vec<Span> {
        extract_spans(&self.labels())
    }

    /// True when some `I-X` does not continue an `X` entity and will be
    /// re-read as `B-X` by [`extract_spans`].
    pub fn needs_repair(&self) -> bool {
        let mut prev: Option<&str> = None;
        for t in &self.tokens {
            match Bio::parse(&t.gold_label) {
                Some(Bio::Inside(ty)) if prev != Some(ty) => return true,
                Some(b) => prev = b.entity_type(),
                None => prev = None,
            }
        }
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(Error::Parse {
                line: 0,
                message: format!("unknown split {other:?}"),
            }),
        }
    }
}

/// Identifies a sentence inside a corpus; external vector files are keyed by it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SentenceRef {
    pub split: Split,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedCorpus {
    pub name: String,
    pub train: Vec<Sentence>,
    pub dev: Vec<Sentence>,
    pub test: Vec<Sentence>,
    /// Entity types (without B-/I- prefixes).
    pub tag_set: BTreeSet<String>,
}

impl TaggedCorpus {
    pub fn new(
        name: impl Into<String>,
        train: Vec<Sentence>,
        dev: Vec<Sentence>,
        test: Vec<Sentence>,
    ) -> Self {
        let tag_set = train
            .iter()
            .chain(&dev)
            .chain(&test)
            .flat_map(|s| &s.tokens)
            .filter_map(|t| Bio::parse(&t.gold_label).and_then(Bio::entity_type))
            .map(str::to_owned)
            .collect();
        TaggedCorpus {
            name: name.into(),
            train,
            dev,
            test,
            tag_set,
        }
    }

    pub fn split(&self, split: Split) -> &[Sentence] {
        match split {
            Split::Train => &self.train,
            Split::Dev => &self.dev,
            Split::Test => &self.test,
        }
    }

    /// Loads three column files; a missing dev path yields an empty dev split.
    pub fn load(
        name: impl Into<String>,
        train: &Path,
        dev: Option<&Path>,
        test: &Path,
        cols: ColumnSpec,
    ) -> Result<Self> {
        let read = |p: &Path| -> Result<Vec<Sentence>> {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            parse_conll(&text, cols)
        };
        let dev = match dev {
            Some(p) => read(p)?,
            None => Vec::new(),
        };
        Ok(TaggedCorpus::new(name, read(train)?, dev, read(test)?))
    }

    pub fn total_sentences(&self) -> usize {
        self.train.len() + self.dev.len() + self.test.len()
    }
}

/// Concatenates train and dev splits of `a` and `b`; only `a`'s test split is
/// kept, so the merged corpus is still evaluated on the first corpus.
pub fn merge_corpora(a: &TaggedCorpus, b: &TaggedCorpus) -> TaggedCorpus {
    TaggedCorpus {
        name: format!("{}(+{})", a.name, b.name),
        train: a.train.iter().chain(&b.train).cloned().collect(),
        dev: a.dev.iter().chain(&b.dev).cloned().collect(),
        test: a.test.clone(),
        tag_set: a.tag_set.union(&b.tag_set).cloned().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sent(pairs: &[(&str, &str)]) -> Sentence {
        Sentence::from_pairs(pairs).unwrap()
    }

    #[test]
    fn bio_grammar() {
        assert_eq!(Bio::parse("O"), Some(Bio::Outside));
        assert_eq!(Bio::parse("B-Disease"), Some(Bio::Begin("Disease")));
        assert_eq!(Bio::parse("I-Gene-Protein"), Some(Bio::Inside("Gene-Protein")));
        for bad in ["", "B", "B-", "X-Disease", "o", "E-Disease"] {
            assert_eq!(Bio::parse(bad), None, "{bad}");
        }
    }

    #[test]
    fn merge_keeps_first_test_split() {
        let a = TaggedCorpus::new(
            "a",
            vec![sent(&[("x", "B-Disease")])],
            vec![sent(&[("y", "O")])],
            vec![sent(&[("z", "O")]), sent(&[("w", "B-Disease")])],
        );
        let b = TaggedCorpus::new(
            "b",
            vec![sent(&[("p", "B-Chemical")]), sent(&[("q", "O")])],
            vec![],
            vec![sent(&[("r", "O")])],
        );
        let m = merge_corpora(&a, &b);
        assert_eq!(m.name, "a(+b)");
        assert_eq!(m.train.len(), 3);
        assert_eq!(m.dev.len(), 1);
        assert_eq!(m.test, a.test);
        assert_eq!(
            m.tag_set.iter().map(String::as_str).collect::<Vec<_>>(),
            ["Chemical", "Disease"]
        );
    }

    #[test]
    fn merge_with_empty_only_renames() {
        let a = TaggedCorpus::new("x", vec![sent(&[("x", "O")])], vec![], vec![]);
        let empty = TaggedCorpus::new("empty", vec![], vec![], vec![]);
        let m = merge_corpora(&a, &empty);
        assert_eq!(m.name, "x(+empty)");
        assert_eq!((m.train, m.dev, m.test, m.tag_set), (a.train, a.dev, a.test, a.tag_set));
    }

    #[test]
    fn repair_flag() {
        assert!(sent(&[("a", "O"), ("b", "I-Disease")]).needs_repair());
        assert!(sent(&[("a", "B-Chemical"), ("b", "I-Disease")]).needs_repair());
        assert!(!sent(&[("a", "B-Disease"), ("b", "I-Disease")]).needs_repair());
    }

    #[test]
    fn tokens_reject_whitespace_and_bad_labels() {
        assert!(Token::new("a b", "O").is_err());
        assert!(Token::new("", "O").is_err());
        assert!(Token::new("a", "B-").is_err());
        assert!(Sentence::new(vec![]).is_err());
    }
}
