use crate::error::{Error, Result};

use super::{Bio, Sentence, Token};

/// Which whitespace-separated columns hold the token and the label.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ColumnSpec {
    pub token_col: usize,
    /// `None` selects the last column of each line.
    pub label_col: Option<usize>,
}

/// Parses column-formatted text. Blank lines end sentences and `-DOCSTART-`
/// lines are skipped. Line numbers in errors are 1-based.
pub fn parse_conll(text: &str, cols: ColumnSpec) -> Result<Vec<Sentence>> {
    let mut sentences = Vec::new();
    let mut current = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            if !current.is_empty() {
                sentences.push(Sentence {
                    tokens: std::mem::take(&mut current),
                });
            }
            continue;
        }
        if line.starts_with("-DOCSTART-") {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 2 {
            return Err(Error::Parse {
                line: lineno,
                message: "expected at least a token and a label column".into(),
            });
        }
        let label_col = cols.label_col.unwrap_or(fields.len() - 1);
        let (Some(&text), Some(&label)) = (fields.get(cols.token_col), fields.get(label_col)) else {
            return Err(Error::Parse {
                line: lineno,
                message: format!(
                    "line has {} columns, need token column {} and label column {}",
                    fields.len(),
                    cols.token_col,
                    label_col
                ),
            });
        };
        if Bio::parse(label).is_none() {
            return Err(Error::Parse {
                line: lineno,
                message: format!("malformed BIO label {label:?}"),
            });
        }
        current.push(Token {
            text: text.to_owned(),
            gold_label: label.to_owned(),
        });
    }
    if !current.is_empty() {
        sentences.push(Sentence { tokens: current });
    }
    Ok(sentences)
}

/// Two columns separated by a single space; a blank line after each sentence.
pub fn write_conll(split: &[Sentence]) -> String {
    let mut out = String::new();
    for s in split {
        for t in &s.tokens {
            out.push_str(&t.text);
            out.push(' ');
            out.push_str(&t.gold_label);
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_token_sentence() {
        let s = parse_conll("aspirin\tB-Chemical\n\n", ColumnSpec::default()).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].tokens[0].text, "aspirin");
        assert_eq!(s[0].tokens[0].gold_label, "B-Chemical");
        assert_eq!(write_conll(&s), "aspirin B-Chemical\n\n");
    }

    #[test]
    fn empty_input() {
        assert!(parse_conll("", ColumnSpec::default()).unwrap().is_empty());
        assert_eq!(write_conll(&[]), "");
    }

    #[test]
    fn docstart_and_extra_columns() {
        let text = "-DOCSTART- -X- O O\n\nThe DT O\ncancer NN B-Disease\n\n\n\nends NN O\n";
        let s = parse_conll(text, ColumnSpec::default()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].labels(), ["O", "B-Disease"]);
        let s = parse_conll(text, ColumnSpec { token_col: 1, label_col: Some(0) });
        assert!(matches!(s, Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn illegal_opening_parses_and_is_flagged() {
        let text = "the O\npatient O\ncough I-Disease\n";
        let s = parse_conll(text, ColumnSpec::default()).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s[0].needs_repair());
    }

    #[test]
    fn malformed_label_reports_line() {
        let err = parse_conll("a O\nb Q-Disease\n", ColumnSpec::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_conll("a O\n\nlonely\n", ColumnSpec::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }
}
