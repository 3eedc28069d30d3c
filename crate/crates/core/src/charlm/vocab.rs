use std::collections::HashMap;

use crate::corpus::{CharStream, DOCUMENT_SENTINEL};

pub const UNK_ID: usize = 0;
pub const SENTINEL_ID: usize = 1;
pub const NEWLINE_ID: usize = 2;
const RESERVED: usize = 3;

/// Character-to-id map. Ids 0..3 are reserved for unknown characters, the
/// document sentinel and newline; the rest follow frequency order.
#[derive(Debug, Clone, Default)]
pub struct CharVocabulary {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl PartialEq for CharVocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.chars == other.chars
    }
}

impl CharVocabulary {
    /// Builds from the ordinary (non-reserved) characters, whose ids start at 3.
    pub fn from_chars(chars: Vec<char>) -> Self {
        let index = chars
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i + RESERVED))
            .collect();
        CharVocabulary { chars, index }
    }

    pub fn len(&self) -> usize {
        self.chars.len() + RESERVED
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Non-reserved characters in id order.
    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn id(&self, c: char) -> usize {
        match c {
            DOCUMENT_SENTINEL => SENTINEL_ID,
            '\n' => NEWLINE_ID,
            _ => self.index.get(&c).copied().unwrap_or(UNK_ID),
        }
    }

    pub fn encode(&self, chars: &[char]) -> Vec<usize> {
        chars.iter().map(|&c| self.id(c)).collect()
    }

    pub fn contains(&self, c: char) -> bool {
        self.id(c) != UNK_ID
    }
}

/// Characters with frequency ≥ `min_freq`, ordered by descending frequency
/// then ascending code point.
pub fn build_char_vocab(stream: &CharStream, min_freq: usize) -> CharVocabulary {
    let mut counts: HashMap<char, usize> = HashMap::new();
    for &c in &stream.chars {
        if c != DOCUMENT_SENTINEL && c != '\n' {
            *counts.entry(c).or_default() += 1;
        }
    }
    let mut kept: Vec<(char, usize)> = counts
        .into_iter()
        .filter(|&(_, n)| n >= min_freq.max(1))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    CharVocabulary::from_chars(kept.into_iter().map(|(c, _)| c).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(s: &str) -> CharStream {
        CharStream::from_documents("t", &[s]).unwrap()
    }

    #[test]
    fn min_freq_one() {
        let v = build_char_vocab(&stream("aab"), 1);
        assert_eq!(v.len(), 5);
        assert_eq!(v.id('a'), 3);
        assert_eq!(v.id('b'), 4);
        assert_eq!(v.id('\n'), NEWLINE_ID);
        assert_eq!(v.id(DOCUMENT_SENTINEL), SENTINEL_ID);
    }

    #[test]
    fn rare_chars_become_unknown() {
        let v = build_char_vocab(&stream("aab"), 2);
        assert_eq!(v.len(), 4);
        assert_eq!(v.id('b'), UNK_ID);
        assert_eq!(v.id('z'), UNK_ID);
    }

    #[test]
    fn ties_break_by_code_point() {
        let v = build_char_vocab(&stream("zyxzyx\u{3b1}\u{3b1}\u{3b1}"), 1);
        assert_eq!(v.chars(), &['\u{3b1}', 'x', 'y', 'z']);
        let again = build_char_vocab(&stream("zyxzyx\u{3b1}\u{3b1}\u{3b1}"), 1);
        assert_eq!(v, again);
    }
}
