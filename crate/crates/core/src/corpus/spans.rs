use super::Bio;

/// Entity span over token indices `start..end`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub entity_type: String,
}

impl Span {
    pub fn new(start: usize, end: usize, entity_type: impl Into<String>) -> Self {
        Span {
            start,
            end,
            entity_type: entity_type.into(),
        }
    }
}

/// Maximal BIO spans. An `I-X` that does not continue an `X` entity opens a
/// new one as if it were `B-X`; strings outside the BIO grammar count as `O`.
pub fn extract_spans<S: AsRef<str>>(labels: &[S]) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut open: Option<(usize, &str)> = None;
    for (i, label) in labels.iter().enumerate() {
        let bio = Bio::parse(label.as_ref()).unwrap_or(Bio::Outside);
        match bio {
            Bio::Inside(ty) if open.is_some_and(|(_, t)| t == ty) => {}
            Bio::Begin(ty) | Bio::Inside(ty) => {
                if let Some((s, t)) = open.take() {
                    spans.push(Span::new(s, i, t));
                }
                open = Some((i, ty));
            }
            Bio::Outside => {
                if let Some((s, t)) = open.take() {
                    spans.push(Span::new(s, i, t));
                }
            }
        }
    }
    if let Some((s, t)) = open {
        spans.push(Span::new(s, labels.len(), t));
    }
    spans
}

/// Canonical BIO labels for `spans` over `len` tokens.
pub fn labels_from_spans(spans: &[Span], len: usize) -> Vec<String> {
    let mut labels = vec!["O".to_string(); len];
    for sp in spans {
        for (k, l) in labels[sp.start..sp.end].iter_mut().enumerate() {
            let prefix = if k == 0 { "B" } else { "I" };
            *l = format!("{prefix}-{}", sp.entity_type);
        }
    }
    labels
}
