use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};

use super::EvalReport;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    /// Row label in the dataset column, e.g. `"A (+B)"`.
    pub dataset: String,
    /// Test set the row was scored on; best/second-best marks are per group.
    pub group: String,
    pub model: String,
    pub report: EvalReport,
}

/// A published score shown next to computed rows, in percent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExternalRow {
    pub dataset: String,
    pub model: String,
    pub f1_percent: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StudyReport {
    pub title: String,
    pub rows: Vec<StudyRow>,
}

impl StudyReport {
    pub fn new(title: impl Into<String>) -> Self {
        StudyReport {
            title: title.into(),
            rows: Vec::new(),
        }
    }

    /// Appends a row; `(dataset, model)` must be new.
    pub fn push(&mut self, row: StudyRow) -> Result<()> {
        if self
            .rows
            .iter()
            .any(|r| r.dataset == row.dataset && r.model == row.model)
        {
            return Err(Error::Config(format!(
                "duplicate study row ({:?}, {:?})",
                row.dataset, row.model
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("study report serialises")
    }
}

/// Percentage with two decimals, rounding halves up. `percent` is already
/// scaled (87.325 renders as "87.33").
pub fn format_percent(percent: f64) -> String {
    let scaled = percent * 100.0;
    let floor = scaled.floor();
    // Values within float noise of a half are treated as exact halves.
    let rounded = if scaled - floor >= 0.5 - 1e-9 { floor + 1.0 } else { floor };
    format!("{:.2}", rounded / 100.0)
}

/// Markdown table `Dataset | Model Details | F1 score`. Computed rows come
/// first in report order, then `external` rows. Within each test-set group the
/// best displayed score is bold and the second best underlined.
pub fn render_study(report: &StudyReport, external: &[ExternalRow]) -> String {
    let mut rows: Vec<(&str, &str, &str, String)> = report
        .rows
        .iter()
        .map(|r| {
            (
                r.dataset.as_str(),
                r.group.as_str(),
                r.model.as_str(),
                format_percent(r.report.f1 * 100.0),
            )
        })
        .collect();
    rows.extend(
        external
            .iter()
            .map(|e| (e.dataset.as_str(), e.dataset.as_str(), e.model.as_str(), format_percent(e.f1_percent))),
    );

    let mut ranks: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (_, group, _, shown) in &rows {
        ranks.entry(group).or_default().push(shown.parse().unwrap());
    }
    for scores in ranks.values_mut() {
        scores.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut seen = HashSet::new();
        scores.retain(|s| seen.insert(s.to_bits()));
    }

    let mut out = String::from("| Dataset | Model Details | F1 score |\n|---|---|---|\n");
    for (dataset, group, model, shown) in &rows {
        let v: f64 = shown.parse().unwrap();
        let distinct = &ranks[group];
        let cell = if distinct[0] == v {
            format!("**{shown}**")
        } else if distinct.get(1) == Some(&v) {
            format!("<u>{shown}</u>")
        } else {
            shown.clone()
        };
        out.push_str(&format!("| {dataset} | {model} | {cell} |\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::SpanCounts;

    fn row(dataset: &str, model: &str, f1: f64) -> StudyRow {
        StudyRow {
            dataset: dataset.into(),
            group: "g".into(),
            model: model.into(),
            report: EvalReport {
                corpus: String::new(),
                model: String::new(),
                precision: f1,
                recall: f1,
                f1,
                counts: SpanCounts::default(),
                per_type: Default::default(),
            },
        }
    }

    #[test]
    fn half_up_rounding() {
        assert_eq!(format_percent(87.0), "87.00");
        assert_eq!(format_percent(87.325), "87.33");
        assert_eq!(format_percent(86.994), "86.99");
        assert_eq!(format_percent(0.8733 * 100.0), "87.33");
        assert_eq!(format_percent(100.0), "100.00");
    }

    #[test]
    fn empty_and_single() {
        let empty = render_study(&StudyReport::default(), &[]);
        assert_eq!(empty.lines().count(), 2);
        let mut r = StudyReport::new("t");
        r.push(row("A", "m", 0.5)).unwrap();
        let s = render_study(&r, &[]);
        assert!(s.contains("**50.00**"));
        assert!(!s.contains("<u>"));
    }

    #[test]
    fn external_rows_take_part_in_ranking() {
        let mut r = StudyReport::new("t");
        r.push(row("g", "ours", 0.80)).unwrap();
        let ext = [ExternalRow {
            dataset: "g".into(),
            model: "theirs".into(),
            f1_percent: 81.0,
        }];
        let s = render_study(&r, &ext);
        assert!(s.contains("| g | ours | <u>80.00</u> |"));
        assert!(s.contains("| g | theirs | **81.00** |"));
    }

    #[test]
    fn duplicate_rows_rejected() {
        let mut r = StudyReport::new("t");
        r.push(row("A", "m", 0.5)).unwrap();
        assert!(r.push(row("A", "m", 0.6)).is_err());
    }
}
