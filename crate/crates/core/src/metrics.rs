//! Recognition quality of expressions from perceived-intensity ratings.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("average intensity must be positive, got {0}")]
    NonPositiveAverage(f64),
    #[error("label count must be at least 1")]
    NoLabels,
    #[error("row {row}: rating {rating} outside [0, {max}]")]
    RatingRange { row: usize, rating: f64, max: f64 },
    #[error("row {row}: duplicate rating ({subject}, {shown}, {rated})")]
    Duplicate { row: usize, subject: String, shown: String, rated: String },
    #[error("shown label {0} is not among the rated labels")]
    ShownNotRated(String),
    #[error("no ratings for shown label {0}")]
    Empty(String),
    #[error("ratings csv: {0}")]
    Csv(String),
}

/// `target / (average * n)`: the share of all perceived intensity that went
/// to the intended label.
pub fn recognition_quality(target: f64, average: f64, n: usize) -> Result<f64, MetricsError> {
    if n == 0 {
        return Err(MetricsError::NoLabels);
    }
    if !(average > 0.0) {
        return Err(MetricsError::NonPositiveAverage(average));
    }
    Ok(target / (average * n as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub subject: String,
    pub shown: String,
    pub rated: String,
    pub rating: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RatingScale {
    /// Already in `[0, 1]`.
    #[default]
    Normalized,
    /// Five-point Likert 0..=4, divided by 4.
    Likert,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RatingMatrix {
    rows: Vec<Rating>,
}

impl RatingMatrix {
    pub fn new(rows: Vec<Rating>) -> Result<Self, MetricsError> {
        let mut seen = HashSet::new();
        for (i, r) in rows.iter().enumerate() {
            if !(0.0..=1.0).contains(&r.rating) {
                return Err(MetricsError::RatingRange { row: i + 1, rating: r.rating, max: 1.0 });
            }
            if !seen.insert((&r.subject, &r.shown, &r.rated)) {
                return Err(MetricsError::Duplicate {
                    row: i + 1,
                    subject: r.subject.clone(),
                    shown: r.shown.clone(),
                    rated: r.rated.clone(),
                });
            }
        }
        Ok(RatingMatrix { rows })
    }

    pub fn rows(&self) -> &[Rating] {
        &self.rows
    }

    /// Distinct rated labels.
    pub fn labels(&self) -> BTreeSet<&str> {
        self.rows.iter().map(|r| r.rated.as_str()).collect()
    }

    /// Reads `subject,shown,rated,rating` CSV.
    pub fn from_csv(text: &str, scale: RatingScale) -> Result<Self, MetricsError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (i, rec) in reader.deserialize::<Rating>().enumerate() {
            let mut r = rec.map_err(|e| MetricsError::Csv(e.to_string()))?;
            let max = match scale {
                RatingScale::Normalized => 1.0,
                RatingScale::Likert => 4.0,
            };
            if !(0.0..=max).contains(&r.rating) {
                return Err(MetricsError::RatingRange { row: i + 1, rating: r.rating, max });
            }
            if scale == RatingScale::Likert {
                r.rating /= 4.0;
            }
            rows.push(r);
        }
        RatingMatrix::new(rows)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpressionProfile {
    pub shown: String,
    pub mean_intensity: f64,
    pub target_intensity: f64,
    pub quality: f64,
}

fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Per shown label: each subject's mean over rated labels and their rating of
/// the shown label, each then averaged across subjects.
pub fn analyze(matrix: &RatingMatrix) -> Result<BTreeMap<String, ExpressionProfile>, MetricsError> {
    let labels = matrix.labels();
    let n = labels.len();
    // shown -> subject -> rated -> rating
    let mut grouped: BTreeMap<&str, BTreeMap<&str, BTreeMap<&str, f64>>> = BTreeMap::new();
    for r in matrix.rows() {
        grouped
            .entry(&r.shown)
            .or_default()
            .entry(&r.subject)
            .or_default()
            .insert(&r.rated, r.rating);
    }
    let mut out = BTreeMap::new();
    for (shown, subjects) in grouped {
        if !labels.contains(shown) {
            return Err(MetricsError::ShownNotRated(shown.to_string()));
        }
        let mean_intensity = mean(subjects.values().filter_map(|r| mean(r.values().copied())))
            .ok_or_else(|| MetricsError::Empty(shown.to_string()))?;
        let target_intensity = mean(subjects.values().filter_map(|r| r.get(shown).copied()))
            .ok_or_else(|| MetricsError::Empty(shown.to_string()))?;
        let quality = recognition_quality(target_intensity, mean_intensity, n)?;
        out.insert(
            shown.to_string(),
            ExpressionProfile { shown: shown.to_string(), mean_intensity, target_intensity, quality },
        );
    }
    Ok(out)
}

/// Aligned text table with Average, Target and Quality columns.
pub fn format_report(profiles: &BTreeMap<String, ExpressionProfile>) -> String {
    let width = profiles.keys().map(String::len).max().unwrap_or(0).max(5);
    let mut out = format!("{:<width$}  {:>7}  {:>7}  {:>7}\n", "", "Average", "Target", "Quality");
    for p in profiles.values() {
        let _ = writeln!(
            out,
            "{:<width$}  {:>7.3}  {:>7.3}  {:>7.3}",
            p.shown, p.mean_intensity, p.target_intensity, p.quality
        );
    }
    out
}
