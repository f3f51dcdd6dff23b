//! Accuracy and F-measure over prediction records, with breakdowns by
//! data source and language.
//!
//! All metrics are computed from integer confusion counts and converted
//! to floating point only at the final division, so independently coded
//! counting oracles reproduce them bit-for-bit.

mod report;

pub use report::{
    baseline_results, Baseline, EvaluationDoc, ModelEvaluation, ModelTag, BASELINE_TAGS,
};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Label, Language, Source};
use crate::voting::EnsemblePrediction;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum EvaluationError {
    #[error("no prediction records to evaluate")]
    Empty,
    #[error("duplicate record id {id:?} in one evaluation input")]
    DuplicateId { id: String },
    #[error("record {id:?} has no data source; cannot break down by source")]
    MissingSource { id: String },
    #[error("record {id:?} has no gold label; cannot evaluate")]
    MissingGold { id: String },
}

/// How to average per-class F1 into a single score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// F1 of the positive (sexist) class only.
    PositiveClass,
    /// Unweighted mean of the per-class F1 scores of both labels.
    #[default]
    Macro,
}

impl Averaging {
    pub fn as_str(self) -> &'static str {
        match self {
            Averaging::PositiveClass => "positive_class",
            Averaging::Macro => "macro",
        }
    }
}

impl std::str::FromStr for Averaging {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "positive_class" | "positive-class" => Ok(Averaging::PositiveClass),
            "macro" => Ok(Averaging::Macro),
            other => Err(format!(
                "unknown averaging {other:?} (expected \"macro\" or \"positive_class\")"
            )),
        }
    }
}

/// One scored prediction, tagged with the model that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub gold: Label,
    pub predicted: Label,
    pub source: Option<Source>,
    pub language: Language,
    pub model_tag: String,
}

/// Binary confusion counts with the sexist label as positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    #[serde(rename = "tp")]
    pub true_positive: u64,
    #[serde(rename = "fp")]
    pub false_positive: u64,
    #[serde(rename = "fn")]
    pub false_negative: u64,
    #[serde(rename = "tn")]
    pub true_negative: u64,
}

impl Confusion {
    pub fn observe(&mut self, gold: Label, predicted: Label) {
        match (gold, predicted) {
            (Label::Sexist, Label::Sexist) => self.true_positive += 1,
            (Label::NonSexist, Label::Sexist) => self.false_positive += 1,
            (Label::Sexist, Label::NonSexist) => self.false_negative += 1,
            (Label::NonSexist, Label::NonSexist) => self.true_negative += 1,
        }
    }

    pub fn from_records(records: &[PredictionRecord]) -> Self {
        let mut c = Confusion::default();
        for r in records {
            c.observe(r.gold, r.predicted);
        }
        c
    }

    pub fn n(&self) -> u64 {
        self.true_positive + self.false_positive + self.false_negative + self.true_negative
    }

    pub fn accuracy(&self) -> f64 {
        (self.true_positive + self.true_negative) as f64 / self.n() as f64
    }

    /// F1 of the sexist class; 0 when precision and recall are both
    /// undefined or zero.
    pub fn f1_positive(&self) -> f64 {
        f1_from_counts(self.true_positive, self.false_positive, self.false_negative)
    }

    /// F1 of the non-sexist class, i.e. the positive-class F1 after
    /// swapping the roles of the two labels.
    pub fn f1_negative(&self) -> f64 {
        f1_from_counts(self.true_negative, self.false_negative, self.false_positive)
    }

    pub fn f1(&self, averaging: Averaging) -> f64 {
        match averaging {
            Averaging::PositiveClass => self.f1_positive(),
            Averaging::Macro => (self.f1_positive() + self.f1_negative()) / 2.0,
        }
    }

    /// Labels absent from both gold and predictions. Their per-class F1
    /// is pinned to 0, which drags the macro average down; callers
    /// surface this rather than silently reporting the number.
    pub fn degenerate_classes(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.true_negative + self.false_negative + self.false_positive == 0 {
            out.push(Label::NonSexist.as_str().to_owned());
        }
        if self.true_positive + self.false_positive + self.false_negative == 0 {
            out.push(Label::Sexist.as_str().to_owned());
        }
        out
    }
}

fn f1_from_counts(tp: u64, fp: u64, fn_: u64) -> f64 {
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Metrics for one record set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: u64,
    pub accuracy: f64,
    pub f1: f64,
    pub averaging: Averaging,
    pub confusion: Confusion,
    pub degenerate_classes: Vec<String>,
}

/// Breakdown axes mirroring the by-source and by-language report tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Source,
    Language,
    Model,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownReport {
    pub axis: Axis,
    pub cells: BTreeMap<String, MetricsReport>,
}

fn require_non_empty(records: &[PredictionRecord]) -> Result<(), EvaluationError> {
    if records.is_empty() {
        Err(EvaluationError::Empty)
    } else {
        Ok(())
    }
}

fn require_unique_ids(records: &[PredictionRecord]) -> Result<(), EvaluationError> {
    let mut seen = BTreeSet::new();
    for r in records {
        if !seen.insert(r.id.as_str()) {
            return Err(EvaluationError::DuplicateId { id: r.id.clone() });
        }
    }
    Ok(())
}

/// Fraction of records whose prediction matches the gold label.
pub fn accuracy(records: &[PredictionRecord]) -> Result<f64, EvaluationError> {
    require_non_empty(records)?;
    Ok(Confusion::from_records(records).accuracy())
}

/// F-measure under the requested averaging.
pub fn f_measure(
    records: &[PredictionRecord],
    averaging: Averaging,
) -> Result<f64, EvaluationError> {
    require_non_empty(records)?;
    Ok(Confusion::from_records(records).f1(averaging))
}

/// Full metrics for one record set. Record ids must be unique.
pub fn metrics_report(
    records: &[PredictionRecord],
    averaging: Averaging,
) -> Result<MetricsReport, EvaluationError> {
    require_non_empty(records)?;
    require_unique_ids(records)?;
    let confusion = Confusion::from_records(records);
    Ok(MetricsReport {
        n: confusion.n(),
        accuracy: confusion.accuracy(),
        f1: confusion.f1(averaging),
        averaging,
        confusion,
        degenerate_classes: confusion.degenerate_classes(),
    })
}

/// Partitions records along an axis and reports metrics per cell.
pub fn breakdown(
    records: &[PredictionRecord],
    axis: Axis,
    averaging: Averaging,
) -> Result<BreakdownReport, EvaluationError> {
    require_non_empty(records)?;
    require_unique_ids(records)?;
    let mut cells: BTreeMap<String, Vec<PredictionRecord>> = BTreeMap::new();
    for r in records {
        let key = match axis {
            Axis::Source => r
                .source
                .ok_or_else(|| EvaluationError::MissingSource { id: r.id.clone() })?
                .as_str()
                .to_owned(),
            Axis::Language => r.language.as_str().to_owned(),
            Axis::Model => r.model_tag.clone(),
        };
        cells.entry(key).or_default().push(r.clone());
    }
    let cells = cells
        .into_iter()
        .map(|(key, rs)| metrics_report(&rs, averaging).map(|m| (key, m)))
        .collect::<Result<BTreeMap<_, _>, _>>()?;
    Ok(BreakdownReport { axis, cells })
}

/// Expands ensemble predictions into one scored record per system (the
/// three basic models plus the voted final model). Every prediction must
/// carry a gold label.
pub fn records_from_ensemble(
    predictions: &[EnsemblePrediction],
) -> Result<Vec<PredictionRecord>, EvaluationError> {
    let mut out = Vec::with_capacity(predictions.len() * 4);
    for p in predictions {
        let gold = p.gold.ok_or_else(|| EvaluationError::MissingGold {
            id: p.id.clone(),
        })?;
        let vote_label = |v: u8| if v == 1 { Label::Sexist } else { Label::NonSexist };
        let systems = [
            (ModelTag::ModelOne, vote_label(p.votes.i1)),
            (ModelTag::ModelTwo, vote_label(p.votes.i2)),
            (ModelTag::ModelThree, vote_label(p.votes.i3)),
            (ModelTag::Final, p.label),
        ];
        for (tag, predicted) in systems {
            out.push(PredictionRecord {
                id: p.id.clone(),
                gold,
                predicted,
                source: p.source,
                language: p.language,
                model_tag: tag.tag().to_owned(),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(id: &str, gold: u8, predicted: u8) -> PredictionRecord {
        let label = |v| if v == 1 { Label::Sexist } else { Label::NonSexist };
        PredictionRecord {
            id: id.to_owned(),
            gold: label(gold),
            predicted: label(predicted),
            source: None,
            language: Language::En,
            model_tag: "model-one".to_owned(),
        }
    }

    fn recs(pairs: &[(u8, u8)]) -> Vec<PredictionRecord> {
        pairs
            .iter()
            .enumerate()
            .map(|(i, &(g, p))| rec(&format!("r{i}"), g, p))
            .collect()
    }

    #[test]
    fn accuracy_counts_matches() {
        let records = recs(&[(1, 1), (0, 0), (1, 0), (0, 0)]);
        assert_eq!(accuracy(&records).expect("metrics"), 0.75);
        assert_eq!(accuracy(&recs(&[(1, 1), (0, 0)])).expect("metrics"), 1.0);
    }

    #[test]
    fn positive_class_f1_hand_computed() {
        // gold 1,1,0,0 / predicted 1,0,0,0: precision 1, recall 1/2.
        let records = recs(&[(1, 1), (1, 0), (0, 0), (0, 0)]);
        let f1 = f_measure(&records, Averaging::PositiveClass).expect("metrics");
        assert_eq!(f1, 2.0 / 3.0);
    }

    #[test]
    fn perfect_predictions_score_one_under_both_averagings() {
        let records = recs(&[(1, 1), (0, 0), (1, 1), (0, 0)]);
        for averaging in [Averaging::PositiveClass, Averaging::Macro] {
            assert_eq!(f_measure(&records, averaging).expect("metrics"), 1.0);
            assert_eq!(accuracy(&records).expect("metrics"), 1.0);
        }
    }

    #[test]
    fn empty_input_is_an_error() {
        assert_eq!(accuracy(&[]).unwrap_err(), EvaluationError::Empty);
        assert_eq!(
            f_measure(&[], Averaging::Macro).unwrap_err(),
            EvaluationError::Empty
        );
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let records = vec![rec("a", 1, 1), rec("a", 0, 0)];
        let err = metrics_report(&records, Averaging::Macro).unwrap_err();
        assert_eq!(err, EvaluationError::DuplicateId { id: "a".into() });
    }

    #[test]
    fn confusion_cells_sum_to_n() {
        let records = recs(&[(1, 1), (1, 0), (0, 1), (0, 0), (1, 1)]);
        let report = metrics_report(&records, Averaging::Macro).expect("metrics");
        assert_eq!(report.confusion.n(), 5);
        assert_eq!(report.n, 5);
        assert_eq!(
            report.confusion,
            Confusion {
                true_positive: 2,
                false_positive: 1,
                false_negative: 1,
                true_negative: 1,
            }
        );
    }

    #[test]
    fn absent_class_is_flagged_as_degenerate() {
        let records = recs(&[(0, 0), (0, 0), (0, 0)]);
        let report = metrics_report(&records, Averaging::Macro).expect("metrics");
        assert_eq!(report.degenerate_classes, vec!["sexist".to_owned()]);
        // The negative class is perfect, the pinned positive F1 is 0.
        assert_eq!(report.f1, 0.5);
    }

    #[test]
    fn source_breakdown_partitions_and_sums() {
        let mut records = recs(&[(1, 1), (0, 1), (1, 1), (0, 0), (1, 0)]);
        for (i, r) in records.iter_mut().enumerate() {
            r.source = Some(if i < 2 { Source::Twitter } else { Source::Gab });
        }
        let b = breakdown(&records, Axis::Source, Averaging::Macro).expect("breakdown");
        assert_eq!(b.cells.len(), 2);
        let total: u64 = b.cells.values().map(|m| m.n).sum();
        assert_eq!(total, records.len() as u64);
        assert_eq!(b.cells["twitter"].n, 2);
        assert_eq!(b.cells["gab"].n, 3);
    }

    #[test]
    fn single_source_cell_equals_overall() {
        let mut records = recs(&[(1, 1), (0, 1), (1, 0)]);
        for r in &mut records {
            r.source = Some(Source::Gab);
        }
        let overall = metrics_report(&records, Averaging::Macro).expect("metrics");
        let b = breakdown(&records, Axis::Source, Averaging::Macro).expect("breakdown");
        assert_eq!(b.cells.len(), 1);
        assert_eq!(b.cells["gab"], overall);
    }

    #[test]
    fn sourceless_record_blocks_source_breakdown() {
        let records = recs(&[(1, 1), (0, 0)]);
        let err = breakdown(&records, Axis::Source, Averaging::Macro).unwrap_err();
        assert_eq!(err, EvaluationError::MissingSource { id: "r0".into() });
    }

    #[test]
    fn language_breakdown_accuracy_aggregates_to_overall() {
        let mut records = recs(&[(1, 1), (0, 1), (1, 1), (0, 0), (1, 0), (0, 0), (1, 1)]);
        for (i, r) in records.iter_mut().enumerate() {
            r.language = if i % 3 == 0 { Language::Es } else { Language::En };
        }
        let overall = accuracy(&records).expect("metrics");
        let b = breakdown(&records, Axis::Language, Averaging::Macro).expect("breakdown");
        let weighted: f64 = b.cells.values().map(|m| m.n as f64 * m.accuracy).sum();
        let n: f64 = b.cells.values().map(|m| m.n as f64).sum();
        assert!((overall - weighted / n).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn label_swap_leaves_accuracy_and_macro_f1_unchanged(
            pairs in proptest::collection::vec((0..=1u8, 0..=1u8), 1..60)
        ) {
            let records = recs(&pairs);
            let swapped: Vec<(u8, u8)> =
                pairs.iter().map(|&(g, p)| (1 - g, 1 - p)).collect();
            let records_swapped = recs(&swapped);
            prop_assert_eq!(
                accuracy(&records).unwrap(),
                accuracy(&records_swapped).unwrap()
            );
            prop_assert_eq!(
                f_measure(&records, Averaging::Macro).unwrap(),
                f_measure(&records_swapped, Averaging::Macro).unwrap()
            );
        }
    }

    #[test]
    fn ensemble_expansion_produces_four_records_per_prediction() {
        use crate::voting::VoteInput;
        let preds = vec![EnsemblePrediction::new(
            "t1",
            Some(Source::Twitter),
            Language::Es,
            Some(Label::Sexist),
            VoteInput::new(1, 0, 1).expect("votes"),
        )];
        let records = records_from_ensemble(&preds).expect("records");
        assert_eq!(records.len(), 4);
        let by_tag: BTreeMap<&str, Label> = records
            .iter()
            .map(|r| (r.model_tag.as_str(), r.predicted))
            .collect();
        assert_eq!(by_tag["model-one"], Label::Sexist);
        assert_eq!(by_tag["model-two"], Label::NonSexist);
        assert_eq!(by_tag["model-three"], Label::Sexist);
        assert_eq!(by_tag["final"], Label::Sexist);
    }

    #[test]
    fn ensemble_expansion_requires_gold() {
        use crate::voting::VoteInput;
        let preds = vec![EnsemblePrediction::new(
            "t1",
            None,
            Language::En,
            None,
            VoteInput::new(1, 1, 1).expect("votes"),
        )];
        let err = records_from_ensemble(&preds).unwrap_err();
        assert_eq!(err, EvaluationError::MissingGold { id: "t1".into() });
    }
}
