//! Report assembly and rendering.
//!
//! Two output shapes: a locale-styled text table (comma decimals, best
//! value per column marked with `*`) and a machine-readable JSON document
//! (dot decimals, deterministic key order). An optional static baseline
//! column carries the published reference results of the original voting
//! system on the EXIST 2021 subtask-1 test set, stored verbatim for
//! side-by-side comparison, never recomputed.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    breakdown, metrics_report, Averaging, Axis, BreakdownReport, EvaluationError, MetricsReport,
    PredictionRecord,
};

/// The four reported systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelTag {
    ModelOne,
    ModelTwo,
    ModelThree,
    Final,
}

/// Canonical report order of the model tags.
pub const BASELINE_TAGS: [ModelTag; 4] = [
    ModelTag::ModelOne,
    ModelTag::ModelTwo,
    ModelTag::ModelThree,
    ModelTag::Final,
];

impl ModelTag {
    pub fn tag(self) -> &'static str {
        match self {
            ModelTag::ModelOne => "model-one",
            ModelTag::ModelTwo => "model-two",
            ModelTag::ModelThree => "model-three",
            ModelTag::Final => "final",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelTag::ModelOne => "Basic Model One",
            ModelTag::ModelTwo => "Basic Model Two",
            ModelTag::ModelThree => "Basic Model Three",
            ModelTag::Final => "Final Model (with voting mechanism)",
        }
    }

    pub fn from_tag(tag: &str) -> Option<ModelTag> {
        BASELINE_TAGS.into_iter().find(|t| t.tag() == tag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineCell {
    pub accuracy: f64,
    pub f1: f64,
}

/// Published reference results, keyed by model tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub description: String,
    pub overall: BTreeMap<String, BaselineCell>,
    pub by_source: BTreeMap<String, BTreeMap<String, f64>>,
    pub by_language: BTreeMap<String, BTreeMap<String, f64>>,
}

pub fn baseline_results() -> Baseline {
    let cell = |accuracy, f1| BaselineCell { accuracy, f1 };
    let row = |values: [(ModelTag, f64); 4]| {
        values
            .into_iter()
            .map(|(tag, v)| (tag.tag().to_owned(), v))
            .collect::<BTreeMap<_, _>>()
    };
    let overall = [
        (ModelTag::ModelOne, cell(0.7370, 0.7360)),
        (ModelTag::ModelTwo, cell(0.7280, 0.7275)),
        (ModelTag::ModelThree, cell(0.7287, 0.7287)),
        (ModelTag::Final, cell(0.7553, 0.7551)),
    ]
    .into_iter()
    .map(|(tag, c)| (tag.tag().to_owned(), c))
    .collect();
    let by_source = [
        (
            "twitter".to_owned(),
            row([
                (ModelTag::ModelOne, 0.7271),
                (ModelTag::ModelTwo, 0.7312),
                (ModelTag::ModelThree, 0.7312),
                (ModelTag::Final, 0.7504),
            ]),
        ),
        (
            "gab".to_owned(),
            row([
                (ModelTag::ModelOne, 0.7709),
                (ModelTag::ModelTwo, 0.7169),
                (ModelTag::ModelThree, 0.7200),
                (ModelTag::Final, 0.7719),
            ]),
        ),
    ]
    .into_iter()
    .collect();
    let by_language = [
        (
            "en".to_owned(),
            row([
                (ModelTag::ModelOne, 0.7197),
                (ModelTag::ModelTwo, 0.7351),
                (ModelTag::ModelThree, 0.7486),
                (ModelTag::Final, 0.7559),
            ]),
        ),
        (
            "es".to_owned(),
            row([
                (ModelTag::ModelOne, 0.7546),
                (ModelTag::ModelTwo, 0.7208),
                (ModelTag::ModelThree, 0.7083),
                (ModelTag::Final, 0.7546),
            ]),
        ),
    ]
    .into_iter()
    .collect();
    Baseline {
        description: "Published results of the original three-model voting system on the \
                      EXIST 2021 subtask-1 test set, stored verbatim."
            .to_owned(),
        overall,
        by_source,
        by_language,
    }
}

/// Per-system evaluation: overall metrics plus breakdowns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEvaluation {
    pub display_name: String,
    pub overall: MetricsReport,
    pub by_source: Option<BreakdownReport>,
    pub by_language: BreakdownReport,
}

/// The complete evaluation document for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationDoc {
    pub averaging: Averaging,
    pub models: BTreeMap<String, ModelEvaluation>,
    pub baseline: Option<Baseline>,
    pub warnings: Vec<String>,
}

impl EvaluationDoc {
    /// Groups records by model tag and evaluates each group. The source
    /// breakdown is included for a model only when every one of its
    /// records carries a source.
    pub fn build(
        records: &[PredictionRecord],
        averaging: Averaging,
        with_baseline: bool,
    ) -> Result<EvaluationDoc, EvaluationError> {
        if records.is_empty() {
            return Err(EvaluationError::Empty);
        }
        let mut groups: BTreeMap<String, Vec<PredictionRecord>> = BTreeMap::new();
        for r in records {
            groups.entry(r.model_tag.clone()).or_default().push(r.clone());
        }

        let mut models = BTreeMap::new();
        let mut warnings = Vec::new();
        for (tag, group) in groups {
            let overall = metrics_report(&group, averaging)?;
            for class in &overall.degenerate_classes {
                warnings.push(format!(
                    "{tag}: label {class:?} absent from both gold and predictions; \
                     its per-class F1 is pinned to 0"
                ));
            }
            let with_source = group.iter().filter(|r| r.source.is_some()).count();
            let by_source = if with_source == group.len() {
                Some(breakdown(&group, Axis::Source, averaging)?)
            } else {
                if with_source > 0 {
                    warnings.push(format!(
                        "{tag}: {} of {} records lack a data source; source breakdown skipped",
                        group.len() - with_source,
                        group.len()
                    ));
                }
                None
            };
            let by_language = breakdown(&group, Axis::Language, averaging)?;
            let display_name = ModelTag::from_tag(&tag)
                .map(|t| t.display_name().to_owned())
                .unwrap_or_else(|| tag.clone());
            models.insert(
                tag,
                ModelEvaluation {
                    display_name,
                    overall,
                    by_source,
                    by_language,
                },
            );
        }
        Ok(EvaluationDoc {
            averaging,
            models,
            baseline: with_baseline.then(baseline_results),
            warnings,
        })
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("serialize evaluation");
        out.push('\n');
        out
    }

    /// Text rendering with comma decimals; the best value in each column
    /// of a group is marked with `*`, ties share the mark.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let tags = self.ordered_tags();
        out.push_str(&format!("F1 averaging: {}\n", self.averaging.as_str()));

        out.push_str("\nOverall\n");
        let mut header = vec!["accuracy".to_owned(), "F1".to_owned()];
        let mut columns: Vec<Vec<Option<f64>>> = vec![
            tags.iter()
                .map(|t| Some(self.models[*t].overall.accuracy))
                .collect(),
            tags.iter().map(|t| Some(self.models[*t].overall.f1)).collect(),
        ];
        if let Some(baseline) = &self.baseline {
            header.push("base acc".to_owned());
            header.push("base F1".to_owned());
            columns.push(
                tags.iter()
                    .map(|t| baseline.overall.get(*t).map(|c| c.accuracy))
                    .collect(),
            );
            columns.push(
                tags.iter()
                    .map(|t| baseline.overall.get(*t).map(|c| c.f1))
                    .collect(),
            );
        }
        self.push_table(&mut out, &tags, &header, &columns);

        if tags.iter().any(|t| self.models[*t].by_source.is_some()) {
            out.push_str("\nBy data source (accuracy)\n");
            for source in ["twitter", "gab"] {
                self.push_group(&mut out, &tags, source, |m| {
                    m.by_source
                        .as_ref()
                        .and_then(|b| b.cells.get(source))
                        .map(|c| c.accuracy)
                }, self.baseline.as_ref().map(|b| &b.by_source));
            }
        }

        out.push_str("\nBy language (accuracy)\n");
        for language in ["en", "es"] {
            self.push_group(&mut out, &tags, language, |m| {
                m.by_language.cells.get(language).map(|c| c.accuracy)
            }, self.baseline.as_ref().map(|b| &b.by_language));
        }

        out.push_str("\nValues marked * are the best in their column within a group.\n");
        for warning in &self.warnings {
            out.push_str(&format!("warning: {warning}\n"));
        }
        out
    }

    fn ordered_tags(&self) -> Vec<&str> {
        let mut tags: Vec<&str> = self.models.keys().map(String::as_str).collect();
        let rank = |tag: &str| {
            ModelTag::from_tag(tag)
                .map(|t| BASELINE_TAGS.iter().position(|b| *b == t).expect("known tag"))
                .unwrap_or(BASELINE_TAGS.len())
        };
        tags.sort_by(|a, b| rank(a).cmp(&rank(b)).then(a.cmp(b)));
        tags
    }

    fn display_name(&self, tag: &str) -> &str {
        &self.models[tag].display_name
    }

    /// One group (e.g. one source value): rows are models, columns are
    /// run accuracy and optionally the baseline accuracy.
    fn push_group(
        &self,
        out: &mut String,
        tags: &[&str],
        group_key: &str,
        run_value: impl Fn(&ModelEvaluation) -> Option<f64>,
        baseline_axis: Option<&BTreeMap<String, BTreeMap<String, f64>>>,
    ) {
        let run: Vec<Option<f64>> = tags.iter().map(|t| run_value(&self.models[*t])).collect();
        if run.iter().all(Option::is_none) {
            return;
        }
        out.push_str(&format!("  {group_key}\n"));
        let mut header = vec!["accuracy".to_owned()];
        let mut columns = vec![run];
        if let Some(axis) = baseline_axis {
            header.push("base acc".to_owned());
            columns.push(
                tags.iter()
                    .map(|t| axis.get(group_key).and_then(|row| row.get(*t)).copied())
                    .collect(),
            );
        }
        self.push_table(out, tags, &header, &columns);
    }

    fn push_table(&self, out: &mut String, tags: &[&str], header: &[String], columns: &[Vec<Option<f64>>]) {
        const VALUE_WIDTH: usize = 11;
        let name_width = tags
            .iter()
            .map(|t| self.display_name(t).len())
            .max()
            .unwrap_or(0)
            .max("model".len());

        let mut line = format!("    {:<name_width$}", "model");
        for h in header {
            line.push_str(&format!("{h:>VALUE_WIDTH$}"));
        }
        out.push_str(line.trim_end());
        out.push('\n');

        let rendered: Vec<Vec<String>> = columns.iter().map(|c| render_column(c)).collect();
        for (row, tag) in tags.iter().enumerate() {
            let mut line = format!("    {:<name_width$}", self.display_name(tag));
            for column in &rendered {
                line.push_str(&format!("{:>VALUE_WIDTH$}", column[row]));
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
    }
}

/// Formats a column with comma decimals, starring every value equal to
/// the column maximum.
fn render_column(values: &[Option<f64>]) -> Vec<String> {
    let max = values
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .map(|v| match v {
            None => "-".to_owned(),
            Some(v) => {
                let mut s = format!("{v:.4}").replace('.', ",");
                if *v == max {
                    s.push('*');
                }
                s
            }
        })
        .collect()
}
