//! Per-cell sentence counts for labeled datasets.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{CorpusError, Dataset, Label, Language, Source};

/// One count cell at the finest observed granularity. Samples without a
/// source land in a `source: None` cell for their (language, label) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct StatsCell {
    pub language: Language,
    pub label: Label,
    pub source: Option<Source>,
}

/// Sentence counts for a labeled dataset.
///
/// `total` always equals the sum over all cells; the per-(language, label)
/// view is derived by summing cells over the source axis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DatasetStats {
    pub dataset: String,
    pub cells: BTreeMap<StatsCell, u64>,
    pub total: u64,
}

impl DatasetStats {
    /// Counts per (language, label), summed over sources.
    pub fn by_language_label(&self) -> BTreeMap<(Language, Label), u64> {
        let mut out = BTreeMap::new();
        for (cell, n) in &self.cells {
            *out.entry((cell.language, cell.label)).or_insert(0) += n;
        }
        out
    }

    /// Counts per language, summed over labels and sources.
    pub fn by_language(&self) -> BTreeMap<Language, u64> {
        let mut out = BTreeMap::new();
        for (cell, n) in &self.cells {
            *out.entry(cell.language).or_insert(0) += n;
        }
        out
    }

    pub fn count(&self, language: Language, label: Label) -> u64 {
        self.by_language_label()
            .get(&(language, label))
            .copied()
            .unwrap_or(0)
    }

    /// Plain-text rendering with one row per (language, label) pair, in the
    /// corpus-table shape, followed by per-source rows when sources exist.
    pub fn render_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        writeln!(out, "Dataset: {}", self.dataset).expect("write to string");
        writeln!(out, "{:<10} {:<12} {:>10}", "Language", "Label", "Sentences")
            .expect("write to string");
        for ((language, label), n) in self.by_language_label() {
            writeln!(out, "{:<10} {:<12} {:>10}", language, label, n).expect("write to string");
        }
        writeln!(out, "{:<10} {:<12} {:>10}", "total", "", self.total).expect("write to string");
        if self.cells.keys().any(|c| c.source.is_some()) {
            writeln!(out, "\nBy source:").expect("write to string");
            for (cell, n) in &self.cells {
                let source = cell.source.map(Source::as_str).unwrap_or("-");
                writeln!(
                    out,
                    "{:<10} {:<10} {:<12} {:>10}",
                    source, cell.language, cell.label, n
                )
                .expect("write to string");
            }
        }
        out
    }
}

// BTreeMap with a struct key serializes poorly to JSON; flatten to a cell list.
impl DatasetStats {
    /// JSON document with the cell structure (dataset, language, label,
    /// source, count) plus the derived per-(language, label) table.
    pub fn to_json(&self) -> serde_json::Value {
        let cells: Vec<serde_json::Value> = self
            .cells
            .iter()
            .map(|(cell, n)| {
                serde_json::json!({
                    "language": cell.language,
                    "label": cell.label,
                    "source": cell.source,
                    "count": n,
                })
            })
            .collect();
        let pairs: Vec<serde_json::Value> = self
            .by_language_label()
            .into_iter()
            .map(|((language, label), n)| {
                serde_json::json!({
                    "language": language,
                    "label": label,
                    "count": n,
                })
            })
            .collect();
        serde_json::json!({
            "dataset": self.dataset,
            "cells": cells,
            "by_language_label": pairs,
            "total": self.total,
        })
    }
}

/// Counts sentences per (language, label, source) cell. Requires a labeled
/// dataset; the empty dataset yields no cells and total 0.
pub fn dataset_stats(ds: &Dataset) -> Result<DatasetStats, CorpusError> {
    if !ds.labeled {
        return Err(CorpusError::NotLabeled {
            name: ds.name.clone(),
        });
    }
    let mut cells: BTreeMap<StatsCell, u64> = BTreeMap::new();
    for s in ds.samples() {
        let label = s.label.expect("labeled dataset invariant");
        let cell = StatsCell {
            language: s.language,
            label,
            source: s.source,
        };
        *cells.entry(cell).or_insert(0) += 1;
    }
    Ok(DatasetStats {
        dataset: ds.name.clone(),
        cells,
        total: ds.len() as u64,
    })
}
