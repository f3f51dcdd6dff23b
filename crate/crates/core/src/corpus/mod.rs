//! Corpus ingestion, normalization, statistics, and splits.
//!
//! Input corpora are UTF-8 tab-separated files with a header row. A
//! [`ColumnMapping`] names which headers hold the id, text, language, label,
//! and (optionally) source columns, so differently-headed exports of the same
//! data load without editing the file. Text is normalized at load time (see
//! [`normalize_text`]); every loaded [`Sample`] therefore satisfies the
//! non-empty-text invariant.
//!
//! Label encoding is fixed everywhere: `sexist = 1`, `non-sexist = 0`.

mod normalize;
mod split;
mod stats;
mod tsv;

pub use normalize::normalize_text;
pub use split::split;
pub use stats::{dataset_stats, DatasetStats, StatsCell};
pub use tsv::{load_dataset, save_dataset};

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Language of a sample. The corpus format is closed over English and Spanish.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Es,
}

impl Language {
    pub fn as_str(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Es => "es",
        }
    }

    pub fn parse(value: &str) -> Option<Language> {
        match value.trim().to_ascii_lowercase().as_str() {
            "en" => Some(Language::En),
            "es" => Some(Language::Es),
            _ => None,
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

/// Originating platform of a sample. Only `twitter` and `gab` are accepted;
/// anything else (including the misspelling `grab`) is rejected at load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Twitter,
    Gab,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Twitter => "twitter",
            Source::Gab => "gab",
        }
    }

    pub fn parse(value: &str) -> Option<Source> {
        match value.trim().to_ascii_lowercase().as_str() {
            "twitter" => Some(Source::Twitter),
            "gab" => Some(Source::Gab),
            _ => None,
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

/// Binary gold label: `Sexist` encodes as 1, `NonSexist` as 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "non-sexist")]
    NonSexist,
    #[serde(rename = "sexist")]
    Sexist,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        match self {
            Label::NonSexist => 0,
            Label::Sexist => 1,
        }
    }

    pub fn from_u8(value: u8) -> Option<Label> {
        match value {
            0 => Some(Label::NonSexist),
            1 => Some(Label::Sexist),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::NonSexist => "non-sexist",
            Label::Sexist => "sexist",
        }
    }

    /// Accepts both the textual form and the numeric encoding.
    pub fn parse(value: &str) -> Option<Label> {
        match value.trim().to_ascii_lowercase().as_str() {
            "sexist" | "1" => Some(Label::Sexist),
            "non-sexist" | "0" => Some(Label::NonSexist),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

/// One social-media text with its metadata.
///
/// `text` is already normalized and non-empty. `source` is optional because
/// training exports commonly omit the platform column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub source: Option<Source>,
    pub language: Language,
    pub text: String,
    pub label: Option<Label>,
}

/// An ordered collection of samples with unique ids.
///
/// `labeled = true` guarantees every sample carries a gold label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub labeled: bool,
    samples: Vec<Sample>,
}

impl Dataset {
    /// Builds a dataset, enforcing the sample invariants: unique non-empty
    /// ids, non-empty text, and (when `labeled`) a label on every sample.
    pub fn new(
        name: impl Into<String>,
        samples: Vec<Sample>,
        labeled: bool,
    ) -> Result<Dataset, CorpusError> {
        let name = name.into();
        let mut seen = std::collections::HashSet::with_capacity(samples.len());
        for (i, s) in samples.iter().enumerate() {
            if s.id.is_empty() {
                return Err(CorpusError::EmptyId { row: i + 1 });
            }
            if !seen.insert(s.id.as_str()) {
                return Err(CorpusError::DuplicateId {
                    row: i + 1,
                    id: s.id.clone(),
                });
            }
            if s.text.is_empty() {
                return Err(CorpusError::EmptyText {
                    row: i + 1,
                    id: s.id.clone(),
                });
            }
            if labeled && s.label.is_none() {
                return Err(CorpusError::MissingLabel {
                    row: i + 1,
                    id: s.id.clone(),
                });
            }
        }
        drop(seen);
        Ok(Dataset {
            name,
            labeled,
            samples,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Maps logical fields to header names in a TSV file.
///
/// `source` and `label` are looked up opportunistically: a missing source
/// column yields samples without a source, and a missing label column is only
/// an error when the dataset is loaded as labeled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    pub id: String,
    pub text: String,
    pub language: String,
    pub label: String,
    pub source: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            id: "id".to_owned(),
            text: "text".to_owned(),
            language: "language".to_owned(),
            label: "label".to_owned(),
            source: "source".to_owned(),
        }
    }
}

/// Errors raised by corpus loading, statistics, and splitting.
///
/// Row numbers are 1-based file line numbers; the header is line 1.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("column {column:?} not found in header of {path}")]
    MissingColumn { column: String, path: PathBuf },
    #[error("line {row}: expected {expected} tab-separated fields, found {found}")]
    RowShape {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {row}: empty id")]
    EmptyId { row: usize },
    #[error("line {row}: duplicate id {id:?}")]
    DuplicateId { row: usize, id: String },
    #[error("line {row}: unknown language {value:?} (expected en or es)")]
    BadLanguage { row: usize, value: String },
    #[error("line {row}: unknown source {value:?} (expected twitter or gab)")]
    BadSource { row: usize, value: String },
    #[error("line {row}: unparseable label {value:?} (expected sexist/1 or non-sexist/0)")]
    BadLabel { row: usize, value: String },
    #[error("line {row}: sample {id:?} has no label but the dataset is labeled")]
    MissingLabel { row: usize, id: String },
    #[error("line {row}: sample {id:?} has empty text after normalization")]
    EmptyText { row: usize, id: String },
    #[error("dataset {name:?} is not labeled")]
    NotLabeled { name: String },
    #[error("dataset {name:?} is empty")]
    EmptyDataset { name: String },
    #[error("validation fraction {fraction} outside the open interval (0, 1)")]
    BadFraction { fraction: f64 },
    #[error("stratum ({language}, {label}) has only {count} sample(s); need at least 2")]
    SmallStratum {
        language: Language,
        label: Label,
        count: usize,
    },
}
