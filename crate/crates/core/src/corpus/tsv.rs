//! TSV reading and writing.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::{normalize_text, ColumnMapping, CorpusError, Dataset, Label, Language, Sample, Source};

/// Resolved header indices for one file.
struct Columns {
    id: usize,
    text: usize,
    language: usize,
    label: Option<usize>,
    source: Option<usize>,
    width: usize,
}

fn resolve_columns(
    header: &str,
    mapping: &ColumnMapping,
    labeled: bool,
    path: &Path,
) -> Result<Columns, CorpusError> {
    let names: Vec<&str> = header.split('\t').map(str::trim).collect();
    let find = |wanted: &str| names.iter().position(|h| *h == wanted);
    let require = |wanted: &str| {
        find(wanted).ok_or_else(|| CorpusError::MissingColumn {
            column: wanted.to_owned(),
            path: path.to_owned(),
        })
    };

    let label = match find(&mapping.label) {
        Some(i) => Some(i),
        None if labeled => {
            return Err(CorpusError::MissingColumn {
                column: mapping.label.clone(),
                path: path.to_owned(),
            })
        }
        None => None,
    };

    Ok(Columns {
        id: require(&mapping.id)?,
        text: require(&mapping.text)?,
        language: require(&mapping.language)?,
        label,
        // The source column is optional by design: training exports often
        // omit the platform.
        source: find(&mapping.source),
        width: names.len(),
    })
}

/// Loads a dataset from a UTF-8 TSV file with a header row.
///
/// One sample per data row, in file order. Rejects duplicate ids, unknown
/// language/source/label values, and rows whose text is empty after
/// normalization; every error names the offending 1-based file line.
pub fn load_dataset(
    path: impl AsRef<Path>,
    mapping: &ColumnMapping,
    labeled: bool,
) -> Result<Dataset, CorpusError> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_owned());

    let mut lines = content.lines();
    let header = lines.next().unwrap_or("");
    let cols = resolve_columns(header, mapping, labeled, path)?;

    let mut samples = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (offset, line) in lines.enumerate() {
        let row = offset + 2; // header is line 1
        if line.is_empty() {
            continue; // tolerate a trailing blank line
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != cols.width {
            return Err(CorpusError::RowShape {
                row,
                expected: cols.width,
                found: fields.len(),
            });
        }

        let id = fields[cols.id].trim().to_owned();
        if id.is_empty() {
            return Err(CorpusError::EmptyId { row });
        }
        if !seen.insert(id.clone()) {
            return Err(CorpusError::DuplicateId { row, id });
        }

        let lang_raw = fields[cols.language];
        let language = Language::parse(lang_raw).ok_or_else(|| CorpusError::BadLanguage {
            row,
            value: lang_raw.trim().to_owned(),
        })?;

        let source = match cols.source {
            Some(i) => {
                let raw = fields[i].trim();
                if raw.is_empty() {
                    None
                } else {
                    Some(Source::parse(raw).ok_or_else(|| CorpusError::BadSource {
                        row,
                        value: raw.to_owned(),
                    })?)
                }
            }
            None => None,
        };

        let label = match cols.label {
            Some(i) => {
                let raw = fields[i].trim();
                if raw.is_empty() {
                    if labeled {
                        return Err(CorpusError::MissingLabel { row, id });
                    }
                    None
                } else {
                    Some(Label::parse(raw).ok_or_else(|| CorpusError::BadLabel {
                        row,
                        value: raw.to_owned(),
                    })?)
                }
            }
            None => None,
        };

        let text = normalize_text(fields[cols.text]);
        if text.is_empty() {
            return Err(CorpusError::EmptyText { row, id });
        }

        samples.push(Sample {
            id,
            source,
            language,
            text,
            label,
        });
    }

    Dataset::new(name, samples, labeled)
}

/// Writes a dataset as TSV with the canonical header
/// `id  source  language  text  label`. Absent sources and labels become
/// empty cells. `load_dataset` on the written file reproduces the dataset.
pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let mut out = Vec::new();
    writeln!(out, "id\tsource\tlanguage\ttext\tlabel").expect("write to vec");
    for s in ds.samples() {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            s.id,
            s.source.map(Source::as_str).unwrap_or(""),
            s.language,
            s.text,
            s.label.map(Label::as_str).unwrap_or(""),
        )
        .expect("write to vec");
    }
    fs::write(path, out).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })
}
