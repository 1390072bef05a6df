//! Result tables laid out like the published results: one row per
//! (model, method, languages used), one column per language, and a final
//! column holding the unweighted mean over the non-English columns.

use crate::lang::Language;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

pub const NON_ENGLISH_MEAN_HEADER: &str = "\u{1D4DB}\u{2216}{en}";

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("result table has no rows")]
    EmptyTable,
    #[error("row {0} has no scores")]
    EmptyRow(usize),
    #[error("row {row} has a non-finite score for {lang}")]
    NonFinite { row: usize, lang: Language },
    #[error("writing {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("serializing report: {0}")]
    Serialize(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub model_id: String,
    pub method: String,
    pub languages_used: String,
    pub scores: BTreeMap<Language, f64>,
}

impl ResultRow {
    pub fn non_english_mean(&self) -> Option<f64> {
        let values: Vec<f64> = self
            .scores
            .iter()
            .filter(|(l, _)| **l != Language::En)
            .map(|(_, v)| *v)
            .collect();
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

#[derive(Serialize)]
struct JsonRow<'a> {
    model_id: &'a str,
    method: &'a str,
    languages_used: &'a str,
    scores: &'a BTreeMap<Language, f64>,
    non_en_mean: Option<f64>,
}

#[derive(Serialize)]
struct JsonTable<'a> {
    columns: Vec<Language>,
    rows: Vec<JsonRow<'a>>,
}

impl ResultTable {
    pub fn validate(&self) -> Result<(), ReportError> {
        if self.rows.is_empty() {
            return Err(ReportError::EmptyTable);
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.scores.is_empty() {
                return Err(ReportError::EmptyRow(i));
            }
            if let Some((lang, _)) = row.scores.iter().find(|(_, v)| !v.is_finite()) {
                return Err(ReportError::NonFinite { row: i, lang: *lang });
            }
        }
        Ok(())
    }

    /// Every language appearing in any row, in canonical order.
    pub fn columns(&self) -> Vec<Language> {
        let set: BTreeSet<Language> = self.rows.iter().flat_map(|r| r.scores.keys().copied()).collect();
        set.into_iter().collect()
    }

    pub fn to_json(&self) -> Result<String, ReportError> {
        self.validate()?;
        let table = JsonTable {
            columns: self.columns(),
            rows: self
                .rows
                .iter()
                .map(|r| JsonRow {
                    model_id: &r.model_id,
                    method: &r.method,
                    languages_used: &r.languages_used,
                    scores: &r.scores,
                    non_en_mean: r.non_english_mean(),
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&table)?;
        s.push('\n');
        Ok(s)
    }

    /// Presentation form: two decimals, ties rounded to even.
    pub fn to_csv(&self) -> Result<String, ReportError> {
        self.validate()?;
        let columns = self.columns();
        let mut out = String::from("model_id,method,languages_used");
        for c in &columns {
            out.push(',');
            out.push_str(c.code());
        }
        out.push(',');
        out.push_str(NON_ENGLISH_MEAN_HEADER);
        out.push('\n');
        for row in &self.rows {
            let cells = [&row.model_id, &row.method, &row.languages_used].map(|c| csv_escape(c));
            out.push_str(&cells.join(","));
            for c in &columns {
                out.push(',');
                if let Some(v) = row.scores.get(c) {
                    out.push_str(&round2(*v));
                }
            }
            out.push(',');
            if let Some(m) = row.non_english_mean() {
                out.push_str(&round2(m));
            }
            out.push('\n');
        }
        Ok(out)
    }

    pub fn render(&self, format: ReportFormat) -> Result<String, ReportError> {
        match format {
            ReportFormat::Json => self.to_json(),
            ReportFormat::Csv => self.to_csv(),
        }
    }
}

/// Rounds to two decimals, half-to-even on the exact binary value.
pub fn round2(x: f64) -> String {
    // std's fixed-precision formatting rounds the exact decimal expansion half-to-even.
    let s = format!("{x:.2}");
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

fn csv_escape(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Writes through a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), ReportError> {
    let io = |source| ReportError::Io {
        path: path.display().to_string(),
        source,
    };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result.map_err(io)
}

pub fn emit_report(table: &ResultTable, format: ReportFormat, path: &Path) -> Result<(), ReportError> {
    let body = table.render(format)?;
    write_atomic(path, body.as_bytes())
}
