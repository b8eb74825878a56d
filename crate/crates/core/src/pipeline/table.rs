use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::promptbook::{Cell, VariableSpec, Violation};

/// Outcome of one document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    /// Parsed and every field valid.
    Ok,
    /// Parsed, but at least one field violated the schema.
    Violations,
    /// No parseable reply after the re-ask.
    FailedParse,
    /// The model call itself failed.
    FailedCall,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::Violations => "violations",
            RowStatus::FailedParse => "failed_parse",
            RowStatus::FailedCall => "failed_call",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "ok" => RowStatus::Ok,
            "violations" => RowStatus::Violations,
            "failed_parse" => RowStatus::FailedParse,
            "failed_call" => RowStatus::FailedCall,
            _ => return None,
        })
    }

    pub fn is_failure(self) -> bool {
        matches!(self, RowStatus::FailedParse | RowStatus::FailedCall)
    }
}

impl fmt::Display for RowStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One document's structured result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub doc_id: String,
    pub status: RowStatus,
    /// The call whose reply produced (or failed to produce) the values.
    pub call_id: String,
    /// One cell per variable in promptbook order; empty for failed rows.
    pub values: Vec<(String, Cell)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Row {
    pub fn get(&self, variable: &str) -> Option<&Cell> {
        self.values.iter().find(|(n, _)| n == variable).map(|(_, c)| c)
    }
}

/// Text of a cell in `table.csv`: the value, the sentinel for a missing
/// answer, empty for invalid or absent.
fn cell_text(cell: Option<&Cell>, sentinel: &str) -> String {
    match cell {
        Some(Cell::Value(v)) => v.to_string(),
        Some(Cell::Missing) => sentinel.to_string(),
        Some(Cell::Invalid) | None => String::new(),
    }
}

/// All rows of a run in corpus order.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationTable {
    pub variables: Vec<VariableSpec>,
    pub rows: Vec<Row>,
}

impl AnnotationTable {
    pub fn get(&self, doc_id: &str) -> Option<&Row> {
        self.rows.iter().find(|r| r.doc_id == doc_id)
    }

    /// Render as CSV: `doc_id, status`, then one column per variable.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["doc_id".to_string(), "status".to_string()];
        header.extend(self.variables.iter().map(|v| v.name.clone()));
        w.write_record(&header).expect("in-memory write");
        for row in &self.rows {
            let mut rec = vec![row.doc_id.clone(), row.status.to_string()];
            rec.extend(
                self.variables
                    .iter()
                    .map(|v| cell_text(row.get(&v.name), &v.missing_sentinel)),
            );
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), PipelineError> {
        let mut f = std::fs::File::create(path).map_err(|e| PipelineError::io(path, e))?;
        f.write_all(self.to_csv().as_bytes())
            .map_err(|e| PipelineError::io(path, e))
    }
}

/// A `table.csv` read back for scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedTable {
    pub variables: Vec<String>,
    pub rows: Vec<LoadedRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedRow {
    pub doc_id: String,
    /// `None` when the file has no status column (gold standards).
    pub status: Option<RowStatus>,
    /// Raw cell text per variable; empty cells are `None`.
    pub cells: Vec<Option<String>>,
}

impl LoadedTable {
    pub fn column_index(&self, variable: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == variable)
    }

    pub fn row(&self, doc_id: &str) -> Option<&LoadedRow> {
        self.rows.iter().find(|r| r.doc_id == doc_id)
    }

    /// Value of `variable` for `doc_id`, with `sentinel` treated as missing.
    pub fn value(&self, doc_id: &str, variable: &str, sentinel: &str) -> Option<&str> {
        let j = self.column_index(variable)?;
        let v = self.row(doc_id)?.cells[j].as_deref()?;
        (v.trim() != sentinel).then_some(v)
    }
}

/// Read a run table or gold file (CSV, or TSV by extension).
///
/// The first column must be `doc_id`; a `status` column is optional; every
/// other column is a variable.
pub fn read_table(path: &Path) -> Result<LoadedTable, PipelineError> {
    let tsv = path.extension().is_some_and(|e| e == "tsv");
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(if tsv { b'\t' } else { b',' })
        .from_path(path)
        .map_err(|e| PipelineError::Table(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| PipelineError::Table(format!("{}: {e}", path.display())))?
        .clone();
    if headers.get(0).map(str::trim) != Some("doc_id") {
        return Err(PipelineError::Table(format!(
            "{}: first column must be `doc_id`",
            path.display()
        )));
    }
    let status_col = headers.iter().position(|h| h.trim() == "status");
    let var_cols: Vec<usize> = (1..headers.len()).filter(|&j| Some(j) != status_col).collect();
    let variables: Vec<String> = var_cols.iter().map(|&j| headers[j].trim().to_string()).collect();

    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| PipelineError::Table(format!("{}: {e}", path.display())))?;
        let line = rec.position().map_or(0, |p| p.line());
        let status = match status_col {
            Some(j) => Some(RowStatus::parse(rec.get(j).unwrap_or("").trim()).ok_or_else(|| {
                PipelineError::Table(format!("{}: row {line}: unknown status", path.display()))
            })?),
            None => None,
        };
        rows.push(LoadedRow {
            doc_id: rec.get(0).unwrap_or("").trim().to_string(),
            status,
            cells: var_cols
                .iter()
                .map(|&j| rec.get(j).filter(|s| !s.trim().is_empty()).map(str::to_string))
                .collect(),
        });
    }
    Ok(LoadedTable { variables, rows })
}
