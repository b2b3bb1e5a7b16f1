//! Reading study files.
//!
//! A study file is comma-separated with a header and the columns
//! `study,y,se` or `study,y,var` (`var = se²`). Exactly one of `se` and `var`
//! must be present. Data rows are numbered from 1 in error messages.

use std::io::Read;
use std::path::Path;

use thiserror::Error;

use crate::classic::StudyRecord;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV at row {row}: {message}")]
    Csv { row: usize, message: String },
    #[error("missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("need a `se` or a `var` column")]
    MissingSpread,
    #[error("both `se` and `var` columns are present; keep exactly one")]
    BothSpreads,
    #[error("row {row}: `{column}` value `{value}` is not a number")]
    NonNumeric { row: usize, column: &'static str, value: String },
    #[error("row {row}: `{column}` must be positive, got {value}")]
    NonPositive { row: usize, column: &'static str, value: f64 },
    #[error("row {row}: `y` must be finite, got {value}")]
    NonFinite { row: usize, value: f64 },
    #[error("row {row}: empty study label")]
    EmptyLabel { row: usize },
    #[error("file contains no studies")]
    Empty,
}

pub fn read_studies(path: impl AsRef<Path>) -> Result<Vec<StudyRecord>, IngestError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_studies(file)
}

pub fn parse_studies(input: impl Read) -> Result<Vec<StudyRecord>, IngestError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| IngestError::Csv {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let study = find("study").ok_or(IngestError::MissingColumn("study"))?;
    let y_col = find("y").ok_or(IngestError::MissingColumn("y"))?;
    let (spread_col, is_var) = match (find("se"), find("var")) {
        (Some(_), Some(_)) => return Err(IngestError::BothSpreads),
        (Some(c), None) => (c, false),
        (None, Some(c)) => (c, true),
        (None, None) => return Err(IngestError::MissingSpread),
    };
    let spread_name = if is_var { "var" } else { "se" };

    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| IngestError::Csv {
            row,
            message: e.to_string(),
        })?;
        let cell = |c: usize| rec.get(c).unwrap_or("");
        let number = |c: usize, column: &'static str| {
            cell(c).parse::<f64>().map_err(|_| IngestError::NonNumeric {
                row,
                column,
                value: cell(c).to_string(),
            })
        };
        let id = cell(study);
        if id.is_empty() {
            return Err(IngestError::EmptyLabel { row });
        }
        let y = number(y_col, "y")?;
        if !y.is_finite() {
            return Err(IngestError::NonFinite { row, value: y });
        }
        let spread = number(spread_col, spread_name)?;
        if !(spread > 0.0 && spread.is_finite()) {
            return Err(IngestError::NonPositive {
                row,
                column: spread_name,
                value: spread,
            });
        }
        let se = if is_var { spread.sqrt() } else { spread };
        out.push(StudyRecord::new(id, y, se));
    }
    if out.is_empty() {
        return Err(IngestError::Empty);
    }
    Ok(out)
}
