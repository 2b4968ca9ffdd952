use std::io::Read;
use std::path::Path;

use super::DataError;
use crate::numerics::Matrix;

/// A `T × N` table of raw observations.
#[derive(Debug, Clone)]
pub struct RawSeriesTable {
    pub names: Vec<String>,
    pub timestamps: Option<Vec<String>>,
    pub values: Matrix,
}

impl RawSeriesTable {
    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.rows() == 0
    }

    pub fn n_series(&self) -> usize {
        self.values.cols()
    }
}

/// Reads a header-first CSV with an optional leading `date` column.
pub fn load_csv(path: impl AsRef<Path>) -> Result<RawSeriesTable, DataError> {
    let path = path.as_ref();
    let mut text = String::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
    parse_csv(&text)
}

pub fn parse_csv(text: &str) -> Result<RawSeriesTable, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let header: Vec<String> = reader
        .headers()
        .map_err(|e| DataError::ParseError {
            row: 0,
            column: String::new(),
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(DataError::EmptyFile);
    }
    let has_date = header[0].eq_ignore_ascii_case("date");
    let first_value_col = usize::from(has_date);
    let names: Vec<String> = header[first_value_col..].to_vec();
    if names.is_empty() {
        return Err(DataError::ParseError {
            row: 0,
            column: header[0].clone(),
            message: "no numeric series columns".into(),
        });
    }

    let mut timestamps = Vec::new();
    let mut data = Vec::new();
    let mut rows = 0usize;
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| DataError::ParseError {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        if record.len() != header.len() {
            return Err(DataError::RaggedRows {
                row,
                expected: header.len(),
                found: record.len(),
            });
        }
        if has_date {
            timestamps.push(record[0].to_owned());
        }
        for (j, cell) in record.iter().enumerate().skip(first_value_col) {
            let value: f64 = cell.parse().map_err(|_| DataError::ParseError {
                row,
                column: header[j].clone(),
                message: format!("cannot parse '{cell}' as a number"),
            })?;
            if !value.is_finite() {
                return Err(DataError::NonNumericCell {
                    row,
                    column: header[j].clone(),
                    value: cell.to_owned(),
                });
            }
            data.push(value);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(DataError::EmptyFile);
    }
    if rows < 2 {
        return Err(DataError::TooFewRows {
            needed: 2,
            available: rows,
        });
    }
    if has_date && timestamps.iter().all(|t| looks_iso(t)) {
        for (i, pair) in timestamps.windows(2).enumerate() {
            if pair[1] <= pair[0] {
                return Err(DataError::UnorderedTimestamps { row: i + 2 });
            }
        }
    }

    let values = Matrix::from_vec(rows, names.len(), data).expect("row lengths checked");
    Ok(RawSeriesTable {
        names,
        timestamps: has_date.then_some(timestamps),
        values,
    })
}

/// `YYYY-MM-DD...` stamps order correctly as strings; anything else is
/// trusted to be in file order.
fn looks_iso(s: &str) -> bool {
    let b = s.as_bytes();
    b.len() >= 10
        && b[..4].iter().all(u8::is_ascii_digit)
        && b[4] == b'-'
        && b[5..7].iter().all(u8::is_ascii_digit)
        && b[7] == b'-'
}
