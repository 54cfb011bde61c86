use std::path::Path;

use crate::error::{Error, Result};

/// Numeric table read from one output file. Missing cells are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub type Matrix = Vec<Vec<f64>>;

const MISSING: [&str; 4] = ["", "na", "nan", "null"];

fn parse_cell(raw: &str) -> Option<f64> {
    let t = raw.trim();
    if MISSING.contains(&t.to_ascii_lowercase().as_str()) {
        return Some(f64::NAN);
    }
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Formats one cell; NaN becomes the empty missing marker.
pub fn format_cell(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v == 0.0 {
        "0".into()
    } else {
        v.to_string()
    }
}

impl DataTable {
    pub fn new(name: impl Into<String>, columns: Vec<String>, rows: Vec<Vec<f64>>) -> Self {
        DataTable {
            name: name.into(),
            columns,
            rows,
        }
    }

    /// Parses delimited text whose first record is the header.
    pub fn parse(name: &str, text: &str, delimiter: u8, origin: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .has_headers(true)
            .flexible(false)
            .from_reader(text.as_bytes());
        let columns: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::data(origin, e.to_string()))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        if columns.is_empty() || columns.iter().all(String::is_empty) {
            return Err(Error::data(origin, "empty header"));
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::data(origin, e.to_string()))?;
            let row = rec
                .iter()
                .enumerate()
                .map(|(j, cell)| {
                    parse_cell(cell).ok_or_else(|| {
                        Error::data(
                            origin,
                            format!("row {}, column '{}': '{cell}' is not a number", i + 1, columns[j]),
                        )
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(DataTable {
            name: name.to_string(),
            columns,
            rows,
        })
    }

    pub fn read(name: &str, path: &Path, delimiter: u8) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(name, &text, delimiter, path)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows.len(), self.columns.len())
    }

    pub fn column_index(&self, column: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == column)
            .ok_or_else(|| Error::UnknownColumn {
                column: column.to_string(),
                available: self.columns.clone(),
            })
    }

    pub fn column(&self, idx: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(move |r| r[idx])
    }

    /// Index columns (time/step) are carried through but not summarized
    /// across experiments.
    pub fn is_index_column(name: &str) -> bool {
        matches!(
            name.to_ascii_lowercase().as_str(),
            "t" | "time" | "tick" | "step" | "clock"
        )
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| format_cell(v)).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_simple_csv() {
        let t = DataTable::parse("collected", "t,collected\n0,0\n1,2\n", b',', Path::new("x")).unwrap();
        assert_eq!(t.shape(), (2, 2));
        assert_eq!(t.rows[1], vec![1.0, 2.0]);
        assert_eq!(t.to_csv(), "t,collected\n0,0\n1,2\n");
    }

    #[test]
    fn missing_cells_and_errors() {
        let t = DataTable::parse("a", "a,b\n1,\n2,NA\n", b',', Path::new("x")).unwrap();
        assert!(t.rows[0][1].is_nan() && t.rows[1][1].is_nan());
        assert!(DataTable::parse("a", "a,b\n1,2,3\n", b',', Path::new("x")).is_err());
        assert!(DataTable::parse("a", "a,b\n1,x\n", b',', Path::new("x")).is_err());
        let err = t.column_index("c").unwrap_err().to_string();
        assert!(err.contains("a, b"), "{err}");
    }

    #[test]
    fn cell_formatting() {
        assert_eq!(format_cell(2.0), "2");
        assert_eq!(format_cell(-0.0), "0");
        assert_eq!(format_cell(0.25), "0.25");
        assert_eq!(format_cell(f64::NAN), "");
    }
}
