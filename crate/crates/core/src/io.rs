//! Loading return series from delimited text and writing them back.

use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Minimum number of usable data rows.
pub const MIN_ROWS: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriceMode {
    /// Column holds prices `x_t`; returns are `ln(x_t / x_{t-1})`.
    Prices,
    /// Column already holds returns.
    Returns,
}

impl FromStr for PriceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "prices" | "price" => Ok(PriceMode::Prices),
            "returns" | "return" => Ok(PriceMode::Returns),
            other => Err(Error::InvalidConfig(format!("unknown mode `{other}` (prices|returns)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsSeries {
    pub values: Vec<f64>,
    pub label: String,
    /// Data rows in the file, header excluded.
    pub source_rows: usize,
    /// Rows skipped for a missing value.
    pub skipped_rows: usize,
}

fn is_missing(field: &str) -> bool {
    matches!(field.trim().to_ascii_lowercase().as_str(), "" | "na" | "nan" | "null" | ".")
}

/// Read column `column` of a comma-separated file with a header row.
///
/// Rows whose field is empty or `NA` are skipped and counted. Row numbers in
/// errors are 1-based file lines, the header being line 1.
pub fn load_returns(path: impl AsRef<Path>, column: &str, mode: PriceMode) -> Result<ReturnsSeries> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_error)?;
    let headers = reader.headers().map_err(csv_error)?.clone();
    let idx = headers.iter().position(|h| h == column).ok_or_else(|| Error::Parse {
        row: 1,
        message: format!(
            "no column `{column}` (have: {})",
            headers.iter().collect::<Vec<_>>().join(", ")
        ),
    })?;

    let mut raw = Vec::new();
    let mut source_rows = 0;
    let mut skipped_rows = 0;
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(csv_error)?;
        source_rows += 1;
        let field = record.get(idx).unwrap_or("");
        if is_missing(field) {
            skipped_rows += 1;
            continue;
        }
        let v: f64 = field.parse().map_err(|_| Error::Parse {
            row,
            message: format!("`{field}` is not a number"),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse { row, message: format!("`{field}` is not finite") });
        }
        if mode == PriceMode::Prices && v <= 0.0 {
            return Err(Error::Parse { row, message: format!("nonpositive price {v}") });
        }
        raw.push(v);
    }
    if raw.len() < MIN_ROWS {
        return Err(Error::InvalidData(format!(
            "{} usable rows in {}, need at least {MIN_ROWS}",
            raw.len(),
            path.display()
        )));
    }
    if skipped_rows > 0 {
        log::warn!("skipped {skipped_rows} rows with missing `{column}`");
    }
    let values = match mode {
        PriceMode::Returns => raw,
        PriceMode::Prices => raw.windows(2).map(|w| (w[1] / w[0]).ln()).collect(),
    };
    Ok(ReturnsSeries { values, label: column.to_string(), source_rows, skipped_rows })
}

fn csv_error(e: csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse { row, message: format!("{other:?}") },
    }
}

/// Decimal form with 17 significant digits, enough to round-trip any `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write a one-column file with header `label`.
pub fn write_series(path: impl AsRef<Path>, label: &str, values: &[f64]) -> Result<()> {
    let mut f = std::io::BufWriter::new(File::create(path)?);
    writeln!(f, "{label}")?;
    for v in values {
        writeln!(f, "{}", format_f64(*v))?;
    }
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file_with(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn prices_to_log_returns() {
        let e = std::f64::consts::E;
        let mut s = String::from("date,close\n");
        for i in 0..22 {
            let p = if i == 0 { 1.0 } else { e };
            s.push_str(&format!("{i},{}\n", format_f64(p)));
        }
        let f = file_with(&s);
        let r = load_returns(f.path(), "close", PriceMode::Prices).unwrap();
        assert_eq!(r.values.len(), 21);
        assert!((r.values[0] - 1.0).abs() < 1e-15);
        assert_eq!(r.values[1], 0.0);
    }

    #[test]
    fn nonpositive_price_names_row() {
        let mut s = String::from("close\n");
        for i in 0..30 {
            s.push_str(if i == 4 { "0\n" } else { "1.5\n" });
        }
        let f = file_with(&s);
        match load_returns(f.path(), "close", PriceMode::Prices) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn short_file_is_invalid_data() {
        let f = file_with("r\n0.1\n0.2\n");
        assert!(matches!(
            load_returns(f.path(), "r", PriceMode::Returns),
            Err(Error::InvalidData(_))
        ));
    }

    #[test]
    fn missing_values_are_counted() {
        let mut s = String::from("r,other\n");
        for i in 0..30 {
            if i % 5 == 0 {
                s.push_str(",1\n");
            } else {
                s.push_str(&format!("{},1\n", i as f64 * 0.01));
            }
        }
        let f = file_with(&s);
        let r = load_returns(f.path(), "r", PriceMode::Returns).unwrap();
        assert_eq!(r.skipped_rows, 6);
        assert_eq!(r.source_rows, 30);
        assert_eq!(r.values.len(), 24);
    }

    #[test]
    fn round_trip_is_exact() {
        let values: Vec<f64> = (0..40).map(|i| (i as f64 * 0.731).sin() / 7.0).collect();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_series(f.path(), "y", &values).unwrap();
        let r = load_returns(f.path(), "y", PriceMode::Returns).unwrap();
        assert_eq!(r.values, values);
    }
}
