//! Header-plus-CSV file format shared by trajectory and latent files.
//!
//! Line 1 is a single-line JSON object describing the file; line 2 is the
//! CSV column header; every following line is one time step. Numbers are
//! written in shortest round-trip decimal form, so a read-write cycle is
//! bit-exact. An empty field means "no value" (the final row of a
//! trajectory has no torque).

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Value,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        serde_json::to_writer(&mut out, &self.header)
            .map_err(|e| Error::invalid(format!("unserializable header: {e}")))?;
        out.push(b'\n');
        {
            let mut w = csv::Writer::from_writer(&mut out);
            let write_err = |e: csv::Error| Error::invalid(format!("csv write failed: {e}"));
            w.write_record(&self.columns).map_err(write_err)?;
            for row in &self.rows {
                if row.len() != self.columns.len() {
                    return Err(Error::invalid("row width does not match the column header"));
                }
                w.write_record(row.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()))
                    .map_err(write_err)?;
            }
            w.flush().map_err(|e| Error::io("<buffer>", e))?;
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(BufReader::new(file), path)
    }

    /// Parse a table; `path` is only used in error messages.
    pub fn from_reader<R: Read>(mut reader: BufReader<R>, path: &Path) -> Result<Self> {
        let corrupt = |line: u64, reason: String| Error::Corrupt {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let mut first = String::new();
        reader.read_line(&mut first).map_err(|e| Error::io(path, e))?;
        let header: Value = serde_json::from_str(first.trim_end())
            .map_err(|e| corrupt(1, format!("metadata header is not JSON: {e}")))?;
        if !header.is_object() {
            return Err(corrupt(1, "metadata header must be a JSON object".into()));
        }

        let mut csv_reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_reader(reader);
        let columns: Vec<String> = csv_reader
            .headers()
            .map_err(|e| corrupt(2, format!("bad column header: {e}")))?
            .iter()
            .map(str::to_owned)
            .collect();
        if columns.is_empty() || columns.iter().all(String::is_empty) {
            return Err(corrupt(2, "missing column header".into()));
        }

        let mut rows = Vec::new();
        for record in csv_reader.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() + 1);
                corrupt(line, e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line() + 1);
            let row =
                record
                    .iter()
                    .enumerate()
                    .map(|(c, field)| {
                        if field.is_empty() {
                            Ok(None)
                        } else {
                            field.trim().parse::<f64>().map(Some).map_err(|_| {
                                corrupt(line, format!("column `{}`: `{field}` is not a number", columns[c]))
                            })
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(Self { header, columns, rows })
    }
}

/// Write `bytes` to `path` through a temporary file in the same directory
/// and an atomic rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir: PathBuf = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| Error::io(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn parse(text: &str) -> Result<Table> {
        Table::from_reader(BufReader::new(text.as_bytes()), Path::new("mem.csv"))
    }

    #[test]
    fn round_trip_is_exact() {
        let t = Table {
            header: json!({"format": "x", "version": 1}),
            columns: vec!["t".into(), "a".into()],
            rows: vec![
                vec![Some(0.0), Some(0.1 + 0.2)],
                vec![Some(1e-300), None],
                vec![Some(-123456.789e20), Some(f64::MIN_POSITIVE)],
            ],
        };
        let bytes = t.to_bytes().unwrap();
        let back = Table::from_reader(BufReader::new(&bytes[..]), Path::new("x")).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn corrupt_row_reports_line() {
        let err = parse("{\"v\":1}\nt,a\n0,1\n1,2\n2,oops\n").unwrap_err();
        match err {
            Error::Corrupt { line, reason, .. } => {
                assert_eq!(line, 5);
                assert!(reason.contains("oops"));
            }
            other => panic!("{other:?}"),
        }
        let err = parse("{\"v\":1}\nt,a\n0,1\n1,2,3\n").unwrap_err();
        assert!(matches!(err, Error::Corrupt { line: 4, .. }), "{err:?}");
    }

    #[test]
    fn bad_header_is_line_one() {
        assert!(matches!(parse("not json\nt\n"), Err(Error::Corrupt { line: 1, .. })));
    }
}
