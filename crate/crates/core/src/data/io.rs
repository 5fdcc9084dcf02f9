use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{Dataset, Matrix};
use crate::{Error, Result};

/// What `load_csv` dropped on the way in.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    /// Columns whose first non-empty cell is not numeric.
    pub dropped_columns: Vec<String>,
    /// Rows with an empty or non-finite numeric cell (1-based data row numbers).
    pub dropped_rows: Vec<usize>,
}

enum Kind {
    Numeric,
    Text,
}

/// Loads a comma-separated file with a header row.
///
/// A column is treated as text (and dropped with a warning) when its first
/// non-empty cell does not parse as a number; a later unparsable cell in a
/// numeric column is an error. Rows with empty, NaN or infinite cells in a
/// kept column are dropped with a warning. Row order follows the file.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<(Dataset, LoadReport)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(std::io::BufReader::new(file));
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::csv(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let label_pos = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingLabelColumn {
            path: path.to_path_buf(),
            column: label_column.to_string(),
        })?;

    let records = reader
        .records()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::csv(path, e))?;
    if records.is_empty() {
        return Err(Error::EmptyDataset {
            path: path.to_path_buf(),
        });
    }

    let kinds: Vec<Option<Kind>> = (0..header.len())
        .map(|c| {
            if c == label_pos {
                return None;
            }
            let first = records.iter().map(|r| r.get(c).unwrap_or("")).find(|v| !v.is_empty());
            Some(match first {
                Some(v) if v.parse::<f64>().is_err() => Kind::Text,
                _ => Kind::Numeric,
            })
        })
        .collect();

    let mut report = LoadReport::default();
    let mut numeric_cols = Vec::new();
    for (c, k) in kinds.iter().enumerate() {
        match k {
            Some(Kind::Numeric) => numeric_cols.push(c),
            Some(Kind::Text) => {
                warn!("{}: dropping non-numeric column `{}`", path.display(), header[c]);
                report.dropped_columns.push(header[c].clone());
            }
            None => {}
        }
    }

    let mut data = Vec::with_capacity(records.len() * numeric_cols.len());
    let mut labels = Vec::with_capacity(records.len());
    let mut row_buf = Vec::with_capacity(numeric_cols.len());
    for (i, rec) in records.iter().enumerate() {
        let row_no = i + 1;
        row_buf.clear();
        let mut keep = true;
        for &c in &numeric_cols {
            let cell = rec.get(c).unwrap_or("");
            if cell.is_empty() {
                keep = false;
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => row_buf.push(v),
                Ok(_) => keep = false,
                Err(_) => {
                    return Err(Error::UnparsableCell {
                        path: path.to_path_buf(),
                        row: row_no,
                        column: header[c].clone(),
                        value: cell.to_string(),
                    })
                }
            }
        }
        if keep {
            data.extend_from_slice(&row_buf);
            labels.push(rec.get(label_pos).unwrap_or("").to_string());
        } else {
            report.dropped_rows.push(row_no);
        }
    }
    if !report.dropped_rows.is_empty() {
        warn!(
            "{}: dropped {} row(s) with missing or non-finite values",
            path.display(),
            report.dropped_rows.len()
        );
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset {
            path: path.to_path_buf(),
        });
    }

    let names = numeric_cols.iter().map(|&c| header[c].clone()).collect();
    let matrix = Matrix::new(labels.len(), numeric_cols.len(), data)?;
    Ok((Dataset::new(names, matrix, labels)?, report))
}

/// Writes the dataset with the label as the last column.
///
/// Values use the shortest representation that parses back to the same
/// `f64`, so `load_csv(write_csv(d))` reproduces `d` exactly.
pub fn write_csv(d: &Dataset, path: impl AsRef<Path>, label_column: &str) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut header: Vec<&str> = d.feature_names().iter().map(String::as_str).collect();
    header.push(label_column);
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    let mut rec: Vec<String> = Vec::with_capacity(header.len());
    for r in 0..d.n_rows() {
        rec.clear();
        rec.extend(d.matrix().row(r).iter().map(|v| format!("{v:?}")));
        rec.push(d.label(r).to_string());
        w.write_record(&rec).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p)
            .unwrap()
            .write_all(body.as_bytes())
            .unwrap();
        p
    }

    #[test]
    fn loads_simple_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "f1,f2,label\n1,2,A\n3,4,B\n5,6,A\n");
        let (d, rep) = load_csv(&p, "label").unwrap();
        assert_eq!(d.n_features(), 2);
        assert_eq!(d.n_rows(), 3);
        assert_eq!(d.column(1), vec![2.0, 4.0, 6.0]);
        assert!(rep.dropped_columns.is_empty());
    }

    #[test]
    fn drops_text_column_with_warning() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "a.csv",
            "flow_id,f1,label\nabc-1,1.5,A\nabc-2,2.5,B\n",
        );
        let (d, rep) = load_csv(&p, "label").unwrap();
        assert_eq!(d.feature_names(), &["f1".to_string()]);
        assert_eq!(rep.dropped_columns, vec!["flow_id".to_string()]);
    }

    #[test]
    fn reports_bad_cell_with_location() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "f1,label\n1,A\nx7,B\n");
        match load_csv(&p, "label") {
            Err(Error::UnparsableCell { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "f1");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn error_paths() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_csv(dir.path().join("nope.csv"), "label"),
            Err(Error::Io { .. })
        ));
        let p = write(&dir, "h.csv", "f1,label\n");
        assert!(matches!(load_csv(&p, "label"), Err(Error::EmptyDataset { .. })));
        let p = write(&dir, "m.csv", "f1,f2\n1,2\n");
        assert!(matches!(
            load_csv(&p, "label"),
            Err(Error::MissingLabelColumn { .. })
        ));
    }

    #[test]
    fn non_finite_rows_are_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "f1,label\n1,A\ninf,B\nNaN,A\n,B\n2,B\n");
        let (d, rep) = load_csv(&p, "label").unwrap();
        assert_eq!(d.n_rows(), 2);
        assert_eq!(rep.dropped_rows, vec![2, 3, 4]);
    }

    #[test]
    fn write_then_load_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "f1,f2,label\n0.1,1e-300,A\n-3.25,2.5,B\n");
        let (d, _) = load_csv(&p, "label").unwrap();
        let out = dir.path().join("b.csv");
        write_csv(&d, &out, "label").unwrap();
        let (d2, _) = load_csv(&out, "label").unwrap();
        assert_eq!(d, d2);
    }
}
