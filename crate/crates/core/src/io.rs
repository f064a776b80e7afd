//! CSV formats for datasets and loss matrices.
//!
//! * Dataset: header `x1,...,xp,y`, one row per point.
//! * Loss matrix: header `index,fold,loss`; `index` and `fold` are 0-based.
//!
//! Reals are written in scientific notation with 17 significant digits, which
//! identifies every finite `f64` uniquely, so read-then-write is byte-stable.

use std::io::{Read, Write};
use std::path::Path;

use crate::data::{Dataset, LossEntry, LossKind, LossMatrix};
use crate::error::{Error, Result};

pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_real(field: &str, row: usize, column: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::InvalidInput(format!("row {row}, column {column}: cannot parse {field:?}")))
}

pub fn write_dataset<W: Write>(data: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=data.dim()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    for i in 0..data.len() {
        let mut row: Vec<String> = data.features(i).iter().map(|&x| format_real(x)).collect();
        row.push(format_real(data.target(i)));
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_dataset<R: Read>(input: R) -> Result<Dataset> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    let dim = cols.len().saturating_sub(1);
    let expected: Vec<String> = (1..=dim).map(|j| format!("x{j}")).chain(["y".into()]).collect();
    if cols.is_empty() || cols != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::InvalidInput(format!(
            "dataset header must be x1..xp,y; got {}",
            cols.join(",")
        )));
    }
    let mut features = Vec::new();
    let mut targets = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != dim + 1 {
            return Err(Error::InvalidInput(format!("row {row} has {} fields", rec.len())));
        }
        for (j, field) in rec.iter().enumerate() {
            let v = parse_real(field, row, cols[j])?;
            if j < dim {
                features.push(v);
            } else {
                targets.push(v);
            }
        }
    }
    Dataset::new(dim, features, targets)
}

pub fn write_loss_matrix<W: Write>(m: &LossMatrix, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "fold", "loss"])?;
    for e in m.entries() {
        w.write_record([e.index.to_string(), e.fold.to_string(), format_real(e.loss)])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Read a loss matrix; `k` is one more than the largest fold id present.
pub fn read_loss_matrix<R: Read>(input: R, kind: LossKind) -> Result<LossMatrix> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    if cols != ["index", "fold", "loss"] {
        return Err(Error::MalformedLossMatrix(format!(
            "header must be index,fold,loss; got {}",
            cols.join(",")
        )));
    }
    let mut entries = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let int = |j: usize, name: &str| -> Result<usize> {
            rec.get(j)
                .and_then(|s| s.trim().parse::<usize>().ok())
                .ok_or_else(|| Error::MalformedLossMatrix(format!("row {row}: bad {name}")))
        };
        entries.push(LossEntry {
            index: int(0, "index")?,
            fold: int(1, "fold")?,
            loss: parse_real(rec.get(2).unwrap_or(""), row, "loss")?,
        });
    }
    let k = entries.iter().map(|e| e.fold + 1).max().unwrap_or(0);
    LossMatrix::from_entries(&entries, k, kind)
}

pub fn read_dataset_file(path: &Path) -> Result<Dataset> {
    read_dataset(open(path)?)
}

pub fn read_loss_matrix_file(path: &Path, kind: LossKind) -> Result<LossMatrix> {
    read_loss_matrix(open(path)?, kind)
}

pub fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn create(path: &Path) -> Result<std::fs::File> {
    std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dataset_header_and_values() {
        let d = Dataset::new(2, vec![1.0, 2.0, 3.0, 4.0], vec![0.5, -1.0]).unwrap();
        let mut buf = Vec::new();
        write_dataset(&d, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x1,x2,y\n1.0000000000000000e0,"));
        assert_eq!(read_dataset(&buf[..]).unwrap(), d);
    }

    #[test]
    fn scalar_dataset_has_only_y() {
        let d = Dataset::from_targets(vec![1.0, 2.0]).unwrap();
        let mut buf = Vec::new();
        write_dataset(&d, &mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("y\n"));
        assert_eq!(read_dataset(&buf[..]).unwrap(), d);
    }

    #[test]
    fn bad_headers() {
        assert!(read_dataset(&b"a,b\n1,2\n3,4\n"[..]).is_err());
        assert!(read_loss_matrix(&b"i,f,l\n0,0,1\n"[..], LossKind::Plain).is_err());
    }

    proptest! {
        #[test]
        fn loss_matrix_csv_is_byte_stable(
            losses in prop::collection::vec(-1e6f64..1e6, 2..60),
            k in 1usize..5,
        ) {
            let n = losses.len();
            let k = k.min(n);
            let folds: Vec<usize> = (0..n).map(|i| i % k).collect();
            let m = LossMatrix::new(losses, folds, k, LossKind::Plain).unwrap();
            let mut first = Vec::new();
            write_loss_matrix(&m, &mut first).unwrap();
            let back = read_loss_matrix(&first[..], LossKind::Plain).unwrap();
            prop_assert_eq!(&back, &m);
            let mut second = Vec::new();
            write_loss_matrix(&back, &mut second).unwrap();
            prop_assert_eq!(first, second);
        }
    }
}
