//! CSV prediction files.
//!
//! Header: `feat_0..feat_{d-1}`, then `pred_{m}_{k}` for every member `m`
//! and class `k` (member-major), then `label`. Labels are written `1..K`.
//! Floats are written in the shortest form that parses back to the same bits.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use credal_core::simplex::normalize_in_place;
use credal_core::{CredalDataset, Matrix};

use crate::error::{CliError, CliResult};

/// Shape inferred from a header row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub d: usize,
    pub m: usize,
    pub k: usize,
}

impl Layout {
    pub fn columns(&self) -> usize {
        self.d + self.m * self.k + 1
    }

    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = (0..self.d).map(|i| format!("feat_{i}")).collect();
        for m in 0..self.m {
            for k in 0..self.k {
                h.push(format!("pred_{m}_{k}"));
            }
        }
        h.push("label".into());
        h
    }
}

fn parse_pred_name(name: &str) -> Option<(usize, usize)> {
    let rest = name.strip_prefix("pred_")?;
    let (m, k) = rest.split_once('_')?;
    Some((m.parse().ok()?, k.parse().ok()?))
}

/// Infers `d`, `M` and `K` from the header and checks the column order.
pub fn parse_header(cols: &[&str]) -> CliResult<Layout> {
    let bad = |msg: String| CliError::Data(format!("line 1: {msg}"));
    let d = cols.iter().take_while(|c| c.starts_with("feat_")).count();
    let preds: Vec<(usize, usize)> = cols[d..].iter().map_while(|c| parse_pred_name(c)).collect();
    let m = preds.iter().map(|p| p.0 + 1).max().unwrap_or(0);
    let k = preds.iter().map(|p| p.1 + 1).max().unwrap_or(0);
    if m == 0 || k < 2 {
        return Err(bad(format!("need pred_{{m}}_{{k}} columns for K >= 2 classes, found M={m} K={k}")));
    }
    let layout = Layout { d, m, k };
    if cols.len() != layout.columns() {
        return Err(bad(format!(
            "expected {} columns for d={d}, M={m}, K={k}, found {}",
            layout.columns(),
            cols.len()
        )));
    }
    for (i, (want, got)) in layout.header().iter().zip(cols).enumerate() {
        if want != got {
            return Err(bad(format!("column {} is {got:?}, expected {want:?}", i + 1)));
        }
    }
    Ok(layout)
}

/// Reads a labelled dataset from CSV.
pub fn parse_dataset<R: Read>(reader: R) -> CliResult<CredalDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| CliError::Data(format!("line 1: {e}")))?.clone();
    let cols: Vec<&str> = header.iter().collect();
    let layout = parse_header(&cols)?;
    let Layout { d, m, k } = layout;
    let mut feats = Vec::new();
    let mut preds = Vec::new();
    let mut labels = Vec::new();
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::Data(format!("line {line}: {e}"))
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != layout.columns() {
            return Err(CliError::Data(format!("line {line}: {} fields, expected {}", rec.len(), layout.columns())));
        }
        let num = |j: usize| -> CliResult<f64> {
            let v: f64 = rec[j].parse().map_err(|_| {
                CliError::Data(format!("line {line}: column {} ({:?}) is not a number", j + 1, &rec[j]))
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(CliError::Data(format!("line {line}: column {} is not finite", j + 1)))
            }
        };
        for j in 0..d {
            feats.push(num(j)?);
        }
        for mm in 0..m {
            let mut block = (0..k).map(|c| num(d + mm * k + c)).collect::<CliResult<Vec<f64>>>()?;
            normalize_in_place(&mut block)
                .map_err(|e| CliError::Data(format!("line {line} (row {rows}): member {mm}: {e}")))?;
            preds.extend(block);
        }
        let raw = &rec[d + m * k];
        let label: usize =
            raw.parse().map_err(|_| CliError::Data(format!("line {line}: label {raw:?} is not an integer")))?;
        if label < 1 || label > k {
            return Err(CliError::Data(format!("line {line}: label {label} outside 1..{k}")));
        }
        labels.push(label - 1);
        rows += 1;
    }
    if rows == 0 {
        return Err(CliError::Data("file has no data rows".into()));
    }
    let features = Matrix::new(rows, d, feats)?;
    Ok(CredalDataset::new(features, m, k, preds, Some(labels))?)
}

pub fn read_dataset(path: &Path) -> CliResult<CredalDataset> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    parse_dataset(std::io::BufReader::new(file)).map_err(|e| match e {
        CliError::Data(msg) => CliError::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Writes `data` (which must carry labels) as CSV.
pub fn write_dataset_to<W: Write>(writer: W, data: &CredalDataset) -> CliResult<()> {
    let labels = data.require_labels()?;
    let layout = Layout { d: data.d(), m: data.m(), k: data.k() };
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| CliError::Data(format!("writing CSV: {e}"));
    w.write_record(layout.header()).map_err(io)?;
    let mut row: Vec<String> = Vec::with_capacity(layout.columns());
    for (i, label) in labels.iter().enumerate() {
        row.clear();
        row.extend(data.features().row(i).iter().map(|v| v.to_string()));
        row.extend(data.instance(i).iter().map(|v| v.to_string()));
        row.push((label + 1).to_string());
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Data(format!("writing CSV: {e}")))?;
    Ok(())
}

pub fn write_dataset(path: &Path, data: &CredalDataset) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    write_dataset_to(std::io::BufWriter::new(file), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "feat_0,pred_0_0,pred_0_1,pred_1_0,pred_1_1,label\n\
                         0.5,0.2,0.8,0.6,0.4,2\n\
                         1.5,1,0,0.5,0.5,1\n";

    #[test]
    fn reads_small_file() {
        let data = parse_dataset(SMALL.as_bytes()).unwrap();
        assert_eq!((data.n(), data.d(), data.m(), data.k()), (2, 1, 2, 2));
        assert_eq!(data.labels().unwrap(), &[1, 0]);
        assert_eq!(data.prediction(0, 1), &[0.6, 0.4]);
    }

    #[test]
    fn header_errors() {
        assert!(parse_header(&["feat_0", "pred_0_0", "label"]).is_err());
        assert!(parse_header(&["pred_0_0", "pred_0_1", "pred_1_1", "pred_1_0", "label"]).is_err());
        assert!(parse_header(&["pred_0_0", "pred_0_1", "label", "extra"]).is_err());
        let l = parse_header(&["pred_0_0", "pred_0_1", "pred_0_2", "label"]).unwrap();
        assert_eq!(l, Layout { d: 0, m: 1, k: 3 });
    }

    #[test]
    fn data_errors_name_the_line() {
        let bad = "pred_0_0,pred_0_1,label\n0.5,0.5,1\n0.5,x,1\n";
        let e = parse_dataset(bad.as_bytes()).unwrap_err().to_string();
        assert!(e.contains("line 3"), "{e}");
        let drift = "pred_0_0,pred_0_1,label\n0.5,0.5,1\n0.5,0.6,1\n";
        let e = parse_dataset(drift.as_bytes()).unwrap_err();
        assert_eq!(e.exit_code(), 3);
        assert!(e.to_string().contains("row 1"), "{e}");
        let label = "pred_0_0,pred_0_1,label\n0.5,0.5,3\n";
        assert!(parse_dataset(label.as_bytes()).unwrap_err().to_string().contains("outside 1..2"));
        let zero = "pred_0_0,pred_0_1,label\n0.5,0.5,0\n";
        assert!(parse_dataset(zero.as_bytes()).is_err());
    }

    #[test]
    fn small_drift_is_renormalized() {
        let f = "pred_0_0,pred_0_1,label\n0.5,0.5000004,1\n";
        let data = parse_dataset(f.as_bytes()).unwrap();
        let s: f64 = data.prediction(0, 0).iter().sum();
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn round_trip_is_exact() {
        let data = parse_dataset(SMALL.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_dataset_to(&mut buf, &data).unwrap();
        let back = parse_dataset(buf.as_slice()).unwrap();
        assert_eq!(back, data);
    }
}
