//! Aggregated results of a simulation sweep.
//!
//! A sweep keeps one record per (case, estimator, method, repetition) and
//! derives its summary rows from the sorted records, so two sweeps over
//! disjoint repetition ranges merge into exactly the report a single run
//! over the union would produce.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

/// Outcome of one test on one generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionRecord {
    pub case: String,
    pub estimator: String,
    pub method: String,
    pub repetition: u64,
    pub statistic: f64,
    pub p_value: f64,
    /// Decision at each level of the sweep's alpha grid.
    pub rejections: Vec<bool>,
}

impl RepetitionRecord {
    fn key(&self) -> (&str, &str, &str, u64) {
        (&self.case, &self.estimator, &self.method, self.repetition)
    }
}

/// Rejection rate of one method at one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub case: String,
    pub estimator: String,
    pub method: String,
    pub alpha: f64,
    pub rejection_rate: f64,
    pub repetitions: usize,
    pub mean_statistic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    /// Command settings; `repetitions` and `rep_offset` may differ between
    /// mergeable reports.
    pub config: Value,
    pub alphas: Vec<f64>,
    pub rows: Vec<SweepRow>,
    pub records: Vec<RepetitionRecord>,
}

impl SweepReport {
    pub fn from_records(config: Value, alphas: Vec<f64>, mut records: Vec<RepetitionRecord>) -> CliResult<Self> {
        records.sort_by(|a, b| a.key().cmp(&b.key()));
        if let Some(w) = records.windows(2).find(|w| w[0].key() == w[1].key()) {
            return Err(CliError::Usage(format!(
                "repetition {} of {}/{}/{} appears twice",
                w[0].repetition, w[0].case, w[0].estimator, w[0].method
            )));
        }
        if let Some(r) = records.iter().find(|r| r.rejections.len() != alphas.len()) {
            return Err(CliError::Data(format!(
                "record {}/{}/{} has {} decisions for {} levels",
                r.case,
                r.estimator,
                r.method,
                r.rejections.len(),
                alphas.len()
            )));
        }
        let mut rows = Vec::new();
        let mut start = 0;
        while start < records.len() {
            let head = &records[start];
            let end = start
                + records[start..]
                    .iter()
                    .take_while(|r| (&r.case, &r.estimator, &r.method) == (&head.case, &head.estimator, &head.method))
                    .count();
            let group = &records[start..end];
            let reps = group.len();
            let mean_statistic = group.iter().map(|r| r.statistic).sum::<f64>() / reps as f64;
            for (a, &alpha) in alphas.iter().enumerate() {
                let hits = group.iter().filter(|r| r.rejections[a]).count();
                rows.push(SweepRow {
                    case: head.case.clone(),
                    estimator: head.estimator.clone(),
                    method: head.method.clone(),
                    alpha,
                    rejection_rate: hits as f64 / reps as f64,
                    repetitions: reps,
                    mean_statistic,
                });
            }
            start = end;
        }
        Ok(Self { config, alphas, rows, records })
    }

    /// Combines two sweeps over disjoint repetitions of the same settings.
    pub fn merge(a: &SweepReport, b: &SweepReport) -> CliResult<SweepReport> {
        if a.alphas != b.alphas {
            return Err(CliError::Usage("sweeps use different alpha grids".into()));
        }
        if strip_range(&a.config) != strip_range(&b.config) {
            return Err(CliError::Usage("sweeps were run with different settings".into()));
        }
        let mut config = strip_range(&a.config);
        let reps: BTreeSet<u64> = a.records.iter().chain(&b.records).map(|r| r.repetition).collect();
        if let Value::Object(map) = &mut config {
            map.insert("repetitions".into(), Value::from(reps.len()));
            map.insert("rep_offset".into(), Value::from(reps.first().copied().unwrap_or(0)));
        }
        let records = a.records.iter().chain(&b.records).cloned().collect();
        Self::from_records(config, a.alphas.clone(), records)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["case", "estimator", "method", "alpha", "rejection_rate", "repetitions", "mean_statistic"])
            .expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.case.clone(),
                r.estimator.clone(),
                r.method.clone(),
                r.alpha.to_string(),
                r.rejection_rate.to_string(),
                r.repetitions.to_string(),
                r.mean_statistic.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn read_json(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }

    /// Rejection rate of `method` for a case/estimator at the given level.
    pub fn rate(&self, case: &str, estimator: &str, method: &str, alpha: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.case == case && r.estimator == estimator && r.method == method && r.alpha == alpha)
            .map(|r| r.rejection_rate)
    }
}

fn strip_range(config: &Value) -> Value {
    let mut c = config.clone();
    if let Value::Object(map) = &mut c {
        map.remove("repetitions");
        map.remove("rep_offset");
    }
    c
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| CliError::io(path, e))?);
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(rep: u64, stat: f64, rej: bool) -> RepetitionRecord {
        RepetitionRecord {
            case: "H01".into(),
            estimator: "CE2_KDE".into(),
            method: "proposed".into(),
            repetition: rep,
            statistic: stat,
            p_value: 0.5,
            rejections: vec![false, rej],
        }
    }

    fn cfg(reps: u64, offset: u64) -> Value {
        serde_json::json!({"n": 400, "repetitions": reps, "rep_offset": offset})
    }

    #[test]
    fn aggregates_rows() {
        let r = SweepReport::from_records(
            cfg(3, 0),
            vec![0.05, 0.1],
            vec![rec(2, 0.3, true), rec(0, 0.1, false), rec(1, 0.2, true)],
        )
        .unwrap();
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.rows[1].rejection_rate, 2.0 / 3.0);
        assert_eq!(r.rows[0].rejection_rate, 0.0);
        assert!((r.rows[0].mean_statistic - 0.2).abs() < 1e-15);
        assert_eq!(r.records[0].repetition, 0);
        assert_eq!(r.rate("H01", "CE2_KDE", "proposed", 0.1), Some(2.0 / 3.0));
    }

    #[test]
    fn merge_equals_single_run() {
        let all = vec![rec(0, 0.1, false), rec(1, 0.2, true), rec(2, 0.3, true)];
        let whole = SweepReport::from_records(cfg(3, 0), vec![0.05, 0.1], all.clone()).unwrap();
        let a = SweepReport::from_records(cfg(2, 0), vec![0.05, 0.1], all[..2].to_vec()).unwrap();
        let b = SweepReport::from_records(cfg(1, 2), vec![0.05, 0.1], all[2..].to_vec()).unwrap();
        let merged = SweepReport::merge(&b, &a).unwrap();
        assert_eq!(merged, whole);
        assert_eq!(merged.to_csv(), whole.to_csv());
        assert!(SweepReport::merge(&a, &a).is_err());
    }

    #[test]
    fn merge_rejects_different_settings() {
        let a = SweepReport::from_records(cfg(1, 0), vec![0.05, 0.1], vec![rec(0, 0.1, false)]).unwrap();
        let mut other = cfg(1, 1);
        other["n"] = Value::from(100);
        let b = SweepReport::from_records(other, vec![0.05, 0.1], vec![rec(1, 0.1, false)]).unwrap();
        assert!(SweepReport::merge(&a, &b).is_err());
    }
}
