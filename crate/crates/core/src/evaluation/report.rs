//! Metric reports: JSON lines plus a plain-text table.

use serde::{Deserialize, Serialize};

pub const REPORT_VERSION: &str = concat!("jm3d-", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub record: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
}

impl ReportHeader {
    pub fn new(config_hash: impl Into<String>, seed: u64) -> Self {
        Self {
            record: "header".into(),
            version: REPORT_VERSION.into(),
            config_hash: config_hash.into(),
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub set: String,
    pub k: usize,
    pub accuracy: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub checkpoint: String,
}

/// Header line followed by one line per metric.
pub fn to_jsonl(header: &ReportHeader, records: &[MetricRecord]) -> String {
    let mut out = serde_json::to_string(header).expect("header serializes");
    out.push('\n');
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn to_table(records: &[MetricRecord]) -> String {
    let w = records.iter().map(|r| r.set.len()).max().unwrap_or(3).max(3);
    let mut out = format!("{:<w$}  {:>3}  {:>8}  {:>9}\n", "set", "k", "accuracy", "n_samples");
    for r in records {
        out.push_str(&format!(
            "{:<w$}  {:>3}  {:>7.2}%  {:>9}\n",
            r.set,
            r.k,
            100.0 * r.accuracy,
            r.n_samples
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_layout() {
        let h = ReportHeader::new("abc", 3);
        let r = MetricRecord {
            set: "All".into(),
            k: 1,
            accuracy: 0.5,
            n_samples: 4,
            seed: 3,
            checkpoint: "m.ckpt".into(),
        };
        let text = to_jsonl(&h, std::slice::from_ref(&r));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].contains("\"config_hash\":\"abc\""));
        let back: MetricRecord = serde_json::from_str(lines[1]).unwrap();
        assert_eq!(back, r);
        assert!(to_table(&[r]).contains("50.00%"));
    }
}
