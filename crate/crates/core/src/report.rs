//! Two-sided estimate records shared by every experiment.

use std::io::Write;

use serde::Serialize;

use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub id: String,
    pub lhs: f64,
    /// Labeled right-hand side components; the right side is their sum.
    pub rhs: Vec<(String, f64)>,
    pub r: f64,
    pub big_r: f64,
    pub ratio: f64,
    pub m: usize,
    pub fingerprint: String,
    /// Extra diagnostics (e.g. the normalization used).
    pub notes: Vec<(String, f64)>,
}

impl EstimateReport {
    /// Builds a report; `lhs > 0` against a vanishing right side is an error.
    pub fn new(
        id: &str,
        lhs: f64,
        rhs: Vec<(String, f64)>,
        radii: (f64, f64),
        m: usize,
        fingerprint: String,
    ) -> Result<Self> {
        if let Some((label, v)) = rhs.iter().find(|(_, v)| !(*v >= 0.0) || !v.is_finite()) {
            return Err(LabError::UndefinedRatio(format!("component {label} = {v}")));
        }
        let total: f64 = rhs.iter().map(|(_, v)| v).sum();
        let ratio = if lhs == 0.0 {
            0.0
        } else if total > 0.0 {
            lhs / total
        } else {
            return Err(LabError::UndefinedRatio(format!(
                "{id}: left side {lhs} against a vanishing right side"
            )));
        };
        Ok(EstimateReport {
            id: id.to_string(),
            lhs,
            rhs,
            r: radii.0,
            big_r: radii.1,
            ratio,
            m,
            fingerprint,
            notes: Vec::new(),
        })
    }

    pub fn with_note(mut self, label: &str, value: f64) -> Self {
        self.notes.push((label.to_string(), value));
        self
    }

    pub fn rhs_total(&self) -> f64 {
        self.rhs.iter().map(|(_, v)| v).sum()
    }

    pub fn component(&self, label: &str) -> Option<f64> {
        self.rhs.iter().find(|(l, _)| l == label).map(|(_, v)| *v)
    }

    pub fn note(&self, label: &str) -> Option<f64> {
        self.notes.iter().find(|(l, _)| l == label).map(|(_, v)| *v)
    }

    pub const CSV_HEADER: [&'static str; 9] = ["id", "m", "r", "R", "lhs", "rhs", "ratio", "components", "fingerprint"];

    pub fn csv_record(&self) -> Vec<String> {
        let comps = self
            .rhs
            .iter()
            .map(|(l, v)| format!("{l}={v:e}"))
            .collect::<Vec<_>>()
            .join(";");
        vec![
            self.id.clone(),
            self.m.to_string(),
            self.r.to_string(),
            self.big_r.to_string(),
            format!("{:e}", self.lhs),
            format!("{:e}", self.rhs_total()),
            format!("{:e}", self.ratio),
            comps,
            self.fingerprint.clone(),
        ]
    }
}

pub fn write_reports_csv(reports: &[EstimateReport], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(EstimateReport::CSV_HEADER)?;
    for r in reports {
        out.write_record(r.csv_record())?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_rules() {
        let ok = EstimateReport::new("t", 1.0, vec![("a".into(), 1.0), ("b".into(), 3.0)], (0.5, 1.0), 9, "x".into())
            .unwrap();
        assert_eq!(ok.ratio, 0.25);
        let zero = EstimateReport::new("t", 0.0, vec![("a".into(), 0.0)], (0.5, 1.0), 9, "x".into()).unwrap();
        assert_eq!(zero.ratio, 0.0);
        assert!(EstimateReport::new("t", 1.0, vec![("a".into(), 0.0)], (0.5, 1.0), 9, "x".into()).is_err());
        assert!(EstimateReport::new("t", 1.0, vec![("a".into(), -1.0)], (0.5, 1.0), 9, "x".into()).is_err());
    }

    #[test]
    fn csv_is_stable() {
        let r = EstimateReport::new("t", 0.5, vec![("a".into(), 2.0)], (0.5, 1.0), 9, "ab".into()).unwrap();
        let mut buf = Vec::new();
        write_reports_csv(&[r.clone(), r], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().starts_with("t,9,0.5,1,5e-1,2e0,2.5e-1,a=2e0,ab"));
    }
}
