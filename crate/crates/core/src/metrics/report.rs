use std::fmt::Write as _;

use super::{bd_quality, bd_rate, LabeledCurve, METRIC_PSNR_YUV};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct BdRow {
    pub sequence: String,
    pub metric: String,
    pub bd_rate: f64,
    pub bd_quality: f64,
}

/// Per-sequence deltas plus their means.
#[derive(Clone, Debug, PartialEq)]
pub struct BdReport {
    pub rows: Vec<BdRow>,
    pub overall_rate: f64,
    pub overall_quality: f64,
}

/// Pairs each test curve with the anchor curve of the same sequence and metric.
pub fn bd_report(test: &[LabeledCurve], anchor: &[LabeledCurve]) -> Result<BdReport> {
    let mut rows = Vec::with_capacity(test.len());
    for t in test {
        let a = anchor
            .iter()
            .find(|a| a.key.sequence == t.key.sequence && a.key.metric == t.key.metric)
            .ok_or_else(|| Error::UnmatchedSequence(t.key.sequence.clone()))?;
        rows.push(BdRow {
            sequence: t.key.sequence.clone(),
            metric: t.key.metric.clone(),
            bd_rate: bd_rate(&t.curve, &a.curve)?,
            bd_quality: bd_quality(&t.curve, &a.curve)?,
        });
    }
    if rows.is_empty() {
        return Err(Error::UnmatchedSequence("<no test curves>".into()));
    }
    let n = rows.len() as f64;
    Ok(BdReport {
        overall_rate: rows.iter().map(|r| r.bd_rate).sum::<f64>() / n,
        overall_quality: rows.iter().map(|r| r.bd_quality).sum::<f64>() / n,
        rows,
    })
}

fn quality_label(metric: &str) -> String {
    if metric == METRIC_PSNR_YUV || metric.starts_with("psnr") {
        "BD-PSNR (dB)".into()
    } else {
        format!("BD-{metric}")
    }
}

impl BdReport {
    /// Aligned plain-text table with an `Overall` line.
    pub fn to_text(&self) -> String {
        let qlabel = quality_label(&self.rows[0].metric);
        let w = self.rows.iter().map(|r| r.sequence.len()).chain([8]).max().unwrap_or(8);
        let mut s = String::new();
        let _ = writeln!(s, "{:<w$} | {:>12} | {:>14}", "Sequence", "BD-rate (%)", qlabel);
        let _ = writeln!(s, "{}", "-".repeat(w + 33));
        for r in &self.rows {
            let _ = writeln!(s, "{:<w$} | {:>12.2} | {:>14.3}", r.sequence, r.bd_rate, r.bd_quality);
        }
        let _ = writeln!(s, "{}", "-".repeat(w + 33));
        let _ = writeln!(s, "{:<w$} | {:>12.2} | {:>14.3}", "Overall", self.overall_rate, self.overall_quality);
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("sequence,metric,bd_rate_percent,bd_quality\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{}", r.sequence, r.metric, r.bd_rate, r.bd_quality);
        }
        let _ = writeln!(s, "overall,{},{},{}", self.rows[0].metric, self.overall_rate, self.overall_quality);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::csvio::CurveKey;
    use crate::metrics::{RateQualityCurve, RateQualityPoint};

    fn labeled(codec: &str, seq: &str, scale: f64) -> LabeledCurve {
        let pts = [(1000.0, 30.0), (1900.0, 33.2), (3700.0, 36.1), (7200.0, 38.8)]
            .iter()
            .map(|&(r, q)| RateQualityPoint::new(r * scale, q, METRIC_PSNR_YUV))
            .collect();
        LabeledCurve {
            key: CurveKey { codec: codec.into(), sequence: seq.into(), metric: METRIC_PSNR_YUV.into() },
            curve: RateQualityCurve::new(pts).unwrap(),
        }
    }

    #[test]
    fn identical_and_scaled() {
        let anchor = vec![labeled("m0", "a", 1.0), labeled("m0", "b", 1.0)];
        let same = bd_report(&anchor, &anchor).unwrap();
        assert!(same.rows.iter().all(|r| r.bd_rate == 0.0 && r.bd_quality == 0.0));
        let test = vec![labeled("qmo", "a", 0.9), labeled("qmo", "b", 0.9)];
        let r = bd_report(&test, &anchor).unwrap();
        for row in &r.rows {
            assert!((row.bd_rate + 10.0).abs() < 1e-6);
        }
        assert!((r.overall_rate + 10.0).abs() < 1e-6);
        let text = r.to_text();
        assert!(text.contains("Overall") && text.contains("-10.00"));
        assert!(r.to_csv().starts_with("sequence,metric,bd_rate_percent,bd_quality\n"));
    }

    #[test]
    fn unmatched() {
        let anchor = vec![labeled("m0", "a", 1.0)];
        let test = vec![labeled("qmo", "zzz", 1.0)];
        assert!(matches!(bd_report(&test, &anchor), Err(Error::UnmatchedSequence(s)) if s == "zzz"));
    }
}
