use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{RateQualityCurve, RateQualityPoint};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CurveKey {
    pub codec: String,
    pub sequence: String,
    pub metric: String,
}

impl fmt::Display for CurveKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.codec, self.sequence, self.metric)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledCurve {
    pub key: CurveKey,
    pub curve: RateQualityCurve,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    codec: String,
    sequence: String,
    metric: String,
    qp: Option<u8>,
    rate_bps: f64,
    quality: f64,
}

const HEADER: [&str; 6] = ["codec", "sequence", "metric", "qp", "rate_bps", "quality"];

/// Parses `codec,sequence,metric,qp,rate_bps,quality` rows into curves, in
/// order of first appearance.
pub fn read_rd_csv(reader: impl Read) -> Result<Vec<LabeledCurve>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::MalformedRow { row: 0, msg: e.to_string() })?;
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(Error::MalformedRow { row: 0, msg: format!("expected header {}", HEADER.join(",")) });
    }
    let mut groups: Vec<(CurveKey, Vec<RateQualityPoint>)> = Vec::new();
    for (i, rec) in rdr.deserialize::<Row>().enumerate() {
        let row = i + 1;
        let r = rec.map_err(|e| Error::MalformedRow { row, msg: e.to_string() })?;
        if !(r.rate_bps > 0.0 && r.rate_bps.is_finite()) || !r.quality.is_finite() {
            return Err(Error::MalformedRow { row, msg: format!("rate {} quality {}", r.rate_bps, r.quality) });
        }
        let key = CurveKey { codec: r.codec, sequence: r.sequence, metric: r.metric.clone() };
        let idx = match groups.iter().position(|(k, _)| *k == key) {
            Some(i) => i,
            None => {
                groups.push((key.clone(), Vec::new()));
                groups.len() - 1
            }
        };
        let pts = &mut groups[idx].1;
        if let Some(qp) = r.qp {
            if pts.iter().any(|p| p.qp == Some(qp)) {
                return Err(Error::DuplicatePoint { key: key.to_string(), qp });
            }
        }
        pts.push(RateQualityPoint { rate: r.rate_bps, quality: r.quality, metric_id: r.metric, qp: r.qp });
    }
    groups.into_iter().map(|(key, pts)| Ok(LabeledCurve { key, curve: RateQualityCurve::new(pts)? })).collect()
}

pub fn load_rd_csv(path: &Path) -> Result<Vec<LabeledCurve>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_rd_csv(f)
}

pub fn write_rd_csv_to(writer: impl Write, curves: &[LabeledCurve]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io { path: "<csv>".into(), source: std::io::Error::other(e) };
    for c in curves {
        for p in c.curve.points() {
            w.serialize(Row {
                codec: c.key.codec.clone(),
                sequence: c.key.sequence.clone(),
                metric: c.key.metric.clone(),
                qp: p.qp,
                rate_bps: p.rate,
                quality: p.quality,
            })
            .map_err(io)?;
        }
    }
    if curves.is_empty() {
        w.write_record(HEADER).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

pub fn write_rd_csv(path: &Path, curves: &[LabeledCurve]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_rd_csv_to(f, curves)
}
