//! Rate-quality curves, Bjøntegaard deltas and their CSV/text I/O.

mod csvio;
mod pchip;
mod report;

pub use csvio::{load_rd_csv, read_rd_csv, write_rd_csv, write_rd_csv_to, CurveKey, LabeledCurve};
pub use pchip::Pchip;
pub use report::{bd_report, BdReport, BdRow};

use crate::error::{Error, Result};

pub const METRIC_PSNR_YUV: &str = "psnr_yuv";

#[derive(Clone, Debug, PartialEq)]
pub struct RateQualityPoint {
    /// Bits per second.
    pub rate: f64,
    pub quality: f64,
    pub metric_id: String,
    /// Base QP the point was produced at, when known.
    pub qp: Option<u8>,
}

impl RateQualityPoint {
    pub fn new(rate: f64, quality: f64, metric_id: impl Into<String>) -> Self {
        RateQualityPoint { rate, quality, metric_id: metric_id.into(), qp: None }
    }

    pub fn with_qp(mut self, qp: u8) -> Self {
        self.qp = Some(qp);
        self
    }
}

/// At least three points of one metric, strictly increasing in rate.
#[derive(Clone, Debug, PartialEq)]
pub struct RateQualityCurve {
    points: Vec<RateQualityPoint>,
    metric_id: String,
}

impl RateQualityCurve {
    pub fn new(mut points: Vec<RateQualityPoint>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::TooFewPoints(points.len()));
        }
        let metric_id = points[0].metric_id.clone();
        for p in &points {
            if p.metric_id != metric_id {
                return Err(Error::MetricMismatch(metric_id, p.metric_id.clone()));
            }
            if !(p.rate > 0.0 && p.rate.is_finite()) || !p.quality.is_finite() {
                return Err(Error::InvalidCurve(format!("point rate {} quality {}", p.rate, p.quality)));
            }
        }
        points.sort_by(|a, b| a.rate.total_cmp(&b.rate));
        if points.windows(2).any(|w| w[1].rate <= w[0].rate) {
            return Err(Error::InvalidCurve("rates must be distinct".into()));
        }
        Ok(RateQualityCurve { points, metric_id })
    }

    pub fn points(&self) -> &[RateQualityPoint] {
        &self.points
    }

    pub fn metric_id(&self) -> &str {
        &self.metric_id
    }

    pub fn scale_rates(&self, factor: f64) -> Result<Self> {
        Self::new(self.points.iter().map(|p| RateQualityPoint { rate: p.rate * factor, ..p.clone() }).collect())
    }

    /// log10(rate) as a function of quality.
    pub fn log_rate_of_quality(&self) -> Result<Pchip> {
        let mut pts: Vec<(f64, f64)> = self.points.iter().map(|p| (p.quality, p.rate.log10())).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        Pchip::new(pts.iter().map(|p| p.0).collect(), pts.iter().map(|p| p.1).collect())
    }

    /// Quality as a function of log10(rate).
    pub fn quality_of_log_rate(&self) -> Result<Pchip> {
        Pchip::new(self.points.iter().map(|p| p.rate.log10()).collect(), self.points.iter().map(|p| p.quality).collect())
    }
}

fn overlap(a: (f64, f64), b: (f64, f64), what: &str) -> Result<(f64, f64)> {
    let lo = a.0.max(b.0);
    let hi = a.1.min(b.1);
    if hi > lo {
        Ok((lo, hi))
    } else {
        Err(Error::NoOverlap(format!("{what} ranges [{}, {}] and [{}, {}]", a.0, a.1, b.0, b.1)))
    }
}

fn same_metric(test: &RateQualityCurve, anchor: &RateQualityCurve) -> Result<()> {
    if test.metric_id == anchor.metric_id {
        Ok(())
    } else {
        Err(Error::MetricMismatch(test.metric_id.clone(), anchor.metric_id.clone()))
    }
}

/// Average bitrate difference of `test` against `anchor` at equal quality, in percent.
pub fn bd_rate(test: &RateQualityCurve, anchor: &RateQualityCurve) -> Result<f64> {
    same_metric(test, anchor)?;
    let (pt, pa) = (test.log_rate_of_quality()?, anchor.log_rate_of_quality()?);
    let (lo, hi) = overlap(pt.domain(), pa.domain(), "quality")?;
    let mean = (pt.integrate(lo, hi)? - pa.integrate(lo, hi)?) / (hi - lo);
    Ok((10f64.powf(mean) - 1.0) * 100.0)
}

/// Average quality difference of `test` against `anchor` at equal rate.
pub fn bd_quality(test: &RateQualityCurve, anchor: &RateQualityCurve) -> Result<f64> {
    same_metric(test, anchor)?;
    let (pt, pa) = (test.quality_of_log_rate()?, anchor.quality_of_log_rate()?);
    let (lo, hi) = overlap(pt.domain(), pa.domain(), "log-rate")?;
    Ok((pt.integrate(lo, hi)? - pa.integrate(lo, hi)?) / (hi - lo))
}
