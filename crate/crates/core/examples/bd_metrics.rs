//! Bjøntegaard deltas between two rate-quality curves, plus the CSV round
//! trip used by the `bd` command.

use paracodec::metrics::{bd_quality, bd_rate, bd_report, read_rd_csv, write_rd_csv_to, CurveKey, LabeledCurve, RateQualityCurve, RateQualityPoint};

fn curve(points: &[(f64, f64)]) -> RateQualityCurve {
    RateQualityCurve::new(points.iter().map(|&(r, q)| RateQualityPoint::new(r, q, "psnr_yuv")).collect()).unwrap()
}

fn main() -> paracodec::Result<()> {
    let anchor = curve(&[(1000.0, 32.0), (1800.0, 35.0), (3200.0, 38.0), (6000.0, 41.0)]);
    let test = curve(&[(900.0, 32.4), (1600.0, 35.3), (2900.0, 38.2), (5400.0, 41.1)]);
    println!("BD-rate {:+.3}%  BD-PSNR {:+.3} dB", bd_rate(&test, &anchor)?, bd_quality(&test, &anchor)?);

    let scaled = anchor.scale_rates(0.9)?;
    println!("anchor with 10% fewer bits: BD-rate {:+.6}%", bd_rate(&scaled, &anchor)?);

    let key = |codec: &str| CurveKey { codec: codec.into(), sequence: "demo".into(), metric: "psnr_yuv".into() };
    let mut csv = Vec::new();
    write_rd_csv_to(&mut csv, &[LabeledCurve { key: key("anchor"), curve: anchor }, LabeledCurve { key: key("test"), curve: test }])?;
    print!("{}", String::from_utf8_lossy(&csv));
    let curves = read_rd_csv(csv.as_slice())?;
    let (a, t): (Vec<_>, Vec<_>) = curves.into_iter().partition(|c| c.key.codec == "anchor");
    print!("{}", bd_report(&t, &a)?.to_text());
    Ok(())
}
