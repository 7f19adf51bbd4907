//! Evaluation reports as CSV (`image,psnr_db,ssim,time_s` plus a `mean`
//! row) or JSON with the same fields. Infinite PSNR is written as `inf`.

use std::io::Write;
use std::path::Path;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRecord {
    pub image: String,
    #[serde(serialize_with = "psnr_field")]
    pub psnr_db: f64,
    pub ssim: f64,
    pub time_s: f64,
}

/// Means over a set of records. `psnr_db` averages the finite values;
/// `infinite_psnr` counts the rest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSummary {
    pub count: usize,
    #[serde(serialize_with = "psnr_field")]
    pub psnr_db: f64,
    pub infinite_psnr: usize,
    pub ssim: f64,
    pub time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub records: Vec<EvalRecord>,
    pub aggregate: EvalSummary,
}

fn psnr_text(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{v:.4}")
    }
}

fn psnr_field<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(&psnr_text(*v))
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

impl EvalSummary {
    pub fn of(records: &[EvalRecord]) -> Self {
        let infinite_psnr = records.iter().filter(|r| r.psnr_db.is_infinite()).count();
        let psnr_db = if infinite_psnr == records.len() && !records.is_empty() {
            f64::INFINITY
        } else {
            mean(records.iter().map(|r| r.psnr_db).filter(|p| p.is_finite()))
        };
        EvalSummary {
            count: records.len(),
            psnr_db,
            infinite_psnr,
            ssim: mean(records.iter().map(|r| r.ssim)),
            time_s: mean(records.iter().map(|r| r.time_s)),
        }
    }
}

impl EvalReport {
    pub fn new(records: Vec<EvalRecord>) -> Self {
        let aggregate = EvalSummary::of(&records);
        EvalReport { records, aggregate }
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Config(format!("csv: {e}"));
        w.write_record(["image", "psnr_db", "ssim", "time_s"]).map_err(csv_err)?;
        let mut row = |image: &str, psnr: f64, ssim: f64, time: f64| {
            w.write_record([image.to_string(), psnr_text(psnr), format!("{ssim:.6}"), format!("{time:.6}")])
        };
        for r in &self.records {
            row(&r.image, r.psnr_db, r.ssim, r.time_s).map_err(csv_err)?;
        }
        let a = &self.aggregate;
        row("mean", a.psnr_db, a.ssim, a.time_s).map_err(csv_err)?;
        w.flush().map_err(|e| Error::Config(format!("csv: {e}")))
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// Writes CSV, or JSON when `json` is set.
    pub fn write(&self, path: impl AsRef<Path>, json: bool) -> Result<()> {
        let path = path.as_ref();
        let text = if json { self.to_json() } else { self.to_csv() };
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(image: &str, psnr_db: f64, ssim: f64, time_s: f64) -> EvalRecord {
        EvalRecord { image: image.into(), psnr_db, ssim, time_s }
    }

    #[test]
    fn csv_layout() {
        let r = EvalReport::new(vec![rec("a.ppm", 20.0, 0.5, 0.1), rec("b.ppm", 30.0, 0.7, 0.3)]);
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "image,psnr_db,ssim,time_s");
        assert_eq!(lines[3], "mean,25.0000,0.600000,0.200000");
    }

    #[test]
    fn infinite_psnr_is_marked() {
        let r = EvalReport::new(vec![rec("same", f64::INFINITY, 1.0, 0.0), rec("x", 10.0, 0.2, 0.0)]);
        assert_eq!(r.aggregate.psnr_db, 10.0);
        assert_eq!(r.aggregate.infinite_psnr, 1);
        assert!(r.to_csv().lines().nth(1).unwrap().starts_with("same,inf,"));
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["records"][0]["psnr_db"], "inf");
        assert_eq!(v["aggregate"]["count"], 2);

        let all = EvalSummary::of(&[rec("a", f64::INFINITY, 1.0, 0.0)]);
        assert_eq!(all.psnr_db, f64::INFINITY);
    }

    #[test]
    fn mean_time_is_arithmetic_mean() {
        let times = [0.1, 0.25, 0.4, 0.05];
        let recs: Vec<_> = times.iter().map(|&t| rec("i", 1.0, 0.0, t)).collect();
        assert!((EvalSummary::of(&recs).time_s - 0.2).abs() < 1e-15);
    }
}
