use std::fmt::Write;

use super::eval::{evaluate, Dehaze, EvalOptions};
use crate::error::Result;
use crate::hazegen::DatasetManifest;
use crate::metrics::EvalReport;
use crate::reference::{ReferenceRow, HSTS, SOURCE_LABEL};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub eval: EvalReport,
    pub reference: &'static [ReferenceRow],
}

impl BenchReport {
    /// Fixed-width table: the measured row first, then the reference rows.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let a = &self.eval.aggregate;
        let psnr = if a.psnr_db.is_infinite() { "inf".to_string() } else { format!("{:.3}", a.psnr_db) };
        writeln!(s, "{:<22} {:>9} {:>7} {:>9}  source", "method", "psnr_db", "ssim", "time_s").unwrap();
        writeln!(
            s,
            "{:<22} {:>9} {:>7.4} {:>9.4}  measured here, {} image(s)",
            "LCA-Net (this build)", psnr, a.ssim, a.time_s, a.count
        )
        .unwrap();
        for r in self.reference {
            let time = r.time_s.map_or("-".to_string(), |t| format!("{t:.4}"));
            writeln!(s, "{:<22} {:>9.3} {:>7.4} {:>9}  {SOURCE_LABEL}", r.method, r.psnr_db, r.ssim, time).unwrap();
        }
        s
    }
}

/// Evaluates `dehazer` over the manifest and pairs the result with the
/// HSTS reference table.
pub fn bench(manifest: &DatasetManifest, dehazer: &impl Dehaze, opts: EvalOptions) -> Result<BenchReport> {
    Ok(BenchReport { eval: evaluate(manifest, dehazer, opts)?, reference: &HSTS })
}
