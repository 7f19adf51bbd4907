//! Published benchmark scores on the RESIDE test sets. These are static
//! constants shown next to measured numbers; nothing here is recomputed.

/// Label attached to every reference row in reports.
pub const SOURCE_LABEL: &str = "paper-reported, different hardware";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceRow {
    pub method: &'static str,
    pub psnr_db: f64,
    pub ssim: f64,
    /// Seconds per image; only reported for HSTS.
    pub time_s: Option<f64>,
}

const fn row(method: &'static str, psnr_db: f64, ssim: f64, time_s: Option<f64>) -> ReferenceRow {
    ReferenceRow { method, psnr_db, ssim, time_s }
}

/// Synthetic hazy images from HSTS.
pub const HSTS: [ReferenceRow; 10] = [
    row("DCP", 14.84, 0.7609, Some(1.62)),
    row("FVR", 14.48, 0.7624, Some(6.79)),
    row("BCCR", 15.08, 0.7382, Some(3.85)),
    row("GRM", 18.54, 0.8184, Some(83.96)),
    row("NLD", 18.92, 0.7411, Some(9.89)),
    row("DehazeNet", 24.48, 0.9153, Some(2.51)),
    row("MSCNN", 18.64, 0.8168, Some(2.60)),
    row("AOD-Net", 20.55, 0.8973, Some(0.65)),
    row("CAE", 20.08, 0.8169, Some(1.13)),
    row("LCA-Net", 24.734, 0.8951, Some(0.3546)),
];

/// SOTS indoor.
pub const SOTS_INDOOR: [ReferenceRow; 10] = [
    row("DCP", 16.62, 0.8179, None),
    row("FVR", 15.72, 0.7483, None),
    row("BCCR", 16.88, 0.7913, None),
    row("GRM", 18.86, 0.8553, None),
    row("NLD", 17.29, 0.7489, None),
    row("DehazeNet", 21.14, 0.8472, None),
    row("MSCNN", 17.57, 0.8102, None),
    row("AOD-Net", 19.06, 0.8504, None),
    row("CAE", 24.56, 0.9126, None),
    row("LCA-Net", 18.23, 0.7808, None),
];

/// SOTS outdoor.
pub const SOTS_OUTDOOR: [ReferenceRow; 9] = [
    row("DCP", 18.54, 0.71, None),
    row("FVR", 16.61, 0.7236, None),
    row("BCCR", 17.71, 0.7409, None),
    row("GRM", 20.77, 0.7617, None),
    row("NLD", 19.52, 0.7328, None),
    row("DehazeNet", 26.84, 0.8264, None),
    row("MSCNN", 21.73, 0.8313, None),
    row("AOD-Net", 24.08, 0.8726, None),
    row("LCA-Net", 23.37, 0.8763, None),
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lca_net_rows() {
        let hsts = HSTS.iter().find(|r| r.method == "LCA-Net").unwrap();
        assert_eq!((hsts.psnr_db, hsts.ssim, hsts.time_s), (24.734, 0.8951, Some(0.3546)));
        assert_eq!(SOTS_INDOOR[9].psnr_db, 18.23);
        assert_eq!(SOTS_OUTDOOR[8].ssim, 0.8763);
        // Fastest method on HSTS.
        assert!(HSTS.iter().all(|r| r.time_s.unwrap() >= 0.3546));
    }
}
