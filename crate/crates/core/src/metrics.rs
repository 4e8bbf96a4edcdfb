//! Image-quality metrics: Shannon entropy, SCNR, and the blank-frame
//! noise-floor coefficient of variation, plus the SISO/MIMO comparison table.

use std::fmt::Write as _;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::imaging::{FrameStack, RdImage};

/// `−Σ pᵢ ln pᵢ` with `pᵢ = xᵢ / Σx`.
pub fn pixel_entropy(pixels: &Array2<f64>) -> Result<f64> {
    let total: f64 = pixels.sum();
    if pixels.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::Degenerate("entropy needs finite non-negative pixels".into()));
    }
    if total <= 0.0 {
        return Err(Error::Degenerate("entropy of an all-zero image".into()));
    }
    let inv = 1.0 / total;
    Ok(-pixels
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| {
            let p = v * inv;
            p * p.ln()
        })
        .sum::<f64>())
}

pub fn image_entropy(img: &RdImage) -> Result<f64> {
    pixel_entropy(&img.pixels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovDefinition {
    /// Mean divided by variance, taken literally.
    #[default]
    MeanOverVariance,
    /// Standard deviation divided by mean.
    Conventional,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseFloorStats {
    pub mean: f64,
    /// Population variance.
    pub variance: f64,
    pub count: usize,
}

impl NoiseFloorStats {
    /// Statistics after dividing every pixel by the mean (mean becomes 1).
    pub fn normalized(&self) -> NoiseFloorStats {
        NoiseFloorStats {
            mean: 1.0,
            variance: self.variance / (self.mean * self.mean),
            count: self.count,
        }
    }

    pub fn cov(&self, def: CovDefinition) -> CovValue {
        match def {
            CovDefinition::MeanOverVariance if self.variance == 0.0 => CovValue {
                value: f64::INFINITY,
                degenerate: true,
            },
            CovDefinition::MeanOverVariance => CovValue {
                value: self.mean / self.variance,
                degenerate: false,
            },
            CovDefinition::Conventional if self.mean == 0.0 => CovValue {
                value: f64::INFINITY,
                degenerate: true,
            },
            CovDefinition::Conventional => CovValue {
                value: self.variance.sqrt() / self.mean,
                degenerate: false,
            },
        }
    }
}

/// A coefficient of variation; `degenerate` marks the `+inf` sentinel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovValue {
    pub value: f64,
    pub degenerate: bool,
}

/// Mean and variance over every pixel of every blank frame.
pub fn noise_floor_stats(blank: &FrameStack) -> Result<NoiseFloorStats> {
    if blank.is_empty() {
        return Err(Error::Empty("noise floor needs at least one blank frame"));
    }
    // two-pass for accuracy
    let count: usize = blank.frames().iter().map(|f| f.pixels.len()).sum();
    let mean = blank.frames().iter().map(|f| f.pixels.sum()).sum::<f64>() / count as f64;
    let variance = blank
        .frames()
        .iter()
        .flat_map(|f| f.pixels.iter())
        .map(|&v| (v - mean) * (v - mean))
        .sum::<f64>()
        / count as f64;
    Ok(NoiseFloorStats { mean, variance, count })
}

pub fn noise_floor_cov(blank: &FrameStack, def: CovDefinition) -> Result<CovValue> {
    Ok(noise_floor_stats(blank)?.cov(def))
}

/// `10·log10(mean power inside mask / mean blank-frame power)`.
pub fn scnr_db(img: &RdImage, mask: &Array2<bool>, blank: &FrameStack) -> Result<f64> {
    if mask.dim() != img.pixels.dim() {
        return Err(Error::DimensionMismatch("mask and image differ in shape".into()));
    }
    let (sum, n) = img
        .pixels
        .iter()
        .zip(mask.iter())
        .filter(|(_, &m)| m)
        .fold((0.0, 0usize), |(s, n), (&v, _)| (s + v, n + 1));
    if n == 0 {
        return Err(Error::Empty("SCNR mask selects no pixels"));
    }
    if blank.is_empty() {
        return Err(Error::Empty("SCNR needs blank frames"));
    }
    let floor = noise_floor_stats(blank)?.mean;
    if floor <= 0.0 {
        return Err(Error::Degenerate("blank frames have zero power".into()));
    }
    Ok(10.0 * (sum / n as f64 / floor).log10())
}

/// Pixels within `db_below_peak` of the image maximum.
pub fn peak_mask(img: &RdImage, db_below_peak: f64) -> Array2<bool> {
    let peak = img.pixels.fold(0.0f64, |m, &v| m.max(v));
    let threshold = peak * 10f64.powf(-db_below_peak / 10.0);
    img.pixels.mapv(|v| peak > 0.0 && v >= threshold)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArrayConfig {
    Siso,
    Mimo,
}

impl ArrayConfig {
    pub fn label(self) -> &'static str {
        match self {
            ArrayConfig::Siso => "SISO",
            ArrayConfig::Mimo => "MIMO",
        }
    }
}

/// Motion-compensation setting a row of the comparison refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    None,
    Coarse,
    Em,
    Pga,
    Ccr,
}

impl Algorithm {
    /// Settings compared in the report, in table order.
    pub const COMPARED: [Algorithm; 4] = [Algorithm::None, Algorithm::Em, Algorithm::Pga, Algorithm::Ccr];

    pub fn id(self) -> &'static str {
        match self {
            Algorithm::None => "none",
            Algorithm::Coarse => "coarse",
            Algorithm::Em => "em",
            Algorithm::Pga => "pga",
            Algorithm::Ccr => "ccr",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::None => "No MOCOMP",
            Algorithm::Coarse => "Coarse only",
            Algorithm::Em => "Entropy minimization",
            Algorithm::Pga => "Phase gradient autofocus",
            Algorithm::Ccr => "Cross-correlation",
        }
    }

    pub fn parse(s: &str) -> Option<Algorithm> {
        match s {
            "none" => Some(Algorithm::None),
            "coarse" => Some(Algorithm::Coarse),
            "em" => Some(Algorithm::Em),
            "pga" => Some(Algorithm::Pga),
            "ccr" => Some(Algorithm::Ccr),
            _ => None,
        }
    }
}

/// Images produced by one (array configuration, algorithm) setting.
#[derive(Debug, Clone)]
pub struct ConfigResult {
    pub array: ArrayConfig,
    pub algorithm: Algorithm,
    pub blank: FrameStack,
    pub frames: FrameStack,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub array: ArrayConfig,
    pub algorithm: Algorithm,
    /// Raw pooled blank-frame statistics.
    pub noise: NoiseFloorStats,
    /// Mean/variance after normalizing the blank-frame mean to 1.
    pub cov_mean_var: CovValue,
    pub cov_conventional: CovValue,
    pub improvement_pct_mean_var: f64,
    pub improvement_pct_conventional: f64,
    pub entropy: Vec<f64>,
    pub scnr_db: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub rows: Vec<ReportRow>,
    /// No target frames contained a target; only noise-floor statistics apply.
    pub degenerate: bool,
}

/// Threshold for the SCNR mask, below each frame's peak.
pub const SCNR_MASK_DB: f64 = 10.0;

fn improvement(none: f64, alg: f64) -> f64 {
    if none.is_finite() && alg.is_finite() && none != 0.0 {
        100.0 * (none - alg) / none
    } else {
        f64::NAN
    }
}

/// Builds the SISO/MIMO x algorithm comparison. `results` must hold the
/// "none" setting for each array configuration that appears.
pub fn comparison_table(results: &[ConfigResult], degenerate: bool) -> Result<MetricsReport> {
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        let noise = noise_floor_stats(&r.blank)?;
        let norm = noise.normalized();
        let (entropy, scnr) = if degenerate {
            (Vec::new(), Vec::new())
        } else {
            let mut entropy = Vec::with_capacity(r.frames.len());
            let mut scnr = Vec::with_capacity(r.frames.len());
            for img in r.frames.frames() {
                entropy.push(image_entropy(img)?);
                scnr.push(scnr_db(img, &peak_mask(img, SCNR_MASK_DB), &r.blank)?);
            }
            (entropy, scnr)
        };
        rows.push(ReportRow {
            array: r.array,
            algorithm: r.algorithm,
            noise,
            cov_mean_var: norm.cov(CovDefinition::MeanOverVariance),
            cov_conventional: norm.cov(CovDefinition::Conventional),
            improvement_pct_mean_var: f64::NAN,
            improvement_pct_conventional: f64::NAN,
            entropy,
            scnr_db: scnr,
        });
    }
    for array in [ArrayConfig::Siso, ArrayConfig::Mimo] {
        if !rows.iter().any(|r| r.array == array) {
            continue;
        }
        let base = rows
            .iter()
            .find(|r| r.array == array && r.algorithm == Algorithm::None)
            .ok_or_else(|| Error::DimensionMismatch(format!("missing {} \"none\" configuration", array.label())))?;
        let (bp, bc) = (base.cov_mean_var.value, base.cov_conventional.value);
        for row in rows.iter_mut().filter(|r| r.array == array) {
            row.improvement_pct_mean_var = improvement(bp, row.cov_mean_var.value);
            row.improvement_pct_conventional = improvement(bc, row.cov_conventional.value);
        }
    }
    Ok(MetricsReport { rows, degenerate })
}

impl MetricsReport {
    pub fn row(&self, array: ArrayConfig, algorithm: Algorithm) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.array == array && r.algorithm == algorithm)
    }

    fn algorithms(&self) -> Vec<Algorithm> {
        let mut algs: Vec<Algorithm> = Vec::new();
        for r in &self.rows {
            if !algs.contains(&r.algorithm) {
                algs.push(r.algorithm);
            }
        }
        algs
    }

    fn cov_table(&self, out: &mut String, title: &str, pick: impl Fn(&ReportRow) -> (CovValue, f64)) {
        let _ = writeln!(out, "{title}");
        let _ = writeln!(
            out,
            "{:<26} | {:>8} | {:>8} | {:>12} | {:>12}",
            "Case", "SISO", "MIMO", "% impr SISO", "% impr MIMO"
        );
        let _ = writeln!(out, "{}", "-".repeat(78));
        for alg in self.algorithms() {
            let cell = |array| {
                self.row(array, alg).map(|r| {
                    let (c, imp) = pick(r);
                    let cov = if c.degenerate {
                        "inf*".to_string()
                    } else {
                        format!("{:.2}", c.value)
                    };
                    let imp = if alg == Algorithm::None || !imp.is_finite() {
                        "-".to_string()
                    } else {
                        format!("{imp:.2}")
                    };
                    (cov, imp)
                })
            };
            let (sc, si) = cell(ArrayConfig::Siso).unwrap_or(("n/a".into(), "-".into()));
            let (mc, mi) = cell(ArrayConfig::Mimo).unwrap_or(("n/a".into(), "-".into()));
            let _ = writeln!(out, "{:<26} | {sc:>8} | {mc:>8} | {si:>12} | {mi:>12}", alg.label());
        }
        out.push('\n');
    }

    /// Aligned plain-text rendering.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        if self.degenerate {
            out.push_str("No target present: noise-floor statistics only.\n\n");
        }
        self.cov_table(
            &mut out,
            "Noise-floor coefficient of variation (mean/variance, blank mean normalized to 1)",
            |r| (r.cov_mean_var, r.improvement_pct_mean_var),
        );
        self.cov_table(&mut out, "Noise-floor coefficient of variation (std/mean)", |r| {
            (r.cov_conventional, r.improvement_pct_conventional)
        });
        out.push_str(
            "Improvement percentages use unrounded CoV values; recomputing them from the\n\
             rounded table entries can differ. inf* marks a zero-variance noise floor.\n",
        );
        if !self.degenerate {
            out.push_str("\nPer-frame image entropy / SCNR (dB)\n");
            for r in &self.rows {
                let _ = write!(out, "{:<4} {:<26}", r.array.label(), r.algorithm.label());
                for (e, s) in r.entropy.iter().zip(&r.scnr_db) {
                    let _ = write!(out, " {e:8.4}/{s:7.2}");
                }
                out.push('\n');
            }
        }
        out.push_str("\nRaw blank-frame statistics (linear power)\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<4} {:<26} mean {:.6e}  variance {:.6e}  pixels {}",
                r.array.label(),
                r.algorithm.label(),
                r.noise.mean,
                r.noise.variance,
                r.noise.count
            );
        }
        out
    }

    pub fn render_csv(&self) -> String {
        let mut out = String::from(
            "array,algorithm,noise_mean,noise_variance,cov_mean_var,cov_conventional,improvement_pct_mean_var,improvement_pct_conventional,entropy,scnr_db\n",
        );
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(";");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:.9e},{:.9e},{:.6},{:.6},{:.4},{:.4},{},{}",
                r.array.label(),
                r.algorithm.id(),
                r.noise.mean,
                r.noise.variance,
                r.cov_mean_var.value,
                r.cov_conventional.value,
                r.improvement_pct_mean_var,
                r.improvement_pct_conventional,
                join(&r.entropy),
                join(&r.scnr_db)
            );
        }
        out
    }
}
