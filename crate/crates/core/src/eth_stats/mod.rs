//! Eigenstate-thermalization statistics over block spectra and
//! reduced-element tables.

pub mod dos;
pub mod elements;
pub mod fscan;
pub mod levels;
pub mod synthetic;
pub mod variance;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectral::SpectralError;
use crate::spin_algebra::HalfInt;

pub use dos::{DosTable, DosWindow, DOS_CONVENTION};
pub use elements::{band_data, diag_residual_stats, gaussian_fit, offdiag_window_stats, BandPoint, DiagResidualStats, EnergyWindow, GaussianFit, OffDiagStats};
pub use fscan::{f_magnitude, FCell, FScanResult, FScanSpec};
pub use levels::{gap_ratios, gap_ratios_with_bins, p_goe, GapRatioResult};
pub use variance::{variance_ratio, variance_ratio_sector, SectorVarianceRatio, VarianceRatioResult, VarianceSweep, WindowRatio};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("need at least 3 distinct levels, got {0}")]
    TooFewLevels(usize),
    #[error("window width must be positive, got {0}")]
    InvalidWindow(f64),
    #[error("no elements fall inside the window centered at E/N = {0}")]
    EmptyWindow(f64),
    #[error("no off-diagonal samples in the window centered at E/N = {0}")]
    NoSamples(f64),
    #[error("table is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("table shape {table:?} does not match spectra {spectra:?}")]
    ShapeMismatch { table: (usize, usize), spectra: (usize, usize) },
    #[error("every window for s = {s} was skipped ({skipped} below the sample thresholds)")]
    AllWindowsSkipped { s: HalfInt, skipped: usize },
    #[error("no spin-{0} levels")]
    MissingSector(HalfInt),
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Equal-width histogram normalized to unit area.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
    pub densities: Vec<f64>,
}

impl Histogram {
    /// Values outside `[lo, hi]` are ignored; `hi` itself goes to the last bin.
    pub fn new(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        let bins = bins.max(1);
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        for &x in samples {
            if x < lo || x > hi || !x.is_finite() {
                continue;
            }
            let i = if width > 0.0 { (((x - lo) / width) as usize).min(bins - 1) } else { 0 };
            counts[i] += 1;
        }
        let total = samples.len().max(1) as f64;
        let densities = counts.iter().map(|&c| if width > 0.0 { c as f64 / (total * width) } else { 0.0 }).collect();
        Histogram { lo, hi, counts, densities }
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..self.counts.len()).map(|i| self.lo + (i as f64 + 0.5) * w).collect()
    }
}

/// Coefficient of determination of `y` against the fixed prediction `x`.
pub fn r_squared_direct(y: &[f64], prediction: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = y.iter().zip(prediction).map(|(v, p)| (v - p).powi(2)).sum();
    1.0 - ss_res / ss_tot
}

/// `R²` of the least-squares line `y ≈ a + b x`.
pub fn r_squared_linear(y: &[f64], x: &[f64]) -> f64 {
    let n = y.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy * sxy / (sxx * syy)
}

/// Mean and unbiased sample variance.
pub fn mean_variance(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var)
}
