//! Band data and window statistics of reduced elements.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::{mean_variance, r_squared_direct, Histogram, StatsError};
use crate::spectral::{BlockSpectrum, OperatorTables, ReducedElementTable};
use crate::spin_algebra::HalfInt;

/// Energy-density window with an optional band of `ω = E_α - E_α'` in
/// absolute energy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyWindow {
    pub center: f64,
    pub width: f64,
    #[serde(default)]
    pub omega: Option<(f64, f64)>,
}

impl EnergyWindow {
    pub fn new(center: f64, width: f64) -> Result<Self, StatsError> {
        if width <= 0.0 || !width.is_finite() {
            return Err(StatsError::InvalidWindow(width));
        }
        Ok(EnergyWindow { center, width, omega: None })
    }

    /// Adds the band `|ω - omega_center| <= omega_width / 2`.
    pub fn with_omega(mut self, omega_center: f64, omega_width: f64) -> Result<Self, StatsError> {
        if omega_width <= 0.0 || !omega_width.is_finite() {
            return Err(StatsError::InvalidWindow(omega_width));
        }
        self.omega = Some((omega_center, omega_width));
        Ok(self)
    }

    /// Half-open in energy density: `center - width/2 <= x < center + width/2`.
    pub fn contains(&self, density: f64) -> bool {
        density >= self.center - self.width / 2.0 && density < self.center + self.width / 2.0
    }

    pub fn contains_omega(&self, omega: f64) -> bool {
        self.omega.is_none_or(|(c, w)| (omega - c).abs() <= w / 2.0)
    }
}

/// Normal fit by moments with two goodness measures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    /// Kolmogorov–Smirnov distance to the fitted normal.
    pub ks_statistic: f64,
    /// Asymptotic 5% critical value `1.358 / √n`.
    pub ks_critical: f64,
    pub ks_pass: bool,
    pub bins: usize,
    /// `R²` of the histogram densities against the fitted normal density.
    pub histogram_r2: f64,
}

/// Sturges' rule `⌈log2 n⌉ + 1` unless `bins` is given.
pub fn gaussian_fit(samples: &[f64], bins: Option<usize>) -> Result<GaussianFit, StatsError> {
    let n = samples.len();
    if n < 2 {
        return Err(StatsError::TooFewSamples(n));
    }
    let (mean, variance) = mean_variance(samples);
    let bins = bins.unwrap_or_else(|| (n as f64).log2().ceil() as usize + 1);
    let ks_critical = 1.358 / (n as f64).sqrt();
    if variance <= 0.0 {
        return Ok(GaussianFit { count: n, mean, variance, ks_statistic: 0.0, ks_critical, ks_pass: true, bins, histogram_r2: 1.0 });
    }
    let normal = Normal::new(mean, variance.sqrt()).expect("positive variance");
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let ks_statistic = sorted.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = normal.cdf(x);
        d.max(f - i as f64 / n as f64).max((i + 1) as f64 / n as f64 - f)
    });
    let hist = Histogram::new(&sorted, sorted[0], sorted[n - 1], bins);
    let pdf: Vec<f64> = hist.centers().iter().map(|&x| normal.pdf(x)).collect();
    Ok(GaussianFit {
        count: n,
        mean,
        variance,
        ks_statistic,
        ks_critical,
        ks_pass: ks_statistic < ks_critical,
        bins,
        histogram_r2: r_squared_direct(&hist.densities, &pdf),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    pub energy_density: f64,
    pub value: f64,
}

/// Diagonal reduced elements against `E_α / N` per spin sector, ascending in
/// energy. Sectors whose diagonal table is forbidden are absent.
pub fn band_data(tables: &OperatorTables, blocks: &BTreeMap<HalfInt, BlockSpectrum>) -> BTreeMap<HalfInt, Vec<BandPoint>> {
    let mut out = BTreeMap::new();
    for (s, block) in blocks {
        let Some(table) = tables.get(*s, *s) else { continue };
        let n = block.n_qubits as f64;
        let mut points: Vec<BandPoint> = block
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(a, e)| BandPoint { energy_density: e / n, value: table.elements[(a, a)] })
            .collect();
        points.sort_by(|a, b| a.energy_density.total_cmp(&b.energy_density));
        out.insert(*s, points);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagResidualStats {
    pub s: HalfInt,
    pub window: EnergyWindow,
    /// Window mean of the diagonal elements.
    pub mean: f64,
    pub residuals: Vec<f64>,
    pub variance: f64,
    pub fit: Option<GaussianFit>,
    /// Fewer than 30 elements in the window.
    pub low_stats: bool,
}

fn check_square(table: &ReducedElementTable, spectrum: &BlockSpectrum) -> Result<(), StatsError> {
    let shape = table.elements.shape();
    if shape.0 != shape.1 {
        return Err(StatsError::NotSquare(shape.0, shape.1));
    }
    if shape.0 != spectrum.dim() {
        return Err(StatsError::ShapeMismatch { table: shape, spectra: (spectrum.dim(), spectrum.dim()) });
    }
    Ok(())
}

pub fn diag_residual_stats(
    table: &ReducedElementTable,
    spectrum: &BlockSpectrum,
    window: &EnergyWindow,
) -> Result<DiagResidualStats, StatsError> {
    check_square(table, spectrum)?;
    let n = spectrum.n_qubits as f64;
    let values: Vec<f64> = (0..spectrum.dim())
        .filter(|&a| window.contains(spectrum.eigenvalues[a] / n))
        .map(|a| table.elements[(a, a)])
        .collect();
    if values.is_empty() {
        return Err(StatsError::EmptyWindow(window.center));
    }
    let (mean, variance) = mean_variance(&values);
    let residuals: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let fit = gaussian_fit(&residuals, None).ok();
    Ok(DiagResidualStats { s: spectrum.s, window: *window, mean, variance, fit, low_stats: values.len() < 30, residuals })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffDiagStats {
    pub s_row: HalfInt,
    pub s_col: HalfInt,
    pub window: EnergyWindow,
    pub samples: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    pub fit: Option<GaussianFit>,
    /// Fewer than 100 samples.
    pub low_stats: bool,
}

/// Elements `<α||T||α'>` with both `E_α/N` and `E_α'/N` inside the window and
/// `ω` inside its band. Within one sector only `α < α'` is used, so each pair
/// of a symmetric table counts once.
pub fn offdiag_window_stats(
    table: &ReducedElementTable,
    row: &BlockSpectrum,
    col: &BlockSpectrum,
    window: &EnergyWindow,
) -> Result<OffDiagStats, StatsError> {
    let shape = table.elements.shape();
    if shape != (row.dim(), col.dim()) {
        return Err(StatsError::ShapeMismatch { table: shape, spectra: (row.dim(), col.dim()) });
    }
    let n = row.n_qubits as f64;
    let same = row.s == col.s;
    let rows: Vec<usize> = (0..row.dim()).filter(|&a| window.contains(row.eigenvalues[a] / n)).collect();
    let cols: Vec<usize> = (0..col.dim()).filter(|&b| window.contains(col.eigenvalues[b] / n)).collect();
    let mut samples = Vec::new();
    for &a in &rows {
        for &b in &cols {
            if same && a >= b {
                continue;
            }
            if window.contains_omega(row.eigenvalues[a] - col.eigenvalues[b]) {
                samples.push(table.elements[(a, b)]);
            }
        }
    }
    if samples.is_empty() {
        return Err(StatsError::NoSamples(window.center));
    }
    let (mean, variance) = mean_variance(&samples);
    let fit = gaussian_fit(&samples, None).ok();
    Ok(OffDiagStats { s_row: row.s, s_col: col.s, window: *window, mean, variance, fit, low_stats: samples.len() < 100, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eth_stats::synthetic;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn gaussian_samples_pass_ks() {
        let mut passes = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xs: Vec<f64> = (0..400).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); 0.3 * z + 1.0 }).collect();
            if gaussian_fit(&xs, None).unwrap().ks_pass {
                passes += 1;
            }
        }
        assert!(passes >= 90, "{passes}");
    }

    #[test]
    fn uniform_samples_fail_ks() {
        let xs: Vec<f64> = (0..5000).map(|i| (i as f64 / 5000.0).powi(3)).collect();
        assert!(!gaussian_fit(&xs, None).unwrap().ks_pass);
    }

    #[test]
    fn constant_diagonal() {
        let (table, spectrum) = synthetic::table_from_elements(nalgebra::DMatrix::identity(50, 50), 10, 1.0);
        let w = EnergyWindow::new(0.0, 10.0).unwrap();
        let r = diag_residual_stats(&table, &spectrum, &w).unwrap();
        assert!(r.residuals.iter().all(|&x| x == 0.0));
        assert_eq!(r.variance, 0.0);
        assert!(matches!(offdiag_window_stats(&table, &spectrum, &spectrum, &w).unwrap().variance, v if v == 0.0));
    }

    #[test]
    fn diagonal_only_table_in_tiny_window_has_no_pairs() {
        let (table, spectrum) = synthetic::table_from_elements(nalgebra::DMatrix::identity(20, 20), 10, 1.0);
        // one level inside the window: no α < α' pair
        let e0 = spectrum.eigenvalues[10] / 10.0;
        let w = EnergyWindow::new(e0, 1e-6).unwrap();
        assert!(matches!(offdiag_window_stats(&table, &spectrum, &spectrum, &w), Err(StatsError::NoSamples(_))));
        let far = EnergyWindow::new(100.0, 0.1).unwrap();
        assert!(matches!(diag_residual_stats(&table, &spectrum, &far), Err(StatsError::EmptyWindow(_))));
    }

    #[test]
    fn window_bounds() {
        let w = EnergyWindow::new(0.0, 0.1).unwrap().with_omega(0.0, 1.0).unwrap();
        assert!(w.contains(-0.05) && !w.contains(0.05));
        assert!(w.contains_omega(0.5) && !w.contains_omega(0.6));
        assert!(EnergyWindow::new(0.0, -1.0).is_err());
    }
}
