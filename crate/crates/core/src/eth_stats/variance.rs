//! Ratio of diagonal to off-diagonal variances over narrow windows.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{mean_variance, DosTable, StatsError};
use crate::spectral::{BlockSpectrum, OperatorTables, ReducedElementTable};
use crate::spin_algebra::HalfInt;

/// Narrow windows of `narrow_width`, stepped by `stride`, that fit inside an
/// encompassing window of `encompassing_width` centered on the sector's DOS
/// peak (or on `center` when given). All widths are in `E/N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceSweep {
    pub narrow_width: f64,
    pub stride: f64,
    pub encompassing_width: f64,
    pub center: Option<f64>,
    pub peak_width: f64,
    pub min_diag: usize,
    pub min_off: usize,
}

impl Default for VarianceSweep {
    fn default() -> Self {
        VarianceSweep { narrow_width: 0.1, stride: 0.05, encompassing_width: 0.5, center: None, peak_width: 0.5, min_diag: 30, min_off: 100 }
    }
}

impl VarianceSweep {
    pub fn centers(&self, around: f64) -> Vec<f64> {
        let span = self.encompassing_width - self.narrow_width;
        let steps = (span / self.stride + 1e-9).floor() as usize;
        let first = around - span / 2.0;
        (0..=steps).map(|i| first + i as f64 * self.stride).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowRatio {
    pub center: f64,
    pub diag_count: usize,
    pub off_count: usize,
    pub var_diag: f64,
    pub var_off: f64,
    /// `None` when the window was skipped.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorVarianceRatio {
    pub s: HalfInt,
    pub center: f64,
    pub mean: f64,
    /// Standard deviation across windows.
    pub std: f64,
    /// `std / √(window count)`.
    pub stderr: f64,
    pub window_count: usize,
    pub skipped: usize,
    pub windows: Vec<WindowRatio>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceRatioResult {
    pub sweep: VarianceSweep,
    pub sectors: Vec<SectorVarianceRatio>,
}

fn window_ratio(table: &ReducedElementTable, spectrum: &BlockSpectrum, center: f64, sweep: &VarianceSweep) -> WindowRatio {
    let n = spectrum.n_qubits as f64;
    let (lo, hi) = ((center - sweep.narrow_width / 2.0) * n, (center + sweep.narrow_width / 2.0) * n);
    let inside: Vec<usize> = (0..spectrum.dim()).filter(|&a| (lo..hi).contains(&spectrum.eigenvalues[a])).collect();
    let diag: Vec<f64> = inside.iter().map(|&a| table.elements[(a, a)]).collect();
    let mut off = Vec::new();
    for (i, &a) in inside.iter().enumerate() {
        for &b in &inside[i + 1..] {
            off.push(table.elements[(a, b)]);
        }
    }
    let (_, var_diag) = mean_variance(&diag);
    let (_, var_off) = mean_variance(&off);
    let ok = diag.len() >= sweep.min_diag && off.len() >= sweep.min_off && var_off > 0.0;
    WindowRatio {
        center,
        diag_count: diag.len(),
        off_count: off.len(),
        var_diag,
        var_off,
        ratio: ok.then(|| var_diag / var_off),
    }
}

pub fn variance_ratio_sector(
    table: &ReducedElementTable,
    spectrum: &BlockSpectrum,
    dos: &DosTable,
    sweep: &VarianceSweep,
) -> Result<SectorVarianceRatio, StatsError> {
    let shape = table.elements.shape();
    if shape != (spectrum.dim(), spectrum.dim()) {
        return Err(StatsError::ShapeMismatch { table: shape, spectra: (spectrum.dim(), spectrum.dim()) });
    }
    let center = match sweep.center {
        Some(c) => c,
        None => dos.peak(spectrum.s, sweep.peak_width)?,
    };
    let windows: Vec<WindowRatio> = sweep.centers(center).into_iter().map(|c| window_ratio(table, spectrum, c, sweep)).collect();
    let ratios: Vec<f64> = windows.iter().filter_map(|w| w.ratio).collect();
    let skipped = windows.len() - ratios.len();
    if ratios.is_empty() {
        return Err(StatsError::AllWindowsSkipped { s: spectrum.s, skipped });
    }
    let (mean, var) = mean_variance(&ratios);
    let std = var.sqrt();
    Ok(SectorVarianceRatio {
        s: spectrum.s,
        center,
        mean,
        std,
        stderr: std / (ratios.len() as f64).sqrt(),
        window_count: ratios.len(),
        skipped,
        windows,
    })
}

/// Per-sector ratios for the requested spins. Sectors where every window is
/// skipped are reported through the error of the first such sector.
pub fn variance_ratio(
    tables: &OperatorTables,
    blocks: &BTreeMap<HalfInt, BlockSpectrum>,
    dos: &DosTable,
    sweep: &VarianceSweep,
    spins: &[HalfInt],
) -> Result<VarianceRatioResult, StatsError> {
    let sectors = spins
        .iter()
        .map(|&s| {
            let table = tables.get(s, s).ok_or(StatsError::MissingSector(s))?;
            let block = blocks.get(&s).ok_or(StatsError::MissingSector(s))?;
            variance_ratio_sector(table, block, dos, sweep)
        })
        .collect::<Result<_, _>>()?;
    Ok(VarianceRatioResult { sweep: sweep.clone(), sectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eth_stats::synthetic::{goe_matrix, iid_symmetric, table_from_elements};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn run(elements: nalgebra::DMatrix<f64>) -> SectorVarianceRatio {
        let (table, spectrum) = table_from_elements(elements, 10, 1.0);
        let dos = DosTable::from_levels(10, [(HalfInt::ZERO, spectrum.eigenvalues.clone())]);
        let sweep = VarianceSweep { center: Some(0.0), ..VarianceSweep::default() };
        variance_ratio_sector(&table, &spectrum, &dos, &sweep).unwrap()
    }

    #[test]
    fn window_centers() {
        let c = VarianceSweep::default().centers(0.0);
        assert_eq!(c.len(), 9);
        assert!((c[0] + 0.2).abs() < 1e-12 && (c[8] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn goe_ratio_is_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = run(goe_matrix(1500, &mut rng));
        assert_eq!(r.window_count, 9);
        assert!((r.mean - 2.0).abs() < 0.2, "{}", r.mean);
    }

    #[test]
    fn iid_ratio_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let r = run(iid_symmetric(1500, &mut rng));
        assert!((r.mean - 1.0).abs() < 0.2, "{}", r.mean);
    }

    #[test]
    fn sparse_sector_skipped() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (table, spectrum) = table_from_elements(goe_matrix(40, &mut rng), 10, 1.0);
        let dos = DosTable::from_levels(10, [(HalfInt::ZERO, spectrum.eigenvalues.clone())]);
        let sweep = VarianceSweep { center: Some(0.0), ..VarianceSweep::default() };
        assert!(matches!(variance_ratio_sector(&table, &spectrum, &dos, &sweep), Err(StatsError::AllWindowsSkipped { .. })));
    }
}
