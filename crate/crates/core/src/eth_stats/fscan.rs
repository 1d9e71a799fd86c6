//! Magnitude of the off-diagonal envelope `|f|(𝓔, 𝓢, ν, ω)`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mean_variance, DosTable, StatsError};
use crate::spectral::{BlockSpectrum, OperatorTables, ReducedElementTable};
use crate::spin_algebra::HalfInt;

/// Cell grid. Mean energies `𝓔 = (E_α + E_α')/2` are binned by windows of
/// `energy_width` in `𝓔/N`; `ω = E_α - E_α'` by bins of `omega_bin_width`
/// centered on multiples of the bin width, up to `|ω| <= omega_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FScanSpec {
    pub energy_width: f64,
    /// Window centers in `𝓔/N`; offsets from the row sector's DOS peak when
    /// `relative_to_peak` is set.
    pub energy_centers: Vec<f64>,
    pub relative_to_peak: bool,
    pub peak_width: f64,
    pub omega_bin_width: f64,
    pub omega_max: f64,
    /// Cells with fewer samples are kept but marked unreliable.
    pub min_count: usize,
}

impl Default for FScanSpec {
    fn default() -> Self {
        FScanSpec {
            energy_width: 0.1,
            energy_centers: vec![0.0],
            relative_to_peak: true,
            peak_width: 0.5,
            omega_bin_width: 0.5,
            omega_max: 12.0,
            min_count: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FCell {
    pub s_row: HalfInt,
    pub s_col: HalfInt,
    /// `𝓢 = (s_α + s_α')/2`.
    pub mean_spin: f64,
    /// `ν = s_α - s_α'`.
    pub nu: HalfInt,
    pub energy_center: f64,
    pub omega_center: f64,
    pub count: usize,
    pub mean: Option<f64>,
    pub variance: Option<f64>,
    pub dos: f64,
    pub f_magnitude: Option<f64>,
    pub reliable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FScanResult {
    pub spec: FScanSpec,
    pub cells: Vec<FCell>,
}

impl FScanResult {
    pub fn cell(&self, s_row: HalfInt, s_col: HalfInt, energy_center: f64, omega: f64) -> Option<&FCell> {
        self.cells.iter().find(|c| {
            c.s_row == s_row
                && c.s_col == s_col
                && (c.energy_center - energy_center).abs() < 1e-9
                && (c.omega_center - omega).abs() <= self.spec.omega_bin_width / 2.0
        })
    }
}

fn scan_table(
    table: &ReducedElementTable,
    row: &BlockSpectrum,
    col: &BlockSpectrum,
    dos: &DosTable,
    spec: &FScanSpec,
) -> Result<Vec<FCell>, StatsError> {
    let n = row.n_qubits as f64;
    let same = row.s == col.s;
    let peak = if spec.relative_to_peak { dos.peak(row.s, spec.peak_width)? } else { 0.0 };
    let max_bin = (spec.omega_max / spec.omega_bin_width).floor() as i64;
    let mut cells = Vec::new();
    for &offset in &spec.energy_centers {
        let center = peak + offset;
        let (lo, hi) = ((center - spec.energy_width / 2.0) * n, (center + spec.energy_width / 2.0) * n);
        let mut bins: BTreeMap<i64, Vec<f64>> = (-max_bin..=max_bin).map(|i| (i, Vec::new())).collect();
        for (a, &ea) in row.eigenvalues.iter().enumerate() {
            for (b, &eb) in col.eigenvalues.iter().enumerate() {
                if same && a == b {
                    continue;
                }
                let mean_e = 0.5 * (ea + eb);
                if mean_e < lo || mean_e >= hi {
                    continue;
                }
                let i = ((ea - eb) / spec.omega_bin_width).round() as i64;
                if let Some(v) = bins.get_mut(&i) {
                    v.push(table.elements[(a, b)]);
                }
            }
        }
        let d_row = dos.window(row.s, center, spec.energy_width)?.dos;
        let d_col = dos.window(col.s, center, spec.energy_width)?.dos;
        let d = if same { d_row } else { (d_row * d_col).sqrt() };
        for (i, samples) in bins {
            let count = samples.len();
            let (mean, variance) = if count >= 2 {
                let (m, v) = mean_variance(&samples);
                (Some(m), Some(v))
            } else {
                (None, None)
            };
            let f_magnitude = variance.filter(|_| d > 0.0).map(|v| (v * d).sqrt());
            cells.push(FCell {
                s_row: row.s,
                s_col: col.s,
                mean_spin: 0.5 * (row.s.value() + col.s.value()),
                nu: row.s - col.s,
                energy_center: center,
                omega_center: i as f64 * spec.omega_bin_width,
                count,
                mean,
                variance,
                dos: d,
                reliable: count >= spec.min_count && f_magnitude.is_some(),
                f_magnitude,
            });
        }
    }
    Ok(cells)
}

/// `|f| = sqrt(var × D)` per cell, with `D` the DOS of the row sector for
/// `ν = 0` and the geometric mean of both sectors' DOS otherwise.
pub fn f_magnitude(
    tables: &OperatorTables,
    blocks: &BTreeMap<HalfInt, BlockSpectrum>,
    dos: &DosTable,
    spec: &FScanSpec,
) -> Result<FScanResult, StatsError> {
    if spec.energy_width <= 0.0 || spec.omega_bin_width <= 0.0 {
        return Err(StatsError::InvalidWindow(spec.energy_width.min(spec.omega_bin_width)));
    }
    let keys: Vec<_> = tables.tables.keys().copied().collect();
    let per_table = keys
        .into_par_iter()
        .map(|(a, b)| {
            let row = blocks.get(&a).ok_or(StatsError::MissingSector(a))?;
            let col = blocks.get(&b).ok_or(StatsError::MissingSector(b))?;
            scan_table(&tables.tables[&(a, b)], row, col, dos, spec)
        })
        .collect::<Result<Vec<_>, StatsError>>()?;
    Ok(FScanResult { spec: spec.clone(), cells: per_table.into_iter().flatten().collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eth_stats::synthetic::{iid_symmetric, table_from_elements};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn synthetic_variance_and_dos() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v: f64 = 0.25;
        let (table, spectrum) = table_from_elements(iid_symmetric(400, &mut rng) * v.sqrt(), 10, 1.0);
        let mut blocks = BTreeMap::new();
        blocks.insert(HalfInt::ZERO, spectrum.clone());
        let dos = DosTable::from_levels(10, [(HalfInt::ZERO, spectrum.eigenvalues.clone())]);
        let mut tables = OperatorTables { label: "x".into(), rank: HalfInt::ZERO, component: HalfInt::ZERO, tables: BTreeMap::new() };
        tables.tables.insert((HalfInt::ZERO, HalfInt::ZERO), table);
        let spec = FScanSpec { relative_to_peak: false, omega_bin_width: 1.0, omega_max: 2.0, ..FScanSpec::default() };
        let result = f_magnitude(&tables, &blocks, &dos, &spec).unwrap();
        assert_eq!(result.cells.len(), 5);
        let cell = result.cell(HalfInt::ZERO, HalfInt::ZERO, 0.0, 0.0).unwrap();
        let d = dos.window(HalfInt::ZERO, 0.0, 0.1).unwrap().dos;
        let expected = (v * d).sqrt();
        let f = cell.f_magnitude.unwrap();
        assert!(cell.reliable);
        assert!((f / expected - 1.0).abs() < 3.0 / (cell.count as f64).sqrt(), "{f} vs {expected}");
        // ordered pairs of a symmetric table: exact reflection symmetry
        let plus = result.cell(HalfInt::ZERO, HalfInt::ZERO, 0.0, 1.0).unwrap();
        let minus = result.cell(HalfInt::ZERO, HalfInt::ZERO, 0.0, -1.0).unwrap();
        assert_eq!(plus.count, minus.count);
        assert!((plus.variance.unwrap() - minus.variance.unwrap()).abs() < 1e-12);
    }
}
