//! Density of states per spin sector at a single magnetic quantum number.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::StatsError;
use crate::spectral::ChainSpectra;
use crate::spin_algebra::HalfInt;

/// Recorded in every output that depends on the DOS normalization.
pub const DOS_CONVENTION: &str =
    "D = (number of spin-s levels at one fixed m inside the window) / (window width in absolute energy); S_th = ln D";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DosWindow {
    /// Window center in energy density `E/N`.
    pub center: f64,
    /// Window width in energy density.
    pub width: f64,
    pub count: usize,
    pub dos: f64,
    /// `ln D`; `-inf` for an empty window.
    pub entropy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DosTable {
    pub n_qubits: usize,
    pub levels: BTreeMap<HalfInt, Vec<f64>>,
}

impl DosTable {
    pub fn from_spectra(spectra: &ChainSpectra) -> Self {
        Self::from_levels(spectra.n_qubits(), spectra.blocks.iter().map(|(s, b)| (*s, b.eigenvalues.clone())))
    }

    pub fn from_levels(n_qubits: usize, levels: impl IntoIterator<Item = (HalfInt, Vec<f64>)>) -> Self {
        let levels = levels
            .into_iter()
            .map(|(s, mut e)| {
                e.sort_by(f64::total_cmp);
                (s, e)
            })
            .collect();
        DosTable { n_qubits, levels }
    }

    pub fn sector(&self, s: HalfInt) -> Result<&[f64], StatsError> {
        self.levels.get(&s).map(Vec::as_slice).ok_or(StatsError::MissingSector(s))
    }

    /// Levels of spin `s` with `lo <= E < hi` (absolute energies).
    pub fn count(&self, s: HalfInt, lo: f64, hi: f64) -> Result<usize, StatsError> {
        let e = self.sector(s)?;
        Ok(e.partition_point(|&x| x < hi) - e.partition_point(|&x| x < lo))
    }

    /// Window given in energy density.
    pub fn window(&self, s: HalfInt, center: f64, width: f64) -> Result<DosWindow, StatsError> {
        if width <= 0.0 || !width.is_finite() {
            return Err(StatsError::InvalidWindow(width));
        }
        let n = self.n_qubits as f64;
        let count = self.count(s, (center - width / 2.0) * n, (center + width / 2.0) * n)?;
        let dos = count as f64 / (width * n);
        Ok(DosWindow { center, width, count, dos, entropy: dos.ln() })
    }

    /// Counts over the partition of the energy-density axis into bins
    /// `[i w, (i+1) w)`, covering every level of the sector. Entries are
    /// `(bin center, count)`.
    pub fn partition(&self, s: HalfInt, width: f64) -> Result<Vec<(f64, usize)>, StatsError> {
        if width <= 0.0 || !width.is_finite() {
            return Err(StatsError::InvalidWindow(width));
        }
        let n = self.n_qubits as f64;
        let mut bins: BTreeMap<i64, usize> = BTreeMap::new();
        for &e in self.sector(s)? {
            *bins.entry((e / n / width).floor() as i64).or_insert(0) += 1;
        }
        Ok(bins.into_iter().map(|(i, c)| ((i as f64 + 0.5) * width, c)).collect())
    }

    /// Energy density of the most populated width-`coarse` bin; the lowest such
    /// bin on ties.
    pub fn peak(&self, s: HalfInt, coarse: f64) -> Result<f64, StatsError> {
        let parts = self.partition(s, coarse)?;
        let best = parts.iter().fold(None::<(f64, usize)>, |acc, &(c, n)| match acc {
            Some((_, m)) if m >= n => acc,
            _ => Some((c, n)),
        });
        best.map(|(c, _)| c).ok_or(StatsError::MissingSector(s))
    }
}
