//! Up-front estimate of peak memory for a chain length.

use eth_core::coupled_basis::{allowed_spins, multiplicity};
use eth_core::spectral::triangle_allows;
use eth_core::spin_algebra::HalfInt;
use serde::Serialize;

const F64: f64 = 8.0;

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Dimension of the product-basis sector with `S_z = m`.
pub fn sector_dim(n: usize, m: HalfInt) -> f64 {
    let twice_down = n as i64 - m.twice();
    let down = twice_down / 2;
    if twice_down % 2 != 0 || down < 0 || down as usize > n {
        return 0.0;
    }
    binomial(n as u64, down as u64)
}

#[derive(Clone, Debug, Serialize)]
pub struct MemoryEstimate {
    pub n_qubits: usize,
    /// Eigenvalues and eigenvectors of every block.
    pub spectra: f64,
    /// Coupled basis, projected Hamiltonian and eigensolver workspace of the
    /// largest blocks diagonalized concurrently.
    pub diagonalization: f64,
    /// Eigenstates expanded in the product basis, two sectors.
    pub eigenstates: f64,
    /// Reduced-element tables of one operator of the largest configured rank.
    pub tables: f64,
    pub total: f64,
}

impl MemoryEstimate {
    pub fn new(n: usize, threads: usize, max_rank: HalfInt) -> Self {
        let dims: Vec<(HalfInt, f64)> = allowed_spins(n).into_iter().map(|s| (s, multiplicity(n, s) as f64)).collect();
        let spectra = dims.iter().map(|(_, d)| F64 * (d * d + d)).sum();
        let mut working: Vec<f64> = dims.iter().map(|&(s, d)| F64 * (2.0 * sector_dim(n, s) * d + 3.0 * d * d)).collect();
        working.sort_by(|a, b| b.total_cmp(a));
        let diagonalization = working.iter().take(threads.max(1)).sum();
        let m0 = HalfInt::from_twice(n as i64 % 2);
        let eigenstates = 2.0 * F64 * sector_dim(n, m0).powi(2);
        let tables = dims
            .iter()
            .flat_map(|&(a, da)| dims.iter().filter(move |&&(b, _)| triangle_allows(max_rank, a, b)).map(move |&(_, db)| F64 * da * db))
            .sum();
        let total = spectra + diagonalization + eigenstates + tables;
        MemoryEstimate { n_qubits: n, spectra, diagonalization, eigenstates, tables, total }
    }

    pub fn gib(bytes: f64) -> f64 {
        bytes / (1u64 << 30) as f64
    }

    pub fn describe(&self) -> String {
        format!(
            "estimated peak memory for N = {}: {:.2} GiB (spectra {:.2}, diagonalization {:.2}, eigenstates {:.2}, tables {:.2})",
            self.n_qubits,
            Self::gib(self.total),
            Self::gib(self.spectra),
            Self::gib(self.diagonalization),
            Self::gib(self.eigenstates),
            Self::gib(self.tables)
        )
    }
}
