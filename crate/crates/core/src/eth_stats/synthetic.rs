//! Random-matrix controls for the statistical routines.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::spectral::{BlockSpectrum, MChoice, ReducedElementTable};
use crate::spin_algebra::HalfInt;

/// GOE sample `(A + Aᵀ)/√2` with i.i.d. standard normal `A`: diagonal
/// variance 2, off-diagonal variance 1.
pub fn goe_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
    (&a + a.transpose()) / 2f64.sqrt()
}

/// Symmetric matrix with every independent entry standard normal, diagonal
/// included.
pub fn iid_symmetric<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let x: f64 = rng.sample(StandardNormal);
            m[(i, j)] = x;
            m[(j, i)] = x;
        }
    }
    m
}

/// Ascending eigenvalues of one GOE sample.
pub fn goe_eigenvalues<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut ev: Vec<f64> = goe_matrix(n, rng).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Wraps a square element matrix as a spin-0 table over a fake spectrum whose
/// energy densities are evenly spaced on `[-span/2, span/2]`.
pub fn table_from_elements(elements: DMatrix<f64>, n_qubits: usize, span: f64) -> (ReducedElementTable, BlockSpectrum) {
    let d = elements.nrows();
    let n = n_qubits as f64;
    let eigenvalues = (0..d)
        .map(|a| if d > 1 { n * span * (a as f64 / (d - 1) as f64 - 0.5) } else { 0.0 })
        .collect();
    let spectrum = BlockSpectrum {
        s: HalfInt::ZERO,
        n_qubits,
        model_fingerprint: "synthetic".into(),
        eigenvalues,
        eigenvectors: DMatrix::identity(d, d),
    };
    let table = ReducedElementTable {
        s_row: HalfInt::ZERO,
        s_col: HalfInt::ZERO,
        rank: HalfInt::ZERO,
        component: HalfInt::ZERO,
        label: "synthetic".into(),
        operator_fingerprint: "synthetic".into(),
        model_fingerprint: "synthetic".into(),
        choice: MChoice { m: HalfInt::ZERO, m_prime: HalfInt::ZERO, q: HalfInt::ZERO, cg: 1.0 },
        elements,
    };
    (table, spectrum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eth_stats::gap_ratios;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn goe_variances() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = goe_matrix(300, &mut rng);
        let diag: f64 = (0..300).map(|i| m[(i, i)].powi(2)).sum::<f64>() / 300.0;
        let mut off = 0.0;
        for i in 0..300 {
            for j in i + 1..300 {
                off += m[(i, j)].powi(2);
            }
        }
        off /= (300 * 299 / 2) as f64;
        assert!((diag - 2.0).abs() < 0.35, "{diag}");
        assert!((off - 1.0).abs() < 0.02, "{off}");
    }

    #[test]
    fn goe_mean_gap_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut ratios = Vec::new();
        for _ in 0..3 {
            let ev = goe_eigenvalues(1000, &mut rng);
            ratios.extend(gap_ratios(&ev).unwrap().ratios);
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!((mean - 0.5307).abs() < 0.01, "{mean}");
    }
}
