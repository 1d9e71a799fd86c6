//! Structural invariants of the basis, the model and the block spectra.

use nalgebra::{DMatrix, SymmetricEigen};

use super::{ConsistencyError, IdentityReport, Tolerance};
use crate::coupled_basis::{allowed_spins, coupled_basis_matrix, MagnetizationSector};
use crate::model_ops::{build_hamiltonian, total_spin, ModelSpec, PauliStringOperator, SpinComponent, TensorFamily, TensorOpSpec};
use crate::spectral::{block_matrix, matrix_elements, ChainSpectra, StateBank};
use crate::spin_algebra::HalfInt;

fn projections_of_chain(n: usize) -> impl Iterator<Item = HalfInt> {
    HalfInt::from_twice(n as i64).projections()
}

/// Full dense spectrum against the union of block spectra with multiplicity.
pub fn check_exact_oracle(model: &ModelSpec) -> Result<IdentityReport, ConsistencyError> {
    let dense = build_hamiltonian(model)?.materialize()?.to_dense();
    let mut full: Vec<f64> = SymmetricEigen::new(dense).eigenvalues.iter().copied().collect();
    full.sort_by(f64::total_cmp);
    let blocks = ChainSpectra::compute(model)?.full_spectrum();
    if blocks.len() != full.len() {
        return Err(ConsistencyError::Invalid(format!("{} block levels vs {} dense levels", blocks.len(), full.len())));
    }
    let dev = full.iter().zip(&blocks).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(IdentityReport::new("exact_oracle", format!("N={}", model.n_qubits), dev, dev, Tolerance::abs(1e-9)))
}

/// Gram matrices of the coupled basis within every `(s, m)`.
pub fn check_basis_orthonormality(n: usize) -> Result<IdentityReport, ConsistencyError> {
    let mut dev: f64 = 0.0;
    for m in projections_of_chain(n) {
        let sector = MagnetizationSector::new(n, m)?;
        for s in allowed_spins(n).into_iter().filter(|s| s.admits_projection(m)) {
            let u = coupled_basis_matrix(&sector, s)?;
            let gram = u.tr_mul(&u) - DMatrix::identity(u.ncols(), u.ncols());
            dev = dev.max(gram.amax());
        }
    }
    Ok(IdentityReport::new("basis_orthonormality", format!("N={n}"), dev, dev, Tolerance::abs(1e-10)))
}

/// `S² = S_z² + (S_+ S_- + S_- S_+)/2` in spin units.
pub fn total_spin_squared(n: usize) -> Result<PauliStringOperator, ConsistencyError> {
    let sz = total_spin(n, SpinComponent::Z);
    let sp = total_spin(n, SpinComponent::Plus);
    let sm = total_spin(n, SpinComponent::Minus);
    let ladder = sp.product(&sm)?.sum(&sm.product(&sp)?)?.scaled(0.5);
    Ok(sz.product(&sz)?.sum(&ladder)?.with_hermitian(true))
}

/// Residuals of `S² v = s(s+1) v` and `S_z v = m v` over the coupled basis.
pub fn check_eigen_relations(n: usize) -> Result<IdentityReport, ConsistencyError> {
    let s2 = total_spin_squared(n)?;
    let sz = total_spin(n, SpinComponent::Z);
    let mut dev: f64 = 0.0;
    for m in projections_of_chain(n) {
        let sector = MagnetizationSector::new(n, m)?;
        let s2_sec = s2.materialize_sector(&sector, &sector)?;
        let sz_sec = sz.materialize_sector(&sector, &sector)?;
        for s in allowed_spins(n).into_iter().filter(|s| s.admits_projection(m)) {
            let u = coupled_basis_matrix(&sector, s)?;
            let sv = s.value();
            for col in 0..u.ncols() {
                let v = u.column(col);
                let r1 = s2_sec.matvec(v.as_slice());
                let r2 = sz_sec.matvec(v.as_slice());
                let e1: f64 = r1.iter().zip(v.iter()).map(|(a, b)| (a - sv * (sv + 1.0) * b).powi(2)).sum();
                let e2: f64 = r2.iter().zip(v.iter()).map(|(a, b)| (a - m.value() * b).powi(2)).sum();
                dev = dev.max(e1.sqrt()).max(e2.sqrt());
            }
        }
    }
    Ok(IdentityReport::new("eigen_relations", format!("N={n}"), dev, dev, Tolerance::abs(1e-10)))
}

/// `S_- |s, m, path> = √(s(s+1) - m(m-1)) |s, m-1, path>`.
pub fn check_ladder(n: usize) -> Result<IdentityReport, ConsistencyError> {
    let sm = total_spin(n, SpinComponent::Minus);
    let mut dev: f64 = 0.0;
    let ms: Vec<HalfInt> = projections_of_chain(n).collect();
    for pair in ms.windows(2) {
        let (lower, upper) = (pair[0], pair[1]);
        let from = MagnetizationSector::new(n, upper)?;
        let to = MagnetizationSector::new(n, lower)?;
        let op = sm.materialize_sector(&from, &to)?;
        for s in allowed_spins(n).into_iter().filter(|s| s.admits_projection(upper) && s.admits_projection(lower)) {
            let (sv, mv) = (s.value(), upper.value());
            let c = (sv * (sv + 1.0) - mv * (mv - 1.0)).sqrt();
            let lhs = op.mul_dense(&coupled_basis_matrix(&from, s)?);
            let rhs = coupled_basis_matrix(&to, s)? * c;
            dev = dev.max((lhs - rhs).amax());
        }
    }
    Ok(IdentityReport::new("ladder_consistency", format!("N={n}"), dev, dev, Tolerance::abs(1e-10)))
}

/// `[H, S_a] = 0` for `a = x, y, z`. The `y` component is checked through the
/// real operator `S_+ - S_-`, since `S_y = -i (S_+ - S_-)/2`.
pub fn check_charge_conservation(model: &ModelSpec) -> Result<IdentityReport, ConsistencyError> {
    let n = model.n_qubits;
    let h = build_hamiltonian(model)?.materialize()?;
    let y_like = total_spin(n, SpinComponent::Plus).sum(&total_spin(n, SpinComponent::Minus).scaled(-1.0))?;
    let mut dev: f64 = 0.0;
    for charge in [total_spin(n, SpinComponent::X), y_like, total_spin(n, SpinComponent::Z)] {
        dev = dev.max(h.commutator(&charge.materialize()?).max_abs());
    }
    Ok(IdentityReport::new("charge_conservation", format!("N={n} {:?}", model.boundary), dev, dev, Tolerance::abs(1e-12)))
}

/// Spherical-tensor commutators of every component of a family:
/// `[S_z, T_q] = q T_q` and `[S_±, T_q] = √((k∓q)(k±q+1)) T_{q±1}`.
pub fn check_tensor_commutators(family: &TensorFamily) -> Result<IdentityReport, ConsistencyError> {
    let n = family.n_qubits();
    let sz = total_spin(n, SpinComponent::Z).materialize()?;
    let sp = total_spin(n, SpinComponent::Plus).materialize()?;
    let sm = total_spin(n, SpinComponent::Minus).materialize()?;
    let k = family.rank.value();
    let mut dev: f64 = 0.0;
    let dim = 1usize << n;
    let zero = crate::sparse::SparseMatrix::zeros(dim, dim);
    let mat = |q: HalfInt| -> Result<crate::sparse::SparseMatrix, ConsistencyError> {
        match family.component(q) {
            Some(t) => Ok(t.definition.materialize()?),
            None => Ok(zero.clone()),
        }
    };
    for t in &family.components {
        let q = t.component;
        let tq = t.definition.materialize()?;
        let qv = q.value();
        dev = dev.max(sz.commutator(&tq).linear_combination(1.0, &tq, -qv).max_abs());
        let up = ((k - qv) * (k + qv + 1.0)).sqrt();
        dev = dev.max(sp.commutator(&tq).linear_combination(1.0, &mat(q + HalfInt::ONE)?, -up).max_abs());
        let down = ((k + qv) * (k - qv + 1.0)).sqrt();
        dev = dev.max(sm.commutator(&tq).linear_combination(1.0, &mat(q - HalfInt::ONE)?, -down).max_abs());
    }
    let instance = format!("N={n} family={} rank={}", family.components[0].label, family.rank);
    Ok(IdentityReport::new("tensor_commutators", instance, dev, dev, Tolerance::abs(1e-10)))
}

/// Block matrices at every `m` against the `m = s` block.
pub fn check_block_m_independence(model: &ModelSpec) -> Result<IdentityReport, ConsistencyError> {
    let h = build_hamiltonian(model)?;
    let spectra = ChainSpectra::compute(model)?;
    let bandwidth = spectra.bandwidth().max(1.0);
    let mut dev: f64 = 0.0;
    for s in spectra.spins() {
        let reference = block_matrix(&h, s, s)?;
        for m in s.projections() {
            dev = dev.max((block_matrix(&h, s, m)? - &reference).amax());
        }
    }
    Ok(IdentityReport::new("block_m_independence", format!("N={}", model.n_qubits), dev, dev / bandwidth, Tolerance { abs: 1e-10, rel: 1e-9 }))
}

/// `Σ_s (2s+1) Σ_α E_α(s)` against the trace of the Hamiltonian.
pub fn check_trace(model: &ModelSpec) -> Result<IdentityReport, ConsistencyError> {
    let spectra = ChainSpectra::compute(model)?;
    let total: f64 = spectra.blocks.values().map(|b| (b.s.twice() + 1) as f64 * b.eigenvalues.iter().sum::<f64>()).sum();
    let trace = build_hamiltonian(model)?.materialize()?.trace();
    let dev = (total - trace).abs();
    Ok(IdentityReport::new("trace_consistency", format!("N={}", model.n_qubits), dev, dev, Tolerance::abs(1e-8)))
}

/// `Σ |<α,m|T|α',m'>|²` over the full eigenbasis against the Frobenius norm of
/// the sector-restricted operator.
pub fn check_sum_rule(op: &TensorOpSpec, spectra: &ChainSpectra) -> Result<IdentityReport, ConsistencyError> {
    let n = spectra.n_qubits();
    let m_prime = HalfInt::from_twice(n as i64 % 2);
    let m = m_prime + op.component;
    let bank = StateBank::new();
    let mut total = 0.0;
    for row in spectra.blocks.values().filter(|b| b.s.admits_projection(m)) {
        for col in spectra.blocks.values().filter(|b| b.s.admits_projection(m_prime)) {
            total += matrix_elements(&bank, &op.definition, row, m, col, m_prime)?.norm_squared();
        }
    }
    let from = MagnetizationSector::new(n, m_prime)?;
    let to = MagnetizationSector::new(n, m)?;
    let frob = op.definition.materialize_sector(&from, &to)?.frobenius_norm_sq();
    let dev = (total - frob).abs();
    let rel = if frob > 0.0 { dev / frob } else { dev };
    Ok(IdentityReport::new("sum_rule", format!("N={n} op={} m={m} m'={m_prime}", op.label), dev, rel, Tolerance::abs(1e-8)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_ops::{builtin_family, BuiltinTensor};

    #[test]
    fn invariants_hold_at_n5() {
        let model = ModelSpec::open(5);
        for r in [
            check_exact_oracle(&model).unwrap(),
            check_basis_orthonormality(5).unwrap(),
            check_eigen_relations(5).unwrap(),
            check_ladder(5).unwrap(),
            check_charge_conservation(&model).unwrap(),
            check_block_m_independence(&model).unwrap(),
            check_trace(&model).unwrap(),
        ] {
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn builtin_families_are_spherical_tensors() {
        for name in [BuiltinTensor::T10, BuiltinTensor::T20] {
            let r = check_tensor_commutators(&builtin_family(name, 4).unwrap()).unwrap();
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn sum_rule_n4() {
        let spectra = ChainSpectra::compute(&ModelSpec::open(4)).unwrap();
        for name in BuiltinTensor::ALL {
            let op = crate::model_ops::builtin_tensor_op(name, 4).unwrap();
            let r = check_sum_rule(&op, &spectra).unwrap();
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn periodic_chain_conserves_spin() {
        assert!(check_charge_conservation(&ModelSpec::periodic(6)).unwrap().passed);
    }
}
