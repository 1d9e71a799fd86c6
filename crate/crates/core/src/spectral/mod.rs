//! Spin-resolved Hamiltonian blocks, their eigensystems, and plain and
//! reduced matrix elements of tensor operators.
//!
//! Each spin-`s` block is assembled and diagonalized once in the `m = s`
//! sector; eigenvector coefficients over the coupling-path index are valid at
//! every `m` because the block matrices are `m`-independent.

pub mod cache;
pub mod lanczos;

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coupled_basis::{allowed_spins, coupled_basis_matrix, BasisError, MagnetizationSector};
use crate::model_ops::{build_hamiltonian, ModelError, ModelSpec, PauliStringOperator, TensorOpSpec};
use crate::spin_algebra::{CgKey, ClebschGordan, ExactCg, HalfInt, SpinError};

pub use cache::{CacheError, SpectrumCache};

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Spin(#[from] SpinError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error("block matrix has non-finite entries")]
    NonFinite,
    #[error("no spin-{s} sector in a chain of {n} qubits")]
    MissingSector { s: HalfInt, n: usize },
    #[error("operator {label} has component q = {q} but does not shift S_z by exactly q")]
    ComponentMismatch { label: String, q: HalfInt },
    #[error("operator acts on {got} qubits but the spectra describe {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("rank {k} cannot connect spin {s_row} to spin {s_col} (triangle rule)")]
    Triangle { k: HalfInt, s_row: HalfInt, s_col: HalfInt },
    #[error("projection m = {m} not admitted by spin {s}")]
    Projection { s: HalfInt, m: HalfInt },
    #[error("no (m, m') with a nonzero coefficient for s = {s_row}, s' = {s_col}, k = {k}, q = {q}")]
    NoAdmissibleChoice { s_row: HalfInt, s_col: HalfInt, k: HalfInt, q: HalfInt },
    #[error("Wigner-Eckart coefficient vanishes at m = {m}, m' = {m_prime}")]
    VanishingCoefficient { m: HalfInt, m_prime: HalfInt },
}

/// `U^T H U` with `U` the coupled basis of spin `s` at projection `m`.
pub fn block_matrix(h: &PauliStringOperator, s: HalfInt, m: HalfInt) -> Result<DMatrix<f64>, SpectralError> {
    if !s.admits_projection(m) {
        return Err(SpectralError::Projection { s, m });
    }
    let sector = MagnetizationSector::new(h.n_qubits, m)?;
    let u = coupled_basis_matrix(&sector, s)?;
    let hu = h.materialize_sector(&sector, &sector)?.mul_dense(&u);
    let b = u.tr_mul(&hu);
    Ok((&b + b.transpose()) * 0.5)
}

fn fix_sign(v: &mut DVector<f64>) {
    let max = v.amax();
    if let Some(x) = v.iter().copied().find(|x| x.abs() >= max * (1.0 - 1e-10)) {
        if x < 0.0 {
            v.neg_mut();
        }
    }
}

/// Ascending eigenvalues and orthonormal eigenvectors (as columns). Each
/// eigenvector is signed so that its largest-magnitude coefficient, the first
/// one in case of ties, is positive.
pub fn diagonalize_block(block: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>), SpectralError> {
    if block.iter().any(|x| !x.is_finite()) {
        return Err(SpectralError::NonFinite);
    }
    let d = block.nrows();
    if d == 0 {
        return Ok((Vec::new(), DMatrix::zeros(0, 0)));
    }
    let eig = SymmetricEigen::new(block.clone());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(d, d);
    for (c, &i) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(i).clone_owned();
        fix_sign(&mut col);
        vectors.set_column(c, &col);
    }
    Ok((values, vectors))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockSpectrum {
    pub s: HalfInt,
    pub n_qubits: usize,
    pub model_fingerprint: String,
    pub eigenvalues: Vec<f64>,
    /// Column `α` holds the coefficients of eigenstate `α` over the coupling
    /// paths of [`crate::coupled_basis::enumerate_paths`].
    pub eigenvectors: DMatrix<f64>,
}

impl BlockSpectrum {
    pub fn compute(h: &PauliStringOperator, model_fingerprint: &str, s: HalfInt) -> Result<Self, SpectralError> {
        let (eigenvalues, eigenvectors) = diagonalize_block(&block_matrix(h, s, s)?)?;
        Ok(BlockSpectrum { s, n_qubits: h.n_qubits, model_fingerprint: model_fingerprint.to_string(), eigenvalues, eigenvectors })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenstates at projection `m` as columns over the bitstrings of the
    /// magnetization sector.
    pub fn eigenstates(&self, sector: &MagnetizationSector) -> Result<DMatrix<f64>, SpectralError> {
        Ok(coupled_basis_matrix(sector, self.s)? * &self.eigenvectors)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SpectrumStats {
    pub cache_hits: usize,
    pub diagonalized: usize,
}

/// Every spin block of one model.
#[derive(Clone, Debug)]
pub struct ChainSpectra {
    pub model: ModelSpec,
    pub fingerprint: String,
    pub blocks: BTreeMap<HalfInt, BlockSpectrum>,
}

impl ChainSpectra {
    pub fn compute(model: &ModelSpec) -> Result<Self, SpectralError> {
        Self::compute_cached(model, None).map(|(s, _)| s)
    }

    /// Blocks are computed in parallel; with a cache, present blocks are
    /// loaded and fresh ones stored.
    pub fn compute_cached(model: &ModelSpec, cache: Option<&SpectrumCache>) -> Result<(Self, SpectrumStats), SpectralError> {
        let h = build_hamiltonian(model)?;
        let fingerprint = model.fingerprint();
        let hits = AtomicUsize::new(0);
        let fresh = AtomicUsize::new(0);
        let blocks = allowed_spins(model.n_qubits)
            .into_par_iter()
            .map(|s| {
                if let Some(c) = cache {
                    if let Some(b) = c.load_spectrum(model, s)? {
                        hits.fetch_add(1, Ordering::Relaxed);
                        return Ok((s, b));
                    }
                }
                let b = BlockSpectrum::compute(&h, &fingerprint, s)?;
                fresh.fetch_add(1, Ordering::Relaxed);
                log::debug!("diagonalized s = {s}, dim {}", b.dim());
                if let Some(c) = cache {
                    c.store_spectrum(model, &b)?;
                }
                Ok((s, b))
            })
            .collect::<Result<Vec<_>, SpectralError>>()?
            .into_iter()
            .collect();
        let stats = SpectrumStats { cache_hits: hits.into_inner(), diagonalized: fresh.into_inner() };
        Ok((ChainSpectra { model: model.clone(), fingerprint, blocks }, stats))
    }

    pub fn n_qubits(&self) -> usize {
        self.model.n_qubits
    }

    pub fn block(&self, s: HalfInt) -> Result<&BlockSpectrum, SpectralError> {
        self.blocks.get(&s).ok_or(SpectralError::MissingSector { s, n: self.n_qubits() })
    }

    pub fn spins(&self) -> impl Iterator<Item = HalfInt> + '_ {
        self.blocks.keys().copied()
    }

    /// `E_max - E_min` over all blocks.
    pub fn bandwidth(&self) -> f64 {
        let all = self.blocks.values().flat_map(|b| b.eigenvalues.iter().copied());
        let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| (lo.min(e), hi.max(e)));
        hi - lo
    }

    /// All `2^N` eigenvalues, each block repeated `2s + 1` times, ascending.
    pub fn full_spectrum(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .blocks
            .values()
            .flat_map(|b| std::iter::repeat_n(&b.eigenvalues, b.s.twice() as usize + 1).flatten().copied())
            .collect();
        out.sort_by(f64::total_cmp);
        out
    }
}

/// The `(m, m', q)` at which a reduced element was extracted, and the
/// coefficient `<s, m | s', m'; k, q>` it was divided by.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MChoice {
    pub m: HalfInt,
    pub m_prime: HalfInt,
    pub q: HalfInt,
    pub cg: f64,
}

/// Reduced elements `<α||T^(k)||α'>` between the eigenstates of two blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedElementTable {
    pub s_row: HalfInt,
    pub s_col: HalfInt,
    pub rank: HalfInt,
    pub component: HalfInt,
    pub label: String,
    pub operator_fingerprint: String,
    pub model_fingerprint: String,
    pub choice: MChoice,
    pub elements: DMatrix<f64>,
}

pub fn triangle_allows(k: HalfInt, s_row: HalfInt, s_col: HalfInt) -> bool {
    let (a, b, c) = (s_row.twice(), s_col.twice(), k.twice());
    (a - b).abs() <= c && c <= a + b && (a + b + c) % 2 == 0
}

/// Projections of `s` ordered `0 (or 1/2), 1, ..., s, -1, -2, ...`.
fn scan_order(s: HalfInt) -> impl Iterator<Item = HalfInt> {
    let low = s.twice() % 2;
    let up = (low..=s.twice()).step_by(2);
    let down = (2 - low..=s.twice()).step_by(2).map(|t| -t);
    up.chain(down).map(HalfInt::from_twice)
}

/// Default `(m, m')`: `m' = 0` and `m = q` when the coefficient is nonzero,
/// otherwise the first nonzero coefficient scanning `m'` upward from zero and
/// then through negative values.
pub fn choose_projections(
    provider: &dyn ClebschGordan,
    s_row: HalfInt,
    s_col: HalfInt,
    k: HalfInt,
    q: HalfInt,
) -> Result<MChoice, SpectralError> {
    for m_prime in scan_order(s_col) {
        let m = m_prime + q;
        if !s_row.admits_projection(m) {
            continue;
        }
        let cg = provider.coefficient(&CgKey::new(s_col, m_prime, k, q, s_row, m))?;
        if cg.abs() > 1e-12 {
            return Ok(MChoice { m, m_prime, q, cg });
        }
    }
    Err(SpectralError::NoAdmissibleChoice { s_row, s_col, k, q })
}

fn check_operator(op: &TensorOpSpec, n_qubits: usize) -> Result<(), SpectralError> {
    if op.n_qubits() != n_qubits {
        return Err(SpectralError::LengthMismatch { got: op.n_qubits(), expected: n_qubits });
    }
    match op.definition.magnetization_shift() {
        Some(q) if q == op.component => Ok(()),
        _ => Err(SpectralError::ComponentMismatch { label: op.label.clone(), q: op.component }),
    }
}

/// Block fingerprint, spin and projection.
type StateKey = (String, HalfInt, HalfInt);

/// Memo of magnetization sectors and eigenstates in the computational basis.
#[derive(Default)]
pub struct StateBank {
    sectors: Mutex<HashMap<(usize, HalfInt), Arc<MagnetizationSector>>>,
    states: Mutex<HashMap<StateKey, Arc<DMatrix<f64>>>>,
}

impl StateBank {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sector(&self, n_qubits: usize, m: HalfInt) -> Result<Arc<MagnetizationSector>, SpectralError> {
        if let Some(s) = self.sectors.lock().expect("sector memo").get(&(n_qubits, m)) {
            return Ok(s.clone());
        }
        let sector = Arc::new(MagnetizationSector::new(n_qubits, m)?);
        Ok(self.sectors.lock().expect("sector memo").entry((n_qubits, m)).or_insert(sector).clone())
    }

    pub fn eigenstates(&self, block: &BlockSpectrum, m: HalfInt) -> Result<Arc<DMatrix<f64>>, SpectralError> {
        if !block.s.admits_projection(m) {
            return Err(SpectralError::Projection { s: block.s, m });
        }
        let key = (block.model_fingerprint.clone(), block.s, m);
        if let Some(psi) = self.states.lock().expect("state memo").get(&key) {
            return Ok(psi.clone());
        }
        let sector = self.sector(block.n_qubits, m)?;
        let psi = Arc::new(block.eigenstates(&sector)?);
        Ok(self.states.lock().expect("state memo").entry(key).or_insert(psi).clone())
    }
}

/// `<α, m| T |α', m'>` as a full matrix over `α` (rows) and `α'` (columns).
pub fn matrix_elements(
    bank: &StateBank,
    op: &PauliStringOperator,
    row: &BlockSpectrum,
    m: HalfInt,
    col: &BlockSpectrum,
    m_prime: HalfInt,
) -> Result<DMatrix<f64>, SpectralError> {
    if let Some(q) = op.magnetization_shift() {
        if m - m_prime != q {
            return Ok(DMatrix::zeros(row.dim(), col.dim()));
        }
    }
    let n = row.n_qubits;
    let to = bank.sector(n, m)?;
    let from = bank.sector(n, m_prime)?;
    let psi_col = bank.eigenstates(col, m_prime)?;
    let psi_row = bank.eigenstates(row, m)?;
    let t_psi = op.materialize_sector(&from, &to)?.mul_dense(&psi_col);
    Ok(psi_row.tr_mul(&t_psi))
}

/// A single `<α, m| T |α', m'>`.
pub fn matrix_element(
    op: &TensorOpSpec,
    bra: (&BlockSpectrum, usize, HalfInt),
    ket: (&BlockSpectrum, usize, HalfInt),
) -> Result<f64, SpectralError> {
    let (row, alpha, m) = bra;
    let (col, alpha_p, m_prime) = ket;
    if m - m_prime != op.component {
        return Ok(0.0);
    }
    check_operator(op, row.n_qubits)?;
    let n = row.n_qubits;
    let to = MagnetizationSector::new(n, m)?;
    let from = MagnetizationSector::new(n, m_prime)?;
    let bra_vec = coupled_basis_matrix(&to, row.s)? * row.eigenvectors.column(alpha);
    let ket_vec = coupled_basis_matrix(&from, col.s)? * col.eigenvectors.column(alpha_p);
    let image = op.definition.materialize_sector(&from, &to)?.matvec(ket_vec.as_slice());
    Ok(bra_vec.iter().zip(&image).map(|(a, b)| a * b).sum())
}

/// Reduced elements extracted at an explicit `(m, m')`.
pub fn reduced_elements_at(
    provider: &dyn ClebschGordan,
    bank: &StateBank,
    op: &TensorOpSpec,
    row: &BlockSpectrum,
    col: &BlockSpectrum,
    m: HalfInt,
    m_prime: HalfInt,
) -> Result<ReducedElementTable, SpectralError> {
    check_operator(op, row.n_qubits)?;
    let (k, q) = (op.rank, op.component);
    if !triangle_allows(k, row.s, col.s) {
        return Err(SpectralError::Triangle { k, s_row: row.s, s_col: col.s });
    }
    if m - m_prime != q {
        return Err(SpectralError::VanishingCoefficient { m, m_prime });
    }
    for (s, mm) in [(row.s, m), (col.s, m_prime)] {
        if !s.admits_projection(mm) {
            return Err(SpectralError::Projection { s, m: mm });
        }
    }
    let cg = provider.coefficient(&CgKey::new(col.s, m_prime, k, q, row.s, m))?;
    if cg.abs() <= 1e-12 {
        return Err(SpectralError::VanishingCoefficient { m, m_prime });
    }
    let raw = matrix_elements(bank, &op.definition, row, m, col, m_prime)?;
    Ok(ReducedElementTable {
        s_row: row.s,
        s_col: col.s,
        rank: k,
        component: q,
        label: op.label.clone(),
        operator_fingerprint: op.fingerprint(),
        model_fingerprint: row.model_fingerprint.clone(),
        choice: MChoice { m, m_prime, q, cg },
        elements: raw / cg,
    })
}

/// Reduced elements at the default projection choice, or `None` when the
/// triangle rule forbids the sector pair.
pub fn reduced_elements_with(
    provider: &dyn ClebschGordan,
    bank: &StateBank,
    op: &TensorOpSpec,
    row: &BlockSpectrum,
    col: &BlockSpectrum,
) -> Result<Option<ReducedElementTable>, SpectralError> {
    if !triangle_allows(op.rank, row.s, col.s) {
        return Ok(None);
    }
    let c = choose_projections(provider, row.s, col.s, op.rank, op.component)?;
    reduced_elements_at(provider, bank, op, row, col, c.m, c.m_prime).map(Some)
}

pub fn reduced_elements(op: &TensorOpSpec, row: &BlockSpectrum, col: &BlockSpectrum) -> Result<Option<ReducedElementTable>, SpectralError> {
    reduced_elements_with(&ExactCg, &StateBank::new(), op, row, col)
}

/// Every nonempty reduced-element table of one operator, keyed by
/// `(s_row, s_col)`.
#[derive(Clone, Debug)]
pub struct OperatorTables {
    pub label: String,
    pub rank: HalfInt,
    pub component: HalfInt,
    pub tables: BTreeMap<(HalfInt, HalfInt), ReducedElementTable>,
}

impl OperatorTables {
    pub fn get(&self, s_row: HalfInt, s_col: HalfInt) -> Option<&ReducedElementTable> {
        self.tables.get(&(s_row, s_col))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TableStats {
    pub cache_hits: usize,
    pub computed: usize,
}

/// Builds tables for every sector pair allowed by the triangle rule, in
/// parallel, optionally through the on-disk cache.
pub fn operator_tables(
    provider: &dyn ClebschGordan,
    bank: &StateBank,
    spectra: &ChainSpectra,
    op: &TensorOpSpec,
    cache: Option<&SpectrumCache>,
) -> Result<(OperatorTables, TableStats), SpectralError> {
    check_operator(op, spectra.n_qubits())?;
    let pairs: Vec<(HalfInt, HalfInt)> = spectra
        .spins()
        .flat_map(|a| spectra.spins().map(move |b| (a, b)))
        .filter(|&(a, b)| triangle_allows(op.rank, a, b))
        .collect();
    let hits = AtomicUsize::new(0);
    let computed = AtomicUsize::new(0);
    let tables = pairs
        .into_par_iter()
        .map(|(a, b)| {
            let (row, col) = (spectra.block(a)?, spectra.block(b)?);
            let choice = choose_projections(provider, a, b, op.rank, op.component)?;
            if let Some(c) = cache {
                if let Some(t) = c.load_table(&spectra.model, op, a, b, &choice)? {
                    hits.fetch_add(1, Ordering::Relaxed);
                    return Ok(((a, b), t));
                }
            }
            let t = reduced_elements_at(provider, bank, op, row, col, choice.m, choice.m_prime)?;
            computed.fetch_add(1, Ordering::Relaxed);
            if let Some(c) = cache {
                c.store_table(&spectra.model, op, &t)?;
            }
            Ok(((a, b), t))
        })
        .collect::<Result<Vec<_>, SpectralError>>()?
        .into_iter()
        .collect();
    let stats = TableStats { cache_hits: hits.into_inner(), computed: computed.into_inner() };
    Ok((OperatorTables { label: op.label.clone(), rank: op.rank, component: op.component, tables }, stats))
}
