//! Joint eigenbasis of total `S²` and `S_z` built by coupling qubits one at a
//! time, left to right.
//!
//! Conventions:
//! - Bit `j` of a [`Bitstring`] describes qubit `j + 1`; a set bit means spin
//!   down. A vector with magnetization `m` therefore lives on bitstrings of
//!   Hamming weight `N/2 - m`.
//! - Labels render qubit 1 as the leftmost character, so `"01"` is qubit 1 up
//!   and qubit 2 down.
//! - The amplitude of bitstring `b` in `|path, m>` is the product of the
//!   spin-1/2 coupling coefficients `<s_j, M_j | s_{j-1}, M_{j-1}; 1/2, σ_j>`
//!   along the path, where `M_j` is the partial magnetization of `b`. With
//!   Condon–Shortley phases every factor on the lexicographically smallest
//!   contributing bitstring of `|path, m = s>` is positive, so that amplitude
//!   is positive. Other `m` inherit their phase from the ladder relation.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::spin_algebra::{cg_exact, CgKey, HalfInt, SpinError};

pub type Bitstring = u64;

/// Largest chain handled by the bit-level representation.
pub const MAX_QUBITS: usize = 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BasisError {
    #[error("invalid coupling path: {0}")]
    InvalidPath(String),
    #[error("|m| = {m} exceeds s = {s}")]
    ProjectionOutOfRange { s: HalfInt, m: HalfInt },
    #[error("unsupported qubit count {0}")]
    QubitCount(usize),
    #[error(transparent)]
    Spin(#[from] SpinError),
}

/// Intermediate total spins `s_1 = 1/2, s_2, ..., s_N` of a left-to-right coupling.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CouplingPath {
    spins: Vec<HalfInt>,
}

impl CouplingPath {
    pub fn new(spins: Vec<HalfInt>) -> Result<Self, BasisError> {
        if spins.is_empty() || spins.len() > MAX_QUBITS {
            return Err(BasisError::QubitCount(spins.len()));
        }
        if spins[0] != HalfInt::HALF {
            return Err(BasisError::InvalidPath(format!("first spin must be 1/2, got {}", spins[0])));
        }
        for w in spins.windows(2) {
            if (w[1] - w[0]).abs() != HalfInt::HALF || w[1].twice() < 0 {
                return Err(BasisError::InvalidPath(format!("step {} -> {}", w[0], w[1])));
            }
        }
        Ok(CouplingPath { spins })
    }

    pub fn spins(&self) -> &[HalfInt] {
        &self.spins
    }

    pub fn n_qubits(&self) -> usize {
        self.spins.len()
    }

    pub fn final_spin(&self) -> HalfInt {
        *self.spins.last().expect("paths are non-empty")
    }
}

fn binomial(n: i64, k: i64) -> u64 {
    if k < 0 || k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// Number of spin-`s` multiplets among `n` coupled qubits.
pub fn multiplicity(n: usize, s: HalfInt) -> u64 {
    let twice = s.twice();
    if twice < 0 || twice > n as i64 || (n as i64 - twice) % 2 != 0 {
        return 0;
    }
    let down = (n as i64 - twice) / 2;
    binomial(n as i64, down) - binomial(n as i64, down - 1)
}

/// Total spins reachable by `n` qubits, ascending.
pub fn allowed_spins(n: usize) -> Vec<HalfInt> {
    (n as i64 % 2..=n as i64).step_by(2).map(HalfInt::from_twice).collect()
}

/// All coupling paths of `n` qubits ending at spin `s`, in lexicographic
/// order of their intermediate-spin sequences.
pub fn enumerate_paths(n: usize, s: HalfInt) -> Vec<CouplingPath> {
    let mut out = Vec::new();
    if n == 0 || multiplicity(n, s) == 0 {
        return out;
    }
    let target = s.twice();
    let mut stack = vec![1i64];
    fn recurse(n: usize, target: i64, stack: &mut Vec<i64>, out: &mut Vec<CouplingPath>) {
        let len = stack.len();
        let last = stack[len - 1];
        if len == n {
            if last == target {
                let spins = stack.iter().map(|&t| HalfInt::from_twice(t)).collect();
                out.push(CouplingPath { spins });
            }
            return;
        }
        let remaining = (n - len) as i64;
        for next in [last - 1, last + 1] {
            if next >= 0 && (next - target).abs() < remaining {
                stack.push(next);
                recurse(n, target, stack, out);
                stack.pop();
            }
        }
    }
    recurse(n, target, &mut stack, &mut out);
    out
}

/// Fixed-`S_z` sector: all bitstrings of one Hamming weight, ascending.
#[derive(Clone, Debug)]
pub struct MagnetizationSector {
    n_qubits: usize,
    m: HalfInt,
    states: Vec<Bitstring>,
    index: HashMap<Bitstring, usize>,
}

impl MagnetizationSector {
    pub fn new(n_qubits: usize, m: HalfInt) -> Result<Self, BasisError> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(BasisError::QubitCount(n_qubits));
        }
        let n_half = HalfInt::from_twice(n_qubits as i64);
        if !n_half.admits_projection(m) {
            return Err(BasisError::ProjectionOutOfRange { s: n_half, m });
        }
        let weight = ((n_qubits as i64 - m.twice()) / 2) as u32;
        let states = fixed_weight_bitstrings(n_qubits, weight);
        let index = states.iter().enumerate().map(|(i, &b)| (b, i)).collect();
        Ok(MagnetizationSector { n_qubits, m, states, index })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn m(&self) -> HalfInt {
        self.m
    }

    pub fn weight(&self) -> u32 {
        ((self.n_qubits as i64 - self.m.twice()) / 2) as u32
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[Bitstring] {
        &self.states
    }

    pub fn index_of(&self, b: Bitstring) -> Option<usize> {
        self.index.get(&b).copied()
    }
}

/// All `n`-bit strings with `weight` set bits, ascending (Gosper's hack).
fn fixed_weight_bitstrings(n: usize, weight: u32) -> Vec<Bitstring> {
    if weight == 0 {
        return vec![0];
    }
    let limit = 1u64 << n;
    let mut out = Vec::new();
    let mut v: u64 = (1u64 << weight) - 1;
    while v < limit {
        out.push(v);
        let t = v | (v - 1);
        v = (t + 1) | (((!t & (t + 1)) - 1) >> (v.trailing_zeros() + 1));
    }
    out
}

/// Human-readable bitstring with qubit 1 first.
pub fn bitstring_label(b: Bitstring, n: usize) -> String {
    (0..n).map(|j| if b >> j & 1 == 1 { '1' } else { '0' }).collect()
}

/// Inverse of [`bitstring_label`].
pub fn parse_bitstring(label: &str) -> Option<Bitstring> {
    label.chars().enumerate().try_fold(0u64, |acc, (j, c)| match c {
        '0' => Some(acc),
        '1' => Some(acc | 1 << j),
        _ => None,
    })
}

/// Spin-1/2 step coefficients `<s', M' | s, M; 1/2, σ>` for every `s ≤ n/2`.
#[derive(Clone, Debug)]
struct StepTable {
    n: i64,
    // index: [s twice][M twice + n][σ up?][s' raised?]
    values: Vec<f64>,
}

impl StepTable {
    fn new(n: usize) -> Result<Self, SpinError> {
        let n = n as i64;
        let width = (2 * n + 1) as usize;
        let mut values = vec![0.0; (n as usize + 1) * width * 4];
        for ts in 0..=n {
            let s = HalfInt::from_twice(ts);
            for m in s.projections() {
                for (si, sigma) in [HalfInt::from_twice(-1), HalfInt::HALF].into_iter().enumerate() {
                    for (ri, next) in [s - HalfInt::HALF, s + HalfInt::HALF].into_iter().enumerate() {
                        let m_next = m + sigma;
                        if next.twice() < 0 || !next.admits_projection(m_next) {
                            continue;
                        }
                        let key = CgKey::new(s, m, HalfInt::HALF, sigma, next, m_next);
                        let idx = Self::slot(n, ts, m.twice(), si, ri);
                        values[idx] = cg_exact(&key)?;
                    }
                }
            }
        }
        Ok(StepTable { n, values })
    }

    fn slot(n: i64, ts: i64, tm: i64, sigma_up: usize, raised: usize) -> usize {
        let width = 2 * n + 1;
        (((ts * width + (tm + n)) as usize) * 2 + sigma_up) * 2 + raised
    }

    fn get(&self, ts: i64, tm: i64, sigma_up: bool, raised: bool) -> f64 {
        if tm.abs() > ts {
            return 0.0;
        }
        self.values[Self::slot(self.n, ts, tm, sigma_up as usize, raised as usize)]
    }

    /// Amplitude of `b` in the coupled state along `path`.
    fn amplitude(&self, path: &[HalfInt], b: Bitstring) -> f64 {
        let mut amp = 1.0;
        let (mut ts, mut tm) = (0i64, 0i64);
        for (j, next) in path.iter().enumerate() {
            let up = b >> j & 1 == 0;
            let tn = next.twice();
            let c = self.get(ts, tm, up, tn > ts);
            if c == 0.0 {
                return 0.0;
            }
            amp *= c;
            ts = tn;
            tm += if up { 1 } else { -1 };
        }
        amp
    }
}

/// One `|s, m, n>` state as sparse amplitudes over bitstrings.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledBasisVector {
    pub s: HalfInt,
    pub m: HalfInt,
    pub path: CouplingPath,
    pub amplitudes: BTreeMap<Bitstring, f64>,
}

impl CoupledBasisVector {
    pub fn norm(&self) -> f64 {
        self.amplitudes.values().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &CoupledBasisVector) -> f64 {
        self.amplitudes
            .iter()
            .filter_map(|(b, a)| other.amplitudes.get(b).map(|c| a * c))
            .sum()
    }

    /// Dense representation on the full `2^N` space.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; 1usize << self.path.n_qubits()];
        for (&b, &a) in &self.amplitudes {
            out[b as usize] = a;
        }
        out
    }
}

pub fn build_basis_vector(path: &CouplingPath, m: HalfInt) -> Result<CoupledBasisVector, BasisError> {
    let s = path.final_spin();
    if !s.admits_projection(m) {
        return Err(BasisError::ProjectionOutOfRange { s, m });
    }
    let n = path.n_qubits();
    let table = StepTable::new(n)?;
    let sector = MagnetizationSector::new(n, m)?;
    let amplitudes = sector
        .states()
        .iter()
        .filter_map(|&b| {
            let a = table.amplitude(path.spins(), b);
            (a != 0.0).then_some((b, a))
        })
        .collect();
    Ok(CoupledBasisVector { s, m, path: path.clone(), amplitudes })
}

/// Columns are the coupled vectors `|s, m, path>` for every path of
/// [`enumerate_paths`], expressed in the rows of `sector`.
pub fn coupled_basis_matrix(sector: &MagnetizationSector, s: HalfInt) -> Result<DMatrix<f64>, BasisError> {
    let n = sector.n_qubits();
    if !s.admits_projection(sector.m()) {
        return Err(BasisError::ProjectionOutOfRange { s, m: sector.m() });
    }
    let paths = enumerate_paths(n, s);
    let table = StepTable::new(n)?;
    let mut out = DMatrix::<f64>::zeros(sector.dim(), paths.len());
    for (col, path) in paths.iter().enumerate() {
        let mut column = out.column_mut(col);
        for (row, &b) in sector.states().iter().enumerate() {
            column[row] = table.amplitude(path.spins(), b);
        }
    }
    Ok(out)
}

/// Multiplicity bookkeeping for an `n`-qubit chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SectorLayout {
    pub n_qubits: usize,
    pub multiplicities: BTreeMap<HalfInt, u64>,
}

impl SectorLayout {
    pub fn new(n_qubits: usize) -> Self {
        let multiplicities = allowed_spins(n_qubits).into_iter().map(|s| (s, multiplicity(n_qubits, s))).collect();
        SectorLayout { n_qubits, multiplicities }
    }

    /// `Σ_s (2s + 1) d(N, s)`, which must equal `2^N`.
    pub fn total_dim(&self) -> u64 {
        self.multiplicities.iter().map(|(s, d)| (s.twice() as u64 + 1) * d).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(t: i64) -> HalfInt {
        HalfInt::from_twice(t)
    }

    #[test]
    fn multiplicity_examples() {
        assert_eq!(multiplicity(2, h(0)), 1);
        assert_eq!(multiplicity(2, h(2)), 1);
        assert_eq!(multiplicity(4, h(2)), 3);
        assert_eq!(multiplicity(14, h(2)), 1001);
        assert_eq!(multiplicity(4, h(1)), 0);
        assert_eq!(multiplicity(4, h(6)), 0);
    }

    #[test]
    fn dimension_counting_identity() {
        for n in 1..=14 {
            assert_eq!(SectorLayout::new(n).total_dim(), 1u64 << n, "n = {n}");
        }
    }

    #[test]
    fn path_enumeration() {
        let p = enumerate_paths(2, h(2));
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].spins(), &[h(1), h(2)]);
        let p = enumerate_paths(3, h(1));
        assert_eq!(p.iter().map(|p| p.spins().to_vec()).collect::<Vec<_>>(), vec![vec![h(1), h(0), h(1)], vec![h(1), h(2), h(1)]]);
        let p = enumerate_paths(4, h(4));
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].spins(), &[h(1), h(2), h(3), h(4)]);
        for n in 1..=12 {
            for s in allowed_spins(n) {
                let paths = enumerate_paths(n, s);
                assert_eq!(paths.len() as u64, multiplicity(n, s));
                assert!(paths.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn invalid_paths_rejected() {
        assert!(CouplingPath::new(vec![h(1), h(5)]).is_err());
        assert!(CouplingPath::new(vec![h(0)]).is_err());
        assert!(CouplingPath::new(vec![]).is_err());
    }

    #[test]
    fn two_qubit_vectors() {
        let singlet = build_basis_vector(&enumerate_paths(2, h(0))[0], h(0)).unwrap();
        let r = 0.5f64.sqrt();
        assert_eq!(singlet.amplitudes.len(), 2);
        assert!((singlet.amplitudes[&parse_bitstring("01").unwrap()] - r).abs() < 1e-15);
        assert!((singlet.amplitudes[&parse_bitstring("10").unwrap()] + r).abs() < 1e-15);
        let triplet = build_basis_vector(&enumerate_paths(2, h(2))[0], h(0)).unwrap();
        assert!((triplet.amplitudes[&parse_bitstring("01").unwrap()] - r).abs() < 1e-15);
        assert!((triplet.amplitudes[&parse_bitstring("10").unwrap()] - r).abs() < 1e-15);
        let single = build_basis_vector(&enumerate_paths(1, h(1))[0], h(1)).unwrap();
        assert_eq!(single.amplitudes.into_iter().collect::<Vec<_>>(), vec![(0, 1.0)]);
    }

    #[test]
    fn projection_out_of_range() {
        let path = &enumerate_paths(3, h(1))[0];
        assert!(matches!(build_basis_vector(path, h(3)), Err(BasisError::ProjectionOutOfRange { .. })));
    }

    #[test]
    fn hamming_weight_and_norm() {
        for n in 1..=8 {
            for s in allowed_spins(n) {
                for path in enumerate_paths(n, s) {
                    for m in s.projections() {
                        let v = build_basis_vector(&path, m).unwrap();
                        assert!((v.norm() - 1.0).abs() < 1e-12);
                        let w = ((n as i64 - m.twice()) / 2) as u32;
                        assert!(v.amplitudes.keys().all(|b| b.count_ones() == w));
                    }
                }
            }
        }
    }

    #[test]
    fn highest_weight_phase_convention() {
        for n in 1..=10 {
            for s in allowed_spins(n) {
                for path in enumerate_paths(n, s) {
                    let v = build_basis_vector(&path, s).unwrap();
                    let first = v
                        .amplitudes
                        .iter()
                        .min_by_key(|(b, _)| bitstring_label(**b, n))
                        .map(|(_, a)| *a)
                        .unwrap();
                    assert!(first > 0.0);
                }
            }
        }
    }

    #[test]
    fn basis_matrix_is_orthonormal() {
        for n in [4usize, 7, 10] {
            for s in allowed_spins(n) {
                for m in s.projections().filter(|m| m.twice() >= 0) {
                    let sector = MagnetizationSector::new(n, m).unwrap();
                    let u = coupled_basis_matrix(&sector, s).unwrap();
                    let gram = u.transpose() * &u;
                    let err = (gram - DMatrix::identity(u.ncols(), u.ncols())).abs().max();
                    assert!(err < 1e-10, "n={n} s={s} m={m}: {err}");
                }
            }
        }
    }

    #[test]
    fn label_roundtrip() {
        assert_eq!(bitstring_label(0b0110, 4), "0110");
        assert_eq!(bitstring_label(0b0001, 3), "100");
        assert_eq!(parse_bitstring("100"), Some(1));
        assert_eq!(parse_bitstring("1x"), None);
    }
}
