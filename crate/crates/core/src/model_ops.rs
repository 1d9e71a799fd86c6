//! Heisenberg chain Hamiltonians and spherical tensor operators as weighted
//! Pauli strings.
//!
//! Angular-momentum algebra uses spin units `S = σ/2`; the Hamiltonian is
//! written in Pauli units. `σ_+ = |↑><↓|` and `σ_- = |↓><↑|`, so on one qubit
//! `S_± = σ_±`. Sites are 0-based in code; bond indices `j` in [`ModelSpec`]
//! are 1-based to match the usual `J_j` labelling.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::coupled_basis::{Bitstring, MagnetizationSector, MAX_QUBITS};
use crate::sparse::SparseMatrix;
use crate::spin_algebra::{cg_exact, CgKey, HalfInt, SpinError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("chain of {0} qubits is too short for this model")]
    TooFewQubits(usize),
    #[error("chain of {0} qubits exceeds the supported maximum")]
    TooManyQubits(usize),
    #[error("site {site} outside a chain of {n} qubits")]
    SiteOutOfRange { site: usize, n: usize },
    #[error("coupling profile has {got} entries, expected {expected}")]
    ProfileLength { got: usize, expected: usize },
    #[error("term produces an imaginary amplitude; only real operators can be materialized")]
    NonReal,
    #[error("unknown tensor operator {0:?}")]
    UnknownOperator(String),
    #[error("rank {k} is outside the coupling range of ranks {k1} and {k2}")]
    TriangleViolation { k: HalfInt, k1: HalfInt, k2: HalfInt },
    #[error("component q = {q} not allowed for rank {k}")]
    InvalidComponent { k: HalfInt, q: HalfInt },
    #[error("operands act on different chain lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    Spin(#[from] SpinError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PauliOp {
    #[serde(rename = "x")]
    X,
    #[serde(rename = "y")]
    Y,
    #[serde(rename = "z")]
    Z,
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

/// `coeff` times a product of single-site operators. The product acts right to
/// left, so the last entry of `ops` is applied first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coeff: f64,
    pub ops: Vec<(usize, PauliOp)>,
}

impl PauliTerm {
    pub fn new(coeff: f64, ops: Vec<(usize, PauliOp)>) -> Self {
        PauliTerm { coeff, ops }
    }

    /// Image of a basis state, or `None` when the term annihilates it.
    pub fn apply(&self, b: Bitstring) -> Result<Option<(Bitstring, f64)>, ModelError> {
        let mut state = b;
        let mut amp = self.coeff;
        let mut phase = 0u8; // powers of i
        for &(site, op) in self.ops.iter().rev() {
            let down = state >> site & 1 == 1;
            match op {
                PauliOp::Z => {
                    if down {
                        amp = -amp;
                    }
                }
                PauliOp::X => state ^= 1 << site,
                PauliOp::Y => {
                    phase += if down { 3 } else { 1 };
                    state ^= 1 << site;
                }
                PauliOp::Plus => {
                    if !down {
                        return Ok(None);
                    }
                    state ^= 1 << site;
                }
                PauliOp::Minus => {
                    if down {
                        return Ok(None);
                    }
                    state ^= 1 << site;
                }
            }
        }
        match phase % 4 {
            0 => Ok(Some((state, amp))),
            2 => Ok(Some((state, -amp))),
            _ => Err(ModelError::NonReal),
        }
    }

    /// Change of `2 S_z` produced by the term, when definite.
    fn twice_delta_m(&self) -> Option<i64> {
        self.ops.iter().try_fold(0i64, |acc, (_, op)| match op {
            PauliOp::Z => Some(acc),
            PauliOp::Plus => Some(acc + 2),
            PauliOp::Minus => Some(acc - 2),
            PauliOp::X | PauliOp::Y => None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliStringOperator {
    pub n_qubits: usize,
    pub terms: Vec<PauliTerm>,
    #[serde(default)]
    pub hermitian: bool,
}

impl PauliStringOperator {
    pub fn new(n_qubits: usize) -> Self {
        PauliStringOperator { n_qubits, terms: Vec::new(), hermitian: false }
    }

    pub fn from_terms(n_qubits: usize, terms: Vec<PauliTerm>) -> Result<Self, ModelError> {
        let mut op = Self::new(n_qubits);
        for t in terms {
            op.push(t.coeff, t.ops)?;
        }
        Ok(op)
    }

    pub fn push(&mut self, coeff: f64, ops: Vec<(usize, PauliOp)>) -> Result<(), ModelError> {
        if let Some(&(site, _)) = ops.iter().find(|(site, _)| *site >= self.n_qubits) {
            return Err(ModelError::SiteOutOfRange { site, n: self.n_qubits });
        }
        self.terms.push(PauliTerm::new(coeff, ops));
        Ok(())
    }

    pub fn with_hermitian(mut self, hermitian: bool) -> Self {
        self.hermitian = hermitian;
        self
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let terms = self.terms.iter().map(|t| PauliTerm::new(alpha * t.coeff, t.ops.clone())).collect();
        PauliStringOperator { n_qubits: self.n_qubits, terms, hermitian: self.hermitian && alpha.is_finite() }
    }

    pub fn sum(&self, other: &Self) -> Result<Self, ModelError> {
        if self.n_qubits != other.n_qubits {
            return Err(ModelError::LengthMismatch(self.n_qubits, other.n_qubits));
        }
        let terms = self.terms.iter().chain(&other.terms).cloned().collect();
        Ok(PauliStringOperator { n_qubits: self.n_qubits, terms, hermitian: self.hermitian && other.hermitian })
    }

    /// Operator product `self * other`.
    pub fn product(&self, other: &Self) -> Result<Self, ModelError> {
        if self.n_qubits != other.n_qubits {
            return Err(ModelError::LengthMismatch(self.n_qubits, other.n_qubits));
        }
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let ops = a.ops.iter().chain(&b.ops).copied().collect();
                terms.push(PauliTerm::new(a.coeff * b.coeff, ops));
            }
        }
        Ok(PauliStringOperator { n_qubits: self.n_qubits, terms, hermitian: false })
    }

    /// The `S_z` shift `q` shared by every term, if there is one.
    pub fn magnetization_shift(&self) -> Option<HalfInt> {
        let mut shifts = self.terms.iter().filter(|t| t.coeff != 0.0).map(PauliTerm::twice_delta_m);
        let first = shifts.next().unwrap_or(Some(0))?;
        shifts.all(|d| d == Some(first)).then_some(HalfInt::from_twice(first))
    }

    /// Image of one basis state with duplicates summed.
    pub fn apply(&self, b: Bitstring) -> Result<Vec<(Bitstring, f64)>, ModelError> {
        let mut out: Vec<(Bitstring, f64)> = Vec::new();
        for t in &self.terms {
            if let Some((c, a)) = t.apply(b)? {
                match out.iter_mut().find(|(cc, _)| *cc == c) {
                    Some(entry) => entry.1 += a,
                    None => out.push((c, a)),
                }
            }
        }
        out.retain(|(_, a)| *a != 0.0);
        Ok(out)
    }

    /// Full `2^N × 2^N` matrix.
    pub fn materialize(&self) -> Result<SparseMatrix, ModelError> {
        if self.n_qubits > 20 {
            return Err(ModelError::TooManyQubits(self.n_qubits));
        }
        let dim = 1usize << self.n_qubits;
        let mut triplets = Vec::new();
        for col in 0..dim {
            for (row, v) in self.apply(col as Bitstring)? {
                triplets.push((row as usize, col, v));
            }
        }
        Ok(SparseMatrix::from_triplets(dim, dim, triplets))
    }

    /// Block mapping the `from` sector into the `to` sector; rows index `to`.
    pub fn materialize_sector(&self, from: &MagnetizationSector, to: &MagnetizationSector) -> Result<SparseMatrix, ModelError> {
        let mut triplets = Vec::new();
        for (col, &b) in from.states().iter().enumerate() {
            for (image, v) in self.apply(b)? {
                if let Some(row) = to.index_of(image) {
                    triplets.push((row, col, v));
                }
            }
        }
        Ok(SparseMatrix::from_triplets(to.dim(), from.dim(), triplets))
    }

    pub fn fingerprint(&self) -> String {
        fingerprint_of(self)
    }
}

pub(crate) fn fingerprint_of<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("model types serialize");
    hex::encode(Sha256::digest(&json))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Open,
    Periodic,
}

/// Adds `magnitude` to the coupling of bond `site` (1-based).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingOffset {
    pub site: usize,
    pub magnitude: f64,
}

impl Default for CouplingOffset {
    fn default() -> Self {
        CouplingOffset { site: 3, magnitude: 0.3 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub strength: f64,
}

/// Nearest- plus next-nearest-neighbour Heisenberg chain. Bond `j` of either
/// range has coupling `J_j = 1 + offset.magnitude · δ_{j, offset.site}` unless
/// an explicit profile is supplied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub n_qubits: usize,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default)]
    pub offset: CouplingOffset,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nn_couplings: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nnn_couplings: Option<Vec<f64>>,
}

impl ModelSpec {
    pub fn open(n_qubits: usize) -> Self {
        ModelSpec {
            n_qubits,
            boundary: Boundary::Open,
            offset: CouplingOffset::default(),
            nn_couplings: None,
            nnn_couplings: None,
        }
    }

    /// Uniform `J = 1` ring.
    pub fn periodic(n_qubits: usize) -> Self {
        ModelSpec {
            n_qubits,
            boundary: Boundary::Periodic,
            offset: CouplingOffset { site: 1, magnitude: 0.0 },
            nn_couplings: None,
            nnn_couplings: None,
        }
    }

    pub fn coupling(&self, bond: usize) -> f64 {
        if bond == self.offset.site {
            1.0 + self.offset.magnitude
        } else {
            1.0
        }
    }

    fn bond_count(&self, range: usize) -> usize {
        match self.boundary {
            Boundary::Open => self.n_qubits.saturating_sub(range),
            Boundary::Periodic => self.n_qubits,
        }
    }

    fn bonds(&self, range: usize, profile: &Option<Vec<f64>>) -> Vec<Bond> {
        let n = self.n_qubits;
        (1..=self.bond_count(range))
            .map(|j| {
                let strength = profile.as_ref().map_or_else(|| self.coupling(j), |p| p[j - 1]);
                Bond { i: j - 1, j: (j - 1 + range) % n, strength }
            })
            .collect()
    }

    pub fn nn_bonds(&self) -> Vec<Bond> {
        self.bonds(1, &self.nn_couplings)
    }

    pub fn nnn_bonds(&self) -> Vec<Bond> {
        self.bonds(2, &self.nnn_couplings)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let min = match self.boundary {
            Boundary::Open => 2,
            Boundary::Periodic => 3,
        };
        if self.n_qubits < min {
            return Err(ModelError::TooFewQubits(self.n_qubits));
        }
        if self.n_qubits > MAX_QUBITS {
            return Err(ModelError::TooManyQubits(self.n_qubits));
        }
        for (range, profile) in [(1, &self.nn_couplings), (2, &self.nnn_couplings)] {
            if let Some(p) = profile {
                let expected = self.bond_count(range);
                if p.len() != expected {
                    return Err(ModelError::ProfileLength { got: p.len(), expected });
                }
            }
        }
        Ok(())
    }

    pub fn fingerprint(&self) -> String {
        fingerprint_of(self)
    }
}

fn heisenberg_bond(op: &mut PauliStringOperator, bond: &Bond) -> Result<(), ModelError> {
    let Bond { i, j, strength } = *bond;
    op.push(strength, vec![(i, PauliOp::Z), (j, PauliOp::Z)])?;
    // σx σx + σy σy = 2 (σ+ σ- + σ- σ+)
    op.push(2.0 * strength, vec![(i, PauliOp::Plus), (j, PauliOp::Minus)])?;
    op.push(2.0 * strength, vec![(i, PauliOp::Minus), (j, PauliOp::Plus)])?;
    Ok(())
}

pub fn build_hamiltonian(spec: &ModelSpec) -> Result<PauliStringOperator, ModelError> {
    spec.validate()?;
    let mut h = PauliStringOperator::new(spec.n_qubits);
    for bond in spec.nn_bonds().iter().chain(&spec.nnn_bonds()) {
        heisenberg_bond(&mut h, bond)?;
    }
    Ok(h.with_hermitian(true))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpinComponent {
    X,
    Z,
    Plus,
    Minus,
}

/// Total spin component in spin units (`S_z = Σ σ_z / 2`, `S_+ = Σ σ_+`).
pub fn total_spin(n_qubits: usize, component: SpinComponent) -> PauliStringOperator {
    let (coeff, op, hermitian) = match component {
        SpinComponent::X => (0.5, PauliOp::X, true),
        SpinComponent::Z => (0.5, PauliOp::Z, true),
        SpinComponent::Plus => (1.0, PauliOp::Plus, false),
        SpinComponent::Minus => (1.0, PauliOp::Minus, false),
    };
    let terms = (0..n_qubits).map(|j| PauliTerm::new(coeff, vec![(j, op)])).collect();
    PauliStringOperator { n_qubits, terms, hermitian }
}

/// One component `T^(k)_q` of a spherical tensor operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorOpSpec {
    pub label: String,
    pub rank: HalfInt,
    pub component: HalfInt,
    /// First site (0-based) the operator acts on.
    pub anchor: usize,
    pub definition: PauliStringOperator,
}

impl TensorOpSpec {
    pub fn n_qubits(&self) -> usize {
        self.definition.n_qubits
    }

    pub fn fingerprint(&self) -> String {
        fingerprint_of(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BuiltinTensor {
    T10,
    T11,
    T20,
    T22,
}

impl BuiltinTensor {
    pub const ALL: [BuiltinTensor; 4] = [BuiltinTensor::T10, BuiltinTensor::T11, BuiltinTensor::T20, BuiltinTensor::T22];

    pub fn rank(self) -> HalfInt {
        match self {
            BuiltinTensor::T10 | BuiltinTensor::T11 => HalfInt::ONE,
            BuiltinTensor::T20 | BuiltinTensor::T22 => HalfInt::from_int(2),
        }
    }

    pub fn component(self) -> HalfInt {
        match self {
            BuiltinTensor::T10 | BuiltinTensor::T20 => HalfInt::ZERO,
            BuiltinTensor::T11 => HalfInt::ONE,
            BuiltinTensor::T22 => HalfInt::from_int(2),
        }
    }
}

impl fmt::Display for BuiltinTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BuiltinTensor::T10 => "T10",
            BuiltinTensor::T11 => "T11",
            BuiltinTensor::T20 => "T20",
            BuiltinTensor::T22 => "T22",
        };
        f.write_str(s)
    }
}

impl FromStr for BuiltinTensor {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "T10" => Ok(BuiltinTensor::T10),
            "T11" => Ok(BuiltinTensor::T11),
            "T20" => Ok(BuiltinTensor::T20),
            "T22" => Ok(BuiltinTensor::T22),
            _ => Err(ModelError::UnknownOperator(s.to_string())),
        }
    }
}

/// The middle site `⌈N/2⌉` as a 0-based index.
pub fn center_site(n_qubits: usize) -> usize {
    n_qubits.div_ceil(2) - 1
}

pub fn builtin_tensor_op(name: BuiltinTensor, n_qubits: usize) -> Result<TensorOpSpec, ModelError> {
    let two_site = matches!(name, BuiltinTensor::T20 | BuiltinTensor::T22);
    if n_qubits < 1 || (two_site && n_qubits < 2) {
        return Err(ModelError::TooFewQubits(n_qubits));
    }
    let c = center_site(n_qubits);
    let mut def = PauliStringOperator::new(n_qubits);
    match name {
        BuiltinTensor::T10 => def.push(0.5, vec![(c, PauliOp::Z)])?,
        BuiltinTensor::T11 => def.push(-(0.5f64.sqrt()), vec![(c, PauliOp::Plus)])?,
        BuiltinTensor::T20 => {
            let a = 1.0 / 24f64.sqrt();
            def.push(a, vec![(c, PauliOp::Z), (c + 1, PauliOp::Z)])?;
            def.push(-a, vec![(c, PauliOp::Plus), (c + 1, PauliOp::Minus)])?;
            def.push(-a, vec![(c, PauliOp::Minus), (c + 1, PauliOp::Plus)])?;
        }
        BuiltinTensor::T22 => def.push(0.5, vec![(c, PauliOp::Plus), (c + 1, PauliOp::Plus)])?,
    }
    let hermitian = name.component() == HalfInt::ZERO;
    Ok(TensorOpSpec {
        label: name.to_string(),
        rank: name.rank(),
        component: name.component(),
        anchor: c,
        definition: def.with_hermitian(hermitian),
    })
}

pub fn builtin_tensor_op_by_name(name: &str, n_qubits: usize) -> Result<TensorOpSpec, ModelError> {
    builtin_tensor_op(name.parse()?, n_qubits)
}

/// All components `q = -k, ..., k` of one tensor operator, ascending in `q`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorFamily {
    pub rank: HalfInt,
    pub components: Vec<TensorOpSpec>,
}

impl TensorFamily {
    pub fn component(&self, q: HalfInt) -> Option<&TensorOpSpec> {
        self.components.iter().find(|c| c.component == q)
    }

    pub fn n_qubits(&self) -> usize {
        self.components[0].n_qubits()
    }
}

/// Spherical components of the spin vector of one site:
/// `S_{+1} = -σ_+/√2`, `S_0 = σ_z/2`, `S_{-1} = σ_-/√2`.
pub fn spin_vector_family(n_qubits: usize, site: usize) -> Result<TensorFamily, ModelError> {
    if site >= n_qubits {
        return Err(ModelError::SiteOutOfRange { site, n: n_qubits });
    }
    let r = 0.5f64.sqrt();
    let parts = [(-1, r, PauliOp::Minus), (0, 0.5, PauliOp::Z), (1, -r, PauliOp::Plus)];
    let components = parts
        .into_iter()
        .map(|(q, coeff, op)| {
            let mut def = PauliStringOperator::new(n_qubits);
            def.push(coeff, vec![(site, op)])?;
            Ok(TensorOpSpec {
                label: format!("S{site}[{q}]"),
                rank: HalfInt::ONE,
                component: HalfInt::from_int(q),
                anchor: site,
                definition: def.with_hermitian(q == 0),
            })
        })
        .collect::<Result<_, ModelError>>()?;
    Ok(TensorFamily { rank: HalfInt::ONE, components })
}

/// `T^(k)_q = Σ_{q'} <k, q | k1, q'; k2, q - q'> A_{q'} B_{q - q'}`.
pub fn compose_tensor(a: &TensorFamily, b: &TensorFamily, k: HalfInt, q: HalfInt) -> Result<TensorOpSpec, ModelError> {
    let (k1, k2) = (a.rank, b.rank);
    if k.twice() < (k1 - k2).abs().twice() || k.twice() > (k1 + k2).twice() || (k1 + k2 - k).twice() % 2 != 0 {
        return Err(ModelError::TriangleViolation { k, k1, k2 });
    }
    if !k.admits_projection(q) {
        return Err(ModelError::InvalidComponent { k, q });
    }
    let n = a.n_qubits();
    if b.n_qubits() != n {
        return Err(ModelError::LengthMismatch(n, b.n_qubits()));
    }
    let mut def = PauliStringOperator::new(n);
    for q1 in k1.projections() {
        let q2 = q - q1;
        if !k2.admits_projection(q2) {
            continue;
        }
        let c = cg_exact(&CgKey::new(k1, q1, k2, q2, k, q))?;
        if c == 0.0 {
            continue;
        }
        let (Some(ta), Some(tb)) = (a.component(q1), b.component(q2)) else {
            continue;
        };
        let prod = ta.definition.product(&tb.definition)?.scaled(c);
        def.terms.extend(prod.terms);
    }
    let label = format!("[{}x{}]({k},{q})", a.components[0].label, b.components[0].label);
    Ok(TensorOpSpec { label, rank: k, component: q, anchor: a.components[0].anchor.min(b.components[0].anchor), definition: def })
}

pub fn compose_family(a: &TensorFamily, b: &TensorFamily, k: HalfInt) -> Result<TensorFamily, ModelError> {
    let components = k.projections().map(|q| compose_tensor(a, b, k, q)).collect::<Result<_, _>>()?;
    Ok(TensorFamily { rank: k, components })
}

/// Rank-2 family built from the spin vectors of two sites.
pub fn quadrupole_family(n_qubits: usize, site_a: usize, site_b: usize) -> Result<TensorFamily, ModelError> {
    compose_family(&spin_vector_family(n_qubits, site_a)?, &spin_vector_family(n_qubits, site_b)?, HalfInt::from_int(2))
}

/// The full family a builtin operator belongs to, anchored where the builtin is.
pub fn builtin_family(name: BuiltinTensor, n_qubits: usize) -> Result<TensorFamily, ModelError> {
    let c = center_site(n_qubits);
    match name {
        BuiltinTensor::T10 | BuiltinTensor::T11 => spin_vector_family(n_qubits, c),
        BuiltinTensor::T20 | BuiltinTensor::T22 => {
            if c + 1 >= n_qubits {
                return Err(ModelError::TooFewQubits(n_qubits));
            }
            quadrupole_family(n_qubits, c, c + 1)
        }
    }
}
