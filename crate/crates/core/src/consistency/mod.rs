//! Numerical checks of the exact identities behind the reduced-element
//! formalism and of the large-spin coupling asymptotics.

pub mod invariants;
pub mod suite;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model_ops::{compose_tensor, ModelError, ModelSpec, TensorFamily, TensorOpSpec};
use crate::spectral::{operator_tables, ChainSpectra, OperatorTables, SpectralError, StateBank};
use crate::spin_algebra::{cg_asymptotic, cg_exact, upsilon_asymptotic, upsilon_with, CgKey, ClebschGordan, HalfInt, SpinError, UpsilonArgs};

#[derive(Debug, Error)]
pub enum ConsistencyError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Spin(#[from] SpinError),
    #[error(transparent)]
    Basis(#[from] crate::coupled_basis::BasisError),
    #[error("need at least {needed} admissible points, found {found}")]
    TooFewPoints { needed: usize, found: usize },
    #[error("no admissible evaluation point for the recoupling factor at s = {s_a}, s' = {s_ap}, s'' = {s_app}")]
    UpsilonUndefinedEverywhere { s_a: HalfInt, s_ap: HalfInt, s_app: HalfInt },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub const fn abs(abs: f64) -> Self {
        Tolerance { abs, rel: f64::INFINITY }
    }

    /// Passes when either bound holds.
    pub fn accepts(&self, abs_dev: f64, rel_dev: f64) -> bool {
        abs_dev <= self.abs || rel_dev <= self.rel
    }
}

/// Outcome of one identity or invariant check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub name: String,
    pub instance: String,
    pub max_abs_deviation: f64,
    pub max_rel_deviation: f64,
    pub tolerance: Tolerance,
    pub passed: bool,
    /// Fitted log-log slope, for convergence scans.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl IdentityReport {
    pub fn new(name: impl Into<String>, instance: impl Into<String>, abs_dev: f64, rel_dev: f64, tolerance: Tolerance) -> Self {
        let (abs_dev, rel_dev) = (abs_dev.abs(), rel_dev.abs());
        IdentityReport {
            name: name.into(),
            instance: instance.into(),
            max_abs_deviation: abs_dev,
            max_rel_deviation: rel_dev,
            tolerance,
            passed: tolerance.accepts(abs_dev, rel_dev) && abs_dev.is_finite(),
            slope: None,
            notes: Vec::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    /// How far outside its tolerance the report lies; at most 1 when passing.
    pub fn severity(&self) -> f64 {
        if let Some(slope) = self.slope {
            if !self.passed {
                return 1.0 + slope.abs();
            }
        }
        let a = self.max_abs_deviation / self.tolerance.abs;
        let r = if self.tolerance.rel.is_finite() { self.max_rel_deviation / self.tolerance.rel } else { a };
        if a.is_nan() { f64::INFINITY } else { a.min(r) }
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Maximum absolute entrywise difference and that difference relative to the
/// largest reference magnitude.
fn table_deviation(reference: &OperatorTables, other: &OperatorTables) -> (f64, f64) {
    let mut abs: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (key, t) in &reference.tables {
        scale = scale.max(t.elements.amax());
        match other.tables.get(key) {
            Some(o) => abs = abs.max((&t.elements - &o.elements).amax()),
            None => abs = f64::INFINITY,
        }
    }
    (abs, if scale > 0.0 { abs / scale } else { abs })
}

/// Evaluates the recoupling factor at the default point, falling back to the
/// other admissible `(m, q)` when its denominator vanishes.
fn upsilon_auto(provider: &dyn ClebschGordan, args: &UpsilonArgs, notes: &mut Vec<String>) -> Result<f64, ConsistencyError> {
    let (m0, q0) = args.default_point();
    match upsilon_with(provider, args, m0, q0) {
        Ok(v) => return Ok(v),
        Err(SpinError::UpsilonUndefined { .. }) => {}
        Err(e) => return Err(e.into()),
    }
    for q in args.k.projections() {
        for m in args.s_a.projections() {
            if !args.admits(m, q) {
                continue;
            }
            if let Ok(v) = upsilon_with(provider, args, m, q) {
                notes.push(format!("upsilon({}, {}, {}) evaluated at m = {m}, q = {q}", args.s_a, args.s_ap, args.s_app));
                return Ok(v);
            }
        }
    }
    Err(ConsistencyError::UpsilonUndefinedEverywhere { s_a: args.s_a, s_ap: args.s_ap, s_app: args.s_app })
}

/// Component of a family whose reduced elements stand for the whole family:
/// `q = 0` when present.
fn representative(family: &TensorFamily) -> &TensorOpSpec {
    family.component(HalfInt::ZERO).unwrap_or(&family.components[0])
}

/// Reduced elements of `T = [A ⊗ B]^(k)_q` computed directly, against the sum
/// over every intermediate sector `s''` of the recoupling factor times the
/// product of the factors' reduced elements.
pub fn check_composition_identity(
    provider: &dyn ClebschGordan,
    a: &TensorFamily,
    b: &TensorFamily,
    k: HalfInt,
    q: HalfInt,
    model: &ModelSpec,
) -> Result<IdentityReport, ConsistencyError> {
    let composed = compose_tensor(a, b, k, q)?;
    let spectra = ChainSpectra::compute(model)?;
    let bank = StateBank::new();
    let (lhs, _) = operator_tables(provider, &bank, &spectra, &composed, None)?;
    let (ta, _) = operator_tables(provider, &bank, &spectra, representative(a), None)?;
    let (tb, _) = operator_tables(provider, &bank, &spectra, representative(b), None)?;
    let mut notes = Vec::new();
    let mut rhs_tables = BTreeMap::new();
    let mut zero_sectors = 0usize;
    for (&(s_a, s_ap), t) in &lhs.tables {
        let mut rhs = t.elements.clone() * 0.0;
        for s_app in spectra.spins() {
            let args = UpsilonArgs::new(s_a, s_ap, s_app, k, a.rank, b.rank);
            let (Some(ra), Some(rb)) = (ta.get(s_a, s_app), tb.get(s_app, s_ap)) else {
                let y = upsilon_auto(provider, &args, &mut notes)?;
                if y != 0.0 {
                    return Err(ConsistencyError::Invalid(format!(
                        "nonzero recoupling factor {y} for a sector pair forbidden to a factor (s'' = {s_app})"
                    )));
                }
                zero_sectors += 1;
                continue;
            };
            let y = upsilon_auto(provider, &args, &mut notes)?;
            rhs += (&ra.elements * &rb.elements) * y;
        }
        let mut table = t.clone();
        table.elements = rhs;
        rhs_tables.insert((s_a, s_ap), table);
    }
    let rhs = OperatorTables { tables: rhs_tables, ..lhs.clone() };
    let (abs, rel) = table_deviation(&lhs, &rhs);
    let instance = format!("N={} A={} B={} k={k} q={q}", model.n_qubits, a.components[0].label, b.components[0].label);
    let mut report = IdentityReport::new("composition_identity", instance, abs, rel, Tolerance::abs(1e-8));
    report.notes = notes;
    report.notes.push(format!("{} sector pairs, {zero_sectors} intermediate sectors forbidden to a factor", lhs.tables.len()));
    Ok(report)
}

/// Spread of the recoupling factor over a sample of `(m, q)` points.
pub fn check_upsilon_independence(
    provider: &dyn ClebschGordan,
    args: &UpsilonArgs,
    points: &[(HalfInt, HalfInt)],
) -> Result<IdentityReport, ConsistencyError> {
    let mut values = Vec::new();
    let mut notes = Vec::new();
    for &(m, q) in points {
        match upsilon_with(provider, args, m, q) {
            Ok(v) => values.push(v),
            Err(SpinError::UpsilonUndefined { .. }) => notes.push(format!("skipped undefined point m = {m}, q = {q}")),
            Err(e) => return Err(e.into()),
        }
    }
    if values.len() < 2 {
        return Err(ConsistencyError::TooFewPoints { needed: 2, found: values.len() });
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = lo.abs().max(hi.abs());
    let spread = hi - lo;
    let instance = format!(
        "s=({}, {}, {}) k={} k1={} k2={} points={}",
        args.s_a,
        args.s_ap,
        args.s_app,
        args.k,
        args.k1,
        args.k2,
        values.len()
    );
    let mut r = IdentityReport::new("upsilon_independence", instance, spread, if scale > 0.0 { spread / scale } else { spread }, Tolerance::abs(1e-10));
    r.notes = notes;
    Ok(r)
}

/// Every admissible `(m, q)` of the recoupling factor with a nonzero
/// denominator.
pub fn admissible_upsilon_points(args: &UpsilonArgs) -> Vec<(HalfInt, HalfInt)> {
    let mut out = Vec::new();
    for q in args.k.projections() {
        for m in args.s_a.projections() {
            if args.admits(m, q) {
                let den = cg_exact(&CgKey::new(args.s_ap, m - q, args.k, q, args.s_a, m)).unwrap_or(0.0);
                if den != 0.0 {
                    out.push((m, q));
                }
            }
        }
    }
    out
}

/// Slope acceptance for convergence scans.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeTolerance {
    pub expected: f64,
    pub tol: f64,
}

/// Convergence of the recoupling factor to its large-spin form. Spins are
/// `s + offsets`, with `s` running over `grid`.
pub fn upsilon_asymptotic_scan(
    offsets: (i64, i64, i64),
    ranks: (HalfInt, HalfInt, HalfInt),
    grid: &[i64],
    slope_tol: SlopeTolerance,
) -> Result<IdentityReport, ConsistencyError> {
    let (k, k1, k2) = ranks;
    let mut points = Vec::new();
    let mut max_abs: f64 = 0.0;
    let mut max_rel: f64 = 0.0;
    for &s in grid {
        let sp = |d: i64| HalfInt::from_int(s + d);
        let args = UpsilonArgs::new(sp(offsets.0), sp(offsets.1), sp(offsets.2), k, k1, k2);
        let exact = crate::spin_algebra::upsilon_default(&args)?;
        let asym = upsilon_asymptotic(&args)?;
        let dev = (exact - asym).abs();
        max_abs = max_abs.max(dev);
        if asym != 0.0 {
            max_rel = max_rel.max(dev / asym.abs());
        }
        points.push((s as f64, dev));
    }
    if points.iter().filter(|p| p.1 > 0.0).count() < 2 {
        return Err(ConsistencyError::TooFewPoints { needed: 2, found: points.len() });
    }
    let slope = log_log_slope(&points);
    let instance = format!("offsets={offsets:?} k={k} k1={k1} k2={k2} s={grid:?}");
    let mut r = IdentityReport::new("upsilon_asymptotic_scan", instance, max_abs, max_rel, Tolerance::abs(f64::INFINITY));
    r.slope = Some(slope);
    r.passed = (slope - slope_tol.expected).abs() <= slope_tol.tol;
    Ok(r)
}

/// Relative error of the leading-order coupling coefficient against the exact
/// one, `<s+ν, m+q | s, m; k, q>` with `m = s - s_minus_m`, and its log-log
/// slope over the grid.
pub fn cg_asymptotic_scan(
    k: HalfInt,
    q: HalfInt,
    nu: HalfInt,
    s_minus_m: HalfInt,
    grid: &[HalfInt],
    slope_tol: SlopeTolerance,
) -> Result<IdentityReport, ConsistencyError> {
    let mut points = Vec::new();
    let mut notes = Vec::new();
    let mut max_abs: f64 = 0.0;
    let mut max_rel: f64 = 0.0;
    for &s in grid {
        let m = s - s_minus_m;
        let exact = cg_exact(&CgKey::new(s, m, k, q, s + nu, m + q))?;
        if exact == 0.0 {
            notes.push(format!("s = {s}: exact coefficient vanishes, point skipped"));
            continue;
        }
        let asym = cg_asymptotic(s, m, k, q, nu)?;
        let rel = ((exact - asym) / exact).abs();
        max_abs = max_abs.max((exact - asym).abs());
        max_rel = max_rel.max(rel);
        points.push((s.value(), rel));
    }
    let instance = format!("k={k} q={q} nu={nu} s-m={s_minus_m}");
    if points.iter().filter(|p| p.1 > 0.0).count() < 2 {
        let mut r = IdentityReport::new("cg_asymptotic_scan", instance, max_abs, max_rel, Tolerance::abs(1e-12));
        r.notes = notes;
        r.notes.push("fewer than two nonzero errors; slope not fitted".into());
        return Ok(r);
    }
    let slope = log_log_slope(&points);
    let mut r = IdentityReport::new("cg_asymptotic_scan", instance, max_abs, max_rel, Tolerance::abs(f64::INFINITY));
    r.slope = Some(slope);
    r.passed = (slope - slope_tol.expected).abs() <= slope_tol.tol;
    r.notes = notes;
    Ok(r)
}

/// Reduced elements inferred from every component of a family and every
/// admissible `(m, m')` agree with those of the family's representative
/// component at its default projections.
pub fn check_wigner_eckart(provider: &dyn ClebschGordan, family: &TensorFamily, model: &ModelSpec) -> Result<IdentityReport, ConsistencyError> {
    let spectra = ChainSpectra::compute(model)?;
    check_wigner_eckart_on(provider, family, &spectra)
}

pub fn check_wigner_eckart_on(
    provider: &dyn ClebschGordan,
    family: &TensorFamily,
    spectra: &ChainSpectra,
) -> Result<IdentityReport, ConsistencyError> {
    let bank = StateBank::new();
    let (reference, _) = operator_tables(provider, &bank, spectra, representative(family), None)?;
    let mut abs: f64 = 0.0;
    let mut scale: f64 = 0.0;
    let mut evaluations = 0usize;
    for op in &family.components {
        for (&(s_row, s_col), r) in &reference.tables {
            scale = scale.max(r.elements.amax());
            let (row, col) = (spectra.block(s_row)?, spectra.block(s_col)?);
            for m_prime in s_col.projections() {
                let m = m_prime + op.component;
                if !s_row.admits_projection(m) {
                    continue;
                }
                let cg = provider.coefficient(&CgKey::new(s_col, m_prime, op.rank, op.component, s_row, m))?;
                if cg.abs() <= 1e-12 {
                    continue;
                }
                let t = crate::spectral::reduced_elements_at(provider, &bank, op, row, col, m, m_prime)?;
                abs = abs.max((&t.elements - &r.elements).amax());
                evaluations += 1;
            }
        }
    }
    let rel = if scale > 0.0 { abs / scale } else { abs };
    let instance = format!("N={} family={} rank={}", spectra.n_qubits(), family.components[0].label, family.rank);
    Ok(IdentityReport::new("wigner_eckart", instance, abs, rel, Tolerance { abs: 1e-10, rel: 1e-8 })
        .with_note(format!("{evaluations} tables compared against {} reference tables", reference.tables.len())))
}
