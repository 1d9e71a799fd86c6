//! The full validation battery run by `validate`.

use serde::Serialize;

use super::invariants::{
    check_basis_orthonormality, check_block_m_independence, check_charge_conservation, check_eigen_relations, check_exact_oracle, check_ladder,
    check_sum_rule, check_tensor_commutators,
};
use super::{
    admissible_upsilon_points, cg_asymptotic_scan, check_composition_identity, check_upsilon_independence, check_wigner_eckart_on,
    upsilon_asymptotic_scan, ConsistencyError, IdentityReport, SlopeTolerance, Tolerance,
};
use crate::model_ops::{builtin_family, builtin_tensor_op, center_site, spin_vector_family, BuiltinTensor, ModelSpec};
use crate::spectral::{operator_tables, ChainSpectra, StateBank};
use crate::spin_algebra::{cg_exact, CgKey, ClebschGordan, HalfInt, SpinError, UpsilonArgs};

/// Largest chain the battery runs on; dense operators are materialized.
pub const MAX_VALIDATION_QUBITS: usize = 8;

/// Coupling provider that flips the sign of every coefficient with `m1 < 0`.
/// Used to confirm that the battery notices corrupted coefficients.
#[derive(Clone, Copy, Debug, Default)]
pub struct SignFlipCg;

impl ClebschGordan for SignFlipCg {
    fn coefficient(&self, key: &CgKey) -> Result<f64, SpinError> {
        let v = cg_exact(key)?;
        Ok(if key.m1.twice() < 0 { -v } else { v })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationSummary {
    pub n_qubits: usize,
    pub clamped_from: Option<usize>,
    pub reports: Vec<IdentityReport>,
    pub passed: bool,
}

impl ValidationSummary {
    /// The report furthest outside (or closest to) its tolerance.
    pub fn worst(&self) -> Option<&IdentityReport> {
        self.reports.iter().max_by(|a, b| {
            let key = |r: &IdentityReport| (!r.passed, r.severity());
            let (ka, kb) = (key(a), key(b));
            ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
        })
    }

    pub fn failures(&self) -> impl Iterator<Item = &IdentityReport> {
        self.reports.iter().filter(|r| !r.passed)
    }
}

/// The same model on `n` qubits; explicit coupling profiles are dropped when
/// their length no longer fits.
pub fn resized(model: &ModelSpec, n: usize) -> ModelSpec {
    let mut out = model.clone();
    out.n_qubits = n;
    if out.validate().is_err() {
        out.nn_couplings = None;
        out.nnn_couplings = None;
    }
    out
}

/// Recoupling-factor argument sets used for the independence check.
pub fn upsilon_samples() -> Vec<UpsilonArgs> {
    let h = HalfInt::from_twice;
    vec![
        UpsilonArgs::new(h(4), h(4), h(4), h(4), h(2), h(2)),
        UpsilonArgs::new(h(4), h(2), h(2), h(2), h(2), h(2)),
        UpsilonArgs::new(h(6), h(2), h(4), h(4), h(2), h(2)),
        UpsilonArgs::new(h(5), h(3), h(3), h(2), h(2), h(2)),
        UpsilonArgs::new(h(4), h(4), h(2), h(0), h(2), h(2)),
    ]
}

/// `(k, q, ν, s - m)` combinations for the coupling-coefficient scan.
pub fn cg_scan_cases() -> Vec<(HalfInt, HalfInt, HalfInt, HalfInt)> {
    let h = HalfInt::from_int;
    vec![(h(1), h(0), h(0), h(1)), (h(1), h(1), h(1), h(2)), (h(2), h(0), h(1), h(3)), (h(2), h(1), h(-1), h(2)), (h(2), h(-2), h(0), h(4))]
}

pub const CG_SCAN_GRID: [i64; 6] = [20, 40, 80, 160, 320, 640];
pub const UPSILON_SCAN_GRID: [i64; 3] = [40, 80, 160];

fn push(reports: &mut Vec<IdentityReport>, r: Result<IdentityReport, ConsistencyError>, name: &str, instance: String) {
    reports.push(r.unwrap_or_else(|e| {
        let mut f = IdentityReport::new(name, instance, f64::INFINITY, f64::INFINITY, Tolerance::abs(0.0));
        f.notes.push(format!("error: {e}"));
        f.passed = false;
        f
    }));
}

/// Runs every check on `model`, clamping the chain length to
/// [`MAX_VALIDATION_QUBITS`]. All coupling coefficients entering the
/// reduced-element machinery come from `provider`.
pub fn run_validation(provider: &dyn ClebschGordan, model: &ModelSpec) -> Result<ValidationSummary, ConsistencyError> {
    let clamped_from = (model.n_qubits > MAX_VALIDATION_QUBITS).then_some(model.n_qubits);
    if let Some(n) = clamped_from {
        log::warn!("validation runs on at most {MAX_VALIDATION_QUBITS} qubits; clamping N = {n}");
    }
    let model = resized(model, model.n_qubits.min(MAX_VALIDATION_QUBITS));
    model.validate()?;
    let n = model.n_qubits;
    let mut reports = Vec::new();

    for k in 2..=n {
        let m = resized(&model, k);
        if m.validate().is_ok() {
            push(&mut reports, check_exact_oracle(&m), "exact_oracle", format!("N={k}"));
        }
    }
    push(&mut reports, check_basis_orthonormality(n), "basis_orthonormality", format!("N={n}"));
    push(&mut reports, check_eigen_relations(n), "eigen_relations", format!("N={n}"));
    push(&mut reports, check_ladder(n), "ladder_consistency", format!("N={n}"));
    push(&mut reports, check_charge_conservation(&model), "charge_conservation", format!("N={n}"));
    push(&mut reports, check_block_m_independence(&model), "block_m_independence", format!("N={n}"));
    push(&mut reports, super::invariants::check_trace(&model), "trace_consistency", format!("N={n}"));

    let spectra = ChainSpectra::compute(&model)?;
    for name in BuiltinTensor::ALL {
        let op = builtin_tensor_op(name, n)?;
        push(&mut reports, check_sum_rule(&op, &spectra), "sum_rule", format!("N={n} op={name}"));
    }
    for name in [BuiltinTensor::T10, BuiltinTensor::T20] {
        if name == BuiltinTensor::T20 && n < 2 {
            continue;
        }
        let family = builtin_family(name, n)?;
        push(&mut reports, check_tensor_commutators(&family), "tensor_commutators", format!("N={n} {name}"));
        push(&mut reports, check_wigner_eckart_on(provider, &family, &spectra), "wigner_eckart", format!("N={n} {name}"));
    }
    for (a, b) in [(BuiltinTensor::T10, BuiltinTensor::T11), (BuiltinTensor::T20, BuiltinTensor::T22)] {
        push(&mut reports, check_q_independence(provider, &spectra, a, b), "q_independence", format!("N={n} {a} vs {b}"));
    }

    let c = center_site(n).min(n - 2);
    let sa = spin_vector_family(n, c)?;
    let sb = spin_vector_family(n, c + 1)?;
    let sf = spin_vector_family(n, 0)?;
    let sl = spin_vector_family(n, n - 1)?;
    let h = HalfInt::from_int;
    let cases = [(&sa, &sb, h(2), h(0)), (&sa, &sb, h(2), h(1)), (&sa, &sb, h(2), h(2)), (&sa, &sb, h(1), h(0)), (&sa, &sb, h(0), h(0)), (&sf, &sl, h(2), h(-1))];
    for (a, b, k, q) in cases {
        let inst = format!("N={n} k={k} q={q}");
        push(&mut reports, check_composition_identity(provider, a, b, k, q, &model), "composition_identity", inst);
    }

    for args in upsilon_samples() {
        let points = admissible_upsilon_points(&args);
        let inst = format!("s=({}, {}, {})", args.s_a, args.s_ap, args.s_app);
        push(&mut reports, check_upsilon_independence(provider, &args, &points), "upsilon_independence", inst);
    }
    let grid: Vec<HalfInt> = CG_SCAN_GRID.iter().map(|&s| HalfInt::from_int(s)).collect();
    for (k, q, nu, d) in cg_scan_cases() {
        let tol = SlopeTolerance { expected: -1.0, tol: 0.2 };
        push(&mut reports, cg_asymptotic_scan(k, q, nu, d, &grid, tol), "cg_asymptotic_scan", format!("k={k} q={q} nu={nu}"));
    }
    let tol = SlopeTolerance { expected: -1.0, tol: 0.3 };
    push(
        &mut reports,
        upsilon_asymptotic_scan((0, 1, 0), (h(2), h(1), h(1)), &UPSILON_SCAN_GRID, tol),
        "upsilon_asymptotic_scan",
        "offsets=(0, 1, 0)".into(),
    );

    let passed = reports.iter().all(|r| r.passed);
    Ok(ValidationSummary { n_qubits: n, clamped_from, reports, passed })
}

/// Reduced elements of two components of the same builtin tensor, each at its
/// default projections.
pub fn check_q_independence(
    provider: &dyn ClebschGordan,
    spectra: &ChainSpectra,
    a: BuiltinTensor,
    b: BuiltinTensor,
) -> Result<IdentityReport, ConsistencyError> {
    let n = spectra.n_qubits();
    let bank = StateBank::new();
    let (ta, _) = operator_tables(provider, &bank, spectra, &builtin_tensor_op(a, n)?, None)?;
    let (tb, _) = operator_tables(provider, &bank, spectra, &builtin_tensor_op(b, n)?, None)?;
    let mut abs: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (key, t) in &ta.tables {
        scale = scale.max(t.elements.amax());
        abs = match tb.tables.get(key) {
            Some(o) => abs.max((&t.elements - &o.elements).amax()),
            None => f64::INFINITY,
        };
    }
    let rel = if scale > 0.0 { abs / scale } else { abs };
    Ok(IdentityReport::new("q_independence", format!("N={n} {a} vs {b}"), abs, rel, Tolerance::abs(1e-8)))
}
