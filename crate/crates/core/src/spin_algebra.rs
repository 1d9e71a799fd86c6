//! Angular-momentum coupling coefficients.
//!
//! Clebsch–Gordan coefficients are evaluated from the Racah closed form with
//! exact big-integer arithmetic: the squared coefficient is a rational number,
//! so the sign and the rational are computed exactly and converted to `f64`
//! once. Phases follow the Condon–Shortley convention, i.e.
//! `<j1 j1; j2 (J - j1) | J J> > 0`.
//!
//! Argument order throughout is `<J, M | j1, m1; j2, m2>`, matching the
//! Wigner–Eckart factor `<s, m | s', m'; k, q>` with the state spin first and
//! the tensor rank second.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::sync::RwLock;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpinError {
    #[error("invalid angular momentum pairing j = {j}, m = {m}")]
    InvalidProjection { j: HalfInt, m: HalfInt },
    #[error("negative spin {0}")]
    NegativeSpin(HalfInt),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("upsilon undefined at m = {m}, q = {q}: vanishing denominator coefficient")]
    UpsilonUndefined { m: HalfInt, q: HalfInt },
}

/// A half-integer stored as twice its value, so `3/2` is `HalfInt(3)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct HalfInt(i64);

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt(0);
    pub const HALF: HalfInt = HalfInt(1);
    pub const ONE: HalfInt = HalfInt(2);

    pub const fn from_twice(twice: i64) -> Self {
        HalfInt(twice)
    }

    pub const fn from_int(n: i64) -> Self {
        HalfInt(2 * n)
    }

    /// Exact conversion; `None` unless `2x` is an integer.
    pub fn from_f64(x: f64) -> Option<Self> {
        let t = 2.0 * x;
        if t.is_finite() && t == t.round() && t.abs() < 1e15 {
            Some(HalfInt(t as i64))
        } else {
            None
        }
    }

    pub const fn twice(self) -> i64 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub const fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    pub const fn abs(self) -> Self {
        HalfInt(self.0.abs())
    }

    /// Integer value, if this is an integer.
    pub fn to_integer(self) -> Option<i64> {
        self.is_integer().then_some(self.0 / 2)
    }

    /// True when `(j, m)` is a legal spin/projection pair.
    pub fn admits_projection(self, m: HalfInt) -> bool {
        self.0 >= 0 && m.0.abs() <= self.0 && (self.0 - m.0) % 2 == 0
    }

    /// Projections `-j, -j+1, ..., j`.
    pub fn projections(self) -> impl Iterator<Item = HalfInt> {
        let j = self.0;
        (-j..=j).step_by(2).map(HalfInt)
    }
}

impl fmt::Debug for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

impl Add for HalfInt {
    type Output = HalfInt;
    fn add(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 + rhs.0)
    }
}

impl Sub for HalfInt {
    type Output = HalfInt;
    fn sub(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 - rhs.0)
    }
}

impl Neg for HalfInt {
    type Output = HalfInt;
    fn neg(self) -> HalfInt {
        HalfInt(-self.0)
    }
}

impl Serialize for HalfInt {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.is_integer() {
            serializer.serialize_i64(self.0 / 2)
        } else {
            serializer.serialize_f64(self.value())
        }
    }
}

impl<'de> Deserialize<'de> for HalfInt {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let x = f64::deserialize(deserializer)?;
        HalfInt::from_f64(x)
            .ok_or_else(|| serde::de::Error::custom(format!("{x} is not a multiple of 1/2")))
    }
}

/// Arguments of `<j, m | j1, m1; j2, m2>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CgKey {
    pub j1: HalfInt,
    pub m1: HalfInt,
    pub j2: HalfInt,
    pub m2: HalfInt,
    pub j: HalfInt,
    pub m: HalfInt,
}

impl CgKey {
    pub fn new(j1: HalfInt, m1: HalfInt, j2: HalfInt, m2: HalfInt, j: HalfInt, m: HalfInt) -> Self {
        CgKey { j1, m1, j2, m2, j, m }
    }

    fn check_pairs(&self) -> Result<(), SpinError> {
        for (j, m) in [(self.j1, self.m1), (self.j2, self.m2), (self.j, self.m)] {
            if j.0 < 0 {
                return Err(SpinError::NegativeSpin(j));
            }
            if !j.admits_projection(m) {
                return Err(SpinError::InvalidProjection { j, m });
            }
        }
        Ok(())
    }

    /// Selection and triangle rules; false means the coefficient is exactly zero.
    pub fn is_allowed(&self) -> bool {
        let (j1, j2, j) = (self.j1.0, self.j2.0, self.j.0);
        self.m1.0 + self.m2.0 == self.m.0
            && j >= (j1 - j2).abs()
            && j <= j1 + j2
            && (j1 + j2 + j) % 2 == 0
    }
}

/// Source of Clebsch–Gordan coefficients. [`ExactCg`] is the reference
/// implementation; alternative providers exist so that validation code can be
/// exercised against deliberately broken coefficients.
pub trait ClebschGordan: Sync {
    fn coefficient(&self, key: &CgKey) -> Result<f64, SpinError>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ExactCg;

impl ClebschGordan for ExactCg {
    fn coefficient(&self, key: &CgKey) -> Result<f64, SpinError> {
        cg_exact(key)
    }
}

/// Memoizing wrapper around [`cg_exact`]. Concurrent inserts of the same key
/// store the same value, so last-write-wins is harmless.
#[derive(Debug, Default)]
pub struct CgCache {
    table: RwLock<HashMap<CgKey, f64>>,
}

impl CgCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.table.read().map(|t| t.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ClebschGordan for CgCache {
    fn coefficient(&self, key: &CgKey) -> Result<f64, SpinError> {
        if let Some(v) = self.table.read().ok().and_then(|t| t.get(key).copied()) {
            return Ok(v);
        }
        let v = cg_exact(key)?;
        if let Ok(mut t) = self.table.write() {
            t.insert(*key, v);
        }
        Ok(v)
    }
}

fn factorial(n: i64) -> BigUint {
    debug_assert!(n >= 0);
    let mut acc = BigUint::one();
    for i in 2..=n as u64 {
        acc *= i;
    }
    acc
}

fn factorial_int(n: i64) -> BigInt {
    BigInt::from(factorial(n))
}

/// Rational to `f64` without overflowing the intermediate factorials.
fn rational_to_f64(r: &BigRational) -> f64 {
    let num = r.numer();
    let den = r.denom();
    if num.is_zero() {
        return 0.0;
    }
    let sign = if num.is_negative() { -1.0 } else { 1.0 };
    let num = num.abs();
    let shift = 64 - (num.bits() as i64 - den.bits() as i64);
    let quotient = if shift >= 0 {
        (num << shift as usize) / den
    } else {
        num / (den << (-shift) as usize)
    };
    let q = quotient.to_f64().unwrap_or(f64::NAN);
    sign * q * 2f64.powi(-shift as i32)
}

/// Exact Clebsch–Gordan coefficient `<j, m | j1, m1; j2, m2>`.
///
/// Returns exactly `0.0` when a selection or triangle rule fails, and an
/// error when one of the `(j, m)` pairs is not a legal projection.
pub fn cg_exact(key: &CgKey) -> Result<f64, SpinError> {
    key.check_pairs()?;
    if !key.is_allowed() {
        return Ok(0.0);
    }
    // every quantity below is an integer once the rules above hold
    let h = |x: i64| x / 2;
    let (j1, m1, j2, m2, j, m) = (key.j1.0, key.m1.0, key.j2.0, key.m2.0, key.j.0, key.m.0);
    let t1 = h(j1 + j2 - j);
    let t2 = h(j1 - j2 + j);
    let t3 = h(-j1 + j2 + j);
    let t4 = h(j1 + j2 + j) + 1;
    let j1_minus = h(j1 - m1);
    let j1_plus = h(j1 + m1);
    let j2_minus = h(j2 - m2);
    let j2_plus = h(j2 + m2);
    let big_minus = h(j - m);
    let big_plus = h(j + m);

    let mut pref_num = BigInt::from(j + 1); // 2J + 1
    for n in [t1, t2, t3, big_plus, big_minus, j1_minus, j1_plus, j2_minus, j2_plus] {
        pref_num *= factorial_int(n);
    }
    let prefactor = BigRational::new(pref_num, factorial_int(t4));

    let a = h(j - j2 + m1);
    let b = h(j - j1 - m2);
    let k_min = 0.max(-a).max(-b);
    let k_max = t1.min(j1_minus).min(j2_plus);
    let mut sum = BigRational::zero();
    for k in k_min..=k_max {
        let mut den = BigInt::one();
        for n in [k, t1 - k, j1_minus - k, j2_plus - k, a + k, b + k] {
            den *= factorial_int(n);
        }
        let term = BigRational::new(BigInt::one(), den);
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    if sum.is_zero() {
        return Ok(0.0);
    }
    let sign = if sum.is_negative() { -1.0 } else { 1.0 };
    let squared = prefactor * &sum * &sum;
    Ok(sign * rational_to_f64(&squared).sqrt())
}

/// Convenience wrapper taking the six arguments in `<j, m | j1, m1; j2, m2>` order.
pub fn cg(j: HalfInt, m: HalfInt, j1: HalfInt, m1: HalfInt, j2: HalfInt, m2: HalfInt) -> Result<f64, SpinError> {
    cg_exact(&CgKey::new(j1, m1, j2, m2, j, m))
}

fn small_factorial(n: i64) -> f64 {
    (2..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// Leading-order large-`s` value of `<s + nu, m + q | s, m; k, q>`.
///
/// Valid when `s, m` are large and `nu, k, q, s - m` are of order one; the
/// neglected correction is relative `O(1/s)`.
pub fn cg_asymptotic(s: HalfInt, m: HalfInt, k: HalfInt, q: HalfInt, nu: HalfInt) -> Result<f64, SpinError> {
    let d = s - m;
    if d.0 < 0 {
        return Err(SpinError::Domain(format!("s - m = {d} is negative")));
    }
    if !d.is_integer() {
        return Err(SpinError::InvalidProjection { j: s, m });
    }
    if k.0 < 0 || s.0 < 0 {
        return Err(SpinError::NegativeSpin(if k.0 < 0 { k } else { s }));
    }
    let key = CgKey::new(s, m, k, q, s + nu, m + q);
    let pairs_ok = k.admits_projection(q) && (s + nu).0 >= 0 && (s + nu).admits_projection(m + q);
    if !pairs_ok || !key.is_allowed() {
        return Ok(0.0);
    }
    let i = |x: HalfInt| x.0 / 2;
    let d = i(d);
    let diff = nu - q;
    let value = match diff.0.signum() {
        0 => 1.0,
        1 => {
            let nq = i(diff);
            let ratio = small_factorial(i(k + nu)) * small_factorial(d + nq) * small_factorial(i(k - q))
                / (small_factorial(i(k - nu)) * small_factorial(d) * small_factorial(i(k + q)));
            ratio.sqrt() * (2.0 * s.value()).powf(-(nq as f64) / 2.0) / small_factorial(nq)
        }
        _ => {
            let qn = i(-diff);
            let ratio = small_factorial(i(k - nu)) * small_factorial(i(k + q)) * small_factorial(d)
                / (small_factorial(i(k + nu)) * small_factorial(i(k - q)) * small_factorial(d - qn));
            let sign = if qn % 2 == 0 { 1.0 } else { -1.0 };
            sign * ratio.sqrt() * (2.0 * s.value()).powf(-(qn as f64) / 2.0) / small_factorial(qn)
        }
    };
    Ok(value)
}

/// Arguments of the recoupling factor relating a composed tensor's reduced
/// elements to those of its two factors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct UpsilonArgs {
    pub s_a: HalfInt,
    pub s_ap: HalfInt,
    pub s_app: HalfInt,
    pub k: HalfInt,
    pub k1: HalfInt,
    pub k2: HalfInt,
}

impl UpsilonArgs {
    pub fn new(s_a: HalfInt, s_ap: HalfInt, s_app: HalfInt, k: HalfInt, k1: HalfInt, k2: HalfInt) -> Self {
        UpsilonArgs { s_a, s_ap, s_app, k, k1, k2 }
    }

    /// The evaluation point `m = s_a`, `q = s_a - s_ap`.
    pub fn default_point(&self) -> (HalfInt, HalfInt) {
        (self.s_a, self.s_a - self.s_ap)
    }

    /// Whether `(m, q)` makes the denominator coefficient's arguments legal.
    pub fn admits(&self, m: HalfInt, q: HalfInt) -> bool {
        self.s_a.admits_projection(m) && self.s_ap.admits_projection(m - q) && self.k.admits_projection(q)
    }
}

/// Recoupling factor
///
/// `Σ_{q'} <k,q|k1,q';k2,q-q'> <s_a,m|s_app,m-q';k1,q'> <s_app,m-q'|s_ap,m-q;k2,q-q'>`
/// divided by `<s_a,m|s_ap,m-q;k,q>`.
pub fn upsilon(args: &UpsilonArgs, m: HalfInt, q: HalfInt) -> Result<f64, SpinError> {
    upsilon_with(&ExactCg, args, m, q)
}

pub fn upsilon_with(
    provider: &dyn ClebschGordan,
    args: &UpsilonArgs,
    m: HalfInt,
    q: HalfInt,
) -> Result<f64, SpinError> {
    let UpsilonArgs { s_a, s_ap, s_app, k, k1, k2 } = *args;
    if !args.admits(m, q) {
        return Err(SpinError::UpsilonUndefined { m, q });
    }
    let den = provider.coefficient(&CgKey::new(s_ap, m - q, k, q, s_a, m))?;
    if den == 0.0 {
        return Err(SpinError::UpsilonUndefined { m, q });
    }
    let mut total = 0.0;
    for q1 in k1.projections() {
        let q2 = q - q1;
        let m_mid = m - q1;
        if !k2.admits_projection(q2) || !s_app.admits_projection(m_mid) {
            continue;
        }
        let c_tensor = provider.coefficient(&CgKey::new(k1, q1, k2, q2, k, q))?;
        if c_tensor == 0.0 {
            continue;
        }
        let c_left = provider.coefficient(&CgKey::new(s_app, m_mid, k1, q1, s_a, m))?;
        let c_right = provider.coefficient(&CgKey::new(s_ap, m - q, k2, q2, s_app, m_mid))?;
        total += c_tensor * c_left * c_right;
    }
    Ok(total / den)
}

/// Upsilon at the default evaluation point `m = s_a`, `q = s_a - s_ap`.
pub fn upsilon_default(args: &UpsilonArgs) -> Result<f64, SpinError> {
    let (m, q) = args.default_point();
    upsilon(args, m, q)
}

/// Large-spin limit of the recoupling factor:
/// `<k, s_a - s_ap | k1, s_a - s_app; k2, s_app - s_ap>`.
pub fn upsilon_asymptotic(args: &UpsilonArgs) -> Result<f64, SpinError> {
    let UpsilonArgs { s_a, s_ap, s_app, k, k1, k2 } = *args;
    let (q, q1, q2) = (s_a - s_ap, s_a - s_app, s_app - s_ap);
    if !k.admits_projection(q) || !k1.admits_projection(q1) || !k2.admits_projection(q2) {
        return Ok(0.0);
    }
    cg_exact(&CgKey::new(k1, q1, k2, q2, k, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn h(twice: i64) -> HalfInt {
        HalfInt::from_twice(twice)
    }

    fn int(n: i64) -> HalfInt {
        HalfInt::from_int(n)
    }

    #[test]
    fn halfint_display_and_parity() {
        assert_eq!(h(3).to_string(), "3/2");
        assert_eq!(int(2).to_string(), "2");
        assert!(int(1).admits_projection(int(-1)));
        assert!(!int(1).admits_projection(h(1)));
        assert!(!h(1).admits_projection(h(3)));
        assert_eq!(h(3).projections().count(), 4);
    }

    #[test]
    fn halfint_serde_roundtrip() {
        let v: Vec<HalfInt> = serde_json::from_str("[0.5, 1, 1.5, -2]").unwrap();
        assert_eq!(v, vec![h(1), int(1), h(3), int(-2)]);
        assert_eq!(serde_json::to_string(&v).unwrap(), "[0.5,1,1.5,-2]");
        assert!(serde_json::from_str::<HalfInt>("0.3").is_err());
    }

    #[test]
    fn stretched_coefficient_is_one() {
        assert_eq!(cg(int(1), int(1), h(1), h(1), h(1), h(1)).unwrap(), 1.0);
        assert_eq!(cg(h(7), h(7), int(2), int(2), h(3), h(3)).unwrap(), 1.0);
    }

    #[test]
    fn singlet_and_quintet_values() {
        // product-space diagonalization values, see tests/cg_oracle.rs
        assert_abs_diff_eq!(cg(int(0), int(0), h(1), h(1), h(1), h(-1)).unwrap(), 0.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(cg(int(0), int(0), h(1), h(-1), h(1), h(1)).unwrap(), -(0.5f64.sqrt()), epsilon = 1e-15);
        assert_abs_diff_eq!(cg(int(2), int(0), int(1), int(0), int(1), int(0)).unwrap(), (2.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        assert_eq!(cg(int(1), int(0), int(1), int(0), int(1), int(0)).unwrap(), 0.0);
    }

    #[test]
    fn selection_rules_give_exact_zero() {
        assert_eq!(cg(int(1), int(1), h(1), h(1), h(1), h(-1)).unwrap(), 0.0);
        assert_eq!(cg(int(3), int(0), h(1), h(1), h(1), h(-1)).unwrap(), 0.0);
    }

    #[test]
    fn invalid_projection_is_an_error() {
        let err = cg(int(1), int(0), h(1), h(3), h(1), h(-3)).unwrap_err();
        assert!(matches!(err, SpinError::InvalidProjection { .. }));
        assert!(cg(int(1), h(1), int(1), int(0), int(0), int(0)).is_err());
    }

    #[test]
    fn large_arguments_stay_accurate() {
        // <s+1, s+1 | s, s; 1, 1> = 1 for any s
        let s = int(600);
        assert_eq!(cg(s + int(1), s + int(1), s, s, int(1), int(1)).unwrap(), 1.0);
        // <s, m | s, m; 1, 0> = m / sqrt(s(s+1))
        let (s, m) = (500.0, 123.0);
        let v = cg(int(500), int(123), int(500), int(123), int(1), int(0)).unwrap();
        assert!((v - m / (s * (s + 1.0f64)).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn orthogonality_over_m1() {
        for tj1 in 0..=16i64 {
            for tj2 in 0..=16i64 {
                let (j1, j2) = (h(tj1), h(tj2));
                let mut tj = (tj1 - tj2).abs();
                while tj <= tj1 + tj2 {
                    let j = h(tj);
                    for m in j.projections() {
                        let total: f64 = j1
                            .projections()
                            .filter(|&m1| j2.admits_projection(m - m1))
                            .map(|m1| cg(j, m, j1, m1, j2, m - m1).unwrap().powi(2))
                            .sum();
                        assert!((total - 1.0).abs() < 1e-12, "j1={j1} j2={j2} j={j} m={m}: {total}");
                    }
                    tj += 2;
                }
            }
        }
    }

    proptest! {
        #[test]
        fn completeness_over_total_spin(tj1 in 0i64..=16, tj2 in 0i64..=16, a in 0i64..=16, b in 0i64..=16) {
            let (j1, j2) = (h(tj1), h(tj2));
            let m1 = h(-tj1 + 2 * (a % (tj1 + 1)));
            let m2 = h(-tj2 + 2 * (b % (tj2 + 1)));
            let mut total = 0.0;
            let mut tj = (tj1 - tj2).abs();
            while tj <= tj1 + tj2 {
                if h(tj).admits_projection(m1 + m2) {
                    total += cg(h(tj), m1 + m2, j1, m1, j2, m2).unwrap().powi(2);
                }
                tj += 2;
            }
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn symmetry_under_exchange(tj1 in 0i64..=10, tj2 in 0i64..=10, a in 0i64..=10, b in 0i64..=10, c in 0i64..=10) {
            // <J M|j1 m1; j2 m2> = (-1)^{j1+j2-J} <J M|j2 m2; j1 m1>
            let (j1, j2) = (h(tj1), h(tj2));
            let m1 = h(-tj1 + 2 * (a % (tj1 + 1)));
            let m2 = h(-tj2 + 2 * (b % (tj2 + 1)));
            let tjs: Vec<i64> = ((tj1 - tj2).abs()..=tj1 + tj2).step_by(2).collect();
            let j = h(tjs[(c as usize) % tjs.len()]);
            prop_assume!(j.admits_projection(m1 + m2));
            let lhs = cg(j, m1 + m2, j1, m1, j2, m2).unwrap();
            let rhs = cg(j, m1 + m2, j2, m2, j1, m1).unwrap();
            let sign = if ((tj1 + tj2 - j.twice()) / 2) % 2 == 0 { 1.0 } else { -1.0 };
            prop_assert!((lhs - sign * rhs).abs() < 1e-13);
        }
    }

    #[test]
    fn cache_matches_exact() {
        let cache = CgCache::new();
        let key = CgKey::new(int(2), int(1), int(1), int(-1), int(2), int(0));
        let a = cache.coefficient(&key).unwrap();
        let b = cache.coefficient(&key).unwrap();
        assert_eq!(a, cg_exact(&key).unwrap());
        assert_eq!(a, b);
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn asymptotic_examples() {
        assert_eq!(cg_asymptotic(int(100), int(98), int(1), int(1), int(1)).unwrap(), 1.0);
        let v = cg_asymptotic(int(100), int(99), int(1), int(0), int(1)).unwrap();
        assert_abs_diff_eq!(v, 2.0 / 200f64.sqrt(), epsilon = 1e-14);
        // m + q exceeds s + nu: forbidden, and the exact coefficient agrees
        assert_eq!(cg_asymptotic(int(100), int(100), int(1), int(1), int(0)).unwrap(), 0.0);
        assert_eq!(cg(int(100), int(101), int(100), int(100), int(1), int(1)).unwrap_or(0.0), 0.0);
        let v = cg_asymptotic(int(100), int(98), int(1), int(1), int(0)).unwrap();
        assert_abs_diff_eq!(v, -2.0 / 200f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn asymptotic_tracks_exact_at_large_s() {
        let s = int(400);
        for (k, q, nu, d) in [(1, 1, 1, 2), (1, 0, 1, 1), (1, 1, 0, 2), (2, 0, -1, 2), (2, -1, 1, 3)] {
            let (k, q, nu) = (int(k), int(q), int(nu));
            let m = s - int(d);
            let exact = cg(s + nu, m + q, s, m, k, q).unwrap();
            let approx = cg_asymptotic(s, m, k, q, nu).unwrap();
            assert!((exact - approx).abs() <= 0.02 * exact.abs(), "{k} {q} {nu} {d}: {exact} vs {approx}");
        }
    }

    #[test]
    fn asymptotic_rejects_negative_s_minus_m() {
        assert!(matches!(cg_asymptotic(int(10), int(11), int(1), int(0), int(0)), Err(SpinError::Domain(_))));
    }

    #[test]
    fn upsilon_trivial_case() {
        let args = UpsilonArgs::new(int(0), int(0), int(0), int(0), int(0), int(0));
        assert_eq!(upsilon(&args, int(0), int(0)).unwrap(), 1.0);
    }

    #[test]
    fn upsilon_independent_of_evaluation_point() {
        let args = UpsilonArgs::new(int(2), int(2), int(2), int(2), int(1), int(1));
        let reference = upsilon_default(&args).unwrap();
        for (m, q) in [(2, 0), (1, 0), (0, 0), (1, 1), (-1, -1), (0, 2)] {
            let v = upsilon(&args, int(m), int(q)).unwrap();
            assert!((v - reference).abs() < 1e-10, "(m={m}, q={q}): {v} vs {reference}");
        }
    }

    #[test]
    fn upsilon_undefined_is_reported() {
        // <1,0|1,0;1,0> vanishes
        let args = UpsilonArgs::new(int(1), int(1), int(1), int(1), int(1), int(1));
        assert_eq!(
            upsilon(&args, int(0), int(0)),
            Err(SpinError::UpsilonUndefined { m: int(0), q: int(0) })
        );
        assert!(upsilon(&args, int(1), int(0)).is_ok());
    }

    #[test]
    fn upsilon_asymptotic_values() {
        let args = UpsilonArgs::new(int(5), int(5), int(5), int(0), int(1), int(1));
        assert_abs_diff_eq!(upsilon_asymptotic(&args).unwrap(), -(1.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        let outside = UpsilonArgs::new(int(5), int(5), int(5), int(3), int(1), int(1));
        assert_eq!(upsilon_asymptotic(&outside).unwrap(), 0.0);
    }
}
