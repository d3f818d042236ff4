//! Real quadratic fields Q(√D): ring of integers, embeddings, units and
//! lattice enumeration.
//!
//! Elements are stored as exact integer coordinates (a, b) for a + bω with
//! ω = √D (D ≡ 2, 3 mod 4) or ω = (1 + √D)/2 (D ≡ 1 mod 4). Embeddings are
//! evaluated in floating point on demand.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Continued-fraction steps allowed before giving up on the unit search.
pub const UNIT_SEARCH_CAP: usize = 10_000;
/// Default cap on the number of candidate points in [`enumerate_lattice`].
pub const DEFAULT_LATTICE_CAP: usize = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("D = {0} must be a squarefree integer ≥ 2")]
    InvalidDiscriminant(i64),
    #[error("continued fraction of ω did not yield a unit within {0} steps")]
    IterationLimit(usize),
    #[error("box contains about {estimate} candidate points, above the cap {cap}")]
    BoxTooLarge { estimate: u128, cap: usize },
    #[error("invalid box: each interval needs finite bounds with lo ≤ hi")]
    InvalidBox,
    #[error("element is not a unit (norm {0})")]
    NotAUnit(BigInt),
    #[error("elements belong to different fields")]
    FieldMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OmegaKind {
    /// ω = √D
    Sqrt,
    /// ω = (1 + √D)/2
    HalfOnePlusSqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuadraticField {
    d: i64,
    omega: OmegaKind,
}

fn is_squarefree(n: i64) -> bool {
    let mut m = n;
    let mut p = 2i64;
    while p * p <= m {
        if m % p == 0 {
            m /= p;
            if m % p == 0 {
                return false;
            }
        }
        p += 1;
    }
    true
}

fn isqrt(n: i64) -> i64 {
    let mut r = (n as f64).sqrt() as i64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

impl QuadraticField {
    pub fn new(d: i64) -> Result<Self, FieldError> {
        if d < 2 || !is_squarefree(d) {
            return Err(FieldError::InvalidDiscriminant(d));
        }
        let omega = if d.rem_euclid(4) == 1 {
            OmegaKind::HalfOnePlusSqrt
        } else {
            OmegaKind::Sqrt
        };
        Ok(Self { d, omega })
    }

    pub fn d(&self) -> i64 {
        self.d
    }

    pub fn omega_kind(&self) -> OmegaKind {
        self.omega
    }

    /// Trace of ω.
    pub fn omega_trace(&self) -> i64 {
        match self.omega {
            OmegaKind::Sqrt => 0,
            OmegaKind::HalfOnePlusSqrt => 1,
        }
    }

    /// Norm of ω.
    pub fn omega_norm(&self) -> i64 {
        match self.omega {
            OmegaKind::Sqrt => -self.d,
            OmegaKind::HalfOnePlusSqrt => (1 - self.d) / 4,
        }
    }

    /// (σ₁(ω), σ₂(ω)) with σ₁(ω) > σ₂(ω).
    pub fn omega_embeddings(&self) -> (f64, f64) {
        let s = (self.d as f64).sqrt();
        match self.omega {
            OmegaKind::Sqrt => (s, -s),
            OmegaKind::HalfOnePlusSqrt => ((1.0 + s) / 2.0, (1.0 - s) / 2.0),
        }
    }

    /// Area of a fundamental cell of O_F embedded in R².
    pub fn covolume(&self) -> f64 {
        let (w1, w2) = self.omega_embeddings();
        w1 - w2
    }

    pub fn element(&self, a: impl Into<BigInt>, b: impl Into<BigInt>) -> FieldElement {
        FieldElement {
            a: a.into(),
            b: b.into(),
            field: *self,
        }
    }

    pub fn one(&self) -> FieldElement {
        self.element(1, 0)
    }

    pub fn omega(&self) -> FieldElement {
        self.element(0, 1)
    }

    /// Sign of (u + v√D)/den − lo, exactly.
    fn cmp_embedding(&self, a: i64, b: i64, sigma: usize, bound: f64, approx: f64) -> Ordering {
        // Far from the bound the floating value decides.
        let margin = 1e-9 * (1.0 + bound.abs() + approx.abs());
        if approx - bound > margin {
            return Ordering::Greater;
        }
        if bound - approx > margin {
            return Ordering::Less;
        }
        let (u, den) = match self.omega {
            OmegaKind::Sqrt => (BigInt::from(a), 1i64),
            OmegaKind::HalfOnePlusSqrt => (BigInt::from(2 * a + b), 2i64),
        };
        let v = if sigma == 0 { BigInt::from(b) } else { BigInt::from(-b) };
        let lo = BigRational::from_float(bound).expect("finite bound");
        // u + v√D ≥ lo·den  ⇔  v√D ≥ lo·den − u
        let rhs = lo * BigRational::from_integer(BigInt::from(den)) - BigRational::from_integer(u);
        cmp_sqrt_multiple(&v, self.d, &rhs)
    }
}

/// Compares v·√D with a rational r.
fn cmp_sqrt_multiple(v: &BigInt, d: i64, r: &BigRational) -> Ordering {
    let sv = v.signum();
    let sr = if r.is_positive() {
        BigInt::one()
    } else if r.is_negative() {
        -BigInt::one()
    } else {
        BigInt::zero()
    };
    if sv != sr {
        return sv.cmp(&sr);
    }
    if sv.is_zero() {
        return Ordering::Equal;
    }
    let lhs_sq = BigRational::from_integer(v * v * BigInt::from(d));
    let rhs_sq = r * r;
    let mag = lhs_sq.cmp(&rhs_sq);
    if sv.is_positive() {
        mag
    } else {
        mag.reverse()
    }
}

impl fmt::Display for QuadraticField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q(sqrt({}))", self.d)
    }
}

/// a + bω in O_F.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FieldElement {
    pub a: BigInt,
    pub b: BigInt,
    field: QuadraticField,
}

impl FieldElement {
    pub fn field(&self) -> &QuadraticField {
        &self.field
    }

    pub fn norm(&self) -> BigInt {
        let t = BigInt::from(self.field.omega_trace());
        let n = BigInt::from(self.field.omega_norm());
        &self.a * &self.a + &self.a * &self.b * t + &self.b * &self.b * n
    }

    pub fn trace(&self) -> BigInt {
        BigInt::from(2) * &self.a + &self.b * BigInt::from(self.field.omega_trace())
    }

    /// Galois conjugate.
    pub fn conjugate(&self) -> FieldElement {
        let t = BigInt::from(self.field.omega_trace());
        FieldElement {
            a: &self.a + &self.b * t,
            b: -&self.b,
            field: self.field,
        }
    }

    pub fn is_unit(&self) -> bool {
        self.norm().abs().is_one()
    }

    pub fn add(&self, other: &FieldElement) -> Result<FieldElement, FieldError> {
        if self.field != other.field {
            return Err(FieldError::FieldMismatch);
        }
        Ok(FieldElement {
            a: &self.a + &other.a,
            b: &self.b + &other.b,
            field: self.field,
        })
    }

    pub fn mul(&self, other: &FieldElement) -> Result<FieldElement, FieldError> {
        if self.field != other.field {
            return Err(FieldError::FieldMismatch);
        }
        // ω² = tω − n
        let t = BigInt::from(self.field.omega_trace());
        let n = BigInt::from(self.field.omega_norm());
        let bd = &self.b * &other.b;
        Ok(FieldElement {
            a: &self.a * &other.a - &n * &bd,
            b: &self.a * &other.b + &self.b * &other.a + &t * &bd,
            field: self.field,
        })
    }

    pub fn neg(&self) -> FieldElement {
        FieldElement {
            a: -&self.a,
            b: -&self.b,
            field: self.field,
        }
    }

    /// Inverse of a unit: ε⁻¹ = N(ε)·ε̄.
    pub fn unit_inverse(&self) -> Result<FieldElement, FieldError> {
        let n = self.norm();
        if !n.abs().is_one() {
            return Err(FieldError::NotAUnit(n));
        }
        let c = self.conjugate();
        Ok(FieldElement {
            a: &c.a * &n,
            b: &c.b * &n,
            field: self.field,
        })
    }

    /// ξⁿ for any integer n (negative powers require a unit).
    pub fn pow(&self, n: i64) -> Result<FieldElement, FieldError> {
        let base = if n < 0 { self.unit_inverse()? } else { self.clone() };
        let mut result = self.field.one();
        let mut sq = base;
        let mut e = n.unsigned_abs();
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&sq)?;
            }
            e >>= 1;
            if e > 0 {
                sq = sq.mul(&sq)?;
            }
        }
        Ok(result)
    }

    /// (σ₁(ξ), σ₂(ξ)).
    ///
    /// The embedding of smaller magnitude is recovered from the exact norm,
    /// so units ε⁻ⁿ keep full relative precision.
    pub fn embeddings(&self) -> (f64, f64) {
        let (w1, w2) = self.field.omega_embeddings();
        let a = self.a.to_f64().unwrap_or(f64::NAN);
        let b = self.b.to_f64().unwrap_or(f64::NAN);
        let s1 = a + b * w1;
        let s2 = a + b * w2;
        let n = self.norm();
        if n.is_zero() {
            return (s1, s2);
        }
        let nf = n.to_f64().unwrap_or(f64::NAN);
        if s1.abs() >= s2.abs() {
            (s1, nf / s1)
        } else {
            (nf / s2, s2)
        }
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}ω", self.a, self.b)
    }
}

/// O_F^× = {±1} × ⟨ε₀⟩.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitGroup {
    pub fundamental_unit: FieldElement,
}

impl UnitGroup {
    pub fn new(field: &QuadraticField) -> Result<Self, FieldError> {
        Ok(Self {
            fundamental_unit: fundamental_unit(field)?,
        })
    }

    pub fn norm_sign(&self) -> i64 {
        self.fundamental_unit.norm().to_i64().unwrap_or(0)
    }
}

/// Smallest unit ε₀ > 1 (under σ₁), from the continued fraction of ω.
///
/// The first convergent p/q of ω with N(p − qω) = ±1 gives the unit
/// p − qω of smallest height; ε₀ is its inverse up to sign.
pub fn fundamental_unit(field: &QuadraticField) -> Result<FieldElement, FieldError> {
    let d = field.d;
    let s = isqrt(d);
    // ω = (P + √D)/Q
    let (mut p_cf, mut q_cf) = match field.omega {
        OmegaKind::Sqrt => (0i64, 1i64),
        OmegaKind::HalfOnePlusSqrt => (1i64, 2i64),
    };
    let (mut h_prev, mut h) = (BigInt::zero(), BigInt::one());
    let (mut k_prev, mut k) = (BigInt::one(), BigInt::zero());
    for _ in 0..UNIT_SEARCH_CAP {
        let a = if q_cf > 0 {
            Integer::div_floor(&(p_cf + s), &q_cf)
        } else {
            -(Integer::div_floor(&(p_cf + s), &(-q_cf)) + 1)
        };
        let h_next = BigInt::from(a) * &h + &h_prev;
        let k_next = BigInt::from(a) * &k + &k_prev;
        h_prev = std::mem::replace(&mut h, h_next);
        k_prev = std::mem::replace(&mut k, k_next);

        let candidate = field.element(h.clone(), -k.clone());
        if candidate.is_unit() {
            let inv = candidate.unit_inverse()?;
            let (s1, _) = inv.embeddings();
            return Ok(if s1 < 0.0 { inv.neg() } else { inv });
        }
        let p_next = a * q_cf - p_cf;
        let q_next = (d - p_next * p_next) / q_cf;
        p_cf = p_next;
        q_cf = q_next;
    }
    Err(FieldError::IterationLimit(UNIT_SEARCH_CAP))
}

/// {±ε₀ⁿ : |n| ≤ n_max}, ordered by n then sign.
pub fn enumerate_units(field: &QuadraticField, n_max: u32) -> Result<Vec<FieldElement>, FieldError> {
    let eps = fundamental_unit(field)?;
    let mut out = Vec::with_capacity(2 * (2 * n_max as usize + 1));
    for n in -(n_max as i64)..=(n_max as i64) {
        let u = eps.pow(n)?;
        out.push(u.neg());
        out.push(u);
    }
    Ok(out)
}

/// Closed box [lo₁, hi₁] × [lo₂, hi₂] in embedding coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingBox {
    pub sigma1: (f64, f64),
    pub sigma2: (f64, f64),
}

impl EmbeddingBox {
    pub fn new(sigma1: (f64, f64), sigma2: (f64, f64)) -> Result<Self, FieldError> {
        let ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        if !ok(sigma1) || !ok(sigma2) {
            return Err(FieldError::InvalidBox);
        }
        Ok(Self { sigma1, sigma2 })
    }

    pub fn centered(c1: f64, c2: f64, half1: f64, half2: f64) -> Result<Self, FieldError> {
        Self::new((c1 - half1, c1 + half1), (c2 - half2, c2 + half2))
    }
}

/// A lattice point with its integer coordinates and embeddings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticePoint {
    pub a: i64,
    pub b: i64,
    pub sigma1: f64,
    pub sigma2: f64,
}

/// All α ∈ O_F with (σ₁(α), σ₂(α)) in the box, as integer coordinates.
///
/// The candidate range for b comes from σ₁ − σ₂ = b(ω₁ − ω₂); for each b the
/// range of a is the intersection of both embedding constraints. Membership
/// on the boundary is decided exactly.
pub fn lattice_points(
    field: &QuadraticField,
    bx: &EmbeddingBox,
    cap: usize,
) -> Result<Vec<LatticePoint>, FieldError> {
    let (w1, w2) = field.omega_embeddings();
    let dw = w1 - w2;
    let (lo1, hi1) = bx.sigma1;
    let (lo2, hi2) = bx.sigma2;
    let b_min = ((lo1 - hi2) / dw).floor() as i64 - 1;
    let b_max = ((hi1 - lo2) / dw).ceil() as i64 + 1;

    let a_range = |b: i64| -> (i64, i64) {
        let bf = b as f64;
        let lo = (lo1 - bf * w1).max(lo2 - bf * w2);
        let hi = (hi1 - bf * w1).min(hi2 - bf * w2);
        (lo.floor() as i64 - 1, hi.ceil() as i64 + 1)
    };

    let mut estimate: u128 = 0;
    for b in b_min..=b_max {
        let (lo, hi) = a_range(b);
        if hi >= lo {
            estimate += (hi - lo + 1) as u128;
        }
    }
    if estimate > cap as u128 {
        return Err(FieldError::BoxTooLarge { estimate, cap });
    }

    let mut out = Vec::new();
    for b in b_min..=b_max {
        let (alo, ahi) = a_range(b);
        for a in alo..=ahi {
            let s1 = a as f64 + b as f64 * w1;
            let s2 = a as f64 + b as f64 * w2;
            let inside = field.cmp_embedding(a, b, 0, lo1, s1) != Ordering::Less
                && field.cmp_embedding(a, b, 0, hi1, s1) != Ordering::Greater
                && field.cmp_embedding(a, b, 1, lo2, s2) != Ordering::Less
                && field.cmp_embedding(a, b, 1, hi2, s2) != Ordering::Greater;
            if inside {
                out.push(LatticePoint { a, b, sigma1: s1, sigma2: s2 });
            }
        }
    }
    Ok(out)
}

pub fn enumerate_lattice(
    field: &QuadraticField,
    bx: &EmbeddingBox,
    cap: usize,
) -> Result<Vec<FieldElement>, FieldError> {
    Ok(lattice_points(field, bx, cap)?
        .into_iter()
        .map(|p| field.element(p.a, p.b))
        .collect())
}
