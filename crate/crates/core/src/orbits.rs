//! Orbit displacements for PSL₂(Z) and its principal congruence subgroups.
//!
//! Elements moving a base point z by at most R are enumerated exactly from
//! the identity 2·cosh d(z, γz) = ‖g⁻¹γg‖²_F, where g = [√y, x/√y; 0, 1/√y]
//! maps i to z. The Frobenius bound confines every entry of γ to a box, and
//! the determinant condition fixes b once (a, c, d) are chosen.

use std::io::{self, Write};

use num_integer::Integer;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hyperbolic::{displacement, MoebiusMap, UhpPoint};
use crate::quadrature::{integrate, AdaptiveOptions, QuadratureError};

/// Default cap on the enumeration radius.
pub const DEFAULT_RADIUS_CAP: f64 = 12.0;
/// Integrand level below which the tail of the JL integral is dropped.
pub const JL_TAIL_CUTOFF: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrbitError {
    #[error("principal congruence level must be ≥ 3 (got {0})")]
    LevelTooSmall(u32),
    #[error("radius {radius} exceeds the cap {cap}")]
    RadiusCapExceeded { radius: f64, cap: f64 },
    #[error("radius must be non-negative and finite (got {0})")]
    InvalidRadius(f64),
    #[error("no group element found within radius {0}; increase the radius")]
    EmptyOrbit(f64),
    #[error("need δ > r/2 (δ = {delta}, r = {r})")]
    HypothesisViolation { delta: f64, r: f64 },
    #[error("injectivity radius must be positive (got {0})")]
    NonPositiveRadius(f64),
    #[error("weight function must be positive and decreasing (failed at ρ = {0})")]
    NotDecreasing(f64),
    #[error("∫ f(ρ) sinh(ρ + r/2) dρ diverges: f must decay faster than e^(-ρ)")]
    Divergent,
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupKind {
    FullPsl2z,
    PrincipalCongruence(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub kind: GroupKind,
    /// Drop every parabolic element (the union of the cusp stabilizers).
    pub exclude_cusp_stabilizers: bool,
}

impl GroupSpec {
    pub fn full_psl2z(exclude_cusp_stabilizers: bool) -> Self {
        Self {
            kind: GroupKind::FullPsl2z,
            exclude_cusp_stabilizers,
        }
    }

    /// Γ(N), N ≥ 3 (torsion-free).
    pub fn principal_congruence(n: u32, exclude_cusp_stabilizers: bool) -> Result<Self, OrbitError> {
        if n < 3 {
            return Err(OrbitError::LevelTooSmall(n));
        }
        Ok(Self {
            kind: GroupKind::PrincipalCongruence(n),
            exclude_cusp_stabilizers,
        })
    }

    pub fn contains(&self, m: &IntMatrix) -> bool {
        match self.kind {
            GroupKind::FullPsl2z => true,
            GroupKind::PrincipalCongruence(n) => {
                let n = n as i64;
                let r = |v: i64| v.rem_euclid(n);
                let plus = r(m.a) == 1 % n && r(m.b) == 0 && r(m.c) == 0 && r(m.d) == 1 % n;
                let minus = r(m.a) == r(-1) && r(m.b) == 0 && r(m.c) == 0 && r(m.d) == r(-1);
                plus || minus
            }
        }
    }

    /// Whether an element is dropped from orbit sums (identity always is).
    pub fn excludes(&self, m: &IntMatrix) -> bool {
        m.is_identity() || (self.exclude_cusp_stabilizers && m.is_parabolic())
    }
}

/// Sign-normalized integer matrix of determinant 1 (first nonzero entry > 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IntMatrix {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl IntMatrix {
    pub fn new(a: i64, b: i64, c: i64, d: i64) -> Self {
        debug_assert_eq!(a * d - b * c, 1);
        let first = [a, b, c, d].into_iter().find(|v| *v != 0).unwrap_or(1);
        if first < 0 {
            Self { a: -a, b: -b, c: -c, d: -d }
        } else {
            Self { a, b, c, d }
        }
    }

    pub fn identity() -> Self {
        Self::new(1, 0, 0, 1)
    }

    pub fn mul(&self, o: &IntMatrix) -> IntMatrix {
        IntMatrix::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }

    pub fn inverse(&self) -> IntMatrix {
        IntMatrix::new(self.d, -self.b, -self.c, self.a)
    }

    pub fn trace(&self) -> i64 {
        self.a + self.d
    }

    pub fn is_identity(&self) -> bool {
        *self == IntMatrix::identity()
    }

    /// |trace| = 2 and not ±I. For integer matrices the fixed point
    /// (a − d)/(2c), or ∞ when c = 0, is automatically in P¹(Q), so this is
    /// exactly membership in some cusp stabilizer.
    pub fn is_parabolic(&self) -> bool {
        self.trace().abs() == 2 && !self.is_identity()
    }

    pub fn is_elliptic(&self) -> bool {
        self.trace().abs() < 2
    }

    pub fn to_moebius(&self) -> MoebiusMap {
        MoebiusMap::projective(self.a as f64, self.b as f64, self.c as f64, self.d as f64)
            .expect("determinant one")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub matrix: IntMatrix,
    pub gamma: MoebiusMap,
    pub rho: f64,
}

/// Sorted displacements at a base point; N(z; ρ) is the rank function.
#[derive(Debug, Clone, PartialEq)]
pub struct CountingData {
    pub base: UhpPoint,
    pub rhos: Vec<f64>,
    pub spec: GroupSpec,
    /// Radius the records were enumerated to.
    pub radius: f64,
}

impl CountingData {
    pub fn from_records(spec: GroupSpec, base: UhpPoint, radius: f64, records: &[OrbitRecord]) -> Self {
        let mut rhos: Vec<f64> = records.iter().map(|r| r.rho).collect();
        rhos.sort_by(f64::total_cmp);
        Self { base, rhos, spec, radius }
    }

    pub fn empty(spec: GroupSpec, base: UhpPoint) -> Self {
        Self { base, rhos: Vec::new(), spec, radius: 0.0 }
    }
}

fn check_radius(radius: f64, cap: f64) -> Result<(), OrbitError> {
    if !radius.is_finite() || radius < 0.0 {
        return Err(OrbitError::InvalidRadius(radius));
    }
    if radius > cap {
        return Err(OrbitError::RadiusCapExceeded { radius, cap });
    }
    Ok(())
}

/// Every non-excluded element of the group with ρ_{γ,z} ≤ R, sorted by
/// (ρ, matrix).
pub fn enumerate_orbit(
    spec: &GroupSpec,
    z: &UhpPoint,
    radius: f64,
    cap: f64,
) -> Result<Vec<OrbitRecord>, OrbitError> {
    check_radius(radius, cap)?;
    let (x, y) = (z.x(), z.y());
    let k = 2.0 * radius.cosh();
    // Slack so that elements on the boundary survive the integer prefilter;
    // the final test is on ρ itself.
    let kk = k * (1.0 + 1e-9) + 1e-9;
    let sk = kk.sqrt();

    let frob = |m: &IntMatrix| -> f64 {
        let (a, b, c, d) = (m.a as f64, m.b as f64, m.c as f64, m.d as f64);
        let t1 = a - x * c;
        let t2 = (t1 * x + b - d * x) / y;
        let t3 = c * y;
        let t4 = c * x + d;
        t1 * t1 + t2 * t2 + t3 * t3 + t4 * t4
    };

    let keep = |m: IntMatrix, out: &mut Vec<OrbitRecord>| {
        if !spec.contains(&m) || spec.excludes(&m) || frob(&m) > kk {
            return;
        }
        let gamma = m.to_moebius();
        let rho = displacement(&gamma, z);
        if rho <= radius {
            out.push(OrbitRecord { matrix: m, gamma, rho });
        }
    };

    let c_max = (sk / y).floor() as i64;
    let mut records: Vec<OrbitRecord> = (0..=c_max)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut out = Vec::new();
            if c == 0 {
                // a = d = 1 up to sign; |b| ≤ y·√K.
                let b_max = (y * sk).floor() as i64;
                for b in -b_max..=b_max {
                    keep(IntMatrix::new(1, b, 0, 1), &mut out);
                }
                return out.into_iter();
            }
            let cf = c as f64;
            let d_lo = (-cf * x - sk).floor() as i64;
            let d_hi = (-cf * x + sk).ceil() as i64;
            let a_lo = (x * cf - sk).floor() as i64;
            let a_hi = (x * cf + sk).ceil() as i64;
            for d in d_lo..=d_hi {
                // ad ≡ 1 (mod c)
                let eg = d.extended_gcd(&c);
                if eg.gcd != 1 {
                    continue;
                }
                let inv = eg.x.rem_euclid(c);
                let mut a = a_lo + (inv - a_lo).rem_euclid(c);
                while a <= a_hi {
                    let b = (a * d - 1) / c;
                    keep(IntMatrix::new(a, b, c, d), &mut out);
                    a += c;
                }
            }
            out.into_iter()
        })
        .collect();
    records.sort_by(|p, q| p.rho.total_cmp(&q.rho).then_with(|| p.matrix.cmp(&q.matrix)));
    records.dedup_by(|p, q| p.matrix == q.matrix);
    Ok(records)
}

/// N(z; ρ): number of records with displacement ≤ ρ.
pub fn counting_function(data: &CountingData, rho: f64) -> usize {
    data.rhos.partition_point(|&r| r <= rho)
}

/// Minimum displacement over sampled base points and enumerated elements.
///
/// This is an upper bound for the true infimum over all of H.
pub fn injectivity_radius(
    spec: &GroupSpec,
    samples: &[UhpPoint],
    radius: f64,
    cap: f64,
) -> Result<f64, OrbitError> {
    let mins: Vec<Option<f64>> = samples
        .par_iter()
        .map(|z| {
            enumerate_orbit(spec, z, radius, cap).map(|recs| recs.first().map(|r| r.rho))
        })
        .collect::<Result<_, _>>()?;
    mins.into_iter()
        .flatten()
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))))
        .ok_or(OrbitError::EmptyOrbit(radius))
}

/// Evenly spaced sample points inside the standard fundamental domain of
/// PSL₂(Z): an `nx` × `ny` grid over x ∈ [−1/2, 1/2] and heights from the
/// unit circle up to `y_top`.
pub fn fundamental_domain_grid(nx: usize, ny: usize, y_top: f64) -> Vec<UhpPoint> {
    let mut out = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        let x = if nx == 1 { 0.0 } else { -0.5 + i as f64 / (nx - 1) as f64 };
        let y0 = (1.0 - x * x).sqrt();
        for j in 0..ny {
            let t = if ny == 1 { 0.0 } else { j as f64 / (ny - 1) as f64 };
            let y = y0 + t * (y_top - y0);
            out.push(UhpPoint::new(x, y).expect("positive height"));
        }
    }
    out
}

/// The three terms on the right of the Jorgenson–Lundelius inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JlBound {
    /// f(0) for the identity plus Σ f(ρ) over records with ρ ≤ δ.
    pub stieltjes: f64,
    /// f(δ) sinh(r/2) sinh(δ) / sinh²(r/4).
    pub boundary: f64,
    /// (1 / (2 sinh²(r/4))) ∫_δ^∞ f(ρ) sinh(ρ + r/2) dρ.
    pub integral: f64,
}

impl JlBound {
    pub fn total(&self) -> f64 {
        self.stieltjes + self.boundary + self.integral
    }

    /// Bound for the part of ∫ f dN beyond δ.
    pub fn beyond_delta(&self) -> f64 {
        self.boundary + self.integral
    }
}

/// f(ρ)·sinh(ρ + s) without overflowing sinh when f is tiny.
fn weighted_sinh(fv: f64, rho: f64, s: f64) -> f64 {
    if fv == 0.0 {
        return 0.0;
    }
    let u = rho + s;
    if u < 20.0 {
        fv * u.sinh()
    } else {
        0.5 * (fv.ln() + u).exp() - 0.5 * fv * (-u).exp()
    }
}

/// Right-hand side of the JL counting inequality for a positive decreasing
/// weight `f`, injectivity radius `r` and split point `δ > r/2`.
pub fn jl_upper_bound(
    f: &(dyn Fn(f64) -> f64 + Sync),
    delta: f64,
    r: f64,
    data: &CountingData,
) -> Result<JlBound, OrbitError> {
    if !(r > 0.0) {
        return Err(OrbitError::NonPositiveRadius(r));
    }
    if !(delta > r / 2.0) {
        return Err(OrbitError::HypothesisViolation { delta, r });
    }
    // Spot-check positivity and monotonicity.
    let mut prev = f(0.0);
    for i in 1..=64 {
        let t = (delta + 40.0) * i as f64 / 64.0;
        let v = f(t);
        if !(v >= 0.0) || v > prev * (1.0 + 1e-12) || !(prev > 0.0) {
            return Err(OrbitError::NotDecreasing(t));
        }
        prev = v;
    }

    let s4 = (r / 4.0).sinh();
    let s4sq = s4 * s4;
    let stieltjes = f(0.0)
        + data
            .rhos
            .iter()
            .take_while(|&&rho| rho <= delta)
            .map(|&rho| f(rho))
            .sum::<f64>();
    let boundary = f(delta) * (r / 2.0).sinh() * delta.sinh() / s4sq;

    let g = |rho: f64| weighted_sinh(f(rho), rho, r / 2.0);
    let g0 = g(delta).abs().max(f64::MIN_POSITIVE);
    let mut upper = delta + 1.0;
    let mut prev_g = g0;
    loop {
        let gv = g(upper);
        if !gv.is_finite() || (upper - delta >= 4.0 && gv >= prev_g) {
            return Err(OrbitError::Divergent);
        }
        if gv <= JL_TAIL_CUTOFF * g0 {
            break;
        }
        if upper - delta > 1400.0 {
            return Err(OrbitError::Divergent);
        }
        prev_g = gv;
        upper = delta + 2.0 * (upper - delta);
    }
    let est = integrate(g, delta, upper, &AdaptiveOptions::with_tolerances(1e-15, 1e-12))?;
    let integral = est.value / (2.0 * s4sq);
    Ok(JlBound { stieltjes, boundary, integral })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitExpSum {
    /// Σ e^{−2ρ} over enumerated (non-excluded) records.
    pub truncated: f64,
    /// Bound on the contribution of elements beyond the enumeration radius.
    pub tail: f64,
    pub count: usize,
}

/// Σ e^{−2ρ_{γ,z}} over the orbit within radius R, plus the JL tail beyond R
/// computed with the injectivity-radius lower bound `r_lower`.
pub fn orbit_exp_sum(
    spec: &GroupSpec,
    z: &UhpPoint,
    radius: f64,
    r_lower: f64,
    cap: f64,
) -> Result<OrbitExpSum, OrbitError> {
    let records = enumerate_orbit(spec, z, radius, cap)?;
    let truncated: f64 = records.iter().map(|r| (-2.0 * r.rho).exp()).sum();
    let data = CountingData::from_records(*spec, *z, radius, &records);
    let f = |rho: f64| (-2.0 * rho).exp();
    let jl = jl_upper_bound(&f, radius, r_lower, &data)?;
    Ok(OrbitExpSum {
        truncated,
        tail: jl.beyond_delta(),
        count: records.len(),
    })
}

/// CSV dump with header `a,b,c,d,rho`, rows in record order.
pub fn write_orbit_csv<W: Write>(records: &[OrbitRecord], mut w: W) -> io::Result<()> {
    writeln!(w, "a,b,c,d,rho")?;
    for r in records {
        let m = r.matrix;
        writeln!(w, "{},{},{},{},{:.16e}", m.a, m.b, m.c, m.d, r.rho)?;
    }
    Ok(())
}
