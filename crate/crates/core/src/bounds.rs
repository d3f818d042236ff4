//! Heat-kernel bound chain, the Type (1)/(2) sup-norm bounds, the lattice
//! sum over O_F attached to a unit ε, and the unit sum that controls the
//! cusp stabilizer.
//!
//! Every inequality is reported as truncated value + rigorous tail against
//! its closed-form ceiling.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::hyperbolic::PolyPoint;
use crate::quadfield::{fundamental_unit, lattice_points, EmbeddingBox, FieldElement, FieldError, QuadraticField};
use crate::quadrature::{integrate, integrate_to_infinity, AdaptiveOptions, QuadratureError};

/// Default truncation half-width for the lattice sum, in units of
/// (1 + ε_j²) y_j / |ε_j|.
pub const DEFAULT_LATTICE_RADIUS: f64 = 20.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("weights must be even positive integers (got {0})")]
    InvalidWeight(u32),
    #[error("weight vector is empty")]
    EmptyWeights,
    #[error("expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{name} must be positive and finite (got {value})")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must be ≥ 0 (got {value})")]
    Negative { name: &'static str, value: f64 },
    #[error("the lattice sum needs every k_j ≥ 2")]
    Divergent,
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

fn positive(name: &'static str, value: f64) -> Result<f64, BoundsError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(BoundsError::NonPositive { name, value })
    }
}

/// (k_1, …, k_r) with every k_j even and positive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightVector(Vec<u32>);

impl WeightVector {
    pub fn new(ks: Vec<u32>) -> Result<Self, BoundsError> {
        if ks.is_empty() {
            return Err(BoundsError::EmptyWeights);
        }
        if let Some(&k) = ks.iter().find(|&&k| k == 0 || k % 2 == 1) {
            return Err(BoundsError::InvalidWeight(k));
        }
        Ok(Self(ks))
    }

    pub fn components(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn product(&self) -> f64 {
        self.0.iter().map(|&k| k as f64).product()
    }
}

/// An inequality check: truncated value plus tail against a ceiling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub truncated_value: f64,
    pub tail_bound: f64,
    pub ceiling: f64,
    pub satisfied: bool,
    pub parameters: Value,
}

impl BoundReport {
    pub fn new(truncated_value: f64, tail_bound: f64, ceiling: f64, parameters: Value) -> Self {
        Self {
            truncated_value,
            tail_bound,
            ceiling,
            satisfied: truncated_value + tail_bound <= ceiling,
            parameters,
        }
    }
}

fn ln_sinh(x: f64) -> f64 {
    if x > 20.0 {
        x - LN_2 + (-(-2.0 * x).exp()).ln_1p()
    } else {
        x.sinh().ln()
    }
}

/// ∫_ρ^∞ r e^{−r/2} / √(cosh r − cosh ρ) dr.
///
/// With r = ρ + u² and cosh a − cosh b = 2 sinh((a+b)/2) sinh((a−b)/2) the
/// integrand is bounded near u = 0 and decays like e^{−u²}.
pub fn heat_integral(rho: f64) -> Result<f64, BoundsError> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(BoundsError::Negative { name: "rho", value: rho });
    }
    let g = |u: f64| -> f64 {
        if u == 0.0 {
            return if rho == 0.0 { 0.0 } else { 2.0 * rho / rho.sinh().sqrt() * (-rho / 2.0).exp() };
        }
        let r = rho + u * u;
        let half = 0.5 * u * u;
        let ln_den = 0.5 * (LN_2 + ln_sinh(rho + half) + ln_sinh(half));
        2.0 * u * r * (-0.5 * r - ln_den).exp()
    };
    let est = integrate(g, 0.0, 10.0, &AdaptiveOptions::with_tolerances(1e-13, 1e-13))?;
    Ok(est.value)
}

/// k²/(√2 π (k + 1/2)) · cosh^{−2k}(ρ/2) · heat_integral(ρ).
pub fn heat_upper_hkeqn1(k: u32, rho: f64) -> Result<f64, BoundsError> {
    let kf = k as f64;
    let pre = kf * kf / (2f64.sqrt() * PI * (kf + 0.5));
    let ln_cosh = if rho / 2.0 > 20.0 { rho / 2.0 - LN_2 } else { (rho / 2.0).cosh().ln() };
    Ok(pre * (-2.0 * kf * ln_cosh).exp() * heat_integral(rho)?)
}

/// 8k² e^{−2ρ} / (π (k + 1/2)).
pub fn heat_upper_hkeqn4(k: u32, rho: f64) -> f64 {
    let kf = k as f64;
    8.0 * kf * kf * (-2.0 * rho).exp() / (PI * (kf + 0.5))
}

/// (36 + 1/sinh²(r/4))^d · ∏ k_j with d the number of weights.
pub fn type1_bound(k: &WeightVector, r_inj: f64) -> Result<f64, BoundsError> {
    let r = positive("r_inj", r_inj)?;
    let s = (r / 4.0).sinh();
    Ok((36.0 + 1.0 / (s * s)).powi(k.len() as i32) * k.product())
}

/// The three pieces of the orbit-sum bound for f(ρ) = e^{−2ρ}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTerms {
    pub t1: f64,
    /// e^{−2δ} sinh(r/2) sinh(δ) / sinh²(r/4).
    pub t2: f64,
    /// (1/(2 sinh²(r/4))) ∫_δ^∞ e^{−2ρ} sinh(ρ + r/2) dρ in closed form.
    pub t3: f64,
    /// e^{r/2 − δ} / (4 sinh²(r/4)), the bound obtained by dropping the
    /// negative part of the antiderivative.
    pub t3_intermediate: f64,
    pub t2_ceiling: f64,
    pub t3_ceiling: f64,
}

impl TTerms {
    pub fn within_ceilings(&self) -> bool {
        self.t2 <= self.t2_ceiling && self.t3 <= self.t3_ceiling && self.t3_intermediate <= self.t3_ceiling
    }
}

pub fn t_terms(r_inj: f64, delta: f64) -> Result<TTerms, BoundsError> {
    let r = positive("r_inj", r_inj)?;
    let d = positive("delta", delta)?;
    let s4 = (r / 4.0).sinh();
    let s4sq = s4 * s4;
    let t2 = (-2.0 * d).exp() * (r / 2.0).sinh() * d.sinh() / s4sq;
    let antideriv = 0.5 * ((r / 2.0 - d).exp() - (-r / 2.0 - 3.0 * d).exp() / 3.0);
    Ok(TTerms {
        t1: 1.0,
        t2,
        t3: antideriv / (2.0 * s4sq),
        t3_intermediate: (r / 2.0 - d).exp() / (4.0 * s4sq),
        t2_ceiling: 8.0,
        t3_ceiling: 1.0 / (4.0 * s4sq),
    })
}

fn ln_gamma_ratio(k: f64) -> f64 {
    libm::lgamma(k - 0.5) - libm::lgamma(k)
}

/// Γ(k − 1/2)/Γ(k).
pub fn gamma_ratio(k: u32) -> f64 {
    ln_gamma_ratio(k as f64).exp()
}

/// ∫₀^∞ dβ/(β² + 1)^k = √π Γ(k − 1/2) / (2 Γ(k)).
pub fn gamma_ratio_integral(k: u32) -> f64 {
    0.5 * PI.sqrt() * gamma_ratio(k)
}

/// The same integral by adaptive quadrature.
pub fn gamma_ratio_quadrature(k: u32) -> Result<f64, BoundsError> {
    let kf = k as i32;
    let est = integrate_to_infinity(
        |b| (1.0 + b * b).powi(-kf),
        0.0,
        &AdaptiveOptions::with_tolerances(1e-15, 1e-14),
    )?;
    Ok(est.value)
}

fn check_pair(z: &PolyPoint, k: &WeightVector) -> Result<(), BoundsError> {
    if z.dim() != 2 {
        return Err(BoundsError::DimensionMismatch { expected: 2, got: z.dim() });
    }
    if k.len() != 2 {
        return Err(BoundsError::DimensionMismatch { expected: 2, got: k.len() });
    }
    Ok(())
}

/// ∏ Γ(k_j − 1/2)/Γ(k_j) · |ε_j|^{2k_j − 1} y_j / ((1 + ε_j²)/2)^{2k_j − 1}.
pub fn auxlemma_rhs(z: &PolyPoint, eps: &FieldElement, k: &WeightVector) -> Result<f64, BoundsError> {
    check_pair(z, k)?;
    if !eps.is_unit() {
        return Err(FieldError::NotAUnit(eps.norm()).into());
    }
    let (e1, e2) = eps.embeddings();
    let mut ln = 0.0;
    for ((e, zj), &kj) in [e1, e2].iter().zip(z.coords()).zip(k.components()) {
        let m = 2.0 * kj as f64 - 1.0;
        let e = e.abs();
        ln += ln_gamma_ratio(kj as f64) + m * e.ln() + zj.y().ln() - m * ((1.0 + e * e) / 2.0).ln();
    }
    Ok(ln.exp())
}

/// Per-embedding data of the lattice summand
/// F(t) = (4ε²y²)^k / (((1 − ε²)x − εt)² + (1 + ε²)²y²)^k.
#[derive(Debug, Clone, Copy)]
struct Factor {
    k: u32,
    eps: f64,
    x: f64,
    y: f64,
    /// Peak location (1 − ε²)x/ε.
    center: f64,
    /// Natural width (1 + ε²)y/|ε|.
    width: f64,
    /// F(center) = (2|ε|/(1 + ε²))^{2k}.
    peak: f64,
}

impl Factor {
    fn new(k: u32, eps: f64, x: f64, y: f64) -> Self {
        let e2 = eps * eps;
        Self {
            k,
            eps,
            x,
            y,
            center: (1.0 - e2) * x / eps,
            width: (1.0 + e2) * y / eps.abs(),
            peak: (2.0 * eps.abs() / (1.0 + e2)).powi(2 * k as i32),
        }
    }

    fn eval(&self, t: f64) -> f64 {
        let e2 = self.eps * self.eps;
        let a = (1.0 - e2) * self.x - self.eps * t;
        let b = (1.0 + e2) * self.y;
        let num = 4.0 * e2 * self.y * self.y;
        (num / (a * a + b * b)).powi(self.k as i32)
    }

    /// ∫_R F = peak · width · √π Γ(k − 1/2)/Γ(k).
    fn integral(&self) -> f64 {
        self.peak * self.width * 2.0 * gamma_ratio_integral(self.k)
    }

    /// ∫_{|t − center| > L} F̂ where F̂ is F with a plateau of half-width h
    /// around the peak, i.e. F̂(t) = F(t ∓ h) away from the plateau.
    fn envelope_outside(&self, half_width: f64, h: f64) -> Result<f64, BoundsError> {
        let total = self.integral() + 2.0 * h * self.peak;
        if half_width <= h {
            return Ok(total - 2.0 * half_width.max(0.0) * self.peak);
        }
        let s = (half_width - h) / self.width;
        let kf = self.k as i32;
        let tail = integrate_to_infinity(
            |u| (1.0 + u * u).powi(-kf),
            s,
            &AdaptiveOptions::with_tolerances(1e-300, 1e-12),
        )?;
        Ok(2.0 * self.peak * self.width * tail.value)
    }
}

/// The lattice sum Σ_{α ∈ O_F} ∏_j F_j(σ_j(α)) with the two-sided ceiling
/// from [`auxlemma_rhs`].
///
/// Lattice points are summed inside the box |σ_j(α) − c_j| ≤ R·w_j around the
/// peak c_j = (1 − ε_j²)x_j/ε_j, with w_j = (1 + ε_j²)y_j/|ε_j|. The rest is
/// bounded by comparing each term with the integral of the plateau
/// envelope F̂_j over its fundamental cell α + {s + tω : |s|, |t| ≤ 1/2},
/// which has half-widths h_j = (1 + |ω_j|)/2 and area covol(O_F).
pub fn auxlemma(
    field: &QuadraticField,
    z: &PolyPoint,
    eps: &FieldElement,
    k: &WeightVector,
    lattice_radius: f64,
    cap: usize,
) -> Result<BoundReport, BoundsError> {
    check_pair(z, k)?;
    if k.components().iter().any(|&kj| kj < 2) {
        return Err(BoundsError::Divergent);
    }
    positive("lattice_radius", lattice_radius)?;
    let ceiling = auxlemma_rhs(z, eps, k)?;
    let (e1, e2) = eps.embeddings();
    let c = z.coords();
    let f = [
        Factor::new(k.components()[0], e1, c[0].x(), c[0].y()),
        Factor::new(k.components()[1], e2, c[1].x(), c[1].y()),
    ];
    let half = [lattice_radius * f[0].width, lattice_radius * f[1].width];
    let bx = EmbeddingBox::centered(f[0].center, f[1].center, half[0], half[1])?;
    let pts = lattice_points(field, &bx, cap)?;
    let truncated: f64 = pts.iter().map(|p| f[0].eval(p.sigma1) * f[1].eval(p.sigma2)).sum();

    let (w1, w2) = field.omega_embeddings();
    let h = [(1.0 + w1.abs()) / 2.0, (1.0 + w2.abs()) / 2.0];
    // Cells of points outside the box lie outside the box shrunk by h_j.
    let total = [f[0].integral() + 2.0 * h[0] * f[0].peak, f[1].integral() + 2.0 * h[1] * f[1].peak];
    let out0 = f[0].envelope_outside(half[0] - h[0], h[0])?;
    let out1 = f[1].envelope_outside(half[1] - h[1], h[1])?;
    let inside0 = total[0] - out0;
    let tail = (out0 * total[1] + inside0 * out1) / field.covolume();

    let params = json!({
        "d": field.d(),
        "z": [[c[0].x(), c[0].y()], [c[1].x(), c[1].y()]],
        "eps": [eps.a.to_string(), eps.b.to_string()],
        "eps_embeddings": [e1, e2],
        "k": k.components(),
        "lattice_radius": lattice_radius,
        "lattice_points": pts.len(),
    });
    Ok(BoundReport::new(truncated, tail, ceiling, params))
}

/// The O_F^× sum of ∏_j 2y_j/(1 + ε_j²) and its ceiling ∏ 2π y_j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitSum {
    /// Sum over O_F^× (both signs); this is the value checked.
    pub report: BoundReport,
    /// The same sum over O_F^×/{±1}.
    pub modulo_sign_truncated: f64,
    pub modulo_sign_tail: f64,
}

/// Σ_{ε = ±ε₀ⁿ, |n| ≤ n_max} ∏_j 2y_j/(1 + ε_j²) plus a geometric tail.
///
/// Each term is at most 4y₁y₂ ε₀^{−2|n|}, so the part with |n| > N is at
/// most 2 · 2 · 4y₁y₂ ε₀^{−2(N+1)}/(1 − ε₀^{−2}) (both signs of n, both
/// signs of ε).
pub fn unit_sum(field: &QuadraticField, y: (f64, f64), n_max: u32) -> Result<UnitSum, BoundsError> {
    let y1 = positive("y1", y.0)?;
    let y2 = positive("y2", y.1)?;
    let eps0 = fundamental_unit(field)?;
    let (a1, _) = eps0.embeddings();
    let l = a1.abs();
    let term = |n: i64| -> f64 {
        // |σ₁(ε₀ⁿ)| = lⁿ and |σ₂(ε₀ⁿ)| = l^{−n}
        let s1 = l.powi(n as i32);
        let s2 = l.powi(-n as i32);
        4.0 * y1 * y2 / ((1.0 + s1 * s1) * (1.0 + s2 * s2))
    };
    let half_sum: f64 = (-(n_max as i64)..=n_max as i64).map(term).sum();
    let half_tail = 2.0 * 4.0 * y1 * y2 * l.powi(-2 * (n_max as i32 + 1)) / (1.0 - l.powi(-2));
    let ceiling = 2.0 * PI * y1 * 2.0 * PI * y2;
    let params = json!({
        "d": field.d(),
        "y": [y1, y2],
        "n_max": n_max,
        "fundamental_unit": [eps0.a.to_string(), eps0.b.to_string()],
    });
    Ok(UnitSum {
        report: BoundReport::new(2.0 * half_sum, 2.0 * half_tail, ceiling, params),
        modulo_sign_truncated: half_sum,
        modulo_sign_tail: half_tail,
    })
}

/// Heights used in the cusp-stabilizer bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum YMode {
    /// The imaginary parts of a given point.
    Fixed(Vec<f64>),
    /// y_j = c · k_j.
    Sup { c: f64 },
}

impl YMode {
    fn heights(&self, k: &WeightVector) -> Result<Vec<f64>, BoundsError> {
        match self {
            YMode::Fixed(ys) => {
                if ys.len() != k.len() {
                    return Err(BoundsError::DimensionMismatch { expected: k.len(), got: ys.len() });
                }
                ys.iter().map(|&y| positive("y", y)).collect()
            }
            YMode::Sup { c } => {
                let c = positive("c", *c)?;
                Ok(k.components().iter().map(|&kj| c * kj as f64).collect())
            }
        }
    }
}

/// ∏ 4y_j · Γ(k_j − 1/2)/Γ(k_j) · k_j²/(k_j + 1/2).
pub fn cusp_stabilizer_bound(k: &WeightVector, mode: &YMode) -> Result<f64, BoundsError> {
    let ys = mode.heights(k)?;
    Ok(k.components()
        .iter()
        .zip(&ys)
        .map(|(&kj, &y)| {
            let kf = kj as f64;
            4.0 * y * gamma_ratio(kj) * kf * kf / (kf + 0.5)
        })
        .product())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Type2Bound {
    /// Non-stabilizer part, (36 + 1/sinh²(r/4))^d ∏ k_j.
    pub orbit_part: f64,
    /// Cusp-stabilizer part.
    pub cusp_part: f64,
    pub total: f64,
}

pub fn type2_bound(k: &WeightVector, r_inj: f64, mode: &YMode) -> Result<Type2Bound, BoundsError> {
    let orbit_part = type1_bound(k, r_inj)?;
    let cusp_part = cusp_stabilizer_bound(k, mode)?;
    Ok(Type2Bound { orbit_part, cusp_part, total: orbit_part + cusp_part })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperbolic::UhpPoint;
    use crate::quadfield::enumerate_units;
    use approx::assert_relative_eq;

    fn pair(x1: f64, y1: f64, x2: f64, y2: f64) -> PolyPoint {
        PolyPoint::new(vec![UhpPoint::new(x1, y1).unwrap(), UhpPoint::new(x2, y2).unwrap()]).unwrap()
    }

    fn kv(a: u32, b: u32) -> WeightVector {
        WeightVector::new(vec![a, b]).unwrap()
    }

    #[test]
    fn weight_vector_validation() {
        assert!(WeightVector::new(vec![]).is_err());
        assert!(WeightVector::new(vec![2, 3]).is_err());
        assert!(WeightVector::new(vec![0]).is_err());
        assert_eq!(kv(2, 4).product(), 8.0);
    }

    #[test]
    fn heat_integral_at_zero() {
        let exact = 2f64.sqrt() * PI * PI / 6.0;
        assert!((heat_integral(0.0).unwrap() - exact).abs() < 1e-10);
    }

    #[test]
    fn heat_integral_matches_direct_quadrature() {
        // Direct form with the singular endpoint handled by a graded split.
        for rho in [0.5f64, 1.0, 2.0, 4.0] {
            let f = |r: f64| r * (-r / 2.0).exp() / (r.cosh() - rho.cosh()).sqrt();
            let opts = AdaptiveOptions { max_panels: 20000, ..AdaptiveOptions::with_tolerances(1e-12, 1e-10) };
            let mut total = 0.0;
            // ∫_ρ^{ρ+ε} ≈ analytic: f ~ ρe^{−ρ/2} / √(sinh ρ (r − ρ))
            let eps = 1e-8f64;
            total += rho * (-rho / 2.0).exp() * 2.0 * eps.sqrt() / rho.sinh().sqrt();
            let mut a = rho + eps;
            let mut b = rho + 1e-6;
            while a < rho + 60.0 {
                total += integrate(f, a, b, &opts).unwrap().value;
                a = b;
                b = rho + (b - rho) * 4.0;
            }
            let v = heat_integral(rho).unwrap();
            assert!((v - total).abs() < 1e-6 * v, "rho={rho}: {v} vs {total}");
        }
    }

    #[test]
    fn heat_integral_is_decreasing() {
        let mut last = heat_integral(0.0).unwrap();
        for i in 1..=32 {
            let v = heat_integral(i as f64 * 0.25).unwrap();
            assert!(v < last);
            last = v;
        }
        assert!(heat_integral(-1.0).is_err());
    }

    #[test]
    fn heat_chain_examples() {
        let h0 = heat_integral(0.0).unwrap();
        assert_relative_eq!(heat_upper_hkeqn1(2, 0.0).unwrap(), 4.0 / (2f64.sqrt() * PI * 2.5) * h0, max_relative = 1e-14);
        assert_relative_eq!(heat_upper_hkeqn1(2, 0.0).unwrap(), 0.83775, epsilon = 1e-5);
        assert!(heat_upper_hkeqn1(2, 60.0).unwrap() < 1e-40);
        assert_relative_eq!(heat_upper_hkeqn4(2, 0.0), 32.0 / (2.5 * PI), max_relative = 1e-15);
        assert_relative_eq!(heat_upper_hkeqn4(2, 2f64.ln()), 32.0 / (2.5 * PI) / 4.0, max_relative = 1e-14);
        let r = heat_upper_hkeqn4(100, 0.0) / 100.0 / (8.0 / PI);
        assert!((r - 1.0).abs() < 0.02);
    }

    #[test]
    fn type1_examples() {
        let k = WeightVector::new(vec![2]).unwrap();
        let s = 0.5f64.sinh();
        assert_relative_eq!(type1_bound(&k, 2.0).unwrap(), (36.0 + 1.0 / (s * s)) * 2.0, max_relative = 1e-15);
        assert_relative_eq!(type1_bound(&k, 2.0).unwrap(), 79.365, epsilon = 1e-2);
        assert_relative_eq!(type1_bound(&k, 200.0).unwrap(), 72.0, max_relative = 1e-12);
        assert!(type1_bound(&k, 1.0).unwrap() > type1_bound(&k, 2.0).unwrap());
        assert!(type1_bound(&k, 0.0).is_err());
    }

    #[test]
    fn t_term_examples() {
        let t = t_terms(1.0, 0.75).unwrap();
        assert_eq!(t.t1, 1.0);
        let s = 0.25f64.sinh();
        assert_relative_eq!(t.t2, (-1.5f64).exp() * 0.5f64.sinh() * 0.75f64.sinh() / (s * s), max_relative = 1e-15);
        assert_relative_eq!(t.t3_ceiling, 1.0 / (4.0 * s * s), max_relative = 1e-15);
        assert_relative_eq!(t.t3_ceiling, 3.9177, epsilon = 1e-4);
        assert!(t.within_ceilings());
        assert!(t.t3 <= t.t3_intermediate);
    }

    #[test]
    fn gamma_integral_anchors() {
        assert!((gamma_ratio_integral(1) - PI / 2.0).abs() < 1e-15);
        assert!((gamma_ratio_integral(2) - PI / 4.0).abs() < 1e-15);
        for k in 1..=20 {
            let q = gamma_ratio_quadrature(k).unwrap();
            let c = 0.5 * PI.sqrt() * gamma_ratio(k);
            assert!((q - gamma_ratio_integral(k)).abs() <= 1e-10, "k={k}");
            assert!((c - gamma_ratio_integral(k)).abs() <= 1e-12, "k={k}");
        }
    }

    #[test]
    fn auxlemma_rhs_examples() {
        let f = QuadraticField::new(5).unwrap();
        let one = f.one();
        let z = pair(0.0, 1.0, 0.0, 1.0);
        assert_relative_eq!(auxlemma_rhs(&z, &one, &kv(2, 2)).unwrap(), PI / 4.0, max_relative = 1e-13);
        let z2 = pair(0.0, 2.0, 0.0, 1.0);
        assert_relative_eq!(
            auxlemma_rhs(&z2, &one, &kv(2, 2)).unwrap(),
            2.0 * auxlemma_rhs(&z, &one, &kv(2, 2)).unwrap(),
            max_relative = 1e-13
        );
        assert!(auxlemma_rhs(&z, &one, &kv(4, 2)).unwrap() < auxlemma_rhs(&z, &one, &kv(2, 2)).unwrap());
        assert!(auxlemma_rhs(&z, &f.element(2, 0), &kv(2, 2)).is_err());
    }

    #[test]
    fn auxlemma_zero_term_and_symmetry() {
        let f = QuadraticField::new(5).unwrap();
        let k = kv(2, 2);
        // α = 0, ε = 1, x = 0: each factor is (4y²)^k/((2y)²)^k = 1.
        let fac = Factor::new(2, 1.0, 0.0, 1.7);
        assert_relative_eq!(fac.eval(0.0), 1.0, max_relative = 1e-15);

        let z = pair(0.0, 1.3, 0.0, 0.7);
        let eps = fundamental_unit(&f).unwrap();
        let a = auxlemma(&f, &z, &eps, &k, 8.0, 10_000_000).unwrap();
        let b = auxlemma(&f, &z, &eps.neg(), &k, 8.0, 10_000_000).unwrap();
        let c = auxlemma(&f, &z, &eps.unit_inverse().unwrap(), &k, 8.0, 10_000_000).unwrap();
        assert_relative_eq!(a.truncated_value, b.truncated_value, max_relative = 1e-12);
        assert_relative_eq!(a.truncated_value, c.truncated_value, max_relative = 1e-12);
    }

    #[test]
    fn auxlemma_tail_brackets_larger_truncations() {
        let f = QuadraticField::new(2).unwrap();
        let z = pair(0.3, 1.1, -0.2, 0.8);
        let eps = fundamental_unit(&f).unwrap();
        let k = kv(2, 4);
        let small = auxlemma(&f, &z, &eps, &k, 4.0, 10_000_000).unwrap();
        let big = auxlemma(&f, &z, &eps, &k, 40.0, 10_000_000).unwrap();
        assert!(big.truncated_value >= small.truncated_value);
        assert!(big.truncated_value <= small.truncated_value + small.tail_bound);
        assert!(big.tail_bound < small.tail_bound);
    }

    #[test]
    fn unit_sum_examples() {
        let f = QuadraticField::new(5).unwrap();
        let u = unit_sum(&f, (1.0, 1.0), 10).unwrap();
        assert_relative_eq!(u.report.ceiling, 4.0 * PI * PI, max_relative = 1e-15);
        assert!(u.report.satisfied);
        assert!(u.report.truncated_value > 1.0 && u.report.truncated_value < 20.0);
        // Exact unit arithmetic agrees with the |σ₁| = ε₀ⁿ shortcut.
        let brute: f64 = enumerate_units(&f, 10)
            .unwrap()
            .iter()
            .map(|e| {
                let (a, b) = e.embeddings();
                4.0 / ((1.0 + a * a) * (1.0 + b * b))
            })
            .sum();
        assert_relative_eq!(u.report.truncated_value, brute, max_relative = 1e-12);
        assert_relative_eq!(u.modulo_sign_truncated * 2.0, u.report.truncated_value, max_relative = 1e-15);
        let u23 = unit_sum(&f, (2.0, 3.0), 10).unwrap();
        assert_relative_eq!(u23.report.ceiling, 24.0 * PI * PI, max_relative = 1e-15);
        let more = unit_sum(&f, (1.0, 1.0), 30).unwrap();
        assert!(more.report.truncated_value <= u.report.truncated_value + u.report.tail_bound);
    }

    #[test]
    fn cusp_bound_examples() {
        let k = kv(2, 2);
        let v = cusp_stabilizer_bound(&k, &YMode::Fixed(vec![1.0, 1.0])).unwrap();
        assert_relative_eq!(v, (4.0 * (PI.sqrt() / 2.0) * (4.0 / 2.5)).powi(2), max_relative = 1e-13);
        let v2 = cusp_stabilizer_bound(&k, &YMode::Fixed(vec![3.0, 1.0])).unwrap();
        assert_relative_eq!(v2, 3.0 * v, max_relative = 1e-13);
        let ratios: Vec<f64> = [10u32, 100, 1000]
            .iter()
            .map(|&kk| {
                let w = kv(kk, kk);
                cusp_stabilizer_bound(&w, &YMode::Sup { c: 1.0 }).unwrap() / (kk as f64).powf(3.0)
            })
            .collect();
        let (lo, hi) = ratios.iter().fold((f64::MAX, 0.0f64), |(l, h), &r| (l.min(r), h.max(r)));
        assert!(hi / lo < 1.25, "{ratios:?}");
    }

    #[test]
    fn type2_limits() {
        let k = kv(4, 6);
        let t = type2_bound(&k, 300.0, &YMode::Fixed(vec![1e-300, 1e-300])).unwrap();
        assert_relative_eq!(t.total, 36.0 * 36.0 * 24.0, max_relative = 1e-12);
        let t2 = type2_bound(&k, 2.0, &YMode::Sup { c: 1.0 }).unwrap();
        assert_relative_eq!(t2.total, t2.orbit_part + t2.cusp_part, max_relative = 1e-15);
        assert_relative_eq!(t2.orbit_part, type1_bound(&k, 2.0).unwrap(), max_relative = 1e-15);
    }
}
