//! Geometry of the upper half-plane H and of products H^r.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Iteration cap for the fundamental-domain reduction.
pub const REDUCTION_ITERATION_CAP: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point must lie in the upper half-plane (got y = {0})")]
    NotInUpperHalfPlane(f64),
    #[error("coordinates must be finite")]
    NonFinite,
    #[error("Moebius map must have positive determinant (got {0})")]
    NonPositiveDeterminant(f64),
    #[error("a point of H^r needs at least one coordinate")]
    EmptyPolyPoint,
    #[error("reduction did not terminate within {0} iterations")]
    IterationLimit(usize),
    #[error("finite-difference step {h} too large for height {y} (need h < y/2)")]
    StepTooLarge { h: f64, y: f64 },
    #[error("finite-difference step must be positive (got {0})")]
    NonPositiveStep(f64),
}

/// A point x + iy of the upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UhpPoint {
    x: f64,
    y: f64,
}

impl UhpPoint {
    pub fn new(x: f64, y: f64) -> Result<Self, GeometryError> {
        if !x.is_finite() || !y.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        if y <= 0.0 {
            return Err(GeometryError::NotInUpperHalfPlane(y));
        }
        Ok(Self { x, y })
    }

    pub fn from_complex(z: Complex64) -> Result<Self, GeometryError> {
        Self::new(z.re, z.im)
    }

    /// The point i.
    pub fn i() -> Self {
        Self { x: 0.0, y: 1.0 }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::new(self.x, self.y)
    }
}

impl fmt::Display for UhpPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}i", self.x, self.y)
    }
}

/// A point (z_1, ..., z_r) of H^r.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyPoint {
    coords: Vec<UhpPoint>,
}

impl PolyPoint {
    pub fn new(coords: Vec<UhpPoint>) -> Result<Self, GeometryError> {
        if coords.is_empty() {
            return Err(GeometryError::EmptyPolyPoint);
        }
        Ok(Self { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[UhpPoint] {
        &self.coords
    }
}

/// Real 2×2 matrix of positive determinant acting by fractional-linear maps.
///
/// With `projective` set, γ and −γ compare equal.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MoebiusMap {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub projective: bool,
}

impl MoebiusMap {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self, GeometryError> {
        Self::build(a, b, c, d, false)
    }

    pub fn projective(a: f64, b: f64, c: f64, d: f64) -> Result<Self, GeometryError> {
        Self::build(a, b, c, d, true)
    }

    fn build(a: f64, b: f64, c: f64, d: f64, projective: bool) -> Result<Self, GeometryError> {
        if ![a, b, c, d].iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let det = a * d - b * c;
        if det <= 0.0 {
            return Err(GeometryError::NonPositiveDeterminant(det));
        }
        Ok(Self { a, b, c, d, projective })
    }

    pub fn identity() -> Self {
        Self { a: 1.0, b: 0.0, c: 0.0, d: 1.0, projective: true }
    }

    /// z ↦ z + n.
    pub fn translation(n: f64) -> Self {
        Self { a: 1.0, b: n, c: 0.0, d: 1.0, projective: true }
    }

    /// z ↦ −1/z.
    pub fn inversion() -> Self {
        Self { a: 0.0, b: -1.0, c: 1.0, d: 0.0, projective: true }
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn compose(&self, other: &MoebiusMap) -> MoebiusMap {
        MoebiusMap {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
            projective: self.projective && other.projective,
        }
    }

    pub fn inverse(&self) -> MoebiusMap {
        let det = self.det();
        MoebiusMap {
            a: self.d / det,
            b: -self.b / det,
            c: -self.c / det,
            d: self.a / det,
            projective: self.projective,
        }
    }

    /// Entries with the sign fixed so the first nonzero entry is positive.
    pub fn normalized_entries(&self) -> [f64; 4] {
        let e = [self.a, self.b, self.c, self.d];
        let first = e.iter().copied().find(|v| *v != 0.0).unwrap_or(1.0);
        if first < 0.0 {
            e.map(|v| -v)
        } else {
            e
        }
    }

    pub fn apply(&self, z: &UhpPoint) -> UhpPoint {
        apply_moebius(self, z)
    }
}

impl PartialEq for MoebiusMap {
    fn eq(&self, other: &Self) -> bool {
        if self.projective && other.projective {
            self.normalized_entries() == other.normalized_entries()
        } else {
            [self.a, self.b, self.c, self.d] == [other.a, other.b, other.c, other.d]
        }
    }
}

/// cosh²(d/2) − 1 = |z − w|² / (4 y_z y_w).
fn half_distance_sinh_sq(z: &UhpPoint, w: &UhpPoint) -> f64 {
    let dx = z.x - w.x;
    let dy = z.y - w.y;
    (dx * dx + dy * dy) / (4.0 * z.y * w.y)
}

/// Hyperbolic distance on H.
pub fn geodesic_distance(z: &UhpPoint, w: &UhpPoint) -> f64 {
    let s = half_distance_sinh_sq(z, w);
    // 2 arccosh(sqrt(s + 1)) = 2 asinh(sqrt(s)); the latter keeps precision as s → 0.
    if s < 1.0 {
        2.0 * s.max(0.0).sqrt().asinh()
    } else {
        2.0 * (s + 1.0).max(1.0).sqrt().acosh()
    }
}

/// cosh of the hyperbolic distance, 1 + |z − w|²/(2 y_z y_w).
pub fn cosh_distance(z: &UhpPoint, w: &UhpPoint) -> f64 {
    1.0 + 2.0 * half_distance_sinh_sq(z, w)
}

pub fn apply_moebius(g: &MoebiusMap, z: &UhpPoint) -> UhpPoint {
    let zc = z.to_complex();
    let num = zc * g.a + g.b;
    let den = zc * g.c + g.d;
    let w = num / den;
    // Imaginary part from det·y/|cz+d|² keeps it strictly positive.
    let y = g.det() * z.y / den.norm_sqr();
    UhpPoint { x: w.re, y }
}

/// ρ_{γ,z} = d(z, γz).
pub fn displacement(g: &MoebiusMap, z: &UhpPoint) -> f64 {
    geodesic_distance(z, &apply_moebius(g, z))
}

/// Density ∏ 1/y_j² of the hyperbolic volume form on H^r.
pub fn volume_element(z: &PolyPoint) -> f64 {
    z.coords.iter().map(|p| 1.0 / (p.y * p.y)).product()
}

/// Moves `z` into the standard fundamental domain of PSL₂(Z).
///
/// Returns (z′, γ) with γz = z′, |Re z′| ≤ 1/2 and |z′| ≥ 1.
pub fn reduce_psl2z(z: &UhpPoint) -> Result<(UhpPoint, MoebiusMap), GeometryError> {
    let mut w = *z;
    let mut g = MoebiusMap::identity();
    for _ in 0..REDUCTION_ITERATION_CAP {
        let n = (w.x + 0.5).floor();
        if n != 0.0 {
            let t = MoebiusMap::translation(-n);
            w = t.apply(&w);
            g = t.compose(&g);
        }
        if w.x * w.x + w.y * w.y < 1.0 {
            let s = MoebiusMap::inversion();
            w = s.apply(&w);
            g = s.compose(&g);
        } else {
            return Ok((w, g));
        }
    }
    Err(GeometryError::IterationLimit(REDUCTION_ITERATION_CAP))
}

/// Five-point Euclidean Laplacian of log y at z.
///
/// The exact value is −1/y²; the curvature form of the Petersson metric is
/// (k/4π)·μ_hyp because of this identity.
pub fn laplacian_log_y_fd(z: &UhpPoint, h: f64) -> Result<f64, GeometryError> {
    if !(h > 0.0) {
        return Err(GeometryError::NonPositiveStep(h));
    }
    if h >= z.y / 2.0 {
        return Err(GeometryError::StepTooLarge { h, y: z.y });
    }
    let f = |_x: f64, y: f64| y.ln();
    let (x, y) = (z.x, z.y);
    let center = f(x, y);
    let lap = (f(x + h, y) + f(x - h, y) + f(x, y + h) + f(x, y - h) - 4.0 * center) / (h * h);
    Ok(lap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn p(x: f64, y: f64) -> UhpPoint {
        UhpPoint::new(x, y).unwrap()
    }

    #[test]
    fn rejects_lower_half_plane() {
        assert!(UhpPoint::new(0.0, 0.0).is_err());
        assert!(UhpPoint::new(0.0, -1.0).is_err());
        assert!(MoebiusMap::new(1.0, 0.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn distance_examples() {
        assert_eq!(geodesic_distance(&p(0.0, 1.0), &p(0.0, 1.0)), 0.0);
        assert_relative_eq!(geodesic_distance(&p(0.0, 1.0), &p(0.0, 2.0)), 2f64.ln(), epsilon = 1e-14);
        let expected = 2.0 * (5f64.sqrt() / 2.0).acosh();
        assert_relative_eq!(geodesic_distance(&p(0.0, 1.0), &p(1.0, 1.0)), expected, epsilon = 1e-14);
        assert_relative_eq!(expected, 0.962424, epsilon = 1e-6);
    }

    #[test]
    fn moebius_examples() {
        let z = p(0.3, 0.7);
        assert_eq!(MoebiusMap::identity().apply(&z), z);
        let w = MoebiusMap::translation(1.0).apply(&p(0.0, 1.0));
        assert_relative_eq!(w.x(), 1.0);
        assert_relative_eq!(w.y(), 1.0);
        let w = MoebiusMap::inversion().apply(&p(0.0, 2.0));
        assert_relative_eq!(w.x(), 0.0, epsilon = 1e-16);
        assert_relative_eq!(w.y(), 0.5);
    }

    #[test]
    fn displacement_examples() {
        assert_eq!(displacement(&MoebiusMap::identity(), &UhpPoint::i()), 0.0);
        assert_relative_eq!(
            displacement(&MoebiusMap::translation(1.0), &UhpPoint::i()),
            0.962424,
            epsilon = 1e-6
        );
        let d = displacement(&MoebiusMap::translation(1.0), &p(0.0, 10.0));
        assert_relative_eq!(d, 2.0 * (1.0f64 / 400.0 + 1.0).sqrt().acosh(), epsilon = 1e-14);
        assert_relative_eq!(d, 0.0999, epsilon = 1e-3);
    }

    #[test]
    fn volume_element_examples() {
        let one = PolyPoint::new(vec![p(0.0, 1.0)]).unwrap();
        assert_eq!(volume_element(&one), 1.0);
        assert_eq!(volume_element(&PolyPoint::new(vec![p(0.0, 2.0)]).unwrap()), 0.25);
        let two = PolyPoint::new(vec![p(0.0, 1.0), p(0.0, 3.0)]).unwrap();
        assert_relative_eq!(volume_element(&two), 1.0 / 9.0);
        assert!(PolyPoint::new(vec![]).is_err());
    }

    #[test]
    fn reduction_examples() {
        let (w, g) = reduce_psl2z(&p(0.1, 2.0)).unwrap();
        assert_eq!(w, p(0.1, 2.0));
        assert_eq!(g, MoebiusMap::identity());

        let (w, g) = reduce_psl2z(&p(2.3, 1.0)).unwrap();
        assert_relative_eq!(w.x(), 0.3, epsilon = 1e-14);
        assert_relative_eq!(w.y(), 1.0);
        assert_eq!(g, MoebiusMap::translation(-2.0));
        assert!(w.x() * w.x() + w.y() * w.y() >= 1.0);

        let (w, g) = reduce_psl2z(&p(0.0, 0.5)).unwrap();
        assert_relative_eq!(w.y(), 2.0);
        assert_eq!(g, MoebiusMap::inversion());
    }

    #[test]
    fn projective_equality_ignores_sign() {
        let g = MoebiusMap::projective(1.0, 2.0, 3.0, 7.0).unwrap();
        let mut h = g;
        h.a = -1.0;
        h.b = -2.0;
        h.c = -3.0;
        h.d = -7.0;
        assert_eq!(g, h);
        let mut g2 = g;
        g2.projective = false;
        let mut h2 = h;
        h2.projective = false;
        assert_ne!(g2, h2);
    }

    #[test]
    fn laplacian_examples() {
        assert_relative_eq!(laplacian_log_y_fd(&p(0.0, 2.0), 1e-3).unwrap(), -0.25, epsilon = 1e-6);
        assert_relative_eq!(laplacian_log_y_fd(&p(0.0, 1.0), 1e-3).unwrap(), -1.0, epsilon = 1e-5);
        assert_relative_eq!(laplacian_log_y_fd(&p(0.3, 4.0), 1e-3).unwrap(), -0.0625, epsilon = 1e-6);
        assert!(matches!(
            laplacian_log_y_fd(&p(0.0, 1.0), 0.5),
            Err(GeometryError::StepTooLarge { .. })
        ));
    }

    #[test]
    fn laplacian_converges_quadratically() {
        for z in [p(0.0, 1.0), p(0.2, 1.5), p(-0.4, 0.9)] {
            let exact = -1.0 / (z.y() * z.y());
            let e1 = (laplacian_log_y_fd(&z, 1e-2).unwrap() - exact).abs();
            let e2 = (laplacian_log_y_fd(&z, 5e-3).unwrap() - exact).abs();
            let ratio = e1 / e2;
            assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
        }
    }

    fn arb_point() -> impl Strategy<Value = UhpPoint> {
        (-5.0f64..5.0, 0.05f64..5.0).prop_map(|(x, y)| p(x, y))
    }

    fn arb_sl2r() -> impl Strategy<Value = MoebiusMap> {
        (-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0).prop_filter_map("det", |(a, b, c)| {
            if a.abs() < 0.1 {
                return None;
            }
            // d from ad − bc = 1
            let d = (1.0 + b * c) / a;
            MoebiusMap::new(a, b, c, d).ok()
        })
    }

    proptest! {
        #[test]
        fn distance_is_symmetric(z in arb_point(), w in arb_point()) {
            prop_assert_eq!(geodesic_distance(&z, &w), geodesic_distance(&w, &z));
        }

        #[test]
        fn distance_is_isometry_invariant(z in arb_point(), w in arb_point(), g in arb_sl2r()) {
            let d0 = geodesic_distance(&z, &w);
            let d1 = geodesic_distance(&g.apply(&z), &g.apply(&w));
            prop_assert!((d0 - d1).abs() <= 1e-12 * d0.max(1.0) * 10.0, "{} vs {}", d0, d1);
        }

        #[test]
        fn triangle_inequality(a in arb_point(), b in arb_point(), c in arb_point()) {
            let ab = geodesic_distance(&a, &b);
            let bc = geodesic_distance(&b, &c);
            let ac = geodesic_distance(&a, &c);
            prop_assert!(ac <= ab + bc + 1e-12 * (ab + bc).max(1.0));
        }

        #[test]
        fn reduction_lands_in_fundamental_domain(x in -50.0f64..50.0, y in 1e-3f64..20.0) {
            let z = p(x, y);
            let (w, g) = reduce_psl2z(&z).unwrap();
            prop_assert!(w.x().abs() <= 0.5);
            prop_assert!(w.x() * w.x() + w.y() * w.y() >= 1.0 - 1e-12);
            let gz = g.apply(&z);
            prop_assert!((gz.x() - w.x()).abs() <= 1e-9 * (1.0 + w.x().abs()));
            prop_assert!((gz.y() - w.y()).abs() <= 1e-9 * w.y());
        }
    }
}
