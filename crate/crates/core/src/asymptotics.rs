//! Large-weight behaviour of level-one Bergman kernels: the limit constant,
//! ratio tables B_k(z)/k, mass equidistribution on boxes, the dimension
//! identity ∫_X B_k dμ = dim S_k and sup-norm scans.

use std::f64::consts::PI;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forms::{dim_cusp_forms, FormsError, GramOptions, OrthonormalBasis};
use crate::hyperbolic::{laplacian_log_y_fd, GeometryError, UhpPoint};
use crate::quadrature::{integrate, integrate_vec, AdaptiveOptions, QuadratureError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AsymptoticsError {
    #[error("dimension, cover degree and bundle rank must all be ≥ 1")]
    InvalidTarget,
    #[error("box must satisfy x₀ < x₁ and 0 < y₀ < y₁ (got x = {x:?}, y = {y:?})")]
    InvalidBox { x: (f64, f64), y: (f64, f64) },
    #[error("box leaves the standard fundamental domain")]
    BoxOutsideDomain,
    #[error("S_{0} is zero-dimensional")]
    EmptySpace(u32),
    #[error("scan grid needs at least 2×2 points and y_max above the domain")]
    InvalidGrid,
    #[error(transparent)]
    Forms(#[from] FormsError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// [X¹ : X] · rank / (4π)^r.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsymptoticTarget {
    pub r: u32,
    pub cover_degree: u32,
    pub bundle_rank: u32,
}

impl AsymptoticTarget {
    pub fn new(r: u32, cover_degree: u32, bundle_rank: u32) -> Result<Self, AsymptoticsError> {
        if r == 0 || cover_degree == 0 || bundle_rank == 0 {
            return Err(AsymptoticsError::InvalidTarget);
        }
        Ok(Self { r, cover_degree, bundle_rank })
    }
}

pub fn limit_target(t: &AsymptoticTarget) -> f64 {
    t.cover_degree as f64 * t.bundle_rank as f64 / (4.0 * PI).powi(t.r as i32)
}

/// −(k₀/4π) y² Δ_fd(log y): the curvature form of the Petersson metric on
/// the weight-k₀ line bundle, relative to the hyperbolic area form.
pub fn curvature_constant(k0: f64, z: &UhpPoint, h: f64) -> Result<f64, AsymptoticsError> {
    let lap = laplacian_log_y_fd(z, h)?;
    Ok(-(k0 / (4.0 * PI)) * lap * z.y() * z.y())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub k: u32,
    pub bergman: f64,
    pub ratio: f64,
}

/// (k, B_k(z), B_k(z)/k) for each weight.
pub fn ratio_series(z: &UhpPoint, weights: &[u32], opts: &GramOptions) -> Result<Vec<RatioRow>, AsymptoticsError> {
    weights
        .iter()
        .map(|&k| {
            let b = OrthonormalBasis::new(k, opts)?.bergman(z)?;
            Ok(RatioRow { k, bergman: b, ratio: b / k as f64 })
        })
        .collect()
}

/// Axis-parallel box [x₀, x₁] × [y₀, y₁].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassBox {
    pub x: (f64, f64),
    pub y: (f64, f64),
    /// Whether the box lies inside the standard fundamental domain.
    pub in_fundamental_domain: bool,
}

impl MassBox {
    pub fn new(x: (f64, f64), y: (f64, f64)) -> Result<Self, AsymptoticsError> {
        let finite = [x.0, x.1, y.0, y.1].iter().all(|v| v.is_finite());
        if !finite || !(x.0 < x.1) || !(0.0 < y.0 && y.0 < y.1) {
            return Err(AsymptoticsError::InvalidBox { x, y });
        }
        // Closest approach to x = 0 decides where the arc is highest.
        let m = if x.0 <= 0.0 && x.1 >= 0.0 { 0.0 } else { x.0.abs().min(x.1.abs()) };
        let inside = x.0 >= -0.5 && x.1 <= 0.5 && y.0 * y.0 + m * m >= 1.0;
        Ok(Self { x, y, in_fundamental_domain: inside })
    }

    /// ∫_A dx dy / y².
    pub fn hyperbolic_area(&self) -> f64 {
        (self.x.1 - self.x.0) * (1.0 / self.y.0 - 1.0 / self.y.1)
    }
}

/// Area of the standard fundamental domain by quadrature of the volume form.
pub fn fundamental_domain_volume() -> Result<f64, AsymptoticsError> {
    // ∫_{√(1−x²)}^∞ dy/y² = 1/√(1−x²)
    let est = integrate(|x| 1.0 / (1.0 - x * x).sqrt(), -0.5, 0.5, &AdaptiveOptions::with_tolerances(1e-15, 1e-14))?;
    Ok(est.value)
}

/// Integration region for [`que_mass`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MassRegion {
    Box(MassBox),
    FullDomain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueMass {
    pub k: u32,
    pub mass: f64,
    /// μ_hyp(A) / vol(X).
    pub target: f64,
    pub deviation: f64,
    pub quadrature_error: f64,
    pub volume: f64,
}

/// ∫ f dμ over {x ∈ [x₀, x₁], y_lo(x) ≤ y ≤ y_hi}.
fn integrate_region<F>(
    f: F,
    x: (f64, f64),
    y_lo: &(dyn Fn(f64) -> f64 + Sync),
    y_hi: f64,
    opts: &GramOptions,
) -> Result<(f64, f64), AsymptoticsError>
where
    F: Fn(&UhpPoint) -> Result<f64, AsymptoticsError> + Sync,
{
    let failure: Mutex<Option<AsymptoticsError>> = Mutex::new(None);
    let record = |e: AsymptoticsError| {
        let mut slot = failure.lock().expect("poisoned");
        if slot.is_none() {
            *slot = Some(e);
        }
    };
    let inner = |xv: f64, out: &mut [f64]| {
        let res = integrate_vec(
            |y: f64, o: &mut [f64]| {
                let v = UhpPoint::new(xv, y).map_err(AsymptoticsError::from).and_then(|z| f(&z));
                o[0] = match v {
                    Ok(v) => v / (y * y),
                    Err(e) => {
                        record(e);
                        0.0
                    }
                };
            },
            1,
            y_lo(xv),
            y_hi,
            &opts.inner,
        );
        match res {
            Ok(est) => {
                out[0] = est.values[0];
                out[1] = est.error;
            }
            Err(e) => {
                record(e.into());
                out[0] = 0.0;
                out[1] = 0.0;
            }
        }
    };
    let outer = integrate_vec(inner, 2, x.0, x.1, &opts.outer);
    if let Some(e) = failure.into_inner().expect("poisoned") {
        return Err(e);
    }
    let outer = outer?;
    Ok((outer.values[0], outer.error + outer.values[1]))
}

fn arc(x: f64) -> f64 {
    (1.0 - x * x).sqrt()
}

/// ∫_F B_k dμ with its error estimate; the region above the Gram cusp
/// cutoff contributes less than the Gram tail tolerance per basis form.
/// Tolerances are a hundred times tighter than those of the Gram matrix.
fn bergman_integral(basis: &OrthonormalBasis, opts: &GramOptions) -> Result<(f64, f64), AsymptoticsError> {
    let mut opts = *opts;
    for o in [&mut opts.inner, &mut opts.outer] {
        o.abs_tol *= 1e-2;
        o.rel_tol *= 1e-2;
    }
    let opts = &opts;
    let f = |z: &UhpPoint| -> Result<f64, AsymptoticsError> {
        Ok(basis.petersson_values(z)?.iter().map(|v| v.norm_sqr()).sum())
    };
    let (v, e) = integrate_region(f, (-0.5, 0.5), &arc, basis.y_max, opts)?;
    Ok((v, e + basis.dim() as f64 * opts.tail_tol))
}

/// (1/δ_k) ∫_A B_k dμ against μ_hyp(A)/vol(X).
pub fn que_mass(region: &MassRegion, basis: &OrthonormalBasis, opts: &GramOptions) -> Result<QueMass, AsymptoticsError> {
    let k = basis.weight;
    let dim = basis.dim();
    if dim == 0 {
        return Err(AsymptoticsError::EmptySpace(k));
    }
    let volume = fundamental_domain_volume()?;
    let (integral, err, target) = match region {
        MassRegion::FullDomain => {
            let (v, e) = bergman_integral(basis, opts)?;
            (v, e, 1.0)
        }
        MassRegion::Box(b) => {
            if !b.in_fundamental_domain {
                return Err(AsymptoticsError::BoxOutsideDomain);
            }
            let f = |z: &UhpPoint| -> Result<f64, AsymptoticsError> {
                Ok(basis.petersson_values(z)?.iter().map(|v| v.norm_sqr()).sum())
            };
            let lo = b.y.0;
            let (v, e) = integrate_region(f, b.x, &move |_| lo, b.y.1, opts)?;
            (v, e, b.hyperbolic_area() / volume)
        }
    };
    let mass = integral / dim as f64;
    Ok(QueMass {
        k,
        mass,
        target,
        deviation: mass - target,
        quadrature_error: err / dim as f64,
        volume,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionCheck {
    pub k: u32,
    pub integral: f64,
    pub dim: usize,
    pub relative_error: f64,
}

/// ∫_X B_k dμ against dim S_k.
pub fn dimension_consistency(basis: &OrthonormalBasis, opts: &GramOptions) -> Result<DimensionCheck, AsymptoticsError> {
    let k = basis.weight;
    let dim = dim_cusp_forms(k);
    if basis.dim() == 0 {
        return Ok(DimensionCheck { k, integral: 0.0, dim, relative_error: 0.0 });
    }
    let (integral, _) = bergman_integral(basis, opts)?;
    Ok(DimensionCheck {
        k,
        integral,
        dim,
        relative_error: (integral - dim as f64).abs() / dim as f64,
    })
}

/// Grid over the standard fundamental domain: `nx` columns in x ∈ [−1/2, 1/2],
/// each with `ny` heights from the arc to `y_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub nx: usize,
    pub ny: usize,
    pub y_max: f64,
}

impl ScanGrid {
    /// 200 × 200 up to max(10, k/(2π)), well above the height k/(4π) where
    /// yᵏ e^{−4πy} peaks.
    pub fn default_for(k: u32) -> Self {
        Self { nx: 200, ny: 200, y_max: (k as f64 / (2.0 * PI)).max(10.0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupScan {
    pub k: u32,
    pub sup: f64,
    pub argmax: UhpPoint,
    /// sup / k^{3/2}.
    pub normalized: f64,
}

fn clamp_to_domain(x: f64, y: f64) -> (f64, f64) {
    let x = x.clamp(-0.5, 0.5);
    (x, y.max(arc(x)))
}

/// Maximum of B_k over a grid on the fundamental domain, polished by a
/// compass search around the best grid point.
pub fn supnorm_scan(basis: &OrthonormalBasis, grid: &ScanGrid) -> Result<SupScan, AsymptoticsError> {
    let k = basis.weight;
    if grid.nx < 2 || grid.ny < 2 || !(grid.y_max > 1.0) {
        return Err(AsymptoticsError::InvalidGrid);
    }
    let eval = |x: f64, y: f64| -> Result<f64, AsymptoticsError> {
        let z = UhpPoint::new(x, y)?;
        Ok(basis.petersson_values(&z)?.iter().map(|v| v.norm_sqr()).sum())
    };
    let points: Vec<(f64, f64)> = (0..grid.nx)
        .flat_map(|i| {
            let x = -0.5 + i as f64 / (grid.nx - 1) as f64;
            let y0 = arc(x);
            (0..grid.ny).map(move |j| (x, y0 + (grid.y_max - y0) * j as f64 / (grid.ny - 1) as f64))
        })
        .collect();
    let values: Vec<f64> = points
        .par_iter()
        .map(|&(x, y)| eval(x, y))
        .collect::<Result<_, _>>()?;
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    let (mut x, mut y) = points[best];
    let mut fx = values[best];
    let mut step = [1.0 / (grid.nx - 1) as f64, (grid.y_max - 0.5) / (grid.ny - 1) as f64];
    while step[0].max(step[1]) > 1e-10 {
        let mut moved = false;
        for (dx, dy) in [(step[0], 0.0), (-step[0], 0.0), (0.0, step[1]), (0.0, -step[1])] {
            let (cx, cy) = clamp_to_domain(x + dx, y + dy);
            let v = eval(cx, cy)?;
            if v > fx {
                x = cx;
                y = cy;
                fx = v;
                moved = true;
            }
        }
        if !moved {
            step = [step[0] / 2.0, step[1] / 2.0];
        }
    }
    Ok(SupScan {
        k,
        sup: fx,
        argmax: UhpPoint::new(x, y)?,
        normalized: fx / (k as f64).powf(1.5),
    })
}
