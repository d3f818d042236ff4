//! Level-one cusp forms: exact q-expansions, Petersson products over the
//! standard fundamental domain, orthonormal bases and the Bergman kernel.
//!
//! Basis monomials E₄^a E₆^b Δ^c are never summed from their own (huge)
//! q-expansions during numerics. They are evaluated from the three
//! generators in the log domain, with a per-monomial scale so that every
//! Gram entry is O(1).

use std::f64::consts::PI;
use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hyperbolic::{reduce_psl2z, GeometryError, UhpPoint};
use crate::quadrature::{integrate_vec, AdaptiveOptions, QuadratureError};

/// Default truncation order for the generators E₄, E₆, Δ.
pub const GENERATOR_ORDER: usize = 48;
/// Default lower height for direct q-series evaluation.
pub const DEFAULT_Y_MIN: f64 = 0.5;
/// Relative tail tolerance enforced by [`QExpansion::evaluate`].
pub const EVAL_TAIL_TOL: f64 = 1e-12;

const SQRT3_2: f64 = 0.866_025_403_784_438_6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormsError {
    #[error("weight {0} not supported here")]
    UnsupportedWeight(u32),
    #[error("weights differ ({0} vs {1})")]
    WeightMismatch(u32, u32),
    #[error("expected a cusp form (a_0 = 0)")]
    NotCuspForm,
    #[error("height {y} is below the minimum {y_min}")]
    BelowMinHeight { y: f64, y_min: f64 },
    #[error("q-series tail {tail:e} exceeds tolerance {tol:e} at height {y}; raise the truncation order")]
    TailTooLarge { y: f64, tail: f64, tol: f64 },
    #[error("Gram matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("quadrature error {error:e} exceeds tolerance {tolerance:e}")]
    ToleranceNotMet { error: f64, tolerance: f64 },
    #[error("no integrable cusp cutoff found below y = {0}")]
    NoCuspCutoff(f64),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Truncated q-expansion Σ_{n≤M} a_n qⁿ with exact rational coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct QExpansion {
    pub weight: u32,
    pub coeffs: Vec<BigRational>,
    /// C_f with |a_n| ≤ C_f nᵏ assumed beyond the truncation.
    pub tail_bound_constant: f64,
}

/// A q-series value together with a bound on the truncation error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: Complex64,
    pub tail: f64,
}

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

impl QExpansion {
    /// Builds an expansion and fits C_f = 2·max_{1≤n≤M} |a_n|/nᵏ.
    pub fn new(weight: u32, coeffs: Vec<BigRational>) -> Self {
        let mut c = 0.0f64;
        for (n, a) in coeffs.iter().enumerate().skip(1) {
            let v = to_f64(&a.abs()).ln() - weight as f64 * (n as f64).ln();
            if v.is_finite() {
                c = c.max(v.exp());
            }
        }
        Self {
            weight,
            coeffs,
            tail_bound_constant: 2.0 * c.max(1.0),
        }
    }

    /// Truncation order M.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_cusp_form(&self) -> bool {
        self.coeffs[0].is_zero()
    }

    /// Index of the first nonzero coefficient.
    pub fn valuation(&self) -> usize {
        self.coeffs.iter().position(|a| !a.is_zero()).unwrap_or(self.coeffs.len())
    }

    pub fn coeffs_f64(&self) -> Vec<f64> {
        self.coeffs.iter().map(to_f64).collect()
    }

    pub fn mul(&self, other: &QExpansion) -> QExpansion {
        let m = self.order().min(other.order());
        let mut out = vec![BigRational::zero(); m + 1];
        for (i, a) in self.coeffs.iter().enumerate().take(m + 1) {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate().take(m + 1 - i) {
                out[i + j] += a * b;
            }
        }
        QExpansion::new(self.weight + other.weight, out)
    }

    pub fn pow(&self, e: u32) -> QExpansion {
        let mut acc = QExpansion::new(0, {
            let mut v = vec![BigRational::zero(); self.order() + 1];
            v[0] = BigRational::one();
            v
        });
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn scale(&self, s: &BigRational) -> QExpansion {
        QExpansion::new(self.weight, self.coeffs.iter().map(|a| a * s).collect())
    }

    pub fn sub(&self, other: &QExpansion) -> Result<QExpansion, FormsError> {
        if self.weight != other.weight {
            return Err(FormsError::WeightMismatch(self.weight, other.weight));
        }
        let m = self.order().min(other.order());
        let coeffs = (0..=m).map(|n| &self.coeffs[n] - &other.coeffs[n]).collect();
        Ok(QExpansion::new(self.weight, coeffs))
    }

    /// Σ a_n qⁿ at z with y ≥ [`DEFAULT_Y_MIN`].
    pub fn evaluate(&self, z: &UhpPoint) -> Result<Evaluation, FormsError> {
        self.evaluate_with(z, DEFAULT_Y_MIN, EVAL_TAIL_TOL)
    }

    /// As [`evaluate`](Self::evaluate) with an explicit minimum height and
    /// relative tail tolerance. The tail is measured against Σ|a_n||q|ⁿ.
    pub fn evaluate_with(&self, z: &UhpPoint, y_min: f64, tol: f64) -> Result<Evaluation, FormsError> {
        let y = z.y();
        if y < y_min {
            return Err(FormsError::BelowMinHeight { y, y_min });
        }
        let coeffs = self.coeffs_f64();
        let q = Complex64::from_polar((-2.0 * PI * y).exp(), 2.0 * PI * z.x());
        let r = q.norm();
        let mut value = Complex64::zero();
        let mut abs_sum = 0.0;
        for a in coeffs.iter().rev() {
            value = value * q + a;
        }
        let mut rn = 1.0;
        for a in &coeffs {
            abs_sum += a.abs() * rn;
            rn *= r;
        }
        let tail = series_tail(self.tail_bound_constant, self.weight, self.order(), r);
        if !(tail <= tol * abs_sum) {
            return Err(FormsError::TailTooLarge { y, tail, tol: tol * abs_sum });
        }
        Ok(Evaluation { value, tail })
    }
}

/// Bound on C Σ_{n>M} nᵏ rⁿ by a geometric series from n = M+1.
fn series_tail(c: f64, k: u32, m: usize, r: f64) -> f64 {
    let n0 = (m + 1) as f64;
    let ratio = ((n0 + 1.0) / n0).powi(k as i32) * r;
    if ratio >= 1.0 {
        return f64::INFINITY;
    }
    let log_first = c.ln() + k as f64 * n0.ln() + n0 * r.ln();
    log_first.exp() / (1.0 - ratio)
}

/// Bernoulli numbers B_0 … B_n (B_1 = −1/2).
pub fn bernoulli_numbers(n: usize) -> Vec<BigRational> {
    let mut b: Vec<BigRational> = Vec::with_capacity(n + 1);
    b.push(BigRational::one());
    for m in 1..=n {
        // Σ_{j=0}^{m} C(m+1, j) B_j = 0
        let mut acc = BigRational::zero();
        let mut binom = BigInt::one();
        for (j, bj) in b.iter().enumerate() {
            acc += BigRational::from_integer(binom.clone()) * bj;
            binom = binom * BigInt::from(m + 1 - j) / BigInt::from(j + 1);
        }
        b.push(-acc / BigRational::from_integer(BigInt::from(m + 1)));
    }
    b
}

fn divisor_power_sum(n: u64, p: u32) -> BigInt {
    let mut s = BigInt::zero();
    let mut d = 1u64;
    while d * d <= n {
        if n % d == 0 {
            s += BigInt::from(d).pow(p);
            let e = n / d;
            if e != d {
                s += BigInt::from(e).pow(p);
            }
        }
        d += 1;
    }
    s
}

/// E_k = 1 − (2k/B_k) Σ σ_{k−1}(n) qⁿ for k ∈ {4, 6}.
pub fn eisenstein(k: u32, m: usize) -> Result<QExpansion, FormsError> {
    if k != 4 && k != 6 {
        return Err(FormsError::UnsupportedWeight(k));
    }
    let bk = bernoulli_numbers(k as usize).pop().expect("nonempty");
    let factor = -rat(2 * k as i64) / bk;
    let mut coeffs = Vec::with_capacity(m + 1);
    coeffs.push(BigRational::one());
    for n in 1..=m as u64 {
        coeffs.push(&factor * BigRational::from_integer(divisor_power_sum(n, k - 1)));
    }
    Ok(QExpansion::new(k, coeffs))
}

/// Δ = q ∏_{n≥1} (1 − qⁿ)²⁴ truncated at q^M.
pub fn delta(m: usize) -> QExpansion {
    let mut p = vec![BigInt::zero(); m + 1];
    if m >= 1 {
        p[1] = BigInt::one();
    }
    for n in 1..=m {
        for _ in 0..24 {
            // multiply by (1 − qⁿ), in place from the top
            for i in (n..=m).rev() {
                let t = p[i - n].clone();
                p[i] -= t;
            }
        }
    }
    QExpansion::new(12, p.into_iter().map(BigRational::from_integer).collect())
}

/// Δ = (E₄³ − E₆²)/1728, an independent route to the same coefficients.
pub fn delta_from_eisenstein(m: usize) -> QExpansion {
    let e4 = eisenstein(4, m).expect("weight 4");
    let e6 = eisenstein(6, m).expect("weight 6");
    e4.pow(3)
        .sub(&e6.pow(2))
        .expect("equal weights")
        .scale(&(BigRational::one() / rat(1728)))
}

/// dim S_k(SL₂(Z)).
pub fn dim_cusp_forms(k: u32) -> usize {
    if k % 2 == 1 || k < 12 {
        return 0;
    }
    let base = (k / 12) as usize;
    if k % 12 == 2 {
        base - 1
    } else {
        base
    }
}

/// Exponents of E₄^a E₆^b Δ^c.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Monomial {
    pub a: u32,
    pub b: u32,
    pub c: u32,
}

impl Monomial {
    pub fn weight(&self) -> u32 {
        4 * self.a + 6 * self.b + 12 * self.c
    }
}

/// {E₄^a E₆^b Δ^c : 4a + 6b + 12c = k, c ≥ 1, b ≤ 1}, ordered by c.
pub fn monomials(k: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    if k % 2 == 1 {
        return out;
    }
    let mut c = 1;
    while 12 * c <= k {
        let rest = k - 12 * c;
        for b in 0..=1u32 {
            if 6 * b <= rest && (rest - 6 * b) % 4 == 0 {
                out.push(Monomial { a: (rest - 6 * b) / 4, b, c });
            }
        }
        c += 1;
    }
    out
}

/// Exact q-expansions of [`monomials`] to order `m`.
pub fn monomial_basis(k: u32, m: usize) -> Vec<(Monomial, QExpansion)> {
    let e4 = eisenstein(4, m).expect("weight 4");
    let e6 = eisenstein(6, m).expect("weight 6");
    let d = delta(m);
    monomials(k)
        .into_iter()
        .map(|mo| {
            let f = e4.pow(mo.a).mul(&e6.pow(mo.b)).mul(&d.pow(mo.c));
            (mo, f)
        })
        .collect()
}

/// Values of E₄, E₆, Δ at a point, stored as (log modulus, argument).
#[derive(Debug, Clone, Copy)]
struct GeneratorLogs {
    ln_y: f64,
    mods: [f64; 3],
    args: [f64; 3],
}

/// Float coefficients of E₄, E₆, Δ for fast evaluation at y ≥ √3/2.
#[derive(Debug, Clone)]
pub struct Generators {
    series: [QExpansion; 3],
    coeffs: [Vec<f64>; 3],
}

impl Generators {
    pub fn new(m: usize) -> Self {
        let series = [
            eisenstein(4, m).expect("weight 4"),
            eisenstein(6, m).expect("weight 6"),
            delta(m),
        ];
        let coeffs = [series[0].coeffs_f64(), series[1].coeffs_f64(), series[2].coeffs_f64()];
        Self { series, coeffs }
    }

    /// (E₄(z), E₆(z), Δ(z)) with certified tails.
    pub fn values(&self, z: &UhpPoint) -> Result<[Complex64; 3], FormsError> {
        let y = z.y();
        if y < SQRT3_2 - 1e-12 {
            return Err(FormsError::BelowMinHeight { y, y_min: SQRT3_2 });
        }
        let q = Complex64::from_polar((-2.0 * PI * y).exp(), 2.0 * PI * z.x());
        let r = q.norm();
        let mut out = [Complex64::zero(); 3];
        for (j, c) in self.coeffs.iter().enumerate() {
            let mut v = Complex64::zero();
            let mut abs_sum = 0.0;
            let mut rn = 1.0;
            for a in c {
                abs_sum += a.abs() * rn;
                rn *= r;
            }
            for a in c.iter().rev() {
                v = v * q + a;
            }
            let s = &self.series[j];
            let tail = series_tail(s.tail_bound_constant, s.weight, s.order(), r);
            if !(tail <= 1e-15 * abs_sum) {
                return Err(FormsError::TailTooLarge { y, tail, tol: 1e-15 * abs_sum });
            }
            out[j] = v;
        }
        Ok(out)
    }

    fn logs(&self, z: &UhpPoint) -> Result<GeneratorLogs, FormsError> {
        let v = self.values(z)?;
        Ok(GeneratorLogs {
            ln_y: z.y().ln(),
            mods: [v[0].norm().ln(), v[1].norm().ln(), v[2].norm().ln()],
            args: [v[0].arg(), v[1].arg(), v[2].arg()],
        })
    }

    /// Upper bounds for |E₄|, |E₆|, |Δ/q| on y ≥ 1.
    fn bounds_above_one(&self) -> [f64; 3] {
        let r = (-2.0 * PI).exp();
        let mut out = [0.0; 3];
        for (j, c) in self.coeffs.iter().enumerate() {
            let shift = if j == 2 { 1 } else { 0 };
            let mut s = 0.0;
            let mut rn = 1.0;
            for a in c.iter().skip(shift) {
                s += a.abs() * rn;
                rn *= r;
            }
            let ser = &self.series[j];
            s += series_tail(ser.tail_bound_constant, ser.weight, ser.order(), r) / r.powi(shift as i32);
            out[j] = s;
        }
        out
    }
}

/// Log of y^{k/2} |E₄^a E₆^b Δ^c| and its argument.
fn monomial_log(k: u32, mo: &Monomial, g: &GeneratorLogs) -> (f64, f64) {
    let e = [mo.a as f64, mo.b as f64, mo.c as f64];
    let mut lm = 0.5 * k as f64 * g.ln_y;
    let mut arg = 0.0;
    for j in 0..3 {
        if e[j] > 0.0 {
            lm += e[j] * g.mods[j];
            arg += e[j] * g.args[j];
        }
    }
    (lm, arg)
}

fn from_log(lm: f64, arg: f64) -> Complex64 {
    if lm == f64::NEG_INFINITY {
        Complex64::zero()
    } else {
        Complex64::from_polar(lm.exp(), arg)
    }
}

/// Heights y_j at which sup-scales are sampled.
fn scale_grid(k: u32) -> Vec<UhpPoint> {
    let y_top = (3.0 * k as f64 / (4.0 * PI)).max(4.0);
    let mut pts = Vec::new();
    for &x in &[-0.5, -0.25, 0.0, 0.25, 0.5] {
        let y0 = (1.0f64 - x * x).sqrt();
        let n = 120;
        for i in 0..n {
            let y = y0 * (y_top / y0).powf(i as f64 / (n - 1) as f64);
            pts.push(UhpPoint::new(x, y).expect("positive"));
        }
    }
    pts
}

/// Quadrature settings for Petersson products.
#[derive(Debug, Clone, Copy)]
pub struct GramOptions {
    pub inner: AdaptiveOptions,
    pub outer: AdaptiveOptions,
    /// Bound allowed for the part of the integral above the cusp cutoff.
    pub tail_tol: f64,
    /// Relative error that must be met on the diagonal.
    pub rel_tol: f64,
}

impl Default for GramOptions {
    fn default() -> Self {
        Self {
            inner: AdaptiveOptions::with_tolerances(1e-16, 1e-12),
            outer: AdaptiveOptions::with_tolerances(1e-15, 1e-11),
            tail_tol: 1e-16,
            rel_tol: 1e-9,
        }
    }
}

impl GramOptions {
    pub fn parallel(mut self, on: bool) -> Self {
        self.outer.parallel = on;
        self
    }
}

/// A family of functions u_j(z) = y^{k/2} f_j(z) / √s_j on the fundamental
/// domain together with |u_j| ≤ exp(ln_bound_j) y^{k/2} e^{−2π c_j y} for y ≥ 1.
struct Family<'a> {
    weight: u32,
    len: usize,
    eval: Box<dyn Fn(&UhpPoint, &mut [Complex64]) -> Result<(), FormsError> + Sync + 'a>,
    ln_bounds: Vec<f64>,
    cusp_orders: Vec<u32>,
}

#[derive(Debug, Clone)]
struct GramResult {
    matrix: Vec<Vec<Complex64>>,
    error: f64,
    y_max: f64,
}

/// ln of an upper bound for ∫_Y^∞ y^m e^{−βy} dy, valid when βY > m.
fn ln_upper_incomplete_gamma(y: f64, m: f64, beta: f64) -> f64 {
    let gap = beta - m / y;
    if gap <= 0.0 {
        return f64::INFINITY;
    }
    m * y.ln() - beta * y - gap.ln()
}

fn cusp_cutoff(fam: &Family, tail_tol: f64) -> Result<(f64, f64), FormsError> {
    let m = fam.weight as f64 - 2.0;
    let mut y = 2.0;
    while y <= 1000.0 {
        let mut worst = f64::NEG_INFINITY;
        for i in 0..fam.len {
            for j in i..fam.len {
                let beta = 2.0 * PI * (fam.cusp_orders[i] + fam.cusp_orders[j]) as f64;
                let v = fam.ln_bounds[i] + fam.ln_bounds[j] + ln_upper_incomplete_gamma(y, m, beta);
                worst = worst.max(v);
            }
        }
        if worst.exp() <= tail_tol {
            return Ok((y, worst.exp()));
        }
        y += 0.5;
    }
    Err(FormsError::NoCuspCutoff(1000.0))
}

/// ∫_F u_i ū_j dμ over the standard fundamental domain for all i ≤ j.
fn hermitian_gram(fam: &Family, opts: &GramOptions) -> Result<GramResult, FormsError> {
    let n = fam.len;
    if n == 0 {
        return Ok(GramResult { matrix: Vec::new(), error: 0.0, y_max: 0.0 });
    }
    let (y_max, tail) = cusp_cutoff(fam, opts.tail_tol)?;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let dim = 2 * pairs.len() + 1;
    let failure: Mutex<Option<FormsError>> = Mutex::new(None);
    let record = |e: FormsError| {
        let mut slot = failure.lock().expect("poisoned");
        if slot.is_none() {
            *slot = Some(e);
        }
    };

    let inner = |x: f64, out: &mut [f64]| {
        let y0 = (1.0 - x * x).sqrt();
        let res = integrate_vec(
            |y: f64, o: &mut [f64]| {
                let mut u = vec![Complex64::zero(); n];
                let z = match UhpPoint::new(x, y) {
                    Ok(z) => z,
                    Err(e) => {
                        record(e.into());
                        o.iter_mut().for_each(|v| *v = 0.0);
                        return;
                    }
                };
                if let Err(e) = (fam.eval)(&z, &mut u) {
                    record(e);
                    o.iter_mut().for_each(|v| *v = 0.0);
                    return;
                }
                let w = 1.0 / (y * y);
                for (p, &(i, j)) in pairs.iter().enumerate() {
                    let v = u[i] * u[j].conj() * w;
                    o[2 * p] = v.re;
                    o[2 * p + 1] = v.im;
                }
            },
            dim - 1,
            y0,
            y_max,
            &opts.inner,
        );
        match res {
            Ok(est) => {
                out[..dim - 1].copy_from_slice(&est.values);
                out[dim - 1] = est.error;
            }
            Err(e) => {
                record(e.into());
                out.iter_mut().for_each(|v| *v = 0.0);
            }
        }
    };
    let outer = integrate_vec(inner, dim, -0.5, 0.5, &opts.outer);
    if let Some(e) = failure.into_inner().expect("poisoned") {
        return Err(e);
    }
    let outer = outer?;
    let mut matrix = vec![vec![Complex64::zero(); n]; n];
    for (p, &(i, j)) in pairs.iter().enumerate() {
        let v = Complex64::new(outer.values[2 * p], outer.values[2 * p + 1]);
        matrix[i][j] = v;
        matrix[j][i] = v.conj();
    }
    let error = outer.error + outer.values[dim - 1] + tail;
    let diag = (0..n).map(|i| matrix[i][i].re).fold(f64::INFINITY, f64::min);
    if !(error <= opts.rel_tol * diag) {
        return Err(FormsError::ToleranceNotMet { error, tolerance: opts.rel_tol * diag });
    }
    Ok(GramResult { matrix, error, y_max })
}

/// A Petersson product and its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeterssonValue {
    pub value: Complex64,
    pub error: f64,
}

fn series_family<'a>(forms: &'a [&'a QExpansion]) -> Result<(Family<'a>, Vec<f64>), FormsError> {
    let k = forms[0].weight;
    for f in forms {
        if f.weight != k {
            return Err(FormsError::WeightMismatch(k, f.weight));
        }
        if !f.is_cusp_form() || f.valuation() > f.order() {
            return Err(FormsError::NotCuspForm);
        }
    }
    let raw = move |f: &QExpansion, z: &UhpPoint| -> Result<Complex64, FormsError> {
        let v = f.evaluate_with(z, SQRT3_2 - 1e-12, EVAL_TAIL_TOL)?.value;
        Ok(v * z.y().powf(0.5 * k as f64))
    };
    let mut ln_scales = Vec::new();
    let mut ln_bounds = Vec::new();
    let mut orders = Vec::new();
    let grid = scale_grid(k);
    for f in forms {
        let mut best = f64::NEG_INFINITY;
        for z in &grid {
            best = best.max(raw(f, z)?.norm().ln());
        }
        ln_scales.push(best);
        let c = f.valuation();
        let r = (-2.0 * PI).exp();
        let coeffs = f.coeffs_f64();
        let mut a = 0.0;
        for (n, v) in coeffs.iter().enumerate().skip(c) {
            a += v.abs() * r.powi((n - c) as i32);
        }
        a += series_tail(f.tail_bound_constant, k, f.order(), r) / r.powi(c as i32);
        ln_bounds.push(a.ln() - best);
        orders.push(c as u32);
    }
    let len = forms.len();
    let scales = ln_scales.clone();
    let eval = Box::new(move |z: &UhpPoint, out: &mut [Complex64]| {
        for (j, f) in forms.iter().enumerate() {
            out[j] = raw(f, z)? * (-scales[j]).exp();
        }
        Ok(())
    });
    Ok((Family { weight: k, len, eval, ln_bounds, cusp_orders: orders }, ln_scales))
}

/// ⟨f, g⟩ = ∫_F y^k f ḡ dμ.
pub fn petersson_inner(f: &QExpansion, g: &QExpansion, opts: &GramOptions) -> Result<PeterssonValue, FormsError> {
    if f.weight != g.weight {
        return Err(FormsError::WeightMismatch(f.weight, g.weight));
    }
    let forms = [f, g];
    let (fam, ln_scales) = series_family(&forms)?;
    let gram = hermitian_gram(&fam, opts)?;
    let s = (ln_scales[0] + ln_scales[1]).exp();
    Ok(PeterssonValue {
        value: gram.matrix[0][1] * s,
        error: gram.error * s,
    })
}

/// Orthonormal basis of S_k built from the monomials by Cholesky.
#[derive(Debug, Clone)]
pub struct OrthonormalBasis {
    pub weight: u32,
    pub monomials: Vec<Monomial>,
    /// ln s_j: monomial j enters as y^{k/2} m_j / √s_j.
    pub ln_scales: Vec<f64>,
    /// Gram matrix of the scaled monomials.
    pub gram: DMatrix<f64>,
    /// Lower Cholesky factor of `gram`.
    pub cholesky: DMatrix<f64>,
    /// Row i holds the coefficients of f_i on the scaled monomials.
    pub combination: DMatrix<f64>,
    pub quadrature_error: f64,
    pub y_max: f64,
    generators: Generators,
}

fn scaled_monomials(
    k: u32,
    monos: &[Monomial],
    ln_scales: &[f64],
    g: &GeneratorLogs,
    out: &mut [Complex64],
) {
    for (j, mo) in monos.iter().enumerate() {
        let (lm, arg) = monomial_log(k, mo, g);
        out[j] = from_log(lm - 0.5 * ln_scales[j], arg);
    }
}

impl OrthonormalBasis {
    pub fn new(k: u32, opts: &GramOptions) -> Result<Self, FormsError> {
        Self::with_monomials(k, monomials(k), opts)
    }

    /// Builds the basis from a given ordering of the monomials.
    pub fn with_monomials(k: u32, monos: Vec<Monomial>, opts: &GramOptions) -> Result<Self, FormsError> {
        if k % 2 == 1 {
            return Err(FormsError::UnsupportedWeight(k));
        }
        let generators = Generators::new(GENERATOR_ORDER);
        let n = monos.len();
        let mut ln_scales = vec![f64::NEG_INFINITY; n];
        for z in scale_grid(k) {
            let g = generators.logs(&z)?;
            for (j, mo) in monos.iter().enumerate() {
                ln_scales[j] = ln_scales[j].max(2.0 * monomial_log(k, mo, &g).0);
            }
        }
        let above = generators.bounds_above_one();
        let ln_bounds: Vec<f64> = monos
            .iter()
            .zip(&ln_scales)
            .map(|(mo, s)| {
                mo.a as f64 * above[0].ln() + mo.b as f64 * above[1].ln() + mo.c as f64 * above[2].ln()
                    - 0.5 * s
            })
            .collect();
        let gens = &generators;
        let monos_ref = &monos;
        let scales_ref = &ln_scales;
        let fam = Family {
            weight: k,
            len: n,
            eval: Box::new(move |z: &UhpPoint, out: &mut [Complex64]| {
                let g = gens.logs(z)?;
                scaled_monomials(k, monos_ref, scales_ref, &g, out);
                Ok(())
            }),
            ln_bounds,
            cusp_orders: monos.iter().map(|m| m.c).collect(),
        };
        let res = hermitian_gram(&fam, opts)?;
        drop(fam);
        let gram = DMatrix::from_fn(n, n, |i, j| 0.5 * (res.matrix[i][j].re + res.matrix[j][i].re));
        let chol = gram.clone().cholesky().ok_or(FormsError::NotPositiveDefinite)?;
        let l = chol.l();
        let combination = l
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .ok_or(FormsError::NotPositiveDefinite)?;
        Ok(Self {
            weight: k,
            monomials: monos,
            ln_scales,
            gram,
            cholesky: l,
            combination,
            quadrature_error: res.error,
            y_max: res.y_max,
            generators,
        })
    }

    pub fn dim(&self) -> usize {
        self.monomials.len()
    }

    /// y^{k/2} f_i(z) for every basis form; z must satisfy y ≥ √3/2.
    pub fn petersson_values(&self, z: &UhpPoint) -> Result<Vec<Complex64>, FormsError> {
        let n = self.dim();
        let g = self.generators.logs(z)?;
        let mut u = vec![Complex64::zero(); n];
        scaled_monomials(self.weight, &self.monomials, &self.ln_scales, &g, &mut u);
        let re = &self.combination * DVector::from_iterator(n, u.iter().map(|c| c.re));
        let im = &self.combination * DVector::from_iterator(n, u.iter().map(|c| c.im));
        Ok((0..n).map(|i| Complex64::new(re[i], im[i])).collect())
    }

    /// B_k(z) = Σ yᵏ |f_i(z)|², evaluated after reducing z to the standard
    /// fundamental domain.
    pub fn bergman(&self, z: &UhpPoint) -> Result<f64, FormsError> {
        if self.dim() == 0 {
            return Ok(0.0);
        }
        let (w, _) = reduce_psl2z(z)?;
        Ok(self.petersson_values(&w)?.iter().map(|v| v.norm_sqr()).sum())
    }

    /// Coefficient of monomial j in f_i, in the unscaled monomial basis.
    pub fn coefficient(&self, i: usize, j: usize) -> f64 {
        self.combination[(i, j)] * (-0.5 * self.ln_scales[j]).exp()
    }

    /// q-expansions of the orthonormal forms to order `m`, with exact
    /// rational coefficients (the dyadic values of the float combination).
    pub fn forms(&self, m: usize) -> Vec<QExpansion> {
        let basis = monomial_basis_for(&self.monomials, m);
        (0..self.dim())
            .map(|i| {
                let mut coeffs = vec![BigRational::zero(); m + 1];
                for (j, f) in basis.iter().enumerate() {
                    let c = BigRational::from_float(self.coefficient(i, j)).unwrap_or_else(BigRational::zero);
                    for (n, a) in f.coeffs.iter().enumerate() {
                        coeffs[n] += &c * a;
                    }
                }
                QExpansion::new(self.weight, coeffs)
            })
            .collect()
    }

    /// max |L⁻¹ G L⁻ᵀ − I| for a Gram matrix of the same scaled monomials.
    pub fn residual_against(&self, gram: &DMatrix<f64>) -> f64 {
        let n = self.dim();
        let p = &self.combination * gram * self.combination.transpose();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((p[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// JSON export of the basis: weight, truncation and exact coefficients.
    pub fn export(&self, m: usize) -> BasisExport {
        BasisExport {
            weight: self.weight,
            truncation: m,
            monomials: self.monomials.clone(),
            forms: self
                .forms(m)
                .iter()
                .map(|f| f.coeffs.iter().map(|c| c.to_string()).collect())
                .collect(),
        }
    }
}

fn monomial_basis_for(monos: &[Monomial], m: usize) -> Vec<QExpansion> {
    let e4 = eisenstein(4, m).expect("weight 4");
    let e6 = eisenstein(6, m).expect("weight 6");
    let d = delta(m);
    monos
        .iter()
        .map(|mo| e4.pow(mo.a).mul(&e6.pow(mo.b)).mul(&d.pow(mo.c)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisExport {
    pub weight: u32,
    pub truncation: usize,
    pub monomials: Vec<Monomial>,
    /// Per form, the coefficients a_0 … a_M as exact rationals.
    pub forms: Vec<Vec<String>>,
}

/// B_k(z); builds the orthonormal basis on every call.
pub fn bergman_kernel(k: u32, z: &UhpPoint) -> Result<f64, FormsError> {
    OrthonormalBasis::new(k, &GramOptions::default())?.bergman(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ints(f: &QExpansion, n: usize) -> Vec<i64> {
        f.coeffs.iter().take(n).map(|c| c.to_integer().to_i64().unwrap()).collect()
    }

    #[test]
    fn bernoulli_values() {
        let b = bernoulli_numbers(6);
        assert_eq!(b[1], BigRational::new((-1).into(), 2.into()));
        assert_eq!(b[2], BigRational::new(1.into(), 6.into()));
        assert_eq!(b[4], BigRational::new((-1).into(), 30.into()));
        assert_eq!(b[6], BigRational::new(1.into(), 42.into()));
        assert!(b[3].is_zero() && b[5].is_zero());
    }

    #[test]
    fn eisenstein_coefficients() {
        assert_eq!(ints(&eisenstein(4, 5).unwrap(), 4), vec![1, 240, 2160, 6720]);
        assert_eq!(ints(&eisenstein(6, 5).unwrap(), 3), vec![1, -504, -16632]);
        assert!(eisenstein(8, 5).is_err());
    }

    #[test]
    fn delta_coefficients_two_ways() {
        let d = delta(30);
        assert_eq!(ints(&d, 5), vec![0, 1, -24, 252, -1472]);
        assert_eq!(d.coeffs, delta_from_eisenstein(30).coeffs);
        // τ(n) multiplicativity spot checks
        let t = ints(&d, 31);
        assert_eq!(t[6], t[2] * t[3]);
        assert_eq!(t[10], t[2] * t[5]);
        assert_eq!(t[4], t[2] * t[2] - 2048);
    }

    #[test]
    fn dimensions_match_monomial_counts() {
        assert_eq!(dim_cusp_forms(12), 1);
        assert_eq!(dim_cusp_forms(24), 2);
        assert_eq!(dim_cusp_forms(100), 8);
        for k in (0..=200).step_by(2) {
            assert_eq!(monomials(k).len(), dim_cusp_forms(k), "k={k}");
        }
        for k in [4, 6, 8, 10, 14, 13] {
            assert_eq!(dim_cusp_forms(k), 0);
        }
    }

    #[test]
    fn monomial_examples() {
        assert_eq!(monomials(12), vec![Monomial { a: 0, b: 0, c: 1 }]);
        assert_eq!(monomials(24).len(), 2);
        assert_eq!(monomials(26), vec![Monomial { a: 2, b: 1, c: 1 }]);
        for (mo, f) in monomial_basis(36, 20) {
            assert_eq!(mo.weight(), 36);
            assert_eq!(f.valuation(), mo.c as usize);
        }
    }

    fn eta_i() -> f64 {
        3.625_609_908_221_908_3 / (2.0 * PI.powf(0.75))
    }

    #[test]
    fn delta_at_i_matches_eta() {
        let d = delta(40);
        let v = d.evaluate(&UhpPoint::i()).unwrap();
        assert_relative_eq!(v.value.re, eta_i().powi(24), max_relative = 1e-13);
        assert!(v.value.im.abs() < 1e-18);
        let shifted = d.evaluate(&UhpPoint::new(1.0, 1.0).unwrap()).unwrap();
        assert!((shifted.value - v.value).norm() < 1e-16);
        // Δ(2i) = η(2i)²⁴ with η(2i) = Γ(1/4) / (2^{11/8} π^{3/4})
        let eta2 = 3.625_609_908_221_908_3 / (2f64.powf(11.0 / 8.0) * PI.powf(0.75));
        let v2 = d.evaluate(&UhpPoint::new(0.0, 2.0).unwrap()).unwrap();
        assert_relative_eq!(v2.value.re, eta2.powi(24), max_relative = 1e-12);
    }

    #[test]
    fn evaluation_guards() {
        let d = delta(10);
        assert!(matches!(
            d.evaluate(&UhpPoint::new(0.0, 0.3).unwrap()),
            Err(FormsError::BelowMinHeight { .. })
        ));
        assert!(matches!(
            d.evaluate(&UhpPoint::new(0.0, 0.5).unwrap()),
            Err(FormsError::TailTooLarge { .. })
        ));
    }

    #[test]
    fn generator_values_agree_with_series() {
        let g = Generators::new(GENERATOR_ORDER);
        let z = UhpPoint::new(0.3, 1.1).unwrap();
        let v = g.values(&z).unwrap();
        assert!((v[2] - delta(40).evaluate(&z).unwrap().value).norm() < 1e-17);
        // E₆(i) = 0 and E₄(ρ) = 0
        assert!(g.values(&UhpPoint::i()).unwrap()[1].norm() < 1e-13);
        let rho = UhpPoint::new(-0.5, SQRT3_2).unwrap();
        assert!(g.values(&rho).unwrap()[0].norm() < 1e-13);
    }

    #[test]
    fn petersson_norm_of_delta() {
        let d = delta(40);
        let p = petersson_inner(&d, &d, &GramOptions::default()).unwrap();
        assert_relative_eq!(p.value.re, 1.035_362e-6, max_relative = 1e-6);
        assert!(p.value.im.abs() < 1e-15);
        assert!(p.error <= 1e-9 * p.value.re);
    }

    #[test]
    fn petersson_is_hermitian_and_positive() {
        let basis = monomial_basis(24, 40);
        let (f, g) = (&basis[0].1, &basis[1].1);
        let opts = GramOptions::default();
        let fg = petersson_inner(f, g, &opts).unwrap().value;
        let gf = petersson_inner(g, f, &opts).unwrap().value;
        assert!((fg - gf.conj()).norm() <= 1e-10 * fg.norm());
        for (_, h) in &basis {
            assert!(petersson_inner(h, h, &opts).unwrap().value.re > 0.0);
        }
        let e4 = eisenstein(4, 10).unwrap();
        assert!(matches!(petersson_inner(&e4, &e4, &opts), Err(FormsError::NotCuspForm)));
    }

    #[test]
    fn weight_twelve_kernel_at_i() {
        let basis = OrthonormalBasis::new(12, &GramOptions::default()).unwrap();
        let b = basis.bergman(&UhpPoint::i()).unwrap();
        let expected = eta_i().powi(48) / 1.035_362e-6;
        assert_relative_eq!(b, expected, max_relative = 1e-5);
        assert_relative_eq!(b, 3.0787, max_relative = 1e-4);
    }

    #[test]
    fn kernel_is_invariant_and_basis_independent() {
        let opts = GramOptions::default();
        let basis = OrthonormalBasis::new(24, &opts).unwrap();
        assert_eq!(basis.dim(), 2);
        let mut rev = monomials(24);
        rev.reverse();
        let other = OrthonormalBasis::with_monomials(24, rev, &opts).unwrap();
        for (x, y) in [(0.1, 0.9), (0.3, 1.4), (-0.45, 2.5), (0.0, 1.0)] {
            let z = UhpPoint::new(x, y).unwrap();
            let b = basis.bergman(&z).unwrap();
            assert!(b >= 0.0);
            assert!((b - other.bergman(&z).unwrap()).abs() <= 1e-8 * b.max(1.0));
            let t = UhpPoint::new(x + 1.0, y).unwrap();
            let s = UhpPoint::from_complex(-1.0 / z.to_complex()).unwrap();
            assert!((basis.bergman(&t).unwrap() - b).abs() <= 1e-8 * b.max(1.0));
            assert!((basis.bergman(&s).unwrap() - b).abs() <= 1e-8 * b.max(1.0));
        }
    }

    #[test]
    fn empty_spaces_give_zero() {
        for k in [4, 6, 8, 10, 14] {
            let basis = OrthonormalBasis::new(k, &GramOptions::default()).unwrap();
            assert_eq!(basis.dim(), 0);
            assert_eq!(basis.bergman(&UhpPoint::i()).unwrap(), 0.0);
        }
    }

    #[test]
    fn export_round_trips() {
        let basis = OrthonormalBasis::new(12, &GramOptions::default()).unwrap();
        let ex = basis.export(5);
        let json = serde_json::to_string(&ex).unwrap();
        let back: BasisExport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ex);
        assert_eq!(ex.forms.len(), 1);
        assert_eq!(ex.forms[0].len(), 6);
        assert_eq!(ex.forms[0][0], "0");
    }
}
