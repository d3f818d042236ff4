//! Globally adaptive Gauss–Legendre quadrature.
//!
//! Each panel is integrated with a 15-point Gauss–Legendre rule and with the
//! same rule on its two halves; the difference is the panel error estimate.
//! The panel with the largest estimate is bisected until the summed estimate
//! meets the tolerance. Panel sums are reduced in left-to-right order so the
//! result does not depend on the order in which panels were refined.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use rayon::prelude::*;
use thiserror::Error;

const RULE_POINTS: usize = 15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature did not converge: error estimate {error:e} above tolerance {tolerance:e} after {panels} panels")]
    NotConverged {
        value: f64,
        error: f64,
        tolerance: f64,
        panels: usize,
    },
    #[error("integrand returned a non-finite value at x = {0}")]
    NonFinite(f64),
    #[error("invalid interval [{0}, {1}]")]
    InvalidInterval(f64, f64),
}

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes the `n`-point rule by Newton iteration on P_n.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = (n + 1) / 2;
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// The shared 15-point rule used by the adaptive drivers.
    pub fn standard() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(RULE_POINTS))
    }

    /// Maps the rule onto [a, b], returning (x, w) pairs.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&t, &w)| (mid + half * t, half * w))
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Tolerances and limits for the adaptive drivers.
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
    /// Evaluate the nodes of a refinement step on the rayon pool.
    pub parallel: bool,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_panels: 4000,
            parallel: false,
        }
    }
}

impl AdaptiveOptions {
    pub fn with_tolerances(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VecEstimate {
    pub values: Vec<f64>,
    /// Largest componentwise error estimate.
    pub error: f64,
    pub panels: usize,
}

struct Panel {
    a: f64,
    b: f64,
    values: Vec<f64>,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Integrates a vector-valued function of one variable over [a, b].
///
/// `f(x, out)` writes `dim` components into `out`. Convergence is declared
/// when, for every component, the summed panel error is at most
/// `max(abs_tol, rel_tol * |value|)`.
pub fn integrate_vec<F>(
    f: F,
    dim: usize,
    a: f64,
    b: f64,
    opts: &AdaptiveOptions,
) -> Result<VecEstimate, QuadratureError>
where
    F: Fn(f64, &mut [f64]) + Sync,
{
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(QuadratureError::InvalidInterval(a, b));
    }
    if a == b {
        return Ok(VecEstimate {
            values: vec![0.0; dim],
            error: 0.0,
            panels: 0,
        });
    }
    let rule = GaussLegendre::standard();

    let eval_rule = |lo: f64, hi: f64| -> Result<Vec<f64>, QuadratureError> {
        let pts: Vec<(f64, f64)> = rule.mapped(lo, hi).collect();
        let samples: Vec<Vec<f64>> = if opts.parallel {
            pts.par_iter()
                .map(|&(x, _)| {
                    let mut out = vec![0.0; dim];
                    f(x, &mut out);
                    out
                })
                .collect()
        } else {
            pts.iter()
                .map(|&(x, _)| {
                    let mut out = vec![0.0; dim];
                    f(x, &mut out);
                    out
                })
                .collect()
        };
        let mut acc = vec![0.0; dim];
        for ((x, w), s) in pts.iter().zip(&samples) {
            for (acc_i, s_i) in acc.iter_mut().zip(s) {
                if !s_i.is_finite() {
                    return Err(QuadratureError::NonFinite(*x));
                }
                *acc_i += w * s_i;
            }
        }
        Ok(acc)
    };

    // Returns the refined (half-sum) values of [lo, hi] and the difference
    // against the coarse value.
    let refine = |lo: f64, hi: f64, coarse: &[f64]| -> Result<(Panel, Panel, f64), QuadratureError> {
        let mid = 0.5 * (lo + hi);
        let left = eval_rule(lo, mid)?;
        let right = eval_rule(mid, hi)?;
        let mut diff = 0.0f64;
        for i in 0..dim {
            diff = diff.max((left[i] + right[i] - coarse[i]).abs());
        }
        // Each half inherits half of the parent's discrepancy as its error.
        let half = 0.5 * diff;
        Ok((
            Panel { a: lo, b: mid, values: left, error: half },
            Panel { a: mid, b: hi, values: right, error: half },
            diff,
        ))
    };

    let whole = eval_rule(a, b)?;
    let (l, r, _) = refine(a, b, &whole)?;
    let mut heap = BinaryHeap::new();
    heap.push(l);
    heap.push(r);

    loop {
        let mut totals = vec![0.0; dim];
        let mut err_total = 0.0;
        for p in heap.iter() {
            err_total += p.error;
            for (t, v) in totals.iter_mut().zip(&p.values) {
                *t += v;
            }
        }
        let scale = totals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = opts.abs_tol.max(opts.rel_tol * scale);
        if err_total <= tol || heap.len() >= opts.max_panels {
            let mut panels: Vec<Panel> = heap.into_vec();
            panels.sort_by(|p, q| p.a.total_cmp(&q.a));
            let mut values = vec![0.0; dim];
            for p in &panels {
                for (t, v) in values.iter_mut().zip(&p.values) {
                    *t += v;
                }
            }
            if err_total > tol {
                return Err(QuadratureError::NotConverged {
                    value: values.first().copied().unwrap_or(0.0),
                    error: err_total,
                    tolerance: tol,
                    panels: panels.len(),
                });
            }
            return Ok(VecEstimate {
                values,
                error: err_total,
                panels: panels.len(),
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let (l, r, _) = refine(worst.a, worst.b, &worst.values)?;
        heap.push(l);
        heap.push(r);
    }
}

/// Scalar version of [`integrate_vec`].
pub fn integrate<F>(f: F, a: f64, b: f64, opts: &AdaptiveOptions) -> Result<Estimate, QuadratureError>
where
    F: Fn(f64) -> f64 + Sync,
{
    let est = integrate_vec(|x, out| out[0] = f(x), 1, a, b, opts)?;
    Ok(Estimate {
        value: est.values[0],
        error: est.error,
        panels: est.panels,
    })
}

/// Integrates over [a, ∞) through the map x = a + t / (1 - t), t ∈ [0, 1).
///
/// The integrand must decay fast enough for the mapped integrand to vanish
/// at t = 1.
pub fn integrate_to_infinity<F>(f: F, a: f64, opts: &AdaptiveOptions) -> Result<Estimate, QuadratureError>
where
    F: Fn(f64) -> f64 + Sync,
{
    integrate(
        |t| {
            if t >= 1.0 {
                return 0.0;
            }
            let s = 1.0 - t;
            let x = a + t / s;
            let v = f(x) / (s * s);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_are_symmetric_and_weights_sum_to_two() {
        let r = GaussLegendre::new(15);
        let s: f64 = r.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        for i in 0..15 {
            assert!((r.nodes[i] + r.nodes[14 - i]).abs() < 1e-15);
        }
    }

    #[test]
    fn gauss_rule_is_exact_for_degree_29() {
        let r = GaussLegendre::new(15);
        let v = r.integrate(|x| x.powi(28), -1.0, 1.0);
        assert!((v - 2.0 / 29.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let v = integrate(
            |x| 1.0 / (1e-4 + (x - 0.3).powi(2)),
            0.0,
            1.0,
            &AdaptiveOptions::default(),
        )
        .unwrap();
        let exact = ((0.7f64 / 1e-2).atan() + (0.3f64 / 1e-2).atan()) / 1e-2;
        assert!((v.value - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn semi_infinite_exponential() {
        let v = integrate_to_infinity(|x| (-x).exp(), 2.0, &AdaptiveOptions::default()).unwrap();
        assert!((v.value - (-2.0f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn parallel_and_serial_agree_bitwise() {
        let f = |x: f64, out: &mut [f64]| {
            out[0] = (x * 7.0).sin();
            out[1] = x.exp();
        };
        let serial = integrate_vec(f, 2, 0.0, 3.0, &AdaptiveOptions::default()).unwrap();
        let par = integrate_vec(
            f,
            2,
            0.0,
            3.0,
            &AdaptiveOptions {
                parallel: true,
                ..AdaptiveOptions::default()
            },
        )
        .unwrap();
        assert_eq!(serial.values, par.values);
    }

    #[test]
    fn panel_budget_exhaustion_is_reported() {
        let err = integrate(
            |x| x.sin() / x.max(1e-300).powf(0.999),
            0.0,
            1.0,
            &AdaptiveOptions {
                max_panels: 8,
                ..AdaptiveOptions::default()
            },
        );
        assert!(matches!(err, Err(QuadratureError::NotConverged { .. })));
    }
}
