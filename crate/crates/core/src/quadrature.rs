//! Brute-force tensor Gauss-Legendre quadrature over Q = (0,1) x (0, inf).
//!
//! Fields are sampled pointwise from their trigonometric sums and
//! exponentials, so nothing here shares code with the closed-form Gram
//! integrals it is meant to check. The t-axis is cut at T and split into
//! doubling levels [T 2^{-l-1}, T 2^{-l}], each divided into equal
//! subpanels; the grading absorbs the t^a weight near t = 0.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::constants::FractionalOrder;
use crate::error::{Error, Result};
use crate::experiments::{random_field, trial_rng};
use crate::fields::{Expansion, SeparableField, SeparableFlux};
use crate::series::XSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureSpec {
    /// Truncation point of the t-axis; `None` picks it from the decay rates.
    pub t_max: Option<f64>,
    pub x_panels: usize,
    /// Number of doubling levels between 0 and T.
    pub t_levels: usize,
    pub t_subpanels: usize,
    /// Gauss nodes per panel; the error estimate compares against
    /// `nodes - 4`.
    pub nodes: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            t_max: None,
            x_panels: 16,
            t_levels: 100,
            t_subpanels: 8,
            nodes: 16,
        }
    }
}

impl QuadratureSpec {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(format!("quadrature: {m}")));
        if let Some(t) = self.t_max {
            if !(t > 0.0 && t.is_finite()) {
                return bad("T must be positive");
            }
        }
        if self.x_panels == 0 || self.t_levels == 0 || self.t_subpanels == 0 {
            return bad("panel counts must be positive");
        }
        if self.nodes < 6 {
            return bad("at least 6 nodes per panel are required");
        }
        Ok(())
    }
}

/// A quadrature value with its estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadEstimate {
    pub value: f64,
    pub error: f64,
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite rule with `nodes` points on each of the given panels.
fn composite(edges: &[f64], nodes: usize) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(nodes);
    let mut xs = Vec::with_capacity(nodes * edges.len());
    let mut ws = Vec::with_capacity(nodes * edges.len());
    for e in edges.windows(2) {
        let (mid, half) = (0.5 * (e[0] + e[1]), 0.5 * (e[1] - e[0]));
        for (x, w) in gx.iter().zip(&gw) {
            xs.push(mid + half * x);
            ws.push(half * w);
        }
    }
    (xs, ws)
}

/// Panel edges of the graded t-mesh on [lo, hi] with `levels` doubling
/// levels below hi (lo = 0) or a uniform split (lo > 0).
fn t_edges(lo: f64, hi: f64, levels: usize, sub: usize) -> Vec<f64> {
    let mut edges = vec![lo];
    if lo == 0.0 {
        let mut a = hi * 0.5f64.powi(levels as i32);
        edges.push(a);
        while a < hi {
            let b = (2.0 * a).min(hi);
            for j in 1..=sub {
                edges.push(a + (b - a) * j as f64 / sub as f64);
            }
            a = b;
        }
    } else {
        let n = 8 * sub;
        for j in 1..=n {
            edges.push(lo + (hi - lo) * j as f64 / n as f64);
        }
    }
    edges
}

/// One scalar component sampled at the x-nodes: per term the x-values, the
/// power and the rate.
struct Sampled {
    terms: Vec<(Vec<f64>, u32, f64)>,
}

type Component<'a> = dyn Fn(&[f64]) -> Sampled + 'a;

fn sample<X: XSeries>(e: &Expansion<X>, xs: &[f64]) -> Sampled {
    Sampled {
        terms: e
            .terms()
            .iter()
            .map(|t| (xs.iter().map(|&x| t.x.eval(x)).collect(), t.k, t.rate))
            .collect(),
    }
}

struct Shape {
    min_rate: Option<f64>,
    max_power: u32,
}

fn auto_t_max(shape: &Shape, exponent: f64) -> f64 {
    let Some(mu) = shape.min_rate else {
        return 1.0;
    };
    // e^{-2 mu T} T^{2k + a} below 1e-17 of the unit scale
    let p = 2.0 * shape.max_power as f64 + exponent.max(0.0);
    let mut t = 20.0 / mu;
    for _ in 0..50 {
        t = (39.0 + p * (1.0 + t).ln()) / (2.0 * mu);
    }
    t
}

/// sum over components of int t^a |F|^2 on (0,1) x [lo, hi] with `nodes`
/// points per panel in both directions.
fn integrate(
    comps: &[&Component],
    exponent: f64,
    spec: &QuadratureSpec,
    lo: f64,
    hi: f64,
    nodes: usize,
) -> f64 {
    let x_edges: Vec<f64> = (0..=spec.x_panels)
        .map(|i| i as f64 / spec.x_panels as f64)
        .collect();
    let (xs, wx) = composite(&x_edges, nodes);
    let (ts, wt) = composite(&t_edges(lo, hi, spec.t_levels, spec.t_subpanels), nodes);
    let sampled: Vec<Sampled> = comps.iter().map(|c| c(&xs)).collect();
    let mut total = 0.0;
    let mut column = vec![0.0; xs.len()];
    for (&t, &w) in ts.iter().zip(&wt) {
        let weight = w * t.powf(exponent);
        let mut slice = 0.0;
        for s in &sampled {
            column.iter_mut().for_each(|c| *c = 0.0);
            for (xv, k, rate) in &s.terms {
                let tv = t.powi(*k as i32) * (-rate * t).exp();
                if tv == 0.0 {
                    continue;
                }
                for (c, x) in column.iter_mut().zip(xv) {
                    *c += x * tv;
                }
            }
            slice += column.iter().zip(&wx).map(|(c, w)| w * c * c).sum::<f64>();
        }
        total += weight * slice;
    }
    total
}

fn weighted_sq(
    comps: &[&Component],
    shape: Shape,
    exponent: f64,
    spec: &QuadratureSpec,
) -> Result<QuadEstimate> {
    spec.validate()?;
    if !(exponent > -1.0) {
        return Err(Error::Domain(format!(
            "weight t^{exponent} is not integrable at t = 0"
        )));
    }
    if shape.min_rate.is_none() {
        return Ok(QuadEstimate {
            value: 0.0,
            error: 0.0,
        });
    }
    let t_max = spec.t_max.unwrap_or_else(|| auto_t_max(&shape, exponent));
    let fine = integrate(comps, exponent, spec, 0.0, t_max, spec.nodes);
    let coarse = integrate(comps, exponent, spec, 0.0, t_max, spec.nodes - 4);
    // [T, 2T] dominates the geometric tail; doubling it bounds the rest
    let tail = 2.0 * integrate(comps, exponent, spec, t_max, 2.0 * t_max, spec.nodes);
    Ok(QuadEstimate {
        value: fine,
        error: (fine - coarse).abs() + tail + 4.0 * f64::EPSILON * fine.abs(),
    })
}

fn sq_to_norm(q: QuadEstimate) -> QuadEstimate {
    let value = q.value.max(0.0).sqrt();
    let error = if value > 0.0 {
        q.error / (2.0 * value)
    } else {
        q.error.sqrt()
    };
    QuadEstimate { value, error }
}

/// (int_Q t^a |v|^2)^{1/2} by quadrature.
pub fn quad_weighted_norm(
    field: &SeparableField,
    exponent: f64,
    spec: &QuadratureSpec,
) -> Result<QuadEstimate> {
    let c = |xs: &[f64]| sample(field, xs);
    let shape = Shape {
        min_rate: field.min_rate(),
        max_power: field.max_power(),
    };
    weighted_sq(&[&c], shape, exponent, spec).map(sq_to_norm)
}

/// (int_Q t^a |y|^2)^{1/2} by quadrature.
pub fn quad_flux_norm(
    flux: &SeparableFlux,
    exponent: f64,
    spec: &QuadratureSpec,
) -> Result<QuadEstimate> {
    let cx = |xs: &[f64]| sample(&flux.x, xs);
    let ct = |xs: &[f64]| sample(&flux.t, xs);
    let shape = Shape {
        min_rate: flux.min_rate(),
        max_power: flux.max_power(),
    };
    weighted_sq(&[&cx, &ct], shape, exponent, spec).map(sq_to_norm)
}

/// One analytic-versus-quadrature comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleComparison {
    pub s: f64,
    pub quantity: &'static str,
    pub analytic: f64,
    pub quadrature: f64,
    pub rel_diff: f64,
    pub error_estimate: f64,
}

fn compare(s: f64, quantity: &'static str, analytic: f64, q: QuadEstimate) -> OracleComparison {
    let scale = analytic.abs().max(f64::MIN_POSITIVE);
    OracleComparison {
        s,
        quantity,
        analytic,
        quadrature: q.value,
        rel_diff: (q.value - analytic).abs() / scale,
        error_estimate: q.error / scale,
    }
}

/// Compares |||v|||, |||grad v||| and |||t^{2s-1} grad v||| between the
/// closed forms and quadrature on `count` random fields.
pub fn compare_random_fields(
    s: FractionalOrder,
    count: usize,
    seed: u64,
    spec: &QuadratureSpec,
) -> Result<Vec<OracleComparison>> {
    let (a, b) = (s.energy_weight(), s.dual_weight());
    let sv = s.value();
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let n_terms = rng.gen_range(1..=3);
            let n_modes = rng.gen_range(1..=6);
            let v = random_field(n_terms, n_modes, &mut rng);
            let g = v.gradient();
            Ok([
                compare(
                    sv,
                    "field",
                    v.weighted_norm(a)?,
                    quad_weighted_norm(&v, a, spec)?,
                ),
                compare(
                    sv,
                    "gradient",
                    g.weighted_norm(a)?,
                    quad_flux_norm(&g, a, spec)?,
                ),
                compare(
                    sv,
                    "dual",
                    g.weighted_norm(b)?,
                    quad_flux_norm(&g, b, spec)?,
                ),
            ])
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().flatten().collect())
}
