//! Error measures and guaranteed bounds for approximations of the extended
//! problem: the primal-dual error identity, the hypercircle estimate, the
//! majorant M+ and minorant M-, combined two-sided estimates, the closed
//! spectral forms of the majorant, and bounds on the trace error.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::constants::{
    extension_constant, friedrichs_constant, kappa, DomainSpec, FractionalOrder, GramIntegrator,
};
use crate::error::{Error, Result};
use crate::fields::{
    approx_extension, candidate_flux, exact_extension, exact_flux, EquilibratedFlux,
    SeparableField, SeparableFlux, SpectralApprox, CANCELLATION_TOL, MAX_T_POWER,
};
use crate::series::{SinSeries, XSeries};

/// Floor of the denominator in the relative identity residual.
pub const IDENTITY_FLOOR: f64 = 1e-30;

/// Condition estimate above which a minorant basis is rejected.
pub const MAX_BASIS_CONDITION: f64 = 1e12;

/// Relative tolerance on rate^2 = (m pi)^2 when deciding whether a field
/// solves the extension equation modewise.
pub const EQUATION_TOL: f64 = 1e-12;

/// Data of one extended problem: the order s, the domain, the fractional
/// right-hand side f and the Neumann datum g = C_s f.
#[derive(Debug, Clone)]
pub struct Problem {
    order: FractionalOrder,
    domain: DomainSpec,
    f: SinSeries,
    g: SinSeries,
    energy_gram: GramIntegrator,
    dual_gram: GramIntegrator,
    plain_gram: GramIntegrator,
}

impl Problem {
    pub fn new(order: FractionalOrder, domain: DomainSpec, f: SinSeries) -> Result<Self> {
        domain.check_modes(f.len())?;
        let g = f.scaled(extension_constant(order));
        let max_sum = 2 * MAX_T_POWER;
        Ok(Self {
            order,
            domain,
            f,
            g,
            energy_gram: GramIntegrator::new(order.energy_weight(), max_sum)?,
            dual_gram: GramIntegrator::new(order.dual_weight(), max_sum)?,
            plain_gram: GramIntegrator::new(0.0, max_sum)?,
        })
    }

    pub fn order(&self) -> FractionalOrder {
        self.order
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn f(&self) -> &SinSeries {
        &self.f
    }

    pub fn g(&self) -> &SinSeries {
        &self.g
    }

    /// C_F.
    pub fn friedrichs(&self) -> f64 {
        friedrichs_constant(&self.domain)
    }

    pub fn kappa(&self) -> f64 {
        kappa(self.order)
    }

    /// C_F^s kappa_s, the factor in front of the trace defect.
    pub fn trace_constant(&self) -> f64 {
        self.friedrichs().powf(self.order.value()) * self.kappa()
    }

    /// int_Q t^{1-2s} grad u . grad v.
    pub fn energy_inner(&self, u: &SeparableField, v: &SeparableField) -> Result<f64> {
        u.gradient()
            .weighted_inner(&v.gradient(), &self.energy_gram)
    }

    /// |||grad u|||.
    pub fn energy_norm(&self, u: &SeparableField) -> Result<f64> {
        Ok(self.energy_inner(u, u)?.max(0.0).sqrt())
    }

    /// |||u||| with weight t^{1-2s}.
    pub fn weighted_l2_norm(&self, u: &SeparableField) -> Result<f64> {
        Ok(u.weighted_inner(u, &self.energy_gram)?.max(0.0).sqrt())
    }

    /// |||t^{2s-1} y|||, i.e. (int_Q t^{2s-1} |y|^2)^{1/2}.
    pub fn dual_norm(&self, y: &SeparableFlux) -> Result<f64> {
        Ok(y.weighted_inner(y, &self.dual_gram)?.max(0.0).sqrt())
    }

    /// |||t^{2s-1} v||| for a scalar field v.
    pub fn dual_scalar_norm(&self, v: &SeparableField) -> Result<f64> {
        Ok(v.weighted_inner(v, &self.dual_gram)?.max(0.0).sqrt())
    }

    /// |||grad w~ - t^{2s-1} y|||^2.
    pub fn mixed_norm_sq(&self, w: &SeparableField, y: &SeparableFlux) -> Result<f64> {
        let grad = w.gradient();
        if self.order.is_half() {
            // unit weight: take the difference before integrating
            let d = grad.sub(y);
            return d.weighted_inner(&d, &self.plain_gram);
        }
        let a = grad.weighted_inner(&grad, &self.energy_gram)?;
        let b = grad.weighted_inner(y, &self.plain_gram)?;
        let c = y.weighted_inner(y, &self.dual_gram)?;
        Ok((a - 2.0 * b + c).max(0.0))
    }

    /// The exact extension and its flux (s = 1/2 only).
    pub fn exact_solution(&self) -> Result<ExactSolution> {
        let w = exact_extension(&self.f, self.order, &self.domain)?;
        let p = exact_flux(&w, self.order)?;
        Ok(ExactSolution { w, p })
    }
}

/// Exact solution w of the extended problem and its flux p.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution {
    pub w: SeparableField,
    pub p: SeparableFlux,
}

impl ExactSolution {
    /// u = w(., 0).
    pub fn trace(&self) -> SinSeries {
        self.w.trace()
    }
}

/// Exact error norms of a pair (w~, y).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactErrors {
    /// |||grad (w~ - w)|||
    pub energy: f64,
    /// |||t^{2s-1} (y - p)|||
    pub flux: f64,
}

pub fn exact_errors(
    problem: &Problem,
    w: &SeparableField,
    y: &SeparableFlux,
    exact: &ExactSolution,
) -> Result<ExactErrors> {
    let e = w.sub(&exact.w);
    Ok(ExactErrors {
        energy: problem.energy_norm(&e)?,
        flux: problem.dual_norm(&y.sub(&exact.p))?,
    })
}

/// J(w~) = 1/2 |||grad w~|||^2 - int g w~(x, 0) dx.
pub fn energy_functional(problem: &Problem, w: &SeparableField) -> Result<f64> {
    Ok(0.5 * problem.energy_inner(w, w)? - problem.g().inner(&w.trace()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Both sides of the primal-dual error identity
///
/// |||grad e_w|||^2 + |||t^{2s-1} e_p|||^2
///   = |||grad w~ - t^{2s-1} y|||^2 - 2 int_Q e_w div y - 2 int e_w(x,0) (g + y_t(x,0)) dx.
///
/// The sign of the volume term follows from integrating grad e_w . (y - p)
/// by parts with p divergence-free and p_t(., 0) = -g.
pub fn error_identity(
    problem: &Problem,
    w: &SeparableField,
    y: &SeparableFlux,
    exact: &ExactSolution,
) -> Result<IdentityCheck> {
    let errors = exact_errors(problem, w, y, exact)?;
    let lhs = errors.energy.powi(2) + errors.flux.powi(2);
    let e = w.sub(&exact.w);
    let volume = e.weighted_inner(&y.divergence(), &problem.plain_gram)?;
    let boundary = e.trace().inner(&y.normal_trace().add(problem.g()));
    let rhs = problem.mixed_norm_sq(w, y)? - 2.0 * volume - 2.0 * boundary;
    let residual = (lhs - rhs).abs() / lhs.max(IDENTITY_FLOOR);
    Ok(IdentityCheck { lhs, rhs, residual })
}

/// Hypercircle bound |||grad e_w|||^2 <= |||grad w~ - t^{2s-1} y|||^2 for
/// equilibrated y. Returns the right-hand side.
pub fn hypercircle_bound(
    problem: &Problem,
    w: &SeparableField,
    y: &EquilibratedFlux,
) -> Result<f64> {
    let defect = y.flux().normal_trace().add(problem.g()).norm();
    if defect > CANCELLATION_TOL * problem.g().norm().max(1.0) {
        return Err(Error::NotEquilibrated(defect));
    }
    problem.mixed_norm_sq(w, y.flux())
}

/// The three terms of M+(w~; y) and its value
/// T1 + C_F T2 + C_F^s kappa_s T3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MajorantTerms {
    /// |||grad w~ - t^{2s-1} y|||
    pub mixed: f64,
    /// |||t^{2s-1} div y|||
    pub divergence: f64,
    /// ||y_t(., 0) + g||
    pub trace_defect: f64,
    pub value: f64,
}

pub fn majorant(problem: &Problem, w: &SeparableField, y: &SeparableFlux) -> Result<MajorantTerms> {
    let mixed = problem.mixed_norm_sq(w, y)?.max(0.0).sqrt();
    let divergence = problem.dual_scalar_norm(&y.divergence())?;
    let trace_defect = y.normal_trace().add(problem.g()).norm();
    let value = mixed + problem.friedrichs() * divergence + problem.trace_constant() * trace_defect;
    Ok(MajorantTerms {
        mixed,
        divergence,
        trace_defect,
        value,
    })
}

/// M-(w~; eta). `squared` keeps the raw quadratic, which may be negative;
/// `value` is its clamped square root.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinorantValue {
    pub squared: f64,
    pub value: f64,
}

impl MinorantValue {
    fn from_squared(squared: f64) -> Self {
        Self {
            squared,
            value: squared.max(0.0).sqrt(),
        }
    }
}

/// M-^2 = 2 int t^{1-2s} grad w~ . grad eta - 2 int g eta(x,0) - |||grad eta|||^2.
pub fn minorant(
    problem: &Problem,
    w: &SeparableField,
    eta: &SeparableField,
) -> Result<MinorantValue> {
    let cross = problem.energy_inner(w, eta)?;
    let load = problem.g().inner(&eta.trace());
    let own = problem.energy_inner(eta, eta)?;
    Ok(MinorantValue::from_squared(2.0 * cross - 2.0 * load - own))
}

/// Maximizes M-^2 over span(basis). With K the energy Gram matrix and
/// b_i = a(w~, eta_i) - (g, eta_i(., 0)), the optimum solves K c = b and
/// attains M-^2 = b . c.
pub fn optimize_minorant(
    problem: &Problem,
    w: &SeparableField,
    basis: &[SeparableField],
) -> Result<(SeparableField, MinorantValue)> {
    let n = basis.len();
    if n == 0 {
        return Ok((SeparableField::zero(), MinorantValue::from_squared(0.0)));
    }
    let grads: Vec<SeparableFlux> = basis.iter().map(SeparableField::gradient).collect();
    let wgrad = w.gradient();
    let mut k = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for i in 0..n {
        for j in i..n {
            let v = grads[i].weighted_inner(&grads[j], &problem.energy_gram)?;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        b[i] = wgrad.weighted_inner(&grads[i], &problem.energy_gram)?
            - problem.g().inner(&basis[i].trace());
    }

    // Jacobi scaling so the condition estimate ignores basis normalization
    let mut scale = DVector::<f64>::zeros(n);
    for i in 0..n {
        if !(k[(i, i)] > 0.0) {
            return Err(Error::DegenerateBasis(f64::INFINITY));
        }
        scale[i] = k[(i, i)].sqrt().recip();
    }
    let scaled = DMatrix::from_fn(n, n, |i, j| scale[i] * k[(i, j)] * scale[j]);
    let eig = scaled.clone().symmetric_eigen().eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| {
        (lo.min(e), hi.max(e))
    });
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if condition > MAX_BASIS_CONDITION {
        return Err(Error::DegenerateBasis(condition));
    }
    let chol = scaled.cholesky().ok_or(Error::DegenerateBasis(condition))?;
    let rhs = b.component_mul(&scale);
    let coeffs = chol.solve(&rhs).component_mul(&scale);

    let mut eta = SeparableField::zero();
    for (c, field) in coeffs.iter().zip(basis) {
        eta.axpy(*c, field);
    }
    Ok((eta, MinorantValue::from_squared(b.dot(&coeffs))))
}

/// One side of a combined primal-dual estimate: `lhs` is available when
/// the exact solution is known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CombinedBound {
    pub lhs: Option<f64>,
    pub rhs: f64,
}

impl CombinedBound {
    /// Whether lhs <= rhs + slack (upper) holds; `None` without exact data.
    pub fn upper_holds(&self, slack: f64) -> Option<bool> {
        self.lhs.map(|l| l <= self.rhs + slack)
    }

    /// Whether lhs >= rhs - slack (lower) holds.
    pub fn lower_holds(&self, slack: f64) -> Option<bool> {
        self.lhs.map(|l| l >= self.rhs - slack)
    }
}

fn check_alphas(alpha1: f64, alpha2: f64) -> Result<()> {
    if !(alpha1 > 0.0 && alpha2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha1 = {alpha1} and alpha2 = {alpha2} must be positive"
        )));
    }
    Ok(())
}

fn combined_terms(
    problem: &Problem,
    w: &SeparableField,
    y: &SeparableFlux,
    alpha1: f64,
    alpha2: f64,
) -> Result<(f64, f64)> {
    let m = majorant(problem, w, y)?;
    let penalty = problem.friedrichs().powi(2) / alpha1 * m.divergence.powi(2)
        + problem.trace_constant().powi(2) / alpha2 * m.trace_defect.powi(2);
    Ok((m.mixed.powi(2), penalty))
}

/// (1 - a1 - a2) |||grad e_w|||^2 + |||t^{2s-1} e_p|||^2
///   <= T1^2 + C_F^2/a1 T2^2 + C_F^{2s} kappa_s^2 / a2 T3^2, for a1 + a2 < 1.
pub fn combined_upper(
    problem: &Problem,
    w: &SeparableField,
    y: &SeparableFlux,
    exact: Option<&ExactSolution>,
    alpha1: f64,
    alpha2: f64,
) -> Result<CombinedBound> {
    check_alphas(alpha1, alpha2)?;
    if alpha1 + alpha2 >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "upper estimate needs alpha1 + alpha2 < 1, got {}",
            alpha1 + alpha2
        )));
    }
    let (mixed_sq, penalty) = combined_terms(problem, w, y, alpha1, alpha2)?;
    let lhs = exact
        .map(|ex| exact_errors(problem, w, y, ex))
        .transpose()?
        .map(|e| (1.0 - alpha1 - alpha2) * e.energy.powi(2) + e.flux.powi(2));
    Ok(CombinedBound {
        lhs,
        rhs: mixed_sq + penalty,
    })
}

/// (1 + a1 + a2) |||grad e_w|||^2 + |||t^{2s-1} e_p|||^2
///   >= T1^2 - C_F^2/a1 T2^2 - C_F^{2s} kappa_s^2 / a2 T3^2.
pub fn combined_lower(
    problem: &Problem,
    w: &SeparableField,
    y: &SeparableFlux,
    exact: Option<&ExactSolution>,
    alpha1: f64,
    alpha2: f64,
) -> Result<CombinedBound> {
    check_alphas(alpha1, alpha2)?;
    let (mixed_sq, penalty) = combined_terms(problem, w, y, alpha1, alpha2)?;
    let lhs = exact
        .map(|ex| exact_errors(problem, w, y, ex))
        .transpose()?
        .map(|e| (1.0 + alpha1 + alpha2) * e.energy.powi(2) + e.flux.powi(2));
    Ok(CombinedBound {
        lhs,
        rhs: mixed_sq - penalty,
    })
}

/// Upper and lower combined estimates with the same (alpha1, alpha2).
pub fn two_sided_combined(
    problem: &Problem,
    w: &SeparableField,
    y: &SeparableFlux,
    exact: Option<&ExactSolution>,
    alpha1: f64,
    alpha2: f64,
) -> Result<(CombinedBound, CombinedBound)> {
    Ok((
        combined_upper(problem, w, y, exact, alpha1, alpha2)?,
        combined_lower(problem, w, y, exact, alpha1, alpha2)?,
    ))
}

/// S_N of the spectral approximation with the flux choice
/// Upsilon_j = gamma_j theta_j^{-1/2} psi_j':
///
/// S_N^2 = sum_jk gamma_j gamma_k / (theta_j theta_k (theta_j^{1/2} + theta_k^{1/2})) (rho_j, rho_k),
/// rho_j = psi_j'' + theta_j psi_j.
pub fn spectral_s_n(approx: &SpectralApprox, f: &SinSeries) -> f64 {
    let gammas = approx.projections(f);
    let rho: Vec<SinSeries> = approx
        .theta()
        .iter()
        .zip(approx.psi())
        .map(|(&th, psi)| {
            psi.map_modes(|m, c| {
                let w = m as f64 * std::f64::consts::PI;
                (th - w * w) * c
            })
        })
        .collect();
    let theta = approx.theta();
    let mut acc = 0.0;
    for j in 0..theta.len() {
        for k in 0..theta.len() {
            let rr = rho[j].inner(&rho[k]);
            if rr == 0.0 {
                continue;
            }
            acc += gammas[j] * gammas[k]
                / (theta[j] * theta[k] * (theta[j].sqrt() + theta[k].sqrt()))
                * rr;
        }
    }
    acc.max(0.0).sqrt()
}

/// sum_j gamma_j theta_j^{-1} psi_j'' + f, the Neumann defect of the
/// spectral candidate flux at s = 1/2.
pub fn spectral_trace_residual(approx: &SpectralApprox, f: &SinSeries) -> SinSeries {
    let mut r = f.clone();
    for ((theta, psi), gamma) in approx
        .theta()
        .iter()
        .zip(approx.psi())
        .zip(approx.projections(f))
    {
        r.axpy(-gamma / theta, &psi.neg_laplacian());
    }
    r
}

fn require_half(problem: &Problem) -> Result<()> {
    if problem.order().is_half() {
        Ok(())
    } else {
        Err(Error::UnsupportedOrder(problem.order().value()))
    }
}

/// M+ = S_N + C_F^{1/2} ||sum_j gamma_j theta_j^{-1} psi_j'' + f|| (s = 1/2).
pub fn spectral_majorant(problem: &Problem, approx: &SpectralApprox) -> Result<f64> {
    require_half(problem)?;
    let s_n = spectral_s_n(approx, problem.f());
    let r = spectral_trace_residual(approx, problem.f()).norm();
    Ok(s_n + problem.friedrichs().sqrt() * r)
}

/// Right side S_N^2 + C_F/alpha ||residual||^2 of the single-parameter
/// combined estimate, with lhs (1 - alpha) |||grad e_w|||^2 + |||e_p|||^2.
pub fn spectral_combined(
    problem: &Problem,
    approx: &SpectralApprox,
    alpha: f64,
    exact: Option<&ExactSolution>,
) -> Result<CombinedBound> {
    require_half(problem)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha = {alpha} must lie in (0, 1)"
        )));
    }
    let f = problem.f();
    let rhs = spectral_s_n(approx, f).powi(2)
        + problem.friedrichs() / alpha * spectral_trace_residual(approx, f).norm().powi(2);
    let lhs = match exact {
        Some(ex) => {
            let w = approx_extension(approx, f)?;
            let y = candidate_flux(approx, f)?;
            let e = exact_errors(problem, &w, &y, ex)?;
            Some((1.0 - alpha) * e.energy.powi(2) + e.flux.powi(2))
        }
        None => None,
    };
    Ok(CombinedBound { lhs, rhs })
}

/// Whether every term of w solves w_tt + w_xx = 0 (the s = 1/2 extension
/// equation): power 0 and rate equal to the frequency of each active mode.
/// At other orders only the zero field qualifies, since exponential terms
/// never solve the degenerate equation.
pub fn satisfies_extension_equation(problem: &Problem, w: &SeparableField) -> bool {
    let tiny = 1e-14 * w.max_abs();
    let active = |c: f64| c.abs() > tiny && c != 0.0;
    if !problem.order().is_half() {
        return w
            .terms()
            .iter()
            .all(|t| !t.x.coeffs().iter().any(|&c| active(c)));
    }
    w.terms().iter().all(|t| {
        t.x.modes().filter(|&(_, c)| active(c)).all(|(m, _)| {
            let w2 = (m as f64 * std::f64::consts::PI).powi(2);
            t.k == 0 && (t.rate * t.rate - w2).abs() <= EQUATION_TOL * w2
        })
    })
}

/// Bounds on ||e_u||_s for the trace v = w~(., 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceBounds {
    /// kappa_s M+(w~; y)
    pub upper: f64,
    /// kappa_s M-(w~; eta); `None` when w~ does not solve the extension
    /// equation and the lower bound is not applicable.
    pub lower: Option<f64>,
    /// ||w~(., 0) - u||_s when u is known.
    pub exact: Option<f64>,
}

pub fn trace_error_bounds(
    problem: &Problem,
    w: &SeparableField,
    y: &SeparableFlux,
    eta: &SeparableField,
    exact: Option<&ExactSolution>,
) -> Result<TraceBounds> {
    let k = problem.kappa();
    let upper = k * majorant(problem, w, y)?.value;
    let lower = if satisfies_extension_equation(problem, w) {
        Some(k * minorant(problem, w, eta)?.value)
    } else {
        None
    };
    let exact = exact.map(|ex| {
        w.trace()
            .sub(&ex.trace())
            .fractional_norm(problem.order(), problem.domain())
    });
    Ok(TraceBounds {
        upper,
        lower,
        exact,
    })
}

/// Both sides of the weighted Friedrichs and trace inequalities for one
/// field v:
///
/// |||v||| <= C_F |||grad v|||,
/// C_s ||v(., 0)||_s^2 <= |||grad v|||^2 (equality for solutions),
/// ||v(., 0)|| <= C_F^s ||v(., 0)||_s <= C_F^s kappa_s |||grad v|||.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaValues {
    pub weighted_l2: f64,
    pub energy: f64,
    pub friedrichs_bound: f64,
    pub trace_energy: f64,
    pub trace_l2: f64,
    pub trace_fractional_bound: f64,
    pub trace_l2_bound: f64,
}

impl LemmaValues {
    /// |||v||| <= C_F |||grad v|||.
    pub fn friedrichs_holds(&self, rel: f64) -> bool {
        self.weighted_l2 <= self.friedrichs_bound * (1.0 + rel)
    }

    /// C_s ||v(., 0)||_s^2 <= |||grad v|||^2.
    pub fn trace_energy_holds(&self, rel: f64) -> bool {
        self.trace_energy <= self.energy.powi(2) * (1.0 + rel)
    }

    /// Relative gap in the trace energy equality.
    pub fn trace_energy_gap(&self) -> f64 {
        let e2 = self.energy.powi(2);
        (self.trace_energy - e2).abs() / e2.max(IDENTITY_FLOOR)
    }

    /// Both steps of the L2 trace chain.
    pub fn trace_l2_holds(&self, rel: f64) -> bool {
        self.trace_l2 <= self.trace_fractional_bound * (1.0 + rel)
            && self.trace_fractional_bound <= self.trace_l2_bound * (1.0 + rel)
    }
}

pub fn lemma_values(problem: &Problem, v: &SeparableField) -> Result<LemmaValues> {
    let s = problem.order();
    let energy = problem.energy_norm(v)?;
    let trace = v.trace();
    let frac = trace.fractional_norm(s, problem.domain());
    let cfs = problem.friedrichs().powf(s.value());
    Ok(LemmaValues {
        weighted_l2: problem.weighted_l2_norm(v)?,
        energy,
        friedrichs_bound: problem.friedrichs() * energy,
        trace_energy: extension_constant(s) * frac * frac,
        trace_l2: trace.norm(),
        trace_fractional_bound: cfs * frac,
        trace_l2_bound: problem.trace_constant() * energy,
    })
}

/// Full set of estimates for one (w~, y, eta).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub s: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub energy_error: Option<f64>,
    pub flux_error: Option<f64>,
    pub mixed_norm: f64,
    pub majorant_terms: (f64, f64, f64),
    pub majorant: f64,
    pub minorant: f64,
    pub minorant_squared: f64,
    pub identity_lhs: Option<f64>,
    pub identity_rhs: Option<f64>,
    pub combined_upper: CombinedBound,
    pub combined_lower: CombinedBound,
}

impl EstimateReport {
    /// minorant <= energy error <= majorant, with absolute slack.
    pub fn ordering_holds(&self, slack: f64) -> Option<bool> {
        self.energy_error
            .map(|e| self.minorant <= e + slack && e <= self.majorant + slack)
    }
}

/// Default splitting parameters of the combined estimates.
pub const DEFAULT_ALPHA1: f64 = 0.25;
pub const DEFAULT_ALPHA2: f64 = 0.25;

pub fn estimate_report(
    problem: &Problem,
    w: &SeparableField,
    y: &SeparableFlux,
    eta: &SeparableField,
    exact: Option<&ExactSolution>,
    alpha1: f64,
    alpha2: f64,
) -> Result<EstimateReport> {
    let m = majorant(problem, w, y)?;
    let lo = minorant(problem, w, eta)?;
    let errors = exact
        .map(|ex| exact_errors(problem, w, y, ex))
        .transpose()?;
    let identity = exact
        .map(|ex| error_identity(problem, w, y, ex))
        .transpose()?;
    let (upper, lower) = two_sided_combined(problem, w, y, exact, alpha1, alpha2)?;
    Ok(EstimateReport {
        s: problem.order().value(),
        alpha1,
        alpha2,
        energy_error: errors.map(|e| e.energy),
        flux_error: errors.map(|e| e.flux),
        mixed_norm: m.mixed,
        majorant_terms: (m.mixed, m.divergence, m.trace_defect),
        majorant: m.value,
        minorant: lo.value,
        minorant_squared: lo.squared,
        identity_lhs: identity.map(|i| i.lhs),
        identity_rhs: identity.map(|i| i.rhs),
        combined_upper: upper,
        combined_lower: lower,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{StreamMode, Term};
    use std::f64::consts::PI;

    fn half_problem(f: SinSeries) -> Problem {
        Problem::new(FractionalOrder::HALF, DomainSpec::default(), f).unwrap()
    }

    fn perturbed_approx() -> SpectralApprox {
        let psi = vec![
            SinSeries::new(vec![1.0, 0.08, -0.03]).scaled(2f64.sqrt()),
            SinSeries::new(vec![0.05, 1.0, 0.04]).scaled(2f64.sqrt()),
            SinSeries::new(vec![0.0, -0.02, 1.0, 0.06]).scaled(2f64.sqrt()),
        ];
        SpectralApprox::new(
            vec![PI * PI * 1.02, 4.0 * PI * PI * 0.97, 9.0 * PI * PI * 1.05],
            psi,
        )
        .unwrap()
    }

    #[test]
    fn functional_values() {
        let p = half_problem(SinSeries::power_decay(1.0, 6));
        assert_eq!(energy_functional(&p, &SeparableField::zero()).unwrap(), 0.0);
        let ex = p.exact_solution().unwrap();
        let jw = energy_functional(&p, &ex.w).unwrap();
        let e2 = p.energy_inner(&ex.w, &ex.w).unwrap();
        assert!((jw + 0.5 * e2).abs() < 1e-14);
    }

    #[test]
    fn identity_exact_pair_is_zero() {
        let p = half_problem(SinSeries::power_decay(1.0, 6));
        let ex = p.exact_solution().unwrap();
        let id = error_identity(&p, &ex.w, &ex.p, &ex).unwrap();
        assert!(id.lhs.abs() < 1e-28 && id.rhs.abs() < 1e-26);
    }

    #[test]
    fn identity_with_divergent_flux() {
        // y with nonzero divergence and wrong Neumann trace exercises both
        // correction terms of the identity
        let p = half_problem(SinSeries::power_decay(1.0, 4));
        let ex = p.exact_solution().unwrap();
        let approx = perturbed_approx();
        let w = approx_extension(&approx, p.f()).unwrap();
        let bump = SeparableFlux::new(
            Expansion::from_terms([Term::new(CosSeries::new(vec![0.1, 0.2]), 1, 2.0)]).unwrap(),
            Expansion::from_terms([Term::new(SinSeries::new(vec![0.3, 0.0, -0.1]), 0, 1.5)])
                .unwrap(),
        );
        let y = candidate_flux(&approx, p.f()).unwrap().add(&bump);
        assert!(y.divergence().max_abs() > 0.1);
        let id = error_identity(&p, &w, &y, &ex).unwrap();
        assert!(id.residual < 1e-12, "{id:?}");
    }

    use crate::fields::Expansion;
    use crate::series::CosSeries;

    #[test]
    fn hypercircle_cases() {
        let p = half_problem(SinSeries::power_decay(1.0, 5));
        let ex = p.exact_solution().unwrap();
        let w = approx_extension(&perturbed_approx(), p.f()).unwrap();
        let e2 = p.energy_inner(&w.sub(&ex.w), &w.sub(&ex.w)).unwrap();
        let yp = EquilibratedFlux::verify(ex.p.clone(), p.g()).unwrap();
        let b = hypercircle_bound(&p, &w, &yp).unwrap();
        assert!((b - e2).abs() < 1e-12 * e2);
        assert!(hypercircle_bound(&p, &ex.w, &yp).unwrap() < 1e-28);

        let stream = [StreamMode {
            mode: 2,
            amplitude: 0.05,
            power: 1,
            rate: 3.0,
        }];
        let ys = crate::fields::yg_flux(&ex.p, p.g(), &stream).unwrap();
        let b = hypercircle_bound(&p, &w, &ys).unwrap();
        let gap = p.dual_norm(&ys.flux().sub(&ex.p)).unwrap().powi(2);
        assert!(b >= e2);
        assert!((b - e2 - gap).abs() < 1e-12 * b);
    }

    #[test]
    fn majorant_sharp_for_exact_flux() {
        let p = half_problem(SinSeries::power_decay(1.0, 5));
        let ex = p.exact_solution().unwrap();
        let w = approx_extension(&perturbed_approx(), p.f()).unwrap();
        let m = majorant(&p, &w, &ex.p).unwrap();
        let e = p.energy_norm(&w.sub(&ex.w)).unwrap();
        assert!(m.divergence < 1e-13 && m.trace_defect < 1e-14);
        assert!((m.value - e).abs() < 1e-12 * e);
        let zero = majorant(&p, &ex.w, &ex.p).unwrap();
        assert!(zero.value < 1e-13);
    }

    #[test]
    fn minorant_cases() {
        let p = half_problem(SinSeries::power_decay(1.0, 5));
        let ex = p.exact_solution().unwrap();
        let w = approx_extension(&perturbed_approx(), p.f()).unwrap();
        let e = w.sub(&ex.w);
        let e2 = p.energy_inner(&e, &e).unwrap();
        assert_eq!(
            minorant(&p, &w, &SeparableField::zero()).unwrap().value,
            0.0
        );
        let m = minorant(&p, &w, &e).unwrap();
        assert!((m.squared - e2).abs() < 1e-12 * e2);
        let half = minorant(&p, &w, &e.scaled(0.5)).unwrap();
        assert!((half.squared - 0.75 * e2).abs() < 1e-12 * e2);
        // negative quadratic is preserved and clamped
        let big = minorant(&p, &w, &e.scaled(3.0)).unwrap();
        assert!(big.squared < 0.0 && big.value == 0.0);
    }

    #[test]
    fn optimize_recovers_error() {
        let p = half_problem(SinSeries::power_decay(1.0, 5));
        let ex = p.exact_solution().unwrap();
        let w = approx_extension(&perturbed_approx(), p.f()).unwrap();
        let e = w.sub(&ex.w);
        let e2 = p.energy_inner(&e, &e).unwrap();
        let (_, v) = optimize_minorant(&p, &w, &[e.scaled(7.0)]).unwrap();
        assert!((v.squared - e2).abs() < 1e-12 * e2);
        let (eta, v) = optimize_minorant(&p, &w, &[]).unwrap();
        assert!(eta.is_empty() && v.value == 0.0);
        let err = optimize_minorant(&p, &w, &[e.clone(), e.scaled(2.0)]).unwrap_err();
        assert!(matches!(err, Error::DegenerateBasis(_)));
    }

    #[test]
    fn alpha_validation() {
        let p = half_problem(SinSeries::power_decay(1.0, 3));
        let ex = p.exact_solution().unwrap();
        assert!(combined_upper(&p, &ex.w, &ex.p, None, 0.5, 0.5).is_err());
        assert!(combined_upper(&p, &ex.w, &ex.p, None, 0.0, 0.5).is_err());
        assert!(combined_lower(&p, &ex.w, &ex.p, None, 2.0, 3.0).is_ok());
        let (u, l) = two_sided_combined(&p, &ex.w, &ex.p, Some(&ex), 0.25, 0.25).unwrap();
        assert!(u.rhs.abs() < 1e-26 && u.lhs.unwrap().abs() < 1e-26);
        assert_eq!(u.upper_holds(1e-14), Some(true));
        assert_eq!(l.lower_holds(1e-14), Some(true));
    }

    #[test]
    fn s_n_exact_is_zero() {
        let d = DomainSpec::default();
        let f = SinSeries::power_decay(1.0, 6);
        assert!(spectral_s_n(&SpectralApprox::exact(&d, 6), &f) < 1e-15);
    }

    #[test]
    fn s_n_single_perturbed_mode() {
        let eps = 0.01;
        let f = SinSeries::power_decay(1.0, 3);
        let psi = SinSeries::new(vec![1.0, eps]);
        let approx = SpectralApprox::new(vec![PI * PI], vec![psi.clone()]).unwrap();
        let gamma = f.inner(&psi);
        let expected = gamma * gamma * 9.0 * PI.powi(4) * eps * eps / (2.0 * PI.powi(4) * 2.0 * PI);
        let s = spectral_s_n(&approx, &f);
        assert!((s * s - expected).abs() < 1e-14 * expected);
    }

    #[test]
    fn s_n_matches_mixed_norm() {
        let p = half_problem(SinSeries::power_decay(1.0, 5));
        let approx = perturbed_approx();
        let w = approx_extension(&approx, p.f()).unwrap();
        let y = candidate_flux(&approx, p.f()).unwrap();
        let s = spectral_s_n(&approx, p.f());
        let mixed = p.mixed_norm_sq(&w, &y).unwrap();
        assert!((s * s - mixed).abs() < 1e-12 * mixed);
        let general = majorant(&p, &w, &y).unwrap().value;
        let spectral = spectral_majorant(&p, &approx).unwrap();
        assert!((general - spectral).abs() < 1e-12 * spectral);
    }

    #[test]
    fn spectral_requires_half() {
        let p = Problem::new(
            FractionalOrder::new(0.3).unwrap(),
            DomainSpec::default(),
            SinSeries::power_decay(1.0, 3),
        )
        .unwrap();
        assert_eq!(
            spectral_majorant(&p, &perturbed_approx()),
            Err(Error::UnsupportedOrder(0.3))
        );
        assert!(p.exact_solution().is_err());
    }

    #[test]
    fn equation_detection() {
        let d = DomainSpec::default();
        let p = half_problem(SinSeries::power_decay(1.0, 4));
        let ex = p.exact_solution().unwrap();
        assert!(satisfies_extension_equation(&p, &ex.w));
        let theta_only = SpectralApprox::new(
            vec![PI * PI * 1.01, 4.0 * PI * PI, 9.0 * PI * PI, 16.0 * PI * PI],
            d.eigenfunctions(4),
        )
        .unwrap();
        let w = approx_extension(&theta_only, p.f()).unwrap();
        assert!(!satisfies_extension_equation(&p, &w));
        let b = trace_error_bounds(&p, &w, &ex.p, &SeparableField::zero(), Some(&ex)).unwrap();
        assert!(b.lower.is_none());
        assert!(b.exact.unwrap() <= b.upper);
        let exact =
            trace_error_bounds(&p, &ex.w, &ex.p, &SeparableField::zero(), Some(&ex)).unwrap();
        assert!(exact.upper < 1e-13 && exact.lower == Some(0.0) && exact.exact == Some(0.0));
    }

    #[test]
    fn lemma_equality_for_solution() {
        let p = half_problem(SinSeries::power_decay(1.0, 8));
        let ex = p.exact_solution().unwrap();
        let l = lemma_values(&p, &ex.w).unwrap();
        assert!(l.trace_energy_gap() < 1e-13);
        assert!(l.friedrichs_holds(0.0) && l.trace_l2_holds(1e-14));
    }

    #[test]
    fn report_ordering() {
        let p = half_problem(SinSeries::power_decay(1.0, 5));
        let ex = p.exact_solution().unwrap();
        let approx = perturbed_approx();
        let w = approx_extension(&approx, p.f()).unwrap();
        let y = candidate_flux(&approx, p.f()).unwrap();
        let eta = w.sub(&ex.w).scaled(0.8);
        let r =
            estimate_report(&p, &w, &y, &eta, Some(&ex), DEFAULT_ALPHA1, DEFAULT_ALPHA2).unwrap();
        assert_eq!(r.ordering_holds(1e-12), Some(true));
        assert_eq!(r.combined_upper.upper_holds(1e-12), Some(true));
        assert_eq!(r.combined_lower.lower_holds(1e-12), Some(true));
        let y_json = serde_json::to_string(&r).unwrap();
        assert!(y_json.contains("majorant_terms"));
    }
}
