//! Separable fields and fluxes on the half-cylinder Q = (0,1) x (0, inf).
//!
//! A field is a finite sum of terms X(x) t^k e^{-mu t}. Products of two
//! such terms integrate in closed form against any power weight t^a, which
//! is what makes every norm below exact (see [`GramIntegrator`]).

use std::f64::consts::PI;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::constants::{DomainSpec, FractionalOrder, GramIntegrator};
use crate::error::{Error, Result};
use crate::series::{CosSeries, SinSeries, XSeries};

/// Highest admissible power of t in a term.
pub const MAX_T_POWER: u32 = 4;

/// Terms whose rates differ by at most this much (and share k) are merged.
pub const RATE_MERGE_TOL: f64 = 1e-14;

/// Relative tolerance used when asserting exact cancellations
/// (zero divergence, exact Neumann trace).
pub const CANCELLATION_TOL: f64 = 1e-12;

/// X(x) t^k e^{-rate t}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term<X> {
    pub x: X,
    pub k: u32,
    pub rate: f64,
}

impl<X> Term<X> {
    pub fn new(x: X, k: u32, rate: f64) -> Self {
        Self { x, k, rate }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0) || !self.rate.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "term rate {} must be positive and finite",
                self.rate
            )));
        }
        if self.k > MAX_T_POWER {
            return Err(Error::InvalidParameter(format!(
                "power t^{} exceeds the cap t^{MAX_T_POWER}",
                self.k
            )));
        }
        Ok(())
    }

    fn time_factor(&self, t: f64) -> f64 {
        t.powi(self.k as i32) * (-self.rate * t).exp()
    }
}

#[derive(Deserialize)]
struct ExpansionRepr<X> {
    terms: Vec<Term<X>>,
}

/// Finite sum of separable terms with a common x-series kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExpansionRepr<X>")]
#[serde(bound(deserialize = "X: XSeries + Deserialize<'de>"))]
pub struct Expansion<X> {
    terms: Vec<Term<X>>,
}

impl<X: XSeries> TryFrom<ExpansionRepr<X>> for Expansion<X> {
    type Error = Error;
    fn try_from(repr: ExpansionRepr<X>) -> Result<Self> {
        Self::from_terms(repr.terms)
    }
}

impl<X: XSeries> Default for Expansion<X> {
    fn default() -> Self {
        Self { terms: Vec::new() }
    }
}

/// Scalar field on Q.
pub type SeparableField = Expansion<SinSeries>;

impl<X: XSeries> Expansion<X> {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_terms(terms: impl IntoIterator<Item = Term<X>>) -> Result<Self> {
        let mut out = Self::zero();
        for term in terms {
            out.push(term)?;
        }
        Ok(out)
    }

    /// Adds a term, merging it into an existing term with the same power
    /// and (within [`RATE_MERGE_TOL`]) the same rate.
    pub fn push(&mut self, term: Term<X>) -> Result<()> {
        term.validate()?;
        self.push_unchecked(term);
        Ok(())
    }

    fn push_unchecked(&mut self, term: Term<X>) {
        if term.x.is_zero() {
            return;
        }
        match self
            .terms
            .iter_mut()
            .find(|t| t.k == term.k && (t.rate - term.rate).abs() <= RATE_MERGE_TOL)
        {
            Some(existing) => existing.x.axpy(1.0, &term.x),
            None => self.terms.push(term),
        }
    }

    pub fn terms(&self) -> &[Term<X>] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest coefficient magnitude over all terms.
    pub fn max_abs(&self) -> f64 {
        self.terms.iter().fold(0.0, |m, t| m.max(t.x.max_abs()))
    }

    pub fn min_rate(&self) -> Option<f64> {
        self.terms.iter().map(|t| t.rate).reduce(f64::min)
    }

    pub fn max_power(&self) -> u32 {
        self.terms.iter().map(|t| t.k).max().unwrap_or(0)
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = Self::zero();
        for t in &self.terms {
            out.push_unchecked(Term::new(t.x.scaled(a), t.k, t.rate));
        }
        out
    }

    pub fn axpy(&mut self, a: f64, other: &Self) {
        for t in &other.terms {
            self.push_unchecked(Term::new(t.x.scaled(a), t.k, t.rate));
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Product rule: (t^k e^{-mu t})' = k t^{k-1} e^{-mu t} - mu t^k e^{-mu t}.
    pub fn t_derivative(&self) -> Self {
        let mut out = Self::zero();
        for t in &self.terms {
            if t.k > 0 {
                out.push_unchecked(Term::new(t.x.scaled(t.k as f64), t.k - 1, t.rate));
            }
            out.push_unchecked(Term::new(t.x.scaled(-t.rate), t.k, t.rate));
        }
        out
    }

    /// Applies an x-operator termwise.
    pub fn map_x<Y: XSeries>(&self, f: impl Fn(&X) -> Y) -> Expansion<Y> {
        let mut out = Expansion::zero();
        for t in &self.terms {
            out.push_unchecked(Term::new(f(&t.x), t.k, t.rate));
        }
        out
    }

    /// Value at t = 0: only t^0 terms survive.
    pub fn trace(&self) -> X {
        let mut out = X::zero();
        for t in self.terms.iter().filter(|t| t.k == 0) {
            out.axpy(1.0, &t.x);
        }
        out
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|term| term.x.eval(x) * term.time_factor(t))
            .sum()
    }

    /// int_Q t^a u v dx dt for the exponent carried by `gram`.
    pub fn weighted_inner(&self, other: &Self, gram: &GramIntegrator) -> Result<f64> {
        let mut acc = 0.0;
        for (i, a) in self.terms.iter().enumerate() {
            for (j, b) in other.terms.iter().enumerate() {
                let xx = a.x.inner(&b.x);
                if xx == 0.0 {
                    continue;
                }
                let tt = gram.integrate(a.k + b.k, a.rate + b.rate).map_err(|_| {
                    Error::Domain(format!(
                        "terms {i} (t^{}) and {j} (t^{}) diverge against weight t^{}",
                        a.k,
                        b.k,
                        gram.exponent()
                    ))
                })?;
                acc += xx * tt;
            }
        }
        Ok(acc)
    }

    /// (int_Q t^exponent |u|^2 dx dt)^{1/2}.
    pub fn weighted_norm(&self, exponent: f64) -> Result<f64> {
        let gram = GramIntegrator::new(exponent, 2 * MAX_T_POWER)?;
        Ok(self.weighted_inner(self, &gram)?.max(0.0).sqrt())
    }
}

impl<X: XSeries + Serialize + DeserializeOwned> Expansion<X> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("expansions always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidParameter(e.to_string()))
    }
}

impl SeparableField {
    /// grad_{xt} w = {w_x, w_t}.
    pub fn gradient(&self) -> SeparableFlux {
        SeparableFlux {
            x: self.map_x(SinSeries::derivative),
            t: self.t_derivative(),
        }
    }
}

/// Two-component flux (y_x, y_t): cosine x-parts in the first component so
/// that gradients of sine fields stay in the representation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SeparableFlux {
    pub x: Expansion<CosSeries>,
    pub t: Expansion<SinSeries>,
}

impl SeparableFlux {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn new(x: Expansion<CosSeries>, t: Expansion<SinSeries>) -> Self {
        Self { x, t }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            x: self.x.add(&other.x),
            t: self.t.add(&other.t),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            x: self.x.sub(&other.x),
            t: self.t.sub(&other.t),
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            x: self.x.scaled(a),
            t: self.t.scaled(a),
        }
    }

    fn divergence_parts(&self) -> (SeparableField, SeparableField) {
        (self.x.map_x(CosSeries::derivative), self.t.t_derivative())
    }

    /// div_{xt} y = d/dx y_x + d/dt y_t.
    pub fn divergence(&self) -> SeparableField {
        let (dx, dt) = self.divergence_parts();
        dx.add(&dt)
    }

    /// Divergence together with the magnitude of its two contributions,
    /// used to judge whether a computed cancellation is exact.
    pub fn divergence_with_scale(&self) -> (SeparableField, f64) {
        let (dx, dt) = self.divergence_parts();
        let scale = dx.max_abs().max(dt.max_abs());
        (dx.add(&dt), scale)
    }

    /// y_t(., 0).
    pub fn normal_trace(&self) -> SinSeries {
        self.t.trace()
    }

    pub fn eval(&self, x: f64, t: f64) -> (f64, f64) {
        (self.x.eval(x, t), self.t.eval(x, t))
    }

    pub fn weighted_inner(&self, other: &Self, gram: &GramIntegrator) -> Result<f64> {
        Ok(self.x.weighted_inner(&other.x, gram)? + self.t.weighted_inner(&other.t, gram)?)
    }

    /// (int_Q t^exponent |y|^2 dx dt)^{1/2}.
    pub fn weighted_norm(&self, exponent: f64) -> Result<f64> {
        let gram = GramIntegrator::new(exponent, 2 * MAX_T_POWER)?;
        Ok(self.weighted_inner(self, &gram)?.max(0.0).sqrt())
    }

    pub fn min_rate(&self) -> Option<f64> {
        match (self.x.min_rate(), self.t.min_rate()) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    pub fn max_power(&self) -> u32 {
        self.x.max_power().max(self.t.max_power())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fluxes always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidParameter(e.to_string()))
    }
}

fn require_half(s: FractionalOrder) -> Result<()> {
    if s.is_half() {
        Ok(())
    } else {
        Err(Error::UnsupportedOrder(s.value()))
    }
}

/// Exact extension of the solution for f at s = 1/2:
/// w = sum_j lambda_j^{-1/2} zeta_j phi_j(x) e^{-lambda_j^{1/2} t}.
pub fn exact_extension(
    f: &SinSeries,
    s: FractionalOrder,
    domain: &DomainSpec,
) -> Result<SeparableField> {
    require_half(s)?;
    domain.check_modes(f.len())?;
    let mut w = SeparableField::zero();
    for (j, fj) in f.modes() {
        if fj == 0.0 {
            continue;
        }
        let root = domain.lambda(j).sqrt();
        // lambda^{-1/2} (f, phi_j) phi_j = f_j / (j pi) sin(j pi x)
        w.push(Term::new(SinSeries::mode(j, fj / root), 0, root))?;
    }
    Ok(w)
}

/// The flux p = t^{1-2s} grad w, available in closed form at s = 1/2 only.
pub fn exact_flux(w: &SeparableField, s: FractionalOrder) -> Result<SeparableFlux> {
    require_half(s)?;
    Ok(w.gradient())
}

/// Approximate eigenpairs (theta_j, psi_j) used to build a spectral-type
/// approximation of the extension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralApprox {
    theta: Vec<f64>,
    psi: Vec<SinSeries>,
}

impl SpectralApprox {
    /// theta must be positive and nondecreasing, with one psi per theta.
    pub fn new(theta: Vec<f64>, psi: Vec<SinSeries>) -> Result<Self> {
        if theta.len() != psi.len() {
            return Err(Error::LengthMismatch {
                expected: theta.len(),
                got: psi.len(),
            });
        }
        if let Some(bad) = theta.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "approximate eigenvalue {bad} is not positive"
            )));
        }
        if theta.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter(
                "approximate eigenvalues must be nondecreasing".into(),
            ));
        }
        Ok(Self { theta, psi })
    }

    /// The exact first n eigenpairs of the unit interval.
    pub fn exact(domain: &DomainSpec, n: usize) -> Self {
        Self {
            theta: domain.lambdas(n),
            psi: domain.eigenfunctions(n),
        }
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn psi(&self) -> &[SinSeries] {
        &self.psi
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Keeps the first n pairs.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            theta: self.theta[..n].to_vec(),
            psi: self.psi[..n].to_vec(),
        }
    }

    /// gamma_j = (f, psi_j).
    pub fn projections(&self, f: &SinSeries) -> Vec<f64> {
        self.psi.iter().map(|p| f.inner(p)).collect()
    }

    fn pairs<'a>(&'a self, f: &SinSeries) -> impl Iterator<Item = (f64, &'a SinSeries, f64)> + 'a {
        let gammas = self.projections(f);
        self.theta
            .iter()
            .zip(&self.psi)
            .zip(gammas)
            .map(|((&th, psi), g)| (th, psi, g))
    }
}

/// w~ = sum_j theta_j^{-1/2} gamma_j psi_j(x) e^{-theta_j^{1/2} t}.
pub fn approx_extension(approx: &SpectralApprox, f: &SinSeries) -> Result<SeparableField> {
    let mut w = SeparableField::zero();
    for (theta, psi, gamma) in approx.pairs(f) {
        let root = theta.sqrt();
        w.push(Term::new(psi.scaled(gamma / root), 0, root))?;
    }
    Ok(w)
}

/// Divergence-free candidate flux with Upsilon_j = gamma_j theta_j^{-1/2} psi_j':
/// y_x = sum Upsilon_j e^{-theta_j^{1/2} t},
/// y_t = sum theta_j^{-1/2} Upsilon_j' e^{-theta_j^{1/2} t}.
pub fn candidate_flux(approx: &SpectralApprox, f: &SinSeries) -> Result<SeparableFlux> {
    let mut y = SeparableFlux::zero();
    for (theta, psi, gamma) in approx.pairs(f) {
        let root = theta.sqrt();
        let upsilon = psi.derivative().scaled(gamma / root);
        let upsilon_div = upsilon.derivative().scaled(1.0 / root);
        y.x.push(Term::new(upsilon, 0, root))?;
        y.t.push(Term::new(upsilon_div, 0, root))?;
    }
    let (div, scale) = y.divergence_with_scale();
    let residual = div.max_abs();
    if residual > CANCELLATION_TOL * scale.max(1.0) {
        return Err(Error::Consistency(format!(
            "candidate flux divergence {residual:e} does not vanish"
        )));
    }
    Ok(y)
}

/// Divergence-free perturbation generated by the stream function
/// chi = amplitude cos(mode pi x) t^power e^{-rate t}, added as
/// y += (d chi/dt, -d chi/dx). The t-component vanishes at t = 0 because
/// power >= 1, so the Neumann trace is untouched.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamMode {
    pub mode: usize,
    pub amplitude: f64,
    pub power: u32,
    pub rate: f64,
}

impl StreamMode {
    fn validate(&self) -> Result<()> {
        if self.power == 0 || self.power > MAX_T_POWER {
            return Err(Error::InvalidParameter(format!(
                "stream power must be in 1..={MAX_T_POWER}, got {}",
                self.power
            )));
        }
        if !(self.rate > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "stream rate {} must be positive",
                self.rate
            )));
        }
        Ok(())
    }

    /// x-component d chi / dt.
    fn x_component(&self) -> Result<Expansion<CosSeries>> {
        self.validate()?;
        let c = CosSeries::mode(self.mode, self.amplitude);
        let k = self.power;
        Expansion::from_terms([
            Term::new(c.scaled(k as f64), k - 1, self.rate),
            Term::new(c.scaled(-self.rate), k, self.rate),
        ])
    }

    /// The full perturbation (d chi/dt, -d chi/dx).
    pub fn flux(&self) -> Result<SeparableFlux> {
        let x = self.x_component()?;
        // -d/dx [a cos(m pi x)] = a m pi sin(m pi x)
        let t = if self.mode == 0 {
            Expansion::zero()
        } else {
            Expansion::from_terms([Term::new(
                SinSeries::mode(self.mode, self.amplitude * self.mode as f64 * PI),
                self.power,
                self.rate,
            )])?
        };
        Ok(SeparableFlux { x, t })
    }
}

/// A flux verified to satisfy div y = 0 in Q and y_t(., 0) = -g.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibratedFlux {
    flux: SeparableFlux,
}

impl EquilibratedFlux {
    /// Checks both equilibration conditions to [`CANCELLATION_TOL`].
    pub fn verify(flux: SeparableFlux, g: &SinSeries) -> Result<Self> {
        let (div, scale) = flux.divergence_with_scale();
        let div_res = div.max_abs();
        if div_res > CANCELLATION_TOL * scale.max(1.0) {
            return Err(Error::NotEquilibrated(div_res));
        }
        let trace_res = flux.normal_trace().add(g).norm();
        if trace_res > CANCELLATION_TOL * g.norm().max(1.0) {
            return Err(Error::NotEquilibrated(trace_res));
        }
        Ok(Self { flux })
    }

    pub fn flux(&self) -> &SeparableFlux {
        &self.flux
    }

    pub fn into_flux(self) -> SeparableFlux {
        self.flux
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Builds a member of the equilibrated set from the x-component of `base`
/// (plus stream perturbations) by setting
/// y_t(x, t) = -g(x) - int_0^t div_x y_x dt'.
///
/// The primitive of t^k e^{-mu t} leaves a t-independent remainder; it must
/// cancel against -g, otherwise y_t would not decay and the flux is rejected.
pub fn yg_flux(
    base: &SeparableFlux,
    g: &SinSeries,
    stream_modes: &[StreamMode],
) -> Result<EquilibratedFlux> {
    let mut yx = base.x.clone();
    for mode in stream_modes {
        yx.axpy(1.0, &mode.x_component()?);
    }
    let div_x = yx.map_x(CosSeries::derivative);

    // int_0^t tau^k e^{-mu tau} dtau
    //   = k!/mu^{k+1} - sum_{i<=k} k!/(i! mu^{k+1-i}) t^i e^{-mu t}
    let mut remainder = g.scaled(-1.0);
    let mut yt = SeparableField::zero();
    let mut scale = g.max_abs();
    for term in div_x.terms() {
        let (k, mu) = (term.k, term.rate);
        let kf = factorial(k);
        let constant = term.x.scaled(kf / mu.powi(k as i32 + 1));
        scale = scale.max(constant.max_abs());
        remainder.axpy(-1.0, &constant);
        for i in 0..=k {
            let c = kf / (factorial(i) * mu.powi((k + 1 - i) as i32));
            yt.push(Term::new(term.x.scaled(c), i, mu))?;
        }
    }
    let residual = remainder.norm();
    if residual > CANCELLATION_TOL * scale.max(1.0) {
        return Err(Error::NotEquilibrated(residual));
    }
    EquilibratedFlux::verify(SeparableFlux { x: yx, t: yt }, g)
}
