//! Randomized perturbation campaigns at s = 1/2.
//!
//! Each trial disturbs the first N Dirichlet eigenpairs, builds the spectral
//! approximation w~ and its candidate flux, and compares the computable
//! bounds with the exact error. Trial k draws from its own ChaCha8 stream
//! (seed, k), so records do not depend on scheduling.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{DomainSpec, FractionalOrder};
use crate::error::{Error, Result};
use crate::estimators::{
    exact_errors, optimize_minorant, spectral_combined, spectral_majorant, Problem,
};
use crate::fields::{
    approx_extension, candidate_flux, SeparableField, SpectralApprox, StreamMode, Term, MAX_T_POWER,
};
use crate::series::{SinSeries, XSeries};

/// Calibrated base disturbances; with linear growth the last trial of a
/// series reaches delta ~ 0.5 delta0 and eps ~ eps0.
pub const DEFAULT_DELTA0: f64 = 0.006;
pub const DEFAULT_EPS0: f64 = 0.015;

/// Energy errors below this fraction of |||grad w||| are roundoff; such
/// trials get NaN indexes.
pub const ZERO_ERROR_REL: f64 = 1e-13;

/// How the disturbance amplitude grows with the trial index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmplitudeGrowth {
    /// amplitude(k) = base k / n
    #[default]
    Linear,
    /// amplitude(k) = base
    Constant,
}

impl AmplitudeGrowth {
    pub fn factor(self, k: usize, n: usize) -> f64 {
        match self {
            AmplitudeGrowth::Linear => k as f64 / n as f64,
            AmplitudeGrowth::Constant => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    /// Modes in f.
    pub modes_f: usize,
    /// Modes in w~.
    pub modes_w: usize,
    /// Decay exponent m of f = sum j^{-m} sin(j pi x).
    pub decay: f64,
    pub delta0: f64,
    pub eps0: f64,
    pub n_trials: usize,
    pub alpha: f64,
    pub seed: u64,
    #[serde(default)]
    pub growth: AmplitudeGrowth,
}

impl PerturbationSpec {
    pub fn new(modes_f: usize, modes_w: usize, decay: f64, n_trials: usize, alpha: f64) -> Self {
        Self {
            modes_f,
            modes_w,
            decay,
            delta0: DEFAULT_DELTA0,
            eps0: DEFAULT_EPS0,
            n_trials,
            alpha,
            seed: 0,
            growth: AmplitudeGrowth::Linear,
        }
    }

    pub fn validate(&self, domain: &DomainSpec) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.modes_f == 0 || self.modes_w == 0 {
            return bad("M and N must be positive".into());
        }
        domain.check_modes(self.modes_f)?;
        // eigenfunction disturbances reach mode N + 1
        domain.check_modes(self.modes_w + 1)?;
        if self.n_trials == 0 {
            return bad("n_trials must be at least 1".into());
        }
        if !(self.delta0 >= 0.0 && self.delta0 < 1.0) {
            return bad(format!("delta0 = {} must lie in [0, 1)", self.delta0));
        }
        if !(self.eps0 >= 0.0 && self.eps0.is_finite()) {
            return bad(format!("eps0 = {} must be nonnegative", self.eps0));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha = {} must lie in (0, 1)", self.alpha));
        }
        if !self.decay.is_finite() {
            return bad(format!("decay exponent {} must be finite", self.decay));
        }
        Ok(())
    }

    /// (eigenvalue, eigenfunction) amplitudes for trial k.
    pub fn amplitudes(&self, k: usize) -> (f64, f64) {
        let c = self.growth.factor(k, self.n_trials);
        (self.delta0 * c, self.eps0 * c)
    }

    pub fn rhs(&self) -> SinSeries {
        SinSeries::power_decay(self.decay, self.modes_f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub k: usize,
    pub delta: f64,
    pub eps: Vec<f64>,
    pub energy_error: f64,
    pub flux_error: f64,
    pub majorant: f64,
    pub minorant: f64,
    pub a8_lhs: f64,
    pub a8_rhs: f64,
    /// majorant / energy error; NaN when the error vanishes.
    pub i1: f64,
    /// sqrt(a8_rhs / a8_lhs); NaN when the error vanishes.
    pub i2: f64,
    /// ||w~(., 0) - u||_s
    pub trace_error: f64,
    /// kappa_s M+
    pub trace_bound: f64,
}

impl TrialRecord {
    pub fn eps_max(&self) -> f64 {
        self.eps.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_valid(&self) -> bool {
        self.i1.is_finite() && self.i2.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesSummary {
    pub n: usize,
    pub m: f64,
    #[serde(rename = "M")]
    pub modes_f: usize,
    #[serde(rename = "N")]
    pub modes_w: usize,
    pub alpha: f64,
    pub mean_i1: f64,
    pub mean_i2: f64,
    pub delta_max: f64,
    pub eps_max: f64,
    /// Trials with (numerically) zero exact error, left out of the index means.
    pub excluded: usize,
}

/// Compensated summation.
#[derive(Debug, Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    fn add(&mut self, v: f64) {
        let y = v - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Generator for trial k of a series: ChaCha8 keyed by the seed, stream k.
pub fn trial_rng(seed: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    rng
}

/// theta_i = lambda_i (1 + amplitude u_i), u_i uniform on [-1, 1), sorted.
pub fn perturb_eigenvalues(lambda: &[f64], amplitude: f64, rng: &mut impl Rng) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&amplitude) {
        return Err(Error::InvalidParameter(format!(
            "eigenvalue amplitude {amplitude} must lie in [0, 1)"
        )));
    }
    let mut theta: Vec<f64> = lambda
        .iter()
        .map(|&l| l * (1.0 + amplitude * rng.gen_range(-1.0..1.0)))
        .collect();
    theta.sort_by(f64::total_cmp);
    Ok(theta)
}

/// psi_i = (phi_i + amplitude chi_i) / ||phi_i + amplitude chi_i|| with chi_i a
/// random unit combination of sin((i-1) pi x) and sin((i+1) pi x), or of
/// modes 2 and 3 for i = 1.
pub fn perturb_eigenfunctions(
    phi: &[SinSeries],
    amplitude: f64,
    rng: &mut impl Rng,
) -> Result<Vec<SinSeries>> {
    if !(amplitude >= 0.0 && amplitude.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "eigenfunction amplitude {amplitude} must be nonnegative"
        )));
    }
    phi.iter()
        .enumerate()
        .map(|(idx, p)| {
            let i = idx + 1;
            let (a, b) = if i == 1 { (2, 3) } else { (i - 1, i + 1) };
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            if amplitude == 0.0 {
                return Ok(p.clone());
            }
            let chi = SinSeries::mode(a, std::f64::consts::SQRT_2 * angle.cos())
                .add(&SinSeries::mode(b, std::f64::consts::SQRT_2 * angle.sin()));
            let mut psi = p.clone();
            psi.axpy(amplitude, &chi);
            let norm = psi.norm();
            if !(norm > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "disturbed eigenfunction {i} vanishes"
                )));
            }
            Ok(psi.scaled(norm.recip()))
        })
        .collect()
}

/// delta = (1/n) sum |lambda_i - theta_i| / lambda_i, eps_i = ||phi_i - psi_i||.
pub fn disturbance_metrics(
    lambda: &[f64],
    theta: &[f64],
    phi: &[SinSeries],
    psi: &[SinSeries],
) -> Result<(f64, Vec<f64>)> {
    let n = lambda.len();
    for got in [theta.len(), phi.len(), psi.len()] {
        if got != n {
            return Err(Error::LengthMismatch { expected: n, got });
        }
    }
    if n == 0 {
        return Ok((0.0, Vec::new()));
    }
    let delta = lambda
        .iter()
        .zip(theta)
        .map(|(l, t)| (l - t).abs() / l)
        .sum::<f64>()
        / n as f64;
    let eps = phi.iter().zip(psi).map(|(a, b)| a.sub(b).norm()).collect();
    Ok((delta, eps))
}

/// Disturbed eigenpairs for `n` modes.
pub fn random_approx(
    domain: &DomainSpec,
    n: usize,
    delta: f64,
    eps: f64,
    rng: &mut impl Rng,
) -> Result<SpectralApprox> {
    let theta = perturb_eigenvalues(&domain.lambdas(n), delta, rng)?;
    let psi = perturb_eigenfunctions(&domain.eigenfunctions(n), eps, rng)?;
    SpectralApprox::new(theta, psi)
}

/// Random divergence-free stream perturbations with |amplitude| <= scale.
pub fn random_stream_modes(count: usize, scale: f64, rng: &mut impl Rng) -> Vec<StreamMode> {
    (0..count)
        .map(|_| StreamMode {
            mode: rng.gen_range(0..6),
            amplitude: scale * rng.gen_range(-1.0..1.0),
            power: rng.gen_range(1..=3),
            rate: rng.gen_range(1.0..8.0),
        })
        .collect()
}

/// Random separable field with `n_terms` terms of up to `n_modes` sine
/// modes, t-powers up to 2 and rates in [0.5, 10).
pub fn random_field(n_terms: usize, n_modes: usize, rng: &mut impl Rng) -> SeparableField {
    let mut w = SeparableField::zero();
    for _ in 0..n_terms {
        let coeffs = (1..=n_modes)
            .map(|j| rng.gen_range(-1.0..1.0) / j as f64)
            .collect();
        let k = rng.gen_range(0..=2.min(MAX_T_POWER));
        let rate = rng.gen_range(0.5..10.0);
        w.push(Term::new(SinSeries::new(coeffs), k, rate))
            .expect("random term is valid");
    }
    w
}

/// Minorant test space: sin(i pi x) t^k e^{-r_i t}, k in {0, 1}, with
/// r_i = theta_i^{1/2} for the approximated modes and i pi beyond them.
fn minorant_basis(approx: &SpectralApprox, modes: usize) -> Vec<SeparableField> {
    let mut basis = Vec::with_capacity(2 * modes);
    for i in 1..=modes {
        let rate = approx
            .theta()
            .get(i - 1)
            .map_or(i as f64 * std::f64::consts::PI, |t| t.sqrt());
        for k in 0..2 {
            let term = Term::new(SinSeries::mode(i, 1.0), k, rate);
            basis.push(SeparableField::from_terms([term]).expect("basis term is valid"));
        }
    }
    basis
}

pub fn run_trial(
    spec: &PerturbationSpec,
    domain: &DomainSpec,
    k: usize,
    rng: &mut impl Rng,
) -> Result<TrialRecord> {
    let problem = Problem::new(FractionalOrder::HALF, *domain, spec.rhs())?;
    let exact = problem.exact_solution()?;
    let (da, ea) = spec.amplitudes(k);
    let n = spec.modes_w;
    let lambda = domain.lambdas(n);
    let phi = domain.eigenfunctions(n);
    let theta = perturb_eigenvalues(&lambda, da, rng)?;
    let psi = perturb_eigenfunctions(&phi, ea, rng)?;
    let (delta, eps) = disturbance_metrics(&lambda, &theta, &phi, &psi)?;
    let approx = SpectralApprox::new(theta, psi)?;

    let f = problem.f();
    let w = approx_extension(&approx, f)?;
    let y = candidate_flux(&approx, f)?;
    let errors = exact_errors(&problem, &w, &y, &exact)?;
    let majorant = spectral_majorant(&problem, &approx)?;
    let a8 = spectral_combined(&problem, &approx, spec.alpha, Some(&exact))?;
    let a8_lhs = a8.lhs.expect("exact solution supplied");
    let basis = minorant_basis(&approx, spec.modes_f.max(n));
    let minorant = optimize_minorant(&problem, &w, &basis)?.1.value;

    let (i1, i2) = if errors.energy > ZERO_ERROR_REL * problem.energy_norm(&exact.w)? {
        (majorant / errors.energy, (a8.rhs / a8_lhs).sqrt())
    } else {
        (f64::NAN, f64::NAN)
    };
    let trace_error = w
        .trace()
        .sub(&exact.trace())
        .fractional_norm(problem.order(), domain);
    Ok(TrialRecord {
        k,
        delta,
        eps,
        energy_error: errors.energy,
        flux_error: errors.flux,
        majorant,
        minorant,
        a8_lhs,
        a8_rhs: a8.rhs,
        i1,
        i2,
        trace_error,
        trace_bound: problem.kappa() * majorant,
    })
}

/// Summary of a list of trials; index means skip trials with zero error.
pub fn summarize(spec: &PerturbationSpec, records: &[TrialRecord]) -> SeriesSummary {
    let (mut s1, mut s2) = (Kahan::default(), Kahan::default());
    let mut valid = 0usize;
    for r in records.iter().filter(|r| r.is_valid()) {
        s1.add(r.i1);
        s2.add(r.i2);
        valid += 1;
    }
    let mean = |s: Kahan| {
        if valid > 0 {
            s.sum / valid as f64
        } else {
            f64::NAN
        }
    };
    SeriesSummary {
        n: records.len(),
        m: spec.decay,
        modes_f: spec.modes_f,
        modes_w: spec.modes_w,
        alpha: spec.alpha,
        mean_i1: mean(s1),
        mean_i2: mean(s2),
        delta_max: records.iter().map(|r| r.delta).fold(0.0, f64::max),
        eps_max: records.iter().map(TrialRecord::eps_max).fold(0.0, f64::max),
        excluded: records.len() - valid,
    }
}

/// Runs trials 1..=n in parallel on the current rayon pool.
pub fn run_series(
    spec: &PerturbationSpec,
    domain: &DomainSpec,
) -> Result<(SeriesSummary, Vec<TrialRecord>)> {
    spec.validate(domain)?;
    let records = (1..=spec.n_trials)
        .into_par_iter()
        .map(|k| run_trial(spec, domain, k, &mut trial_rng(spec.seed, k)))
        .collect::<Result<Vec<_>>>()?;
    Ok((summarize(spec, &records), records))
}
