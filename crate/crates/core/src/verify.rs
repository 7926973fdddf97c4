//! Seeded randomized suites for the identities and inequalities of the
//! estimators. Each suite returns a [`CheckResult`] with the worst observed
//! metric so callers can print residuals as well as pass/fail counts.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::constants::{DomainSpec, FractionalOrder};
use crate::error::Result;
use crate::estimators::{
    energy_functional, error_identity, exact_errors, hypercircle_bound, lemma_values, majorant,
    minorant, optimize_minorant, trace_error_bounds, two_sided_combined, ExactSolution, Problem,
};
use crate::experiments::{random_approx, random_field, random_stream_modes, trial_rng};
use crate::fields::{
    approx_extension, candidate_flux, yg_flux, SeparableField, SeparableFlux, Term,
};
use crate::series::SinSeries;

/// Deliberate defects for exercising the failure path of the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    /// Scales the majorant by 1e-3 before the ordering check.
    ShrinkMajorant,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    /// Largest observed residual or violation.
    pub worst: f64,
    pub threshold: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }

    fn collect(name: &str, threshold: f64, metrics: Vec<f64>) -> Self {
        let failures = metrics.iter().filter(|m| !(**m <= threshold)).count();
        let worst = metrics
            .iter()
            .copied()
            .fold(0.0, |a, b| if b.is_nan() { f64::NAN } else { a.max(b) });
        Self {
            name: name.to_string(),
            cases: metrics.len(),
            failures,
            worst,
            threshold,
        }
    }
}

/// Settings shared by the suites.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteConfig {
    pub seed: u64,
    pub cases: usize,
    /// Largest eigenvalue and eigenfunction disturbance of random trials.
    pub max_disturbance: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub domain: DomainSpec,
    pub fault: Fault,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            cases: 100,
            max_disturbance: 0.05,
            alpha1: 0.25,
            alpha2: 0.25,
            domain: DomainSpec::default(),
            fault: Fault::None,
        }
    }
}

/// A randomized s = 1/2 trial: problem, exact solution, spectral w~ and
/// the candidate flux with stream perturbations.
pub struct RandomTrial {
    pub problem: Problem,
    pub exact: ExactSolution,
    pub w: SeparableField,
    pub y: SeparableFlux,
}

/// Draws a trial; `zero_disturbance` gives exact eigenpairs and N = M.
pub fn random_trial(cfg: &SuiteConfig, case: usize, zero_disturbance: bool) -> Result<RandomTrial> {
    let mut rng = trial_rng(cfg.seed, case);
    let modes_f = rng.gen_range(4..=12);
    let decay = if rng.gen_bool(0.5) { 1.0 } else { 2.0 };
    let (modes_w, delta, eps) = if zero_disturbance {
        (modes_f, 0.0, 0.0)
    } else {
        let lo = 0.2 * cfg.max_disturbance;
        (
            rng.gen_range(modes_f - 2..=modes_f),
            rng.gen_range(lo..=cfg.max_disturbance),
            rng.gen_range(lo..=cfg.max_disturbance),
        )
    };
    let problem = Problem::new(
        FractionalOrder::HALF,
        cfg.domain,
        SinSeries::power_decay(decay, modes_f),
    )?;
    let exact = problem.exact_solution()?;
    let approx = random_approx(&cfg.domain, modes_w, delta, eps, &mut rng)?;
    let w = approx_extension(&approx, problem.f())?;
    let mut y = candidate_flux(&approx, problem.f())?;
    if !zero_disturbance {
        for mode in random_stream_modes(3, 0.05, &mut rng) {
            y = y.add(&mode.flux()?);
        }
    }
    Ok(RandomTrial {
        problem,
        exact,
        w,
        y,
    })
}

fn run_cases<F>(cfg: &SuiteConfig, f: F) -> Result<Vec<f64>>
where
    F: Fn(usize) -> Result<Vec<f64>> + Sync,
{
    let per_case = (0..cfg.cases)
        .into_par_iter()
        .map(&f)
        .collect::<Result<Vec<_>>>()?;
    Ok(per_case.into_iter().flatten().collect())
}

/// Relative residual of the primal-dual error identity. A gradient of a
/// random field is added to y so that the volume term is exercised.
pub fn identity_suite(cfg: &SuiteConfig, threshold: f64) -> Result<CheckResult> {
    let m = run_cases(cfg, |i| {
        let t = random_trial(cfg, i, false)?;
        let mut rng = trial_rng(cfg.seed ^ 0x1d, i);
        let bump = random_field(2, 4, &mut rng).gradient().scaled(0.02);
        let y = t.y.add(&bump);
        Ok(vec![
            error_identity(&t.problem, &t.w, &y, &t.exact)?.residual,
        ])
    })?;
    Ok(CheckResult::collect("error identity", threshold, m))
}

/// Members of the equilibrated set (p plus stream modes): the bound
/// |||grad e_w|||^2 <= mixed^2 and the decomposition mixed^2 = E^2 + F^2.
pub fn hypercircle_suite(cfg: &SuiteConfig, threshold: f64) -> Result<(CheckResult, CheckResult)> {
    let pairs = (0..cfg.cases)
        .into_par_iter()
        .map(|i| {
            let t = random_trial(cfg, i, false)?;
            let mut rng = trial_rng(cfg.seed ^ 0x2e, i);
            let modes = random_stream_modes(4, 0.1, &mut rng);
            let y = yg_flux(&t.exact.p, t.problem.g(), &modes)?;
            let bound = hypercircle_bound(&t.problem, &t.w, &y)?;
            let e = exact_errors(&t.problem, &t.w, y.flux(), &t.exact)?;
            let e2 = e.energy.powi(2);
            let decomposition = (bound - e2 - e.flux.powi(2)).abs() / bound.max(1e-30);
            let violation = ((e2 - bound) / bound.max(1e-30)).max(0.0);
            Ok((decomposition, violation))
        })
        .collect::<Result<Vec<_>>>()?;
    let (d, v): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok((
        CheckResult::collect("hypercircle decomposition", threshold, d),
        CheckResult::collect("hypercircle bound", 0.0, v),
    ))
}

/// Violations of M-(eta) <= |||grad e_w||| <= M+, with absolute slack.
pub fn ordering_suite(cfg: &SuiteConfig, slack: f64) -> Result<CheckResult> {
    let m = run_cases(cfg, |i| {
        let t = random_trial(cfg, i, false)?;
        let mut rng = trial_rng(cfg.seed ^ 0x3f, i);
        let e = t.w.sub(&t.exact.w);
        let energy = t.problem.energy_norm(&e)?;
        let mut maj = majorant(&t.problem, &t.w, &t.y)?.value;
        if cfg.fault == Fault::ShrinkMajorant {
            maj *= 1e-3;
        }
        let mut out = vec![(energy - maj).max(0.0)];
        for _ in 0..3 {
            let mut eta = e.scaled(rng.gen_range(-0.5..1.5));
            eta.axpy(0.01, &random_field(2, 6, &mut rng));
            let lo = minorant(&t.problem, &t.w, &eta)?.value;
            out.push((lo - energy).max(0.0));
        }
        Ok(out
            .into_iter()
            .map(|v| if v > slack { v } else { 0.0 })
            .collect())
    })?;
    Ok(CheckResult::collect(
        "minorant <= error <= majorant",
        0.0,
        m,
    ))
}

/// Sharpness: M+(w~; p) and M-(w~; w~ - w) both equal the error.
pub fn sharpness_suite(cfg: &SuiteConfig, threshold: f64) -> Result<CheckResult> {
    let m = run_cases(cfg, |i| {
        let t = random_trial(cfg, i, false)?;
        let e = t.w.sub(&t.exact.w);
        let energy = t.problem.energy_norm(&e)?;
        let up = majorant(&t.problem, &t.w, &t.exact.p)?.value;
        let lo = minorant(&t.problem, &t.w, &e)?.value;
        Ok(vec![
            (up - energy).abs() / energy,
            (lo - energy).abs() / energy,
        ])
    })?;
    Ok(CheckResult::collect(
        "sharp bounds at y = p and eta = e_w",
        threshold,
        m,
    ))
}

/// Values of the optimized minorant must not decrease as the basis grows.
pub fn nested_minorant_suite(cfg: &SuiteConfig) -> Result<CheckResult> {
    let m = run_cases(cfg, |i| {
        let t = random_trial(cfg, i, false)?;
        let basis: Vec<SeparableField> = (1..=6)
            .flat_map(|j| {
                let rate = j as f64 * std::f64::consts::PI * 1.01;
                (0..2).map(move |k| {
                    SeparableField::from_terms([Term::new(SinSeries::mode(j, 1.0), k, rate)])
                        .expect("basis term is valid")
                })
            })
            .collect();
        let mut prev = 0.0;
        let mut drops = Vec::new();
        for n in 1..=basis.len() {
            let v = optimize_minorant(&t.problem, &t.w, &basis[..n])?.1.squared;
            drops.push((prev - v).max(0.0) / prev.abs().max(1e-30));
            prev = v;
        }
        Ok(drops)
    })?;
    Ok(CheckResult::collect(
        "nested minorant monotonicity",
        1e-12,
        m,
    ))
}

/// J(w~) - J(w) = |||grad (w~ - w)|||^2 / 2 on w~ = w + random field.
pub fn energy_identity_suite(cfg: &SuiteConfig, threshold: f64) -> Result<CheckResult> {
    let m = run_cases(cfg, |i| {
        let t = random_trial(cfg, i, true)?;
        let mut rng = trial_rng(cfg.seed ^ 0x4a, i);
        let w = t.exact.w.add(&random_field(3, 8, &mut rng).scaled(0.3));
        let half_e2 = 0.5 * t.problem.energy_norm(&w.sub(&t.exact.w))?.powi(2);
        let dj = energy_functional(&t.problem, &w)? - energy_functional(&t.problem, &t.exact.w)?;
        Ok(vec![(dj - half_e2).abs() / half_e2])
    })?;
    Ok(CheckResult::collect("energy identity", threshold, m))
}

/// Friedrichs, trace energy and L2 trace inequalities on random fields at
/// order s, plus the trace energy equality for exact extensions at 1/2.
pub fn lemma_suite(cfg: &SuiteConfig, s: FractionalOrder, rel: f64) -> Result<Vec<CheckResult>> {
    let problem = Problem::new(s, cfg.domain, SinSeries::power_decay(1.0, 4))?;
    let values = (0..cfg.cases)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(cfg.seed ^ 0x5b, i);
            let v = random_field(rng.gen_range(1..=4), rng.gen_range(1..=8), &mut rng);
            lemma_values(&problem, &v)
        })
        .collect::<Result<Vec<_>>>()?;
    let flag = |ok: bool| if ok { 0.0 } else { 1.0 };
    let sv = s.value();
    let mut out = vec![
        CheckResult::collect(
            &format!("weighted Friedrichs, s = {sv}"),
            0.0,
            values
                .iter()
                .map(|l| flag(l.friedrichs_holds(rel)))
                .collect(),
        ),
        CheckResult::collect(
            &format!("trace energy inequality, s = {sv}"),
            0.0,
            values
                .iter()
                .map(|l| flag(l.trace_energy_holds(rel)))
                .collect(),
        ),
        CheckResult::collect(
            &format!("L2 trace bound, s = {sv}"),
            0.0,
            values.iter().map(|l| flag(l.trace_l2_holds(rel))).collect(),
        ),
    ];
    if s.is_half() {
        let gaps = (0..cfg.cases)
            .into_par_iter()
            .map(|i| {
                let mut rng = trial_rng(cfg.seed ^ 0x6c, i);
                let n = rng.gen_range(1..=16);
                let f = SinSeries::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
                let p = Problem::new(s, cfg.domain, f)?;
                let w = p.exact_solution()?.w;
                Ok(lemma_values(&p, &w)?.trace_energy_gap())
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(CheckResult::collect(
            "trace energy equality, s = 0.5",
            1e-12,
            gaps,
        ));
    }
    Ok(out)
}

/// Both combined estimates with (alpha1, alpha2) and the trace bound
/// ||e_u||_s <= kappa_s M+.
pub fn combined_and_trace_suite(
    cfg: &SuiteConfig,
    slack: f64,
) -> Result<(CheckResult, CheckResult)> {
    let pairs = (0..cfg.cases)
        .into_par_iter()
        .map(|i| {
            let t = random_trial(cfg, i, false)?;
            let (up, lo) = two_sided_combined(
                &t.problem,
                &t.w,
                &t.y,
                Some(&t.exact),
                cfg.alpha1,
                cfg.alpha2,
            )?;
            let ok = up.upper_holds(slack) == Some(true) && lo.lower_holds(slack) == Some(true);
            let b = trace_error_bounds(
                &t.problem,
                &t.w,
                &t.y,
                &SeparableField::zero(),
                Some(&t.exact),
            )?;
            let trace_violation = (b.exact.unwrap_or(f64::NAN) - b.upper).max(0.0);
            Ok((
                if ok { 0.0 } else { 1.0 },
                if trace_violation > slack {
                    trace_violation
                } else {
                    0.0
                },
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let (c, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok((
        CheckResult::collect("combined two-sided estimates", 0.0, c),
        CheckResult::collect("trace error bound", 0.0, t),
    ))
}

/// With exact eigenpairs and N = M every error quantity vanishes.
pub fn exact_data_suite(cfg: &SuiteConfig, threshold: f64) -> Result<CheckResult> {
    let m = run_cases(cfg, |i| {
        let t = random_trial(cfg, i, true)?;
        let e = exact_errors(&t.problem, &t.w, &t.y, &t.exact)?;
        let maj = majorant(&t.problem, &t.w, &t.y)?.value;
        Ok(vec![e.energy, e.flux, maj])
    })?;
    Ok(CheckResult::collect(
        "exact data gives zero error",
        threshold,
        m,
    ))
}

/// Every suite with default thresholds.
pub fn run_all(cfg: &SuiteConfig) -> Result<Vec<CheckResult>> {
    let mut out = vec![identity_suite(cfg, 1e-10)?];
    let (d, b) = hypercircle_suite(cfg, 1e-12)?;
    out.extend([d, b]);
    out.push(ordering_suite(cfg, 1e-12)?);
    out.push(sharpness_suite(cfg, 1e-12)?);
    out.push(nested_minorant_suite(cfg)?);
    out.push(energy_identity_suite(cfg, 1e-12)?);
    for s in [0.3, 0.5, 0.7] {
        out.extend(lemma_suite(cfg, FractionalOrder::new(s)?, 1e-12)?);
    }
    let (c, t) = combined_and_trace_suite(cfg, 1e-12)?;
    out.extend([c, t]);
    out.push(exact_data_suite(cfg, 1e-14)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SuiteConfig {
        SuiteConfig {
            cases: 12,
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn all_suites_pass() {
        for c in run_all(&small()).unwrap() {
            assert!(c.passed(), "{c:?}");
        }
    }

    #[test]
    fn fault_is_detected() {
        let cfg = SuiteConfig {
            fault: Fault::ShrinkMajorant,
            ..small()
        };
        assert!(!ordering_suite(&cfg, 1e-12).unwrap().passed());
    }

    #[test]
    fn trials_reproducible() {
        let a = random_trial(&small(), 4, false).unwrap();
        let b = random_trial(&small(), 4, false).unwrap();
        assert_eq!(a.w, b.w);
        assert_eq!(a.y, b.y);
    }
}
