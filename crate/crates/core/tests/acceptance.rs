//! Acceptance suite. Prints one PASS/FAIL line per criterion with its
//! sub-checks underneath. A failed criterion makes the process exit 1
//! only when ACCEPTANCE_STRICT=1 is set.

#![allow(clippy::excessive_precision)]

use std::time::Instant;

use fracbound::cli::write_trials;
use fracbound::constants::{
    extension_constant, friedrichs_constant, kappa, DomainSpec, FractionalOrder,
};
use fracbound::experiments::{run_series, PerturbationSpec, SeriesSummary, TrialRecord};
use fracbound::quadrature::{compare_random_fields, QuadratureSpec};
use fracbound::verify::{
    combined_and_trace_suite, energy_identity_suite, hypercircle_suite, identity_suite,
    lemma_suite, nested_minorant_suite, ordering_suite, sharpness_suite, CheckResult, SuiteConfig,
};

/// (s, C_s, kappa_s) from a 40-digit mpmath evaluation.
const GAMMA_ORACLE: [(f64, f64, f64); 19] = [
    (0.05, 0.098857294020701539, 3.1805017636455659),
    (0.1, 0.19557356719531744, 2.2612309514196441),
    (0.15, 0.29053953083424975, 1.8552284027973339),
    (0.2, 0.38438299689988675, 1.6129388986275332),
    (0.25, 0.477988797486125, 1.4464090846320771),
    (0.3, 0.57254045856831173, 1.3215905033424783),
    (0.35, 0.66959322016593645, 1.222065478689095),
    (0.4, 0.7711946110006629, 1.1387227752820367),
    (0.45, 0.88008082308694325, 1.0659546319111213),
    (0.5, 1.0, 1.0),
    (0.55, 1.1362592772927742, 0.9381262298256793),
    (0.6, 1.2966895589460238, 0.87817686772122556),
    (0.65, 1.4934440342036068, 0.81828675912905767),
    (0.7, 1.7466014585250251, 0.75666403282322844),
    (0.75, 2.0920992401062033, 0.69136733903629335),
    (0.8, 2.6015718907057999, 0.61998628767085386),
    (0.85, 3.4418724265459464, 0.53901718973911189),
    (0.9, 5.1131654156581887, 0.44223700342160135),
    (0.95, 10.115591468552555, 0.3144157979820695),
];

struct Sub {
    name: String,
    ok: bool,
    detail: String,
}

fn sub(name: impl Into<String>, ok: bool, detail: impl Into<String>) -> Sub {
    Sub {
        name: name.into(),
        ok,
        detail: detail.into(),
    }
}

fn from_check(c: &CheckResult) -> Sub {
    sub(
        c.name.clone(),
        c.passed(),
        format!(
            "{} cases, {} failures, worst {:.3e} (threshold {:.1e})",
            c.cases, c.failures, c.worst, c.threshold
        ),
    )
}

fn time_limit(name: &str, secs: f64, limit: f64) -> Sub {
    sub(
        format!("{name} runtime"),
        secs < limit,
        format!("{secs:.2} s (limit {limit} s)"),
    )
}

fn cfg(cases: usize, seed: u64) -> SuiteConfig {
    SuiteConfig {
        cases,
        seed,
        ..Default::default()
    }
}

fn criterion_1() -> Vec<Sub> {
    let half = FractionalOrder::HALF;
    let dc = (extension_constant(half) - 1.0).abs();
    let dk = (kappa(half) - 1.0).abs();
    let df = (friedrichs_constant(&DomainSpec::default()) - 1.0 / std::f64::consts::PI).abs();
    let mut worst: f64 = 0.0;
    for (s, c, k) in GAMMA_ORACLE {
        let s = FractionalOrder::new(s).unwrap();
        worst = worst
            .max((extension_constant(s) - c).abs() / c)
            .max((kappa(s) - k).abs() / k);
    }
    vec![
        sub(
            "C_1/2 = kappa_1/2 = 1",
            dc <= 1e-14 && dk <= 1e-14,
            format!("|C-1| = {dc:.1e}, |kappa-1| = {dk:.1e}"),
        ),
        sub("C_F = 1/pi", df <= 1e-14, format!("diff {df:.1e}")),
        sub(
            "Gamma-oracle grid",
            worst <= 1e-12,
            format!("19 points, worst rel diff {worst:.2e}"),
        ),
    ]
}

fn criterion_2() -> Vec<Sub> {
    let t = Instant::now();
    let c = identity_suite(&cfg(200, 2), 1e-10).unwrap();
    vec![
        from_check(&c),
        time_limit("identity", t.elapsed().as_secs_f64(), 5.0),
    ]
}

fn criterion_3() -> Vec<Sub> {
    let (d, b) = hypercircle_suite(&cfg(50, 3), 1e-12).unwrap();
    vec![from_check(&d), from_check(&b)]
}

fn criterion_4() -> Vec<Sub> {
    let c = cfg(200, 4);
    vec![
        from_check(&ordering_suite(&c, 1e-12).unwrap()),
        from_check(&sharpness_suite(&c, 1e-12).unwrap()),
        from_check(&nested_minorant_suite(&cfg(50, 4)).unwrap()),
    ]
}

fn criterion_5() -> Vec<Sub> {
    vec![from_check(
        &energy_identity_suite(&cfg(200, 5), 1e-12).unwrap(),
    )]
}

fn criterion_6() -> Vec<Sub> {
    let c = cfg(100, 6);
    [0.3, 0.5, 0.7]
        .into_iter()
        .flat_map(|s| lemma_suite(&c, FractionalOrder::new(s).unwrap(), 1e-12).unwrap())
        .map(|r| from_check(&r))
        .collect()
}

fn criterion_7() -> Vec<Sub> {
    let t = Instant::now();
    let spec = QuadratureSpec::default();
    let mut out = Vec::new();
    for s in [0.3, 0.5, 0.7] {
        let cmp = compare_random_fields(FractionalOrder::new(s).unwrap(), 50, 7, &spec).unwrap();
        let worst = cmp.iter().map(|c| c.rel_diff).fold(0.0, f64::max);
        let est = cmp.iter().map(|c| c.error_estimate).fold(0.0, f64::max);
        out.push(sub(
            format!("quadrature agreement, s = {s}"),
            worst < 1e-6,
            format!("{} norms on 50 fields, worst rel diff {worst:.2e}, quadrature error estimate {est:.2e}", cmp.len()),
        ));
    }
    out.push(time_limit("oracle", t.elapsed().as_secs_f64(), 30.0));
    out
}

fn series(spec: &PerturbationSpec) -> (SeriesSummary, Vec<TrialRecord>, f64) {
    let t = Instant::now();
    let (s, r) = run_series(spec, &DomainSpec::default()).unwrap();
    (s, r, t.elapsed().as_secs_f64())
}

fn row1() -> PerturbationSpec {
    PerturbationSpec::new(12, 12, 1.0, 80, 0.5)
}

fn truncation() -> PerturbationSpec {
    PerturbationSpec::new(10, 8, 1.0, 20, 0.3)
}

fn criterion_8_and_9() -> (Vec<Sub>, Vec<Sub>) {
    let (s1, r1, t1) = series(&row1());
    let (s2, r2, t2) = series(&truncation());
    let every =
        |r: &[TrialRecord], p: fn(&TrialRecord) -> bool| r.iter().filter(|t| t.is_valid()).all(p);
    let describe = |s: &SeriesSummary| {
        format!(
            "mean I1 {:.3}, mean I2 {:.3}, delta_max {:.4}, eps_max {:.4}, excluded {}",
            s.mean_i1, s.mean_i2, s.delta_max, s.eps_max, s.excluded
        )
    };
    let c8 = vec![
        sub("row 1 summary", true, describe(&s1)),
        sub("truncation summary", true, describe(&s2)),
        sub(
            "row 1 mean I1 in [1.2, 4.0]",
            (1.2..=4.0).contains(&s1.mean_i1),
            format!("{:.4}", s1.mean_i1),
        ),
        sub(
            "row 1 mean I2 in [2.0, 6.0]",
            (2.0..=6.0).contains(&s1.mean_i2),
            format!("{:.4}", s1.mean_i2),
        ),
        sub(
            "every trial I1 >= 1",
            every(&r1, |t| t.i1 >= 1.0) && every(&r2, |t| t.i1 >= 1.0),
            format!("{} + {} trials", r1.len(), r2.len()),
        ),
        sub(
            "every trial satisfies the combined upper inequality",
            every(&r1, |t| t.a8_lhs <= t.a8_rhs * (1.0 + 1e-12))
                && every(&r2, |t| t.a8_lhs <= t.a8_rhs * (1.0 + 1e-12)),
            "",
        ),
        sub(
            "truncation mean I1 > row 1 mean I1",
            s2.mean_i1 > s1.mean_i1,
            format!("{:.4} vs {:.4}", s2.mean_i1, s1.mean_i1),
        ),
        time_limit("row 1 series", t1, 10.0),
        time_limit("truncation series", t2, 10.0),
    ];
    let trace_ok = |r: &[TrialRecord]| {
        r.iter()
            .map(|t| t.trace_error - t.trace_bound * (1.0 + 1e-12))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let (_, tr) = combined_and_trace_suite(&cfg(200, 9), 1e-12).unwrap();
    let v1 = trace_ok(&r1).max(trace_ok(&r2));
    let c9 = vec![
        from_check(&tr),
        sub(
            "trace bound on experiment trials",
            v1 <= 0.0,
            format!(
                "{} trials, max (error - bound) {v1:.3e}",
                r1.len() + r2.len()
            ),
        ),
    ];
    (c8, c9)
}

fn csv_bytes(spec: &PerturbationSpec, threads: usize) -> Vec<u8> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap();
    let (_, records) = pool
        .install(|| run_series(spec, &DomainSpec::default()))
        .unwrap();
    let mut buf = Vec::new();
    write_trials(&mut buf, &records).unwrap();
    buf
}

fn criterion_10() -> Vec<Sub> {
    [row1(), truncation()]
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let base = csv_bytes(spec, 1);
            let same = [2, 3, 8].iter().all(|&n| csv_bytes(spec, n) == base);
            sub(
                format!("series {} CSV identical for 1, 2, 3, 8 threads", i + 1),
                same,
                format!("{} bytes", base.len()),
            )
        })
        .collect()
}

fn main() {
    let mut results: Vec<(usize, &str, Vec<Sub>, f64)> = Vec::new();
    let mut run = |id: usize, name: &'static str, f: &dyn Fn() -> Vec<Sub>| {
        let t = Instant::now();
        let subs = f();
        results.push((id, name, subs, t.elapsed().as_secs_f64()));
    };
    run(1, "constants", &criterion_1);
    run(2, "error identity", &criterion_2);
    run(3, "hypercircle", &criterion_3);
    run(4, "majorant/minorant ordering", &criterion_4);
    run(5, "energy identity", &criterion_5);
    run(6, "Friedrichs and trace inequalities", &criterion_6);
    run(7, "oracle equivalence", &criterion_7);
    let t = Instant::now();
    let (c8, c9) = criterion_8_and_9();
    let el = t.elapsed().as_secs_f64();
    results.push((8, "perturbation series regression", c8, el));
    results.push((9, "trace bounds", c9, 0.0));
    let t = Instant::now();
    let c10 = criterion_10();
    results.push((10, "determinism", c10, t.elapsed().as_secs_f64()));

    let mut failed = 0;
    for (id, name, subs, secs) in &results {
        let ok = subs.iter().all(|s| s.ok);
        failed += usize::from(!ok);
        println!(
            "[{}] criterion {id}: {name} ({secs:.2} s)",
            if ok { "PASS" } else { "FAIL" }
        );
        for s in subs {
            println!(
                "    [{}] {}: {}",
                if s.ok { "ok" } else { "FAIL" },
                s.name,
                s.detail
            );
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
