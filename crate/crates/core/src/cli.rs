//! Command-line front end.
//!
//! Configuration is a flat TOML file (every key optional, unknown keys
//! rejected) with `--set key=value` overrides applied on top. Exit codes:
//! 0 success, 1 configuration or I/O error, 2 verification failure,
//! 3 numerical domain error.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::constants::{extension_constant, kappa, DomainSpec, FractionalOrder};
use crate::error::Error;
use crate::estimators::Problem;
use crate::experiments::{
    run_series, AmplitudeGrowth, PerturbationSpec, SeriesSummary, TrialRecord, DEFAULT_DELTA0,
    DEFAULT_EPS0,
};
use crate::quadrature::{compare_random_fields, QuadratureSpec};
use crate::series::SinSeries;
use crate::verify::{run_all, Fault, SuiteConfig};

/// Version of the trial CSV and summary layouts.
pub const SCHEMA_VERSION: u32 = 1;

pub const TRIAL_HEADER: [&str; 9] = [
    "k",
    "delta",
    "eps_max",
    "energy_error",
    "flux_error",
    "majorant",
    "minorant",
    "I1",
    "I2",
];

pub const SUMMARY_HEADER: [&str; 9] = [
    "n",
    "m",
    "M",
    "N",
    "alpha",
    "I1",
    "I2",
    "delta_max",
    "eps_max",
];

/// Oracle acceptance thresholds.
pub const ORACLE_REL_TOL: f64 = 1e-6;
pub const ORACLE_ESTIMATE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub s: f64,
    /// Decay exponent of f.
    pub m: f64,
    #[serde(rename = "M")]
    pub modes_f: usize,
    #[serde(rename = "N")]
    pub modes_w: usize,
    pub alpha: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub n_trials: usize,
    /// At most i64::MAX (TOML integers are signed).
    pub seed: u64,
    pub delta0: f64,
    pub eps0: f64,
    pub growth: AmplitudeGrowth,
    pub max_modes: usize,
    pub verify_cases: usize,
    pub max_disturbance: f64,
    pub oracle_fields: usize,
    pub s_min: f64,
    pub s_max: f64,
    pub s_step: f64,
    pub nx: usize,
    pub nt: usize,
    pub t_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field_output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            s: 0.5,
            m: 1.0,
            modes_f: 12,
            modes_w: 12,
            alpha: 0.5,
            alpha1: 0.25,
            alpha2: 0.25,
            n_trials: 80,
            seed: 0,
            delta0: DEFAULT_DELTA0,
            eps0: DEFAULT_EPS0,
            growth: AmplitudeGrowth::Linear,
            max_modes: 64,
            verify_cases: 100,
            max_disturbance: 0.05,
            oracle_fields: 50,
            s_min: 0.05,
            s_max: 0.95,
            s_step: 0.05,
            nx: 41,
            nt: 41,
            t_max: 1.0,
            output: None,
            summary: None,
            field_output: None,
        }
    }
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Verification(String),
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Verification(_) => 2,
            CliError::Domain(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
            CliError::Domain(m) => write!(f, "numerical error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidOrder(_)
            | Error::InvalidParameter(_)
            | Error::LengthMismatch { .. }
            | Error::UnsupportedOrder(_) => CliError::Config(e.to_string()),
            Error::Domain(_)
            | Error::NotEquilibrated(_)
            | Error::Consistency(_)
            | Error::DegenerateBasis(_) => CliError::Domain(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

type CliResult<T> = std::result::Result<T, CliError>;

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let table: toml::Table = text.parse().map_err(|e| CliError::Config(format!("{e}")))?;
        Self::from_table(table)
    }

    fn from_table(table: toml::Table) -> CliResult<Self> {
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// File contents (if any) with `key=value` overrides applied.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> CliResult<Self> {
        let mut table = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for item in overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("override `{item}` is not key=value")))?;
            let key = key.trim();
            let value = value.trim();
            // bare words that are not TOML literals are taken as strings
            let parsed = format!("v = {value}")
                .parse::<toml::Table>()
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(value.to_string()));
            table.insert(key.to_string(), parsed);
        }
        Self::from_table(table)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        FractionalOrder::new(self.s)?;
        let domain = DomainSpec::new(self.max_modes)?;
        self.perturbation_spec().validate(&domain)?;
        if !(self.alpha1 > 0.0 && self.alpha2 > 0.0 && self.alpha1 + self.alpha2 < 1.0) {
            return bad(format!(
                "alpha1 = {}, alpha2 = {} must be positive with sum below 1",
                self.alpha1, self.alpha2
            ));
        }
        if self.seed > i64::MAX as u64 {
            return bad(format!(
                "seed = {} exceeds the TOML integer range",
                self.seed
            ));
        }
        if self.verify_cases == 0 || self.oracle_fields == 0 {
            return bad("verify_cases and oracle_fields must be positive".into());
        }
        if !(self.max_disturbance > 0.0 && self.max_disturbance < 1.0) {
            return bad(format!(
                "max_disturbance = {} must lie in (0, 1)",
                self.max_disturbance
            ));
        }
        if !(self.s_step > 0.0 && self.s_min <= self.s_max) {
            return bad("s grid needs s_step > 0 and s_min <= s_max".into());
        }
        if self.nx < 2 || self.nt < 2 || !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return bad("sampling grid needs nx, nt >= 2 and t_max > 0".into());
        }
        Ok(())
    }

    pub fn domain(&self) -> DomainSpec {
        DomainSpec::new(self.max_modes).expect("validated")
    }

    pub fn perturbation_spec(&self) -> PerturbationSpec {
        PerturbationSpec {
            modes_f: self.modes_f,
            modes_w: self.modes_w,
            decay: self.m,
            delta0: self.delta0,
            eps0: self.eps0,
            n_trials: self.n_trials,
            alpha: self.alpha,
            seed: self.seed,
            growth: self.growth,
        }
    }

    /// s_min, s_min + s_step, ..., up to s_max.
    pub fn s_grid(&self) -> Vec<f64> {
        let n = ((self.s_max - self.s_min) / self.s_step + 1e-9).floor() as usize;
        (0..=n)
            .map(|i| self.s_min + i as f64 * self.s_step)
            .collect()
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "fracbound",
    version,
    about = "Guaranteed error bounds for the spectral fractional Laplacian on (0, 1)"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Flat TOML configuration file.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set M=10`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate C_s and kappa_s on the s grid.
    Constants {
        #[command(flatten)]
        common: Common,
        /// Plot-data output (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the randomized identity and inequality suites.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Corrupt the majorant to check that failures are reported.
        #[arg(long)]
        inject_fault: bool,
    },
    /// Sample the exact extension w and w_t (s = 1/2).
    Solve {
        #[command(flatten)]
        common: Common,
        /// Plot-data output (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON dump of the separable field.
        #[arg(long)]
        field: Option<PathBuf>,
    },
    /// Run a perturbation series and write per-trial CSV plus a summary.
    Experiment {
        #[command(flatten)]
        common: Common,
        /// Per-trial CSV (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Summary CSV (default: stderr).
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Compare closed-form norms with brute-force quadrature.
    OracleCheck {
        #[command(flatten)]
        common: Common,
    },
}

/// Formats a float with 17 significant digits; NaN as `NaN`.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn open_out(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    match path {
        Some(p) => {
            let f = fs::File::create(p).map_err(|e| io_err(p, e))?;
            Ok(Box::new(io::BufWriter::new(f)))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    match threads {
        Some(0) => Err(CliError::Config("--threads must be positive".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Writes the trial table; `out` receives exactly the bytes of the CSV.
pub fn write_trials(out: impl Write, records: &[TrialRecord]) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let err = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(TRIAL_HEADER).map_err(err)?;
    for r in records {
        w.write_record([
            r.k.to_string(),
            fmt_num(r.delta),
            fmt_num(r.eps_max()),
            fmt_num(r.energy_error),
            fmt_num(r.flux_error),
            fmt_num(r.majorant),
            fmt_num(r.minorant),
            fmt_num(r.i1),
            fmt_num(r.i2),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

pub fn write_summary(out: impl Write, s: &SeriesSummary) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let err = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(SUMMARY_HEADER).map_err(err)?;
    w.write_record([
        s.n.to_string(),
        fmt_num(s.m),
        s.modes_f.to_string(),
        s.modes_w.to_string(),
        fmt_num(s.alpha),
        fmt_num(s.mean_i1),
        fmt_num(s.mean_i2),
        fmt_num(s.delta_max),
        fmt_num(s.eps_max),
    ])
    .map_err(err)?;
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

fn cmd_constants(cfg: &RunConfig, out: Option<&Path>) -> CliResult<()> {
    let grid = cfg.s_grid();
    let orders = grid
        .iter()
        .map(|&s| FractionalOrder::new(s))
        .collect::<Result<Vec<_>, _>>()?;
    let mut w = open_out(out)?;
    let p = out.unwrap_or(Path::new("<stdout>"));
    writeln!(w, "# s C_s kappa_s").map_err(|e| io_err(p, e))?;
    for s in orders {
        writeln!(
            w,
            "{} {} {}",
            fmt_num(s.value()),
            fmt_num(extension_constant(s)),
            fmt_num(kappa(s))
        )
        .map_err(|e| io_err(p, e))?;
    }
    w.flush().map_err(|e| io_err(p, e))
}

fn cmd_verify(cfg: &RunConfig, threads: Option<usize>, fault: bool) -> CliResult<()> {
    let suite = SuiteConfig {
        seed: cfg.seed,
        cases: cfg.verify_cases,
        max_disturbance: cfg.max_disturbance,
        alpha1: cfg.alpha1,
        alpha2: cfg.alpha2,
        domain: cfg.domain(),
        fault: if fault {
            Fault::ShrinkMajorant
        } else {
            Fault::None
        },
    };
    let checks = with_threads(threads, || run_all(&suite))??;
    let mut failed = 0;
    for c in &checks {
        let tag = if c.passed() { "PASS" } else { "FAIL" };
        println!(
            "[{tag}] {}: cases={} failures={} worst={} threshold={}",
            c.name,
            c.cases,
            c.failures,
            fmt_num(c.worst),
            fmt_num(c.threshold)
        );
        failed += usize::from(!c.passed());
    }
    if failed > 0 {
        return Err(CliError::Verification(format!(
            "{failed} of {} checks failed",
            checks.len()
        )));
    }
    Ok(())
}

fn cmd_solve(cfg: &RunConfig, out: Option<&Path>, field: Option<&Path>) -> CliResult<()> {
    let s = FractionalOrder::new(cfg.s)?;
    let domain = cfg.domain();
    let problem = Problem::new(s, domain, SinSeries::power_decay(cfg.m, cfg.modes_f))?;
    let w = problem.exact_solution()?.w;
    let wt = w.t_derivative();
    let mut o = open_out(out)?;
    let p = out.unwrap_or(Path::new("<stdout>"));
    let e = |e: io::Error| io_err(p, e);
    writeln!(o, "# x t w w_t").map_err(e)?;
    for i in 0..cfg.nx {
        let x = i as f64 / (cfg.nx - 1) as f64;
        for j in 0..cfg.nt {
            let t = cfg.t_max * j as f64 / (cfg.nt - 1) as f64;
            writeln!(
                o,
                "{} {} {} {}",
                fmt_num(x),
                fmt_num(t),
                fmt_num(w.eval(x, t)),
                fmt_num(wt.eval(x, t))
            )
            .map_err(e)?;
        }
        writeln!(o).map_err(e)?;
    }
    o.flush().map_err(e)?;
    if let Some(fp) = field {
        fs::write(fp, w.to_json()).map_err(|e| io_err(fp, e))?;
    }
    Ok(())
}

fn cmd_experiment(
    cfg: &RunConfig,
    threads: Option<usize>,
    out: Option<&Path>,
    summary: Option<&Path>,
) -> CliResult<()> {
    let spec = cfg.perturbation_spec();
    let domain = cfg.domain();
    let (sum, records) = with_threads(threads, || run_series(&spec, &domain))??;
    write_trials(open_out(out)?, &records)?;
    match summary {
        Some(p) => write_summary(open_out(Some(p))?, &sum)?,
        None => write_summary(io::stderr().lock(), &sum)?,
    }
    if sum.excluded > 0 {
        eprintln!(
            "{} trial(s) with zero error excluded from the index means",
            sum.excluded
        );
    }
    Ok(())
}

fn cmd_oracle(cfg: &RunConfig, threads: Option<usize>) -> CliResult<()> {
    let spec = QuadratureSpec::default();
    let mut bad = 0;
    for s in [0.3, 0.5, 0.7] {
        let order = FractionalOrder::new(s)?;
        let cmp = with_threads(threads, || {
            compare_random_fields(order, cfg.oracle_fields, cfg.seed, &spec)
        })??;
        let worst = cmp.iter().map(|c| c.rel_diff).fold(0.0, f64::max);
        let est = cmp.iter().map(|c| c.error_estimate).fold(0.0, f64::max);
        let ok = worst < ORACLE_REL_TOL && est < ORACLE_ESTIMATE_TOL;
        bad += usize::from(!ok);
        println!(
            "[{}] s = {s}: {} comparisons, max rel diff {}, max rel error estimate {}",
            if ok { "PASS" } else { "FAIL" },
            cmp.len(),
            fmt_num(worst),
            fmt_num(est)
        );
    }
    if bad > 0 {
        return Err(CliError::Verification("oracle disagreement".into()));
    }
    Ok(())
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Constants { common, out } => {
            let cfg = RunConfig::load(common.config.as_deref(), &common.set)?;
            cmd_constants(&cfg, out.as_deref().or(cfg.output.as_deref()))
        }
        Command::Verify {
            common,
            inject_fault,
        } => {
            let cfg = RunConfig::load(common.config.as_deref(), &common.set)?;
            cmd_verify(&cfg, common.threads, inject_fault)
        }
        Command::Solve { common, out, field } => {
            let cfg = RunConfig::load(common.config.as_deref(), &common.set)?;
            cmd_solve(
                &cfg,
                out.as_deref().or(cfg.output.as_deref()),
                field.as_deref().or(cfg.field_output.as_deref()),
            )
        }
        Command::Experiment {
            common,
            out,
            summary,
        } => {
            let cfg = RunConfig::load(common.config.as_deref(), &common.set)?;
            cmd_experiment(
                &cfg,
                common.threads,
                out.as_deref().or(cfg.output.as_deref()),
                summary.as_deref().or(cfg.summary.as_deref()),
            )
        }
        Command::OracleCheck { common } => {
            let cfg = RunConfig::load(common.config.as_deref(), &common.set)?;
            cmd_oracle(&cfg, common.threads)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(
            RunConfig::from_toml("bogus = 1"),
            Err(CliError::Config(_))
        ));
        assert!(RunConfig::load(None, &["nope=2".into()]).is_err());
        let big = RunConfig {
            seed: u64::MAX,
            ..RunConfig::default()
        };
        assert!(big.validate().is_err());
    }

    #[test]
    fn overrides_apply() {
        let cfg =
            RunConfig::load(None, &["M=10".into(), "N = 8".into(), "alpha=0.3".into()]).unwrap();
        assert_eq!((cfg.modes_f, cfg.modes_w, cfg.alpha), (10, 8, 0.3));
        let cfg = RunConfig::load(None, &["growth=constant".into()]).unwrap();
        assert_eq!(cfg.growth, AmplitudeGrowth::Constant);
        assert!(RunConfig::load(None, &["s=1.5".into()]).is_err());
        assert!(RunConfig::load(None, &["M".into()]).is_err());
    }

    #[test]
    fn s_grid_inclusive() {
        let g = RunConfig::default().s_grid();
        assert_eq!(g.len(), 19);
        assert!((g[18] - 0.95).abs() < 1e-12);
    }

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(f64::NAN), "NaN");
        assert_eq!(fmt_num(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_num(-0.001), "-1.0000000000000000e-3");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::from(Error::InvalidOrder(2.0)).exit_code(), 1);
        assert_eq!(CliError::from(Error::Domain("x".into())).exit_code(), 3);
        assert_eq!(CliError::Verification(String::new()).exit_code(), 2);
    }
}
