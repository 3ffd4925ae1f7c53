use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use qvlab::hypothesis::{self, CheckRecord, DEFAULT_PSI_STEP};
use qvlab::rates::{self, McOptions, SequenceKind, Verdict};
use qvlab::simulation::{self, AscltResult, McRun, TestFunction};
use qvlab::{cumulants, CovarianceModel, IncrementCovariance, ModelKind, TabulatedGrid};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, Format, RunConfig, Subcommand};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

/// Default size for the γ-bound check when no `n` is configured.
pub const DEFAULT_GAMMA_N: usize = 512;

const SIMULATE_REPS: usize = 10_000;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Compute(#[from] qvlab::Error),

    #[error("cannot write {path}: {source}")]
    Output { path: String, source: std::io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(ConfigError::Io { .. }) => EXIT_RUNTIME,
            RunError::Config(_) | RunError::Usage(_) => EXIT_USAGE,
            RunError::Compute(_) | RunError::Output { .. } => EXIT_RUNTIME,
        }
    }
}

/// What a successful run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// The report body exactly as written.
    pub body: String,
    /// One line per (model, n), plus a verdict line for checking subcommands.
    pub summary: Vec<String>,
    pub checks_passed: bool,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.checks_passed {
            EXIT_OK
        } else {
            EXIT_CHECK_FAILED
        }
    }
}

pub fn build_model(cfg: &RunConfig) -> Result<CovarianceModel, RunError> {
    let spec = &cfg.model;
    let need = |v: Option<f64>, key: &'static str| v.ok_or(RunError::Config(ConfigError::Missing(key)));
    let model = match spec.kind {
        ModelKind::Fbm => CovarianceModel::fbm(need(spec.hurst, "hurst")?),
        ModelKind::SubFbm => CovarianceModel::sub_fbm(need(spec.hurst, "hurst")?),
        ModelKind::BiFbm => CovarianceModel::bi_fbm(need(spec.hp, "hp")?, need(spec.k, "k")?),
        ModelKind::GenSubFbm => CovarianceModel::gen_sub_fbm(need(spec.hp, "hp")?, need(spec.k, "k")?),
        ModelKind::Tabulated => {
            let path = spec.grid.as_ref().ok_or(RunError::Config(ConfigError::Missing("grid")))?;
            let grid = TabulatedGrid::read_csv_path(path)?;
            CovarianceModel::tabulated(grid, need(spec.hurst, "hurst")?)
        }
    };
    model.map_err(|e| RunError::Usage(e.to_string()))
}

/// Computes the report for `cfg` without touching the filesystem.
pub fn execute(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let model = build_model(cfg)?;
    let body = match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| RunError::Usage(format!("cannot build a pool of {t} threads: {e}")))?
            .install(|| dispatch(cfg, &model)),
        None => dispatch(cfg, &model),
    }?;
    Ok(body)
}

/// Runs `cfg`, writes the report (and raw samples) and returns the outcome.
pub fn run(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let outcome = execute(cfg)?;
    match &cfg.out {
        Some(path) => write_file(path, outcome.body.as_bytes())?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(outcome.body.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|source| RunError::Output { path: "<stdout>".into(), source })?;
        }
    }
    Ok(outcome)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    std::fs::write(path, bytes).map_err(|source| RunError::Output { path: path.display().to_string(), source })
}

fn n_list(cfg: &RunConfig) -> Result<&[usize], RunError> {
    cfg.n_list
        .as_ref()
        .map(|l| l.0.as_slice())
        .ok_or_else(|| RunError::Usage(format!("`{}` needs --n or --n-list", cfg.subcommand.label())))
}

fn dispatch(cfg: &RunConfig, model: &CovarianceModel) -> Result<Outcome, RunError> {
    match cfg.subcommand {
        Subcommand::Cumulants => run_cumulants(cfg, model),
        Subcommand::Rates => run_rates(cfg, model),
        Subcommand::Simulate => run_simulate(cfg, model),
        Subcommand::Asclt => run_asclt(cfg, model),
        Subcommand::Hypothesis => run_hypothesis(cfg, model),
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct CumulantsJson<'a> {
    model: &'a str,
    params: String,
    reports: Vec<cumulants::CumulantReport>,
}

fn run_cumulants(cfg: &RunConfig, model: &CovarianceModel) -> Result<Outcome, RunError> {
    let ns = n_list(cfg)?;
    let reports = ns.iter().map(|&n| cumulants::report(model, n)).collect::<qvlab::Result<Vec<_>>>()?;
    let label = model.kind().label();
    let summary = reports
        .iter()
        .map(|r| {
            format!(
                "cumulants {model} n={} sigma_n_sq={} kappa3_v={} kappa4_v={} m_stat={}",
                r.n, r.sigma_n_sq, r.kappa3_v, r.kappa4_v, r.m_stat
            )
        })
        .collect();
    let body = match cfg.format() {
        Format::Csv => {
            let mut s = String::from("model,params,n,sigma_n_sq,kappa3_f,kappa4_f,kappa3_v,kappa4_v,m_stat\n");
            for r in &reports {
                let _ = writeln!(
                    s,
                    "{label},{},{},{},{},{},{},{},{}",
                    model.params(),
                    r.n,
                    r.sigma_n_sq,
                    r.kappa3_f,
                    r.kappa4_f,
                    r.kappa3_v,
                    r.kappa4_v,
                    r.m_stat
                );
            }
            s
        }
        Format::Json => json(&CumulantsJson { model: label, params: model.params(), reports }),
    };
    Ok(Outcome { body, summary, checks_passed: true })
}

fn run_rates(cfg: &RunConfig, model: &CovarianceModel) -> Result<Outcome, RunError> {
    let ns = n_list(cfg)?;
    let kind = cfg.use_.unwrap_or(SequenceKind::MStat);
    let mc = McOptions { reps: cfg.reps.unwrap_or(McOptions::default().reps), seed: cfg.seed() };
    let report = rates::regime_check(model, ns, kind, &mc)?;
    let mut summary: Vec<String> =
        report.points.iter().map(|(n, y)| format!("rates {model} n={n} {}={y}", kind.label())).collect();
    summary.push(format!(
        "rates {model} {} fitted a={} b={} theory a={} b={} verdict={:?}",
        kind.label(),
        report.fitted.a,
        report.fitted.b,
        report.theoretical.a,
        report.theoretical.b,
        report.verdict
    ));
    let body = match cfg.format() {
        Format::Json => json(&report),
        Format::Csv => {
            let mut s = String::from("model,params,use,n,value\n");
            for (n, y) in &report.points {
                let _ = writeln!(s, "{},{},{},{n},{y}", report.model, report.params, kind.label());
            }
            s
        }
    };
    Ok(Outcome { body, summary, checks_passed: report.verdict == Verdict::Pass })
}

#[derive(Serialize)]
struct SimulateJson {
    runs: Vec<McRun>,
}

fn run_simulate(cfg: &RunConfig, model: &CovarianceModel) -> Result<Outcome, RunError> {
    let ns = n_list(cfg)?;
    if cfg.raw.is_some() && ns.len() != 1 {
        return Err(RunError::Usage("`raw` needs exactly one n".into()));
    }
    let reps = cfg.reps.unwrap_or(SIMULATE_REPS);
    let seed = cfg.seed();
    let runs = ns.iter().map(|&n| simulation::simulate(model, n, reps, seed)).collect::<qvlab::Result<Vec<_>>>()?;
    if let Some(path) = &cfg.raw {
        let file = File::create(path).map_err(|source| RunError::Output { path: path.display().to_string(), source })?;
        let mut w = BufWriter::new(file);
        runs[0]
            .write_raw(&mut w)
            .and_then(|_| w.flush())
            .map_err(|source| RunError::Output { path: path.display().to_string(), source })?;
    }
    let summary = runs
        .iter()
        .map(|r| {
            format!(
                "simulate {model} n={} reps={} seed={} ks={} mean={} var={}",
                r.n, r.reps, r.seed, r.ks_distance, r.empirical_mean, r.empirical_var
            )
        })
        .collect();
    let body = match cfg.format() {
        Format::Csv => {
            let mut s = String::from("model,params,n,reps,seed,ks,emp_mean,emp_var\n");
            for r in &runs {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{}",
                    r.model, r.params, r.n, r.reps, r.seed, r.ks_distance, r.empirical_mean, r.empirical_var
                );
            }
            s
        }
        Format::Json => json(&SimulateJson { runs }),
    };
    Ok(Outcome { body, summary, checks_passed: true })
}

#[derive(Serialize)]
struct AscltJson<'a> {
    model: &'a str,
    params: String,
    results: Vec<AscltResult>,
}

/// One path per seed in `seed, seed+1, …`; `reps` is the number of paths.
fn run_asclt(cfg: &RunConfig, model: &CovarianceModel) -> Result<Outcome, RunError> {
    let ns = n_list(cfg)?;
    let phi = cfg.phi.unwrap_or(TestFunction::IndicatorLeZero);
    let paths = cfg.reps.unwrap_or(1) as u64;
    let mut results = Vec::new();
    for &n in ns {
        for seed in cfg.seed()..cfg.seed() + paths {
            results.push(simulation::asclt_average(model, n, phi, seed)?);
        }
    }
    let label = model.kind().label();
    let summary = results
        .iter()
        .map(|r| {
            format!(
                "asclt {model} n={} seed={} phi={} log_average={} target={}",
                r.n, r.seed, r.phi_id, r.log_average, r.target
            )
        })
        .collect();
    let body = match cfg.format() {
        Format::Csv => {
            let mut s = String::from("model,params,n,seed,phi,log_average,weight_sum,target\n");
            for r in &results {
                let _ = writeln!(
                    s,
                    "{label},{},{},{},{},{},{},{}",
                    model.params(),
                    r.n,
                    r.seed,
                    r.phi_id,
                    r.log_average,
                    r.weight_sum,
                    r.target
                );
            }
            s
        }
        Format::Json => json(&AscltJson { model: label, params: model.params(), results }),
    };
    Ok(Outcome { body, summary, checks_passed: true })
}

#[derive(Serialize)]
struct HypothesisJson<'a> {
    model: &'a str,
    params: String,
    c_h_prime: f64,
    checks: Vec<CheckRecord>,
}

fn run_hypothesis(cfg: &RunConfig, model: &CovarianceModel) -> Result<Outcome, RunError> {
    let default_n = [DEFAULT_GAMMA_N];
    let ns = cfg.n_list.as_ref().map(|l| l.0.as_slice()).unwrap_or(&default_n);
    let label = model.kind().label();
    let params = model.params();
    let hi = match model.grid() {
        Some(g) => 10.0f64.min(0.9 * g.horizon()),
        None => 10.0,
    };
    if hi <= 0.5 {
        return Err(RunError::Usage("tabulated horizon too short for the Ψ scan".into()));
    }
    let grid = hypothesis::default_scan_grid(0.5, hi, 12, DEFAULT_PSI_STEP);
    let scan = hypothesis::psi_scan(model, cfg.constant, &grid, DEFAULT_PSI_STEP)?;
    let c = cfg.constant.unwrap_or(scan.fitted_constant);
    let record = |check: String, fitted_constant: f64, max_ratio: f64, pass: bool| CheckRecord {
        check,
        model: label.to_string(),
        params: params.clone(),
        fitted_constant,
        max_ratio,
        pass,
    };
    let psi_ratio = if c > 0.0 { scan.fitted_constant / c } else { 0.0 };
    let mut checks = vec![record("psi_scan".into(), scan.fitted_constant, psi_ratio, scan.pass)];
    let mut summary = vec![format!("hypothesis {model} psi_scan C'={} pass={}", scan.fitted_constant, scan.pass)];
    for &n in ns {
        let inc = IncrementCovariance::new(model, n)?;
        let g = hypothesis::gamma_bound_check(&inc, c);
        summary.push(format!(
            "hypothesis {model} n={n} gamma_bound max_ratio={} implied_C'={} pass={}",
            g.max_ratio, g.implied_constant, g.pass
        ));
        checks.push(record(format!("gamma_bound_check(n={n})"), g.implied_constant, g.max_ratio, g.pass));
    }
    let passed = checks.iter().all(|c| c.pass);
    let body = match cfg.format() {
        Format::Json => json(&HypothesisJson { model: label, params, c_h_prime: c, checks }),
        Format::Csv => {
            let mut s = String::from("check,model,params,fitted_constant,max_ratio,pass\n");
            for r in &checks {
                let _ = writeln!(s, "{},{},{},{},{},{}", r.check, r.model, r.params, r.fitted_constant, r.max_ratio, r.pass);
            }
            s
        }
    };
    Ok(Outcome { body, summary, checks_passed: passed })
}
