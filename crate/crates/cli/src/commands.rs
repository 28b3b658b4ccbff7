//! The four subcommands. Each returns the process exit code; `Err` means a
//! configuration or I/O failure (exit 1).

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use frac_eig_core::properties::{
    boundedness_diagnostics, check_abs_decrease, check_convergence, check_domain_monotonicity,
    check_first_mode_minimality, check_hidden_convexity, check_oracle_lower_bound, check_proportionality_set,
    check_scaling, check_sign_changing_margin, check_truncation_inequality, Diagnostics,
};
use frac_eig_core::{
    assemble, dense_oracle_p2, minimize_rayleigh, residual, solve_odd, Assembly, EigenResult, Grid, PropertyReport,
    SolveMode, SolveOptions, Termination,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{csv_bytes, csv_records, eigenfunction_csv, write_atomic, write_json, SCHEMA_VERSION};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
/// `solve`: no convergence; `oracle`: values disagree.
pub const EXIT_NOT_CONVERGED: u8 = 2;
pub const EXIT_VIOLATION: u8 = 3;

/// Relative agreement required by `oracle`.
pub const ORACLE_TOL: f64 = 1e-8;

const TOOL: &str = "frac-eig";
const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Serialize)]
struct Header {
    schema_version: u32,
    tool: &'static str,
    version: &'static str,
    config_hash: String,
    config: serde_json::Value,
}

impl Header {
    fn new(cfg: &RunConfig) -> Self {
        Header {
            schema_version: SCHEMA_VERSION,
            tool: TOOL,
            version: VERSION,
            config_hash: cfg.hash(),
            config: cfg.echo(),
        }
    }
}

#[derive(Serialize)]
struct GridInfo {
    dim: usize,
    nodes: usize,
    h: f64,
    description: String,
}

impl GridInfo {
    fn new(g: &Grid) -> Self {
        GridInfo { dim: g.dim(), nodes: g.len(), h: g.h(), description: g.describe() }
    }
}

#[derive(Serialize)]
struct SolveRecord {
    #[serde(flatten)]
    header: Header,
    grid: GridInfo,
    mode: SolveMode,
    lambda: f64,
    iterations: usize,
    grad_norm: f64,
    residual: f64,
    termination: Termination,
    converged: bool,
    wall_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    eigenfunction: Option<Vec<f64>>,
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.unwrap_or(0)).build()?;
    Ok(pool.install(f))
}

fn assemble_config(cfg: &RunConfig) -> Result<Assembly> {
    let grid = cfg.build_grid()?;
    Ok(assemble(grid, &cfg.kernel()?, &cfg.assembly)?)
}

fn run_solver(a: &Assembly, opts: &SolveOptions) -> frac_eig_core::Result<EigenResult> {
    match opts.mode {
        SolveMode::First => minimize_rayleigh(a, opts, None),
        SolveMode::Odd => solve_odd(a, opts),
    }
}

fn rel_diff(x: f64, reference: f64) -> f64 {
    (x - reference).abs() / reference.abs()
}

/// `solve`: assemble, minimize, write `result.json` and optionally
/// `eigenfunction.csv`.
pub fn solve(cfg: &RunConfig) -> Result<u8> {
    let start = Instant::now();
    let a = assemble_config(cfg)?;
    let res = run_solver(&a, &cfg.solve_options())?;
    let res_norm = residual(&a, &res)?;
    let wall = start.elapsed().as_secs_f64();

    let dir = &cfg.output.dir;
    let record = SolveRecord {
        header: Header::new(cfg),
        grid: GridInfo::new(a.grid()),
        mode: res.mode,
        lambda: res.lambda,
        iterations: res.iterations,
        grad_norm: res.grad_norm,
        residual: res_norm,
        termination: res.termination,
        converged: res.converged(),
        wall_time_s: wall,
        eigenfunction: cfg.output.dump_eigenfunction.then(|| res.u.values().to_vec()),
    };
    if cfg.output.json() {
        write_json(&dir.join("result.json"), &record)?;
    }
    if cfg.output.csv() {
        let header = ["lambda", "iterations", "grad_norm", "residual", "converged", "nodes", "config_hash"];
        let row = vec![
            res.lambda.to_string(),
            res.iterations.to_string(),
            res.grad_norm.to_string(),
            res_norm.to_string(),
            res.converged().to_string(),
            a.len().to_string(),
            record.header.config_hash.clone(),
        ];
        write_atomic(&dir.join("result.csv"), &csv_records(&header, [row])?)?;
    }
    if cfg.output.dump_eigenfunction {
        write_atomic(&dir.join("eigenfunction.csv"), &eigenfunction_csv(&res.u)?)?;
    }
    println!(
        "lambda = {:.15e}  iterations = {}  grad_norm = {:.3e}  residual = {:.3e}  {:?}",
        res.lambda, res.iterations, res.grad_norm, res_norm, res.termination
    );
    Ok(if res.converged() { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

/// Faults injected into the assembled energy to exercise `verify`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    NegateTails,
}

impl std::str::FromStr for Fault {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "negate-tails" => Ok(Fault::NegateTails),
            _ => Err(format!("unknown fault `{s}` (known: negate-tails)")),
        }
    }
}

/// Settings of the verify suite.
#[derive(Clone, Debug)]
pub struct SuiteSettings {
    pub convexity_pairs: usize,
    pub t_values: Vec<f64>,
    pub truncation_samples: usize,
    pub abs_trials: usize,
    pub minimality_probes: usize,
    pub seeds: usize,
    pub proportionality_tol: f64,
    pub odd_margin: f64,
    pub scale: f64,
    pub scaling_tol: f64,
    pub levels: usize,
}

impl Default for SuiteSettings {
    fn default() -> Self {
        SuiteSettings {
            convexity_pairs: 200,
            t_values: (1..=9).map(|k| k as f64 / 10.0).collect(),
            truncation_samples: 10_000,
            abs_trials: 200,
            minimality_probes: 300,
            seeds: 10,
            proportionality_tol: 1e-6,
            odd_margin: 1e-3,
            scale: 2.0,
            scaling_tol: 1e-12,
            levels: 12,
        }
    }
}

pub struct VerifyOutcome {
    pub reports: Vec<PropertyReport>,
    pub diagnostics: Diagnostics,
}

impl VerifyOutcome {
    pub fn failures(&self) -> impl Iterator<Item = &PropertyReport> {
        self.reports.iter().filter(|r| !r.passed)
    }

    pub fn passed(&self) -> bool {
        self.failures().next().is_none()
    }
}

/// Runs the property suite without writing anything.
pub fn run_suite(cfg: &RunConfig, fault: Option<Fault>, settings: &SuiteSettings) -> Result<VerifyOutcome> {
    let grid = cfg.build_grid()?;
    let kernel = cfg.kernel()?;
    let mut a = assemble(grid.clone(), &kernel, &cfg.assembly)?;
    if fault == Some(Fault::NegateTails) {
        a = a.with_negated_tails();
    }
    let seed = cfg.solve.seed;
    let opts = SolveOptions { mode: SolveMode::First, ..cfg.solve_options() };

    let mut reports = vec![
        check_hidden_convexity(&a, settings.convexity_pairs, &settings.t_values, seed)?,
        check_truncation_inequality(kernel.p(), settings.truncation_samples, seed),
        check_abs_decrease(&a, settings.abs_trials, seed)?,
    ];

    let runs = (0..settings.seeds as u64)
        .into_par_iter()
        .map(|k| minimize_rayleigh(&a, &SolveOptions { seed: seed.wrapping_add(k), ..opts.clone() }, None))
        .collect::<frac_eig_core::Result<Vec<_>>>()?;
    let first = runs.first().context("at least one seed is required")?;
    reports.push(check_convergence(&runs));
    reports.push(check_first_mode_minimality(&a, first, settings.minimality_probes, seed)?);
    reports.push(check_proportionality_set(&runs, kernel.p(), settings.proportionality_tol)?);
    if grid.symmetry_map().is_some() {
        let odd = solve_odd(&a, &opts)?;
        reports.push(check_sign_changing_margin(first, &odd, settings.odd_margin));
    }
    if kernel.multiplier().is_constant_one() {
        reports.push(check_scaling(&grid, &kernel, &cfg.assembly, &opts, settings.scale, settings.scaling_tol)?);
    }
    reports.push(check_domain_monotonicity(&grid, &kernel, &cfg.assembly, &opts)?);
    if kernel.p() == 2.0 {
        reports.push(check_oracle_lower_bound(&a, first)?);
    }
    let (diagnostics, diag_report) = boundedness_diagnostics(&runs, &kernel, settings.levels)?;
    reports.push(diag_report);
    Ok(VerifyOutcome { reports, diagnostics })
}

#[derive(Serialize)]
struct ReportFile<'a, T: Serialize> {
    #[serde(flatten)]
    header: &'a Header,
    report: &'a T,
}

#[derive(Serialize)]
struct SummaryRow {
    name: String,
    passed: bool,
    trials: usize,
    violations: usize,
    worst_trial: Option<usize>,
    worst_label: Option<String>,
    worst_slack: f64,
}

#[derive(Serialize)]
struct LevelCsvRow {
    run: usize,
    k: f64,
    lhs: f64,
    rhs_base: f64,
    ratio: Option<f64>,
}

#[derive(Serialize)]
struct TruncationCsvRow {
    run: usize,
    k: u32,
    u_k: f64,
}

#[derive(Serialize)]
struct LinftyCsvRow {
    run: usize,
    grid: String,
    sup_norm: f64,
    l1_norm: f64,
    ratio: f64,
}

fn summary_row(r: &PropertyReport) -> SummaryRow {
    let worst = r.details.first();
    SummaryRow {
        name: r.name.clone(),
        passed: r.passed,
        trials: r.trials,
        violations: r.violations,
        worst_trial: worst.map(|w| w.trial),
        worst_label: worst.map(|w| w.label.clone()),
        worst_slack: r.worst_slack,
    }
}

/// Writes `reports/*.json` (and CSV tables) for a finished suite. The files
/// depend only on the config, so reruns reproduce them byte for byte.
pub fn write_reports(cfg: &RunConfig, outcome: &VerifyOutcome, dir: &Path) -> Result<Vec<PathBuf>> {
    let header = Header::new(cfg);
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: Vec<u8>| -> Result<()> {
        let path = dir.join(name);
        write_atomic(&path, &bytes)?;
        written.push(path);
        Ok(())
    };
    let summary: Vec<SummaryRow> = outcome.reports.iter().map(summary_row).collect();
    let d = &outcome.diagnostics;

    if cfg.output.json() {
        for r in &outcome.reports {
            put(&format!("{}.json", r.name), json_bytes(&ReportFile { header: &header, report: r })?)?;
        }
        put("level_decay.json", json_bytes(&ReportFile { header: &header, report: &(d.eps, &d.level_decay) })?)?;
        put("truncation_sequence.json", json_bytes(&ReportFile { header: &header, report: &d.truncation })?)?;
        put("linfty_bound.json", json_bytes(&ReportFile { header: &header, report: &d.linfty })?)?;
        put("summary.json", json_bytes(&ReportFile { header: &header, report: &summary })?)?;
    }
    if cfg.output.csv() {
        put("summary.csv", csv_bytes(&summary)?)?;
        let level = d.level_decay.iter().flat_map(|(run, rows)| {
            rows.iter().map(move |r| LevelCsvRow { run: *run, k: r.k, lhs: r.lhs, rhs_base: r.rhs_base, ratio: r.ratio })
        });
        put("level_decay.csv", csv_bytes(level)?)?;
        let trunc = d
            .truncation
            .iter()
            .flat_map(|(run, t)| t.rows.iter().map(move |r| TruncationCsvRow { run: *run, k: r.k, u_k: r.u_k }));
        put("truncation_sequence.csv", csv_bytes(trunc)?)?;
        let linf = d.linfty.iter().map(|(run, r)| LinftyCsvRow {
            run: *run,
            grid: r.grid.clone(),
            sup_norm: r.sup_norm,
            l1_norm: r.l1_norm,
            ratio: r.ratio,
        });
        put("linfty_bound.csv", csv_bytes(linf)?)?;
    }
    Ok(written)
}

fn json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v)?;
    b.push(b'\n');
    Ok(b)
}

/// `verify`: property suite and diagnostics, written under
/// `<output.dir>/reports`. Exit 3 names each failed property.
pub fn verify(cfg: &RunConfig, fault: Option<Fault>, jobs: Option<usize>) -> Result<u8> {
    let outcome = with_pool(jobs, || run_suite(cfg, fault, &SuiteSettings::default()))??;
    write_reports(cfg, &outcome, &cfg.output.dir.join("reports"))?;
    for r in &outcome.reports {
        println!(
            "{} {:<24} trials = {:<6} violations = {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.trials,
            r.violations
        );
    }
    for r in outcome.failures() {
        let w = r.details.first();
        eprintln!(
            "{TOOL}: property violated: {} (worst trial {}: {}, slack {:e})",
            r.name,
            w.map_or(0, |w| w.trial),
            w.map_or("", |w| w.label.as_str()),
            r.worst_slack
        );
    }
    Ok(if outcome.passed() { EXIT_OK } else { EXIT_VIOLATION })
}

#[derive(Serialize)]
struct SweepRow {
    s: f64,
    p: f64,
    #[serde(rename = "N")]
    n: usize,
    lambda: f64,
    iterations: usize,
    converged: bool,
}

/// `sweep`: one solve per `(s, p)`, `s` outer. Failed solves are kept as
/// rows with `lambda = NaN` and `converged = false`.
pub fn sweep(cfg: &RunConfig, s_list: &[f64], p_list: &[f64], jobs: Option<usize>) -> Result<u8> {
    if s_list.is_empty() || p_list.is_empty() {
        bail!("sweep needs nonempty --s and --p lists");
    }
    let pairs: Vec<(f64, f64)> = s_list.iter().flat_map(|&s| p_list.iter().map(move |&p| (s, p))).collect();
    for &(s, p) in &pairs {
        cfg.kernel_with(s, p).with_context(|| format!("sweep point s = {s}, p = {p}"))?;
    }
    let grid = cfg.build_grid()?;
    let opts = cfg.solve_options();

    let results: Vec<(SweepRow, Option<String>)> = with_pool(jobs, || {
        pairs
            .par_iter()
            .map(|&(s, p)| {
                let out = cfg
                    .kernel_with(s, p)
                    .and_then(|k| assemble(grid.clone(), &k, &cfg.assembly))
                    .and_then(|a| run_solver(&a, &opts));
                match out {
                    Ok(res) => {
                        let mut err = None;
                        if cfg.output.dump_eigenfunction {
                            let path = cfg.output.dir.join("runs").join(format!("s{s}_p{p}")).join("eigenfunction.csv");
                            if let Err(e) = eigenfunction_csv(&res.u).and_then(|b| write_atomic(&path, &b)) {
                                err = Some(format!("{e:#}"));
                            }
                        }
                        let row = SweepRow {
                            s,
                            p,
                            n: grid.len(),
                            lambda: res.lambda,
                            iterations: res.iterations,
                            converged: res.converged(),
                        };
                        (row, err)
                    }
                    Err(e) => {
                        let row = SweepRow { s, p, n: grid.len(), lambda: f64::NAN, iterations: 0, converged: false };
                        (row, Some(e.to_string()))
                    }
                }
            })
            .collect()
    })?;

    for (row, err) in &results {
        match err {
            Some(e) => eprintln!("{TOOL}: sweep point s = {}, p = {} failed: {e}", row.s, row.p),
            None => println!("s = {:<6} p = {:<6} lambda = {:.12e}  converged = {}", row.s, row.p, row.lambda, row.converged),
        }
    }
    let rows: Vec<&SweepRow> = results.iter().map(|(r, _)| r).collect();
    write_atomic(&cfg.output.dir.join("sweep.csv"), &csv_bytes(&rows)?)?;
    if cfg.output.json() {
        #[derive(Serialize)]
        struct SweepFile<'a> {
            #[serde(flatten)]
            header: Header,
            rows: &'a [&'a SweepRow],
        }
        write_json(&cfg.output.dir.join("sweep.json"), &SweepFile { header: Header::new(cfg), rows: &rows })?;
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct Comparison {
    lambda_solver: f64,
    lambda_oracle: f64,
    rel_diff: f64,
    converged: bool,
}

#[derive(Serialize)]
struct OracleRecord {
    #[serde(flatten)]
    header: Header,
    grid: GridInfo,
    tolerance: f64,
    first: Comparison,
    #[serde(skip_serializing_if = "Option::is_none")]
    odd: Option<Comparison>,
    passed: bool,
}

/// `oracle`: solver against the dense eigendecomposition for `p = 2`,
/// including the odd subspace on symmetric grids. Writes `oracle.json`.
pub fn oracle(cfg: &RunConfig) -> Result<u8> {
    if cfg.kernel.p != 2.0 {
        bail!("oracle comparison requires kernel.p = 2, got {}", cfg.kernel.p);
    }
    let a = assemble_config(cfg)?;
    let o = dense_oracle_p2(&a)?;
    let opts = SolveOptions { mode: SolveMode::First, ..cfg.solve_options() };
    let first = minimize_rayleigh(&a, &opts, None)?;
    let first = Comparison {
        lambda_solver: first.lambda,
        lambda_oracle: o.lambda_min,
        rel_diff: rel_diff(first.lambda, o.lambda_min),
        converged: first.converged(),
    };
    let odd = match o.lambda_min_odd {
        Some(mu) => {
            let r = solve_odd(&a, &opts)?;
            Some(Comparison { lambda_solver: r.lambda, lambda_oracle: mu, rel_diff: rel_diff(r.lambda, mu), converged: r.converged() })
        }
        None => None,
    };
    let ok = |c: &Comparison| c.rel_diff <= ORACLE_TOL;
    let passed = ok(&first) && odd.as_ref().is_none_or(ok);
    println!(
        "first: solver = {:.15e}  oracle = {:.15e}  rel diff = {:.3e}",
        first.lambda_solver, first.lambda_oracle, first.rel_diff
    );
    if let Some(c) = &odd {
        println!(
            "odd:   solver = {:.15e}  oracle = {:.15e}  rel diff = {:.3e}",
            c.lambda_solver, c.lambda_oracle, c.rel_diff
        );
    }
    let record =
        OracleRecord { header: Header::new(cfg), grid: GridInfo::new(a.grid()), tolerance: ORACLE_TOL, first, odd, passed };
    write_json(&cfg.output.dir.join("oracle.json"), &record)?;
    if !passed {
        eprintln!("{TOOL}: solver and oracle differ by more than {ORACLE_TOL:e}");
    }
    Ok(if passed { EXIT_OK } else { EXIT_NOT_CONVERGED })
}
