//! Machine checks of the structural properties of the discrete energy and
//! diagnostics for the boundedness estimates.
//!
//! Every `check_*` function is deterministic given its seed: trial `k`
//! draws from `stream(seed, k)`, and trials are reduced in index order, so
//! parallel and serial execution produce identical reports.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble, Assembly, AssemblyOptions};
use crate::energy::{energy, lp_norm_p, rayleigh, GridFunction, PowerMap};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernel::Kernel;
use crate::oracle::dense_oracle_p2;
use crate::rng::stream;
use crate::solver::{minimize_rayleigh, solve_odd, EigenResult, SolveMode, SolveOptions};

/// At most this many violating trials are kept in `details`.
const MAX_DETAILS: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub label: String,
    pub slack: f64,
}

/// Outcome of one property check. `slack` is the margin by which the
/// asserted inequality holds (negative means it failed); a trial is a
/// violation when `slack < -tolerance`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub name: String,
    pub trials: usize,
    pub violations: usize,
    pub tolerance: f64,
    pub worst_slack: f64,
    /// Worst trial first, then violating trials in index order.
    pub details: Vec<TrialRecord>,
    /// Named scalars specific to the check.
    pub metrics: BTreeMap<String, f64>,
    pub passed: bool,
}

struct Tally {
    name: String,
    tolerance: f64,
    trials: usize,
    violations: Vec<TrialRecord>,
    worst: Option<TrialRecord>,
    metrics: BTreeMap<String, f64>,
}

impl Tally {
    fn new(name: &str, tolerance: f64) -> Self {
        Tally {
            name: name.to_string(),
            tolerance,
            trials: 0,
            violations: Vec::new(),
            worst: None,
            metrics: BTreeMap::new(),
        }
    }

    /// Records a trial; `failed` overrides the tolerance test when set.
    fn record(&mut self, label: String, slack: f64, failed: Option<bool>) {
        let trial = self.trials;
        self.trials += 1;
        let rec = TrialRecord { trial, label, slack };
        let bad = failed.unwrap_or(!(slack >= -self.tolerance));
        if self.worst.as_ref().is_none_or(|w| slack < w.slack || slack.is_nan()) {
            self.worst = Some(rec.clone());
        }
        if bad {
            self.violations.push(rec);
        }
    }

    fn metric(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.to_string(), value);
    }

    fn finish(self) -> PropertyReport {
        let violations = self.violations.len();
        let worst_trial = self.worst.as_ref().map(|w| w.trial);
        let mut details: Vec<TrialRecord> = self.worst.into_iter().collect();
        details.extend(
            self.violations
                .into_iter()
                .filter(|v| Some(v.trial) != worst_trial)
                .take(MAX_DETAILS),
        );
        PropertyReport {
            name: self.name,
            trials: self.trials,
            violations,
            tolerance: self.tolerance,
            worst_slack: details.first().map_or(0.0, |d| d.slack),
            details,
            metrics: self.metrics,
            passed: violations == 0,
        }
    }
}

fn uniform_fn(grid: &Arc<Grid>, rng: &mut impl Rng, lo: f64, hi: f64) -> GridFunction {
    let values = (0..grid.len()).map(|_| rng.random_range(lo..hi)).collect();
    GridFunction::new(grid.clone(), values).expect("finite samples")
}

/// `(sigma_t)_i = ((1 - t) v_i^p + t u_i^p)^{1/p}` for nonnegative `u`, `v`.
pub fn p_geodesic(u: &GridFunction, v: &GridFunction, t: f64, p: f64) -> GridFunction {
    let values = u
        .values()
        .iter()
        .zip(v.values())
        .map(|(a, b)| ((1.0 - t) * b.powf(p) + t * a.powf(p)).powf(1.0 / p))
        .collect();
    GridFunction::new(u.grid().clone(), values).expect("finite geodesic")
}

/// Convexity of the energy along `p`-geodesics between positive functions:
/// `K(sigma_t) <= (1 - t) K(v) + t K(u)`, slack relative to `max(K(u), K(v))`.
pub fn check_hidden_convexity(
    a: &Assembly,
    trials: usize,
    t_values: &[f64],
    seed: u64,
) -> Result<PropertyReport> {
    if let Some(t) = t_values.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::InvalidParameter(format!("t = {t} outside [0, 1]")));
    }
    let p = a.p();
    let grid = a.grid();
    let per_trial: Vec<Result<Vec<f64>>> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, k as u64);
            let u = uniform_fn(grid, &mut rng, 0.1, 1.1);
            let v = uniform_fn(grid, &mut rng, 0.1, 1.1);
            let (eu, ev) = (energy(a, &u)?.total, energy(a, &v)?.total);
            let scale = eu.abs().max(ev.abs());
            t_values
                .iter()
                .map(|&t| {
                    let es = energy(a, &p_geodesic(&u, &v, t, p))?.total;
                    Ok(((1.0 - t) * ev + t * eu - es) / scale)
                })
                .collect()
        })
        .collect();

    let mut tally = Tally::new("hidden_convexity", 1e-10);
    for (k, slacks) in per_trial.into_iter().enumerate() {
        for (t, slack) in t_values.iter().zip(slacks?) {
            tally.record(format!("pair {k}, t = {t}"), slack, None);
        }
    }
    tally.metric("p", p);
    tally.metric("s", a.kernel().s());
    Ok(tally.finish())
}

/// `phi_p(a - b) (a+ - b+) - |a+ - b+|^p`, the margin of the truncation
/// inequality for one pair of values.
pub fn truncation_margin(a: f64, b: f64, p: f64) -> (f64, f64) {
    let pm = PowerMap::new(p);
    let (ap, bp) = (a.max(0.0), b.max(0.0));
    let lhs = pm.phi(a - b) * (ap - bp);
    let rhs = pm.abs_pow(ap - bp);
    (lhs - rhs, lhs.abs().max(rhs))
}

/// Scalar truncation inequality `phi_p(a - b)(a+ - b+) >= |a+ - b+|^p` on
/// seeded samples from `[-2, 2]^2`, absolute slack `1e-12 * max(1, lhs)`.
pub fn check_truncation_inequality(p: f64, samples: usize, seed: u64) -> PropertyReport {
    let mut tally = Tally::new("truncation_inequality", 1e-12);
    for k in 0..samples {
        let mut rng = stream(seed, k as u64);
        let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let (margin, scale) = truncation_margin(a, b, p);
        let slack = margin / scale.max(1.0);
        tally.record(format!("a = {a}, b = {b}"), slack, None);
    }
    tally.metric("p", p);
    tally.finish()
}

/// `K(|u|) <= K(u)`, strictly when some coupled pair has opposite signs.
pub fn check_abs_decrease(a: &Assembly, trials: usize, seed: u64) -> Result<PropertyReport> {
    let mut tally = Tally::new("abs_decrease", 1e-12);
    for k in 0..trials {
        let mut rng = stream(seed, k as u64);
        let u = uniform_fn(a.grid(), &mut rng, -1.0, 1.0);
        let e = energy(a, &u)?.total;
        let e_abs = energy(a, &u.abs())?.total;
        let slack = (e - e_abs) / e.abs().max(f64::MIN_POSITIVE);
        let v = u.values();
        let mixed = a.pairs().any(|(i, j, w)| w > 0.0 && v[i] * v[j] < 0.0);
        let failed = slack < -1e-12 || (mixed && !(e_abs < e));
        tally.record(format!("trial {k}, mixed = {mixed}"), slack, Some(failed));
    }
    Ok(tally.finish())
}

/// Sup-distance between two functions after unit `L^p` normalization with
/// positive largest component; also reports the variance of `u1 / u2`.
pub fn check_proportionality(
    u1: &GridFunction,
    u2: &GridFunction,
    p: f64,
    tol: f64,
) -> Result<PropertyReport> {
    if u1.len() != u2.len() {
        return Err(Error::DimensionMismatch { expected: u1.len(), got: u2.len() });
    }
    let (n1, n2) = (u1.normalized(p)?, u2.normalized(p)?);
    let dist = n1.values().iter().zip(n2.values()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let ratios: Vec<f64> = u1
        .values()
        .iter()
        .zip(u2.values())
        .filter(|(_, y)| y.abs() > 1e-12)
        .map(|(x, y)| x / y)
        .collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len().max(1) as f64;
    let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / ratios.len().max(1) as f64;

    let mut tally = Tally::new("proportionality", 0.0);
    tally.record("pair".into(), tol - dist, None);
    tally.metric("sup_distance", dist);
    tally.metric("ratio_variance", var);
    Ok(tally.finish())
}

/// All pairwise proportionality distances among first-mode solutions.
pub fn check_proportionality_set(results: &[EigenResult], p: f64, tol: f64) -> Result<PropertyReport> {
    let mut tally = Tally::new("proportionality", 0.0);
    let mut worst: f64 = 0.0;
    let mut min_value = f64::INFINITY;
    for (k, r) in results.iter().enumerate() {
        min_value = min_value.min(r.u.min());
        tally.record(format!("run {k}: min u > 0"), r.u.min(), Some(!(r.u.min() > 0.0)));
    }
    for i in 0..results.len() {
        for j in i + 1..results.len() {
            let rep = check_proportionality(&results[i].u, &results[j].u, p, tol)?;
            let d = rep.metrics["sup_distance"];
            worst = worst.max(d);
            tally.record(format!("runs ({i}, {j})"), tol - d, None);
        }
    }
    tally.metric("max_sup_distance", worst);
    tally.metric("min_component", min_value);
    tally.metric("runs", results.len() as f64);
    Ok(tally.finish())
}

/// `R(phi) >= lambda (1 - 1e-10)` on seeded probes, plus `lambda > 0`.
///
/// Probes mix uniform sign-changing vectors, positive vectors, and small
/// perturbations of the computed eigenfunction.
pub fn check_first_mode_minimality(
    a: &Assembly,
    res: &EigenResult,
    probes: usize,
    seed: u64,
) -> Result<PropertyReport> {
    let lambda = res.lambda;
    let mut tally = Tally::new("first_mode_minimality", 1e-10);
    tally.record("lambda > 0".into(), lambda, Some(!(lambda > 0.0)));
    let slacks: Vec<Result<f64>> = (0..probes)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, k as u64);
            let phi = match k % 3 {
                0 => uniform_fn(a.grid(), &mut rng, -1.0, 1.0),
                1 => uniform_fn(a.grid(), &mut rng, 0.0, 1.0),
                _ => {
                    let eps = 10f64.powf(rng.random_range(-6.0..-1.0));
                    let noise = uniform_fn(a.grid(), &mut rng, -1.0, 1.0);
                    let vals = res.u.values().iter().zip(noise.values()).map(|(x, n)| x + eps * n).collect();
                    GridFunction::new(a.grid().clone(), vals)?
                }
            };
            if phi.is_zero() {
                return Ok(f64::INFINITY);
            }
            Ok((rayleigh(a, &phi)? - lambda) / lambda.abs())
        })
        .collect();
    for (k, s) in slacks.into_iter().enumerate() {
        tally.record(format!("probe {k}"), s?, None);
    }
    tally.metric("lambda", lambda);
    Ok(tally.finish())
}

/// `lambda_odd / lambda_first - 1 >= margin`, and the odd mode changes sign.
pub fn check_sign_changing_margin(first: &EigenResult, odd: &EigenResult, margin: f64) -> PropertyReport {
    let mut tally = Tally::new("sign_changing_margin", 0.0);
    let gap = odd.lambda / first.lambda - 1.0;
    tally.record("gap".into(), gap - margin, None);
    let both = odd.u.max() > 0.0 && odd.u.min() < 0.0;
    tally.record("attains both signs".into(), if both { 0.0 } else { -1.0 }, Some(!both));
    tally.metric("lambda_first", first.lambda);
    tally.metric("lambda_odd", odd.lambda);
    tally.metric("relative_gap", gap);
    tally.finish()
}

/// Solves the first mode on `grid` and on `grid` scaled by `c`, and compares
/// `lambda_c` with `c^{-sp} lambda` at relative tolerance `tol`. Only the
/// pure kernel (`Multiplier::One`) is dilation invariant.
pub fn check_scaling(
    grid: &Arc<Grid>,
    kernel: &Kernel,
    assembly: &AssemblyOptions,
    solve: &SolveOptions,
    c: f64,
    tol: f64,
) -> Result<PropertyReport> {
    if !kernel.multiplier().is_constant_one() {
        return Err(Error::InvalidParameter(format!(
            "scaling law needs a dilation-invariant kernel, multiplier is `{}`",
            kernel.multiplier().name()
        )));
    }
    let plain = AssemblyOptions { near_field_radius: 0, ..*assembly };
    let first = SolveOptions { mode: SolveMode::First, ..solve.clone() };
    let base = minimize_rayleigh(&assemble(grid.clone(), kernel, &plain)?, &first, None)?;
    let scaled_grid = Arc::new(grid.scaled(c)?);
    let scaled = minimize_rayleigh(&assemble(scaled_grid, kernel, &plain)?, &first, None)?;
    let predicted = c.powf(-kernel.sp()) * base.lambda;
    let rel = (scaled.lambda - predicted).abs() / predicted.abs();

    let mut tally = Tally::new("scaling", 0.0);
    tally.record(format!("c = {c}"), tol - rel, None);
    tally.metric("lambda", base.lambda);
    tally.metric("lambda_scaled", scaled.lambda);
    tally.metric("relative_error", rel);
    Ok(tally.finish())
}

/// `lambda_1(small) > lambda_1(large)` for the grid and its enlargement at
/// matched spacing.
pub fn check_domain_monotonicity(
    grid: &Arc<Grid>,
    kernel: &Kernel,
    assembly: &AssemblyOptions,
    solve: &SolveOptions,
) -> Result<PropertyReport> {
    let first = SolveOptions { mode: SolveMode::First, ..solve.clone() };
    let small = minimize_rayleigh(&assemble(grid.clone(), kernel, assembly)?, &first, None)?;
    let big_grid = Arc::new(grid.enlarged()?);
    let big = minimize_rayleigh(&assemble(big_grid.clone(), kernel, assembly)?, &first, None)?;

    let mut tally = Tally::new("domain_monotonicity", 0.0);
    let slack = (small.lambda - big.lambda) / small.lambda;
    tally.record(big_grid.describe(), slack, Some(!(small.lambda > big.lambda)));
    tally.metric("lambda_small", small.lambda);
    tally.metric("lambda_large", big.lambda);
    Ok(tally.finish())
}

/// `lambda` from a first-mode solve never exceeds any dense eigenvalue (p = 2).
pub fn check_oracle_lower_bound(a: &Assembly, res: &EigenResult) -> Result<PropertyReport> {
    let o = dense_oracle_p2(a)?;
    let mut tally = Tally::new("oracle_lower_bound", 1e-10);
    for (k, mu) in o.spectrum.iter().enumerate() {
        tally.record(format!("eigenvalue {k}"), (mu - res.lambda) / res.lambda, None);
    }
    Ok(tally.finish())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelDecayRow {
    pub k: f64,
    /// `h^n sum_i (u_i - k)_+`, the discrete `∫_k^∞ |{u > t}| dt`.
    pub lhs: f64,
    /// `k (h^n #{u > k})^{1 + eps}`
    pub rhs_base: f64,
    /// `lhs / rhs_base`; `None` on an empty level set.
    pub ratio: Option<f64>,
}

/// Empirical constant of the level-set decay estimate with exponent
/// `eps = sp / (n (p - 1))`. Levels at or above `max u` give empty rows.
pub fn level_decay_diagnostic(u: &GridFunction, eps: f64, k_values: &[f64]) -> Result<Vec<LevelDecayRow>> {
    check_nonnegative(u)?;
    let vol = u.grid().cell_volume();
    k_values
        .iter()
        .map(|&k| {
            if !(k > 0.0) {
                return Err(Error::LevelOutOfRange { k });
            }
            let lhs = vol * u.values().iter().map(|x| (x - k).max(0.0)).sum::<f64>();
            let count = u.values().iter().filter(|x| **x > k).count();
            let rhs_base = k * (vol * count as f64).powf(1.0 + eps);
            let ratio = (count > 0).then(|| lhs / rhs_base);
            Ok(LevelDecayRow { k, lhs, rhs_base, ratio })
        })
        .collect()
}

/// `count` log-spaced levels in `[1e-3 max u, (1 - 1e-3) max u]`.
pub fn log_spaced_levels(max: f64, count: usize) -> Vec<f64> {
    let (lo, hi) = ((1e-3 * max).ln(), ((1.0 - 1e-3) * max).ln());
    (0..count)
        .map(|i| {
            let f = if count > 1 { i as f64 / (count - 1) as f64 } else { 0.0 };
            (lo + f * (hi - lo)).exp()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationRow {
    pub k: u32,
    pub u_k: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationTable {
    pub rows: Vec<TruncationRow>,
    /// `U_{k+1} <= U_k` for every consecutive pair.
    pub monotone: bool,
}

/// `U_k = |(u - (1 - 2^{-k}))_+|_p^p` for `k = 1..=16`, on `u` as given.
pub fn truncation_sequence(u: &GridFunction, p: f64) -> Result<TruncationTable> {
    check_nonnegative(u)?;
    let rows: Vec<TruncationRow> = (1..=16u32)
        .map(|k| {
            let level = 1.0 - 0.5f64.powi(k as i32);
            let w = u.map(|x| (x - level).max(0.0));
            TruncationRow { k, u_k: lp_norm_p(&w, p) }
        })
        .collect();
    let monotone = rows.windows(2).all(|w| w[1].u_k <= w[0].u_k);
    Ok(TruncationTable { rows, monotone })
}

/// [`truncation_sequence`] after rescaling `u` to unit `L^p` norm.
pub fn truncation_sequence_diagnostic(u: &GridFunction, p: f64) -> Result<TruncationTable> {
    truncation_sequence(&u.normalized(p)?, p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinftyRow {
    pub grid: String,
    pub sup_norm: f64,
    pub l1_norm: f64,
    pub ratio: f64,
}

/// `sup |u| / (h^n sum |u_i|)` for each result.
pub fn linfty_bound_diagnostic(functions: &[&GridFunction]) -> Vec<LinftyRow> {
    functions
        .iter()
        .map(|u| {
            let sup = u.sup_norm();
            let l1 = u.grid().cell_volume() * u.values().iter().map(|x| x.abs()).sum::<f64>();
            LinftyRow { grid: u.grid().describe(), sup_norm: sup, l1_norm: l1, ratio: sup / l1 }
        })
        .collect()
}

fn check_nonnegative(u: &GridFunction) -> Result<()> {
    if u.is_zero() {
        return Err(Error::ZeroFunction);
    }
    if u.values().iter().any(|x| *x < 0.0) {
        return Err(Error::InvalidParameter("diagnostic requires u >= 0".into()));
    }
    Ok(())
}

/// One trial per run: the solver reached its gradient tolerance.
pub fn check_convergence(results: &[EigenResult]) -> PropertyReport {
    let mut tally = Tally::new("convergence", 0.0);
    for (k, r) in results.iter().enumerate() {
        let slack = if r.converged() { 0.0 } else { -r.grad_norm };
        tally.record(format!("run {k}: {:?} after {} iterations", r.termination, r.iterations), slack, Some(!r.converged()));
    }
    tally.finish()
}

/// Boundedness diagnostics for a set of first-mode runs; `run` indexes
/// into the input slice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub eps: f64,
    pub level_decay: Vec<(usize, Vec<LevelDecayRow>)>,
    pub truncation: Vec<(usize, TruncationTable)>,
    pub linfty: Vec<(usize, LinftyRow)>,
}

/// Level-decay, `U_k` and `L^1 -> L^inf` tables for every converged run,
/// with a report asserting that the `U_k` tables are monotone and the other
/// tables finite. Levels are `levels` log-spaced values below `max u`.
pub fn boundedness_diagnostics(
    results: &[EigenResult],
    kernel: &Kernel,
    levels: usize,
) -> Result<(Diagnostics, PropertyReport)> {
    let p = kernel.p();
    let eps = kernel.level_set_exponent();
    let mut diag = Diagnostics { eps, level_decay: Vec::new(), truncation: Vec::new(), linfty: Vec::new() };
    let mut tally = Tally::new("boundedness_diagnostics", 0.0);
    for (k, r) in results.iter().enumerate().filter(|(_, r)| r.converged()) {
        let u = r.u.normalized(p)?;
        let table = truncation_sequence(&u, p)?;
        let ok = table.monotone && table.rows.iter().all(|row| row.u_k.is_finite());
        tally.record(format!("run {k}: U_k monotone"), if ok { 0.0 } else { -1.0 }, Some(!ok));

        let rows = level_decay_diagnostic(&u, eps, &log_spaced_levels(u.max(), levels))?;
        let ok = rows.iter().all(|row| row.lhs.is_finite() && row.rhs_base.is_finite() && row.ratio.is_some_and(f64::is_finite));
        tally.record(format!("run {k}: level decay finite"), if ok { 0.0 } else { -1.0 }, Some(!ok));

        let row = linfty_bound_diagnostic(&[&u]).remove(0);
        let ok = row.sup_norm.is_finite() && row.l1_norm.is_finite() && row.ratio.is_finite();
        tally.record(format!("run {k}: L1 to Linf ratio finite"), if ok { 0.0 } else { -1.0 }, Some(!ok));

        diag.truncation.push((k, table));
        diag.level_decay.push((k, rows));
        diag.linfty.push((k, row));
    }
    tally.metric("eps", eps);
    tally.metric("runs", diag.truncation.len() as f64);
    Ok((diag, tally.finish()))
}

/// Runs the odd-mode solver and the first-mode solver on the same assembly.
pub fn first_and_odd(a: &Assembly, opts: &SolveOptions) -> Result<(EigenResult, EigenResult)> {
    let first = minimize_rayleigh(a, &SolveOptions { mode: SolveMode::First, ..opts.clone() }, None)?;
    let odd = solve_odd(a, opts)?;
    Ok((first, odd))
}
