//! First eigenpair by projected gradient descent on the unit `L^p` sphere.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::assembly::Assembly;
use crate::energy::{form, rayleigh, rayleigh_with_gradient, weak_rows, GridFunction, PowerMap};
use crate::error::{Error, Result};
use crate::rng::stream;

/// Relative resolution of a computed Rayleigh value; the iteration history
/// is nonincreasing up to `NOISE_FLOOR * |R|` per step.
pub const NOISE_FLOOR: f64 = 16.0 * f64::EPSILON;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    /// Global minimizer of the Rayleigh quotient.
    First,
    /// Minimizer over odd functions of a reflection-symmetric grid.
    Odd,
}

/// Whether first-mode iterates are averaged over the domain's symmetry orbits.
///
/// For `p < 2` the energy has unbounded curvature where neighboring values
/// coincide, which is exactly what happens on symmetric nodes at the
/// minimizer; keeping iterates symmetric avoids that set. The first
/// eigenfunction is unique up to scaling, so it is symmetric anyway.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetrize {
    /// Only when `p < 2`.
    Auto,
    Always,
    Never,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub step0: f64,
    pub backtrack: f64,
    pub armijo: f64,
    pub enforce_sign: bool,
    pub seed: u64,
    pub mode: SolveMode,
    pub symmetrize: Symmetrize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            max_iters: 50_000,
            step0: 1.0,
            backtrack: 0.5,
            armijo: 1e-4,
            enforce_sign: true,
            seed: 0,
            mode: SolveMode::First,
            symmetrize: Symmetrize::Auto,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol = {} must be positive", self.tol)));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidParameter(format!("backtrack = {} not in (0, 1)", self.backtrack)));
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return Err(Error::InvalidParameter(format!("armijo = {} not in (0, 1)", self.armijo)));
        }
        if !(self.step0 > 0.0) {
            return Err(Error::InvalidParameter(format!("step0 = {} must be positive", self.step0)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    /// No step satisfied the sufficient-decrease test.
    Stalled,
}

#[derive(Clone, Debug)]
pub struct EigenResult {
    pub lambda: f64,
    /// Unit discrete `L^p` norm, largest-magnitude component positive.
    pub u: GridFunction,
    /// Gradient evaluations performed.
    pub iterations: usize,
    pub grad_norm: f64,
    /// `max_i |r_i - lambda h^n phi_p(u_i)| / lambda`, with `r` the weak-form rows.
    pub residual: f64,
    pub history: Vec<f64>,
    pub termination: Termination,
    pub mode: SolveMode,
}

impl EigenResult {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

/// Minimizes the Rayleigh quotient from `init` (or a seeded random start).
///
/// Each step is `u <- normalize(u - tau grad R(u))` with Armijo backtracking;
/// `enforce_sign` replaces the candidate by its absolute value, which never
/// increases `R`. `SolveMode::Odd` dispatches to [`solve_odd`].
pub fn minimize_rayleigh(
    a: &Assembly,
    opts: &SolveOptions,
    init: Option<&GridFunction>,
) -> Result<EigenResult> {
    opts.validate()?;
    if a.is_empty() {
        return Err(Error::InvalidGrid("grid has no nodes".into()));
    }
    match opts.mode {
        SolveMode::First => {
            let on = match opts.symmetrize {
                Symmetrize::Auto => a.p() < 2.0,
                Symmetrize::Always => true,
                Symmetrize::Never => false,
            };
            let orbits = on.then(|| a.grid().symmetry_orbits());
            descend(a, opts, init, Constraint::Even(orbits.as_deref()))
        }
        SolveMode::Odd => solve_odd_from(a, opts, init),
    }
}

/// Sign-changing critical point: the minimizer of `R` over odd functions.
pub fn solve_odd(a: &Assembly, opts: &SolveOptions) -> Result<EigenResult> {
    opts.validate()?;
    solve_odd_from(a, opts, None)
}

fn solve_odd_from(a: &Assembly, opts: &SolveOptions, init: Option<&GridFunction>) -> Result<EigenResult> {
    let sigma = a.grid().symmetry_map().ok_or(Error::MissingSymmetry)?.to_vec();
    let opts = SolveOptions { enforce_sign: false, mode: SolveMode::Odd, ..opts.clone() };
    let res = descend(a, &opts, init, Constraint::Odd(&sigma))?;
    debug_assert!(res.u.max() > 0.0 && res.u.min() < 0.0);
    Ok(res)
}

#[derive(Clone, Copy)]
enum Constraint<'a> {
    Even(Option<&'a [Vec<usize>]>),
    Odd(&'a [usize]),
}

impl Constraint<'_> {
    fn project(&self, v: &mut [f64]) {
        match self {
            Constraint::Even(None) => {}
            Constraint::Even(Some(orbits)) => orbit_mean(v, orbits),
            Constraint::Odd(sigma) => odd_part(v, sigma),
        }
    }
}

fn orbit_mean(v: &mut [f64], orbits: &[Vec<usize>]) {
    for orbit in orbits {
        if orbit.len() > 1 {
            let mean = orbit.iter().map(|&i| v[i]).sum::<f64>() / orbit.len() as f64;
            orbit.iter().for_each(|&i| v[i] = mean);
        }
    }
}

fn odd_part(v: &mut [f64], sigma: &[usize]) {
    let src = v.to_vec();
    for (i, &k) in sigma.iter().enumerate() {
        v[i] = 0.5 * (src[i] - src[k]);
    }
}

fn scale_to_sphere(v: &mut [f64], p: f64, vol: f64) -> Result<()> {
    let pm = PowerMap::new(p);
    let norm = vol * v.iter().map(|x| pm.abs_pow(*x)).sum::<f64>();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::ZeroFunction);
    }
    let c = norm.powf(-1.0 / p);
    v.iter_mut().for_each(|x| *x *= c);
    Ok(())
}

fn descend(
    a: &Assembly,
    opts: &SolveOptions,
    init: Option<&GridFunction>,
    constraint: Constraint<'_>,
) -> Result<EigenResult> {
    let grid = a.grid().clone();
    let p = a.p();
    let vol = grid.cell_volume();
    let n = grid.len();

    let mut u: Vec<f64> = match init {
        Some(f) => {
            if f.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: f.len() });
            }
            if f.is_zero() {
                return Err(Error::ZeroFunction);
            }
            f.values().to_vec()
        }
        None => {
            let mut rng = stream(opts.seed, 0);
            match constraint {
                Constraint::Even(_) => (0..n).map(|_| rng.random_range(0.1..1.1)).collect(),
                Constraint::Odd(_) => (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            }
        }
    };
    constraint.project(&mut u);
    if opts.enforce_sign {
        u.iter_mut().for_each(|x| *x = x.abs());
    }
    scale_to_sphere(&mut u, p, vol)?;

    let mut current = GridFunction::new(grid.clone(), u)?;
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut termination = Termination::MaxIterations;
    let mut step = opts.step0;
    let mut previous: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut grad_norm = f64::INFINITY;

    while iterations < opts.max_iters {
        let (r, g) = rayleigh_with_gradient(a, &current)?;
        iterations += 1;
        history.push(r);
        grad_norm = g.sup_norm();
        if grad_norm <= opts.tol {
            termination = Termination::Converged;
            break;
        }
        let g = g.into_values();
        let g_sq: f64 = g.iter().map(|x| x * x).sum();

        // Barzilai-Borwein guess for the trial step, refined by backtracking
        if let Some((u_prev, g_prev)) = &previous {
            let (mut ss, mut sy) = (0.0, 0.0);
            for k in 0..n {
                let s = current.values()[k] - u_prev[k];
                ss += s * s;
                sy += s * (g[k] - g_prev[k]);
            }
            if sy > 0.0 && ss > 0.0 {
                step = ss / sy;
            } else {
                step /= opts.backtrack;
            }
        }

        let mut accepted = None;
        let mut tau = step;
        for _ in 0..80 {
            let mut cand: Vec<f64> =
                current.values().iter().zip(&g).map(|(x, d)| x - tau * d).collect();
            constraint.project(&mut cand);
            if opts.enforce_sign {
                cand.iter_mut().for_each(|x| *x = x.abs());
            }
            if scale_to_sphere(&mut cand, p, vol).is_ok() {
                let cand = GridFunction::new(grid.clone(), cand)?;
                let rc = rayleigh(a, &cand)?;
                let wanted = opts.armijo * tau * g_sq;
                if rc <= r - wanted {
                    accepted = Some(cand);
                    break;
                }
                // Below the rounding floor of R the decrease cannot be measured;
                // accept if R stays within the floor and the slope along the
                // search direction is still negative at the candidate.
                let floor = NOISE_FLOOR * r.abs();
                if wanted < floor && rc <= r + floor {
                    let (_, gc) = rayleigh_with_gradient(a, &cand)?;
                    let slope: f64 = gc.values().iter().zip(&g).map(|(x, y)| x * y).sum();
                    if slope > 0.0 {
                        accepted = Some(cand);
                        break;
                    }
                }
            }
            tau *= opts.backtrack;
        }
        match accepted {
            Some(next) => {
                step = tau;
                previous = Some((current.values().to_vec(), g));
                current = next;
            }
            None => {
                termination = Termination::Stalled;
                break;
            }
        }
    }

    let u = current.normalized(p)?;
    let lambda = rayleigh(a, &u)?;
    let pm = PowerMap::new(p);
    let rows = weak_rows(a, u.values());
    let residual = rows
        .iter()
        .zip(u.values())
        .map(|(row, x)| (row - lambda * vol * pm.phi(*x)).abs())
        .fold(0.0, f64::max)
        / lambda.abs();
    Ok(EigenResult {
        lambda,
        u,
        iterations,
        grad_norm,
        residual,
        history,
        termination,
        mode: opts.mode,
    })
}

/// Weak-formulation defect
/// `max_eta |E(u, eta) - lambda h^n sum_i phi_p(u_i) eta_i| / lambda`
/// over 64 seeded test functions with unit sup-norm.
pub fn residual(a: &Assembly, res: &EigenResult) -> Result<f64> {
    residual_with(a, &res.u, res.lambda, 64, 0x7e57)
}

pub fn residual_with(a: &Assembly, u: &GridFunction, lambda: f64, probes: usize, seed: u64) -> Result<f64> {
    if u.is_zero() {
        return Err(Error::ZeroFunction);
    }
    let pm = PowerMap::new(a.p());
    let vol = a.grid().cell_volume();
    let mut worst: f64 = 0.0;
    for k in 0..probes {
        let mut rng = stream(seed, k as u64);
        let mut eta: Vec<f64> = (0..u.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sup = eta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if sup > 0.0 {
            eta.iter_mut().for_each(|v| *v /= sup);
        }
        let eta = GridFunction::new(u.grid().clone(), eta)?;
        let lhs = form(a, u, &eta)?;
        let rhs: f64 = lambda * vol * u.values().iter().zip(eta.values()).map(|(x, e)| pm.phi(*x) * e).sum::<f64>();
        worst = worst.max((lhs - rhs).abs() / lambda.abs());
    }
    Ok(worst)
}
