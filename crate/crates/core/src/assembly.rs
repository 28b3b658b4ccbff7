//! Pair and tail weights of the discrete nonlocal energy.
//!
//! The energy of a grid function is
//! `2 * sum_{i<j} w_ij |u_i - u_j|^p + sum_i t_i |u_i|^p`, where the pair
//! weights discretize the interior double integral and the tail weights
//! carry the interaction of each node with the whole exterior.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Domain, Grid};
use crate::kernel::Kernel;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssemblyOptions {
    /// 1D only: pairs with `|i - j| <= near_field_radius` use the exact
    /// cell-pair integral instead of collocation. `0` disables it.
    pub near_field_radius: usize,
    /// Subcells per axis for the 2D near-field tail quadrature.
    pub tail_refine: usize,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions { near_field_radius: 0, tail_refine: 4 }
    }
}

/// Records how an [`Assembly`] was produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scheme {
    pub name: String,
    pub near_field_radius: usize,
    pub tail_refine: usize,
}

#[derive(Clone, Debug)]
pub struct Assembly {
    grid: Arc<Grid>,
    kernel: Kernel,
    /// Upper triangle `i < j`, row-major.
    weights: Vec<f64>,
    tails: Vec<f64>,
    scheme: Scheme,
}

#[inline]
pub(crate) fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

pub fn assemble(grid: Arc<Grid>, kernel: &Kernel, opts: &AssemblyOptions) -> Result<Assembly> {
    if kernel.n() != grid.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), got: kernel.n() });
    }
    if opts.tail_refine == 0 {
        return Err(Error::InvalidParameter("tail_refine must be at least 1".into()));
    }
    let n = grid.len();
    let vol2 = grid.cell_volume().powi(2);
    let near = if grid.dim() == 1 { opts.near_field_radius } else { 0 };

    let rows: Vec<Result<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = grid.node(i);
            (i + 1..n)
                .map(|j| {
                    let xj = grid.node(j);
                    let a = kernel.multiplier().value(&xi, &xj);
                    let offset = j - i;
                    let w = if offset <= near {
                        a * cell_pair_integral_1d(offset, grid.h(), kernel.sp())
                    } else {
                        vol2 * a * kernel.radial(grid.node_distance(i, j))
                    };
                    if !w.is_finite() {
                        return Err(Error::Overflow(format!("pair ({i}, {j})")));
                    }
                    Ok(w)
                })
                .collect()
        })
        .collect();
    let mut weights = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for row in rows {
        weights.extend(row?);
    }

    let tails = assemble_tails(&grid, kernel, opts)?;
    let name = if near > 0 { "collocation+near-field" } else { "collocation" };
    Ok(Assembly {
        grid,
        kernel: kernel.clone(),
        weights,
        tails,
        scheme: Scheme {
            name: name.to_string(),
            near_field_radius: near,
            tail_refine: opts.tail_refine,
        },
    })
}

/// Exact `∫_{C_i} ∫_{C_j} |x - y|^{-(1 + sp)} dy dx` for two 1D cells of
/// width `h` whose indices differ by `offset >= 1`.
///
/// With `F'' = r^{-beta}` the integral equals `F(d + h) - 2 F(d) + F(d - h)`
/// for `d = offset * h`. Adjacent cells diverge when `sp >= 1`.
pub fn cell_pair_integral_1d(offset: usize, h: f64, sp: f64) -> f64 {
    let m = offset as f64;
    if (sp - 1.0).abs() < 1e-14 {
        // F(r) = -ln r, so the integral is -ln(1 - 1/m^2), independent of h
        if offset == 1 {
            return f64::INFINITY;
        }
        return -(-1.0 / (m * m)).ln_1p();
    }
    let beta = 1.0 + sp;
    let gamma = 2.0 - beta;
    let lower = if offset == 1 {
        if gamma > 0.0 {
            0.0
        } else {
            return f64::INFINITY;
        }
    } else {
        (m - 1.0).powf(gamma)
    };
    let second = (m + 1.0).powf(gamma) - 2.0 * m.powf(gamma) + lower;
    h.powf(gamma) * second / ((1.0 - beta) * gamma)
}

/// Tail weights `t_i = 2 h^n ∫_{exterior} K(x_i, y) dy`.
///
/// Non-constant multipliers are frozen at `a(x_i, x_i)` over the exterior.
pub fn assemble_tails(grid: &Grid, kernel: &Kernel, opts: &AssemblyOptions) -> Result<Vec<f64>> {
    let n = grid.len();
    let sigma = grid.symmetry_map();
    // one representative per reflection orbit so that t_{sigma(i)} = t_i exactly
    let owner = |i: usize| sigma.map_or(i, |s| s[i].min(i));
    let computed: Vec<Option<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            if owner(i) != i {
                return None;
            }
            let x = grid.node(i);
            let a = kernel.multiplier().value(&x, &x);
            let integral = match grid.domain() {
                Domain::Interval { .. } => interval_tail(grid, kernel, i),
                Domain::Masked { .. } => planar_tail(grid, kernel, i, opts.tail_refine),
            };
            Some(2.0 * grid.cell_volume() * a * integral)
        })
        .collect();
    let tails: Vec<f64> = (0..n).map(|i| computed[owner(i)].expect("orbit owner computed")).collect();
    if let Some(i) = tails.iter().position(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::Overflow(format!("tail at node {i}")));
    }
    Ok(tails)
}

fn interval_tail(grid: &Grid, kernel: &Kernel, i: usize) -> f64 {
    let sp = kernel.sp();
    let h = grid.h();
    let left = (i as f64 + 0.5) * h;
    let right = ((grid.len() - i) as f64 - 0.5) * h;
    (left.powf(-sp) + right.powf(-sp)) / sp
}

/// `∫_{|y - x| > R} |x - y|^{-(2 + sp)} dy` in the plane.
pub fn far_field_tail(radius: f64, sp: f64) -> f64 {
    2.0 * PI * radius.powf(-sp) / sp
}

/// Analytic far field outside the smallest ball `B_R(x_i)` covering the
/// domain, plus midpoint quadrature over exterior lattice subcells inside it.
fn planar_tail(grid: &Grid, kernel: &Kernel, i: usize, refine: usize) -> f64 {
    let sp = kernel.sp();
    let h = grid.h();
    let c = grid.lattice()[i];
    // everything below is in units of h relative to the node
    let mut radius_sq: f64 = 0.0;
    for cell in grid.lattice() {
        for dx in [cell[0] - c[0], cell[0] - c[0] + 1] {
            for dy in [cell[1] - c[1], cell[1] - c[1] + 1] {
                let (fx, fy) = (dx as f64 - 0.5, dy as f64 - 0.5);
                radius_sq = radius_sq.max(fx * fx + fy * fy);
            }
        }
    }
    let radius = radius_sq.sqrt();
    let far = far_field_tail(radius * h, sp);

    let reach = radius.ceil() as i64 + 1;
    let sub = refine as f64;
    let mut near = 0.0;
    for di in -reach..=reach {
        for dj in -reach..=reach {
            if grid.cell_inside(c[0] + di, c[1] + dj) {
                continue;
            }
            for k in 0..refine {
                for l in 0..refine {
                    let fx = di as f64 - 0.5 + (k as f64 + 0.5) / sub;
                    let fy = dj as f64 - 0.5 + (l as f64 + 0.5) / sub;
                    let r = fx.hypot(fy);
                    if r < radius {
                        near += r.powf(-kernel.exponent());
                    }
                }
            }
        }
    }
    // subcell area (h/refine)^2 times (r h)^{-(2+sp)}
    let near = near * h.powf(-sp) / (sub * sub);
    far + near
}

impl Assembly {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn p(&self) -> f64 {
        self.kernel.p()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn scheme(&self) -> &Scheme {
        &self.scheme
    }

    /// Packed upper-triangle pair weights, `N(N-1)/2` entries.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn tails(&self) -> &[f64] {
        &self.tails
    }

    /// `w_ij` for `i != j`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        assert_ne!(i, j, "no self weight");
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.weights[pair_index(self.len(), a, b)]
    }

    /// Iterates `(i, j, w_ij)` over unordered pairs in fixed order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.len();
        (0..n).flat_map(move |i| {
            let start = if i + 1 < n { pair_index(n, i, i + 1) } else { 0 };
            self.weights[start..start + (n - i - 1)]
                .iter()
                .enumerate()
                .map(move |(k, &w)| (i, i + 1 + k, w))
        })
    }

    /// Copy with every tail weight negated; a deliberately broken energy
    /// used to exercise the verification suite.
    pub fn with_negated_tails(&self) -> Assembly {
        let mut out = self.clone();
        out.tails.iter_mut().for_each(|t| *t = -*t);
        out.scheme.name.push_str("+negated-tails");
        out
    }
}
