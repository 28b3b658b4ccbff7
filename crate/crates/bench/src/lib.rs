//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use frac_eig_core::{assemble, build_grid_1d, build_grid_2d, Assembly, AssemblyOptions, GridFunction, Kernel, Mask, Rect};

/// `(-1, 1)` with `n` cells.
pub fn interval(n: usize, s: f64, p: f64) -> Assembly {
    let g = Arc::new(build_grid_1d(-1.0, 1.0, n).expect("valid interval"));
    assemble(g, &Kernel::fractional(s, p, 1).expect("valid kernel"), &AssemblyOptions::default()).expect("assembles")
}

/// Unit square at spacing `h`.
pub fn square(h: f64, s: f64, p: f64) -> Assembly {
    let g = Arc::new(build_grid_2d(Rect::unit(), h, &Mask::All).expect("valid box"));
    assemble(g, &Kernel::fractional(s, p, 2).expect("valid kernel"), &AssemblyOptions::default()).expect("assembles")
}

/// Deterministic positive bump on the grid of `a`.
pub fn bump(a: &Assembly) -> GridFunction {
    let g = a.grid().clone();
    let nodes = g.nodes().to_vec();
    GridFunction::from_fn(g, |i| 1.1 + (3.0 * nodes[i][0]).sin() * (2.0 * nodes[i][1] + 0.3).cos()).expect("finite")
}
