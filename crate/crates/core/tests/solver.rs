//! First-mode and odd-mode solves against the dense p = 2 oracle and the
//! solver invariants.

use std::sync::Arc;

use frac_eig_core::properties::check_proportionality;
use frac_eig_core::solver::NOISE_FLOOR;
use frac_eig_core::*;

fn pure(a: f64, b: f64, n: usize, s: f64, p: f64) -> Assembly {
    let g = Arc::new(build_grid_1d(a, b, n).unwrap());
    assemble(g, &Kernel::fractional(s, p, 1).unwrap(), &AssemblyOptions::default()).unwrap()
}

fn assert_invariants(asm: &Assembly, r: &EigenResult) {
    assert!(r.converged(), "{:?} after {} iterations", r.termination, r.iterations);
    assert!(r.lambda > 0.0);
    assert!((lp_norm_p(&r.u, asm.p()) - 1.0).abs() < 1e-14);
    for w in r.history.windows(2) {
        assert!(w[1] <= w[0] + NOISE_FLOOR * w[0].abs(), "history increased: {} -> {}", w[0], w[1]);
    }
    let pivot = r.u.values().iter().fold(0.0f64, |m, x| if x.abs() > m.abs() { *x } else { m });
    assert!(pivot > 0.0);
}

#[test]
fn first_mode_matches_oracle() {
    let asm = pure(-1.0, 1.0, 64, 0.5, 2.0);
    let r = minimize_rayleigh(&asm, &SolveOptions::default(), None).unwrap();
    assert_invariants(&asm, &r);
    let o = dense_oracle_p2(&asm).unwrap();
    assert!((r.lambda - o.lambda_min).abs() <= 1e-8 * o.lambda_min);
    let prop = check_proportionality(&r.u, &o.vector, 2.0, 1e-6).unwrap();
    assert!(prop.passed, "{:?}", prop.metrics);
}

#[test]
fn single_node_solve() {
    let asm = pure(0.0, 1.0, 1, 0.5, 3.0);
    let r = minimize_rayleigh(&asm, &SolveOptions::default(), None).unwrap();
    assert_eq!(r.iterations, 1);
    assert!(r.converged());
    assert!((r.lambda - asm.tails()[0]).abs() < 1e-14 * r.lambda);
}

#[test]
fn seeds_agree_for_p3() {
    let asm = pure(-1.0, 1.0, 48, 0.5, 3.0);
    let runs: Vec<EigenResult> = (0..10)
        .map(|seed| minimize_rayleigh(&asm, &SolveOptions { seed, ..Default::default() }, None).unwrap())
        .collect();
    for r in &runs {
        assert_invariants(&asm, r);
        assert!(r.u.min() > 0.0);
        assert!((r.lambda - runs[0].lambda).abs() <= 1e-8 * runs[0].lambda);
        let d = check_proportionality(&r.u, &runs[0].u, 3.0, 1e-6).unwrap();
        assert!(d.passed, "{:?}", d.metrics);
    }
}

#[test]
fn odd_mode_matches_odd_block() {
    let asm = pure(-1.0, 1.0, 64, 0.5, 2.0);
    let r = solve_odd(&asm, &SolveOptions::default()).unwrap();
    assert_invariants(&asm, &r);
    let o = dense_oracle_p2(&asm).unwrap();
    let odd = o.lambda_min_odd.unwrap();
    assert!((r.lambda - odd).abs() <= 1e-8 * odd);
    let mirrored = reflect(asm.grid(), &r.u).unwrap();
    for (x, y) in r.u.values().iter().zip(mirrored.values()) {
        assert_eq!(*x, -*y);
    }
    assert!(r.u.max() > 0.0 && r.u.min() < 0.0);
}

#[test]
fn odd_mode_needs_symmetry() {
    let g = Arc::new(build_grid_2d(Rect::unit(), 0.25, &Mask::LShape).unwrap());
    let asm = assemble(g, &Kernel::fractional(0.5, 2.0, 2).unwrap(), &AssemblyOptions::default()).unwrap();
    assert_eq!(solve_odd(&asm, &SolveOptions::default()).unwrap_err(), Error::MissingSymmetry);
}

#[test]
fn residuals() {
    let asm = pure(-1.0, 1.0, 32, 0.5, 2.0);
    let o = dense_oracle_p2(&asm).unwrap();
    let exact = solver::residual_with(&asm, &o.vector, o.lambda_min, 64, 1).unwrap();
    assert!(exact <= 1e-10, "{exact}");

    for p in [1.5, 2.0, 3.0] {
        let asm = pure(-1.0, 1.0, 32, 0.5, p);
        let r = minimize_rayleigh(&asm, &SolveOptions::default(), None).unwrap();
        assert!(residual(&asm, &r).unwrap() <= 1e-6);
        assert!(r.residual <= 1e-6);
    }

    let asm = pure(-1.0, 1.0, 32, 0.5, 3.0);
    let g = asm.grid().clone();
    let wiggle = GridFunction::from_fn(g, |i| ((i * 7) % 5) as f64 + 0.5).unwrap();
    assert!(solver::residual_with(&asm, &wiggle, rayleigh(&asm, &wiggle).unwrap(), 64, 1).unwrap() > 1e-2);
}

#[test]
fn non_convergence_is_reported() {
    let asm = pure(-1.0, 1.0, 32, 0.5, 3.0);
    let opts = SolveOptions { max_iters: 3, ..Default::default() };
    let r = minimize_rayleigh(&asm, &opts, None).unwrap();
    assert_eq!(r.termination, Termination::MaxIterations);
    assert_eq!(r.iterations, 3);
}

#[test]
fn zero_init_rejected() {
    let asm = pure(-1.0, 1.0, 8, 0.5, 3.0);
    let zero = GridFunction::zeros(asm.grid().clone());
    assert_eq!(
        minimize_rayleigh(&asm, &SolveOptions::default(), Some(&zero)).unwrap_err(),
        Error::ZeroFunction
    );
    let bad = SolveOptions { backtrack: 1.5, ..Default::default() };
    assert!(minimize_rayleigh(&asm, &bad, None).is_err());
}

#[test]
fn sign_changing_init_becomes_positive() {
    let asm = pure(-1.0, 1.0, 24, 0.3, 2.5);
    let init = GridFunction::from_fn(asm.grid().clone(), |i| if i % 2 == 0 { 1.0 } else { -0.5 }).unwrap();
    let r = minimize_rayleigh(&asm, &SolveOptions::default(), Some(&init)).unwrap();
    assert_invariants(&asm, &r);
    assert!(r.u.min() > 0.0);
}

#[test]
fn two_dimensional_disk() {
    let g = Arc::new(build_grid_2d(Rect::new([-1.0, -1.0], [1.0, 1.0]), 0.2, &Mask::Disk).unwrap());
    let asm = assemble(g, &Kernel::fractional(0.5, 2.0, 2).unwrap(), &AssemblyOptions::default()).unwrap();
    let r = minimize_rayleigh(&asm, &SolveOptions::default(), None).unwrap();
    assert_invariants(&asm, &r);
    let o = dense_oracle_p2(&asm).unwrap();
    assert!((r.lambda - o.lambda_min).abs() <= 1e-8 * o.lambda_min);
}

#[test]
fn two_dimensional_p_below_two() {
    let g = Arc::new(build_grid_2d(Rect::unit(), 0.125, &Mask::All).unwrap());
    let asm = assemble(g, &Kernel::fractional(0.5, 1.5, 2).unwrap(), &AssemblyOptions::default()).unwrap();
    let r = minimize_rayleigh(&asm, &SolveOptions::default(), None).unwrap();
    assert_invariants(&asm, &r);
    assert!(r.u.min() > 0.0);
}

#[test]
fn eigenvalue_scales_with_domain() {
    for (s, p) in [(0.3, 2.0), (0.7, 3.0)] {
        let a1 = pure(0.0, 1.0, 24, s, p);
        let a2 = pure(0.0, 2.0, 24, s, p);
        let opts = SolveOptions::default();
        let l1 = minimize_rayleigh(&a1, &opts, None).unwrap().lambda;
        let l2 = minimize_rayleigh(&a2, &opts, None).unwrap().lambda;
        let predicted = 2f64.powf(-s * p) * l1;
        assert!((l2 - predicted).abs() <= 1e-12 * predicted, "{l2} vs {predicted}");
    }
}
