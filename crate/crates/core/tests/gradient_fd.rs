//! Rayleigh gradient against central finite differences.

use std::sync::Arc;

use frac_eig_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random vector whose entries are pairwise separated by at least `gap`.
fn distinct(rng: &mut ChaCha8Rng, n: usize, gap: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut sorted = v.clone();
        sorted.sort_by(f64::total_cmp);
        let ok = sorted.windows(2).all(|w| w[1] - w[0] > gap) && v.iter().all(|x| x.abs() > gap);
        if ok {
            return v;
        }
    }
}

fn fd_check(asm: &Assembly, rng: &mut ChaCha8Rng, points: usize) -> f64 {
    let n = asm.len();
    let step = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let u = distinct(rng, n, 1e-3);
        let g = rayleigh_gradient(asm, &GridFunction::new(asm.grid().clone(), u.clone()).unwrap()).unwrap();
        let mut fd = vec![0.0; n];
        for k in 0..n {
            let mut plus = u.clone();
            let mut minus = u.clone();
            plus[k] += step;
            minus[k] -= step;
            let rp = rayleigh(asm, &GridFunction::new(asm.grid().clone(), plus).unwrap()).unwrap();
            let rm = rayleigh(asm, &GridFunction::new(asm.grid().clone(), minus).unwrap()).unwrap();
            fd[k] = (rp - rm) / (2.0 * step);
        }
        let scale = fd.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let err = g.values().iter().zip(&fd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(err / scale);
    }
    worst
}

#[test]
fn gradient_matches_finite_differences_1d() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for p in [1.5, 2.0, 3.0] {
        let g = Arc::new(build_grid_1d(-1.0, 1.0, 10).unwrap());
        let asm = assemble(g, &Kernel::fractional(0.4, p, 1).unwrap(), &AssemblyOptions::default()).unwrap();
        let err = fd_check(&asm, &mut rng, 20);
        assert!(err <= 1e-5, "p = {p}: relative error {err}");
    }
}

#[test]
fn gradient_matches_finite_differences_2d_bump() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let g = Arc::new(build_grid_2d(Rect::unit(), 0.25, &Mask::Disk).unwrap());
    let k = Kernel::with_multiplier(0.6, 1.5, 2, Multiplier::SinBump, 0.5, 1.5).unwrap();
    let asm = assemble(g, &k, &AssemblyOptions::default()).unwrap();
    assert!(fd_check(&asm, &mut rng, 5) <= 1e-5);
}

#[test]
fn oracle_eigenvectors_are_critical_points() {
    let g = Arc::new(build_grid_1d(-1.0, 1.0, 24).unwrap());
    let asm = assemble(g, &Kernel::fractional(0.5, 2.0, 1).unwrap(), &AssemblyOptions::default()).unwrap();
    let o = dense_oracle_p2(&asm).unwrap();
    let grad = rayleigh_gradient(&asm, &o.vector).unwrap();
    assert!(grad.sup_norm() < 1e-10, "{}", grad.sup_norm());
}
