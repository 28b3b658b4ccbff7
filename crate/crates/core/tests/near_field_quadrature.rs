//! Closed-form cell-pair integrals against tensor Gauss-Legendre quadrature.

use frac_eig_core::assembly::cell_pair_integral_1d;

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = pk;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

fn quadrature(offset: usize, h: f64, sp: f64) -> f64 {
    let rule = gauss_legendre(40);
    let (ci, cj) = (0.5 * h, (offset as f64 + 0.5) * h);
    let mut total = 0.0;
    for (xa, wa) in &rule {
        for (xb, wb) in &rule {
            let x = ci + 0.5 * h * xa;
            let y = cj + 0.5 * h * xb;
            total += wa * wb * (y - x).abs().powf(-(1.0 + sp));
        }
    }
    total * 0.25 * h * h
}

#[test]
fn closed_form_matches_quadrature_on_separated_cells() {
    for sp in [0.3, 0.7, 1.0, 1.4, 2.1] {
        for offset in [2, 3, 5, 8] {
            for h in [0.1, 1.0 / 64.0] {
                let exact = cell_pair_integral_1d(offset, h, sp);
                let quad = quadrature(offset, h, sp);
                let rel = (exact - quad).abs() / quad;
                assert!(rel < 1e-10, "sp={sp} offset={offset} h={h}: {exact} vs {quad} ({rel:e})");
            }
        }
    }
}

#[test]
fn adjacent_cells_finite_only_below_one() {
    assert!(cell_pair_integral_1d(1, 0.1, 0.5).is_finite());
    assert!(cell_pair_integral_1d(1, 0.1, 1.0).is_infinite());
    assert!(cell_pair_integral_1d(1, 0.1, 1.5).is_infinite());
}

#[test]
fn far_pairs_approach_collocation() {
    let (h, sp) = (0.01, 0.6);
    let exact = cell_pair_integral_1d(40, h, sp);
    let colloc = h * h * (40.0 * h).powf(-(1.0 + sp));
    assert!((exact / colloc - 1.0).abs() < 1e-3);
}
