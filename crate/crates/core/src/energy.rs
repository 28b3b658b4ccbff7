//! Discrete energy, weak form, operator and Rayleigh quotient.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::assembly::Assembly;
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Values on the interior nodes of a grid, zero on the exterior.
#[derive(Clone, Debug)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("grid function has non-finite values".into()));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Self {
        let values = vec![c; grid.len()];
        GridFunction { grid, values }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl FnMut(usize) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(f).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction { grid: self.grid.clone(), values: self.values.iter().map(|v| f(*v)).collect() }
    }

    pub fn scaled(&self, c: f64) -> GridFunction {
        self.map(|v| c * v)
    }

    pub fn abs(&self) -> GridFunction {
        self.map(f64::abs)
    }

    /// Rescales to unit discrete `L^p` norm with the largest-magnitude
    /// component positive (first index wins ties).
    pub fn normalized(&self, p: f64) -> Result<GridFunction> {
        let norm = lp_norm_p(self, p);
        if norm == 0.0 {
            return Err(Error::ZeroFunction);
        }
        let mut pivot = 0;
        for (i, v) in self.values.iter().enumerate() {
            if v.abs() > self.values[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if self.values[pivot] < 0.0 { -1.0 } else { 1.0 };
        Ok(self.scaled(sign / norm.powf(1.0 / p)))
    }
}

/// `phi_p(t) = |t|^{p-2} t` and `|t|^p`, with exact fast paths for p = 2, 3.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerMap {
    p: f64,
    kind: PowerKind,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum PowerKind {
    Square,
    Cube,
    General,
}

impl PowerMap {
    pub fn new(p: f64) -> Self {
        let kind = if p == 2.0 {
            PowerKind::Square
        } else if p == 3.0 {
            PowerKind::Cube
        } else {
            PowerKind::General
        };
        PowerMap { p, kind }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    #[inline]
    pub fn phi(&self, t: f64) -> f64 {
        match self.kind {
            PowerKind::Square => t,
            PowerKind::Cube => t * t.abs(),
            PowerKind::General => {
                if t == 0.0 {
                    0.0
                } else {
                    t.abs().powf(self.p - 1.0).copysign(t)
                }
            }
        }
    }

    #[inline]
    pub fn abs_pow(&self, t: f64) -> f64 {
        match self.kind {
            PowerKind::Square => t * t,
            PowerKind::Cube => t * t * t.abs(),
            PowerKind::General => t.abs().powf(self.p),
        }
    }
}

/// Neumaier compensated accumulator; order of `add` calls fixes the result.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyValue {
    pub k_interior: f64,
    pub k_tail: f64,
    pub total: f64,
}

fn check_len(a: &Assembly, u: &GridFunction) -> Result<()> {
    if u.len() != a.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: u.len() });
    }
    Ok(())
}

/// `2 sum_{i<j} w_ij |u_i - u_j|^p + sum_i t_i |u_i|^p`.
pub fn energy(a: &Assembly, u: &GridFunction) -> Result<EnergyValue> {
    check_len(a, u)?;
    let pm = PowerMap::new(a.p());
    let v = u.values();
    let mut interior = CompensatedSum::default();
    for (i, j, w) in a.pairs() {
        interior.add(w * pm.abs_pow(v[i] - v[j]));
    }
    let mut tail = CompensatedSum::default();
    for (t, x) in a.tails().iter().zip(v) {
        tail.add(t * pm.abs_pow(*x));
    }
    let k_interior = 2.0 * interior.value();
    let k_tail = tail.value();
    Ok(EnergyValue { k_interior, k_tail, total: k_interior + k_tail })
}

/// `E(u, v) = 2 sum_{i<j} w_ij phi_p(u_i - u_j)(v_i - v_j) + sum_i t_i phi_p(u_i) v_i`.
pub fn form(a: &Assembly, u: &GridFunction, v: &GridFunction) -> Result<f64> {
    check_len(a, u)?;
    check_len(a, v)?;
    let pm = PowerMap::new(a.p());
    let (x, y) = (u.values(), v.values());
    let mut interior = CompensatedSum::default();
    for (i, j, w) in a.pairs() {
        interior.add(w * pm.phi(x[i] - x[j]) * (y[i] - y[j]));
    }
    let mut tail = CompensatedSum::default();
    for ((t, xi), yi) in a.tails().iter().zip(x).zip(y) {
        tail.add(t * pm.phi(*xi) * yi);
    }
    Ok(2.0 * interior.value() + tail.value())
}

/// Row sums `2 sum_{j != i} w_ij phi_p(u_i - u_j) + t_i phi_p(u_i)`, i.e. the
/// coefficient vector of the weak form: `E(u, eta) = sum_i r_i eta_i`.
pub(crate) fn weak_rows(a: &Assembly, v: &[f64]) -> Vec<f64> {
    let pm = PowerMap::new(a.p());
    let mut rows: Vec<f64> = a.tails().iter().zip(v).map(|(t, x)| t * pm.phi(*x)).collect();
    for (i, j, w) in a.pairs() {
        let f = 2.0 * w * pm.phi(v[i] - v[j]);
        rows[i] += f;
        rows[j] -= f;
    }
    rows
}

/// Discrete nonlocal operator
/// `g_i = h^{-n} [2 sum_{j != i} w_ij phi_p(u_j - u_i) - t_i phi_p(u_i)]`.
pub fn apply_operator(a: &Assembly, u: &GridFunction) -> Result<GridFunction> {
    check_len(a, u)?;
    let inv_vol = 1.0 / a.grid().cell_volume();
    let values = weak_rows(a, u.values()).into_iter().map(|r| -r * inv_vol).collect();
    Ok(GridFunction { grid: u.grid().clone(), values })
}

/// `h^n sum_i |u_i|^p`
pub fn lp_norm_p(u: &GridFunction, p: f64) -> f64 {
    let pm = PowerMap::new(p);
    let mut acc = CompensatedSum::default();
    for x in u.values() {
        acc.add(pm.abs_pow(*x));
    }
    u.grid().cell_volume() * acc.value()
}

pub fn rayleigh(a: &Assembly, u: &GridFunction) -> Result<f64> {
    let e = energy(a, u)?;
    let d = lp_norm_p(u, a.p());
    if d == 0.0 {
        return Err(Error::ZeroFunction);
    }
    Ok(e.total / d)
}

/// Gradient of the Rayleigh quotient with respect to the nodal values:
/// `(p / |u|_p^p) [r_i - R(u) h^n phi_p(u_i)]` with `r` the weak-form rows.
pub fn rayleigh_gradient(a: &Assembly, u: &GridFunction) -> Result<GridFunction> {
    Ok(rayleigh_with_gradient(a, u)?.1)
}

/// Rayleigh value and gradient in one pass.
pub fn rayleigh_with_gradient(a: &Assembly, u: &GridFunction) -> Result<(f64, GridFunction)> {
    let r = rayleigh(a, u)?;
    let p = a.p();
    let pm = PowerMap::new(p);
    let d = lp_norm_p(u, p);
    let vol = a.grid().cell_volume();
    let rows = weak_rows(a, u.values());
    let scale = p / d;
    let values = rows
        .into_iter()
        .zip(u.values())
        .map(|(row, x)| scale * (row - r * vol * pm.phi(*x)))
        .collect();
    Ok((r, GridFunction { grid: u.grid().clone(), values }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble, AssemblyOptions};
    use crate::grid::build_grid_1d;
    use crate::kernel::Kernel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(a: f64, b: f64, n: usize, s: f64, p: f64) -> Assembly {
        let g = Arc::new(build_grid_1d(a, b, n).unwrap());
        assemble(g, &Kernel::fractional(s, p, 1).unwrap(), &AssemblyOptions::default()).unwrap()
    }

    fn random_fn(a: &Assembly, rng: &mut ChaCha8Rng) -> GridFunction {
        GridFunction::from_fn(a.grid().clone(), |_| rng.random_range(-1.0..1.0)).unwrap()
    }

    #[test]
    fn zero_and_constant_energy() {
        let a = setup(0.0, 1.0, 8, 0.5, 3.0);
        let z = GridFunction::zeros(a.grid().clone());
        assert_eq!(energy(&a, &z).unwrap().total, 0.0);
        let one = GridFunction::constant(a.grid().clone(), 1.0);
        let e = energy(&a, &one).unwrap();
        assert_eq!(e.k_interior, 0.0);
        let tails: f64 = a.tails().iter().sum();
        assert!((e.total - tails).abs() < 1e-13 * tails);
    }

    #[test]
    fn form_on_diagonal_is_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for p in [1.5, 2.0, 3.0] {
            let a = setup(-1.0, 1.0, 12, 0.4, p);
            for _ in 0..50 {
                let u = random_fn(&a, &mut rng);
                let e = energy(&a, &u).unwrap().total;
                assert!((form(&a, &u, &u).unwrap() - e).abs() < 1e-12 * e);
            }
        }
    }

    #[test]
    fn form_is_linear_in_second_argument() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = setup(0.0, 1.0, 10, 0.6, 1.7);
        let (u, v, w) = (random_fn(&a, &mut rng), random_fn(&a, &mut rng), random_fn(&a, &mut rng));
        let (al, be) = (0.7, -2.3);
        let comb = GridFunction::from_fn(a.grid().clone(), |i| al * v.values()[i] + be * w.values()[i])
            .unwrap();
        let lhs = form(&a, &u, &comb).unwrap();
        let rhs = al * form(&a, &u, &v).unwrap() + be * form(&a, &u, &w).unwrap();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn bilinear_symmetric_for_p2() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = setup(0.0, 1.0, 10, 0.6, 2.0);
        let (u, v) = (random_fn(&a, &mut rng), random_fn(&a, &mut rng));
        let uv = form(&a, &u, &v).unwrap();
        let vu = form(&a, &v, &u).unwrap();
        assert!((uv - vu).abs() < 1e-12 * uv.abs().max(1.0));
        let g = apply_operator(&a, &u.scaled(3.0)).unwrap();
        let g1 = apply_operator(&a, &u).unwrap();
        for (x, y) in g.values().iter().zip(g1.values()) {
            assert!((x - 3.0 * y).abs() < 1e-12 * y.abs().max(1.0));
        }
    }

    #[test]
    fn operator_weak_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = setup(-1.0, 1.0, 16, 0.3, 2.5);
        let vol = a.grid().cell_volume();
        for _ in 0..20 {
            let (u, eta) = (random_fn(&a, &mut rng), random_fn(&a, &mut rng));
            let g = apply_operator(&a, &u).unwrap();
            let lhs: f64 = -vol * g.values().iter().zip(eta.values()).map(|(x, y)| x * y).sum::<f64>();
            let rhs = form(&a, &u, &eta).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1e-300), "{lhs} vs {rhs}");
        }
        let zero = apply_operator(&a, &GridFunction::zeros(a.grid().clone())).unwrap();
        assert!(zero.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_node_operator() {
        let a = setup(0.0, 1.0, 1, 0.5, 3.0);
        let u = GridFunction::constant(a.grid().clone(), 2.0);
        let g = apply_operator(&a, &u).unwrap();
        let t0 = a.tails()[0];
        assert!((g.values()[0] + t0 * 4.0 / 1.0).abs() < 1e-13 * t0);
    }

    #[test]
    fn lp_norm_values() {
        let g = Arc::new(build_grid_1d(0.0, 1.0, 2).unwrap());
        let u = GridFunction::new(g.clone(), vec![1.0, -2.0]).unwrap();
        assert_eq!(lp_norm_p(&u, 3.0), 4.5);
        assert_eq!(lp_norm_p(&GridFunction::zeros(g), 3.0), 0.0);
        let g = Arc::new(build_grid_1d(0.0, 1.0, 37).unwrap());
        assert!((lp_norm_p(&GridFunction::constant(g, 1.0), 1.5) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rayleigh_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = setup(0.0, 1.0, 9, 0.5, 1.5);
        let u = random_fn(&a, &mut rng);
        let r = rayleigh(&a, &u).unwrap();
        for c in [-3.0, 0.1, 7.0] {
            assert!((rayleigh(&a, &u.scaled(c)).unwrap() - r).abs() < 1e-13 * r);
        }
        assert_eq!(rayleigh(&a, &GridFunction::zeros(a.grid().clone())), Err(Error::ZeroFunction));
    }

    #[test]
    fn single_node_rayleigh() {
        let a = setup(0.0, 2.0, 1, 0.3, 2.5);
        for v in [0.5, -4.0] {
            let u = GridFunction::constant(a.grid().clone(), v);
            let r = rayleigh(&a, &u).unwrap();
            assert!((r - a.tails()[0] / 2.0).abs() < 1e-14 * r);
        }
    }

    #[test]
    fn gradient_orthogonal_to_iterate() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for p in [1.5, 2.0, 3.0] {
            let a = setup(-1.0, 1.0, 14, 0.5, p);
            let u = random_fn(&a, &mut rng);
            let g = rayleigh_gradient(&a, &u).unwrap();
            let dot: f64 = g.values().iter().zip(u.values()).map(|(x, y)| x * y).sum();
            let scale: f64 = g.values().iter().zip(u.values()).map(|(x, y)| (x * y).abs()).sum();
            assert!(dot.abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn power_map_fast_paths_agree() {
        for t in [-2.5f64, -1.0, -0.3, 0.0, 0.7, 3.0] {
            for p in [2.0, 3.0] {
                let fast = PowerMap::new(p);
                let general = t.abs().powf(p - 1.0) * t.signum();
                let general = if t == 0.0 { 0.0 } else { general };
                assert!((fast.phi(t) - general).abs() < 1e-14);
                assert!((fast.abs_pow(t) - t.abs().powf(p)).abs() < 1e-13);
            }
            assert_eq!(PowerMap::new(1.5).phi(0.0), 0.0);
        }
    }

    #[test]
    fn normalization_sign_and_norm() {
        let g = Arc::new(build_grid_1d(0.0, 1.0, 3).unwrap());
        let u = GridFunction::new(g, vec![0.5, -3.0, 1.0]).unwrap();
        let n = u.normalized(2.5).unwrap();
        assert!(n.values()[1] > 0.0);
        assert!((lp_norm_p(&n, 2.5) - 1.0).abs() < 1e-14);
    }
}
