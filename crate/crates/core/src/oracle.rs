//! Dense symmetric eigendecomposition of the p = 2 operator, used to
//! cross-check the iterative solver.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::assembly::Assembly;
use crate::energy::GridFunction;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct OracleResult {
    pub lambda_min: f64,
    pub vector: GridFunction,
    /// Smallest eigenvalue on the odd subspace `u = -reflect(u)`.
    pub lambda_min_odd: Option<f64>,
    /// Full spectrum, ascending.
    pub spectrum: Vec<f64>,
}

/// `M_ii = (2 sum_j w_ij + t_i) / h^n`, `M_ij = -2 w_ij / h^n`, so that
/// `h^n <M u, u> = energy(u)`.
pub fn operator_matrix(a: &Assembly) -> Result<DMatrix<f64>> {
    if a.p() != 2.0 {
        return Err(Error::OracleExponent(a.p()));
    }
    let n = a.len();
    let inv_vol = 1.0 / a.grid().cell_volume();
    let mut m = DMatrix::zeros(n, n);
    for (i, t) in a.tails().iter().enumerate() {
        m[(i, i)] = t * inv_vol;
    }
    for (i, j, w) in a.pairs() {
        let c = 2.0 * w * inv_vol;
        m[(i, j)] = -c;
        m[(j, i)] = -c;
        m[(i, i)] += c;
        m[(j, j)] += c;
    }
    Ok(m)
}

pub fn dense_oracle_p2(a: &Assembly) -> Result<OracleResult> {
    let m = operator_matrix(a)?;
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let spectrum: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let col = eig.eigenvectors.column(order[0]);
    let vector = GridFunction::new(a.grid().clone(), col.iter().copied().collect())?.normalized(2.0)?;

    let lambda_min_odd = match a.grid().symmetry_map() {
        Some(sigma) => odd_block_min(&m, sigma),
        None => None,
    };
    Ok(OracleResult { lambda_min: spectrum[0], vector, lambda_min_odd, spectrum })
}

/// Restriction of `M` to the span of `(e_i - e_{sigma(i)}) / sqrt(2)`.
fn odd_block_min(m: &DMatrix<f64>, sigma: &[usize]) -> Option<f64> {
    let reps: Vec<usize> = (0..sigma.len()).filter(|&i| i < sigma[i]).collect();
    if reps.is_empty() {
        return None;
    }
    let k = reps.len();
    let mut q = DMatrix::zeros(m.nrows(), k);
    let c = std::f64::consts::FRAC_1_SQRT_2;
    for (col, &i) in reps.iter().enumerate() {
        q[(i, col)] = c;
        q[(sigma[i], col)] = -c;
    }
    let block = q.transpose() * m * &q;
    let eig = SymmetricEigen::new(block);
    eig.eigenvalues.iter().copied().reduce(f64::min)
}
