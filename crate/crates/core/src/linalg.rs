use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Reciprocal condition proxy below which a Cholesky factor is treated as singular.
const PIVOT_RATIO_FLOOR: f64 = 1e-14;

/// Standard Kronecker product; the first operand's index varies slowest.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |r, c| a[(r / br, c / bc)] * b[(r % br, c % bc)])
}

pub fn kron_all(ms: &[DMatrix<f64>]) -> DMatrix<f64> {
    ms.iter().fold(DMatrix::from_element(1, 1, 1.0), |acc, m| kron(&acc, m))
}

/// Solves `S x = rhs` for symmetric positive definite `S`.
pub fn spd_solve(s: &DMatrix<f64>, rhs: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    let sym = (s + s.transpose()) * 0.5;
    let chol = sym.cholesky().ok_or_else(|| Error::Singular(context.to_string()))?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    if !(lo > 0.0) || (lo * lo) < PIVOT_RATIO_FLOOR * hi * hi {
        return Err(Error::Singular(context.to_string()));
    }
    Ok(chol.solve(rhs))
}

/// Minimum-norm solution of `S x = rhs` for symmetric positive semidefinite `S`;
/// falls back from Cholesky to a pseudo-inverse when `S` is singular.
pub fn psd_solve_min_norm(s: &DMatrix<f64>, rhs: &DMatrix<f64>) -> DMatrix<f64> {
    if let Ok(x) = spd_solve(s, rhs, "") {
        return x;
    }
    let sym = (s + s.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let smax = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * smax;
    let inv_diag = eig.eigenvalues.map(|v| if v > tol { 1.0 / v } else { 0.0 });
    let v = &eig.eigenvectors;
    v * DMatrix::from_diagonal(&inv_diag) * v.transpose() * rhs
}

/// `rows × cols` matrix with orthonormal columns drawn from a Gaussian sketch.
pub fn random_orthonormal(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q().columns(0, cols).into_owned()
}

/// Leading `cols` left singular vectors of `m`, completed with random
/// orthonormal directions when `m` has fewer usable singular vectors.
pub fn leading_left_singular(m: &DMatrix<f64>, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let rows = m.nrows();
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("svd computed with U");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let smax = order.first().map(|&j| svd.singular_values[j]).unwrap_or(0.0);

    let mut basis: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(cols);
    for &j in &order {
        if basis.len() == cols || svd.singular_values[j] <= 1e-12 * smax.max(f64::MIN_POSITIVE) {
            break;
        }
        basis.push(u.column(j).into_owned());
    }
    while basis.len() < cols {
        let mut v = nalgebra::DVector::from_fn(rows, |_, _| rng.sample::<f64, _>(StandardNormal));
        for b in &basis {
            let proj = b.dot(&v);
            v -= b * proj;
        }
        let n = v.norm();
        if n > 1e-8 {
            basis.push(v / n);
        }
    }
    DMatrix::from_columns(&basis)
}
