//! Dense complex LU solves backed by faer; callers keep nalgebra matrices.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::Mat;
use num_complex::Complex64;

use crate::em_network::CMatrix;

fn to_faer(m: &CMatrix) -> Mat<Complex64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: &Mat<Complex64>) -> CMatrix {
    CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn all_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Inverse through partial-pivoting LU; `None` if the result is not finite.
pub fn inverse(x: &CMatrix) -> Option<CMatrix> {
    let inv = from_faer(&to_faer(x).partial_piv_lu().inverse());
    all_finite(&inv).then_some(inv)
}

/// `X⁻¹ B`; `None` if the result is not finite.
pub fn solve(x: &CMatrix, rhs: &CMatrix) -> Option<CMatrix> {
    let sol = from_faer(&to_faer(x).partial_piv_lu().solve(to_faer(rhs)));
    all_finite(&sol).then_some(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_and_solve_agree_with_residual() {
        let n = 9;
        let x = CMatrix::from_fn(n, n, |i, j| {
            Complex64::new(((3 * i + 5 * j) % 7) as f64 + if i == j { 20.0 } else { 0.0 }, ((i * j) % 3) as f64)
        });
        let inv = inverse(&x).unwrap();
        assert!((&x * &inv - CMatrix::identity(n, n)).camax() < 1e-13);
        let b = CMatrix::from_fn(n, 2, |i, j| Complex64::new(i as f64, j as f64));
        let s = solve(&x, &b).unwrap();
        assert!((&x * s - b).camax() < 1e-12);
        assert!(inverse(&CMatrix::zeros(3, 3)).is_none());
    }
}
