//! Small dense solves for the explainers' normal equations.

use nalgebra::{DMatrix, DVector};

/// Solves `a x = b` for a symmetric positive (semi)definite `a` given in
/// row-major order. Falls back to LU and then to an SVD least-squares
/// solution when the system is singular.
pub(crate) fn solve_symmetric(n: usize, a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    if n == 0 {
        return Some(Vec::new());
    }
    let m = DMatrix::from_row_slice(n, n, a);
    let rhs = DVector::from_column_slice(b);
    if let Some(chol) = m.clone().cholesky() {
        return Some(chol.solve(&rhs).iter().copied().collect());
    }
    if let Some(x) = m.clone().lu().solve(&rhs) {
        if x.iter().all(|v| v.is_finite()) {
            return Some(x.iter().copied().collect());
        }
    }
    m.svd(true, true)
        .solve(&rhs, 1e-12)
        .ok()
        .map(|x| x.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_spd_and_singular_systems() {
        let x = solve_symmetric(2, &[4.0, 1.0, 1.0, 3.0], &[1.0, 2.0]).unwrap();
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-12);
        assert!((x[0] + 3.0 * x[1] - 2.0).abs() < 1e-12);
        // rank one: minimum-norm solution
        let x = solve_symmetric(2, &[1.0, 1.0, 1.0, 1.0], &[2.0, 2.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-9 && (x[1] - 1.0).abs() < 1e-9);
    }
}
