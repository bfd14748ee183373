use std::time::Instant;

use nalgebra::DMatrix;

use super::{clamp_symmetric, Method, SoftMatchMatrix};
use crate::error::{Error, Result};

pub const DEFAULT_MU: f64 = 1e-2;

/// `|A - U V^T|_F^2 + mu (|U|_F^2 + |V|_F^2)`.
pub fn matchals_objective(a: &DMatrix<f64>, u: &DMatrix<f64>, v: &DMatrix<f64>, mu: f64) -> f64 {
    (a - u * v.transpose()).norm_squared() + mu * (u.norm_squared() + v.norm_squared())
}

/// Exact minimizer over `X` of `|B - X Y^T|^2 + mu |X|^2`:
/// `X = B Y (Y^T Y + mu I)^{-1}`.
fn ridge_update(b: &DMatrix<f64>, y: &DMatrix<f64>, mu: f64) -> Result<DMatrix<f64>> {
    let d = y.ncols();
    let gram = y.transpose() * y + DMatrix::identity(d, d) * mu;
    let chol = gram.cholesky().ok_or(Error::SingularSystem)?;
    // gram is symmetric, so X^T = gram^{-1} (B Y)^T
    let rhs = (b * y).transpose();
    let xt = chol.solve(&rhs);
    if xt.iter().any(|x| !x.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok(xt.transpose())
}

/// Deterministic start: the first `d` columns of `A` plus a unit diagonal
/// offset, so the start spans `d` directions even when `A` is sparse.
fn initial_factor(a: &DMatrix<f64>, d: usize) -> DMatrix<f64> {
    let n = a.nrows();
    DMatrix::from_fn(n, d, |i, c| a[(i, c)] + if i == c { 1.0 } else { 0.0 })
}

/// Low-rank factorization `A ~ U V^T` by alternating ridge-regularized least
/// squares; one iteration updates `U` then `V`. The soft match matrix is the
/// symmetrized product clamped to `[0, 1]`.
pub fn matchals(a: &DMatrix<f64>, d: usize, iters: usize, mu: f64) -> Result<SoftMatchMatrix> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::dims("matchals needs a square matrix"));
    }
    if d == 0 || d > n {
        return Err(Error::dims(format!("rank {d} outside [1, {n}]")));
    }
    if iters == 0 {
        return Err(Error::Spec("matchals needs at least one iteration".into()));
    }
    if !(mu > 0.0) {
        return Err(Error::Spec(format!("ridge parameter must be > 0, got {mu}")));
    }
    let start = Instant::now();
    let at = a.transpose();
    let mut v = initial_factor(a, d);
    let mut u = DMatrix::zeros(n, d);
    let mut trace = Vec::with_capacity(2 * iters);
    for _ in 0..iters {
        u = ridge_update(a, &v, mu)?;
        trace.push(matchals_objective(a, &u, &v, mu));
        v = ridge_update(&at, &u, mu)?;
        trace.push(matchals_objective(a, &u, &v, mu));
    }
    let uv = &u * v.transpose();
    let matrix = clamp_symmetric(uv);
    Ok(SoftMatchMatrix {
        matrix,
        method: Method::MatchAls,
        iterations: iters,
        runtime_s: start.elapsed().as_secs_f64(),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_matrix, test_rng};

    #[test]
    fn zero_matrix_collapses() {
        let s = matchals(&DMatrix::zeros(6, 6), 2, 10, DEFAULT_MU).unwrap();
        assert!(s.matrix.amax() < 1e-12);
    }

    #[test]
    fn objective_never_increases() {
        let mut rng = test_rng(12);
        for mu in [1e-3, 1e-2, 1.0] {
            let r = random_matrix(&mut rng, 12, 12);
            let a = (&r + r.transpose()) * 0.5;
            let s = matchals(&a, 4, 20, mu).unwrap();
            for w in s.trace.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12), "{} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let a = DMatrix::identity(3, 3);
        assert!(matchals(&a, 2, 0, DEFAULT_MU).is_err());
        assert!(matchals(&a, 2, 5, 0.0).is_err());
        assert!(matchals(&a, 4, 5, DEFAULT_MU).is_err());
    }
}
