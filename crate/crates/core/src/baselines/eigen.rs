use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const DEFAULT_EIG_TOL: f64 = 1e-8;
const ORTHOGONALITY_TOL: f64 = 1e-8;

/// Leading eigenpairs, eigenvalues in descending order; column `k` of
/// `vectors` pairs with `values[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPairs {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

/// The `k` algebraically largest eigenpairs of a symmetric matrix.
///
/// The dense decomposition is nalgebra's symmetric QR iteration; the result
/// is then checked against the residual contract `|A v - l v| <= tol |A|`
/// (spectral norm) and mutual orthogonality.
pub fn topk_eig(a: &DMatrix<f64>, k: usize, tol: f64) -> Result<EigenPairs> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::dims(format!("eigensolver needs a square matrix, got {}x{}", n, a.ncols())));
    }
    if k > n {
        return Err(Error::dims(format!("requested {k} eigenpairs of a {n}x{n} matrix")));
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let values = DVector::from_fn(k, |r, _| eig.eigenvalues[order[r]]);
    let mut vectors = DMatrix::zeros(n, k);
    for (c, &idx) in order.iter().take(k).enumerate() {
        vectors.set_column(c, &eig.eigenvectors.column(idx));
    }

    let norm = eig.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let bound = tol * norm;
    let mut worst: f64 = 0.0;
    for c in 0..k {
        let v = vectors.column(c);
        worst = worst.max((&sym * v - v * values[c]).norm());
    }
    if worst > bound {
        return Err(Error::ConvergenceFailure {
            residual: worst,
            tolerance: bound,
        });
    }
    let gram = vectors.transpose() * &vectors - DMatrix::identity(k, k);
    let orth = if k > 0 { gram.amax() } else { 0.0 };
    if orth > ORTHOGONALITY_TOL {
        return Err(Error::ConvergenceFailure {
            residual: orth,
            tolerance: ORTHOGONALITY_TOL,
        });
    }
    Ok(EigenPairs { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_matrix, test_rng};

    #[test]
    fn diagonal_case() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let e = topk_eig(&a, 2, DEFAULT_EIG_TOL).unwrap();
        assert_eq!(e.values.as_slice(), &[3.0, 2.0]);
        assert_eq!(e.vectors.column(0).map(f64::abs), DVector::from_vec(vec![1.0, 0.0, 0.0]));
        assert_eq!(e.vectors.column(1).map(f64::abs), DVector::from_vec(vec![0.0, 0.0, 1.0]));
    }

    #[test]
    fn identity_has_any_unit_vector() {
        let a = DMatrix::<f64>::identity(4, 4);
        let e = topk_eig(&a, 1, DEFAULT_EIG_TOL).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-15);
        assert!((e.vectors.column(0).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_k_above_n() {
        assert!(topk_eig(&DMatrix::identity(2, 2), 3, DEFAULT_EIG_TOL).is_err());
    }

    #[test]
    fn full_decomposition_reconstructs() {
        let mut rng = test_rng(30);
        let b = random_matrix(&mut rng, 20, 20);
        let a = &b + b.transpose();
        let e = topk_eig(&a, 20, DEFAULT_EIG_TOL).unwrap();
        let rebuilt = &e.vectors * DMatrix::from_diagonal(&e.values) * e.vectors.transpose();
        assert!((rebuilt - &a).amax() <= 1e-8 * a.amax());
        assert!(e.values.as_slice().windows(2).all(|w| w[0] >= w[1]));
        assert!((e.values.sum() - a.trace()).abs() < 1e-9);
    }
}
