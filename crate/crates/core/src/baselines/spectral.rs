use std::time::Instant;

use nalgebra::DMatrix;

use super::{clamp_symmetric, topk_eig, Method, SoftMatchMatrix, DEFAULT_EIG_TOL};
use crate::error::{Error, Result};
use crate::nn::normalize_rows;

/// Rows of `U sqrt(max(L, 0))` from the `d` leading eigenpairs, normalized
/// to unit length (zero rows stay zero).
pub fn spectral_embedding(a: &DMatrix<f64>, d: usize) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if d == 0 || d > n {
        return Err(Error::dims(format!("embedding dimension {d} outside [1, {n}]")));
    }
    let eig = topk_eig(a, d, DEFAULT_EIG_TOL)?;
    let mut u = eig.vectors;
    for c in 0..d {
        let s = eig.values[c].max(0.0).sqrt();
        u.column_mut(c).scale_mut(s);
    }
    Ok(normalize_rows(&u).0)
}

/// Cosine similarities of the spectral embedding, clamped to `[0, 1]`.
pub fn spectral(a: &DMatrix<f64>, d: usize) -> Result<SoftMatchMatrix> {
    let start = Instant::now();
    let u = spectral_embedding(a, d)?;
    let matrix = clamp_symmetric(&u * u.transpose());
    Ok(SoftMatchMatrix {
        matrix,
        method: Method::Spectral,
        iterations: 0,
        runtime_s: start.elapsed().as_secs_f64(),
        trace: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_blocks() {
        let mut a = DMatrix::zeros(4, 4);
        a.view_mut((0, 0), (2, 2)).fill(1.0);
        a.view_mut((2, 2), (2, 2)).fill(1.0);
        let s = spectral(&a, 2).unwrap();
        assert!((s.matrix - &a).amax() < 1e-12);
    }

    #[test]
    fn zero_matrix_gives_zero() {
        let s = spectral(&DMatrix::zeros(5, 5), 3).unwrap();
        assert_eq!(s.matrix, DMatrix::zeros(5, 5));
    }

    #[test]
    fn rejects_bad_dimension() {
        assert!(spectral(&DMatrix::zeros(3, 3), 0).is_err());
        assert!(spectral(&DMatrix::zeros(3, 3), 4).is_err());
    }
}
