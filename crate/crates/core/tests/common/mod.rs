#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

pub fn orthogonal(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    gaussian(rng, d, d).qr().q()
}

/// Cyclic Jacobi rotations on a symmetric matrix: eigenvalues (descending)
/// and matching eigenvector columns.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if off.sqrt() < 1e-14 * m.norm().max(1.0) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let values = DVector::from_fn(n, |k, _| m[(order[k], order[k])]);
    let vectors = DMatrix::from_fn(n, n, |r, k| v[(r, order[k])]);
    (values, vectors)
}

/// Spectral soft matches computed from the Jacobi oracle.
pub fn spectral_oracle(a: &DMatrix<f64>, d: usize) -> DMatrix<f64> {
    let (values, vectors) = jacobi_eigen(a);
    let n = a.nrows();
    let mut y = DMatrix::zeros(n, d);
    for k in 0..d {
        let s = values[k].max(0.0).sqrt();
        for i in 0..n {
            y[(i, k)] = vectors[(i, k)] * s;
        }
    }
    for i in 0..n {
        let norm = y.row(i).norm();
        if norm > 0.0 {
            for k in 0..d {
                y[(i, k)] /= norm;
            }
        }
    }
    (&y * y.transpose()).map(|x| x.clamp(0.0, 1.0))
}
