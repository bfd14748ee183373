//! Cycle-consistency reconstruction loss and the epipolar side loss.
//!
//! Both losses depend on the embedding only through `E E^T`, are averaged
//! over the `n^2` entries of the similarity matrix, and return their gradient
//! with respect to `E`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::GeometricPrior;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub lambda_geom: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { lambda_geom: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub total: f64,
    pub cycle: f64,
    /// Unweighted geometric term; zero when no prior was supplied.
    pub geom: f64,
    pub grad: DMatrix<f64>,
}

fn check_square(m: &DMatrix<f64>, n: usize, what: &str) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::dims(format!(
            "{what} is {}x{}, embedding has {n} rows",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `(1/n^2) sum_ij |(E E^T)_ij - A_ij|` and its subgradient
/// `(1/n^2) (S + S^T) E` with `S = sign(E E^T - A)`, `sign(0) = 0`.
pub fn cycle_loss(adjacency: &DMatrix<f64>, embedding: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
    let n = embedding.nrows();
    check_square(adjacency, n, "adjacency")?;
    if n == 0 {
        return Ok((0.0, embedding.clone()));
    }
    let scale = 1.0 / (n * n) as f64;
    let residual = embedding * embedding.transpose() - adjacency;
    let loss = residual.iter().map(|r| r.abs()).sum::<f64>() * scale;
    let s = residual.map(sign);
    let grad = (&s + s.transpose()) * embedding * scale;
    Ok((loss, grad))
}

/// `(1/n^2) sum_ij G_ij (E_i . E_j)` with gradient `(2/n^2) G E`.
pub fn geometric_loss(prior: &GeometricPrior, embedding: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
    let n = embedding.nrows();
    let g = prior.weights();
    check_square(g, n, "geometric prior")?;
    if n == 0 {
        return Ok((0.0, embedding.clone()));
    }
    let scale = 1.0 / (n * n) as f64;
    let ge = g * embedding;
    let loss = ge.dot(embedding) * scale;
    Ok((loss, ge * (2.0 * scale)))
}

/// Cycle loss plus `lambda_geom` times the geometric loss when a prior is
/// available.
pub fn combined_loss(
    adjacency: &DMatrix<f64>,
    prior: Option<&GeometricPrior>,
    embedding: &DMatrix<f64>,
    cfg: &LossConfig,
) -> Result<LossValue> {
    if !(cfg.lambda_geom >= 0.0) {
        return Err(Error::Spec(format!("lambda_geom must be >= 0, got {}", cfg.lambda_geom)));
    }
    let (cycle, mut grad) = cycle_loss(adjacency, embedding)?;
    let mut value = LossValue {
        total: cycle,
        cycle,
        geom: 0.0,
        grad: DMatrix::zeros(0, 0),
    };
    if let Some(prior) = prior {
        let (geom, geom_grad) = geometric_loss(prior, embedding)?;
        value.geom = geom;
        if cfg.lambda_geom != 0.0 {
            value.total += cfg.lambda_geom * geom;
            grad += geom_grad * cfg.lambda_geom;
        }
    }
    value.grad = grad;
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_matrix, test_rng};

    fn loop_cycle_loss(a: &DMatrix<f64>, e: &DMatrix<f64>) -> f64 {
        let n = e.nrows();
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut dot = 0.0;
                for k in 0..e.ncols() {
                    dot += e[(i, k)] * e[(j, k)];
                }
                total += (dot - a[(i, j)]).abs();
            }
        }
        total / (n * n) as f64
    }

    #[test]
    fn perfect_reconstruction_has_zero_loss() {
        // two universe points, three nodes: E = indicator, A = E E^T
        let e = DMatrix::from_row_slice(3, 2, &[1., 0., 0., 1., 1., 0.]);
        let a = &e * e.transpose();
        let (loss, grad) = cycle_loss(&a, &e).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(grad.amax(), 0.0);
    }

    #[test]
    fn identity_against_all_ones() {
        let a = DMatrix::from_element(2, 2, 1.0);
        let (loss, _) = cycle_loss(&a, &DMatrix::identity(2, 2)).unwrap();
        assert_eq!(loss, 0.5);
    }

    #[test]
    fn cycle_loss_matches_loop_and_finite_differences() {
        let mut rng = test_rng(3);
        let n = 10;
        let e = random_matrix(&mut rng, n, 4);
        let raw = random_matrix(&mut rng, n, n).map(|x| x.abs().min(1.0));
        let a = (&raw + raw.transpose()) * 0.5;
        let (loss, grad) = cycle_loss(&a, &e).unwrap();
        assert!((loss - loop_cycle_loss(&a, &e)).abs() < 1e-14);

        let h = 1e-6;
        let sim = &e * e.transpose() - &a;
        let mut checked = 0;
        for i in 0..n {
            // skip coordinates whose perturbation moves an entry of row i
            // (and column i) within 1e-4 of a kink
            if sim.row(i).iter().any(|r| r.abs() < 1e-4) {
                continue;
            }
            for k in 0..4 {
                let mut ep = e.clone();
                ep[(i, k)] += h;
                let mut em = e.clone();
                em[(i, k)] -= h;
                let fd = (loop_cycle_loss(&a, &ep) - loop_cycle_loss(&a, &em)) / (2.0 * h);
                let rel = (fd - grad[(i, k)]).abs() / fd.abs().max(grad[(i, k)].abs()).max(1e-12);
                assert!(rel <= 1e-5, "({i},{k}) fd {fd} analytic {}", grad[(i, k)]);
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn cycle_loss_rejects_bad_dims() {
        let e = DMatrix::zeros(3, 2);
        assert!(matches!(
            cycle_loss(&DMatrix::zeros(2, 2), &e),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
