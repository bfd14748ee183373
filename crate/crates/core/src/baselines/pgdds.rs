use std::time::Instant;

use nalgebra::DMatrix;

use super::{clamp_symmetric, spectral_embedding, Method, SoftMatchMatrix};
use crate::error::{Error, Result};

pub const SINKHORN_TOL: f64 = 1e-6;
pub const SINKHORN_MAX_SWEEPS: usize = 1000;
/// Uniform mass added to the clamped spectral initialization so every entry
/// is positive; Sinkhorn converges only sublinearly on patterns without
/// total support.
pub const INIT_SMOOTHING: f64 = 1e-3;

fn max_sum_deviation(m: &DMatrix<f64>) -> f64 {
    let rows = (0..m.nrows()).map(|i| (m.row(i).sum() - 1.0).abs());
    let cols = (0..m.ncols()).map(|j| (m.column(j).sum() - 1.0).abs());
    rows.chain(cols).fold(0.0, f64::max)
}

/// Projects onto the doubly stochastic matrices by clamping negatives to
/// zero and alternating row and column normalization until every row and
/// column sum is within `SINKHORN_TOL` of one. Returns the projection and
/// its final deviation.
pub fn sinkhorn(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    if m.nrows() != m.ncols() {
        return Err(Error::dims("doubly stochastic projection needs a square block"));
    }
    let mut p = m.map(|x| x.max(0.0));
    let mut deviation = max_sum_deviation(&p);
    for sweep in 0..=SINKHORN_MAX_SWEEPS {
        if deviation <= SINKHORN_TOL {
            return Ok((p, deviation));
        }
        if sweep == SINKHORN_MAX_SWEEPS {
            break;
        }
        for i in 0..p.nrows() {
            let s = p.row(i).sum();
            if !(s > 0.0) {
                return Err(Error::SinkhornNoConverge { sweeps: sweep, deviation });
            }
            p.row_mut(i).unscale_mut(s);
        }
        for j in 0..p.ncols() {
            let s = p.column(j).sum();
            if !(s > 0.0) {
                return Err(Error::SinkhornNoConverge { sweeps: sweep, deviation });
            }
            p.column_mut(j).unscale_mut(s);
        }
        deviation = max_sum_deviation(&p);
    }
    Err(Error::SinkhornNoConverge {
        sweeps: SINKHORN_MAX_SWEEPS,
        deviation,
    })
}

fn block(a: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

/// Projected gradient ascent over per-view doubly stochastic assignments
/// `P_b` (features of view `b` to a `d`-point universe) maximizing
/// `sum_{b != c} <A_bc, P_b P_c^T>`.
///
/// The universe is anchored on view 0: `P_b` starts from the spectral
/// estimate `max(Y_b Y_0^T, 0) + INIT_SMOOTHING`, projected. Every view must
/// hold exactly `d` nodes.
pub fn pgdds(
    a: &DMatrix<f64>,
    d: usize,
    view_of: &[usize],
    iters: usize,
    step: f64,
) -> Result<SoftMatchMatrix> {
    let n = a.nrows();
    if a.ncols() != n || view_of.len() != n {
        return Err(Error::dims("pgdds needs a square matrix and one view per node"));
    }
    if iters == 0 {
        return Err(Error::Spec("pgdds needs at least one iteration".into()));
    }
    if !(step > 0.0) {
        return Err(Error::Spec(format!("step must be > 0, got {step}")));
    }
    let views = view_of.iter().max().map_or(0, |m| m + 1);
    let nodes: Vec<Vec<usize>> = (0..views)
        .map(|b| (0..n).filter(|&i| view_of[i] == b).collect())
        .collect();
    if let Some(b) = nodes.iter().position(|v| v.len() != d) {
        return Err(Error::dims(format!(
            "view {b} has {} nodes; pgdds needs exactly d = {d} per view",
            nodes[b].len()
        )));
    }
    let start = Instant::now();
    let y = spectral_embedding(a, d)?;
    let y_blocks: Vec<DMatrix<f64>> = nodes.iter().map(|r| block(&y, r, &(0..d).collect::<Vec<_>>())).collect();
    let mut p: Vec<DMatrix<f64>> = Vec::with_capacity(views);
    for yb in &y_blocks {
        let init = (yb * y_blocks[0].transpose()).map(|x| x.max(0.0) + INIT_SMOOTHING);
        p.push(sinkhorn(&init)?.0);
    }
    let a_blocks: Vec<Vec<DMatrix<f64>>> = (0..views)
        .map(|b| (0..views).map(|c| block(a, &nodes[b], &nodes[c])).collect())
        .collect();

    let mut trace = Vec::with_capacity(iters);
    for _ in 0..iters {
        let mut next = Vec::with_capacity(views);
        for b in 0..views {
            let mut grad = DMatrix::zeros(d, d);
            for c in 0..views {
                if c != b {
                    grad += &a_blocks[b][c] * &p[c];
                }
            }
            next.push(&p[b] + grad * (2.0 * step));
        }
        let mut worst: f64 = 0.0;
        for (b, m) in next.into_iter().enumerate() {
            let (proj, dev) = sinkhorn(&m)?;
            worst = worst.max(dev);
            p[b] = proj;
        }
        trace.push(worst);
    }

    let mut s = DMatrix::zeros(n, n);
    for b in 0..views {
        for c in 0..views {
            if b == c {
                continue;
            }
            let sbc = &p[b] * p[c].transpose();
            for (i, &ni) in nodes[b].iter().enumerate() {
                for (j, &nj) in nodes[c].iter().enumerate() {
                    s[(ni, nj)] = sbc[(i, j)];
                }
            }
        }
    }
    Ok(SoftMatchMatrix {
        matrix: clamp_symmetric(s),
        method: Method::Pgdds,
        iterations: iters,
        runtime_s: start.elapsed().as_secs_f64(),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinkhorn_examples() {
        let (p, _) = sinkhorn(&DMatrix::from_row_slice(2, 2, &[2., 0., 0., 2.])).unwrap();
        assert_eq!(p, DMatrix::identity(2, 2));
        let (p, _) = sinkhorn(&DMatrix::from_element(2, 2, 1.0)).unwrap();
        assert_eq!(p, DMatrix::from_element(2, 2, 0.5));
    }

    #[test]
    fn sinkhorn_reports_failure() {
        // no perfect matching in the support: row sums and column sums
        // cannot both reach one
        let bad = DMatrix::from_row_slice(3, 3, &[1., 0., 0., 1., 0., 0., 1., 1., 1.]);
        assert!(matches!(sinkhorn(&bad), Err(Error::SinkhornNoConverge { .. })));
        let zero_row = DMatrix::from_row_slice(2, 2, &[0., 0., 1., 1.]);
        assert!(matches!(sinkhorn(&zero_row), Err(Error::SinkhornNoConverge { .. })));
    }

    #[test]
    fn rejects_uneven_views() {
        let a = DMatrix::zeros(5, 5);
        assert!(pgdds(&a, 2, &[0, 0, 1, 1, 1], 5, 0.2).is_err());
    }
}
