//! Two-view epipolar residuals and the geometric prior used by the side loss.
//!
//! Poses store the camera orientation `R` (camera frame to world frame) and
//! the camera centre `T`. With calibrated homogeneous observations `x_i`,
//! `x_j` of one 3D point, the world-frame rays `R_i x_i`, `R_j x_j` and the
//! baseline `T_j - T_i` are coplanar, so
//! `x_i^T R_i^T [T_j - T_i]_x R_j x_j = 0`.

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::graph::CorrespondenceGraph;
use crate::synth::MultiViewScene;

pub const ROTATION_TOL: f64 = 1e-10;
const MIN_BASELINE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    center: Vector3<f64>,
}

impl Pose {
    pub fn new(rotation: Matrix3<f64>, center: Vector3<f64>) -> Result<Self> {
        let orth = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        let det = rotation.determinant();
        if orth > ROTATION_TOL || (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::Spec(format!(
                "not a rotation (orthogonality error {orth:.2e}, det {det})"
            )));
        }
        if center.iter().any(|x| !x.is_finite()) {
            return Err(Error::Spec("non-finite camera centre".into()));
        }
        Ok(Pose { rotation, center })
    }

    pub fn identity() -> Self {
        Pose {
            rotation: Matrix3::identity(),
            center: Vector3::zeros(),
        }
    }

    /// Camera-to-world rotation.
    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn center(&self) -> &Vector3<f64> {
        &self.center
    }

    /// Point in this camera's frame.
    pub fn to_camera(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (world - self.center)
    }

    /// Calibrated homogeneous projection `(x/z, y/z, 1)`.
    pub fn project(&self, world: &Vector3<f64>) -> Vector3<f64> {
        let c = self.to_camera(world);
        Vector3::new(c.x / c.z, c.y / c.z, 1.0)
    }
}

/// Cross-product matrix: `skew(t) * u == t.cross(u)`.
pub fn skew(t: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -t.z, t.y, t.z, 0.0, -t.x, -t.y, t.x, 0.0)
}

pub fn epipolar_residual(
    pose_i: &Pose,
    pose_j: &Pose,
    x_i: &Vector3<f64>,
    x_j: &Vector3<f64>,
) -> Result<f64> {
    let baseline = pose_j.center - pose_i.center;
    if baseline.norm() < MIN_BASELINE {
        return Err(Error::DegenerateBaseline);
    }
    let essential = pose_i.rotation.transpose() * skew(&baseline) * pose_j.rotation;
    Ok(x_i.dot(&(essential * x_j)).abs())
}

/// Pairwise epipolar residuals between cross-view nodes, rescaled so the
/// largest entry is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricPrior {
    weights: DMatrix<f64>,
    node_cam: Vec<usize>,
    /// Largest raw residual; `weights * max_residual` recovers the raw values.
    max_residual: f64,
}

impl GeometricPrior {
    /// A prior from explicit weights, rescaled by their maximum. Weights must
    /// be finite, nonnegative, symmetric and zero between nodes of one view.
    pub fn from_weights(raw: DMatrix<f64>, view_of: &[usize]) -> Result<Self> {
        let n = view_of.len();
        if raw.shape() != (n, n) {
            return Err(Error::dims(format!("prior is {:?}, expected {n}x{n}", raw.shape())));
        }
        for i in 0..n {
            for j in 0..n {
                let w = raw[(i, j)];
                if !(w >= 0.0) || !w.is_finite() || w != raw[(j, i)] {
                    return Err(Error::Spec(format!("invalid prior weight at ({i}, {j})")));
                }
                if view_of[i] == view_of[j] && w != 0.0 {
                    return Err(Error::Spec(format!("prior weight within a view at ({i}, {j})")));
                }
            }
        }
        let max_residual = raw.max();
        let weights = if max_residual > 0.0 { raw / max_residual } else { raw };
        Ok(GeometricPrior {
            weights,
            node_cam: view_of.to_vec(),
            max_residual,
        })
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn node_cam(&self) -> &[usize] {
        &self.node_cam
    }

    pub fn max_residual(&self) -> f64 {
        self.max_residual
    }

    /// Residuals before max-normalization.
    pub fn raw(&self) -> DMatrix<f64> {
        &self.weights * self.max_residual
    }

    pub fn n(&self) -> usize {
        self.node_cam.len()
    }
}

pub fn build_prior(scene: &MultiViewScene, graph: &CorrespondenceGraph) -> Result<GeometricPrior> {
    let n = graph.n();
    if graph.views() != scene.views() {
        return Err(Error::dims(format!(
            "graph has {} views, scene has {}",
            graph.views(),
            scene.views()
        )));
    }
    let node_cam = graph.view_of().to_vec();
    let mut slot = vec![0usize; n];
    let mut seen = vec![0usize; scene.views()];
    for (i, &b) in node_cam.iter().enumerate() {
        slot[i] = seen[b];
        seen[b] += 1;
    }
    if seen.iter().any(|&c| c != scene.points()) {
        return Err(Error::dims(
            "every view must hold one node per scene point".to_string(),
        ));
    }
    let obs = |i: usize| &scene.observations()[node_cam[i]][slot[i]];

    let mut raw = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let (ci, cj) = (node_cam[i], node_cam[j]);
            if ci == cj {
                continue;
            }
            let r = epipolar_residual(&scene.poses()[ci], &scene.poses()[cj], obs(i), obs(j))?;
            raw[(i, j)] = r;
            raw[(j, i)] = r;
        }
    }
    GeometricPrior::from_weights(raw, &node_cam)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;

    #[test]
    fn skew_examples() {
        let (e1, e2, e3) = (Vector3::x(), Vector3::y(), Vector3::z());
        assert_eq!(skew(&e1) * e2, e3);
        assert_eq!(skew(&Vector3::zeros()), Matrix3::zeros());
        let t = Vector3::new(1.0, 2.0, 3.0);
        assert_eq!(skew(&t).transpose(), -skew(&t));
        let expected = Matrix3::new(0., -3., 2., 3., 0., -1., -2., 1., 0.);
        assert_eq!(skew(&t), expected);
    }

    #[test]
    fn residual_examples() {
        let pi = Pose::identity();
        let pj = Pose::new(Matrix3::identity(), Vector3::x()).unwrap();
        let xi = Vector3::new(0.0, 0.0, 1.0);
        let xj = Vector3::new(-0.2, 0.0, 1.0);
        assert_eq!(pj.project(&Vector3::new(0.0, 0.0, 5.0)), xj);
        assert!(epipolar_residual(&pi, &pj, &xi, &xj).unwrap() < 1e-15);
        let xj = Vector3::new(-0.2, 0.3, 1.0);
        let r = epipolar_residual(&pi, &pj, &xi, &xj).unwrap();
        assert!((r - 0.3).abs() < 1e-15);
        assert!(matches!(
            epipolar_residual(&pi, &pi, &xi, &xj),
            Err(Error::DegenerateBaseline)
        ));
    }

    #[test]
    fn relative_pose_form_agrees() {
        // x_i^T [t]_x R x_j with (R, t) mapping camera j into camera i.
        let pi = Pose::new(
            *Rotation3::from_euler_angles(0.1, -0.3, 0.7).matrix(),
            Vector3::new(0.5, -1.0, 2.0),
        )
        .unwrap();
        let pj = Pose::new(
            *Rotation3::from_euler_angles(-0.4, 0.2, 0.1).matrix(),
            Vector3::new(-1.5, 0.3, 0.2),
        )
        .unwrap();
        let world = Vector3::new(0.3, 0.2, 9.0);
        let (xi, xj) = (pi.project(&world), pj.project(&world));
        let r_rel = pi.rotation().transpose() * pj.rotation();
        let t_rel = pi.rotation().transpose() * (pj.center() - pi.center());
        let rel = xi.dot(&(skew(&t_rel) * r_rel * xj)).abs();
        let mut xk = xj;
        xk.y += 0.05;
        let rel_off = xi.dot(&(skew(&t_rel) * r_rel * xk)).abs();
        assert!(rel < 1e-12);
        let two_pose = epipolar_residual(&pi, &pj, &xi, &xk).unwrap();
        assert!((two_pose - rel_off).abs() < 1e-12);
    }

    #[test]
    fn pose_rejects_non_rotation() {
        let reflect = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(Pose::new(reflect, Vector3::zeros()).is_err());
        assert!(Pose::new(Matrix3::identity() * 1.01, Vector3::zeros()).is_err());
    }
}
