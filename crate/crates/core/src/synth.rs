//! Synthetic correspondence graphs and multi-view scenes.
//!
//! Every view sees every universe point once; node `b * points + k` is the
//! `k`-th feature of view `b`, and the feature-to-point assignment of each
//! view is a random permutation. Two corruption mechanisms are available:
//! edge rewiring (outliers) and additive Gaussian noise on the cross-view
//! adjacency entries.
//!
//! All draws come from [`crate::rng::stream`], so outputs are a pure function
//! of the spec.

use std::path::Path;

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::graph::CorrespondenceGraph;
use crate::rng::{self, Domain};
use crate::textio::{self, Cursor};

pub const DEFAULT_DESCRIPTOR_DIM: usize = 16;
/// Gives a same-point cosine of about 0.5 at the default descriptor width.
pub const DEFAULT_DESCRIPTOR_NOISE: f64 = 0.25;
pub const CAMERA_RADIUS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthGraphSpec {
    pub views: usize,
    pub points: usize,
    pub descriptor_dim: usize,
    pub descriptor_noise_sigma: f64,
    pub edge_noise_sigma: f64,
    pub outlier_rate: f64,
    pub seed: u64,
}

impl Default for SynthGraphSpec {
    fn default() -> Self {
        SynthGraphSpec {
            views: 3,
            points: 10,
            descriptor_dim: DEFAULT_DESCRIPTOR_DIM,
            descriptor_noise_sigma: DEFAULT_DESCRIPTOR_NOISE,
            edge_noise_sigma: 0.0,
            outlier_rate: 0.0,
            seed: 0,
        }
    }
}

impl SynthGraphSpec {
    pub fn validate(&self) -> Result<()> {
        if self.views < 2 {
            return Err(Error::Spec(format!("views must be >= 2, got {}", self.views)));
        }
        if self.points < 2 {
            return Err(Error::Spec(format!("points must be >= 2, got {}", self.points)));
        }
        let nonneg = |x: f64| x.is_finite() && x >= 0.0;
        if !nonneg(self.descriptor_noise_sigma) || !nonneg(self.edge_noise_sigma) {
            return Err(Error::Spec("noise sigmas must be finite and >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.outlier_rate) {
            return Err(Error::Spec(format!(
                "outlier rate {} outside [0,1]",
                self.outlier_rate
            )));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SynthGraphSpec {
            seed,
            ..self.clone()
        }
    }

    pub fn n(&self) -> usize {
        self.views * self.points
    }
}

/// Node-to-universe assignment of a full-overlap instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    view_of: Vec<usize>,
    assignment: Vec<usize>,
    universe_dim: usize,
}

impl GroundTruth {
    pub fn new(view_of: Vec<usize>, assignment: Vec<usize>, universe_dim: usize) -> Result<Self> {
        if view_of.len() != assignment.len() {
            return Err(Error::dims("view_of and assignment lengths differ"));
        }
        let views = view_of.iter().max().map_or(0, |m| m + 1);
        let mut hit = vec![vec![false; universe_dim]; views];
        for (&b, &u) in view_of.iter().zip(&assignment) {
            if u >= universe_dim {
                return Err(Error::Spec(format!("universe index {u} >= {universe_dim}")));
            }
            if hit[b][u] {
                return Err(Error::Spec(format!("view {b} assigns universe point {u} twice")));
            }
            hit[b][u] = true;
        }
        if hit.iter().any(|h| h.iter().any(|x| !x)) {
            return Err(Error::Spec("every view must cover every universe point".into()));
        }
        Ok(GroundTruth {
            view_of,
            assignment,
            universe_dim,
        })
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn universe_dim(&self) -> usize {
        self.universe_dim
    }

    pub fn view_of(&self) -> &[usize] {
        &self.view_of
    }

    /// Universe point of every node.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// The stacked partial-permutation matrix `X` (`n x p`, one-hot rows).
    pub fn indicator(&self) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(self.n(), self.universe_dim);
        for (i, &u) in self.assignment.iter().enumerate() {
            x[(i, u)] = 1.0;
        }
        x
    }

    /// `X X^T` with the within-view blocks (and hence the diagonal) zeroed.
    pub fn clean_adjacency(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| {
            let same_point = self.assignment[i] == self.assignment[j];
            if same_point && self.view_of[i] != self.view_of[j] {
                1.0
            } else {
                0.0
            }
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("GTRF 1\n");
        out.push_str(&format!("n {} p {}\n", self.n(), self.universe_dim));
        textio::push_ints(&mut out, self.view_of.iter().copied());
        for &u in &self.assignment {
            textio::push_ints(&mut out, (0..self.universe_dim).map(|c| usize::from(c == u)));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Cursor::new(text);
        let gt = Self::read_block(&mut c)?;
        c.expect_end()?;
        Ok(gt)
    }

    pub(crate) fn read_block(c: &mut Cursor) -> Result<Self> {
        c.expect_header("GTRF", 1)?;
        let dims = c.keyed::<usize>(&["n", "p"])?;
        let (n, p) = (dims[0], dims[1]);
        let view_of = c.values::<usize>(n)?;
        let mut assignment = Vec::with_capacity(n);
        for _ in 0..n {
            let row = c.values::<u8>(p)?;
            let ones: Vec<usize> = (0..p).filter(|&k| row[k] == 1).collect();
            if ones.len() != 1 || row.iter().any(|&x| x > 1) {
                return Err(c.err("indicator row must hold exactly one 1"));
            }
            assignment.push(ones[0]);
        }
        let line = c.line_no();
        Self::new(view_of, assignment, p).map_err(|e| Error::format(line, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        textio::write_file(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&textio::read_file(path)?)
    }
}

/// Cameras, 3D points and their calibrated observations.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewScene {
    poses: Vec<Pose>,
    points3d: Vec<Vector3<f64>>,
    /// Per view, one calibrated homogeneous observation per node of that
    /// view, in node order.
    observations: Vec<Vec<Vector3<f64>>>,
    gt: GroundTruth,
}

impl MultiViewScene {
    pub fn new(
        poses: Vec<Pose>,
        points3d: Vec<Vector3<f64>>,
        observations: Vec<Vec<Vector3<f64>>>,
        gt: GroundTruth,
    ) -> Result<Self> {
        let (v, p) = (poses.len(), points3d.len());
        if observations.len() != v || observations.iter().any(|o| o.len() != p) {
            return Err(Error::dims(format!("observations must be {v} views x {p} points")));
        }
        if gt.n() != v * p || gt.universe_dim() != p {
            return Err(Error::dims("ground truth does not match the scene size"));
        }
        if observations.iter().flatten().any(|x| x.z != 1.0) {
            return Err(Error::Spec("observations must be homogeneous (z = 1)".into()));
        }
        Ok(MultiViewScene {
            poses,
            points3d,
            observations,
            gt,
        })
    }

    pub fn views(&self) -> usize {
        self.poses.len()
    }

    pub fn points(&self) -> usize {
        self.points3d.len()
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn points3d(&self) -> &[Vector3<f64>] {
        &self.points3d
    }

    pub fn observations(&self) -> &[Vec<Vector3<f64>>] {
        &self.observations
    }

    pub fn ground_truth(&self) -> &GroundTruth {
        &self.gt
    }

    /// `SCNF 1` block followed by the `GTRF 1` block of the ground truth.
    pub fn to_text(&self) -> String {
        let mut out = String::from("SCNF 1\n");
        out.push_str(&format!("v {} p {}\n", self.views(), self.points()));
        for pose in &self.poses {
            let r = pose.rotation();
            let c = pose.center();
            let row_major = (0..3).flat_map(|i| (0..3).map(move |j| r[(i, j)]));
            let values: Vec<f64> = row_major.chain(c.iter().copied()).collect();
            textio::push_reals(&mut out, values.iter());
        }
        for x in &self.points3d {
            textio::push_reals(&mut out, x.iter());
        }
        for view in &self.observations {
            for x in view {
                textio::push_reals(&mut out, x.iter());
            }
        }
        out.push_str(&self.gt.to_text());
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Cursor::new(text);
        c.expect_header("SCNF", 1)?;
        let dims = c.keyed::<usize>(&["v", "p"])?;
        let (v, p) = (dims[0], dims[1]);
        let mut poses = Vec::with_capacity(v);
        for _ in 0..v {
            let x = c.values::<f64>(12)?;
            let r = Matrix3::from_row_slice(&x[..9]);
            let t = Vector3::new(x[9], x[10], x[11]);
            poses.push(Pose::new(r, t).map_err(|e| c.err(e.to_string()))?);
        }
        let vec3 = |c: &mut Cursor| -> Result<Vector3<f64>> {
            let x = c.values::<f64>(3)?;
            Ok(Vector3::new(x[0], x[1], x[2]))
        };
        let points3d = (0..p).map(|_| vec3(&mut c)).collect::<Result<Vec<_>>>()?;
        let mut observations = Vec::with_capacity(v);
        for _ in 0..v {
            observations.push((0..p).map(|_| vec3(&mut c)).collect::<Result<Vec<_>>>()?);
        }
        let gt = GroundTruth::read_block(&mut c)?;
        c.expect_end()?;
        let line = c.line_no();
        Self::new(poses, points3d, observations, gt).map_err(|e| Error::format(line, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        textio::write_file(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&textio::read_file(path)?)
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn normalize_row(m: &mut DMatrix<f64>, i: usize) {
    let norm = m.row(i).norm();
    if norm > 0.0 {
        m.row_mut(i).unscale_mut(norm);
    }
}

/// One random permutation per view: `perms[b][k]` is the universe point of
/// the `k`-th feature of view `b`.
fn draw_assignment(rng: &mut ChaCha8Rng, views: usize, points: usize) -> Vec<Vec<usize>> {
    (0..views)
        .map(|_| {
            let mut perm: Vec<usize> = (0..points).collect();
            perm.shuffle(rng);
            perm
        })
        .collect()
}

/// Universe descriptors are nonnegative (half-normal entries, unit norm),
/// like the histogram descriptors they stand in for; node features are noisy
/// copies, renormalized.
fn draw_graph(
    rng: &mut ChaCha8Rng,
    spec: &SynthGraphSpec,
    perms: &[Vec<usize>],
    extra_columns: Option<&DMatrix<f64>>,
) -> Result<(CorrespondenceGraph, GroundTruth)> {
    let (v, p, m) = (spec.views, spec.points, spec.descriptor_dim);
    let n = v * p;
    let view_of: Vec<usize> = (0..n).map(|i| i / p).collect();
    let assignment: Vec<usize> = (0..n).map(|i| perms[i / p][i % p]).collect();
    let gt = GroundTruth::new(view_of.clone(), assignment.clone(), p)?;

    let mut descriptors = DMatrix::zeros(p, m);
    for u in 0..p {
        for c in 0..m {
            descriptors[(u, c)] = gaussian(rng).abs();
        }
        normalize_row(&mut descriptors, u);
    }
    let mut noisy = DMatrix::zeros(n, m);
    for i in 0..n {
        for c in 0..m {
            noisy[(i, c)] =
                descriptors[(assignment[i], c)] + spec.descriptor_noise_sigma * gaussian(rng);
        }
        normalize_row(&mut noisy, i);
    }
    let features = match extra_columns {
        None => noisy,
        Some(extra) => {
            let mut f = DMatrix::zeros(n, m + extra.ncols());
            f.columns_mut(0, m).copy_from(&noisy);
            f.columns_mut(m, extra.ncols()).copy_from(extra);
            f
        }
    };

    let mut a = gt.clean_adjacency();
    // rewiring: each true cross-view edge (i < j) moves, with probability
    // outlier_rate, from j to a uniformly chosen wrong node of j's view
    for i in 0..n {
        for j in (i + 1)..n {
            if view_of[i] == view_of[j] || assignment[i] != assignment[j] {
                continue;
            }
            let roll: f64 = rng.random();
            if roll < spec.outlier_rate {
                let view = view_of[j];
                let mut k = view * p + rng.random_range(0..p - 1);
                if k >= j {
                    k += 1;
                }
                a[(i, j)] = 0.0;
                a[(j, i)] = 0.0;
                a[(i, k)] = 1.0;
                a[(k, i)] = 1.0;
            }
        }
    }
    if spec.edge_noise_sigma > 0.0 {
        for i in 0..n {
            for j in (i + 1)..n {
                if view_of[i] == view_of[j] {
                    continue;
                }
                let x = (a[(i, j)] + spec.edge_noise_sigma * gaussian(rng)).clamp(0.0, 1.0);
                a[(i, j)] = x;
                a[(j, i)] = x;
            }
        }
    }
    let graph = CorrespondenceGraph::new(v, view_of, a, features)?;
    Ok((graph, gt))
}

pub fn gen_graph(spec: &SynthGraphSpec) -> Result<(CorrespondenceGraph, GroundTruth)> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, Domain::Generator, 0);
    let perms = draw_assignment(&mut rng, spec.views, spec.points);
    draw_graph(&mut rng, spec, &perms, None)
}

/// Camera looking at the origin from `center`.
fn look_at_origin(center: Vector3<f64>) -> Result<Pose> {
    let forward = (-center).normalize();
    let up = if forward.z.abs() < 0.9 {
        Vector3::z()
    } else {
        Vector3::y()
    };
    let right = up.cross(&forward).normalize();
    let down = forward.cross(&right);
    let rotation = Matrix3::from_columns(&[right, down, forward]);
    Pose::new(rotation, center)
}

/// Synthetic scene plus its corrupted correspondence graph. Node features
/// are the noisy descriptors followed by the node's calibrated `(x, y)`.
pub fn gen_scene(spec: &SynthGraphSpec) -> Result<(CorrespondenceGraph, MultiViewScene)> {
    spec.validate()?;
    if spec.points < 8 {
        return Err(Error::Spec(format!(
            "scenes need at least 8 points, got {}",
            spec.points
        )));
    }
    let (v, p) = (spec.views, spec.points);
    let mut rng = rng::stream(spec.seed, Domain::Generator, 1);
    let mut poses = Vec::with_capacity(v);
    for _ in 0..v {
        let dir = loop {
            let d = Vector3::new(gaussian(&mut rng), gaussian(&mut rng), gaussian(&mut rng));
            if d.norm() > 1e-6 {
                break d.normalize();
            }
        };
        poses.push(look_at_origin(dir * CAMERA_RADIUS)?);
    }
    let points3d: Vec<Vector3<f64>> = (0..p)
        .map(|_| {
            Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
        })
        .collect();
    let perms = draw_assignment(&mut rng, v, p);
    let observations: Vec<Vec<Vector3<f64>>> = (0..v)
        .map(|b| perms[b].iter().map(|&u| poses[b].project(&points3d[u])).collect())
        .collect();
    let xy = DMatrix::from_fn(v * p, 2, |i, c| observations[i / p][i % p][c]);
    let (graph, gt) = draw_graph(&mut rng, spec, &perms, Some(&xy))?;
    let scene = MultiViewScene::new(poses, points3d, observations, gt)?;
    Ok((graph, scene))
}
