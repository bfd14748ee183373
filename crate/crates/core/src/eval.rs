//! Metrics, alignment and timing for learned embeddings and baselines.
//!
//! Errors are per-entry means over the full `n x n` matrix. Similarity
//! matrices are compared in the adjacency convention: clamped to `[0, 1]`,
//! with the diagonal and within-view blocks set to zero, since a graph never
//! holds self-matches or same-image matches.

use std::time::Instant;

use nalgebra::DMatrix;

use crate::baselines::{self, Method, SoftMatchMatrix, DEFAULT_MU};
use crate::error::{Error, Result};
use crate::graph::CorrespondenceGraph;
use crate::synth::GroundTruth;
use crate::textio;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimilarityStats {
    pub same_mean: f64,
    pub same_std: f64,
    pub diff_mean: f64,
    pub diff_std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorReport {
    pub l1: f64,
    pub l2: f64,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: usize,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn mean_std(&self) -> (f64, f64) {
        if self.count == 0 {
            return (0.0, 0.0);
        }
        let n = self.count as f64;
        let mean = self.sum / n;
        let var = (self.sum_sq / n - mean * mean).max(0.0);
        (mean, var.sqrt())
    }
}

/// Pools same-point and different-point similarities of cross-view node
/// pairs over one or more graphs.
#[derive(Debug, Clone, Default)]
pub struct SimilarityAccumulator {
    same: Moments,
    diff: Moments,
}

impl SimilarityAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds every cross-view pair `i < j` of a similarity matrix.
    pub fn add_matrix(&mut self, similarity: &DMatrix<f64>, gt: &GroundTruth) -> Result<()> {
        let n = gt.n();
        if similarity.shape() != (n, n) {
            return Err(Error::dims(format!(
                "similarity is {}x{}, ground truth has {n} nodes",
                similarity.nrows(),
                similarity.ncols()
            )));
        }
        let (views, points) = (gt.view_of(), gt.assignment());
        for i in 0..n {
            for j in (i + 1)..n {
                if views[i] == views[j] {
                    continue;
                }
                let s = similarity[(i, j)];
                if points[i] == points[j] {
                    self.same.push(s);
                } else {
                    self.diff.push(s);
                }
            }
        }
        Ok(())
    }

    pub fn add_embedding(&mut self, embedding: &DMatrix<f64>, gt: &GroundTruth) -> Result<()> {
        if embedding.nrows() != gt.n() {
            return Err(Error::dims(format!(
                "embedding has {} rows, ground truth has {} nodes",
                embedding.nrows(),
                gt.n()
            )));
        }
        self.add_matrix(&(embedding * embedding.transpose()), gt)
    }

    pub fn finish(&self) -> SimilarityStats {
        let (same_mean, same_std) = self.same.mean_std();
        let (diff_mean, diff_std) = self.diff.mean_std();
        SimilarityStats {
            same_mean,
            same_std,
            diff_mean,
            diff_std,
        }
    }
}

/// Mean and standard deviation of the cosine `E_i . E_j` over cross-view
/// pairs, split by whether the two nodes see the same universe point.
pub fn similarity_stats(embedding: &DMatrix<f64>, gt: &GroundTruth) -> Result<SimilarityStats> {
    let mut acc = SimilarityAccumulator::new();
    acc.add_embedding(embedding, gt)?;
    Ok(acc.finish())
}

pub fn similarity_stats_of_matrix(similarity: &DMatrix<f64>, gt: &GroundTruth) -> Result<SimilarityStats> {
    let mut acc = SimilarityAccumulator::new();
    acc.add_matrix(similarity, gt)?;
    Ok(acc.finish())
}

pub fn error_report(similarity: &DMatrix<f64>, truth: &DMatrix<f64>, runtime_s: f64) -> Result<ErrorReport> {
    if similarity.shape() != truth.shape() {
        return Err(Error::dims(format!(
            "similarity is {:?}, ground truth is {:?}",
            similarity.shape(),
            truth.shape()
        )));
    }
    let count = (similarity.nrows() * similarity.ncols()).max(1) as f64;
    let diff = similarity - truth;
    Ok(ErrorReport {
        l1: diff.iter().map(|x| x.abs()).sum::<f64>() / count,
        l2: diff.iter().map(|x| x * x).sum::<f64>() / count,
        runtime_s,
    })
}

/// Zeroes the diagonal and the within-view blocks.
pub fn mask_structural(similarity: &DMatrix<f64>, view_of: &[usize]) -> DMatrix<f64> {
    let mut out = similarity.clone();
    for i in 0..out.nrows() {
        for j in 0..out.ncols() {
            if view_of[i] == view_of[j] {
                out[(i, j)] = 0.0;
            }
        }
    }
    out
}

/// `E E^T` clamped to `[0, 1]` in the adjacency convention.
pub fn embedding_similarity(embedding: &DMatrix<f64>, view_of: &[usize]) -> DMatrix<f64> {
    let gram = (embedding * embedding.transpose()).map(|x| x.clamp(0.0, 1.0));
    mask_structural(&gram, view_of)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub rotation: DMatrix<f64>,
    /// `E^T X` had a singular value below 1e-12, so the minimizer is not
    /// unique.
    pub rank_deficient: bool,
}

/// Orthogonal `Q` minimizing `|E Q - X|_F`: the orthogonal polar factor
/// `U V^T` of `E^T X = U S V^T`.
pub fn procrustes_align(embedding: &DMatrix<f64>, target: &DMatrix<f64>) -> Result<Alignment> {
    if embedding.shape() != target.shape() || embedding.ncols() == 0 {
        return Err(Error::dims(format!(
            "cannot align {:?} onto {:?}",
            embedding.shape(),
            target.shape()
        )));
    }
    let m = embedding.transpose() * target;
    let svd = m.svd(true, true);
    let rank_deficient = svd.singular_values.iter().any(|&s| s < 1e-12);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::ConvergenceFailure { residual: f64::NAN, tolerance: 0.0 }),
    };
    Ok(Alignment {
        rotation: u * vt,
        rank_deficient,
    })
}

/// Wall-clock seconds of one call, on the monotonic clock.
pub fn time_method<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingStats {
    pub mean_s: f64,
    pub std_s: f64,
    pub repeats: usize,
}

/// Times `repeats` calls (at least 5).
pub fn time_repeated<T>(repeats: usize, mut f: impl FnMut() -> T) -> TimingStats {
    let repeats = repeats.max(5);
    let mut m = Moments::default();
    for _ in 0..repeats {
        let (out, secs) = time_method(&mut f);
        std::hint::black_box(out);
        m.push(secs);
    }
    let (mean_s, std_s) = m.mean_std();
    TimingStats {
        mean_s,
        std_s,
        repeats,
    }
}

/// Tunables of the iterative baselines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineParams {
    pub mu: f64,
    /// `None` uses `1 / n`.
    pub step: Option<f64>,
}

impl Default for BaselineParams {
    fn default() -> Self {
        BaselineParams {
            mu: DEFAULT_MU,
            step: None,
        }
    }
}

/// Runs a baseline on a graph and returns its soft matches in the adjacency
/// convention. `matchals` factorizes the match matrix with identity
/// self-blocks (`A + I`), the form a cycle-consistent match matrix takes.
pub fn run_baseline(
    method: Method,
    graph: &CorrespondenceGraph,
    d: usize,
    iters: usize,
    params: &BaselineParams,
) -> Result<SoftMatchMatrix> {
    let a = graph.adjacency();
    let n = graph.n();
    let mut out = match method {
        Method::Spectral => baselines::spectral(a, d)?,
        Method::MatchAls => {
            let with_self = a + DMatrix::identity(n, n);
            baselines::matchals(&with_self, d, iters, params.mu)?
        }
        Method::Pgdds => {
            let step = params.step.unwrap_or(1.0 / n as f64);
            baselines::pgdds(a, d, graph.view_of(), iters, step)?
        }
        Method::Gcn => return Err(Error::Spec("gcn is not a baseline".into())),
    };
    out.matrix = mask_structural(&out.matrix, graph.view_of());
    Ok(out)
}

/// Instance description carried into every metrics row.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InstanceInfo {
    pub views: usize,
    pub points: usize,
    pub noise: f64,
    pub outliers: f64,
    pub seed: u64,
}

/// One line of the metrics CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub method: String,
    pub instance: InstanceInfo,
    pub iters: usize,
    pub report: ErrorReport,
    pub stats: SimilarityStats,
}

pub const METRICS_HEADER: &str =
    "method,views,points,noise,outliers,iters,seed,l1,l2,runtime_s,same_mean,same_std,diff_mean,diff_std";

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        let i = &self.instance;
        let r = |x: f64| textio::real(x);
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.method,
            i.views,
            i.points,
            r(i.noise),
            r(i.outliers),
            self.iters,
            i.seed,
            r(self.report.l1),
            r(self.report.l2),
            r(self.report.runtime_s),
            r(self.stats.same_mean),
            r(self.stats.same_std),
            r(self.stats.diff_mean),
            r(self.stats.diff_std),
        )
    }
}

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv());
        out.push('\n');
    }
    out
}

/// Scores a soft match matrix against the ground truth.
pub fn score(
    method: &str,
    info: InstanceInfo,
    iters: usize,
    similarity: &DMatrix<f64>,
    gt: &GroundTruth,
    runtime_s: f64,
) -> Result<MetricsRow> {
    Ok(MetricsRow {
        method: method.to_string(),
        instance: info,
        iters,
        report: error_report(similarity, &gt.clean_adjacency(), runtime_s)?,
        stats: similarity_stats_of_matrix(similarity, gt)?,
    })
}

/// One metrics row per iteration budget, in the order given.
pub fn sweep_iterations(
    method: Method,
    graph: &CorrespondenceGraph,
    gt: &GroundTruth,
    info: InstanceInfo,
    iterations: &[usize],
    params: &BaselineParams,
) -> Result<Vec<MetricsRow>> {
    if !matches!(method, Method::MatchAls | Method::Pgdds) {
        return Err(Error::Spec(format!("cannot sweep iterations of {method}")));
    }
    let d = gt.universe_dim();
    iterations
        .iter()
        .map(|&iters| {
            let s = run_baseline(method, graph, d, iters, params)?;
            score(method.tag(), info, iters, &s.matrix, gt, s.runtime_s)
        })
        .collect()
}
