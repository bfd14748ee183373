//! Correspondence graphs and the degree-normalized operators built from them.
//!
//! A [`CorrespondenceGraph`] holds `n` feature nodes spread over `v` views, a
//! symmetric weighted adjacency in `[0, 1]` and an `n x m0` matrix of initial
//! node descriptors. Nodes from the same view never share an edge.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::textio::{self, Cursor};

pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceGraph {
    views: usize,
    view_of: Vec<usize>,
    adjacency: DMatrix<f64>,
    features: DMatrix<f64>,
}

/// Row sums of the adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeVector(pub DVector<f64>);

impl CorrespondenceGraph {
    /// Validates and wraps the parts of a graph.
    pub fn new(
        views: usize,
        view_of: Vec<usize>,
        adjacency: DMatrix<f64>,
        features: DMatrix<f64>,
    ) -> Result<Self> {
        let n = view_of.len();
        if adjacency.nrows() != n || adjacency.ncols() != n {
            return Err(Error::dims(format!(
                "adjacency is {}x{}, expected {n}x{n}",
                adjacency.nrows(),
                adjacency.ncols()
            )));
        }
        if features.nrows() != n {
            return Err(Error::dims(format!(
                "features have {} rows, expected {n}",
                features.nrows()
            )));
        }
        let mut used = vec![false; views];
        for (i, &b) in view_of.iter().enumerate() {
            if b >= views {
                return Err(Error::InvalidGraph(format!(
                    "node {i} has view {b} but there are {views} views"
                )));
            }
            used[b] = true;
        }
        if let Some(b) = used.iter().position(|u| !u) {
            return Err(Error::InvalidGraph(format!("view {b} has no nodes")));
        }
        for i in 0..n {
            if adjacency[(i, i)] != 0.0 {
                return Err(Error::InvalidGraph(format!("nonzero diagonal at node {i}")));
            }
            for j in 0..n {
                let a = adjacency[(i, j)];
                if !(0.0..=1.0).contains(&a) {
                    return Err(Error::InvalidGraph(format!(
                        "adjacency ({i},{j}) = {a} outside [0,1]"
                    )));
                }
                if j > i && (a - adjacency[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidGraph(format!(
                        "adjacency asymmetric at ({i},{j})"
                    )));
                }
                if i != j && view_of[i] == view_of[j] && a != 0.0 {
                    return Err(Error::InvalidGraph(format!(
                        "edge ({i},{j}) joins two nodes of view {}",
                        view_of[i]
                    )));
                }
            }
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidGraph("non-finite feature entry".into()));
        }
        Ok(CorrespondenceGraph {
            views,
            view_of,
            adjacency,
            features,
        })
    }

    pub fn n(&self) -> usize {
        self.view_of.len()
    }

    pub fn views(&self) -> usize {
        self.views
    }

    pub fn view_of(&self) -> &[usize] {
        &self.view_of
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    /// Same graph with a different feature matrix.
    pub fn with_features(&self, features: DMatrix<f64>) -> Result<Self> {
        Self::new(
            self.views,
            self.view_of.clone(),
            self.adjacency.clone(),
            features,
        )
    }

    pub fn degree(&self) -> DegreeVector {
        degree_of(&self.adjacency)
    }

    pub fn normalized_laplacian(&self) -> Result<DMatrix<f64>> {
        normalized_laplacian_of(&self.adjacency)
    }

    /// The propagation operator of every graph-convolution layer.
    pub fn augmented_operator(&self) -> DMatrix<f64> {
        augmented_operator_of(&self.adjacency)
    }

    /// Nodes belonging to view `b`, in node order.
    pub fn nodes_of_view(&self, b: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.view_of[i] == b).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        textio::write_file(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&textio::read_file(path)?)
    }

    /// Serializes to the `CGRF 1` text format.
    pub fn to_text(&self) -> String {
        let n = self.n();
        let mut out = String::new();
        out.push_str("CGRF 1\n");
        out.push_str(&format!(
            "n {n} v {} m0 {}\n",
            self.views,
            self.feature_dim()
        ));
        textio::push_ints(&mut out, self.view_of.iter().copied());
        for i in 0..n {
            textio::push_reals(&mut out, self.adjacency.row(i).iter());
        }
        for i in 0..n {
            textio::push_reals(&mut out, self.features.row(i).iter());
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Cursor::new(text);
        let g = Self::read_block(&mut c)?;
        c.expect_end()?;
        Ok(g)
    }

    pub(crate) fn read_block(c: &mut Cursor) -> Result<Self> {
        c.expect_header("CGRF", 1)?;
        let dims = c.keyed::<usize>(&["n", "v", "m0"])?;
        let (n, v, m0) = (dims[0], dims[1], dims[2]);
        let view_of = c.values::<usize>(n)?;
        let header_line = c.line_no();
        let mut adjacency = DMatrix::zeros(n, n);
        for i in 0..n {
            let row = c.values::<f64>(n)?;
            for (j, x) in row.into_iter().enumerate() {
                adjacency[(i, j)] = x;
            }
        }
        let mut features = DMatrix::zeros(n, m0);
        for i in 0..n {
            let row = c.values::<f64>(m0)?;
            for (j, x) in row.into_iter().enumerate() {
                features[(i, j)] = x;
            }
        }
        Self::new(v, view_of, adjacency, features).map_err(|e| match e {
            Error::InvalidGraph(msg) | Error::DimensionMismatch(msg) => {
                Error::format(header_line, msg)
            }
            other => other,
        })
    }
}

pub fn degree_of(adjacency: &DMatrix<f64>) -> DegreeVector {
    DegreeVector(DVector::from_fn(adjacency.nrows(), |i, _| adjacency.row(i).sum()))
}

/// `I - D^{-1/2} A D^{-1/2}`; fails on isolated nodes.
pub fn normalized_laplacian_of(adjacency: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = degree_of(adjacency).0;
    if let Some(i) = d.iter().position(|&x| x <= 0.0) {
        return Err(Error::ZeroDegreeNode(i));
    }
    let s = d.map(|x| 1.0 / x.sqrt());
    let n = adjacency.nrows();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - s[i] * adjacency[(i, j)] * s[j]
    }))
}

/// `(D + I)^{-1/2} (A + I) (D + I)^{-1/2}`. Defined for isolated nodes.
pub fn augmented_operator_of(adjacency: &DMatrix<f64>) -> DMatrix<f64> {
    let d = degree_of(adjacency).0;
    let s = d.map(|x| 1.0 / (x + 1.0).sqrt());
    let n = adjacency.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        let a = adjacency[(i, j)] + if i == j { 1.0 } else { 0.0 };
        s[i] * a * s[j]
    })
}
