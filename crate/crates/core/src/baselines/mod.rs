//! Non-learned synchronization baselines producing soft match matrices.

mod eigen;
mod matchals;
mod pgdds;
mod spectral;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::Error;

pub use eigen::{topk_eig, EigenPairs, DEFAULT_EIG_TOL};
pub use matchals::{matchals, matchals_objective, DEFAULT_MU};
pub use pgdds::{pgdds, sinkhorn, INIT_SMOOTHING, SINKHORN_MAX_SWEEPS, SINKHORN_TOL};
pub use spectral::{spectral, spectral_embedding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Spectral,
    MatchAls,
    Pgdds,
    Gcn,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Spectral => "spectral",
            Method::MatchAls => "matchals",
            Method::Pgdds => "pgdds",
            Method::Gcn => "gcn",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "spectral" => Ok(Method::Spectral),
            "matchals" => Ok(Method::MatchAls),
            "pgdds" => Ok(Method::Pgdds),
            "gcn" => Ok(Method::Gcn),
            other => Err(Error::Spec(format!("unknown method {other:?}"))),
        }
    }
}

/// Soft match matrix in `[0, 1]` plus solver bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMatchMatrix {
    pub matrix: DMatrix<f64>,
    pub method: Method,
    pub iterations: usize,
    pub runtime_s: f64,
    /// Per-iteration diagnostic: the regularized objective after every
    /// half-step for `matchals`, the largest row/column-sum deviation of the
    /// projected blocks after every outer iteration for `pgdds`, empty
    /// otherwise.
    pub trace: Vec<f64>,
}

/// Clamps to `[0, 1]` and averages with the transpose.
pub(crate) fn clamp_symmetric(m: DMatrix<f64>) -> DMatrix<f64> {
    let s = (&m + m.transpose()) * 0.5;
    s.map(|x| x.clamp(0.0, 1.0))
}
