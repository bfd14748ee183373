use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const GN_EPS: f64 = 1e-5;

/// Per-node group normalization with a learned per-channel affine map.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupNorm {
    pub groups: usize,
    pub scale: DVector<f64>,
    pub shift: DVector<f64>,
}

impl GroupNorm {
    pub fn identity(channels: usize, groups: usize) -> Result<Self> {
        if groups == 0 || !channels.is_multiple_of(groups) {
            return Err(Error::Spec(format!(
                "{groups} groups do not divide {channels} channels"
            )));
        }
        Ok(GroupNorm {
            groups,
            scale: DVector::from_element(channels, 1.0),
            shift: DVector::zeros(channels),
        })
    }

    pub fn channels(&self) -> usize {
        self.scale.len()
    }
}

/// Standardizes each group of `x` in place; writes the per-group inverse
/// standard deviation to `inv_std`.
fn standardize_groups(x: &mut [f64], groups: usize, eps: f64, inv_std: &mut [f64]) {
    let width = x.len() / groups;
    for (g, chunk) in x.chunks_mut(width).enumerate() {
        let mean = chunk.iter().sum::<f64>() / width as f64;
        let var = chunk.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / width as f64;
        let s = 1.0 / (var + eps).sqrt();
        for v in chunk.iter_mut() {
            *v = (*v - mean) * s;
        }
        inv_std[g] = s;
    }
}

/// Group normalization of a single channel vector.
pub fn group_norm(x: &[f64], groups: usize, scale: &[f64], shift: &[f64], eps: f64) -> Result<Vec<f64>> {
    let m = x.len();
    if groups == 0 || !m.is_multiple_of(groups) || scale.len() != m || shift.len() != m {
        return Err(Error::dims(format!(
            "group norm over {m} channels with {groups} groups, {} scales, {} shifts",
            scale.len(),
            shift.len()
        )));
    }
    let mut y = x.to_vec();
    let mut inv_std = vec![0.0; groups];
    standardize_groups(&mut y, groups, eps, &mut inv_std);
    for c in 0..m {
        y[c] = y[c] * scale[c] + shift[c];
    }
    Ok(y)
}

/// One graph convolution `act(norm(L E W))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnLayer {
    pub weight: DMatrix<f64>,
    pub norm: Option<GroupNorm>,
    pub relu: bool,
}

#[derive(Debug, Clone)]
pub struct LayerCache {
    /// `L E_in`, needed for the weight gradient.
    propagated: DMatrix<f64>,
    /// Standardized pre-activations (group norm only).
    standardized: Option<DMatrix<f64>>,
    /// Per node and group.
    inv_std: Option<DMatrix<f64>>,
    /// Values fed to the ReLU.
    pre_activation: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weight: DMatrix<f64>,
    pub scale: Option<DVector<f64>>,
    pub shift: Option<DVector<f64>>,
}

impl GcnLayer {
    pub fn in_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.ncols()
    }

    fn check(&self, op: &DMatrix<f64>, input: &DMatrix<f64>) -> Result<()> {
        let n = input.nrows();
        if op.nrows() != n || op.ncols() != n {
            return Err(Error::dims(format!(
                "operator is {}x{}, input has {n} rows",
                op.nrows(),
                op.ncols()
            )));
        }
        if input.ncols() != self.in_dim() {
            return Err(Error::dims(format!(
                "layer expects {} input channels, got {}",
                self.in_dim(),
                input.ncols()
            )));
        }
        if let Some(norm) = &self.norm {
            if norm.channels() != self.out_dim() || !self.out_dim().is_multiple_of(norm.groups) {
                return Err(Error::dims("group norm width does not match layer output"));
            }
        }
        Ok(())
    }

    pub fn forward(&self, op: &DMatrix<f64>, input: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(op, input)?;
        let z = op * input * &self.weight;
        let pre = match &self.norm {
            Some(norm) => self.normalize(norm, z).0,
            None => z,
        };
        Ok(if self.relu { pre.map(|x| x.max(0.0)) } else { pre })
    }

    pub fn forward_cached(
        &self,
        op: &DMatrix<f64>,
        input: &DMatrix<f64>,
    ) -> Result<(DMatrix<f64>, LayerCache)> {
        self.check(op, input)?;
        let propagated = op * input;
        let z = &propagated * &self.weight;
        let (pre_activation, standardized, inv_std) = match &self.norm {
            Some(norm) => {
                let (y, xhat, inv) = self.normalize(norm, z);
                (y, Some(xhat), Some(inv))
            }
            None => (z, None, None),
        };
        let out = if self.relu {
            pre_activation.map(|x| x.max(0.0))
        } else {
            pre_activation.clone()
        };
        Ok((
            out,
            LayerCache {
                propagated,
                standardized,
                inv_std,
                pre_activation,
            },
        ))
    }

    /// Returns (affine output, standardized values, inverse stds).
    fn normalize(&self, norm: &GroupNorm, z: DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let (n, m) = z.shape();
        let mut xhat = z;
        let mut inv_std = DMatrix::zeros(n, norm.groups);
        let mut row = vec![0.0; m];
        let mut inv = vec![0.0; norm.groups];
        for i in 0..n {
            for c in 0..m {
                row[c] = xhat[(i, c)];
            }
            standardize_groups(&mut row, norm.groups, GN_EPS, &mut inv);
            for c in 0..m {
                xhat[(i, c)] = row[c];
            }
            for g in 0..norm.groups {
                inv_std[(i, g)] = inv[g];
            }
        }
        let mut y = xhat.clone();
        for c in 0..m {
            let (s, b) = (norm.scale[c], norm.shift[c]);
            y.column_mut(c).apply(|x| *x = *x * s + b);
        }
        (y, xhat, inv_std)
    }

    /// Backpropagates `grad_out` (gradient w.r.t. this layer's output).
    /// Returns the gradient w.r.t. the layer input and the parameter
    /// gradients.
    pub fn backward(
        &self,
        op: &DMatrix<f64>,
        cache: &LayerCache,
        grad_out: &DMatrix<f64>,
    ) -> Result<(DMatrix<f64>, LayerGrad)> {
        let n = cache.pre_activation.nrows();
        if grad_out.shape() != (n, self.out_dim())
            || cache.propagated.ncols() != self.in_dim()
            || op.shape() != (n, n)
        {
            return Err(Error::StaleCache(format!(
                "layer {}->{} cache holds {n} nodes, gradient is {}x{}",
                self.in_dim(),
                self.out_dim(),
                grad_out.nrows(),
                grad_out.ncols()
            )));
        }
        let mut grad_pre = grad_out.clone();
        if self.relu {
            grad_pre.zip_apply(&cache.pre_activation, |g, y| {
                if y <= 0.0 {
                    *g = 0.0
                }
            });
        }
        let (grad_z, scale, shift) = match (&self.norm, &cache.standardized, &cache.inv_std) {
            (Some(norm), Some(xhat), Some(inv_std)) => {
                let m = self.out_dim();
                let width = m / norm.groups;
                let mut d_scale = DVector::zeros(m);
                let mut d_shift = DVector::zeros(m);
                for c in 0..m {
                    d_scale[c] = grad_pre.column(c).dot(&xhat.column(c));
                    d_shift[c] = grad_pre.column(c).sum();
                }
                let mut grad_z = DMatrix::zeros(n, m);
                for i in 0..n {
                    for g in 0..norm.groups {
                        let cols = g * width..(g + 1) * width;
                        let mut mean_d = 0.0;
                        let mut mean_dx = 0.0;
                        for c in cols.clone() {
                            let d = grad_pre[(i, c)] * norm.scale[c];
                            mean_d += d;
                            mean_dx += d * xhat[(i, c)];
                        }
                        mean_d /= width as f64;
                        mean_dx /= width as f64;
                        let s = inv_std[(i, g)];
                        for c in cols {
                            let d = grad_pre[(i, c)] * norm.scale[c];
                            grad_z[(i, c)] = s * (d - mean_d - xhat[(i, c)] * mean_dx);
                        }
                    }
                }
                (grad_z, Some(d_scale), Some(d_shift))
            }
            (None, None, None) => (grad_pre, None, None),
            _ => return Err(Error::StaleCache("group-norm cache mismatch".into())),
        };
        let weight = cache.propagated.transpose() * &grad_z;
        let grad_in = op.transpose() * (grad_z * self.weight.transpose());
        Ok((grad_in, LayerGrad { weight, scale, shift }))
    }
}
