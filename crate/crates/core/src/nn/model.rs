use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::layer::{GcnLayer, GroupNorm, LayerCache, LayerGrad};
use crate::error::{Error, Result};
use crate::rng::{self, Domain};

/// Shape of a [`GcnModel`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelDims {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub layers: usize,
    pub groups: usize,
    pub groupnorm: bool,
    /// 1-based layer numbers whose input is the running activation
    /// concatenated with the model input.
    pub skip_at: Vec<usize>,
}

pub const DEFAULT_LAYERS: usize = 12;
pub const DEFAULT_HIDDEN: usize = 64;
pub const DEFAULT_GROUPS: usize = 4;

impl ModelDims {
    /// The default 12-layer network with skips into layers 6 and 12.
    pub fn new(input_dim: usize, output_dim: usize) -> Self {
        ModelDims {
            input_dim,
            hidden_dim: DEFAULT_HIDDEN,
            output_dim,
            layers: DEFAULT_LAYERS,
            groups: DEFAULT_GROUPS,
            groupnorm: true,
            skip_at: vec![6, 12],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.output_dim == 0 {
            return Err(Error::Spec("model widths must be >= 1".into()));
        }
        if self.layers < 2 {
            return Err(Error::Spec("the model needs at least 2 layers".into()));
        }
        if self.groupnorm && (self.groups == 0 || !self.hidden_dim.is_multiple_of(self.groups)) {
            return Err(Error::Spec(format!(
                "{} groups do not divide hidden width {}",
                self.groups, self.hidden_dim
            )));
        }
        if let Some(&k) = self.skip_at.iter().find(|&&k| k < 2 || k > self.layers) {
            return Err(Error::Spec(format!("skip into layer {k} is out of range")));
        }
        Ok(())
    }

    fn has_skip(&self, layer: usize) -> bool {
        self.skip_at.contains(&(layer + 1))
    }

    fn layer_shape(&self, layer: usize) -> (usize, usize) {
        let last = layer + 1 == self.layers;
        let in_dim = if layer == 0 {
            self.input_dim
        } else if self.has_skip(layer) {
            self.hidden_dim + self.input_dim
        } else {
            self.hidden_dim
        };
        let out_dim = if last { self.output_dim } else { self.hidden_dim };
        (in_dim, out_dim)
    }
}

/// Weight initialization scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// Uniform in `+-sqrt(6 / (fan_in + fan_out))`.
    Xavier,
    Zeros,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    dims: ModelDims,
    layers: Vec<GcnLayer>,
}

/// Activations kept by [`GcnModel::forward_cached`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    op: DMatrix<f64>,
    layers: Vec<LayerCache>,
    raw_output: DMatrix<f64>,
    row_norms: DVector<f64>,
}

/// Parameter gradients, one entry per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    /// Flat views in the same order as [`GcnModel::params_mut`].
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for g in &self.layers {
            out.push(g.weight.as_slice());
            if let (Some(s), Some(b)) = (&g.scale, &g.shift) {
                out.push(s.as_slice());
                out.push(b.as_slice());
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}

pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Normalizes each row to unit length; zero rows stay zero.
pub fn normalize_rows(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let norms = DVector::from_fn(m.nrows(), |i, _| m.row(i).norm());
    let mut out = m.clone();
    for i in 0..m.nrows() {
        if norms[i] > 0.0 {
            out.row_mut(i).unscale_mut(norms[i]);
        }
    }
    (out, norms)
}

impl GcnModel {
    pub fn init(dims: ModelDims, init: Init, seed: u64) -> Result<Self> {
        dims.validate()?;
        let mut rng = rng::stream(seed, Domain::Init, 0);
        let mut layers = Vec::with_capacity(dims.layers);
        for k in 0..dims.layers {
            let (fan_in, fan_out) = dims.layer_shape(k);
            let weight = match init {
                Init::Zeros => DMatrix::zeros(fan_in, fan_out),
                Init::Xavier => {
                    let bound = xavier_bound(fan_in, fan_out);
                    DMatrix::from_fn(fan_in, fan_out, |_, _| rng.random_range(-bound..bound))
                }
            };
            let last = k + 1 == dims.layers;
            let norm = if dims.groupnorm && !last {
                Some(GroupNorm::identity(fan_out, dims.groups)?)
            } else {
                None
            };
            layers.push(GcnLayer {
                weight,
                norm,
                relu: !last,
            });
        }
        Ok(GcnModel { dims, layers })
    }

    /// Assembles a model from explicit layers, checking they match `dims`.
    pub fn from_layers(dims: ModelDims, layers: Vec<GcnLayer>) -> Result<Self> {
        dims.validate()?;
        if layers.len() != dims.layers {
            return Err(Error::dims(format!(
                "expected {} layers, got {}",
                dims.layers,
                layers.len()
            )));
        }
        for (k, layer) in layers.iter().enumerate() {
            let last = k + 1 == dims.layers;
            if (layer.in_dim(), layer.out_dim()) != dims.layer_shape(k)
                || layer.relu == last
                || layer.norm.is_some() != (dims.groupnorm && !last)
            {
                return Err(Error::dims(format!("layer {} does not match the model dims", k + 1)));
            }
            if let Some(norm) = &layer.norm {
                if norm.groups != dims.groups || norm.channels() != layer.out_dim() {
                    return Err(Error::dims(format!("layer {} group norm mismatch", k + 1)));
                }
            }
        }
        Ok(GcnModel { dims, layers })
    }

    pub fn dims(&self) -> &ModelDims {
        &self.dims
    }

    pub fn layers(&self) -> &[GcnLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [GcnLayer] {
        &mut self.layers
    }

    /// Mutable flat views of every parameter: per layer the weight
    /// (column-major), then group-norm scale and shift when present.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            out.push(layer.weight.as_mut_slice());
            if let Some(norm) = &mut layer.norm {
                out.push(norm.scale.as_mut_slice());
                out.push(norm.shift.as_mut_slice());
            }
        }
        out
    }

    pub fn params(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.push(layer.weight.as_slice());
            if let Some(norm) = &layer.norm {
                out.push(norm.scale.as_slice());
                out.push(norm.shift.as_slice());
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|s| s.len()).sum()
    }

    fn check_input(&self, op: &DMatrix<f64>, input: &DMatrix<f64>) -> Result<()> {
        if input.ncols() != self.dims.input_dim {
            return Err(Error::dims(format!(
                "model expects {} input features, got {}",
                self.dims.input_dim,
                input.ncols()
            )));
        }
        let n = input.nrows();
        if op.shape() != (n, n) {
            return Err(Error::dims(format!(
                "operator is {}x{}, input has {n} rows",
                op.nrows(),
                op.ncols()
            )));
        }
        Ok(())
    }

    fn layer_input(&self, k: usize, running: &DMatrix<f64>, input: &DMatrix<f64>) -> DMatrix<f64> {
        if k == 0 {
            input.clone()
        } else if self.dims.has_skip(k) {
            let n = input.nrows();
            let (h, m0) = (running.ncols(), input.ncols());
            let mut cat = DMatrix::zeros(n, h + m0);
            cat.columns_mut(0, h).copy_from(running);
            cat.columns_mut(h, m0).copy_from(input);
            cat
        } else {
            running.clone()
        }
    }

    /// Embedding with unit-norm rows (zero rows stay zero).
    pub fn forward(&self, op: &DMatrix<f64>, input: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_input(op, input)?;
        let mut running = input.clone();
        for (k, layer) in self.layers.iter().enumerate() {
            let x = self.layer_input(k, &running, input);
            running = layer.forward(op, &x)?;
        }
        Ok(normalize_rows(&running).0)
    }

    pub fn forward_cached(
        &self,
        op: &DMatrix<f64>,
        input: &DMatrix<f64>,
    ) -> Result<(DMatrix<f64>, ForwardCache)> {
        self.check_input(op, input)?;
        let mut running = input.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for (k, layer) in self.layers.iter().enumerate() {
            let x = self.layer_input(k, &running, input);
            let (out, cache) = layer.forward_cached(op, &x)?;
            caches.push(cache);
            running = out;
        }
        let (embedding, row_norms) = normalize_rows(&running);
        Ok((
            embedding.clone(),
            ForwardCache {
                op: op.clone(),
                layers: caches,
                raw_output: running,
                row_norms,
            },
        ))
    }

    /// Exact parameter gradients of a scalar loss given `d loss / d E`.
    pub fn backward(&self, cache: &ForwardCache, grad_embedding: &DMatrix<f64>) -> Result<Gradients> {
        let (n, d) = cache.raw_output.shape();
        if cache.layers.len() != self.layers.len() || d != self.dims.output_dim {
            return Err(Error::StaleCache("cache was produced by a different model".into()));
        }
        if grad_embedding.shape() != (n, d) {
            return Err(Error::StaleCache(format!(
                "upstream gradient is {}x{}, cached output is {n}x{d}",
                grad_embedding.nrows(),
                grad_embedding.ncols()
            )));
        }
        // through e = r / |r|: dr = (de - e (e . de)) / |r|
        let mut grad = DMatrix::zeros(n, d);
        for i in 0..n {
            let norm = cache.row_norms[i];
            if norm == 0.0 {
                continue;
            }
            let e = cache.raw_output.row(i) / norm;
            let g = grad_embedding.row(i);
            let proj = e.dot(&g);
            grad.row_mut(i).copy_from(&((g - e * proj) / norm));
        }
        let h = self.dims.hidden_dim;
        let mut layer_grads = Vec::with_capacity(self.layers.len());
        for k in (0..self.layers.len()).rev() {
            let (grad_in, lg) = self.layers[k].backward(&cache.op, &cache.layers[k], &grad)?;
            layer_grads.push(lg);
            if k > 0 {
                grad = if self.dims.has_skip(k) {
                    grad_in.columns(0, h).into_owned()
                } else {
                    grad_in
                };
            }
        }
        layer_grads.reverse();
        Ok(Gradients {
            layers: layer_grads,
        })
    }
}
