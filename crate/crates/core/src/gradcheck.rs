//! Directional-derivative check of the full model under the training loss.
//!
//! For random unit directions `u` in parameter space, the analytic
//! derivative `grad . u` is compared with the central difference
//! `(f(theta + h u) - f(theta - h u)) / 2h` of the combined cycle and
//! geometric loss. Errors are relative to `max(|analytic|, |numeric|,
//! FLOOR * |grad|)`: along directions nearly orthogonal to the gradient the
//! central difference is dominated by round-off, so such directions are
//! judged on the scale of the gradient itself.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::geometry::GeometricPrior;
use crate::losses::{combined_loss, LossConfig};
use crate::nn::{GcnModel, Init, ModelDims};
use crate::rng::{stream, Domain};
use crate::synth::{gen_graph, SynthGraphSpec};

pub const FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckConfig {
    pub views: usize,
    pub points: usize,
    pub directions: usize,
    pub groupnorm: bool,
    pub lambda_geom: f64,
    pub step: f64,
    pub seed: u64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            views: 3,
            points: 6,
            directions: 20,
            groupnorm: true,
            lambda_geom: 1.0,
            step: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionCheck {
    pub analytic: f64,
    pub numeric: f64,
    /// `|analytic - numeric| / max(|analytic|, |numeric|)`.
    pub raw_rel_error: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub groupnorm: bool,
    pub params: usize,
    pub grad_norm: f64,
    pub checks: Vec<DirectionCheck>,
}

impl GradcheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.checks.iter().map(|c| c.rel_error).fold(0.0, f64::max)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "groupnorm={} params={} grad_norm={:.6e} directions={} max_rel_error={:.3e}\n",
            self.groupnorm,
            self.params,
            self.grad_norm,
            self.checks.len(),
            self.max_rel_error()
        );
        for (k, c) in self.checks.iter().enumerate() {
            out.push_str(&format!(
                "  {k:>3} analytic={:+.12e} numeric={:+.12e} rel={:.3e} raw_rel={:.3e}\n",
                c.analytic, c.numeric, c.rel_error, c.raw_rel_error
            ));
        }
        out
    }
}

fn flat(slices: &[&[f64]]) -> Vec<f64> {
    slices.iter().flat_map(|s| s.iter().copied()).collect()
}

fn shifted(model: &GcnModel, dir: &[f64], t: f64) -> GcnModel {
    let mut m = model.clone();
    let mut k = 0;
    for slice in m.params_mut() {
        for p in slice.iter_mut() {
            *p += t * dir[k];
            k += 1;
        }
    }
    m
}

pub fn gradcheck(cfg: &GradcheckConfig) -> Result<GradcheckReport> {
    let (graph, _) = gen_graph(&SynthGraphSpec {
        views: cfg.views,
        points: cfg.points,
        seed: cfg.seed,
        ..Default::default()
    })?;
    let n = graph.n();
    let mut rng = stream(cfg.seed, Domain::Check, 0);

    // any symmetric nonnegative cross-view weights exercise the geometric term
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            if graph.view_of()[i] != graph.view_of()[j] {
                let w: f64 = rng.random();
                g[(i, j)] = w;
                g[(j, i)] = w;
            }
        }
    }
    let prior = GeometricPrior::from_weights(g, graph.view_of())?;

    let mut dims = ModelDims::new(graph.feature_dim(), cfg.points);
    dims.groupnorm = cfg.groupnorm;
    let mut model = GcnModel::init(dims, Init::Xavier, cfg.seed)?;
    // move the norm parameters off their identity init
    for layer in model.layers_mut() {
        if let Some(norm) = &mut layer.norm {
            norm.scale.apply(|s| *s += 0.5 * (rng.random::<f64>() - 0.5));
            norm.shift.apply(|b| *b += 0.2 * (rng.random::<f64>() - 0.5));
        }
    }

    let op = graph.augmented_operator();
    let loss_cfg = LossConfig {
        lambda_geom: cfg.lambda_geom,
    };
    let loss_of = |m: &GcnModel| -> Result<f64> {
        let e = m.forward(&op, graph.features())?;
        Ok(combined_loss(graph.adjacency(), Some(&prior), &e, &loss_cfg)?.total)
    };

    let (embedding, cache) = model.forward_cached(&op, graph.features())?;
    let value = combined_loss(graph.adjacency(), Some(&prior), &embedding, &loss_cfg)?;
    let grads = model.backward(&cache, &value.grad)?;
    let grad = flat(&grads.slices());
    let grad_norm = grad.iter().map(|x| x * x).sum::<f64>().sqrt();

    let mut checks = Vec::with_capacity(cfg.directions);
    for _ in 0..cfg.directions {
        let mut dir: Vec<f64> = (0..grad.len()).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        dir.iter_mut().for_each(|x| *x /= norm);
        let analytic: f64 = grad.iter().zip(&dir).map(|(g, u)| g * u).sum();
        let numeric = (loss_of(&shifted(&model, &dir, cfg.step))?
            - loss_of(&shifted(&model, &dir, -cfg.step))?)
            / (2.0 * cfg.step);
        let diff = (analytic - numeric).abs();
        let scale = analytic.abs().max(numeric.abs());
        checks.push(DirectionCheck {
            analytic,
            numeric,
            raw_rel_error: if scale > 0.0 { diff / scale } else { 0.0 },
            rel_error: diff / scale.max(FLOOR * grad_norm).max(f64::MIN_POSITIVE),
        });
    }
    Ok(GradcheckReport {
        groupnorm: cfg.groupnorm,
        params: grad.len(),
        grad_norm,
        checks,
    })
}
