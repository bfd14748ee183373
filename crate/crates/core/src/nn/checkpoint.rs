//! `GCNM 1` model checkpoints with an optional trailing `ADAM 1` block.
//!
//! ```text
//! GCNM 1
//! input <m0> hidden <h> output <d> layers <L> groups <G> groupnorm <0|1>
//! skip_at <k> <k> ...
//! layer <k> in <rows> out <cols> norm <0|1>
//! <rows lines of cols reals: the weight, row-major>
//! <scale line> <shift line>            (only when norm is 1)
//! ...
//! ADAM 1
//! t <t> lr0 <r> beta1 <r> beta2 <r> eps <r> decay <r>
//! <one line per parameter tensor: first moments>
//! <one line per parameter tensor: second moments>
//! ```
//!
//! Moment lines follow [`GcnModel::params`] order (weights column-major).

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::{AdamConfig, AdamState, GcnLayer, GcnModel, GroupNorm, ModelDims};
use crate::error::{Error, Result};
use crate::textio::{self, Cursor};

pub fn write_checkpoint(model: &GcnModel, adam: Option<&AdamState>) -> String {
    let d = model.dims();
    let mut out = String::from("GCNM 1\n");
    out.push_str(&format!(
        "input {} hidden {} output {} layers {} groups {} groupnorm {}\n",
        d.input_dim,
        d.hidden_dim,
        d.output_dim,
        d.layers,
        d.groups,
        u8::from(d.groupnorm)
    ));
    out.push_str("skip_at");
    for k in &d.skip_at {
        out.push_str(&format!(" {k}"));
    }
    out.push('\n');
    for (k, layer) in model.layers().iter().enumerate() {
        out.push_str(&format!(
            "layer {} in {} out {} norm {}\n",
            k + 1,
            layer.in_dim(),
            layer.out_dim(),
            u8::from(layer.norm.is_some())
        ));
        for r in 0..layer.in_dim() {
            textio::push_reals(&mut out, layer.weight.row(r).iter());
        }
        if let Some(norm) = &layer.norm {
            textio::push_reals(&mut out, norm.scale.iter());
            textio::push_reals(&mut out, norm.shift.iter());
        }
    }
    if let Some(adam) = adam {
        let c = &adam.config;
        out.push_str("ADAM 1\n");
        out.push_str(&format!(
            "t {} lr0 {} beta1 {} beta2 {} eps {} decay {}\n",
            adam.t,
            textio::real(c.lr0),
            textio::real(c.beta1),
            textio::real(c.beta2),
            textio::real(c.eps),
            textio::real(c.decay)
        ));
        for m in &adam.m {
            textio::push_reals(&mut out, m.iter());
        }
        for v in &adam.v {
            textio::push_reals(&mut out, v.iter());
        }
    }
    out
}

pub fn read_checkpoint(text: &str) -> Result<(GcnModel, Option<AdamState>)> {
    let mut c = Cursor::new(text);
    c.expect_header("GCNM", 1)?;
    let head = c.keyed::<usize>(&["input", "hidden", "output", "layers", "groups", "groupnorm"])?;
    let skip_line = c.next_line()?;
    let mut tokens = skip_line.split_whitespace();
    if tokens.next() != Some("skip_at") {
        return Err(c.err("expected skip_at"));
    }
    let skip_at = tokens
        .map(|t| t.parse::<usize>().map_err(|_| c.err("bad skip_at entry")))
        .collect::<Result<Vec<_>>>()?;
    if head[5] > 1 {
        return Err(c.err("groupnorm must be 0 or 1"));
    }
    let dims = ModelDims {
        input_dim: head[0],
        hidden_dim: head[1],
        output_dim: head[2],
        layers: head[3],
        groups: head[4],
        groupnorm: head[5] == 1,
        skip_at,
    };
    dims.validate().map_err(|e| c.err(e.to_string()))?;

    let mut layers = Vec::with_capacity(dims.layers);
    for k in 0..dims.layers {
        let h = c.keyed::<usize>(&["layer", "in", "out", "norm"])?;
        if h[0] != k + 1 || h[3] > 1 {
            return Err(c.err(format!("malformed header for layer {}", k + 1)));
        }
        let (rows, cols) = (h[1], h[2]);
        let mut weight = DMatrix::zeros(rows, cols);
        for r in 0..rows {
            let vals = c.values::<f64>(cols)?;
            for (j, x) in vals.into_iter().enumerate() {
                weight[(r, j)] = x;
            }
        }
        let norm = if h[3] == 1 {
            let scale = DVector::from_vec(c.values::<f64>(cols)?);
            let shift = DVector::from_vec(c.values::<f64>(cols)?);
            Some(GroupNorm {
                groups: dims.groups,
                scale,
                shift,
            })
        } else {
            None
        };
        layers.push(GcnLayer {
            weight,
            norm,
            relu: k + 1 != dims.layers,
        });
    }
    let line = c.line_no();
    let model = GcnModel::from_layers(dims, layers).map_err(|e| Error::format(line, e.to_string()))?;

    let adam = if c.at_end() {
        None
    } else {
        c.expect_header("ADAM", 1)?;
        let line = c.next_line()?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let keys = ["t", "lr0", "beta1", "beta2", "eps", "decay"];
        if tokens.len() != 12 || keys.iter().enumerate().any(|(i, k)| tokens[2 * i] != *k) {
            return Err(c.err("malformed ADAM header"));
        }
        let t = tokens[1].parse::<u64>().map_err(|_| c.err("bad step count"))?;
        let real = |i: usize| tokens[2 * i + 1].parse::<f64>().map_err(|_| c.err("bad real"));
        let config = AdamConfig {
            lr0: real(1)?,
            beta1: real(2)?,
            beta2: real(3)?,
            eps: real(4)?,
            decay: real(5)?,
        };
        let shapes: Vec<usize> = model.params().iter().map(|s| s.len()).collect();
        let m = shapes
            .iter()
            .map(|&l| c.values::<f64>(l))
            .collect::<Result<Vec<_>>>()?;
        let v = shapes
            .iter()
            .map(|&l| c.values::<f64>(l))
            .collect::<Result<Vec<_>>>()?;
        Some(AdamState { config, t, m, v })
    };
    c.expect_end()?;
    Ok((model, adam))
}

pub fn save_checkpoint(path: &Path, model: &GcnModel, adam: Option<&AdamState>) -> Result<()> {
    textio::write_file(path, &write_checkpoint(model, adam))
}

pub fn load_checkpoint(path: &Path) -> Result<(GcnModel, Option<AdamState>)> {
    read_checkpoint(&textio::read_file(path)?)
}
