mod common;

use common::{gaussian, rng};
use cyclematch::geometry::GeometricPrior;
use cyclematch::gradcheck::{gradcheck, GradcheckConfig, FLOOR};
use cyclematch::losses::{combined_loss, LossConfig};
use cyclematch::nn::{GcnModel, Init, ModelDims};
use cyclematch::synth::{gen_graph, SynthGraphSpec};
use nalgebra::DMatrix;

const H: f64 = 1e-6;
const TOL: f64 = 1e-5;

/// Central differences of `<forward(theta), u>` against the backward pass,
/// one parameter at a time. Returns the worst floored relative error.
fn per_coordinate(groupnorm: bool) -> f64 {
    let (g, _) = gen_graph(&SynthGraphSpec {
        views: 3,
        points: 6,
        seed: 3,
        ..Default::default()
    })
    .unwrap();
    let mut dims = ModelDims::new(g.feature_dim(), 6);
    dims.groupnorm = groupnorm;
    let model = GcnModel::init(dims, Init::Xavier, 1).unwrap();
    let op = g.augmented_operator();
    let u = gaussian(&mut rng(4), g.n(), 6);
    let (_, cache) = model.forward_cached(&op, g.features()).unwrap();
    let analytic: Vec<f64> = model
        .backward(&cache, &u)
        .unwrap()
        .slices()
        .iter()
        .flat_map(|s| s.iter().copied())
        .collect();
    let floor = FLOOR * analytic.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let lens: Vec<usize> = model.params().iter().map(|s| s.len()).collect();
    let value = |m: &GcnModel| m.forward(&op, g.features()).unwrap().dot(&u);

    let mut worst: f64 = 0.0;
    let mut idx = 0;
    for (b, &len) in lens.iter().enumerate() {
        for k in 0..len {
            let mut plus = model.clone();
            plus.params_mut()[b][k] += H;
            let mut minus = model.clone();
            minus.params_mut()[b][k] -= H;
            let numeric = (value(&plus) - value(&minus)) / (2.0 * H);
            let a = analytic[idx];
            idx += 1;
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            worst = worst.max(err);
        }
    }
    assert_eq!(idx, analytic.len());
    worst
}

#[test]
fn every_parameter_matches_finite_differences_with_groupnorm() {
    let worst = per_coordinate(true);
    assert!(worst <= TOL, "worst relative error {worst:e}");
}

#[test]
fn every_parameter_matches_finite_differences_without_groupnorm() {
    let worst = per_coordinate(false);
    assert!(worst <= TOL, "worst relative error {worst:e}");
}

#[test]
fn directional_checks_pass_on_and_off() {
    for groupnorm in [true, false] {
        for seed in 0..3 {
            let report = gradcheck(&GradcheckConfig {
                groupnorm,
                seed,
                ..Default::default()
            })
            .unwrap();
            assert_eq!(report.checks.len(), 20);
            assert!(report.max_rel_error() <= 1e-4, "{}", report.to_text());
        }
    }
}

#[test]
fn combined_loss_gradient_matches_finite_differences() {
    let (g, _) = gen_graph(&SynthGraphSpec {
        views: 3,
        points: 6,
        outlier_rate: 0.2,
        seed: 9,
        ..Default::default()
    })
    .unwrap();
    let n = g.n();
    let mut r = rng(10);
    let e = gaussian(&mut r, n, 6) * 0.4;
    let w = gaussian(&mut r, n, n).map(f64::abs);
    let w = DMatrix::from_fn(n, n, |i, j| {
        if g.view_of()[i] == g.view_of()[j] {
            0.0
        } else {
            w[(i.min(j), i.max(j))]
        }
    });
    let prior = GeometricPrior::from_weights(w, g.view_of()).unwrap();
    let cfg = LossConfig { lambda_geom: 0.7 };
    let total = |e: &DMatrix<f64>| combined_loss(g.adjacency(), Some(&prior), e, &cfg).unwrap().total;
    let grad = combined_loss(g.adjacency(), Some(&prior), &e, &cfg).unwrap().grad;
    let floor = FLOOR * grad.amax();
    for i in 0..n {
        for k in 0..6 {
            let mut plus = e.clone();
            plus[(i, k)] += H;
            let mut minus = e.clone();
            minus[(i, k)] -= H;
            let numeric = (total(&plus) - total(&minus)) / (2.0 * H);
            let a = grad[(i, k)];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            assert!(err <= TOL, "({i}, {k}): analytic {a:e} numeric {numeric:e}");
        }
    }
}
