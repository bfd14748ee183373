mod common;

use common::{gaussian, orthogonal, rng};
use cyclematch::baselines::{sinkhorn, SINKHORN_TOL};
use cyclematch::eval::embedding_similarity;
use cyclematch::geometry::{epipolar_residual, GeometricPrior, Pose};
use cyclematch::graph::augmented_operator_of;
use cyclematch::losses::{cycle_loss, geometric_loss};
use cyclematch::nn::normalize_rows;
use cyclematch::synth::{gen_graph, SynthGraphSpec};
use nalgebra::{DMatrix, DVector, Rotation3, Vector3};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn random_adjacency(seed: u64, n: usize) -> DMatrix<f64> {
    let mut r = rng(seed);
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            if r.random::<f64>() < 0.4 {
                let w: f64 = r.random();
                a[(i, j)] = w;
                a[(j, i)] = w;
            }
        }
    }
    a
}

fn permutation(seed: u64, n: usize) -> DMatrix<f64> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng(seed));
    DMatrix::from_fn(n, n, |i, j| if idx[i] == j { 1.0 } else { 0.0 })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn operator_commutes_with_relabeling(seed in any::<u64>(), n in 2usize..20) {
        let a = random_adjacency(seed, n);
        let p = permutation(seed ^ 1, n);
        let lhs = augmented_operator_of(&(&p * &a * p.transpose()));
        let rhs = &p * augmented_operator_of(&a) * p.transpose();
        prop_assert!((lhs - rhs).amax() < 1e-14);
    }

    #[test]
    fn operator_is_symmetric_with_unit_radius(seed in any::<u64>(), n in 2usize..20) {
        let op = augmented_operator_of(&random_adjacency(seed, n));
        prop_assert!((&op - op.transpose()).amax() < 1e-15);
        let eig = op.symmetric_eigen();
        prop_assert!(eig.eigenvalues.amax() <= 1.0 + 1e-12);
        // the top eigenvalue of D^-1/2 (A+I) D^-1/2 is exactly 1
        prop_assert!((eig.eigenvalues.max() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn generated_graphs_are_symmetric(seed in any::<u64>(), views in 2usize..5, points in 2usize..12, rate in 0.0f64..0.5) {
        let (g, gt) = gen_graph(&SynthGraphSpec { views, points, outlier_rate: rate, seed, ..Default::default() }).unwrap();
        let a = g.adjacency();
        prop_assert_eq!(a, &a.transpose());
        prop_assert_eq!(g.n(), views * points);
        prop_assert_eq!(gt.indicator().column_sum(), DVector::from_element(g.n(), 1.0));
        if rate == 0.0 {
            prop_assert_eq!(a, &gt.clean_adjacency());
        }
    }

    #[test]
    fn sinkhorn_is_doubly_stochastic(seed in any::<u64>(), d in 1usize..15) {
        let mut r = rng(seed);
        let m = DMatrix::from_fn(d, d, |_, _| r.random::<f64>() + 0.01);
        let (p, dev) = sinkhorn(&m).unwrap();
        prop_assert!(dev <= SINKHORN_TOL);
        for k in 0..d {
            prop_assert!((p.row(k).sum() - 1.0).abs() <= SINKHORN_TOL);
            prop_assert!((p.column(k).sum() - 1.0).abs() <= SINKHORN_TOL);
        }
        prop_assert!(p.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn losses_ignore_embedding_rotations(seed in any::<u64>(), n in 2usize..16, d in 1usize..8) {
        let mut r = rng(seed);
        let e = normalize_rows(&gaussian(&mut r, n, d)).0;
        let q = orthogonal(&mut r, d);
        let eq = &e * &q;
        let a = random_adjacency(seed, n);
        prop_assert!((cycle_loss(&a, &eq).unwrap().0 - cycle_loss(&a, &e).unwrap().0).abs() <= 1e-10);
        prop_assert!((&eq * eq.transpose() - &e * e.transpose()).amax() <= 1e-10);
        let view_of: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let mut w = DMatrix::from_fn(n, n, |i, j| if view_of[i] != view_of[j] { a[(i, j)] } else { 0.0 });
        w[(0, 1)] = w[(0, 1)].max(0.5);
        w[(1, 0)] = w[(0, 1)];
        let prior = GeometricPrior::from_weights(w, &view_of).unwrap();
        prop_assert!((geometric_loss(&prior, &eq).unwrap().0 - geometric_loss(&prior, &e).unwrap().0).abs() <= 1e-10);
    }

    #[test]
    fn similarities_lie_in_unit_interval(seed in any::<u64>(), n in 2usize..16, d in 1usize..8) {
        let e = gaussian(&mut rng(seed), n, d) * 2.0;
        let view_of: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let s = embedding_similarity(&e, &view_of);
        prop_assert!(s.iter().all(|&x| (0.0..=1.0).contains(&x)));
        for i in 0..n {
            prop_assert_eq!(s[(i, i)], 0.0);
        }
    }

    #[test]
    fn residual_is_symmetric_in_its_pair(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut pose = || {
            let rot = Rotation3::from_euler_angles(r.random::<f64>(), r.random::<f64>(), r.random::<f64>());
            let c = Vector3::new(r.random::<f64>(), r.random::<f64>(), r.random::<f64>() - 5.0);
            Pose::new(*rot.matrix(), c).unwrap()
        };
        let (pi, pj) = (pose(), pose());
        let xi = Vector3::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5, 1.0);
        let xj = Vector3::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5, 1.0);
        let a = epipolar_residual(&pi, &pj, &xi, &xj).unwrap();
        let b = epipolar_residual(&pj, &pi, &xj, &xi).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        prop_assert!(a >= 0.0);
    }
}
