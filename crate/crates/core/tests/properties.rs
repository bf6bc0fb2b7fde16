use proptest::prelude::*;

use sagkit_core::mlmodels::{sigmoid, softplus, Logistic, Mlp};
use sagkit_core::problems::mean_of_component_gradients;
use sagkit_core::sag::{init_table, sag_step};
use sagkit_core::{
    FiniteSum, GradientTable, HyperParams, InitMode, OptimizerKind, OptimizerState, Quadratic, Regularized,
};

fn rel_close(a: &[f64], b: &[f64], tol: f64) -> bool {
    let scale = a.iter().chain(b).fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * scale)
}

fn logistic(features: Vec<f64>, p: usize) -> Logistic {
    let n = features.len() / p;
    let labels = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    Logistic::new(features, labels, p).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn component_gradients_average_to_full_gradient(
        n in 1usize..12,
        p in 1usize..5,
        seed in 0u64..1000,
        x in prop::collection::vec(-3.0f64..3.0, 5),
    ) {
        let q = Quadratic::random_least_squares(n, p, 0.1, seed).unwrap();
        let x = &x[..p];
        let mut mean = vec![0.0; p];
        mean_of_component_gradients(&q, x, &mut mean);
        let full = q.full_gradient(x).unwrap();
        prop_assert!(rel_close(&mean, &full, 1e-12));
    }

    #[test]
    fn logistic_pieces_are_monotone(a in -60.0f64..60.0, b in -60.0f64..60.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(softplus(lo) <= softplus(hi));
        prop_assert!(sigmoid(lo) <= sigmoid(hi));
        prop_assert!((sigmoid(a) + sigmoid(-a) - 1.0).abs() < 1e-15);
        prop_assert!(softplus(a) >= 0.0 && softplus(a).is_finite());
    }

    #[test]
    fn flatten_round_trips(inputs in 1usize..6, hidden in 1usize..8, outputs in 1usize..4, seed in 0u64..100) {
        let m = Mlp::new(inputs, hidden, outputs).unwrap();
        let theta = m.init(seed);
        prop_assert_eq!(theta.len(), m.param_count());
        let back = m.flatten(&m.unflatten(&theta).unwrap()).unwrap();
        prop_assert_eq!(back, theta);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point(kind_idx in 0usize..OptimizerKind::ALL.len(), x in prop::collection::vec(-5.0f64..5.0, 3)) {
        let kind = OptimizerKind::ALL[kind_idx];
        let mut s = OptimizerState::new(kind, HyperParams::for_kind(kind), x.clone()).unwrap();
        for _ in 0..5 {
            s.step(&[0.0; 3]).unwrap();
        }
        prop_assert_eq!(s.x(), &x[..]);
    }

    #[test]
    fn snapshot_round_trips(
        n in 1usize..8,
        seed in 0u64..100,
        steps in prop::collection::vec(0usize..8, 0..20),
        centered in any::<bool>(),
    ) {
        let q = Quadratic::random_least_squares(n, 3, 0.1, seed).unwrap();
        let mut x = vec![0.5, -0.5, 1.0];
        let mode = if centered { InitMode::Centered } else { InitMode::Zeros };
        let mut table = init_table(&q, &x, mode).unwrap();
        for i in steps {
            sag_step(&mut table, &q, &mut x, i % n, 0.01).unwrap();
        }
        let back = GradientTable::from_bytes(&table.to_bytes()).unwrap();
        prop_assert_eq!(back, table);
    }

    #[test]
    fn regularization_makes_logistic_strongly_convex(
        features in prop::collection::vec(-2.0f64..2.0, 12),
        x in prop::collection::vec(-3.0f64..3.0, 3),
        y in prop::collection::vec(-3.0f64..3.0, 3),
        lambda in 0.01f64..2.0,
    ) {
        let r = Regularized::new(logistic(features, 3), lambda).unwrap();
        let gx = r.full_gradient(&x).unwrap();
        let gy = r.full_gradient(&y).unwrap();
        let inner: f64 = gx.iter().zip(&gy).zip(x.iter().zip(&y)).map(|((a, b), (u, v))| (a - b) * (u - v)).sum();
        let dist: f64 = x.iter().zip(&y).map(|(u, v)| (u - v) * (u - v)).sum();
        prop_assert!(inner >= lambda * dist - 1e-12 * (1.0 + dist));
    }
}
