mod support;

use asag_core::evalmetrics::{evaluate, mae, pearson, r_squared, rmse, EvalResult, MetricError};
use asag_core::rng::SplitMix64;
use proptest::prelude::*;
use support::oracles;

#[test]
fn thousand_random_instances_match_naive_loops() {
    let mut rng = SplitMix64::new(2024);
    for _ in 0..1000 {
        let n = 2 + rng.below(200);
        let a = oracles::random_vec(&mut rng, n, 0.0, 5.0);
        let p = oracles::random_vec(&mut rng, n, -1.0, 6.0);
        assert!((pearson(&a, &p).unwrap() - oracles::pearson(&a, &p)).abs() < 1e-12);
        assert!((rmse(&a, &p).unwrap() - oracles::rmse(&a, &p)).abs() < 1e-12);
        assert!((mae(&a, &p).unwrap() - oracles::mae(&a, &p)).abs() < 1e-12);
        assert!((r_squared(&a, &p).unwrap() - oracles::r_squared(&a, &p)).abs() < 1e-12);
    }
}

#[test]
fn hand_example_is_exact() {
    assert_eq!(
        pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap(),
        0.8
    );
}

#[test]
fn evaluate_aligns_by_id() {
    let gold = vec![
        ("a".to_string(), Some(1.0)),
        ("b".to_string(), Some(2.0)),
        ("c".to_string(), Some(4.0)),
    ];
    let pred = vec![
        ("c".to_string(), 4.0),
        ("a".to_string(), 1.0),
        ("b".to_string(), 2.0),
    ];
    let r = evaluate(&gold, &pred, 5.0).unwrap();
    assert_eq!(r.pearson, 1.0);
    assert_eq!(r.rmse, 0.0);
    assert_eq!(r.n, 3);
    let missing = vec![("a".to_string(), 1.0), ("b".to_string(), 2.0)];
    assert!(matches!(
        evaluate(&gold, &missing, 5.0),
        Err(MetricError::MissingPrediction(_))
    ));
}

#[test]
fn single_precision_tracks_double() {
    let mut rng = SplitMix64::new(5);
    let a = oracles::random_vec(&mut rng, 100, 0.0, 5.0);
    let p = oracles::random_vec(&mut rng, 100, 0.0, 5.0);
    let a32: Vec<f32> = a.iter().map(|&v| v as f32).collect();
    let p32: Vec<f32> = p.iter().map(|&v| v as f32).collect();
    assert!((pearson(&a32, &p32).unwrap() as f64 - pearson(&a, &p).unwrap()).abs() < 1e-5);
    assert!((rmse(&a32, &p32).unwrap() as f64 - rmse(&a, &p).unwrap()).abs() < 1e-5);
}

fn series() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..60).prop_flat_map(|n| {
        (
            prop::collection::vec(-100.0f64..100.0, n),
            prop::collection::vec(-100.0f64..100.0, n),
        )
    })
}

proptest! {
    #[test]
    fn pearson_bounded_and_symmetric((x, y) in series()) {
        if let Ok(r) = pearson(&x, &y) {
            prop_assert!((-1.0..=1.0).contains(&r));
            prop_assert!((r - pearson(&y, &x).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn pearson_affine_invariant((x, y) in series(), scale in 0.1f64..10.0, shift in -50.0f64..50.0) {
        if let Ok(r) = pearson(&x, &y) {
            let t: Vec<f64> = x.iter().map(|v| v * scale + shift).collect();
            if let Ok(r2) = pearson(&t, &y) {
                prop_assert!((r - r2).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn error_orderings((x, y) in series()) {
        let e = EvalResult::from_slices(&x, &y);
        let (m, s) = (mae(&x, &y).unwrap(), rmse(&x, &y).unwrap());
        prop_assert!(m <= s + 1e-12);
        prop_assert!(s >= 0.0);
        if let Ok(e) = e {
            prop_assert_eq!(e.rmse, s);
        }
    }
}
