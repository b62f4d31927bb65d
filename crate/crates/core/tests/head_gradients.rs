mod support;

use asag_core::model::{huber_loss, Gradients, HeadConfig, HeadModel, Mode};
use support::oracles::gradient_check;

#[test]
fn fifty_random_networks_match_central_differences() {
    for seed in 0..50 {
        let check = gradient_check(1000 + seed, 1e-6);
        assert!(check.params > 0);
        assert!(
            check.max_rel_error < 1e-4,
            "seed {seed}: {}",
            check.max_rel_error
        );
    }
}

/// Left and right limits at |r| = δ, each extrapolated from a point 1e-9
/// away using the derivative on that side, must agree.
#[test]
fn huber_is_continuously_differentiable_at_delta() {
    let eps = 1e-9;
    for delta in [0.25, 1.0, 4.0] {
        for sign in [1.0f64, -1.0] {
            let at = |r: f64| huber_loss(r, 0.0, delta);
            let (l_in, d_in) = at(sign * (delta - eps));
            let (l_out, d_out) = at(sign * (delta + eps));
            // d(loss)/dr = -d(loss)/dyhat
            let left = l_in + (-d_in) * sign * eps;
            let right = l_out - (-d_out) * sign * eps;
            assert!(
                (left - right).abs() < 1e-12,
                "loss jump {}",
                (left - right).abs()
            );
            // second derivative is 1 inside and 0 outside
            let d_left = d_in - sign * eps;
            assert!(
                (d_left - d_out).abs() < 1e-12,
                "slope jump {}",
                (d_left - d_out).abs()
            );
            assert!((l_in - l_out).abs() < 3.0 * delta * eps);
        }
    }
}

#[test]
fn dropout_masks_replay_in_backward() {
    let config = HeadConfig::new(5)
        .with_hidden(vec![16])
        .with_dropout(0.5)
        .with_seed(3);
    let mut m = HeadModel::<f64>::init(config).unwrap();
    let x = [0.3, -0.2, 0.8, 0.1, -0.5];
    let cache = m.forward(&x, Mode::Train).unwrap();
    let g = m.backward(&cache, 1.0).unwrap();
    // a dropped hidden unit gets no gradient on its incoming weights
    let dropped: Vec<usize> = (0..16).filter(|&h| g.layers[1].weights[h] == 0.0).collect();
    assert!(!dropped.is_empty());
    for h in dropped {
        assert!(g.layers[0].weights[h * 5..(h + 1) * 5]
            .iter()
            .all(|v| *v == 0.0));
    }
}

#[test]
fn batch_gradient_is_sum_of_samples() {
    let config = HeadConfig::new(3).with_hidden(vec![4]).with_dropout(0.0);
    let mut m = HeadModel::<f64>::init(config).unwrap();
    let x = [0.2, 0.4, -0.6];
    let c = m.forward(&x, Mode::Eval).unwrap();
    let g1 = m.backward(&c, 0.3).unwrap();
    let c2 = m.forward(&x, Mode::Eval).unwrap();
    let g2 = m.backward(&c2, 0.3).unwrap();
    let mut sum = Gradients::zeros_like(&m);
    sum.add_assign(&g1);
    sum.add_assign(&g2);
    let mut doubled = g1.clone();
    doubled.scale(2.0);
    assert_eq!(sum, doubled);
}

#[test]
fn f32_head_trains_the_same_shape() {
    let m32 = HeadModel::<f32>::init(HeadConfig::new(4)).unwrap();
    let m64 = HeadModel::<f64>::init(HeadConfig::new(4)).unwrap();
    for (a, b) in m32.layers().iter().zip(m64.layers()) {
        for (x, y) in a.weights.iter().zip(&b.weights) {
            assert_eq!(*x, *y as f32);
        }
    }
}
