use lipsync_core::training::{
    combined_generator_loss, evaluate, gan_losses, interframe_loss, l2_loss, LossWeights,
};
use ndarray::Array2;
use proptest::prelude::*;

fn pair() -> impl Strategy<Value = (Array2<f64>, Array2<f64>)> {
    (2usize..40, 1usize..12).prop_flat_map(|(t, d)| {
        let cells = prop::collection::vec(-3.0f64..3.0, t * d);
        (cells.clone(), cells).prop_map(move |(a, b)| {
            (
                Array2::from_shape_vec((t, d), a).unwrap(),
                Array2::from_shape_vec((t, d), b).unwrap(),
            )
        })
    })
}

fn loop_l2(y: &Array2<f64>, p: &Array2<f64>) -> f64 {
    let mut s = 0.0;
    for t in 0..y.nrows() {
        for d in 0..y.ncols() {
            s += (y[[t, d]] - p[[t, d]]).powi(2);
        }
    }
    s
}

fn loop_interframe(y: &Array2<f64>, p: &Array2<f64>) -> f64 {
    let mut s = 0.0;
    for t in 1..y.nrows() {
        for d in 0..y.ncols() {
            let e = (y[[t, d]] - y[[t - 1, d]]) - (p[[t, d]] - p[[t - 1, d]]);
            s += e * e;
        }
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn l2_matches_loop((y, p) in pair()) {
        prop_assert!((l2_loss(&y, &p).unwrap() - loop_l2(&y, &p)).abs() <= 1e-12);
    }

    #[test]
    fn interframe_matches_loop((y, p) in pair()) {
        prop_assert!((interframe_loss(&y, &p).unwrap() - loop_interframe(&y, &p)).abs() <= 1e-12);
    }

    #[test]
    fn evaluate_matches_loops((y, p) in pair()) {
        let m = evaluate(&y, &p).unwrap();
        let n = y.len() as f64;
        let mae: f64 = y.iter().zip(p.iter()).map(|(a, b)| (a - b).abs()).sum::<f64>() / n;
        prop_assert!((m.mse - loop_l2(&y, &p) / n).abs() <= 1e-12);
        prop_assert!((m.mae - mae).abs() <= 1e-12);
        prop_assert!((m.int_mse - loop_interframe(&y, &p) / (y.nrows() - 1) as f64).abs() <= 1e-12);
    }

    #[test]
    fn losses_are_non_negative_and_zero_on_identity((y, p) in pair()) {
        prop_assert!(l2_loss(&y, &p).unwrap() >= 0.0);
        prop_assert!(interframe_loss(&y, &p).unwrap() >= 0.0);
        prop_assert_eq!(l2_loss(&y, &y).unwrap(), 0.0);
        prop_assert_eq!(interframe_loss(&y, &y).unwrap(), 0.0);
    }

    #[test]
    fn constant_offset_costs_nothing_between_frames((y, _p) in pair(), c in -5.0f64..5.0) {
        let shifted = &y + c;
        prop_assert!(interframe_loss(&y, &shifted).unwrap() < 1e-20);
    }

    #[test]
    fn combined_is_weighted_sum((y, p) in pair(), l1 in 0.0f64..200.0, l2 in 0.0f64..5.0, d in 0.001f64..0.999) {
        let w = LossWeights::new(l1, l2).unwrap();
        let direct = gan_losses(0.5, d).1 + l1 * l2_loss(&y, &p).unwrap() + l2 * interframe_loss(&y, &p).unwrap();
        prop_assert!((combined_generator_loss(w, &y, &p, d).unwrap() - direct).abs() <= 1e-12);
    }
}

#[test]
fn hand_values() {
    let y = Array2::zeros((3, 2));
    let mut p = Array2::zeros((3, 2));
    p[[1, 0]] = 2.0;
    assert_eq!(l2_loss(&y, &p).unwrap(), 4.0);

    let y = Array2::from_shape_vec((3, 1), vec![0.0, 1.0, 3.0]).unwrap();
    let p = Array2::from_shape_vec((3, 1), vec![0.0, 2.0, 2.0]).unwrap();
    assert_eq!(interframe_loss(&y, &p).unwrap(), 5.0);
    assert_eq!(evaluate(&y, &p).unwrap().int_mse, 2.5);
}
