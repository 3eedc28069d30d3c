mod common;

use common::normal_matrix;
use ctxtag::charlm::{train_lm, Direction, LmTrainConfig};
use ctxtag::corpus::CharStream;
use ctxtag::numerics::rng::seeded;
use ctxtag::numerics::{activate, matmul, sgd_step, Activation, LstmCellParams, Matrix, ParamSet};
use proptest::prelude::*;

fn finite_matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix<f64>> {
    prop::collection::vec(-3.0f64..3.0, rows * cols).prop_map(move |v| Matrix::from_vec(rows, cols, v).unwrap())
}

fn max_abs_diff(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn matmul_is_associative_on_small_chains() {
    for seed in 0..200 {
        let mut rng = seeded(seed);
        let (a, b, c) = (normal_matrix(&mut rng, 2, 2), normal_matrix(&mut rng, 2, 2), normal_matrix(&mut rng, 2, 2));
        let left = matmul(&matmul(&a, &b).unwrap(), &c).unwrap();
        let right = matmul(&a, &matmul(&b, &c).unwrap()).unwrap();
        assert!(max_abs_diff(&left, &right) <= 1e-10, "seed {seed}");
    }
}

#[test]
fn matmul_matches_hand_product() {
    let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
    let b = Matrix::from_rows(&[[5.0, 6.0], [7.0, 8.0]]).unwrap();
    assert_eq!(matmul(&a, &b).unwrap().as_slice(), &[19.0, 22.0, 43.0, 50.0]);
    assert!(matmul(&a, &Matrix::<f64>::zeros(3, 1)).is_err());
}

proptest! {
    #[test]
    fn softmax_rows_sum_to_one(x in (1usize..5, 1usize..7).prop_flat_map(|(r, c)| finite_matrix(r, c))) {
        let p = activate(&x, Activation::SoftmaxRows).unwrap();
        for r in 0..p.rows() {
            let s: f64 = p.row(r).iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-9);
            prop_assert!(p.row(r).iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn log_softmax_rows_logsumexp_to_zero(x in (1usize..5, 1usize..7).prop_flat_map(|(r, c)| finite_matrix(r, c))) {
        let lp = activate(&x, Activation::LogSoftmaxRows).unwrap();
        for r in 0..lp.rows() {
            let lse = lp.row(r).iter().map(|v| v.exp()).sum::<f64>().ln();
            prop_assert!(lse.abs() <= 1e-9);
        }
    }

    #[test]
    fn clipped_step_applies_bounded_gradient(
        grads in prop::collection::vec(-100.0f64..100.0, 1..12),
        clip in 0.1f64..10.0,
        lr in 0.01f64..2.0,
    ) {
        let mut ps = ParamSet::new();
        let id = ps.add("p", Matrix::column(&vec![0.5; grads.len()]));
        ps.get_mut(id).grad = Matrix::column(&grads);
        let before = ps.value(id).clone();
        sgd_step(&mut ps, lr, clip).unwrap();
        let applied_sq: f64 = before
            .as_slice()
            .iter()
            .zip(ps.value(id).as_slice())
            .map(|(b, a)| ((b - a) / lr).powi(2))
            .sum();
        prop_assert!(applied_sq.sqrt() <= clip + 1e-9);
        prop_assert!(ps.get(id).grad.as_slice().iter().all(|&g| g == 0.0));
    }
}

#[test]
fn clipping_halves_norm_ten_gradient() {
    let mut ps = ParamSet::new();
    let id = ps.add("p", Matrix::column(&[0.0, 0.0]));
    ps.get_mut(id).grad = Matrix::column(&[6.0, 8.0]);
    let norm = sgd_step(&mut ps, 1.0, 5.0).unwrap();
    assert_eq!(norm, 10.0);
    assert_eq!(ps.value(id).as_slice(), &[-3.0, -4.0]);
}

#[test]
fn non_positive_learning_rate_is_rejected() {
    let mut ps = ParamSet::new();
    ps.add("p", Matrix::scalar(1.0f64));
    assert!(sgd_step(&mut ps, 0.0, 5.0).is_err());
    assert!(sgd_step(&mut ps, -0.1, 5.0).is_err());
}

#[test]
fn non_finite_activation_input_is_rejected() {
    let x = Matrix::column(&[1.0, f64::NAN]);
    assert!(activate(&x, Activation::Tanh).is_err());
}

#[test]
fn initialisation_is_bounded_and_reproducible() {
    let a = LstmCellParams::<f64>::init(6, 4, &mut seeded(11));
    let b = LstmCellParams::<f64>::init(6, 4, &mut seeded(11));
    assert_eq!(a, b);
    assert_ne!(a, LstmCellParams::<f64>::init(6, 4, &mut seeded(12)));
    let bound_w = (1.0f64 / 6.0).sqrt();
    assert!(a.w.as_slice().iter().all(|v| v.abs() <= bound_w));
    // Forget-gate bias slice is one, the rest zero.
    for (r, &v) in a.b.as_slice().iter().enumerate() {
        assert_eq!(v, if (4..8).contains(&r) { 1.0 } else { 0.0 });
    }
}

#[test]
fn training_trajectory_is_bit_identical_for_a_seed() {
    let stream = CharStream::from_documents("d", &["the quick brown fox", "jumps over the lazy dog"]).unwrap();
    let cfg = LmTrainConfig { steps: 30, seq_len: 6, batch_size: 3, hidden_dim: 5, embed_dim: 3, seed: 9, ..Default::default() };
    let a = train_lm::<f64>(&stream, Direction::Forward, &cfg).unwrap();
    let b = train_lm::<f64>(&stream, Direction::Forward, &cfg).unwrap();
    assert_eq!(a, b);
    let other = train_lm::<f64>(&stream, Direction::Forward, &LmTrainConfig { seed: 10, ..cfg }).unwrap();
    assert_ne!(a, other);
}
