mod common;

use nalgebra::DMatrix;

use mmv_core::music::{estimate_rank, music_scores, music_support, DEFAULT_RANK_DELTA};
use mmv_core::synth::{gen_instance, GaussianStream, MatrixKind, ProblemSpec};
use mmv_core::{MeasurementMatrix, MmvProblem, SupportSet};

fn gaussian_spec(n: usize, big_n: usize, l: usize, k: usize, rank: usize, seed: u64) -> ProblemSpec {
    ProblemSpec { n, big_n, l, k, rank, noise_sigma: 0.0, matrix_kind: MatrixKind::Gaussian, seed }
}

fn with(phi: DMatrix<f64>, b: DMatrix<f64>) -> MmvProblem {
    MmvProblem::new(MeasurementMatrix::new(phi).unwrap(), b, 0.0).unwrap()
}

fn left_singular(b: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    let svd = b.clone().svd(true, false);
    let u = svd.u.unwrap();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    DMatrix::from_fn(b.nrows(), r, |i, j| u[(i, order[j])])
}

#[test]
fn full_rank_support_is_exact() {
    let inst = gen_instance(&gaussian_spec(10, 20, 3, 3, 3, 1)).unwrap();
    let result = music_support(&inst.problem, 3, DEFAULT_RANK_DELTA).unwrap();
    assert_eq!(result.rank, 3);
    assert_eq!(result.support, inst.support_true);
    for (j, &s) in result.scores.iter().enumerate() {
        if inst.support_true.contains(j) {
            assert!(s < 1e-10);
        } else {
            assert!(s > 0.1);
        }
    }
}

#[test]
fn scores_match_least_squares_residuals() {
    let mut rng = GaussianStream::new(2);
    let phi = rng.normal_matrix(7, 15);
    let b = rng.normal_matrix(7, 3);
    let p = with(phi.clone(), b.clone());
    let scores = music_scores(&p, 2).unwrap();
    let u = left_singular(&b, 2);
    for j in 0..15 {
        let col = phi.column(j).into_owned();
        let c = u.clone().svd(true, true).solve(&col, 1e-14).unwrap();
        let oracle = (&col - &u * c).norm() / col.norm();
        assert!((scores[j] - oracle).abs() < 1e-10);
    }
}

#[test]
fn scores_complement_signal_energy() {
    let mut rng = GaussianStream::new(3);
    let phi = rng.normal_matrix(6, 12);
    let b = rng.normal_matrix(6, 4);
    let scores = music_scores(&with(phi.clone(), b.clone()), 3).unwrap();
    let u = left_singular(&b, 3);
    for j in 0..12 {
        let col = phi.column(j);
        let inside = (u.transpose() * col).norm_squared() / col.norm_squared();
        assert!((scores[j] * scores[j] + inside - 1.0).abs() < 1e-10);
    }
}

#[test]
fn common_rotation_leaves_scores_unchanged() {
    let mut rng = GaussianStream::new(4);
    let phi = rng.normal_matrix(8, 16);
    let b = rng.normal_matrix(8, 3);
    let q = rng.normal_matrix(8, 8).qr().q();
    let before = music_scores(&with(phi.clone(), b.clone()), 3).unwrap();
    let after = music_scores(&with(&q * phi, &q * b), 3).unwrap();
    for (x, y) in before.iter().zip(&after) {
        assert!((x - y).abs() < 1e-10);
    }
}

#[test]
fn channel_mixing_keeps_rank_and_order() {
    let mut rng = GaussianStream::new(5);
    let inst = gen_instance(&gaussian_spec(12, 24, 4, 4, 4, 55)).unwrap();
    let mix = rng.normal_matrix(4, 4);
    let cond = {
        let s = mix.clone().svd(false, false).singular_values;
        s.max() / s.min()
    };
    assert!(cond < 1e6);
    let base = music_support(&inst.problem, 4, DEFAULT_RANK_DELTA).unwrap();
    let mixed = music_support(&inst.problem.with_data(inst.problem.b() * mix, 0.0).unwrap(), 4, DEFAULT_RANK_DELTA).unwrap();
    assert_eq!(base.rank, mixed.rank);
    let order = |s: &[f64]| {
        let mut idx: Vec<usize> = (0..s.len()).collect();
        idx.sort_by(|&i, &j| s[i].total_cmp(&s[j]));
        idx
    };
    // In-support scores are all ~0; compare the ordering of the rest.
    let tail = |v: Vec<usize>| v[4..].to_vec();
    assert_eq!(tail(order(&base.scores)), tail(order(&mixed.scores)));
    assert_eq!(base.support, mixed.support);
}

#[test]
fn rank_deficient_signal_keeps_strongest_rows() {
    let mut rng = GaussianStream::new(6);
    for _ in 0..20 {
        let phi = rng.normal_matrix(10, 20);
        let support = SupportSet::new(rng.subset(20, 4), 20).unwrap();
        let factors = rng.normal_matrix(4, 2) * rng.normal_matrix(2, 4);
        let mut x = DMatrix::zeros(20, 4);
        for (r, &i) in support.indices().iter().enumerate() {
            x.set_row(i, &factors.row(r));
        }
        let b = &phi * &x;
        let result = music_support(&with(phi, b), 4, DEFAULT_RANK_DELTA).unwrap();
        assert_eq!(result.rank, 2);
        let mut rows: Vec<usize> = support.indices().to_vec();
        rows.sort_by(|&i, &j| x.row(j).norm().total_cmp(&x.row(i).norm()));
        for &i in &rows[..2] {
            assert!(result.support.contains(i), "row {i} of {support} missing from {}", result.support);
        }
    }
}

#[test]
fn rank_survives_small_noise() {
    let mut rng = GaussianStream::new(7);
    let clean = rng.normal_matrix(9, 3) * rng.normal_matrix(3, 6);
    let noise = rng.normal_matrix(9, 6);
    let b = clean + &noise * (1e-8 / noise.norm());
    assert_eq!(estimate_rank(&b, 1e-6), 3);
}
