use mmv_core::linalg::numerical_rank;
use mmv_core::problem::row_orthonormalize;
use mmv_core::spark::{spark, DEFAULT_RANK_TOL};
use mmv_core::synth::{gen_instance, GaussianStream, MatrixKind, ProblemSpec};
use mmv_core::MeasurementMatrix;

#[test]
fn rank_is_controlled_for_random_specs() {
    let mut rng = GaussianStream::new(12);
    for seed in 0..100 {
        let n = 4 + (rng.next_u64() % 20) as usize;
        let big_n = n + 1 + (rng.next_u64() % 30) as usize;
        let l = 1 + (rng.next_u64() % 6) as usize;
        let k = 1 + (rng.next_u64() % (big_n as u64 - 1)) as usize;
        let rank = 1 + (rng.next_u64() % k.min(l) as u64) as usize;
        let matrix_kind = if seed % 2 == 0 { MatrixKind::Gaussian } else { MatrixKind::RowOrthonormalGaussian };
        let spec = ProblemSpec { n, big_n, l, k, rank, noise_sigma: 0.0, matrix_kind, seed };
        let inst = gen_instance(&spec).unwrap();
        assert_eq!(numerical_rank(&inst.x_true, 1e-10), rank, "{spec:?}");
        let nonzero = (0..big_n).filter(|&i| inst.x_true.row(i).norm() > 0.0).count();
        assert_eq!(nonzero, k);
    }
}

#[test]
fn fifth_singular_value_vanishes() {
    let spec = ProblemSpec {
        n: 20,
        big_n: 40,
        l: 4,
        k: 5,
        rank: 4,
        noise_sigma: 0.0,
        matrix_kind: MatrixKind::RowOrthonormalGaussian,
        seed: 3,
    };
    let inst = gen_instance(&spec).unwrap();
    let support: Vec<usize> = inst.support_true.indices().to_vec();
    let rows = nalgebra::DMatrix::from_fn(5, 4, |i, j| inst.x_true[(support[i], j)]);
    // 5 x 4 block: rank 4 means a full set of nonzero singular values,
    // so check the transpose padded to 5 columns instead.
    let padded = rows.clone().insert_column(4, 0.0);
    let s = padded.svd(false, false).singular_values;
    let mut sorted: Vec<f64> = s.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    assert!(sorted[4] < 1e-10 * sorted[0]);
    assert!(sorted[3] > 1e-10 * sorted[0]);
}

#[test]
fn row_orthonormal_kind_is_certified() {
    for seed in 0..20 {
        let spec = ProblemSpec {
            n: 10 + seed as usize,
            big_n: 50,
            l: 2,
            k: 3,
            rank: 2,
            noise_sigma: 0.0,
            matrix_kind: MatrixKind::RowOrthonormalGaussian,
            seed,
        };
        assert!(gen_instance(&spec).unwrap().problem.a().is_row_orthonormal());
    }
}

#[test]
fn random_rectangle_orthonormalizes() {
    let a = GaussianStream::new(13).normal_matrix(4, 8);
    let out = row_orthonormalize(&MeasurementMatrix::new(a).unwrap()).unwrap();
    let gram = out.entries() * out.entries().transpose();
    assert!((gram - nalgebra::DMatrix::<f64>::identity(4, 4)).amax() <= 1e-10);
    assert!(out.is_row_orthonormal());
}

#[test]
fn spark_agrees_with_column_rank() {
    let mut rng = GaussianStream::new(14);
    for trial in 0..30 {
        let n = 2 + trial % 5;
        let big_n = 2 + (rng.next_u64() % 8) as usize;
        let mut a = rng.normal_matrix(n, big_n);
        if trial % 3 == 0 && big_n > 2 {
            let combo = a.column(0) + a.column(1) * 0.5;
            a.set_column(big_n - 1, &combo);
        }
        let s = spark(&MeasurementMatrix::new(a.clone()).unwrap(), DEFAULT_RANK_TOL).unwrap();
        assert!(s >= 2 && s <= big_n + 1);
        assert_eq!(s == big_n + 1, numerical_rank(&a, DEFAULT_RANK_TOL) == big_n);
    }
}
