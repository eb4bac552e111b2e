use dlfm::linalg::{pinv, project_nonneg, svd, DenseMatrix};
use proptest::prelude::*;

fn matrix(max: usize) -> impl Strategy<Value = DenseMatrix> {
    (1..=max, 1..=max).prop_flat_map(|(r, c)| {
        prop::collection::vec(-10.0f64..10.0, r * c)
            .prop_map(move |v| DenseMatrix::new(r, c, v).unwrap())
    })
}

/// Products of thin factors, so rank is usually below min(rows, cols).
fn rank_deficient(max: usize) -> impl Strategy<Value = DenseMatrix> {
    (1..=max, 1..=max, 1..=3usize).prop_flat_map(|(r, c, k)| {
        (
            prop::collection::vec(-3.0f64..3.0, r * k),
            prop::collection::vec(-3.0f64..3.0, k * c),
        )
            .prop_map(move |(a, b)| {
                let a = DenseMatrix::new(r, k, a).unwrap();
                let b = DenseMatrix::new(k, c, b).unwrap();
                a.matmul(&b).unwrap()
            })
    })
}

fn rel(diff: &DenseMatrix, scale: f64) -> f64 {
    diff.frobenius_norm() / scale.max(1.0)
}

fn penrose_residuals(a: &DenseMatrix) -> [f64; 4] {
    let p = pinv(a, None).unwrap();
    let ap = a.matmul(&p).unwrap();
    let pa = p.matmul(a).unwrap();
    [
        rel(&ap.matmul(a).unwrap().sub(a).unwrap(), a.frobenius_norm()),
        rel(&pa.matmul(&p).unwrap().sub(&p).unwrap(), p.frobenius_norm()),
        ap.sub(&ap.transpose()).unwrap().frobenius_norm(),
        pa.sub(&pa.transpose()).unwrap().frobenius_norm(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn penrose_conditions_hold(a in matrix(8)) {
        for (i, r) in penrose_residuals(&a).iter().enumerate() {
            prop_assert!(*r <= 1e-8, "condition {} residual {}", i + 1, r);
        }
    }

    #[test]
    fn penrose_conditions_hold_when_rank_deficient(a in rank_deficient(8)) {
        for (i, r) in penrose_residuals(&a).iter().enumerate() {
            prop_assert!(*r <= 1e-8, "condition {} residual {}", i + 1, r);
        }
    }

    #[test]
    fn svd_reconstructs_and_is_sorted(a in matrix(10)) {
        let d = svd(&a).unwrap();
        prop_assert!(rel(&d.reconstruct(None).sub(&a).unwrap(), a.frobenius_norm()) <= 1e-8);
        prop_assert!(d.singular_values.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(d.singular_values.iter().all(|&s| s >= 0.0));
        // orthonormal left vectors
        let gram = d.left.transpose().matmul(&d.left).unwrap();
        prop_assert!(gram.sub(&DenseMatrix::identity(d.rank())).unwrap().max_abs() <= 1e-8);
    }

    #[test]
    fn nonneg_projection_idempotent(a in matrix(8)) {
        let once = project_nonneg(&a);
        prop_assert_eq!(&project_nonneg(&once), &once);
        prop_assert!(once.min_value() >= 0.0);
        for (x, y) in a.as_slice().iter().zip(once.as_slice()) {
            let expected = if *x > 0.0 { *x } else { 0.0 };
            prop_assert_eq!(*y, expected);
        }
    }

    #[test]
    fn pinv_of_pinv_is_original(a in matrix(6)) {
        let back = pinv(&pinv(&a, None).unwrap(), None).unwrap();
        // only guaranteed when rank is not truncated; random dense matrices are full rank
        let d = svd(&a).unwrap();
        let cond = d.singular_values[0] / d.singular_values[d.rank() - 1].max(f64::MIN_POSITIVE);
        prop_assume!(cond < 1e6);
        prop_assert!(rel(&back.sub(&a).unwrap(), a.frobenius_norm()) <= 1e-8);
    }
}
