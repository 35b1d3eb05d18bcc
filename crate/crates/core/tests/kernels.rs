use isgp::kernels::{eval_kernel, gram_vector};
use isgp::KernelSpec;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

#[test]
fn se_hand_value() {
    // exp(-‖x − x′‖² / (2ℓ²)) with ‖x − x′‖² = 4, ℓ = 2
    let expected = (-4.0f64 / (2.0 * 4.0)).exp();
    let got = KernelSpec::squared_exponential(2.0)
        .eval(&[0.0, 0.0], &[2.0, 0.0])
        .unwrap();
    assert!((got - expected).abs() < 1e-15);
    assert!((got - 0.60653).abs() < 1e-5);
}

fn kernel() -> impl Strategy<Value = KernelSpec> {
    let leaf = prop_oneof![
        (0.1f64..5.0).prop_map(KernelSpec::squared_exponential),
        (0.1f64..5.0, 0.1f64..5.0).prop_map(|(l, a)| KernelSpec::rational_quadratic(l, a)),
        (0.0f64..3.0).prop_map(KernelSpec::constant),
        (0.0f64..1.0).prop_map(KernelSpec::white_noise),
    ];
    leaf.prop_recursive(2, 6, 3, |inner| {
        prop::collection::vec(inner, 1..4).prop_map(KernelSpec::sum)
    })
}

fn points(dim: usize, n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-5.0f64..5.0, dim), n)
}

proptest! {
    #[test]
    fn symmetric(k in kernel(), pts in points(3, 2..3)) {
        prop_assert_eq!(k.eval(&pts[0], &pts[1]).unwrap(), k.eval(&pts[1], &pts[0]).unwrap());
    }

    #[test]
    fn gram_is_positive_semidefinite(k in kernel(), pts in points(2, 2..25)) {
        let n = pts.len();
        let gram = DMatrix::from_fn(n, n, |i, j| k.eval(&pts[i], &pts[j]).unwrap());
        let scale = gram.diagonal().max().max(1.0);
        let min = SymmetricEigen::new(gram).eigenvalues.min();
        prop_assert!(min >= -1e-10 * scale * n as f64, "min eigenvalue {}", min);
    }

    #[test]
    fn gram_vector_is_elementwise(k in kernel(), xs in points(2, 3..4), x in prop::collection::vec(-5.0f64..5.0, 2)) {
        let v = gram_vector(&k, &xs, &x).unwrap();
        for (xi, vi) in xs.iter().zip(&v) {
            prop_assert_eq!(*vi, eval_kernel(&k, xi, &x).unwrap());
        }
    }
}
