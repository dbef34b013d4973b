//! Property-based tests for the linear-algebra core and the spider family,
//! over randomly generated shapes and entries.

use proptest::prelude::*;

use qkdlab::linalg::{cplx, ComplexMatrix};
use qkdlab::spiders::{identities, Basis};
use qkdlab::{Complex64, FactorShape};

fn complex_entry() -> impl Strategy<Value = Complex64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| cplx(re, im))
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec(complex_entry(), rows * cols)
        .prop_map(move |data| ComplexMatrix::new(rows, cols, data).unwrap())
}

fn dims() -> impl Strategy<Value = usize> {
    2usize..5
}

type Quad = (ComplexMatrix, ComplexMatrix, ComplexMatrix, ComplexMatrix);

/// Shapes compatible with compose(tensor(a, b), tensor(c, d)).
fn interchange_inputs() -> impl Strategy<Value = Quad> {
    (dims(), dims(), dims(), dims(), dims(), dims()).prop_flat_map(|(ar, ac, br, bc, cc, dc)| {
        (matrix(ar, ac), matrix(br, bc), matrix(ac, cc), matrix(bc, dc))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn interchange_law((a, b, c, d) in interchange_inputs()) {
        let lhs = a.tensor(&b).compose(&c.tensor(&d)).unwrap();
        let rhs = a.compose(&c).unwrap().tensor(&b.compose(&d).unwrap());
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dagger_is_an_involution(m in (dims(), dims()).prop_flat_map(|(r, c)| matrix(r, c))) {
        prop_assert_eq!(m.dagger().dagger(), m);
    }

    #[test]
    fn partial_trace_over_all_factors_is_the_trace(
        factors in prop::collection::vec(2usize..4, 1..3),
        seed in any::<u64>()
    ) {
        let shape = FactorShape::new(factors).unwrap();
        let dim = shape.total_dim();
        let mut rng = qkdlab::rng::substream(seed, 0);
        let rho = qkdlab::channels::random_density(dim, &mut rng);
        let all: Vec<usize> = (0..shape.num_factors()).collect();
        let traced = rho.partial_trace(&shape, &all).unwrap();
        prop_assert_eq!(traced.rows(), 1);
        let diff = (traced[(0, 0)] - rho.trace().unwrap()).norm();
        prop_assert!(diff < 1e-12, "difference {}", diff);
    }

    #[test]
    fn factor_shape_digit_round_trip(
        factors in prop::collection::vec(2usize..5, 1..4),
        raw in any::<usize>()
    ) {
        let shape = FactorShape::new(factors).unwrap();
        let index = raw % shape.total_dim();
        prop_assert_eq!(shape.index(&shape.digits(index)), index);
    }

    #[test]
    fn operator_norm_is_submultiplicative_and_tensor_multiplicative(
        f in matrix(3, 3), g in matrix(3, 3)
    ) {
        let prod = f.compose(&g).unwrap();
        prop_assert!(prod.operator_norm() <= f.operator_norm() * g.operator_norm() + 1e-9);
        let tens = f.tensor(&g);
        let expected = f.operator_norm() * g.operator_norm();
        prop_assert!((tens.operator_norm() - expected).abs() < 1e-9);
    }

    #[test]
    fn trace_norm_dominates_operator_norm(m in matrix(4, 4)) {
        prop_assert!(m.trace_norm().unwrap() >= m.operator_norm() - 1e-10);
    }

    #[test]
    fn matrix_serde_round_trip(m in (dims(), dims()).prop_flat_map(|(r, c)| matrix(r, c))) {
        let json = serde_json::to_string(&m).unwrap();
        let back: ComplexMatrix = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(m, back);
    }

    #[test]
    fn spider_fusion_on_random_legs(
        d in 2usize..4,
        m in 0usize..3,
        n in 1usize..3,
        m2 in 1usize..3,
        n2 in 0usize..3,
        pick in any::<u8>()
    ) {
        let k = 1 + (pick as usize) % n.min(m2);
        let b = Basis::fourier(d);
        let r = identities::fusion_residual(&b, m, n, m2, n2, k);
        prop_assert!(r < 1e-10, "fusion residual {}", r);
    }
}
