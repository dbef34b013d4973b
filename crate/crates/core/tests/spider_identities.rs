//! Exhaustive numerical verification of the spider laws over small
//! dimensions: fusion on all leg counts up to 3, trace preservation,
//! the decoherence split, the classical structure maps, and the agreement
//! of the two complementarity characterizations on random basis pairs.

use rayon::prelude::*;

use qkdlab::channels::haar_unitary;
use qkdlab::rng::substream;
use qkdlab::spiders::{
    check_complementarity_thm1, check_complementarity_thm2, identities, Basis, SpiderPair,
};

#[test]
fn fusion_all_leg_counts_up_to_three() {
    // All 0 <= m, n, m', n' <= 3 with k in {1, 2}, k <= min(n, m').
    let mut cases = Vec::new();
    for d in [2usize, 3, 4] {
        for m in 0..=3usize {
            for n in 0..=3usize {
                for m2 in 0..=3usize {
                    for n2 in 0..=3usize {
                        for k in 1..=2usize {
                            if k <= n.min(m2) {
                                cases.push((d, m, n, m2, n2, k));
                            }
                        }
                    }
                }
            }
        }
    }
    let worst = cases
        .par_iter()
        .map(|&(d, m, n, m2, n2, k)| {
            let b = Basis::fourier(d);
            let r = identities::fusion_residual(&b, m, n, m2, n2, k);
            (r, (d, m, n, m2, n2, k))
        })
        .reduce(|| (0.0, (0, 0, 0, 0, 0, 0)), |a, b| if a.0 >= b.0 { a } else { b });
    assert!(
        worst.0 <= 1e-10,
        "fusion residual {} at (d, m, n, m', n', k) = {:?}",
        worst.0,
        worst.1
    );
}

#[test]
fn trace_preservation_of_one_input_spiders() {
    for d in [2, 3, 4] {
        let b = Basis::fourier(d);
        for n in 1..=3 {
            let r = identities::trace_preservation_residual(&b, n);
            assert!(r <= 1e-10, "d={d} n={n}: residual {r}");
        }
    }
}

#[test]
fn decoherence_split_is_exact() {
    for d in [2, 3, 4, 5] {
        for basis in [Basis::computational(d), Basis::fourier(d)] {
            let (split, cl_id) = identities::decoherence_split_residuals(&basis);
            assert!(split <= 1e-12, "d={d}: encode-measure vs decoherence {split}");
            assert!(cl_id <= 1e-12, "d={d}: measure-encode vs classical id {cl_id}");
        }
    }
}

#[test]
fn classical_maps_satisfy_their_laws() {
    for d in [2, 3, 4, 5] {
        let b = Basis::fourier(d);
        let (copy_law, uniform_law) = identities::copy_delete_uniform_residuals(&b);
        assert!(copy_law <= 1e-12);
        assert!(uniform_law <= 1e-12);
        assert!(identities::measure_encode_adjoint_residual(&b) <= 1e-12);
    }
}

#[test]
fn complementarity_residual_tracks_unbiasedness_on_random_pairs() {
    // thm1 residual <= 1e-10 iff the overlap table is uniform to 1e-9.
    let checks: Vec<(f64, f64, f64)> = (0..24u64)
        .into_par_iter()
        .map(|trial| {
            let d = 2 + (trial % 3) as usize;
            let mut rng = substream(2024, trial);
            let gray = if trial % 4 == 0 {
                Basis::fourier(d)
            } else {
                Basis::computational(d).rotated(&haar_unitary(d, &mut rng)).unwrap()
            };
            let pair = SpiderPair::new(Basis::computational(d), gray).unwrap();
            (pair.bias_deviation(), check_complementarity_thm1(&pair), check_complementarity_thm2(&pair))
        })
        .collect();
    for (bias, r1, r2) in checks {
        if bias <= 1e-9 {
            assert!(r1 <= 1e-10, "unbiased pair with thm1 residual {r1}");
            assert!(r2 <= 1e-10, "unbiased pair with thm2 residual {r2}");
        }
        if r1 <= 1e-10 {
            assert!(bias <= 1e-9, "thm1 passed with bias deviation {bias}");
        }
        // The two characterizations agree on both sides.
        assert_eq!(r1 <= 1e-10, r2 <= 1e-10, "thm1/thm2 disagree: {r1} vs {r2}");
    }
}
