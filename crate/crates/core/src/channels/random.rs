//! Seeded samplers for unitaries, states, and CPTP channels.

use nalgebra::DMatrix;
use rand::Rng;

use crate::linalg::{cplx, Complex64, ComplexMatrix};

use super::Channel;

fn ginibre(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    use rand_distr::StandardNormal;
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        cplx(re, im)
    })
}

/// Haar-distributed unitary via QR of a Ginibre matrix with the standard
/// phase correction from the R diagonal.
pub fn haar_unitary(dim: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let qr = ginibre(dim, dim, rng).qr();
    let q = qr.q();
    let r = qr.r();
    let mut m = ComplexMatrix::zeros(dim, dim);
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::ONE };
        for i in 0..dim {
            m[(i, j)] = q[(i, j)] * phase;
        }
    }
    m
}

/// Haar-random pure state as a unit column vector.
pub fn random_pure_state(dim: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let g = ginibre(dim, 1, rng);
    let norm = g.norm();
    ComplexMatrix::from_fn(dim, 1, |i, _| g[(i, 0)] / norm)
}

/// Random full-rank density matrix (normalized Wishart).
pub fn random_density(dim: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let g = ginibre(dim, dim, rng);
    let w = &g * g.adjoint();
    let trace: Complex64 = w.trace();
    ComplexMatrix::from_fn(dim, dim, |i, j| w[(i, j)] / trace.re)
}

/// Random CPTP channel of the given Kraus rank, sampled as a Haar-random
/// isometry into `out (x) rank` followed by tracing the rank factor.
pub fn random_cptp(in_dim: usize, out_dim: usize, kraus_rank: usize, rng: &mut impl Rng) -> Channel {
    assert!(kraus_rank >= 1 && out_dim * kraus_rank >= in_dim, "isometry needs room");
    let g = ginibre(out_dim * kraus_rank, in_dim, rng);
    let q = g.qr().q();
    let kraus: Vec<ComplexMatrix> = (0..kraus_rank)
        .map(|e| {
            ComplexMatrix::from_fn(out_dim, in_dim, |o, i| q[(o * kraus_rank + e, i)])
        })
        .collect();
    Channel::from_kraus_quantum(kraus).expect("random kraus")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = substream(100, 0);
        let u = haar_unitary(4, &mut rng);
        let gram = u.dagger().compose(&u).unwrap();
        assert!(gram.max_abs_diff(&ComplexMatrix::identity(4)).unwrap() < 1e-12);
    }

    #[test]
    fn random_density_is_state() {
        let mut rng = substream(101, 0);
        let rho = random_density(3, &mut rng);
        assert!((rho.trace().unwrap().re - 1.0).abs() < 1e-12);
        let eig = rho.hermitian_eig().unwrap();
        assert!(eig.eigenvalues.iter().all(|&l| l > -1e-12));
    }

    #[test]
    fn random_cptp_is_trace_preserving() {
        let mut rng = substream(102, 0);
        for _ in 0..5 {
            let c = random_cptp(2, 3, 2, &mut rng);
            assert!(c.tp_residual() < 1e-12);
            assert!(c.cp_residual() < 1e-12);
        }
    }

    #[test]
    fn random_pure_state_is_normalized() {
        let mut rng = substream(103, 0);
        let psi = random_pure_state(5, &mut rng);
        assert!((psi.frobenius_norm() - 1.0).abs() < 1e-12);
    }
}
