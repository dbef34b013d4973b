//! Spider families of orthonormal bases and their derived maps.
//!
//! To each orthonormal basis `{|i>}` of a D-dimensional space belongs the
//! family of spiders `S_m^n = sum_i |i...i><i...i|` (n kets, m bras); the
//! zero-legged spider is the scalar D. Measurement, encoding, decoherence,
//! classical copy/delete/uniform, the non-demolition measurement, and the
//! antipode of a basis pair are all spiders or small compositions of them.
//! The two complementarity checks turn the characterizations of mutually
//! unbiased bases into operator-norm residuals.
//!
//! Classical wires carry basis-indexed probability vectors embedded as
//! diagonal matrices in the standard basis: measurement outcome `i` is the
//! standard basis state `|i><i|` regardless of which basis was measured.

use thiserror::Error;

use crate::channels::{Channel, Leg};
use crate::linalg::{cplx, Complex64, ComplexMatrix, LinalgError};

/// Columns must be orthonormal within this tolerance.
pub const ORTHONORMAL_TOL: f64 = 1e-12;

/// Unbiasedness certification threshold for a spider pair.
pub const MUB_CERT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpiderError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("basis columns are not orthonormal: deviation {deviation:e}")]
    NotOrthonormal { deviation: f64 },
    #[error("bases have different dimensions: {white} vs {gray}")]
    DimensionMismatch { white: usize, gray: usize },
    #[error("pair is not mutually unbiased: deviation {deviation:e} exceeds {tol:e}")]
    NotUnbiased { deviation: f64, tol: f64 },
}

/// An orthonormal basis of a D-dimensional space, stored as the unitary
/// whose columns are the basis vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    vectors: ComplexMatrix,
}

impl Basis {
    pub fn new(vectors: ComplexMatrix) -> Result<Self, SpiderError> {
        if !vectors.is_square() {
            return Err(SpiderError::Linalg(LinalgError::NotSquare {
                rows: vectors.rows(),
                cols: vectors.cols(),
            }));
        }
        let gram = vectors.dagger().compose(&vectors)?;
        let deviation = gram.max_abs_diff(&ComplexMatrix::identity(vectors.rows()))?;
        if deviation > ORTHONORMAL_TOL {
            return Err(SpiderError::NotOrthonormal { deviation });
        }
        Ok(Self { vectors })
    }

    /// The standard (computational) basis.
    pub fn computational(dim: usize) -> Self {
        Self { vectors: ComplexMatrix::identity(dim) }
    }

    /// Fourier basis: column `j` is `(1/sqrt(D)) sum_k w^{jk} |k>` with
    /// `w = exp(2 pi i / D)`; mutually unbiased with the computational basis.
    pub fn fourier(dim: usize) -> Self {
        let scale = 1.0 / (dim as f64).sqrt();
        let vectors = ComplexMatrix::from_fn(dim, dim, |k, j| {
            let angle = 2.0 * std::f64::consts::PI * (j * k % dim) as f64 / dim as f64;
            cplx(0.0, angle).exp() * scale
        });
        Self { vectors }
    }

    /// Rotate every basis vector by a unitary.
    pub fn rotated(&self, u: &ComplexMatrix) -> Result<Self, SpiderError> {
        Self::new(u.compose(&self.vectors)?)
    }

    pub fn dim(&self) -> usize {
        self.vectors.rows()
    }

    pub fn vectors(&self) -> &ComplexMatrix {
        &self.vectors
    }

    /// Basis vector `|i>` as a column.
    pub fn vector(&self, i: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.dim(), 1, |r, _| self.vectors[(r, i)])
    }
}

/// A pair of bases of the same dimension with its unbiasedness certificate.
///
/// The certificate is the deviation `max_ij | |<z_i|x_j>|^2 - 1/D |`,
/// computed at construction; [`SpiderPair::mutually_unbiased`] additionally
/// requires it to be below [`MUB_CERT_TOL`]. Plain [`SpiderPair::new`]
/// admits biased pairs so the complementarity checks can measure them.
#[derive(Debug, Clone)]
pub struct SpiderPair {
    white: Basis,
    gray: Basis,
    bias_deviation: f64,
}

impl SpiderPair {
    pub fn new(white: Basis, gray: Basis) -> Result<Self, SpiderError> {
        if white.dim() != gray.dim() {
            return Err(SpiderError::DimensionMismatch { white: white.dim(), gray: gray.dim() });
        }
        let d = white.dim();
        let overlaps = white.vectors().dagger().compose(gray.vectors())?;
        let target = 1.0 / d as f64;
        let mut deviation = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                deviation = deviation.max((overlaps[(i, j)].norm_sqr() - target).abs());
            }
        }
        Ok(Self { white, gray, bias_deviation: deviation })
    }

    /// Construct and certify unbiasedness.
    pub fn mutually_unbiased(white: Basis, gray: Basis) -> Result<Self, SpiderError> {
        let pair = Self::new(white, gray)?;
        if !pair.is_mutually_unbiased() {
            return Err(SpiderError::NotUnbiased {
                deviation: pair.bias_deviation,
                tol: MUB_CERT_TOL,
            });
        }
        Ok(pair)
    }

    /// The standard computational/Fourier pair in dimension `d`.
    pub fn computational_fourier(d: usize) -> Self {
        Self::mutually_unbiased(Basis::computational(d), Basis::fourier(d))
            .expect("computational/Fourier pair is unbiased")
    }

    pub fn white(&self) -> &Basis {
        &self.white
    }

    pub fn gray(&self) -> &Basis {
        &self.gray
    }

    pub fn dim(&self) -> usize {
        self.white.dim()
    }

    pub fn bias_deviation(&self) -> f64 {
        self.bias_deviation
    }

    pub fn is_mutually_unbiased(&self) -> bool {
        self.bias_deviation <= MUB_CERT_TOL
    }
}

/// The spider `S_m^n = sum_i |i...i>^n <i...i|^m` of a basis, a
/// `D^n x D^m` matrix. With `m = n = 0` this is the 1x1 matrix `[D]`.
pub fn spider(b: &Basis, m: usize, n: usize) -> ComplexMatrix {
    let d = b.dim();
    let mut acc = ComplexMatrix::zeros(d.pow(n as u32), d.pow(m as u32));
    for i in 0..d {
        let v = b.vector(i);
        let ket = tensor_power(&v, n);
        let bra = tensor_power(&v, m).dagger();
        acc = acc.add(&ket.compose(&bra).expect("spider rank-one term")).expect("spider sum");
    }
    acc
}

fn tensor_power(v: &ComplexMatrix, n: usize) -> ComplexMatrix {
    let mut acc = ComplexMatrix::scalar(Complex64::ONE);
    for _ in 0..n {
        acc = acc.tensor(v);
    }
    acc
}

/// Doubling: the pure channel `rho -> v rho v^dagger`.
pub fn double(v: &ComplexMatrix) -> Channel {
    Channel::from_kraus_quantum(vec![v.clone()]).expect("doubled map")
}

/// Measurement in basis `b`: quantum wire in, classical outcome wire out.
/// Outcome `i` means "the i-th vector of `b`" and is written in the standard
/// basis of the classical wire.
pub fn measure_map(b: &Basis) -> Channel {
    let d = b.dim();
    let kraus = (0..d)
        .map(|i| {
            ComplexMatrix::basis_column(d, i)
                .compose(&b.vector(i).dagger())
                .expect("measclosure kraus")
        })
        .collect();
    Channel::from_kraus(kraus, vec![Leg::Quantum(d)], vec![Leg::Classical(d)]).expect("measure map")
}

/// Encoding of a classical value as a basis state of `b`.
pub fn encode_map(b: &Basis) -> Channel {
    let d = b.dim();
    let kraus = (0..d)
        .map(|i| {
            b.vector(i)
                .compose(&ComplexMatrix::basis_column(d, i).dagger())
                .expect("encode kraus")
        })
        .collect();
    Channel::from_kraus(kraus, vec![Leg::Classical(d)], vec![Leg::Quantum(d)]).expect("encode map")
}

/// Decoherence in basis `b`: kills off-diagonal entries,
/// `rho_ij -> delta_ij rho_ii` in that basis. Equals encode after measure.
pub fn decoherence(b: &Basis) -> Channel {
    let d = b.dim();
    let kraus = (0..d)
        .map(|i| {
            let v = b.vector(i);
            v.compose(&v.dagger()).expect("projector")
        })
        .collect();
    Channel::from_kraus_quantum(kraus).expect("decoherence")
}

/// Non-demolition measurement: measure in `b`, keep the quantum system, and
/// copy the outcome to a classical wire. Output legs `[quantum, classical]`.
pub fn nondemolition_measurement(b: &Basis) -> Channel {
    let d = b.dim();
    let kraus = (0..d)
        .map(|i| {
            let v = b.vector(i);
            v.tensor(&ComplexMatrix::basis_column(d, i))
                .compose(&v.dagger())
                .expect("nondemolition kraus")
        })
        .collect();
    Channel::from_kraus(kraus, vec![Leg::Quantum(d)], vec![Leg::Quantum(d), Leg::Classical(d)])
        .expect("nondemolition measurement")
}

/// Classical copy `sum_i |ii><i|` of basis `b` (the 1-in/2-out spider).
pub fn classical_copy(b: &Basis) -> ComplexMatrix {
    spider(b, 1, 2)
}

/// Classical delete (marginalization) `sum_i <i|` of basis `b`.
pub fn classical_delete(b: &Basis) -> ComplexMatrix {
    spider(b, 1, 0)
}

/// The uniform distribution `(1/D) sum_i |i>` of basis `b`.
pub fn classical_uniform(b: &Basis) -> ComplexMatrix {
    let d = b.dim() as f64;
    spider(b, 0, 1).scale(cplx(1.0 / d, 0.0))
}

/// The classical copy as a channel on classical wires (`|ii><i|` Kraus).
pub fn classical_copy_channel(dim: usize) -> Channel {
    let kraus = (0..dim)
        .map(|i| {
            let e = ComplexMatrix::basis_column(dim, i);
            e.tensor(&e).compose(&e.dagger()).expect("copy kraus")
        })
        .collect();
    Channel::from_kraus(kraus, vec![Leg::Classical(dim)], vec![Leg::Classical(dim), Leg::Classical(dim)])
        .expect("classical copy channel")
}

/// Antipode of a pair: `s = sum_ij <z_i|x_j> |x_j><z_i|` (white = z, gray = x).
pub fn antipode(p: &SpiderPair) -> ComplexMatrix {
    let d = p.dim();
    let mut s = ComplexMatrix::zeros(d, d);
    for i in 0..d {
        let z = p.white().vector(i);
        for j in 0..d {
            let x = p.gray().vector(j);
            let overlap = z.dagger().compose(&x).expect("overlap")[(0, 0)];
            s = s
                .add(&x.compose(&z.dagger()).expect("outer").scale(overlap))
                .expect("antipode sum");
        }
    }
    s
}

/// Measurement as a thin linear map `B(H) -> H` in the diagrammatic
/// convention: `|b_i><b_j| -> delta_ij |b_i>`, i.e. the outcome rides on the
/// basis vector itself. Operators enter as row-major vectorizations. Its
/// Hilbert-Schmidt adjoint is [`encode_linear`].
pub fn measure_linear(b: &Basis) -> ComplexMatrix {
    let d = b.dim();
    let mut m = ComplexMatrix::zeros(d, d * d);
    for i in 0..d {
        let v = b.vector(i);
        for s in 0..d {
            for r in 0..d {
                for c in 0..d {
                    m[(s, r * d + c)] += v[(s, 0)] * v[(r, 0)].conj() * v[(c, 0)];
                }
            }
        }
    }
    m
}

/// Encoding as a thin linear map `H -> B(H)`: `|b_i> -> |b_i><b_i|`
/// (row-major vectorized).
pub fn encode_linear(b: &Basis) -> ComplexMatrix {
    measure_linear(b).dagger()
}

/// Residual of the measurement/encoding characterization of unbiasedness:
/// `m_gray after e_white = uniform_gray after delete_white` as thin maps.
/// Zero (within 1e-10) exactly when the pair is mutually unbiased.
pub fn check_complementarity_thm1(p: &SpiderPair) -> f64 {
    let lhs = measure_linear(p.gray())
        .compose(&encode_linear(p.white()))
        .expect("thm1 composite");
    let rhs = classical_uniform(p.gray())
        .compose(&classical_delete(p.white()))
        .expect("thm1 rhs");
    lhs.sub(&rhs).expect("thm1 residual").operator_norm()
}

/// Residual of the antipode law: gray multiplication after `1 (x) s` after
/// white copy equals gray uniform after white delete.
pub fn check_complementarity_thm2(p: &SpiderPair) -> f64 {
    let d = p.dim();
    let mult_gray = spider(p.gray(), 2, 1);
    let copy_white = spider(p.white(), 1, 2);
    let s = antipode(p);
    let lhs = mult_gray
        .compose(&ComplexMatrix::identity(d).tensor(&s))
        .and_then(|m| m.compose(&copy_white))
        .expect("thm2 composite");
    let rhs = classical_uniform(p.gray())
        .compose(&classical_delete(p.white()))
        .expect("thm2 rhs");
    lhs.sub(&rhs).expect("thm2 residual").operator_norm()
}

/// Read a probability distribution off a classical-wire state (a diagonal
/// density matrix in the standard basis).
pub fn classical_distribution(state: &ComplexMatrix) -> Vec<f64> {
    (0..state.rows()).map(|i| state[(i, i)].re).collect()
}

/// Numerical checks of the spider identities, shared by the test suites and
/// the verification command.
pub mod identities {
    use super::*;

    /// Residual of spider fusion: composing `S_m^n` (bottom) with `S_{m'}^{n'}`
    /// (top) along `k >= 1` legs equals `S_{m + m' - k}^{n + n' - k}`.
    /// Requires `k <= min(n, m')`.
    pub fn fusion_residual(b: &Basis, m: usize, n: usize, m2: usize, n2: usize, k: usize) -> f64 {
        assert!(k >= 1 && k <= n.min(m2), "fusion needs 1 <= k <= min(n, m')");
        let d = b.dim();
        let bottom = spider(b, m, n).tensor(&ComplexMatrix::identity(d.pow((m2 - k) as u32)));
        let top = ComplexMatrix::identity(d.pow((n - k) as u32)).tensor(&spider(b, m2, n2));
        let composite = top.compose(&bottom).expect("fusion composite");
        let fused = spider(b, m + m2 - k, n + n2 - k);
        composite.sub(&fused).expect("fusion diff").max_abs()
    }

    /// Residual of trace preservation for the doubled one-input spider
    /// (`n >= 1` outputs): `sum_k K^dagger K = 1`.
    pub fn trace_preservation_residual(b: &Basis, n: usize) -> f64 {
        assert!(n >= 1, "the delete spider is not trace-preserving");
        double(&spider(b, 1, n)).tp_residual()
    }

    /// Residuals of the decoherence split: encode-after-measure equals
    /// decoherence, and measure-after-encode is the classical identity.
    pub fn decoherence_split_residuals(b: &Basis) -> (f64, f64) {
        let m = measure_map(b);
        let e = encode_map(b);
        let em = e.compose(&m).expect("e after m");
        let dec = decoherence(b);
        let split = em.choi().sub(dec.choi()).expect("choi diff").operator_norm();
        let me = m.compose(&e).expect("m after e");
        let cl_id = Channel::classical_identity(b.dim());
        let idres = me.choi().sub(cl_id.choi()).expect("choi diff").operator_norm();
        (split, idres)
    }

    /// Residual of `m = e^dagger` under the Hilbert-Schmidt inner product,
    /// as a direct matrix identity between the thin maps.
    pub fn measure_encode_adjoint_residual(b: &Basis) -> f64 {
        measure_linear(b)
            .sub(&encode_linear(b).dagger())
            .expect("adjoint residual")
            .max_abs()
    }

    /// Residuals of the classical structure: delete-after-copy is the
    /// identity, and delete applied to uniform is 1.
    pub fn copy_delete_uniform_residuals(b: &Basis) -> (f64, f64) {
        let d = b.dim();
        let copy = classical_copy(b);
        let delete = classical_delete(b);
        let keep_first = ComplexMatrix::identity(d).tensor(&delete);
        let collapsed = keep_first.compose(&copy).expect("delete after copy");
        let r1 = collapsed.sub(&ComplexMatrix::identity(d)).expect("diff").max_abs();
        let total = delete.compose(&classical_uniform(b)).expect("delete uniform")[(0, 0)];
        let r2 = (total - Complex64::ONE).norm();
        (r1, r2)
    }

    /// Residual of decoherence idempotence.
    pub fn decoherence_idempotence_residual(b: &Basis) -> f64 {
        let dec = decoherence(b);
        let twice = dec.compose(&dec).expect("dec twice");
        twice.choi().sub(dec.choi()).expect("choi diff").operator_norm()
    }
}
