//! Completely positive maps in Kraus/Choi form, Stinespring dilations, and
//! completely-bounded distance estimation.
//!
//! A [`Channel`] is a CP map held as a list of Kraus operators together with
//! leg annotations that record the wire structure of its input and output
//! (quantum wires carry full operator spaces, classical wires the diagonal
//! subalgebra). The Choi matrix uses the factor order `[output, input]`
//! with the crate-wide big-endian composite index, i.e.
//! `J = sum_k (K_k (x) 1) |Omega'><Omega'| (K_k (x) 1)^dagger` for the
//! unnormalized maximally entangled `|Omega'> = sum_i |ii>`.

mod cb;
mod random;

pub use cb::{
    cb_distance_bounds, cb_lower_bound, cb_upper_bound, purified_alignment_residual, CbBounds,
    CbOptions,
};
pub use random::{haar_unitary, random_cptp, random_density, random_pure_state};

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{cplx, ComplexMatrix, FactorShape, LinalgError};

/// Choi eigenvalues below this cutoff do not contribute Kraus operators or
/// environment dimensions.
pub const CHOI_RANK_CUTOFF: f64 = 1e-10;

/// Tolerance for positive-semidefiniteness of Choi inputs.
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("a channel needs at least one Kraus operator")]
    EmptyKraus,
    #[error("Kraus operator {index} has shape {rows}x{cols}, expected {out_dim}x{in_dim}")]
    KrausShape { index: usize, rows: usize, cols: usize, out_dim: usize, in_dim: usize },
    #[error("leg dimensions {legs} do not match matrix dimension {dim}")]
    LegMismatch { legs: usize, dim: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not positive semidefinite: minimum eigenvalue {min_eig:e}")]
    NotPositive { min_eig: f64 },
    #[error("channels are not equal within tolerance: Choi residual {residual:e} > {tol:e}")]
    ChannelsNotEqual { residual: f64, tol: f64 },
    #[error("size guard exceeded: dimension {size} > limit {limit}")]
    SizeGuard { size: usize, limit: usize },
}

/// Wire annotation for one tensor factor of a channel boundary.
///
/// A quantum leg of dimension `d` carries the operator space `B(C^d)`; a
/// classical leg of dimension `d` carries probability vectors embedded as the
/// diagonal subalgebra of `B(C^d)` in the standard basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Leg {
    Quantum(usize),
    Classical(usize),
}

impl Leg {
    pub fn dim(&self) -> usize {
        match *self {
            Leg::Quantum(d) | Leg::Classical(d) => d,
        }
    }

    pub fn is_classical(&self) -> bool {
        matches!(self, Leg::Classical(_))
    }
}

fn legs_dim(legs: &[Leg]) -> usize {
    legs.iter().map(Leg::dim).product()
}

/// Completely positive map in Kraus form with leg annotations.
pub struct Channel {
    kraus: Vec<ComplexMatrix>,
    in_legs: Vec<Leg>,
    out_legs: Vec<Leg>,
    choi_cache: OnceLock<ComplexMatrix>,
}

impl Clone for Channel {
    fn clone(&self) -> Self {
        let cache = OnceLock::new();
        if let Some(j) = self.choi_cache.get() {
            let _ = cache.set(j.clone());
        }
        Self {
            kraus: self.kraus.clone(),
            in_legs: self.in_legs.clone(),
            out_legs: self.out_legs.clone(),
            choi_cache: cache,
        }
    }
}

impl std::fmt::Debug for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Channel")
            .field("in_legs", &self.in_legs)
            .field("out_legs", &self.out_legs)
            .field("kraus_count", &self.kraus.len())
            .finish()
    }
}

impl Channel {
    /// Build a channel from Kraus operators and explicit leg annotations.
    pub fn from_kraus(
        kraus: Vec<ComplexMatrix>,
        in_legs: Vec<Leg>,
        out_legs: Vec<Leg>,
    ) -> Result<Self, ChannelError> {
        if kraus.is_empty() {
            return Err(ChannelError::EmptyKraus);
        }
        let in_dim = legs_dim(&in_legs);
        let out_dim = legs_dim(&out_legs);
        if in_dim == 0 || out_dim == 0 {
            return Err(ChannelError::LegMismatch { legs: 0, dim: 0 });
        }
        for (index, k) in kraus.iter().enumerate() {
            if k.rows() != out_dim || k.cols() != in_dim {
                return Err(ChannelError::KrausShape {
                    index,
                    rows: k.rows(),
                    cols: k.cols(),
                    out_dim,
                    in_dim,
                });
            }
        }
        Ok(Self { kraus, in_legs, out_legs, choi_cache: OnceLock::new() })
    }

    /// Channel between single quantum wires.
    pub fn from_kraus_quantum(kraus: Vec<ComplexMatrix>) -> Result<Self, ChannelError> {
        let first = kraus.first().ok_or(ChannelError::EmptyKraus)?;
        let (out_dim, in_dim) = (first.rows(), first.cols());
        Self::from_kraus(kraus, vec![Leg::Quantum(in_dim)], vec![Leg::Quantum(out_dim)])
    }

    /// Identity channel on a quantum wire.
    pub fn identity(dim: usize) -> Self {
        Self::from_kraus_quantum(vec![ComplexMatrix::identity(dim)]).expect("identity kraus")
    }

    /// Identity on a classical wire (the standard-basis decoherence, which
    /// acts as the identity on the diagonal subalgebra the wire carries).
    pub fn classical_identity(dim: usize) -> Self {
        let kraus = (0..dim)
            .map(|i| {
                let e = ComplexMatrix::basis_column(dim, i);
                e.compose(&e.dagger()).expect("projector")
            })
            .collect();
        Self::from_kraus(kraus, vec![Leg::Classical(dim)], vec![Leg::Classical(dim)])
            .expect("classical identity")
    }

    /// The trace map ("ground"): quantum wire in, trivial system out.
    pub fn discard(dim: usize) -> Self {
        let kraus = (0..dim).map(|i| ComplexMatrix::basis_column(dim, i).dagger()).collect();
        Self::from_kraus(kraus, vec![Leg::Quantum(dim)], vec![Leg::Quantum(1)]).expect("discard")
    }

    /// State preparation: trivial system in, a fixed density matrix out.
    pub fn prepare(rho: &ComplexMatrix) -> Result<Self, ChannelError> {
        let eig = rho.hermitian_eig()?;
        let dim = rho.rows();
        let mut kraus = Vec::new();
        for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda < -PSD_TOL {
                return Err(ChannelError::NotPositive { min_eig: lambda });
            }
            if lambda > CHOI_RANK_CUTOFF {
                kraus.push(eig.eigenvector(j).scale(cplx(lambda.sqrt(), 0.0)));
            }
        }
        if kraus.is_empty() {
            kraus.push(ComplexMatrix::zeros(dim, 1));
        }
        Self::from_kraus(kraus, vec![Leg::Quantum(1)], vec![Leg::Quantum(dim)])
    }

    /// The completely depolarizing channel `rho -> Tr(rho) I/d`.
    pub fn completely_depolarizing(dim: usize) -> Self {
        let scale = cplx(1.0 / (dim as f64).sqrt(), 0.0);
        let mut kraus = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                let mut k = ComplexMatrix::zeros(dim, dim);
                k[(i, j)] = scale;
                kraus.push(k);
            }
        }
        Self::from_kraus_quantum(kraus).expect("depolarizing kraus")
    }

    pub fn kraus(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    pub fn in_legs(&self) -> &[Leg] {
        &self.in_legs
    }

    pub fn out_legs(&self) -> &[Leg] {
        &self.out_legs
    }

    pub fn in_dim(&self) -> usize {
        legs_dim(&self.in_legs)
    }

    pub fn out_dim(&self) -> usize {
        legs_dim(&self.out_legs)
    }

    /// Replace the leg annotations, keeping total dimensions.
    pub fn with_legs(mut self, in_legs: Vec<Leg>, out_legs: Vec<Leg>) -> Result<Self, ChannelError> {
        if legs_dim(&in_legs) != self.in_dim() {
            return Err(ChannelError::LegMismatch { legs: legs_dim(&in_legs), dim: self.in_dim() });
        }
        if legs_dim(&out_legs) != self.out_dim() {
            return Err(ChannelError::LegMismatch { legs: legs_dim(&out_legs), dim: self.out_dim() });
        }
        self.in_legs = in_legs;
        self.out_legs = out_legs;
        Ok(self)
    }

    /// Apply the channel: `rho -> sum_k K rho K^dagger`.
    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix, ChannelError> {
        if rho.rows() != self.in_dim() || rho.cols() != self.in_dim() {
            return Err(ChannelError::DimensionMismatch(format!(
                "apply: state is {}x{}, channel input dimension is {}",
                rho.rows(),
                rho.cols(),
                self.in_dim()
            )));
        }
        let mut out = ComplexMatrix::zeros(self.out_dim(), self.out_dim());
        for k in &self.kraus {
            let term = k.compose(rho)?.compose(&k.dagger())?;
            out = out.add(&term)?;
        }
        Ok(out)
    }

    /// Sequential composition `self after earlier`.
    pub fn compose(&self, earlier: &Channel) -> Result<Channel, ChannelError> {
        if self.in_dim() != earlier.out_dim() {
            return Err(ChannelError::DimensionMismatch(format!(
                "compose: {} vs {}",
                self.in_dim(),
                earlier.out_dim()
            )));
        }
        let mut kraus = Vec::with_capacity(self.kraus.len() * earlier.kraus.len());
        for a in &self.kraus {
            for b in &earlier.kraus {
                kraus.push(a.compose(b)?);
            }
        }
        Channel::from_kraus(kraus, earlier.in_legs.clone(), self.out_legs.clone())
    }

    /// Parallel composition; `self`'s wires come first.
    pub fn tensor(&self, other: &Channel) -> Result<Channel, ChannelError> {
        let mut kraus = Vec::with_capacity(self.kraus.len() * other.kraus.len());
        for a in &self.kraus {
            for b in &other.kraus {
                kraus.push(a.tensor(b));
            }
        }
        let mut in_legs = self.in_legs.clone();
        in_legs.extend_from_slice(&other.in_legs);
        let mut out_legs = self.out_legs.clone();
        out_legs.extend_from_slice(&other.out_legs);
        Channel::from_kraus(kraus, in_legs, out_legs)
    }

    /// Convex mixture `(1 - t) self + t other`.
    pub fn mix(&self, other: &Channel, t: f64) -> Result<Channel, ChannelError> {
        if self.in_dim() != other.in_dim() || self.out_dim() != other.out_dim() {
            return Err(ChannelError::DimensionMismatch("mix".into()));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(ChannelError::DimensionMismatch(format!("mix weight {t} outside [0, 1]")));
        }
        let mut kraus = Vec::new();
        let a = cplx((1.0 - t).sqrt(), 0.0);
        let b = cplx(t.sqrt(), 0.0);
        for k in &self.kraus {
            kraus.push(k.scale(a));
        }
        for k in &other.kraus {
            kraus.push(k.scale(b));
        }
        Channel::from_kraus(kraus, self.in_legs.clone(), self.out_legs.clone())
    }

    /// Adjoint with respect to the Hilbert-Schmidt inner product.
    pub fn adjoint(&self) -> Channel {
        let kraus = self.kraus.iter().map(ComplexMatrix::dagger).collect();
        Channel {
            kraus,
            in_legs: self.out_legs.clone(),
            out_legs: self.in_legs.clone(),
            choi_cache: OnceLock::new(),
        }
    }

    /// Discard the listed output legs, keeping the others in order.
    pub fn discard_output_legs(&self, traced: &[usize]) -> Result<Channel, ChannelError> {
        for &t in traced {
            if t >= self.out_legs.len() {
                return Err(ChannelError::DimensionMismatch(format!(
                    "discard leg {t} of {}",
                    self.out_legs.len()
                )));
            }
        }
        let mut tracer: Option<Channel> = None;
        for (idx, leg) in self.out_legs.iter().enumerate() {
            let stage = if traced.contains(&idx) {
                Channel::discard(leg.dim())
            } else {
                match leg {
                    Leg::Quantum(d) => Channel::identity(*d),
                    Leg::Classical(d) => {
                        Channel::identity(*d).with_legs(vec![Leg::Classical(*d)], vec![Leg::Classical(*d)])?
                    }
                }
            };
            tracer = Some(match tracer {
                None => stage,
                Some(t) => t.tensor(&stage)?,
            });
        }
        let mut composed = tracer.expect("at least one output leg").compose(self)?;
        // Drop the trivial legs introduced by discard stages.
        composed.out_legs.retain(|l| l.dim() > 1);
        if composed.out_legs.is_empty() {
            composed.out_legs.push(Leg::Quantum(1));
        }
        Ok(composed)
    }

    /// Residual of the trace-preservation identity `sum K^dagger K = 1`.
    pub fn tp_residual(&self) -> f64 {
        let mut acc = ComplexMatrix::zeros(self.in_dim(), self.in_dim());
        for k in &self.kraus {
            acc = acc.add(&k.dagger().compose(k).expect("gram")).expect("sum");
        }
        acc.sub(&ComplexMatrix::identity(self.in_dim())).expect("sub").operator_norm()
    }

    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        self.tp_residual() <= tol
    }

    /// Magnitude of the most negative Choi eigenvalue (0 for exactly CP data).
    pub fn cp_residual(&self) -> f64 {
        let eig = self.choi().hermitian_eig().expect("choi is Hermitian");
        (-eig.eigenvalues.last().copied().unwrap_or(0.0)).max(0.0)
    }

    /// Choi matrix with factor order `[out, in]`, cached after first use.
    pub fn choi(&self) -> &ComplexMatrix {
        self.choi_cache.get_or_init(|| {
            let (o, i) = (self.out_dim(), self.in_dim());
            let mut j = ComplexMatrix::zeros(o * i, o * i);
            for k in &self.kraus {
                // vec(K) in the [out, in] big-endian order is the row-major
                // flattening of K.
                let v = ComplexMatrix::new(o * i, 1, k.entries().to_vec()).expect("vec");
                j = j.add(&v.compose(&v.dagger()).expect("outer")).expect("sum");
            }
            j
        })
    }

    /// Rebuild a channel from a Choi matrix (factor order `[out, in]`).
    pub fn from_choi(
        choi: &ComplexMatrix,
        in_dim: usize,
        out_dim: usize,
    ) -> Result<Channel, ChannelError> {
        if choi.rows() != in_dim * out_dim || !choi.is_square() {
            return Err(ChannelError::DimensionMismatch(format!(
                "choi is {}x{}, expected {}",
                choi.rows(),
                choi.cols(),
                in_dim * out_dim
            )));
        }
        let eig = choi.hermitian_eig()?;
        if let Some(&min) = eig.eigenvalues.last() {
            if min < -PSD_TOL {
                return Err(ChannelError::NotPositive { min_eig: min });
            }
        }
        let mut kraus = Vec::new();
        for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda > CHOI_RANK_CUTOFF {
                let v = eig.eigenvector(j);
                let k = ComplexMatrix::from_fn(out_dim, in_dim, |o, i| {
                    v[(o * in_dim + i, 0)] * cplx(lambda.sqrt(), 0.0)
                });
                kraus.push(k);
            }
        }
        if kraus.is_empty() {
            kraus.push(ComplexMatrix::zeros(out_dim, in_dim));
        }
        Channel::from_kraus_quantum(kraus)
    }

    /// Operator-norm distance between Choi matrices; a cheap equality metric.
    pub fn choi_distance(&self, other: &Channel) -> Result<f64, ChannelError> {
        if self.in_dim() != other.in_dim() || self.out_dim() != other.out_dim() {
            return Err(ChannelError::DimensionMismatch("choi_distance".into()));
        }
        Ok(self.choi().sub(other.choi())?.operator_norm())
    }

    /// Stinespring dilation with minimal environment: `V = sum_k K_k (x) |k>`
    /// for the Kraus family read off the Choi eigendecomposition. The
    /// environment dimension is the Choi rank at cutoff
    /// [`CHOI_RANK_CUTOFF`]; the environment factor sits last.
    pub fn purify(&self) -> Result<Dilation, ChannelError> {
        let minimal = Channel::from_choi(self.choi(), self.in_dim(), self.out_dim())?;
        Dilation::from_kraus_family(&minimal.kraus, self.out_dim(), self.in_dim())
    }
}

/// An isometry `V: H_in -> H_out (x) H_env` dilating a channel
/// (`Phi = Tr_env after conjugation by V`). Environment factor last.
#[derive(Debug, Clone)]
pub struct Dilation {
    v: ComplexMatrix,
    out_dim: usize,
    env_dim: usize,
}

impl Dilation {
    pub fn new(v: ComplexMatrix, out_dim: usize, env_dim: usize) -> Result<Self, ChannelError> {
        if v.rows() != out_dim * env_dim {
            return Err(ChannelError::DimensionMismatch(format!(
                "dilation rows {} vs out {} x env {}",
                v.rows(),
                out_dim,
                env_dim
            )));
        }
        Ok(Self { v, out_dim, env_dim })
    }

    fn from_kraus_family(
        kraus: &[ComplexMatrix],
        out_dim: usize,
        in_dim: usize,
    ) -> Result<Self, ChannelError> {
        let env_dim = kraus.len();
        let mut v = ComplexMatrix::zeros(out_dim * env_dim, in_dim);
        for (e, k) in kraus.iter().enumerate() {
            for o in 0..out_dim {
                for i in 0..in_dim {
                    v[(o * env_dim + e, i)] = k[(o, i)];
                }
            }
        }
        Ok(Self { v, out_dim, env_dim })
    }

    pub fn isometry(&self) -> &ComplexMatrix {
        &self.v
    }

    pub fn in_dim(&self) -> usize {
        self.v.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn env_dim(&self) -> usize {
        self.env_dim
    }

    /// `|| V^dagger V - 1 ||`, zero exactly when the dilated map is
    /// trace-preserving.
    pub fn isometry_residual(&self) -> f64 {
        let gram = self.v.dagger().compose(&self.v).expect("gram");
        gram.sub(&ComplexMatrix::identity(self.in_dim())).expect("sub").operator_norm()
    }

    /// Environment blocks `K_e` with `V = sum_e K_e (x) |e>`.
    pub fn env_blocks(&self) -> Vec<ComplexMatrix> {
        (0..self.env_dim)
            .map(|e| {
                ComplexMatrix::from_fn(self.out_dim, self.in_dim(), |o, i| {
                    self.v[(o * self.env_dim + e, i)]
                })
            })
            .collect()
    }

    /// The dilated channel `rho -> Tr_env(V rho V^dagger)`.
    pub fn channel(&self) -> Channel {
        Channel::from_kraus_quantum(self.env_blocks()).expect("dilation blocks")
    }

    /// Pure conjugation by the isometry, before tracing the environment.
    /// Output legs are `[out, env]`.
    pub fn conjugation(&self) -> Channel {
        Channel::from_kraus(
            vec![self.v.clone()],
            vec![Leg::Quantum(self.in_dim())],
            vec![Leg::Quantum(self.out_dim), Leg::Quantum(self.env_dim)],
        )
        .expect("pure conjugation")
    }

    /// Same dilation with the environment padded to `env_dim` by zero blocks.
    pub fn pad_env(&self, env_dim: usize) -> Dilation {
        assert!(env_dim >= self.env_dim);
        let mut blocks = self.env_blocks();
        blocks.extend((self.env_dim..env_dim).map(|_| ComplexMatrix::zeros(self.out_dim, self.in_dim())));
        Dilation::from_kraus_family(&blocks, self.out_dim, self.in_dim()).expect("padded")
    }
}

/// Best unitary on the (common, padded) environment relating two dilations,
/// together with the achieved operator-norm residual
/// `|| (1 (x) U) V_1 - V_2 ||`.
#[derive(Debug, Clone)]
pub struct Intertwiner {
    pub unitary: ComplexMatrix,
    pub residual: f64,
}

/// Frobenius-optimal environment unitary via the polar factor of the
/// cross-Gram matrix `M[l][k] = <A_k, B_l>_HS` of the two dilations'
/// environment blocks. No channel-equality check; any unitary yields a valid
/// continuity upper bound.
pub fn intertwiner_approx(v1: &Dilation, v2: &Dilation) -> Result<Intertwiner, ChannelError> {
    if v1.in_dim() != v2.in_dim() || v1.out_dim() != v2.out_dim() {
        return Err(ChannelError::DimensionMismatch("intertwiner: boundary dims".into()));
    }
    let env = v1.env_dim().max(v2.env_dim());
    let a = v1.pad_env(env);
    let b = v2.pad_env(env);
    let (blocks_a, blocks_b) = (a.env_blocks(), b.env_blocks());
    let gram = ComplexMatrix::from_fn(env, env, |l, k| {
        blocks_a[k].hs_inner(&blocks_b[l]).expect("hs inner")
    });
    let unitary = gram.polar_unitary()?;
    let residual = apply_env_unitary(&a, &unitary)?.sub(b.isometry())?.operator_norm();
    Ok(Intertwiner { unitary, residual })
}

/// `(1_out (x) U) V` for a dilation `V` and environment unitary `U`.
pub fn apply_env_unitary(d: &Dilation, u: &ComplexMatrix) -> Result<ComplexMatrix, ChannelError> {
    if u.rows() != d.env_dim() || u.cols() != d.env_dim() {
        return Err(ChannelError::DimensionMismatch("env unitary".into()));
    }
    let lift = ComplexMatrix::identity(d.out_dim()).tensor(u);
    Ok(lift.compose(d.isometry())?)
}

/// Environment unitary relating two dilations of the same channel.
///
/// Errors when the dilated channels differ by more than `tol` in Choi
/// operator norm; use [`intertwiner_approx`] for the approximate case.
pub fn dilation_intertwiner(
    v1: &Dilation,
    v2: &Dilation,
    tol: f64,
) -> Result<Intertwiner, ChannelError> {
    let residual = v1.channel().choi_distance(&v2.channel())?;
    if residual > tol {
        return Err(ChannelError::ChannelsNotEqual { residual, tol });
    }
    intertwiner_approx(v1, v2)
}

/// The factor shape of a channel's output space, one factor per leg.
pub fn output_shape(c: &Channel) -> FactorShape {
    FactorShape::new(c.out_legs().iter().map(Leg::dim).collect()).expect("leg dims positive")
}
