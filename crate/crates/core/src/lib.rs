//! Numerical laboratory for the diagrammatic security analysis of BB84-style
//! quantum key distribution.
//!
//! The crate builds the objects of the graphical calculus concretely — bases
//! and their spider families, completely positive maps in Kraus/Choi form,
//! Stinespring dilations — verifies the calculus identities numerically,
//! simulates the qudit key-distribution protocol under eavesdropping, and
//! measures how far an eavesdropper's channel is from a separable
//! (information-free) one.
//!
//! Module map:
//!
//! - [`linalg`]: dense complex matrices, tensor-factor bookkeeping, norms and
//!   decompositions.
//! - [`spiders`]: orthonormal bases, spider families, measure/encode maps,
//!   decoherence, antipode, complementarity checks.
//! - [`channels`]: CP maps in Kraus/Choi form, purification, dilation
//!   intertwiners, completely-bounded distance estimation.
//! - [`protocol`]: seeded simulation of the key-distribution protocol with
//!   pluggable attacks, plus exact detection probabilities.
//! - [`security`]: executable forms of the security statements — disturbance
//!   reports, separability gaps, the noise-tolerance bound, and the
//!   quantum-memory induction.
//! - [`rng`]: seed/substream scheme shared by every stochastic routine.

pub mod channels;
pub mod linalg;
pub mod protocol;
pub mod rng;
pub mod security;
pub mod spiders;

pub use channels::{Channel, Dilation, Leg};
pub use linalg::{Complex64, ComplexMatrix, FactorShape};
pub use spiders::{Basis, SpiderPair};
