//! Seeded simulation of the qudit key-distribution protocol.
//!
//! Each round, the sender draws a uniform value and a uniform basis choice
//! (computational Z or Fourier X), encodes, and transmits through the
//! attack model; the receiver measures in an independently chosen basis.
//! Rounds where the basis choices agree are sifted; a seeded subset of the
//! sifted rounds is sacrificed as check values and the run aborts when the
//! observed mismatch fraction exceeds the configured threshold.
//!
//! Randomness: every round draws from the substream `(seed, round_index)`
//! of [`crate::rng::substream`] (ChaCha12 seeded through SplitMix64), in the
//! fixed order sender value, sender basis, receiver basis, attack
//! randomness, measurement sampling. Check-bit selection uses the reserved
//! substream index `u64::MAX`. Runs are therefore reproducible bit-for-bit
//! and independent of execution order.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channels::{Channel, ChannelError, Leg};
use crate::linalg::{cplx, permutation_matrix, ComplexMatrix, FactorShape, LinalgError};
use crate::rng::substream;
use crate::spiders::{decoherence, Basis};

/// Largest total dimension allowed for unrolled memory-attack channels.
pub const MEMORY_SIZE_GUARD: usize = 256;

const CHECK_STREAM_INDEX: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("attack dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("attack is not trace-preserving (residual {residual:e})")]
    NotTracePreserving { residual: f64 },
    #[error("operation does not support this attack kind: {0}")]
    UnsupportedAttack(String),
    #[error("size guard exceeded: dimension {size} > {limit}")]
    SizeGuard { size: usize, limit: usize },
}

/// Basis label used by the protocol parties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisChoice {
    Z,
    X,
}

/// Interception policy for the measure-and-resend eavesdropper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IrPolicy {
    AlwaysZ,
    AlwaysX,
    UniformRandom,
}

/// Eavesdropper description.
#[derive(Debug, Clone)]
pub enum AttackModel {
    NoAttack,
    InterceptResend(IrPolicy),
    /// A fixed channel `B(H) -> B(H (x) E)`; the receiver gets the first
    /// factor, the eavesdropper keeps `E`.
    ChannelAttack(Channel),
    /// An interaction `B(H (x) E) -> B(H (x) E)` threaded through a quantum
    /// memory initialized in `rho0`.
    MemoryAttack { phi: Channel, rho0: ComplexMatrix },
}

impl AttackModel {
    /// Wrap a wiretap channel, annotating the output as `[system, memory]`.
    pub fn channel_attack(phi: Channel, env_dim: usize) -> Result<Self, ProtocolError> {
        let d = phi.in_dim();
        if env_dim == 0 || phi.out_dim() != d * env_dim {
            return Err(ProtocolError::DimensionMismatch(format!(
                "channel attack: output {} is not input {} x env {}",
                phi.out_dim(),
                d,
                env_dim
            )));
        }
        let residual = phi.tp_residual();
        if residual > 1e-10 {
            return Err(ProtocolError::NotTracePreserving { residual });
        }
        let phi = phi.with_legs(vec![Leg::Quantum(d)], vec![Leg::Quantum(d), Leg::Quantum(env_dim)])?;
        Ok(AttackModel::ChannelAttack(phi))
    }

    /// Wrap a memory interaction with its initial memory state.
    pub fn memory_attack(phi: Channel, rho0: ComplexMatrix) -> Result<Self, ProtocolError> {
        let env = rho0.rows();
        if !rho0.is_square() || env == 0 {
            return Err(ProtocolError::DimensionMismatch("memory state must be square".into()));
        }
        if phi.in_dim() != phi.out_dim() || !phi.in_dim().is_multiple_of(env) {
            return Err(ProtocolError::DimensionMismatch(format!(
                "memory interaction on {} does not factor through env {}",
                phi.in_dim(),
                env
            )));
        }
        let d = phi.in_dim() / env;
        if d < 2 {
            return Err(ProtocolError::DimensionMismatch("system dimension must be >= 2".into()));
        }
        let residual = phi.tp_residual();
        if residual > 1e-10 {
            return Err(ProtocolError::NotTracePreserving { residual });
        }
        let legs = vec![Leg::Quantum(d), Leg::Quantum(env)];
        let phi = phi.with_legs(legs.clone(), legs)?;
        let tr = rho0.trace()?;
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-12 {
            return Err(ProtocolError::DimensionMismatch("memory state must have unit trace".into()));
        }
        Ok(AttackModel::MemoryAttack { phi, rho0 })
    }

    fn check_dim(&self, dim: usize) -> Result<(), ProtocolError> {
        let found = match self {
            AttackModel::NoAttack | AttackModel::InterceptResend(_) => dim,
            AttackModel::ChannelAttack(phi) => phi.in_dim(),
            AttackModel::MemoryAttack { phi, rho0 } => phi.in_dim() / rho0.rows(),
        };
        if found != dim {
            return Err(ProtocolError::DimensionMismatch(format!(
                "attack acts on dimension {found}, protocol uses {dim}"
            )));
        }
        Ok(())
    }
}

/// Protocol parameters; `rounds` defaults to `4 * target_key_bits`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub dim: usize,
    pub target_key_bits: usize,
    pub rounds: usize,
    pub check_fraction: f64,
    pub abort_threshold: f64,
    pub seed: u64,
}

impl ProtocolConfig {
    pub fn new(dim: usize, target_key_bits: usize, seed: u64) -> Self {
        Self {
            dim,
            target_key_bits,
            rounds: 4 * target_key_bits,
            check_fraction: 0.5,
            abort_threshold: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.dim < 2 {
            return Err(ProtocolError::InvalidConfig(format!("dim {} < 2", self.dim)));
        }
        if self.rounds == 0 {
            return Err(ProtocolError::InvalidConfig("rounds must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.check_fraction) {
            return Err(ProtocolError::InvalidConfig(format!(
                "check_fraction {} outside [0, 1]",
                self.check_fraction
            )));
        }
        if !self.abort_threshold.is_finite() || self.abort_threshold < 0.0 {
            return Err(ProtocolError::InvalidConfig("abort_threshold must be >= 0".into()));
        }
        Ok(())
    }
}

/// Per-round transcript entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub alice_bit: u32,
    pub alice_basis: BasisChoice,
    pub bob_basis: BasisChoice,
    pub bob_bit: u32,
    pub sifted: bool,
    pub check: bool,
}

/// One seeded protocol execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolRun {
    pub rounds: Vec<RoundRecord>,
    pub qber_estimate: f64,
    pub aborted: bool,
    pub final_key_alice: Vec<u32>,
    pub final_key_bob: Vec<u32>,
    /// Eavesdropper outcomes per round, where the attack produces any.
    pub eve_transcript: Vec<Option<u32>>,
}

impl ProtocolRun {
    pub fn sifted_count(&self) -> usize {
        self.rounds.iter().filter(|r| r.sifted).count()
    }

    pub fn check_count(&self) -> usize {
        self.rounds.iter().filter(|r| r.check).count()
    }
}

struct Bases {
    z: Basis,
    x: Basis,
}

impl Bases {
    fn new(dim: usize) -> Self {
        Self { z: Basis::computational(dim), x: Basis::fourier(dim) }
    }

    fn get(&self, choice: BasisChoice) -> &Basis {
        match choice {
            BasisChoice::Z => &self.z,
            BasisChoice::X => &self.x,
        }
    }
}

fn sample_from_weights(weights: &[f64], rng: &mut impl Rng) -> usize {
    let total: f64 = weights.iter().map(|w| w.max(0.0)).sum();
    let mut u: f64 = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        u -= w.max(0.0);
        if u <= 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

fn born_weights(rho: &ComplexMatrix, basis: &Basis) -> Vec<f64> {
    (0..basis.dim())
        .map(|i| {
            let v = basis.vector(i);
            v.dagger()
                .compose(rho)
                .and_then(|m| m.compose(&v))
                .map(|m| m[(0, 0)].re)
                .unwrap_or(0.0)
        })
        .collect()
}

fn pure_state(basis: &Basis, value: usize) -> ComplexMatrix {
    let v = basis.vector(value);
    v.compose(&v.dagger()).expect("projector")
}

/// Run the protocol once; deterministic for a fixed `(config, attack, seed)`.
pub fn run_protocol(cfg: &ProtocolConfig, attack: &AttackModel) -> Result<ProtocolRun, ProtocolError> {
    cfg.validate()?;
    attack.check_dim(cfg.dim)?;
    let d = cfg.dim;
    let bases = Bases::new(d);

    let mut records = Vec::with_capacity(cfg.rounds);
    let mut eve_transcript = Vec::with_capacity(cfg.rounds);
    // Memory attacks carry the eavesdropper state across rounds.
    let mut memory_state = match attack {
        AttackModel::MemoryAttack { rho0, .. } => Some(rho0.clone()),
        _ => None,
    };

    for round in 0..cfg.rounds {
        let mut rng = substream(cfg.seed, round as u64);
        let alice_bit = rng.random_range(0..d) as u32;
        let alice_basis = if rng.random::<bool>() { BasisChoice::X } else { BasisChoice::Z };
        let bob_basis = if rng.random::<bool>() { BasisChoice::X } else { BasisChoice::Z };
        let rho = pure_state(bases.get(alice_basis), alice_bit as usize);

        let (bob_bit, eve_bit) = match attack {
            AttackModel::NoAttack => {
                let weights = born_weights(&rho, bases.get(bob_basis));
                (sample_from_weights(&weights, &mut rng) as u32, None)
            }
            AttackModel::InterceptResend(policy) => {
                let eve_basis = match policy {
                    IrPolicy::AlwaysZ => BasisChoice::Z,
                    IrPolicy::AlwaysX => BasisChoice::X,
                    IrPolicy::UniformRandom => {
                        if rng.random::<bool>() {
                            BasisChoice::X
                        } else {
                            BasisChoice::Z
                        }
                    }
                };
                let eve_weights = born_weights(&rho, bases.get(eve_basis));
                let eve_outcome = sample_from_weights(&eve_weights, &mut rng);
                let resent = pure_state(bases.get(eve_basis), eve_outcome);
                let weights = born_weights(&resent, bases.get(bob_basis));
                (sample_from_weights(&weights, &mut rng) as u32, Some(eve_outcome as u32))
            }
            AttackModel::ChannelAttack(phi) => {
                let env = phi.out_dim() / d;
                let joint = phi.apply(&rho)?;
                // Joint Born sampling: receiver in the chosen basis on the
                // system factor, eavesdropper in the standard basis on E.
                let bob = bases.get(bob_basis);
                let mut weights = Vec::with_capacity(d * env);
                for b in 0..d {
                    let vb = bob.vector(b);
                    for e in 0..env {
                        let ve = ComplexMatrix::basis_column(env, e);
                        let w = vb.tensor(&ve);
                        let p = w.dagger().compose(&joint)?.compose(&w)?[(0, 0)].re;
                        weights.push(p);
                    }
                }
                let idx = sample_from_weights(&weights, &mut rng);
                ((idx / env) as u32, Some((idx % env) as u32))
            }
            AttackModel::MemoryAttack { phi, .. } => {
                let state = memory_state.as_ref().expect("memory state present");
                let env = state.rows();
                let joint = phi.apply(&rho.tensor(state))?;
                let bob = bases.get(bob_basis);
                let id_env = ComplexMatrix::identity(env);
                let weights: Vec<f64> = (0..d)
                    .map(|b| {
                        let proj = pure_state(bob, b).tensor(&id_env);
                        proj.compose(&joint)
                            .and_then(|m| m.trace())
                            .map(|t| t.re)
                            .unwrap_or(0.0)
                    })
                    .collect();
                let b = sample_from_weights(&weights, &mut rng);
                // Collapse and renormalize the eavesdropper memory.
                let proj = pure_state(bob, b).tensor(&id_env);
                let collapsed = proj.compose(&joint)?.compose(&proj)?;
                let shape = FactorShape::new(vec![d, env])?;
                let reduced = collapsed.partial_trace(&shape, &[0])?;
                let norm = reduced.trace()?.re;
                if norm > 1e-14 {
                    memory_state = Some(reduced.scale(cplx(1.0 / norm, 0.0)));
                }
                (b as u32, None)
            }
        };

        records.push(RoundRecord {
            alice_bit,
            alice_basis,
            bob_basis,
            bob_bit,
            sifted: alice_basis == bob_basis,
            check: false,
        });
        eve_transcript.push(eve_bit);
    }

    // Seeded Fisher-Yates prefix of the sifted indices becomes the check set.
    let sifted_indices: Vec<usize> =
        records.iter().enumerate().filter(|(_, r)| r.sifted).map(|(i, _)| i).collect();
    let mut shuffled = sifted_indices.clone();
    let mut check_rng = substream(cfg.seed, CHECK_STREAM_INDEX);
    for i in (1..shuffled.len()).rev() {
        let j = check_rng.random_range(0..=i);
        shuffled.swap(i, j);
    }
    let check_count = (cfg.check_fraction * sifted_indices.len() as f64).floor() as usize;
    for &idx in shuffled.iter().take(check_count) {
        records[idx].check = true;
    }

    let mismatches = records
        .iter()
        .filter(|r| r.check && r.alice_bit != r.bob_bit)
        .count();
    let qber_estimate = if check_count > 0 { mismatches as f64 / check_count as f64 } else { 0.0 };
    let aborted = qber_estimate > cfg.abort_threshold;

    let (final_key_alice, final_key_bob) = if aborted {
        (Vec::new(), Vec::new())
    } else {
        let alice: Vec<u32> = records
            .iter()
            .filter(|r| r.sifted && !r.check)
            .map(|r| r.alice_bit)
            .collect();
        let bob: Vec<u32> =
            records.iter().filter(|r| r.sifted && !r.check).map(|r| r.bob_bit).collect();
        (alice, bob)
    };

    Ok(ProtocolRun {
        rounds: records,
        qber_estimate,
        aborted,
        final_key_alice,
        final_key_bob,
        eve_transcript,
    })
}

/// The receiver-side marginal channel of an attack, `B(H) -> B(H)`.
fn receiver_marginal(dim: usize, attack: &AttackModel) -> Result<Channel, ProtocolError> {
    match attack {
        AttackModel::NoAttack => Ok(Channel::identity(dim)),
        AttackModel::InterceptResend(policy) => {
            let dec_z = decoherence(&Basis::computational(dim));
            let dec_x = decoherence(&Basis::fourier(dim));
            Ok(match policy {
                IrPolicy::AlwaysZ => dec_z,
                IrPolicy::AlwaysX => dec_x,
                IrPolicy::UniformRandom => dec_z.mix(&dec_x, 0.5)?,
            })
        }
        AttackModel::ChannelAttack(phi) => Ok(phi.discard_output_legs(&[1])?),
        AttackModel::MemoryAttack { .. } => Err(ProtocolError::UnsupportedAttack(
            "exact detection probability is not defined for memory attacks".into(),
        )),
    }
}

/// Exact per-sifted-round mismatch probability, by density-matrix algebra.
///
/// Averages over the sender basis (1/2 each), the sender value (1/D each),
/// and the matching receiver measurement:
/// `p = avg Tr[(1 - |a><a|) Phi_marginal(|a><a|)]`.
pub fn exact_detection_probability(
    cfg: &ProtocolConfig,
    attack: &AttackModel,
) -> Result<f64, ProtocolError> {
    cfg.validate()?;
    attack.check_dim(cfg.dim)?;
    let d = cfg.dim;
    let marginal = receiver_marginal(d, attack)?;
    let bases = Bases::new(d);
    let mut p = 0.0;
    for basis in [BasisChoice::Z, BasisChoice::X] {
        let b = bases.get(basis);
        for a in 0..d {
            let rho = pure_state(b, a);
            let out = marginal.apply(&rho)?;
            let survive = b.vector(a).dagger().compose(&out)?.compose(&b.vector(a))?[(0, 0)].re;
            p += 0.5 * (1.0 - survive) / d as f64;
        }
    }
    Ok(p.clamp(0.0, 1.0))
}

/// The composite channel of `n` memory-attack rounds,
/// `B(H^n) -> B(H^n (x) E)`: the memory is initialized in `rho0` and
/// threaded through `n` copies of the interaction, one per system factor.
pub fn memory_unrolled_channel(
    attack: &AttackModel,
    n_rounds: usize,
) -> Result<Channel, ProtocolError> {
    let AttackModel::MemoryAttack { phi, rho0 } = attack else {
        return Err(ProtocolError::UnsupportedAttack("memory unrolling needs a memory attack".into()));
    };
    if n_rounds == 0 {
        return Err(ProtocolError::InvalidConfig("n_rounds must be >= 1".into()));
    }
    let env = rho0.rows();
    let d = phi.in_dim() / env;
    let total = d.pow(n_rounds as u32) * env;
    if total > MEMORY_SIZE_GUARD {
        return Err(ProtocolError::SizeGuard { size: total, limit: MEMORY_SIZE_GUARD });
    }

    let d_all = d.pow(n_rounds as u32);
    let mut current = Channel::identity(d_all)
        .with_legs(
            vec![Leg::Quantum(d); n_rounds],
            vec![Leg::Quantum(d); n_rounds],
        )?
        .tensor(&Channel::prepare(rho0)?)?;
    // Current output factors: [H_0, ..., H_{n-1}, E].
    let dims: Vec<usize> = (0..n_rounds).map(|_| d).chain([env]).collect();
    let shape = FactorShape::new(dims)?;
    for i in 0..n_rounds {
        // Bring (H_i, E) adjacent at the end, apply the interaction, undo.
        let mut front: Vec<usize> = (0..n_rounds).filter(|&j| j != i).collect();
        front.push(i);
        front.push(n_rounds);
        let p_front = permutation_matrix(&shape, &front)?;
        let mut back = vec![0usize; n_rounds + 1];
        for (pos, &label) in front.iter().enumerate() {
            back[label] = pos;
        }
        let p_back = permutation_matrix(
            &FactorShape::new(front.iter().map(|&f| shape.factors()[f]).collect())?,
            &back,
        )?;
        let rest = d.pow((n_rounds - 1) as u32);
        let stage = Channel::from_kraus_quantum(vec![p_back])?
            .compose(&Channel::identity(rest).tensor(phi)?)?
            .compose(&Channel::from_kraus_quantum(vec![p_front])?)?;
        let stage = stage.with_legs(current.out_legs().to_vec(), current.out_legs().to_vec())?;
        current = stage.compose(&current)?;
    }
    Ok(current)
}

/// Plug-in estimate of the mutual information (in bits) between paired
/// discrete samples; used to test that eavesdropper transcripts carry no
/// information about the key.
pub fn empirical_mutual_information(pairs: &[(u32, u32)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    use std::collections::HashMap;
    let n = pairs.len() as f64;
    let mut joint: HashMap<(u32, u32), f64> = HashMap::new();
    let mut left: HashMap<u32, f64> = HashMap::new();
    let mut right: HashMap<u32, f64> = HashMap::new();
    for &(a, b) in pairs {
        *joint.entry((a, b)).or_default() += 1.0;
        *left.entry(a).or_default() += 1.0;
        *right.entry(b).or_default() += 1.0;
    }
    let mut mi = 0.0;
    for (&(a, b), &c) in &joint {
        let p_ab = c / n;
        let p_a = left[&a] / n;
        let p_b = right[&b] / n;
        mi += p_ab * (p_ab / (p_a * p_b)).log2();
    }
    mi.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::random_density;
    use crate::linalg::Complex64;

    fn swap_channel(d: usize) -> Channel {
        let shape = FactorShape::new(vec![d, d]).unwrap();
        let p = permutation_matrix(&shape, &[1, 0]).unwrap();
        Channel::from_kraus_quantum(vec![p]).unwrap()
    }

    #[test]
    fn noiseless_run_yields_identical_keys() {
        let cfg = ProtocolConfig::new(2, 64, 7);
        let run = run_protocol(&cfg, &AttackModel::NoAttack).unwrap();
        assert!(!run.aborted);
        assert_eq!(run.qber_estimate, 0.0);
        assert_eq!(run.final_key_alice, run.final_key_bob);
        assert!(!run.final_key_alice.is_empty());
        // Sifted rounds always transmit perfectly without an attack.
        for r in run.rounds.iter().filter(|r| r.sifted) {
            assert_eq!(r.alice_bit, r.bob_bit);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = ProtocolConfig::new(2, 32, 99);
        let a = run_protocol(&cfg, &AttackModel::InterceptResend(IrPolicy::UniformRandom)).unwrap();
        let b = run_protocol(&cfg, &AttackModel::InterceptResend(IrPolicy::UniformRandom)).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn sifted_flag_matches_basis_agreement() {
        let cfg = ProtocolConfig::new(3, 32, 5);
        let run = run_protocol(&cfg, &AttackModel::NoAttack).unwrap();
        for r in &run.rounds {
            assert_eq!(r.sifted, r.alice_basis == r.bob_basis);
        }
    }

    #[test]
    fn exact_probability_no_attack_is_zero() {
        let cfg = ProtocolConfig::new(2, 8, 0);
        let p = exact_detection_probability(&cfg, &AttackModel::NoAttack).unwrap();
        assert!(p.abs() < 1e-14);
    }

    #[test]
    fn exact_probability_uniform_intercept_resend() {
        // Wrong basis with probability 1/2, then a fully mixed outcome:
        // (1/2) * (D-1)/D. For qubits this is 1/4.
        let cfg = ProtocolConfig::new(2, 8, 0);
        let p =
            exact_detection_probability(&cfg, &AttackModel::InterceptResend(IrPolicy::UniformRandom))
                .unwrap();
        assert!((p - 0.25).abs() < 1e-12, "got {p}");
        let cfg3 = ProtocolConfig { dim: 3, ..ProtocolConfig::new(3, 8, 0) };
        let p3 =
            exact_detection_probability(&cfg3, &AttackModel::InterceptResend(IrPolicy::UniformRandom))
                .unwrap();
        assert!((p3 - 0.5 * (2.0 / 3.0)).abs() < 1e-12, "got {p3}");
    }

    #[test]
    fn exact_probability_always_z_hand_computation() {
        // Reproduced by hand with density matrices, qubit case:
        // Z-sifted rounds (half of the sifted ones): the Z decoherence fixes
        // |z_a><z_a|, mismatch 0. X-sifted rounds: dec_Z(|x_a><x_a|) = I/2,
        // and Tr[(1 - |x_a><x_a|) I/2] = 1/2. Averaged over the two sifted
        // basis cases: (1/2)*0 + (1/2)*(1/2) = 1/4 per sifted round.
        let cfg = ProtocolConfig::new(2, 8, 0);
        let p = exact_detection_probability(&cfg, &AttackModel::InterceptResend(IrPolicy::AlwaysZ))
            .unwrap();
        assert!((p - 0.25).abs() < 1e-12, "got {p}");
        // Same by symmetry for the always-X policy.
        let px = exact_detection_probability(&cfg, &AttackModel::InterceptResend(IrPolicy::AlwaysX))
            .unwrap();
        assert!((px - 0.25).abs() < 1e-12, "got {px}");
    }

    #[test]
    fn qber_matches_exact_probability_for_intercept_resend() {
        let cfg = ProtocolConfig {
            rounds: 40_000,
            abort_threshold: 1.0,
            ..ProtocolConfig::new(2, 1, 11)
        };
        let attack = AttackModel::InterceptResend(IrPolicy::UniformRandom);
        let run = run_protocol(&cfg, &attack).unwrap();
        let exact = exact_detection_probability(&cfg, &attack).unwrap();
        let n = run.check_count() as f64;
        let sigma = (exact * (1.0 - exact) / n).sqrt();
        assert!(
            (run.qber_estimate - exact).abs() <= 3.0 * sigma,
            "qber {} vs exact {exact} (3 sigma {})",
            run.qber_estimate,
            3.0 * sigma
        );
    }

    #[test]
    fn separable_channel_attack_gives_independent_transcript() {
        let mut rng = crate::rng::substream(17, 0);
        let rho = random_density(2, &mut rng);
        let phi = Channel::identity(2).tensor(&Channel::prepare(&rho).unwrap()).unwrap();
        let attack = AttackModel::channel_attack(phi, 2).unwrap();
        let cfg = ProtocolConfig { rounds: 20_000, ..ProtocolConfig::new(2, 1, 23) };
        let run = run_protocol(&cfg, &attack).unwrap();
        assert!(!run.aborted);
        assert_eq!(run.qber_estimate, 0.0);
        let pairs: Vec<(u32, u32)> = run
            .rounds
            .iter()
            .zip(&run.eve_transcript)
            .filter(|(r, _)| r.sifted)
            .filter_map(|(r, e)| e.map(|e| (r.alice_bit, e)))
            .collect();
        assert!(pairs.len() > 5_000);
        let mi = empirical_mutual_information(&pairs);
        assert!(mi <= 0.01, "eavesdropper transcript leaked {mi} bits");
    }

    #[test]
    fn z_nondemolition_attack_correlates_in_z_rounds_only() {
        // The eavesdropper copy of the Z value is perfectly correlated on
        // Z-sifted rounds and uniform on X-sifted rounds.
        let nd = crate::spiders::nondemolition_measurement(&Basis::computational(2));
        let attack = AttackModel::channel_attack(nd, 2).unwrap();
        let cfg = ProtocolConfig { rounds: 20_000, abort_threshold: 1.0, ..ProtocolConfig::new(2, 1, 29) };
        let run = run_protocol(&cfg, &attack).unwrap();
        let z_pairs: Vec<(u32, u32)> = run
            .rounds
            .iter()
            .zip(&run.eve_transcript)
            .filter(|(r, _)| r.sifted && r.alice_basis == BasisChoice::Z)
            .filter_map(|(r, e)| e.map(|e| (r.alice_bit, e)))
            .collect();
        assert!(z_pairs.iter().all(|&(a, e)| a == e));
        let x_pairs: Vec<(u32, u32)> = run
            .rounds
            .iter()
            .zip(&run.eve_transcript)
            .filter(|(r, _)| r.sifted && r.alice_basis == BasisChoice::X)
            .filter_map(|(r, e)| e.map(|e| (r.alice_bit, e)))
            .collect();
        let mi = empirical_mutual_information(&x_pairs);
        assert!(mi < 0.01, "X-round transcript should be uninformative, got {mi} bits");
    }

    #[test]
    fn memory_unrolled_single_round() {
        let mut rng = crate::rng::substream(31, 0);
        let rho0 = random_density(2, &mut rng);
        let attack = AttackModel::memory_attack(swap_channel(2), rho0.clone()).unwrap();
        let unrolled = memory_unrolled_channel(&attack, 1).unwrap();
        // One round of swap hands the memory to the receiver and stores the
        // system: rho -> rho0 (x) rho.
        let rho = random_density(2, &mut rng);
        let out = unrolled.apply(&rho).unwrap();
        let want = rho0.tensor(&rho);
        assert!(out.max_abs_diff(&want).unwrap() < 1e-11);
    }

    #[test]
    fn memory_unrolled_single_round_matches_direct_composition() {
        // One round unrolls to the interaction with the memory plugged in.
        let mut rng = crate::rng::substream(33, 0);
        let rho0 = random_density(2, &mut rng);
        let phi = crate::channels::random_cptp(4, 4, 2, &mut rng);
        let attack = AttackModel::memory_attack(phi.clone(), rho0.clone()).unwrap();
        let unrolled = memory_unrolled_channel(&attack, 1).unwrap();
        let direct = phi
            .compose(&Channel::identity(2).tensor(&Channel::prepare(&rho0).unwrap()).unwrap())
            .unwrap();
        assert!(unrolled.choi_distance(&direct).unwrap() < 1e-10);
    }

    #[test]
    fn memory_unrolled_swap_two_rounds_matches_hand_threading() {
        let mut rng = crate::rng::substream(37, 0);
        let rho0 = random_density(2, &mut rng);
        let attack = AttackModel::memory_attack(swap_channel(2), rho0.clone()).unwrap();
        let unrolled = memory_unrolled_channel(&attack, 2).unwrap();
        // Hand threading: round 1 swaps (H_1, E), round 2 swaps (H_2, E).
        // Input rho_1 (x) rho_2 ends as rho0 (x) rho_1 (x) rho_2-in-E.
        let r1 = random_density(2, &mut rng);
        let r2 = random_density(2, &mut rng);
        let out = unrolled.apply(&r1.tensor(&r2)).unwrap();
        // After both swaps: H_1 holds rho0, H_2 holds r1, E holds r2.
        let want = rho0.tensor(&r1).tensor(&r2);
        assert!(out.max_abs_diff(&want).unwrap() < 1e-11);
    }

    #[test]
    fn memory_unrolled_identity_interaction() {
        let mut rng = crate::rng::substream(41, 0);
        let rho0 = random_density(2, &mut rng);
        let attack = AttackModel::memory_attack(Channel::identity(4), rho0.clone()).unwrap();
        let unrolled = memory_unrolled_channel(&attack, 2).unwrap();
        let r1 = random_density(2, &mut rng);
        let r2 = random_density(2, &mut rng);
        let out = unrolled.apply(&r1.tensor(&r2)).unwrap();
        let want = r1.tensor(&r2).tensor(&rho0);
        assert!(out.max_abs_diff(&want).unwrap() < 1e-11);
    }

    #[test]
    fn memory_unrolled_size_guard() {
        // 2^7 * 4 = 512 exceeds the guard of 256.
        let rho0 = ComplexMatrix::identity(4).scale(cplx(0.25, 0.0));
        let attack = AttackModel::memory_attack(Channel::identity(8), rho0).unwrap();
        assert!(matches!(
            memory_unrolled_channel(&attack, 7),
            Err(ProtocolError::SizeGuard { .. })
        ));
    }

    #[test]
    fn exact_probability_rejects_memory_attacks() {
        let rho0 = random_density(2, &mut crate::rng::substream(34, 0));
        let attack = AttackModel::memory_attack(Channel::identity(4), rho0).unwrap();
        let cfg = ProtocolConfig::new(2, 8, 0);
        assert!(matches!(
            exact_detection_probability(&cfg, &attack),
            Err(ProtocolError::UnsupportedAttack(_))
        ));
    }

    #[test]
    fn attack_dimension_mismatch_is_reported() {
        let cfg = ProtocolConfig::new(3, 8, 1);
        let nd = crate::spiders::nondemolition_measurement(&Basis::computational(2));
        let attack = AttackModel::channel_attack(nd, 2).unwrap();
        assert!(matches!(
            run_protocol(&cfg, &attack),
            Err(ProtocolError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn rejects_non_tp_attacks() {
        let half = ComplexMatrix::identity(2).scale(cplx(0.5, 0.0));
        let phi = Channel::from_kraus_quantum(vec![half.tensor(&ComplexMatrix::from_fn(
            2,
            1,
            |i, _| if i == 0 { Complex64::ONE } else { Complex64::ZERO },
        ))])
        .unwrap();
        assert!(matches!(
            AttackModel::channel_attack(phi, 2),
            Err(ProtocolError::NotTracePreserving { .. })
        ));
    }

    #[test]
    fn mutual_information_estimator_sane() {
        let correlated: Vec<(u32, u32)> = (0..1000).map(|i| (i % 2, i % 2)).collect();
        assert!((empirical_mutual_information(&correlated) - 1.0).abs() < 1e-9);
        let independent: Vec<(u32, u32)> = (0..1000).map(|i| (i % 2, (i / 2) % 2)).collect();
        assert!(empirical_mutual_information(&independent) < 0.01);
    }
}
