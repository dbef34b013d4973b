//! Command implementations: load a config, run the requested suite, write
//! deterministic JSON/CSV outputs, and map failures onto exit codes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use qkdlab::channels::{Channel, ChannelError};
use qkdlab::protocol::{
    exact_detection_probability, run_protocol, AttackModel, ProtocolConfig, ProtocolError,
};
use qkdlab::security::{
    calibrate, disturbance, separability_gap, verify_exact_security, verify_noise_bound,
    SecurityError, SecurityOptions,
};
use qkdlab::spiders::{identities, Basis, SpiderPair};

use crate::config::{
    AnalyzeAttackConfig, AttackSection, CalibrateConfig, ChannelSpec, SimulateConfig,
    VerifySpidersConfig, SCHEMA_VERSION,
};

/// Residuals above this fail the identity suite.
pub const IDENTITY_TOL: f64 = 1e-10;

#[derive(Debug)]
pub enum CliError {
    /// Schema or I/O problem: exit code 2.
    Config(String),
    /// Dimension mismatch between config parts: exit code 3.
    Dimension(String),
    /// A verification check failed: exit code 1.
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::CheckFailed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Dimension(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Dimension(m) | CliError::CheckFailed(m) => m,
        }
    }
}

fn classify_channel(e: ChannelError) -> CliError {
    match e {
        ChannelError::DimensionMismatch(_)
        | ChannelError::KrausShape { .. }
        | ChannelError::LegMismatch { .. } => CliError::Dimension(e.to_string()),
        other => CliError::Config(other.to_string()),
    }
}

fn classify_protocol(e: ProtocolError) -> CliError {
    match e {
        ProtocolError::DimensionMismatch(_) | ProtocolError::SizeGuard { .. } => {
            CliError::Dimension(e.to_string())
        }
        ProtocolError::Channel(c) => classify_channel(c),
        other => CliError::Config(other.to_string()),
    }
}

fn classify_security(e: SecurityError) -> CliError {
    match e {
        SecurityError::DimensionMismatch(_) => CliError::Dimension(e.to_string()),
        SecurityError::Channel(c) => classify_channel(c),
        SecurityError::Protocol(p) => classify_protocol(p),
        other => CliError::Config(other.to_string()),
    }
}

pub fn load_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let value: T = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))?;
    Ok(value)
}

fn check_schema_version(found: u32) -> Result<(), CliError> {
    if found != SCHEMA_VERSION {
        return Err(CliError::Config(format!(
            "unsupported schema_version {found}, expected {SCHEMA_VERSION}"
        )));
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Config(format!("serialization failed: {e}")))?;
    text.push('\n');
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Config(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    std::fs::write(path, text)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

/// 17 significant digits, enough for exact f64 round-trips in CSV cells.
fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Serialize)]
struct DimIdentityReport {
    dim: usize,
    fusion: f64,
    trace_preservation: f64,
    decoherence_split: f64,
    decoherence_idempotence: f64,
    classical_structure: f64,
    measure_encode_adjoint: f64,
    unbiasedness_thm1: f64,
    antipode_thm2: f64,
    max_residual: f64,
}

#[derive(Debug, Serialize)]
struct IdentityReport {
    schema_version: u32,
    tolerance: f64,
    dims: Vec<DimIdentityReport>,
    max_residual: f64,
    pass: bool,
}

pub fn cmd_verify_spiders(
    config_path: &Path,
    out_override: Option<PathBuf>,
    quiet: bool,
) -> Result<(), CliError> {
    let cfg: VerifySpidersConfig = load_config(config_path)?;
    check_schema_version(cfg.schema_version)?;
    let out = out_override.unwrap_or_else(|| PathBuf::from(&cfg.out));

    let mut dims = Vec::new();
    for &d in &cfg.dims {
        if d == 0 {
            return Err(CliError::Config("dimension 0 is not allowed".into()));
        }
        let z = Basis::computational(d);
        let x = Basis::fourier(d);
        let pair = SpiderPair::new(z.clone(), x.clone())
            .map_err(|e| CliError::Config(e.to_string()))?;

        let mut fusion = 0.0f64;
        for m in 0..=2 {
            for n in 1..=2 {
                for m2 in 1..=2 {
                    for n2 in 0..=2 {
                        for k in 1..=n.min(m2) {
                            fusion = fusion.max(identities::fusion_residual(&x, m, n, m2, n2, k));
                        }
                    }
                }
            }
        }
        let trace_preservation = (1..=3)
            .map(|n| identities::trace_preservation_residual(&x, n))
            .fold(0.0, f64::max);
        let (split, cl_id) = identities::decoherence_split_residuals(&x);
        let decoherence_split = split.max(cl_id);
        let decoherence_idempotence = identities::decoherence_idempotence_residual(&x);
        let (copy_law, uniform_law) = identities::copy_delete_uniform_residuals(&x);
        let classical_structure = copy_law.max(uniform_law);
        let measure_encode_adjoint = identities::measure_encode_adjoint_residual(&x);
        let unbiasedness_thm1 = qkdlab::spiders::check_complementarity_thm1(&pair);
        let antipode_thm2 = qkdlab::spiders::check_complementarity_thm2(&pair);

        let max_residual = [
            fusion,
            trace_preservation,
            decoherence_split,
            decoherence_idempotence,
            classical_structure,
            measure_encode_adjoint,
            unbiasedness_thm1,
            antipode_thm2,
        ]
        .into_iter()
        .fold(0.0, f64::max);

        dims.push(DimIdentityReport {
            dim: d,
            fusion,
            trace_preservation,
            decoherence_split,
            decoherence_idempotence,
            classical_structure,
            measure_encode_adjoint,
            unbiasedness_thm1,
            antipode_thm2,
            max_residual,
        });
    }

    let max_residual = dims.iter().map(|d| d.max_residual).fold(0.0, f64::max);
    let pass = max_residual <= IDENTITY_TOL;
    let report =
        IdentityReport { schema_version: SCHEMA_VERSION, tolerance: IDENTITY_TOL, dims, max_residual, pass };
    write_json(&out, &report)?;
    if !quiet {
        println!(
            "identity suite over dims {:?}: max residual {max_residual:.3e} -> {}",
            cfg.dims,
            if pass { "pass" } else { "FAIL" }
        );
        println!("wrote {}", out.display());
    }
    if !pass {
        return Err(CliError::CheckFailed(format!(
            "identity residual {max_residual:.3e} exceeds {IDENTITY_TOL:.0e}"
        )));
    }
    Ok(())
}

fn build_attack(section: &AttackSection) -> Result<AttackModel, CliError> {
    match section {
        AttackSection::None => Ok(AttackModel::NoAttack),
        AttackSection::InterceptResend { policy } => Ok(AttackModel::InterceptResend(*policy)),
        AttackSection::Channel { kraus, env_dim } => {
            let phi = Channel::from_kraus_quantum(kraus.clone()).map_err(classify_channel)?;
            AttackModel::channel_attack(phi, *env_dim).map_err(classify_protocol)
        }
        AttackSection::Memory { kraus, env_dim, rho0 } => {
            let phi = Channel::from_kraus_quantum(kraus.clone()).map_err(classify_channel)?;
            if rho0.rows() != *env_dim {
                return Err(CliError::Dimension(format!(
                    "memory state dimension {} vs env_dim {env_dim}",
                    rho0.rows()
                )));
            }
            AttackModel::memory_attack(phi, rho0.clone()).map_err(classify_protocol)
        }
    }
}

pub fn cmd_simulate(
    config_path: &Path,
    out_override: Option<PathBuf>,
    seed_override: Option<u64>,
    quiet: bool,
) -> Result<(), CliError> {
    let cfg: SimulateConfig = load_config(config_path)?;
    check_schema_version(cfg.schema_version)?;
    let out = out_override.unwrap_or_else(|| PathBuf::from(&cfg.out));
    let seed = seed_override.unwrap_or(cfg.seed);

    let protocol = ProtocolConfig {
        dim: cfg.protocol.dim,
        target_key_bits: cfg.protocol.target_key_bits,
        rounds: cfg.protocol.rounds.unwrap_or(4 * cfg.protocol.target_key_bits),
        check_fraction: cfg.protocol.check_fraction,
        abort_threshold: cfg.protocol.abort_threshold,
        seed,
    };
    let attack = build_attack(&cfg.attack)?;
    let run = run_protocol(&protocol, &attack).map_err(classify_protocol)?;
    write_json(&out, &run)?;

    if let Some(csv_path) = &cfg.csv_out {
        let mut csv = String::from("seed,dim,rounds,sifted,qber,aborted,key_len\n");
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            seed,
            protocol.dim,
            protocol.rounds,
            run.sifted_count(),
            fmt_float(run.qber_estimate),
            run.aborted,
            run.final_key_alice.len()
        );
        write_text(Path::new(csv_path), &csv)?;
    }

    if !quiet {
        let exact = exact_detection_probability(&protocol, &attack)
            .map(|p| format!("{p:.6}"))
            .unwrap_or_else(|_| "n/a".into());
        println!(
            "rounds {} sifted {} qber {:.6} (exact per-sifted-round {}) aborted {} key_len {}",
            protocol.rounds,
            run.sifted_count(),
            run.qber_estimate,
            exact,
            run.aborted,
            run.final_key_alice.len()
        );
        println!("wrote {}", out.display());
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct AnalysisReport {
    schema_version: u32,
    dim: usize,
    tol: f64,
    exact: qkdlab::security::ExactSecurityVerdict,
    noise: qkdlab::security::SeparabilityReport,
}

fn attack_channel(spec: &ChannelSpec, dim: usize) -> Result<Channel, CliError> {
    let phi = Channel::from_kraus_quantum(spec.kraus.clone()).map_err(classify_channel)?;
    if phi.in_dim() != dim {
        return Err(CliError::Dimension(format!(
            "attack input dimension {} vs configured dim {dim}",
            phi.in_dim()
        )));
    }
    match AttackModel::channel_attack(phi, spec.env_dim).map_err(classify_protocol)? {
        AttackModel::ChannelAttack(c) => Ok(c),
        _ => unreachable!("channel_attack builds a channel attack"),
    }
}

pub fn cmd_analyze_attack(
    config_path: &Path,
    out_override: Option<PathBuf>,
    seed_override: Option<u64>,
    quiet: bool,
) -> Result<(), CliError> {
    let cfg: AnalyzeAttackConfig = load_config(config_path)?;
    check_schema_version(cfg.schema_version)?;
    let out = out_override.unwrap_or_else(|| PathBuf::from(&cfg.out));
    let seed = seed_override.unwrap_or(cfg.seed);

    let phi = attack_channel(&cfg.attack, cfg.dim)?;
    let pair = SpiderPair::computational_fourier(cfg.dim);
    let opts = SecurityOptions::with_seed(seed);
    let exact = verify_exact_security(&phi, &pair, cfg.tol, &opts).map_err(classify_security)?;
    let noise = verify_noise_bound(&phi, &pair, &opts).map_err(classify_security)?;
    let report =
        AnalysisReport { schema_version: SCHEMA_VERSION, dim: cfg.dim, tol: cfg.tol, exact, noise };
    write_json(&out, &report)?;

    if let Some(grid) = &cfg.grid {
        if grid.rho.rows() != cfg.attack.env_dim {
            return Err(CliError::Dimension(format!(
                "grid state dimension {} vs env_dim {}",
                grid.rho.rows(),
                cfg.attack.env_dim
            )));
        }
        let sep = Channel::identity(cfg.dim)
            .tensor(&Channel::prepare(&grid.rho).map_err(classify_channel)?)
            .map_err(classify_channel)?;
        let mut csv =
            String::from("t,eps_z_lower,eps_z_upper,eps_x_lower,eps_x_upper,gap_lower,gap_upper\n");
        for &t in &grid.ts {
            let mixed = sep.mix(&phi, t).map_err(classify_channel)?;
            let eps = disturbance(&mixed, &pair, &opts).map_err(classify_security)?;
            let gap = separability_gap(&mixed, &opts).map_err(classify_security)?;
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{}",
                fmt_float(t),
                fmt_float(eps.eps_z.lower),
                fmt_float(eps.eps_z.upper),
                fmt_float(eps.eps_x.lower),
                fmt_float(eps.eps_x.upper),
                fmt_float(gap.gap.lower),
                fmt_float(gap.gap.upper)
            );
        }
        write_text(Path::new(&grid.csv_out), &csv)?;
        if !quiet {
            println!("wrote grid table {}", grid.csv_out);
        }
    }

    if !quiet {
        println!(
            "eps_z [{:.3e}, {:.3e}] eps_x [{:.3e}, {:.3e}] gap [{:.3e}, {:.3e}]",
            report.exact.disturbance.eps_z.lower,
            report.exact.disturbance.eps_z.upper,
            report.exact.disturbance.eps_x.lower,
            report.exact.disturbance.eps_x.upper,
            report.exact.gap.gap.lower,
            report.exact.gap.gap.upper,
        );
        println!(
            "hypothesis met: {}; separation confirmed: {}; bound rhs {:.3e}",
            report.exact.hypothesis_met, report.exact.separation_confirmed, report.noise.bound_rhs
        );
        println!("wrote {}", out.display());
    }
    Ok(())
}

pub fn cmd_calibrate(
    config_path: &Path,
    out_override: Option<PathBuf>,
    seed_override: Option<u64>,
    quiet: bool,
) -> Result<(), CliError> {
    let cfg: CalibrateConfig = load_config(config_path)?;
    check_schema_version(cfg.schema_version)?;
    let out = out_override.unwrap_or_else(|| PathBuf::from(&cfg.out));
    let seed = seed_override.unwrap_or(cfg.seed);
    if cfg.dim < 2 {
        return Err(CliError::Dimension(format!("calibration dim {} < 2", cfg.dim)));
    }

    let opts = SecurityOptions::fast(seed);
    let artifact = calibrate(cfg.dim, cfg.n_seeds, seed, &cfg.date, &opts)
        .map_err(classify_security)?;
    write_json(&out, &artifact)?;
    if !quiet {
        println!(
            "dim {} seeds {}: n_empirical {:.4} <= n_analytic {:.4}: {}",
            artifact.dim,
            artifact.seeds,
            artifact.n_empirical,
            artifact.n_analytic,
            artifact.n_empirical <= artifact.n_analytic
        );
        println!("wrote {}", out.display());
    }
    if artifact.n_empirical > artifact.n_analytic {
        return Err(CliError::CheckFailed(format!(
            "empirical ratio {:.4} exceeds the analytic constant {:.4}",
            artifact.n_empirical, artifact.n_analytic
        )));
    }
    Ok(())
}
