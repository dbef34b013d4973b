//! JSON configuration schemas, one per command.
//!
//! Every document carries `schema_version` (currently 1) and is rejected on
//! unknown fields. Complex numbers are `[re, im]` pairs; matrices are
//! row-major nested arrays of such pairs.

use serde::{Deserialize, Serialize};

use qkdlab::protocol::IrPolicy;
use qkdlab::ComplexMatrix;

pub const SCHEMA_VERSION: u32 = 1;

fn default_dims() -> Vec<usize> {
    vec![2, 3, 4, 5]
}

fn default_check_fraction() -> f64 {
    0.5
}

fn default_tol() -> f64 {
    1e-9
}

fn default_calibration_seeds() -> u64 {
    1000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpidersConfig {
    pub schema_version: u32,
    #[serde(default = "default_dims")]
    pub dims: Vec<usize>,
    pub out: String,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    pub dim: usize,
    pub target_key_bits: usize,
    /// Defaults to `4 * target_key_bits`.
    #[serde(default)]
    pub rounds: Option<usize>,
    #[serde(default = "default_check_fraction")]
    pub check_fraction: f64,
    #[serde(default)]
    pub abort_threshold: f64,
}

/// Eavesdropper description; channels come as Kraus operators.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttackSection {
    None,
    InterceptResend { policy: IrPolicy },
    Channel { kraus: Vec<ComplexMatrix>, env_dim: usize },
    Memory { kraus: Vec<ComplexMatrix>, env_dim: usize, rho0: ComplexMatrix },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub out: String,
    #[serde(default)]
    pub csv_out: Option<String>,
    pub protocol: ProtocolSection,
    pub attack: AttackSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Separable base: the eavesdropper state mixed against the attack.
    pub rho: ComplexMatrix,
    pub ts: Vec<f64>,
    pub csv_out: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeAttackConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub dim: usize,
    pub out: String,
    pub attack: ChannelSpec,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub grid: Option<GridSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub kraus: Vec<ComplexMatrix>,
    pub env_dim: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub dim: usize,
    #[serde(default = "default_calibration_seeds")]
    pub n_seeds: u64,
    pub out: String,
    /// Copied verbatim into the artifact so reruns stay byte-identical.
    #[serde(default)]
    pub date: String,
}
