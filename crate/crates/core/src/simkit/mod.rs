//! Deterministic Monte Carlo campaign engine and its I/O.
//!
//! A campaign is a list of configurations, each simulated over an SNR grid
//! for a number of independent runs. Every (configuration, SNR, run) cell
//! derives its own RNG seed from the master seed and the cell coordinates,
//! so cells can execute in any order on any number of workers and still
//! produce bit-identical results.

pub mod config;
pub mod csv;
pub mod engine;

pub use config::{load_config, parse_config, serialize_config, ConfigError, SimConfig, SystemKind};
pub use csv::{format_significant, write_csv, CSV_HEADER};
pub use engine::{run_campaign, theory_overlay};

use crate::channel::ChannelError;
use crate::detect::DetectError;
use crate::modem::ModemError;
use crate::precode::PrecodeError;
use crate::theory::TheoryError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("channel: {0}")]
    Channel(#[from] ChannelError),
    #[error("precoding: {0}")]
    Precode(#[from] PrecodeError),
    #[error("detection: {0}")]
    Detect(#[from] DetectError),
    #[error("modem: {0}")]
    Modem(#[from] ModemError),
    #[error("theory: {0}")]
    Theory(#[from] TheoryError),
    #[error("no analytical bound exists for system {0}")]
    NoTheoryAvailable(String),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
}

/// One output row: simulated (or bound) BER at one SNR point.
#[derive(Debug, Clone, PartialEq)]
pub struct BerRecord {
    /// System id; analytical rows carry a `_theory` suffix.
    pub system: String,
    pub k_users: usize,
    pub n_tx: usize,
    pub n_rx: usize,
    pub beta: f64,
    pub rho: f64,
    /// Beams per user; zero for systems without beamforming patterns.
    pub n_beams: usize,
    pub mod_order: usize,
    pub snr_db: f64,
    pub bits_sent: u64,
    pub bit_errors: u64,
    pub ber: f64,
    /// Receiver real-operation estimate for one detection.
    pub ml_ops: u64,
    /// Seed of the cell at run index 0, for reproduction.
    pub seed: u64,
    /// Always written as zero: wall-clock time would break the byte-level
    /// determinism contract of the CSV. Timing goes to stderr instead.
    pub wall_time_s: f64,
}

/// SplitMix64 finalizer; the avalanche step of the seed derivation.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based per-cell seed: a chain of avalanche steps folding in the
/// master seed and the three cell coordinates. Cells never share a stream.
pub fn cell_seed(master_seed: u64, cfg_idx: usize, snr_idx: usize, run_idx: usize) -> u64 {
    let mut s = mix64(master_seed ^ 0x243F_6A88_85A3_08D3);
    s = mix64(s ^ (cfg_idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    s = mix64(s ^ (snr_idx as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
    s = mix64(s ^ (run_idx as u64).wrapping_mul(0x8CB9_2BA7_2F3D_8DD7));
    s
}
