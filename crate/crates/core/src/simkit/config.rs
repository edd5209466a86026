//! Campaign configuration: a flat key-value text format.
//!
//! Lines before the first `[campaign]` header set shared defaults; each
//! `[campaign]` block then starts from those and overrides freely. A file
//! with no header at all is a single campaign. `#` starts a comment, keys
//! and values are separated by `=`, and later keys override earlier ones.

use crate::channel::ChannelConfig;
use crate::precode::max_beam_count;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("campaign {campaign}: {message}")]
    Validation { campaign: usize, message: String },
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
}

/// The four downlink systems the engine realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    /// Single scheduled user, SM across the transmit antennas.
    TdmaSm,
    /// All users in parallel, SM across block-diagonalization beams.
    BdSm,
    /// All users in parallel, two spatial-multiplexing layers over BD beams.
    BdVblast,
    /// Pseudo-inverse precoding to single-antenna users.
    ChannelInversion,
}

impl SystemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SystemKind::TdmaSm => "tdma_sm",
            SystemKind::BdSm => "bd_sm",
            SystemKind::BdVblast => "bd_vblast",
            SystemKind::ChannelInversion => "channel_inversion",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tdma_sm" => Some(SystemKind::TdmaSm),
            "bd_sm" => Some(SystemKind::BdSm),
            "bd_vblast" => Some(SystemKind::BdVblast),
            "channel_inversion" => Some(SystemKind::ChannelInversion),
            _ => None,
        }
    }
}

/// One validated campaign entry.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub system: SystemKind,
    pub channel: ChannelConfig,
    /// Beams per user for the BD systems; zero elsewhere.
    pub n_beams: usize,
    pub mod_order: usize,
    pub snr_grid_db: Vec<f64>,
    pub runs: usize,
    pub symbols_per_run: usize,
    /// Symbols transmitted per channel realization.
    pub coherence_block: usize,
    pub master_seed: u64,
    /// Per-user transmit power budget.
    pub e_tr: f64,
}

impl SimConfig {
    /// Total source bits one transmitted symbol period carries per user.
    pub fn bits_per_symbol(&self) -> u32 {
        let sym_bits = self.mod_order.trailing_zeros();
        match self.system {
            SystemKind::TdmaSm => self.channel.n_tx.trailing_zeros() + sym_bits,
            SystemKind::BdSm => self.n_beams.ilog2() + sym_bits,
            SystemKind::BdVblast => 2 * sym_bits,
            SystemKind::ChannelInversion => sym_bits,
        }
    }

    /// Users whose bits are pooled into the BER statistic.
    pub fn users_counted(&self) -> usize {
        match self.system {
            SystemKind::TdmaSm => 1,
            _ => self.channel.n_users,
        }
    }
}

/// Raw key-value state; defaults match the documented schema.
#[derive(Debug, Clone)]
struct RawConfig {
    system: SystemKind,
    n_tx: usize,
    n_rx: usize,
    n_users: usize,
    beta_tx: f64,
    beta_rx: f64,
    rho_tx: f64,
    rho_rx: f64,
    n_beams: usize,
    mod_order: usize,
    snr_grid_db: Vec<f64>,
    runs: usize,
    symbols_per_run: usize,
    coherence_block: usize,
    master_seed: u64,
    e_tr: f64,
}

impl Default for RawConfig {
    fn default() -> Self {
        RawConfig {
            system: SystemKind::TdmaSm,
            n_tx: 64,
            n_rx: 2,
            n_users: 1,
            beta_tx: 0.3,
            beta_rx: 0.3,
            rho_tx: 0.5,
            rho_rx: 0.5,
            n_beams: 0,
            mod_order: 2,
            snr_grid_db: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            runs: 10,
            symbols_per_run: 100_000,
            coherence_block: 100,
            master_seed: 42,
            e_tr: 1.0,
        }
    }
}

fn parse_num<T: std::str::FromStr>(value: &str, line: usize, key: &str) -> Result<T, ConfigError> {
    value.trim().parse().map_err(|_| ConfigError::Parse {
        line,
        message: format!("cannot parse value {value:?} for key {key}"),
    })
}

impl RawConfig {
    fn apply(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        match key {
            "system" => {
                self.system = SystemKind::parse(value.trim()).ok_or(ConfigError::Parse {
                    line,
                    message: format!(
                        "unknown system {value:?}; expected tdma_sm, bd_sm, bd_vblast, \
                         or channel_inversion"
                    ),
                })?;
            }
            "n_tx" => self.n_tx = parse_num(value, line, key)?,
            "n_rx" => self.n_rx = parse_num(value, line, key)?,
            "n_users" => self.n_users = parse_num(value, line, key)?,
            "beta" => {
                self.beta_tx = parse_num(value, line, key)?;
                self.beta_rx = self.beta_tx;
            }
            "beta_tx" => self.beta_tx = parse_num(value, line, key)?,
            "beta_rx" => self.beta_rx = parse_num(value, line, key)?,
            "rho" => {
                self.rho_tx = parse_num(value, line, key)?;
                self.rho_rx = self.rho_tx;
            }
            "rho_tx" => self.rho_tx = parse_num(value, line, key)?,
            "rho_rx" => self.rho_rx = parse_num(value, line, key)?,
            "n_beams" => self.n_beams = parse_num(value, line, key)?,
            "mod_order" => self.mod_order = parse_num(value, line, key)?,
            "snr_db" => {
                let mut grid = Vec::new();
                for part in value.split(',') {
                    grid.push(parse_num(part, line, key)?);
                }
                self.snr_grid_db = grid;
            }
            "runs" => self.runs = parse_num(value, line, key)?,
            "symbols_per_run" => self.symbols_per_run = parse_num(value, line, key)?,
            "coherence_block" => self.coherence_block = parse_num(value, line, key)?,
            "master_seed" => self.master_seed = parse_num(value, line, key)?,
            "e_tr" => self.e_tr = parse_num(value, line, key)?,
            _ => {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("unknown key {key:?}"),
                })
            }
        }
        Ok(())
    }

    fn build(&self, campaign: usize) -> Result<SimConfig, ConfigError> {
        let fail = |message: String| ConfigError::Validation { campaign, message };
        let channel = ChannelConfig {
            n_tx: self.n_tx,
            n_rx: self.n_rx,
            n_users: self.n_users,
            beta_tx: self.beta_tx,
            beta_rx: self.beta_rx,
            rho_tx: self.rho_tx,
            rho_rx: self.rho_rx,
            seed: self.master_seed,
        };
        channel.validate().map_err(|e| fail(e.to_string()))?;
        if !self.mod_order.is_power_of_two() || !(2..=8192).contains(&self.mod_order) {
            return Err(fail(format!(
                "mod_order {} must be a power of two in 2..=8192",
                self.mod_order
            )));
        }
        if self.snr_grid_db.is_empty() {
            return Err(fail("snr_db grid is empty".into()));
        }
        if self.runs < 1 || self.symbols_per_run < 1 || self.coherence_block < 1 {
            return Err(fail(
                "runs, symbols_per_run, and coherence_block must all be >= 1".into(),
            ));
        }
        if !(self.e_tr > 0.0) || !self.e_tr.is_finite() {
            return Err(fail(format!("e_tr {} must be positive", self.e_tr)));
        }
        let mut n_beams = self.n_beams;
        match self.system {
            SystemKind::TdmaSm => {
                if !self.n_tx.is_power_of_two() || self.n_tx < 2 {
                    return Err(fail(format!(
                        "tdma_sm maps index bits onto antennas, so n_tx {} must be a \
                         power of two >= 2",
                        self.n_tx
                    )));
                }
                n_beams = 0;
            }
            SystemKind::BdSm | SystemKind::BdVblast => {
                let rank = (self.n_users - 1) * self.n_rx;
                if self.n_tx <= rank {
                    return Err(fail(format!(
                        "n_tx {} must exceed the interference rank {rank}",
                        self.n_tx
                    )));
                }
                let j_k = max_beam_count(self.n_tx, self.n_rx, self.n_users);
                if self.system == SystemKind::BdVblast {
                    if n_beams == 0 {
                        n_beams = 2;
                    }
                    if n_beams != 2 {
                        return Err(fail(format!(
                            "bd_vblast uses exactly 2 beams per user, got {n_beams}"
                        )));
                    }
                    if self.n_rx < 2 {
                        return Err(fail(format!(
                            "bd_vblast needs n_rx >= 2 for joint detection, got {}",
                            self.n_rx
                        )));
                    }
                } else if n_beams < 2 || n_beams > j_k {
                    return Err(fail(format!(
                        "bd_sm needs n_beams in 2..={j_k} (null-space size), got {n_beams}"
                    )));
                }
                if j_k < n_beams {
                    return Err(fail(format!(
                        "only {j_k} interference-free beams exist, {n_beams} requested"
                    )));
                }
            }
            SystemKind::ChannelInversion => {
                n_beams = 0;
            }
        }
        Ok(SimConfig {
            system: self.system,
            channel,
            n_beams,
            mod_order: self.mod_order,
            snr_grid_db: self.snr_grid_db.clone(),
            runs: self.runs,
            symbols_per_run: self.symbols_per_run,
            coherence_block: self.coherence_block,
            master_seed: self.master_seed,
            e_tr: self.e_tr,
        })
    }
}

/// Parses campaign text. See the module docs for the format.
pub fn parse_config(text: &str) -> Result<Vec<SimConfig>, ConfigError> {
    let mut preamble = RawConfig::default();
    let mut blocks: Vec<RawConfig> = Vec::new();
    let mut in_preamble = true;
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if line == "[campaign]" {
            blocks.push(preamble.clone());
            in_preamble = false;
            continue;
        }
        if line.starts_with('[') {
            return Err(ConfigError::Parse {
                line: line_no,
                message: format!("unknown section {line:?}; only [campaign] is defined"),
            });
        }
        let (key, value) = line.split_once('=').ok_or(ConfigError::Parse {
            line: line_no,
            message: format!("expected `key = value`, got {line:?}"),
        })?;
        let target = if in_preamble {
            &mut preamble
        } else {
            blocks.last_mut().expect("a campaign block is open")
        };
        target.apply(key.trim(), value, line_no)?;
    }
    if blocks.is_empty() {
        blocks.push(preamble);
    }
    blocks
        .iter()
        .enumerate()
        .map(|(i, raw)| raw.build(i + 1))
        .collect()
}

/// Reads and parses a campaign file.
pub fn load_config(path: &Path) -> Result<Vec<SimConfig>, ConfigError> {
    parse_config(&std::fs::read_to_string(path)?)
}

fn push_grid(out: &mut String, grid: &[f64]) {
    for (i, v) in grid.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{v}");
    }
}

/// Renders campaigns back to the text format; `parse_config` of the output
/// reproduces the input exactly.
pub fn serialize_config(configs: &[SimConfig]) -> String {
    let mut out = String::new();
    for cfg in configs {
        out.push_str("[campaign]\n");
        let c = &cfg.channel;
        let _ = writeln!(out, "system = {}", cfg.system.as_str());
        let _ = writeln!(out, "n_tx = {}", c.n_tx);
        let _ = writeln!(out, "n_rx = {}", c.n_rx);
        let _ = writeln!(out, "n_users = {}", c.n_users);
        let _ = writeln!(out, "beta_tx = {}", c.beta_tx);
        let _ = writeln!(out, "beta_rx = {}", c.beta_rx);
        let _ = writeln!(out, "rho_tx = {}", c.rho_tx);
        let _ = writeln!(out, "rho_rx = {}", c.rho_rx);
        if cfg.n_beams > 0 {
            let _ = writeln!(out, "n_beams = {}", cfg.n_beams);
        }
        let _ = writeln!(out, "mod_order = {}", cfg.mod_order);
        out.push_str("snr_db = ");
        push_grid(&mut out, &cfg.snr_grid_db);
        out.push('\n');
        let _ = writeln!(out, "runs = {}", cfg.runs);
        let _ = writeln!(out, "symbols_per_run = {}", cfg.symbols_per_run);
        let _ = writeln!(out, "coherence_block = {}", cfg.coherence_block);
        let _ = writeln!(out, "master_seed = {}", cfg.master_seed);
        let _ = writeln!(out, "e_tr = {}", cfg.e_tr);
        out.push('\n');
    }
    out
}
