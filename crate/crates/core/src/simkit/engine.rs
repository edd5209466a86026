//! The Monte Carlo engine behind `run_campaign`, plus analytical overlays.
//!
//! Every cell runs single-threaded on its own `ChaCha8Rng` stream, with the
//! RNG consumed in a fixed per-symbol order (source bits first, then noise),
//! so results depend only on the cell seed. Channels hold still for
//! `coherence_block` symbol periods and are redrawn between blocks.
//!
//! The BD systems model nulling as exact: each user's receive vector carries
//! only that user's own beams. The precoder's numerical leakage sits around
//! ten orders of magnitude below the weakest simulated noise floor, so
//! folding it in would only buy slower cells.

use super::config::{SimConfig, SystemKind};
use super::{cell_seed, mix64, BerRecord, SimError};
use crate::channel::{build_correlation_set, realize_channel, ChannelConfig};
use crate::detect::{ml_complexity, ml_detect_scalar, ml_detect_sm, ml_detect_vblast};
use crate::modem::{build_constellation, frame_bits, sm_demap_word, sm_map_word, Constellation};
use crate::numerics::CVec;
use crate::precode::{bd_precoder, channel_inversion_precoder, max_beam_count};
use crate::theory::{union_bound_bd, union_bound_tdma, TheoryCurve};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::sync::Arc;

/// Stream tag for the representative precoder behind the BD bound, kept
/// disjoint from every simulation cell's seed derivation.
const THEORY_STREAM_TAG: u64 = 0x5B93_2C1D_9F1E_7A3F;

/// Raw counts from one (configuration, SNR, run) cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CellStats {
    pub bits_sent: u64,
    pub bit_errors: u64,
}

fn complex_noise(scale: f64, rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}

/// Runs one simulation cell. `seed` fully determines the outcome.
pub fn simulate_cell(cfg: &SimConfig, snr_db: f64, seed: u64) -> Result<CellStats, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let constellation = build_constellation(cfg.mod_order)?;
    // SNR is the per-user budget over the per-antenna noise power.
    let sigma2 = cfg.e_tr * 10f64.powf(-snr_db / 10.0);
    let nscale = (sigma2 / 2.0).sqrt();
    match cfg.system {
        SystemKind::TdmaSm => simulate_tdma(cfg, &constellation, nscale, &mut rng),
        SystemKind::BdSm => simulate_bd_sm(cfg, &constellation, nscale, &mut rng),
        SystemKind::BdVblast => simulate_bd_vblast(cfg, &constellation, nscale, &mut rng),
        SystemKind::ChannelInversion => simulate_ci(cfg, &constellation, nscale, &mut rng),
    }
}

/// One scheduled user; the index bits select a transmit antenna directly.
fn simulate_tdma(
    cfg: &SimConfig,
    cons: &Constellation,
    nscale: f64,
    rng: &mut ChaCha8Rng,
) -> Result<CellStats, SimError> {
    let ch = ChannelConfig {
        n_users: 1,
        ..cfg.channel.clone()
    };
    let corr = Arc::new(build_correlation_set(&ch)?);
    let n_index = ch.n_tx;
    let m = frame_bits(n_index, cons);
    let sym_bits = cons.bits_per_symbol();
    let amp = Complex64::new(cfg.e_tr.sqrt(), 0.0);
    let mut y = CVec::zeros(ch.n_rx);
    let mut stats = CellStats::default();
    let mut remaining = cfg.symbols_per_run;
    while remaining > 0 {
        let chunk = remaining.min(cfg.coherence_block);
        remaining -= chunk;
        let h = realize_channel(&corr, &ch, rng);
        let cand = &h.per_user[0] * amp;
        for _ in 0..chunk {
            let word = rng.random_range(0..(1u32 << m));
            let frame = sm_map_word(word, n_index, cons);
            let col = cand.column(frame.index - 1);
            for (yr, hr) in y.iter_mut().zip(col.iter()) {
                *yr = hr * frame.symbol + complex_noise(nscale, rng);
            }
            let det = ml_detect_sm(&y, &cand, cons)?;
            let word_hat = sm_demap_word(det.index, det.symbol_label, n_index, sym_bits)?;
            stats.bit_errors += u64::from((word ^ word_hat).count_ones());
            stats.bits_sent += u64::from(m);
        }
    }
    Ok(stats)
}

/// All users in parallel; index bits select one of the first
/// `2^floor(log2(n_beams))` interference-free beams, driven at the full
/// per-user amplitude `sqrt(e_tr)`.
fn simulate_bd_sm(
    cfg: &SimConfig,
    cons: &Constellation,
    nscale: f64,
    rng: &mut ChaCha8Rng,
) -> Result<CellStats, SimError> {
    let ch = cfg.channel.clone();
    let corr = Arc::new(build_correlation_set(&ch)?);
    let n_pow2 = 1usize << cfg.n_beams.ilog2();
    let m = frame_bits(n_pow2, cons);
    let sym_bits = cons.bits_per_symbol();
    let amp = Complex64::new(cfg.e_tr.sqrt(), 0.0);
    let mut y = CVec::zeros(ch.n_rx);
    let mut stats = CellStats::default();
    let mut remaining = cfg.symbols_per_run;
    while remaining > 0 {
        let chunk = remaining.min(cfg.coherence_block);
        remaining -= chunk;
        let h = realize_channel(&corr, &ch, rng);
        let pre = bd_precoder(&h, cfg.n_beams, cfg.e_tr)?;
        let cands: Vec<_> = pre
            .effective
            .iter()
            .map(|e| e.columns(0, n_pow2) * amp)
            .collect();
        for _ in 0..chunk {
            for cand in &cands {
                let word = rng.random_range(0..(1u32 << m));
                let frame = sm_map_word(word, n_pow2, cons);
                let col = cand.column(frame.index - 1);
                for (yr, hr) in y.iter_mut().zip(col.iter()) {
                    *yr = hr * frame.symbol + complex_noise(nscale, rng);
                }
                let det = ml_detect_sm(&y, cand, cons)?;
                let word_hat = sm_demap_word(det.index, det.symbol_label, n_pow2, sym_bits)?;
                stats.bit_errors += u64::from((word ^ word_hat).count_ones());
                stats.bits_sent += u64::from(m);
            }
        }
    }
    Ok(stats)
}

/// All users in parallel; two simultaneous layers per user over the BD
/// beams, each at amplitude `sqrt(e_tr / 2)`, detected jointly.
fn simulate_bd_vblast(
    cfg: &SimConfig,
    cons: &Constellation,
    nscale: f64,
    rng: &mut ChaCha8Rng,
) -> Result<CellStats, SimError> {
    let ch = cfg.channel.clone();
    let corr = Arc::new(build_correlation_set(&ch)?);
    let m_order = cons.order() as u32;
    let sym_bits = cons.bits_per_symbol();
    let mut y = CVec::zeros(ch.n_rx);
    let mut stats = CellStats::default();
    let mut remaining = cfg.symbols_per_run;
    while remaining > 0 {
        let chunk = remaining.min(cfg.coherence_block);
        remaining -= chunk;
        let h = realize_channel(&corr, &ch, rng);
        let pre = bd_precoder(&h, 2, cfg.e_tr)?;
        let scaled: Vec<_> = pre
            .effective
            .iter()
            .zip(&pre.rho)
            .map(|(e, &r)| e * Complex64::new(r, 0.0))
            .collect();
        for _ in 0..chunk {
            for h_eff in &scaled {
                let label0 = rng.random_range(0..m_order);
                let label1 = rng.random_range(0..m_order);
                let x0 = cons.point(label0);
                let x1 = cons.point(label1);
                for (r, yr) in y.iter_mut().enumerate() {
                    *yr = h_eff[(r, 0)] * x0
                        + h_eff[(r, 1)] * x1
                        + complex_noise(nscale, rng);
                }
                let hats = ml_detect_vblast(&y, h_eff, cons)?;
                stats.bit_errors += u64::from((label0 ^ hats[0]).count_ones());
                stats.bit_errors += u64::from((label1 ^ hats[1]).count_ones());
                stats.bits_sent += 2 * u64::from(sym_bits);
            }
        }
    }
    Ok(stats)
}

/// Pseudo-inverse precoding to `K` single-antenna users over a square
/// `K x K` channel; the joint budget is `K * e_tr` and every user sees the
/// common gain `rho` on its own symbol.
fn simulate_ci(
    cfg: &SimConfig,
    cons: &Constellation,
    nscale: f64,
    rng: &mut ChaCha8Rng,
) -> Result<CellStats, SimError> {
    let k = cfg.channel.n_users;
    let ch = ChannelConfig {
        n_tx: k,
        n_rx: 1,
        n_users: k,
        ..cfg.channel.clone()
    };
    let corr = Arc::new(build_correlation_set(&ch)?);
    let e_tr_total = cfg.e_tr * k as f64;
    let m_order = cons.order() as u32;
    let sym_bits = cons.bits_per_symbol();
    let mut stats = CellStats::default();
    let mut remaining = cfg.symbols_per_run;
    while remaining > 0 {
        let chunk = remaining.min(cfg.coherence_block);
        remaining -= chunk;
        let h = realize_channel(&corr, &ch, rng);
        let (_w, rho) = channel_inversion_precoder(&h.stacked(), e_tr_total)?;
        let gain = Complex64::new(rho, 0.0);
        for _ in 0..chunk {
            for _user in 0..k {
                let label = rng.random_range(0..m_order);
                let y = gain * cons.point(label) + complex_noise(nscale, rng);
                let (hat, _) = ml_detect_scalar(y, gain, cons);
                stats.bit_errors += u64::from((label ^ hat).count_ones());
                stats.bits_sent += u64::from(sym_bits);
            }
        }
    }
    Ok(stats)
}

/// Receiver cost reported next to each record.
pub fn ml_ops_for(cfg: &SimConfig) -> u64 {
    let m = cfg.mod_order as u64;
    let c = &cfg.channel;
    match cfg.system {
        SystemKind::TdmaSm => {
            ml_complexity(c.n_tx as u64, c.n_rx as u64, 1, c.n_tx as u64, m)
        }
        SystemKind::BdSm => {
            let j_k = max_beam_count(c.n_tx, c.n_rx, c.n_users) as u64;
            ml_complexity(c.n_tx as u64, c.n_rx as u64, j_k, cfg.n_beams as u64, m)
        }
        SystemKind::BdVblast => {
            let j_k = max_beam_count(c.n_tx, c.n_rx, c.n_users) as u64;
            ml_complexity(c.n_tx as u64, c.n_rx as u64, j_k, 2, m)
        }
        SystemKind::ChannelInversion => ml_complexity(c.n_users as u64, 1, 1, 1, m),
    }
}

fn make_record(cfg: &SimConfig, snr_db: f64, stats: CellStats, seed: u64) -> BerRecord {
    // The inversion system realizes its own square geometry, so the row
    // reports the dimensions it actually used.
    let (n_tx, n_rx) = match cfg.system {
        SystemKind::ChannelInversion => (cfg.channel.n_users, 1),
        _ => (cfg.channel.n_tx, cfg.channel.n_rx),
    };
    BerRecord {
        system: cfg.system.as_str().to_string(),
        k_users: cfg.channel.n_users,
        n_tx,
        n_rx,
        beta: cfg.channel.beta_tx,
        rho: cfg.channel.rho_tx,
        n_beams: cfg.n_beams,
        mod_order: cfg.mod_order,
        snr_db,
        bits_sent: stats.bits_sent,
        bit_errors: stats.bit_errors,
        ber: if stats.bits_sent == 0 {
            0.0
        } else {
            stats.bit_errors as f64 / stats.bits_sent as f64
        },
        ml_ops: ml_ops_for(cfg),
        seed,
        wall_time_s: 0.0,
    }
}

/// Simulates every (configuration, SNR, run) cell and aggregates runs into
/// one record per (configuration, SNR), in campaign order.
///
/// Cells are independent rayon jobs; the ordered collect plus per-cell
/// seeding makes the output identical for any worker count. A failed cell
/// is reported on stderr and contributes no bits, which a zero `bits_sent`
/// exposes in the output.
pub fn run_campaign(configs: &[SimConfig]) -> Result<Vec<BerRecord>, SimError> {
    let mut jobs = Vec::new();
    for (cfg_idx, cfg) in configs.iter().enumerate() {
        for snr_idx in 0..cfg.snr_grid_db.len() {
            for run_idx in 0..cfg.runs {
                jobs.push((cfg_idx, snr_idx, run_idx));
            }
        }
    }
    let outcomes: Vec<Result<CellStats, SimError>> = jobs
        .par_iter()
        .map(|&(cfg_idx, snr_idx, run_idx)| {
            let cfg = &configs[cfg_idx];
            let seed = cell_seed(cfg.master_seed, cfg_idx, snr_idx, run_idx);
            simulate_cell(cfg, cfg.snr_grid_db[snr_idx], seed)
        })
        .collect();
    let mut records = Vec::new();
    let mut pos = 0;
    for (cfg_idx, cfg) in configs.iter().enumerate() {
        for (snr_idx, &snr_db) in cfg.snr_grid_db.iter().enumerate() {
            let mut agg = CellStats::default();
            for run_idx in 0..cfg.runs {
                match &outcomes[pos] {
                    Ok(stats) => {
                        agg.bits_sent += stats.bits_sent;
                        agg.bit_errors += stats.bit_errors;
                    }
                    Err(e) => eprintln!(
                        "cell (config {cfg_idx}, snr {snr_db} dB, run {run_idx}) \
                         failed and contributes no bits: {e}"
                    ),
                }
                pos += 1;
            }
            let seed = cell_seed(cfg.master_seed, cfg_idx, snr_idx, 0);
            records.push(make_record(cfg, snr_db, agg, seed));
        }
    }
    Ok(records)
}

fn curve_to_records(cfg: &SimConfig, curve: &TheoryCurve) -> Vec<BerRecord> {
    curve
        .snr_grid_db
        .iter()
        .zip(&curve.aber)
        .map(|(&snr_db, &aber)| BerRecord {
            system: format!("{}_theory", curve.system),
            k_users: cfg.channel.n_users,
            n_tx: cfg.channel.n_tx,
            n_rx: cfg.channel.n_rx,
            beta: cfg.channel.beta_tx,
            rho: cfg.channel.rho_tx,
            n_beams: cfg.n_beams,
            mod_order: cfg.mod_order,
            snr_db,
            bits_sent: 0,
            bit_errors: 0,
            ber: aber,
            ml_ops: 0,
            seed: cfg.master_seed,
            wall_time_s: 0.0,
        })
        .collect()
}

/// Union-bound rows for one configuration, `_theory`-suffixed.
///
/// The index-over-antennas system gets its exact closed-form bound. The
/// beam-index system needs a beam basis to state a bound at all, so one
/// representative precoder is drawn from a dedicated stream; its bound is
/// deterministic per master seed. The remaining systems have no analytical
/// curve here.
pub fn theory_overlay(cfg: &SimConfig) -> Result<Vec<BerRecord>, SimError> {
    let cons = build_constellation(cfg.mod_order)?;
    let curve = match cfg.system {
        SystemKind::TdmaSm => {
            let ch = ChannelConfig {
                n_users: 1,
                ..cfg.channel.clone()
            };
            let corr = build_correlation_set(&ch)?;
            union_bound_tdma(ch.n_tx, &cons, &corr, &cfg.snr_grid_db)?
        }
        SystemKind::BdSm => {
            let ch = cfg.channel.clone();
            let corr = Arc::new(build_correlation_set(&ch)?);
            let mut rng = ChaCha8Rng::seed_from_u64(mix64(cfg.master_seed ^ THEORY_STREAM_TAG));
            let h = realize_channel(&corr, &ch, &mut rng);
            let pre = bd_precoder(&h, cfg.n_beams, cfg.e_tr)?;
            // Full per-user budget on the active beam: unit relative gain.
            union_bound_bd(&pre.per_user_v[0], 1.0, &cons, &corr, &cfg.snr_grid_db)?
        }
        other => return Err(SimError::NoTheoryAvailable(other.as_str().to_string())),
    };
    Ok(curve_to_records(cfg, &curve))
}
