//! Non-stationary Kronecker channel model for large antenna arrays.
//!
//! Spatial correlation at each array end is the Hadamard product of a
//! conventional exponential Toeplitz correlation `rho^|m-n|` and a cluster
//! survival mask `exp(-beta*|m-n|)`. The mask abstracts scatterer birth-death
//! along the array: adjacent antennas see almost the same clusters, antennas
//! far apart share nearly none, so correlation decays faster than the base
//! model alone predicts. `beta = 0` recovers the stationary Kronecker model,
//! large `beta` drives the channel toward i.i.d. entries.

use crate::numerics::{self, CMat, NumericsError, RMat};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("cluster evolution factor must be finite and nonnegative, got {0}")]
    InvalidBeta(f64),
    #[error("adjacent-antenna correlation must lie in [0, 1), got {0}")]
    InvalidRho(f64),
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("need at least {needed} channel samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Geometry and correlation parameters for one downlink scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    /// Transmit antennas at the base station.
    pub n_tx: usize,
    /// Receive antennas per user.
    pub n_rx: usize,
    /// Simultaneously served users.
    pub n_users: usize,
    /// Cluster evolution factor along the transmit array, per antenna step.
    pub beta_tx: f64,
    /// Cluster evolution factor along each receive array.
    pub beta_rx: f64,
    /// Adjacent-antenna base correlation at the transmitter.
    pub rho_tx: f64,
    /// Adjacent-antenna base correlation at each receiver.
    pub rho_rx: f64,
    /// Seed for the channel random stream.
    pub seed: u64,
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.n_tx < 1 || self.n_rx < 1 || self.n_users < 1 {
            return Err(ChannelError::InvalidDimension(format!(
                "n_tx={}, n_rx={}, n_users={} must all be >= 1",
                self.n_tx, self.n_rx, self.n_users
            )));
        }
        for beta in [self.beta_tx, self.beta_rx] {
            if !beta.is_finite() || beta < 0.0 {
                return Err(ChannelError::InvalidBeta(beta));
            }
        }
        for rho in [self.rho_tx, self.rho_rx] {
            if !rho.is_finite() || !(0.0..1.0).contains(&rho) {
                return Err(ChannelError::InvalidRho(rho));
            }
        }
        Ok(())
    }
}

/// Correlation structure shared by every realization of one scenario.
///
/// Immutable once built; wrap in an [`Arc`] to share across workers.
#[derive(Debug, Clone)]
pub struct CorrelationSet {
    /// Base transmit correlation, `rho_tx^|m-n|`.
    pub r_tx: CMat,
    /// Base receive correlation, `rho_rx^|m-n|`.
    pub r_rx: CMat,
    /// Transmit survival mask, `exp(-beta_tx*|m-n|)`.
    pub e_tx: RMat,
    /// Receive survival mask.
    pub e_rx: RMat,
    /// Effective transmit correlation, elementwise `e_tx * r_tx`.
    pub r_tx_eff: CMat,
    /// Effective receive correlation.
    pub r_rx_eff: CMat,
    /// Hermitian square root of `r_tx_eff`.
    pub sqrt_tx: CMat,
    /// Hermitian square root of `r_rx_eff`.
    pub sqrt_rx: CMat,
}

/// One drawn channel: a matrix per user, all sharing the correlation set.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// Per-user `n_rx x n_tx` gain matrices.
    pub per_user: Vec<CMat>,
    /// The correlation structure these draws were shaped with.
    pub correlation: Arc<CorrelationSet>,
}

impl ChannelRealization {
    /// Stacks the per-user matrices into the composite `K*n_rx x n_tx` channel.
    pub fn stacked(&self) -> CMat {
        let n_rx = self.per_user[0].nrows();
        let n_tx = self.per_user[0].ncols();
        let mut h = CMat::zeros(self.per_user.len() * n_rx, n_tx);
        for (k, hk) in self.per_user.iter().enumerate() {
            h.view_mut((k * n_rx, 0), (n_rx, n_tx)).copy_from(hk);
        }
        h
    }
}

/// Scatterer survival probabilities between antenna pairs: entry `(m, n)` is
/// `exp(-beta*|m-n|)`. Unit diagonal, symmetric, PSD for every `beta >= 0`.
pub fn survival_matrix(n: usize, beta: f64) -> Result<RMat, ChannelError> {
    if !beta.is_finite() || beta < 0.0 {
        return Err(ChannelError::InvalidBeta(beta));
    }
    Ok(RMat::from_fn(n, n, |m, k| {
        (-beta * (m as f64 - k as f64).abs()).exp()
    }))
}

/// Exponential Toeplitz base correlation: entry `(m, n)` is `rho^|m-n|`.
pub fn base_correlation_matrix(n: usize, rho: f64) -> Result<CMat, ChannelError> {
    if !rho.is_finite() || !(0.0..1.0).contains(&rho) {
        return Err(ChannelError::InvalidRho(rho));
    }
    Ok(CMat::from_fn(n, n, |m, k| {
        let lag = (m as f64 - k as f64).abs();
        Complex64::new(rho.powf(lag), 0.0)
    }))
}

fn hadamard_mask(r: &CMat, e: &RMat) -> CMat {
    CMat::from_fn(r.nrows(), r.ncols(), |i, j| r[(i, j)] * e[(i, j)])
}

/// Builds base, mask, effective, and square-root correlation matrices for
/// both array ends of `cfg`.
pub fn build_correlation_set(cfg: &ChannelConfig) -> Result<CorrelationSet, ChannelError> {
    cfg.validate()?;
    let r_tx = base_correlation_matrix(cfg.n_tx, cfg.rho_tx)?;
    let r_rx = base_correlation_matrix(cfg.n_rx, cfg.rho_rx)?;
    let e_tx = survival_matrix(cfg.n_tx, cfg.beta_tx)?;
    let e_rx = survival_matrix(cfg.n_rx, cfg.beta_rx)?;
    let r_tx_eff = hadamard_mask(&r_tx, &e_tx);
    let r_rx_eff = hadamard_mask(&r_rx, &e_rx);
    let sqrt_tx = numerics::hermitian_sqrt(&r_tx_eff)?;
    let sqrt_rx = numerics::hermitian_sqrt(&r_rx_eff)?;
    Ok(CorrelationSet {
        r_tx,
        r_rx,
        e_tx,
        e_rx,
        r_tx_eff,
        r_rx_eff,
        sqrt_tx,
        sqrt_rx,
    })
}

/// Draws one i.i.d. matrix with unit-variance circularly symmetric complex
/// Gaussian entries, filled in column-major order for stream determinism.
pub(crate) fn draw_iid_gaussian(n_rx: usize, n_tx: usize, rng: &mut impl Rng) -> CMat {
    CMat::from_fn(n_rx, n_tx, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
    })
}

/// Draws one channel realization: an independent inner Gaussian matrix per
/// user, each colored as `sqrt_rx * H_W * sqrt_tx`.
pub fn realize_channel(
    corr: &Arc<CorrelationSet>,
    cfg: &ChannelConfig,
    rng: &mut impl Rng,
) -> ChannelRealization {
    let per_user = (0..cfg.n_users)
        .map(|_| {
            let h_w = draw_iid_gaussian(cfg.n_rx, cfg.n_tx, rng);
            &corr.sqrt_rx * h_w * &corr.sqrt_tx
        })
        .collect();
    ChannelRealization {
        per_user,
        correlation: Arc::clone(corr),
    }
}

/// Empirical spatial correlation at the given antenna lags, normalized so
/// the zero-lag value is exactly one.
///
/// Averages `h[rx, tx] * conj(h[rx + rx_lag, tx + tx_lag])` over every valid
/// antenna pair, user, and sample, then divides by the same average at zero
/// lag. Needs at least 1,000 samples for a stable estimate.
pub fn estimate_spatial_correlation(
    samples: &[ChannelRealization],
    tx_lag: usize,
    rx_lag: usize,
) -> Result<Complex64, ChannelError> {
    const MIN_SAMPLES: usize = 1_000;
    if samples.len() < MIN_SAMPLES {
        return Err(ChannelError::InsufficientSamples {
            needed: MIN_SAMPLES,
            got: samples.len(),
        });
    }
    let n_rx = samples[0].per_user[0].nrows();
    let n_tx = samples[0].per_user[0].ncols();
    if tx_lag >= n_tx || rx_lag >= n_rx {
        return Err(ChannelError::InvalidDimension(format!(
            "lags ({tx_lag}, {rx_lag}) exceed array sizes ({n_tx}, {n_rx})"
        )));
    }
    let mut num = Complex64::new(0.0, 0.0);
    let mut num_count = 0u64;
    let mut den = 0.0;
    let mut den_count = 0u64;
    for s in samples {
        for h in &s.per_user {
            for tx in 0..n_tx - tx_lag {
                for rx in 0..n_rx - rx_lag {
                    num += h[(rx, tx)] * h[(rx + rx_lag, tx + tx_lag)].conj();
                    num_count += 1;
                }
            }
            for tx in 0..n_tx {
                for rx in 0..n_rx {
                    den += h[(rx, tx)].norm_sqr();
                    den_count += 1;
                }
            }
        }
    }
    Ok((num / num_count as f64) / (den / den_count as f64))
}

/// Expected number of the first antenna's initial scatterers still observed
/// by the antenna at `antenna_index` (1-based): `initial * exp(-beta*(i-1))`.
pub fn expected_shared_scatterers(antenna_index: usize, beta: f64, initial_count: f64) -> f64 {
    assert!(antenna_index >= 1, "antenna indices are 1-based");
    assert!(initial_count >= 0.0);
    initial_count * (-beta * (antenna_index as f64 - 1.0)).exp()
}
