//! Union-bound average BER for SM systems over correlated Rayleigh fading.
//!
//! The pairwise error probability between two index-and-symbol hypotheses is
//! channel-averaged in closed MGF form. Writing the transmit-side difference
//! vector `e`, the detector's decision statistic depends on the channel only
//! through `|H e|^2`, whose MGF under the Kronecker model factors over the
//! receive-correlation eigenvalues `lambda_i` with a single transmit-side
//! quadratic form `mu = e^H R e`:
//!
//! `PEP(gamma) = (1/pi) * int_0^{pi/2} prod_i (1 + gamma*lambda_i*mu / (4 sin^2 theta))^-1 dtheta`
//!
//! which equals `E[Q(sqrt(gamma*|He|^2/2))]` exactly; the constant is pinned
//! by a Monte Carlo oracle in the tests rather than trusted on convention.
//! The average-BER bound weights each ordered hypothesis pair by its bit
//! distance under the exact modem labeling and sums PEPs over the alphabet.

use crate::channel::CorrelationSet;
use crate::modem::{self, Constellation};
use crate::numerics::{self, CMat, CVec, NumericsError, DEFAULT_QUAD_NODES};
use std::collections::BTreeMap;
use thiserror::Error;

/// Largest index-symbol alphabet the default bound entry points enumerate;
/// quadratic pair growth makes bigger alphabets a deliberate opt-in.
pub const PAIR_ENUMERATION_BUDGET: usize = 4096;

#[derive(Debug, Error, PartialEq)]
pub enum TheoryError {
    #[error("alphabet size {alphabet} exceeds the pair-enumeration budget {budget}")]
    BudgetExceeded { alphabet: usize, budget: usize },
    #[error("MGF argument {0} lies outside the convergence region s <= 0")]
    DivergentRegion(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Everything needed to average one pairwise error probability over the
/// channel ensemble.
#[derive(Debug, Clone)]
pub struct PepContext {
    /// Transmit-side hypothesis difference, nonzero.
    pub error_vector: CVec,
    /// Eigenvalues of the effective receive correlation, clamped at zero.
    pub lambda_rx: Vec<f64>,
    /// Transmit-side quadratic form `e^H R e`, clamped at zero.
    pub mu: f64,
    /// Linear SNR.
    pub gamma: f64,
}

impl PepContext {
    /// Builds a context, deriving `mu` from the error vector and the
    /// effective transmit correlation `r_tx`.
    pub fn new(
        error_vector: CVec,
        r_tx: &CMat,
        lambda_rx: &[f64],
        gamma: f64,
    ) -> Result<Self, TheoryError> {
        if r_tx.nrows() != r_tx.ncols() || r_tx.nrows() != error_vector.len() {
            return Err(TheoryError::DimensionMismatch(format!(
                "correlation is {}x{}, error vector has {} entries",
                r_tx.nrows(),
                r_tx.ncols(),
                error_vector.len()
            )));
        }
        assert!(error_vector.norm_squared() > 0.0, "error vector must be nonzero");
        assert!(gamma >= 0.0, "SNR must be nonnegative");
        let mu = error_vector.dotc(&(r_tx * &error_vector)).re.max(0.0);
        Ok(Self {
            error_vector,
            lambda_rx: lambda_rx.iter().map(|&l| l.max(0.0)).collect(),
            mu,
            gamma,
        })
    }
}

/// Eigenvalues of a Hermitian correlation matrix, descending, clamped at
/// zero. The receive-side input to every PEP in this module.
pub fn rx_eigenvalues(r_rx_eff: &CMat) -> Vec<f64> {
    let eig = r_rx_eff.clone().symmetric_eigen();
    let mut v: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    v
}

/// MGF of the channel quadratic form `|H e|^2` at argument `s`:
/// `prod_i (1 - s*lambda_i*mu)^-1`, convergent for `s <= 0`.
pub fn mgf_quadratic_form(s: f64, ctx: &PepContext) -> Result<f64, TheoryError> {
    if s > 0.0 {
        return Err(TheoryError::DivergentRegion(s));
    }
    let mut prod = 1.0;
    for &l in &ctx.lambda_rx {
        prod /= 1.0 - s * l * ctx.mu;
    }
    Ok(prod)
}

/// Channel-averaged pairwise error probability, in `(0, 0.5]`.
pub fn average_pep(ctx: &PepContext) -> Result<f64, TheoryError> {
    average_pep_with_nodes(ctx, DEFAULT_QUAD_NODES)
}

/// [`average_pep`] with an explicit quadrature node count.
pub fn average_pep_with_nodes(ctx: &PepContext, nodes: usize) -> Result<f64, TheoryError> {
    let gamma = ctx.gamma;
    let lambda = &ctx.lambda_rx;
    let mu = ctx.mu;
    let v = numerics::quad_half_pi(
        |theta| {
            let load = gamma * mu / (4.0 * theta.sin().powi(2));
            let mut prod = 1.0;
            for &l in lambda {
                prod /= 1.0 + load * l;
            }
            prod
        },
        nodes,
    )?;
    Ok(v)
}

/// A union-bound average-BER curve over an SNR grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryCurve {
    /// Which system family the bound describes, `tdma_sm` or `bd_sm`.
    pub system: &'static str,
    /// Spatial alphabet size the mapping actually uses.
    pub n_index: usize,
    /// Constellation order.
    pub mod_order: usize,
    /// Grid in dB.
    pub snr_grid_db: Vec<f64>,
    /// Bound per grid point, clipped at 0.5.
    pub aber: Vec<f64>,
}

/// Effective transmit correlation seen through a precoder: `v^H r v`,
/// re-symmetrized so its diagonal is exactly real.
pub fn effective_tx_correlation(r_tx_eff: &CMat, v: &CMat) -> Result<CMat, TheoryError> {
    if r_tx_eff.nrows() != r_tx_eff.ncols() || v.nrows() != r_tx_eff.nrows() {
        return Err(TheoryError::DimensionMismatch(format!(
            "correlation is {}x{}, precoder has {} rows",
            r_tx_eff.nrows(),
            r_tx_eff.ncols(),
            v.nrows()
        )));
    }
    let b = v.adjoint() * r_tx_eff * v;
    Ok((&b + b.adjoint()) * num_complex::Complex64::new(0.5, 0.0))
}

/// Bit-distance spectrum of the index-symbol alphabet: maps each distinct
/// `mu` (keyed by its bit pattern; all values nonnegative, so bit order is
/// numeric order) to the summed Hamming distance of the ordered pairs that
/// produce it.
///
/// For hypotheses `a = (p, s)` and `b = (q, s')` the quadratic form reduces
/// to `|s|^2 R_pp + |s'|^2 R_qq - 2 Re(conj(s) s' R_pq)`, which also covers
/// `p == q`. Grouping by `mu` costs one pass over the pair set and turns the
/// bound into one quadrature per distinct value, in deterministic order.
fn pair_spectrum(n_index: usize, constellation: &Constellation, r: &CMat) -> BTreeMap<u64, u64> {
    let m = constellation.order();
    let sym_bits = constellation.bits_per_symbol();
    let mut spectrum = BTreeMap::new();
    for p in 0..n_index {
        for l in 0..m as u32 {
            let word_a = modem::sm_demap_word(p + 1, l, n_index, sym_bits).unwrap();
            let s = constellation.point(l);
            for q in 0..n_index {
                for k in 0..m as u32 {
                    if p == q && l == k {
                        continue;
                    }
                    let word_b = modem::sm_demap_word(q + 1, k, n_index, sym_bits).unwrap();
                    let s2 = constellation.point(k);
                    let mu = (s.norm_sqr() * r[(p, p)].re + s2.norm_sqr() * r[(q, q)].re
                        - 2.0 * (s.conj() * s2 * r[(p, q)]).re)
                        .max(0.0);
                    let nh = u64::from((word_a ^ word_b).count_ones());
                    *spectrum.entry(mu.to_bits()).or_insert(0) += nh;
                }
            }
        }
    }
    spectrum
}

/// Sums the spectrum's PEPs at one effective SNR and normalizes to an
/// average-BER bound, clipping at the guessing limit.
fn bound_at(
    spectrum: &BTreeMap<u64, u64>,
    lambda_rx: &[f64],
    alphabet: usize,
    m_bits: u32,
    gamma_eff: f64,
    nodes: usize,
) -> Result<f64, TheoryError> {
    let mut acc = 0.0;
    for (&mu_bits, &weight) in spectrum {
        let mu = f64::from_bits(mu_bits);
        let pep = numerics::quad_half_pi(
            |theta| {
                let load = gamma_eff * mu / (4.0 * theta.sin().powi(2));
                let mut prod = 1.0;
                for &l in lambda_rx {
                    prod /= 1.0 + load * l;
                }
                prod
            },
            nodes,
        )?;
        acc += weight as f64 * pep;
    }
    Ok((acc / (alphabet as f64 * f64::from(m_bits))).min(0.5))
}

/// Union-bound average BER for SM over the transmit antennas themselves.
pub fn union_bound_tdma(
    n_tx: usize,
    constellation: &Constellation,
    corr: &CorrelationSet,
    snr_grid_db: &[f64],
) -> Result<TheoryCurve, TheoryError> {
    union_bound_tdma_with(
        n_tx,
        constellation,
        corr,
        snr_grid_db,
        PAIR_ENUMERATION_BUDGET,
        DEFAULT_QUAD_NODES,
    )
}

/// [`union_bound_tdma`] with explicit enumeration budget and node count.
pub fn union_bound_tdma_with(
    n_tx: usize,
    constellation: &Constellation,
    corr: &CorrelationSet,
    snr_grid_db: &[f64],
    budget: usize,
    nodes: usize,
) -> Result<TheoryCurve, TheoryError> {
    if corr.r_tx_eff.nrows() != n_tx {
        return Err(TheoryError::DimensionMismatch(format!(
            "correlation built for {} antennas, bound requested for {n_tx}",
            corr.r_tx_eff.nrows()
        )));
    }
    let alphabet = n_tx * constellation.order();
    if alphabet > budget {
        return Err(TheoryError::BudgetExceeded { alphabet, budget });
    }
    let m_bits = modem::frame_bits(n_tx, constellation);
    let spectrum = pair_spectrum(n_tx, constellation, &corr.r_tx_eff);
    let lambda = rx_eigenvalues(&corr.r_rx_eff);
    let mut aber = Vec::with_capacity(snr_grid_db.len());
    for &db in snr_grid_db {
        let gamma = 10f64.powf(db / 10.0);
        aber.push(bound_at(&spectrum, &lambda, alphabet, m_bits, gamma, nodes)?);
    }
    Ok(TheoryCurve {
        system: "tdma_sm",
        n_index: n_tx,
        mod_order: constellation.order(),
        snr_grid_db: snr_grid_db.to_vec(),
        aber,
    })
}

/// Union-bound average BER for SM over precoded beams.
///
/// `v` is one user's beam matrix; the mapping uses its first
/// `2^floor(log2(ncols))` columns, matching the simulator. `beam_gain` is
/// the amplitude the system puts on the active beam relative to a unit
/// power budget, so the effective SNR per grid point is `beam_gain^2 *
/// gamma`.
pub fn union_bound_bd(
    v: &CMat,
    beam_gain: f64,
    constellation: &Constellation,
    corr: &CorrelationSet,
    snr_grid_db: &[f64],
) -> Result<TheoryCurve, TheoryError> {
    union_bound_bd_with(
        v,
        beam_gain,
        constellation,
        corr,
        snr_grid_db,
        PAIR_ENUMERATION_BUDGET,
        DEFAULT_QUAD_NODES,
    )
}

/// [`union_bound_bd`] with explicit enumeration budget and node count.
pub fn union_bound_bd_with(
    v: &CMat,
    beam_gain: f64,
    constellation: &Constellation,
    corr: &CorrelationSet,
    snr_grid_db: &[f64],
    budget: usize,
    nodes: usize,
) -> Result<TheoryCurve, TheoryError> {
    assert!(beam_gain > 0.0, "beam gain must be positive");
    assert!(v.ncols() >= 2, "need at least two beams for index bits");
    let n_pow2 = 1usize << v.ncols().ilog2();
    let used = v.columns(0, n_pow2).into_owned();
    let alphabet = n_pow2 * constellation.order();
    if alphabet > budget {
        return Err(TheoryError::BudgetExceeded { alphabet, budget });
    }
    let r_eff = effective_tx_correlation(&corr.r_tx_eff, &used)?;
    let m_bits = modem::frame_bits(n_pow2, constellation);
    let spectrum = pair_spectrum(n_pow2, constellation, &r_eff);
    let lambda = rx_eigenvalues(&corr.r_rx_eff);
    let mut aber = Vec::with_capacity(snr_grid_db.len());
    for &db in snr_grid_db {
        let gamma_eff = beam_gain * beam_gain * 10f64.powf(db / 10.0);
        aber.push(bound_at(&spectrum, &lambda, alphabet, m_bits, gamma_eff, nodes)?);
    }
    Ok(TheoryCurve {
        system: "bd_sm",
        n_index: n_pow2,
        mod_order: constellation.order(),
        snr_grid_db: snr_grid_db.to_vec(),
        aber,
    })
}
