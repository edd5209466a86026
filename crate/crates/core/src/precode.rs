//! Downlink precoders: block diagonalization (BD) for interference-free
//! multi-user beams, and pseudo-inverse channel inversion as a baseline.
//!
//! BD gives each user a set of transmit directions lying in the null space
//! of every other user's channel, so inter-user interference vanishes up to
//! numerical rank decisions. The per-user beam budget is
//! `j_k = n_tx - (n_users - 1) * n_rx`; a system picks `n_beams <= j_k` of
//! them and spends its power budget through a scalar amplitude factor.

use crate::channel::{self, ChannelRealization, CorrelationSet};
use crate::numerics::{self, CMat, NumericsError};
use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PrecodeError {
    #[error("interference matrix is undefined for a single user")]
    SingleUser,
    #[error("dimension violation: {0}")]
    DimensionViolation(String),
    #[error("beam count {requested} outside the valid range 2..={max}")]
    BeamCountViolation { requested: usize, max: usize },
    #[error("cannot scale a zero precoding matrix")]
    ZeroMatrix,
    #[error("need at least {needed} Monte Carlo samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Largest number of interference-free beams available per user.
pub fn max_beam_count(n_tx: usize, n_rx: usize, n_users: usize) -> usize {
    n_tx.saturating_sub((n_users - 1) * n_rx)
}

/// Block-diagonalization precoder for every user of one channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct BdPrecoder {
    /// Per-user beam matrices, `n_tx x n_beams` with orthonormal columns.
    pub per_user_v: Vec<CMat>,
    /// Per-user amplitude scale spreading `e_tr` across the beam matrix.
    pub rho: Vec<f64>,
    /// Per-user effective channels `h_k * v_k`, `n_rx x n_beams`.
    pub effective: Vec<CMat>,
    /// Beams per user.
    pub n_beams: usize,
    /// Per-user transmit power budget.
    pub e_tr: f64,
}

/// Stacks every channel except user `k`'s (0-based), ascending user order.
pub fn interference_matrix(h_all: &ChannelRealization, k: usize) -> Result<CMat, PrecodeError> {
    let n_users = h_all.per_user.len();
    if n_users < 2 {
        return Err(PrecodeError::SingleUser);
    }
    assert!(k < n_users, "user index {k} out of range");
    let n_rx = h_all.per_user[0].nrows();
    let n_tx = h_all.per_user[0].ncols();
    let mut stack = CMat::zeros((n_users - 1) * n_rx, n_tx);
    let mut row = 0;
    for (j, h) in h_all.per_user.iter().enumerate() {
        if j == k {
            continue;
        }
        stack.view_mut((row, 0), (n_rx, n_tx)).copy_from(h);
        row += n_rx;
    }
    Ok(stack)
}

/// Extracts an orthonormal null-space basis of `a` with `n` columns.
///
/// Works through the eigendecomposition of the Gram matrix `a^H a`: the
/// eigenvectors of the `j_k` smallest eigenvalues span the null space.
/// Eigenpairs are ordered by descending eigenvalue (ties by original
/// position) and each kept column is rotated so its first significant entry
/// is real and positive, making the basis deterministic.
fn null_space_basis(a: &CMat, rank: usize, n: usize) -> CMat {
    let n_tx = a.ncols();
    let gram = a.adjoint() * a;
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..n_tx).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap()
            .then(i.cmp(&j))
    });
    let mut v = CMat::zeros(n_tx, n);
    for (c, &src) in order[rank..rank + n].iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let mut rot = Complex64::new(1.0, 0.0);
        for e in col.iter() {
            let mag = e.norm();
            if mag > 1e-8 {
                rot = e.conj() / mag;
                break;
            }
        }
        for r in 0..n_tx {
            v[(r, c)] = col[r] * rot;
        }
    }
    v
}

/// Builds the BD precoder: per-user null-space beams, effective channels,
/// and power scales.
///
/// Requires `n_tx > (n_users - 1) * n_rx` so every user keeps at least one
/// interference-free direction, and `2 <= n_beams <= j_k`. A single-user
/// call degenerates to the first `n_beams` identity columns (nothing to
/// null).
pub fn bd_precoder(
    h_all: &ChannelRealization,
    n_beams: usize,
    e_tr: f64,
) -> Result<BdPrecoder, PrecodeError> {
    let n_users = h_all.per_user.len();
    let n_rx = h_all.per_user[0].nrows();
    let n_tx = h_all.per_user[0].ncols();
    let interference_rank = (n_users - 1) * n_rx;
    if n_tx <= interference_rank {
        return Err(PrecodeError::DimensionViolation(format!(
            "n_tx={n_tx} must exceed the interference rank {interference_rank}"
        )));
    }
    let j_k = n_tx - interference_rank;
    if n_beams < 2 || n_beams > j_k {
        return Err(PrecodeError::BeamCountViolation {
            requested: n_beams,
            max: j_k,
        });
    }
    let mut per_user_v = Vec::with_capacity(n_users);
    let mut rho = Vec::with_capacity(n_users);
    let mut effective = Vec::with_capacity(n_users);
    for k in 0..n_users {
        let v = if n_users == 1 {
            CMat::identity(n_tx, n_beams)
        } else {
            let a = interference_matrix(h_all, k)?;
            null_space_basis(&a, interference_rank, n_beams)
        };
        rho.push(power_scaling(&v, e_tr)?);
        effective.push(&h_all.per_user[k] * &v);
        per_user_v.push(v);
    }
    Ok(BdPrecoder {
        per_user_v,
        rho,
        effective,
        n_beams,
        e_tr,
    })
}

/// Amplitude scale that makes the precoding matrix radiate `e_tr` total:
/// `sqrt(e_tr / trace(v v^H))`.
pub fn power_scaling(v: &CMat, e_tr: f64) -> Result<f64, PrecodeError> {
    let energy = v.norm_squared();
    if !(energy > 0.0) {
        return Err(PrecodeError::ZeroMatrix);
    }
    Ok((e_tr / energy).sqrt())
}

/// Pseudo-inverse precoder for single-antenna users: returns the scaled
/// matrix `w` and the common gain `rho` such that `h_stack * w = rho * I`.
///
/// The scale spends `e_tr_total` across all users jointly, which is the
/// standard channel-inversion convention; receivers are assumed to know the
/// common gain.
pub fn channel_inversion_precoder(
    h_stack: &CMat,
    e_tr_total: f64,
) -> Result<(CMat, f64), PrecodeError> {
    let w = numerics::pseudo_inverse(h_stack)?;
    let rho = power_scaling(&w, e_tr_total)?;
    Ok((w * Complex64::new(rho, 0.0), rho))
}

/// Monte Carlo cross-correlation between two of one user's beams, over
/// fresh channel draws with the precoder held fixed, normalized by the
/// geometric mean of the two beam energies. Equal beams give exactly one.
pub fn beam_ccf_estimate(
    corr: &CorrelationSet,
    precoder: &BdPrecoder,
    user: usize,
    beam_i: usize,
    beam_k: usize,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<Complex64, PrecodeError> {
    const MIN_SAMPLES: usize = 10_000;
    if samples < MIN_SAMPLES {
        return Err(PrecodeError::InsufficientSamples {
            needed: MIN_SAMPLES,
            got: samples,
        });
    }
    if beam_i == beam_k {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let v = &precoder.per_user_v[user];
    let n_rx = corr.sqrt_rx.nrows();
    let n_tx = corr.sqrt_tx.nrows();
    let vi = v.column(beam_i);
    let vk = v.column(beam_k);
    let mut num = Complex64::new(0.0, 0.0);
    let mut energy_i = 0.0;
    let mut energy_k = 0.0;
    for _ in 0..samples {
        let h = &corr.sqrt_rx * channel::draw_iid_gaussian(n_rx, n_tx, rng) * &corr.sqrt_tx;
        let ai = &h * vi;
        let ak = &h * vk;
        num += ai.dotc(&ak);
        energy_i += ai.norm_squared();
        energy_k += ak.norm_squared();
    }
    Ok(num / (energy_i * energy_k).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_correlation_set, realize_channel, ChannelConfig};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn draw(
        n_tx: usize,
        n_rx: usize,
        n_users: usize,
        beta: f64,
        rho: f64,
        seed: u64,
    ) -> (Arc<crate::channel::CorrelationSet>, ChannelRealization) {
        let cfg = ChannelConfig {
            n_tx,
            n_rx,
            n_users,
            beta_tx: beta,
            beta_rx: beta,
            rho_tx: rho,
            rho_rx: rho,
            seed,
        };
        let corr = Arc::new(build_correlation_set(&cfg).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = realize_channel(&corr, &cfg, &mut rng);
        (corr, h)
    }

    #[test]
    fn two_user_interference_is_the_other_channel() {
        let (_, h) = draw(4, 2, 2, 0.3, 0.5, 1);
        let a = interference_matrix(&h, 0).unwrap();
        assert_eq!(a, h.per_user[1]);
    }

    #[test]
    fn interference_stack_skips_only_the_target_user() {
        let (_, h) = draw(8, 2, 4, 0.3, 0.5, 2);
        let a = interference_matrix(&h, 1).unwrap();
        assert_eq!(a.nrows(), 6);
        assert_eq!(a.rows(0, 2), h.per_user[0].rows(0, 2));
        assert_eq!(a.rows(2, 2), h.per_user[2].rows(0, 2));
        assert_eq!(a.rows(4, 2), h.per_user[3].rows(0, 2));
        // No row of the target user's channel leaks into the stack.
        for r in 0..a.nrows() {
            for tr in 0..2 {
                assert_ne!(a.row(r), h.per_user[1].row(tr));
            }
        }
    }

    #[test]
    fn single_user_interference_is_undefined() {
        let (_, h) = draw(4, 2, 1, 0.3, 0.5, 3);
        assert_eq!(interference_matrix(&h, 0), Err(PrecodeError::SingleUser));
    }

    #[test]
    fn beams_null_every_other_users_channel() {
        for (n_tx, n_rx, k, n) in [(8, 2, 2, 2), (16, 2, 4, 4)] {
            for seed in 0..100 {
                let (_, h) = draw(n_tx, n_rx, k, 0.3, 0.5, 1000 + seed);
                let p = bd_precoder(&h, n, 1.0).unwrap();
                for target in 0..k {
                    for j in 0..k {
                        if j == target {
                            continue;
                        }
                        let leak = (&h.per_user[j] * &p.per_user_v[target]).norm();
                        let scale = h.per_user[j].norm();
                        assert!(
                            leak < 1e-9 * scale,
                            "seed {seed} users ({target},{j}): leak {leak:e}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn beam_columns_are_orthonormal() {
        let (_, h) = draw(16, 2, 4, 1.0, 0.5, 4);
        let p = bd_precoder(&h, 8, 1.0).unwrap();
        for v in &p.per_user_v {
            let gram = v.adjoint() * v;
            let eye = CMat::identity(8, 8);
            assert!((gram - eye).norm() < 1e-10);
        }
    }

    #[test]
    fn joint_response_is_block_diagonal() {
        let (_, h) = draw(16, 2, 4, 0.3, 0.5, 5);
        let p = bd_precoder(&h, 4, 1.0).unwrap();
        for j in 0..4 {
            for k in 0..4 {
                let block = &h.per_user[j] * &p.per_user_v[k] * Complex64::new(p.rho[k], 0.0);
                if j == k {
                    assert!(block.norm() > 1e-3);
                } else {
                    assert!(block.norm() < 1e-9 * h.per_user[j].norm());
                }
            }
        }
    }

    #[test]
    fn unit_budget_scale_is_inverse_sqrt_beams() {
        let (_, h) = draw(64, 2, 4, 0.3, 0.5, 6);
        let p = bd_precoder(&h, 32, 1.0).unwrap();
        for &r in &p.rho {
            assert!((r - 1.0 / 32.0_f64.sqrt()).abs() < 1e-12);
            assert_relative_eq!(r, 0.176776695296637, epsilon = 1e-12);
        }
    }

    #[test]
    fn scaling_is_inverse_homogeneous() {
        let (_, h) = draw(8, 2, 2, 0.3, 0.5, 7);
        let p = bd_precoder(&h, 3, 1.0).unwrap();
        let v = &p.per_user_v[0];
        let rho1 = power_scaling(v, 1.0).unwrap();
        let rho2 = power_scaling(&(v * Complex64::new(2.0, 0.0)), 1.0).unwrap();
        assert_relative_eq!(rho2, rho1 / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn zero_matrix_cannot_be_scaled() {
        let z = CMat::zeros(4, 2);
        assert_eq!(power_scaling(&z, 1.0), Err(PrecodeError::ZeroMatrix));
    }

    #[test]
    fn beam_budget_matches_array_geometry() {
        assert_eq!(max_beam_count(64, 2, 4), 58);
        assert_eq!(max_beam_count(64, 2, 16), 34);
        let (_, h) = draw(64, 2, 16, 0.3, 0.5, 8);
        assert_eq!(
            bd_precoder(&h, 58, 1.0),
            Err(PrecodeError::BeamCountViolation {
                requested: 58,
                max: 34
            })
        );
        assert_eq!(
            bd_precoder(&h, 1, 1.0),
            Err(PrecodeError::BeamCountViolation {
                requested: 1,
                max: 34
            })
        );
    }

    #[test]
    fn saturated_array_is_rejected() {
        let (_, h) = draw(4, 2, 3, 0.3, 0.5, 9);
        assert!(matches!(
            bd_precoder(&h, 2, 1.0),
            Err(PrecodeError::DimensionViolation(_))
        ));
    }

    #[test]
    fn single_user_precoder_degenerates_to_identity_columns() {
        let (_, h) = draw(8, 2, 1, 0.3, 0.5, 10);
        let p = bd_precoder(&h, 4, 1.0).unwrap();
        assert_eq!(p.per_user_v[0], CMat::identity(8, 4));
        assert_eq!(p.effective[0], h.per_user[0].columns(0, 4).into_owned());
    }

    #[test]
    fn precoder_is_deterministic_per_channel() {
        let (_, h) = draw(16, 2, 4, 1.0, 0.5, 11);
        let a = bd_precoder(&h, 6, 1.0).unwrap();
        let b = bd_precoder(&h, 6, 1.0).unwrap();
        for (va, vb) in a.per_user_v.iter().zip(&b.per_user_v) {
            assert_eq!(va, vb);
        }
    }

    #[test]
    fn phase_convention_pins_column_signs() {
        let (_, h) = draw(8, 2, 2, 0.3, 0.5, 12);
        let p = bd_precoder(&h, 3, 1.0).unwrap();
        for v in &p.per_user_v {
            for c in 0..3 {
                let col = v.column(c).into_owned();
                let lead = col.iter().find(|e| e.norm() > 1e-8).unwrap();
                assert!(lead.im.abs() < 1e-10 && lead.re > 0.0);
            }
        }
    }

    #[test]
    fn identity_channel_inverts_to_identity() {
        let h = CMat::identity(4, 4);
        let (w, rho) = channel_inversion_precoder(&h, 4.0).unwrap();
        assert!((w - CMat::identity(4, 4)).norm() < 1e-12);
        assert_relative_eq!(rho, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn wide_random_inversion_gives_scaled_identity_response() {
        let (_, h) = draw(64, 1, 4, 0.3, 0.5, 13);
        let stack = h.stacked();
        let (w, rho) = channel_inversion_precoder(&stack, 4.0).unwrap();
        let response = &stack * &w;
        let target = CMat::identity(4, 4) * Complex64::new(rho, 0.0);
        assert!((response - target).norm() < 1e-9 * rho);
    }

    #[test]
    fn inversion_scale_follows_power_budget() {
        let (_, h) = draw(16, 1, 4, 0.3, 0.5, 14);
        let stack = h.stacked();
        let (_, rho1) = channel_inversion_precoder(&stack, 1.0).unwrap();
        let (_, rho2) = channel_inversion_precoder(&stack, 2.0).unwrap();
        assert_relative_eq!(rho2, rho1 * 2.0_f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn distinct_beams_decorrelate_under_identity_tx() {
        let (corr, h) = draw(8, 2, 2, 0.7, 0.0, 15);
        let p = bd_precoder(&h, 3, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let c = beam_ccf_estimate(&corr, &p, 0, 0, 2, 100_000, &mut rng).unwrap();
        assert!(c.norm() < 0.02, "ccf {}", c.norm());
    }

    #[test]
    fn same_beam_ccf_is_unity() {
        let (corr, h) = draw(8, 2, 2, 0.3, 0.5, 16);
        let p = bd_precoder(&h, 3, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        let c = beam_ccf_estimate(&corr, &p, 0, 1, 1, 10_000, &mut rng).unwrap();
        assert_eq!(c, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn ccf_estimate_needs_enough_samples() {
        let (corr, h) = draw(8, 2, 2, 0.3, 0.5, 17);
        let p = bd_precoder(&h, 3, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(79);
        assert_eq!(
            beam_ccf_estimate(&corr, &p, 0, 0, 1, 9_999, &mut rng),
            Err(PrecodeError::InsufficientSamples {
                needed: 10_000,
                got: 9_999
            })
        );
    }
}
