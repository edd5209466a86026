//! Exhaustive maximum-likelihood detectors and the receiver complexity model.
//!
//! Every detector scans its full hypothesis set and minimizes the squared
//! Euclidean distance to the received vector. Ties are broken toward the
//! lowest spatial index, then the lowest symbol label, so degenerate inputs
//! decode reproducibly.

use crate::modem::Constellation;
use crate::numerics::{CMat, CVec};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DetectError {
    #[error("received vector has {got} entries, candidates have {expected} rows")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{layers} layers exceed {n_rx} receive antennas")]
    LayerExcess { layers: usize, n_rx: usize },
}

/// Outcome of one index-and-symbol ML decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionResult {
    /// Estimated spatial index, 1-based.
    pub index: usize,
    /// Estimated symbol label.
    pub symbol_label: u32,
    /// Minimal squared distance over the hypothesis set.
    pub metric: f64,
}

/// Joint ML decision over (spatial index, constellation symbol).
///
/// Each column of `candidates` is one spatial hypothesis' channel response;
/// the detector minimizes `|y - column_p * x|^2` over every pair. The inner
/// scan expands the distance so each column needs one inner product with `y`
/// regardless of constellation size.
pub fn ml_detect_sm(
    y: &CVec,
    candidates: &CMat,
    constellation: &Constellation,
) -> Result<DetectionResult, DetectError> {
    assert!(candidates.ncols() >= 2, "need at least two spatial hypotheses");
    if y.len() != candidates.nrows() {
        return Err(DetectError::DimensionMismatch {
            expected: candidates.nrows(),
            got: y.len(),
        });
    }
    let y_energy = y.norm_squared();
    let mut best = (0usize, 0u32, f64::INFINITY);
    for p in 0..candidates.ncols() {
        let col = candidates.column(p);
        let col_energy = col.norm_squared();
        // s_p = column^H y; per symbol x the distance expands to
        // |y|^2 + |x|^2 |col|^2 - 2 Re(conj(x) s_p).
        let s_p = col.dotc(y);
        for (l, &x) in constellation.points().iter().enumerate() {
            let partial = x.norm_sqr() * col_energy - 2.0 * (x.conj() * s_p).re;
            if partial < best.2 {
                best = (p, l as u32, partial);
            }
        }
    }
    Ok(DetectionResult {
        index: best.0 + 1,
        symbol_label: best.1,
        metric: (best.2 + y_energy).max(0.0),
    })
}

/// Joint ML decision over all `M^L` symbol vectors of an `L`-layer
/// transmission through `h_eff`. Returns the per-layer labels, first layer
/// first; ties resolve to the lexicographically smallest label vector.
pub fn ml_detect_vblast(
    y: &CVec,
    h_eff: &CMat,
    constellation: &Constellation,
) -> Result<Vec<u32>, DetectError> {
    let layers = h_eff.ncols();
    if layers > y.len() {
        return Err(DetectError::LayerExcess {
            layers,
            n_rx: y.len(),
        });
    }
    if y.len() != h_eff.nrows() {
        return Err(DetectError::DimensionMismatch {
            expected: h_eff.nrows(),
            got: y.len(),
        });
    }
    let m = constellation.order() as u64;
    let total = m.pow(layers as u32);
    let mut labels = vec![0u32; layers];
    let mut best_labels = vec![0u32; layers];
    let mut best_metric = f64::INFINITY;
    let mut residual = CVec::zeros(y.len());
    for cand in 0..total {
        // Digit expansion with the first layer in the most significant
        // position keeps the scan in lexicographic label order.
        let mut rest = cand;
        for j in (0..layers).rev() {
            labels[j] = (rest % m) as u32;
            rest /= m;
        }
        residual.copy_from(y);
        for (j, &l) in labels.iter().enumerate() {
            let x = constellation.point(l);
            residual.axpy(-x, &h_eff.column(j).into_owned(), Complex64::new(1.0, 0.0));
        }
        let metric = residual.norm_squared();
        if metric < best_metric {
            best_metric = metric;
            best_labels.copy_from_slice(&labels);
        }
    }
    Ok(best_labels)
}

/// ML decision for a scalar channel `y = gain * x + n`: the nearest scaled
/// constellation point, lowest label on ties.
pub fn ml_detect_scalar(
    y: Complex64,
    gain: Complex64,
    constellation: &Constellation,
) -> (u32, f64) {
    let mut best = (0u32, f64::INFINITY);
    for (l, &x) in constellation.points().iter().enumerate() {
        let metric = (y - gain * x).norm_sqr();
        if metric < best.1 {
            best = (l as u32, metric);
        }
    }
    best
}

/// Real-operation count of the SM-over-beams ML receiver:
/// `2*n_t*n_r*j_k + 2*n*n_r^2*2^(n_r*log2(m)) + 2*n*m*n_r + n*m`.
///
/// Reported as-is next to BER results so performance can be weighed against
/// receiver cost; `m_order` must be a power of two.
pub fn ml_complexity(n_t: u64, n_r: u64, j_k: u64, n_beams: u64, m_order: u64) -> u64 {
    assert!(m_order.is_power_of_two(), "modulation order must be a power of two");
    let exp = n_r * u64::from(m_order.ilog2());
    2 * n_t * n_r * j_k
        + 2 * n_beams * n_r * n_r * (1u64 << exp)
        + 2 * n_beams * m_order * n_r
        + n_beams * m_order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::build_constellation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn random_cvec(n: usize, rng: &mut ChaCha8Rng) -> CVec {
        CVec::from_fn(n, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
        })
    }

    fn random_cmat(r: usize, c: usize, rng: &mut ChaCha8Rng) -> CMat {
        CMat::from_fn(r, c, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
        })
    }

    /// Reference scan computing every residual norm directly.
    fn brute_force_sm(y: &CVec, candidates: &CMat, cons: &Constellation) -> (usize, u32, f64) {
        let mut best = (0usize, 0u32, f64::INFINITY);
        for p in 0..candidates.ncols() {
            for l in 0..cons.order() as u32 {
                let diff = y - candidates.column(p).into_owned() * cons.point(l);
                let metric = diff.norm_squared();
                if metric < best.2 {
                    best = (p + 1, l, metric);
                }
            }
        }
        best
    }

    #[test]
    fn matches_direct_residual_scan() {
        let qpsk = build_constellation(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let h = random_cmat(3, 4, &mut rng);
            let y = random_cvec(3, &mut rng);
            let got = ml_detect_sm(&y, &h, &qpsk).unwrap();
            let want = brute_force_sm(&y, &h, &qpsk);
            assert_eq!((got.index, got.symbol_label), (want.0, want.1));
            assert!((got.metric - want.2).abs() < 1e-9 * want.2.max(1.0));
        }
    }

    #[test]
    fn noiseless_frames_decode_exactly() {
        let qpsk = build_constellation(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = random_cmat(4, 4, &mut rng);
        for trial in 0..10_000 {
            let p = rng.random_range(0..4usize);
            let l = rng.random_range(0..4u32);
            let y = h.column(p).into_owned() * qpsk.point(l);
            let got = ml_detect_sm(&y, &h, &qpsk).unwrap();
            assert_eq!((got.index, got.symbol_label), (p + 1, l), "trial {trial}");
            // The expanded metric cancels three O(1) terms, so "zero" means
            // a few ulps of the operand scale.
            assert!(got.metric < 1e-12);
        }
    }

    #[test]
    fn all_way_tie_resolves_to_first_hypothesis() {
        let bpsk = build_constellation(2).unwrap();
        let h = CMat::identity(2, 2);
        let y = CVec::zeros(2);
        let got = ml_detect_sm(&y, &h, &bpsk).unwrap();
        assert_eq!((got.index, got.symbol_label), (1, 0));
        assert!((got.metric - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decision_is_scale_invariant() {
        let qam = build_constellation(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let h = random_cmat(2, 4, &mut rng);
            let y = random_cvec(2, &mut rng);
            let base = ml_detect_sm(&y, &h, &qam).unwrap();
            for scale in [1e-3, 0.5, 7.0, 1e3] {
                let s = Complex64::new(scale, 0.0);
                let got = ml_detect_sm(&(&y * s), &(&h * s), &qam).unwrap();
                assert_eq!((got.index, got.symbol_label), (base.index, base.symbol_label));
            }
        }
    }

    #[test]
    fn expected_metric_grows_with_noise() {
        let qpsk = build_constellation(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = random_cmat(2, 4, &mut rng);
        let mut means = Vec::new();
        for sigma2 in [0.01, 0.1, 1.0] {
            let s = (sigma2 / 2.0_f64).sqrt();
            let mut acc = 0.0;
            for _ in 0..2_000 {
                let p = rng.random_range(0..4usize);
                let l = rng.random_range(0..4u32);
                let mut y = h.column(p).into_owned() * qpsk.point(l);
                for e in y.iter_mut() {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    *e += Complex64::new(re * s, im * s);
                }
                acc += ml_detect_sm(&y, &h, &qpsk).unwrap().metric;
            }
            means.push(acc / 2_000.0);
        }
        assert!(means[0] < means[1] && means[1] < means[2], "{means:?}");
    }

    #[test]
    fn mismatched_vector_is_rejected() {
        let bpsk = build_constellation(2).unwrap();
        let h = CMat::identity(3, 2);
        let y = CVec::zeros(2);
        assert_eq!(
            ml_detect_sm(&y, &h, &bpsk),
            Err(DetectError::DimensionMismatch {
                expected: 3,
                got: 2
            })
        );
    }

    #[test]
    fn vblast_noiseless_recovery() {
        let qam = build_constellation(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let h = random_cmat(2, 2, &mut rng);
            let l0 = rng.random_range(0..16u32);
            let l1 = rng.random_range(0..16u32);
            let y = h.column(0).into_owned() * qam.point(l0)
                + h.column(1).into_owned() * qam.point(l1);
            assert_eq!(ml_detect_vblast(&y, &h, &qam).unwrap(), vec![l0, l1]);
        }
    }

    #[test]
    fn single_layer_reduces_to_scalar_decision() {
        let qam = build_constellation(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..300 {
            let g = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            let h = CMat::from_element(1, 1, g);
            let y_s = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            let y = CVec::from_element(1, y_s);
            let joint = ml_detect_vblast(&y, &h, &qam).unwrap();
            let (scalar, _) = ml_detect_scalar(y_s, g, &qam);
            assert_eq!(joint, vec![scalar]);
        }
    }

    #[test]
    fn vblast_matches_brute_force() {
        let qam = build_constellation(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1_000 {
            let h = random_cmat(2, 2, &mut rng);
            let y = random_cvec(2, &mut rng);
            let got = ml_detect_vblast(&y, &h, &qam).unwrap();
            let mut best = (vec![0u32, 0], f64::INFINITY);
            for l0 in 0..16u32 {
                for l1 in 0..16u32 {
                    let diff = &y
                        - h.column(0).into_owned() * qam.point(l0)
                        - h.column(1).into_owned() * qam.point(l1);
                    let metric = diff.norm_squared();
                    if metric < best.1 {
                        best = (vec![l0, l1], metric);
                    }
                }
            }
            assert_eq!(got, best.0);
        }
    }

    #[test]
    fn vblast_tie_is_lexicographic() {
        let bpsk = build_constellation(2).unwrap();
        let h = CMat::identity(2, 2);
        let y = CVec::zeros(2);
        assert_eq!(ml_detect_vblast(&y, &h, &bpsk).unwrap(), vec![0, 0]);
    }

    #[test]
    fn too_many_layers_are_rejected() {
        let bpsk = build_constellation(2).unwrap();
        let h = CMat::identity(2, 3);
        let y = CVec::zeros(2);
        assert_eq!(
            ml_detect_vblast(&y, &h, &bpsk),
            Err(DetectError::LayerExcess {
                layers: 3,
                n_rx: 2
            })
        );
    }

    #[test]
    fn complexity_reference_points() {
        // 2*64*2*58 + 2*32*4*16 + 2*32*4*2 + 32*4 = 14848 + 4096 + 512 + 128.
        assert_eq!(ml_complexity(64, 2, 58, 32, 4), 19_584);
        assert_eq!(ml_complexity(1, 1, 1, 1, 1), 7);
    }

    #[test]
    fn complexity_is_linear_in_null_space_size() {
        let base = ml_complexity(64, 2, 58, 32, 4);
        let doubled = ml_complexity(64, 2, 116, 32, 4);
        assert_eq!(doubled - base, 2 * 64 * 2 * 58);
    }
}
