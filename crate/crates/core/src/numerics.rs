//! Dense complex-matrix helpers and scalar special functions shared by the
//! rest of the crate: Hermitian square roots, Moore-Penrose pseudo-inverses
//! of wide matrices, fixed-node Gauss-Legendre quadrature on `[0, pi/2]`,
//! and the Gaussian tail function `Q(x)`.
//!
//! All operations are pure; tolerances are module constants with `_with`
//! variants for callers that need different thresholds.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};
use std::sync::{Arc, Mutex, OnceLock};
use thiserror::Error;

/// Dense complex matrix type used throughout the crate.
pub type CMat = DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVec = DVector<Complex64>;
/// Dense real matrix, used for survival masks and other real kernels.
pub type RMat = DMatrix<f64>;

/// Relative tolerance for accepting a matrix as Hermitian:
/// `max|A - A^H| <= tol * max|A|`.
pub const HERMITIAN_REL_TOL: f64 = 1e-9;
/// Eigenvalue floor for nominally positive-semidefinite inputs, relative to
/// the largest eigenvalue. Values in `[-tol*lambda_max, 0)` are clamped to 0.
pub const PSD_REL_TOL: f64 = 1e-10;
/// Largest accepted condition number of a pseudo-inverse input.
pub const MAX_CONDITION: f64 = 1e12;
/// Default node count for [`quad_half_pi`].
pub const DEFAULT_QUAD_NODES: usize = 64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NumericsError {
    #[error("matrix is not Hermitian within tolerance")]
    NotHermitian,
    #[error("matrix has an eigenvalue below the positive-semidefinite tolerance")]
    NotPsd,
    #[error("matrix condition number exceeds the accepted threshold")]
    RankDeficient,
    #[error("integrand is not finite at a quadrature node")]
    NonFiniteIntegrand,
}

/// Hermitian square root `S` of a Hermitian positive-semidefinite `A`,
/// with `S * S == A` up to roundoff.
///
/// Computed by eigendecomposition; eigenvalues in `[-PSD_REL_TOL*lambda_max, 0)`
/// are clamped to zero since Hadamard-masked correlation matrices can be
/// indefinite in the last digit.
pub fn hermitian_sqrt(a: &CMat) -> Result<CMat, NumericsError> {
    hermitian_sqrt_with(a, HERMITIAN_REL_TOL, PSD_REL_TOL)
}

/// [`hermitian_sqrt`] with caller-supplied tolerances.
pub fn hermitian_sqrt_with(
    a: &CMat,
    hermitian_tol: f64,
    psd_tol: f64,
) -> Result<CMat, NumericsError> {
    assert_eq!(a.nrows(), a.ncols(), "square matrix required");
    let scale = a.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
    if scale == 0.0 {
        return Ok(CMat::zeros(a.nrows(), a.ncols()));
    }
    let adj = a.adjoint();
    let asym = (a - &adj).iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
    if asym > hermitian_tol * scale {
        return Err(NumericsError::NotHermitian);
    }
    // Symmetrize so the factor is Hermitian to machine precision.
    let sym = (a + &adj).map(|z| 0.5 * z);
    let eig = sym.symmetric_eigen();
    let lambda_max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let floor = -psd_tol * lambda_max;
    let mut factor = eig.eigenvectors.clone();
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        if l < floor {
            return Err(NumericsError::NotPsd);
        }
        let root = Complex64::new(l.max(0.0).sqrt(), 0.0);
        for i in 0..factor.nrows() {
            factor[(i, j)] *= root;
        }
    }
    Ok(&factor * eig.eigenvectors.adjoint())
}

/// Right pseudo-inverse `W = H^H (H H^H)^{-1}` of a wide full-row-rank `H`,
/// so that `H * W == I`.
pub fn pseudo_inverse(h: &CMat) -> Result<CMat, NumericsError> {
    pseudo_inverse_with(h, MAX_CONDITION)
}

/// [`pseudo_inverse`] with a caller-supplied condition-number limit.
pub fn pseudo_inverse_with(h: &CMat, max_condition: f64) -> Result<CMat, NumericsError> {
    assert!(
        h.nrows() <= h.ncols(),
        "wide matrix required (rows <= cols)"
    );
    let gram = h * h.adjoint();
    let eig = gram.symmetric_eigen();
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let lmin = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    // Eigenvalues of H H^H are squared singular values of H, so the limit
    // on cond(H) applies squared here.
    if !(lmin > 0.0) || lmax > lmin * max_condition * max_condition {
        return Err(NumericsError::RankDeficient);
    }
    let mut scaled = eig.eigenvectors.clone();
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        let inv = Complex64::new(1.0 / l, 0.0);
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= inv;
        }
    }
    let gram_inv = &scaled * eig.eigenvectors.adjoint();
    Ok(h.adjoint() * gram_inv)
}

/// `(1/pi) * integral of f(theta) over [0, pi/2]` by fixed-node
/// Gauss-Legendre quadrature.
///
/// The integrands this crate feeds in (products of `(1 + c/sin^2 theta)^-1`
/// factors) are smooth and bounded on the open interval, so a fixed rule is
/// both accurate and deterministic. Nodes are interior: `f` is never
/// evaluated at 0 or `pi/2`.
pub fn quad_half_pi<F: Fn(f64) -> f64>(f: F, nodes: usize) -> Result<f64, NumericsError> {
    assert!(nodes >= 16, "at least 16 quadrature nodes required");
    let rule = legendre_rule(nodes);
    let mut acc = 0.0;
    for &(x, w) in rule.iter() {
        let theta = (x + 1.0) * FRAC_PI_4;
        let v = f(theta);
        if !v.is_finite() {
            return Err(NumericsError::NonFiniteIntegrand);
        }
        acc += w * v;
    }
    // Affine map [-1,1] -> [0,pi/2] contributes pi/4; the leading 1/pi
    // cancels it down to 1/4.
    Ok(0.25 * acc)
}

/// Gaussian tail probability `Q(x) = P(N(0,1) > x) = erfc(x/sqrt(2))/2`.
pub fn q_function(x: f64) -> f64 {
    assert!(!x.is_nan(), "finite input required");
    0.5 * libm::erfc(x / SQRT_2)
}

/// Nodes and weights of the n-point Gauss-Legendre rule on `[-1, 1]`,
/// memoized per node count.
fn legendre_rule(n: usize) -> Arc<Vec<(f64, f64)>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<(f64, f64)>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| Arc::new(gauss_legendre(n)))
        .clone()
}

fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut rule = vec![(0.0, 0.0); n];
    let half = n.div_ceil(2);
    for i in 0..half {
        // Tricomi initial guess, refined by Newton iterations on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-15 * x.abs().max(1.0) {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule[i] = (-x, w);
        rule[n - 1 - i] = (x, w);
    }
    rule
}

/// Legendre polynomial P_n and its derivative at x, by the three-term
/// recurrence. Valid for |x| < 1, which holds for all interior nodes.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 2..=n {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = next;
    }
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_cmat(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMat {
        CMat::from_fn(rows, cols, |_, _| {
            let re: f64 = rand::Rng::sample(rng, StandardNormal);
            let im: f64 = rand::Rng::sample(rng, StandardNormal);
            Complex64::new(re, im)
        })
    }

    fn cplx(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn rel_fro(a: &CMat, b: &CMat) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn sqrt_of_identity_is_identity() {
        let id = CMat::identity(4, 4);
        let s = hermitian_sqrt(&id).unwrap();
        assert!(rel_fro(&s, &id) < 1e-14);
    }

    #[test]
    fn sqrt_of_diagonal_is_elementwise() {
        let a = CMat::from_diagonal(&CVec::from_vec(vec![cplx(4.0), cplx(9.0)]));
        let expect = CMat::from_diagonal(&CVec::from_vec(vec![cplx(2.0), cplx(3.0)]));
        let s = hermitian_sqrt(&a).unwrap();
        assert!(rel_fro(&s, &expect) < 1e-14);
    }

    #[test]
    fn sqrt_remultiplies_to_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let b = random_cmat(6, 6, &mut rng);
            let a = &b * b.adjoint();
            let s = hermitian_sqrt(&a).unwrap();
            assert!(rel_fro(&(&s * &s), &a) < 1e-10);
            // The factor itself must be Hermitian PSD.
            assert!((&s - s.adjoint()).norm() / s.norm() < 1e-12);
        }
    }

    #[test]
    fn sqrt_rejects_non_hermitian() {
        let mut a = CMat::identity(3, 3);
        a[(0, 1)] = cplx(0.5);
        assert_eq!(hermitian_sqrt(&a), Err(NumericsError::NotHermitian));
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let a = CMat::from_diagonal(&CVec::from_vec(vec![cplx(1.0), cplx(-1.0)]));
        assert_eq!(hermitian_sqrt(&a), Err(NumericsError::NotPsd));
    }

    #[test]
    fn sqrt_clamps_trailing_negative_eigenvalues() {
        // Eigenvalue at -1e-11 of a unit-scale matrix sits inside the clamp band.
        let a = CMat::from_diagonal(&CVec::from_vec(vec![cplx(1.0), cplx(-1e-11)]));
        let s = hermitian_sqrt(&a).unwrap();
        assert_relative_eq!(s[(1, 1)].re, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn pinv_of_identity_is_identity() {
        let id = CMat::identity(3, 3);
        let w = pseudo_inverse(&id).unwrap();
        assert!(rel_fro(&w, &id) < 1e-12);
    }

    #[test]
    fn pinv_of_diagonal_is_analytic() {
        let mut h = CMat::zeros(2, 3);
        h[(0, 0)] = cplx(2.0);
        h[(1, 1)] = cplx(4.0);
        let w = pseudo_inverse(&h).unwrap();
        let mut expect = CMat::zeros(3, 2);
        expect[(0, 0)] = cplx(0.5);
        expect[(1, 1)] = cplx(0.25);
        assert!((&w - &expect).norm() < 1e-12);
    }

    #[test]
    fn pinv_is_right_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let h = random_cmat(4, 8, &mut rng);
        let w = pseudo_inverse(&h).unwrap();
        let id = CMat::identity(4, 4);
        assert!((&h * &w - &id).norm() < 1e-9);
    }

    #[test]
    fn pinv_satisfies_moore_penrose_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..1000 {
            let rows = 1 + (rand::Rng::random_range(&mut rng, 0..4)) as usize;
            let cols = rows + (rand::Rng::random_range(&mut rng, 0..5)) as usize;
            let h = random_cmat(rows, cols, &mut rng);
            let w = pseudo_inverse(&h).unwrap();
            assert!((&h * &w * &h - &h).norm() / h.norm() < 1e-9);
        }
    }

    #[test]
    fn pinv_rejects_rank_deficient() {
        let mut h = CMat::zeros(2, 4);
        for j in 0..4 {
            h[(0, j)] = cplx(1.0);
            h[(1, j)] = cplx(1.0);
        }
        assert_eq!(pseudo_inverse(&h), Err(NumericsError::RankDeficient));
    }

    #[test]
    fn quad_constant_integrand() {
        let v = quad_half_pi(|_| 1.0, DEFAULT_QUAD_NODES).unwrap();
        assert_relative_eq!(v, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn quad_matches_rayleigh_closed_form() {
        // (1/pi) * integral (1 + g/sin^2)^-1 = (1 - sqrt(g/(1+g))) / 2.
        for &g in &[0.1, 1.0, 10.0, 100.0] {
            let v = quad_half_pi(
                |theta| {
                    let s2 = theta.sin().powi(2);
                    1.0 / (1.0 + g / s2)
                },
                DEFAULT_QUAD_NODES,
            )
            .unwrap();
            let exact = 0.5 * (1.0 - (g / (1.0 + g)).sqrt());
            assert_relative_eq!(v, exact, epsilon = 1e-9, max_relative = 1e-9);
        }
    }

    #[test]
    fn quad_sine_squared() {
        let v = quad_half_pi(|t| t.sin().powi(2), DEFAULT_QUAD_NODES).unwrap();
        assert_relative_eq!(v, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn quad_node_doubling_is_converged() {
        let integrand = |theta: f64| {
            let s2 = theta.sin().powi(2);
            (1.0 + 2.5 / s2).powi(-2)
        };
        let a = quad_half_pi(integrand, 64).unwrap();
        let b = quad_half_pi(integrand, 128).unwrap();
        assert!((a - b).abs() <= 1e-10 * a.abs());
    }

    #[test]
    fn quad_rejects_non_finite() {
        assert_eq!(
            quad_half_pi(|_| f64::NAN, 16),
            Err(NumericsError::NonFiniteIntegrand)
        );
    }

    #[test]
    fn q_function_anchor_values() {
        assert_relative_eq!(q_function(0.0), 0.5, epsilon = 1e-15);
        assert!(q_function(40.0) < 1e-300);
        // High-precision reference for Q(1).
        assert_relative_eq!(q_function(1.0), 0.158655253931457, epsilon = 1e-12);
    }

    #[test]
    fn q_function_symmetry() {
        let mut x = -8.0;
        while x <= 8.0 {
            assert_relative_eq!(q_function(x) + q_function(-x), 1.0, epsilon = 1e-12);
            x += 0.25;
        }
    }
}
