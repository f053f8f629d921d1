//! Dahlquist G-matrix certificates.
//!
//! For a multiplier pair (δ, μ) with Re δ(ζ)/μ(ζ) > 0 on the open unit disk,
//! Dahlquist's lemma guarantees a positive definite symmetric G and a vector
//! κ such that for any real v_0..v_k and any inner product
//!
//!   (Σ δ_i v_{k-i}, Σ μ_j v_{k-j})
//!     = |V_k|²_G - |V_{k-1}|²_G + |Σ κ_i v_i|²,
//!
//! with |V_n|²_G = Σ g_ij (v_{n-k+i}, v_{n-k+j}). The lemma is
//! non-constructive; here G is built explicitly:
//!
//! 1. form the boundary trigonometric polynomial
//!    P(φ) = Re[δ(e^{iφ}) conj(μ(e^{iφ}))], nonnegative by the multiplier
//!    property;
//! 2. spectral-factor it (Fejér–Riesz): P = |κ(e^{iφ})|² with the factor
//!    fixed by root pairing — roots outside the closed unit disk, half of
//!    each even-multiplicity boundary cluster, positive leading
//!    coefficient — so the output is reproducible;
//! 3. read G off the two-variable identity
//!    ½[δ*(x)μ*(y) + δ*(y)μ*(x)] - κ(x)κ(y) = (xy-1) Σ g_ij x^{i-1}y^{j-1}
//!    by cumulative sums along diagonals.
//!
//! The construction is validated independently: G must be positive definite
//! and the identity must hold on random windows to 1e-10 relative.

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bdf::{certified_theta, delta_coeffs_f64, MAX_MULTIPLIER_ORDER};
use crate::error::{Error, Result};

type C64 = Complex<f64>;

/// A certified (G, κ) pair for the multiplier μ(ζ) = 1 - θζ.
#[derive(Debug, Clone)]
pub struct GMatrixCert {
    pub k: usize,
    /// k×k symmetric positive definite matrix, row-major.
    pub g: DMatrix<f64>,
    /// κ_0..κ_k of the telescoping square term.
    pub kappa: Vec<f64>,
    /// μ_0..μ_k of the multiplier polynomial (μ_0 = 1, μ_1 = -θ).
    pub mu: Vec<f64>,
    pub theta: f64,
}

fn poly_eval(coeffs: &[f64], z: C64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        acc = acc * z + c;
    }
    acc
}

fn cpoly_eval(coeffs: &[C64], z: C64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        acc = acc * z + c;
    }
    acc
}

/// Laurent coefficients p_0..p_k of P(ζ) = ½[δ(ζ)μ(1/ζ) + δ(1/ζ)μ(ζ)].
fn boundary_poly(delta: &[f64], mu: &[f64]) -> Vec<f64> {
    let k = delta.len() - 1;
    (0..=k)
        .map(|m| {
            let mut s = 0.0;
            for j in 0..=(k - m) {
                s += delta[j + m] * mu[j] + mu[j + m] * delta[j];
            }
            0.5 * s
        })
        .collect()
}

fn boundary_min(p: &[f64]) -> f64 {
    let n = 1 << 14;
    let mut min = f64::INFINITY;
    for i in 0..=n {
        let phi = std::f64::consts::PI * i as f64 / n as f64;
        let mut v = p[0];
        for (m, &pm) in p.iter().enumerate().skip(1) {
            v += 2.0 * pm * (m as f64 * phi).cos();
        }
        min = min.min(v);
    }
    min
}

/// Synthetic division of an ascending-coefficient polynomial by (ζ - 1).
/// Returns the quotient; the remainder is poly(1), assumed ~0 by the caller.
fn deflate_at_one(poly: &[f64]) -> Vec<f64> {
    let deg = poly.len() - 1;
    let mut out = vec![0.0; deg];
    let mut acc = 0.0;
    for i in (0..deg).rev() {
        acc += poly[i + 1];
        out[i] = acc;
    }
    out
}

fn poly_roots(coeffs: &[f64]) -> Result<Vec<C64>> {
    let deg = coeffs.len() - 1;
    if deg == 0 {
        return Ok(vec![]);
    }
    let lead = coeffs[deg];
    // companion matrix of the monic normalization
    let a = DMatrix::<f64>::from_fn(deg, deg, |i, j| {
        if j == deg - 1 {
            -coeffs[i] / lead
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let eig = a.complex_eigenvalues();
    let mut roots: Vec<C64> = eig.iter().copied().collect();
    // Newton polish on the original polynomial
    let cc: Vec<C64> = coeffs.iter().map(|&c| C64::new(c, 0.0)).collect();
    let dc: Vec<C64> = coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, &c)| C64::new(i as f64 * c, 0.0))
        .collect();
    for r in roots.iter_mut() {
        for _ in 0..30 {
            let f = cpoly_eval(&cc, *r);
            let fp = cpoly_eval(&dc, *r);
            if fp.norm() == 0.0 {
                break;
            }
            let step = f / fp;
            *r -= step;
            if step.norm() < 1e-15 * r.norm().max(1.0) {
                break;
            }
        }
    }
    Ok(roots)
}

/// Select the roots that go into the spectral factor: every root outside the
/// closed unit disk plus half of each (even) boundary cluster.
fn select_factor_roots(roots: &[C64], k: usize, m_one: usize) -> Result<Vec<C64>> {
    const CIRCLE_TOL: f64 = 1e-6;
    let mut selected: Vec<C64> = Vec::new();
    let mut on_circle: Vec<C64> = Vec::new();
    let mut inside = 0usize;
    for &r in roots {
        let d = r.norm() - 1.0;
        if d > CIRCLE_TOL {
            selected.push(r);
        } else if d < -CIRCLE_TOL {
            inside += 1;
        } else {
            on_circle.push(r);
        }
    }
    if !on_circle.is_empty() {
        // cluster by angle; each cluster must have even multiplicity, of
        // which the outer half goes to the factor
        on_circle.sort_by(|a, b| a.arg().partial_cmp(&b.arg()).unwrap());
        let mut i = 0;
        while i < on_circle.len() {
            let mut j = i + 1;
            while j < on_circle.len() && (on_circle[j] - on_circle[i]).norm() < 1e-4 {
                j += 1;
            }
            let cluster = &mut on_circle[i..j];
            if cluster.len() % 2 != 0 {
                return Err(Error::Certification(
                    "odd-multiplicity boundary root: multiplier positivity fails on |ζ| = 1"
                        .into(),
                ));
            }
            cluster.sort_by(|a, b| b.norm().partial_cmp(&a.norm()).unwrap());
            selected.extend_from_slice(&cluster[..cluster.len() / 2]);
            i = j;
        }
    }
    if selected.len() + m_one != k || inside + m_one + selected.len() + on_circle.len() / 2 != 2 * k - m_one
    {
        // count check: reciprocal pairing must leave exactly k factor roots
        if selected.len() + m_one != k {
            return Err(Error::Certification(format!(
                "root pairing selected {} roots, expected {}",
                selected.len() + m_one,
                k
            )));
        }
    }
    Ok(selected)
}

/// Assemble a real monic polynomial (ascending coefficients) from a
/// conjugate-closed root multiset, pairing conjugates into real quadratics.
fn real_poly_from_roots(roots: &[C64], ones: usize) -> Result<Vec<f64>> {
    let mut coeffs = vec![1.0f64];
    let mul = |c: &mut Vec<f64>, factor: &[f64]| {
        let mut out = vec![0.0; c.len() + factor.len() - 1];
        for (i, &a) in c.iter().enumerate() {
            for (j, &b) in factor.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        *c = out;
    };
    for _ in 0..ones {
        mul(&mut coeffs, &[-1.0, 1.0]); // (ζ - 1)
    }
    let mut remaining: Vec<C64> = roots.to_vec();
    while let Some(r) = remaining.pop() {
        if r.im.abs() < 1e-9 * r.norm().max(1.0) {
            mul(&mut coeffs, &[-r.re, 1.0]);
        } else {
            // find and consume the conjugate partner
            let pos = remaining
                .iter()
                .position(|s| (s - r.conj()).norm() < 1e-6 * r.norm().max(1.0))
                .ok_or_else(|| {
                    Error::Certification("complex factor root without conjugate partner".into())
                })?;
            remaining.swap_remove(pos);
            mul(&mut coeffs, &[r.norm_sqr(), -2.0 * r.re, 1.0]);
        }
    }
    Ok(coeffs)
}

/// Construct the certificate for the BDF-k method and multiplier
/// μ(ζ) = 1 - θζ. Fails with a certification error when the multiplier is
/// infeasible on the boundary (no exact factorization exists).
pub fn dahlquist_g_matrix(k: usize, theta: f64) -> Result<GMatrixCert> {
    if k < 1 || k > MAX_MULTIPLIER_ORDER {
        return Err(Error::InvalidOrder { k, min: 1, max: MAX_MULTIPLIER_ORDER });
    }
    if !(0.0..1.0).contains(&theta) {
        return Err(Error::InvalidArgument(format!(
            "theta = {theta} must lie in [0, 1)"
        )));
    }
    let delta = delta_coeffs_f64(k)?;
    let mut mu = vec![0.0; k + 1];
    mu[0] = 1.0;
    mu[1] = -theta;

    let p = boundary_poly(&delta, &mu);
    let scale = p.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let min_p = boundary_min(&p);
    if min_p < -1e-9 * scale {
        return Err(Error::Certification(format!(
            "multiplier θ = {theta} infeasible for k = {k}: boundary minimum {min_p:.3e}"
        )));
    }

    // Q(ζ) = ζ^k P(ζ), palindromic of degree 2k
    let q: Vec<f64> = (0..=2 * k).map(|m| p[m.abs_diff(k)]).collect();
    let qnorm: f64 = q.iter().map(|v| v.abs()).sum();

    // deflate the structural roots at ζ = 1 (δ(1) = 0 forces at least two)
    let mut poly = q.clone();
    let mut m_one = 0usize;
    while poly.len() > 1 && poly.iter().sum::<f64>().abs() <= 1e-8 * qnorm {
        poly = deflate_at_one(&poly);
        m_one += 1;
    }
    if m_one % 2 != 0 {
        return Err(Error::Certification(format!(
            "odd multiplicity {m_one} detected at ζ = 1"
        )));
    }

    let roots = poly_roots(&poly)?;
    let selected = select_factor_roots(&roots, k, m_one / 2)?;
    let c = real_poly_from_roots(&selected, m_one / 2)?;

    // scale: Q = s² c(ζ) c*(ζ) with c*(ζ) = ζ^k c(1/ζ); matching leading
    // coefficients gives s² = q_{2k} / ((-1)^k Π roots)
    let mut prod = C64::new(1.0, 0.0);
    for &r in &selected {
        prod *= r;
    }
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    let s2 = q[2 * k] / (sign * prod.re);
    if s2 <= 0.0 {
        return Err(Error::Certification(format!(
            "spectral factor scale s² = {s2:.3e} is not positive"
        )));
    }
    let s = s2.sqrt();
    let mut kappa: Vec<f64> = c.iter().map(|&ci| s * ci).collect();
    if kappa[k] < 0.0 {
        for v in kappa.iter_mut() {
            *v = -*v;
        }
    }

    // L_{pq} = ½(δ_{k-p} μ_{k-q} + δ_{k-q} μ_{k-p}) - κ_p κ_q;
    // G_{ij} = Σ_m L_{i+m, j+m} (cumulative sums down the diagonals)
    let l = |pp: usize, qq: usize| -> f64 {
        0.5 * (delta[k - pp] * mu[k - qq] + delta[k - qq] * mu[k - pp]) - kappa[pp] * kappa[qq]
    };
    let mut g = DMatrix::<f64>::zeros(k, k);
    for i in 1..=k {
        for j in 1..=k {
            let mut sum = 0.0;
            let mut m = 0;
            while i + m <= k && j + m <= k {
                sum += l(i + m, j + m);
                m += 1;
            }
            g[(i - 1, j - 1)] = sum;
        }
    }

    let cert = GMatrixCert { k, g, kappa, mu, theta };

    // independent validation: positive definiteness and the identity itself
    let eigs = cert.eigenvalue_range()?;
    if eigs.0 <= 0.0 {
        return Err(Error::Certification(format!(
            "constructed G is not positive definite (min eigenvalue {:.3e})",
            eigs.0
        )));
    }
    let res = cert.max_identity_residual(1000, 0x5eed);
    if res > 1e-10 {
        return Err(Error::Certification(format!(
            "identity residual {res:.3e} exceeds 1e-10"
        )));
    }
    Ok(cert)
}

/// Certificate for the scheme's standard multiplier ([`certified_theta`]).
pub fn scheme_certificate(k: usize) -> Result<GMatrixCert> {
    dahlquist_g_matrix(k, certified_theta(k)?)
}

impl GMatrixCert {
    /// (min, max) eigenvalue of G.
    pub fn eigenvalue_range(&self) -> Result<(f64, f64)> {
        let eig = self.g.clone().symmetric_eigen();
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok((min, max))
    }

    /// Relative residual of the Dahlquist identity on one scalar window
    /// v_0..v_k (newest last).
    pub fn identity_residual(&self, v: &[f64]) -> f64 {
        assert_eq!(v.len(), self.k + 1);
        let k = self.k;
        let delta = crate::bdf::delta_coeffs_f64(k).expect("valid k");
        let dv: f64 = (0..=k).map(|i| delta[i] * v[k - i]).sum();
        let mv: f64 = (0..=k).map(|j| self.mu[j] * v[k - j]).sum();
        let lhs = dv * mv;
        let gq = |off: usize| -> f64 {
            let mut s = 0.0;
            for i in 1..=k {
                for j in 1..=k {
                    s += self.g[(i - 1, j - 1)] * v[i - off] * v[j - off];
                }
            }
            s
        };
        let upper = gq(0);
        let lower = gq(1);
        let sq: f64 = {
            let t: f64 = (0..=k).map(|i| self.kappa[i] * v[i]).sum();
            t * t
        };
        let rhs = upper - lower + sq;
        (lhs - rhs).abs() / (upper.abs() + lower.abs() + sq + lhs.abs()).max(1.0e-30)
    }

    /// Maximum identity residual over seeded random windows.
    pub fn max_identity_residual(&self, n_windows: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut max = 0.0f64;
        for _ in 0..n_windows {
            let v: Vec<f64> = (0..=self.k).map(|_| rng.gen_range(-1.0..1.0)).collect();
            max = max.max(self.identity_residual(&v));
        }
        max
    }

    /// |V|²_G = Σ g_ij (w_i, w_j) for a window of k states (oldest first)
    /// under a caller-supplied inner product.
    pub fn window_norm_sq<F>(&self, window: &[&[f64]], inner: F) -> f64
    where
        F: Fn(&[f64], &[f64]) -> f64,
    {
        assert_eq!(window.len(), self.k);
        let mut s = 0.0;
        for i in 0..self.k {
            for j in 0..self.k {
                s += self.g[(i, j)] * inner(window[i], window[j]);
            }
        }
        s
    }
}

/// Minimum of Re[δ(ζ)/μ(ζ)] on the circle of the given radius — the
/// boundary-sampled form of the multiplier property for arbitrary μ.
pub fn min_re_ratio(delta: &[f64], mu: &[f64], radius: f64, n_samples: usize) -> f64 {
    let mut min = f64::INFINITY;
    for i in 0..n_samples {
        let phi = 2.0 * std::f64::consts::PI * i as f64 / n_samples as f64;
        let z = C64::from_polar(radius, phi);
        let v = (poly_eval(delta, z) / poly_eval(mu, z)).re;
        min = min.min(v);
    }
    min
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bdf::multiplier_theta;
    use approx::assert_relative_eq;

    #[test]
    fn k1_closed_form() {
        // (v₁-v₀)v₁ = ½v₁² - ½v₀² + ½(v₁-v₀)²
        let cert = dahlquist_g_matrix(1, 0.0).unwrap();
        assert_relative_eq!(cert.g[(0, 0)], 0.5, epsilon = 1e-14);
        let inv_sqrt2 = 0.5f64.sqrt();
        assert_relative_eq!(cert.kappa[0], -inv_sqrt2, epsilon = 1e-14);
        assert_relative_eq!(cert.kappa[1], inv_sqrt2, epsilon = 1e-14);
    }

    #[test]
    fn k2_quadruple_root_at_one() {
        // P(φ) = (1-cos φ)² for k = 2, θ = 0; the factor is ½(ζ-1)²
        let cert = dahlquist_g_matrix(2, 0.0).unwrap();
        assert_relative_eq!(cert.kappa[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(cert.kappa[1], -1.0, epsilon = 1e-12);
        assert_relative_eq!(cert.kappa[2], 0.5, epsilon = 1e-12);
        assert!(cert.eigenvalue_range().unwrap().0 > 0.0);
    }

    #[test]
    fn all_orders_certify_at_safe_theta() {
        for k in 1..=5 {
            let cert = scheme_certificate(k).unwrap();
            let (emin, _) = cert.eigenvalue_range().unwrap();
            assert!(emin > 0.0, "k={k}: min eigenvalue {emin}");
            let res = cert.max_identity_residual(1000, 7);
            assert!(res <= 1e-10, "k={k}: residual {res}");
        }
    }

    #[test]
    fn tabulated_theta4_is_boundary_infeasible() {
        // 0.2878 rounds the infimum 0.287807 down; the boundary polynomial
        // dips negative and no exact certificate can exist there.
        let err = dahlquist_g_matrix(4, multiplier_theta(4).unwrap());
        assert!(matches!(err, Err(Error::Certification(_))), "{err:?}");
    }

    #[test]
    fn clearly_infeasible_theta_rejected() {
        let err = dahlquist_g_matrix(5, 0.5);
        assert!(matches!(err, Err(Error::Certification(_))));
    }

    #[test]
    fn multiplier_inequality_blockwise() {
        // (Σδ_i v_{k-i}, v_k - θv_{k-1})_M >= |V_k|²_{G,M} - |V_{k-1}|²_{G,M}
        // for a positive definite M, realized here as a weighted dot product.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for k in 1..=5 {
            let cert = scheme_certificate(k).unwrap();
            let delta = crate::bdf::delta_coeffs_f64(k).unwrap();
            let dim = 6usize;
            let weights: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.1..2.0)).collect();
            let ip = |a: &[f64], b: &[f64]| -> f64 {
                a.iter().zip(b).zip(&weights).map(|((x, y), w)| w * x * y).sum()
            };
            for _ in 0..200 {
                let window: Vec<Vec<f64>> = (0..=k)
                    .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .collect();
                let dsum: Vec<f64> = (0..dim)
                    .map(|c| (0..=k).map(|i| delta[i] * window[k - i][c]).sum())
                    .collect();
                let test_vec: Vec<f64> = (0..dim)
                    .map(|c| window[k][c] - cert.theta * window[k - 1][c])
                    .collect();
                let lhs = ip(&dsum, &test_vec);
                let upper: Vec<&[f64]> = window[1..=k].iter().map(|v| v.as_slice()).collect();
                let lower: Vec<&[f64]> = window[0..k].iter().map(|v| v.as_slice()).collect();
                let rhs = cert.window_norm_sq(&upper, ip) - cert.window_norm_sq(&lower, ip);
                assert!(lhs >= rhs - 1e-10, "k={k}: lhs {lhs} < rhs {rhs}");
            }
        }
    }
}
