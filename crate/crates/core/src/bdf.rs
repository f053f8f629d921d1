//! BDF scheme constants: generating-polynomial coefficients, order conditions,
//! A(α) stability angles and Nevanlinna–Odeh multipliers.
//!
//! The k-step method is described by δ(ζ) = Σ_{ℓ=1}^k (1/ℓ)(1-ζ)^ℓ, the
//! linearly implicit variant in addition by the extrapolation polynomial
//! γ(ζ) = [1 - (1-ζ)^k]/ζ. Both are expanded symbolically over exact
//! rationals; everything downstream (angles, multipliers, G-matrices)
//! consumes f64 conversions of these exact tables.

use num_complex::Complex64;
use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Orders supported by the coefficient tables.
pub const MAX_ORDER: usize = 6;
/// Largest order with a known Nevanlinna–Odeh multiplier.
pub const MAX_MULTIPLIER_ORDER: usize = 5;

fn check_order(k: usize, max: usize) -> Result<()> {
    if k < 1 || k > max {
        return Err(Error::InvalidOrder { k, min: 1, max });
    }
    Ok(())
}

fn binomial(n: usize, j: usize) -> i64 {
    let mut r: i64 = 1;
    for i in 0..j {
        r = r * (n - i) as i64 / (i + 1) as i64;
    }
    r
}

/// Coefficients δ_0..δ_k of δ(ζ) = Σ_{ℓ=1}^k (1/ℓ)(1-ζ)^ℓ, exact.
pub fn delta_coeffs(k: usize) -> Result<Vec<Rational64>> {
    check_order(k, MAX_ORDER)?;
    let mut c = vec![Rational64::zero(); k + 1];
    for l in 1..=k {
        // (1-ζ)^l = Σ_j C(l,j) (-1)^j ζ^j
        for (j, cj) in c.iter_mut().enumerate().take(l + 1) {
            let sign = if j % 2 == 0 { 1 } else { -1 };
            *cj += Rational64::new(sign * binomial(l, j), l as i64);
        }
    }
    Ok(c)
}

/// Coefficients γ_0..γ_{k-1} of γ(ζ) = [1 - (1-ζ)^k]/ζ, exact.
pub fn gamma_coeffs(k: usize) -> Result<Vec<Rational64>> {
    check_order(k, MAX_ORDER)?;
    // 1 - (1-ζ)^k = Σ_{j=1}^k C(k,j)(-1)^{j+1} ζ^j, then divide by ζ
    Ok((0..k)
        .map(|i| {
            let sign = if i % 2 == 0 { 1 } else { -1 };
            Rational64::from_integer(sign * binomial(k, i + 1))
        })
        .collect())
}

/// Rational power with the convention 0^0 = 1.
fn ipow(base: i64, exp: usize) -> Rational64 {
    let mut r = Rational64::from_integer(1);
    for _ in 0..exp {
        r *= Rational64::from_integer(base);
    }
    r
}

/// Residuals of the two order-condition identities at a given level ℓ:
/// Σ_i (k-i)^ℓ δ_i - ℓ k^{ℓ-1}   and   ℓ Σ_i (k-i-1)^{ℓ-1} γ_i - ℓ k^{ℓ-1}.
#[derive(Debug, Clone)]
pub struct OrderConditionResidual {
    pub level: usize,
    pub delta_residual: Rational64,
    pub gamma_residual: Rational64,
}

/// Evaluate the order-condition residuals for arbitrary coefficient tables.
/// Exposed separately so tests can probe deliberately perturbed tables.
pub fn order_condition_residuals(
    k: usize,
    delta: &[Rational64],
    gamma: &[Rational64],
) -> Vec<OrderConditionResidual> {
    (0..=k)
        .map(|l| {
            // rhs = ℓ k^{ℓ-1}; zero when ℓ = 0
            let rhs = if l == 0 {
                Rational64::zero()
            } else {
                Rational64::from_integer(l as i64) * ipow(k as i64, l - 1)
            };
            let lhs_delta: Rational64 = delta
                .iter()
                .enumerate()
                .map(|(i, d)| ipow(k as i64 - i as i64, l) * d)
                .sum();
            let lhs_gamma: Rational64 = if l == 0 {
                Rational64::zero()
            } else {
                Rational64::from_integer(l as i64)
                    * gamma
                        .iter()
                        .enumerate()
                        .map(|(i, g)| ipow(k as i64 - i as i64 - 1, l - 1) * g)
                        .sum::<Rational64>()
            };
            OrderConditionResidual {
                level: l,
                delta_residual: lhs_delta - rhs,
                gamma_residual: lhs_gamma - rhs,
            }
        })
        .collect()
}

/// Report of the exact order-condition check for the built-in tables.
#[derive(Debug, Clone)]
pub struct OrderConditionReport {
    pub k: usize,
    pub residuals: Vec<OrderConditionResidual>,
    pub ok: bool,
}

/// Verify Σ_i (k-i)^ℓ δ_i = ℓ k^{ℓ-1} = ℓ Σ_i (k-i-1)^{ℓ-1} γ_i for ℓ = 0..k
/// in exact rational arithmetic.
pub fn check_order_conditions(k: usize) -> Result<OrderConditionReport> {
    let delta = delta_coeffs(k)?;
    let gamma = gamma_coeffs(k)?;
    let residuals = order_condition_residuals(k, &delta, &gamma);
    let ok = residuals
        .iter()
        .all(|r| r.delta_residual.is_zero() && r.gamma_residual.is_zero());
    Ok(OrderConditionReport { k, residuals, ok })
}

/// The Nevanlinna–Odeh multiplier values θ_k (Nevanlinna & Odeh 1981),
/// the smallest such that Re δ(ζ)/(1-θ_k ζ) > 0 on the open unit disk,
/// rounded to four decimals. No such multiplier is known for k = 6.
pub fn multiplier_theta(k: usize) -> Result<f64> {
    check_order(k, MAX_MULTIPLIER_ORDER)?;
    Ok([0.0, 0.0, 0.0836, 0.2878, 0.8160][k - 1])
}

/// Multiplier value used when an exact Dahlquist certificate is required.
///
/// These are the infima rounded *up* to four decimals, so positivity holds
/// on the whole boundary and the Fejér–Riesz factorization exists. They
/// differ from [`multiplier_theta`] only at k = 4: the nearest-rounded
/// 0.2878 sits just below the infimum 0.287807, where the boundary
/// polynomial dips to about -1.3e-5 and no exact certificate exists.
pub fn certified_theta(k: usize) -> Result<f64> {
    check_order(k, MAX_MULTIPLIER_ORDER)?;
    Ok([0.0, 0.0, 0.0836, 0.2879, 0.8160][k - 1])
}

fn poly_eval(coeffs: &[f64], z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        acc = acc * z + c;
    }
    acc
}

pub(crate) fn delta_coeffs_f64(k: usize) -> Result<Vec<f64>> {
    Ok(delta_coeffs(k)?.iter().map(|r| r.to_f64().unwrap()).collect())
}

/// Golden-section minimization of a unimodal-on-the-bracket function.
fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        if b - a < 1e-15 {
            break;
        }
    }
    fc.min(fd)
}

/// Minimum of Re[δ(ζ)/(1-θζ)] over ζ = radius·e^{iφ}, sampled at
/// `n_samples` uniform angles with golden-section refinement around the
/// sampled minimizer. A non-negative return (within tolerance) certifies
/// the multiplier on that circle.
pub fn verify_multiplier_positivity(
    k: usize,
    theta: f64,
    radius: f64,
    n_samples: usize,
) -> Result<f64> {
    check_order(k, MAX_ORDER)?;
    if !(0.0..1.0).contains(&theta) {
        return Err(Error::InvalidArgument(format!(
            "theta = {theta} must lie in [0, 1) to keep the multiplier pole outside the disk"
        )));
    }
    if !(radius > 0.0 && radius < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "radius = {radius} must lie in (0, 1)"
        )));
    }
    if n_samples < 1024 {
        return Err(Error::InvalidArgument(format!(
            "n_samples = {n_samples} is below the minimum of 1024"
        )));
    }
    let delta = delta_coeffs_f64(k)?;
    let ratio = |phi: f64| -> f64 {
        let z = Complex64::from_polar(radius, phi);
        (poly_eval(&delta, z) / (Complex64::new(1.0, 0.0) - theta * z)).re
    };
    let step = 2.0 * std::f64::consts::PI / n_samples as f64;
    let mut min_val = f64::INFINITY;
    let mut min_phi = 0.0;
    for i in 0..n_samples {
        let phi = i as f64 * step;
        let v = ratio(phi);
        if v < min_val {
            min_val = v;
            min_phi = phi;
        }
    }
    let refined = golden_min(ratio, min_phi - step, min_phi + step, 80);
    Ok(min_val.min(refined))
}

/// Smallest feasible multiplier for k = 3..5, located by bisection with
/// [`verify_multiplier_positivity`] as the feasibility oracle.
///
/// The oracle samples at radius 0.99999: closer to the boundary the
/// near-touching dip of the optimal multiplier is still resolved, while the
/// harmonic smoothing at smaller radii would bias the result by more than
/// the 5e-4 agreement expected against the four-decimal reference values.
pub fn smallest_theta(k: usize, tol: f64) -> Result<f64> {
    if !(3..=MAX_MULTIPLIER_ORDER).contains(&k) {
        return Err(Error::InvalidOrder { k, min: 3, max: MAX_MULTIPLIER_ORDER });
    }
    if tol <= 0.0 {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    let feasible = |theta: f64| -> Result<bool> {
        Ok(verify_multiplier_positivity(k, theta, 0.99999, 1 << 14)? >= -1e-12)
    };
    let (mut lo, mut hi) = (0.0f64, 0.999_999f64);
    if !feasible(hi)? {
        return Err(Error::Certification(format!(
            "no feasible multiplier found for k = {k} below 1"
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// A(α)-stability angle in degrees: α = 180° - max_{|ζ|=1} |arg δ(ζ)|,
/// by dense boundary sampling plus golden-section refinement. The supremum
/// for the A-stable orders k = 1, 2 is approached at the root ζ = 1, which
/// the refinement bracket reaches from φ > 0.
pub fn a_alpha_angle(k: usize) -> Result<f64> {
    check_order(k, MAX_ORDER)?;
    let delta = delta_coeffs_f64(k)?;
    let abs_arg = |phi: f64| -> f64 {
        let z = Complex64::from_polar(1.0, phi);
        poly_eval(&delta, z).arg().abs()
    };
    let n = 1 << 14;
    let step = std::f64::consts::PI / n as f64;
    let mut max_val = f64::NEG_INFINITY;
    let mut max_phi = step;
    // arg δ is undefined at the root ζ = 1; sample φ in (0, π]
    for i in 1..=n {
        let phi = i as f64 * step;
        let v = abs_arg(phi);
        if v > max_val {
            max_val = v;
            max_phi = phi;
        }
    }
    let lo = (max_phi - step).max(1e-13);
    let refined = -golden_min(|phi| -abs_arg(phi), lo, max_phi + step, 100);
    Ok(180.0 - max_val.max(refined).to_degrees())
}

/// All constants of one k-step method.
#[derive(Debug, Clone)]
pub struct BdfScheme {
    pub k: usize,
    pub delta: Vec<Rational64>,
    pub gamma: Vec<Rational64>,
    /// Nevanlinna–Odeh multiplier; `None` for k = 6.
    pub theta: Option<f64>,
    /// A(α) stability angle in degrees.
    pub alpha_deg: f64,
    delta_f64: Vec<f64>,
    gamma_f64: Vec<f64>,
}

impl BdfScheme {
    pub fn new(k: usize) -> Result<Self> {
        let delta = delta_coeffs(k)?;
        let gamma = gamma_coeffs(k)?;
        let theta = if k <= MAX_MULTIPLIER_ORDER {
            Some(multiplier_theta(k)?)
        } else {
            None
        };
        let alpha_deg = a_alpha_angle(k)?;
        let delta_f64 = delta.iter().map(|r| r.to_f64().unwrap()).collect();
        let gamma_f64 = gamma.iter().map(|r| r.to_f64().unwrap()).collect();
        Ok(BdfScheme { k, delta, gamma, theta, alpha_deg, delta_f64, gamma_f64 })
    }

    #[inline]
    pub fn delta_f64(&self) -> &[f64] {
        &self.delta_f64
    }

    #[inline]
    pub fn gamma_f64(&self) -> &[f64] {
        &self.gamma_f64
    }
}
