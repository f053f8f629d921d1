//! Diffusion coefficient functions a(u) with their derivatives.

use std::sync::Arc;

use crate::dd::{self, Dd};
use crate::error::{Error, Result};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type ScalarFnDd = Arc<dyn Fn(Dd) -> Dd + Send + Sync>;

/// A positive coefficient u ↦ a(u) with its derivative and, optionally, an
/// extended-precision evaluation used by the defect computations.
#[derive(Clone)]
pub struct CoefficientFn {
    pub label: String,
    a: ScalarFn,
    a_prime: ScalarFn,
    a_dd: Option<ScalarFnDd>,
}

impl std::fmt::Debug for CoefficientFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoefficientFn").field("label", &self.label).finish()
    }
}

impl CoefficientFn {
    /// Build from closures; probes that `a_prime` is the derivative of `a`
    /// by central differences on [-1, 1].
    pub fn new(
        label: impl Into<String>,
        a: impl Fn(f64) -> f64 + Send + Sync + 'static,
        a_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let c = CoefficientFn {
            label: label.into(),
            a: Arc::new(a),
            a_prime: Arc::new(a_prime),
            a_dd: None,
        };
        c.check_derivative(-1.0, 1.0, 17, 1e-6)?;
        Ok(c)
    }

    pub fn with_dd(mut self, a_dd: impl Fn(Dd) -> Dd + Send + Sync + 'static) -> Self {
        self.a_dd = Some(Arc::new(a_dd));
        self
    }

    #[inline]
    pub fn a(&self, u: f64) -> f64 {
        (self.a)(u)
    }

    #[inline]
    pub fn a_prime(&self, u: f64) -> f64 {
        (self.a_prime)(u)
    }

    /// Extended-precision evaluation; falls back to the f64 closure.
    #[inline]
    pub fn a_dd(&self, u: Dd) -> Dd {
        match &self.a_dd {
            Some(f) => f(u),
            None => Dd::from_f64((self.a)(u.to_f64())),
        }
    }

    /// Central-difference consistency of a and a' on `n` points of [lo, hi].
    pub fn check_derivative(&self, lo: f64, hi: f64, n: usize, rel_tol: f64) -> Result<()> {
        let step = 1e-5;
        for i in 0..n {
            let u = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            let fd = ((self.a)(u + step) - (self.a)(u - step)) / (2.0 * step);
            let exact = (self.a_prime)(u);
            if (fd - exact).abs() > rel_tol * exact.abs().max(1.0) {
                return Err(Error::InvalidArgument(format!(
                    "a_prime inconsistent with a at u={u}: fd={fd}, given={exact} (label {})",
                    self.label
                )));
            }
        }
        Ok(())
    }

    // ---- built-in coefficients ----

    /// a(u) = e^u, positive on all of ℝ with unbounded growth.
    pub fn exp_u() -> Self {
        CoefficientFn::new("exp(u)", |u| u.exp(), |u| u.exp())
            .expect("builtin")
            .with_dd(|u| u.exp())
    }

    /// a(u) = 1/(1+u²), bounded in (0, 1] with sign-changing derivative.
    pub fn inv_one_plus_u_sq() -> Self {
        CoefficientFn::new(
            "1/(1+u^2)",
            |u| 1.0 / (1.0 + u * u),
            |u| {
                let d = 1.0 + u * u;
                -2.0 * u / (d * d)
            },
        )
        .expect("builtin")
        .with_dd(|u| dd::ONE / (dd::ONE + u * u))
    }

    /// a(u) = 1 + u².
    pub fn one_plus_u_sq() -> Self {
        CoefficientFn::new("1+u^2", |u| 1.0 + u * u, |u| 2.0 * u)
            .expect("builtin")
            .with_dd(|u| dd::ONE + u * u)
    }

    /// a(u) = 1 + u; positive only for u > -1, used to provoke positivity
    /// failures under aggressive extrapolation.
    pub fn one_plus_u() -> Self {
        CoefficientFn::new("1+u", |u| 1.0 + u, |_| 1.0)
            .expect("builtin")
            .with_dd(|u| dd::ONE + u)
    }

    /// Constant coefficient a ≡ c.
    pub fn constant(c: f64) -> Self {
        CoefficientFn::new(format!("const({c})"), move |_| c, |_| 0.0)
            .expect("builtin")
            .with_dd(move |_| Dd::from_f64(c))
    }
}
