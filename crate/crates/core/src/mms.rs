//! Manufactured problems: closed-form exact solutions with the forcing that
//! makes them solve ∂ₜu = ∇·(a(u)∇u) + f under homogeneous Dirichlet
//! boundary conditions.
//!
//! Expanding the divergence, f = u_t - a'(u)|∇u|² - a(u)Δu; the closed
//! forms for u_t, ∇u and Δu are supplied per problem and cross-checked
//! against finite differences in the tests. The exact solution (and its
//! time derivative) are additionally available in double-double precision
//! for the defect computations.

use std::sync::Arc;

use crate::coeff::CoefficientFn;
use crate::dd::{self, Dd};
use crate::error::{Error, Result};
use crate::grid::Grid;

pub type SpaceTimeFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
pub type SpaceTimeFnDd = Arc<dyn Fn(&[f64], Dd) -> Dd + Send + Sync>;

#[derive(Clone)]
pub struct ManufacturedProblem {
    pub label: String,
    pub grid: Grid,
    pub coeff: CoefficientFn,
    /// Time horizon T.
    pub horizon: f64,
    u: SpaceTimeFn,
    u_t: SpaceTimeFn,
    /// Per-axis partial derivatives of u.
    grad: Vec<SpaceTimeFn>,
    laplacian: SpaceTimeFn,
    u_dd: SpaceTimeFnDd,
    u_t_dd: SpaceTimeFnDd,
}

impl std::fmt::Debug for ManufacturedProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ManufacturedProblem")
            .field("label", &self.label)
            .field("grid", &self.grid)
            .field("horizon", &self.horizon)
            .finish()
    }
}

impl ManufacturedProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        label: impl Into<String>,
        grid: Grid,
        coeff: CoefficientFn,
        horizon: f64,
        u: SpaceTimeFn,
        u_t: SpaceTimeFn,
        grad: Vec<SpaceTimeFn>,
        laplacian: SpaceTimeFn,
        u_dd: SpaceTimeFnDd,
        u_t_dd: SpaceTimeFnDd,
    ) -> Result<Self> {
        if grad.len() != grid.dim() {
            return Err(Error::InvalidArgument(
                "gradient components must match the grid dimension".into(),
            ));
        }
        Ok(ManufacturedProblem {
            label: label.into(),
            grid,
            coeff,
            horizon,
            u,
            u_t,
            grad,
            laplacian,
            u_dd,
            u_t_dd,
        })
    }

    #[inline]
    pub fn u(&self, x: &[f64], t: f64) -> f64 {
        (self.u)(x, t)
    }

    #[inline]
    pub fn u_t(&self, x: &[f64], t: f64) -> f64 {
        (self.u_t)(x, t)
    }

    #[inline]
    pub fn u_dd(&self, x: &[f64], t: Dd) -> Dd {
        (self.u_dd)(x, t)
    }

    #[inline]
    pub fn u_t_dd(&self, x: &[f64], t: Dd) -> Dd {
        (self.u_t_dd)(x, t)
    }

    /// The forcing f = u_t - a'(u)|∇u|² - a(u)Δu.
    pub fn forcing(&self, x: &[f64], t: f64) -> f64 {
        let u = (self.u)(x, t);
        let grad_sq: f64 = self.grad.iter().map(|g| g(x, t) * g(x, t)).sum();
        (self.u_t)(x, t) - self.coeff.a_prime(u) * grad_sq - self.coeff.a(u) * (self.laplacian)(x, t)
    }

    /// Exact solution sampled at the interior nodes (lexicographic).
    pub fn sample_on_grid(&self, t: f64) -> Vec<f64> {
        let d = self.grid.dim();
        (0..self.grid.n_total())
            .map(|i| (self.u)(&self.grid.coords(i)[..d], t))
            .collect()
    }

    pub fn forcing_on_grid(&self, t: f64) -> Vec<f64> {
        let d = self.grid.dim();
        (0..self.grid.n_total())
            .map(|i| self.forcing(&self.grid.coords(i)[..d], t))
            .collect()
    }

    pub fn sample_on_grid_dd(&self, t: Dd) -> Vec<Dd> {
        let d = self.grid.dim();
        (0..self.grid.n_total())
            .map(|i| (self.u_dd)(&self.grid.coords(i)[..d], t))
            .collect()
    }

    pub fn sample_u_t_on_grid_dd(&self, t: Dd) -> Vec<Dd> {
        let d = self.grid.dim();
        (0..self.grid.n_total())
            .map(|i| (self.u_t_dd)(&self.grid.coords(i)[..d], t))
            .collect()
    }

    /// Rebuild the same problem on another grid size.
    pub fn with_grid_size(&self, n_interior: usize) -> Result<Self> {
        builtin_problem(&self.label, n_interior)
    }

    /// Largest |u| over the boundary nodes at `nt` sampled times — the
    /// Dirichlet compatibility check.
    pub fn boundary_max_abs(&self, nt: usize) -> f64 {
        let mut worst = 0.0f64;
        let axes = self.grid.axes();
        for it in 0..=nt {
            let t = self.horizon * it as f64 / nt as f64;
            match self.grid.dim() {
                1 => {
                    for x in [axes[0].lo, axes[0].hi] {
                        worst = worst.max((self.u)(&[x], t).abs());
                    }
                }
                _ => {
                    let samples = 33;
                    for s in 0..=samples {
                        let fx = axes[0].lo + (axes[0].hi - axes[0].lo) * s as f64 / samples as f64;
                        let fy = axes[1].lo + (axes[1].hi - axes[1].lo) * s as f64 / samples as f64;
                        for p in [
                            [fx, axes[1].lo],
                            [fx, axes[1].hi],
                            [axes[0].lo, fy],
                            [axes[0].hi, fy],
                        ] {
                            worst = worst.max((self.u)(&p, t).abs());
                        }
                    }
                }
            }
        }
        worst
    }
}

/// (M1) 1D, u = e^{-t} sin(πx), a(u) = e^u, T = 1.
pub fn problem_m1(n_interior: usize) -> Result<ManufacturedProblem> {
    use std::f64::consts::PI;
    ManufacturedProblem::new(
        "m1",
        Grid::unit_interval(n_interior)?,
        CoefficientFn::exp_u(),
        1.0,
        Arc::new(|x: &[f64], t| (-t).exp() * (PI * x[0]).sin()),
        Arc::new(|x: &[f64], t| -(-t).exp() * (PI * x[0]).sin()),
        vec![Arc::new(|x: &[f64], t| (-t).exp() * PI * (PI * x[0]).cos())],
        Arc::new(|x: &[f64], t| -PI * PI * (-t).exp() * (PI * x[0]).sin()),
        Arc::new(|x: &[f64], t: Dd| (-t).exp() * (dd::PI * Dd::from_f64(x[0])).sin()),
        Arc::new(|x: &[f64], t: Dd| -((-t).exp() * (dd::PI * Dd::from_f64(x[0])).sin())),
    )
}

/// (M2) 1D, u = sin(πt)·x(1-x), a(u) = 1/(1+u²), T = 1. Starts at u ≡ 0
/// with nonzero u_t, exercising nontrivial startup and sign changes of a'.
pub fn problem_m2(n_interior: usize) -> Result<ManufacturedProblem> {
    use std::f64::consts::PI;
    ManufacturedProblem::new(
        "m2",
        Grid::unit_interval(n_interior)?,
        CoefficientFn::inv_one_plus_u_sq(),
        1.0,
        Arc::new(|x: &[f64], t| (PI * t).sin() * x[0] * (1.0 - x[0])),
        Arc::new(|x: &[f64], t| PI * (PI * t).cos() * x[0] * (1.0 - x[0])),
        vec![Arc::new(|x: &[f64], t| (PI * t).sin() * (1.0 - 2.0 * x[0]))],
        Arc::new(|_x: &[f64], t| -2.0 * (PI * t).sin()),
        Arc::new(|x: &[f64], t: Dd| {
            (dd::PI * t).sin() * Dd::from_f64(x[0] * (1.0 - x[0]))
        }),
        Arc::new(|x: &[f64], t: Dd| {
            dd::PI * (dd::PI * t).cos() * Dd::from_f64(x[0] * (1.0 - x[0]))
        }),
    )
}

/// (M3) 2D on (0,1)², u = e^{-t} sin(πx) sin(πy), a(u) = 1 + u², T = 1.
pub fn problem_m3(n_interior: usize) -> Result<ManufacturedProblem> {
    use std::f64::consts::PI;
    ManufacturedProblem::new(
        "m3",
        Grid::unit_square(n_interior)?,
        CoefficientFn::one_plus_u_sq(),
        1.0,
        Arc::new(|x: &[f64], t| (-t).exp() * (PI * x[0]).sin() * (PI * x[1]).sin()),
        Arc::new(|x: &[f64], t| -(-t).exp() * (PI * x[0]).sin() * (PI * x[1]).sin()),
        vec![
            Arc::new(|x: &[f64], t| (-t).exp() * PI * (PI * x[0]).cos() * (PI * x[1]).sin()),
            Arc::new(|x: &[f64], t| (-t).exp() * PI * (PI * x[0]).sin() * (PI * x[1]).cos()),
        ],
        Arc::new(|x: &[f64], t| {
            -2.0 * PI * PI * (-t).exp() * (PI * x[0]).sin() * (PI * x[1]).sin()
        }),
        Arc::new(|x: &[f64], t: Dd| {
            (-t).exp()
                * (dd::PI * Dd::from_f64(x[0])).sin()
                * (dd::PI * Dd::from_f64(x[1])).sin()
        }),
        Arc::new(|x: &[f64], t: Dd| {
            -((-t).exp()
                * (dd::PI * Dd::from_f64(x[0])).sin()
                * (dd::PI * Dd::from_f64(x[1])).sin())
        }),
    )
}

/// Adversarial 1D problem: u = 0.9 sin(2πt) sin(πx) with a(u) = 1 + u.
/// On the exact solution range a ∈ [0.1, 1.9] stays positive, but the
/// k-step extrapolation overshoots at coarse steps and drives a(û) ≤ 0,
/// provoking a positivity abort instead of a silent continuation.
pub fn problem_adversarial(n_interior: usize) -> Result<ManufacturedProblem> {
    use std::f64::consts::PI;
    const AMP: f64 = 0.9;
    ManufacturedProblem::new(
        "adversarial",
        Grid::unit_interval(n_interior)?,
        CoefficientFn::one_plus_u(),
        1.0,
        Arc::new(|x: &[f64], t| AMP * (2.0 * PI * t).sin() * (PI * x[0]).sin()),
        Arc::new(|x: &[f64], t| AMP * 2.0 * PI * (2.0 * PI * t).cos() * (PI * x[0]).sin()),
        vec![Arc::new(|x: &[f64], t| {
            AMP * (2.0 * PI * t).sin() * PI * (PI * x[0]).cos()
        })],
        Arc::new(|x: &[f64], t| -PI * PI * AMP * (2.0 * PI * t).sin() * (PI * x[0]).sin()),
        Arc::new(|x: &[f64], t: Dd| {
            Dd::from_f64(AMP) * (dd::TWO_PI * t).sin() * (dd::PI * Dd::from_f64(x[0])).sin()
        }),
        Arc::new(|x: &[f64], t: Dd| {
            Dd::from_f64(AMP) * dd::TWO_PI * (dd::TWO_PI * t).cos()
                * (dd::PI * Dd::from_f64(x[0])).sin()
        }),
    )
}

/// The problem catalogue at default grid sizes.
pub fn builtin_problems() -> Vec<ManufacturedProblem> {
    vec![
        problem_m1(255).expect("m1"),
        problem_m2(255).expect("m2"),
        problem_m3(63).expect("m3"),
        problem_adversarial(255).expect("adversarial"),
    ]
}

/// Catalogue problem by label with an explicit per-axis grid size.
pub fn builtin_problem(label: &str, n_interior: usize) -> Result<ManufacturedProblem> {
    match label {
        "m1" => problem_m1(n_interior),
        "m2" => problem_m2(n_interior),
        "m3" => problem_m3(n_interior),
        "adversarial" => problem_adversarial(n_interior),
        other => Err(Error::InvalidArgument(format!(
            "unknown problem label '{other}'; available: m1, m2, m3, adversarial"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heat_solution_has_zero_forcing() {
        use std::f64::consts::PI;
        // u = e^{-π²t} sin(πx) with a ≡ 1 solves the heat equation exactly
        let p = ManufacturedProblem::new(
            "heat",
            Grid::unit_interval(9).unwrap(),
            CoefficientFn::constant(1.0),
            1.0,
            Arc::new(|x: &[f64], t| (-PI * PI * t).exp() * (PI * x[0]).sin()),
            Arc::new(|x: &[f64], t| -PI * PI * (-PI * PI * t).exp() * (PI * x[0]).sin()),
            vec![Arc::new(|x: &[f64], t| {
                (-PI * PI * t).exp() * PI * (PI * x[0]).cos()
            })],
            Arc::new(|x: &[f64], t| -PI * PI * (-PI * PI * t).exp() * (PI * x[0]).sin()),
            Arc::new(|x: &[f64], t: Dd| {
                (-(dd::PI * dd::PI * t)).exp() * (dd::PI * Dd::from_f64(x[0])).sin()
            }),
            Arc::new(|x: &[f64], t: Dd| {
                -(dd::PI * dd::PI)
                    * (-(dd::PI * dd::PI * t)).exp()
                    * (dd::PI * Dd::from_f64(x[0])).sin()
            }),
        )
        .unwrap();
        for i in 0..20 {
            let x = [0.05 + 0.045 * i as f64];
            let t = 0.05 * i as f64;
            assert!(p.forcing(&x, t).abs() < 1e-12, "f({x:?},{t}) nonzero");
        }
    }

    /// Independent divergence: central differences of the flux a(u)u_x.
    fn fd_divergence(p: &ManufacturedProblem, x: &[f64], t: f64) -> f64 {
        let d = p.grid.dim();
        let delta = 1e-4;
        let mut acc = 0.0;
        for axis in 0..d {
            let flux = |s: f64| -> f64 {
                let mut xp = [x[0], if d > 1 { x[1] } else { 0.0 }];
                xp[axis] = s;
                let mut xl = xp;
                xl[axis] -= delta;
                let mut xr = xp;
                xr[axis] += delta;
                let du = (p.u(&xr[..d], t) - p.u(&xl[..d], t)) / (2.0 * delta);
                p.coeff.a(p.u(&xp[..d], t)) * du
            };
            acc += (flux(x[axis] + delta) - flux(x[axis] - delta)) / (2.0 * delta);
        }
        acc
    }

    #[test]
    fn forcing_matches_fd_divergence_on_catalogue() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for p in builtin_problems() {
            let small = p.with_grid_size(9).unwrap();
            let d = small.grid.dim();
            for _ in 0..1000 {
                let x = [rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9)];
                let t = rng.gen_range(0.0..small.horizon);
                let f = small.forcing(&x[..d], t);
                let oracle = small.u_t(&x[..d], t) - fd_divergence(&small, &x[..d], t);
                let scale = f.abs().max(1.0);
                assert!(
                    (f - oracle).abs() <= 1e-6 * scale,
                    "{}: f={f}, oracle={oracle} at {x:?}, t={t}",
                    small.label
                );
            }
        }
    }

    #[test]
    fn sample_values_1d() {
        let p = problem_m1(3).unwrap();
        let s = p.sample_on_grid(0.0);
        let sqrt_half = 0.5f64.sqrt();
        assert!((s[0] - sqrt_half).abs() < 1e-15);
        assert!((s[1] - 1.0).abs() < 1e-15);
        assert!((s[2] - sqrt_half).abs() < 1e-15);
        assert_eq!(s.len(), 3);
    }

    #[test]
    fn sample_center_2d() {
        let p = problem_m3(3).unwrap();
        let s = p.sample_on_grid(0.0);
        assert_eq!(s.len(), 9);
        assert!((s[4] - 1.0).abs() < 1e-15); // center node (0.5, 0.5)
    }

    #[test]
    fn catalogue_contents() {
        let cat = builtin_problems();
        assert!(cat.len() >= 3);
        for p in &cat {
            assert!(p.boundary_max_abs(16) <= 1e-14, "{} boundary", p.label);
        }
        assert!(builtin_problem("nope", 15).is_err());
    }

    #[test]
    fn m2_trivial_start_nonzero_velocity() {
        let p = problem_m2(31).unwrap();
        let u0 = p.sample_on_grid(0.0);
        assert!(u0.iter().all(|v| v.abs() < 1e-15));
        let ut0: Vec<f64> = (0..31).map(|i| p.u_t(&p.grid.coords(i)[..1], 0.0)).collect();
        assert!(ut0.iter().any(|v| v.abs() > 0.1));
    }

    #[test]
    fn dd_samples_agree_with_f64() {
        for p in [problem_m1(15).unwrap(), problem_m2(15).unwrap()] {
            let t = 0.37;
            let a = p.sample_on_grid(t);
            let b = p.sample_on_grid_dd(Dd::from_f64(t));
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y.to_f64()).abs() < 1e-14);
            }
        }
    }
}
