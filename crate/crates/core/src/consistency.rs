//! Consistency defects: the residuals left when the exact solution is
//! inserted into the schemes.
//!
//! The fully implicit defect d_n = (1/τ) Σ δ_j u(t_{n-j}) + A(u(t_n))u(t_n)
//! - f(t_n) has two computable realizations: the operator form (with the
//! discrete A_h) and, using the differential equation, the pure
//! time-difference form d_n = (1/τ) Σ δ_j u(t_{n-j}) - ∂ₜu(t_n). They
//! differ by the O(h²) spatial truncation, which is reported as the form
//! gap. The linearly implicit defect adds the operator-difference term
//! d̃_n = d_n + (A_h(u(t_n)) - A_h(û(t_n)))u(t_n) at the extrapolated
//! argument û(t_n) = Σ γ_j u(t_{n-j-1}).
//!
//! The divided difference cancels O(1) samples down to O(τ^k); at k = 5
//! and τ = 1/320 that is below the f64 rounding of the samples, so the
//! time-difference form and the operator-difference term are evaluated in
//! double-double and rounded once at the end.

use num_traits::ToPrimitive;

use crate::bdf::BdfScheme;
use crate::coeff::CoefficientFn;
use crate::dd::{self, Dd};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::mms::ManufacturedProblem;
use crate::operator::assemble_operator;

/// Defect vectors of both schemes for n = k..N.
#[derive(Debug, Clone)]
pub struct DefectSeries {
    pub k: usize,
    pub tau: f64,
    /// First step index of the series (= k).
    pub first_n: usize,
    /// d_n in the time-difference realization.
    pub fully: Vec<Vec<f64>>,
    /// d̃_n = d_n + operator-difference correction.
    pub linearly: Vec<Vec<f64>>,
    /// ‖d_n‖_∞ per n.
    pub fully_norms: Vec<f64>,
    /// ‖d̃_n‖_∞ per n.
    pub linearly_norms: Vec<f64>,
    /// ‖d_n‖_∞ per n in the operator realization.
    pub operator_norms: Vec<f64>,
    /// max_n ‖operator form - time-difference form‖_∞, the spatial O(h²)
    /// truncation gap.
    pub form_gap: f64,
}

impl DefectSeries {
    pub fn max_fully(&self) -> f64 {
        self.fully_norms.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_linearly(&self) -> f64 {
        self.linearly_norms.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_operator_form(&self) -> f64 {
        self.operator_norms.iter().copied().fold(0.0, f64::max)
    }
}

/// (A_h(w) u)_i evaluated directly in double-double, with the same face
/// rule as the f64 assembly.
fn dd_operator_apply(grid: &Grid, coeff: &CoefficientFn, w: &[Dd], u: &[Dd]) -> Vec<Dd> {
    let n = grid.n_total();
    let half = Dd::from_f64(0.5);
    let mut out = vec![dd::ZERO; n];
    for axis in 0..grid.dim() {
        let h = grid.axes()[axis].h;
        let inv_h2 = dd::ONE / (Dd::from_f64(h) * Dd::from_f64(h));
        for i in 0..n {
            if let Some(j) = grid.neighbor_up(i, axis) {
                let af = coeff.a_dd(half * (w[i] + w[j]));
                let flux = af * (u[j] - u[i]) * inv_h2;
                out[i] = out[i] - flux;
                out[j] = out[j] + flux;
            }
            for lower in [true, false] {
                let at_wall = if lower {
                    grid.at_lower_wall(i, axis)
                } else {
                    grid.at_upper_wall(i, axis)
                };
                if at_wall {
                    let af = coeff.a_dd(half * w[i]);
                    out[i] = out[i] + af * u[i] * inv_h2;
                }
            }
        }
    }
    out
}

/// Compute both defect series for a manufactured problem.
pub fn defect_series(
    problem: &ManufacturedProblem,
    scheme: &BdfScheme,
    tau: f64,
) -> Result<DefectSeries> {
    let k = scheme.k;
    let t_end = problem.horizon;
    let n_steps = (t_end / tau).round();
    if ((n_steps * tau) - t_end).abs() > 1e-9 * t_end.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "horizon T = {t_end} is not an integer multiple of tau = {tau}"
        )));
    }
    let n_last = n_steps as usize;
    if n_last < k {
        return Err(Error::InvalidArgument("fewer steps than the scheme order".into()));
    }
    let grid = &problem.grid;
    let dim = grid.n_total();
    let tau_dd = Dd::from_f64(tau);
    // exact rational coefficients promoted to dd
    let rat = |r: &num_rational::Rational64| {
        Dd::from_f64(r.numer().to_f64().unwrap()) / Dd::from_f64(r.denom().to_f64().unwrap())
    };
    let delta_dd: Vec<Dd> = scheme.delta.iter().map(rat).collect();
    let gamma_dd: Vec<Dd> = scheme.gamma.iter().map(rat).collect();

    let t_of = |m: usize| Dd::from_f64(m as f64) * tau_dd;
    let samples_dd: Vec<Vec<Dd>> =
        (0..=n_last).map(|m| problem.sample_on_grid_dd(t_of(m))).collect();
    let samples_f64: Vec<Vec<f64>> = samples_dd
        .iter()
        .map(|v| v.iter().map(|x| x.to_f64()).collect())
        .collect();

    let mut fully = Vec::with_capacity(n_last + 1 - k);
    let mut linearly = Vec::with_capacity(n_last + 1 - k);
    let mut fully_norms = Vec::with_capacity(n_last + 1 - k);
    let mut linearly_norms = Vec::with_capacity(n_last + 1 - k);
    let mut operator_norms = Vec::with_capacity(n_last + 1 - k);
    let mut form_gap = 0.0f64;

    for n in k..=n_last {
        // time-difference form in dd
        let u_t = problem.sample_u_t_on_grid_dd(t_of(n));
        let mut td = vec![dd::ZERO; dim];
        for j in 0..=k {
            let c = delta_dd[j];
            let s = &samples_dd[n - j];
            for i in 0..dim {
                td[i] = td[i] + c * s[i];
            }
        }
        for i in 0..dim {
            td[i] = td[i] / tau_dd - u_t[i];
        }
        let td_f64: Vec<f64> = td.iter().map(|x| x.to_f64()).collect();

        // operator form in f64: (1/τ)Σ δ_j û_{n-j} + A_h(û_n)û_n - f_n
        let op = assemble_operator(grid, &problem.coeff, &samples_f64[n])?;
        let au = op.apply(&samples_f64[n])?;
        let f_n = problem.forcing_on_grid(n as f64 * tau);
        let mut gap_n = 0.0f64;
        let mut op_norm = 0.0f64;
        for i in 0..dim {
            let mut s = 0.0;
            for j in 0..=k {
                s += scheme.delta_f64()[j] * samples_f64[n - j][i];
            }
            let op_form = s / tau + au[i] - f_n[i];
            gap_n = gap_n.max((op_form - td_f64[i]).abs());
            op_norm = op_norm.max(op_form.abs());
        }
        form_gap = form_gap.max(gap_n);
        operator_norms.push(op_norm);

        // operator-difference correction at the extrapolated argument, in dd
        let mut u_hat = vec![dd::ZERO; dim];
        for (j, &g) in gamma_dd.iter().enumerate() {
            let s = &samples_dd[n - j - 1];
            for i in 0..dim {
                u_hat[i] = u_hat[i] + g * s[i];
            }
        }
        let a_u = dd_operator_apply(grid, &problem.coeff, &samples_dd[n], &samples_dd[n]);
        let a_hat = dd_operator_apply(grid, &problem.coeff, &u_hat, &samples_dd[n]);
        let lin: Vec<f64> = (0..dim)
            .map(|i| (td[i] + (a_u[i] - a_hat[i])).to_f64())
            .collect();

        fully_norms.push(td_f64.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        linearly_norms.push(lin.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        fully.push(td_f64);
        linearly.push(lin);
    }

    Ok(DefectSeries {
        k,
        tau,
        first_n: k,
        fully,
        linearly,
        fully_norms,
        linearly_norms,
        operator_norms,
        form_gap,
    })
}

/// Fully implicit defect series (d_n).
pub fn defect_fully(
    problem: &ManufacturedProblem,
    scheme: &BdfScheme,
    tau: f64,
) -> Result<DefectSeries> {
    defect_series(problem, scheme, tau)
}

/// Linearly implicit defect series (d̃_n, computed alongside d_n).
pub fn defect_linearly(
    problem: &ManufacturedProblem,
    scheme: &BdfScheme,
    tau: f64,
) -> Result<DefectSeries> {
    defect_series(problem, scheme, tau)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrderEstimate {
    /// All defects at rounding level — the solution is reproduced exactly.
    Exact,
    /// Least-squares slope of log max-defect against log τ.
    Slope(f64),
}

/// Observed order from a τ-sweep of max defects.
pub fn defect_order(taus: &[f64], max_defects: &[f64]) -> Result<OrderEstimate> {
    if taus.len() != max_defects.len() {
        return Err(Error::DimensionMismatch { expected: taus.len(), got: max_defects.len() });
    }
    if taus.len() < 3 {
        return Err(Error::InvalidArgument(
            "need at least 3 step sizes for an order estimate".into(),
        ));
    }
    if max_defects.iter().all(|&d| d < 1e-12) {
        return Ok(OrderEstimate::Exact);
    }
    Ok(OrderEstimate::Slope(least_squares_slope(taus, max_defects)?))
}

/// Least-squares slope of ln(y) against ln(x).
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument("slope needs two or more points".into()));
    }
    if y.iter().any(|&v| v <= 0.0) || x.iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidArgument(
            "slope needs positive values on both axes".into(),
        ));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mms::problem_m1;
    use std::sync::Arc;

    /// u = t²·x(1-x) with a ≡ 1: a polynomial-in-time probe problem.
    fn quadratic_time_problem(n: usize) -> ManufacturedProblem {
        ManufacturedProblem::new(
            "t2",
            Grid::unit_interval(n).unwrap(),
            CoefficientFn::constant(1.0),
            1.0,
            Arc::new(|x: &[f64], t| t * t * x[0] * (1.0 - x[0])),
            Arc::new(|x: &[f64], t| 2.0 * t * x[0] * (1.0 - x[0])),
            vec![Arc::new(|x: &[f64], t| t * t * (1.0 - 2.0 * x[0]))],
            Arc::new(|_x: &[f64], t| -2.0 * t * t),
            Arc::new(|x: &[f64], t: Dd| t * t * Dd::from_f64(x[0] * (1.0 - x[0]))),
            Arc::new(|x: &[f64], t: Dd| {
                Dd::from_f64(2.0) * t * Dd::from_f64(x[0] * (1.0 - x[0]))
            }),
        )
        .unwrap()
    }

    fn linear_time_problem(n: usize) -> ManufacturedProblem {
        ManufacturedProblem::new(
            "t1",
            Grid::unit_interval(n).unwrap(),
            CoefficientFn::one_plus_u_sq(),
            1.0,
            Arc::new(|x: &[f64], t| t * x[0] * (1.0 - x[0])),
            Arc::new(|x: &[f64], _t| x[0] * (1.0 - x[0])),
            vec![Arc::new(|x: &[f64], t| t * (1.0 - 2.0 * x[0]))],
            Arc::new(|_x: &[f64], t| -2.0 * t),
            Arc::new(|x: &[f64], t: Dd| t * Dd::from_f64(x[0] * (1.0 - x[0]))),
            Arc::new(|x: &[f64], _t: Dd| Dd::from_f64(x[0] * (1.0 - x[0]))),
        )
        .unwrap()
    }

    #[test]
    fn difference_kernel_on_quadratic() {
        // k=1, u ~ t² in time: (t_n² - t_{n-1}²)/τ - 2t_n = -τ, scaled by
        // the spatial profile
        let p = quadratic_time_problem(7);
        let scheme = BdfScheme::new(1).unwrap();
        let tau = 0.125;
        let series = defect_series(&p, &scheme, tau).unwrap();
        for (m, d) in series.fully.iter().enumerate() {
            for (i, v) in d.iter().enumerate() {
                let x = p.grid.coords(i)[0];
                let expect = -tau * x * (1.0 - x);
                assert!((v - expect).abs() < 1e-13, "offset {m}, node {i}: {v} vs {expect}");
            }
        }
    }

    #[test]
    fn linear_in_time_solution_has_zero_defect() {
        let p = linear_time_problem(9);
        for k in 1..=5 {
            let scheme = BdfScheme::new(k).unwrap();
            let series = defect_series(&p, &scheme, 0.125).unwrap();
            assert!(series.max_fully() < 1e-13, "k={k}: {}", series.max_fully());
            // degree <= k-1 in time also makes the extrapolation exact, so
            // the linearly implicit correction vanishes for k >= 2
            if k >= 2 {
                assert!(series.max_linearly() < 1e-12, "k={k}: {}", series.max_linearly());
            }
        }
    }

    #[test]
    fn quadratic_exact_for_orders_two_and_up() {
        let p = quadratic_time_problem(7);
        for k in 2..=5 {
            let scheme = BdfScheme::new(k).unwrap();
            let series = defect_series(&p, &scheme, 0.125).unwrap();
            assert!(series.max_fully() < 1e-12, "k={k}");
        }
        let order = defect_order(&[0.25, 0.125, 0.0625], &[1e-14, 1e-14, 1e-14]).unwrap();
        assert_eq!(order, OrderEstimate::Exact);
    }

    #[test]
    fn constant_coefficient_makes_both_defects_equal() {
        // a ≡ const: the operator ignores its argument, d̃_n = d_n exactly
        let p = quadratic_time_problem(9);
        let scheme = BdfScheme::new(3).unwrap();
        let series = defect_series(&p, &scheme, 0.1).unwrap();
        for (d, dl) in series.fully.iter().zip(&series.linearly) {
            for (a, b) in d.iter().zip(dl) {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn correction_term_scales_with_order_k() {
        // ‖d̃_n - d_n‖_∞ = O(τ^k) on a quasilinear problem
        let p = problem_m1(31).unwrap();
        let scheme = BdfScheme::new(3).unwrap();
        let taus = [1.0 / 20.0, 1.0 / 40.0, 1.0 / 80.0, 1.0 / 160.0];
        let mut gaps = Vec::new();
        for &tau in &taus {
            let s = defect_series(&p, &scheme, tau).unwrap();
            let gap = s
                .fully
                .iter()
                .zip(&s.linearly)
                .map(|(d, dl)| {
                    d.iter().zip(dl).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max)
                })
                .fold(0.0f64, f64::max);
            gaps.push(gap);
        }
        let slope = least_squares_slope(&taus, &gaps).unwrap();
        assert!((slope - 3.0).abs() < 0.25, "slope {slope}");
    }

    #[test]
    fn form_gap_shrinks_quadratically_in_h() {
        let scheme = BdfScheme::new(2).unwrap();
        let tau = 0.05;
        let gaps: Vec<f64> = [31usize, 63, 127]
            .iter()
            .map(|&n| defect_series(&problem_m1(n).unwrap(), &scheme, tau).unwrap().form_gap)
            .collect();
        let s1 = (gaps[0] / gaps[1]).log2();
        let s2 = (gaps[1] / gaps[2]).log2();
        assert!((s1 - 2.0).abs() < 0.2, "h-slope {s1}");
        assert!((s2 - 2.0).abs() < 0.2, "h-slope {s2}");
    }

    #[test]
    fn td_and_operator_slopes_agree_when_h_resolves_both() {
        // at k = 1 on τ >= 1/40 the defect dominates the O(h²) floor, so
        // the two realizations give the same observed order
        let p = problem_m1(255).unwrap();
        let scheme = BdfScheme::new(1).unwrap();
        let taus = [1.0 / 10.0, 1.0 / 20.0, 1.0 / 40.0];
        let mut td_max = Vec::new();
        let mut op_max = Vec::new();
        for &tau in &taus {
            let s = defect_series(&p, &scheme, tau).unwrap();
            td_max.push(s.max_fully());
            op_max.push(s.max_operator_form());
        }
        let s_td = least_squares_slope(&taus, &td_max).unwrap();
        let s_op = least_squares_slope(&taus, &op_max).unwrap();
        assert!((s_td - s_op).abs() < 0.1, "td {s_td} vs op {s_op}");
    }

    #[test]
    fn order_estimate_input_validation() {
        assert!(defect_order(&[0.1, 0.05], &[1.0, 0.5]).is_err());
        assert!(defect_order(&[0.1, 0.05, 0.025], &[1.0, 0.5]).is_err());
    }
}
