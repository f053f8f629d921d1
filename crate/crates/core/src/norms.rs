//! Discrete spatial norms and composite in-time norms.
//!
//! All spatial norms act on interior-node vectors with the homogeneous
//! Dirichlet zero-extension: difference quotients across wall faces count
//! the jump to zero. The composite time norm is
//! ‖(v_n)‖ = (τ Σ v_n^p)^{1/p}, the L^p(0, Nτ) norm of the piecewise
//! constant interpolant.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::mms::ManufacturedProblem;
use crate::operator::discrete_laplacian;
use crate::stepper::SolutionHistory;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpatialNorm {
    Linf,
    L2,
    /// (‖v‖_L2² + Σ_faces h^d (Δv/h)²)^{1/2} with zero extension.
    H1,
    /// ‖L_h v‖_L2 with L_h the a ≡ 1 operator — a second-difference proxy
    /// for the H² seminorm.
    H2Proxy,
    /// max over faces |Δv|/h — a W^{1,∞} seminorm proxy.
    W1InfProxy,
}

/// Sum over all faces (interior and wall) of `f(dv, axis)` where dv is the
/// jump across the face in the +axis direction with zero extension.
fn fold_faces<F: FnMut(f64, usize)>(v: &[f64], grid: &Grid, mut f: F) {
    for axis in 0..grid.dim() {
        for i in 0..grid.n_total() {
            if let Some(j) = grid.neighbor_up(i, axis) {
                f(v[j] - v[i], axis);
            }
            if grid.at_lower_wall(i, axis) {
                f(v[i] - 0.0, axis);
            }
            if grid.at_upper_wall(i, axis) {
                f(0.0 - v[i], axis);
            }
        }
    }
}

pub fn spatial_norm(v: &[f64], grid: &Grid, which: SpatialNorm) -> Result<f64> {
    if v.len() != grid.n_total() {
        return Err(Error::DimensionMismatch { expected: grid.n_total(), got: v.len() });
    }
    let vol = grid.cell_volume();
    Ok(match which {
        SpatialNorm::Linf => v.iter().fold(0.0f64, |m, x| m.max(x.abs())),
        SpatialNorm::L2 => (vol * v.iter().map(|x| x * x).sum::<f64>()).sqrt(),
        SpatialNorm::H1 => {
            let l2_sq = vol * v.iter().map(|x| x * x).sum::<f64>();
            let mut semi = 0.0;
            fold_faces(v, grid, |dv, axis| {
                let h = grid.axes()[axis].h;
                semi += vol * (dv / h) * (dv / h);
            });
            (l2_sq + semi).sqrt()
        }
        SpatialNorm::H2Proxy => {
            let lap = discrete_laplacian(grid);
            let lv = lap.apply(v)?;
            (vol * lv.iter().map(|x| x * x).sum::<f64>()).sqrt()
        }
        SpatialNorm::W1InfProxy => {
            let mut worst = 0.0f64;
            fold_faces(v, grid, |dv, axis| {
                worst = worst.max((dv / grid.axes()[axis].h).abs());
            });
            worst
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeComposite {
    MaxOverN,
    Lp(f64),
}

pub fn time_composite(values: &[f64], tau: f64, spec: TimeComposite) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("empty sequence in time_composite".into()));
    }
    if tau <= 0.0 {
        return Err(Error::InvalidArgument("tau must be positive".into()));
    }
    Ok(match spec {
        TimeComposite::MaxOverN => values.iter().fold(0.0f64, |m, v| m.max(*v)),
        TimeComposite::Lp(p) => {
            if p <= 1.0 {
                return Err(Error::InvalidArgument(format!("p = {p} must exceed 1")));
            }
            (tau * values.iter().map(|v| v.powf(p)).sum::<f64>()).powf(1.0 / p)
        }
    })
}

/// Errors of a trajectory in the norms of the convergence statements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    /// max_n ‖e_n‖_∞
    pub max_linf: f64,
    /// max_n of the W^{1,∞} proxy
    pub max_w1inf: f64,
    /// (τ Σ ‖e_n‖_{H¹}²)^{1/2}
    pub l2_h1: f64,
    /// (τ Σ ‖e_n‖_{H²proxy}²)^{1/2}
    pub l2_h2: f64,
}

/// Error report of the computed steps (n = start+k .. N) against exact
/// samples of the manufactured solution.
pub fn error_report(
    history: &SolutionHistory,
    problem: &ManufacturedProblem,
) -> Result<ErrorReport> {
    if problem.grid != *history.grid() {
        return Err(Error::InvalidArgument(
            "history and problem use different grids".into(),
        ));
    }
    error_report_against(history, |n| Ok(problem.sample_on_grid(n as f64 * history.tau)))
}

/// Error report against an arbitrary per-step oracle (e.g. a fine-reference
/// trajectory restricted to this run's steps).
pub fn error_report_against<F>(history: &SolutionHistory, oracle: F) -> Result<ErrorReport>
where
    F: Fn(usize) -> Result<Vec<f64>>,
{
    let grid = history.grid();
    let k = history.k;
    let mut linf = Vec::new();
    let mut w1inf = Vec::new();
    let mut h1 = Vec::new();
    let mut h2 = Vec::new();
    for (offset, state) in history.states.iter().enumerate().skip(k) {
        let n = history.start + offset;
        let exact = oracle(n)?;
        if exact.len() != state.len() {
            return Err(Error::DimensionMismatch { expected: state.len(), got: exact.len() });
        }
        let e: Vec<f64> = state.iter().zip(&exact).map(|(a, b)| a - b).collect();
        linf.push(spatial_norm(&e, grid, SpatialNorm::Linf)?);
        w1inf.push(spatial_norm(&e, grid, SpatialNorm::W1InfProxy)?);
        h1.push(spatial_norm(&e, grid, SpatialNorm::H1)?);
        h2.push(spatial_norm(&e, grid, SpatialNorm::H2Proxy)?);
    }
    Ok(ErrorReport {
        max_linf: time_composite(&linf, history.tau, TimeComposite::MaxOverN)?,
        max_w1inf: time_composite(&w1inf, history.tau, TimeComposite::MaxOverN)?,
        l2_h1: time_composite(&h1, history.tau, TimeComposite::Lp(2.0))?,
        l2_h2: time_composite(&h2, history.tau, TimeComposite::Lp(2.0))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn linf_example() {
        let g = Grid::unit_interval(3).unwrap();
        assert_eq!(spatial_norm(&[1.0, -2.0, 3.0], &g, SpatialNorm::Linf).unwrap(), 3.0);
    }

    #[test]
    fn h1_seminorm_linear_ramp() {
        // v_i = x_i on n = 3, h = 1/4; faces carry slopes (1,1,1,-3)
        let g = Grid::unit_interval(3).unwrap();
        let v = [0.25, 0.5, 0.75];
        let h1 = spatial_norm(&v, &g, SpatialNorm::H1).unwrap();
        // direct summation oracle
        let h = 0.25;
        let semi: f64 = [v[0] - 0.0, v[1] - v[0], v[2] - v[1], 0.0 - v[2]]
            .iter()
            .map(|d| h * (d / h) * (d / h))
            .sum();
        let l2_sq: f64 = h * v.iter().map(|x| x * x).sum::<f64>();
        assert!((h1 - (l2_sq + semi).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn h1_of_sine_approaches_analytic() {
        use std::f64::consts::PI;
        let n = 255;
        let g = Grid::unit_interval(n).unwrap();
        let v: Vec<f64> = (0..n).map(|i| (PI * g.coords(i)[0]).sin()).collect();
        let h1 = spatial_norm(&v, &g, SpatialNorm::H1).unwrap();
        // ‖sin(πx)‖_{H¹}² = ½ + π²/2
        let analytic = (0.5 + PI * PI / 2.0).sqrt();
        assert!((h1 - analytic).abs() / analytic < 0.02, "h1={h1} vs {analytic}");
    }

    #[test]
    fn time_composite_examples() {
        assert_eq!(
            time_composite(&[2.0, 1.0, 3.0], 0.1, TimeComposite::MaxOverN).unwrap(),
            3.0
        );
        let v = time_composite(&[1.0, 1.0, 1.0, 1.0], 0.25, TimeComposite::Lp(2.0)).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        let w = time_composite(&[1.0, 2.0], 0.5, TimeComposite::Lp(2.0)).unwrap();
        assert!((w - 2.5f64.sqrt()).abs() < 1e-15);
        assert!(time_composite(&[], 0.5, TimeComposite::MaxOverN).is_err());
        assert!(time_composite(&[1.0], 0.5, TimeComposite::Lp(0.5)).is_err());
    }

    #[test]
    fn poincare_constant_bounded() {
        // ‖v‖_L2 <= C ‖v‖_{H1-seminorm} with C² = 1/λ_min(L_h); check the
        // random-vector inequality against the lowest-mode constant.
        use rand::{Rng, SeedableRng};
        use std::f64::consts::PI;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for n in [15usize, 31, 63] {
            let g = Grid::unit_interval(n).unwrap();
            let h = g.axes()[0].h;
            let lambda_min = 2.0 / (h * h) * (1.0 - (PI * h).cos());
            let c = (1.0 / lambda_min).sqrt();
            for _ in 0..20 {
                let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let l2 = spatial_norm(&v, &g, SpatialNorm::L2).unwrap();
                let h1 = spatial_norm(&v, &g, SpatialNorm::H1).unwrap();
                let semi = (h1 * h1 - l2 * l2).max(0.0).sqrt();
                assert!(l2 <= c * semi * (1.0 + 1e-10), "n={n}: {l2} > {c}·{semi}");
            }
        }
    }

    proptest! {
        #[test]
        fn norm_axioms(v in proptest::collection::vec(-100.0f64..100.0, 7),
                       w in proptest::collection::vec(-100.0f64..100.0, 7),
                       s in -10.0f64..10.0) {
            let g = Grid::unit_interval(7).unwrap();
            for which in [SpatialNorm::Linf, SpatialNorm::L2, SpatialNorm::H1, SpatialNorm::H2Proxy, SpatialNorm::W1InfProxy] {
                let nv = spatial_norm(&v, &g, which).unwrap();
                prop_assert!(nv >= 0.0);
                // homogeneity
                let sv: Vec<f64> = v.iter().map(|x| s * x).collect();
                let nsv = spatial_norm(&sv, &g, which).unwrap();
                prop_assert!((nsv - s.abs() * nv).abs() <= 1e-12 * (1.0 + nsv.abs()));
                // triangle inequality
                let vw: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a + b).collect();
                let nvw = spatial_norm(&vw, &g, which).unwrap();
                let nw = spatial_norm(&w, &g, which).unwrap();
                prop_assert!(nvw <= nv + nw + 1e-12 * (1.0 + nv + nw));
            }
        }

        #[test]
        fn partition_independence(v in 0.01f64..100.0, n in 2usize..50, p in 1.5f64..4.0) {
            // equal values v over total time 1 give back v for any partition
            let tau = 1.0 / n as f64;
            let vals = vec![v; n];
            let out = time_composite(&vals, tau, TimeComposite::Lp(p)).unwrap();
            prop_assert!((out - v).abs() <= 1e-10 * v);
        }
    }
}
