//! Configuration-driven convergence and defect studies with CSV output.
//!
//! Temporal order is measured in fine-reference mode: the error of a run at
//! step size τ is taken against a reference trajectory on the same grid,
//! same scheme and variant, at τ_ref = τ_min/refinement. To isolate the
//! time-discretization error the measured run starts at a warm-start offset
//! t_s (a multiple of τ) with its k starting values read off the reference:
//! starting instead from continuum samples at t = 0 injects the O(h²)
//! mismatch between the sampled solution and the semidiscrete flow, which
//! floors the observable error at O(τ·h²) and hides orders k >= 3.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Deserialize;

use crate::bdf::BdfScheme;
use crate::consistency::{defect_series, least_squares_slope};
use crate::error::{Error, Result};
use crate::mms::{builtin_problem, ManufacturedProblem};
use crate::norms::{error_report_against, ErrorReport};
use crate::operator::SpatialOperator;
use crate::stepper::{run, EnergyTrace, NewtonCfg, RunOptions, RunResult, SolutionHistory, Variant};

/// Newton tolerance for study runs: the default tol_rel = 1e-10 against
/// ‖rhs‖ ~ ‖u‖/τ accepts steps with O(1e-8) solution error, which floors
/// the measurable error of the high orders; studies iterate essentially to
/// the rounding floor instead (the stall escape keeps this safe).
fn study_newton() -> NewtonCfg {
    NewtonCfg { tol_abs: 1e-12, tol_rel: 1e-13, max_iter: 25 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceMode {
    /// Compare against a same-grid trajectory at τ_ref = τ_min/refinement.
    FineReference,
    /// Compare against exact manufactured samples (combined space-time
    /// error; needs h² well below the smallest τ^k of interest).
    ExactMms,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantName {
    FullyImplicit,
    LinearlyImplicit,
}

impl From<VariantName> for Variant {
    fn from(v: VariantName) -> Variant {
        match v {
            VariantName::FullyImplicit => Variant::FullyImplicit,
            VariantName::LinearlyImplicit => Variant::LinearlyImplicit,
        }
    }
}

fn default_reference() -> ReferenceMode {
    ReferenceMode::FineReference
}
fn default_refinement() -> usize {
    16
}
fn default_order_tolerance() -> f64 {
    0.25
}
fn default_warm_start_fraction() -> f64 {
    0.1
}

/// Convergence study configuration (the `[study]` table).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub problem: String,
    pub orders: Vec<usize>,
    pub variants: Vec<VariantName>,
    /// Strictly decreasing, geometric.
    pub taus: Vec<f64>,
    #[serde(default = "default_reference")]
    pub reference: ReferenceMode,
    #[serde(default = "default_refinement")]
    pub refinement: usize,
    /// Interior nodes per axis.
    pub grid_size: usize,
    #[serde(default = "default_order_tolerance")]
    pub order_tolerance: f64,
    #[serde(default)]
    pub energy_diagnostics: bool,
    /// Fine-reference warm start t_s as a fraction of T.
    #[serde(default = "default_warm_start_fraction")]
    pub warm_start_fraction: f64,
}

/// Defect study configuration (the `[defects]` table).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefectConfig {
    pub problem: String,
    pub orders: Vec<usize>,
    pub taus: Vec<f64>,
    pub grid_size: usize,
    #[serde(default = "default_order_tolerance")]
    pub order_tolerance: f64,
}

/// A study file, holding either or both tables.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub study: Option<StudyConfig>,
    pub defects: Option<DefectConfig>,
}

pub fn parse_config(text: &str) -> Result<ConfigFile> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

fn validate_taus(taus: &[f64], horizon: f64) -> Result<()> {
    if taus.len() < 2 {
        return Err(Error::Config("need at least two step sizes".into()));
    }
    for w in taus.windows(2) {
        if w[1] >= w[0] {
            return Err(Error::Config("taus must be strictly decreasing".into()));
        }
    }
    let ratio = taus[1] / taus[0];
    for w in taus.windows(2) {
        if (w[1] / w[0] - ratio).abs() > 1e-12 {
            return Err(Error::Config("taus must form a geometric sequence".into()));
        }
    }
    for &tau in taus {
        let n = (horizon / tau).round();
        if (n * tau - horizon).abs() > 1e-9 * horizon.max(1.0) {
            return Err(Error::Config(format!(
                "tau = {tau} does not divide the horizon T = {horizon}"
            )));
        }
    }
    Ok(())
}

/// One (k, variant, τ) measurement.
#[derive(Debug, Clone)]
pub struct TauPoint {
    pub tau: f64,
    pub errors: ErrorReport,
    /// Pairwise observed order vs the previous (coarser) τ.
    pub order_linf: Option<f64>,
    pub order_l2h1: Option<f64>,
    pub min_energy_slack: Option<f64>,
    pub max_newton_iterations: Option<usize>,
}

/// All τ points of one (k, variant) group with its fitted slopes.
#[derive(Debug, Clone)]
pub struct GroupReport {
    pub k: usize,
    pub variant: Variant,
    pub points: Vec<TauPoint>,
    pub slope_linf: f64,
    pub slope_l2h1: f64,
    pub slope_w1inf: f64,
    pub slope_l2h2: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub groups: Vec<GroupReport>,
    pub order_tolerance: f64,
}

impl ConvergenceReport {
    pub fn all_pass(&self) -> bool {
        self.groups.iter().all(|g| g.pass)
    }
}

struct GroupRun {
    results: Vec<(RunResult, ErrorReport)>,
}

/// First starting-value index of the warm-started run at this τ. The first
/// computed step then lands at the common time t_c = (⌈f·T/τ_max⌉ + k)·τ_max
/// for every τ in the sweep, so all runs are measured on the identical
/// window [t_c, T]; τ-dependent windows would let finer runs pick up error
/// transients the coarser runs never see and skew the observed order.
fn warm_start_step(
    cfg: &StudyConfig,
    problem: &ManufacturedProblem,
    tau: f64,
    k: usize,
) -> Result<usize> {
    let tau_max = cfg.taus[0];
    let m0 = (cfg.warm_start_fraction * problem.horizon / tau_max).ceil() as usize;
    let stride = (tau_max / tau).round() as usize;
    let first_computed = (m0 + k) * stride;
    let n_last = (problem.horizon / tau).round() as usize;
    if first_computed >= n_last {
        return Err(Error::Config(format!(
            "warm start at fraction {} leaves no measurable window for k = {k}, tau = {tau}",
            cfg.warm_start_fraction
        )));
    }
    Ok(first_computed - k)
}

fn run_group(
    cfg: &StudyConfig,
    problem: &ManufacturedProblem,
    k: usize,
    variant: Variant,
) -> Result<GroupRun> {
    let scheme = BdfScheme::new(k)?;
    let reference: Option<SolutionHistory> = match cfg.reference {
        ReferenceMode::FineReference => {
            let tau_ref = cfg.taus.last().unwrap() / cfg.refinement as f64;
            let opts = RunOptions { newton: study_newton(), ..Default::default() };
            let out = run(problem, &scheme, variant, tau_ref, &opts)?;
            Some(out.history)
        }
        ReferenceMode::ExactMms => None,
    };

    let results: Result<Vec<(RunResult, ErrorReport)>> = cfg
        .taus
        .par_iter()
        .map(|&tau| {
            let mut opts = RunOptions {
                newton: study_newton(),
                energy: cfg.energy_diagnostics,
                record_newton: variant == Variant::FullyImplicit,
                ..Default::default()
            };
            match &reference {
                Some(ref_hist) => {
                    let stride = (tau / ref_hist.tau).round() as usize;
                    if ((stride as f64) * ref_hist.tau - tau).abs() > 1e-9 * tau {
                        return Err(Error::Config(format!(
                            "tau = {tau} is not a multiple of the reference step {}",
                            ref_hist.tau
                        )));
                    }
                    let s = warm_start_step(cfg, problem, tau, k)?;
                    opts.start_step = s;
                    opts.initial_history = Some(
                        (0..k).map(|j| ref_hist.state((s + j) * stride).to_vec()).collect(),
                    );
                    let out = run(problem, &scheme, variant, tau, &opts)?;
                    let report = error_report_against(&out.history, |n| {
                        Ok(ref_hist.state(n * stride).to_vec())
                    })?;
                    Ok((out, report))
                }
                None => {
                    let out = run(problem, &scheme, variant, tau, &opts)?;
                    let report = error_report_against(&out.history, |n| {
                        Ok(problem.sample_on_grid(n as f64 * tau))
                    })?;
                    Ok((out, report))
                }
            }
        })
        .collect();
    Ok(GroupRun { results: results? })
}

/// Run the convergence study of the configuration.
pub fn run_convergence_study(cfg: &StudyConfig) -> Result<ConvergenceReport> {
    let problem = builtin_problem(&cfg.problem, cfg.grid_size)?;
    validate_taus(&cfg.taus, problem.horizon)?;
    if cfg.orders.is_empty() || cfg.variants.is_empty() {
        return Err(Error::Config("orders and variants must be nonempty".into()));
    }
    for &k in &cfg.orders {
        if k < 1 || k > crate::bdf::MAX_ORDER {
            return Err(Error::Config(format!("order k = {k} out of range")));
        }
    }
    if cfg.reference == ReferenceMode::FineReference && cfg.refinement < 8 {
        return Err(Error::Config(format!(
            "reference refinement {} is below the minimum of 8",
            cfg.refinement
        )));
    }
    if !(0.0..0.9).contains(&cfg.warm_start_fraction) {
        return Err(Error::Config("warm_start_fraction must lie in [0, 0.9)".into()));
    }

    let combos: Vec<(usize, VariantName)> = cfg
        .orders
        .iter()
        .flat_map(|&k| cfg.variants.iter().map(move |&v| (k, v)))
        .collect();

    let group_runs: Result<Vec<((usize, Variant), GroupRun)>> = combos
        .par_iter()
        .map(|&(k, vn)| {
            let variant = Variant::from(vn);
            run_group(cfg, &problem, k, variant).map(|g| ((k, variant), g))
        })
        .collect();

    let mut groups = Vec::new();
    for ((k, variant), group) in group_runs? {
        let errs: Vec<&ErrorReport> = group.results.iter().map(|(_, e)| e).collect();
        let linf: Vec<f64> = errs.iter().map(|e| e.max_linf).collect();
        let l2h1: Vec<f64> = errs.iter().map(|e| e.l2_h1).collect();
        let w1inf: Vec<f64> = errs.iter().map(|e| e.max_w1inf).collect();
        let l2h2: Vec<f64> = errs.iter().map(|e| e.l2_h2).collect();
        let slope_linf = least_squares_slope(&cfg.taus, &linf)?;
        let slope_l2h1 = least_squares_slope(&cfg.taus, &l2h1)?;
        let slope_w1inf = least_squares_slope(&cfg.taus, &w1inf)?;
        let slope_l2h2 = least_squares_slope(&cfg.taus, &l2h2)?;
        let kf = k as f64;
        let pass = (slope_linf - kf).abs() <= cfg.order_tolerance
            && (slope_l2h1 - kf).abs() <= cfg.order_tolerance;

        let mut points = Vec::new();
        for (i, (out, e)) in group.results.iter().enumerate() {
            let pair_order = |cur: f64, prev: f64| -> Option<f64> {
                if i == 0 {
                    None
                } else {
                    Some((prev / cur).ln() / (cfg.taus[i - 1] / cfg.taus[i]).ln())
                }
            };
            points.push(TauPoint {
                tau: cfg.taus[i],
                errors: *e,
                order_linf: pair_order(e.max_linf, errs[i.saturating_sub(1)].max_linf),
                order_l2h1: pair_order(e.l2_h1, errs[i.saturating_sub(1)].l2_h1),
                min_energy_slack: out.energy.as_ref().map(EnergyTrace::min_slack),
                max_newton_iterations: out
                    .newton
                    .as_ref()
                    .map(|d| d.iter().map(|n| n.iterations).max().unwrap_or(0)),
            });
        }
        groups.push(GroupReport {
            k,
            variant,
            points,
            slope_linf,
            slope_l2h1,
            slope_w1inf,
            slope_l2h2,
            pass,
        });
    }
    Ok(ConvergenceReport { groups, order_tolerance: cfg.order_tolerance })
}

/// One row of the defect study.
#[derive(Debug, Clone)]
pub struct DefectRow {
    pub k: usize,
    pub tau: f64,
    pub max_defect_fully: f64,
    pub max_defect_lin: f64,
    pub form_gap: f64,
}

#[derive(Debug, Clone)]
pub struct DefectGroup {
    pub k: usize,
    pub rows: Vec<DefectRow>,
    pub slope_fully: f64,
    pub slope_lin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct DefectReport {
    pub groups: Vec<DefectGroup>,
    pub order_tolerance: f64,
}

impl DefectReport {
    pub fn all_pass(&self) -> bool {
        self.groups.iter().all(|g| g.pass)
    }
}

pub fn run_defect_study(cfg: &DefectConfig) -> Result<DefectReport> {
    let problem = builtin_problem(&cfg.problem, cfg.grid_size)?;
    validate_taus(&cfg.taus, problem.horizon)?;
    let groups: Result<Vec<DefectGroup>> = cfg
        .orders
        .par_iter()
        .map(|&k| {
            let scheme = BdfScheme::new(k)?;
            let rows: Result<Vec<DefectRow>> = cfg
                .taus
                .par_iter()
                .map(|&tau| {
                    let s = defect_series(&problem, &scheme, tau)?;
                    Ok(DefectRow {
                        k,
                        tau,
                        max_defect_fully: s.max_fully(),
                        max_defect_lin: s.max_linearly(),
                        form_gap: s.form_gap,
                    })
                })
                .collect();
            let rows = rows?;
            let fully: Vec<f64> = rows.iter().map(|r| r.max_defect_fully).collect();
            let lin: Vec<f64> = rows.iter().map(|r| r.max_defect_lin).collect();
            let slope_fully = least_squares_slope(&cfg.taus, &fully)?;
            let slope_lin = least_squares_slope(&cfg.taus, &lin)?;
            let kf = k as f64;
            let pass = (slope_fully - kf).abs() <= cfg.order_tolerance
                && (slope_lin - kf).abs() <= cfg.order_tolerance;
            Ok(DefectGroup { k, rows, slope_fully, slope_lin, pass })
        })
        .collect();
    Ok(DefectReport { groups: groups?, order_tolerance: cfg.order_tolerance })
}

// ---- CSV emission (fixed formats for byte-stable output) ----

fn fmt_e(x: f64) -> String {
    format!("{:.12e}", x)
}

fn fmt_order(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{:.6}", v),
        None => String::new(),
    }
}

/// Columns: k, variant, tau, err_Linf, err_W1inf, err_l2H1, err_l2H2,
/// order_Linf, order_l2H1, pass.
pub fn convergence_csv(report: &ConvergenceReport) -> String {
    let mut out = String::from(
        "k,variant,tau,err_Linf,err_W1inf,err_l2H1,err_l2H2,order_Linf,order_l2H1,pass\n",
    );
    for g in &report.groups {
        for p in &g.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                g.k,
                g.variant.name(),
                fmt_e(p.tau),
                fmt_e(p.errors.max_linf),
                fmt_e(p.errors.max_w1inf),
                fmt_e(p.errors.l2_h1),
                fmt_e(p.errors.l2_h2),
                fmt_order(p.order_linf),
                fmt_order(p.order_l2h1),
                g.pass
            );
        }
    }
    out
}

/// Columns: k, tau, max_defect_fully, max_defect_lin, form_gap.
pub fn defects_csv(report: &DefectReport) -> String {
    let mut out = String::from("k,tau,max_defect_fully,max_defect_lin,form_gap\n");
    for g in &report.groups {
        for r in &g.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.k,
                fmt_e(r.tau),
                fmt_e(r.max_defect_fully),
                fmt_e(r.max_defect_lin),
                fmt_e(r.form_gap)
            );
        }
    }
    out
}

/// Exact coefficient dump, columns: k, j, numerator, denominator.
pub fn delta_csv(orders: &[usize]) -> Result<String> {
    let mut out = String::from("k,j,numerator,denominator\n");
    for &k in orders {
        for (j, c) in crate::bdf::delta_coeffs(k)?.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{}", k, j, c.numer(), c.denom());
        }
    }
    Ok(out)
}

pub fn gamma_csv(orders: &[usize]) -> Result<String> {
    let mut out = String::from("k,j,numerator,denominator\n");
    for &k in orders {
        for (j, c) in crate::bdf::gamma_coeffs(k)?.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{}", k, j, c.numer(), c.denom());
        }
    }
    Ok(out)
}

/// Columns: n, t, then one column per state entry.
pub fn trajectory_csv(history: &SolutionHistory) -> String {
    let dim = history.states.first().map(|s| s.len()).unwrap_or(0);
    let mut out = String::from("n,t");
    for i in 0..dim {
        let _ = write!(out, ",u{}", i);
    }
    out.push('\n');
    for (m, state) in history.states.iter().enumerate() {
        let _ = write!(out, "{},{}", history.start + m, fmt_e(history.times[m]));
        for v in state {
            let _ = write!(out, ",{}", fmt_e(*v));
        }
        out.push('\n');
    }
    out
}

/// Columns: n, E_G_sq, slack.
pub fn energy_csv(trace: &EnergyTrace) -> String {
    let mut out = String::from("n,E_G_sq,slack\n");
    for (i, (e, s)) in trace.e_g_sq.iter().zip(&trace.slack).enumerate() {
        let _ = writeln!(out, "{},{},{}", trace.first_n + i, fmt_e(*e), fmt_e(*s));
    }
    out
}

/// Coordinate text dump: one `row col value` line per stored entry.
pub fn operator_dump(op: &SpatialOperator) -> String {
    let mut out = String::new();
    for (r, c, v) in op.matrix.triplets() {
        let _ = writeln!(out, "{} {} {}", r, c, fmt_e(v));
    }
    out
}
