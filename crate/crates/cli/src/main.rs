//! Command-line driver: coefficient tables, stability certification,
//! convergence studies and defect studies.
//!
//! Exit codes: 0 on success, 1 when a certificate or an observed-order
//! check fails, 2 on usage, configuration or runtime errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use parabdf::bdf::{
    certified_theta, multiplier_theta, smallest_theta, verify_multiplier_positivity, BdfScheme,
    MAX_MULTIPLIER_ORDER, MAX_ORDER,
};
use parabdf::gmatrix::dahlquist_g_matrix;
use parabdf::mms::builtin_problem;
use parabdf::operator::assemble_operator;
use parabdf::stepper::{run, RunOptions, Variant};
use parabdf::study::{
    convergence_csv, defects_csv, delta_csv, energy_csv, gamma_csv, operator_dump, parse_config,
    run_convergence_study, run_defect_study, trajectory_csv, StudyConfig,
};
use parabdf::Error;

#[derive(Parser)]
#[command(name = "parabdf", version, about = "BDF time discretizations of quasilinear parabolic equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the exact BDF coefficient tables and stability angles
    Coeffs {
        /// Order k in 1..=6; all orders when omitted
        #[arg(long)]
        k: Option<usize>,
        /// Write delta_coeffs.csv / gamma_coeffs.csv here
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Certify multiplier positivity and the Dahlquist G-matrices
    Certify {
        /// Order k in 1..=5; all of 1..=5 when omitted
        #[arg(long)]
        k: Option<usize>,
        /// Multiplier override (use together with --k)
        #[arg(long)]
        theta: Option<f64>,
    },
    /// Run the convergence study of the `[study]` table in the config
    Convergence {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for CSV files (default: current directory)
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Dump the operator at the initial state in coordinate format
        #[arg(long)]
        dump_operator: bool,
        /// Dump per-group trajectories (and energy traces) at the finest τ
        #[arg(long)]
        dump_trajectory: bool,
    },
    /// Run the defect study of the `[defects]` table in the config
    Defects {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        dump_operator: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Coeffs { k, out_dir } => cmd_coeffs(k, out_dir.as_deref()),
        Command::Certify { k, theta } => cmd_certify(k, theta),
        Command::Convergence { config, out_dir, dump_operator, dump_trajectory } => {
            cmd_convergence(&config, out_dir.as_deref(), dump_operator, dump_trajectory)
        }
        Command::Defects { config, out_dir, dump_operator } => {
            cmd_defects(&config, out_dir.as_deref(), dump_operator)
        }
    }
}

fn orders_arg(k: Option<usize>, max: usize) -> Result<Vec<usize>, Error> {
    match k {
        Some(k) if k >= 1 && k <= max => Ok(vec![k]),
        Some(k) => Err(Error::InvalidOrder { k, min: 1, max }),
        None => Ok((1..=max).collect()),
    }
}

fn rational_row(cs: &[parabdf::Rational64]) -> String {
    cs.iter()
        .map(|c| {
            if *c.denom() == 1 {
                format!("{}", c.numer())
            } else {
                format!("{}/{}", c.numer(), c.denom())
            }
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn cmd_coeffs(k: Option<usize>, out_dir: Option<&Path>) -> Result<bool, Error> {
    let orders = orders_arg(k, MAX_ORDER)?;
    for &k in &orders {
        let scheme = BdfScheme::new(k)?;
        println!("BDF-{k}");
        println!("  delta : {}", rational_row(&scheme.delta));
        println!("  gamma : {}", rational_row(&scheme.gamma));
        println!("  alpha : {:.2} deg", scheme.alpha_deg);
        match scheme.theta {
            Some(th) => println!("  theta : {:.4}", th),
            None => println!("  theta : none (no multiplier for k = 6)"),
        }
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("delta_coeffs.csv"), delta_csv(&orders)?)?;
        std::fs::write(dir.join("gamma_coeffs.csv"), gamma_csv(&orders)?)?;
        println!("wrote {}/delta_coeffs.csv and gamma_coeffs.csv", dir.display());
    }
    Ok(true)
}

fn cmd_certify(k: Option<usize>, theta_override: Option<f64>) -> Result<bool, Error> {
    let orders = orders_arg(k, MAX_MULTIPLIER_ORDER)?;
    let mut all_ok = true;
    println!(
        "{:>2} {:>8} {:>13} {:>10} {:>12} {:>12} {:>10} {:>6}",
        "k", "theta", "min_re@0.999", "bisect", "eig_min(G)", "eig_max(G)", "residual", "status"
    );
    for &k in &orders {
        let theta = match theta_override {
            Some(t) => t,
            None => certified_theta(k)?,
        };
        let mut ok = true;

        let min_re = verify_multiplier_positivity(k, theta, 0.999, 1 << 14)?;
        if min_re < -1e-9 {
            ok = false;
        }

        let bisect = if k >= 3 {
            let th = smallest_theta(k, 1e-5)?;
            if (th - multiplier_theta(k)?).abs() > 5e-4 {
                ok = false;
            }
            format!("{:.5}", th)
        } else {
            "0".into()
        };

        let (eig_str, res_str) = match dahlquist_g_matrix(k, theta) {
            Ok(cert) => {
                let (emin, emax) = cert.eigenvalue_range()?;
                let residual = cert.max_identity_residual(1000, 0x5eed);
                if emin <= 0.0 || residual > 1e-10 {
                    ok = false;
                }
                (format!("{:>12.4e} {:>12.4e}", emin, emax), format!("{:.3e}", residual))
            }
            Err(Error::Certification(msg)) => {
                ok = false;
                (format!("{:>12} {:>12}", "-", "-"), format!("infeasible: {msg}"))
            }
            Err(e) => return Err(e),
        };

        println!(
            "{:>2} {:>8.4} {:>13.4e} {:>10} {} {:>10} {:>6}",
            k,
            theta,
            min_re,
            bisect,
            eig_str,
            res_str,
            if ok { "ok" } else { "FAIL" }
        );
        all_ok &= ok;
    }
    Ok(all_ok)
}

fn write_initial_operator_dump(cfg_problem: &str, grid_size: usize, dir: &Path) -> Result<(), Error> {
    let problem = builtin_problem(cfg_problem, grid_size)?;
    let w0 = problem.sample_on_grid(0.0);
    let op = assemble_operator(&problem.grid, &problem.coeff, &w0)?;
    std::fs::write(dir.join("operator.txt"), operator_dump(&op))?;
    Ok(())
}

fn dump_trajectories(cfg: &StudyConfig, dir: &Path) -> Result<(), Error> {
    let problem = builtin_problem(&cfg.problem, cfg.grid_size)?;
    let tau = *cfg.taus.last().unwrap();
    for &k in &cfg.orders {
        let scheme = BdfScheme::new(k)?;
        for &vn in &cfg.variants {
            let variant = Variant::from(vn);
            let opts = RunOptions { energy: cfg.energy_diagnostics, ..Default::default() };
            let out = run(&problem, &scheme, variant, tau, &opts)?;
            let stem = format!("k{}_{}", k, variant.name());
            std::fs::write(dir.join(format!("trajectory_{stem}.csv")), trajectory_csv(&out.history))?;
            if let Some(tr) = &out.energy {
                std::fs::write(dir.join(format!("energy_{stem}.csv")), energy_csv(tr))?;
            }
        }
    }
    Ok(())
}

fn read_config(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn cmd_convergence(
    config: &Path,
    out_dir: Option<&Path>,
    dump_operator: bool,
    dump_trajectory: bool,
) -> Result<bool, Error> {
    let text = read_config(config)?;
    let cfg = parse_config(&text)?
        .study
        .ok_or_else(|| Error::Config("config has no [study] table".into()))?;
    let report = run_convergence_study(&cfg)?;

    let dir = out_dir.unwrap_or(Path::new(".")).to_path_buf();
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("convergence.csv"), convergence_csv(&report))?;

    for g in &report.groups {
        println!(
            "k={} {:<18} slope_Linf={:+.3} slope_l2H1={:+.3} slope_W1inf={:+.3} slope_l2H2={:+.3} {}",
            g.k,
            g.variant.name(),
            g.slope_linf,
            g.slope_l2h1,
            g.slope_w1inf,
            g.slope_l2h2,
            if g.pass { "pass" } else { "FAIL" }
        );
    }
    if dump_operator {
        write_initial_operator_dump(&cfg.problem, cfg.grid_size, &dir)?;
    }
    if dump_trajectory {
        dump_trajectories(&cfg, &dir)?;
    }
    println!("wrote {}", dir.join("convergence.csv").display());
    Ok(report.all_pass())
}

fn cmd_defects(config: &Path, out_dir: Option<&Path>, dump_operator: bool) -> Result<bool, Error> {
    let text = read_config(config)?;
    let cfg = parse_config(&text)?
        .defects
        .ok_or_else(|| Error::Config("config has no [defects] table".into()))?;
    let report = run_defect_study(&cfg)?;

    let dir = out_dir.unwrap_or(Path::new(".")).to_path_buf();
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("defects.csv"), defects_csv(&report))?;

    for g in &report.groups {
        println!(
            "k={} slope_fully={:+.3} slope_lin={:+.3} {}",
            g.k,
            g.slope_fully,
            g.slope_lin,
            if g.pass { "pass" } else { "FAIL" }
        );
    }
    if dump_operator {
        write_initial_operator_dump(&cfg.problem, cfg.grid_size, &dir)?;
    }
    println!("wrote {}", dir.join("defects.csv").display());
    Ok(report.all_pass())
}
