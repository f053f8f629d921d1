use parabdf::bdf::BdfScheme;
use parabdf::mms::problem_m1;
use parabdf::stepper::{run, step_fully_implicit, NewtonCfg, RunOptions, Variant};

fn main() {
    let problem = problem_m1(255).unwrap();
    let scheme = BdfScheme::new(5).unwrap();
    let newton = NewtonCfg { tol_abs: 1e-12, tol_rel: 1e-13, max_iter: 25 };
    for shift in [4usize, 5] {
        // tau = 1/80 (shift 5 => stride 32), 1/160 (stride 16)
        let stride = 1usize << shift;
        let tau = (1.0 / 2560.0) * stride as f64;
        let tau_ref = 1.0 / 2560.0;
        let ref_run = run(
            &problem,
            &scheme,
            Variant::FullyImplicit,
            tau_ref,
            &RunOptions { newton, ..Default::default() },
        )
        .unwrap();
        let mut biases = Vec::new();
        for start in [(0.80f64), 0.85, 0.90, 0.95] {
            let s = (start / tau).round() as usize - 5;
            let tails: Vec<Vec<f64>> =
                (0..5).map(|j| ref_run.history.state((s + j) * stride).to_vec()).collect();
            let refs: Vec<&[f64]> = tails.iter().map(|v| v.as_slice()).collect();
            let t_n = (s + 5) as f64 * tau;
            let f_n = problem.forcing_on_grid(t_n);
            let (u, _) = step_fully_implicit(
                &refs, &scheme, tau, &problem.grid, &problem.coeff, &f_n, &newton,
            )
            .unwrap();
            let target = ref_run.history.state((s + 5) * stride);
            // signed error at mid node + max
            let mid = 127usize;
            let maxe = u.iter().zip(target).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
            biases.push((t_n, u[mid] - target[mid], maxe));
        }
        println!("tau=1/{}:", (1.0 / tau).round());
        for (t, b, m) in &biases {
            println!("  t={t:.3} signed_mid={b:+.3e} max={m:.3e}");
        }
    }
}
