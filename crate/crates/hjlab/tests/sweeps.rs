//! Slower sweep-level invariants: monotone error decay, grid-doubling
//! stability of fitted exponents, and the one-sided bookkeeping symmetry.

use hjlab::catalog::{self, DatumParams};
use hjlab::estimates;
use hjlab::grid::Grid;
use hjlab::hamiltonian::Hamiltonian;
use hjlab::rate::{self, ExperimentKind, SweepPlan};
use hjlab::solver::{self, ProblemSpec};
use std::sync::Arc;

fn heat_kink_plan(n: usize) -> SweepPlan {
    let ext = [[0.0, 1.0]];
    let grid = Arc::new(Grid::new(&ext, &[n]).unwrap());
    let t = catalog::terminal("kink", &DatumParams::default(), &ext).unwrap();
    let s = catalog::source("zero", &DatumParams::default(), &ext, 1.0).unwrap();
    let p = ProblemSpec::new(grid, 1.0, Hamiltonian::zero(), t, s).unwrap();
    SweepPlan::new(
        p,
        ExperimentKind::HeatBaseline,
        vec![1e-2, 3.16e-3, 1e-3, 3.16e-4, 1e-4],
    )
}

#[test]
fn sup_error_decays_monotonically_in_epsilon() {
    let report = rate::run_sweep(&heat_kink_plan(256)).unwrap();
    let floor = 3.0 * report.scheme_error;
    for pair in report.rows.windows(2) {
        // epsilons decrease along rows; errors may only flatten at the floor
        assert!(
            pair[1].sup_error <= pair[0].sup_error || pair[1].sup_error <= floor,
            "error grew: {} -> {} (floor {floor})",
            pair[0].sup_error,
            pair[1].sup_error
        );
    }
}

#[test]
fn fitted_exponent_stable_under_grid_doubling() {
    let coarse = rate::run_sweep(&heat_kink_plan(256)).unwrap();
    let fine = rate::run_sweep(&heat_kink_plan(512)).unwrap();
    let (a, b) = (coarse.fit.unwrap().exponent, fine.fit.unwrap().exponent);
    assert!(
        (a - b).abs() <= 0.05,
        "exponent moved from {a:.4} to {b:.4} under grid doubling"
    );
}

#[test]
fn negating_data_swaps_one_sided_errors_for_even_linear_h() {
    // With H = 0 (even, linear) negating the terminal datum negates the
    // solution exactly, so the signed sup gaps swap roles bit-for-bit. This
    // validates the pos/neg bookkeeping of the harness. (For nonlinear even
    // H the negated datum solves a genuinely different problem: a downward
    // kink rarefies while an upward one shocks, so no such identity holds.)
    let ext = [[0.0, 1.0]];
    let grid = Arc::new(Grid::new(&ext, &[128]).unwrap());
    let s = catalog::source("zero", &DatumParams::default(), &ext, 0.5).unwrap();
    let run = |amplitude: f64| {
        let t = catalog::terminal(
            "kink",
            &DatumParams {
                amplitude: Some(amplitude),
                ..Default::default()
            },
            &ext,
        )
        .unwrap();
        let p = ProblemSpec::new(grid.clone(), 0.5, Hamiltonian::zero(), t, s.clone()).unwrap();
        let u_eps = solver::solve_viscous(&p, 1e-2, 1e-3).unwrap();
        let terminal = p.terminal.sample(&grid).unwrap();
        let mut pos = 0.0f64;
        let mut neg = 0.0f64;
        for slice in u_eps.slices() {
            let (p1, n1) = estimates::one_sided_sup(slice, &terminal).unwrap();
            pos = pos.max(p1);
            neg = neg.max(n1);
        }
        (pos, neg)
    };
    let (pos, neg) = run(1.0);
    let (pos_flipped, neg_flipped) = run(-1.0);
    assert!(
        pos > 1e-3,
        "gaps must be nontrivial for the check to mean anything"
    );
    assert!((pos - neg_flipped).abs() <= 1e-14, "{pos} vs {neg_flipped}");
    assert!((neg - pos_flipped).abs() <= 1e-14, "{neg} vs {pos_flipped}");
}

#[test]
fn reports_are_deterministic() {
    let a = rate::run_sweep(&heat_kink_plan(256)).unwrap();
    let b = rate::run_sweep(&heat_kink_plan(256)).unwrap();
    assert_eq!(a, b, "identical plans must produce identical reports");
    let ja = serde_json::to_string(&a).unwrap();
    let jb = serde_json::to_string(&b).unwrap();
    assert_eq!(ja, jb, "byte-identical serialized reports");
}

#[test]
fn smooth_heat_baseline_beats_sqrt_rate() {
    // Analytic oracle: the Neumann heat flow of cos(pi x) is
    // exp(-pi^2 eps s) cos(pi x), so the gap at t = 0 is 1 - exp(-pi^2 eps T):
    // linear in eps, far better than the kinked datum's sqrt(eps).
    let ext = [[0.0, 1.0]];
    let grid = Arc::new(Grid::new(&ext, &[256]).unwrap());
    let t = catalog::terminal("cos", &DatumParams::default(), &ext).unwrap();
    let s = catalog::source("zero", &DatumParams::default(), &ext, 1.0).unwrap();
    let p = ProblemSpec::new(grid, 1.0, Hamiltonian::zero(), t, s).unwrap();
    let mut plan = SweepPlan::new(p, ExperimentKind::HeatBaseline, vec![1e-2, 3.16e-3, 1e-3]);
    plan.dt = Some(1.0 / 4096.0);
    let report = rate::run_sweep(&plan).unwrap();
    let pi = std::f64::consts::PI;
    for row in &report.rows {
        let exact = 1.0 - (-pi * pi * row.epsilon).exp();
        assert!(
            ((row.sup_error - exact) / exact).abs() <= 0.02,
            "eps {}: measured {} vs analytic {}",
            row.epsilon,
            row.sup_error,
            exact
        );
    }
    let fit = report.fit.unwrap();
    assert!(
        (0.9..=1.1).contains(&fit.exponent),
        "smooth-data exponent {} outside [0.9, 1.1]",
        fit.exponent
    );
}

#[test]
fn inviscid_solver_self_converges() {
    // Self-refinement oracle: coarse solves against a fine-grid solve.
    let ext = [[0.0, 1.0]];
    let fine_grid = Arc::new(Grid::new(&ext, &[4096]).unwrap());
    let t = catalog::terminal("kink", &DatumParams::default(), &ext).unwrap();
    let s = catalog::source("zero", &DatumParams::default(), &ext, 1.0).unwrap();
    let fine_problem = ProblemSpec::new(fine_grid, 1.0, Hamiltonian::quadratic(), t, s).unwrap();

    let base_dt = fine_problem.auto_dt();
    let mut errors = Vec::new();
    let cells = [128usize, 256, 512];
    for &n in &cells {
        let factor = 4096 / n;
        let coarse_grid = Arc::new(Grid::new(&ext, &[n]).unwrap());
        let coarse_problem = fine_problem.on_grid(coarse_grid.clone()).unwrap();
        let dt = base_dt * factor as f64;
        let coarse = solver::solve_inviscid_strided(&coarse_problem, dt, 1).unwrap();
        let fine = solver::solve_inviscid_strided(&fine_problem, base_dt, factor).unwrap();
        let mut err = 0.0f64;
        for (c, f) in coarse.slices().iter().zip(fine.slices()) {
            let restricted = rate::restrict(f, &coarse_grid).unwrap();
            err = err.max(c.sup_distance(&restricted).unwrap());
        }
        errors.push(err);
    }
    let order = (errors[0] / errors[2]).log2() / 2.0;
    assert!(
        order >= 0.8,
        "self-refinement order {order}, errors {errors:?}"
    );
}

#[test]
fn epsilon_derivative_stable_under_eta_halving() {
    let ext = [[0.0, 1.0]];
    let grid = Arc::new(Grid::new(&ext, &[256]).unwrap());
    let t = catalog::terminal("cos", &DatumParams::default(), &ext).unwrap();
    let s = catalog::source("zero", &DatumParams::default(), &ext, 1.0).unwrap();
    let p = ProblemSpec::new(grid, 1.0, Hamiltonian::zero(), t, s).unwrap();
    let (eps, dt) = (1e-2, 1e-3);
    let v_full = solver::epsilon_derivative(&p, eps, eps / 4.0, dt).unwrap();
    let v_half = solver::epsilon_derivative(&p, eps, eps / 8.0, dt).unwrap();
    let scale = v_full
        .slices()
        .iter()
        .flat_map(|s| s.values())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let change = v_full.sup_distance(&v_half).unwrap();
    assert!(
        change <= 0.1 * scale,
        "divided difference moved by {change} (scale {scale}) when eta halved"
    );
}
