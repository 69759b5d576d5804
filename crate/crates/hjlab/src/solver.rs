//! Terminal-value solver for the viscous Hamilton-Jacobi problem and its
//! inviscid limit.
//!
//! The march runs in reversed time s = T - t from the terminal datum:
//! implicit backward-Euler diffusion (Neumann-reflected, symmetric factors),
//! explicit monotone Lax-Friedrichs Hamiltonian, explicit source. The IMEX
//! split keeps the time-step restriction independent of the viscosity, so one
//! dt serves a whole epsilon sweep.

use crate::catalog::{Source, Terminal};
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::hamiltonian::Hamiltonian;
use crate::linalg::ImplicitDiffusion;
use std::sync::Arc;

/// Hypothesis bookkeeping carried by a problem, derived from catalog metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HypothesisFlags {
    /// Terminal datum and source are Lipschitz with known constants.
    pub lipschitz_data: bool,
    /// (Laplacian of u_T)^+ is bounded by a known M_0.
    pub semi_superharmonic_terminal: bool,
    /// Laplacian of f is bounded above by a known c_f(t).
    pub source_delta_bound: bool,
    /// Outward normal derivative of f is nonnegative on every face.
    pub source_normal_nonneg: bool,
}

/// A fully assembled problem instance.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub grid: Arc<Grid>,
    pub horizon: f64,
    pub hamiltonian: Hamiltonian,
    pub terminal: Terminal,
    pub source: Source,
    pub flags: HypothesisFlags,
}

impl ProblemSpec {
    pub fn new(
        grid: Arc<Grid>,
        horizon: f64,
        hamiltonian: Hamiltonian,
        terminal: Terminal,
        source: Source,
    ) -> Result<ProblemSpec> {
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::Input(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if terminal.extents != grid.extents() || source.extents != grid.extents() {
            return Err(Error::Compatibility(
                "terminal/source are bound to a different box than the grid".into(),
            ));
        }
        let flags = HypothesisFlags {
            lipschitz_data: terminal.lipschitz.is_some() && source.grad_sup.is_some(),
            semi_superharmonic_terminal: terminal.delta_plus_bound.is_some(),
            source_delta_bound: source.cf.is_some(),
            source_normal_nonneg: source.normal_nonneg,
        };
        Ok(ProblemSpec {
            grid,
            horizon,
            hamiltonian,
            terminal,
            source,
            flags,
        })
    }

    /// Rebind the same data to a finer or coarser grid over the same box.
    pub fn on_grid(&self, grid: Arc<Grid>) -> Result<ProblemSpec> {
        if grid.extents() != self.grid.extents() {
            return Err(Error::Compatibility(
                "refined grid must cover the same box".into(),
            ));
        }
        let mut p = self.clone();
        p.grid = grid;
        Ok(p)
    }

    /// A priori bound on the solution's gradient range:
    /// |Du(t)| <= |Du_T| + integral of sup|Df|, with a cushion.
    pub fn gradient_range(&self) -> f64 {
        let lip_t = self.terminal.lipschitz.unwrap_or(1.0);
        let from_source = self
            .source
            .grad_sup
            .map(|p| p.integral_on(self.horizon))
            .unwrap_or(0.0);
        1.3 * (lip_t + from_source) + 0.05
    }

    /// Lax-Friedrichs dissipation per axis for this problem.
    pub fn dissipation(&self) -> Vec<f64> {
        let r = self.gradient_range();
        let s = 1.1 * self.hamiltonian.grad_component_sup(r, self.grid.dim());
        vec![s; self.grid.dim()]
    }

    /// Largest stable time step `h / (2 sum_i sigma_i)`; unconstrained
    /// (advection-free) problems return the horizon.
    pub fn max_stable_dt(&self) -> f64 {
        let sigma_sum: f64 = self.dissipation().iter().sum();
        if sigma_sum <= 0.0 {
            self.horizon
        } else {
            self.grid.min_spacing() / (2.0 * sigma_sum)
        }
    }

    /// Default time step: advective CFL capped by the spacing (accuracy).
    pub fn auto_dt(&self) -> f64 {
        let cap = self.grid.min_spacing().min(self.horizon);
        cap.min(0.9 * self.max_stable_dt())
    }
}

/// Trajectory of a terminal-value solve; slices run from t = T down to t = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    grid: Arc<Grid>,
    slices: Vec<ScalarField>,
    dt: f64,
}

impl SpaceTimeField {
    fn new(grid: Arc<Grid>, slices: Vec<ScalarField>, dt: f64) -> SpaceTimeField {
        debug_assert!(slices
            .windows(2)
            .all(|w| w[0].time().unwrap() > w[1].time().unwrap()));
        SpaceTimeField { grid, slices, dt }
    }

    /// Assemble a trajectory from time-tagged slices (strictly decreasing
    /// times, terminal first).
    pub fn from_slices(grid: Arc<Grid>, slices: Vec<ScalarField>, dt: f64) -> SpaceTimeField {
        assert!(
            slices
                .windows(2)
                .all(|w| w[0].time().unwrap() > w[1].time().unwrap()),
            "slices must carry strictly decreasing times"
        );
        SpaceTimeField::new(grid, slices, dt)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Marching step of the solve that produced this trajectory (storage may
    /// be strided coarser than this).
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    /// Slices in storage order: times strictly decreasing from T to 0.
    pub fn slices(&self) -> &[ScalarField] {
        &self.slices
    }

    pub fn times(&self) -> Vec<f64> {
        self.slices.iter().map(|s| s.time().unwrap()).collect()
    }

    /// Slice at the terminal time T.
    pub fn terminal_slice(&self) -> &ScalarField {
        &self.slices[0]
    }

    /// Slice at t = 0.
    pub fn initial_slice(&self) -> &ScalarField {
        self.slices.last().unwrap()
    }

    /// Stored slice nearest to `t` (times are sorted descending, so this is a
    /// binary search).
    pub fn at_time(&self, t: f64) -> Result<&ScalarField> {
        let (lo, hi) = (0.0, self.slices[0].time().unwrap());
        if t < lo - 1e-12 || t > hi + 1e-12 {
            return Err(Error::TimeRange { t, lo, hi });
        }
        let split = self.slices.partition_point(|s| s.time().unwrap() > t);
        let mut best = split.min(self.slices.len() - 1);
        if split > 0 {
            let before = split - 1;
            if (self.slices[before].time().unwrap() - t).abs()
                < (self.slices[best].time().unwrap() - t).abs()
            {
                best = before;
            }
        }
        Ok(&self.slices[best])
    }

    /// Apply a per-slice operator, keeping times.
    pub fn map_slices(&self, op: impl Fn(&ScalarField) -> ScalarField) -> SpaceTimeField {
        let slices = self
            .slices
            .iter()
            .map(|s| op(s).with_time(s.time().unwrap()))
            .collect();
        SpaceTimeField::new(self.grid.clone(), slices, self.dt)
    }

    /// Max over all stored slices and cells of |self - other|.
    pub fn sup_distance(&self, other: &SpaceTimeField) -> Result<f64> {
        self.check_compatible(other)?;
        let mut sup = 0.0f64;
        for (a, b) in self.slices.iter().zip(&other.slices) {
            sup = sup.max(a.sup_distance(b)?);
        }
        Ok(sup)
    }

    pub fn check_compatible(&self, other: &SpaceTimeField) -> Result<()> {
        if self.grid.as_ref() != other.grid.as_ref() || self.len() != other.len() {
            return Err(Error::Compatibility(
                "trajectories differ in grid or stored step count".into(),
            ));
        }
        for (a, b) in self.slices.iter().zip(&other.slices) {
            if (a.time().unwrap() - b.time().unwrap()).abs() > 1e-9 {
                return Err(Error::Compatibility(
                    "trajectories have mismatched times".into(),
                ));
            }
        }
        Ok(())
    }
}

/// How many marching steps a requested dt turns into (dt is rounded down so
/// the march lands exactly on t = 0).
fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::Input(format!("dt must be positive, got {dt}")));
    }
    Ok(((horizon / dt - 1e-9).ceil() as usize).max(1))
}

struct March<'p> {
    problem: &'p ProblemSpec,
    eps: f64,
    dt: f64,
    steps: usize,
    stride: usize,
    sigma: Vec<f64>,
    range: f64,
}

impl<'p> March<'p> {
    fn new(problem: &'p ProblemSpec, eps: f64, dt: f64, stride: usize) -> Result<March<'p>> {
        let steps = step_count(problem.horizon, dt)?;
        let dt = problem.horizon / steps as f64;
        let limit = problem.max_stable_dt();
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::Stability {
                dt,
                limit,
                context: "explicit Hamiltonian step needs dt <= h / (2 sum sigma_i)".into(),
            });
        }
        Ok(March {
            problem,
            eps,
            dt,
            steps,
            stride: stride.max(1),
            sigma: problem.dissipation(),
            range: problem.gradient_range(),
        })
    }

    fn run(mut self) -> Result<SpaceTimeField> {
        let grid = &self.problem.grid;
        let n = grid.total_cells();
        let dim = grid.dim();
        let horizon = self.problem.horizon;

        let mut u = self.problem.terminal.sample(grid)?.values().to_vec();
        let positions: Vec<Vec<f64>> = (0..n).map(|k| grid.position(k)).collect();

        let diffusion = (self.eps > 0.0).then(|| {
            let alphas: Vec<f64> = grid
                .spacing()
                .iter()
                .map(|&h| self.eps * self.dt / (h * h))
                .collect();
            ImplicitDiffusion::new(grid, &alphas)
        });

        let mut slices = Vec::with_capacity(self.steps / self.stride + 2);
        let mut push = |vals: &[f64], t: f64| -> Result<()> {
            slices.push(ScalarField::new(grid.clone(), vals.to_vec())?.with_time(t));
            Ok(())
        };
        push(&u, horizon)?;

        let mut pm = vec![vec![0.0; n]; dim];
        let mut pp = vec![vec![0.0; n]; dim];
        let mut stage = vec![0.0; n];

        for k in 0..self.steps {
            let t_now = horizon - k as f64 * self.dt;
            one_sided(grid, &u, &mut pm, &mut pp);
            self.watch_gradient_range(&pm, &pp)?;

            let ham = &self.problem.hamiltonian;
            let mut p_mid = [0.0f64; 2];
            for i in 0..n {
                for a in 0..dim {
                    p_mid[a] = 0.5 * (pm[a][i] + pp[a][i]);
                }
                let mut flux = ham.eval(&p_mid[..dim])?;
                for a in 0..dim {
                    flux -= 0.5 * self.sigma[a] * (pp[a][i] - pm[a][i]);
                }
                let f = self.problem.source.eval(&positions[i], t_now);
                stage[i] = u[i] + self.dt * (f - flux);
            }
            if let Some(op) = &diffusion {
                op.solve(&mut stage);
            }
            std::mem::swap(&mut u, &mut stage);

            if let Some(bad) = u.iter().find(|v| !v.is_finite()) {
                return Err(Error::Solver(format!(
                    "solution lost finiteness ({bad}) at step {k}; dt {} may be too large",
                    self.dt
                )));
            }
            let done = k + 1 == self.steps;
            if done || (k + 1) % self.stride == 0 {
                let t_next = if done {
                    0.0
                } else {
                    horizon - (k + 1) as f64 * self.dt
                };
                push(&u, t_next)?;
            }
        }
        Ok(SpaceTimeField::new(grid.clone(), slices, self.dt))
    }

    /// The dissipation was sized from an a priori gradient range; if the
    /// iterate leaves that range, enlarge sigma (monotonicity needs sigma to
    /// dominate |DpH| on the actual range) and re-check the CFL rule.
    fn watch_gradient_range(&mut self, pm: &[Vec<f64>], pp: &[Vec<f64>]) -> Result<()> {
        let mut observed = 0.0f64;
        for a in 0..pm.len() {
            for i in 0..pm[a].len() {
                observed = observed.max(pm[a][i].abs()).max(pp[a][i].abs());
            }
        }
        if observed <= self.range {
            return Ok(());
        }
        self.range = 1.1 * observed;
        let s = 1.1
            * self
                .problem
                .hamiltonian
                .grad_component_sup(self.range, self.problem.grid.dim());
        for v in &mut self.sigma {
            *v = v.max(s);
        }
        let sigma_sum: f64 = self.sigma.iter().sum();
        if sigma_sum > 0.0 {
            let limit = self.problem.grid.min_spacing() / (2.0 * sigma_sum);
            if self.dt > limit * (1.0 + 1e-12) {
                return Err(Error::Stability {
                    dt: self.dt,
                    limit,
                    context: format!(
                        "gradient range grew to {observed:.3}; rerun with a smaller dt"
                    ),
                });
            }
        }
        Ok(())
    }
}

/// One-sided differences into caller-owned buffers (ghost mirror at faces).
fn one_sided(grid: &Grid, u: &[f64], pm: &mut [Vec<f64>], pp: &mut [Vec<f64>]) {
    match grid.dim() {
        1 => {
            let n = grid.cells()[0];
            let h = grid.spacing()[0];
            pm[0][0] = 0.0;
            pp[0][n - 1] = 0.0;
            for i in 1..n {
                pm[0][i] = (u[i] - u[i - 1]) / h;
            }
            for i in 0..n - 1 {
                pp[0][i] = (u[i + 1] - u[i]) / h;
            }
        }
        _ => {
            let (nx, ny) = (grid.cells()[0], grid.cells()[1]);
            let (hx, hy) = (grid.spacing()[0], grid.spacing()[1]);
            for j in 0..ny {
                let row = j * nx;
                pm[0][row] = 0.0;
                pp[0][row + nx - 1] = 0.0;
                for i in 1..nx {
                    pm[0][row + i] = (u[row + i] - u[row + i - 1]) / hx;
                }
                for i in 0..nx - 1 {
                    pp[0][row + i] = (u[row + i + 1] - u[row + i]) / hx;
                }
            }
            for i in 0..nx {
                pm[1][i] = 0.0;
                pp[1][(ny - 1) * nx + i] = 0.0;
            }
            for j in 1..ny {
                for i in 0..nx {
                    pm[1][j * nx + i] = (u[j * nx + i] - u[(j - 1) * nx + i]) / hy;
                }
            }
            for j in 0..ny - 1 {
                for i in 0..nx {
                    pp[1][j * nx + i] = (u[(j + 1) * nx + i] - u[j * nx + i]) / hy;
                }
            }
        }
    }
}

/// Solve the viscous problem; stores every marching step.
pub fn solve_viscous(problem: &ProblemSpec, eps: f64, dt: f64) -> Result<SpaceTimeField> {
    solve_viscous_strided(problem, eps, dt, 1)
}

/// Solve the viscous problem, storing every `stride`-th step (plus endpoints).
pub fn solve_viscous_strided(
    problem: &ProblemSpec,
    eps: f64,
    dt: f64,
    stride: usize,
) -> Result<SpaceTimeField> {
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::Input(format!(
            "viscosity must be positive, got {eps}"
        )));
    }
    March::new(problem, eps, dt, stride)?.run()
}

/// Solve the inviscid problem (pure monotone scheme).
pub fn solve_inviscid(problem: &ProblemSpec, dt: f64) -> Result<SpaceTimeField> {
    solve_inviscid_strided(problem, dt, 1)
}

pub fn solve_inviscid_strided(
    problem: &ProblemSpec,
    dt: f64,
    stride: usize,
) -> Result<SpaceTimeField> {
    March::new(problem, 0.0, dt, stride)?.run()
}

/// Divided difference (u_{eps+eta} - u_eps) / eta approximating the
/// derivative of the solution in the viscosity parameter.
///
/// Both solves share the terminal datum, so the terminal slice is exactly
/// zero.
pub fn epsilon_derivative(
    problem: &ProblemSpec,
    eps: f64,
    eta: f64,
    dt: f64,
) -> Result<SpaceTimeField> {
    if !eta.is_finite() || eta <= 0.0 || eta > eps / 2.0 {
        return Err(Error::Input(format!(
            "eta must lie in (0, eps/2] = (0, {}], got {eta}",
            eps / 2.0
        )));
    }
    let base = solve_viscous(problem, eps, dt)?;
    let bumped = solve_viscous(problem, eps + eta, dt)?;
    base.check_compatible(&bumped)?;
    let slices = base
        .slices()
        .iter()
        .zip(bumped.slices())
        .map(|(a, b)| {
            let vals: Vec<f64> = a
                .values()
                .iter()
                .zip(b.values())
                .map(|(ua, ub)| (ub - ua) / eta)
                .collect();
            ScalarField::new(base.grid().clone(), vals).map(|f| f.with_time(a.time().unwrap()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpaceTimeField::new(base.grid().clone(), slices, base.dt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{self, DatumParams};

    fn unit_problem(
        n: usize,
        ham: Hamiltonian,
        terminal: &str,
        source: &str,
        horizon: f64,
    ) -> ProblemSpec {
        let ext = [[0.0, 1.0]];
        let grid = Arc::new(Grid::new(&ext, &[n]).unwrap());
        let t = catalog::terminal(terminal, &DatumParams::default(), &ext).unwrap();
        let s = catalog::source(source, &DatumParams::default(), &ext, horizon).unwrap();
        ProblemSpec::new(grid, horizon, ham, t, s).unwrap()
    }

    #[test]
    fn constant_data_stay_constant() {
        let ext = [[0.0, 1.0]];
        let grid = Arc::new(Grid::new(&ext, &[64]).unwrap());
        let t = catalog::terminal(
            "constant",
            &DatumParams {
                amplitude: Some(5.0),
                ..Default::default()
            },
            &ext,
        )
        .unwrap();
        let s = catalog::source("zero", &DatumParams::default(), &ext, 1.0).unwrap();
        let p = ProblemSpec::new(grid, 1.0, Hamiltonian::quadratic(), t, s).unwrap();
        for eps in [1e-2, 1e-5] {
            let traj = solve_viscous(&p, eps, p.auto_dt()).unwrap();
            for slice in traj.slices() {
                for v in slice.values() {
                    assert!((v - 5.0).abs() < 1e-12, "eps {eps}: drifted to {v}");
                }
            }
        }
    }

    #[test]
    fn constant_source_integrates_exactly() {
        // u_T = 0, f = 1, H(0) = 0: u(t) = T - t exactly (spatially constant).
        let ext = [[0.0, 1.0]];
        let grid = Arc::new(Grid::new(&ext, &[32]).unwrap());
        let t = catalog::terminal(
            "constant",
            &DatumParams {
                amplitude: Some(0.0),
                ..Default::default()
            },
            &ext,
        )
        .unwrap();
        let s = catalog::source("constant_source", &DatumParams::default(), &ext, 2.0).unwrap();
        let p = ProblemSpec::new(grid, 2.0, Hamiltonian::quadratic(), t, s).unwrap();
        let traj = solve_inviscid(&p, 0.01).unwrap();
        for slice in traj.slices() {
            let t_k = slice.time().unwrap();
            for v in slice.values() {
                assert!(
                    (v - (2.0 - t_k)).abs() < 1e-10,
                    "t={t_k}: {v} vs {}",
                    2.0 - t_k
                );
            }
        }
    }

    #[test]
    fn terminal_slice_of_epsilon_derivative_is_zero() {
        let p = unit_problem(64, Hamiltonian::quadratic(), "kink", "zero", 0.5);
        let dd = epsilon_derivative(&p, 1e-2, 1e-3, p.auto_dt()).unwrap();
        for v in dd.terminal_slice().values() {
            assert_eq!(*v, 0.0);
        }
    }

    #[test]
    fn epsilon_derivative_of_constant_problem_vanishes() {
        let ext = [[0.0, 1.0]];
        let grid = Arc::new(Grid::new(&ext, &[32]).unwrap());
        let t = catalog::terminal(
            "constant",
            &DatumParams {
                amplitude: Some(5.0),
                ..Default::default()
            },
            &ext,
        )
        .unwrap();
        let s = catalog::source("zero", &DatumParams::default(), &ext, 1.0).unwrap();
        let p = ProblemSpec::new(grid, 1.0, Hamiltonian::quadratic(), t, s).unwrap();
        let dd = epsilon_derivative(&p, 1e-2, 5e-3, p.auto_dt()).unwrap();
        for slice in dd.slices() {
            for v in slice.values() {
                assert!(v.abs() < 1e-9, "{v}");
            }
        }
    }

    #[test]
    fn heat_flow_of_kink_scales_like_sqrt_eps() {
        // H = 0, f = 0: the gap to the terminal datum obeys the heat bound
        // C * |u_T|_W1inf * sqrt(eps T) and saturates it for kinked data.
        let p = unit_problem(512, Hamiltonian::zero(), "kink", "zero", 1.0);
        let dt = 1.0 / 2048.0;
        let mut errs = Vec::new();
        let epsilons = [1e-2, 1e-3, 1e-4];
        for &eps in &epsilons {
            let traj = solve_viscous(&p, eps, dt).unwrap();
            let u0 = traj.initial_slice();
            let ut = traj.terminal_slice();
            errs.push(u0.sup_distance(ut).unwrap());
        }
        for (err, eps) in errs.iter().zip(&epsilons) {
            let ratio = err / (eps * 1.0).sqrt();
            assert!(ratio < 2.0, "eps {eps}: ratio {ratio} too large");
            assert!(ratio > 0.5, "eps {eps}: ratio {ratio} too small for a kink");
        }
        let slope = (errs[0] / errs[2]).log10() / 2.0;
        assert!((slope - 0.5).abs() < 0.1, "measured exponent {slope}");
    }

    #[test]
    fn comparison_principle_holds() {
        // u_T1 <= u_T2 and f1 <= f2 pointwise => solution1 <= solution2.
        let ext = [[0.0, 1.0]];
        let grid = Arc::new(Grid::new(&ext, &[128]).unwrap());
        let t1 = catalog::terminal("kink", &DatumParams::default(), &ext).unwrap();
        let t2 = catalog::terminal(
            "constant",
            &DatumParams {
                amplitude: Some(0.6),
                ..Default::default()
            },
            &ext,
        )
        .unwrap();
        // kink <= 0.5 <= 0.6 everywhere on [0,1]
        let s1 = catalog::source("zero", &DatumParams::default(), &ext, 1.0).unwrap();
        let s2 = catalog::source(
            "constant_source",
            &DatumParams {
                amplitude: Some(0.2),
                ..Default::default()
            },
            &ext,
            1.0,
        )
        .unwrap();
        let p1 = ProblemSpec::new(grid.clone(), 1.0, Hamiltonian::quadratic(), t1, s1).unwrap();
        let p2 = ProblemSpec::new(grid, 1.0, Hamiltonian::quadratic(), t2, s2).unwrap();
        let dt = p1.auto_dt().min(p2.auto_dt());
        for eps in [0.0, 1e-3] {
            let (a, b) = if eps == 0.0 {
                (
                    solve_inviscid(&p1, dt).unwrap(),
                    solve_inviscid(&p2, dt).unwrap(),
                )
            } else {
                (
                    solve_viscous(&p1, eps, dt).unwrap(),
                    solve_viscous(&p2, eps, dt).unwrap(),
                )
            };
            for (sa, sb) in a.slices().iter().zip(b.slices()) {
                for (va, vb) in sa.values().iter().zip(sb.values()) {
                    assert!(*va <= *vb + 1e-10, "comparison violated: {va} > {vb}");
                }
            }
        }
    }

    #[test]
    fn even_data_give_even_solutions() {
        // kink |x - 1/2| is even about the midpoint; zero source keeps it so
        let p = unit_problem(128, Hamiltonian::quadratic(), "kink", "zero", 0.5);
        let traj = solve_viscous(&p, 1e-3, p.auto_dt()).unwrap();
        for slice in traj.slices() {
            let v = slice.values();
            for i in 0..64 {
                let mirrored = v[127 - i];
                assert!(
                    (v[i] - mirrored).abs() < 1e-12,
                    "asymmetry {} at {i}",
                    v[i] - mirrored
                );
            }
        }
    }

    #[test]
    fn discrete_maximum_principle_for_quadratic_h() {
        let p = unit_problem(128, Hamiltonian::quadratic(), "kink", "zero", 1.0);
        let traj = solve_viscous(&p, 1e-3, p.auto_dt()).unwrap();
        let (lo, hi) = (p.terminal.eval(&[0.5]), p.terminal.eval(&[0.0]));
        for slice in traj.slices() {
            assert!(slice.min() >= lo - 1e-8);
            assert!(slice.max() <= hi + 1e-8);
        }
    }

    #[test]
    fn viscous_matches_inviscid_for_tiny_eps() {
        let p = unit_problem(512, Hamiltonian::quadratic(), "kink", "zero", 1.0);
        let dt = p.auto_dt();
        let visc = solve_viscous(&p, 1e-8, dt).unwrap();
        let invisc = solve_inviscid(&p, dt).unwrap();
        let gap = visc.sup_distance(&invisc).unwrap();
        assert!(gap <= 2e-3, "gap {gap}");
    }

    #[test]
    fn stability_error_on_oversized_dt() {
        let p = unit_problem(64, Hamiltonian::quadratic(), "kink", "zero", 1.0);
        let err = solve_viscous(&p, 1e-3, 0.25).unwrap_err();
        assert!(matches!(err, Error::Stability { .. }));
    }

    #[test]
    fn two_dimensional_heat_flow_matches_analytic_decay() {
        // cos(pi x)cos(pi y) is a Neumann eigenfunction: the viscous flow with
        // H = 0 is exp(-2 pi^2 eps s) cos cos.
        let pi = std::f64::consts::PI;
        let ext = [[0.0, 1.0], [0.0, 1.0]];
        let grid = Arc::new(Grid::new(&ext, &[32, 32]).unwrap());
        let t = catalog::terminal("cos2d", &DatumParams::default(), &ext).unwrap();
        let s = catalog::source("zero", &DatumParams::default(), &ext, 0.5).unwrap();
        let p = ProblemSpec::new(grid.clone(), 0.5, Hamiltonian::zero(), t, s).unwrap();
        let eps = 0.05;
        let traj = solve_viscous(&p, eps, 1e-3).unwrap();
        let decay = (-2.0 * pi * pi * eps * 0.5).exp();
        let mut worst = 0.0f64;
        for (k, v) in traj.initial_slice().values().iter().enumerate() {
            let pos = grid.position(k);
            let exact = decay * (pi * pos[0]).cos() * (pi * pos[1]).cos();
            worst = worst.max((v - exact).abs());
        }
        assert!(worst <= 5e-3, "2D heat error {worst}");
    }

    #[test]
    fn two_dimensional_quadratic_solve_keeps_symmetry() {
        let ext = [[0.0, 1.0], [0.0, 1.0]];
        let grid = Arc::new(Grid::new(&ext, &[24, 24]).unwrap());
        let t = catalog::terminal("radial_bump", &DatumParams::default(), &ext).unwrap();
        let s = catalog::source("zero", &DatumParams::default(), &ext, 0.2).unwrap();
        let p = ProblemSpec::new(grid.clone(), 0.2, Hamiltonian::quadratic(), t, s).unwrap();
        let traj = solve_viscous(&p, 1e-3, p.auto_dt()).unwrap();
        // x/y exchange symmetry of the radial datum on the square
        for slice in traj.slices() {
            for i in 0..24 {
                for j in 0..i {
                    let a = slice.values()[grid.flatten(&[i, j])];
                    let b = slice.values()[grid.flatten(&[j, i])];
                    assert!((a - b).abs() < 1e-12, "transpose asymmetry {}", a - b);
                }
            }
        }
    }

    #[test]
    fn manufactured_solution_first_order_joint_refinement() {
        // u*(x,t) = cos(pi x)(1 + T - t), f chosen so u* solves the PDE;
        // u* has zero face slope, so the Neumann closure is exact for it.
        let pi = std::f64::consts::PI;
        let horizon = 0.5;
        let eps = 1e-2;
        let ext = [[0.0, 1.0]];
        let exact = move |x: f64, t: f64| (pi * x).cos() * (1.0 + horizon - t);
        let mut errors = Vec::new();
        for n in [64usize, 128, 256] {
            let grid = Arc::new(Grid::new(&ext, &[n]).unwrap());
            let terminal =
                Terminal::custom("mms_terminal", &ext, move |x: &[f64]| (pi * x[0]).cos());
            let source = Source::custom("mms_source", &ext, horizon, move |x: &[f64], t: f64| {
                let a = 1.0 + horizon - t;
                let c = (pi * x[0]).cos();
                let s = (pi * x[0]).sin();
                // -du*/dt - eps lap(u*) + |Du*|^2
                c + eps * pi * pi * c * a + (pi * s * a) * (pi * s * a)
            });
            let p = ProblemSpec::new(
                grid.clone(),
                horizon,
                Hamiltonian::quadratic(),
                terminal,
                source,
            )
            .unwrap();
            // custom data carry no Lipschitz claim; supply dt below the rule
            // for the true gradient range ~ pi * 1.5
            let dt = 0.5 * grid.min_spacing() / (2.0 * 2.0 * 1.1 * (pi * 1.5 * 1.3 + 0.05));
            let traj = solve_viscous(&p, eps, dt).unwrap();
            let mut err = 0.0f64;
            for slice in traj.slices() {
                let t = slice.time().unwrap();
                for (k, v) in slice.values().iter().enumerate() {
                    err = err.max((v - exact(grid.center(0, k), t)).abs());
                }
            }
            errors.push(err);
        }
        let order = (errors[0] / errors[2]).log2() / 2.0;
        assert!(
            order >= 0.9,
            "joint refinement order {order}, errors {errors:?}"
        );
    }
}
