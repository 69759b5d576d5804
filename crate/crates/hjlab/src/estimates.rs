//! A priori quantities and inequality certificates on solver output.
//!
//! Everything here is measured from trajectories: the gradient sup plus the
//! density-weighted second-order integral (the Lipschitz certificate), the
//! weighted second-order bound with its closed-form constant K, the one-sided
//! Laplacian bound, the duality representation residual, and the explicit
//! lower-bound constant.

use crate::error::{Error, Result};
use crate::fp::{self, DensityTrajectory, SolutionDrift};
use crate::grid::{compensated_sum, ScalarField};
use crate::ops;
use crate::solver::{self, ProblemSpec, SpaceTimeField};
use serde::{Deserialize, Serialize};

/// Fields of the uniform gradient bound: sup |Du| plus the 2*eps-weighted
/// second-order integral along the adjoint density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzCertificate {
    pub sup_grad: f64,
    pub weighted_hess: f64,
    pub c_l: f64,
    pub eps: f64,
}

/// Weighted second-order integral against its closed-form bound
/// `K = n a^2 T^(a-1) / (4(a-1)) + T^a M0 + T^(a+1) c_f / (a+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderCertificate {
    pub alpha: f64,
    pub measured: f64,
    pub k_bound: f64,
    pub m0: f64,
    pub cf: f64,
    pub pass: bool,
}

/// Measured max of the positive part of the discrete Laplacian vs its bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaPlusCertificate {
    pub measured_max: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Multiplicative slack applied to inequality checks: absorbs first-order
/// scheme and quadrature error without masking order-of-magnitude violations.
pub const CERT_SLACK: f64 = 1.05;

/// Max over space-time of the Euclidean norm of the central gradient.
pub fn sup_gradient(u_traj: &SpaceTimeField) -> f64 {
    let mut sup = 0.0f64;
    for slice in u_traj.slices() {
        sup = sup.max(ops::gradient(slice).sup_norm());
    }
    sup
}

/// Assemble the Lipschitz certificate from a solution and its adjoint density.
pub fn lipschitz_certificate(
    u_traj: &SpaceTimeField,
    rho: &DensityTrajectory,
    eps: f64,
) -> Result<LipschitzCertificate> {
    let hess_traj = u_traj.map_slices(ops::hessian_frobenius_sq);
    let weighted_hess = 2.0 * eps * fp::pair(rho, &hess_traj, |_| 1.0)?;
    let sup_grad = sup_gradient(u_traj);
    Ok(LipschitzCertificate {
        sup_grad,
        weighted_hess,
        c_l: sup_grad + weighted_hess,
        eps,
    })
}

/// Closed-form second-order bound.
pub fn k_formula(n: usize, alpha: f64, horizon: f64, m0: f64, cf: f64) -> f64 {
    let n = n as f64;
    n * alpha * alpha * horizon.powf(alpha - 1.0) / (4.0 * (alpha - 1.0))
        + horizon.powf(alpha) * m0
        + horizon.powf(alpha + 1.0) * cf / (alpha + 1.0)
}

/// Measure the (t - tau)^alpha weighted second-order integral and compare it
/// with K. `cf` is a constant-in-time bound on the Laplacian of the source.
pub fn weighted_second_order(
    u_traj: &SpaceTimeField,
    rho: &DensityTrajectory,
    eps: f64,
    alpha: f64,
    tau: f64,
    m0: f64,
    cf: f64,
) -> Result<SecondOrderCertificate> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(Error::Input(format!(
            "alpha must lie in (1, 2), got {alpha}"
        )));
    }
    let horizon = u_traj.terminal_slice().time().unwrap();
    let hess_traj = u_traj.map_slices(ops::hessian_frobenius_sq);
    let measured = fp::pair(rho, &hess_traj, |t| (t - tau).max(0.0).powf(alpha))?;
    let k_bound = k_formula(u_traj.grid().dim(), alpha, horizon - tau, m0, cf);
    let _ = eps;
    Ok(SecondOrderCertificate {
        alpha,
        measured,
        k_bound,
        m0,
        cf,
        pass: measured <= k_bound * CERT_SLACK,
    })
}

/// Max over interior cells and stored times of the positive part of the
/// discrete Laplacian, against `M0 + integral of c_f`.
///
/// The one-cell boundary collar is excluded: the ghost-based Laplacian there
/// encodes the boundary condition, not the interior inequality. Refuses to
/// certify when the problem's hypothesis flags are not all set.
pub fn delta_u_plus_bound(
    problem: &ProblemSpec,
    u_traj: &SpaceTimeField,
    m0: f64,
    cf_integral: f64,
) -> Result<DeltaPlusCertificate> {
    if !problem.flags.semi_superharmonic_terminal
        || !problem.flags.source_delta_bound
        || !problem.flags.source_normal_nonneg
    {
        return Err(Error::Hypothesis(format!(
            "delta_u_plus_bound needs certified data, flags are {:?}",
            problem.flags
        )));
    }
    if !problem.terminal.normal_compatible {
        return Err(Error::Hypothesis(format!(
            "terminal {:?} has nonzero face slope; its reflection sheds a positive \
             Laplacian sheet near t = T, so M_0 does not bound (Lap u)^+ there",
            problem.terminal.name
        )));
    }
    use crate::hamiltonian::HamiltonianKind;
    match problem.hamiltonian.kind {
        HamiltonianKind::Quadratic | HamiltonianKind::Power { .. } => {}
        _ => {
            return Err(Error::Hypothesis(
                "delta_u_plus_bound applies to power-type Hamiltonians".into(),
            ))
        }
    }
    let grid = u_traj.grid();
    let mut measured = 0.0f64;
    for slice in u_traj.slices() {
        let lap = ops::laplacian(slice);
        for (k, v) in lap.values().iter().enumerate() {
            let idx = grid.unflatten(k);
            let interior = (0..grid.dim()).all(|a| idx[a] >= 1 && idx[a] + 1 < grid.cells()[a]);
            if interior {
                measured = measured.max(*v);
            }
        }
    }
    let bound = m0 + cf_integral;
    Ok(DeltaPlusCertificate {
        measured_max: measured,
        bound,
        pass: measured <= bound + 0.05 * (1.0 + bound),
    })
}

/// Relative defect of the duality representation formula
/// `<v(tau), rho(tau)> = <v(T), rho(T)> + time-space integral of Lap(u) rho`.
///
/// `v` is the divided difference in the viscosity, `rho` solves the adjoint
/// problem with drift `-DpH(Du)` from a Dirac at `x0` at time `tau`.
pub fn duality_residual(
    problem: &ProblemSpec,
    eps: f64,
    eta: f64,
    x0: &[f64],
    tau: f64,
    dt: f64,
) -> Result<f64> {
    let u = solver::solve_viscous(problem, eps, dt)?;
    let v = solver::epsilon_derivative(problem, eps, eta, dt)?;
    let drift = SolutionDrift::new(&u, problem.hamiltonian.clone());
    let rho = fp::solve_adjoint(&problem.grid, problem.horizon, &drift, eps, x0, tau, dt)?;

    let vol = problem.grid.cell_volume();
    let v_tau = v.at_time(tau)?;
    let rho_tau = rho.at_time(tau)?;
    let lhs = compensated_sum(
        v_tau
            .values()
            .iter()
            .zip(rho_tau.values())
            .map(|(a, b)| a * b),
    ) * vol;

    let v_end = v.terminal_slice();
    let rho_end = rho.at_time(problem.horizon)?;
    let terminal_term = compensated_sum(
        v_end
            .values()
            .iter()
            .zip(rho_end.values())
            .map(|(a, b)| a * b),
    ) * vol;

    let lap_traj = u.map_slices(ops::laplacian);
    let bulk = fp::pair(&rho, &lap_traj, |_| 1.0)?;
    let rhs = terminal_term + bulk;
    Ok((lhs - rhs).abs() / (1.0 + lhs.abs()))
}

/// Explicit end-of-proof lower-bound constant:
/// `(1/beta) sqrt(n K / (2(1-beta))) eps^beta + sqrt(n C_L) eps`.
pub fn lower_bound_constant(beta: f64, n: usize, k: f64, c_l: f64, eps: f64) -> Result<f64> {
    if !(beta > 0.5 && beta < 1.0) {
        return Err(Error::Input(format!(
            "beta must lie in (1/2, 1), got {beta}"
        )));
    }
    if k < 0.0 || c_l < 0.0 {
        return Err(Error::Input("K and C_L must be nonnegative".into()));
    }
    let n = n as f64;
    Ok(
        (1.0 / beta) * (n * k / (2.0 * (1.0 - beta))).sqrt() * eps.powf(beta)
            + (n * c_l).sqrt() * eps,
    )
}

/// Positive parts of the signed sup gaps between two fields on one grid:
/// `pos = max(0, max(u_eps - u))`, `neg = max(0, max(u - u_eps))`.
pub fn one_sided_sup(u_eps: &ScalarField, u: &ScalarField) -> Result<(f64, f64)> {
    u_eps.check_same_grid(u)?;
    let mut pos = 0.0f64;
    let mut neg = 0.0f64;
    for (a, b) in u_eps.values().iter().zip(u.values()) {
        pos = pos.max(a - b);
        neg = neg.max(b - a);
    }
    Ok((pos.max(0.0), neg.max(0.0)))
}

/// Largest boundary normal difference of |Du|^2 over all stored slices;
/// convexity of the box forces this to be nonpositive up to round-off.
pub fn max_boundary_increase_of_grad_sq(u_traj: &SpaceTimeField) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for slice in u_traj.slices() {
        let grad = ops::gradient(slice);
        let n = slice.grid().total_cells();
        let w: Vec<f64> = (0..n)
            .map(|k| {
                (0..slice.grid().dim())
                    .map(|a| grad.component(a)[k].powi(2))
                    .sum()
            })
            .collect();
        let w_field = ScalarField::new(slice.grid().clone(), w).expect("finite");
        for d in ops::boundary_normal_difference(&w_field) {
            worst = worst.max(d);
        }
    }
    worst
}
