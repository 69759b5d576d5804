//! Finite-difference operators with even-reflection ghost cells.
//!
//! Every stencil closes the boundary by mirroring across the face, which is
//! the discrete form of a homogeneous Neumann condition. Central gradient and
//! Laplacian are second order in the interior; the one-sided pair feeds
//! monotone numerical Hamiltonians.

use crate::grid::{ScalarField, VectorField};

/// One-sided differences per axis: `minus[a][k] = (u_k - u_{k-1})/h_a`,
/// `plus[a][k] = (u_{k+1} - u_k)/h_a`, ghost-reflected at the boundary.
#[derive(Debug, Clone)]
pub struct OneSidedGradients {
    pub minus: VectorField,
    pub plus: VectorField,
}

fn shifted_value(u: &ScalarField, idx: &[usize], axis: usize, offset: isize) -> f64 {
    let grid = u.grid();
    let mut nb = idx.to_vec();
    nb[axis] = grid.reflect(axis, idx[axis] as isize + offset);
    u.values()[grid.flatten(&nb)]
}

/// Central-difference gradient, even reflection at the boundary.
pub fn gradient(u: &ScalarField) -> VectorField {
    let grid = u.grid().clone();
    let mut out = VectorField::zeros(grid.clone());
    for axis in 0..grid.dim() {
        let two_h = 2.0 * grid.spacing()[axis];
        for k in 0..grid.total_cells() {
            let idx = grid.unflatten(k);
            let fwd = shifted_value(u, &idx, axis, 1);
            let bwd = shifted_value(u, &idx, axis, -1);
            out.component_mut(axis)[k] = (fwd - bwd) / two_h;
        }
    }
    out
}

/// Both one-sided differences per axis, for monotone numerical Hamiltonians.
pub fn one_sided_gradients(u: &ScalarField) -> OneSidedGradients {
    let grid = u.grid().clone();
    let mut minus = VectorField::zeros(grid.clone());
    let mut plus = VectorField::zeros(grid.clone());
    for axis in 0..grid.dim() {
        let h = grid.spacing()[axis];
        for k in 0..grid.total_cells() {
            let idx = grid.unflatten(k);
            let here = u.values()[k];
            let fwd = shifted_value(u, &idx, axis, 1);
            let bwd = shifted_value(u, &idx, axis, -1);
            minus.component_mut(axis)[k] = (here - bwd) / h;
            plus.component_mut(axis)[k] = (fwd - here) / h;
        }
    }
    OneSidedGradients { minus, plus }
}

/// Second-difference Laplacian with even-reflection closure.
pub fn laplacian(u: &ScalarField) -> ScalarField {
    let grid = u.grid().clone();
    let mut values = vec![0.0; grid.total_cells()];
    for axis in 0..grid.dim() {
        let h2 = grid.spacing()[axis] * grid.spacing()[axis];
        for (k, v) in values.iter_mut().enumerate() {
            let idx = grid.unflatten(k);
            let here = u.values()[k];
            let fwd = shifted_value(u, &idx, axis, 1);
            let bwd = shifted_value(u, &idx, axis, -1);
            *v += (fwd - 2.0 * here + bwd) / h2;
        }
    }
    let mut out = ScalarField::new(grid, values).expect("stencil preserves finiteness");
    if let Some(t) = u.time() {
        out = out.with_time(t);
    }
    out
}

/// Squared Frobenius norm of the discrete Hessian per cell.
///
/// Pure second differences per axis plus centered cross differences for the
/// mixed entries (counted twice, as in |D^2 u|^2). Boundary cells reuse the
/// stencil of the nearest interior cell instead of reflecting: the mirrored
/// extension of a field whose face slope is nonzero has a kink at the face,
/// and squaring that spike would poison the density-weighted integrals this
/// quantity feeds.
pub fn hessian_frobenius_sq(u: &ScalarField) -> ScalarField {
    let grid = u.grid().clone();
    let mut values = vec![0.0; grid.total_cells()];
    let clamp = |axis: usize, i: usize| i.clamp(1, grid.cells()[axis] - 2);
    for axis in 0..grid.dim() {
        let h2 = grid.spacing()[axis] * grid.spacing()[axis];
        for (k, v) in values.iter_mut().enumerate() {
            let mut idx = grid.unflatten(k);
            idx[axis] = clamp(axis, idx[axis]);
            let here = u.values()[grid.flatten(&idx)];
            let fwd = shifted_value(u, &idx, axis, 1);
            let bwd = shifted_value(u, &idx, axis, -1);
            let d2 = (fwd - 2.0 * here + bwd) / h2;
            *v += d2 * d2;
        }
    }
    if grid.dim() == 2 {
        let four_hh = 4.0 * grid.spacing()[0] * grid.spacing()[1];
        for (k, v) in values.iter_mut().enumerate() {
            let idx = grid.unflatten(k);
            let (ci, cj) = (clamp(0, idx[0]), clamp(1, idx[1]));
            let corner = |dx: isize, dy: isize| {
                let i = (ci as isize + dx) as usize;
                let j = (cj as isize + dy) as usize;
                u.values()[grid.flatten(&[i, j])]
            };
            let dxy = (corner(1, 1) - corner(1, -1) - corner(-1, 1) + corner(-1, -1)) / four_hh;
            *v += 2.0 * dxy * dxy;
        }
    }
    ScalarField::new(grid, values).expect("stencil preserves finiteness")
}

/// Max-norm over the deep interior of the discrete Bochner defect
/// `Δ|Du|² − 2|D²u|² − 2 Du·D(Δu)`.
///
/// Cells within two spacings of the boundary are excluded: the composite
/// third-difference stencils pick up reflection artifacts there.
pub fn bochner_residual(u: &ScalarField) -> f64 {
    let grid = u.grid().clone();
    let grad = gradient(u);
    let mut w_vals = vec![0.0; grid.total_cells()];
    for (k, w) in w_vals.iter_mut().enumerate() {
        *w = (0..grid.dim()).map(|a| grad.component(a)[k].powi(2)).sum();
    }
    let w = ScalarField::new(grid.clone(), w_vals).expect("finite");
    let lap_w = laplacian(&w);
    let hess_sq = hessian_frobenius_sq(u);
    let lap_u = laplacian(u);
    let grad_lap = gradient(&lap_u);

    let mut residual = 0.0f64;
    for k in 0..grid.total_cells() {
        let idx = grid.unflatten(k);
        let deep = (0..grid.dim()).all(|a| idx[a] >= 2 && idx[a] + 2 < grid.cells()[a]);
        if !deep {
            continue;
        }
        let cross: f64 = (0..grid.dim())
            .map(|a| grad.component(a)[k] * grad_lap.component(a)[k])
            .sum();
        let defect = lap_w.values()[k] - 2.0 * hess_sq.values()[k] - 2.0 * cross;
        residual = residual.max(defect.abs());
    }
    residual
}

/// One-sided outward difference `(u_boundary - u_inner)/h` for every boundary
/// cell of every face. Ordering: axes in order, low face then high face,
/// remaining indices in flat order.
pub fn boundary_normal_difference(u: &ScalarField) -> Vec<f64> {
    let grid = u.grid().clone();
    let mut out = Vec::new();
    for axis in 0..grid.dim() {
        let h = grid.spacing()[axis];
        let n = grid.cells()[axis];
        for side in [0usize, 1] {
            let (bnd, inner) = if side == 0 { (0, 1) } else { (n - 1, n - 2) };
            match grid.dim() {
                1 => {
                    let ub = u.values()[grid.flatten(&[bnd])];
                    let ui = u.values()[grid.flatten(&[inner])];
                    out.push((ub - ui) / h);
                }
                _ => {
                    let other = 1 - axis;
                    for j in 0..grid.cells()[other] {
                        let mut ib = [0usize; 2];
                        let mut ii = [0usize; 2];
                        ib[axis] = bnd;
                        ii[axis] = inner;
                        ib[other] = j;
                        ii[other] = j;
                        let ub = u.values()[grid.flatten(&ib)];
                        let ui = u.values()[grid.flatten(&ii)];
                        out.push((ub - ui) / h);
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use std::sync::Arc;

    fn line(n: usize) -> Arc<Grid> {
        Arc::new(Grid::line(0.0, 1.0, n).unwrap())
    }

    #[test]
    fn gradient_exact_on_affine_interior() {
        let g = line(10);
        let u = ScalarField::sample(g, |x| 3.0 * x[0]);
        let grad = gradient(&u);
        for k in 1..9 {
            assert!((grad.component(0)[k] - 3.0).abs() < 1e-13);
        }
    }

    #[test]
    fn gradient_of_constant_is_zero_everywhere() {
        let g = line(10);
        let u = ScalarField::constant(g, 4.2);
        let grad = gradient(&u);
        assert!(grad.sup_norm() == 0.0);
    }

    #[test]
    fn gradient_second_order_on_cosine() {
        // Oracle: analytic derivative -pi sin(pi x); interior refinement study.
        let mut errs = Vec::new();
        for n in [64usize, 128, 256] {
            let g = line(n);
            let u = ScalarField::sample(g.clone(), |x| (std::f64::consts::PI * x[0]).cos());
            let grad = gradient(&u);
            let mut err = 0.0f64;
            for k in 1..n - 1 {
                let x = g.center(0, k);
                let exact = -std::f64::consts::PI * (std::f64::consts::PI * x).sin();
                err = err.max((grad.component(0)[k] - exact).abs());
            }
            errs.push(err);
        }
        let order01 = (errs[0] / errs[1]).log2();
        let order12 = (errs[1] / errs[2]).log2();
        assert!(order01 > 1.9 && order01 < 2.1, "order {order01}");
        assert!(order12 > 1.9 && order12 < 2.1, "order {order12}");
    }

    #[test]
    fn one_sided_outward_difference_vanishes_at_faces() {
        // Ghost mirroring makes the across-face difference exactly zero.
        let g = line(16);
        let u = ScalarField::sample(g, |x| x[0] * x[0] + 0.3 * x[0]);
        let pair = one_sided_gradients(&u);
        assert_eq!(pair.minus.component(0)[0], 0.0);
        assert_eq!(pair.plus.component(0)[15], 0.0);
    }

    #[test]
    fn laplacian_exact_on_quadratic_interior() {
        let g = line(16);
        let u = ScalarField::sample(g, |x| x[0] * x[0]);
        let lap = laplacian(&u);
        for k in 1..15 {
            assert!((lap.values()[k] - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn laplacian_of_constant_is_zero() {
        let g = line(16);
        let u = ScalarField::constant(g, -7.0);
        let lap = laplacian(&u);
        assert!(lap.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn laplacian_second_order_on_cosine() {
        let mut errs = Vec::new();
        for n in [64usize, 128, 256] {
            let g = line(n);
            let pi = std::f64::consts::PI;
            let u = ScalarField::sample(g.clone(), |x| (pi * x[0]).cos());
            let lap = laplacian(&u);
            let mut err = 0.0f64;
            for k in 0..n {
                let x = g.center(0, k);
                let exact = -pi * pi * (pi * x).cos();
                err = err.max((lap.values()[k] - exact).abs());
            }
            errs.push(err);
        }
        let order = (errs[0] / errs[2]).log2() / 2.0;
        assert!(order > 1.9 && order < 2.1, "order {order}");
    }

    #[test]
    fn hessian_sq_on_1d_quadratic() {
        let g = line(16);
        let u = ScalarField::sample(g, |x| 0.5 * x[0] * x[0]);
        let h = hessian_frobenius_sq(&u);
        for k in 1..15 {
            assert!((h.values()[k] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn hessian_sq_zero_on_affine() {
        let g = line(16);
        let u = ScalarField::sample(g, |x| 2.0 * x[0] - 1.0);
        let h = hessian_frobenius_sq(&u);
        for k in 0..16 {
            assert!(h.values()[k].abs() < 1e-20, "cell {k}: {}", h.values()[k]);
        }
    }

    #[test]
    fn hessian_sq_on_bilinear_2d() {
        let g = Arc::new(Grid::new(&[[0.0, 1.0], [0.0, 1.0]], &[12, 12]).unwrap());
        let u = ScalarField::sample(g.clone(), |x| x[0] * x[1]);
        let h = hessian_frobenius_sq(&u);
        for j in 1..11 {
            for i in 1..11 {
                let k = g.flatten(&[i, j]);
                assert!((h.values()[k] - 2.0).abs() < 1e-10, "cell ({i},{j})");
            }
        }
    }

    #[test]
    fn bochner_residual_zero_on_quadratic() {
        let g = line(32);
        let u = ScalarField::sample(g, |x| 1.5 * x[0] * x[0] - 0.2 * x[0] + 3.0);
        assert!(bochner_residual(&u) <= 1e-10);
    }

    #[test]
    fn bochner_residual_zero_on_affine() {
        let g = line(32);
        let u = ScalarField::sample(g, |x| 0.7 * x[0] - 0.4);
        assert!(bochner_residual(&u) <= 1e-12);
    }

    #[test]
    fn bochner_residual_refines_at_order_two_ish() {
        let mut errs = Vec::new();
        for n in [64usize, 128, 256] {
            let g = line(n);
            let u = ScalarField::sample(g, |x| (std::f64::consts::PI * x[0]).cos());
            errs.push(bochner_residual(&u));
        }
        let order = (errs[0] / errs[2]).log2() / 2.0;
        assert!(order >= 1.8, "order {order}, residuals {errs:?}");
    }

    #[test]
    fn boundary_difference_constant_and_linear() {
        let g = line(10);
        let c = ScalarField::constant(g.clone(), 2.0);
        assert!(boundary_normal_difference(&c).iter().all(|&v| v == 0.0));

        let u = ScalarField::sample(g, |x| x[0]);
        let d = boundary_normal_difference(&u);
        assert!((d[0] + 1.0).abs() < 1e-12, "left face {}", d[0]);
        assert!((d[1] - 1.0).abs() < 1e-12, "right face {}", d[1]);
    }

    #[test]
    fn operators_are_linear() {
        let g = line(24);
        let u = ScalarField::sample(g.clone(), |x| (2.0 * x[0]).sin());
        let v = ScalarField::sample(g.clone(), |x| x[0] * x[0] * x[0]);
        let (a, b) = (1.7, -0.6);
        let combo_vals: Vec<f64> = u
            .values()
            .iter()
            .zip(v.values())
            .map(|(x, y)| a * x + b * y)
            .collect();
        let combo = ScalarField::new(g, combo_vals).unwrap();

        let lap_combo = laplacian(&combo);
        let lap_u = laplacian(&u);
        let lap_v = laplacian(&v);
        for k in 0..24 {
            let expect = a * lap_u.values()[k] + b * lap_v.values()[k];
            assert!((lap_combo.values()[k] - expect).abs() < 1e-9);
        }

        let g_combo = gradient(&combo);
        let g_u = gradient(&u);
        let g_v = gradient(&v);
        for k in 0..24 {
            let expect = a * g_u.component(0)[k] + b * g_v.component(0)[k];
            assert!((g_combo.component(0)[k] - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn laplacian_matches_div_grad_on_quadratics_deep_interior() {
        let g = line(32);
        let u = ScalarField::sample(g.clone(), |x| 2.0 * x[0] * x[0] - x[0] + 0.5);
        let lap = laplacian(&u);
        let grad = gradient(&u);
        // divergence of the central gradient, computed with central differences
        let gx = ScalarField::new(g.clone(), grad.component(0).to_vec()).unwrap();
        let div = gradient(&gx);
        for k in 2..30 {
            assert!((lap.values()[k] - div.component(0)[k]).abs() <= 1e-10);
        }
    }

    #[test]
    fn reflected_extension_agrees_with_ghost_stencils() {
        // Build the even extension by hand on a wider grid and compare
        // interior stencils there with ghost stencils here.
        let n = 16;
        let g = line(n);
        let u = ScalarField::sample(g.clone(), |x| (1.3 * x[0]).cos() + x[0] * x[0]);
        let lap = laplacian(&u);
        let grad = gradient(&u);

        let h = g.spacing()[0];
        // extended array with one ghost layer on each side
        let mut ext = vec![0.0; n + 2];
        ext[1..=n].copy_from_slice(u.values());
        ext[0] = u.values()[0];
        ext[n + 1] = u.values()[n - 1];
        for k in 0..n {
            let lap_ext = (ext[k] - 2.0 * ext[k + 1] + ext[k + 2]) / (h * h);
            let grad_ext = (ext[k + 2] - ext[k]) / (2.0 * h);
            assert_eq!(lap.values()[k], lap_ext);
            assert_eq!(grad.component(0)[k], grad_ext);
        }
    }
}
