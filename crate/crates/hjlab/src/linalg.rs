//! Direct solvers for the implicit Neumann diffusion step.
//!
//! The backward-Euler diffusion matrix `I + alpha*L` (L = second-difference
//! Neumann Laplacian, even-reflection closure) is a symmetric tridiagonal
//! M-matrix per axis. 1D uses a precomputed Thomas factorization; 2D applies
//! the two axis factors in sequence (ADI / Douglas factorization).

use crate::grid::Grid;

/// Thomas factorization of `I + alpha*L_n` for one grid line of `n` cells.
///
/// The matrix has diagonal `1 + 2 alpha` in the interior, `1 + alpha` at the
/// two boundary rows, and `-alpha` off-diagonals. All elimination denominators
/// stay >= 1, and for `rhs >= 0` every intermediate quantity is a nonnegative
/// combination of nonnegative terms, so solutions of nonnegative data are
/// exactly nonnegative in floating point.
#[derive(Debug, Clone)]
pub struct NeumannLineSolver {
    alpha: f64,
    upper_ratio: Vec<f64>,
    denom_inv: Vec<f64>,
}

impl NeumannLineSolver {
    pub fn new(n: usize, alpha: f64) -> NeumannLineSolver {
        assert!(n >= 2 && alpha >= 0.0);
        let mut upper_ratio = vec![0.0; n];
        let mut denom_inv = vec![0.0; n];
        let diag = |i: usize| {
            if i == 0 || i == n - 1 {
                1.0 + alpha
            } else {
                1.0 + 2.0 * alpha
            }
        };
        let mut den = diag(0);
        denom_inv[0] = 1.0 / den;
        upper_ratio[0] = -alpha / den;
        for i in 1..n {
            den = diag(i) + alpha * upper_ratio[i - 1];
            denom_inv[i] = 1.0 / den;
            if i < n - 1 {
                upper_ratio[i] = -alpha / den;
            }
        }
        NeumannLineSolver {
            alpha,
            upper_ratio,
            denom_inv,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Solve `(I + alpha*L) x = d` in place.
    pub fn solve(&self, d: &mut [f64]) {
        let n = self.denom_inv.len();
        debug_assert_eq!(d.len(), n);
        if self.alpha == 0.0 {
            return;
        }
        d[0] *= self.denom_inv[0];
        for i in 1..n {
            d[i] = (d[i] + self.alpha * d[i - 1]) * self.denom_inv[i];
        }
        for i in (0..n - 1).rev() {
            d[i] -= self.upper_ratio[i] * d[i + 1];
        }
    }
}

/// Implicit diffusion operator `(I + alpha_x Lx)(I + alpha_y Ly)` on a grid;
/// collapses to a single Thomas solve in 1D.
#[derive(Debug, Clone)]
pub struct ImplicitDiffusion {
    solvers: Vec<NeumannLineSolver>,
    cells: Vec<usize>,
}

impl ImplicitDiffusion {
    /// `alpha_i = eps * dt / h_i^2` per axis.
    pub fn new(grid: &Grid, alphas: &[f64]) -> ImplicitDiffusion {
        assert_eq!(alphas.len(), grid.dim());
        let solvers = grid
            .cells()
            .iter()
            .zip(alphas)
            .map(|(&n, &a)| NeumannLineSolver::new(n, a))
            .collect();
        ImplicitDiffusion {
            solvers,
            cells: grid.cells().to_vec(),
        }
    }

    /// Apply the inverse factor by factor, in place.
    pub fn solve(&self, values: &mut [f64]) {
        match self.cells.len() {
            1 => self.solvers[0].solve(values),
            _ => {
                let (nx, ny) = (self.cells[0], self.cells[1]);
                // x-sweeps: contiguous rows
                if self.solvers[0].alpha() > 0.0 {
                    for j in 0..ny {
                        self.solvers[0].solve(&mut values[j * nx..(j + 1) * nx]);
                    }
                }
                // y-sweeps: strided columns through a scratch line
                if self.solvers[1].alpha() > 0.0 {
                    let mut line = vec![0.0; ny];
                    for i in 0..nx {
                        for j in 0..ny {
                            line[j] = values[j * nx + i];
                        }
                        self.solvers[1].solve(&mut line);
                        for j in 0..ny {
                            values[j * nx + i] = line[j];
                        }
                    }
                }
            }
        }
    }
}
