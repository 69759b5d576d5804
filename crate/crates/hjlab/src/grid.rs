//! Cell-centered tensor grids on convex boxes.
//!
//! The grid owns the geometry used everywhere else: per-axis extents, cell
//! counts and spacings. Homogeneous Neumann boundaries are realized by even
//! ghost reflection, so the reflected index map lives here too.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Minimum cells per axis; coarser grids make the boundary collar overlap.
pub const MIN_CELLS: usize = 8;

/// Uniform cell-centered grid over a box in 1 or 2 dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    extents: Vec<[f64; 2]>,
    cells: Vec<usize>,
    spacing: Vec<f64>,
}

impl Grid {
    /// Build a grid from per-axis intervals and cell counts.
    pub fn new(extents: &[[f64; 2]], cells: &[usize]) -> Result<Grid> {
        if extents.is_empty() || extents.len() > 2 || extents.len() != cells.len() {
            return Err(Error::Input(format!(
                "expected matching extents/cells for 1 or 2 axes, got {} and {}",
                extents.len(),
                cells.len()
            )));
        }
        for (axis, (&[lo, hi], &n)) in extents.iter().zip(cells).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::InvalidDomain { axis, lo, hi });
            }
            if n < MIN_CELLS {
                return Err(Error::Resolution {
                    axis,
                    cells: n,
                    min: MIN_CELLS,
                });
            }
        }
        let spacing = extents
            .iter()
            .zip(cells)
            .map(|(&[lo, hi], &n)| (hi - lo) / n as f64)
            .collect();
        Ok(Grid {
            extents: extents.to_vec(),
            cells: cells.to_vec(),
            spacing,
        })
    }

    /// Convenience constructor for a 1D grid.
    pub fn line(lo: f64, hi: f64, cells: usize) -> Result<Grid> {
        Grid::new(&[[lo, hi]], &[cells])
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn extents(&self) -> &[[f64; 2]] {
        &self.extents
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    /// Per-axis spacing h_i.
    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn total_cells(&self) -> usize {
        self.cells.iter().product()
    }

    /// Volume of a single cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Coordinate of the cell center along one axis.
    pub fn center(&self, axis: usize, index: usize) -> f64 {
        self.extents[axis][0] + (index as f64 + 0.5) * self.spacing[axis]
    }

    /// Full coordinates of a flat cell index.
    pub fn position(&self, flat: usize) -> Vec<f64> {
        let idx = self.unflatten(flat);
        idx.iter()
            .enumerate()
            .map(|(a, &i)| self.center(a, i))
            .collect()
    }

    /// Flat index from per-axis indices (x fastest).
    pub fn flatten(&self, idx: &[usize]) -> usize {
        match *idx {
            [i] => i,
            [i, j] => j * self.cells[0] + i,
            _ => unreachable!("grid is 1D or 2D"),
        }
    }

    pub fn unflatten(&self, flat: usize) -> Vec<usize> {
        match self.dim() {
            1 => vec![flat],
            _ => vec![flat % self.cells[0], flat / self.cells[0]],
        }
    }

    /// Index of the cell containing a point (clamped to the box).
    pub fn cell_containing(&self, point: &[f64]) -> Result<usize> {
        if point.len() != self.dim() {
            return Err(Error::Input(format!(
                "point has {} coordinates, grid is {}-dimensional",
                point.len(),
                self.dim()
            )));
        }
        let mut idx = Vec::with_capacity(self.dim());
        for (axis, &x) in point.iter().enumerate() {
            let [lo, hi] = self.extents[axis];
            if !x.is_finite() || x < lo || x > hi {
                return Err(Error::Input(format!(
                    "coordinate {x} outside [{lo}, {hi}] on axis {axis}"
                )));
            }
            let i = ((x - lo) / self.spacing[axis]).floor() as usize;
            idx.push(i.min(self.cells[axis] - 1));
        }
        Ok(self.flatten(&idx))
    }

    /// Even (mirror) reflection of a signed per-axis index into `0..n`.
    ///
    /// `-1` maps to `0`, `n` maps to `n-1`: the ghost cell takes the value of
    /// its mirror image across the face, which encodes a zero normal
    /// derivative at the face.
    pub fn reflect(&self, axis: usize, index: isize) -> usize {
        let n = self.cells[axis] as isize;
        let r = if index < 0 {
            -index - 1
        } else if index >= n {
            2 * n - 1 - index
        } else {
            index
        };
        debug_assert!((0..n).contains(&r), "stencil reaches beyond one reflection");
        r as usize
    }
}

/// Real-valued samples on the cells of a grid, optionally tagged with a time.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
    time: Option<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<ScalarField> {
        if values.len() != grid.total_cells() {
            return Err(Error::Compatibility(format!(
                "field has {} values, grid has {} cells",
                values.len(),
                grid.total_cells()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("field value {bad}"),
            });
        }
        Ok(ScalarField {
            grid,
            values,
            time: None,
        })
    }

    pub fn constant(grid: Arc<Grid>, value: f64) -> ScalarField {
        let n = grid.total_cells();
        ScalarField {
            grid,
            values: vec![value; n],
            time: None,
        }
    }

    /// Sample a function of the cell-center coordinates.
    pub fn sample(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> ScalarField {
        let values = (0..grid.total_cells())
            .map(|k| f(&grid.position(k)))
            .collect();
        ScalarField {
            grid,
            values,
            time: None,
        }
    }

    pub fn with_time(mut self, t: f64) -> ScalarField {
        self.time = Some(t);
        self
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn time(&self) -> Option<f64> {
        self.time
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Max-norm of the difference with another field on the same grid.
    pub fn sup_distance(&self, other: &ScalarField) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn check_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid.as_ref() != other.grid.as_ref() {
            return Err(Error::Compatibility(
                "fields live on different grids".into(),
            ));
        }
        Ok(())
    }
}

/// One real vector per cell, stored as per-axis component planes.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Arc<Grid>,
    components: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn new(grid: Arc<Grid>, components: Vec<Vec<f64>>) -> VectorField {
        debug_assert_eq!(components.len(), grid.dim());
        debug_assert!(components.iter().all(|c| c.len() == grid.total_cells()));
        VectorField { grid, components }
    }

    pub fn zeros(grid: Arc<Grid>) -> VectorField {
        let n = grid.total_cells();
        let d = grid.dim();
        VectorField {
            grid,
            components: vec![vec![0.0; n]; d],
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn component(&self, axis: usize) -> &[f64] {
        &self.components[axis]
    }

    pub fn component_mut(&mut self, axis: usize) -> &mut [f64] {
        &mut self.components[axis]
    }

    /// Vector at one cell.
    pub fn at(&self, flat: usize) -> Vec<f64> {
        self.components.iter().map(|c| c[flat]).collect()
    }

    /// Max over cells of the Euclidean norm.
    pub fn sup_norm(&self) -> f64 {
        (0..self.grid.total_cells())
            .map(|k| {
                self.components
                    .iter()
                    .map(|c| c[k] * c[k])
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Per-axis max of |component|.
    pub fn component_sup(&self) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .collect()
    }
}

/// Compensated (Neumaier) summation; keeps ledger sums exact to the last bit.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
