//! Two-dimensional staggered (MAC) grid.
//!
//! Scalars live at cell centres, the x-velocity on vertical faces and the
//! y-velocity on horizontal faces. Only faces carrying a degree of freedom are
//! stored: in box mode the boundary faces (where the normal velocity vanishes)
//! are implicit zeros, in periodic mode the wrap-around faces are stored once.
//!
//! Every cell and every stored face carries the same quadrature weight
//! `dx * dy`, so the discrete divergence is exactly the negative transpose of the
//! discrete gradient and the cell→face and face→cell averages are transposes of
//! each other. All energy bookkeeping of the time step rests on these dualities.

mod ops;
mod selftest;
pub mod snapshot;

use std::fmt;
use std::str::FromStr;

use crate::error::{ChnsError, Result};

pub use ops::{
    avg_to_cells, avg_to_faces, div, grad, laplace_neumann, vector_laplacian, Operators,
};
pub use selftest::{sbp_selftest, sbp_selftest_with, SelftestCheck, SelftestReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryMode {
    /// No-slip walls with homogeneous Neumann conditions for cell scalars.
    Box,
    Periodic,
}

impl FromStr for BoundaryMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "box" => Ok(BoundaryMode::Box),
            "periodic" => Ok(BoundaryMode::Periodic),
            other => Err(format!("unknown boundary mode '{other}' (expected box|periodic)")),
        }
    }
}

impl fmt::Display for BoundaryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryMode::Box => "box",
            BoundaryMode::Periodic => "periodic",
        })
    }
}

/// A uniform rectangular grid on `[0, lx] x [0, ly]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    dx: f64,
    dy: f64,
    bc: BoundaryMode,
}

impl Grid {
    /// At least two cells are required in total; a single cell has no faces.
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64, bc: BoundaryMode) -> Result<Self> {
        if nx == 0 || ny == 0 || nx * ny < 2 {
            return Err(ChnsError::invalid(
                "grid_size",
                format!("need nx, ny >= 1 and at least two cells (got {nx}x{ny})"),
            ));
        }
        if !(lx.is_finite() && lx > 0.0 && ly.is_finite() && ly > 0.0) {
            return Err(ChnsError::invalid(
                "grid_extent",
                format!("domain extents must be positive (got {lx} x {ly})"),
            ));
        }
        Ok(Grid {
            nx,
            ny,
            lx,
            ly,
            dx: lx / nx as f64,
            dy: ly / ny as f64,
            bc,
        })
    }

    /// `n x n` cells on the unit square.
    pub fn unit_square(n: usize, bc: BoundaryMode) -> Self {
        Self::new(n, n, 1.0, 1.0, bc).expect("valid unit grid")
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn dy(&self) -> f64 {
        self.dy
    }
    pub fn bc(&self) -> BoundaryMode {
        self.bc
    }
    pub fn is_periodic(&self) -> bool {
        self.bc == BoundaryMode::Periodic
    }

    /// Quadrature weight of every cell and every stored face.
    pub fn cell_volume(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    /// Number of stored x-faces: `(nx - 1) ny` in box mode, `nx ny` if periodic.
    pub fn n_xfaces(&self) -> usize {
        match self.bc {
            BoundaryMode::Box => (self.nx - 1) * self.ny,
            BoundaryMode::Periodic => self.nx * self.ny,
        }
    }

    pub fn n_yfaces(&self) -> usize {
        match self.bc {
            BoundaryMode::Box => self.nx * (self.ny - 1),
            BoundaryMode::Periodic => self.nx * self.ny,
        }
    }

    pub fn n_faces(&self) -> usize {
        self.n_xfaces() + self.n_yfaces()
    }

    /// Nodes (cell corners) used by the shear-strain and vorticity stencils.
    pub fn n_nodes(&self) -> usize {
        match self.bc {
            BoundaryMode::Box => (self.nx + 1) * (self.ny + 1),
            BoundaryMode::Periodic => self.nx * self.ny,
        }
    }

    #[inline]
    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Cell `(i, j)` with periodic wrapping, or `None` outside a box domain.
    #[inline]
    pub fn cell_at(&self, i: isize, j: isize) -> Option<usize> {
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        match self.bc {
            BoundaryMode::Box => {
                (0..nx).contains(&i).then_some(())?;
                (0..ny).contains(&j).then_some(())?;
                Some((j * nx + i) as usize)
            }
            BoundaryMode::Periodic => {
                Some((j.rem_euclid(ny) * nx + i.rem_euclid(nx)) as usize)
            }
        }
    }

    /// The x-face on vertical grid line `i` (at `x = i dx`) in cell row `j`,
    /// indexed within the x-block. `None` for box-boundary lines, where the
    /// normal velocity is identically zero.
    #[inline]
    pub fn xface_at(&self, i: isize, j: isize) -> Option<usize> {
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        match self.bc {
            BoundaryMode::Box => {
                (1..nx).contains(&i).then_some(())?;
                (0..ny).contains(&j).then_some(())?;
                Some((j * (nx - 1) + i - 1) as usize)
            }
            BoundaryMode::Periodic => {
                Some((j.rem_euclid(ny) * nx + i.rem_euclid(nx)) as usize)
            }
        }
    }

    /// The y-face on horizontal grid line `j` in cell column `i`, indexed within
    /// the y-block (add [`Self::n_xfaces`] for the offset in a [`VectorField`]).
    #[inline]
    pub fn yface_at(&self, i: isize, j: isize) -> Option<usize> {
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        match self.bc {
            BoundaryMode::Box => {
                (0..nx).contains(&i).then_some(())?;
                (1..ny).contains(&j).then_some(())?;
                Some(((j - 1) * nx + i) as usize)
            }
            BoundaryMode::Periodic => {
                Some((j.rem_euclid(ny) * nx + i.rem_euclid(nx)) as usize)
            }
        }
    }

    /// Grid-line coordinates `(i, j)` of a stored x-face.
    #[inline]
    pub fn xface_coords(&self, f: usize) -> (usize, usize) {
        match self.bc {
            BoundaryMode::Box => (f % (self.nx - 1) + 1, f / (self.nx - 1)),
            BoundaryMode::Periodic => (f % self.nx, f / self.nx),
        }
    }

    /// Grid-line coordinates `(i, j)` of a stored y-face (block-local index).
    #[inline]
    pub fn yface_coords(&self, f: usize) -> (usize, usize) {
        match self.bc {
            BoundaryMode::Box => (f % self.nx, f / self.nx + 1),
            BoundaryMode::Periodic => (f % self.nx, f / self.nx),
        }
    }

    /// Node at grid-line intersection `(i, j)`; wraps in periodic mode.
    #[inline]
    pub fn node_at(&self, i: isize, j: isize) -> Option<usize> {
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        match self.bc {
            BoundaryMode::Box => {
                (0..=nx).contains(&i).then_some(())?;
                (0..=ny).contains(&j).then_some(())?;
                Some((j * (nx + 1) + i) as usize)
            }
            BoundaryMode::Periodic => {
                Some((j.rem_euclid(ny) * nx + i.rem_euclid(nx)) as usize)
            }
        }
    }

    /// Fraction of a full cell volume attributed to a node: `1/2` on walls and
    /// `1/4` at corners in box mode.
    pub fn node_weight_fraction(&self, i: usize, j: usize) -> f64 {
        match self.bc {
            BoundaryMode::Periodic => 1.0,
            BoundaryMode::Box => {
                let fx = if i == 0 || i == self.nx { 0.5 } else { 1.0 };
                let fy = if j == 0 || j == self.ny { 0.5 } else { 1.0 };
                fx * fy
            }
        }
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.dx, (j as f64 + 0.5) * self.dy)
    }

    /// Physical position of a stored x-face.
    pub fn xface_center(&self, f: usize) -> (f64, f64) {
        let (i, j) = self.xface_coords(f);
        (i as f64 * self.dx, (j as f64 + 0.5) * self.dy)
    }

    pub fn yface_center(&self, f: usize) -> (f64, f64) {
        let (i, j) = self.yface_coords(f);
        ((i as f64 + 0.5) * self.dx, j as f64 * self.dy)
    }
}

/// Cell-centred scalar field.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        ScalarField {
            grid: *grid,
            data: vec![value; grid.n_cells()],
        }
    }

    pub fn from_vec(grid: &Grid, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), grid.n_cells(), "scalar field length mismatch");
        ScalarField { grid: *grid, data }
    }

    /// Samples `f(x, y)` at cell centres.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.n_cells());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let (x, y) = grid.cell_center(i, j);
                data.push(f(x, y));
            }
        }
        ScalarField { grid: *grid, data }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.data
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
    pub fn len(&self) -> usize {
        self.data.len()
    }
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField {
            grid: self.grid,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Midpoint-rule integral `Σ V c`.
    pub fn integral(&self) -> f64 {
        self.grid.cell_volume() * self.data.iter().sum::<f64>()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Weighted inner product `Σ V a b`.
    pub fn inner(&self, other: &ScalarField) -> f64 {
        self.grid.cell_volume() * crate::linalg::dot(&self.data, &other.data)
    }

    pub fn norm_l2(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        crate::linalg::norm_inf(&self.data)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.grid.cell_index(i, j)]
    }
}

/// Face-centred vector field; x-components first, then y-components.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: Grid,
    data: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: &Grid) -> Self {
        VectorField {
            grid: *grid,
            data: vec![0.0; grid.n_faces()],
        }
    }

    pub fn from_vec(grid: &Grid, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), grid.n_faces(), "vector field length mismatch");
        VectorField { grid: *grid, data }
    }

    /// Samples `(fx, fy)` at the stored face centres.
    pub fn from_fn(grid: &Grid, fx: impl Fn(f64, f64) -> f64, fy: impl Fn(f64, f64) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.n_faces());
        for f in 0..grid.n_xfaces() {
            let (x, y) = grid.xface_center(f);
            data.push(fx(x, y));
        }
        for f in 0..grid.n_yfaces() {
            let (x, y) = grid.yface_center(f);
            data.push(fy(x, y));
        }
        VectorField { grid: *grid, data }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.data
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
    pub fn x(&self) -> &[f64] {
        &self.data[..self.grid.n_xfaces()]
    }
    pub fn y(&self) -> &[f64] {
        &self.data[self.grid.n_xfaces()..]
    }
    pub fn x_mut(&mut self) -> &mut [f64] {
        let n = self.grid.n_xfaces();
        &mut self.data[..n]
    }
    pub fn y_mut(&mut self) -> &mut [f64] {
        let n = self.grid.n_xfaces();
        &mut self.data[n..]
    }

    /// Weighted inner product `Σ V u w` over stored faces.
    pub fn inner(&self, other: &VectorField) -> f64 {
        self.grid.cell_volume() * crate::linalg::dot(&self.data, &other.data)
    }

    pub fn norm_l2(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        crate::linalg::norm_inf(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn face_counts() {
        let b = Grid::unit_square(4, BoundaryMode::Box);
        assert_eq!((b.n_xfaces(), b.n_yfaces(), b.n_nodes()), (12, 12, 25));
        let p = Grid::unit_square(4, BoundaryMode::Periodic);
        assert_eq!((p.n_xfaces(), p.n_yfaces(), p.n_nodes()), (16, 16, 16));
        let two = Grid::new(2, 1, 2.0, 1.0, BoundaryMode::Box).unwrap();
        assert_eq!((two.n_xfaces(), two.n_yfaces()), (1, 0));
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Grid::new(1, 1, 1.0, 1.0, BoundaryMode::Box).is_err());
        assert!(Grid::new(0, 4, 1.0, 1.0, BoundaryMode::Box).is_err());
        assert!(Grid::new(4, 4, -1.0, 1.0, BoundaryMode::Box).is_err());
    }

    #[test]
    fn face_index_roundtrip() {
        for bc in [BoundaryMode::Box, BoundaryMode::Periodic] {
            let g = Grid::new(5, 3, 1.0, 1.0, bc).unwrap();
            for f in 0..g.n_xfaces() {
                let (i, j) = g.xface_coords(f);
                assert_eq!(g.xface_at(i as isize, j as isize), Some(f));
            }
            for f in 0..g.n_yfaces() {
                let (i, j) = g.yface_coords(f);
                assert_eq!(g.yface_at(i as isize, j as isize), Some(f));
            }
        }
        let g = Grid::new(5, 3, 1.0, 1.0, BoundaryMode::Box).unwrap();
        assert_eq!(g.xface_at(0, 1), None);
        assert_eq!(g.xface_at(5, 1), None);
        assert_eq!(g.yface_at(2, 3), None);
        let p = Grid::new(5, 3, 1.0, 1.0, BoundaryMode::Periodic).unwrap();
        assert_eq!(p.xface_at(5, 1), p.xface_at(0, 1));
        assert_eq!(p.cell_at(-1, 0), Some(4));
    }

    #[test]
    fn integral_and_mean() {
        let g = Grid::new(4, 2, 2.0, 1.0, BoundaryMode::Box).unwrap();
        let c = ScalarField::constant(&g, 3.0);
        assert!((c.integral() - 6.0).abs() < 1e-15);
        assert_eq!(c.mean(), 3.0);
    }
}
