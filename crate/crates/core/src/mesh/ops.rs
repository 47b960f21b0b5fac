//! Discrete operators on the staggered grid.
//!
//! Each operator is defined once, as a stencil emitter producing
//! `(row, column, coefficient)` triples. The same emitter drives both the
//! matrix-free application used by the free functions and the sparse assembly
//! in [`Operators`], so the two can never drift apart.

use super::{Grid, ScalarField, VectorField};
use crate::error::{ChnsError, Result};
use crate::linalg::{CsrMatrix, TripletBuilder};

/// Gradient, faces x cells: `(c_R - c_L) / h`.
pub(crate) fn emit_grad(g: &Grid, emit: &mut impl FnMut(usize, usize, f64)) {
    let (idx, idy) = (1.0 / g.dx(), 1.0 / g.dy());
    for f in 0..g.n_xfaces() {
        let (i, j) = g.xface_coords(f);
        let (i, j) = (i as isize, j as isize);
        let l = g.cell_at(i - 1, j).expect("stored x-face has a left cell");
        let r = g.cell_at(i, j).expect("stored x-face has a right cell");
        emit(f, r, idx);
        emit(f, l, -idx);
    }
    let off = g.n_xfaces();
    for f in 0..g.n_yfaces() {
        let (i, j) = g.yface_coords(f);
        let (i, j) = (i as isize, j as isize);
        let b = g.cell_at(i, j - 1).expect("stored y-face has a lower cell");
        let t = g.cell_at(i, j).expect("stored y-face has an upper cell");
        emit(off + f, t, idy);
        emit(off + f, b, -idy);
    }
}

/// Arithmetic cell→face average, faces x cells.
pub(crate) fn emit_to_faces(g: &Grid, emit: &mut impl FnMut(usize, usize, f64)) {
    for f in 0..g.n_xfaces() {
        let (i, j) = g.xface_coords(f);
        let (i, j) = (i as isize, j as isize);
        emit(f, g.cell_at(i - 1, j).unwrap(), 0.5);
        emit(f, g.cell_at(i, j).unwrap(), 0.5);
    }
    let off = g.n_xfaces();
    for f in 0..g.n_yfaces() {
        let (i, j) = g.yface_coords(f);
        let (i, j) = (i as isize, j as isize);
        emit(off + f, g.cell_at(i, j - 1).unwrap(), 0.5);
        emit(off + f, g.cell_at(i, j).unwrap(), 0.5);
    }
}

/// Componentwise five-point Laplacian, faces x faces. Tangential velocities see
/// a Dirichlet ghost `-u` across walls; normal wall velocities are zero.
pub(crate) fn emit_vector_laplacian(g: &Grid, emit: &mut impl FnMut(usize, usize, f64)) {
    let (ix2, iy2) = (1.0 / (g.dx() * g.dx()), 1.0 / (g.dy() * g.dy()));
    for f in 0..g.n_xfaces() {
        let (i, j) = g.xface_coords(f);
        let (i, j) = (i as isize, j as isize);
        emit(f, f, -2.0 * ix2);
        for n in [g.xface_at(i - 1, j), g.xface_at(i + 1, j)].into_iter().flatten() {
            emit(f, n, ix2);
        }
        for n in [g.xface_at(i, j - 1), g.xface_at(i, j + 1)] {
            match n {
                Some(n) => {
                    emit(f, n, iy2);
                    emit(f, f, -iy2);
                }
                None => emit(f, f, -2.0 * iy2),
            }
        }
    }
    let off = g.n_xfaces();
    for f in 0..g.n_yfaces() {
        let (i, j) = g.yface_coords(f);
        let (i, j) = (i as isize, j as isize);
        let r = off + f;
        emit(r, r, -2.0 * iy2);
        for n in [g.yface_at(i, j - 1), g.yface_at(i, j + 1)].into_iter().flatten() {
            emit(r, off + n, iy2);
        }
        for n in [g.yface_at(i - 1, j), g.yface_at(i + 1, j)] {
            match n {
                Some(n) => {
                    emit(r, off + n, ix2);
                    emit(r, r, -ix2);
                }
                None => emit(r, r, -2.0 * ix2),
            }
        }
    }
}

/// Normal strain rates at cells: `∂x u` (first) and `∂y v` (second), cells x faces.
pub(crate) fn emit_normal_strain(
    g: &Grid,
    emit_xx: &mut impl FnMut(usize, usize, f64),
    emit_yy: &mut impl FnMut(usize, usize, f64),
) {
    let (idx, idy) = (1.0 / g.dx(), 1.0 / g.dy());
    let off = g.n_xfaces();
    for j in 0..g.ny() as isize {
        for i in 0..g.nx() as isize {
            let c = g.cell_at(i, j).unwrap();
            if let Some(f) = g.xface_at(i + 1, j) {
                emit_xx(c, f, idx);
            }
            if let Some(f) = g.xface_at(i, j) {
                emit_xx(c, f, -idx);
            }
            if let Some(f) = g.yface_at(i, j + 1) {
                emit_yy(c, off + f, idy);
            }
            if let Some(f) = g.yface_at(i, j) {
                emit_yy(c, off + f, -idy);
            }
        }
    }
}

/// One-sided difference across a node between the face on the `plus` side and
/// the face on the `minus` side. A missing face inside the wall layer is a
/// no-slip ghost (`-u`), which doubles the remaining coefficient.
fn node_difference(
    plus: Option<usize>,
    minus: Option<usize>,
    scale: f64,
    emit: &mut impl FnMut(usize, f64),
) {
    match (plus, minus) {
        (Some(p), Some(m)) => {
            emit(p, scale);
            emit(m, -scale);
        }
        (Some(p), None) => emit(p, 2.0 * scale),
        (None, Some(m)) => emit(m, -2.0 * scale),
        (None, None) => {}
    }
}

/// Shear strain `½ (∂y u + ∂x v)` at nodes, nodes x faces.
pub(crate) fn emit_shear_strain(g: &Grid, emit: &mut impl FnMut(usize, usize, f64)) {
    let (hdx, hdy) = (0.5 / g.dx(), 0.5 / g.dy());
    let off = g.n_xfaces();
    let (ni, nj) = match g.bc() {
        super::BoundaryMode::Box => (g.nx() + 1, g.ny() + 1),
        super::BoundaryMode::Periodic => (g.nx(), g.ny()),
    };
    for j in 0..nj as isize {
        for i in 0..ni as isize {
            let n = g.node_at(i, j).unwrap();
            node_difference(g.xface_at(i, j), g.xface_at(i, j - 1), hdy, &mut |f, v| {
                emit(n, f, v)
            });
            node_difference(g.yface_at(i, j), g.yface_at(i - 1, j), hdx, &mut |f, v| {
                emit(n, off + f, v)
            });
        }
    }
}

/// Cell→node average over the cells touching each node, nodes x cells.
pub(crate) fn emit_to_nodes(g: &Grid, emit: &mut impl FnMut(usize, usize, f64)) {
    let (ni, nj) = match g.bc() {
        super::BoundaryMode::Box => (g.nx() + 1, g.ny() + 1),
        super::BoundaryMode::Periodic => (g.nx(), g.ny()),
    };
    for j in 0..nj as isize {
        for i in 0..ni as isize {
            let n = g.node_at(i, j).unwrap();
            let cells: Vec<usize> = [(i - 1, j - 1), (i, j - 1), (i - 1, j), (i, j)]
                .iter()
                .filter_map(|&(a, b)| g.cell_at(a, b))
                .collect();
            let w = 1.0 / cells.len() as f64;
            for c in cells {
                emit(n, c, w);
            }
        }
    }
}

fn node_weights(g: &Grid) -> Vec<f64> {
    let mut w = vec![0.0; g.n_nodes()];
    let (ni, nj) = match g.bc() {
        super::BoundaryMode::Box => (g.nx() + 1, g.ny() + 1),
        super::BoundaryMode::Periodic => (g.nx(), g.ny()),
    };
    for j in 0..nj {
        for i in 0..ni {
            w[g.node_at(i as isize, j as isize).unwrap()] = g.node_weight_fraction(i, j);
        }
    }
    w
}

fn assemble(
    nrows: usize,
    ncols: usize,
    emitter: impl FnOnce(&mut dyn FnMut(usize, usize, f64)),
) -> CsrMatrix {
    let mut b = TripletBuilder::new(nrows, ncols);
    emitter(&mut |i, j, v| b.add(i, j, v));
    b.build()
}

fn apply(n_out: usize, x: &[f64], emitter: impl FnOnce(&mut dyn FnMut(usize, usize, f64))) -> Vec<f64> {
    let mut y = vec![0.0; n_out];
    emitter(&mut |i, j, v| y[i] += v * x[j]);
    y
}

fn apply_transposed(
    n_out: usize,
    x: &[f64],
    emitter: impl FnOnce(&mut dyn FnMut(usize, usize, f64)),
) -> Vec<f64> {
    let mut y = vec![0.0; n_out];
    emitter(&mut |i, j, v| y[j] += v * x[i]);
    y
}

/// Discrete gradient onto faces. Box-boundary faces are not stored; their
/// (homogeneous Neumann) gradient is zero.
pub fn grad(c: &ScalarField) -> VectorField {
    let g = *c.grid();
    let y = apply(g.n_faces(), c.values(), |e| emit_grad(&g, &mut |i, j, v| e(i, j, v)));
    VectorField::from_vec(&g, y)
}

/// Discrete divergence, the negative adjoint of [`grad`].
pub fn div(u: &VectorField) -> ScalarField {
    let g = *u.grid();
    let y = apply_transposed(g.n_cells(), u.values(), |e| {
        emit_grad(&g, &mut |i, j, v| e(i, j, -v))
    });
    ScalarField::from_vec(&g, y)
}

pub fn avg_to_faces(c: &ScalarField) -> VectorField {
    let g = *c.grid();
    let y = apply(g.n_faces(), c.values(), |e| {
        emit_to_faces(&g, &mut |i, j, v| e(i, j, v))
    });
    VectorField::from_vec(&g, y)
}

/// Face→cell average, the transpose of [`avg_to_faces`]. Both components are
/// summed, so `avg_to_cells(u ⊙ grad c)` approximates `u · ∇c`.
pub fn avg_to_cells(u: &VectorField) -> ScalarField {
    let g = *u.grid();
    let y = apply_transposed(g.n_cells(), u.values(), |e| {
        emit_to_faces(&g, &mut |i, j, v| e(i, j, v))
    });
    ScalarField::from_vec(&g, y)
}

/// `div(coeff ⊙ grad c)`; every face coefficient must be positive.
pub fn laplace_neumann(c: &ScalarField, coeff: &VectorField) -> Result<ScalarField> {
    check_coefficients(coeff.values())?;
    let mut flux = grad(c);
    for (f, w) in flux.values_mut().iter_mut().zip(coeff.values()) {
        *f *= w;
    }
    Ok(div(&flux))
}

pub(crate) fn check_coefficients(coeff: &[f64]) -> Result<()> {
    if let Some((k, &w)) = coeff.iter().enumerate().find(|(_, w)| !(**w > 0.0 && w.is_finite())) {
        return Err(ChnsError::invalid(
            "positive_face_coefficients",
            format!("face coefficient {k} is {w}; all must be finite and > 0"),
        ));
    }
    Ok(())
}

pub fn vector_laplacian(u: &VectorField) -> VectorField {
    let g = *u.grid();
    let y = apply(g.n_faces(), u.values(), |e| {
        emit_vector_laplacian(&g, &mut |i, j, v| e(i, j, v))
    });
    VectorField::from_vec(&g, y)
}

/// Assembled operator matrices for one grid.
#[derive(Clone, Debug)]
pub struct Operators {
    grid: Grid,
    /// faces x cells
    pub grad: CsrMatrix,
    /// cells x faces, equal to `-gradᵀ`
    pub div: CsrMatrix,
    /// faces x cells
    pub to_faces: CsrMatrix,
    /// cells x faces, equal to `to_facesᵀ`
    pub to_cells: CsrMatrix,
    /// faces x faces
    pub vector_laplacian: CsrMatrix,
    strain_xx: CsrMatrix,
    strain_yy: CsrMatrix,
    strain_xy: CsrMatrix,
    to_nodes: CsrMatrix,
    node_weights: Vec<f64>,
}

impl Operators {
    pub fn new(grid: &Grid) -> Self {
        let g = *grid;
        let (nc, nf, nn) = (g.n_cells(), g.n_faces(), g.n_nodes());
        let grad = assemble(nf, nc, |e| emit_grad(&g, &mut |i, j, v| e(i, j, v)));
        let div = grad.transpose().scaled(-1.0);
        let to_faces = assemble(nf, nc, |e| emit_to_faces(&g, &mut |i, j, v| e(i, j, v)));
        let to_cells = to_faces.transpose();
        let vector_laplacian = assemble(nf, nf, |e| {
            emit_vector_laplacian(&g, &mut |i, j, v| e(i, j, v))
        })
        .with_symmetric(true);
        let mut bxx = TripletBuilder::new(nc, nf);
        let mut byy = TripletBuilder::new(nc, nf);
        emit_normal_strain(
            &g,
            &mut |i, j, v| bxx.add(i, j, v),
            &mut |i, j, v| byy.add(i, j, v),
        );
        let strain_xy = assemble(nn, nf, |e| emit_shear_strain(&g, &mut |i, j, v| e(i, j, v)));
        let to_nodes = assemble(nn, nc, |e| emit_to_nodes(&g, &mut |i, j, v| e(i, j, v)));
        Operators {
            grid: g,
            grad,
            div,
            to_faces,
            to_cells,
            vector_laplacian,
            strain_xx: bxx.build(),
            strain_yy: byy.build(),
            strain_xy,
            to_nodes,
            node_weights: node_weights(&g),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn grad(&self, c: &[f64]) -> Vec<f64> {
        self.grad.matvec(c)
    }

    pub fn div(&self, u: &[f64]) -> Vec<f64> {
        self.div.matvec(u)
    }

    pub fn to_faces(&self, c: &[f64]) -> Vec<f64> {
        self.to_faces.matvec(c)
    }

    pub fn to_cells(&self, u: &[f64]) -> Vec<f64> {
        self.to_cells.matvec(u)
    }

    pub fn to_nodes(&self, c: &[f64]) -> Vec<f64> {
        self.to_nodes.matvec(c)
    }

    /// `div · diag(coeff) · grad`, cells x cells; symmetric negative semidefinite.
    pub fn laplace_matrix(&self, coeff: &[f64]) -> Result<CsrMatrix> {
        check_coefficients(coeff)?;
        Ok(self.div.mul(&self.grad.scale_rows(coeff)).with_symmetric(true))
    }

    /// Strain-form viscous operator `u ↦ -div(2 η D(u))` per unit volume, with
    /// `eta` given at cells and averaged to nodes. Assembled as `Dᵀ W D`, so it
    /// is symmetric positive semidefinite by construction.
    pub fn viscous_matrix(&self, eta_cells: &[f64]) -> CsrMatrix {
        let eta_nodes = self.to_nodes(eta_cells);
        let two_eta: Vec<f64> = eta_cells.iter().map(|e| 2.0 * e).collect();
        let shear_w: Vec<f64> = eta_nodes
            .iter()
            .zip(&self.node_weights)
            .map(|(e, w)| 4.0 * e * w)
            .collect();
        let xx = self.strain_xx.transpose().mul(&self.strain_xx.scale_rows(&two_eta));
        let yy = self.strain_yy.transpose().mul(&self.strain_yy.scale_rows(&two_eta));
        let xy = self.strain_xy.transpose().mul(&self.strain_xy.scale_rows(&shear_w));
        xx.add(1.0, &yy, 1.0).add(1.0, &xy, 1.0).with_symmetric(true)
    }

    /// `Δ_hᵀ Δ_h`, the biharmonic form per unit volume.
    pub fn biharmonic_matrix(&self) -> CsrMatrix {
        let l = &self.vector_laplacian;
        l.transpose().mul(l).with_symmetric(true)
    }

    /// `Σ V [2η (D_xx² + D_yy²) + 4η D_xy²]`, the viscous dissipation rate density
    /// integrated over the domain.
    pub fn viscous_dissipation(&self, eta_cells: &[f64], u: &[f64]) -> f64 {
        let vol = self.grid.cell_volume();
        let dxx = self.strain_xx.matvec(u);
        let dyy = self.strain_yy.matvec(u);
        let dxy = self.strain_xy.matvec(u);
        let eta_nodes = self.to_nodes(eta_cells);
        let mut cells = 0.0;
        for c in 0..dxx.len() {
            cells += 2.0 * eta_cells[c] * (dxx[c] * dxx[c] + dyy[c] * dyy[c]);
        }
        let mut nodes = 0.0;
        for n in 0..dxy.len() {
            nodes += 4.0 * eta_nodes[n] * self.node_weights[n] * dxy[n] * dxy[n];
        }
        vol * (cells + nodes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BoundaryMode;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_scalar(g: &Grid, rng: &mut ChaCha8Rng) -> ScalarField {
        ScalarField::from_vec(g, (0..g.n_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    fn random_vector(g: &Grid, rng: &mut ChaCha8Rng) -> VectorField {
        VectorField::from_vec(g, (0..g.n_faces()).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        for bc in [BoundaryMode::Box, BoundaryMode::Periodic] {
            let g = Grid::new(6, 5, 1.0, 2.0, bc).unwrap();
            assert_eq!(grad(&ScalarField::constant(&g, 4.2)).max_abs(), 0.0);
        }
    }

    #[test]
    fn gradient_of_x_on_periodic_grid() {
        let g = Grid::new(8, 4, 2.0, 1.0, BoundaryMode::Periodic).unwrap();
        let c = ScalarField::from_fn(&g, |x, _| x);
        let u = grad(&c);
        for f in 0..g.n_xfaces() {
            let (i, _) = g.xface_coords(f);
            let want = if i == 0 { 1.0 - g.nx() as f64 } else { 1.0 };
            assert!((u.x()[f] - want).abs() < 1e-13);
        }
        assert!(u.y().iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn duality_on_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for bc in [BoundaryMode::Box, BoundaryMode::Periodic] {
            let g = Grid::new(7, 9, 1.3, 0.7, bc).unwrap();
            let c = random_scalar(&g, &mut rng);
            let u = random_vector(&g, &mut rng);
            let a = grad(&c).inner(&u);
            let b = c.inner(&div(&u));
            assert!((a + b).abs() <= 1e-13 * (a.abs() + b.abs()));
        }
    }

    #[test]
    fn divergence_of_zero_and_divergence_theorem() {
        let g = Grid::unit_square(8, BoundaryMode::Box);
        assert_eq!(div(&VectorField::zeros(&g)).max_abs(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_vector(&g, &mut rng);
        let total = div(&u).integral();
        assert!(total.abs() < 1e-14);
    }

    #[test]
    fn divergence_of_radial_gradient_is_four() {
        let g = Grid::unit_square(16, BoundaryMode::Box);
        let c = ScalarField::from_fn(&g, |x, y| x * x + y * y);
        let d = div(&grad(&c));
        for j in 1..15 {
            for i in 1..15 {
                assert!((d.get(i, j) - 4.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn neumann_laplacian_properties() {
        let g = Grid::new(32, 8, 1.0, 0.25, BoundaryMode::Periodic).unwrap();
        let ones = VectorField::from_vec(&g, vec![1.0; g.n_faces()]);
        let k = 2.0 * PI;
        let c = ScalarField::from_fn(&g, |x, _| (k * x).cos());
        let l = laplace_neumann(&c, &ones).unwrap();
        for (lv, cv) in l.values().iter().zip(c.values()) {
            assert!((lv + k * k * cv).abs() < 0.05 * k * k);
        }
        assert!(laplace_neumann(&ScalarField::constant(&g, 2.0), &ones).unwrap().max_abs() < 1e-12);
        let mut bad = ones.clone();
        bad.values_mut()[3] = 0.0;
        assert!(laplace_neumann(&c, &bad).is_err());
    }

    #[test]
    fn neumann_laplacian_is_second_order() {
        let mut errs = Vec::new();
        for n in [16, 32] {
            let g = Grid::new(n, 4, 1.0, 1.0, BoundaryMode::Periodic).unwrap();
            let ones = VectorField::from_vec(&g, vec![1.0; g.n_faces()]);
            let k = 2.0 * PI;
            let c = ScalarField::from_fn(&g, |x, _| (k * x).cos());
            let l = laplace_neumann(&c, &ones).unwrap();
            let err = l
                .values()
                .iter()
                .zip(c.values())
                .map(|(a, b)| (a + k * k * b).abs())
                .fold(0.0, f64::max);
            errs.push(err);
        }
        assert!((errs[0] / errs[1] - 4.0).abs() < 0.2);
    }

    #[test]
    fn vector_laplacian_annihilates_linear_flow() {
        let g = Grid::unit_square(8, BoundaryMode::Periodic);
        assert_eq!(vector_laplacian(&VectorField::zeros(&g)).max_abs(), 0.0);
        let u = VectorField::from_fn(&g, |_, _| 1.5, |_, _| -0.5);
        assert!(vector_laplacian(&u).max_abs() < 1e-10);
    }

    #[test]
    fn matrices_match_matrix_free_application() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for bc in [BoundaryMode::Box, BoundaryMode::Periodic] {
            let g = Grid::new(5, 4, 1.0, 1.0, bc).unwrap();
            let ops = Operators::new(&g);
            let c = random_scalar(&g, &mut rng);
            let u = random_vector(&g, &mut rng);
            assert_eq!(ops.grad(c.values()), grad(&c).into_vec());
            assert_eq!(ops.to_faces(c.values()), avg_to_faces(&c).into_vec());
            let d1 = ops.div(u.values());
            let d2 = div(&u).into_vec();
            assert!(d1.iter().zip(&d2).all(|(a, b)| (a - b).abs() < 1e-12));
            let l1 = ops.vector_laplacian.matvec(u.values());
            let l2 = vector_laplacian(&u).into_vec();
            assert!(l1.iter().zip(&l2).all(|(a, b)| (a - b).abs() < 1e-9));
        }
    }

    #[test]
    fn wall_stencil_uses_no_slip_ghost() {
        let g = Grid::unit_square(4, BoundaryMode::Box);
        let ops = Operators::new(&g);
        let f = g.xface_at(2, 0).unwrap();
        let above = g.xface_at(2, 1).unwrap();
        let h2 = g.dy() * g.dy();
        // (u_above - 3 u) / dy² + x-direction part (-2 u / dx²)
        assert!((ops.vector_laplacian.get(f, f) - (-3.0 / h2 - 2.0 / (g.dx() * g.dx()))).abs() < 1e-9);
        assert!((ops.vector_laplacian.get(f, above) - 1.0 / h2).abs() < 1e-9);
    }

    #[test]
    fn constant_viscosity_strain_form_matches_stokes_reference() {
        for bc in [BoundaryMode::Box, BoundaryMode::Periodic] {
            let g = Grid::new(6, 5, 1.0, 0.8, bc).unwrap();
            let ops = Operators::new(&g);
            let eta = 1.7;
            let a = ops.viscous_matrix(&vec![eta; g.n_cells()]);
            // independent reference: -η Δ_h - η grad div
            let reference = ops
                .vector_laplacian
                .add(-eta, &ops.grad.mul(&ops.div), -eta);
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            for _ in 0..5 {
                let u: Vec<f64> = (0..g.n_faces()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let y1 = a.matvec(&u);
                let y2 = reference.matvec(&u);
                let scale = crate::linalg::norm_inf(&y2);
                for (p, q) in y1.iter().zip(&y2) {
                    assert!((p - q).abs() <= 1e-12 * scale, "{bc}");
                }
            }
            assert!(a.symmetry_defect(4, 1) < 1e-13);
        }
    }

    #[test]
    fn viscous_dissipation_equals_quadratic_form() {
        let g = Grid::new(6, 6, 1.0, 1.0, BoundaryMode::Box).unwrap();
        let ops = Operators::new(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let eta: Vec<f64> = (0..g.n_cells()).map(|_| rng.gen_range(1.0..2.0)).collect();
        let u: Vec<f64> = (0..g.n_faces()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = ops.viscous_matrix(&eta);
        let form = g.cell_volume() * crate::linalg::dot(&u, &a.matvec(&u));
        let diss = ops.viscous_dissipation(&eta, &u);
        assert!((form - diss).abs() <= 1e-12 * diss);
    }

    #[test]
    fn biharmonic_form_is_symmetric() {
        let g = Grid::unit_square(6, BoundaryMode::Box);
        let ops = Operators::new(&g);
        assert!(ops.biharmonic_matrix().symmetry_defect(5, 2) < 1e-13);
    }
}
