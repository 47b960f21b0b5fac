use super::csr::{norm2, norm_inf, CsrMatrix};
use super::krylov::{pcg, Ic0, KrylovConfig};
use super::{SolveError, SpdSolver, BandedLu, DIRECT_LIMIT};
use crate::error::{ChnsError, Result};
use crate::mesh::{Grid, Operators, ScalarField, VectorField};

fn project_mean_free(x: &mut [f64]) {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= m);
}

/// Mean-augmented Neumann operator `x ↦ -div(c grad x) + (∫ x) 1`.
///
/// The augmentation makes the operator invertible on the whole cell space; for a
/// mean-free right-hand side it is inert and the solution is mean-free.
#[derive(Clone, Debug)]
pub struct NeumannPoisson {
    grid: Grid,
    /// `-div diag(c) grad`, symmetric positive semidefinite with constant kernel.
    k: CsrMatrix,
    inner: PinnedSolver,
}

#[derive(Clone, Debug)]
enum PinnedSolver {
    Direct(BandedLu),
    Iterative { pre: Option<Ic0>, cfg: KrylovConfig },
}

impl NeumannPoisson {
    pub fn new(ops: &Operators, coeff: &[f64], cfg: &KrylovConfig) -> Result<Self> {
        let k = ops.laplace_matrix(coeff)?.scaled(-1.0).with_symmetric(true);
        let n = k.nrows();
        // Pin cell 0 by adding a multiple of e0 e0ᵀ; for compatible (mean-free)
        // data the pinned system has the same solution up to a constant.
        let mut pin = super::csr::TripletBuilder::new(n, n);
        pin.add(0, 0, k.get(0, 0).max(1.0));
        let pinned = k.add(1.0, &pin.build(), 1.0).with_symmetric(true);
        let inner = if n <= DIRECT_LIMIT {
            PinnedSolver::Direct(BandedLu::factor_reordered(&pinned)?)
        } else {
            PinnedSolver::Iterative {
                pre: Ic0::new(&pinned),
                cfg: cfg.clone(),
            }
        };
        Ok(NeumannPoisson {
            grid: *ops.grid(),
            k,
            inner,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `-div(c grad x) + (Σ V x) 1`
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.k.matvec(x);
        let total = self.grid.cell_volume() * x.iter().sum::<f64>();
        y.iter_mut().for_each(|v| *v += total);
        y
    }

    /// Mean-free `y` with `-div(c grad y) = b - mean(b)`.
    pub fn solve_mean_free(&self, b: &[f64]) -> std::result::Result<Vec<f64>, SolveError> {
        let mut rhs = b.to_vec();
        project_mean_free(&mut rhs);
        let mut y = match &self.inner {
            PinnedSolver::Direct(lu) => lu.solve(&rhs),
            PinnedSolver::Iterative { pre, cfg } => {
                let tol = cfg.rel_tol * norm2(&rhs) + cfg.abs_tol;
                let limit = cfg.max_iter.unwrap_or(10 * rhs.len());
                let proj: &dyn Fn(&mut [f64]) = &project_mean_free;
                let apply = |x: &[f64], y: &mut [f64]| self.k.matvec_into(x, y);
                match pre {
                    Some(ic) => pcg(apply, |r, z| ic.apply(r, z), Some(proj), &rhs, None, tol, limit)?.x,
                    None => pcg(apply, |r, z| z.copy_from_slice(r), Some(proj), &rhs, None, tol, limit)?.x,
                }
            }
        };
        project_mean_free(&mut y);
        Ok(y)
    }

    /// Solves the mean-augmented system exactly: with `b = b̂ + β 1` (`b̂`
    /// mean-free), `x = y + β / |Ω|` where `y` is the mean-free solution for `b̂`.
    pub fn solve(&self, b: &[f64]) -> std::result::Result<Vec<f64>, SolveError> {
        let beta = b.iter().sum::<f64>() / b.len() as f64;
        let shift = beta / self.grid.area();
        let mut x = self.solve_mean_free(b)?;
        x.iter_mut().for_each(|v| *v += shift);
        Ok(x)
    }
}

/// Solves `(-div(coeff grad) + ∫·) x = rhs` and certifies the result by forward
/// application.
pub fn solve_neumann_poisson(
    coeff: &VectorField,
    rhs: &ScalarField,
    cfg: &KrylovConfig,
) -> Result<ScalarField> {
    let grid = *rhs.grid();
    let ops = Operators::new(&grid);
    let solver = NeumannPoisson::new(&ops, coeff.values(), cfg)?;
    let x = solver.solve(rhs.values())?;
    let mut r = solver.apply(&x);
    for (ri, bi) in r.iter_mut().zip(rhs.values()) {
        *ri -= bi;
    }
    let scale = norm2(rhs.values()) + norm2(&solver.apply(&x));
    let tol = cfg.rel_tol.max(1e-12) * scale + cfg.abs_tol;
    let res = norm2(&r);
    if res > tol {
        return Err(SolveError::NotCertified {
            residual: res,
            tolerance: tol,
        }
        .into());
    }
    Ok(ScalarField::from_vec(&grid, x))
}

/// Approximate inverse of the pressure Schur complement:
/// `z = P⁻¹ r + a r + b (-Δ_h) r`, with `P = -div(w grad)` mean-free.
///
/// For a velocity block `m + ν(-Δ) + δΔ²` with face mass `m`, the choice
/// `w = 1/m`, `a = ν`, `b = δ` is spectrally equivalent to the exact inverse.
#[derive(Clone, Debug)]
pub struct SchurPreconditioner {
    poisson: Option<NeumannPoisson>,
    identity_weight: f64,
    laplace_weight: f64,
    neg_laplace: Option<CsrMatrix>,
}

impl SchurPreconditioner {
    pub fn identity() -> Self {
        SchurPreconditioner {
            poisson: None,
            identity_weight: 1.0,
            laplace_weight: 0.0,
            neg_laplace: None,
        }
    }

    pub fn new(
        ops: &Operators,
        inverse_mass: &[f64],
        identity_weight: f64,
        laplace_weight: f64,
        cfg: &KrylovConfig,
    ) -> Result<Self> {
        let poisson = Some(NeumannPoisson::new(ops, inverse_mass, cfg)?);
        let neg_laplace = (laplace_weight > 0.0).then(|| {
            ops.laplace_matrix(&vec![1.0; ops.grid().n_faces()])
                .expect("unit coefficients")
                .scaled(-1.0)
        });
        Ok(SchurPreconditioner {
            poisson,
            identity_weight,
            laplace_weight,
            neg_laplace,
        })
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) -> std::result::Result<(), SolveError> {
        match &self.poisson {
            Some(p) => z.copy_from_slice(&p.solve_mean_free(r)?),
            None => z.iter_mut().for_each(|v| *v = 0.0),
        }
        if self.identity_weight != 0.0 {
            for (zi, ri) in z.iter_mut().zip(r) {
                *zi += self.identity_weight * ri;
            }
        }
        if let Some(l) = &self.neg_laplace {
            l.matvec_add(self.laplace_weight, r, z);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SaddleStats {
    pub schur_iterations: usize,
    pub schur_history: Vec<f64>,
    pub velocity_solves: usize,
    /// `max |div v|` recomputed from the returned velocity.
    pub div_inf: f64,
}

/// Solver for `[A G; div 0] [v; p] = [f; 0]` by preconditioned CG on the
/// pressure Schur complement `Gᵀ A⁻¹ G` (mean-free), with exact inner velocity
/// solves when the velocity block is small enough to factor.
#[derive(Clone, Debug)]
pub struct SaddleSolver {
    grad: CsrMatrix,
    div: CsrMatrix,
    a: SpdSolver,
    pre: SchurPreconditioner,
    cfg: KrylovConfig,
}

impl SaddleSolver {
    pub fn new(ops: &Operators, a: CsrMatrix, pre: SchurPreconditioner, cfg: &KrylovConfig) -> Result<Self> {
        if a.nrows() != ops.grid().n_faces() || a.ncols() != a.nrows() {
            return Err(SolveError::Dimension("velocity block does not match grid".into()).into());
        }
        let inner = KrylovConfig {
            rel_tol: 0.01 * cfg.rel_tol,
            abs_tol: 0.01 * cfg.abs_tol,
            ..cfg.clone()
        };
        Ok(SaddleSolver {
            grad: ops.grad.clone(),
            div: ops.div.clone(),
            a: SpdSolver::new(a, &inner)?,
            pre,
            cfg: cfg.clone(),
        })
    }

    /// Solves the velocity block alone: `A x = b`.
    pub fn solve_velocity_block(&self, b: &[f64]) -> Result<Vec<f64>> {
        Ok(self.a.solve(b)?)
    }

    pub fn solve(&self, f: &[f64]) -> Result<(Vec<f64>, Vec<f64>, SaddleStats)> {
        let mut stats = SaddleStats::default();
        let a_inv_f = self.a.solve(f)?;
        stats.velocity_solves += 1;
        // Gᵀ = -div
        let mut b: Vec<f64> = self.div.matvec(&a_inv_f).iter().map(|v| -v).collect();
        project_mean_free(&mut b);
        let tol = self.cfg.rel_tol * norm2(&b) + self.cfg.abs_tol;
        let limit = self.cfg.max_iter.unwrap_or(10 * b.len()).max(1);

        let mut inner_err: Option<SolveError> = None;
        let mut count = 0usize;
        let proj: &dyn Fn(&mut [f64]) = &project_mean_free;
        let sol = {
            let apply = |p: &[f64], y: &mut [f64]| {
                let gp = self.grad.matvec(p);
                match self.a.solve(&gp) {
                    Ok(w) => {
                        count += 1;
                        let d = self.div.matvec(&w);
                        for i in 0..y.len() {
                            y[i] = -d[i];
                        }
                    }
                    Err(e) => {
                        inner_err.get_or_insert(e);
                        y.iter_mut().for_each(|v| *v = 0.0);
                    }
                }
            };
            let mut pre_err: Option<SolveError> = None;
            let precond = |r: &[f64], z: &mut [f64]| {
                if let Err(e) = self.pre.apply(r, z) {
                    pre_err.get_or_insert(e);
                }
            };
            let out = pcg(apply, precond, Some(proj), &b, None, tol, limit);
            if let Some(e) = pre_err {
                return Err(e.into());
            }
            out
        };
        if let Some(e) = inner_err {
            return Err(e.into());
        }
        let sol = sol?;
        stats.velocity_solves += count;
        stats.schur_iterations = sol.iterations;
        stats.schur_history = sol.history;
        let mut p = sol.x;
        project_mean_free(&mut p);

        let gp = self.grad.matvec(&p);
        let rhs: Vec<f64> = f.iter().zip(&gp).map(|(a, b)| a - b).collect();
        let v = self.a.solve(&rhs)?;
        stats.velocity_solves += 1;
        stats.div_inf = norm_inf(&self.div.matvec(&v));
        Ok((v, p, stats))
    }
}

/// One-shot saddle solve with a preconditioner built from the diagonal of the
/// velocity block. Returns the velocity and the mean-free pressure.
pub fn solve_saddle(
    visc_block: &CsrMatrix,
    grid: &Grid,
    rhs_v: &VectorField,
    cfg: &KrylovConfig,
) -> Result<(VectorField, ScalarField, SaddleStats)> {
    let ops = Operators::new(grid);
    let diag = visc_block.diagonal();
    if diag.iter().any(|d| !(*d > 0.0)) {
        return Err(ChnsError::invalid(
            "spd_velocity_block",
            "velocity block has a non-positive diagonal entry",
        ));
    }
    let inv: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
    let pre = SchurPreconditioner::new(&ops, &inv, 0.0, 0.0, cfg)?;
    let solver = SaddleSolver::new(&ops, visc_block.clone(), pre, cfg)?;
    let (v, p, stats) = solver.solve(rhs_v.values())?;
    Ok((VectorField::from_vec(grid, v), ScalarField::from_vec(grid, p), stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{grad, BoundaryMode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ones(g: &Grid) -> VectorField {
        VectorField::from_vec(g, vec![1.0; g.n_faces()])
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let g = Grid::unit_square(8, BoundaryMode::Box);
        let x = solve_neumann_poisson(&ones(&g), &ScalarField::zeros(&g), &KrylovConfig::default()).unwrap();
        assert_eq!(x.max_abs(), 0.0);
    }

    #[test]
    fn recovers_field_from_forward_application() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for bc in [BoundaryMode::Box, BoundaryMode::Periodic] {
            let g = Grid::new(12, 9, 1.0, 0.75, bc).unwrap();
            let ops = Operators::new(&g);
            let coeff: Vec<f64> = (0..g.n_faces()).map(|_| rng.gen_range(0.5..2.0)).collect();
            let target: Vec<f64> = (0..g.n_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let solver = NeumannPoisson::new(&ops, &coeff, &KrylovConfig::default()).unwrap();
            let rhs = solver.apply(&target);
            let x = solver.solve(&rhs).unwrap();
            for (a, b) in x.iter().zip(&target) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn constant_rhs_is_absorbed_by_the_mean() {
        let g = Grid::new(6, 4, 2.0, 1.0, BoundaryMode::Box).unwrap();
        let c = 3.0;
        let x = solve_neumann_poisson(&ones(&g), &ScalarField::constant(&g, c), &KrylovConfig::default())
            .unwrap();
        for v in x.values() {
            assert!((v - c / g.area()).abs() < 1e-13);
        }
    }

    #[test]
    fn one_dimensional_sine_matches_analytic_inverse() {
        // −u'' = sin-mode, Neumann: u = cos(kx)/k_h² with the discrete eigenvalue
        let n = 64;
        let g = Grid::new(n, 2, 1.0, 1.0 / 32.0, BoundaryMode::Box).unwrap();
        let k = std::f64::consts::PI;
        let b = ScalarField::from_fn(&g, |x, _| (k * x).cos());
        let x = solve_neumann_poisson(&ones(&g), &b, &KrylovConfig::default()).unwrap();
        let err = x
            .values()
            .iter()
            .zip(b.values())
            .map(|(xv, bv)| (xv - bv / (k * k)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-4, "err={err}");
    }

    #[test]
    fn saddle_zero_rhs() {
        let g = Grid::unit_square(6, BoundaryMode::Box);
        let a = CsrMatrix::identity(g.n_faces());
        let (v, p, _) = solve_saddle(&a, &g, &VectorField::zeros(&g), &KrylovConfig::default()).unwrap();
        assert_eq!(v.max_abs(), 0.0);
        assert_eq!(p.max_abs(), 0.0);
    }

    #[test]
    fn saddle_gradient_rhs_goes_to_pressure() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = Grid::unit_square(8, BoundaryMode::Box);
        let ops = Operators::new(&g);
        let eta: Vec<f64> = (0..g.n_cells()).map(|_| rng.gen_range(1.0..2.0)).collect();
        let a = ops
            .viscous_matrix(&eta)
            .add(1.0, &CsrMatrix::identity(g.n_faces()).scaled(10.0), 1.0);
        let s = ScalarField::from_vec(&g, (0..g.n_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let cfg = KrylovConfig {
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            ..KrylovConfig::default()
        };
        let (v, p, stats) = solve_saddle(&a, &g, &grad(&s), &cfg).unwrap();
        assert!(v.max_abs() < 1e-9, "{}", v.max_abs());
        let mean = s.mean();
        for (pv, sv) in p.values().iter().zip(s.values()) {
            assert!((pv - (sv - mean)).abs() < 1e-9);
        }
        assert!(stats.div_inf < 1e-9);
    }

    #[test]
    fn saddle_divergence_free_rhs_with_identity_block() {
        // discrete curl of a node streamfunction vanishing on the boundary
        let g = Grid::unit_square(8, BoundaryMode::Box);
        let psi = |i: isize, j: isize| {
            let (x, y) = (i as f64 / 8.0, j as f64 / 8.0);
            (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin()
        };
        let mut u = VectorField::zeros(&g);
        for f in 0..g.n_xfaces() {
            let (i, j) = g.xface_coords(f);
            let (i, j) = (i as isize, j as isize);
            u.values_mut()[f] = (psi(i, j + 1) - psi(i, j)) / g.dy();
        }
        let off = g.n_xfaces();
        for f in 0..g.n_yfaces() {
            let (i, j) = g.yface_coords(f);
            let (i, j) = (i as isize, j as isize);
            u.values_mut()[off + f] = -(psi(i + 1, j) - psi(i, j)) / g.dx();
        }
        assert!(crate::mesh::div(&u).max_abs() < 1e-12);
        let a = CsrMatrix::identity(g.n_faces());
        let (v, p, _) = solve_saddle(&a, &g, &u, &KrylovConfig::default()).unwrap();
        for (a, b) in v.values().iter().zip(u.values()) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(p.max_abs() < 1e-10);
    }
}
