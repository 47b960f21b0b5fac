use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ops::{avg_to_cells, avg_to_faces, div, grad, laplace_neumann, Operators};
use super::{Grid, ScalarField, VectorField};

const TOL: f64 = 1e-12;
const TRIALS: usize = 24;

#[derive(Clone, Debug, PartialEq)]
pub struct SelftestCheck {
    pub name: &'static str,
    /// Worst relative defect over all trials.
    pub defect: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelftestReport {
    pub grid: Grid,
    pub checks: Vec<SelftestCheck>,
}

impl SelftestReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&SelftestCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_text(&self) -> String {
        let g = &self.grid;
        let mut out = format!("mesh selftest {}x{} ({}):\n", g.nx(), g.ny(), g.bc());
        for c in &self.checks {
            let _ = writeln!(
                out,
                "  {:<28} {}  defect={:.3e}",
                c.name,
                if c.pass { "PASS" } else { "FAIL" },
                c.defect
            );
        }
        out
    }
}

/// Verifies the summation-by-parts identities of the grid operators on random
/// fields, to `1e-12` relative.
pub fn sbp_selftest(grid: &Grid) -> SelftestReport {
    sbp_selftest_with(grid, &grad, 0x5b9)
}

/// As [`sbp_selftest`], with the gradient supplied by the caller (used to check
/// that a defective gradient is caught).
pub fn sbp_selftest_with(
    grid: &Grid,
    gradient: &dyn Fn(&ScalarField) -> VectorField,
    seed: u64,
) -> SelftestReport {
    let g = *grid;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scalar = |rng: &mut ChaCha8Rng| {
        ScalarField::from_vec(&g, (0..g.n_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect())
    };
    let vector = |rng: &mut ChaCha8Rng| {
        VectorField::from_vec(&g, (0..g.n_faces()).map(|_| rng.gen_range(-1.0..1.0)).collect())
    };
    let positive = |rng: &mut ChaCha8Rng| {
        VectorField::from_vec(&g, (0..g.n_faces()).map(|_| rng.gen_range(0.5..2.0)).collect())
    };
    let ops = Operators::new(&g);

    let mut adjoint = 0.0f64;
    let mut divthm = 0.0f64;
    let mut lap_sym = 0.0f64;
    let mut lap_nsd = 0.0f64;
    let mut lap_kernel = 0.0f64;
    let mut interp = 0.0f64;
    let mut vlap_sym = 0.0f64;
    let mut linear = 0.0f64;

    for _ in 0..TRIALS {
        let c = scalar(&mut rng);
        let c2 = scalar(&mut rng);
        let u = vector(&mut rng);
        let w = positive(&mut rng);

        let gc = gradient(&c);
        let du = div(&u);
        let lhs = gc.inner(&u);
        let rhs = c.inner(&du);
        adjoint = adjoint.max(rel(lhs + rhs, gc.norm_l2() * u.norm_l2() + c.norm_l2() * du.norm_l2()));

        let abs_sum: f64 = du.values().iter().map(|v| v.abs()).sum::<f64>() * g.cell_volume();
        divthm = divthm.max(rel(du.integral(), abs_sum));

        let l1 = laplace_neumann(&c, &w).expect("positive coefficients");
        let l2 = laplace_neumann(&c2, &w).expect("positive coefficients");
        let a = l1.inner(&c2);
        let b = c.inner(&l2);
        lap_sym = lap_sym.max(rel(a - b, l1.norm_l2() * c2.norm_l2() + c.norm_l2() * l2.norm_l2()));
        let rq = l1.inner(&c);
        lap_nsd = lap_nsd.max(rel(rq.max(0.0), l1.norm_l2() * c.norm_l2()));

        let k = laplace_neumann(&ScalarField::constant(&g, c.values()[0]), &w).unwrap();
        lap_kernel = lap_kernel.max(rel(k.max_abs(), l1.max_abs()));

        let pf = avg_to_faces(&c);
        let pc = avg_to_cells(&u);
        let a = pf.inner(&u);
        let b = c.inner(&pc);
        interp = interp.max(rel(a - b, pf.norm_l2() * u.norm_l2() + c.norm_l2() * pc.norm_l2()));

        let u2 = vector(&mut rng);
        let lu = ops.vector_laplacian.matvec(u.values());
        let lu2 = ops.vector_laplacian.matvec(u2.values());
        let a = crate::linalg::dot(&lu, u2.values());
        let b = crate::linalg::dot(u.values(), &lu2);
        let scale = crate::linalg::norm2(&lu) * crate::linalg::norm2(u2.values())
            + crate::linalg::norm2(u.values()) * crate::linalg::norm2(&lu2);
        vlap_sym = vlap_sym.max(rel(a - b, scale));

        let (alpha, beta) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let combo = ScalarField::from_vec(
            &g,
            c.values().iter().zip(c2.values()).map(|(x, y)| alpha * x + beta * y).collect(),
        );
        let lhs = gradient(&combo);
        let r1 = gradient(&c);
        let r2 = gradient(&c2);
        let mut worst = 0.0f64;
        for k in 0..lhs.values().len() {
            let want = alpha * r1.values()[k] + beta * r2.values()[k];
            worst = worst.max((lhs.values()[k] - want).abs());
        }
        linear = linear.max(rel(worst, lhs.max_abs() + r1.max_abs() + r2.max_abs()));
    }

    let checks = [
        ("grad_div_adjoint", adjoint),
        ("divergence_theorem", divthm),
        ("laplace_symmetry", lap_sym),
        ("laplace_negative_semidefinite", lap_nsd),
        ("laplace_constant_kernel", lap_kernel),
        ("interpolation_duality", interp),
        ("vector_laplacian_symmetry", vlap_sym),
        ("linearity", linear),
    ]
    .into_iter()
    .map(|(name, defect)| SelftestCheck {
        name,
        defect,
        pass: defect <= TOL,
    })
    .collect();
    SelftestReport { grid: g, checks }
}

fn rel(x: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        x.abs() / scale
    } else {
        x.abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BoundaryMode;

    #[test]
    fn both_modes_pass() {
        for bc in [BoundaryMode::Box, BoundaryMode::Periodic] {
            let r = sbp_selftest(&Grid::new(12, 10, 1.0, 0.9, bc).unwrap());
            assert!(r.all_passed(), "{}", r.to_text());
        }
    }

    #[test]
    fn one_sided_gradient_breaks_adjointness() {
        let g = Grid::unit_square(8, BoundaryMode::Periodic);
        // forward difference shifted by one cell: consistent, but not the adjoint
        let biased = |c: &ScalarField| {
            let g = *c.grid();
            let mut u = grad(c);
            for f in 0..g.n_xfaces() {
                let (i, j) = g.xface_coords(f);
                let (i, j) = (i as isize, j as isize);
                let r = g.cell_at(i, j).unwrap();
                let rr = g.cell_at(i + 1, j).unwrap();
                u.values_mut()[f] = (c.values()[rr] - c.values()[r]) / g.dx();
            }
            u
        };
        let r = sbp_selftest_with(&g, &biased, 1);
        let adj = r.check("grad_div_adjoint").unwrap();
        assert!(!adj.pass);
        assert!(adj.defect > 1e-3);
    }
}
