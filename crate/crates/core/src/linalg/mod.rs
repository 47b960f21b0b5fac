//! Sparse linear algebra for the per-iteration systems of the time step.
//!
//! Everything here is deterministic for fixed inputs. Small systems (at most
//! [`DIRECT_LIMIT`] unknowns) are factored with a banded LU after bandwidth
//! reduction; larger symmetric positive definite systems use preconditioned CG.
//! Solutions are certified by recomputing the residual from the returned vector.

pub mod banded;
mod csr;
mod krylov;
mod poisson;

pub use banded::{reverse_cuthill_mckee, BandedLu};
pub use csr::{axpy, dot, norm2, norm_inf, CsrMatrix, TripletBuilder};
pub use krylov::{pcg, solve_spd, Ic0, KrylovConfig, Preconditioner, Solution};
pub use poisson::{
    solve_neumann_poisson, solve_saddle, NeumannPoisson, SaddleSolver, SaddleStats, SchurPreconditioner,
};

/// Alias matching the operator vocabulary used elsewhere in the crate.
pub type SparseOperator = CsrMatrix;

/// Systems up to this many unknowns are solved by direct factorization.
pub const DIRECT_LIMIT: usize = 20_000;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("matrix is numerically singular at pivot {index}")]
    Singular { index: usize },
    #[error("CG breakdown (non-positive curvature) after {iterations} iterations")]
    Breakdown { iterations: usize, history: Vec<f64> },
    #[error("no convergence within {iterations} iterations (last residual {:e})", history.last().copied().unwrap_or(f64::NAN))]
    MaxIterations { iterations: usize, history: Vec<f64> },
    #[error("recomputed residual {residual:e} exceeds tolerance {tolerance:e}")]
    NotCertified { residual: f64, tolerance: f64 },
}

/// A reusable solver for a fixed SPD matrix: banded LU when small, CG otherwise.
#[derive(Clone, Debug)]
pub enum SpdSolver {
    Direct(BandedLu),
    Iterative {
        matrix: CsrMatrix,
        preconditioner: Option<Ic0>,
        cfg: KrylovConfig,
    },
}

impl SpdSolver {
    pub fn new(a: CsrMatrix, cfg: &KrylovConfig) -> Result<Self, SolveError> {
        if a.nrows() <= DIRECT_LIMIT {
            Ok(SpdSolver::Direct(BandedLu::factor_reordered(&a)?))
        } else {
            let preconditioner = match cfg.preconditioner {
                Preconditioner::IncompleteCholesky => Ic0::new(&a),
                _ => None,
            };
            Ok(SpdSolver::Iterative {
                matrix: a,
                preconditioner,
                cfg: cfg.clone(),
            })
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, SolveError> {
        match self {
            SpdSolver::Direct(lu) => Ok(lu.solve(b)),
            SpdSolver::Iterative {
                matrix,
                preconditioner,
                cfg,
            } => {
                let tol = cfg.rel_tol * norm2(b) + cfg.abs_tol;
                let limit = cfg.max_iter.unwrap_or(10 * b.len());
                let apply = |x: &[f64], y: &mut [f64]| matrix.matvec_into(x, y);
                let sol = match preconditioner {
                    Some(ic) => pcg(apply, |r, z| ic.apply(r, z), None, b, None, tol, limit)?,
                    None => {
                        let inv: Vec<f64> = matrix.diagonal().iter().map(|d| 1.0 / d).collect();
                        pcg(
                            apply,
                            |r, z| {
                                for i in 0..r.len() {
                                    z[i] = inv[i] * r[i];
                                }
                            },
                            None,
                            b,
                            None,
                            tol,
                            limit,
                        )?
                    }
                };
                Ok(sol.x)
            }
        }
    }
}
