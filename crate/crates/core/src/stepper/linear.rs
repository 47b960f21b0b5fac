//! The linear part `L_k` of the step, frozen at the old level, and the
//! fixed-point map `w ↦ L_k⁻¹ F_k(w)` built on it.

use super::discrete::{Blocks, Frozen, Iterate};
use crate::constitutive::{ConstitutiveSet, ModelParams};
use crate::error::{ChnsError, Result};
use crate::linalg::{CsrMatrix, KrylovConfig, NeumannPoisson, SaddleSolver, SaddleStats, SchurPreconditioner};
use crate::mesh::{Grid, Operators};
use crate::state::State;

/// Block-diagonal `L_k`:
///
/// * velocity: `−(A_η + δ ΔᵀΔ)` on the discretely divergence-free space,
/// * q: `D(m_f G q) − ∫ q`,
/// * μ: `D(m̃_f G μ) − ∫ μ`,
/// * φ: `ε D G φ − ∫ φ`,
///
/// with all coefficients frozen at `(φₖ, qₖ)`.
pub struct LinearizedSystem {
    grid: Grid,
    pub velocity_block: Option<CsrMatrix>,
    pub q_block: CsrMatrix,
    pub mu_block: CsrMatrix,
    pub phi_block: CsrMatrix,
    q_solver: NeumannPoisson,
    mu_solver: NeumannPoisson,
    phi_solver: NeumannPoisson,
    saddle: Option<SaddleSolver>,
}

/// Rejects states where a mobility or the viscosity leaves `[c1, c2]`.
pub fn check_coefficient_bounds(state: &State, set: &ConstitutiveSet, params: &ModelParams) -> Result<()> {
    let (lo, hi) = (params.c1, params.c2);
    for (k, (&phi, &q)) in state.phi.values().iter().zip(state.q.values()).enumerate() {
        for (name, val) in [
            ("m", set.m(phi, q)),
            ("m~", set.mtilde(phi)),
            ("eta", set.eta(phi)),
        ] {
            if !(val >= lo && val <= hi) {
                return Err(ChnsError::invalid(
                    "mobility_bounds",
                    format!("{name} = {val} outside [{lo}, {hi}] at cell {k} (phi = {phi}, q = {q})"),
                ));
            }
        }
    }
    Ok(())
}

impl LinearizedSystem {
    pub fn new(fr: &Frozen<'_>, state: &State, cfg: &KrylovConfig) -> Result<Self> {
        check_coefficient_bounds(state, fr.set, fr.params)?;
        let ops = fr.ops;
        let grid = *ops.grid();
        let eps = fr.params.epsilon;
        let ones = vec![1.0; grid.n_faces()];
        let eps_faces = vec![eps; grid.n_faces()];
        // F_k(w) is dominated by L_k w, so the block solves need more relative
        // accuracy than the nonlinear tolerance
        let tight = saddle_config(cfg);
        let (velocity_block, saddle) = match &fr.stokes {
            Some(a) => {
                if grid.is_periodic() {
                    return Err(ChnsError::invalid(
                        "picard_periodic_flow",
                        "the velocity block of L_k has uniform flows in its kernel on a periodic grid; \
                         use the Newton solver",
                    ));
                }
                let eta_max = fr.eta0.iter().cloned().fold(0.0, f64::max);
                let pre = SchurPreconditioner::new(ops, &ones, eta_max, fr.params.delta, cfg)?;
                let saddle = SaddleSolver::new(ops, a.clone(), pre, &tight)?;
                (Some(a.scaled(-1.0).with_symmetric(true)), Some(saddle))
            }
            None => (None, None),
        };
        Ok(LinearizedSystem {
            grid,
            velocity_block,
            q_block: fr.lap_m.clone(),
            mu_block: fr.lap_mt.clone(),
            phi_block: fr.lap.scaled(eps).with_symmetric(true),
            q_solver: NeumannPoisson::new(ops, &fr.m_f, &tight)?,
            mu_solver: NeumannPoisson::new(ops, &fr.mt_f, &tight)?,
            phi_solver: NeumannPoisson::new(ops, &eps_faces, &tight)?,
            saddle,
        })
    }

    fn augmented(&self, block: &CsrMatrix, x: &[f64]) -> Vec<f64> {
        let total = self.grid.cell_volume() * x.iter().sum::<f64>();
        block.matvec(x).into_iter().map(|y| y - total).collect()
    }

    pub fn apply_q(&self, x: &[f64]) -> Vec<f64> {
        self.augmented(&self.q_block, x)
    }

    pub fn apply_mu(&self, x: &[f64]) -> Vec<f64> {
        self.augmented(&self.mu_block, x)
    }

    pub fn apply_phi(&self, x: &[f64]) -> Vec<f64> {
        self.augmented(&self.phi_block, x)
    }

    /// `F_k(w) = L_k w − R(w)`, with each residual block carried by the
    /// unknown whose operator it inverts (`r_φ` by μ, `r_μ` by φ).
    pub fn rhs(&self, fr: &Frozen<'_>, w: &Iterate, r: &Blocks) -> Iterate {
        let neg_sub = |a: Vec<f64>, b: &[f64], sign: f64| -> Vec<f64> {
            a.into_iter().zip(b).map(|(x, y)| x + sign * y).collect()
        };
        let v = match &self.velocity_block {
            Some(a) => {
                // −A v − G p − (−r_v) carried with the sign of the velocity block
                let mut out = a.matvec(&w.v);
                let gp = fr.ops.grad(&w.p);
                for f in 0..out.len() {
                    out[f] = out[f] - gp[f] + r.v[f];
                }
                out
            }
            None => Vec::new(),
        };
        Iterate {
            v,
            p: Vec::new(),
            phi: neg_sub(self.apply_phi(&w.phi), &r.mu, -1.0),
            mu: neg_sub(self.apply_mu(&w.mu), &r.phi, 1.0),
            q: neg_sub(self.apply_q(&w.q), &r.q, 1.0),
        }
    }

    /// `L_k⁻¹ F`. The velocity solve enforces `D v = 0` and returns a pressure.
    pub fn solve(&self, f: &Iterate, stats: &mut SaddleStats) -> Result<Iterate> {
        let neg = |x: &[f64]| x.iter().map(|v| -v).collect::<Vec<f64>>();
        let phi = self.phi_solver.solve(&neg(&f.phi))?;
        let mu = self.mu_solver.solve(&neg(&f.mu))?;
        let q = self.q_solver.solve(&neg(&f.q))?;
        let (v, p) = match &self.saddle {
            Some(s) => {
                let (v, p, st) = s.solve(&neg(&f.v))?;
                stats.schur_iterations += st.schur_iterations;
                stats.velocity_solves += st.velocity_solves;
                stats.div_inf = stats.div_inf.max(st.div_inf);
                (v, p)
            }
            None => (vec![0.0; self.grid.n_faces()], vec![0.0; self.grid.n_cells()]),
        };
        Ok(Iterate { v, p, phi, mu, q })
    }
}

/// Tighter Krylov settings for pressure and Picard block solves (the divergence
/// of a returned velocity equals the Schur-complement residual).
pub(crate) fn saddle_config(cfg: &KrylovConfig) -> KrylovConfig {
    KrylovConfig {
        rel_tol: cfg.rel_tol.min(1e-13),
        abs_tol: cfg.abs_tol.min(1e-14),
        ..cfg.clone()
    }
}

/// `L_k` for one state; see [`LinearizedSystem`].
pub fn assemble_linear(
    state_k: &State,
    ops: &Operators,
    set: &ConstitutiveSet,
    params: &ModelParams,
    tau: f64,
    flow: bool,
    cfg: &KrylovConfig,
) -> Result<LinearizedSystem> {
    let fr = Frozen::new(ops, set, params, state_k, tau, flow)?;
    LinearizedSystem::new(&fr, state_k, cfg)
}
