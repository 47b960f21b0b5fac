//! Discrete residual of one implicit step and the Jacobian of its
//! Cahn–Hilliard/surfactant block.
//!
//! Everything is written per unit volume on the MAC grid. With `P_f` the
//! cell-to-face average, `P_c = P_fᵀ`, `G` the face gradient and `D = -Gᵀ` the
//! divergence, the residual blocks at the new level `(v, p, φ, μ, q)` are
//!
//! ```text
//! r_v   = [(ρ̄ + ρ̄ₖ)/2 v − ρ̄ₖ vₖ]/τ + C(m) v + A_η v + δ Δᵀ Δ v + G p
//!         − [P_f μ − P_f(h(q) W'(φₖ)/ε)] ⊙ G φₖ
//! r_div = D v
//! r_φ   = (φ − φₖ)/τ + P_c(v ⊙ G φₖ) − D(m̃_f G μ)
//! r_μ   = μ + ε D G φ − h(q) H(φ, φₖ)/ε − δ (φ − φₖ)/τ
//! r_q   = [S(q, φ) − S(qₖ, φₖ)]/τ + P_c(v ⊙ G S̃(q)) − D(m_f G q)
//! ```
//!
//! with `ρ̄ = P_f ρ(φ)`, `m = ρ̄ₖ v + J̃`, `J̃ = −P_f(ρ'(φₖ) m̃(φₖ)) ⊙ G μ`,
//! `S(q, φ) = f(q) W(φ)/ε + g(q)` and `S̃(q) = S(q, φₖ)`. `C(m)` is the
//! skew-symmetric central form of `(m·∇)v + (div m) v/2`, so testing the
//! momentum residual with `v` reproduces the kinetic part of the discrete energy
//! estimate exactly.

use crate::constitutive::{ConstitutiveSet, ModelParams};
use crate::linalg::{norm_inf, CsrMatrix, TripletBuilder};
use crate::mesh::{Grid, Operators};
use crate::state::State;

/// Unknowns of the new time level as flat arrays.
#[derive(Clone, Debug, PartialEq)]
pub struct Iterate {
    pub v: Vec<f64>,
    pub p: Vec<f64>,
    pub phi: Vec<f64>,
    pub mu: Vec<f64>,
    pub q: Vec<f64>,
}

impl Iterate {
    pub fn from_state(s: &State) -> Self {
        Iterate {
            v: s.v.values().to_vec(),
            p: s.p.values().to_vec(),
            phi: s.phi.values().to_vec(),
            mu: s.mu.values().to_vec(),
            q: s.q.values().to_vec(),
        }
    }

    pub fn is_finite(&self) -> bool {
        [&self.v, &self.p, &self.phi, &self.mu, &self.q]
            .iter()
            .all(|b| b.iter().all(|x| x.is_finite()))
    }
}

/// Residual of every equation block.
#[derive(Clone, Debug, PartialEq)]
pub struct Blocks {
    pub v: Vec<f64>,
    pub div: Vec<f64>,
    pub phi: Vec<f64>,
    pub mu: Vec<f64>,
    pub q: Vec<f64>,
}

/// Scaled max-norms of the residual blocks.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BlockResidual {
    pub momentum: f64,
    pub divergence: f64,
    pub phi: f64,
    pub mu: f64,
    pub q: f64,
}

impl BlockResidual {
    pub fn max(&self) -> f64 {
        self.momentum
            .max(self.divergence)
            .max(self.phi)
            .max(self.mu)
            .max(self.q)
    }

    /// The measure restricted to the φ, μ, q blocks.
    pub fn phase_max(&self) -> f64 {
        self.phi.max(self.mu).max(self.q)
    }
}

/// Skew-symmetric central convection `C(m) u` on the staggered grid.
///
/// Mass fluxes are taken at the corners of each face's control volume (cell
/// centres along the face normal, nodes across it) as averages of `m`; wall
/// nodes carry no flux. Every coupling between two faces uses the same flux with
/// opposite signs, so `uᵀ C(m) u = 0` for every `m`.
pub fn skew_convection(grid: &Grid, m: &[f64], u: &[f64]) -> Vec<f64> {
    let nxf = grid.n_xfaces();
    let (dx, dy) = (grid.dx(), grid.dy());
    let mx = |i: isize, j: isize| grid.xface_at(i, j).map_or(0.0, |k| m[k]);
    let my = |i: isize, j: isize| grid.yface_at(i, j).map_or(0.0, |k| m[nxf + k]);
    let ux = |i: isize, j: isize| grid.xface_at(i, j).map_or(0.0, |k| u[k]);
    let uy = |i: isize, j: isize| grid.yface_at(i, j).map_or(0.0, |k| u[nxf + k]);
    let mut out = vec![0.0; grid.n_faces()];
    for (f, o) in out.iter_mut().enumerate().take(nxf) {
        let (i, j) = grid.xface_coords(f);
        let (i, j) = (i as isize, j as isize);
        let fe = 0.5 * (mx(i, j) + mx(i + 1, j));
        let fw = 0.5 * (mx(i - 1, j) + mx(i, j));
        let fn_ = 0.5 * (my(i - 1, j + 1) + my(i, j + 1));
        let fs = 0.5 * (my(i - 1, j) + my(i, j));
        *o = (fe * ux(i + 1, j) - fw * ux(i - 1, j)) / (2.0 * dx)
            + (fn_ * ux(i, j + 1) - fs * ux(i, j - 1)) / (2.0 * dy);
    }
    for f in 0..grid.n_yfaces() {
        let (i, j) = grid.yface_coords(f);
        let (i, j) = (i as isize, j as isize);
        let fn_ = 0.5 * (my(i, j) + my(i, j + 1));
        let fs = 0.5 * (my(i, j - 1) + my(i, j));
        let fe = 0.5 * (mx(i + 1, j - 1) + mx(i + 1, j));
        let fw = 0.5 * (mx(i, j - 1) + mx(i, j));
        out[nxf + f] = (fn_ * uy(i, j + 1) - fs * uy(i, j - 1)) / (2.0 * dy)
            + (fe * uy(i + 1, j) - fw * uy(i - 1, j)) / (2.0 * dx);
    }
    out
}

/// Everything in the step that depends only on the old level `k`.
pub struct Frozen<'a> {
    pub ops: &'a Operators,
    pub set: &'a ConstitutiveSet,
    pub params: &'a ModelParams,
    pub tau: f64,
    pub flow: bool,
    pub phi0: Vec<f64>,
    pub q0: Vec<f64>,
    pub v0: Vec<f64>,
    /// `S(qₖ, φₖ)`
    pub s0: Vec<f64>,
    pub w0: Vec<f64>,
    pub wp0: Vec<f64>,
    pub gphi0: Vec<f64>,
    /// `P_f ρ(φₖ)`
    pub rho0_f: Vec<f64>,
    /// `P_f(ρ'(φₖ) m̃(φₖ))`
    pub jcoef_f: Vec<f64>,
    pub mt_f: Vec<f64>,
    pub m_f: Vec<f64>,
    pub eta0: Vec<f64>,
    /// `D diag(m̃_f) G`
    pub lap_mt: CsrMatrix,
    /// `D diag(m_f) G`
    pub lap_m: CsrMatrix,
    /// `D G`
    pub lap: CsrMatrix,
    /// `A_η + δ ΔᵀΔ` (flow only)
    pub stokes: Option<CsrMatrix>,
}

impl<'a> Frozen<'a> {
    pub fn new(
        ops: &'a Operators,
        set: &'a ConstitutiveSet,
        params: &'a ModelParams,
        state: &State,
        tau: f64,
        flow: bool,
    ) -> crate::Result<Self> {
        let eps = params.epsilon;
        let phi0 = state.phi.values().to_vec();
        let q0 = state.q.values().to_vec();
        let v0 = if flow {
            state.v.values().to_vec()
        } else {
            vec![0.0; ops.grid().n_faces()]
        };
        let s0 = q0
            .iter()
            .zip(&phi0)
            .map(|(&q, &p)| set.surfactant_density(q, p, eps))
            .collect();
        let w0 = phi0.iter().map(|&p| set.w(p)).collect();
        let wp0 = phi0.iter().map(|&p| set.wp(p)).collect();
        let gphi0 = ops.grad(&phi0);
        let rho0: Vec<f64> = phi0.iter().map(|&p| set.rho(p)).collect();
        let jc: Vec<f64> = phi0.iter().map(|&p| set.rhop(p) * set.mtilde(p)).collect();
        let mt: Vec<f64> = phi0.iter().map(|&p| set.mtilde(p)).collect();
        let m: Vec<f64> = phi0.iter().zip(&q0).map(|(&p, &q)| set.m(p, q)).collect();
        let eta0: Vec<f64> = phi0.iter().map(|&p| set.eta(p)).collect();
        let mt_f = ops.to_faces(&mt);
        let m_f = ops.to_faces(&m);
        let lap_mt = ops.laplace_matrix(&mt_f)?;
        let lap_m = ops.laplace_matrix(&m_f)?;
        let lap = ops.laplace_matrix(&vec![1.0; ops.grid().n_faces()])?;
        let stokes = flow.then(|| {
            let visc = ops.viscous_matrix(&eta0);
            if params.delta > 0.0 {
                visc.add(1.0, &ops.biharmonic_matrix(), params.delta).with_symmetric(true)
            } else {
                visc
            }
        });
        Ok(Frozen {
            ops,
            set,
            params,
            tau,
            flow,
            phi0,
            q0,
            v0,
            s0,
            w0,
            wp0,
            gphi0,
            rho0_f: ops.to_faces(&rho0),
            jcoef_f: ops.to_faces(&jc),
            mt_f,
            m_f,
            eta0,
            lap_mt,
            lap_m,
            lap,
            stokes,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.ops.grid()
    }

    /// `J̃ = −P_f(ρ'(φₖ) m̃(φₖ)) ⊙ G μ`
    pub fn jtilde(&self, mu: &[f64]) -> Vec<f64> {
        let gmu = self.ops.grad(mu);
        self.jcoef_f.iter().zip(&gmu).map(|(c, g)| -c * g).collect()
    }

    /// Capillary and Marangoni force `[P_f μ − P_f(h(q) W'(φₖ)/ε)] ⊙ G φₖ`.
    pub fn force(&self, mu: &[f64], q: &[f64]) -> Vec<f64> {
        let eps = self.params.epsilon;
        let hw: Vec<f64> = q
            .iter()
            .zip(&self.wp0)
            .map(|(&q, &wp)| self.set.h(q) * wp / eps)
            .collect();
        let a = self.ops.to_faces(mu);
        let b = self.ops.to_faces(&hw);
        (0..a.len()).map(|f| (a[f] - b[f]) * self.gphi0[f]).collect()
    }

    /// `S̃(q) = f(q) W(φₖ)/ε + g(q)`, the potential transported with the flow.
    pub fn s_tilde(&self, q: &[f64]) -> Vec<f64> {
        let eps = self.params.epsilon;
        q.iter()
            .zip(&self.phi0)
            .map(|(&q, &p)| self.set.surfactant_density(q, p, eps))
            .collect()
    }

    /// `P_c(v ⊙ a)` for a face field `a`.
    pub fn transport(&self, v: &[f64], a: &[f64]) -> Vec<f64> {
        let prod: Vec<f64> = v.iter().zip(a).map(|(x, y)| x * y).collect();
        self.ops.to_cells(&prod)
    }

    /// Momentum mass flux `m = ρ̄ₖ v + J̃`.
    pub fn mass_flux(&self, v: &[f64], mu: &[f64]) -> Vec<f64> {
        let j = self.jtilde(mu);
        (0..v.len()).map(|f| self.rho0_f[f] * v[f] + j[f]).collect()
    }

    /// Residual of the φ, μ and q equations at velocity `v`.
    pub fn phase_residual(&self, v: &[f64], phi: &[f64], mu: &[f64], q: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (tau, eps, delta) = (self.tau, self.params.epsilon, self.params.delta);
        let n = phi.len();
        // Flux form rather than the assembled matrices: a constant field then has
        // an exactly zero residual instead of one polluted by row-sum round-off.
        let div_flux = |coef: Option<&[f64]>, x: &[f64]| {
            let mut g = self.ops.grad(x);
            if let Some(c) = coef {
                g.iter_mut().zip(c).for_each(|(gi, ci)| *gi *= ci);
            }
            self.ops.div(&g)
        };
        let div_mt = div_flux(Some(&self.mt_f), mu);
        let lap_phi = div_flux(None, phi);
        let div_m = div_flux(Some(&self.m_f), q);
        let moving = self.flow && v.iter().any(|x| *x != 0.0);
        let (t_phi, t_q) = if moving {
            (
                self.transport(v, &self.gphi0),
                self.transport(v, &self.ops.grad(&self.s_tilde(q))),
            )
        } else {
            (vec![0.0; n], vec![0.0; n])
        };
        let mut r_phi = vec![0.0; n];
        let mut r_mu = vec![0.0; n];
        let mut r_q = vec![0.0; n];
        for c in 0..n {
            let dphi = phi[c] - self.phi0[c];
            r_phi[c] = dphi / tau + t_phi[c] - div_mt[c];
            let hh = self.set.h(q[c]) * self.set.big_h(phi[c], self.phi0[c]);
            r_mu[c] = mu[c] + eps * lap_phi[c] - hh / eps - delta * dphi / tau;
            let s = self.set.surfactant_density(q[c], phi[c], eps);
            r_q[c] = (s - self.s0[c]) / tau + t_q[c] - div_m[c];
        }
        (r_phi, r_mu, r_q)
    }

    /// Residual of the momentum equation and the incompressibility constraint.
    pub fn flow_residual(&self, w: &Iterate) -> (Vec<f64>, Vec<f64>) {
        let tau = self.tau;
        let rho: Vec<f64> = w.phi.iter().map(|&p| self.set.rho(p)).collect();
        let rho1_f = self.ops.to_faces(&rho);
        let m = self.mass_flux(&w.v, &w.mu);
        let conv = skew_convection(self.grid(), &m, &w.v);
        let force = self.force(&w.mu, &w.q);
        let gp = self.ops.grad(&w.p);
        let mut r = self.stokes.as_ref().expect("flow enabled").matvec(&w.v);
        for f in 0..r.len() {
            let time = (0.5 * (rho1_f[f] + self.rho0_f[f]) * w.v[f] - self.rho0_f[f] * self.v0[f]) / tau;
            r[f] += time + conv[f] + gp[f] - force[f];
        }
        (r, self.ops.div(&w.v))
    }

    pub fn residual(&self, w: &Iterate) -> Blocks {
        let (phi, mu, q) = self.phase_residual(&w.v, &w.phi, &w.mu, &w.q);
        let (v, div) = if self.flow {
            self.flow_residual(w)
        } else {
            (Vec::new(), Vec::new())
        };
        Blocks { v, div, phi, mu, q }
    }

    /// Scaled block norms used as the nonlinear convergence measure.
    pub fn measure(&self, w: &Iterate, r: &Blocks) -> BlockResidual {
        let tau = self.tau;
        let mut out = BlockResidual {
            phi: norm_inf(&r.phi) / (norm_inf(&self.phi0) / tau + 1.0),
            mu: norm_inf(&r.mu) / (norm_inf(&w.mu) + 1.0),
            q: norm_inf(&r.q) / (norm_inf(&self.s0) / tau + 1.0),
            ..Default::default()
        };
        if self.flow {
            let mom: Vec<f64> = self.rho0_f.iter().zip(&self.v0).map(|(r, v)| r * v).collect();
            let force = self.force(&w.mu, &w.q);
            out.momentum = norm_inf(&r.v) / (norm_inf(&mom) / tau + norm_inf(&force) + 1.0);
            out.divergence = norm_inf(&r.div);
        }
        out
    }

    /// Jacobian of `(r_φ, r_μ, r_q)` with respect to `(φ, μ, q)` at fixed `v`,
    /// with the three unknowns of each cell interleaved.
    pub fn phase_jacobian(&self, v: &[f64], phi: &[f64], q: &[f64]) -> CsrMatrix {
        let (tau, eps, delta) = (self.tau, self.params.epsilon, self.params.delta);
        let set = self.set;
        let n = phi.len();
        let mut b = TripletBuilder::new(3 * n, 3 * n);
        for c in 0..n {
            let (ph, qq) = (phi[c], q[c]);
            // r_φ
            b.add(3 * c, 3 * c, 1.0 / tau);
            for (k, val) in self.lap_mt.row(c) {
                b.add(3 * c, 3 * k + 1, -val);
            }
            // r_μ
            b.add(3 * c + 1, 3 * c + 1, 1.0);
            for (k, val) in self.lap.row(c) {
                b.add(3 * c + 1, 3 * k, eps * val);
            }
            let hq = set.h(qq);
            let big_h = set.big_h(ph, self.phi0[c]);
            b.add(
                3 * c + 1,
                3 * c,
                -(hq * set.big_h_da(ph, self.phi0[c]) / eps + delta / tau),
            );
            b.add(3 * c + 1, 3 * c + 2, -set.hp(qq) * big_h / eps);
            // r_q
            b.add(3 * c + 2, 3 * c + 2, set.surfactant_density_dq(qq, ph, eps) / tau);
            b.add(3 * c + 2, 3 * c, set.f(qq) * set.wp(ph) / (eps * tau));
            for (k, val) in self.lap_m.row(c) {
                b.add(3 * c + 2, 3 * k + 2, -val);
            }
        }
        if self.flow && v.iter().any(|x| *x != 0.0) {
            // d/dq P_c(v ⊙ G S̃(q)) = P_c diag(v) G diag(S̃'(q))
            let ds: Vec<f64> = q
                .iter()
                .zip(&self.phi0)
                .map(|(&qq, &p)| set.surfactant_density_dq(qq, p, eps))
                .collect();
            let t = self
                .ops
                .to_cells
                .scale_cols(v)
                .mul(&self.ops.grad.scale_cols(&ds));
            for c in 0..n {
                for (k, val) in t.row(c) {
                    b.add(3 * c + 2, 3 * k + 2, val);
                }
            }
        }
        b.build()
    }
}

/// `J̃ = −ρ'(φₖ) m̃(φₖ) ∇μ` with coefficients averaged to faces.
pub fn compute_jtilde(
    ops: &Operators,
    phi_k: &[f64],
    mu_next: &[f64],
    set: &ConstitutiveSet,
) -> Vec<f64> {
    let jc: Vec<f64> = phi_k.iter().map(|&p| set.rhop(p) * set.mtilde(p)).collect();
    let jc_f = ops.to_faces(&jc);
    let gmu = ops.grad(mu_next);
    jc_f.iter().zip(&gmu).map(|(c, g)| -c * g).collect()
}
