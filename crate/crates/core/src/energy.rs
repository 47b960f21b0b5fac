//! Total energy and the per-step discrete energy audit.
//!
//! For a step `k → k+1` the audit evaluates
//!
//! ```text
//! slack = E(k) − E(k+1) − [kin_jump + visc + q_diss + mu_diss + grad_jump + phi_jump + biharm]
//! ```
//!
//! with every quadrature built from the same operators as the stepper. For an
//! exact solution of the step the slack equals the two pointwise inequality gaps
//! (h-concavity and g-monotonicity, both `≥ 0`) plus, with flow enabled, the
//! transport defect of the discrete chain rule. `v ≡ 0` runs therefore have
//! nonnegative slack up to the solver tolerance.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::constitutive::{ConstitutiveSet, ModelParams};
use crate::error::{ChnsError, Result};
use crate::linalg::norm_inf;
use crate::mesh::Operators;
use crate::state::{kinetic_energy, observables_with, State};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyParts {
    /// `∫ ρ(φ) |v|²/2`
    pub kinetic: f64,
    /// `∫ ε |∇φ|²/2`
    pub gradient: f64,
    /// `∫ d(q) W(φ)/ε`
    pub surface: f64,
    /// `∫ G(q)`
    pub bulk: f64,
    pub total: f64,
}

pub fn total_energy(s: &State, set: &ConstitutiveSet, params: &ModelParams) -> EnergyParts {
    total_energy_with(&Operators::new(s.grid()), s, set, params)
}

pub fn total_energy_with(ops: &Operators, s: &State, set: &ConstitutiveSet, params: &ModelParams) -> EnergyParts {
    let eps = params.epsilon;
    let vol = ops.grid().cell_volume();
    let kinetic = kinetic_energy(ops, &s.phi, &s.v, set);
    let gphi = ops.grad(s.phi.values());
    let gradient = 0.5 * eps * vol * gphi.iter().map(|g| g * g).sum::<f64>();
    let (mut surf, mut bulk) = (0.0, 0.0);
    for (&phi, &q) in s.phi.values().iter().zip(s.q.values()) {
        surf += set.d(q) * set.w(phi) / eps;
        bulk += set.big_g(q);
    }
    let (surface, bulk) = (vol * surf, vol * bulk);
    EnergyParts {
        kinetic,
        gradient,
        surface,
        bulk,
        total: kinetic + gradient + surface + bulk,
    }
}

/// One row of the run ledger.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LedgerRow {
    pub step: u64,
    pub t: f64,
    pub tau: f64,
    pub e_kin: f64,
    pub e_grad: f64,
    pub e_surf: f64,
    pub e_bulk: f64,
    pub e_tot: f64,
    pub visc: f64,
    pub q_diss: f64,
    pub mu_diss: f64,
    pub kin_jump: f64,
    pub grad_jump: f64,
    pub phi_jump: f64,
    pub biharm: f64,
    pub slack: f64,
    pub phi_mass: f64,
    pub surf_total: f64,
    pub div_inf: f64,
    pub picard_iters: usize,
    /// Not written to the CSV ledger: energy of the previous level,
    pub e_prev: f64,
    /// the h-concavity gap `∫ W(φₖ)/ε [(f₁−f₀)q₁ − (f₁q₁ − f₀q₀ + h₁ − h₀)] ≥ 0`,
    pub gap_f: f64,
    /// the g-monotonicity gap `∫ [(g₁−g₀)q₁ − (G₁ − G₀)] ≥ 0`,
    pub gap_g: f64,
    /// `slack − gap_f − gap_g` (transport defect plus solver error),
    pub defect: f64,
    /// and the tolerance the slack is checked against.
    pub slack_tol: f64,
}

pub const LEDGER_COLUMNS: [&str; 20] = [
    "step",
    "t",
    "tau",
    "E_kin",
    "E_grad",
    "E_surf",
    "E_bulk",
    "E_tot",
    "visc",
    "q_diss",
    "mu_diss",
    "kin_jump",
    "grad_jump",
    "phi_jump",
    "biharm",
    "slack",
    "phi_mass",
    "surf_total",
    "div_inf",
    "picard_iters",
];

impl LedgerRow {
    pub fn dissipation(&self) -> f64 {
        self.visc + self.q_diss + self.mu_diss + self.kin_jump + self.grad_jump + self.phi_jump + self.biharm
    }

    /// The slack is below `-slack_tol`.
    pub fn flagged(&self) -> bool {
        self.slack < -self.slack_tol
    }

    pub fn with_iterations(mut self, n: usize) -> Self {
        self.picard_iters = n;
        self
    }

    pub fn csv_header() -> String {
        LEDGER_COLUMNS.join(",")
    }

    /// Values in [`LEDGER_COLUMNS`] order; floats use the shortest exact
    /// round-trip representation.
    pub fn to_csv(&self) -> String {
        let mut s = format!("{},", self.step);
        for v in [
            self.t,
            self.tau,
            self.e_kin,
            self.e_grad,
            self.e_surf,
            self.e_bulk,
            self.e_tot,
            self.visc,
            self.q_diss,
            self.mu_diss,
            self.kin_jump,
            self.grad_jump,
            self.phi_jump,
            self.biharm,
            self.slack,
            self.phi_mass,
            self.surf_total,
            self.div_inf,
        ] {
            let _ = write!(s, "{v:e},");
        }
        let _ = write!(s, "{}", self.picard_iters);
        s
    }
}

pub fn ledger_csv(rows: &[LedgerRow]) -> String {
    let mut out = LedgerRow::csv_header();
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}

pub fn write_ledger(path: &Path, rows: &[LedgerRow]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| ChnsError::io(path, e))?;
    f.write_all(ledger_csv(rows).as_bytes())
        .map_err(|e| ChnsError::io(path, e))
}

/// Audits the step `state_k → state_k1`; see the module docs.
pub fn audit_step(state_k: &State, state_k1: &State, set: &ConstitutiveSet, params: &ModelParams, tau: f64) -> LedgerRow {
    audit_step_with(&Operators::new(state_k.grid()), state_k, state_k1, set, params, tau)
}

pub fn audit_step_with(
    ops: &Operators,
    state_k: &State,
    state_k1: &State,
    set: &ConstitutiveSet,
    params: &ModelParams,
    tau: f64,
) -> LedgerRow {
    let (eps, delta) = (params.epsilon, params.delta);
    let vol = ops.grid().cell_volume();
    let e0 = total_energy_with(ops, state_k, set, params);
    let e1 = total_energy_with(ops, state_k1, set, params);
    let (phi0, phi1) = (state_k.phi.values(), state_k1.phi.values());
    let (q0, q1) = (state_k.q.values(), state_k1.q.values());
    let (v0, v1) = (state_k.v.values(), state_k1.v.values());

    let eta0: Vec<f64> = phi0.iter().map(|&p| set.eta(p)).collect();
    let visc = tau * ops.viscous_dissipation(&eta0, v1);

    let weighted = |coef_cells: Vec<f64>, x: &[f64]| {
        let c = ops.to_faces(&coef_cells);
        let g = ops.grad(x);
        vol * c.iter().zip(&g).map(|(c, g)| c * g * g).sum::<f64>()
    };
    let m_cells = phi0.iter().zip(q0).map(|(&p, &q)| set.m(p, q)).collect();
    let q_diss = tau * weighted(m_cells, q1);
    let mt_cells = phi0.iter().map(|&p| set.mtilde(p)).collect();
    let mu_diss = tau * weighted(mt_cells, state_k1.mu.values());

    let rho0: Vec<f64> = phi0.iter().map(|&p| set.rho(p)).collect();
    let rho0_f = ops.to_faces(&rho0);
    let kin_jump = 0.5 * vol * (0..v1.len()).map(|f| rho0_f[f] * (v1[f] - v0[f]).powi(2)).sum::<f64>();

    let dphi: Vec<f64> = phi1.iter().zip(phi0).map(|(a, b)| a - b).collect();
    let gd = ops.grad(&dphi);
    let grad_jump = 0.5 * eps * vol * gd.iter().map(|g| g * g).sum::<f64>();
    let phi_jump = delta / tau * vol * dphi.iter().map(|d| d * d).sum::<f64>();
    let biharm = if delta > 0.0 {
        let lv = ops.vector_laplacian.matvec(v1);
        delta * tau * vol * lv.iter().map(|x| x * x).sum::<f64>()
    } else {
        0.0
    };

    let (mut gap_f, mut gap_g) = (0.0, 0.0);
    for c in 0..phi0.len() {
        let (a, b) = (q1[c], q0[c]);
        let (fa, fb) = (set.f(a), set.f(b));
        gap_f += set.w(phi0[c]) / eps * ((fa - fb) * a - (fa * a - fb * b + set.h(a) - set.h(b)));
        gap_g += (set.g(a) - set.g(b)) * a - (set.big_g(a) - set.big_g(b));
    }
    let (gap_f, gap_g) = (vol * gap_f, vol * gap_g);

    let obs = observables_with(ops, state_k1, set, params);
    let mut row = LedgerRow {
        step: state_k1.k,
        t: state_k1.t,
        tau,
        e_kin: e1.kinetic,
        e_grad: e1.gradient,
        e_surf: e1.surface,
        e_bulk: e1.bulk,
        e_tot: e1.total,
        visc,
        q_diss,
        mu_diss,
        kin_jump,
        grad_jump,
        phi_jump,
        biharm,
        slack: 0.0,
        phi_mass: obs.phi_mass,
        surf_total: obs.surf_total,
        div_inf: norm_inf(&ops.div(v1)),
        picard_iters: 0,
        e_prev: e0.total,
        gap_f,
        gap_g,
        defect: 0.0,
        slack_tol: 1e-8 * e0.total.max(1.0),
    };
    row.slack = e0.total - e1.total - row.dissipation();
    row.defect = row.slack - gap_f - gap_g;
    row
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{BoundaryMode, Grid};

    fn defaults(eps: f64) -> (ConstitutiveSet, ModelParams) {
        let p = ModelParams {
            epsilon: eps,
            ..ModelParams::default()
        };
        (ConstitutiveSet::from_params(&p).unwrap(), p)
    }

    #[test]
    fn pure_phase_has_zero_energy() {
        let (set, p) = defaults(0.05);
        let g = Grid::unit_square(8, BoundaryMode::Box);
        let e = total_energy(&State::uniform(&g, 1.0, 0.0, &set, &p), &set, &p);
        assert_eq!(e, EnergyParts::default());
    }

    #[test]
    fn mixed_state_energy_is_closed_form() {
        let (set, p) = defaults(0.1);
        let g = Grid::unit_square(8, BoundaryMode::Box);
        let e = total_energy(&State::uniform(&g, 0.0, 0.0, &set, &p), &set, &p);
        assert!((e.total - 2.5).abs() < 1e-13);
        assert_eq!(e.total, e.kinetic + e.gradient + e.surface + e.bulk);
    }

    #[test]
    fn mu_does_not_enter_the_energy() {
        let (set, p) = defaults(0.05);
        let g = Grid::unit_square(8, BoundaryMode::Periodic);
        let mut s = crate::state::initialize_scenario(&"droplet".parse().unwrap(), &g, &set, &p).unwrap();
        let e = total_energy(&s, &set, &p);
        s.mu.values_mut().iter_mut().for_each(|m| *m += 3.0);
        assert_eq!(total_energy(&s, &set, &p), e);
    }

    #[test]
    fn identical_states_have_zero_jumps() {
        let (set, p) = defaults(0.05);
        let g = Grid::unit_square(10, BoundaryMode::Box);
        let u = State::uniform(&g, 0.2, 0.6, &set, &p);
        let row = audit_step(&u, &u, &set, &p, 1e-3);
        assert_eq!(row.slack, 0.0);
        assert_eq!(row.dissipation(), 0.0);
        // a non-uniform state still has rates (viscous, diffusive) but no jumps
        let s = crate::state::initialize_scenario(&"shear-droplet".parse().unwrap(), &g, &set, &p).unwrap();
        let row = audit_step(&s, &s, &set, &p, 1e-3);
        assert_eq!((row.kin_jump, row.grad_jump, row.phi_jump), (0.0, 0.0, 0.0));
        assert_eq!((row.gap_f, row.gap_g), (0.0, 0.0));
        assert_eq!(row.slack, -row.dissipation());
    }

    #[test]
    fn perturbed_solution_is_flagged() {
        let (set, p) = defaults(0.05);
        let g = Grid::unit_square(12, BoundaryMode::Box);
        let s = crate::state::initialize_scenario(&"droplet".parse().unwrap(), &g, &set, &p).unwrap();
        let cfg = crate::stepper::StepConfig {
            flow: false,
            ..Default::default()
        };
        let (mut next, rep) = crate::stepper::step(&s, &g, &set, &p, &cfg).unwrap();
        let good = audit_step(&s, &next, &set, &p, rep.tau_used);
        assert!(!good.flagged(), "slack {}", good.slack);

        assert!(good.defect.abs() < 1e-9, "defect {}", good.defect);

        // The slack of a valid step is the (non-negative) gap terms, so a
        // perturbation is caught by its sign only if it raises the energy by
        // more than those. Deep inside a phase W(φ) ≈ 0 and only G(q) moves;
        // the slack drops but stays positive. Without flow the defect column
        // is pure solver error and exposes it anyway.
        let bulk = g.cell_index(6, 6);
        let mut nudged = next.clone();
        nudged.q.values_mut()[bulk] += 0.1;
        let quiet = audit_step(&s, &nudged, &set, &p, rep.tau_used);
        assert!(quiet.slack < good.slack);
        assert!(quiet.defect < -1e4 * quiet.slack_tol, "defect {}", quiet.defect);

        // On the interface the surface term d(q)W(φ)/ε dominates.
        let phi = next.phi.values();
        let iface = (0..phi.len())
            .max_by(|&a, &b| set.w(phi[a]).total_cmp(&set.w(phi[b])))
            .unwrap();
        next.q.values_mut()[iface] += 0.1;
        let bad = audit_step(&s, &next, &set, &p, rep.tau_used);
        assert!(bad.flagged(), "slack {} tol {}", bad.slack, bad.slack_tol);
        assert!(bad.slack < -1e3 * bad.slack_tol, "slack {}", bad.slack);
    }

    #[test]
    fn csv_row_has_every_column() {
        let row = LedgerRow {
            step: 3,
            picard_iters: 2,
            ..Default::default()
        };
        let line = row.to_csv();
        assert_eq!(line.split(',').count(), LEDGER_COLUMNS.len());
        assert!(line.starts_with("3,"));
        assert!(line.ends_with(",2"));
        assert_eq!(LedgerRow::csv_header().split(',').nth(15), Some("slack"));
    }
}
