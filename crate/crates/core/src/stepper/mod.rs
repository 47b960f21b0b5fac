//! One implicit time step of the regularized scheme, its nonlinear solvers, and
//! the run loop.
//!
//! The discrete equations are listed in [`discrete`]. Two nonlinear solvers are
//! provided:
//!
//! * [`NonlinearSolver::Newton`] (default): Newton's method on the coupled
//!   φ/μ/q block at fixed velocity, alternated with a symmetric flow solve in
//!   which convection and the density change are lagged. In `v ≡ 0` mode this
//!   is plain Newton.
//! * [`NonlinearSolver::Picard`]: the damped fixed-point iteration
//!   `w ← (1−ω) w + ω L_k⁻¹ F_k(w)` on the block-diagonal linear part `L_k`.
//!   Undamped sweeps may raise the residual moderately; once it exceeds twice
//!   its best value damping engages, `ω` is halved whenever the residual fails
//!   to decrease, and the accepted history is monotone from then on. With `newton = true` the solver hands over
//!   to Newton once the residual is below `1e-3` or the iteration stalls.
//!
//! Both stop on the same scaled residual of the full coupled system. A failed
//! attempt is retried with a smaller time step.

pub mod discrete;
mod linear;

use std::fmt;
use std::str::FromStr;

pub use discrete::{compute_jtilde, skew_convection, BlockResidual, Blocks, Frozen, Iterate};
pub use linear::{assemble_linear, check_coefficient_bounds, LinearizedSystem};

use crate::constitutive::{ConstitutiveSet, ModelParams};
use crate::energy::{audit_step_with, LedgerRow};
use crate::error::{ChnsError, Result};
use crate::linalg::{BandedLu, CsrMatrix, KrylovConfig, SaddleSolver, SaddleStats, SchurPreconditioner};
use crate::mesh::{Grid, Operators, ScalarField, VectorField};
use crate::state::State;

/// Residual level below which Picard hands over to Newton (when enabled).
const NEWTON_HANDOVER: f64 = 1e-3;
/// Growth of the residual over its best value tolerated before damping engages.
const UNDAMPED_GROWTH: f64 = 2.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NonlinearSolver {
    #[default]
    Newton,
    Picard,
}

impl FromStr for NonlinearSolver {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "newton" => Ok(NonlinearSolver::Newton),
            "picard" => Ok(NonlinearSolver::Picard),
            other => Err(format!("unknown nonlinear solver '{other}' (newton|picard)")),
        }
    }
}

impl fmt::Display for NonlinearSolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NonlinearSolver::Newton => "newton",
            NonlinearSolver::Picard => "picard",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepConfig {
    pub tau: f64,
    /// Initial Picard damping in `(0, 1]`.
    pub omega: f64,
    /// Tolerance on the scaled residual of the coupled system.
    pub tol_nl: f64,
    /// Iteration limit of the outer (Picard or flow-coupling) loop.
    pub max_picard: usize,
    /// Allow Picard to hand over to Newton.
    pub newton: bool,
    pub max_newton: usize,
    pub tau_backoff: f64,
    pub max_halvings: u32,
    pub solver: NonlinearSolver,
    /// `false` enforces `v ≡ 0` (transport disabled).
    pub flow: bool,
    pub krylov: KrylovConfig,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            tau: 1e-3,
            omega: 1.0,
            tol_nl: 1e-10,
            max_picard: 200,
            newton: true,
            max_newton: 50,
            tau_backoff: 0.5,
            max_halvings: 8,
            solver: NonlinearSolver::Newton,
            flow: true,
            krylov: KrylovConfig::default(),
        }
    }
}

impl StepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(ChnsError::invalid("tau_positive", format!("tau = {} must be > 0", self.tau)));
        }
        if !(self.omega > 0.0 && self.omega <= 1.0) {
            return Err(ChnsError::invalid("omega_range", format!("omega = {} not in (0, 1]", self.omega)));
        }
        if !(self.tol_nl > 0.0) {
            return Err(ChnsError::invalid("tol_nl_positive", "tol_nl must be > 0"));
        }
        if !(self.tau_backoff > 0.0 && self.tau_backoff < 1.0) {
            return Err(ChnsError::invalid("tau_backoff_range", "tau_backoff must lie in (0, 1)"));
        }
        if self.max_picard == 0 || self.max_newton == 0 {
            return Err(ChnsError::invalid("iteration_limits", "iteration limits must be positive"));
        }
        self.krylov
            .validate()
            .map_err(|e| ChnsError::invalid("krylov", e))
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearStats {
    pub factorizations: usize,
    pub newton_solves: usize,
    pub saddle_solves: usize,
    pub schur_iterations: usize,
    pub poisson_solves: usize,
    /// Largest `max |div v|` returned by a pressure solve.
    pub max_div: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepReport {
    /// Outer iterations of the accepted attempt (1 when the old level already
    /// solves the step).
    pub iterations: usize,
    pub newton_iterations: usize,
    /// Scaled residuals, one entry per accepted outer iterate, starting with
    /// the initial guess.
    pub history: Vec<BlockResidual>,
    pub linear: LinearStats,
    pub tau_used: f64,
    pub halvings: u32,
    pub converged: bool,
    pub solver: NonlinearSolver,
    pub switched_to_newton: bool,
    /// Final Picard damping (`omega` when damping never engaged).
    pub omega_final: f64,
    pub final_residual: f64,
    /// Reasons of rejected attempts, in order.
    pub failures: Vec<String>,
    pub warnings: Vec<String>,
}

/// Reusable stepping context for one grid, constitutive set and configuration.
pub struct Stepper<'a> {
    ops: Operators,
    set: &'a ConstitutiveSet,
    params: &'a ModelParams,
    cfg: StepConfig,
    warnings: Vec<String>,
}

enum Attempt {
    Done(Iterate),
    Failed(String),
}

impl<'a> Stepper<'a> {
    pub fn new(grid: &Grid, set: &'a ConstitutiveSet, params: &'a ModelParams, cfg: &StepConfig) -> Result<Self> {
        params.validate()?;
        cfg.validate()?;
        let mut warnings = Vec::new();
        if params.delta == 0.0 {
            warnings.push("delta = 0 is outside the regime covered by the existence theory; regularizing terms dropped".into());
        }
        if cfg.solver == NonlinearSolver::Picard && cfg.flow && grid.is_periodic() {
            return Err(ChnsError::invalid(
                "picard_periodic_flow",
                "the Picard solver needs walls with flow enabled; use solver = newton on periodic grids",
            ));
        }
        Ok(Stepper {
            ops: Operators::new(grid),
            set,
            params,
            cfg: cfg.clone(),
            warnings,
        })
    }

    pub fn ops(&self) -> &Operators {
        &self.ops
    }

    pub fn config(&self) -> &StepConfig {
        &self.cfg
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// One step of nominal size `cfg.tau`, halving on failure.
    pub fn step(&self, state: &State) -> Result<(State, StepReport)> {
        self.step_with_tau(state, self.cfg.tau)
    }

    pub fn step_with_tau(&self, state: &State, tau: f64) -> Result<(State, StepReport)> {
        let mut failures = Vec::new();
        let mut tau_try = tau;
        let mut last = StepReport::default();
        for halving in 0..=self.cfg.max_halvings {
            let mut report = StepReport {
                tau_used: tau_try,
                halvings: halving,
                solver: self.cfg.solver,
                omega_final: self.cfg.omega,
                warnings: self.warnings.clone(),
                ..Default::default()
            };
            let outcome = self.attempt(state, tau_try, &mut report);
            match outcome {
                Ok(Attempt::Done(w)) => {
                    report.converged = true;
                    report.failures = failures;
                    report.final_residual = report.history.last().map_or(0.0, |m| m.max());
                    return Ok((self.assemble_state(state, w, tau_try), report));
                }
                Ok(Attempt::Failed(reason)) => failures.push(format!("tau = {tau_try:e}: {reason}")),
                Err(e) => failures.push(format!("tau = {tau_try:e}: {e}")),
            }
            last = report;
            tau_try *= self.cfg.tau_backoff;
        }
        last.failures = failures.clone();
        last.final_residual = last.history.last().map_or(f64::NAN, |m| m.max());
        Err(ChnsError::StepFailed {
            t: state.t,
            reason: failures.last().cloned().unwrap_or_default(),
            report: Box::new(last),
        })
    }

    fn assemble_state(&self, old: &State, w: Iterate, tau: f64) -> State {
        let g = self.ops.grid();
        State {
            v: VectorField::from_vec(g, w.v),
            p: ScalarField::from_vec(g, w.p),
            phi: ScalarField::from_vec(g, w.phi),
            mu: ScalarField::from_vec(g, w.mu),
            q: ScalarField::from_vec(g, w.q),
            t: old.t + tau,
            k: old.k + 1,
        }
    }

    fn attempt(&self, state: &State, tau: f64, report: &mut StepReport) -> Result<Attempt> {
        let cfg = &self.cfg;
        let fr = Frozen::new(&self.ops, self.set, self.params, state, tau, cfg.flow)?;
        let mut w = Iterate::from_state(state);
        if !cfg.flow {
            w.v.iter_mut().for_each(|x| *x = 0.0);
            w.p.iter_mut().for_each(|x| *x = 0.0);
        }
        let r = fr.residual(&w);
        let m0 = fr.measure(&w, &r);
        report.history.push(m0);
        if m0.max() <= cfg.tol_nl {
            report.iterations = 1;
            return Ok(Attempt::Done(w));
        }
        if !m0.max().is_finite() {
            return Ok(Attempt::Failed("non-finite residual at the initial guess".into()));
        }
        match cfg.solver {
            NonlinearSolver::Newton => self.coupled_newton(&fr, w, report),
            NonlinearSolver::Picard => self.picard(&fr, state, w, report),
        }
    }

    /// Velocity block `diag(ρ̄ₖ/τ) + A_η + δΔᵀΔ` with its pressure solver.
    fn flow_solver(&self, fr: &Frozen<'_>) -> Result<SaddleSolver> {
        let stokes = fr.stokes.as_ref().expect("flow enabled");
        let mass: Vec<f64> = fr.rho0_f.iter().map(|r| r / fr.tau).collect();
        let a = stokes.add(1.0, &CsrMatrix::diag(&mass), 1.0).with_symmetric(true);
        let inv_mass: Vec<f64> = mass.iter().map(|m| 1.0 / m).collect();
        let eta_max = fr.eta0.iter().cloned().fold(0.0, f64::max);
        let pre = SchurPreconditioner::new(&self.ops, &inv_mass, eta_max, self.params.delta, &self.cfg.krylov)?;
        SaddleSolver::new(&self.ops, a, pre, &linear::saddle_config(&self.cfg.krylov))
    }

    /// Lagged flow update: solves
    /// `(ρ̄ₖ/τ + A_η + δΔᵀΔ) v + G p = ρ̄ₖ vₖ/τ − (ρ̄ − ρ̄ₖ) v̂/(2τ) − C(m̂) v̂ + force`, `D v = 0`
    /// with `v̂` the current iterate.
    fn flow_update(&self, fr: &Frozen<'_>, saddle: &SaddleSolver, w: &mut Iterate, stats: &mut LinearStats) -> Result<()> {
        let tau = fr.tau;
        let rho: Vec<f64> = w.phi.iter().map(|&p| self.set.rho(p)).collect();
        let rho1_f = self.ops.to_faces(&rho);
        let m = fr.mass_flux(&w.v, &w.mu);
        let conv = skew_convection(self.ops.grid(), &m, &w.v);
        let force = fr.force(&w.mu, &w.q);
        let rhs: Vec<f64> = (0..w.v.len())
            .map(|f| {
                fr.rho0_f[f] * fr.v0[f] / tau - 0.5 * (rho1_f[f] - fr.rho0_f[f]) * w.v[f] / tau - conv[f]
                    + force[f]
            })
            .collect();
        let (v, p, st) = saddle.solve(&rhs)?;
        stats.saddle_solves += 1;
        stats.schur_iterations += st.schur_iterations;
        stats.max_div = stats.max_div.max(st.div_inf);
        w.v = v;
        w.p = p;
        Ok(())
    }

    /// Newton on the φ/μ/q block at the iterate's velocity. The factorization is
    /// kept between calls and refreshed when convergence slows down.
    fn phase_newton(
        &self,
        fr: &Frozen<'_>,
        w: &mut Iterate,
        lu: &mut Option<BandedLu>,
        tol: f64,
        report: &mut StepReport,
    ) -> std::result::Result<(), String> {
        let n = w.phi.len();
        let phase_measure = |w: &Iterate| {
            let (a, b, c) = fr.phase_residual(&w.v, &w.phi, &w.mu, &w.q);
            let blocks = Blocks {
                v: Vec::new(),
                div: Vec::new(),
                phi: a,
                mu: b,
                q: c,
            };
            let m = BlockResidual {
                momentum: 0.0,
                divergence: 0.0,
                ..fr.measure(&Iterate { v: Vec::new(), ..w.clone() }, &blocks)
            };
            (m.phase_max(), blocks)
        };
        let (mut current, mut blocks) = phase_measure(w);
        let mut fresh = false;
        for _ in 0..self.cfg.max_newton {
            if current <= tol {
                return Ok(());
            }
            if !current.is_finite() {
                return Err("non-finite phase-field residual".into());
            }
            if lu.is_none() {
                let jac = fr.phase_jacobian(&w.v, &w.phi, &w.q);
                *lu = Some(BandedLu::factor_reordered(&jac).map_err(|e| e.to_string())?);
                report.linear.factorizations += 1;
                fresh = true;
            }
            let rhs: Vec<f64> = (0..n)
                .flat_map(|c| [-blocks.phi[c], -blocks.mu[c], -blocks.q[c]])
                .collect();
            let dx = lu.as_ref().unwrap().solve(&rhs);
            report.linear.newton_solves += 1;
            report.newton_iterations += 1;
            let mut lambda = 1.0;
            let mut accepted = None;
            while lambda >= 1.0 / 64.0 {
                let mut trial = w.clone();
                for c in 0..n {
                    trial.phi[c] += lambda * dx[3 * c];
                    trial.mu[c] += lambda * dx[3 * c + 1];
                    trial.q[c] += lambda * dx[3 * c + 2];
                }
                let (m, b) = phase_measure(&trial);
                if m < current || m <= tol {
                    accepted = Some((trial, m, b));
                    break;
                }
                lambda *= 0.5;
            }
            match accepted {
                Some((trial, m, b)) => {
                    // keep a stale Jacobian only while it still contracts well
                    if m > 0.25 * current {
                        *lu = None;
                    }
                    *w = trial;
                    current = m;
                    blocks = b;
                    fresh = false;
                }
                None if !fresh => {
                    *lu = None;
                }
                None => return Err(format!("Newton line search failed at residual {current:e}")),
            }
        }
        if current <= tol {
            Ok(())
        } else {
            Err(format!("Newton did not converge in {} iterations (residual {current:e})", self.cfg.max_newton))
        }
    }

    fn coupled_newton(&self, fr: &Frozen<'_>, mut w: Iterate, report: &mut StepReport) -> Result<Attempt> {
        let cfg = &self.cfg;
        if !cfg.flow {
            let mut lu = None;
            if let Err(reason) = self.phase_newton(fr, &mut w, &mut lu, cfg.tol_nl, report) {
                return Ok(Attempt::Failed(reason));
            }
            let m = fr.measure(&w, &fr.residual(&w));
            report.history.push(m);
            report.iterations = 1;
            return Ok(if m.max() <= cfg.tol_nl {
                Attempt::Done(w)
            } else {
                Attempt::Failed(format!("residual {:e} above tolerance after Newton", m.max()))
            });
        }
        let saddle = self.flow_solver(fr)?;
        let mut lu = None;
        let inner_tol = 0.1 * cfg.tol_nl;
        let mut best = f64::INFINITY;
        let mut since_best = 0usize;
        for outer in 1..=cfg.max_picard {
            if let Err(reason) = self.phase_newton(fr, &mut w, &mut lu, inner_tol, report) {
                return Ok(Attempt::Failed(reason));
            }
            self.flow_update(fr, &saddle, &mut w, &mut report.linear)?;
            let m = fr.measure(&w, &fr.residual(&w));
            report.history.push(m);
            report.iterations = outer;
            let r = m.max();
            if !r.is_finite() {
                return Ok(Attempt::Failed("non-finite residual in the flow coupling".into()));
            }
            if r <= cfg.tol_nl {
                return Ok(Attempt::Done(w));
            }
            if r < 0.9 * best {
                best = r;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= 8 {
                    return Ok(Attempt::Failed(format!("flow coupling stalled at residual {r:e}")));
                }
            }
        }
        Ok(Attempt::Failed(format!(
            "flow coupling did not converge in {} iterations",
            cfg.max_picard
        )))
    }

    fn picard(&self, fr: &Frozen<'_>, state: &State, mut w: Iterate, report: &mut StepReport) -> Result<Attempt> {
        let cfg = &self.cfg;
        let lin = LinearizedSystem::new(fr, state, &cfg.krylov)?;
        let mut omega = cfg.omega;
        let mut current = report.history.last().map_or(f64::INFINITY, |m| m.max());
        let mut saddle = SaddleStats::default();
        let mut it = 0;
        let mut stalled = false;
        let mut damped = false;
        let mut best = current;
        while it < cfg.max_picard {
            it += 1;
            if cfg.newton && current < NEWTON_HANDOVER {
                break;
            }
            let r = fr.residual(&w);
            let target = lin.solve(&lin.rhs(fr, &w, &r), &mut saddle)?;
            report.linear.poisson_solves += 3;
            let mut trial = w.clone();
            let mix = |a: &mut Vec<f64>, b: &[f64]| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x = (1.0 - omega) * *x + omega * y;
                }
            };
            mix(&mut trial.phi, &target.phi);
            mix(&mut trial.mu, &target.mu);
            mix(&mut trial.q, &target.q);
            if cfg.flow {
                mix(&mut trial.v, &target.v);
                mix(&mut trial.p, &target.p);
            }
            let m = fr.measure(&trial, &fr.residual(&trial));
            if m.max() <= cfg.tol_nl {
                report.history.push(m);
                report.iterations = it;
                report.omega_final = omega;
                self.absorb_saddle(report, &saddle);
                return Ok(Attempt::Done(trial));
            }
            // undamped iterates may wander (a contraction need not reduce the
            // max-norm residual every sweep); once damping engages, only
            // decreasing iterates are accepted
            let undamped = omega == cfg.omega && !damped;
            let limit = if undamped { UNDAMPED_GROWTH * best } else { current };
            if !(m.max() < limit) {
                damped = true;
                omega *= 0.5;
                if omega < 1e-4 {
                    stalled = true;
                    break;
                }
                continue;
            }
            report.history.push(m);
            current = m.max();
            best = best.min(current);
            w = trial;
        }
        report.iterations = it;
        report.omega_final = omega;
        self.absorb_saddle(report, &saddle);
        if cfg.newton {
            report.switched_to_newton = true;
            return self.coupled_newton(fr, w, report);
        }
        Ok(Attempt::Failed(if stalled {
            format!("Picard stalled (damping below 1e-4) at residual {current:e}")
        } else {
            format!("Picard did not converge in {} iterations (residual {current:e})", cfg.max_picard)
        }))
    }

    fn absorb_saddle(&self, report: &mut StepReport, s: &SaddleStats) {
        report.linear.schur_iterations += s.schur_iterations;
        report.linear.max_div = report.linear.max_div.max(s.div_inf);
        if s.velocity_solves > 0 {
            report.linear.saddle_solves += 1;
        }
    }
}

/// One step from `state_k`; see [`Stepper`].
pub fn step(
    state_k: &State,
    grid: &Grid,
    set: &ConstitutiveSet,
    params: &ModelParams,
    cfg: &StepConfig,
) -> Result<(State, StepReport)> {
    Stepper::new(grid, set, params, cfg)?.step(state_k)
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub state: State,
    pub ledger: Vec<LedgerRow>,
    pub reports: Vec<StepReport>,
}

/// A failed run: the error plus everything computed before it.
#[derive(Debug)]
pub struct RunFailure {
    pub error: ChnsError,
    pub ledger: Vec<LedgerRow>,
    pub state: State,
}

/// Steps from `state_0` to time `horizon`, auditing every step. `on_step` sees
/// each accepted state with its ledger row.
pub fn run(
    state_0: &State,
    grid: &Grid,
    set: &ConstitutiveSet,
    params: &ModelParams,
    cfg: &StepConfig,
    horizon: f64,
    on_step: &mut dyn FnMut(&State, &LedgerRow, &StepReport),
) -> std::result::Result<RunOutput, Box<RunFailure>> {
    let fail = |error: ChnsError, ledger: Vec<LedgerRow>, state: &State| {
        Box::new(RunFailure {
            error,
            ledger,
            state: state.clone(),
        })
    };
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(fail(
            ChnsError::invalid("horizon_positive", format!("horizon = {horizon} must be > 0")),
            Vec::new(),
            state_0,
        ));
    }
    let stepper = match Stepper::new(grid, set, params, cfg) {
        Ok(s) => s,
        Err(e) => return Err(fail(e, Vec::new(), state_0)),
    };
    let mut state = state_0.clone();
    let mut ledger = Vec::new();
    let mut reports = Vec::new();
    loop {
        let remaining = horizon - (state.t - state_0.t);
        if remaining <= 1e-9 * cfg.tau {
            break;
        }
        let tau = if remaining >= cfg.tau * (1.0 - 1e-9) { cfg.tau } else { remaining };
        match stepper.step_with_tau(&state, tau) {
            Ok((next, report)) => {
                let row = audit_step_with(stepper.ops(), &state, &next, set, params, report.tau_used)
                    .with_iterations(report.iterations);
                on_step(&next, &row, &report);
                ledger.push(row);
                reports.push(report);
                state = next;
            }
            Err(e) => return Err(fail(e, ledger, &state)),
        }
    }
    Ok(RunOutput { state, ledger, reports })
}
