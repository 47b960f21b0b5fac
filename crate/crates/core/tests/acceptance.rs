//! Acceptance suite: one pass/fail line per criterion.
//!
//! Runs without the libtest harness so the report is printed even when
//! output capture is on. The process exits non-zero if any criterion fails.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use chns::cli::random_q_pairs;
use chns::config::Config;
use chns::constitutive::{audit_assumptions, pointwise_step_inequalities, ConstitutiveSet, ModelParams, SamplingSpec};
use chns::energy::{ledger_csv, LedgerRow};
use chns::harness::{study_defect, study_delta, study_tau, StudyOptions};
use chns::mesh::{sbp_selftest, BoundaryMode, Grid};
use chns::state::{initialize_scenario, observables, State};
use chns::stepper::{run, step, StepConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn main() {
    let criteria: [(&str, u64, fn() -> Outcome); 10] = [
        ("structural audits", 1, structural_audits),
        ("pointwise step inequalities", 1, step_inequalities),
        ("discrete duality", 5, discrete_duality),
        ("oracle equivalence", 10, oracle_equivalence),
        ("fixed point", 10, fixed_point),
        ("conservation", 300, conservation),
        ("energy stability, v = 0", 120, frozen_flow_stability),
        ("energy stability, coupled", 1200, coupled_defect_order),
        ("limit studies", 1800, limit_studies),
        ("determinism", 300, determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || *f == n.to_string()) {
            continue;
        }
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| outcome(false, "panicked"));
        let elapsed = start.elapsed();
        let in_budget = elapsed <= Duration::from_secs(*budget);
        let passed = result.passed && in_budget;
        if !passed {
            failed += 1;
        }
        println!(
            "criterion {n:>2} {:<28} {}  ({:.1} s of {budget} s{}) {}",
            name,
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            if in_budget { "" } else { ", over budget" },
            result.detail
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn config(ini: &str) -> Config {
    let cfg = Config::parse(ini).expect("acceptance config parses");
    cfg.validate().expect("acceptance config is valid");
    cfg
}

fn defaults() -> (ModelParams, ConstitutiveSet) {
    let params = ModelParams::default();
    let set = ConstitutiveSet::from_params(&params).unwrap();
    (params, set)
}

/// Every assumption clause on the default set, plus the Legendre relations at
/// 10⁴ samples.
fn structural_audits() -> Outcome {
    let (params, set) = defaults();
    let report = audit_assumptions(&set, &params, &SamplingSpec::for_params(&params));
    let failed: Vec<&str> = report.failed().map(|c| c.id).collect();
    let s = SamplingSpec::for_params(&params);
    let mut worst_legendre = 0.0f64;
    let mut worst_slope = 0.0f64;
    for i in 0..10_000 {
        let q = s.q_lo + (s.q_hi - s.q_lo) * i as f64 / 9_999.0;
        let (h, hp, f, d) = (set.h(q), set.hp(q), set.f(q), set.d(q));
        worst_legendre = worst_legendre.max((d - (h - hp * q)).abs() / (d.abs() + h.abs() + (hp * q).abs()).max(1.0));
        worst_slope = worst_slope.max((hp + f).abs() / f.abs().max(1.0));
    }
    let passed = failed.is_empty() && worst_legendre <= 1e-12 && worst_slope <= 1e-12;
    outcome(
        passed,
        format!(
            "{} clauses, failed {failed:?}; d = h - h'q defect {worst_legendre:.1e}, h' = -f defect {worst_slope:.1e}",
            report.clauses.len()
        ),
    )
}

fn step_inequalities() -> Outcome {
    let (params, set) = defaults();
    let pairs = random_q_pairs(&params, 100_000, 2024);
    let r = pointwise_step_inequalities(&set, &pairs);
    let planted = set.clone().with_h(|q| q * q, |q| 2.0 * q);
    let caught = pointwise_step_inequalities(&planted, &pairs);
    outcome(
        r.passed() && caught.violations_f > 0,
        format!(
            "{} pairs, min slack f {:.2e}, g {:.2e}; convex h caught at {} pairs",
            r.pairs, r.min_slack_f, r.min_slack_g, caught.violations_f
        ),
    )
}

fn discrete_duality() -> Outcome {
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    let mut count = 0;
    for n in [16, 24, 32, 48, 64] {
        for bc in [BoundaryMode::Box, BoundaryMode::Periodic] {
            let report = sbp_selftest(&Grid::unit_square(n, bc));
            for c in &report.checks {
                count += 1;
                worst = worst.max(c.defect);
                if !c.pass {
                    failures.push(format!("{n}x{n} {bc} {}", c.name));
                }
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!("{count} identities on 16..64 grids, worst defect {worst:.1e}; failures {failures:?}"),
    )
}

/// Brute-force root of the 2-cell, v = 0 step written out by hand.
///
/// With cells 0 and 1 sharing one face of width `dx` and `L_c(x) = (x_o − x_c)/dx²`:
///
/// ```text
/// (φ_c − φₖ_c)/τ − m̃_f L_c(μ)                               = 0
/// μ_c + ε L_c(φ) − h(q_c) H(φ_c, φₖ_c)/ε − δ (φ_c − φₖ_c)/τ = 0
/// [S(q_c, φ_c) − S(qₖ_c, φₖ_c)]/τ − m_f L_c(q)              = 0
/// ```
///
/// with face coefficients averaged from the old level, `S(q, φ) = f(q) W(φ)/ε + g(q)`
/// and `H(a, b) = (a + b)(a² + b² − 2)/4` the secant slope of `(1 − φ²)²/4`.
struct TwoCell<'a> {
    set: &'a ConstitutiveSet,
    eps: f64,
    delta: f64,
    tau: f64,
    dx: f64,
    phi0: [f64; 2],
    q0: [f64; 2],
}

impl TwoCell<'_> {
    fn residual(&self, x: &[f64; 6]) -> [f64; 6] {
        let (phi, mu, q) = ([x[0], x[1]], [x[2], x[3]], [x[4], x[5]]);
        let set = self.set;
        let mt = 0.5 * (set.mtilde(self.phi0[0]) + set.mtilde(self.phi0[1]));
        let m = 0.5 * (set.m(self.phi0[0], self.q0[0]) + set.m(self.phi0[1], self.q0[1]));
        let w = |p: f64| 0.25 * (1.0 - p * p) * (1.0 - p * p);
        let s = |q: f64, p: f64| set.f(q) * w(p) / self.eps + set.g(q);
        let lap = |v: [f64; 2], c: usize| (v[1 - c] - v[c]) / (self.dx * self.dx);
        let mut r = [0.0; 6];
        for c in 0..2 {
            let (a, b) = (phi[c], self.phi0[c]);
            let secant = (a + b) * (a * a + b * b - 2.0) / 4.0;
            r[c] = (a - b) / self.tau - mt * lap(mu, c);
            r[2 + c] = mu[c] + self.eps * lap(phi, c) - set.h(q[c]) * secant / self.eps - self.delta * (a - b) / self.tau;
            r[4 + c] = (s(q[c], a) - s(self.q0[c], b)) / self.tau - m * lap(q, c);
        }
        r
    }

    /// Damped Newton with a central-difference Jacobian and partial pivoting.
    fn solve(&self, start: [f64; 6]) -> Option<[f64; 6]> {
        let norm = |r: &[f64; 6]| r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut x = start;
        let mut r = self.residual(&x);
        for _ in 0..200 {
            if norm(&r) < 1e-13 {
                return Some(x);
            }
            let mut jac = [[0.0; 7]; 6];
            for j in 0..6 {
                let h = 1e-7 * x[j].abs().max(1.0);
                let (mut xp, mut xm) = (x, x);
                xp[j] += h;
                xm[j] -= h;
                let (rp, rm) = (self.residual(&xp), self.residual(&xm));
                for i in 0..6 {
                    jac[i][j] = (rp[i] - rm[i]) / (2.0 * h);
                }
            }
            for i in 0..6 {
                jac[i][6] = -r[i];
            }
            for col in 0..6 {
                let piv = (col..6).max_by(|&a, &b| jac[a][col].abs().total_cmp(&jac[b][col].abs()))?;
                jac.swap(col, piv);
                if jac[col][col] == 0.0 {
                    return None;
                }
                for row in col + 1..6 {
                    let f = jac[row][col] / jac[col][col];
                    for k in col..7 {
                        jac[row][k] -= f * jac[col][k];
                    }
                }
            }
            let mut dx = [0.0; 6];
            for i in (0..6).rev() {
                let tail: f64 = (i + 1..6).map(|k| jac[i][k] * dx[k]).sum();
                dx[i] = (jac[i][6] - tail) / jac[i][i];
            }
            let mut lambda = 1.0;
            loop {
                let trial: [f64; 6] = std::array::from_fn(|i| x[i] + lambda * dx[i]);
                let rt = self.residual(&trial);
                if norm(&rt) < norm(&r) || lambda < 1e-6 {
                    x = trial;
                    r = rt;
                    break;
                }
                lambda *= 0.5;
            }
        }
        (norm(&r) < 1e-12).then_some(x)
    }
}

/// Step size of the oracle comparison. The secant treatment of the nonconvex
/// well is uniquely solvable only while the mobility term dominates it: on this
/// grid `1/(m̃ τ |L|) ≥ 1/(2 · 2e-3 · 8) ≈ 31` against `h |W''|/ε ≤ 20`. Larger
/// steps admit several roots, and two root-finders need not pick the same one.
const ORACLE_TAU: f64 = 2e-3;

fn oracle_equivalence() -> Outcome {
    let (params, set) = defaults();
    let grid = Grid::new(2, 1, 1.0, 0.5, BoundaryMode::Box).unwrap();
    let cfg = StepConfig {
        tau: ORACLE_TAU,
        flow: false,
        // converge well past the comparison threshold
        tol_nl: 1e-13,
        ..StepConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let mut problems = Vec::new();
    for trial in 0..20 {
        let phi0 = [rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9)];
        let q0 = [rng.gen_range(-0.2..1.2), rng.gen_range(-0.2..1.2)];
        let mut s = State::uniform(&grid, 0.0, 0.5, &set, &params);
        s.phi.values_mut().copy_from_slice(&phi0);
        s.q.values_mut().copy_from_slice(&q0);
        let (next, report) = match step(&s, &grid, &set, &params, &cfg) {
            Ok(x) => x,
            Err(e) => {
                problems.push(format!("trial {trial}: {e}"));
                continue;
            }
        };
        if report.tau_used != ORACLE_TAU {
            problems.push(format!("trial {trial}: step size reduced to {}", report.tau_used));
        }
        let oracle = TwoCell {
            set: &set,
            eps: params.epsilon,
            delta: params.delta,
            tau: ORACLE_TAU,
            dx: grid.dx(),
            phi0,
            q0,
        };
        let mu_start = s.mu.values();
        let start = [phi0[0], phi0[1], mu_start[0], mu_start[1], q0[0], q0[1]];
        let Some(x) = oracle.solve(start) else {
            problems.push(format!("trial {trial}: oracle did not converge"));
            continue;
        };
        if x[..2].iter().any(|p| p.abs() > 2.0) {
            problems.push(format!("trial {trial}: left the quartic range of W"));
        }
        let ours = [next.phi.values(), next.mu.values(), next.q.values()].concat();
        for (a, b) in ours.iter().zip(&x) {
            worst = worst.max((a - b).abs() / b.abs().max(1.0));
        }
    }
    outcome(
        problems.is_empty() && worst <= 1e-10,
        format!("20 random initial conditions, worst deviation {worst:.1e}; issues {problems:?}"),
    )
}

fn fixed_point() -> Outcome {
    let (params, set) = defaults();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut problems = Vec::new();
    for trial in 0..10 {
        let bc = if trial % 2 == 0 { BoundaryMode::Box } else { BoundaryMode::Periodic };
        let grid = Grid::unit_square(rng.gen_range(4..=12), bc);
        let s = State::uniform(&grid, rng.gen_range(-1.5..1.5), rng.gen_range(-0.5..1.5), &set, &params);
        match step(&s, &grid, &set, &params, &StepConfig::default()) {
            Ok((next, report)) => {
                let same = next.phi == s.phi && next.q == s.q && next.mu == s.mu && next.v.max_abs() == 0.0;
                if !(same && report.iterations == 1 && report.final_residual == 0.0) {
                    problems.push(format!(
                        "trial {trial}: identical={same}, iterations={}, residual={:e}",
                        report.iterations, report.final_residual
                    ));
                }
            }
            Err(e) => problems.push(format!("trial {trial}: {e}")),
        }
    }
    outcome(problems.is_empty(), format!("10 uniform states; issues {problems:?}"))
}

const DROPLET_32: &str = "
[grid]
n = 32
[params]
delta = 1e-3
[stepper]
tau = 1e-3
horizon = 0.1
[scenario]
kind = droplet
";

/// Runs a config to its horizon and returns the initial state and the ledger,
/// with the slack tolerance scaled as in the CLI.
fn run_config(cfg: &Config) -> Result<(State, Vec<LedgerRow>, ModelParams, ConstitutiveSet), String> {
    let grid = cfg.build_grid().map_err(|e| e.to_string())?;
    let set = cfg.constitutive_set().map_err(|e| e.to_string())?;
    let s0 = initialize_scenario(&cfg.scenario, &grid, &set, &cfg.params).map_err(|e| e.to_string())?;
    let out = run(&s0, &grid, &set, &cfg.params, &cfg.stepper, cfg.horizon, &mut |_, _, _| {})
        .map_err(|f| f.error.to_string())?;
    let mut ledger = out.ledger;
    for row in ledger.iter_mut() {
        row.slack_tol = cfg.slack_tol * row.e_prev.max(1.0);
    }
    Ok((s0, ledger, cfg.params.clone(), set))
}

/// Ledger of the conservation run, kept for the determinism rerun.
static DROPLET_LEDGER: OnceLock<String> = OnceLock::new();

fn conservation() -> Outcome {
    let cfg = config(DROPLET_32);
    let (s0, ledger, params, set) = match run_config(&cfg) {
        Ok(x) => x,
        Err(e) => return outcome(false, e),
    };
    let _ = DROPLET_LEDGER.set(ledger_csv(&ledger));
    let o = observables(&s0, &set, &params);
    let mass = ledger.iter().map(|r| (r.phi_mass - o.phi_mass).abs()).fold(0.0, f64::max) / o.phi_mass.abs();
    let surf = ledger.iter().map(|r| (r.surf_total - o.surf_total).abs()).fold(0.0, f64::max) / o.surf_total.abs();
    let div = ledger.iter().map(|r| r.div_inf).fold(0.0, f64::max);
    outcome(
        ledger.len() == 100 && mass <= 1e-10 && surf <= 1e-8 && div <= 1e-9,
        format!(
            "{} steps; relative drift phi_mass {mass:.1e}, surf_total {surf:.1e}; max |div v| {div:.1e}",
            ledger.len()
        ),
    )
}

fn frozen_flow_stability() -> Outcome {
    let mut cfg = config(DROPLET_32);
    cfg.stepper.flow = false;
    let (_, ledger, _, _) = match run_config(&cfg) {
        Ok(x) => x,
        Err(e) => return outcome(false, e),
    };
    let flagged = ledger.iter().filter(|r| r.flagged()).count();
    let increases = ledger.iter().filter(|r| r.e_tot > r.e_prev).count();
    let min_rel = ledger
        .iter()
        .map(|r| r.slack / r.e_prev.max(1.0))
        .fold(f64::INFINITY, f64::min);
    outcome(
        ledger.len() == 100 && flagged == 0 && increases == 0,
        format!(
            "{} steps; min slack/max(E,1) {min_rel:.1e}; flagged {flagged}; energy increases {increases}",
            ledger.len()
        ),
    )
}

fn coupled_defect_order() -> Outcome {
    let base = config("[stepper]\ntau = 1e-3\nhorizon = 0.02\n[scenario]\nkind = shear-droplet\n");
    match study_defect(&base, &[16, 32, 64], &StudyOptions::in_memory(1)) {
        Ok(report) => {
            let rms = sci(&report.cases.iter().map(|c| c.rms_defect).collect::<Vec<_>>());
            let last = report.cases.last();
            outcome(
                report.passed(),
                format!(
                    "rms defect {rms:?} on 16/32/64, order {:.2} (max-norm {:.2}); 64x64 energy increases {}",
                    report.order.unwrap_or(f64::NAN),
                    report.order_max.unwrap_or(f64::NAN),
                    last.map_or(usize::MAX, |c| c.energy_increases)
                ),
            )
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn sci(v: &[f64]) -> Vec<String> {
    v.iter().map(|x| format!("{x:.2e}")).collect()
}

fn limit_studies() -> Outcome {
    let opts = StudyOptions::in_memory(1);
    let delta_base = config("[grid]\nn = 32\n[stepper]\ntau = 1e-3\nhorizon = 0.02\n[scenario]\nkind = droplet\n");
    let tau_base =
        config("[grid]\nn = 32\n[stepper]\nflow = false\nhorizon = 0.02\n[scenario]\nkind = droplet\n");
    let delta = study_delta(&delta_base, &[1e-2, 1e-3, 1e-4], &opts);
    let tau = study_tau(&tau_base, &[1e-3, 5e-4, 2.5e-4], &opts);
    match (delta, tau) {
        (Ok(d), Ok(t)) => outcome(
            d.passed() && t.passed(),
            format!(
                "delta: differences {:?} ({}); tau: Richardson ratio {:.3?} vs expected {:.1?} ({})",
                sci(&d.differences),
                if d.passed() { "monotone" } else { "FAIL" },
                t.ratios,
                t.expected_ratios,
                if t.passed() { "within 30%" } else { "FAIL" }
            ),
        ),
        (d, t) => outcome(false, format!("{:?} {:?}", d.err(), t.err())),
    }
}

fn determinism() -> Outcome {
    let cfg = config(DROPLET_32);
    let a = match DROPLET_LEDGER.get() {
        Some(first) => Ok(first.clone()),
        None => run_config(&cfg).map(|r| ledger_csv(&r.1)),
    };
    let b = run_config(&cfg).map(|r| ledger_csv(&r.1));
    match (a, b) {
        (Ok(a), Ok(b)) => outcome(
            a == b,
            format!("repeated 100-step run, ledgers {} bytes, identical: {}", a.len(), a == b),
        ),
        (a, b) => outcome(false, format!("{:?} {:?}", a.err(), b.err())),
    }
}
