//! Command-line front end: argument parsing, config overrides and output files.
//!
//! Exit codes: `0` success, `1` invalid input (config, parameters, usage),
//! `2` solver failure, `3` a failed audit, selftest or study check.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::Config;
use crate::constitutive::{audit_assumptions, pointwise_step_inequalities, ConstitutiveSet, ModelParams, SamplingSpec};
use crate::energy::{write_ledger, LedgerRow};
use crate::harness::{study_defect, study_delta, study_tau, Check, StudyOptions, StudyReport};
use crate::linalg::{solve_neumann_poisson, solve_saddle, solve_spd, CsrMatrix, KrylovConfig, Preconditioner};
use crate::mesh::{grad, sbp_selftest, snapshot, BoundaryMode, Grid, Operators, ScalarField, VectorField};
use crate::state::{initialize_scenario, State};
use crate::stepper::run;
use crate::{ChnsError, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "chns", version, about = "Energy-stable two-phase surfactant flow solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// Output directory (overrides [output] dir).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads for studies (overrides [output] threads).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Write field snapshots every K steps; 0 writes only the final state.
    #[arg(long, global = true, value_name = "K")]
    pub snapshot_every: Option<u64>,
    /// Seed of the random scenario.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate to the horizon, writing the ledger and snapshots.
    Run { config: PathBuf },
    /// Check the constitutive assumptions on sampled windows.
    Audit { config: PathBuf },
    /// Grid duality identities, solver certification and the pointwise inequalities.
    Selftest,
    /// δ-continuation study over [study] deltas.
    StudyDelta { config: PathBuf },
    /// Time-step refinement study over [study] taus.
    StudyTau { config: PathBuf },
    /// Grid-refinement study of the energy defect over [study] grids.
    StudyDefect { config: PathBuf },
    /// Print the effective configuration (defaults expanded).
    PrintConfig { config: Option<PathBuf> },
}

/// Maps a library error onto the process exit code.
pub fn exit_code(e: &ChnsError) -> i32 {
    match e {
        ChnsError::LinearSolver(_) | ChnsError::StepFailed { .. } => EXIT_SOLVER,
        _ => EXIT_INVALID,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Run { config } => cmd_run(&load(config, &cli.overrides, err)?, out, err),
        Command::Audit { config } => cmd_audit(&load(config, &cli.overrides, err)?, cli.overrides.out.is_some(), out),
        Command::Selftest => {
            let checks = selftest();
            for c in &checks {
                emit(out, &format!("[{}] {}: {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail));
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            emit(out, &format!("{} checks, {failed} failed", checks.len()));
            Ok(if failed == 0 { EXIT_OK } else { EXIT_CHECK })
        }
        Command::StudyDelta { config } => {
            let cfg = load(config, &cli.overrides, err)?;
            finish_study(study_delta(&cfg, &cfg.study.deltas, &study_options(&cfg))?, out)
        }
        Command::StudyTau { config } => {
            let cfg = load(config, &cli.overrides, err)?;
            finish_study(study_tau(&cfg, &cfg.study.taus, &study_options(&cfg))?, out)
        }
        Command::StudyDefect { config } => {
            let cfg = load(config, &cli.overrides, err)?;
            finish_study(study_defect(&cfg, &cfg.study.grids, &study_options(&cfg))?, out)
        }
        Command::PrintConfig { config } => {
            let cfg = match config {
                Some(path) => load(path, &cli.overrides, err)?,
                None => {
                    let mut cfg = Config::default();
                    apply_overrides(&mut cfg, &cli.overrides, err);
                    cfg.validate()?;
                    cfg
                }
            };
            let _ = out.write_all(cfg.to_ini().as_bytes());
            Ok(EXIT_OK)
        }
    }
}

fn emit(out: &mut dyn Write, line: &str) {
    let _ = writeln!(out, "{line}");
}

fn load(path: &Path, overrides: &Overrides, err: &mut dyn Write) -> Result<Config> {
    let mut cfg = Config::load(path)?;
    apply_overrides(&mut cfg, overrides, err);
    cfg.validate()?;
    Ok(cfg)
}

fn apply_overrides(cfg: &mut Config, o: &Overrides, err: &mut dyn Write) {
    if let Some(dir) = &o.out {
        cfg.output.dir = dir.clone();
    }
    if let Some(n) = o.threads {
        cfg.output.threads = n;
    }
    if let Some(k) = o.snapshot_every {
        cfg.output.snapshot_every = k;
    }
    if let Some(seed) = o.seed {
        if !cfg.set_seed(seed) {
            let _ = writeln!(err, "warning: --seed ignored, scenario '{}' has no seed", cfg.scenario);
        }
    }
}

fn study_options(cfg: &Config) -> StudyOptions {
    StudyOptions {
        out_dir: Some(cfg.output.dir.clone()),
        threads: cfg.output.threads,
    }
}

fn finish_study(report: StudyReport, out: &mut dyn Write) -> Result<i32> {
    let _ = out.write_all(report.summary().as_bytes());
    Ok(if report.passed() {
        EXIT_OK
    } else if report.partial {
        EXIT_SOLVER
    } else {
        EXIT_CHECK
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| ChnsError::io(dir, e))
}

fn write_fields(dir: &Path, s: &State) -> Result<()> {
    let tag = format!("{:06}", s.k);
    snapshot::write_scalar(&dir.join(format!("phi_{tag}.bin")), &s.phi, s.t, s.k)?;
    snapshot::write_scalar(&dir.join(format!("mu_{tag}.bin")), &s.mu, s.t, s.k)?;
    snapshot::write_scalar(&dir.join(format!("q_{tag}.bin")), &s.q, s.t, s.k)?;
    snapshot::write_vector(
        &dir.join(format!("vx_{tag}.bin")),
        &dir.join(format!("vy_{tag}.bin")),
        &s.v,
        s.t,
        s.k,
    )
}

fn cmd_run(cfg: &Config, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let dir = &cfg.output.dir;
    let fields = dir.join("fields");
    create_dir(&fields)?;
    let ini = dir.join("config.effective.ini");
    std::fs::write(&ini, cfg.to_ini()).map_err(|e| ChnsError::io(&ini, e))?;

    let grid = cfg.build_grid()?;
    let set = cfg.constitutive_set()?;
    let s0 = initialize_scenario(&cfg.scenario, &grid, &set, &cfg.params)?;
    let every = cfg.output.snapshot_every;
    if every > 0 {
        write_fields(&fields, &s0)?;
    }

    let mut io_error = None;
    let mut on_step = |s: &State, _: &LedgerRow, _: &_| {
        if every > 0 && s.k % every == 0 && io_error.is_none() {
            io_error = write_fields(&fields, s).err();
        }
    };
    let result = run(&s0, &grid, &set, &cfg.params, &cfg.stepper, cfg.horizon, &mut on_step);
    if let Some(e) = io_error {
        return Err(e);
    }
    let (state, mut ledger, failure) = match result {
        Ok(o) => (o.state, o.ledger, None),
        Err(f) => (f.state, f.ledger, Some(f.error)),
    };
    for row in ledger.iter_mut() {
        row.slack_tol = cfg.slack_tol * row.e_prev.max(1.0);
    }
    write_ledger(&dir.join("ledger.csv"), &ledger)?;
    if every == 0 || state.k % every != 0 {
        write_fields(&fields, &state)?;
    }

    for row in &ledger {
        if row.flagged() {
            let _ = writeln!(
                err,
                "warning: step {} energy slack {:e} below -{:e}",
                row.step, row.slack, row.slack_tol
            );
        }
        if row.e_tot > row.e_prev {
            let _ = writeln!(err, "warning: step {} energy increased by {:e}", row.step, row.e_tot - row.e_prev);
        }
    }
    let min_slack = ledger.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min);
    emit(
        out,
        &format!(
            "{} steps to t={:e}; E {:e} -> {:e}; min slack {:e}; output in {}",
            ledger.len(),
            state.t,
            ledger.first().map_or(f64::NAN, |r| r.e_prev),
            ledger.last().map_or(f64::NAN, |r| r.e_tot),
            min_slack,
            dir.display()
        ),
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(EXIT_OK),
    }
}

fn cmd_audit(cfg: &Config, write_files: bool, out: &mut dyn Write) -> Result<i32> {
    let set = cfg.constitutive_set()?;
    let report = audit_assumptions(&set, &cfg.params, &SamplingSpec::for_params(&cfg.params));
    let text = report.to_text();
    let _ = out.write_all(text.as_bytes());
    if write_files {
        let dir = &cfg.output.dir;
        create_dir(dir)?;
        for (name, body) in [("audit.txt", text), ("audit.csv", report.to_csv())] {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| ChnsError::io(&path, e))?;
        }
    }
    Ok(if report.all_passed() { EXIT_OK } else { EXIT_CHECK })
}

/// Number of random `(q₀, q₁)` pairs in the pointwise inequality sweep.
pub const INEQUALITY_PAIRS: usize = 100_000;

/// Every built-in identity check: grid duality on 16² to 64² grids in both
/// boundary modes, certification of the linear solvers, the constitutive audit
/// of the defaults and the pointwise step inequalities.
pub fn selftest() -> Vec<Check> {
    let mut checks = Vec::new();
    for n in [16, 32, 64] {
        for bc in [BoundaryMode::Box, BoundaryMode::Periodic] {
            let report = sbp_selftest(&Grid::unit_square(n, bc));
            for c in report.checks {
                checks.push(Check {
                    name: format!("mesh {n}x{n} {bc}: {}", c.name),
                    passed: c.pass,
                    detail: format!("defect {:.2e}", c.defect),
                });
            }
        }
    }
    checks.extend(linalg_checks());

    let params = ModelParams::default();
    match ConstitutiveSet::from_params(&params) {
        Ok(set) => {
            let report = audit_assumptions(&set, &params, &SamplingSpec::for_params(&params));
            for c in &report.clauses {
                checks.push(Check {
                    name: format!("constitutive: {}", c.id),
                    passed: c.pass,
                    detail: c.detail.clone(),
                });
            }
            checks.extend(inequality_checks(&set, &params));
        }
        Err(e) => checks.push(Check {
            name: "constitutive: default set".into(),
            passed: false,
            detail: e.to_string(),
        }),
    }
    checks
}

/// Random `(q₀, q₁)` pairs drawn uniformly from the audit's q window.
pub fn random_q_pairs(params: &ModelParams, n: usize, seed: u64) -> Vec<(f64, f64)> {
    let s = SamplingSpec::for_params(params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (rng.gen_range(s.q_lo..=s.q_hi), rng.gen_range(s.q_lo..=s.q_hi)))
        .collect()
}

fn inequality_checks(set: &ConstitutiveSet, params: &ModelParams) -> Vec<Check> {
    let pairs = random_q_pairs(params, INEQUALITY_PAIRS, 0x1e9);
    let r = pointwise_step_inequalities(set, &pairs);
    let planted = set.clone().with_h(|q| q * q, |q| 2.0 * q);
    let caught = pointwise_step_inequalities(&planted, &pairs);
    vec![
        Check {
            name: "inequality: h concavity form".into(),
            passed: r.violations_f == 0,
            detail: format!("{} pairs, min slack {:.3e}", r.pairs, r.min_slack_f),
        },
        Check {
            name: "inequality: g monotonicity form".into(),
            passed: r.violations_g == 0,
            detail: format!("{} pairs, min slack {:.3e}", r.pairs, r.min_slack_g),
        },
        Check {
            name: "inequality: convex h is detected".into(),
            passed: caught.violations_f > 0,
            detail: format!("{} violations", caught.violations_f),
        },
    ]
}

fn rel_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let r: f64 = ax.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    r / nb.max(f64::MIN_POSITIVE)
}

fn linalg_checks() -> Vec<Check> {
    let mut checks = Vec::new();
    let mut push = |name: &str, result: std::result::Result<f64, String>, tol: f64| {
        let (passed, detail) = match result {
            Ok(d) => (d <= tol, format!("defect {d:.2e} (tolerance {tol:.0e})")),
            Err(e) => (false, e),
        };
        checks.push(Check {
            name: format!("linalg: {name}"),
            passed,
            detail,
        });
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x11a);
    for bc in [BoundaryMode::Box, BoundaryMode::Periodic] {
        let g = Grid::unit_square(16, bc);
        let ops = Operators::new(&g);
        let coeff: Vec<f64> = (0..g.n_faces()).map(|_| rng.gen_range(0.5..2.0)).collect();
        let eta: Vec<f64> = (0..g.n_cells()).map(|_| rng.gen_range(0.5..2.0)).collect();

        let sym = |m: &CsrMatrix| m.symmetry_defect(8, 7);
        match ops.laplace_matrix(&coeff) {
            Ok(lap) => {
                push(&format!("{bc} laplacian symmetric"), Ok(sym(&lap)), 1e-13);
                // `I - Δ` is SPD; every preconditioner must reach a certified residual.
                let spd = CsrMatrix::identity(g.n_cells()).add(1.0, &lap, -1.0).with_symmetric(true);
                let b: Vec<f64> = (0..g.n_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                for pre in [Preconditioner::None, Preconditioner::Jacobi, Preconditioner::IncompleteCholesky] {
                    let cfg = KrylovConfig {
                        rel_tol: 1e-12,
                        preconditioner: pre,
                        ..KrylovConfig::default()
                    };
                    let res = solve_spd(&spd, &b, &cfg)
                        .map(|s| rel_residual(&spd, &s.x, &b))
                        .map_err(|e| e.to_string());
                    push(&format!("{bc} CG ({pre}) certified"), res, 1e-11);
                }
            }
            Err(e) => push(&format!("{bc} laplacian"), Err(e.to_string()), 0.0),
        }
        push(&format!("{bc} viscous block symmetric"), Ok(sym(&ops.viscous_matrix(&eta))), 1e-13);
        push(&format!("{bc} biharmonic symmetric"), Ok(sym(&ops.biharmonic_matrix())), 1e-13);

        // Neumann–Poisson: forward-apply a random field, then recover it.
        let field = ScalarField::from_vec(&g, (0..g.n_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let w = VectorField::from_vec(&g, coeff.clone());
        let cfg = KrylovConfig {
            rel_tol: 1e-12,
            ..KrylovConfig::default()
        };
        let poisson = crate::mesh::laplace_neumann(&field, &w).and_then(|lap| {
            let rhs = lap.map(|v| -v);
            let mean = field.integral();
            let rhs = ScalarField::from_vec(&g, rhs.values().iter().map(|v| v + mean).collect());
            solve_neumann_poisson(&w, &rhs, &cfg)
        });
        push(
            &format!("{bc} Neumann-Poisson recovers a field"),
            poisson
                .map(|x| {
                    let d: f64 = x.values().iter().zip(field.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    d / field.max_abs()
                })
                .map_err(|e| e.to_string()),
            1e-9,
        );

        // Saddle: a gradient load is absorbed entirely by the pressure.
        let a = ops
            .viscous_matrix(&eta)
            .add(1.0, &CsrMatrix::identity(g.n_faces()), 1.0)
            .with_symmetric(true);
        let p_true = ScalarField::from_vec(&g, (0..g.n_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let saddle = solve_saddle(&a, &g, &grad(&p_true), &cfg).map(|(v, p, _)| {
            let mean = p_true.mean();
            let dp = p
                .values()
                .iter()
                .zip(p_true.values())
                .map(|(a, b)| (a - (b - mean)).abs())
                .fold(0.0, f64::max);
            v.max_abs().max(dp)
        });
        push(
            &format!("{bc} saddle absorbs a gradient load"),
            saddle.map_err(|e| e.to_string()),
            1e-8,
        );
    }
    checks
}
