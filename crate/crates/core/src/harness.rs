//! Continuation and refinement studies.
//!
//! * [`study_delta`] — the same run for a descending list of regularization
//!   strengths `δ`; reports the Cauchy differences `‖φ^{δᵢ}(T) − φ^{δᵢ₊₁}(T)‖₂`,
//!   which should decrease monotonically.
//! * [`study_tau`] — the same with the time step; the implicit-Euler backbone
//!   predicts first-order Richardson ratios, and every step must pass the
//!   energy audit.
//! * [`study_defect`] — runs on refining grids and fits the decay order of the
//!   transport defect of the energy audit (`slack` minus the two pointwise
//!   inequality gaps).
//!
//! Cases run concurrently; results depend only on each case's configuration.
//! With an output directory every case writes `runs/<hash>/` (ledger, final `φ`
//! snapshot, effective config) and the study writes `study.csv` plus
//! `study_summary.txt`. A rerun into the same directory reuses every case whose
//! row and snapshot are already present.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::Config;
use crate::energy::{write_ledger, LedgerRow};
use crate::error::{ChnsError, Result};
use crate::mesh::snapshot;
use crate::mesh::ScalarField;
use crate::state::initialize_scenario;
use crate::stepper::run;

/// Tolerated deviation of a measured Richardson ratio from its prediction.
pub const RICHARDSON_TOLERANCE: f64 = 0.3;

/// Defects below `DEFECT_FLOOR·max(E₀, 1)` are solver noise.
pub const DEFECT_FLOOR: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StudyKind {
    Delta,
    Tau,
    Defect,
}

impl StudyKind {
    pub fn name(self) -> &'static str {
        match self {
            StudyKind::Delta => "delta",
            StudyKind::Tau => "tau",
            StudyKind::Defect => "defect",
        }
    }
}

impl fmt::Display for StudyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, Default)]
pub struct StudyOptions {
    /// Where to write (and resume) the study; `None` keeps everything in memory.
    pub out_dir: Option<PathBuf>,
    pub threads: usize,
}

impl StudyOptions {
    pub fn in_memory(threads: usize) -> Self {
        StudyOptions { out_dir: None, threads }
    }
}

/// Summary of one run of a study.
#[derive(Clone, Debug, PartialEq)]
pub struct CaseOutcome {
    /// The varied parameter (δ, τ, or the cell count per direction).
    pub value: f64,
    pub config_hash: String,
    /// `None` on success, otherwise the failure reason.
    pub failure: Option<String>,
    pub steps: usize,
    pub t_final: f64,
    pub e_initial: f64,
    pub e_final: f64,
    /// Steps whose total energy exceeded the previous one.
    pub energy_increases: usize,
    /// Steps whose slack fell below the audit tolerance.
    pub flagged_steps: usize,
    pub min_slack: f64,
    pub max_abs_defect: f64,
    pub rms_defect: f64,
    pub max_div: f64,
    pub dx: f64,
    /// Final order parameter and cell volume (not part of the CSV row).
    pub phi: Vec<f64>,
    pub cell_volume: f64,
    pub reused: bool,
}

impl CaseOutcome {
    pub fn ok(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct StudyReport {
    pub kind: StudyKind,
    pub base_hash: String,
    pub cases: Vec<CaseOutcome>,
    /// `‖φᵢ(T) − φᵢ₊₁(T)‖₂` (δ and τ studies).
    pub differences: Vec<f64>,
    /// `differencesᵢ / differencesᵢ₊₁`.
    pub ratios: Vec<f64>,
    /// Ratios predicted by first-order convergence (τ study only).
    pub expected_ratios: Vec<f64>,
    /// Fitted decay order of the defect in `dx` (defect study only).
    pub order: Option<f64>,
    /// Same fit on the per-run maximum instead of the RMS.
    pub order_max: Option<f64>,
    pub checks: Vec<Check>,
    /// Some run failed; derived quantities cover the successful prefix only.
    pub partial: bool,
}

impl StudyReport {
    pub fn passed(&self) -> bool {
        !self.partial && self.checks.iter().all(|c| c.passed)
    }

    pub const CSV_COLUMNS: [&'static str; 19] = [
        "study",
        "index",
        "value",
        "config_hash",
        "base_hash",
        "status",
        "steps",
        "t_final",
        "e_initial",
        "e_final",
        "energy_increases",
        "flagged_steps",
        "min_slack",
        "max_abs_defect",
        "rms_defect",
        "max_div",
        "dx",
        "diff_next",
        "ratio_next",
    ];

    pub fn to_csv(&self) -> String {
        let mut out = Self::CSV_COLUMNS.join(",");
        out.push('\n');
        for (i, c) in self.cases.iter().enumerate() {
            let status = match &c.failure {
                None => "ok".to_string(),
                Some(r) => format!("failed: {}", r.replace([',', '\n'], ";")),
            };
            let opt = |v: Option<&f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{i},{:e},{},{},{status},{},{:e},{:e},{:e},{},{},{:e},{:e},{:e},{:e},{:e},{},{}",
                self.kind,
                c.value,
                c.config_hash,
                self.base_hash,
                c.steps,
                c.t_final,
                c.e_initial,
                c.e_final,
                c.energy_increases,
                c.flagged_steps,
                c.min_slack,
                c.max_abs_defect,
                c.rms_defect,
                c.max_div,
                c.dx,
                opt(self.differences.get(i)),
                opt(self.ratios.get(i)),
            );
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "study: {}", self.kind);
        let _ = writeln!(s, "config hash: {}", self.base_hash);
        let param = match self.kind {
            StudyKind::Delta => "delta",
            StudyKind::Tau => "tau",
            StudyKind::Defect => "n",
        };
        for c in &self.cases {
            let status = match &c.failure {
                None if c.reused => "ok (reused)".to_string(),
                None => "ok".to_string(),
                Some(r) => format!("FAILED: {r}"),
            };
            let _ = writeln!(
                s,
                "  {param} = {:<9} {}  {status}  steps {}  E {:.8e} -> {:.8e}  flagged {}  rms defect {:.3e}",
                c.value,
                &c.config_hash[..12],
                c.steps,
                c.e_initial,
                c.e_final,
                c.flagged_steps,
                c.rms_defect
            );
        }
        if !self.differences.is_empty() {
            let list = |v: &[f64]| v.iter().map(|x| format!("{x:.4e}")).collect::<Vec<_>>().join(", ");
            let _ = writeln!(s, "differences |phi_i(T) - phi_i+1(T)|_2: {}", list(&self.differences));
            if !self.ratios.is_empty() {
                let _ = writeln!(s, "Cauchy ratios: {}", list(&self.ratios));
            }
            if !self.expected_ratios.is_empty() {
                let _ = writeln!(s, "first-order prediction: {}", list(&self.expected_ratios));
            }
        }
        if let Some(p) = self.order {
            let _ = writeln!(s, "fitted defect order (rms): {p:.3}");
        }
        if let Some(p) = self.order_max {
            let _ = writeln!(s, "fitted defect order (max): {p:.3}");
        }
        s.push_str("checks:\n");
        for c in &self.checks {
            let _ = writeln!(s, "  [{}] {}: {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
        }
        if self.partial {
            s.push_str("PARTIAL: at least one run failed\n");
        }
        let _ = writeln!(s, "result: {}", if self.passed() { "PASS" } else { "FAIL" });
        s
    }
}

/// Runs one configuration to its horizon.
pub fn run_case(cfg: &Config, value: f64) -> CaseOutcome {
    execute_case(cfg, value).0
}

fn execute_case(cfg: &Config, value: f64) -> (CaseOutcome, Vec<LedgerRow>) {
    let hash = cfg.hash();
    let mut out = CaseOutcome {
        value,
        config_hash: hash,
        failure: None,
        steps: 0,
        t_final: 0.0,
        e_initial: f64::NAN,
        e_final: f64::NAN,
        energy_increases: 0,
        flagged_steps: 0,
        min_slack: f64::NAN,
        max_abs_defect: 0.0,
        rms_defect: 0.0,
        max_div: 0.0,
        dx: cfg.grid.lx / cfg.grid.nx as f64,
        phi: Vec::new(),
        cell_volume: 0.0,
        reused: false,
    };
    let setup = || -> Result<_> {
        let grid = cfg.build_grid()?;
        let set = cfg.constitutive_set()?;
        let s0 = initialize_scenario(&cfg.scenario, &grid, &set, &cfg.params)?;
        Ok((grid, set, s0))
    };
    let (grid, set, s0) = match setup() {
        Ok(x) => x,
        Err(e) => {
            out.failure = Some(e.to_string());
            return (out, Vec::new());
        }
    };
    out.cell_volume = grid.cell_volume();
    let result = run(&s0, &grid, &set, &cfg.params, &cfg.stepper, cfg.horizon, &mut |_, _, _| {});
    let (state, mut ledger) = match result {
        Ok(o) => (o.state, o.ledger),
        Err(f) => {
            out.failure = Some(f.error.to_string());
            (f.state, f.ledger)
        }
    };
    for row in ledger.iter_mut() {
        row.slack_tol = cfg.slack_tol * row.e_prev.max(1.0);
    }
    summarize_ledger(&mut out, &ledger);
    out.t_final = state.t;
    out.phi = state.phi.into_vec();
    (out, ledger)
}

fn summarize_ledger(out: &mut CaseOutcome, ledger: &[LedgerRow]) {
    out.steps = ledger.len();
    if let Some(first) = ledger.first() {
        out.e_initial = first.e_prev;
    }
    if let Some(last) = ledger.last() {
        out.e_final = last.e_tot;
    }
    out.energy_increases = ledger.iter().filter(|r| r.e_tot > r.e_prev).count();
    out.flagged_steps = ledger.iter().filter(|r| r.flagged()).count();
    out.min_slack = ledger.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min);
    out.max_abs_defect = ledger.iter().map(|r| r.defect.abs()).fold(0.0, f64::max);
    out.rms_defect = if ledger.is_empty() {
        0.0
    } else {
        (ledger.iter().map(|r| r.defect * r.defect).sum::<f64>() / ledger.len() as f64).sqrt()
    };
    out.max_div = ledger.iter().map(|r| r.div_inf).fold(0.0, f64::max);
}

/// Cached rows of an earlier `study.csv`, keyed by config hash.
fn load_previous(dir: &Path) -> HashMap<String, HashMap<String, String>> {
    let mut map = HashMap::new();
    let Ok(text) = std::fs::read_to_string(dir.join("study.csv")) else {
        return map;
    };
    let mut lines = text.lines();
    let Some(header) = lines.next() else {
        return map;
    };
    let cols: Vec<&str> = header.split(',').collect();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            continue;
        }
        let row: HashMap<String, String> = cols.iter().zip(&fields).map(|(c, f)| (c.to_string(), f.to_string())).collect();
        if row.get("status").map(String::as_str) == Some("ok") {
            if let Some(h) = row.get("config_hash") {
                map.insert(h.clone(), row);
            }
        }
    }
    map
}

fn restore_case(dir: &Path, cfg: &Config, value: f64, row: &HashMap<String, String>) -> Option<CaseOutcome> {
    let num = |k: &str| row.get(k).and_then(|v| v.parse::<f64>().ok());
    let int = |k: &str| row.get(k).and_then(|v| v.parse::<usize>().ok());
    let grid = cfg.build_grid().ok()?;
    let (header, values) = snapshot::read(&case_dir(dir, &cfg.hash()).join("phi.bin")).ok()?;
    let phi = snapshot::scalar_from_snapshot(&grid, &header, values).ok()?;
    Some(CaseOutcome {
        value,
        config_hash: cfg.hash(),
        failure: None,
        steps: int("steps")?,
        t_final: num("t_final")?,
        e_initial: num("e_initial")?,
        e_final: num("e_final")?,
        energy_increases: int("energy_increases")?,
        flagged_steps: int("flagged_steps")?,
        min_slack: num("min_slack")?,
        max_abs_defect: num("max_abs_defect")?,
        rms_defect: num("rms_defect")?,
        max_div: num("max_div")?,
        dx: num("dx")?,
        phi: phi.into_vec(),
        cell_volume: grid.cell_volume(),
        reused: true,
    })
}

fn case_dir(dir: &Path, hash: &str) -> PathBuf {
    dir.join("runs").join(hash)
}

fn persist_case(dir: &Path, cfg: &Config, outcome: &CaseOutcome, ledger: &[LedgerRow]) -> Result<()> {
    let cd = case_dir(dir, &outcome.config_hash);
    std::fs::create_dir_all(&cd).map_err(|e| ChnsError::io(&cd, e))?;
    let ini = cd.join("config.effective.ini");
    std::fs::write(&ini, cfg.to_ini()).map_err(|e| ChnsError::io(&ini, e))?;
    write_ledger(&cd.join("ledger.csv"), ledger)?;
    if outcome.ok() {
        let grid = cfg.build_grid()?;
        let phi = ScalarField::from_vec(&grid, outcome.phi.clone());
        snapshot::write_scalar(&cd.join("phi.bin"), &phi, outcome.t_final, outcome.steps as u64)?;
    }
    Ok(())
}

/// Runs (or restores) every case, in parallel, preserving input order.
fn execute(cases: &[(Config, f64)], opts: &StudyOptions) -> Result<Vec<CaseOutcome>> {
    let previous = opts.out_dir.as_deref().map(load_previous).unwrap_or_default();
    let work = |(cfg, value): &(Config, f64)| -> Result<CaseOutcome> {
        if let Some(dir) = opts.out_dir.as_deref() {
            if let Some(row) = previous.get(&cfg.hash()) {
                if let Some(restored) = restore_case(dir, cfg, *value, row) {
                    return Ok(restored);
                }
            }
            let (outcome, ledger) = execute_case(cfg, *value);
            persist_case(dir, cfg, &outcome, &ledger)?;
            Ok(outcome)
        } else {
            Ok(execute_case(cfg, *value).0)
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.max(1))
        .build()
        .map_err(|e| ChnsError::Config(format!("thread pool: {e}")))?;
    pool.install(|| cases.par_iter().map(work).collect())
}

fn l2_distance(a: &CaseOutcome, b: &CaseOutcome) -> f64 {
    let d2: f64 = a.phi.iter().zip(&b.phi).map(|(x, y)| (x - y) * (x - y)).sum();
    (a.cell_volume * d2).sqrt()
}

/// Strictly decreasing, except that exact zeros may repeat.
fn monotone_decrease(d: &[f64]) -> bool {
    d.windows(2).all(|w| w[1] < w[0] || (w[0] == 0.0 && w[1] == 0.0))
}

fn require_descending(values: &[f64], what: &'static str) -> Result<()> {
    if values.len() < 3 {
        return Err(ChnsError::invalid(
            "study_values",
            format!("{what} study needs at least 3 values for a Cauchy ratio (got {})", values.len()),
        ));
    }
    if !values.windows(2).all(|w| w[1] < w[0]) || values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(ChnsError::invalid(
            "study_values",
            format!("{what} values must be finite, nonnegative and strictly descending: {values:?}"),
        ));
    }
    Ok(())
}

fn finish(kind: StudyKind, base: &Config, cases: Vec<CaseOutcome>, opts: &StudyOptions) -> Result<StudyReport> {
    let partial = cases.iter().any(|c| !c.ok());
    let mut report = StudyReport {
        kind,
        base_hash: base.hash(),
        cases,
        differences: Vec::new(),
        ratios: Vec::new(),
        expected_ratios: Vec::new(),
        order: None,
        order_max: None,
        checks: Vec::new(),
        partial,
    };
    let ok_prefix = report.cases.iter().take_while(|c| c.ok()).count();
    report.checks.push(Check {
        name: "all runs completed".into(),
        passed: !partial,
        detail: format!("{ok_prefix} of {} succeeded before the first failure", report.cases.len()),
    });
    if kind != StudyKind::Defect {
        let ok = &report.cases[..ok_prefix];
        report.differences = ok.windows(2).map(|w| l2_distance(&w[0], &w[1])).collect();
        report.ratios = report
            .differences
            .windows(2)
            .map(|w| if w[1] == 0.0 { f64::NAN } else { w[0] / w[1] })
            .collect();
        report.checks.push(Check {
            name: "Cauchy differences decrease monotonically".into(),
            passed: monotone_decrease(&report.differences),
            detail: format!("{:?}", report.differences),
        });
    }
    if let Some(dir) = opts.out_dir.as_deref() {
        std::fs::create_dir_all(dir).map_err(|e| ChnsError::io(dir, e))?;
    }
    Ok(report)
}

fn write_report(report: &StudyReport, opts: &StudyOptions) -> Result<()> {
    if let Some(dir) = opts.out_dir.as_deref() {
        let csv = dir.join("study.csv");
        std::fs::write(&csv, report.to_csv()).map_err(|e| ChnsError::io(&csv, e))?;
        let txt = dir.join("study_summary.txt");
        std::fs::write(&txt, report.summary()).map_err(|e| ChnsError::io(&txt, e))?;
    }
    Ok(())
}

/// δ-continuation on a fixed grid and time step.
pub fn study_delta(base: &Config, deltas: &[f64], opts: &StudyOptions) -> Result<StudyReport> {
    require_descending(deltas, "delta")?;
    let cases: Vec<(Config, f64)> = deltas
        .iter()
        .map(|&d| {
            let mut c = base.clone();
            c.params.delta = d;
            (c, d)
        })
        .collect();
    let outcomes = execute(&cases, opts)?;
    let report = finish(StudyKind::Delta, base, outcomes, opts)?;
    write_report(&report, opts)?;
    Ok(report)
}

/// Time-step refinement at fixed δ and grid.
pub fn study_tau(base: &Config, taus: &[f64], opts: &StudyOptions) -> Result<StudyReport> {
    require_descending(taus, "tau")?;
    if taus[taus.len() - 1] <= 0.0 {
        return Err(ChnsError::invalid("study_values", "tau values must be > 0"));
    }
    let cases: Vec<(Config, f64)> = taus
        .iter()
        .map(|&t| {
            let mut c = base.clone();
            c.stepper.tau = t;
            (c, t)
        })
        .collect();
    let outcomes = execute(&cases, opts)?;
    let mut report = finish(StudyKind::Tau, base, outcomes, opts)?;
    // d_i ≈ C (τ_i − τ_{i+1}) for a first-order method
    report.expected_ratios = taus
        .windows(3)
        .take(report.ratios.len())
        .map(|w| (w[0] - w[1]) / (w[1] - w[2]))
        .collect();
    let all_zero = report.differences.iter().all(|&d| d == 0.0);
    let within = report
        .ratios
        .iter()
        .zip(&report.expected_ratios)
        .all(|(r, e)| (r / e - 1.0).abs() <= RICHARDSON_TOLERANCE);
    report.checks.push(Check {
        name: format!("Richardson ratios within {:.0}% of first order", 100.0 * RICHARDSON_TOLERANCE),
        passed: all_zero || (within && !report.ratios.is_empty()),
        detail: if all_zero {
            "all differences are exactly zero".into()
        } else {
            format!("measured {:?}, predicted {:?}", report.ratios, report.expected_ratios)
        },
    });
    let flagged: usize = report.cases.iter().map(|c| c.flagged_steps).sum();
    report.checks.push(Check {
        name: "energy slack within tolerance for every tau".into(),
        passed: flagged == 0,
        detail: format!("{flagged} flagged steps"),
    });
    write_report(&report, opts)?;
    Ok(report)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_order(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() || y.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Grid refinement of the transport defect of the energy audit.
pub fn study_defect(base: &Config, grids: &[usize], opts: &StudyOptions) -> Result<StudyReport> {
    if grids.len() < 2 || !grids.windows(2).all(|w| w[1] > w[0]) || grids[0] < 2 {
        return Err(ChnsError::invalid(
            "study_values",
            format!("defect study needs at least 2 strictly refining grids (>= 2 cells): {grids:?}"),
        ));
    }
    let cases: Vec<(Config, f64)> = grids
        .iter()
        .map(|&n| {
            let mut c = base.clone();
            c.grid.nx = n;
            c.grid.ny = ((n as f64) * base.grid.ny as f64 / base.grid.nx as f64).round().max(2.0) as usize;
            (c, n as f64)
        })
        .collect();
    let outcomes = execute(&cases, opts)?;
    let mut report = finish(StudyKind::Defect, base, outcomes, opts)?;
    let ok: Vec<&CaseOutcome> = report.cases.iter().filter(|c| c.ok()).collect();
    let floor = ok
        .iter()
        .map(|c| DEFECT_FLOOR * c.e_initial.abs().max(1.0))
        .fold(0.0, f64::max);
    let at_floor = ok.iter().all(|c| c.max_abs_defect <= floor);
    let dx: Vec<f64> = ok.iter().map(|c| c.dx).collect();
    report.order = fit_order(&dx, &ok.iter().map(|c| c.rms_defect).collect::<Vec<_>>());
    report.order_max = fit_order(&dx, &ok.iter().map(|c| c.max_abs_defect).collect::<Vec<_>>());
    report.checks.push(Check {
        name: "defect decays with order >= 1 in dx".into(),
        passed: at_floor || report.order.is_some_and(|p| p >= 1.0),
        detail: if at_floor {
            format!("defect at the solver floor on every grid (<= {floor:.1e})")
        } else {
            format!("rms order {:?}, max order {:?}", report.order, report.order_max)
        },
    });
    if let Some(finest) = ok.last() {
        report.checks.push(Check {
            name: "total energy non-increasing on the finest grid".into(),
            passed: finest.energy_increases == 0,
            detail: format!("{} increasing steps", finest.energy_increases),
        });
    }
    write_report(&report, opts)?;
    Ok(report)
}
