//! INI-style run configuration.
//!
//! The format is flat `key = value` lines grouped under `[section]` headers;
//! `#` and `;` start comments (at line start or after whitespace). Every key
//! has a default, but unknown keys are a hard error — a typo never silently
//! falls back to a default.
//!
//! ```text
//! [grid]
//! n = 32
//! bc = box
//!
//! [stepper]
//! tau = 1e-3
//! horizon = 0.1
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::constitutive::{ConstitutiveSet, ModelParams};
use crate::error::{ChnsError, Result};
use crate::linalg::Preconditioner;
use crate::mesh::{BoundaryMode, Grid};
use crate::state::{DropletSpec, Scenario};
use crate::stepper::{NonlinearSolver, StepConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub bc: BoundaryMode,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            nx: 32,
            ny: 32,
            lx: 1.0,
            ly: 1.0,
            bc: BoundaryMode::Box,
        }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.nx, self.ny, self.lx, self.ly, self.bc)
    }
}

/// Choices for the model functions. Only the closed-form defaults are
/// available; the mobilities may be set to other constants.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstitutiveConfig {
    pub m: f64,
    pub mtilde: f64,
}

impl Default for ConstitutiveConfig {
    fn default() -> Self {
        ConstitutiveConfig { m: 1.0, mtilde: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write field snapshots every this many steps; `0` disables them.
    pub snapshot_every: u64,
    pub threads: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            snapshot_every: 0,
            threads: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    pub deltas: Vec<f64>,
    pub taus: Vec<f64>,
    pub grids: Vec<usize>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            deltas: vec![1e-2, 1e-3, 1e-4],
            taus: vec![1e-3, 5e-4, 2.5e-4],
            grids: vec![16, 32, 64],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub grid: GridConfig,
    pub params: ModelParams,
    pub constitutive: ConstitutiveConfig,
    pub stepper: StepConfig,
    /// Simulated time span.
    pub horizon: f64,
    /// Relative tolerance of the energy audit: a step is flagged when
    /// `slack < −slack_tol·max(E(k), 1)`.
    pub slack_tol: f64,
    pub scenario: Scenario,
    pub output: OutputConfig,
    pub study: StudyConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            grid: GridConfig::default(),
            params: ModelParams::default(),
            constitutive: ConstitutiveConfig::default(),
            stepper: StepConfig::default(),
            horizon: 1e-2,
            slack_tol: 1e-8,
            scenario: Scenario::Droplet(DropletSpec::default()),
            output: OutputConfig::default(),
            study: StudyConfig::default(),
        }
    }
}

const SECTIONS: [&str; 7] = ["grid", "params", "constitutive", "stepper", "scenario", "output", "study"];

/// Raw `section.key → (value, line)` table.
struct Table {
    entries: BTreeMap<(String, String), (String, usize)>,
    empty_sections: Vec<String>,
}

fn strip_comment(line: &str) -> &str {
    let t = line.trim();
    if t.starts_with('#') || t.starts_with(';') {
        return "";
    }
    let mut cut = t.len();
    for pat in [" #", "\t#", " ;", "\t;"] {
        if let Some(i) = t.find(pat) {
            cut = cut.min(i);
        }
    }
    t[..cut].trim()
}

fn tokenize(text: &str) -> Result<Table> {
    let mut entries = BTreeMap::new();
    let mut section: Option<String> = None;
    let mut section_used = true;
    let mut empty_sections = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| ChnsError::Config(format!("line {line_no}: malformed section header '{line}'")))?
                .trim()
                .to_string();
            if !section_used {
                empty_sections.extend(section.take());
            }
            section = Some(name);
            section_used = false;
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ChnsError::Config(format!("line {line_no}: expected 'key = value', got '{line}'")))?;
        let sec = section
            .clone()
            .ok_or_else(|| ChnsError::Config(format!("line {line_no}: key '{}' outside any section", key.trim())))?;
        section_used = true;
        let k = (sec.clone(), key.trim().to_string());
        if let Some((_, first)) = entries.get(&k) {
            return Err(ChnsError::Config(format!(
                "line {line_no}: duplicate key '{}.{}' (first set on line {first})",
                k.0, k.1
            )));
        }
        entries.insert(k, (value.trim().to_string(), line_no));
    }
    if !section_used {
        empty_sections.extend(section);
    }
    Ok(Table { entries, empty_sections })
}

impl Table {
    fn take(&mut self, section: &str, key: &str) -> Option<(String, usize)> {
        self.entries.remove(&(section.to_string(), key.to_string()))
    }

    fn parse<T: std::str::FromStr>(&mut self, section: &str, key: &str, slot: &mut T) -> Result<()>
    where
        T::Err: std::fmt::Display,
    {
        if let Some((raw, line)) = self.take(section, key) {
            *slot = raw
                .parse()
                .map_err(|e| ChnsError::Config(format!("line {line}: {section}.{key} = '{raw}': {e}")))?;
        }
        Ok(())
    }

    fn parse_list<T: std::str::FromStr>(&mut self, section: &str, key: &str, slot: &mut Vec<T>) -> Result<()>
    where
        T::Err: std::fmt::Display,
    {
        if let Some((raw, line)) = self.take(section, key) {
            *slot = raw
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse()
                        .map_err(|e| ChnsError::Config(format!("line {line}: {section}.{key} entry '{}': {e}", p.trim())))
                })
                .collect::<Result<_>>()?;
        }
        Ok(())
    }

    fn leftovers(self) -> Vec<String> {
        let mut out: Vec<String> = self.entries.keys().map(|(s, k)| format!("{s}.{k}")).collect();
        out.extend(
            self.empty_sections
                .into_iter()
                .filter(|s| !SECTIONS.contains(&s.as_str()))
                .map(|s| format!("[{s}]")),
        );
        out
    }
}

fn parse_bool(section: &str, key: &str, t: &mut Table, slot: &mut bool) -> Result<()> {
    if let Some((raw, line)) = t.take(section, key) {
        *slot = match raw.to_ascii_lowercase().as_str() {
            "true" | "yes" | "on" | "1" => true,
            "false" | "no" | "off" | "0" => false,
            _ => return Err(ChnsError::Config(format!("line {line}: {section}.{key} = '{raw}' is not a boolean"))),
        };
    }
    Ok(())
}

impl Config {
    /// Parses and validates a configuration text.
    pub fn parse(text: &str) -> Result<Config> {
        let mut t = tokenize(text)?;
        let mut c = Config::default();

        // [grid]: `n` sets both directions
        let mut n: Option<usize> = None;
        if let Some((raw, line)) = t.take("grid", "n") {
            n = Some(
                raw.parse()
                    .map_err(|e| ChnsError::Config(format!("line {line}: grid.n = '{raw}': {e}")))?,
            );
        }
        if let Some(n) = n {
            c.grid.nx = n;
            c.grid.ny = n;
        }
        t.parse("grid", "nx", &mut c.grid.nx)?;
        t.parse("grid", "ny", &mut c.grid.ny)?;
        t.parse("grid", "lx", &mut c.grid.lx)?;
        t.parse("grid", "ly", &mut c.grid.ly)?;
        t.parse("grid", "bc", &mut c.grid.bc)?;

        let p = &mut c.params;
        for (key, slot) in [
            ("epsilon", &mut p.epsilon),
            ("delta", &mut p.delta),
            ("rho1", &mut p.rho1),
            ("rho2", &mut p.rho2),
            ("eta1", &mut p.eta1),
            ("eta2", &mut p.eta2),
            ("beta", &mut p.beta),
            ("h0", &mut p.h0),
            ("q_min", &mut p.q_min),
            ("q_max", &mut p.q_max),
            ("c0", &mut p.c0),
            ("c1", &mut p.c1),
            ("c2", &mut p.c2),
        ] {
            t.parse("params", key, slot)?;
        }

        for (key, expected) in [("well", "quartic-linear"), ("coupling", "smoothstep")] {
            if let Some((raw, line)) = t.take("constitutive", key) {
                if raw != expected {
                    return Err(ChnsError::Config(format!(
                        "line {line}: constitutive.{key} = '{raw}' is not available (only '{expected}')"
                    )));
                }
            }
        }
        t.parse("constitutive", "m", &mut c.constitutive.m)?;
        t.parse("constitutive", "mtilde", &mut c.constitutive.mtilde)?;

        let s = &mut c.stepper;
        t.parse("stepper", "tau", &mut s.tau)?;
        t.parse("stepper", "horizon", &mut c.horizon)?;
        t.parse("stepper", "omega", &mut s.omega)?;
        t.parse("stepper", "tol_nl", &mut s.tol_nl)?;
        t.parse("stepper", "max_picard", &mut s.max_picard)?;
        parse_bool("stepper", "newton", &mut t, &mut s.newton)?;
        t.parse("stepper", "max_newton", &mut s.max_newton)?;
        t.parse("stepper", "tau_backoff", &mut s.tau_backoff)?;
        t.parse("stepper", "max_halvings", &mut s.max_halvings)?;
        t.parse::<NonlinearSolver>("stepper", "solver", &mut s.solver)?;
        parse_bool("stepper", "flow", &mut t, &mut s.flow)?;
        t.parse("stepper", "krylov_rel_tol", &mut s.krylov.rel_tol)?;
        t.parse("stepper", "krylov_abs_tol", &mut s.krylov.abs_tol)?;
        t.parse::<Preconditioner>("stepper", "preconditioner", &mut s.krylov.preconditioner)?;
        t.parse("stepper", "slack_tol", &mut c.slack_tol)?;

        c.scenario = parse_scenario(&mut t)?;

        if let Some((raw, _)) = t.take("output", "dir") {
            c.output.dir = PathBuf::from(raw);
        }
        t.parse("output", "snapshot_every", &mut c.output.snapshot_every)?;
        t.parse("output", "threads", &mut c.output.threads)?;

        t.parse_list("study", "deltas", &mut c.study.deltas)?;
        t.parse_list("study", "taus", &mut c.study.taus)?;
        t.parse_list("study", "grids", &mut c.study.grids)?;

        let unknown = t.leftovers();
        if !unknown.is_empty() {
            return Err(ChnsError::UnknownKeys(unknown));
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| ChnsError::io(path, e))?;
        Config::parse(&text)
    }

    /// Checks every invariant the run depends on; the first violation is
    /// reported by name.
    pub fn validate(&self) -> Result<()> {
        self.grid.build()?;
        self.params.validate()?;
        self.stepper.validate()?;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(ChnsError::invalid("horizon_positive", format!("horizon = {} must be > 0", self.horizon)));
        }
        if !(self.slack_tol > 0.0) {
            return Err(ChnsError::invalid("slack_tol_positive", "slack_tol must be > 0"));
        }
        if self.output.threads == 0 {
            return Err(ChnsError::invalid("threads_positive", "threads must be >= 1"));
        }
        let (lo, hi) = (self.params.c1, self.params.c2);
        for (name, v) in [("m", self.constitutive.m), ("mtilde", self.constitutive.mtilde)] {
            if !(v >= lo && v <= hi) {
                return Err(ChnsError::invalid(
                    "mobility_bounds",
                    format!("constitutive.{name} = {v} outside [c1, c2] = [{lo}, {hi}]"),
                ));
            }
        }
        self.constitutive_set()?;
        Ok(())
    }

    pub fn build_grid(&self) -> Result<Grid> {
        self.grid.build()
    }

    pub fn constitutive_set(&self) -> Result<ConstitutiveSet> {
        let set = ConstitutiveSet::from_params(&self.params)?;
        let (m, mt) = (self.constitutive.m, self.constitutive.mtilde);
        Ok(if (m, mt) == (1.0, 1.0) {
            set
        } else {
            set.with_mobilities(move |_, _| m, move |_| mt)
        })
    }

    /// Overrides the seed of a random scenario. Returns `false` when the
    /// scenario has no seed.
    pub fn set_seed(&mut self, seed: u64) -> bool {
        match &mut self.scenario {
            Scenario::Random { seed: s, .. } => {
                *s = seed;
                true
            }
            _ => false,
        }
    }

    /// The full effective configuration, every key spelled out.
    pub fn to_ini(&self) -> String {
        let mut out = String::from("# effective configuration (all defaults expanded)\n");
        out.push_str(&self.physics_ini());
        let o = &self.output;
        let _ = write!(
            out,
            "\n[output]\ndir = {}\nsnapshot_every = {}\nthreads = {}\n",
            o.dir.display(),
            o.snapshot_every,
            o.threads
        );
        out
    }

    /// Every section that influences results; [`Config::hash`] digests this.
    fn physics_ini(&self) -> String {
        let mut o = String::new();
        let g = &self.grid;
        let _ = writeln!(o, "[grid]\nnx = {}\nny = {}", g.nx, g.ny);
        let _ = writeln!(o, "# domain [0, lx] x [0, ly]\nlx = {}\nly = {}\nbc = {}", g.lx, g.ly, g.bc);

        let p = &self.params;
        o.push_str("\n[params]\n");
        for (sym, key, v) in [
            ("ε, interface thickness", "epsilon", p.epsilon),
            ("δ, regularization strength", "delta", p.delta),
            ("ρ̃₁, density of the fluid at φ = −1", "rho1", p.rho1),
            ("ρ̃₂, density of the fluid at φ = +1", "rho2", p.rho2),
            ("η₁, viscosity at φ = −1", "eta1", p.eta1),
            ("η₂, viscosity at φ = +1", "eta2", p.eta2),
            ("β, height of the coupling f", "beta", p.beta),
            ("h₀, surface tension squared without surfactant", "h0", p.h0),
            ("q_min, lower end of the active surfactant interval", "q_min", p.q_min),
            ("q_max, upper end of the active surfactant interval", "q_max", p.q_max),
            ("c₀, convexity constant of G", "c0", p.c0),
            ("c₁, lower coefficient bound", "c1", p.c1),
            ("c₂, upper coefficient bound", "c2", p.c2),
        ] {
            let _ = writeln!(o, "# {sym}\n{key} = {v}");
        }

        let c = &self.constitutive;
        let _ = writeln!(
            o,
            "\n[constitutive]\n# W(φ) = (1−φ²)²/4, linear beyond |φ| = 2\nwell = quartic-linear\n\
             # f(q) smoothstep on [q_min, q_max], h = h₀ − ∫f, d = h + f q\ncoupling = smoothstep\n\
             # m, surfactant mobility\nm = {}\n# m̃, Cahn–Hilliard mobility\nmtilde = {}",
            c.m, c.mtilde
        );

        let s = &self.stepper;
        let _ = writeln!(o, "\n[stepper]\n# τ, time step\ntau = {}\n# T, simulated time\nhorizon = {}", s.tau, self.horizon);
        let _ = writeln!(
            o,
            "# ω, initial Picard damping\nomega = {}\ntol_nl = {}\nsolver = {}\nmax_picard = {}\nnewton = {}\n\
             max_newton = {}\ntau_backoff = {}\nmax_halvings = {}\n# false enforces v = 0\nflow = {}",
            s.omega, s.tol_nl, s.solver, s.max_picard, s.newton, s.max_newton, s.tau_backoff, s.max_halvings, s.flow
        );
        let _ = writeln!(
            o,
            "krylov_rel_tol = {}\nkrylov_abs_tol = {}\npreconditioner = {}\nslack_tol = {}",
            s.krylov.rel_tol, s.krylov.abs_tol, s.krylov.preconditioner, self.slack_tol
        );

        o.push_str("\n[scenario]\n");
        write_scenario(&mut o, &self.scenario);

        let st = &self.study;
        let join = |v: Vec<String>| v.join(", ");
        let _ = writeln!(
            o,
            "\n[study]\ndeltas = {}\ntaus = {}\ngrids = {}",
            join(st.deltas.iter().map(|d| d.to_string()).collect()),
            join(st.taus.iter().map(|d| d.to_string()).collect()),
            join(st.grids.iter().map(|d| d.to_string()).collect()),
        );
        o
    }

    /// SHA-256 of everything except `[output]`, as lowercase hex.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.physics_ini().as_bytes()))
    }
}

fn write_scenario(o: &mut String, s: &Scenario) {
    let droplet = |o: &mut String, d: &DropletSpec| {
        let _ = writeln!(
            o,
            "radius = {}\n# centre as a fraction of the domain\ncenter_x = {}\ncenter_y = {}\n\
             q_background = {}\nq_amplitude = {}\nq_sigma = {}\nq_center_x = {}\nq_center_y = {}",
            d.radius, d.center.0, d.center.1, d.q_background, d.q_amplitude, d.q_sigma, d.q_center.0, d.q_center.1
        );
    };
    match s {
        Scenario::Uniform { phi, q } => {
            let _ = writeln!(o, "kind = uniform\nphi = {phi}\nq = {q}");
        }
        Scenario::Droplet(d) => {
            o.push_str("kind = droplet\n");
            droplet(o, d);
        }
        Scenario::ShearDroplet { droplet: d, amplitude } => {
            o.push_str("kind = shear-droplet\n");
            droplet(o, d);
            let _ = writeln!(o, "# peak speed of the imposed shear\namplitude = {amplitude}");
        }
        Scenario::Random { sigma, seed } => {
            let _ = writeln!(o, "kind = random\nsigma = {sigma}\nseed = {seed}");
        }
    }
}

fn parse_scenario(t: &mut Table) -> Result<Scenario> {
    let kind = t.take("scenario", "kind").map(|(k, _)| k).unwrap_or_else(|| "droplet".into());
    let droplet = |t: &mut Table| -> Result<DropletSpec> {
        let mut d = DropletSpec::default();
        t.parse("scenario", "radius", &mut d.radius)?;
        t.parse("scenario", "center_x", &mut d.center.0)?;
        t.parse("scenario", "center_y", &mut d.center.1)?;
        t.parse("scenario", "q_background", &mut d.q_background)?;
        t.parse("scenario", "q_amplitude", &mut d.q_amplitude)?;
        t.parse("scenario", "q_sigma", &mut d.q_sigma)?;
        t.parse("scenario", "q_center_x", &mut d.q_center.0)?;
        t.parse("scenario", "q_center_y", &mut d.q_center.1)?;
        if !(d.radius > 0.0 && d.q_sigma > 0.0) {
            return Err(ChnsError::invalid("scenario_geometry", "radius and q_sigma must be > 0"));
        }
        Ok(d)
    };
    match kind.as_str() {
        "uniform" => {
            let (mut phi, mut q) = (0.3, 0.5);
            t.parse("scenario", "phi", &mut phi)?;
            t.parse("scenario", "q", &mut q)?;
            Ok(Scenario::Uniform { phi, q })
        }
        "droplet" => Ok(Scenario::Droplet(droplet(t)?)),
        "shear-droplet" => {
            let d = droplet(t)?;
            let mut amplitude = 1.0;
            t.parse("scenario", "amplitude", &mut amplitude)?;
            Ok(Scenario::ShearDroplet { droplet: d, amplitude })
        }
        "random" => {
            let (mut sigma, mut seed) = (0.05, 0u64);
            t.parse("scenario", "sigma", &mut sigma)?;
            t.parse("scenario", "seed", &mut seed)?;
            if !(sigma >= 0.0) {
                return Err(ChnsError::invalid("scenario_sigma", "sigma must be >= 0"));
            }
            Ok(Scenario::Random { sigma, seed })
        }
        other => Err(ChnsError::Config(format!(
            "unknown scenario kind '{other}' (uniform|droplet|shear-droplet|random)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(Config::parse("").unwrap(), Config::default());
    }

    #[test]
    fn effective_config_round_trips() {
        let mut c = Config::default();
        c.grid.nx = 12;
        c.params.delta = 1e-4;
        c.stepper.flow = false;
        c.stepper.tau = 2.5e-3;
        c.scenario = "random-seed(0.1, 42)".parse().unwrap();
        c.study.deltas = vec![0.1, 0.01, 0.001];
        c.output.threads = 3;
        let back = Config::parse(&c.to_ini()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_ini(), c.to_ini());
        for kind in ["uniform", "droplet", "shear-droplet"] {
            c.scenario = kind.parse().unwrap();
            assert_eq!(Config::parse(&c.to_ini()).unwrap(), c);
        }
    }

    #[test]
    fn unknown_keys_are_listed() {
        let text = "[grid]\nnx = 8\nnxx = 9\n[output]\n[stepper]\ntua = 1\n[bogus]\n";
        match Config::parse(text) {
            Err(ChnsError::UnknownKeys(keys)) => {
                assert_eq!(keys, vec!["grid.nxx", "stepper.tua", "[bogus]"]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn keys_of_another_scenario_kind_are_unknown() {
        let text = "[scenario]\nkind = droplet\nphi = 0.2\n";
        assert!(matches!(Config::parse(text), Err(ChnsError::UnknownKeys(k)) if k == ["scenario.phi"]));
    }

    #[test]
    fn invalid_values_name_the_invariant() {
        let text = "[params]\nq_min = 1\nq_max = 0.5\n";
        assert!(matches!(Config::parse(text), Err(ChnsError::InvalidParameter { .. })));
        let text = "[stepper]\nomega = 0\n";
        assert!(matches!(
            Config::parse(text),
            Err(ChnsError::InvalidParameter { clause: "omega_range", .. })
        ));
        assert!(matches!(Config::parse("[grid]\nnx = ten\n"), Err(ChnsError::Config(_))));
        assert!(matches!(Config::parse("nx = 3\n"), Err(ChnsError::Config(_))));
        assert!(matches!(Config::parse("[grid]\nnx = 3\nnx = 4\n"), Err(ChnsError::Config(_))));
    }

    #[test]
    fn comments_and_shorthands() {
        let text = "# top\n[grid]\nn = 10 # both directions\nny = 12\n; note\n[stepper]\nnewton = off\n";
        let c = Config::parse(text).unwrap();
        assert_eq!((c.grid.nx, c.grid.ny), (10, 12));
        assert!(!c.stepper.newton);
    }

    #[test]
    fn hash_ignores_output_section() {
        let a = Config::default();
        let mut b = a.clone();
        b.output.dir = PathBuf::from("elsewhere");
        b.output.threads = 4;
        assert_eq!(a.hash(), b.hash());
        b.params.delta = 2e-3;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn generated_config_carries_symbols() {
        let ini = Config::default().to_ini();
        for sym in ["ε", "δ", "ρ̃₁", "η₂", "β", "h₀", "c₀", "τ", "m̃"] {
            assert!(ini.contains(sym), "{sym}");
        }
    }

    #[test]
    fn seed_override_applies_to_random_scenarios_only() {
        let mut c = Config::default();
        assert!(!c.set_seed(7));
        c.scenario = Scenario::Random { sigma: 0.1, seed: 1 };
        assert!(c.set_seed(7));
        assert_eq!(c.scenario, Scenario::Random { sigma: 0.1, seed: 7 });
    }
}
