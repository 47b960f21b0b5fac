//! Sampled verification of the structural assumptions on a [`ConstitutiveSet`].

use std::fmt::Write as _;

use super::{ConstitutiveSet, ModelParams};

/// Sample windows for the audit. Samples are uniform and inclusive of both ends.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingSpec {
    pub q_lo: f64,
    pub q_hi: f64,
    pub n_q: usize,
    pub phi_lo: f64,
    pub phi_hi: f64,
    pub n_phi: usize,
}

impl SamplingSpec {
    /// Covers `[q_min - L, q_max + L]` (with `L = q_max - q_min`, at least 1) and
    /// `φ ∈ [-3, 3]`, with 2001 points each.
    pub fn for_params(params: &ModelParams) -> Self {
        let pad = (params.q_max - params.q_min).max(1.0);
        SamplingSpec {
            q_lo: params.q_min - pad,
            q_hi: params.q_max + pad,
            n_q: 2001,
            phi_lo: -3.0,
            phi_hi: 3.0,
            n_phi: 2001,
        }
    }

    fn qs(&self) -> Vec<f64> {
        linspace(self.q_lo, self.q_hi, self.n_q)
    }

    fn phis(&self) -> Vec<f64> {
        linspace(self.phi_lo, self.phi_hi, self.n_phi)
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + step * i as f64 })
        .collect()
}

/// Outcome of one assumption clause.
///
/// `margin` is the worst signed distance from violation (negative means the
/// clause fails there). For the growth clauses, which cannot be falsified on a
/// finite window, `margin` holds the fitted constant instead.
#[derive(Clone, Debug, PartialEq)]
pub struct ClauseResult {
    pub id: &'static str,
    pub pass: bool,
    pub witness_q: Option<f64>,
    pub witness_phi: Option<f64>,
    pub margin: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditReport {
    pub clauses: Vec<ClauseResult>,
    pub sampling: SamplingSpec,
    pub warnings: Vec<String>,
}

pub const CLAUSE_IDS: [&str; 17] = [
    "structural_constants",
    "f_monotone",
    "d_const_outside",
    "legendre",
    "d_lower_bound",
    "h_concave",
    "G_strictly_convex",
    "G_prime_c0_sign",
    "G_prime_relation",
    "G_growth",
    "g_strongly_monotone",
    "W_nonnegative",
    "W_growth",
    "W_prime_sublinear",
    "mobility_bounds",
    "density_affine",
    "density_bounds",
];

impl AuditReport {
    pub fn all_passed(&self) -> bool {
        self.clauses.iter().all(|c| c.pass)
    }

    pub fn clause(&self, id: &str) -> Option<&ClauseResult> {
        self.clauses.iter().find(|c| c.id == id)
    }

    pub fn failed(&self) -> impl Iterator<Item = &ClauseResult> {
        self.clauses.iter().filter(|c| !c.pass)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let s = &self.sampling;
        let _ = writeln!(
            out,
            "constitutive audit: q in [{}, {}] ({} pts), phi in [{}, {}] ({} pts)",
            s.q_lo, s.q_hi, s.n_q, s.phi_lo, s.phi_hi, s.n_phi
        );
        for c in &self.clauses {
            let _ = writeln!(
                out,
                "  {:<22} {}  margin={:.6e}  {}",
                c.id,
                if c.pass { "PASS" } else { "FAIL" },
                c.margin,
                c.detail
            );
        }
        for w in &self.warnings {
            let _ = writeln!(out, "  warning: {w}");
        }
        let _ = writeln!(
            out,
            "{}",
            if self.all_passed() {
                "all clauses pass"
            } else {
                "AUDIT FAILED"
            }
        );
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("clause,pass,witness_q,witness_phi,margin\n");
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for c in &self.clauses {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                c.id,
                c.pass,
                opt(c.witness_q),
                opt(c.witness_phi),
                c.margin
            );
        }
        out
    }
}

/// Tracks the worst (smallest) margin seen and where.
#[derive(Clone, Copy)]
struct Worst {
    margin: f64,
    q: Option<f64>,
    phi: Option<f64>,
}

impl Worst {
    fn new() -> Self {
        Worst {
            margin: f64::INFINITY,
            q: None,
            phi: None,
        }
    }

    fn see(&mut self, margin: f64, q: Option<f64>, phi: Option<f64>) {
        // NaN margins count as the worst possible outcome.
        let m = if margin.is_nan() {
            f64::NEG_INFINITY
        } else {
            margin
        };
        if m < self.margin {
            self.margin = m;
            self.q = q;
            self.phi = phi;
        }
    }

    fn finish(self, id: &'static str, detail: String) -> ClauseResult {
        ClauseResult {
            id,
            pass: self.margin >= 0.0,
            witness_q: self.q,
            witness_phi: self.phi,
            margin: if self.margin.is_finite() || self.margin < 0.0 {
                self.margin
            } else {
                0.0
            },
            detail,
        }
    }
}

const FD_REL_TOL: f64 = 1e-6;

fn fd_step(x: f64) -> f64 {
    1e-7 * x.abs().max(1.0)
}

fn central(fun: impl Fn(f64) -> f64, x: f64) -> f64 {
    let s = fd_step(x);
    (fun(x + s) - fun(x - s)) / (2.0 * s)
}

fn second_difference(fun: impl Fn(f64) -> f64, x: f64) -> f64 {
    let s = 1e-4 * x.abs().max(1.0);
    (fun(x + s) - 2.0 * fun(x) + fun(x - s)) / (s * s)
}

/// Distance of a supplied derivative from its finite-difference estimate,
/// as a margin against the relative consistency tolerance.
fn fd_margin(supplied: f64, fd: f64) -> f64 {
    FD_REL_TOL * (1.0 + supplied.abs()) - (supplied - fd).abs()
}

/// Evaluates every clause of the structural assumptions on the sample windows.
///
/// Never stops at the first failure; the report lists each clause exactly once.
/// Pure and deterministic: identical inputs produce identical reports.
pub fn audit_assumptions(
    set: &ConstitutiveSet,
    params: &ModelParams,
    sampling: &SamplingSpec,
) -> AuditReport {
    let qs = sampling.qs();
    let phis = sampling.phis();
    let mut clauses = Vec::with_capacity(CLAUSE_IDS.len());
    let mut warnings = Vec::new();
    let (c0, c1, c2) = (params.c0, params.c1, params.c2);

    // structural_constants
    {
        let mut w = Worst::new();
        w.see(c0, None, None);
        w.see(c1, None, None);
        w.see(c2 - c1, None, None);
        w.see(params.q_max - params.q_min, None, None);
        clauses.push(w.finish(
            "structural_constants",
            format!("c0={c0}, c1={c1}, c2={c2}, q_min={}, q_max={}", params.q_min, params.q_max),
        ));
    }

    // f_monotone: supplied f' >= 0, sampled increments >= 0, f' consistent with f.
    {
        let mut w = Worst::new();
        for (i, &q) in qs.iter().enumerate() {
            let fp = set.fp(q);
            w.see(fp, Some(q), None);
            w.see(fd_margin(fp, central(|x| set.f(x), q)), Some(q), None);
            if i + 1 < qs.len() {
                let inc = set.f(qs[i + 1]) - set.f(q);
                w.see(inc + 1e-14 * (1.0 + set.f(q).abs()), Some(q), None);
            }
        }
        clauses.push(w.finish("f_monotone", "f' >= 0 and f nondecreasing on samples".into()));
    }

    // d_const_outside: f' = 0 and d constant outside [q_min, q_max].
    {
        let mut w = Worst::new();
        let d_lo = set.d(params.q_min);
        let d_hi = set.d(params.q_max);
        for &q in &qs {
            if q < params.q_min || q > params.q_max {
                let anchor = if q < params.q_min { d_lo } else { d_hi };
                let tol = 1e-12 * (1.0 + anchor.abs());
                w.see(tol - set.fp(q).abs(), Some(q), None);
                w.see(tol - (set.d(q) - anchor).abs(), Some(q), None);
            }
        }
        clauses.push(w.finish(
            "d_const_outside",
            format!("d(q_min)={d_lo}, d(q_max)={d_hi}"),
        ));
    }

    // legendre: h' = -f, d = h - h'q, and f'q = d' (the latter by finite differences).
    {
        let mut w = Worst::new();
        for &q in &qs {
            let d = set.d(q);
            let tol = 1e-12 * (1.0 + d.abs());
            w.see(tol - (set.hp(q) + set.f(q)).abs(), Some(q), None);
            w.see(tol - (d - set.h(q) + set.hp(q) * q).abs(), Some(q), None);
            let dprime = central(|x| set.d(x), q);
            w.see(fd_margin(set.fp(q) * q, dprime), Some(q), None);
        }
        clauses.push(w.finish("legendre", "h' = -f, d = h - h'q, d' = f'q".into()));
    }

    // d_lower_bound
    {
        let mut w = Worst::new();
        for &q in &qs {
            let m = set.d(q) - c1;
            // strict inequality: a zero margin is a failure
            w.see(if m > 0.0 { m } else { m.min(-f64::MIN_POSITIVE) }, Some(q), None);
        }
        clauses.push(w.finish("d_lower_bound", format!("d(q) > c1 = {c1}")));
    }

    // h_concave: h' nonincreasing, second differences <= 0, h' consistent with h.
    {
        let mut w = Worst::new();
        for (i, &q) in qs.iter().enumerate() {
            let hp = set.hp(q);
            let h = set.h(q);
            w.see(fd_margin(hp, central(|x| set.h(x), q)), Some(q), None);
            w.see(FD_REL_TOL * (1.0 + h.abs()) - second_difference(|x| set.h(x), q), Some(q), None);
            if i + 1 < qs.len() {
                w.see(hp - set.hp(qs[i + 1]) + 1e-14 * (1.0 + hp.abs()), Some(q), None);
            }
            if (params.q_min..=params.q_max).contains(&q) && h < 0.0 && warnings.is_empty() {
                warnings.push(format!(
                    "h({q}) = {h} < 0 inside the configured surfactant interval"
                ));
            }
        }
        clauses.push(w.finish("h_concave", "h' nonincreasing, h'' <= 0".into()));
    }

    // G_strictly_convex: G'(q) = g'(q) q strictly increasing; positive second differences.
    {
        let mut w = Worst::new();
        for (i, &q) in qs.iter().enumerate() {
            w.see(second_difference(|x| set.big_g(x), q), Some(q), None);
            if i + 1 < qs.len() {
                let q1 = qs[i + 1];
                let inc = set.gp(q1) * q1 - set.gp(q) * q;
                w.see(if inc > 0.0 { inc } else { inc.min(-f64::MIN_POSITIVE) }, Some(q), None);
            }
        }
        clauses.push(w.finish("G_strictly_convex", "G'' > 0 on samples".into()));
    }

    // G_prime_c0_sign: G'(0) = 0 and G'(q)/q > c0 away from 0.
    {
        let mut w = Worst::new();
        let gp0 = central(|x| set.big_g(x), 0.0);
        w.see(FD_REL_TOL - gp0.abs(), Some(0.0), None);
        for &q in &qs {
            if q.abs() > 1e-8 {
                let ratio = central(|x| set.big_g(x), q) / q;
                w.see(ratio - c0 - FD_REL_TOL * (1.0 + ratio.abs()), Some(q), None);
            }
        }
        clauses.push(w.finish("G_prime_c0_sign", format!("G'(q)/q > c0 = {c0}")));
    }

    // G_prime_relation: G' = g' q (finite-difference G' against the supplied g').
    {
        let mut w = Worst::new();
        for &q in &qs {
            w.see(fd_margin(set.gp(q) * q, central(|x| set.big_g(x), q)), Some(q), None);
            w.see(fd_margin(set.gp(q), central(|x| set.g(x), q)), Some(q), None);
        }
        clauses.push(w.finish("G_prime_relation", "G'(q) = g'(q) q".into()));
    }

    // G_growth: fitted C with |G| <= C (q^2 + 1) and |G'| <= C (|q| + 1).
    {
        let mut c = 0.0f64;
        for &q in &qs {
            c = c.max(set.big_g(q).abs() / (q * q + 1.0));
            c = c.max((set.gp(q) * q).abs() / (q.abs() + 1.0));
        }
        clauses.push(ClauseResult {
            id: "G_growth",
            pass: c.is_finite(),
            witness_q: None,
            witness_phi: None,
            margin: c,
            detail: format!("fitted C = {c} on the sample window"),
        });
    }

    // g_strongly_monotone: (g(a) - g(b)) / (a - b) >= c0, on neighbouring samples
    // and on mirrored pairs straddling 0.
    {
        let mut w = Worst::new();
        let quotient = |a: f64, b: f64| (set.g(a) - set.g(b)) / (a - b);
        for (i, &q) in qs.iter().enumerate() {
            if i + 1 < qs.len() {
                w.see(quotient(qs[i + 1], q) - c0, Some(q), None);
            }
            if q > 0.0 {
                w.see(quotient(q, -q) - c0, Some(q), None);
                w.see(quotient(q, 0.0) - c0, Some(q), None);
            }
        }
        clauses.push(w.finish("g_strongly_monotone", format!("(g(a)-g(b))/(a-b) >= c0 = {c0}")));
    }

    // W_nonnegative
    {
        let mut w = Worst::new();
        for &phi in &phis {
            w.see(set.w(phi), None, Some(phi));
        }
        clauses.push(w.finish("W_nonnegative", "W >= 0".into()));
    }

    // W_growth: fit C1 for the cubic upper bounds and (C2, C3) for W >= C2|a| - C3.
    {
        let mut c_up = 0.0f64;
        for &phi in &phis {
            let a = phi.abs();
            c_up = c_up.max(set.w(phi).abs() / (a * a * a + 1.0));
            c_up = c_up.max(set.wp(phi).abs() / (a * a + 1.0));
        }
        let reach = sampling.phi_lo.abs().max(sampling.phi_hi.abs());
        let mut slope = f64::INFINITY;
        let mut witness = None;
        for &phi in &phis {
            if phi.abs() >= 0.5 * reach && phi != 0.0 {
                let s = set.w(phi) / phi.abs();
                if s < slope {
                    slope = s;
                    witness = Some(phi);
                }
            }
        }
        let c2_fit = 0.5 * slope;
        let mut c3_fit = 0.0f64;
        for &phi in &phis {
            c3_fit = c3_fit.max(c2_fit * phi.abs() - set.w(phi));
        }
        clauses.push(ClauseResult {
            id: "W_growth",
            pass: c_up.is_finite() && c2_fit > 0.0 && c3_fit.is_finite(),
            witness_q: None,
            witness_phi: witness,
            margin: c2_fit,
            detail: format!("fitted C1={c_up}, C2={c2_fit}, C3={c3_fit} on the sample window"),
        });
    }

    // W_prime_sublinear: only needed when rho' is not constant. The exponent s of
    // |W'| ~ |a|^s is fitted on the outer quarter of the window and must stay < 1.
    {
        let reach = sampling.phi_lo.abs().max(sampling.phi_hi.abs());
        let (a0, a1) = (0.75 * reach, reach);
        let tail = |a: f64| {
            0.5 * (set.wp(a).abs() + set.wp(-a).abs())
        };
        let (w0, w1) = (tail(a0).max(1e-300), tail(a1).max(1e-300));
        let s = ((w1 / w0).ln() / (a1 / a0).ln()).max(0.0);
        let needed = !set.rho_is_affine();
        clauses.push(ClauseResult {
            id: "W_prime_sublinear",
            pass: !needed || s < 1.0,
            witness_q: None,
            witness_phi: Some(a1),
            margin: 1.0 - s,
            detail: if needed {
                format!("fitted tail exponent s = {s} (need s < 1)")
            } else {
                format!("fitted tail exponent s = {s}; not required for affine rho")
            },
        });
    }

    // mobility_bounds: c1 <= m, m~, eta <= c2.
    {
        let mut w = Worst::new();
        let stride = (qs.len() / 201).max(1);
        for &phi in &phis {
            let mt = set.mtilde(phi);
            let eta = set.eta(phi);
            for v in [mt, eta] {
                w.see(v - c1, None, Some(phi));
                w.see(c2 - v, None, Some(phi));
            }
            for &q in qs.iter().step_by(stride) {
                let m = set.m(phi, q);
                w.see(m - c1, Some(q), Some(phi));
                w.see(c2 - m, Some(q), Some(phi));
            }
        }
        clauses.push(w.finish("mobility_bounds", format!("c1 = {c1} <= m, m~, eta <= c2 = {c2}")));
    }

    // density_affine: exact affine law on [-1, 1].
    {
        let mut w = Worst::new();
        let mean = params.rho_mean();
        let half = 0.5 * (params.rho2 - params.rho1);
        for &phi in &phis {
            if (-1.0..=1.0).contains(&phi) {
                let target = mean + half * phi;
                w.see(1e-14 * (1.0 + target.abs()) - (set.rho(phi) - target).abs(), None, Some(phi));
            }
        }
        clauses.push(w.finish("density_affine", "rho affine in phi on [-1, 1]".into()));
    }

    // density_bounds: inf rho > 0, rho' consistent with rho, fitted bounds reported.
    {
        let mut w = Worst::new();
        let mut rho_max = 0.0f64;
        let mut rhop_max = 0.0f64;
        let mut probe = phis.clone();
        probe.extend([-1e3, -50.0, 50.0, 1e3]);
        for &phi in &probe {
            let r = set.rho(phi);
            w.see(r, None, Some(phi));
            rho_max = rho_max.max(r.abs());
            rhop_max = rhop_max.max(set.rhop(phi).abs());
            w.see(fd_margin(set.rhop(phi), central(|x| set.rho(x), phi)), None, Some(phi));
        }
        let r = w.finish(
            "density_bounds",
            format!("sup|rho| = {rho_max}, sup|rho'| = {rhop_max}"),
        );
        clauses.push(ClauseResult {
            pass: r.pass && rho_max.is_finite() && rhop_max.is_finite(),
            ..r
        });
    }

    debug_assert_eq!(clauses.len(), CLAUSE_IDS.len());
    AuditReport {
        clauses,
        sampling: sampling.clone(),
        warnings,
    }
}

/// Minimum slack of the two pointwise inequalities used in the energy estimate,
/// over a list of `(q_old, q_new)` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct StepInequalityReport {
    pub pairs: usize,
    /// `min [(f(q1) - f(q0)) q1 - (f(q1) q1 - f(q0) q0 + h(q1) - h(q0))]`
    pub min_slack_f: f64,
    pub witness_f: Option<(f64, f64)>,
    pub violations_f: usize,
    /// `min [(g(q1) - g(q0)) q1 - (G(q1) - G(q0))]`
    pub min_slack_g: f64,
    pub witness_g: Option<(f64, f64)>,
    pub violations_g: usize,
}

impl StepInequalityReport {
    pub fn passed(&self) -> bool {
        self.violations_f == 0 && self.violations_g == 0
    }
}

pub fn pointwise_step_inequalities(
    set: &ConstitutiveSet,
    pairs: &[(f64, f64)],
) -> StepInequalityReport {
    let mut report = StepInequalityReport {
        pairs: pairs.len(),
        min_slack_f: f64::INFINITY,
        witness_f: None,
        violations_f: 0,
        min_slack_g: f64::INFINITY,
        witness_g: None,
        violations_g: 0,
    };
    for &(q0, q1) in pairs {
        let (f0, f1) = (set.f(q0), set.f(q1));
        let (h0, h1) = (set.h(q0), set.h(q1));
        let lhs = (f1 - f0) * q1;
        let rhs = f1 * q1 - f0 * q0 + h1 - h0;
        let slack_f = lhs - rhs;
        let scale_f = 1.0 + lhs.abs() + (f1 * q1).abs() + (f0 * q0).abs() + h1.abs() + h0.abs();
        if slack_f < report.min_slack_f || slack_f.is_nan() {
            report.min_slack_f = slack_f;
            report.witness_f = Some((q0, q1));
        }
        if !(slack_f >= -1e-12 * scale_f) {
            report.violations_f += 1;
        }

        let (g0, g1) = (set.g(q0), set.g(q1));
        let (bg0, bg1) = (set.big_g(q0), set.big_g(q1));
        let lhs = (g1 - g0) * q1;
        let slack_g = lhs - (bg1 - bg0);
        let scale_g = 1.0 + lhs.abs() + bg1.abs() + bg0.abs();
        if slack_g < report.min_slack_g || slack_g.is_nan() {
            report.min_slack_g = slack_g;
            report.witness_g = Some((q0, q1));
        }
        if !(slack_g >= -1e-12 * scale_g) {
            report.violations_g += 1;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (ConstitutiveSet, ModelParams, SamplingSpec) {
        let params = ModelParams::default();
        let set = ConstitutiveSet::from_params(&params).unwrap();
        let sampling = SamplingSpec::for_params(&params);
        (set, params, sampling)
    }

    #[test]
    fn default_set_passes_every_clause_once() {
        let (set, params, sampling) = setup();
        let report = audit_assumptions(&set, &params, &sampling);
        assert!(report.all_passed(), "{}", report.to_text());
        let ids: Vec<_> = report.clauses.iter().map(|c| c.id).collect();
        assert_eq!(ids, CLAUSE_IDS.to_vec());
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn cubic_g_breaks_strong_monotonicity() {
        let (set, params, sampling) = setup();
        let set = set.with_g(|q| q * q * q, |q| 3.0 * q * q);
        let report = audit_assumptions(&set, &params, &sampling);
        let clause = report.clause("g_strongly_monotone").unwrap();
        assert!(!clause.pass);
        assert!(clause.witness_q.unwrap().abs() < 0.5);
    }

    #[test]
    fn convex_h_breaks_concavity() {
        let (set, params, sampling) = setup();
        let set = set.with_h(|q| q * q, |q| 2.0 * q);
        let report = audit_assumptions(&set, &params, &sampling);
        assert!(!report.clause("h_concave").unwrap().pass);
        assert!(!report.all_passed());
    }

    #[test]
    fn audit_is_bitwise_reproducible() {
        let (set, params, sampling) = setup();
        let a = audit_assumptions(&set, &params, &sampling);
        let b = audit_assumptions(&set, &params, &sampling);
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a, b);
    }

    #[test]
    fn mobility_outside_bounds_is_reported() {
        let (set, params, sampling) = setup();
        let set = set.with_viscosity(|phi| 1.0 + phi * phi);
        let report = audit_assumptions(&set, &params, &sampling);
        let c = report.clause("mobility_bounds").unwrap();
        assert!(!c.pass);
        assert!(c.witness_phi.unwrap().abs() > 1.0);
    }

    #[test]
    fn csv_has_one_row_per_clause() {
        let (set, params, sampling) = setup();
        let csv = audit_assumptions(&set, &params, &sampling).to_csv();
        assert_eq!(csv.lines().count(), 1 + CLAUSE_IDS.len());
        assert!(csv.starts_with("clause,pass,witness_q,witness_phi,margin"));
    }

    #[test]
    fn identical_pairs_have_zero_slack() {
        let (set, ..) = setup();
        let pairs: Vec<_> = [-2.0, -0.3, 0.0, 0.4, 1.0, 2.7].iter().map(|&q| (q, q)).collect();
        let r = pointwise_step_inequalities(&set, &pairs);
        assert_eq!(r.min_slack_f, 0.0);
        assert_eq!(r.min_slack_g, 0.0);
    }

    #[test]
    fn random_pairs_have_no_violations() {
        let (set, ..) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pairs: Vec<_> = (0..100_000)
            .map(|_| (rng.gen_range(-2.0..3.0), rng.gen_range(-2.0..3.0)))
            .collect();
        let r = pointwise_step_inequalities(&set, &pairs);
        assert!(r.passed(), "{r:?}");
        assert!(r.min_slack_f >= -1e-12 && r.min_slack_g >= -1e-12);
    }

    #[test]
    fn convex_h_yields_negative_slack() {
        let (set, ..) = setup();
        let set = set.with_h(|q| q * q, |q| 2.0 * q);
        let r = pointwise_step_inequalities(&set, &[(0.0, 1.0)]);
        assert_eq!(r.min_slack_f, -1.0);
        assert_eq!(r.violations_f, 1);
        assert_eq!(r.witness_f, Some((0.0, 1.0)));
    }
}
