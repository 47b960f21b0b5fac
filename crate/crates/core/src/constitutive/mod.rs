//! Constitutive functions of the surfactant model and their parameters.
//!
//! A [`ConstitutiveSet`] bundles the double-well potential `W`, the surfactant
//! couplings `f`, `g`, `G`, `h`, `d`, the mobilities and viscosity, and the
//! extended density law. [`ConstitutiveSet::from_params`] builds the closed-form
//! defaults; individual functions can be swapped out (for experiments and for
//! planting known violations) with the `with_*` builders. Every set can be
//! checked against the structural assumptions with [`audit_assumptions`].

mod audit;
mod well;

use std::fmt;
use std::sync::Arc;

use crate::error::{ChnsError, Result};

pub use audit::{
    audit_assumptions, pointwise_step_inequalities, AuditReport, ClauseResult, SamplingSpec,
    StepInequalityReport,
};
pub use well::{DoubleWell, NaiveWell, QuarticLinearWell};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type ScalarFn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Physical and structural parameters of the model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    /// Interface thickness parameter.
    pub epsilon: f64,
    /// Regularization strength; `0` drops the regularizing terms.
    pub delta: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub eta1: f64,
    pub eta2: f64,
    /// Amplitude of the default interfacial coupling `f`.
    pub beta: f64,
    /// Value of `h` (and `d`) below the active surfactant interval.
    pub h0: f64,
    pub q_min: f64,
    pub q_max: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            epsilon: 0.05,
            delta: 1e-3,
            rho1: 1.0,
            rho2: 2.0,
            eta1: 1.0,
            eta2: 1.0,
            beta: 1.0,
            h0: 1.0,
            q_min: 0.0,
            q_max: 1.0,
            c0: 0.5,
            c1: 0.5,
            c2: 2.0,
        }
    }
}

impl ModelParams {
    /// Checks the parameter invariants. The first violated one is reported by name.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epsilon", self.epsilon),
            ("rho1", self.rho1),
            ("rho2", self.rho2),
            ("eta1", self.eta1),
            ("eta2", self.eta2),
            ("beta", self.beta),
            ("h0", self.h0),
            ("c0", self.c0),
            ("c1", self.c1),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(ChnsError::invalid(
                    "positive_parameters",
                    format!("{name} must be finite and > 0 (got {value})"),
                ));
            }
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(ChnsError::invalid(
                "delta_nonnegative",
                format!("delta must be >= 0 (got {})", self.delta),
            ));
        }
        if !(self.c1 < self.c2) {
            return Err(ChnsError::invalid(
                "structural_constants",
                format!("need 0 < c1 < c2 (got c1={}, c2={})", self.c1, self.c2),
            ));
        }
        if !(self.q_min.is_finite() && self.q_max.is_finite() && self.q_min < self.q_max) {
            return Err(ChnsError::invalid(
                "q_interval",
                format!(
                    "need q_min < q_max (got q_min={}, q_max={})",
                    self.q_min, self.q_max
                ),
            ));
        }
        if !(self.rho2 < 3.0 * self.rho1 && self.rho1 < 3.0 * self.rho2) {
            return Err(ChnsError::invalid(
                "density_ratio",
                format!(
                    "the saturating density extension needs rho2 < 3 rho1 and rho1 < 3 rho2 (got {}, {})",
                    self.rho1, self.rho2
                ),
            ));
        }
        Ok(())
    }

    /// `(rho1 + rho2) / 2`
    pub fn rho_mean(&self) -> f64 {
        0.5 * (self.rho1 + self.rho2)
    }

    /// Lower bound `inf rho` of the extended density law.
    pub fn rho_infimum(&self) -> f64 {
        let half_jump = 0.5 * (self.rho2 - self.rho1);
        self.rho_mean() - 2.0 * half_jump.abs()
    }
}

/// Saturating C¹ extension of the identity outside `[-1, 1]`, bounded by 2.
pub fn saturate(phi: f64) -> f64 {
    let a = phi.abs();
    if a <= 1.0 {
        phi
    } else {
        phi.signum() * (2.0 - (1.0 - a).exp())
    }
}

pub fn saturate_prime(phi: f64) -> f64 {
    let a = phi.abs();
    if a <= 1.0 {
        1.0
    } else {
        (1.0 - a).exp()
    }
}

/// Closed-form default coupling functions on the active interval
/// `[q_min, q_max]`: `f` is a smoothstep of height `beta`, `h = h0 - ∫ f`,
/// `d = h + f q`.
#[derive(Clone, Copy, Debug)]
struct SmoothstepCoupling {
    beta: f64,
    h0: f64,
    q_min: f64,
    q_max: f64,
}

impl SmoothstepCoupling {
    fn width(&self) -> f64 {
        self.q_max - self.q_min
    }

    fn s(&self, q: f64) -> f64 {
        (q - self.q_min) / self.width()
    }

    fn f(&self, q: f64) -> f64 {
        if q <= self.q_min {
            0.0
        } else if q >= self.q_max {
            self.beta
        } else {
            let s = self.s(q);
            self.beta * s * s * (3.0 - 2.0 * s)
        }
    }

    fn fp(&self, q: f64) -> f64 {
        if q <= self.q_min || q >= self.q_max {
            0.0
        } else {
            let s = self.s(q);
            6.0 * self.beta * s * (1.0 - s) / self.width()
        }
    }

    fn h(&self, q: f64) -> f64 {
        let l = self.width();
        if q <= self.q_min {
            self.h0
        } else if q >= self.q_max {
            self.h0 - 0.5 * self.beta * l - self.beta * (q - self.q_max)
        } else {
            let s = self.s(q);
            let s3 = s * s * s;
            self.h0 - self.beta * l * (s3 - 0.5 * s3 * s)
        }
    }

    fn d(&self, q: f64) -> f64 {
        if q <= self.q_min {
            self.h0
        } else if q >= self.q_max {
            self.h0 - 0.5 * self.beta * self.width() + self.beta * self.q_max
        } else {
            self.h(q) + self.f(q) * q
        }
    }

    /// Smallest value of `d`: `d' = f' q` is negative on `(q_min, 0)` and
    /// positive on `(0, q_max)`.
    fn d_min(&self) -> f64 {
        self.d(0.0_f64.clamp(self.q_min, self.q_max))
    }
}

/// The model functions. Cheap to clone; all members are shared immutable closures.
#[derive(Clone)]
pub struct ConstitutiveSet {
    well: Arc<dyn DoubleWell>,
    f: ScalarFn,
    fp: ScalarFn,
    g: ScalarFn,
    gp: ScalarFn,
    big_g: ScalarFn,
    h: ScalarFn,
    hp: ScalarFn,
    d: ScalarFn,
    m: ScalarFn2,
    mtilde: ScalarFn,
    eta: ScalarFn,
    rho: ScalarFn,
    rhop: ScalarFn,
    /// True when `rho'` is known to be constant (matched densities).
    rho_affine: bool,
}

impl fmt::Debug for ConstitutiveSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConstitutiveSet")
            .field("rho_affine", &self.rho_affine)
            .finish_non_exhaustive()
    }
}

/// Builds the closed-form default set. See [`ConstitutiveSet::from_params`].
pub fn build_default_set(params: &ModelParams) -> Result<ConstitutiveSet> {
    ConstitutiveSet::from_params(params)
}

impl ConstitutiveSet {
    /// Closed-form defaults witnessing every structural assumption:
    /// quartic/linear double well, smoothstep `f`, `g(q) = q`, `G(q) = q²/2`,
    /// unit mobilities, phase-interpolated viscosity and the saturating density.
    pub fn from_params(params: &ModelParams) -> Result<Self> {
        params.validate()?;
        let coupling = SmoothstepCoupling {
            beta: params.beta,
            h0: params.h0,
            q_min: params.q_min,
            q_max: params.q_max,
        };
        let d_min = coupling.d_min();
        if !(d_min > params.c1) {
            return Err(ChnsError::invalid(
                "d_lower_bound",
                format!(
                    "min d = {d_min} must exceed c1 = {} (raise h0 or lower c1)",
                    params.c1
                ),
            ));
        }

        let (eta1, eta2) = (params.eta1, params.eta2);
        let rho_mean = params.rho_mean();
        let rho_half_jump = 0.5 * (params.rho2 - params.rho1);

        Ok(ConstitutiveSet {
            well: Arc::new(QuarticLinearWell),
            f: Arc::new(move |q| coupling.f(q)),
            fp: Arc::new(move |q| coupling.fp(q)),
            g: Arc::new(|q| q),
            gp: Arc::new(|_| 1.0),
            big_g: Arc::new(|q| 0.5 * q * q),
            h: Arc::new(move |q| coupling.h(q)),
            hp: Arc::new(move |q| -coupling.f(q)),
            d: Arc::new(move |q| coupling.d(q)),
            m: Arc::new(|_, _| 1.0),
            mtilde: Arc::new(|_| 1.0),
            eta: Arc::new(move |phi: f64| {
                0.5 * (eta1 + eta2) + 0.5 * (eta2 - eta1) * phi.clamp(-1.0, 1.0)
            }),
            rho: Arc::new(move |phi| rho_mean + rho_half_jump * saturate(phi)),
            rhop: Arc::new(move |phi| rho_half_jump * saturate_prime(phi)),
            rho_affine: rho_half_jump == 0.0,
        })
    }

    pub fn with_well(mut self, well: impl DoubleWell + 'static) -> Self {
        self.well = Arc::new(well);
        self
    }

    pub fn with_f(
        mut self,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        fp: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.f = Arc::new(f);
        self.fp = Arc::new(fp);
        self
    }

    pub fn with_g(
        mut self,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        gp: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.g = Arc::new(g);
        self.gp = Arc::new(gp);
        self
    }

    pub fn with_big_g(mut self, big_g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.big_g = Arc::new(big_g);
        self
    }

    pub fn with_h(
        mut self,
        h: impl Fn(f64) -> f64 + Send + Sync + 'static,
        hp: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.h = Arc::new(h);
        self.hp = Arc::new(hp);
        self
    }

    pub fn with_d(mut self, d: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.d = Arc::new(d);
        self
    }

    pub fn with_mobilities(
        mut self,
        m: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        mtilde: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.m = Arc::new(m);
        self.mtilde = Arc::new(mtilde);
        self
    }

    pub fn with_viscosity(mut self, eta: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.eta = Arc::new(eta);
        self
    }

    pub fn with_density(
        mut self,
        rho: impl Fn(f64) -> f64 + Send + Sync + 'static,
        rhop: impl Fn(f64) -> f64 + Send + Sync + 'static,
        affine: bool,
    ) -> Self {
        self.rho = Arc::new(rho);
        self.rhop = Arc::new(rhop);
        self.rho_affine = affine;
        self
    }

    pub fn well(&self) -> &dyn DoubleWell {
        self.well.as_ref()
    }

    #[inline]
    pub fn w(&self, phi: f64) -> f64 {
        self.well.value(phi)
    }
    #[inline]
    pub fn wp(&self, phi: f64) -> f64 {
        self.well.derivative(phi)
    }
    /// Divided difference of `W`; see [`divided_difference_h`].
    #[inline]
    pub fn big_h(&self, a: f64, b: f64) -> f64 {
        self.well.divided_difference(a, b)
    }
    #[inline]
    pub fn big_h_da(&self, a: f64, b: f64) -> f64 {
        self.well.divided_difference_da(a, b)
    }
    #[inline]
    pub fn f(&self, q: f64) -> f64 {
        (self.f)(q)
    }
    #[inline]
    pub fn fp(&self, q: f64) -> f64 {
        (self.fp)(q)
    }
    #[inline]
    pub fn g(&self, q: f64) -> f64 {
        (self.g)(q)
    }
    #[inline]
    pub fn gp(&self, q: f64) -> f64 {
        (self.gp)(q)
    }
    /// Bulk surfactant free energy `G`.
    #[inline]
    pub fn big_g(&self, q: f64) -> f64 {
        (self.big_g)(q)
    }
    #[inline]
    pub fn h(&self, q: f64) -> f64 {
        (self.h)(q)
    }
    #[inline]
    pub fn hp(&self, q: f64) -> f64 {
        (self.hp)(q)
    }
    #[inline]
    pub fn d(&self, q: f64) -> f64 {
        (self.d)(q)
    }
    #[inline]
    pub fn m(&self, phi: f64, q: f64) -> f64 {
        (self.m)(phi, q)
    }
    #[inline]
    pub fn mtilde(&self, phi: f64) -> f64 {
        (self.mtilde)(phi)
    }
    #[inline]
    pub fn eta(&self, phi: f64) -> f64 {
        (self.eta)(phi)
    }
    #[inline]
    pub fn rho(&self, phi: f64) -> f64 {
        (self.rho)(phi)
    }
    #[inline]
    pub fn rhop(&self, phi: f64) -> f64 {
        (self.rhop)(phi)
    }
    pub fn rho_is_affine(&self) -> bool {
        self.rho_affine
    }

    /// Surfactant density `f(q) W(phi) / eps + g(q)`.
    #[inline]
    pub fn surfactant_density(&self, q: f64, phi: f64, epsilon: f64) -> f64 {
        self.f(q) * self.w(phi) / epsilon + self.g(q)
    }

    /// Partial derivative of the surfactant density in `q`.
    #[inline]
    pub fn surfactant_density_dq(&self, q: f64, phi: f64, epsilon: f64) -> f64 {
        self.fp(q) * self.w(phi) / epsilon + self.gp(q)
    }
}

/// `H(a, b)` with `H(a, b) (a - b) = W(a) - W(b)` and `H(a, a) = W'(a)`.
pub fn divided_difference_h(a: f64, b: f64, set: &ConstitutiveSet) -> f64 {
    set.big_h(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults() -> ConstitutiveSet {
        ConstitutiveSet::from_params(&ModelParams::default()).unwrap()
    }

    #[test]
    fn smoothstep_values() {
        let set = defaults();
        assert_eq!(set.f(0.5), 0.5);
        assert_eq!(set.f(-1.0), 0.0);
        assert_eq!(set.f(2.0), 1.0);
        assert!((set.h(1.0) - 0.5).abs() < 1e-15);
        assert!((set.d(1.0) - 1.5).abs() < 1e-15);
        assert_eq!(set.d(-3.0), 1.0);
        assert_eq!(set.d(7.0), 1.5);
    }

    #[test]
    fn h_at_one_matches_quadrature() {
        // Composite Simpson on ∫_0^1 f, independent of the closed form.
        let set = defaults();
        let n = 2000;
        let dq = 1.0 / n as f64;
        let mut acc = set.f(0.0) + set.f(1.0);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * set.f(i as f64 * dq);
        }
        let integral = acc * dq / 3.0;
        assert!((integral - 0.5).abs() < 1e-12);
        assert!((set.h(1.0) - (1.0 - integral)).abs() < 1e-12);
    }

    #[test]
    fn legendre_relations_hold_at_samples() {
        let set = defaults();
        for i in 0..10_000 {
            let q = -2.0 + 5.0 * i as f64 / 9_999.0;
            let d = set.d(q);
            let tol = 1e-12 * (1.0 + d.abs());
            assert!((d - set.h(q) + set.hp(q) * q).abs() <= tol, "q={q}");
            assert!((set.hp(q) + set.f(q)).abs() <= tol, "q={q}");
            assert_eq!(set.big_g(q) * 0.0 + set.gp(q) * q, q);
        }
    }

    #[test]
    fn rejects_d_not_above_c1() {
        let params = ModelParams {
            h0: 0.4,
            ..ModelParams::default()
        };
        match ConstitutiveSet::from_params(&params) {
            Err(ChnsError::InvalidParameter { clause, .. }) => assert_eq!(clause, "d_lower_bound"),
            other => panic!("expected d_lower_bound rejection, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_interval_and_density_ratio() {
        let p = ModelParams {
            q_min: 1.0,
            q_max: 1.0,
            ..ModelParams::default()
        };
        assert!(matches!(
            p.validate(),
            Err(ChnsError::InvalidParameter { clause: "q_interval", .. })
        ));
        let p = ModelParams {
            rho2: 3.5,
            ..ModelParams::default()
        };
        assert!(matches!(
            p.validate(),
            Err(ChnsError::InvalidParameter { clause: "density_ratio", .. })
        ));
    }

    #[test]
    fn density_is_affine_inside_and_saturates_outside() {
        let params = ModelParams::default();
        let set = ConstitutiveSet::from_params(&params).unwrap();
        for i in 0..=200 {
            let phi = -1.0 + i as f64 / 100.0;
            let affine = 1.5 + 0.5 * phi;
            assert!((set.rho(phi) - affine).abs() <= 1e-15);
        }
        assert!(set.rho(-5.0) > params.rho_infimum());
        assert!(set.rho(-50.0) >= params.rho_infimum());
        assert!(set.rho(50.0) < params.rho_mean() + 1.0 + 1e-12);
        // C¹ across the junction
        let e = 1e-9;
        assert!((set.rhop(1.0 + e) - set.rhop(1.0 - e)).abs() < 1e-8);
        assert!((saturate(1.0 + e) - saturate(1.0 - e) - 2.0 * e).abs() < 1e-15);
    }

    #[test]
    fn general_interval_keeps_d_constant_outside() {
        let params = ModelParams {
            q_min: -0.5,
            q_max: 2.0,
            beta: 0.3,
            ..ModelParams::default()
        };
        let set = ConstitutiveSet::from_params(&params).unwrap();
        let lo = set.d(-0.5);
        let hi = set.d(2.0);
        assert!((set.d(-4.0) - lo).abs() < 1e-15);
        assert!((set.d(9.0) - hi).abs() < 1e-12);
        // interior continuity at both ends
        assert!((set.d(-0.5 + 1e-9) - lo).abs() < 1e-8);
        assert!((set.d(2.0 - 1e-9) - hi).abs() < 1e-8);
    }
}
