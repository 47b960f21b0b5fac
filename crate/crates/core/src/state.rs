//! Simulation state at one time level, observables, and initial scenarios.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constitutive::{ConstitutiveSet, ModelParams};
use crate::error::{ChnsError, Result};
use crate::linalg::{KrylovConfig, NeumannPoisson};
use crate::mesh::{Grid, Operators, ScalarField, VectorField};

/// One time level of the discrete system.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    /// Velocity on faces.
    pub v: VectorField,
    /// Pressure, mean-free.
    pub p: ScalarField,
    /// Order parameter.
    pub phi: ScalarField,
    /// Chemical potential of the order parameter.
    pub mu: ScalarField,
    /// Surfactant chemical potential.
    pub q: ScalarField,
    pub t: f64,
    pub k: u64,
}

impl State {
    pub fn grid(&self) -> &Grid {
        self.phi.grid()
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite()
            && self.p.is_finite()
            && self.phi.is_finite()
            && self.mu.is_finite()
            && self.q.is_finite()
    }

    /// Spatially uniform state at rest with the matching chemical potential.
    pub fn uniform(grid: &Grid, phi: f64, q: f64, set: &ConstitutiveSet, params: &ModelParams) -> Self {
        let phi = ScalarField::constant(grid, phi);
        let q = ScalarField::constant(grid, q);
        let ops = Operators::new(grid);
        let mu = consistent_mu(&ops, &phi, &q, set, params);
        State {
            v: VectorField::zeros(grid),
            p: ScalarField::zeros(grid),
            phi,
            mu,
            q,
            t: 0.0,
            k: 0,
        }
    }
}

/// `μ = -ε Δ_h φ + h(q) W'(φ) / ε`, evaluated term by term exactly as in the
/// step residual so that uniform states have a residual of exactly zero.
pub fn consistent_mu(
    ops: &Operators,
    phi: &ScalarField,
    q: &ScalarField,
    set: &ConstitutiveSet,
    params: &ModelParams,
) -> ScalarField {
    let eps = params.epsilon;
    let lap = ops.div(&ops.grad(phi.values()));
    let mu = phi
        .values()
        .iter()
        .zip(q.values())
        .zip(&lap)
        .map(|((&ph, &qv), &l)| set.h(qv) * set.big_h(ph, ph) / eps - eps * l)
        .collect();
    ScalarField::from_vec(phi.grid(), mu)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Observables {
    /// `∫ φ`
    pub phi_mass: f64,
    /// `∫ (f(q) W(φ) / ε + g(q))`
    pub surf_total: f64,
    /// `∫ ρ(φ) |v|² / 2`, with `ρ` averaged to faces.
    pub kinetic: f64,
    pub div_inf: f64,
    pub phi_range: (f64, f64),
    pub q_range: (f64, f64),
}

/// Midpoint-rule observables of a state.
pub fn observables(s: &State, set: &ConstitutiveSet, params: &ModelParams) -> Observables {
    let g = s.grid();
    let ops = Operators::new(g);
    observables_with(&ops, s, set, params)
}

pub fn observables_with(ops: &Operators, s: &State, set: &ConstitutiveSet, params: &ModelParams) -> Observables {
    let g = s.grid();
    let vol = g.cell_volume();
    let surf: f64 = s
        .q
        .values()
        .iter()
        .zip(s.phi.values())
        .map(|(&q, &phi)| set.surfactant_density(q, phi, params.epsilon))
        .sum();
    Observables {
        phi_mass: s.phi.integral(),
        surf_total: vol * surf,
        kinetic: kinetic_energy(ops, &s.phi, &s.v, set),
        div_inf: crate::linalg::norm_inf(&ops.div(s.v.values())),
        phi_range: s.phi.min_max(),
        q_range: s.q.min_max(),
    }
}

/// `Σ_faces V ρ̄ v² / 2` with `ρ̄` the face average of `ρ(φ)`.
pub fn kinetic_energy(ops: &Operators, phi: &ScalarField, v: &VectorField, set: &ConstitutiveSet) -> f64 {
    let rho: Vec<f64> = phi.values().iter().map(|&p| set.rho(p)).collect();
    let rho_f = ops.to_faces(&rho);
    let vol = ops.grid().cell_volume();
    0.5 * vol
        * rho_f
            .iter()
            .zip(v.values())
            .map(|(r, u)| r * u * u)
            .sum::<f64>()
}

/// Geometry of the droplet scenarios. Lengths are fractions of the domain size
/// where noted.
#[derive(Clone, Debug, PartialEq)]
pub struct DropletSpec {
    /// Droplet radius (absolute length).
    pub radius: f64,
    /// Droplet centre as a fraction of `(lx, ly)`.
    pub center: (f64, f64),
    /// Background surfactant potential.
    pub q_background: f64,
    /// Amplitude of the Gaussian surfactant blob.
    pub q_amplitude: f64,
    /// Width of the blob (absolute length).
    pub q_sigma: f64,
    /// Blob centre as a fraction of `(lx, ly)`.
    pub q_center: (f64, f64),
}

impl Default for DropletSpec {
    fn default() -> Self {
        DropletSpec {
            radius: 0.25,
            center: (0.5, 0.5),
            q_background: 0.3,
            q_amplitude: 0.4,
            q_sigma: 0.15,
            q_center: (0.6, 0.55),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Scenario {
    Uniform { phi: f64, q: f64 },
    Droplet(DropletSpec),
    /// Droplet in a divergence-free shear flow of the given peak speed.
    ShearDroplet { droplet: DropletSpec, amplitude: f64 },
    /// Small uniform-noise perturbation of amplitude `sigma` around `φ = 0`, `q = 0.5`.
    Random { sigma: f64, seed: u64 },
}

impl Scenario {
    pub fn id(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scenario::Uniform { .. } => f.write_str("uniform"),
            Scenario::Droplet(_) => f.write_str("droplet"),
            Scenario::ShearDroplet { .. } => f.write_str("shear-droplet"),
            Scenario::Random { sigma, seed } => write!(f, "random-seed({sigma}, {seed})"),
        }
    }
}

impl FromStr for Scenario {
    type Err = ChnsError;

    /// Parses a scenario id with default parameters: `uniform`, `droplet`,
    /// `shear-droplet`, or `random-seed(σ, seed)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "uniform" => Ok(Scenario::Uniform { phi: 0.3, q: 0.5 }),
            "droplet" => Ok(Scenario::Droplet(DropletSpec::default())),
            "shear-droplet" => Ok(Scenario::ShearDroplet {
                droplet: DropletSpec::default(),
                amplitude: 1.0,
            }),
            _ => {
                let inner = s
                    .strip_prefix("random-seed(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| ChnsError::Config(format!("unknown scenario '{s}'")))?;
                let mut parts = inner.split(',').map(str::trim);
                let sigma = parts.next().and_then(|p| p.parse::<f64>().ok());
                let seed = parts.next().and_then(|p| p.parse::<u64>().ok());
                match (sigma, seed, parts.next()) {
                    (Some(sigma), Some(seed), None) if sigma >= 0.0 => Ok(Scenario::Random { sigma, seed }),
                    _ => Err(ChnsError::Config(format!(
                        "malformed scenario '{s}' (expected random-seed(sigma, seed))"
                    ))),
                }
            }
        }
    }
}

fn droplet_fields(grid: &Grid, spec: &DropletSpec, params: &ModelParams) -> (ScalarField, ScalarField) {
    let (cx, cy) = (spec.center.0 * grid.lx(), spec.center.1 * grid.ly());
    let (qx, qy) = (spec.q_center.0 * grid.lx(), spec.q_center.1 * grid.ly());
    let width = std::f64::consts::SQRT_2 * params.epsilon;
    let phi = ScalarField::from_fn(grid, |x, y| {
        let r = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
        ((spec.radius - r) / width).tanh()
    });
    let q = ScalarField::from_fn(grid, |x, y| {
        let d2 = (x - qx).powi(2) + (y - qy).powi(2);
        spec.q_background + spec.q_amplitude * (-d2 / (2.0 * spec.q_sigma * spec.q_sigma)).exp()
    });
    (phi, q)
}

/// Discrete curl of a node streamfunction; exactly divergence-free when the
/// streamfunction vanishes on box walls.
pub fn velocity_from_streamfunction(grid: &Grid, psi: impl Fn(f64, f64) -> f64) -> VectorField {
    let node = |i: usize, j: usize| psi(i as f64 * grid.dx(), j as f64 * grid.dy());
    let mut u = VectorField::zeros(grid);
    let nxf = grid.n_xfaces();
    for f in 0..nxf {
        let (i, j) = grid.xface_coords(f);
        u.values_mut()[f] = (node(i, j + 1) - node(i, j)) / grid.dy();
    }
    for f in 0..grid.n_yfaces() {
        let (i, j) = grid.yface_coords(f);
        u.values_mut()[nxf + f] = -(node(i + 1, j) - node(i, j)) / grid.dx();
    }
    u
}

/// Removes the gradient part of `w`: `v = w - grad ψ` with `-div grad ψ = -div w`.
pub fn project_divergence_free(ops: &Operators, w: &VectorField) -> Result<VectorField> {
    let g = ops.grid();
    let poisson = NeumannPoisson::new(ops, &vec![1.0; g.n_faces()], &KrylovConfig::default())?;
    let rhs: Vec<f64> = ops.div(w.values()).iter().map(|d| -d).collect();
    let psi = poisson.solve_mean_free(&rhs)?;
    let gpsi = ops.grad(&psi);
    let v = w.values().iter().zip(&gpsi).map(|(a, b)| a - b).collect();
    Ok(VectorField::from_vec(g, v))
}

/// Builds the initial state of a scenario. The velocity is always projected onto
/// the discretely divergence-free space and `μ` is made consistent with `φ, q`.
pub fn initialize_scenario(
    scenario: &Scenario,
    grid: &Grid,
    set: &ConstitutiveSet,
    params: &ModelParams,
) -> Result<State> {
    let ops = Operators::new(grid);
    let (phi, q, w) = match scenario {
        Scenario::Uniform { phi, q } => (
            ScalarField::constant(grid, *phi),
            ScalarField::constant(grid, *q),
            VectorField::zeros(grid),
        ),
        Scenario::Droplet(spec) => {
            let (phi, q) = droplet_fields(grid, spec, params);
            (phi, q, VectorField::zeros(grid))
        }
        Scenario::ShearDroplet { droplet, amplitude } => {
            let (phi, q) = droplet_fields(grid, droplet, params);
            let (lx, ly) = (grid.lx(), grid.ly());
            let a = *amplitude;
            let w = if grid.is_periodic() {
                // u = a cos(2π y / ly)
                velocity_from_streamfunction(grid, |_, y| {
                    a * ly / (2.0 * std::f64::consts::PI) * (2.0 * std::f64::consts::PI * y / ly).sin()
                })
            } else {
                // u ∝ sin²(πx/lx) cos(2πy/ly): opposing streams, walls at rest
                velocity_from_streamfunction(grid, |x, y| {
                    let sx = (std::f64::consts::PI * x / lx).sin();
                    a * ly / (2.0 * std::f64::consts::PI)
                        * sx
                        * sx
                        * (2.0 * std::f64::consts::PI * y / ly).sin()
                })
            };
            (phi, q, w)
        }
        Scenario::Random { sigma, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let n = grid.n_cells();
            let sigma = *sigma;
            let mut draw = |c: f64| {
                (0..n)
                    .map(|_| c + if sigma > 0.0 { rng.gen_range(-sigma..=sigma) } else { 0.0 })
                    .collect::<Vec<f64>>()
            };
            let phi = ScalarField::from_vec(grid, draw(0.0));
            let q = ScalarField::from_vec(grid, draw(0.5));
            (phi, q, VectorField::zeros(grid))
        }
    };
    let v = if w.max_abs() > 0.0 {
        project_divergence_free(&ops, &w)?
    } else {
        w
    };
    let mu = consistent_mu(&ops, &phi, &q, set, params);
    let state = State {
        v,
        p: ScalarField::zeros(grid),
        phi,
        mu,
        q,
        t: 0.0,
        k: 0,
    };
    if !state.is_finite() {
        return Err(ChnsError::invalid("finite_state", "initial state has non-finite values"));
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BoundaryMode;

    fn defaults() -> (ConstitutiveSet, ModelParams) {
        let p = ModelParams::default();
        (ConstitutiveSet::from_params(&p).unwrap(), p)
    }

    #[test]
    fn observables_of_pure_phase_at_rest() {
        let (set, params) = defaults();
        let g = Grid::unit_square(8, BoundaryMode::Box);
        let s = State::uniform(&g, 1.0, 0.0, &set, &params);
        let o = observables(&s, &set, &params);
        assert!((o.phi_mass - 1.0).abs() < 1e-14);
        assert_eq!(o.surf_total, 0.0);
        assert_eq!(o.kinetic, 0.0);
        let s = State::uniform(&g, 0.0, 0.0, &set, &params);
        let o = observables(&s, &set, &params);
        assert_eq!((o.surf_total, o.phi_mass), (0.0, 0.0));
    }

    #[test]
    fn kinetic_energy_of_uniform_stream() {
        let (set, params) = defaults();
        let g = Grid::unit_square(8, BoundaryMode::Periodic);
        let mut s = State::uniform(&g, 0.0, 0.0, &set, &params);
        s.v = VectorField::from_fn(&g, |_, _| 1.0, |_, _| 0.0);
        let o = observables(&s, &set, &params);
        assert!((o.kinetic - 0.75).abs() < 1e-14);
        assert_eq!(o.div_inf, 0.0);
    }

    #[test]
    fn uniform_scenario_is_constant() {
        let (set, params) = defaults();
        let g = Grid::unit_square(6, BoundaryMode::Box);
        let s = initialize_scenario(&"uniform".parse().unwrap(), &g, &set, &params).unwrap();
        assert!(s.phi.values().iter().all(|&v| v == 0.3));
        assert!(s.q.values().iter().all(|&v| v == 0.5));
        let mu0 = s.mu.values()[0];
        assert!(s.mu.values().iter().all(|&v| v == mu0));
    }

    #[test]
    fn droplet_mass_matches_profile_quadrature() {
        let (set, params) = defaults();
        let g = Grid::unit_square(32, BoundaryMode::Box);
        let s = initialize_scenario(&"droplet".parse().unwrap(), &g, &set, &params).unwrap();
        let w = std::f64::consts::SQRT_2 * params.epsilon;
        let mut want = 0.0;
        for j in 0..32 {
            for i in 0..32 {
                let (x, y) = g.cell_center(i, j);
                let r = ((x - 0.5).powi(2) + (y - 0.5).powi(2)).sqrt();
                want += ((0.25 - r) / w).tanh();
            }
        }
        want *= g.cell_volume();
        assert_eq!(s.phi.integral(), want);
        let again = initialize_scenario(&"droplet".parse().unwrap(), &g, &set, &params).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn all_scenarios_are_divergence_free() {
        let (set, params) = defaults();
        for bc in [BoundaryMode::Box, BoundaryMode::Periodic] {
            let g = Grid::unit_square(16, bc);
            for id in ["uniform", "droplet", "shear-droplet", "random-seed(0.05, 3)"] {
                let s = initialize_scenario(&id.parse().unwrap(), &g, &set, &params).unwrap();
                let o = observables(&s, &set, &params);
                assert!(o.div_inf <= 1e-12, "{id} {bc}: {}", o.div_inf);
            }
        }
        let g = Grid::unit_square(16, BoundaryMode::Box);
        let s = initialize_scenario(&"shear-droplet".parse().unwrap(), &g, &set, &params).unwrap();
        assert!(s.v.max_abs() > 0.1);
    }

    #[test]
    fn random_scenario_is_seeded() {
        let (set, params) = defaults();
        let g = Grid::unit_square(8, BoundaryMode::Box);
        let a = initialize_scenario(&"random-seed(0.1, 9)".parse().unwrap(), &g, &set, &params).unwrap();
        let b = initialize_scenario(&"random-seed(0.1, 9)".parse().unwrap(), &g, &set, &params).unwrap();
        let c = initialize_scenario(&"random-seed(0.1, 10)".parse().unwrap(), &g, &set, &params).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.phi, c.phi);
        assert!(a.phi.max_abs() <= 0.1);
    }

    #[test]
    fn unknown_scenarios_are_rejected() {
        assert!("vortex".parse::<Scenario>().is_err());
        assert!("random-seed(0.1)".parse::<Scenario>().is_err());
        assert!("random-seed(-1, 2)".parse::<Scenario>().is_err());
    }
}
