//! Versioned run configuration and the registry of initial conditions.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ScenarioError;
use crate::diagnostics::{IdentityId, Stencil};
use crate::dtn::Depth;
use crate::dynamics::{DynamicsOptions, SpectralFilter, DEFAULT_CFL, DEFAULT_FILTER_STRENGTH};
use crate::inequality_lab::random_field;
use crate::spectral::{PeriodicGrid, SurfaceField};
use crate::standing_waves::StandingWaveExpansion;

pub const SCHEMA_VERSION: u32 = 1;

/// Relative tolerance on `output_stride / dt` being an integer.
const STRIDE_TOLERANCE: f64 = 1e-9;

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

fn default_residual_tolerance() -> f64 {
    1e-4
}

fn default_absolute_tolerance() -> f64 {
    1e-10
}

fn default_bound_tolerance() -> f64 {
    1e-8
}

fn default_energy_tolerance() -> f64 {
    1e-6
}

fn default_cfl() -> f64 {
    DEFAULT_CFL
}

fn default_strength() -> f64 {
    DEFAULT_FILTER_STRENGTH
}

/// Spectral filter selection.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FilterConfig {
    #[default]
    Off,
    Exponential {
        #[serde(default = "default_strength")]
        strength: f64,
    },
}

/// One Fourier mode of a prescribed spectrum: `η += a cos kx + b sin kx`, likewise `ψ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralMode {
    pub k: usize,
    #[serde(default)]
    pub eta_cos: f64,
    #[serde(default)]
    pub eta_sin: f64,
    #[serde(default)]
    pub psi_cos: f64,
    #[serde(default)]
    pub psi_sin: f64,
}

/// Registered initial conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// `η = 0`, `ψ = 0`.
    Rest,
    /// `η = ε cos kx`, `ψ = 0`: a linear standing wave released from maximal elevation.
    LinearStanding { epsilon: f64, k: usize },
    /// Third-order deep-water standing wave at `t = 0`, in physical units (`g = 1`).
    StandingWaveExpansion {
        epsilon: f64,
        #[serde(default)]
        a13: f64,
        #[serde(default)]
        a33: f64,
        #[serde(default)]
        b13: f64,
        #[serde(default)]
        b33: f64,
    },
    /// Second-order Stokes travelling wave of amplitude `ε` and wavenumber `k`.
    Stokes { epsilon: f64, k: usize },
    /// Explicit list of Fourier modes.
    Spectrum { modes: Vec<SpectralMode> },
    /// Random `|ξ|^{-2}` surface from the run seed, rescaled to `slope`; `ψ = 0`.
    RandomSurface { max_mode: usize, slope: f64 },
    /// `η = 0`, `ψ = cos kx`: the initial datum of the growth experiments.
    FlatPotential { k: usize },
}

/// Names and one-line descriptions for `--help`.
pub const INITIAL_CONDITIONS: &[(&str, &str)] = &[
    ("rest", "eta = 0, psi = 0; every residual vanishes"),
    ("linear_standing", "eta = epsilon cos(kx), psi = 0; linear standing-wave benchmark"),
    (
        "standing_wave_expansion",
        "third-order deep-water standing wave (epsilon <= 0.3, free coefficients a13 a33 b13 b33); needs g = 1, infinite depth",
    ),
    ("stokes", "second-order Stokes travelling wave (epsilon, k); needs g > 0"),
    ("spectrum", "explicit modes [{k, eta_cos, eta_sin, psi_cos, psi_sin}]"),
    ("random_surface", "seeded |k|^-2 surface rescaled to max slope `slope`, psi = 0"),
    ("flat_potential", "eta = 0, psi = cos(kx); Rayleigh-Taylor growth datum"),
];

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub n_x: usize,
    pub n_z: usize,
    pub depth: Depth,
    pub g: f64,
    /// RK4 step.
    pub dt: f64,
    pub t_end: f64,
    /// Time between recorded states; an integer multiple of `dt`.
    pub output_stride: f64,
    pub initial_condition: InitialCondition,
    #[serde(default)]
    pub filter: FilterConfig,
    /// Identities to evaluate; `None` selects every one applicable to the run.
    #[serde(default)]
    pub identity_set: Option<Vec<IdentityId>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub stencil: Stencil,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    /// Trajectory-level relative residual accepted for time-series identities.
    #[serde(default = "default_residual_tolerance")]
    pub residual_tolerance: f64,
    /// Absolute residual below which an identity passes regardless of its relative residual.
    #[serde(default = "default_absolute_tolerance")]
    pub absolute_tolerance: f64,
    #[serde(default = "default_bound_tolerance")]
    pub bound_tolerance: f64,
    /// Relative energy drift accepted over the run.
    #[serde(default = "default_energy_tolerance")]
    pub energy_tolerance: f64,
}

fn reject<T>(key: &str, message: impl Into<String>) -> Result<T, ScenarioError> {
    Err(ScenarioError::Config { key: key.to_owned(), message: message.into() })
}

impl SimConfig {
    /// Linear standing wave `ε = 0.01`, `k = 1`, `g = 1` over one period with `T/400` output.
    pub fn linear_standing_benchmark(depth: Depth) -> Self {
        let omega = depth.flat_symbol(1.0).sqrt();
        let period = 2.0 * PI / omega;
        let stride = period / 400.0;
        let n_z = if depth.is_infinite() { 32 } else { 16 };
        Self {
            schema_version: SCHEMA_VERSION,
            n_x: 32,
            n_z,
            depth,
            g: 1.0,
            dt: stride,
            t_end: period,
            output_stride: stride,
            initial_condition: InitialCondition::LinearStanding { epsilon: 0.01, k: 1 },
            filter: FilterConfig::Off,
            identity_set: None,
            seed: 0,
            stencil: Stencil::Fourth,
            cfl: DEFAULT_CFL,
            residual_tolerance: default_residual_tolerance(),
            absolute_tolerance: default_absolute_tolerance(),
            bound_tolerance: default_bound_tolerance(),
            energy_tolerance: default_energy_tolerance(),
        }
    }

    /// `η = 0`, `ψ = cos x`, infinite depth, `t ∈ [0, 0.5]`, with the filter on when `g < 0`.
    pub fn rayleigh_taylor(g: f64) -> Self {
        let mut c = Self::linear_standing_benchmark(Depth::infinite());
        c.g = g;
        c.t_end = 0.5;
        c.output_stride = 0.5 / 200.0;
        c.dt = c.output_stride;
        c.initial_condition = InitialCondition::FlatPotential { k: 1 };
        if g < 0.0 {
            c.filter = FilterConfig::Exponential { strength: DEFAULT_FILTER_STRENGTH };
        }
        c
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let c: Self = serde_json::from_str(text).map_err(|e| ScenarioError::Config {
            key: "<document>".into(),
            message: e.to_string(),
        })?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn grid(&self) -> Result<PeriodicGrid, ScenarioError> {
        PeriodicGrid::new(self.n_x).map_err(|e| ScenarioError::Config { key: "n_x".into(), message: e.to_string() })
    }

    pub fn dynamics_options(&self) -> DynamicsOptions {
        DynamicsOptions {
            dealias: true,
            filter: match self.filter {
                FilterConfig::Off => None,
                FilterConfig::Exponential { strength } => Some(SpectralFilter { strength }),
            },
            cfl: self.cfl,
        }
    }

    /// Stability bound for the configured grid and gravity.
    pub fn max_dt(&self) -> f64 {
        self.cfl / (self.g.abs().max(1.0) * (self.n_x / 2) as f64).sqrt()
    }

    /// RK4 steps per output interval.
    pub fn substeps(&self) -> usize {
        (self.output_stride / self.dt).round() as usize
    }

    /// Checks every precondition, naming the offending key.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return reject("schema_version", format!("expected {SCHEMA_VERSION}, got {}", self.schema_version));
        }
        self.grid()?;
        if self.n_z < 4 {
            return reject("n_z", format!("need at least 4 vertical intervals, got {}", self.n_z));
        }
        if let Err(e) = self.depth.validate() {
            return reject("depth", e.to_string());
        }
        if !self.g.is_finite() {
            return reject("g", "gravity must be finite");
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return reject("cfl", format!("must lie in (0, 1], got {}", self.cfl));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return reject("dt", format!("must be positive, got {}", self.dt));
        }
        if self.dt > self.max_dt() * (1.0 + 1e-12) {
            return reject("dt", format!("{} exceeds the stability bound {}", self.dt, self.max_dt()));
        }
        if !(self.output_stride.is_finite() && self.output_stride >= self.dt * (1.0 - STRIDE_TOLERANCE)) {
            return reject("output_stride", format!("must be at least dt = {}, got {}", self.dt, self.output_stride));
        }
        let ratio = self.output_stride / self.dt;
        if (ratio - ratio.round()).abs() > STRIDE_TOLERANCE * ratio {
            return reject("output_stride", format!("must be an integer multiple of dt = {}, ratio is {ratio}", self.dt));
        }
        if !(self.t_end.is_finite() && self.t_end >= self.output_stride) {
            return reject("t_end", format!("must be at least output_stride = {}, got {}", self.output_stride, self.t_end));
        }
        let outputs = self.t_end / self.output_stride;
        if (outputs - outputs.round()).abs() > 1e-6 * outputs {
            return reject("t_end", format!("must be an integer multiple of output_stride, ratio is {outputs}"));
        }
        if let FilterConfig::Exponential { strength } = self.filter {
            if !(strength.is_finite() && strength > 0.0) {
                return reject("filter.strength", format!("must be positive, got {strength}"));
            }
        }
        if self.g < 0.0 {
            if self.filter == FilterConfig::Off {
                return reject("filter", "negative gravity is ill-posed without a spectral filter");
            }
            if self.t_end > 1.0 {
                return reject("t_end", format!("negative gravity runs are limited to t_end <= 1, got {}", self.t_end));
            }
        }
        for (key, v) in [
            ("residual_tolerance", self.residual_tolerance),
            ("absolute_tolerance", self.absolute_tolerance),
            ("bound_tolerance", self.bound_tolerance),
            ("energy_tolerance", self.energy_tolerance),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return reject(key, format!("must be a non-negative number, got {v}"));
            }
        }
        self.validate_initial_condition()?;
        if let Some(ids) = &self.identity_set {
            let allowed = self.applicable_identities();
            for id in ids {
                if !allowed.contains(id) {
                    return reject(
                        "identity_set",
                        format!("{} does not apply to this run (depth {:?}, g = {})", id.key(), self.depth, self.g),
                    );
                }
            }
        }
        Ok(())
    }

    fn validate_initial_condition(&self) -> Result<(), ScenarioError> {
        let key = "initial_condition";
        let kmax = self.n_x / 3;
        let check_k = |k: usize| {
            if k == 0 || k > kmax {
                reject(&format!("{key}.k"), format!("wavenumber must lie in 1..={kmax} for n_x = {}", self.n_x))
            } else {
                Ok(())
            }
        };
        match &self.initial_condition {
            InitialCondition::Rest => Ok(()),
            InitialCondition::LinearStanding { epsilon, k } => {
                check_k(*k)?;
                if !epsilon.is_finite() {
                    return reject(&format!("{key}.epsilon"), "must be finite");
                }
                Ok(())
            }
            InitialCondition::StandingWaveExpansion { epsilon, .. } => {
                if let Err(e) = StandingWaveExpansion::new(*epsilon) {
                    return reject(&format!("{key}.epsilon"), e.to_string());
                }
                if self.g != 1.0 || !self.depth.is_infinite() {
                    return reject(key, "standing_wave_expansion is scaled for g = 1 and infinite depth");
                }
                if self.n_x < 8 {
                    return reject("n_x", "the expansion needs modes up to 3");
                }
                Ok(())
            }
            InitialCondition::Stokes { epsilon, k } => {
                check_k(2 * k)?;
                if self.g <= 0.0 {
                    return reject("g", "Stokes waves need positive gravity");
                }
                if !epsilon.is_finite() {
                    return reject(&format!("{key}.epsilon"), "must be finite");
                }
                Ok(())
            }
            InitialCondition::Spectrum { modes } => {
                for (i, m) in modes.iter().enumerate() {
                    if m.k == 0 || m.k > kmax {
                        return reject(
                            &format!("{key}.modes[{i}].k"),
                            format!("wavenumber must lie in 1..={kmax} for n_x = {}", self.n_x),
                        );
                    }
                    if ![m.eta_cos, m.eta_sin, m.psi_cos, m.psi_sin].iter().all(|v| v.is_finite()) {
                        return reject(&format!("{key}.modes[{i}]"), "coefficients must be finite");
                    }
                }
                Ok(())
            }
            InitialCondition::RandomSurface { max_mode, slope } => {
                if *max_mode == 0 || *max_mode > kmax {
                    return reject(&format!("{key}.max_mode"), format!("must lie in 1..={kmax}"));
                }
                if !(slope.is_finite() && *slope > 0.0) {
                    return reject(&format!("{key}.slope"), "must be positive");
                }
                Ok(())
            }
            InitialCondition::FlatPotential { k } => check_k(*k),
        }
    }

    /// Identities evaluated when `identity_set` is left out.
    pub fn applicable_identities(&self) -> Vec<IdentityId> {
        use IdentityId::*;
        let mut ids = Vec::new();
        if self.depth.is_infinite() {
            ids.extend([VirialInfinite, VerticalVelocityRate]);
        } else {
            ids.extend([VirialFinite, BottomPressureMoment, BottomPotentialRate, BottomConsistency]);
        }
        ids.extend([
            SecondMoment,
            MeanPsiDrift,
            Rellich,
            SlopeVelocityRate,
            IntegralBEqualsSlopeV,
            MassConservation,
            EnergyConservation,
            EnergyFlux,
            DtnCauchySchwarz,
            DtnQuadraticUpper,
            EquipartitionBound,
            KineticCoercivity,
            ZarembaBound,
        ]);
        if self.g <= 0.0 {
            ids.extend([RtVirialGrowth, RtLowerBound]);
            ids.push(if self.g == 0.0 { RtIntegratedGrowth } else { RtCoercivity });
        }
        ids.sort();
        ids
    }

    pub fn selected_identities(&self) -> Vec<IdentityId> {
        let mut ids = self.identity_set.clone().unwrap_or_else(|| self.applicable_identities());
        ids.sort();
        ids.dedup();
        ids
    }

    /// `(η, ψ)` at `t = 0`.
    pub fn initial_surface(&self, grid: &PeriodicGrid) -> Result<(SurfaceField, SurfaceField), ScenarioError> {
        let f = |h: &dyn Fn(f64) -> f64| SurfaceField::from_fn(grid, h).map_err(ScenarioError::from);
        match &self.initial_condition {
            InitialCondition::Rest => Ok((SurfaceField::zeros(grid), SurfaceField::zeros(grid))),
            InitialCondition::LinearStanding { epsilon, k } => {
                let kf = *k as f64;
                Ok((f(&|x| epsilon * (kf * x).cos())?, SurfaceField::zeros(grid)))
            }
            InitialCondition::StandingWaveExpansion { epsilon, a13, a33, b13, b33 } => {
                let e = StandingWaveExpansion::new(*epsilon)?.with_coefficients(*a13, *a33, *b13, *b33);
                Ok(e.physical_surface(grid, 0.0)?)
            }
            InitialCondition::Stokes { epsilon, k } => {
                let (eta, psi) = stokes_profile(*epsilon, *k as f64, self.g, self.depth);
                Ok((f(&eta)?, f(&psi)?))
            }
            InitialCondition::Spectrum { modes } => {
                let eta = f(&|x| modes.iter().map(|m| m.eta_cos * (m.k as f64 * x).cos() + m.eta_sin * (m.k as f64 * x).sin()).sum())?;
                let psi = f(&|x| modes.iter().map(|m| m.psi_cos * (m.k as f64 * x).cos() + m.psi_sin * (m.k as f64 * x).sin()).sum())?;
                Ok((eta, psi))
            }
            InitialCondition::RandomSurface { max_mode, slope } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let r = random_field(grid, *max_mode, &mut rng)?;
                let eta = r.scale(slope / r.derivative().sup_norm());
                Ok((eta, SurfaceField::zeros(grid)))
            }
            InitialCondition::FlatPotential { k } => {
                let kf = *k as f64;
                Ok((SurfaceField::zeros(grid), f(&|x| (kf * x).cos())?))
            }
        }
    }
}

/// Second-order Stokes wave `(η(x), ψ(x))` at `t = 0`, phase `θ = kx`.
///
/// `ω² = gk tanh(kh)`; the surface potential is the second-order expansion
/// `φ(x, 0) + η φ_y(x, 0)` of the classical velocity potential.
pub fn stokes_profile(a: f64, k: f64, g: f64, depth: Depth) -> (impl Fn(f64) -> f64, impl Fn(f64) -> f64) {
    let (eta2, phi1, phi2) = match depth {
        Depth::Finite { h } => {
            let s = (k * h).tanh();
            let omega = (g * k * s).sqrt();
            let sh = (k * h).sinh();
            (
                k * a * a / 4.0 * (3.0 - s * s) / s.powi(3),
                a * omega / (k * s),
                3.0 / 8.0 * a * a * omega * (2.0 * k * h).cosh() / sh.powi(4),
            )
        }
        Depth::Infinite { .. } => {
            let omega = (g * k).sqrt();
            (0.5 * k * a * a, a * omega / k, 0.0)
        }
    };
    let omega_a2 = match depth {
        Depth::Finite { h } => (g * k * (k * h).tanh()).sqrt() * a * a,
        Depth::Infinite { .. } => (g * k).sqrt() * a * a,
    };
    let eta = move |x: f64| a * (k * x).cos() + eta2 * (2.0 * k * x).cos();
    // η φ_y at y = 0 contributes a cos θ · aω sin θ = ½ a²ω sin 2θ.
    let psi = move |x: f64| phi1 * (k * x).sin() + (phi2 + 0.5 * omega_a2) * (2.0 * k * x).sin();
    (eta, psi)
}
