//! Configured runs, convergence studies and serialised results.

mod config;
mod output;

pub use config::{stokes_profile, FilterConfig, InitialCondition, SimConfig, SpectralMode, INITIAL_CONDITIONS, SCHEMA_VERSION};
pub use output::{format_float, time_series_csv, write_atomic, write_outputs, CSV_BASE_COLUMNS};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{self as diag, BoundReport, ConservationReport, DiagnosticsError, IdentityId, IdentitySummary, ResidualReport, RtReport, Trajectory};
use crate::dtn::{Depth, DtnError, DtnSolver};
use crate::dynamics::{DynamicsError, WaveModel};
use crate::inequality_lab::{self as lab, InequalityError, SampleSpec};
use crate::spectral::{PeriodicGrid, SpectralError, SurfaceField};
use crate::standing_waves::{standing_wave_table, Quadrature, StandingWaveError, StandingWaveTable};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid configuration at `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("I/O error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Dtn(#[from] DtnError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    StandingWave(#[from] StandingWaveError),
    #[error(transparent)]
    Inequality(#[from] InequalityError),
}

/// Everything a run produced apart from the time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub schema_version: u32,
    pub code_version: String,
    pub command: String,
    pub config: Option<SimConfig>,
    pub identities: Vec<IdentitySummary>,
    pub bounds: Vec<BoundReport>,
    pub conservation: Option<ConservationReport>,
    pub rt_bounds: Option<RtReport>,
    pub convergence: Option<ConvergenceTable>,
    pub standing_wave: Option<StandingWaveTable>,
    #[serde(with = "crate::float_repr::map")]
    pub measured: BTreeMap<String, f64>,
    /// Failed assertions, empty when the run passed.
    pub failures: Vec<String>,
}

impl RunManifest {
    fn new(command: &str, config: Option<SimConfig>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            code_version: CODE_VERSION.to_owned(),
            command: command.to_owned(),
            config,
            identities: Vec::new(),
            bounds: Vec::new(),
            conservation: None,
            rt_bounds: None,
            convergence: None,
            standing_wave: None,
            measured: BTreeMap::new(),
            failures: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    fn check_bound(&mut self, b: &BoundReport) {
        if b.violations > 0 {
            self.failures.push(format!(
                "{}: {} of {} samples violate the bound (min margin {:e}, seed {})",
                b.bound_id.key(),
                b.violations,
                b.samples,
                b.min_margin,
                b.worst_sample_seed
            ));
        }
        self.bounds.push(b.clone());
    }
}

/// A finished simulation: manifest, trajectory and per-identity residual series.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub trajectory: Trajectory,
    pub residuals: BTreeMap<IdentityId, Vec<ResidualReport>>,
}

impl RunOutcome {
    pub fn csv(&self) -> String {
        time_series_csv(&self.trajectory, &self.residuals)
    }
}

/// Integrates `config` and records every output state.
pub fn simulate_trajectory(config: &SimConfig) -> Result<Trajectory, ScenarioError> {
    config.validate()?;
    let grid = config.grid()?;
    let model = WaveModel::new(&grid, config.depth, config.n_z, config.g, config.dynamics_options())?;
    let (eta, psi) = config.initial_surface(&grid)?;
    let initial = model.state(eta, psi, 0.0);
    let traj = Trajectory::simulate_substeps(&model, &initial, config.t_end, config.output_stride, Some(config.substeps()))?;
    Ok(traj.with_stencil(config.stencil))
}

/// Residual series of every time-series identity in `ids` that applies to `traj`.
pub fn trajectory_residuals(
    traj: &Trajectory,
    ids: &[IdentityId],
) -> Result<BTreeMap<IdentityId, Vec<ResidualReport>>, ScenarioError> {
    use IdentityId::*;
    let want = |id: IdentityId| ids.contains(&id);
    let mut all: Vec<ResidualReport> = Vec::new();
    if want(VirialFinite) || want(VirialInfinite) {
        all.extend(diag::check_virial(traj)?);
    }
    if want(SecondMoment) {
        all.extend(diag::check_vac1(traj)?);
    }
    if want(MeanPsiDrift) {
        all.extend(diag::check_mean_psi_drift(traj)?);
    }
    if !traj.depth.is_infinite() {
        if want(BottomPressureMoment) {
            all.extend(diag::check_longuet_higgins(traj)?);
        }
        if want(BottomPotentialRate) {
            all.extend(diag::check_bottom_potential_rate(traj)?);
        }
        if want(BottomConsistency) {
            all.extend(diag::check_bottom_consistency(traj)?);
        }
    }
    if want(Rellich) {
        all.extend(diag::check_rellich(traj));
    }
    if want(SlopeVelocityRate) || want(VerticalVelocityRate) || want(IntegralBEqualsSlopeV) {
        all.extend(diag::check_vac3(traj)?);
    }
    if want(MassConservation) {
        for s in &traj.snapshots {
            all.push(ResidualReport::new(MassConservation, s.record.t, s.record.extra("int_eta"), 0.0, "instantaneous"));
        }
    }
    if want(EnergyConservation) {
        let e0 = traj.snapshots[0].record.e_total;
        for s in &traj.snapshots {
            all.push(ResidualReport::new(EnergyConservation, s.record.t, s.record.e_total, e0, "instantaneous"));
        }
    }
    let mut out: BTreeMap<IdentityId, Vec<ResidualReport>> = BTreeMap::new();
    for r in all.into_iter().filter(|r| want(r.identity_id)) {
        out.entry(r.identity_id).or_default().push(r);
    }
    Ok(out)
}

/// Runs a configuration and evaluates its identity set.
pub fn run(config: &SimConfig) -> Result<RunOutcome, ScenarioError> {
    let traj = simulate_trajectory(config)?;
    let ids = config.selected_identities();
    let residuals = trajectory_residuals(&traj, &ids)?;
    let mut m = RunManifest::new("simulate", Some(config.clone()));
    let floor = config.absolute_tolerance + truncation_allowance(&traj, &mut m);
    for (id, reports) in &residuals {
        if let Some(s) = diag::summarize(reports) {
            let tol = if *id == IdentityId::EnergyConservation { config.energy_tolerance } else { config.residual_tolerance };
            if s.rel_residual > tol && s.max_abs_residual > floor {
                m.failures.push(format!(
                    "{}: relative residual {:e} exceeds {tol:e} (absolute {:e} at t = {})",
                    id.key(),
                    s.rel_residual,
                    s.max_abs_residual,
                    s.worst_t
                ));
            }
            m.identities.push(s);
        }
    }
    let want = |id: IdentityId| ids.contains(&id);
    let tol = config.bound_tolerance;
    for b in diag::check_energy_flux(&traj, tol) {
        if want(b.bound_id) {
            m.check_bound(&b);
        }
    }
    if want(IdentityId::EquipartitionBound) {
        let (b, tel) = diag::check_equipartition_bound(&traj)?;
        m.measured.insert("equipartition_telescoping_abs_residual".into(), tel.abs_residual);
        m.check_bound(&b);
    }
    if want(IdentityId::KineticCoercivity) {
        m.check_bound(&diag::check_kinetic_coercivity(&traj)?);
    }
    if want(IdentityId::ZarembaBound) {
        let mut b = BoundReport::empty(IdentityId::ZarembaBound);
        let mut lowest = f64::INFINITY;
        for (i, s) in traj.snapshots.iter().enumerate() {
            lowest = lowest.min(s.record.gamma_min);
            b.push_margin(i as u64, s.record.gamma_min, tol);
        }
        b.measured_constant = lowest;
        m.check_bound(&b);
    }
    let conservation = diag::check_conservation(&traj);
    if want(IdentityId::EnergyConservation) && conservation.rel_energy_drift > config.energy_tolerance && conservation.max_energy_drift > config.absolute_tolerance {
        m.failures.push(format!(
            "energy_conservation: relative drift {:e} exceeds {:e}",
            conservation.rel_energy_drift, config.energy_tolerance
        ));
    }
    m.conservation = Some(conservation);
    if config.g <= 0.0 && (want(IdentityId::RtVirialGrowth) || want(IdentityId::RtIntegratedGrowth) || want(IdentityId::RtCoercivity)) {
        let rt = diag::check_rt_bounds(&traj, RT_SLACK)?;
        if want(IdentityId::RtVirialGrowth) {
            m.check_bound(&rt.growth);
        }
        for b in [&rt.integrated, &rt.coercivity].into_iter().flatten() {
            if want(b.bound_id) {
                m.check_bound(b);
            }
        }
        if want(IdentityId::RtLowerBound) && !rt.lower_bound_constant.is_finite() {
            m.failures.push(format!("rt_lower_bound: constant is {}", rt.lower_bound_constant));
        }
        m.measured.insert("rt_lower_bound_constant".into(), rt.lower_bound_constant);
        m.rt_bounds = Some(rt);
    }
    Ok(RunOutcome { manifest: m, trajectory: traj, residuals })
}

/// Absolute allowance for the finite strip standing in for infinite depth.
///
/// The strip's exact identities differ from the infinite-depth ones by bottom terms of
/// size `τ = ½ sup_t ∫|φ_x(−h_eff)|²`, at most `(1 + h_eff/2) τ` in any identity.
fn truncation_allowance(traj: &Trajectory, m: &mut RunManifest) -> f64 {
    let Depth::Infinite { h_eff } = traj.depth else {
        return 0.0;
    };
    let tail = traj.snapshots.iter().map(|s| 0.5 * s.record.extra("bottom_grad_sq")).fold(0.0, f64::max);
    m.measured.insert("infinite_depth_truncation".into(), tail);
    (1.0 + 0.5 * h_eff) * tail
}

/// Relative slack of the growth bounds.
pub const RT_SLACK: f64 = 1e-3;

/// Which resolutions a convergence study refines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Refinement {
    /// Halve `dt`, `output_stride`, `1/n_x` and `1/n_z` together.
    #[default]
    All,
    /// Halve `dt` and `output_stride` only.
    Time,
    /// Double `n_x` and `n_z` only.
    Space,
}

/// One identity across refinement levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub identity_id: IdentityId,
    /// Trajectory-level absolute residual per level.
    pub residuals: Vec<f64>,
    #[serde(with = "crate::float_repr::vec")]
    pub observed_orders: Vec<f64>,
    /// Least-squares slope of `log residual` against `log output_stride`.
    #[serde(with = "crate::float_repr")]
    pub fitted_order: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub refinement: Refinement,
    pub output_strides: Vec<f64>,
    pub n_x: Vec<usize>,
    pub n_z: Vec<usize>,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn row(&self, id: IdentityId) -> Option<&ConvergenceRow> {
        self.rows.iter().find(|r| r.identity_id == id)
    }
}

/// Configuration of refinement level `level`.
pub fn refine(config: &SimConfig, level: usize, refinement: Refinement) -> SimConfig {
    let f = 1usize << level;
    let mut c = config.clone();
    if refinement != Refinement::Space {
        c.dt /= f as f64;
        c.output_stride /= f as f64;
    }
    if refinement != Refinement::Time {
        c.n_x *= f;
        c.n_z *= f;
        // Keep the step inside the stability bound of the finer grid.
        while c.dt > c.max_dt() {
            c.dt /= 2.0;
        }
    }
    c
}

/// Reruns `config` over `levels` refinements and fits observed orders per identity.
pub fn convergence_study(
    config: &SimConfig,
    levels: usize,
    refinement: Refinement,
) -> Result<(RunManifest, Vec<RunOutcome>), ScenarioError> {
    if levels < 3 {
        return Err(ScenarioError::Config { key: "levels".into(), message: format!("need at least 3 levels, got {levels}") });
    }
    config.validate()?;
    let mut outcomes = Vec::with_capacity(levels);
    for l in 0..levels {
        outcomes.push(run(&refine(config, l, refinement))?);
    }
    let strides: Vec<f64> = outcomes.iter().map(|o| o.trajectory.dt_out).collect();
    let mut rows = Vec::new();
    for id in config.selected_identities() {
        let mut residuals = Vec::with_capacity(levels);
        for o in &outcomes {
            if id == IdentityId::EnergyConservation {
                residuals.push(o.manifest.conservation.as_ref().map(|c| c.max_energy_drift).unwrap_or(f64::NAN));
            } else if let Some(s) = o.manifest.identities.iter().find(|s| s.identity_id == id) {
                residuals.push(s.max_abs_residual);
            }
        }
        if residuals.len() != levels {
            continue;
        }
        let fitted_order = if residuals.iter().all(|r| *r > 0.0) {
            let x: Vec<f64> = match refinement {
                Refinement::Space => outcomes.iter().map(|o| 1.0 / o.trajectory.snapshots[0].state.eta.len() as f64).collect(),
                _ => strides.clone(),
            };
            diag::loglog_slope(&x, &residuals)
        } else {
            f64::NAN
        };
        rows.push(ConvergenceRow { identity_id: id, observed_orders: diag::observed_orders(&residuals), residuals, fitted_order });
    }
    let mut m = RunManifest::new("converge", Some(config.clone()));
    for o in &outcomes {
        m.failures.extend(o.manifest.failures.iter().map(|f| format!("level n_x = {}, stride = {}: {f}", o.manifest.config.as_ref().map(|c| c.n_x).unwrap_or(0), o.trajectory.dt_out)));
    }
    m.identities = outcomes.last().map(|o| o.manifest.identities.clone()).unwrap_or_default();
    m.convergence = Some(ConvergenceTable {
        refinement,
        output_strides: strides,
        n_x: outcomes.iter().filter_map(|o| o.manifest.config.as_ref().map(|c| c.n_x)).collect(),
        n_z: outcomes.iter().filter_map(|o| o.manifest.config.as_ref().map(|c| c.n_z)).collect(),
        rows,
    });
    Ok((m, outcomes))
}

/// Minimum fitted `ε`-slope accepted for the standing-wave residuals.
pub const STANDING_WAVE_MIN_SLOPE: f64 = 2.8;

/// Tabulates the standing-wave period integrals for `eps_list`.
pub fn report_standing_wave(eps_list: &[f64], coefficients: [f64; 4], quad: &Quadrature) -> Result<RunManifest, ScenarioError> {
    for (i, e) in eps_list.iter().enumerate() {
        if !(0.0..=crate::standing_waves::MAX_EPSILON).contains(e) {
            return Err(ScenarioError::Config { key: format!("eps[{i}]"), message: format!("{e} outside [0, 0.3]") });
        }
    }
    let table = standing_wave_table(eps_list, coefficients, quad)?;
    let mut m = RunManifest::new("standing-wave", None);
    for (name, slope) in [("kinetic", table.kinetic_slope), ("potential", table.potential_slope), ("equipartition", table.residual_slope)] {
        if let Some(s) = slope {
            m.measured.insert(format!("{name}_slope"), s);
            if s < STANDING_WAVE_MIN_SLOPE {
                m.failures.push(format!("{name} residual slope {s} below {STANDING_WAVE_MIN_SLOPE}"));
            }
        }
    }
    for row in table.rows.iter().filter(|r| r.epsilon == 0.0) {
        let gap = row.kinetic_gap.max(row.potential_gap);
        if gap > 1e-9 {
            m.failures.push(format!("zero-amplitude integrals differ from π²/2 by {gap:e}"));
        }
    }
    m.standing_wave = Some(table);
    Ok(m)
}

/// Settings of the default inequality ensembles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalitySettings {
    pub spec: SampleSpec,
    pub n_x: usize,
    pub n_z: usize,
    pub tolerance: f64,
}

impl Default for InequalitySettings {
    fn default() -> Self {
        Self { spec: SampleSpec::default(), n_x: 64, n_z: 32, tolerance: lab::DEFAULT_TOLERANCE }
    }
}

/// Runs every inequality check on the default ensembles.
pub fn run_inequalities(settings: &InequalitySettings) -> Result<RunManifest, ScenarioError> {
    let grid = PeriodicGrid::new(settings.n_x)?;
    let tol = settings.tolerance;
    let mut m = RunManifest::new("inequalities", None);
    for depth in [Depth::finite(1.0), Depth::finite(4.0), Depth::infinite()] {
        let solver = DtnSolver::new(&grid, depth, settings.n_z)?;
        let label = depth_label(depth);
        let trace = lab::check_trace_lower_bound(&solver, &settings.spec, tol)?;
        m.measured.insert(format!("trace_constant_{label}"), trace.measured_constant);
        m.check_bound(&trace);
        let (cs, upper) = lab::check_dtn_quadratic_bounds(&solver, &settings.spec, tol)?;
        m.check_bound(&cs);
        m.check_bound(&upper);
        let duality = lab::check_duality_estimate(&solver, &settings.spec, tol)?;
        m.measured.insert(format!("duality_constant_{label}"), duality.measured_constant);
        m.check_bound(&duality);
        let s = lab::check_structural(&solver, &settings.spec)?;
        m.measured.insert(format!("max_g_eta_{label}"), s.zaremba.measured_constant);
        for b in [&s.positivity, &s.symmetry, &s.mean_zero, &s.zaremba] {
            m.check_bound(b);
        }
    }
    let eta = SurfaceField::from_fn(&grid, |x| 0.2 * x.cos())?;
    let psi = SurfaceField::from_fn(&grid, f64::cos)?;
    let decay = lab::check_bottom_decay(&grid, settings.n_z.max(48), &eta, &psi, &[2.0, 4.0, 6.0, 8.0], tol)?;
    m.measured.insert("bottom_decay_slope".into(), decay.slope);
    m.measured.insert("bottom_decay_constant".into(), decay.constant);
    m.check_bound(&decay.bound);
    Ok(m)
}

fn depth_label(depth: Depth) -> String {
    match depth {
        Depth::Finite { h } => format!("h{h}"),
        Depth::Infinite { .. } => "infinite".into(),
    }
}

/// Growth-bound run for `g ≤ 0`.
pub fn run_rt_bounds(config: &SimConfig) -> Result<RunOutcome, ScenarioError> {
    if config.g > 0.0 {
        return Err(ScenarioError::Config { key: "g".into(), message: "growth bounds need g <= 0".into() });
    }
    let mut c = config.clone();
    c.identity_set = Some(c.applicable_identities());
    let mut out = run(&c)?;
    out.manifest.command = "rt-bounds".into();
    Ok(out)
}
