//! Energies, virial quantities and residuals of the integral identities along trajectories.
//!
//! Time derivatives of recorded scalars use centred differences on the output grid,
//! of second order (3-point) or fourth order (5-point), evaluated at interior indices.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtn::{Depth, DtnError};
use crate::dynamics::{DynamicsError, SurfaceState, WaveModel};
use crate::spectral::SurfaceField;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error(transparent)]
    Dtn(#[from] DtnError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("identity {0:?} needs finite depth")]
    NeedsFiniteDepth(IdentityId),
    #[error("identity {0:?} needs infinite depth")]
    NeedsInfiniteDepth(IdentityId),
    #[error("trajectory too short: {0} snapshots")]
    TooShort(usize),
    #[error("{0}")]
    Precondition(String),
}

/// Identities and bounds checked by this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentityId {
    VirialFinite,
    VirialInfinite,
    SecondMoment,
    MeanPsiDrift,
    BottomPressureMoment,
    BottomPotentialRate,
    BottomConsistency,
    Rellich,
    SlopeVelocityRate,
    VerticalVelocityRate,
    IntegralBEqualsSlopeV,
    EnergyFlux,
    DtnCauchySchwarz,
    DtnQuadraticUpper,
    EquipartitionBound,
    KineticCoercivity,
    MassConservation,
    EnergyConservation,
    RtVirialGrowth,
    RtIntegratedGrowth,
    RtCoercivity,
    RtLowerBound,
    TraceLowerBound,
    DualityEstimate,
    BottomDecay,
    ZarembaBound,
    DtnPositivity,
    DtnSymmetry,
    DtnMeanZero,
    ShapeDerivative,
    StandingKinetic,
    StandingPotential,
    StandingEquipartition,
}

impl IdentityId {
    pub const ALL: [IdentityId; 33] = [
        IdentityId::VirialFinite,
        IdentityId::VirialInfinite,
        IdentityId::SecondMoment,
        IdentityId::MeanPsiDrift,
        IdentityId::BottomPressureMoment,
        IdentityId::BottomPotentialRate,
        IdentityId::BottomConsistency,
        IdentityId::Rellich,
        IdentityId::SlopeVelocityRate,
        IdentityId::VerticalVelocityRate,
        IdentityId::IntegralBEqualsSlopeV,
        IdentityId::EnergyFlux,
        IdentityId::DtnCauchySchwarz,
        IdentityId::DtnQuadraticUpper,
        IdentityId::EquipartitionBound,
        IdentityId::KineticCoercivity,
        IdentityId::MassConservation,
        IdentityId::EnergyConservation,
        IdentityId::RtVirialGrowth,
        IdentityId::RtIntegratedGrowth,
        IdentityId::RtCoercivity,
        IdentityId::RtLowerBound,
        IdentityId::TraceLowerBound,
        IdentityId::DualityEstimate,
        IdentityId::BottomDecay,
        IdentityId::ZarembaBound,
        IdentityId::DtnPositivity,
        IdentityId::DtnSymmetry,
        IdentityId::DtnMeanZero,
        IdentityId::ShapeDerivative,
        IdentityId::StandingKinetic,
        IdentityId::StandingPotential,
        IdentityId::StandingEquipartition,
    ];

    pub fn key(&self) -> String {
        serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
    }

    /// Statement checked, in plain notation.
    pub fn formula(&self) -> &'static str {
        use IdentityId::*;
        match self {
            VirialFinite => "½ d/dt ∫ηψ = Ẽ_k − E_p + (h/4)∫|φ_x(−h)|²",
            VirialInfinite => "½ d/dt ∫ηψ = Ẽ_k − E_p",
            SecondMoment => "½ d²/dt² ∫η² = ∫(γ/2)(B²+V²) − g∫ηG(η)η − ½∫|φ_x(−h)|²,  γ = 1 − G(η)η",
            MeanPsiDrift => "d/dt ∫ψ = −g∫η − ½∫|φ_x(−h)|²",
            BottomPressureMoment => "½ d²/dt² ∫η² = ∫(P(−h) − gh)",
            BottomPotentialRate => "−d/dt ∫φ(−h) = ∫(γ/2)(B²+V²) − g∫ηG(η)η",
            BottomConsistency => "∫∂_tφ(−h) from the extension of ψ_t − Bη_t equals d/dt ∫φ(−h)",
            Rellich => "∫N = ½∫|φ_x(−h)|²  (0 in infinite depth)",
            SlopeVelocityRate => "d/dt ∫η'V = ∫V G(η)V − ∫a η'²,  a = g + (∂_t + V∂_x)B",
            VerticalVelocityRate => "d/dt ∫B = ∫(a − g) − ∫B G(η)B  (infinite depth)",
            IntegralBEqualsSlopeV => "∫B = ∫η'V",
            EnergyFlux => "(g∫ηG(η)ψ)² ≤ g²‖η‖_∞ 2π E_k",
            DtnCauchySchwarz => "|∫ηG(η)ψ| ≤ (∫ηG(η)η)^{1/2} (∫ψG(η)ψ)^{1/2}",
            DtnQuadraticUpper => "0 ≤ ∫ηG(η)η ≤ 2π min(h, |inf η|)",
            EquipartitionBound => "|⟨Ẽ_k + 𝓑 − E_p⟩_T| ≤ (2/T) sup|∫ηψ|",
            KineticCoercivity => "⟨∫(γ/2)(B²+V²)⟩_T ≤ 4√M √E / T + 4M",
            MassConservation => "∫η = 0",
            EnergyConservation => "E_k + E_p = const",
            RtVirialGrowth => "d/dt ∫ηψ ≥ E (g = 0),  d/dt ∫ηψ ≥ |E| (g < 0)",
            RtIntegratedGrowth => "∫ηψ(t) ≥ E t + ∫ηψ(0)  (g = 0)",
            RtCoercivity => "E + (|g|/2)‖η‖² ≥ 0  (g < 0)",
            RtLowerBound => "|E|t + ∫ηψ(0) ≤ C ‖η‖(1+‖η'‖_∞)^{1/2}(E + (|g|/2)‖η‖²)^{1/2}",
            TraceLowerBound => "∫ψG(η)ψ ≥ C tanh(h)/(1+‖η'‖_∞) ‖ψ‖²_{Ḣ^{1/2}}",
            DualityEstimate => "|∫σf| ≤ C ‖σ‖_{Ḣ^{−1/2}} (1+‖σ'‖_∞)^{1/2} (∫f G(σ)f)^{1/2}",
            BottomDecay => "∫|φ_x(−h)|² ≤ C (1+‖η'‖³) e^{−h/4} ‖ψ‖²_{H^{1/2}}",
            ZarembaBound => "G(σ)σ ≤ 1",
            DtnPositivity => "∫ψG(η)ψ ≥ 0",
            DtnSymmetry => "∫φG(η)ψ = ∫ψG(η)φ",
            DtnMeanZero => "∫G(η)ψ = 0",
            ShapeDerivative => "G(η+εζ)ψ − G(η)ψ − ε dG(η)ψ·ζ = O(ε²),  dG(η)ψ·ζ = −G(η)(Bζ) − ∂_x(Vζ)",
            StandingKinetic => "∫∫∫(3/2 φ_y² + ½ φ_x²) = π²/2 + (3π²/16)ε² + O(ε³)",
            StandingPotential => "∫∫η² = π²/2 + (3π²/16)ε² + O(ε³)",
            StandingEquipartition => "kinetic and potential period integrals agree to O(ε³)",
        }
    }
}

/// Residual of one identity at one time index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub identity_id: IdentityId,
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub abs_residual: f64,
    pub rel_residual: f64,
    pub stencil: String,
}

impl ResidualReport {
    pub fn new(identity_id: IdentityId, t: f64, lhs: f64, rhs: f64, stencil: &str) -> Self {
        let abs_residual = (lhs - rhs).abs();
        let rel_residual = abs_residual / lhs.abs().max(rhs.abs()).max(1e-14);
        Self { identity_id, t, lhs, rhs, abs_residual, rel_residual, stencil: stencil.to_owned() }
    }
}

/// Trajectory-level aggregate: the largest residual against the largest magnitude of either side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentitySummary {
    pub identity_id: IdentityId,
    pub max_abs_residual: f64,
    pub scale: f64,
    #[serde(with = "crate::float_repr")]
    pub rel_residual: f64,
    pub worst_t: f64,
    pub samples: usize,
}

pub fn summarize(reports: &[ResidualReport]) -> Option<IdentitySummary> {
    let first = reports.first()?;
    let mut worst = first;
    let mut scale: f64 = 0.0;
    for r in reports {
        scale = scale.max(r.lhs.abs()).max(r.rhs.abs());
        if r.abs_residual > worst.abs_residual {
            worst = r;
        }
    }
    Some(IdentitySummary {
        identity_id: first.identity_id,
        max_abs_residual: worst.abs_residual,
        scale,
        rel_residual: worst.abs_residual / scale.max(1e-14),
        worst_t: worst.t,
        samples: reports.len(),
    })
}

/// Outcome of checking an inequality over samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound_id: IdentityId,
    /// Smallest `(rhs − lhs)/max(|lhs|, |rhs|)`; negative means a violation.
    #[serde(with = "crate::float_repr")]
    pub min_margin: f64,
    pub worst_sample_seed: u64,
    /// Best constant supported by the samples (meaning depends on the bound).
    #[serde(with = "crate::float_repr")]
    pub measured_constant: f64,
    pub samples: usize,
    pub violations: usize,
}

impl BoundReport {
    pub fn empty(bound_id: IdentityId) -> Self {
        Self {
            bound_id,
            min_margin: f64::INFINITY,
            worst_sample_seed: 0,
            measured_constant: f64::NAN,
            samples: 0,
            violations: 0,
        }
    }

    /// Records `lhs ≤ rhs` for one sample, counting violations beyond `tol`.
    pub fn push(&mut self, seed: u64, lhs: f64, rhs: f64, tol: f64) {
        let margin = (rhs - lhs) / lhs.abs().max(rhs.abs()).max(1e-300);
        let margin = if lhs == rhs { 0.0 } else { margin };
        if margin < self.min_margin {
            self.min_margin = margin;
            self.worst_sample_seed = seed;
        }
        if margin < -tol {
            self.violations += 1;
        }
        self.samples += 1;
    }

    /// Records a precomputed absolute margin (negative means violated).
    pub fn push_margin(&mut self, seed: u64, margin: f64, tol: f64) {
        if margin < self.min_margin {
            self.min_margin = margin;
            self.worst_sample_seed = seed;
        }
        if margin < -tol {
            self.violations += 1;
        }
        self.samples += 1;
    }

    pub fn merge(&mut self, other: &BoundReport) {
        if other.min_margin < self.min_margin {
            self.min_margin = other.min_margin;
            self.worst_sample_seed = other.worst_sample_seed;
        }
        self.samples += other.samples;
        self.violations += other.violations;
    }
}

/// Scalar diagnostics of one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub e_k: f64,
    pub e_p: f64,
    pub e_total: f64,
    pub e_k_mod: f64,
    pub b_bot: f64,
    pub i_virial: f64,
    pub mean_psi: f64,
    pub gamma_min: f64,
    pub extras: BTreeMap<String, f64>,
}

impl DiagnosticsRecord {
    pub fn extra(&self, key: &str) -> f64 {
        *self.extras.get(key).unwrap_or_else(|| panic!("missing diagnostic {key}"))
    }
}

/// A state together with its record and the surface fields needed for time stencils.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub state: SurfaceState,
    pub record: DiagnosticsRecord,
    pub b: SurfaceField,
    pub v: SurfaceField,
    pub eta_x: SurfaceField,
}

/// Centred finite-difference stencil used for time derivatives of recorded series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    Second,
    #[default]
    Fourth,
}

impl Stencil {
    pub fn half_width(&self) -> usize {
        match self {
            Stencil::Second => 1,
            Stencil::Fourth => 2,
        }
    }

    pub fn order(&self) -> usize {
        2 * self.half_width()
    }

    /// First derivative at `i` of samples spaced by `dt`.
    pub fn d1(&self, f: &[f64], i: usize, dt: f64) -> f64 {
        match self {
            Stencil::Second => (f[i + 1] - f[i - 1]) / (2.0 * dt),
            Stencil::Fourth => (-f[i + 2] + 8.0 * f[i + 1] - 8.0 * f[i - 1] + f[i - 2]) / (12.0 * dt),
        }
    }

    pub fn d2(&self, f: &[f64], i: usize, dt: f64) -> f64 {
        match self {
            Stencil::Second => (f[i + 1] - 2.0 * f[i] + f[i - 1]) / (dt * dt),
            Stencil::Fourth => {
                (-f[i + 2] + 16.0 * f[i + 1] - 30.0 * f[i] + 16.0 * f[i - 1] - f[i - 2]) / (12.0 * dt * dt)
            }
        }
    }

    /// Same stencil applied to fields.
    pub fn d1_field(&self, f: &[&SurfaceField], i: usize, dt: f64) -> SurfaceField {
        match self {
            Stencil::Second => f[i + 1].sub(f[i - 1]).scale(0.5 / dt),
            Stencil::Fourth => f[i + 1]
                .sub(f[i - 1])
                .scale(8.0)
                .sub(&f[i + 2].sub(f[i - 2]))
                .scale(1.0 / (12.0 * dt)),
        }
    }

    pub fn label(&self, derivative: usize) -> String {
        format!("centred {}-point difference, order {}, derivative {derivative}", 2 * self.half_width() + 1, self.order())
    }
}

/// Snapshots on a uniform output grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dt_out: f64,
    pub g: f64,
    pub depth: Depth,
    pub stencil: Stencil,
    pub snapshots: Vec<Snapshot>,
}

/// Evaluates every diagnostic of `state`.
pub fn record(model: &WaveModel, state: &SurfaceState) -> Result<Snapshot, DiagnosticsError> {
    let solver = model.solver();
    let (eta, psi) = (&state.eta, &state.psi);
    let g = model.g;
    let depth = model.depth();
    let h = depth.strip_depth();
    let dx = eta.grid().dx();

    let ext = solver.harmonic_extension(eta, psi)?;
    let tend = model.tendency(eta, psi)?;
    let tr = &tend.traces;
    let e_k = ext.volume_energy(0.5, 0.5);
    let e_k_mod = ext.volume_energy(0.75, 0.25);
    let bottom_grad = ext.bottom_gradient();
    let bottom_grad_sq = bottom_grad.inner(&bottom_grad);
    let phi_bottom = ext.bottom_trace().integrate();
    drop(ext);

    let eta_sq = eta.inner(eta);
    let e_p = 0.5 * g * eta_sq;
    let b_bot = if depth.is_infinite() { 0.0 } else { 0.25 * h * bottom_grad_sq };

    let g_eta = solver.dtn_apply(eta, eta)?;
    let gamma = g_eta.map(|v| 1.0 - v);
    let speed_sq = tr.b.mul(&tr.b).add(&tr.v.mul(&tr.v));
    let closed = {
        let n = eta.len();
        let (gp, px, ex) = (tr.g_psi.values(), tr.psi_x.values(), tr.eta_x.values());
        (0..n)
            .map(|i| (speed_sq.values()[i] - (gp[i] * gp[i] + px[i] * px[i]) / (1.0 + ex[i] * ex[i])).abs())
            .fold(0.0, f64::max)
    };
    let gamma_kinetic = 0.5 * gamma.inner(&speed_sq);

    // ∂_tφ is harmonic with surface value ψ_t − Bη_t.
    let surf = tend.psi_t.sub(&tr.b.mul(&tend.eta_t));
    let ext_t = solver.harmonic_extension(eta, &surf)?;
    let phi_t_bottom_field = ext_t.bottom_trace();
    drop(ext_t);
    let phi_t_bottom = phi_t_bottom_field.integrate();
    let pressure_excess = -phi_t_bottom - 0.5 * bottom_grad_sq;

    let g_v = solver.dtn_apply(eta, &tr.v)?;
    let g_b = solver.dtn_apply(eta, &tr.b)?;

    let mut extras = BTreeMap::new();
    let mut put = |k: &str, v: f64| {
        extras.insert(k.to_owned(), v);
    };
    put("eta_sq", eta_sq);
    put("int_eta", eta.integrate());
    put("int_psi", psi.integrate());
    put("eta_g_eta", eta.inner(&g_eta));
    put("eta_g_psi", eta.inner(&tr.g_psi));
    put("psi_g_psi", psi.inner(&tr.g_psi));
    put("bottom_grad_sq", bottom_grad_sq);
    put("phi_bottom", phi_bottom);
    put("phi_t_bottom", phi_t_bottom);
    put("pressure_excess", pressure_excess);
    put("gamma_kinetic", gamma_kinetic);
    put("speed_closed_form_gap", closed);
    put("int_n", tend.nonlinearity.integrate());
    put("int_b", tr.b.integrate());
    put("int_slope_v", tr.eta_x.inner(&tr.v));
    put("v_g_v", tr.v.inner(&g_v));
    put("b_g_b", tr.b.inner(&g_b));
    put("eta_sup", eta.sup_norm());
    put("eta_inf", eta.min());
    put("slope_sup", tr.eta_x.sup_norm());
    put("dx", dx);

    let record = DiagnosticsRecord {
        t: state.t,
        e_k,
        e_p,
        e_total: e_k + e_p,
        e_k_mod,
        b_bot,
        i_virial: eta.inner(psi),
        mean_psi: psi.mean(),
        gamma_min: gamma.min(),
        extras,
    };
    Ok(Snapshot { state: state.clone(), record, b: tr.b.clone(), v: tr.v.clone(), eta_x: tr.eta_x.clone() })
}

impl Trajectory {
    /// Integrates and records every output state.
    pub fn simulate(model: &WaveModel, initial: &SurfaceState, t_end: f64, dt_out: f64) -> Result<Self, DiagnosticsError> {
        Self::simulate_substeps(model, initial, t_end, dt_out, None)
    }

    /// As [`simulate`](Self::simulate) with a fixed number of RK4 steps per output interval.
    pub fn simulate_substeps(
        model: &WaveModel,
        initial: &SurfaceState,
        t_end: f64,
        dt_out: f64,
        substeps: Option<usize>,
    ) -> Result<Self, DiagnosticsError> {
        let mut snapshots = Vec::new();
        let mut failure = None;
        model.run_substeps(initial, t_end, dt_out, substeps, |s| match record(model, s) {
            Ok(snap) => {
                snapshots.push(snap);
                Ok(())
            }
            Err(DiagnosticsError::Dtn(e)) => Err(DynamicsError::Dtn(e)),
            Err(e) => {
                failure = Some(e.clone());
                Err(DynamicsError::InvalidTimeGrid(e.to_string()))
            }
        })
        .map_err(|e| failure.clone().unwrap_or(DiagnosticsError::Dynamics(e)))?;
        Ok(Self { dt_out, g: model.g, depth: model.depth(), stencil: Stencil::default(), snapshots })
    }

    pub fn records(&self) -> Vec<&DiagnosticsRecord> {
        self.snapshots.iter().map(|s| &s.record).collect()
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    fn series(&self, f: impl Fn(&DiagnosticsRecord) -> f64) -> Vec<f64> {
        self.snapshots.iter().map(|s| f(&s.record)).collect()
    }

    fn need(&self, n: usize) -> Result<(), DiagnosticsError> {
        if self.snapshots.len() < n {
            Err(DiagnosticsError::TooShort(self.snapshots.len()))
        } else {
            Ok(())
        }
    }

    pub fn with_stencil(mut self, stencil: Stencil) -> Self {
        self.stencil = stencil;
        self
    }

    fn d1(&self, f: &[f64], i: usize) -> f64 {
        self.stencil.d1(f, i, self.dt_out)
    }

    fn d2(&self, f: &[f64], i: usize) -> f64 {
        self.stencil.d2(f, i, self.dt_out)
    }

    /// Indices where the stencil fits.
    pub fn interior(&self) -> std::ops::Range<usize> {
        let w = self.stencil.half_width();
        w..self.snapshots.len().saturating_sub(w)
    }

    fn need_interior(&self) -> Result<(), DiagnosticsError> {
        self.need(2 * self.stencil.half_width() + 1)
    }

    fn t(&self, i: usize) -> f64 {
        self.snapshots[i].record.t
    }
}

const INSTANT: &str = "instantaneous";

/// Virial identity: `½ d/dt ∫ηψ = Ẽ_k − E_p + 𝓑` (𝓑 absent in infinite depth).
pub fn check_virial(traj: &Trajectory) -> Result<Vec<ResidualReport>, DiagnosticsError> {
    traj.need_interior()?;
    let id = if traj.depth.is_infinite() { IdentityId::VirialInfinite } else { IdentityId::VirialFinite };
    let i_v = traj.series(|r| r.i_virial);
    Ok(traj
        .interior()
        .map(|i| {
            let r = &traj.snapshots[i].record;
            ResidualReport::new(id, traj.t(i), 0.5 * traj.d1(&i_v, i), r.e_k_mod - r.e_p + r.b_bot, &traj.stencil.label(1))
        })
        .collect())
}

fn bottom_term(traj: &Trajectory, r: &DiagnosticsRecord) -> f64 {
    if traj.depth.is_infinite() {
        0.0
    } else {
        r.extra("bottom_grad_sq")
    }
}

/// `½ d²/dt² ∫η² = ∫(γ/2)(B²+V²) − g∫ηGη − ½∫|φ_x(−h)|²`.
pub fn check_vac1(traj: &Trajectory) -> Result<Vec<ResidualReport>, DiagnosticsError> {
    traj.need_interior()?;
    let m = traj.series(|r| r.extra("eta_sq"));
    Ok(traj
        .interior()
        .map(|i| {
            let r = &traj.snapshots[i].record;
            let rhs = r.extra("gamma_kinetic") - traj.g * r.extra("eta_g_eta") - 0.5 * bottom_term(traj, r);
            ResidualReport::new(IdentityId::SecondMoment, traj.t(i), 0.5 * traj.d2(&m, i), rhs, &traj.stencil.label(2))
        })
        .collect())
}

/// `d/dt ∫ψ = −g∫η − ½∫|φ_x(−h)|²`.
pub fn check_mean_psi_drift(traj: &Trajectory) -> Result<Vec<ResidualReport>, DiagnosticsError> {
    traj.need_interior()?;
    let s = traj.series(|r| r.extra("int_psi"));
    Ok(traj
        .interior()
        .map(|i| {
            let r = &traj.snapshots[i].record;
            let rhs = -traj.g * r.extra("int_eta") - 0.5 * bottom_term(traj, r);
            ResidualReport::new(IdentityId::MeanPsiDrift, traj.t(i), traj.d1(&s, i), rhs, &traj.stencil.label(1))
        })
        .collect())
}

/// `½ d²/dt² ∫η² = ∫(P(−h) − gh)` with `P(−h) = −∂_tφ(−h) − ½|φ_x(−h)|² + gh`.
pub fn check_longuet_higgins(traj: &Trajectory) -> Result<Vec<ResidualReport>, DiagnosticsError> {
    if traj.depth.is_infinite() {
        return Err(DiagnosticsError::NeedsFiniteDepth(IdentityId::BottomPressureMoment));
    }
    traj.need_interior()?;
    let m = traj.series(|r| r.extra("eta_sq"));
    Ok(traj
        .interior()
        .map(|i| {
            let r = &traj.snapshots[i].record;
            ResidualReport::new(
                IdentityId::BottomPressureMoment,
                traj.t(i),
                0.5 * traj.d2(&m, i),
                r.extra("pressure_excess"),
                &traj.stencil.label(2),
            )
        })
        .collect())
}

/// `−d/dt ∫φ(−h) = ∫(γ/2)(B²+V²) − g∫ηGη`.
pub fn check_bottom_potential_rate(traj: &Trajectory) -> Result<Vec<ResidualReport>, DiagnosticsError> {
    if traj.depth.is_infinite() {
        return Err(DiagnosticsError::NeedsFiniteDepth(IdentityId::BottomPotentialRate));
    }
    traj.need_interior()?;
    let p = traj.series(|r| r.extra("phi_bottom"));
    Ok(traj
        .interior()
        .map(|i| {
            let r = &traj.snapshots[i].record;
            let rhs = r.extra("gamma_kinetic") - traj.g * r.extra("eta_g_eta");
            ResidualReport::new(IdentityId::BottomPotentialRate, traj.t(i), -traj.d1(&p, i), rhs, &traj.stencil.label(1))
        })
        .collect())
}

/// The bottom-pressure, second-moment and bottom-potential identities share all
/// instantaneous terms; their residuals combine to `∫∂_tφ(−h) − D₁∫φ(−h)`,
/// reported here as `lhs = ∫∂_tφ(−h)`, `rhs = D₁∫φ(−h)`.
pub fn check_bottom_consistency(traj: &Trajectory) -> Result<Vec<ResidualReport>, DiagnosticsError> {
    if traj.depth.is_infinite() {
        return Err(DiagnosticsError::NeedsFiniteDepth(IdentityId::BottomConsistency));
    }
    traj.need_interior()?;
    let p = traj.series(|r| r.extra("phi_bottom"));
    Ok(traj
        .interior()
        .map(|i| {
            let r = &traj.snapshots[i].record;
            ResidualReport::new(IdentityId::BottomConsistency, traj.t(i), r.extra("phi_t_bottom"), traj.d1(&p, i), &traj.stencil.label(1))
        })
        .collect())
}

/// Rellich identity `∫N = ½∫|φ_x(−h)|²` at every snapshot.
pub fn check_rellich(traj: &Trajectory) -> Vec<ResidualReport> {
    traj.snapshots
        .iter()
        .map(|s| {
            let r = &s.record;
            ResidualReport::new(IdentityId::Rellich, r.t, r.extra("int_n"), 0.5 * bottom_term(traj, r), INSTANT)
        })
        .collect()
}

/// Taylor coefficient `a = g + ∂_tB + V∂_xB` at interior index `i`.
pub fn taylor_coefficient(traj: &Trajectory, i: usize) -> SurfaceField {
    let s = &traj.snapshots;
    let bs: Vec<&SurfaceField> = s.iter().map(|x| &x.b).collect();
    let bt = traj.stencil.d1_field(&bs, i, traj.dt_out);
    let adv = s[i].v.mul(&s[i].b.derivative());
    bt.add(&adv).map(|v| v + traj.g)
}

/// `d/dt ∫η'V = ∫VG(η)V − ∫aη'²`; with infinite depth also
/// `d/dt ∫B = ∫(a − g) − ∫BG(η)B`; and `∫B = ∫η'V` at every snapshot.
pub fn check_vac3(traj: &Trajectory) -> Result<Vec<ResidualReport>, DiagnosticsError> {
    traj.need_interior()?;
    let zv = traj.series(|r| r.extra("int_slope_v"));
    let ib = traj.series(|r| r.extra("int_b"));
    let mut out = Vec::new();
    for i in traj.interior() {
        let s = &traj.snapshots[i];
        let r = &s.record;
        let a = taylor_coefficient(traj, i);
        let a_slope = a.inner(&s.eta_x.mul(&s.eta_x));
        out.push(ResidualReport::new(
            IdentityId::SlopeVelocityRate,
            r.t,
            traj.d1(&zv, i),
            r.extra("v_g_v") - a_slope,
            &traj.stencil.label(1),
        ));
        if traj.depth.is_infinite() {
            let a_minus_g = a.integrate() - traj.g * 2.0 * PI;
            out.push(ResidualReport::new(
                IdentityId::VerticalVelocityRate,
                r.t,
                traj.d1(&ib, i),
                a_minus_g - r.extra("b_g_b"),
                &traj.stencil.label(1),
            ));
        }
    }
    for s in &traj.snapshots {
        let r = &s.record;
        out.push(ResidualReport::new(
            IdentityId::IntegralBEqualsSlopeV,
            r.t,
            r.extra("int_b"),
            r.extra("int_slope_v"),
            INSTANT,
        ));
    }
    Ok(out)
}

/// Energy-flux bound and the two quadratic-form estimates behind it, per snapshot.
pub fn check_energy_flux(traj: &Trajectory, tol: f64) -> Vec<BoundReport> {
    let mut flux = BoundReport::empty(IdentityId::EnergyFlux);
    let mut cs = BoundReport::empty(IdentityId::DtnCauchySchwarz);
    let mut upper = BoundReport::empty(IdentityId::DtnQuadraticUpper);
    let mut lower = BoundReport::empty(IdentityId::DtnQuadraticUpper);
    let mut ratio: f64 = 0.0;
    let mut cs_ratio: f64 = 0.0;
    let mut upper_ratio: f64 = 0.0;
    for (i, s) in traj.snapshots.iter().enumerate() {
        let r = &s.record;
        let g = traj.g;
        let egp = r.extra("eta_g_psi");
        let ege = r.extra("eta_g_eta");
        let lhs = (g * egp).powi(2);
        let rhs = g * g * r.extra("eta_sup") * 2.0 * PI * r.e_k;
        flux.push(i as u64, lhs, rhs, tol);
        if rhs > 0.0 {
            ratio = ratio.max(lhs / rhs);
        }
        let cs_rhs = (ege.max(0.0) * r.extra("psi_g_psi").max(0.0)).sqrt();
        cs.push(i as u64, egp.abs(), cs_rhs, tol);
        if cs_rhs > 0.0 {
            cs_ratio = cs_ratio.max(egp.abs() / cs_rhs);
        }
        let cap = match traj.depth {
            Depth::Finite { h } => h.min(r.extra("eta_inf").abs()),
            Depth::Infinite { .. } => r.extra("eta_inf").abs(),
        };
        upper.push(i as u64, ege, 2.0 * PI * cap, tol);
        if cap > 0.0 {
            upper_ratio = upper_ratio.max(ege / (2.0 * PI * cap));
        }
        lower.push(i as u64, -ege, 0.0, tol);
    }
    flux.measured_constant = ratio;
    cs.measured_constant = cs_ratio;
    upper.merge(&lower);
    upper.measured_constant = upper_ratio;
    vec![flux, cs, upper]
}

/// Trapezoid average over the whole trajectory.
fn time_average(traj: &Trajectory, f: &[f64]) -> f64 {
    let n = f.len();
    let total = traj.dt_out * (n - 1) as f64;
    let s: f64 = f.windows(2).map(|w| 0.5 * (w[0] + w[1]) * traj.dt_out).sum();
    s / total
}

/// `|⟨Ẽ_k + 𝓑 − E_p⟩_T| ≤ (2/T) sup|I|` and `T⟨Ẽ_k + 𝓑 − E_p⟩_T ≈ ½(I(T) − I(0))`.
pub fn check_equipartition_bound(traj: &Trajectory) -> Result<(BoundReport, ResidualReport), DiagnosticsError> {
    traj.need(2)?;
    let f = traj.series(|r| r.e_k_mod + r.b_bot - r.e_p);
    let i_v = traj.series(|r| r.i_virial);
    let total = traj.dt_out * (f.len() - 1) as f64;
    let avg = time_average(traj, &f);
    let sup_i = i_v.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut b = BoundReport::empty(IdentityId::EquipartitionBound);
    b.push(0, avg.abs(), 2.0 / total * sup_i, 1e-8);
    b.measured_constant = if sup_i > 0.0 { avg.abs() * total / sup_i } else { 0.0 };
    let tel = ResidualReport::new(
        IdentityId::EquipartitionBound,
        total,
        total * avg,
        0.5 * (i_v[i_v.len() - 1] - i_v[0]),
        "trapezoid average",
    );
    Ok((b, tel))
}

/// Time-averaged coercivity bound; `M = sup‖η‖_∞`.
pub fn check_kinetic_coercivity(traj: &Trajectory) -> Result<BoundReport, DiagnosticsError> {
    traj.need(2)?;
    let gk = traj.series(|r| r.extra("gamma_kinetic"));
    let total = traj.dt_out * (gk.len() - 1) as f64;
    let m = traj.series(|r| r.extra("eta_sup")).into_iter().fold(0.0, f64::max);
    let e = traj.snapshots[0].record.e_total.abs();
    let lhs = time_average(traj, &gk);
    let rhs = 4.0 * m.sqrt() * e.sqrt() / total + 4.0 * m;
    let mut b = BoundReport::empty(IdentityId::KineticCoercivity);
    b.push(0, lhs, rhs, 1e-8);
    b.measured_constant = if rhs > 0.0 { lhs / rhs } else { 0.0 };
    Ok(b)
}

/// Mass and energy drift relative to the initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub max_mean_eta: f64,
    pub energy_initial: f64,
    pub max_energy_drift: f64,
    pub rel_energy_drift: f64,
    pub final_energy_drift: f64,
}

pub fn check_conservation(traj: &Trajectory) -> ConservationReport {
    let e0 = traj.snapshots[0].record.e_total;
    let mut max_mean: f64 = 0.0;
    let mut drift: f64 = 0.0;
    for s in &traj.snapshots {
        max_mean = max_mean.max(s.state.eta.mean().abs());
        drift = drift.max((s.record.e_total - e0).abs());
    }
    let last = traj.snapshots.last().map(|s| s.record.e_total - e0).unwrap_or(0.0);
    ConservationReport {
        max_mean_eta: max_mean,
        energy_initial: e0,
        max_energy_drift: drift,
        rel_energy_drift: drift / e0.abs().max(1e-300),
        final_energy_drift: last.abs(),
    }
}

/// Growth bounds for `g ≤ 0`, using centred differences of `I = ∫ηψ` and `E = E(0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtReport {
    pub energy: f64,
    pub growth: BoundReport,
    pub integrated: Option<BoundReport>,
    pub coercivity: Option<BoundReport>,
    /// Smallest admissible constant in the explicit lower bound.
    #[serde(with = "crate::float_repr")]
    pub lower_bound_constant: f64,
}

/// `slack` is relative to `|E|`: the rate bound passes if `dI/dt − |E| ≥ −slack|E|`.
pub fn check_rt_bounds(traj: &Trajectory, slack: f64) -> Result<RtReport, DiagnosticsError> {
    if traj.g > 0.0 {
        return Err(DiagnosticsError::Precondition("growth bounds need g <= 0".into()));
    }
    traj.need_interior()?;
    let e = traj.snapshots[0].record.e_total;
    let target = e.abs();
    let i_v = traj.series(|r| r.i_virial);
    let i0 = i_v[0];
    let mut growth = BoundReport::empty(IdentityId::RtVirialGrowth);
    for i in traj.interior() {
        let rate = traj.d1(&i_v, i);
        growth.push(i as u64, target - slack * target, rate, 0.0);
    }
    growth.measured_constant = traj.interior().map(|i| traj.d1(&i_v, i) / target.max(1e-300)).fold(f64::INFINITY, f64::min);
    let gabs = traj.g.abs();
    let (integrated, coercivity) = if traj.g == 0.0 {
        let mut b = BoundReport::empty(IdentityId::RtIntegratedGrowth);
        for (i, s) in traj.snapshots.iter().enumerate().skip(1) {
            let t = s.record.t - traj.snapshots[0].record.t;
            b.push(i as u64, e * t + i0 - slack * e.abs() * t, i_v[i], 0.0);
        }
        (Some(b), None)
    } else {
        let mut b = BoundReport::empty(IdentityId::RtCoercivity);
        for (i, s) in traj.snapshots.iter().enumerate() {
            b.push_margin(i as u64, e + 0.5 * gabs * s.record.extra("eta_sq"), 1e-10);
        }
        b.measured_constant = b.min_margin;
        (None, Some(b))
    };
    let mut c: f64 = 0.0;
    for s in traj.snapshots.iter().skip(1) {
        let r = &s.record;
        let t = r.t - traj.snapshots[0].record.t;
        let coer = (e + 0.5 * gabs * r.extra("eta_sq")).max(0.0);
        let l = r.extra("eta_sq").sqrt() * (1.0 + r.extra("slope_sup")).sqrt() * coer.sqrt();
        if l > 0.0 {
            c = c.max((target * t + i0) / l);
        }
    }
    Ok(RtReport { energy: e, growth, integrated, coercivity, lower_bound_constant: c })
}

/// Observed orders `log2(r_l / r_{l+1})` between successive halvings.
pub fn observed_orders(residuals: &[f64]) -> Vec<f64> {
    residuals.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_slope(&lx, &ly)
}

/// Least-squares slope of `y` against `x`.
pub fn linear_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
