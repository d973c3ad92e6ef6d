//! Surface evolution `η_t = G(η)ψ`, `ψ_t = −gη − N(η, ψ)` with classical RK4.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtn::{Depth, DtnError, DtnSolver, SurfaceTraces};
use crate::spectral::{PeriodicGrid, SurfaceField};

pub const DEFAULT_CFL: f64 = 0.5;
pub const DEFAULT_FILTER_STRENGTH: f64 = 36.0;
/// Pointwise tolerance between the two closed forms of `N`.
pub const NONLINEARITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("RK4 stage {stage} rejected: {source}")]
    StepRejected { stage: usize, source: DtnError },
    #[error(transparent)]
    Dtn(#[from] DtnError),
    #[error("time step {dt:e} exceeds the stability bound {max_dt:e}")]
    CflViolation { dt: f64, max_dt: f64 },
    #[error("negative gravity needs a spectral filter and t_end <= 1 (got t_end = {t_end})")]
    IllPosedSetup { t_end: f64 },
    #[error("closed forms of the nonlinearity disagree by {0:e}")]
    NonlinearityMismatch(f64),
    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),
}

/// Surface elevation and velocity potential at time `t`.
#[derive(Debug, Clone)]
pub struct SurfaceState {
    pub eta: SurfaceField,
    pub psi: SurfaceField,
    pub t: f64,
    pub g: f64,
    pub depth: Depth,
}

/// Exponential cutoff acting beyond `2/3` of the largest wavenumber.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralFilter {
    pub strength: f64,
}

impl Default for SpectralFilter {
    fn default() -> Self {
        Self { strength: DEFAULT_FILTER_STRENGTH }
    }
}

impl SpectralFilter {
    pub fn factor(&self, xi: f64, k_max: f64) -> f64 {
        let kc = 2.0 * k_max / 3.0;
        let a = xi.abs();
        if a <= kc {
            1.0
        } else {
            (-self.strength * ((a - kc) / (k_max - kc)).powi(4)).exp()
        }
    }

    pub fn apply(&self, f: &SurfaceField) -> SurfaceField {
        let km = f.grid().k_max() as f64;
        f.apply_real_multiplier(|xi| self.factor(xi, km)).expect("finite filter")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsOptions {
    pub dealias: bool,
    pub filter: Option<SpectralFilter>,
    pub cfl: f64,
}

impl Default for DynamicsOptions {
    fn default() -> Self {
        Self { dealias: true, filter: None, cfl: DEFAULT_CFL }
    }
}

/// `N = ½V² − ½B² + BVη'`.
pub fn nonlinearity_bv(tr: &SurfaceTraces) -> SurfaceField {
    let n = tr.b.len();
    let (b, v, ex) = (tr.b.values(), tr.v.values(), tr.eta_x.values());
    let vals = (0..n).map(|i| 0.5 * v[i] * v[i] - 0.5 * b[i] * b[i] + b[i] * v[i] * ex[i]).collect();
    SurfaceField::from_values(tr.b.grid(), vals).expect("finite nonlinearity")
}

/// `N = ½ψ'² − ½(ψ'η' + Gψ)²/(1 + η'²)`.
pub fn nonlinearity_zcs(tr: &SurfaceTraces) -> SurfaceField {
    let n = tr.b.len();
    let (px, ex, gp) = (tr.psi_x.values(), tr.eta_x.values(), tr.g_psi.values());
    let vals = (0..n)
        .map(|i| {
            let q = px[i] * ex[i] + gp[i];
            0.5 * px[i] * px[i] - 0.5 * q * q / (1.0 + ex[i] * ex[i])
        })
        .collect();
    SurfaceField::from_values(tr.b.grid(), vals).expect("finite nonlinearity")
}

/// Right-hand side of the evolution together with the surface traces it used.
#[derive(Debug, Clone)]
pub struct Tendency {
    pub eta_t: SurfaceField,
    pub psi_t: SurfaceField,
    pub nonlinearity: SurfaceField,
    pub traces: SurfaceTraces,
}

pub struct WaveModel {
    solver: DtnSolver,
    pub g: f64,
    pub options: DynamicsOptions,
}

impl std::fmt::Debug for WaveModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WaveModel").field("solver", &self.solver).field("g", &self.g).finish()
    }
}

impl WaveModel {
    pub fn new(grid: &PeriodicGrid, depth: Depth, n_z: usize, g: f64, options: DynamicsOptions) -> Result<Self, DtnError> {
        Ok(Self { solver: DtnSolver::new(grid, depth, n_z)?, g, options })
    }

    pub fn solver(&self) -> &DtnSolver {
        &self.solver
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.solver.grid()
    }

    pub fn depth(&self) -> Depth {
        self.solver.depth()
    }

    pub fn state(&self, eta: SurfaceField, psi: SurfaceField, t: f64) -> SurfaceState {
        SurfaceState { eta, psi, t, g: self.g, depth: self.depth() }
    }

    /// `c_cfl / sqrt(max(|g|, 1) k_max)`.
    pub fn max_dt(&self) -> f64 {
        self.options.cfl / (self.g.abs().max(1.0) * self.grid().k_max() as f64).sqrt()
    }

    pub fn tendency(&self, eta: &SurfaceField, psi: &SurfaceField) -> Result<Tendency, DynamicsError> {
        let traces = self.solver.traces(eta, psi)?;
        let n_bv = nonlinearity_bv(&traces);
        let n_zcs = nonlinearity_zcs(&traces);
        let gap = n_bv.sub(&n_zcs).sup_norm();
        if gap > NONLINEARITY_TOLERANCE * n_bv.sup_norm().max(1.0) {
            return Err(DynamicsError::NonlinearityMismatch(gap));
        }
        let nonlinearity = if self.options.dealias { n_bv.two_thirds_filter() } else { n_bv.without_nyquist() };
        let psi_t = eta.scale(-self.g).sub(&nonlinearity);
        Ok(Tendency { eta_t: traces.g_psi.clone(), psi_t, nonlinearity, traces })
    }

    pub fn rhs(&self, state: &SurfaceState) -> Result<(SurfaceField, SurfaceField), DynamicsError> {
        let t = self.tendency(&state.eta, &state.psi)?;
        Ok((t.eta_t, t.psi_t))
    }

    /// One classical RK4 step followed by mean projection of `η` and the optional filter.
    pub fn step_rk4(&self, state: &SurfaceState, dt: f64) -> Result<SurfaceState, DynamicsError> {
        let max_dt = self.max_dt();
        if !(dt > 0.0 && dt <= max_dt * (1.0 + 1e-12)) {
            return Err(DynamicsError::CflViolation { dt, max_dt });
        }
        let stage = |k: usize, eta: &SurfaceField, psi: &SurfaceField| {
            self.rhs(&SurfaceState { eta: eta.clone(), psi: psi.clone(), ..state.clone() }).map_err(|e| match e {
                DynamicsError::Dtn(source) => DynamicsError::StepRejected { stage: k, source },
                other => other,
            })
        };
        let (e0, p0) = (&state.eta, &state.psi);
        let (k1e, k1p) = stage(1, e0, p0)?;
        let (k2e, k2p) = stage(2, &e0.axpy(0.5 * dt, &k1e), &p0.axpy(0.5 * dt, &k1p))?;
        let (k3e, k3p) = stage(3, &e0.axpy(0.5 * dt, &k2e), &p0.axpy(0.5 * dt, &k2p))?;
        let (k4e, k4p) = stage(4, &e0.axpy(dt, &k3e), &p0.axpy(dt, &k3p))?;
        let combine = |y: &SurfaceField, a: &SurfaceField, b: &SurfaceField, c: &SurfaceField, d: &SurfaceField| {
            let n = y.len();
            let vals = (0..n)
                .map(|i| {
                    y.values()[i]
                        + dt / 6.0 * (a.values()[i] + 2.0 * b.values()[i] + 2.0 * c.values()[i] + d.values()[i])
                })
                .collect();
            SurfaceField::from_values(y.grid(), vals).expect("finite state")
        };
        let mut eta = combine(e0, &k1e, &k2e, &k3e, &k4e).mean_free();
        let mut psi = combine(p0, &k1p, &k2p, &k3p, &k4p);
        if let Some(f) = self.options.filter {
            eta = f.apply(&eta);
            psi = f.apply(&psi);
        }
        Ok(SurfaceState { eta, psi, t: state.t + dt, ..state.clone() })
    }

    /// Integrates to `t_end`, returning states every `dt_out` (including the initial one).
    /// The internal step is the largest `dt_out / m` below the stability bound.
    pub fn run(&self, initial: &SurfaceState, t_end: f64, dt_out: f64) -> Result<Vec<SurfaceState>, DynamicsError> {
        self.run_with(initial, t_end, dt_out, |_| Ok(()))
    }

    pub fn run_with(
        &self,
        initial: &SurfaceState,
        t_end: f64,
        dt_out: f64,
        observe: impl FnMut(&SurfaceState) -> Result<(), DynamicsError>,
    ) -> Result<Vec<SurfaceState>, DynamicsError> {
        self.run_substeps(initial, t_end, dt_out, None, observe)
    }

    /// As [`run_with`](Self::run_with) with `substeps` RK4 steps per output interval;
    /// `None` picks the fewest steps allowed by the stability bound.
    pub fn run_substeps(
        &self,
        initial: &SurfaceState,
        t_end: f64,
        dt_out: f64,
        substeps: Option<usize>,
        mut observe: impl FnMut(&SurfaceState) -> Result<(), DynamicsError>,
    ) -> Result<Vec<SurfaceState>, DynamicsError> {
        if !(dt_out > 0.0 && t_end >= initial.t && dt_out.is_finite() && t_end.is_finite()) {
            return Err(DynamicsError::InvalidTimeGrid(format!("dt_out = {dt_out}, t_end = {t_end}")));
        }
        if self.g < 0.0 && (self.options.filter.is_none() || t_end - initial.t > 1.0 + 1e-12) {
            return Err(DynamicsError::IllPosedSetup { t_end });
        }
        let n_out = ((t_end - initial.t) / dt_out).round() as usize;
        let sub = match substeps {
            Some(0) => return Err(DynamicsError::InvalidTimeGrid("zero substeps".into())),
            Some(m) => m,
            None => (dt_out / self.max_dt()).ceil().max(1.0) as usize,
        };
        let dt = dt_out / sub as f64;
        if dt > self.max_dt() * (1.0 + 1e-12) {
            return Err(DynamicsError::CflViolation { dt, max_dt: self.max_dt() });
        }
        let mut out = Vec::with_capacity(n_out + 1);
        let mut s = initial.clone();
        observe(&s)?;
        out.push(s.clone());
        for i in 1..=n_out {
            for _ in 0..sub {
                s = self.step_rk4(&s, dt)?;
            }
            s.t = initial.t + i as f64 * dt_out;
            observe(&s)?;
            out.push(s.clone());
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(n: usize, depth: Depth, g: f64) -> WaveModel {
        let grid = PeriodicGrid::new(n).unwrap();
        WaveModel::new(&grid, depth, 24, g, DynamicsOptions::default()).unwrap()
    }

    #[test]
    fn nonlinearity_forms_agree() {
        let m = model(32, Depth::finite(1.0), 1.0);
        let g = m.grid().clone();
        let eta = SurfaceField::from_fn(&g, |x| 0.2 * x.cos() - 0.05 * (3.0 * x).sin()).unwrap();
        let psi = SurfaceField::from_fn(&g, |x| 0.7 * x.sin() + 0.1 * (2.0 * x).cos()).unwrap();
        let tr = m.solver().traces(&eta, &psi).unwrap();
        let d = nonlinearity_bv(&tr).sub(&nonlinearity_zcs(&tr)).sup_norm();
        assert!(d < 1e-13, "{d}");
    }

    #[test]
    fn rest_state_stays_at_rest() {
        let m = model(16, Depth::infinite(), 1.0);
        let z = SurfaceField::zeros(m.grid());
        let s = m.state(z.clone(), z, 0.0);
        let out = m.step_rk4(&s, 0.01).unwrap();
        assert_eq!(out.eta.sup_norm(), 0.0);
        assert_eq!(out.psi.sup_norm(), 0.0);
    }

    #[test]
    fn cfl_guard() {
        let m = model(32, Depth::finite(1.0), 1.0);
        let z = SurfaceField::zeros(m.grid());
        let s = m.state(z.clone(), z, 0.0);
        assert!(matches!(m.step_rk4(&s, 1.0), Err(DynamicsError::CflViolation { .. })));
    }

    #[test]
    fn negative_gravity_needs_filter() {
        let m = model(16, Depth::infinite(), -1.0);
        let z = SurfaceField::zeros(m.grid());
        let s = m.state(z.clone(), z, 0.0);
        assert!(matches!(m.run(&s, 0.5, 0.1), Err(DynamicsError::IllPosedSetup { .. })));
    }

    #[test]
    fn stage_geometry_failure_is_reported() {
        let m = model(16, Depth::finite(1.0), 1.0);
        let g = m.grid().clone();
        let eta = SurfaceField::from_fn(&g, |x| 0.6 * x.cos()).unwrap();
        let s = m.state(eta, SurfaceField::zeros(&g), 0.0);
        assert!(matches!(m.step_rk4(&s, 0.01), Err(DynamicsError::StepRejected { stage: 1, .. })));
    }

    #[test]
    fn linear_dispersion_quarter_period() {
        let h = 1.0;
        let m = model(16, Depth::finite(h), 1.0);
        let g = m.grid().clone();
        let eps = 1e-4;
        let omega = h.tanh().sqrt();
        let period = 2.0 * std::f64::consts::PI / omega;
        let eta = SurfaceField::from_fn(&g, |x| eps * x.cos()).unwrap();
        let s = m.state(eta, SurfaceField::zeros(&g), 0.0);
        let dt = period / 200.0;
        let out = m.run(&s, 50.0 * dt, dt).unwrap();
        let last = out.last().unwrap();
        // η = ε cos(ωt) cos x, ψ = −(ε/ω) g sin(ωt) cos x
        let t = last.t;
        let want_psi = -eps / omega * (omega * t).sin();
        let got_psi = last.psi.coefficients()[1].re * 2.0;
        assert!(((got_psi - want_psi) / want_psi).abs() < 1e-3, "{got_psi} {want_psi}");
        assert!(last.eta.coefficients()[1].re.abs() < 1e-3 * eps);
    }
}
