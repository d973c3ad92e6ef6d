//! Randomised checks of trace inequalities and structural properties of the DtN operator.
//!
//! Surfaces are truncated Fourier series with uniform random phases and amplitudes
//! decaying like `|ξ|^{-2}`, rescaled to the requested slope. Every sample is generated
//! from its own seed `spec.seed + index`, so any reported worst case can be replayed.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{linear_slope, loglog_slope, BoundReport, IdentityId};
use crate::dtn::{Depth, DtnError, DtnSolver};
use crate::dynamics::nonlinearity_bv;
use crate::spectral::{PeriodicGrid, SpectralError, SurfaceField};

/// Explicit constant used to flag samples of the duality estimate.
///
/// With `f̂` normalised by `1/n`, Cauchy–Schwarz in Fourier gives
/// `|∫σf| ≤ 2π ‖σ‖_{Ḣ^{-1/2}} ‖f‖_{Ḣ^{1/2}}`, so `2π` is the constant that
/// remains once the trace lower bound supplies `∫fG(σ)f ≳ ‖f‖²_{Ḣ^{1/2}}/(1+‖σ'‖_∞)`.
pub const DUALITY_REFERENCE_CONSTANT: f64 = TAU;

/// Default tolerance for inequality margins.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InequalityError {
    #[error("invalid sample spec: {0}")]
    InvalidSpec(String),
    #[error("sample {seed} violates its declared cap: {what}")]
    SamplerCap { seed: u64, what: String },
    #[error("depth {0} is below the required minimum {1}")]
    DepthTooSmall(f64, f64),
    #[error("inf η = {inf_eta} must exceed -h/3 = {bound} at h = {h}")]
    Geometry { h: f64, inf_eta: f64, bound: f64 },
    #[error("need at least {0} values")]
    TooFewPoints(usize),
    #[error(transparent)]
    Dtn(#[from] DtnError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Ensemble description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    pub count: usize,
    pub seed: u64,
    /// Upper bound on `sup|η|`.
    pub amplitude: f64,
    pub max_mode: usize,
    /// Target for `‖η'‖_∞`.
    pub slope_cap: f64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        Self { count: 100, seed: 20_240_601, amplitude: 0.4, max_mode: 8, slope_cap: 0.5 }
    }
}

impl SampleSpec {
    pub fn validate(&self, grid: &PeriodicGrid) -> Result<(), InequalityError> {
        let bad = |m: String| Err(InequalityError::InvalidSpec(m));
        if self.count == 0 {
            return bad("count must be at least 1".into());
        }
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return bad(format!("amplitude must be positive, got {}", self.amplitude));
        }
        if !(self.slope_cap.is_finite() && self.slope_cap > 0.0) {
            return bad(format!("slope_cap must be positive, got {}", self.slope_cap));
        }
        if self.max_mode == 0 || 3 * self.max_mode > grid.len() {
            return bad(format!("max_mode {} must lie in 1..={} for n_x = {}", self.max_mode, grid.len() / 3, grid.len()));
        }
        Ok(())
    }

    pub fn sample_seed(&self, index: usize) -> u64 {
        self.seed.wrapping_add(index as u64)
    }
}

/// One ensemble member.
#[derive(Debug, Clone)]
pub struct Sample {
    pub seed: u64,
    pub eta: SurfaceField,
    pub psi: SurfaceField,
    /// Second potential, for bilinear checks.
    pub phi: SurfaceField,
}

/// Mean-free series `Σ_{k ≤ max_mode} k^{-2} cos(kx + θ_k)` with uniform phases.
pub fn random_field(grid: &PeriodicGrid, max_mode: usize, rng: &mut impl Rng) -> Result<SurfaceField, SpectralError> {
    let modes: Vec<(f64, f64)> = (1..=max_mode).map(|k| (k as f64, rng.random_range(0.0..TAU))).collect();
    SurfaceField::from_fn(grid, |x| modes.iter().map(|&(k, th)| (k * x + th).cos() / (k * k)).sum())
}

/// Largest admissible `sup(−η)` for the geometry guard of `depth`.
fn depth_margin(depth: Depth) -> f64 {
    0.45 * depth.strip_depth()
}

/// Builds sample `index` of `spec`.
pub fn sample(grid: &PeriodicGrid, spec: &SampleSpec, depth: Depth, index: usize) -> Result<Sample, InequalityError> {
    let seed = spec.sample_seed(index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = random_field(grid, spec.max_mode, &mut rng)?;
    let mut eta = f.scale(spec.slope_cap / f.derivative().sup_norm());
    let sup = eta.sup_norm();
    if sup > spec.amplitude {
        eta = eta.scale(spec.amplitude / sup);
    }
    let low = -eta.min();
    if low > depth_margin(depth) {
        eta = eta.scale(depth_margin(depth) / low);
    }
    let offset = rng.random_range(-1.0..1.0);
    let psi = random_field(grid, spec.max_mode, &mut rng)?.map(|v| v + offset);
    let phi = random_field(grid, spec.max_mode, &mut rng)?;
    let s = Sample { seed, eta, psi, phi };
    verify_sample(&s, spec, depth)?;
    Ok(s)
}

/// Re-checks the caps a sample was built to satisfy.
pub fn verify_sample(s: &Sample, spec: &SampleSpec, depth: Depth) -> Result<(), InequalityError> {
    let fail = |what: String| Err(InequalityError::SamplerCap { seed: s.seed, what });
    if s.eta.mean().abs() > 1e-14 {
        return fail(format!("mean {:e}", s.eta.mean()));
    }
    let slope = s.eta.derivative().sup_norm();
    if slope > spec.slope_cap * (1.0 + 1e-12) {
        return fail(format!("slope {slope} above {}", spec.slope_cap));
    }
    if s.eta.sup_norm() > spec.amplitude * (1.0 + 1e-12) {
        return fail(format!("amplitude {} above {}", s.eta.sup_norm(), spec.amplitude));
    }
    if -s.eta.min() > depth_margin(depth) * (1.0 + 1e-12) {
        return fail(format!("inf η = {} too deep", s.eta.min()));
    }
    Ok(())
}

fn ensemble<'a>(
    solver: &'a DtnSolver,
    spec: &SampleSpec,
) -> Result<impl Iterator<Item = Result<Sample, InequalityError>> + 'a, InequalityError> {
    spec.validate(solver.grid())?;
    let spec = spec.clone();
    Ok((0..spec.count).map(move |i| sample(solver.grid(), &spec, solver.depth(), i)))
}

fn tanh_depth(depth: Depth) -> f64 {
    match depth {
        Depth::Finite { h } => h.tanh(),
        Depth::Infinite { .. } => 1.0,
    }
}

/// Ratio `∫ψG(η)ψ / [tanh(h)/(1+‖η'‖_∞) ‖ψ‖²_{Ḣ^{1/2}}]`.
pub fn trace_ratio(solver: &DtnSolver, eta: &SurfaceField, psi: &SurfaceField) -> Result<f64, InequalityError> {
    let q = psi.inner(&solver.dtn_apply(eta, psi)?);
    let norm = psi.homogeneous_norm(0.5)?.powi(2);
    let weight = tanh_depth(solver.depth()) / (1.0 + eta.derivative().sup_norm());
    Ok(q / (weight * norm))
}

/// Trace lower bound; `measured_constant` is the smallest ratio over the ensemble.
pub fn check_trace_lower_bound(solver: &DtnSolver, spec: &SampleSpec, tol: f64) -> Result<BoundReport, InequalityError> {
    let mut report = BoundReport::empty(IdentityId::TraceLowerBound);
    let mut c_min = f64::INFINITY;
    for s in ensemble(solver, spec)? {
        let s = s?;
        let r = trace_ratio(solver, &s.eta, &s.psi)?;
        c_min = c_min.min(r);
        report.push_margin(s.seed, r, tol);
    }
    report.measured_constant = c_min;
    Ok(report)
}

/// Cauchy–Schwarz for the DtN form and the bounds `0 ≤ ∫ηG(η)η ≤ 2π·(h or |inf η|)`.
pub fn check_dtn_quadratic_bounds(
    solver: &DtnSolver,
    spec: &SampleSpec,
    tol: f64,
) -> Result<(BoundReport, BoundReport), InequalityError> {
    let mut cs = BoundReport::empty(IdentityId::DtnCauchySchwarz);
    let mut upper = BoundReport::empty(IdentityId::DtnQuadraticUpper);
    let (mut ratio_max, mut cs_max): (f64, f64) = (0.0, 0.0);
    for s in ensemble(solver, spec)? {
        let s = s?;
        let g_eta = solver.dtn_apply(&s.eta, &s.eta)?;
        let g_psi = solver.dtn_apply(&s.eta, &s.psi)?;
        let a_ee = s.eta.inner(&g_eta);
        let a_pp = s.psi.inner(&g_psi);
        let a_ep = s.eta.inner(&g_psi);
        let geo = (a_ee.max(0.0) * a_pp.max(0.0)).sqrt();
        if geo > 0.0 {
            cs_max = cs_max.max(a_ep.abs() / geo);
        }
        cs.push(s.seed, a_ep.abs(), geo, tol);
        let cap = match solver.depth() {
            Depth::Finite { h } => TAU * h,
            Depth::Infinite { .. } => TAU * (-s.eta.min()),
        };
        ratio_max = ratio_max.max(a_ee / cap);
        upper.push_margin(s.seed, (a_ee / cap).min((cap - a_ee) / cap), tol);
    }
    cs.measured_constant = cs_max;
    upper.measured_constant = ratio_max;
    Ok((cs, upper))
}

/// `(|∫σf|, ‖σ‖_{Ḣ^{-1/2}} (1+‖σ'‖_∞)^{1/2} (∫fG(σ)f)^{1/2})`.
pub fn duality_sides(solver: &DtnSolver, sigma: &SurfaceField, f: &SurfaceField) -> Result<(f64, f64), InequalityError> {
    let lhs = sigma.inner(f).abs();
    let q = f.inner(&solver.dtn_apply(sigma, f)?).max(0.0);
    let rhs = sigma.homogeneous_norm(-0.5)? * (1.0 + sigma.derivative().sup_norm()).sqrt() * q.sqrt();
    Ok((lhs, rhs))
}

/// Duality estimate with σ = η-sample and f = ψ-sample; needs `h ≥ 1`.
/// `measured_constant` is the largest ratio; samples exceeding
/// [`DUALITY_REFERENCE_CONSTANT`] count as violations.
pub fn check_duality_estimate(solver: &DtnSolver, spec: &SampleSpec, tol: f64) -> Result<BoundReport, InequalityError> {
    if let Depth::Finite { h } = solver.depth() {
        if h < 1.0 {
            return Err(InequalityError::DepthTooSmall(h, 1.0));
        }
    }
    let mut report = BoundReport::empty(IdentityId::DualityEstimate);
    let mut c_max: f64 = 0.0;
    for s in ensemble(solver, spec)? {
        let s = s?;
        let (lhs, rhs) = duality_sides(solver, &s.eta, &s.psi)?;
        if rhs > 0.0 {
            c_max = c_max.max(lhs / rhs);
        }
        report.push(s.seed, lhs, DUALITY_REFERENCE_CONSTANT * rhs, tol);
    }
    report.measured_constant = c_max;
    Ok(report)
}

/// Positivity, symmetry, mean-free output and `G(η)η ≤ 1` over an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralReport {
    /// Margin `∫ψGψ`; measured constant is the smallest value.
    pub positivity: BoundReport,
    /// Margin `−|∫φGψ − ∫ψGφ| / (∫φGφ ∫ψGψ)^{1/2}`; measured constant is the largest asymmetry.
    pub symmetry: BoundReport,
    /// Margin `−|∫Gψ|`; measured constant is the largest mean.
    pub mean_zero: BoundReport,
    /// Margin `1 − max G(η)η`; measured constant is the largest value of `G(η)η`.
    pub zaremba: BoundReport,
}

pub fn check_structural(solver: &DtnSolver, spec: &SampleSpec) -> Result<StructuralReport, InequalityError> {
    let mut positivity = BoundReport::empty(IdentityId::DtnPositivity);
    let mut symmetry = BoundReport::empty(IdentityId::DtnSymmetry);
    let mut mean_zero = BoundReport::empty(IdentityId::DtnMeanZero);
    let mut zaremba = BoundReport::empty(IdentityId::ZarembaBound);
    let (mut q_min, mut asym, mut mean_max, mut z_max) = (f64::INFINITY, 0.0f64, 0.0f64, f64::NEG_INFINITY);
    for s in ensemble(solver, spec)? {
        let s = s?;
        let g_psi = solver.dtn_apply(&s.eta, &s.psi)?;
        let g_phi = solver.dtn_apply(&s.eta, &s.phi)?;
        let g_eta = solver.dtn_apply(&s.eta, &s.eta)?;
        let a_pp = s.psi.inner(&g_psi);
        let a_ff = s.phi.inner(&g_phi);
        q_min = q_min.min(a_pp).min(a_ff);
        positivity.push_margin(s.seed, a_pp.min(a_ff), 1e-10);
        let rel = (s.phi.inner(&g_psi) - s.psi.inner(&g_phi)).abs() / (a_pp * a_ff).sqrt().max(f64::MIN_POSITIVE);
        asym = asym.max(rel);
        symmetry.push_margin(s.seed, -rel, 1e-9);
        let m = g_psi.integrate().abs().max(g_phi.integrate().abs());
        mean_max = mean_max.max(m);
        mean_zero.push_margin(s.seed, -m, 1e-10);
        let z = g_eta.max();
        z_max = z_max.max(z);
        zaremba.push_margin(s.seed, 1.0 - z, 1e-8);
    }
    positivity.measured_constant = q_min;
    symmetry.measured_constant = asym;
    mean_zero.measured_constant = mean_max;
    zaremba.measured_constant = z_max;
    Ok(StructuralReport { positivity, symmetry, mean_zero, zaremba })
}

/// Remainders of the first-order expansion in the surface shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeDerivativeReport {
    pub epsilons: Vec<f64>,
    /// `‖G(η+εζ)ψ − G(η)ψ − ε dG(η)ψ·ζ‖_{L²}`.
    #[serde(with = "crate::float_repr::vec")]
    pub remainders: Vec<f64>,
    #[serde(with = "crate::float_repr")]
    pub order: f64,
}

pub fn check_shape_derivative(
    solver: &DtnSolver,
    eta: &SurfaceField,
    psi: &SurfaceField,
    zeta: &SurfaceField,
    epsilons: &[f64],
) -> Result<ShapeDerivativeReport, InequalityError> {
    if epsilons.len() < 2 {
        return Err(InequalityError::TooFewPoints(2));
    }
    let g0 = solver.dtn_apply(eta, psi)?;
    let dg = solver.dtn_shape_derivative(eta, psi, zeta)?;
    let mut remainders = Vec::with_capacity(epsilons.len());
    for &e in epsilons {
        let g = solver.dtn_apply(&eta.axpy(e, zeta), psi)?;
        remainders.push(g.sub(&g0).axpy(-e, &dg).l2_norm());
    }
    let order = loglog_slope(epsilons, &remainders);
    Ok(ShapeDerivativeReport { epsilons: epsilons.to_vec(), remainders, order })
}

/// Rellich identity `∫N = ½∫|φ_x(−h)|²` at one state; returns `(lhs, rhs)`.
pub fn rellich_sides(solver: &DtnSolver, eta: &SurfaceField, psi: &SurfaceField) -> Result<(f64, f64), InequalityError> {
    let ext = solver.harmonic_extension(eta, psi)?;
    let g = ext.dtn();
    let bottom = if solver.depth().is_infinite() { 0.0 } else { 0.5 * ext.bottom_gradient().l2_norm().powi(2) };
    let tr = crate::dtn::SurfaceTraces::from_dtn(eta, psi, g);
    Ok((nonlinearity_bv(&tr).integrate(), bottom))
}

/// Largest relative Rellich residual over an ensemble (absolute in infinite depth).
pub fn check_rellich_ensemble(solver: &DtnSolver, spec: &SampleSpec, tol: f64) -> Result<BoundReport, InequalityError> {
    let mut report = BoundReport::empty(IdentityId::Rellich);
    let mut worst: f64 = 0.0;
    for s in ensemble(solver, spec)? {
        let s = s?;
        let (lhs, rhs) = rellich_sides(solver, &s.eta, &s.psi)?;
        let r = if solver.depth().is_infinite() {
            (lhs - rhs).abs()
        } else {
            (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE)
        };
        worst = worst.max(r);
        report.push_margin(s.seed, -r, tol);
    }
    report.measured_constant = worst;
    Ok(report)
}

/// Bottom-trace energies over a depth sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BottomDecayReport {
    pub depths: Vec<f64>,
    /// `D(h) = ∫|φ_x(·, −h)|²`.
    pub energies: Vec<f64>,
    /// Fitted slope of `log D` against `h`.
    #[serde(with = "crate::float_repr")]
    pub slope: f64,
    /// Smallest `C` with `D(h) ≤ C (1+‖η'‖³_∞) e^{−h/4} ‖ψ‖²_{H^{1/2}}` on the sweep.
    pub constant: f64,
    /// Margin `−1/4 − slope`.
    pub bound: BoundReport,
}

pub fn check_bottom_decay(
    grid: &PeriodicGrid,
    n_z: usize,
    eta: &SurfaceField,
    psi: &SurfaceField,
    depths: &[f64],
    tol: f64,
) -> Result<BottomDecayReport, InequalityError> {
    if depths.len() < 2 {
        return Err(InequalityError::TooFewPoints(2));
    }
    let slope_w = 1.0 + eta.derivative().sup_norm().powi(3);
    let norm = psi.inhomogeneous_norm(0.5).powi(2);
    let mut energies = Vec::with_capacity(depths.len());
    let mut constant: f64 = 0.0;
    for &h in depths {
        if h < 2.0 {
            return Err(InequalityError::DepthTooSmall(h, 2.0));
        }
        if eta.min() <= -h / 3.0 {
            return Err(InequalityError::Geometry { h, inf_eta: eta.min(), bound: -h / 3.0 });
        }
        let solver = DtnSolver::new(grid, Depth::finite(h), n_z)?;
        let d = solver.harmonic_extension(eta, psi)?.bottom_gradient().l2_norm().powi(2);
        energies.push(d);
        if norm > 0.0 {
            constant = constant.max(d / (slope_w * (-h / 4.0).exp() * norm));
        }
    }
    // Below this the bottom trace is roundoff and carries no decay information.
    let negligible = 1e-20 * norm.max(1.0);
    let slope = if energies.iter().all(|&d| d > negligible) {
        let logs: Vec<f64> = energies.iter().map(|d| d.ln()).collect();
        linear_slope(depths, &logs)
    } else {
        f64::NEG_INFINITY
    };
    let mut bound = BoundReport::empty(IdentityId::BottomDecay);
    bound.push_margin(0, -0.25 - slope, tol);
    bound.measured_constant = constant;
    Ok(BottomDecayReport { depths: depths.to_vec(), energies, slope, constant, bound })
}

/// Flat-geometry trace ratio for `ψ = cos(kx)`: `2π tanh(hk)/tanh(h)`.
pub fn flat_trace_ratio(k: f64, depth: Depth) -> f64 {
    // ∫ψG(0)ψ = π k tanh(hk) and ‖ψ‖²_{Ḣ^{1/2}} = k/2 under the 1/n normalisation.
    let q = PI * depth.flat_symbol(k);
    q / (tanh_depth(depth) * k / 2.0)
}
