//! Third-order perturbative standing wave in infinite depth and its energy integrals.
//!
//! Dimensionless variables: amplitude `ε`, time `t ∈ [0, 2π)` with frequency
//! `ω = 1 − ε²/8`, physical surface `εη`. By symmetry in `x` the energy integrals run
//! over `x ∈ [0, π]`, half of the full torus.
//!
//! Vertical integrals `∫_{−∞}^{εη} e^{ny} dy = e^{nεη}/n` are closed form; the `x` and
//! `t` integrals use periodic trapezoid rules, which converge spectrally here.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::loglog_slope;
use crate::spectral::{PeriodicGrid, SpectralError, SurfaceField};

/// Largest amplitude accepted; beyond it the truncated series is not meaningful.
pub const MAX_EPSILON: f64 = 0.3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StandingWaveError {
    #[error("amplitude {0} outside [0, {MAX_EPSILON}]")]
    InvalidAmplitude(f64),
    #[error("quadrature needs at least {min} nodes in {axis}, got {got}")]
    InvalidQuadrature { axis: &'static str, min: usize, got: usize },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Truncated expansion `η = η⁰ + εη¹ + ε²η²`, `φ = φ⁰ + εφ¹ + ε²φ²`.
///
/// `a13, a33, b13, b33` are the free coefficients of the third-harmonic terms of `φ²` and `η²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandingWaveExpansion {
    pub epsilon: f64,
    #[serde(default)]
    pub a13: f64,
    #[serde(default)]
    pub a33: f64,
    #[serde(default)]
    pub b13: f64,
    #[serde(default)]
    pub b33: f64,
}

/// Node counts of the `(x, t)` trapezoid rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quadrature {
    pub n_x: usize,
    pub n_t: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self { n_x: 64, n_t: 128 }
    }
}

impl Quadrature {
    pub fn validate(&self) -> Result<(), StandingWaveError> {
        if self.n_x < 16 {
            return Err(StandingWaveError::InvalidQuadrature { axis: "x", min: 16, got: self.n_x });
        }
        if self.n_t < 64 {
            return Err(StandingWaveError::InvalidQuadrature { axis: "t", min: 64, got: self.n_t });
        }
        Ok(())
    }

    /// `∫₀^π f dx` for `f` even and 2π-periodic: half the full-period trapezoid sum.
    fn half_period(&self, f: impl Fn(f64) -> f64) -> f64 {
        let h = 2.0 * PI / self.n_x as f64;
        0.5 * h * (0..self.n_x).map(|j| f(j as f64 * h)).sum::<f64>()
    }

    /// `∫₀^{2π} f dt`.
    fn period(&self, f: impl Fn(f64) -> f64) -> f64 {
        let h = 2.0 * PI / self.n_t as f64;
        h * (0..self.n_t).map(|j| f(j as f64 * h)).sum::<f64>()
    }
}

/// One velocity component `Σ c_n e^{ny}` with harmonics `n ∈ {1, 3}`.
#[derive(Debug, Clone, Copy)]
struct ExpSum {
    c1: f64,
    c3: f64,
}

impl ExpSum {
    /// `∫_{−∞}^{y} (Σ c_n e^{n s})² ds`.
    fn square_integral(&self, y: f64) -> f64 {
        self.c1 * self.c1 * (2.0 * y).exp() / 2.0
            + 2.0 * self.c1 * self.c3 * (4.0 * y).exp() / 4.0
            + self.c3 * self.c3 * (6.0 * y).exp() / 6.0
    }
}

impl StandingWaveExpansion {
    pub fn new(epsilon: f64) -> Result<Self, StandingWaveError> {
        if !(0.0..=MAX_EPSILON).contains(&epsilon) {
            return Err(StandingWaveError::InvalidAmplitude(epsilon));
        }
        Ok(Self { epsilon, a13: 0.0, a33: 0.0, b13: 0.0, b33: 0.0 })
    }

    pub fn with_coefficients(self, a13: f64, a33: f64, b13: f64, b33: f64) -> Self {
        Self { a13, a33, b13, b33, ..self }
    }

    pub fn validate(&self) -> Result<(), StandingWaveError> {
        Self::new(self.epsilon).map(|_| ())
    }

    pub fn omega(&self) -> f64 {
        1.0 - self.epsilon * self.epsilon / 8.0
    }

    /// Period in physical time `τ = t/ω`.
    pub fn physical_period(&self) -> f64 {
        2.0 * PI / self.omega()
    }

    /// `(η⁰, η¹, η²)` at `(t, x)`.
    pub fn eta_orders(&self, t: f64, x: f64) -> [f64; 3] {
        let (c, c3) = (t.cos(), (3.0 * t).cos());
        [
            c * x.cos(),
            0.5 * c * c * (2.0 * x).cos(),
            (3.0 / 32.0) * c * x.cos() + self.b13 * c * (3.0 * x).cos() - c3 * x.cos() / 16.0
                + self.b33 * c3 * (3.0 * x).cos(),
        ]
    }

    pub fn eta(&self, t: f64, x: f64) -> f64 {
        let [e0, e1, e2] = self.eta_orders(t, x);
        let e = self.epsilon;
        e0 + e * e1 + e * e * e2
    }

    /// `φ²` at the undisturbed level `y = 0`.
    fn phi2_at_zero(&self, t: f64, x: f64) -> f64 {
        let (s, s3) = (t.sin(), (3.0 * t).sin());
        self.a13 * s * (3.0 * x).cos() + (5.0 / 32.0) * s3 * x.cos() + self.a33 * s3 * (3.0 * x).cos()
    }

    /// `ψ = φ(t, x, εη)` expanded about `y = 0` and truncated after `ε²`.
    pub fn psi(&self, t: f64, x: f64) -> f64 {
        let [e0, e1, _] = self.eta_orders(t, x);
        let e = self.epsilon;
        // φ⁰ = −sin t cos x eʸ, so every y-derivative of φ⁰ at y = 0 equals φ⁰(y = 0).
        let p0 = -t.sin() * x.cos();
        p0 + e * e0 * p0 + e * e * ((e1 + 0.5 * e0 * e0) * p0 + self.phi2_at_zero(t, x))
    }

    /// Dimensionless `(η, ψ)` on `grid` at expansion time `t`.
    pub fn eval_surface(&self, grid: &PeriodicGrid, t: f64) -> Result<(SurfaceField, SurfaceField), StandingWaveError> {
        let eta = SurfaceField::from_fn(grid, |x| self.eta(t, x))?;
        let psi = SurfaceField::from_fn(grid, |x| self.psi(t, x))?;
        Ok((eta, psi))
    }

    /// Physical `(εη, εψ)` at physical time `τ` (expansion time `ωτ`), for `g = 1`.
    pub fn physical_surface(&self, grid: &PeriodicGrid, tau: f64) -> Result<(SurfaceField, SurfaceField), StandingWaveError> {
        let (eta, psi) = self.eval_surface(grid, self.omega() * tau)?;
        Ok((eta.scale(self.epsilon), psi.scale(self.epsilon)))
    }

    /// `(φ_x, φ_y)` as exponential sums at `(t, x)`.
    fn velocity(&self, t: f64, x: f64) -> (ExpSum, ExpSum) {
        let e2 = self.epsilon * self.epsilon;
        let (s, s3) = (t.sin(), (3.0 * t).sin());
        let first = s - e2 * (5.0 / 32.0) * s3;
        let third = 3.0 * e2 * (self.a13 * s + self.a33 * s3);
        (
            ExpSum { c1: first * x.sin(), c3: -third * (3.0 * x).sin() },
            ExpSum { c1: -first * x.cos(), c3: third * (3.0 * x).cos() },
        )
    }

    /// `(∫₀^π∫ φ_x², ∫₀^π∫ φ_y²)` over the fluid column at time `t`.
    pub fn kinetic_components(&self, t: f64, quad: &Quadrature) -> (f64, f64) {
        let horizontal = quad.half_period(|x| {
            let (vx, _) = self.velocity(t, x);
            vx.square_integral(self.epsilon * self.eta(t, x))
        });
        let vertical = quad.half_period(|x| {
            let (_, vy) = self.velocity(t, x);
            vy.square_integral(self.epsilon * self.eta(t, x))
        });
        (horizontal, vertical)
    }

    /// `∫₀^π∫_{−∞}^{εη} (3/2 φ_y² + 1/2 φ_x²) dy dx` at time `t`.
    pub fn modified_kinetic_density(&self, t: f64, quad: &Quadrature) -> f64 {
        let (h, v) = self.kinetic_components(t, quad);
        1.5 * v + 0.5 * h
    }

    /// `2E_p(t) = ∫₀^π η² dx`.
    pub fn potential_density(&self, t: f64, quad: &Quadrature) -> f64 {
        quad.half_period(|x| self.eta(t, x).powi(2))
    }

    pub fn modified_kinetic_period_integral(&self, quad: &Quadrature) -> Result<f64, StandingWaveError> {
        self.validate()?;
        quad.validate()?;
        Ok(quad.period(|t| self.modified_kinetic_density(t, quad)))
    }

    /// `2∫₀^{2π} E_p dt`.
    pub fn potential_period_integral(&self, quad: &Quadrature) -> Result<f64, StandingWaveError> {
        self.validate()?;
        quad.validate()?;
        Ok(quad.period(|t| self.potential_density(t, quad)))
    }

    pub fn equipartition_residual(&self, quad: &Quadrature) -> Result<f64, StandingWaveError> {
        Ok((self.modified_kinetic_period_integral(quad)? - self.potential_period_integral(quad)?).abs())
    }

    /// Sub-integrals of the kinetic and potential energies at time `t`, evaluated numerically.
    pub fn sub_integrals(&self, t: f64, quad: &Quadrature) -> SubIntegrals {
        let e = self.epsilon;
        let y = |x: f64| e * self.eta(t, x);
        let s = t.sin();
        let lead = |x: f64| (ExpSum { c1: s * x.sin(), c3: 0.0 }, ExpSum { c1: -s * x.cos(), c3: 0.0 });
        // Cross terms 2ε² φ⁰ φ² integrate e^{(1+n)y}/(1+n).
        let cross = |x: f64, pick: fn(&(ExpSum, ExpSum)) -> ExpSum| {
            let l = pick(&lead(x));
            let full = pick(&self.velocity(t, x));
            let c1 = full.c1 - l.c1;
            let c3 = full.c3;
            let yy = y(x);
            2.0 * l.c1 * (c1 * (2.0 * yy).exp() / 2.0 + c3 * (4.0 * yy).exp() / 4.0)
        };
        let [p0, p1, p2] = {
            let q = |f: &dyn Fn(f64) -> f64| quad.half_period(f);
            [
                q(&|x| self.eta_orders(t, x)[0].powi(2)),
                q(&|x| {
                    let o = self.eta_orders(t, x);
                    2.0 * o[0] * o[1]
                }),
                q(&|x| {
                    let o = self.eta_orders(t, x);
                    o[1] * o[1] + 2.0 * o[0] * o[2]
                }),
            ]
        };
        SubIntegrals {
            a1: quad.half_period(|x| lead(x).0.square_integral(y(x))),
            a2: quad.half_period(|x| cross(x, |v| v.0)),
            b1: quad.half_period(|x| lead(x).1.square_integral(y(x))),
            b2: quad.half_period(|x| cross(x, |v| v.1)),
            p0,
            p1,
            p2,
        }
    }
}

/// Components of the kinetic (`A` horizontal, `B` vertical) and potential (`P`) integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubIntegrals {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
}

/// Closed forms of the energy integrals, exact through order `ε²`.
pub mod closed_form {
    use std::f64::consts::PI;

    pub fn a1(_eps: f64, t: f64) -> f64 {
        PI / 4.0 * t.sin().powi(2)
    }

    pub fn a2(eps: f64, t: f64) -> f64 {
        let s2 = t.sin().powi(2);
        -eps * eps * (15.0 * PI / 64.0 * s2 - 5.0 * PI / 16.0 * s2 * s2)
    }

    pub fn b1(eps: f64, t: f64) -> f64 {
        let s2 = t.sin().powi(2);
        PI / 4.0 * s2 + PI / 2.0 * eps * eps * (s2 - s2 * s2)
    }

    pub fn b2(eps: f64, t: f64) -> f64 {
        a2(eps, t)
    }

    pub fn p0(t: f64) -> f64 {
        PI / 2.0 * t.cos().powi(2)
    }

    pub fn p1(_t: f64) -> f64 {
        0.0
    }

    pub fn p2(t: f64) -> f64 {
        let c = t.cos();
        PI / 8.0 * c.powi(4) + PI * (3.0 / 32.0 * c * c - c * (3.0 * t).cos() / 16.0)
    }

    /// `∫∫ φ_x²` at time `t`.
    pub fn horizontal(eps: f64, t: f64) -> f64 {
        a1(eps, t) + a2(eps, t)
    }

    /// `∫∫ φ_y²` at time `t`.
    pub fn vertical(eps: f64, t: f64) -> f64 {
        let s2 = t.sin().powi(2);
        PI / 4.0 * s2 + eps * eps * (17.0 * PI / 64.0 * s2 - 3.0 * PI / 16.0 * s2 * s2)
    }

    /// `∫∫ (3/2 φ_y² + 1/2 φ_x²)` at time `t`.
    pub fn modified_kinetic_density(eps: f64, t: f64) -> f64 {
        let s2 = t.sin().powi(2);
        PI / 2.0 * s2 + PI * eps * eps * (9.0 / 32.0 * s2 - s2 * s2 / 8.0)
    }

    /// `2E_p(t)`.
    pub fn potential_density(eps: f64, t: f64) -> f64 {
        let s2 = t.sin().powi(2);
        PI / 2.0 - PI / 2.0 * s2 + eps * eps * (5.0 * PI / 32.0 - PI / 32.0 * s2 - PI / 8.0 * s2 * s2)
    }

    /// Common value of both period integrals, `π²/2 + 3π²ε²/16`.
    pub fn period_integral(eps: f64) -> f64 {
        PI * PI / 2.0 + 3.0 * PI * PI / 16.0 * eps * eps
    }
}

/// One row of an amplitude sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandingWaveRow {
    pub epsilon: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub closed_form: f64,
    pub kinetic_gap: f64,
    pub potential_gap: f64,
    pub equipartition_residual: f64,
}

/// Amplitude sweep with log-log slopes of the three residual columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandingWaveTable {
    pub coefficients: [f64; 4],
    pub rows: Vec<StandingWaveRow>,
    #[serde(with = "crate::float_repr::option")]
    pub kinetic_slope: Option<f64>,
    #[serde(with = "crate::float_repr::option")]
    pub potential_slope: Option<f64>,
    #[serde(with = "crate::float_repr::option")]
    pub residual_slope: Option<f64>,
}

/// Tabulates both period integrals over `eps_list`; slopes are fitted over the positive amplitudes.
pub fn standing_wave_table(
    eps_list: &[f64],
    coefficients: [f64; 4],
    quad: &Quadrature,
) -> Result<StandingWaveTable, StandingWaveError> {
    let [a13, a33, b13, b33] = coefficients;
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let exp = StandingWaveExpansion::new(eps)?.with_coefficients(a13, a33, b13, b33);
        let kinetic = exp.modified_kinetic_period_integral(quad)?;
        let potential = exp.potential_period_integral(quad)?;
        let closed = closed_form::period_integral(eps);
        rows.push(StandingWaveRow {
            epsilon: eps,
            kinetic,
            potential,
            closed_form: closed,
            kinetic_gap: (kinetic - closed).abs(),
            potential_gap: (potential - closed).abs(),
            equipartition_residual: (kinetic - potential).abs(),
        });
    }
    let slope = |col: fn(&StandingWaveRow) -> f64| {
        let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.epsilon > 0.0).map(|r| (r.epsilon, col(r))).collect();
        if pts.len() < 2 || pts.iter().any(|p| p.1 <= 0.0) {
            return None;
        }
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        Some(loglog_slope(&x, &y))
    };
    Ok(StandingWaveTable {
        coefficients,
        kinetic_slope: slope(|r| r.kinetic_gap),
        potential_slope: slope(|r| r.potential_gap),
        residual_slope: slope(|r| r.equipartition_residual),
        rows,
    })
}
