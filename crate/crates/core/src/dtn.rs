//! Harmonic extension in the flattened strip and the Dirichlet–Neumann operator `G(η)`.
//!
//! The fluid domain `{-h < y < η(x)}` is mapped to `[-h, 0]` by
//! `ρ(x, z) = (z + h) η(x)/h + z`. With `J = ∂_zρ = 1 + η/h`,
//! `Λ₁ = J⁻¹ ∂_z` and `Λ₂ = ∂_x − ∂_xρ Λ₁` are the physical gradient components.
//! The extension minimises the Dirichlet energy `∬ ((Λ₁φ)² + (Λ₂φ)²) J dx dz` over
//! trigonometric-in-`x`, polynomial-in-`z` fields (Chebyshev–Lobatto nodal values,
//! trapezoid rule in `x`, Gauss–Legendre quadrature exact in `z`) with `φ = ψ` on the
//! surface; the bottom Neumann condition is the natural one. `G(η)ψ` is the variational flux on the surface row,
//! which makes the discrete operator exactly symmetric, non-negative and mean-free.
//! The interior system is solved by preconditioned conjugate gradients, the
//! preconditioner being the flat-surface problem, diagonal in the Fourier index.

use nalgebra::{Cholesky, DMatrix, Dyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chebyshev::ChebyshevColumn;
use crate::spectral::{PeriodicGrid, SpectralError, SurfaceField};

pub const DEFAULT_INFINITE_DEPTH: f64 = 10.0;
pub const MIN_INFINITE_DEPTH: f64 = 6.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DtnError {
    #[error("geometry violation: inf η = {inf_eta:e} must exceed -h/2 = {half_depth:e}")]
    Geometry { inf_eta: f64, half_depth: f64 },
    #[error("conjugate gradients stalled after {iterations} iterations (relative residual {residual:e})")]
    SolverDiverged { iterations: usize, residual: f64 },
    #[error("invalid depth: {0}")]
    InvalidDepth(String),
    #[error("need at least 4 vertical intervals, got {0}")]
    InvalidVerticalResolution(usize),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Fluid depth. Infinite depth is realised by a deep Neumann bottom at `h_eff`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Depth {
    Finite { h: f64 },
    Infinite {
        #[serde(default = "default_h_eff")]
        h_eff: f64,
    },
}

fn default_h_eff() -> f64 {
    DEFAULT_INFINITE_DEPTH
}

impl Depth {
    pub fn finite(h: f64) -> Self {
        Depth::Finite { h }
    }

    pub fn infinite() -> Self {
        Depth::Infinite { h_eff: DEFAULT_INFINITE_DEPTH }
    }

    /// Depth of the computational strip.
    pub fn strip_depth(&self) -> f64 {
        match *self {
            Depth::Finite { h } => h,
            Depth::Infinite { h_eff } => h_eff,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Depth::Infinite { .. })
    }

    pub fn validate(&self) -> Result<(), DtnError> {
        match *self {
            Depth::Finite { h } if !(h.is_finite() && h > 0.0) => {
                Err(DtnError::InvalidDepth(format!("finite depth must be positive, got {h}")))
            }
            Depth::Infinite { h_eff } if !(h_eff.is_finite() && h_eff >= MIN_INFINITE_DEPTH) => Err(
                DtnError::InvalidDepth(format!("effective depth must be at least {MIN_INFINITE_DEPTH}, got {h_eff}")),
            ),
            _ => Ok(()),
        }
    }

    /// Symbol of `G(0)`: `|ξ| tanh(h|ξ|)` or `|ξ|`.
    pub fn flat_symbol(&self, xi: f64) -> f64 {
        match *self {
            Depth::Finite { h } => xi.abs() * (h * xi.abs()).tanh(),
            Depth::Infinite { .. } => xi.abs(),
        }
    }
}

/// `G(0)ψ` as an exact Fourier multiplier.
pub fn dtn_flat(psi: &SurfaceField, depth: Depth) -> SurfaceField {
    psi.apply_real_multiplier(|xi| depth.flat_symbol(xi)).expect("finite symbol")
}

/// Surface traces of the velocity: `B = ∂_yφ`, `V = ∂_xφ` on `y = η`.
#[derive(Debug, Clone)]
pub struct SurfaceTraces {
    pub g_psi: SurfaceField,
    pub b: SurfaceField,
    pub v: SurfaceField,
    pub eta_x: SurfaceField,
    pub psi_x: SurfaceField,
}

impl SurfaceTraces {
    /// `B = (Gψ + η'ψ')/(1 + η'²)`, `V = ψ' − Bη'`.
    pub fn from_dtn(eta: &SurfaceField, psi: &SurfaceField, g_psi: SurfaceField) -> Self {
        let eta_x = eta.derivative();
        let psi_x = psi.derivative();
        let vals = |i: usize| (g_psi.values()[i], eta_x.values()[i], psi_x.values()[i]);
        let n = eta.len();
        let mut b = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        for i in 0..n {
            let (gp, ex, px) = vals(i);
            let bi = (gp + ex * px) / (1.0 + ex * ex);
            b.push(bi);
            v.push(px - bi * ex);
        }
        let grid = eta.grid();
        Self {
            b: SurfaceField::from_values(grid, b).expect("finite traces"),
            v: SurfaceField::from_values(grid, v).expect("finite traces"),
            g_psi,
            eta_x,
            psi_x,
        }
    }
}

/// Solver settings and precomputed flat-problem factorisations for one `(n_x, n_z, depth)`.
pub struct DtnSolver {
    grid: PeriodicGrid,
    depth: Depth,
    column: ChebyshevColumn,
    qdiff_t: DMatrix<f64>,
    interp_t: DMatrix<f64>,
    /// Cholesky factors of the flat interior operator for `|ξ| = 0..n_x/2-1`.
    flat: Vec<Cholesky<f64, Dyn>>,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl std::fmt::Debug for DtnSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DtnSolver")
            .field("n_x", &self.grid.len())
            .field("n_z", &(self.column.len() - 1))
            .field("depth", &self.depth)
            .finish()
    }
}

/// Discrete harmonic extension on the flattened strip.
pub struct Extension<'a> {
    solver: &'a DtnSolver,
    /// `φ̃[(k, j)]`, `k = 0` at the surface.
    pub phi: DMatrix<f64>,
    eta_x: Vec<f64>,
    jac: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

struct Gradients {
    l1: DMatrix<f64>,
    l2: DMatrix<f64>,
}

impl DtnSolver {
    pub fn new(grid: &PeriodicGrid, depth: Depth, n_z: usize) -> Result<Self, DtnError> {
        depth.validate()?;
        if n_z < 4 {
            return Err(DtnError::InvalidVerticalResolution(n_z));
        }
        let h = depth.strip_depth();
        let column = ChebyshevColumn::new(n_z, h);
        let qdiff_t = column.quad_diff.transpose();
        let interp_t = column.interp.transpose();
        let w = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(column.quad_weights.clone()));
        let stiff = &qdiff_t * &w * &column.quad_diff;
        let mass = &interp_t * &w * &column.interp;
        let m = n_z;
        let flat = (0..grid.k_max())
            .map(|k| {
                let k2 = (k * k) as f64;
                let mut a = DMatrix::zeros(m, m);
                for r in 0..m {
                    for c in 0..m {
                        a[(r, c)] = stiff[(r + 1, c + 1)] + k2 * mass[(r + 1, c + 1)];
                    }
                }
                Cholesky::new(a).expect("flat operator is symmetric positive definite")
            })
            .collect();
        Ok(Self {
            grid: grid.clone(),
            depth,
            column,
            qdiff_t,
            interp_t,
            flat,
            tolerance: 1e-14,
            max_iterations: 500,
        })
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn depth(&self) -> Depth {
        self.depth
    }

    pub fn n_z(&self) -> usize {
        self.column.len() - 1
    }

    pub fn column(&self) -> &ChebyshevColumn {
        &self.column
    }

    pub fn check_geometry(&self, eta: &SurfaceField) -> Result<(), DtnError> {
        let h = self.depth.strip_depth();
        let inf = eta.min();
        if inf.is_nan() || inf <= -0.5 * h {
            return Err(DtnError::Geometry { inf_eta: inf, half_depth: -0.5 * h });
        }
        Ok(())
    }

    fn apply_rows_dx(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.grid.len();
        let mut out = DMatrix::zeros(m.nrows(), n);
        let mut row = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); n];
        for k in 0..m.nrows() {
            for j in 0..n {
                row[j] = m[(k, j)];
            }
            self.grid.differentiate_into(&row, &mut d, &mut scratch);
            for j in 0..n {
                out[(k, j)] = d[j];
            }
        }
        out
    }

    /// Gradient components at the nodes (`quad = false`) or at the quadrature points.
    fn gradients(&self, phi: &DMatrix<f64>, eta_x: &[f64], jac: &[f64], quad: bool) -> Gradients {
        let h = self.depth.strip_depth();
        let dx_phi = self.apply_rows_dx(phi);
        let (mut l1, mut l2, z) = if quad {
            (&self.column.quad_diff * phi, &self.column.interp * dx_phi, &self.column.quad_nodes)
        } else {
            (&self.column.diff * phi, dx_phi, &self.column.nodes)
        };
        for j in 0..phi.ncols() {
            for (k, zk) in z.iter().enumerate() {
                let a = l1[(k, j)] / jac[j];
                l1[(k, j)] = a;
                l2[(k, j)] -= (zk + h) / h * eta_x[j] * a;
            }
        }
        Gradients { l1, l2 }
    }

    /// Full stiffness action `K φ` on all nodes.
    fn stiffness(&self, phi: &DMatrix<f64>, eta_x: &[f64], jac: &[f64]) -> DMatrix<f64> {
        let h = self.depth.strip_depth();
        let Gradients { l1, l2 } = self.gradients(phi, eta_x, jac, true);
        let (nq, nc) = l1.shape();
        let mut t = DMatrix::zeros(nq, nc);
        let mut u2 = DMatrix::zeros(nq, nc);
        for j in 0..nc {
            for k in 0..nq {
                let w = self.column.quad_weights[k];
                let rx = (self.column.quad_nodes[k] + h) / h * eta_x[j];
                u2[(k, j)] = w * jac[j] * l2[(k, j)];
                t[(k, j)] = w * (l1[(k, j)] - rx * l2[(k, j)]);
            }
        }
        let mut out = &self.qdiff_t * t;
        out -= self.apply_rows_dx(&(&self.interp_t * u2));
        out
    }

    fn project_nyquist_rows(&self, m: &mut DMatrix<f64>) {
        let n = self.grid.len();
        for k in 0..m.nrows() {
            let mut c = 0.0;
            for j in 0..n {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                c += s * m[(k, j)];
            }
            c /= n as f64;
            for j in 0..n {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                m[(k, j)] -= s * c;
            }
        }
    }

    fn precondition(&self, r: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.grid.len();
        let m = r.nrows();
        let mut spec = vec![vec![Complex64::new(0.0, 0.0); n]; m];
        for (k, row) in spec.iter_mut().enumerate() {
            for j in 0..n {
                row[j] = Complex64::new(r[(k, j)], 0.0);
            }
            self.grid.forward_in_place(row);
        }
        let mut rhs = DMatrix::zeros(m, 2);
        for mode in 0..n / 2 {
            for k in 0..m {
                rhs[(k, 0)] = spec[k][mode].re;
                rhs[(k, 1)] = spec[k][mode].im;
            }
            self.flat[mode].solve_mut(&mut rhs);
            for k in 0..m {
                let z = Complex64::new(rhs[(k, 0)], rhs[(k, 1)]);
                spec[k][mode] = z;
                if mode > 0 {
                    spec[k][n - mode] = z.conj();
                }
            }
        }
        let mut out = DMatrix::zeros(m, n);
        for (k, row) in spec.iter_mut().enumerate() {
            row[n / 2] = Complex64::new(0.0, 0.0);
            self.grid.inverse_in_place(row);
            for j in 0..n {
                out[(k, j)] = row[j].re;
            }
        }
        out
    }

    fn surface_coefficients(&self, eta: &SurfaceField) -> (Vec<f64>, Vec<f64>) {
        let h = self.depth.strip_depth();
        let eta_x = eta.derivative().into_values();
        let jac = eta.values().iter().map(|&e| 1.0 + e / h).collect();
        (eta_x, jac)
    }

    /// Solves for `φ̃` with `φ̃(·, 0) = ψ` and a Neumann bottom.
    pub fn harmonic_extension(&self, eta: &SurfaceField, psi: &SurfaceField) -> Result<Extension<'_>, DtnError> {
        self.check_geometry(eta)?;
        let n = self.grid.len();
        if eta.len() != n || psi.len() != n {
            return Err(SpectralError::GridMismatch(eta.len(), psi.len()).into());
        }
        let (eta_x, jac) = self.surface_coefficients(eta);
        let nz = self.n_z();
        let psi = psi.without_nyquist();
        let mut phi = DMatrix::zeros(nz + 1, n);
        for j in 0..n {
            phi[(0, j)] = psi.values()[j];
        }
        let interior = |full: &DMatrix<f64>| full.rows(1, nz).into_owned();

        let mut b = -interior(&self.stiffness(&phi, &eta_x, &jac));
        self.project_nyquist_rows(&mut b);
        let b_norm = b.norm();
        let mut x = DMatrix::zeros(nz, n);
        let mut iterations = 0;
        let mut rel = 0.0;
        if b_norm > 0.0 {
            let apply = |u: &DMatrix<f64>| -> DMatrix<f64> {
                let mut full = DMatrix::zeros(nz + 1, n);
                full.rows_mut(1, nz).copy_from(u);
                let mut ku = interior(&self.stiffness(&full, &eta_x, &jac));
                self.project_nyquist_rows(&mut ku);
                ku
            };
            let mut r = b.clone();
            let mut z = self.precondition(&r);
            let mut p = z.clone();
            let mut rz = r.dot(&z);
            let mut best = f64::INFINITY;
            let mut stall = 0;
            while iterations < self.max_iterations {
                iterations += 1;
                let q = apply(&p);
                let alpha = rz / p.dot(&q);
                x += alpha * &p;
                r -= alpha * &q;
                let rel = r.norm() / b_norm;
                if rel <= self.tolerance {
                    break;
                }
                if rel < 0.5 * best {
                    best = rel;
                    stall = 0;
                } else {
                    stall += 1;
                    if stall > 20 && rel < 1e-11 {
                        break;
                    }
                }
                z = self.precondition(&r);
                let rz_new = r.dot(&z);
                p = &z + (rz_new / rz) * &p;
                rz = rz_new;
            }
            // The recursive residual drifts from the true one near machine precision.
            let true_r = &b - apply(&x);
            rel = true_r.norm() / b_norm;
            if rel > 1e-10 {
                return Err(DtnError::SolverDiverged { iterations, residual: rel });
            }
        }
        phi.rows_mut(1, nz).copy_from(&x);
        Ok(Extension { solver: self, phi, eta_x, jac, iterations, relative_residual: rel })
    }

    pub fn dtn_apply(&self, eta: &SurfaceField, psi: &SurfaceField) -> Result<SurfaceField, DtnError> {
        Ok(self.harmonic_extension(eta, psi)?.dtn())
    }

    pub fn traces(&self, eta: &SurfaceField, psi: &SurfaceField) -> Result<SurfaceTraces, DtnError> {
        let g = self.dtn_apply(eta, psi)?;
        Ok(SurfaceTraces::from_dtn(eta, psi, g))
    }

    /// `dG(η)ψ·ζ = −G(η)(Bζ) − ∂_x(Vζ)`.
    pub fn dtn_shape_derivative(
        &self,
        eta: &SurfaceField,
        psi: &SurfaceField,
        zeta: &SurfaceField,
    ) -> Result<SurfaceField, DtnError> {
        let tr = self.traces(eta, psi)?;
        let g_bz = self.dtn_apply(eta, &tr.b.mul(zeta))?;
        let dvz = tr.v.mul(zeta).derivative();
        Ok(g_bz.add(&dvz).scale(-1.0))
    }
}

impl Extension<'_> {
    fn row(&self, m: &DMatrix<f64>, k: usize) -> SurfaceField {
        let v = (0..m.ncols()).map(|j| m[(k, j)]).collect();
        SurfaceField::from_values(self.solver.grid(), v).expect("finite extension")
    }

    fn gradients(&self, quad: bool) -> Gradients {
        self.solver.gradients(&self.phi, &self.eta_x, &self.jac, quad)
    }

    /// `G(η)ψ` as the variational surface flux.
    pub fn dtn(&self) -> SurfaceField {
        let k = self.solver.stiffness(&self.phi, &self.eta_x, &self.jac);
        self.row(&k, 0).without_nyquist()
    }

    /// `Λ₁φ̃ − η'Λ₂φ̃` evaluated by collocation at the surface.
    pub fn dtn_collocated(&self) -> SurfaceField {
        let Gradients { l1, l2 } = self.gradients(false);
        let v = (0..self.phi.ncols()).map(|j| l1[(0, j)] - self.eta_x[j] * l2[(0, j)]).collect();
        SurfaceField::from_values(self.solver.grid(), v).expect("finite extension").without_nyquist()
    }

    pub fn surface_trace(&self) -> SurfaceField {
        self.row(&self.phi, 0)
    }

    /// `φ(·, -h)`.
    pub fn bottom_trace(&self) -> SurfaceField {
        self.row(&self.phi, self.phi.nrows() - 1)
    }

    /// `∂_xφ(·, -h)`; the map is the identity on the bottom, so this is `Λ₂φ̃`.
    pub fn bottom_gradient(&self) -> SurfaceField {
        self.bottom_trace().derivative()
    }

    /// `(Λ₁φ̃, Λ₂φ̃)` on every node, rows ordered surface to bottom.
    pub fn velocity(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let Gradients { l1, l2 } = self.gradients(false);
        (l1, l2)
    }

    /// `∬ (w_v (Λ₁φ̃)² + w_h (Λ₂φ̃)²) J dx dz`.
    pub fn volume_energy(&self, w_v: f64, w_h: f64) -> f64 {
        let Gradients { l1, l2 } = self.gradients(true);
        let col = self.solver.column();
        let mut s = 0.0;
        for j in 0..self.phi.ncols() {
            let mut c = 0.0;
            for k in 0..l1.nrows() {
                c += col.quad_weights[k] * (w_v * l1[(k, j)].powi(2) + w_h * l2[(k, j)].powi(2));
            }
            s += self.jac[j] * c;
        }
        s * self.solver.grid().dx()
    }

    /// Max-norm residual of the interior and bottom rows of the discrete system, relative to `max|ψ|`.
    pub fn operator_residual(&self) -> f64 {
        let mut k = self.solver.stiffness(&self.phi, &self.eta_x, &self.jac);
        self.solver.project_nyquist_rows(&mut k);
        let scale = (0..self.phi.ncols()).fold(0.0f64, |m, j| m.max(self.phi[(0, j)].abs())).max(f64::MIN_POSITIVE);
        k.rows(1, k.nrows() - 1).amax() / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn setup(n: usize, depth: Depth, nz: usize) -> (PeriodicGrid, DtnSolver) {
        let g = PeriodicGrid::new(n).unwrap();
        let s = DtnSolver::new(&g, depth, nz).unwrap();
        (g, s)
    }

    #[test]
    fn flat_modes_match_tanh_symbol() {
        for h in [0.5, 1.0, 3.0] {
            let (g, s) = setup(32, Depth::finite(h), 64);
            let eta = SurfaceField::zeros(&g);
            for k in 1..=8 {
                let psi = SurfaceField::from_fn(&g, |x| (k as f64 * x).cos()).unwrap();
                let gp = s.dtn_apply(&eta, &psi).unwrap();
                let sym = k as f64 * (k as f64 * h).tanh();
                for (a, b) in gp.values().iter().zip(psi.values()) {
                    assert!((a - sym * b).abs() <= 1e-8 * sym, "h={h} k={k}: {a} vs {}", sym * b);
                }
            }
        }
    }

    #[test]
    fn flat_infinite_depth_is_abs_derivative() {
        let (g, s) = setup(16, Depth::infinite(), 48);
        let psi = SurfaceField::from_fn(&g, f64::sin).unwrap();
        let gp = s.dtn_apply(&SurfaceField::zeros(&g), &psi).unwrap();
        for (a, b) in gp.values().iter().zip(psi.values()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn constants_are_in_the_kernel() {
        let (g, s) = setup(16, Depth::finite(1.0), 16);
        let eta = SurfaceField::from_fn(&g, |x| 0.2 * x.cos()).unwrap();
        let psi = SurfaceField::from_fn(&g, |_| 3.0).unwrap();
        let gp = s.dtn_apply(&eta, &psi).unwrap();
        assert!(gp.sup_norm() < 1e-11);
    }

    #[test]
    fn geometry_guard() {
        let (g, s) = setup(16, Depth::finite(1.0), 16);
        let eta = SurfaceField::from_fn(&g, |x| 0.6 * x.cos()).unwrap();
        let psi = SurfaceField::from_fn(&g, f64::cos).unwrap();
        assert!(matches!(s.dtn_apply(&eta, &psi), Err(DtnError::Geometry { .. })));
    }

    #[test]
    fn energy_equals_half_dirichlet_pairing() {
        let (g, s) = setup(32, Depth::finite(1.0), 24);
        let eta = SurfaceField::from_fn(&g, |x| 0.15 * x.cos() + 0.05 * (2.0 * x).sin()).unwrap();
        let psi = SurfaceField::from_fn(&g, |x| x.sin() + 0.3 * (3.0 * x).cos()).unwrap();
        let ext = s.harmonic_extension(&eta, &psi).unwrap();
        let gp = ext.dtn();
        let e = ext.volume_energy(0.5, 0.5);
        assert!((e - 0.5 * psi.inner(&gp)).abs() < 1e-12 * e.abs());
        assert!(ext.operator_residual() < 1e-10);
        let col = ext.dtn_collocated();
        assert!(col.sub(&gp).sup_norm() < 1e-8, "{}", col.sub(&gp).sup_norm());
    }

    #[test]
    fn trace_identity_holds() {
        let (g, s) = setup(32, Depth::finite(2.0), 24);
        let eta = SurfaceField::from_fn(&g, |x| 0.1 * (2.0 * x).cos()).unwrap();
        let psi = SurfaceField::from_fn(&g, |x| (x + 0.3).sin()).unwrap();
        let tr = s.traces(&eta, &psi).unwrap();
        let recon = tr.b.sub(&tr.v.mul(&tr.eta_x));
        assert!(recon.sub(&tr.g_psi).sup_norm() < 1e-13);
    }

    #[test]
    fn bottom_gradient_flat_closed_form() {
        let (g, s) = setup(16, Depth::finite(1.0), 32);
        let psi = SurfaceField::from_fn(&g, f64::cos).unwrap();
        let ext = s.harmonic_extension(&SurfaceField::zeros(&g), &psi).unwrap();
        let bg = ext.bottom_gradient();
        let val = bg.inner(&bg);
        let expect = PI / 1.0f64.cosh().powi(2);
        assert!((val - expect).abs() < 1e-10, "{val} {expect}");
    }
}
