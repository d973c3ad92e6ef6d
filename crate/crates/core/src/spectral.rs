//! Periodic grids on the torus `[0, 2π)` and Fourier-multiplier calculus.
//!
//! Coefficients use the normalisation `f̂(ξ) = (1/n) Σ_j f_j e^{-iξ x_j}`, so that
//! `∫ f g dx = 2π Σ_ξ f̂(ξ) conj(ĝ(ξ))` and `cos x` has `f̂(±1) = 1/2`.
//! Every multiplier application zeroes the Nyquist mode.

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("grid size {0} must be even and at least 8")]
    InvalidGridSize(usize),
    #[error("expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("non-finite multiplier value at wavenumber {0}")]
    NonFiniteSymbol(f64),
    #[error("negative-order homogeneous norm needs a mean-zero field (mean = {0:e})")]
    NonzeroMean(f64),
    #[error("fields live on different grids ({0} vs {1})")]
    GridMismatch(usize, usize),
}

/// Uniform grid `x_j = 2πj/n` with cached FFT plans.
#[derive(Clone)]
pub struct PeriodicGrid {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for PeriodicGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicGrid").field("n", &self.n).finish()
    }
}

impl PartialEq for PeriodicGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
    }
}

impl PeriodicGrid {
    pub fn new(n: usize) -> Result<Self, SpectralError> {
        if n < 8 || !n.is_multiple_of(2) {
            return Err(SpectralError::InvalidGridSize(n));
        }
        let mut planner = FftPlanner::new();
        Ok(Self { n, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    /// Largest resolved wavenumber, `n/2`.
    pub fn k_max(&self) -> usize {
        self.n / 2
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.dx() * j as f64).collect()
    }

    /// Signed wavenumber of FFT slot `m`; the Nyquist slot maps to `+n/2`.
    pub fn wavenumber(&self, m: usize) -> f64 {
        if m <= self.n / 2 {
            m as f64
        } else {
            m as f64 - self.n as f64
        }
    }

    pub fn is_nyquist(&self, m: usize) -> bool {
        m == self.n / 2
    }

    /// Normalised forward transform.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward_in_place(&mut buf);
        buf
    }

    pub fn forward_in_place(&self, buf: &mut [Complex64]) {
        self.fwd.process(buf);
        let s = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|c| *c *= s);
    }

    /// Inverse of [`forward`](Self::forward), keeping the real part.
    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut buf = coeffs.to_vec();
        self.inv.process(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }

    pub fn inverse_in_place(&self, buf: &mut [Complex64]) {
        self.inv.process(buf);
    }

    /// Spectral derivative of a real row, written into `out`. Nyquist is dropped.
    pub fn differentiate_into(&self, values: &[f64], out: &mut [f64], scratch: &mut [Complex64]) {
        for (s, &v) in scratch.iter_mut().zip(values) {
            *s = Complex64::new(v, 0.0);
        }
        self.fwd.process(scratch);
        let s = 1.0 / self.n as f64;
        for (m, c) in scratch.iter_mut().enumerate() {
            if self.is_nyquist(m) {
                *c = Complex64::new(0.0, 0.0);
            } else {
                *c *= Complex64::new(0.0, self.wavenumber(m) * s);
            }
        }
        self.inv.process(scratch);
        for (o, c) in out.iter_mut().zip(scratch.iter()) {
            *o = c.re;
        }
    }
}

/// Real-valued periodic field with lazily cached Fourier coefficients.
#[derive(Clone)]
pub struct SurfaceField {
    grid: PeriodicGrid,
    values: Vec<f64>,
    coeffs: OnceLock<Vec<Complex64>>,
}

impl fmt::Debug for SurfaceField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SurfaceField").field("n", &self.grid.n).field("values", &self.values).finish()
    }
}

impl SurfaceField {
    pub fn from_values(grid: &PeriodicGrid, values: Vec<f64>) -> Result<Self, SpectralError> {
        if values.len() != grid.n {
            return Err(SpectralError::LengthMismatch { expected: grid.n, got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SpectralError::NonFinite(i));
        }
        Ok(Self { grid: grid.clone(), values, coeffs: OnceLock::new() })
    }

    pub fn from_fn(grid: &PeriodicGrid, f: impl Fn(f64) -> f64) -> Result<Self, SpectralError> {
        Self::from_values(grid, grid.nodes().into_iter().map(f).collect())
    }

    pub fn zeros(grid: &PeriodicGrid) -> Self {
        Self { grid: grid.clone(), values: vec![0.0; grid.n], coeffs: OnceLock::new() }
    }

    /// Builds a field from normalised coefficients; the Nyquist slot is ignored.
    pub fn from_coefficients(grid: &PeriodicGrid, coeffs: &[Complex64]) -> Result<Self, SpectralError> {
        if coeffs.len() != grid.n {
            return Err(SpectralError::LengthMismatch { expected: grid.n, got: coeffs.len() });
        }
        let mut c = coeffs.to_vec();
        c[grid.n / 2] = Complex64::new(0.0, 0.0);
        let values = grid.inverse(&c);
        Self::from_values(grid, values)
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn coefficients(&self) -> &[Complex64] {
        self.coeffs.get_or_init(|| self.grid.forward(&self.values))
    }

    pub fn apply_multiplier(&self, symbol: impl Fn(f64) -> Complex64) -> Result<Self, SpectralError> {
        let g = &self.grid;
        let mut out = Vec::with_capacity(g.n);
        for (m, c) in self.coefficients().iter().enumerate() {
            if g.is_nyquist(m) {
                out.push(Complex64::new(0.0, 0.0));
                continue;
            }
            let xi = g.wavenumber(m);
            let s = symbol(xi);
            if !(s.re.is_finite() && s.im.is_finite()) {
                return Err(SpectralError::NonFiniteSymbol(xi));
            }
            out.push(c * s);
        }
        let values = g.inverse(&out);
        let field = Self::from_values(g, values)?;
        let _ = field.coeffs.set(out);
        Ok(field)
    }

    pub fn apply_real_multiplier(&self, symbol: impl Fn(f64) -> f64) -> Result<Self, SpectralError> {
        self.apply_multiplier(|xi| Complex64::new(symbol(xi), 0.0))
    }

    pub fn derivative(&self) -> Self {
        self.apply_multiplier(|xi| Complex64::new(0.0, xi)).expect("finite symbol")
    }

    /// `|D| f`.
    pub fn abs_derivative(&self) -> Self {
        self.apply_real_multiplier(f64::abs).expect("finite symbol")
    }

    pub fn without_nyquist(&self) -> Self {
        self.apply_real_multiplier(|_| 1.0).expect("finite symbol")
    }

    /// Zeroes every mode with `|ξ| > n/3`.
    pub fn two_thirds_filter(&self) -> Self {
        let cut = self.grid.n as f64 / 3.0;
        self.apply_real_multiplier(|xi| if xi.abs() <= cut { 1.0 } else { 0.0 }).expect("finite symbol")
    }

    /// Trapezoid rule, spectrally exact for trigonometric polynomials of degree `< n`.
    pub fn integrate(&self) -> f64 {
        self.grid.dx() * self.values.iter().sum::<f64>()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.grid.n as f64
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `(Σ_{ξ≠0} |ξ|^{2s} |f̂(ξ)|²)^{1/2}`; negative `s` needs a mean-zero field.
    pub fn homogeneous_norm(&self, s: f64) -> Result<f64, SpectralError> {
        let c = self.coefficients();
        if s < 0.0 {
            let scale = self.sup_norm().max(1.0);
            if c[0].norm() > 1e-12 * scale {
                return Err(SpectralError::NonzeroMean(c[0].re));
            }
        }
        let sum: f64 = c
            .iter()
            .enumerate()
            .filter(|&(m, _)| m != 0 && !self.grid.is_nyquist(m))
            .map(|(m, z)| self.grid.wavenumber(m).abs().powf(2.0 * s) * z.norm_sqr())
            .sum();
        Ok(sum.sqrt())
    }

    /// `(Σ_ξ (1+ξ²)^s |f̂(ξ)|²)^{1/2}`.
    pub fn inhomogeneous_norm(&self, s: f64) -> f64 {
        let c = self.coefficients();
        c.iter()
            .enumerate()
            .filter(|&(m, _)| !self.grid.is_nyquist(m))
            .map(|(m, z)| (1.0 + self.grid.wavenumber(m).powi(2)).powf(s) * z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    fn check_same(&self, other: &Self) -> Result<(), SpectralError> {
        if self.grid.n != other.grid.n {
            Err(SpectralError::GridMismatch(self.grid.n, other.grid.n))
        } else {
            Ok(())
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let values = self.values.iter().map(|&v| f(v)).collect();
        Self { grid: self.grid.clone(), values, coeffs: OnceLock::new() }
    }

    /// Pointwise combination; panics on mismatched grids.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        self.check_same(other).expect("fields on the same grid");
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self { grid: self.grid.clone(), values, coeffs: OnceLock::new() }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + s * b)
    }

    /// `∫ f g dx`.
    pub fn inner(&self, other: &Self) -> f64 {
        self.check_same(other).expect("fields on the same grid");
        self.grid.dx() * self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// Subtracts the mean.
    pub fn mean_free(&self) -> Self {
        let m = self.mean();
        self.map(|v| v - m)
    }
}

/// Alias-free product of two fields by zero-padding to `3n/2` points.
pub fn dealiased_product(a: &SurfaceField, b: &SurfaceField) -> Result<SurfaceField, SpectralError> {
    a.check_same(b)?;
    let n = a.grid.n;
    let big = 3 * n / 2 + (3 * n / 2) % 2;
    let pad_grid = PeriodicGrid::new(big)?;
    let pad = |f: &SurfaceField| -> Vec<f64> {
        let mut c = vec![Complex64::new(0.0, 0.0); big];
        for (m, z) in f.coefficients().iter().enumerate() {
            if a.grid.is_nyquist(m) {
                continue;
            }
            let k = a.grid.wavenumber(m) as i64;
            let slot = if k >= 0 { k as usize } else { (big as i64 + k) as usize };
            c[slot] = *z;
        }
        pad_grid.inverse(&c)
    };
    let pa = pad(a);
    let pb = pad(b);
    let prod: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x * y).collect();
    let pc = pad_grid.forward(&prod);
    let mut c = vec![Complex64::new(0.0, 0.0); n];
    for (m, slot) in c.iter_mut().enumerate() {
        if a.grid.is_nyquist(m) {
            continue;
        }
        let k = a.grid.wavenumber(m) as i64;
        let src = if k >= 0 { k as usize } else { (big as i64 + k) as usize };
        *slot = pc[src];
    }
    SurfaceField::from_coefficients(&a.grid, &c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(n).unwrap()
    }

    #[test]
    fn rejects_bad_sizes() {
        assert_eq!(PeriodicGrid::new(6).unwrap_err(), SpectralError::InvalidGridSize(6));
        assert!(PeriodicGrid::new(9).is_err());
        assert!(PeriodicGrid::new(8).is_ok());
    }

    #[test]
    fn cosine_coefficients_are_half() {
        let g = grid(16);
        let f = SurfaceField::from_fn(&g, f64::cos).unwrap();
        let c = f.coefficients();
        assert!((c[1].re - 0.5).abs() < 1e-15);
        assert!((c[15].re - 0.5).abs() < 1e-15);
        assert!(c[2].norm() < 1e-15);
    }

    #[test]
    fn abs_derivative_of_sine() {
        let g = grid(64);
        let f = SurfaceField::from_fn(&g, |x| (3.0 * x).sin()).unwrap();
        let d = f.abs_derivative();
        for (x, v) in g.nodes().iter().zip(d.values()) {
            assert!((v - 3.0 * (3.0 * x).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn half_norm_of_cosine() {
        let g = grid(32);
        let f = SurfaceField::from_fn(&g, f64::cos).unwrap();
        let n = f.homogeneous_norm(0.5).unwrap();
        assert!((n - 0.5f64.sqrt()).abs() < 1e-14);
        // ∫ψ|D|ψ = 2π‖ψ‖²
        let lhs = f.inner(&f.abs_derivative());
        assert!((lhs - 2.0 * PI * n * n).abs() < 1e-13);
    }

    #[test]
    fn negative_norm_needs_zero_mean() {
        let g = grid(16);
        let f = SurfaceField::from_fn(&g, |x| 1.0 + x.cos()).unwrap();
        assert!(matches!(f.homogeneous_norm(-0.5), Err(SpectralError::NonzeroMean(_))));
        let f = SurfaceField::from_fn(&g, |x| (2.0 * x).cos()).unwrap();
        let expect = (2.0 * 0.25 / 2.0f64).sqrt();
        assert!((f.homogeneous_norm(-0.5).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn nyquist_is_zeroed() {
        let g = grid(8);
        let f = SurfaceField::from_fn(&g, |x| (4.0 * x).cos()).unwrap();
        assert!(f.without_nyquist().sup_norm() < 1e-15);
    }

    #[test]
    fn non_finite_symbol_rejected() {
        let g = grid(8);
        let f = SurfaceField::from_fn(&g, f64::cos).unwrap();
        assert!(f.apply_real_multiplier(|xi| 1.0 / xi).is_err());
    }

    #[test]
    fn parseval() {
        let g = grid(32);
        let f = SurfaceField::from_fn(&g, |x| (x.sin() * 2.0).exp()).unwrap();
        let h = SurfaceField::from_fn(&g, |x| (3.0 * x).cos() + x.sin()).unwrap();
        let spec: f64 = f.coefficients().iter().zip(h.coefficients()).map(|(a, b)| (a * b.conj()).re).sum();
        assert!((f.inner(&h) - 2.0 * PI * spec).abs() < 1e-12);
    }

    #[test]
    fn dealiased_product_exact_for_band_limited() {
        let g = grid(16);
        let a = SurfaceField::from_fn(&g, |x| (5.0 * x).cos()).unwrap();
        let b = SurfaceField::from_fn(&g, |x| (6.0 * x).cos()).unwrap();
        let p = dealiased_product(&a, &b).unwrap();
        // cos5x cos6x = (cos x + cos 11x)/2; mode 11 is unresolved and dropped rather than aliased to 5
        for (x, v) in g.nodes().iter().zip(p.values()) {
            assert!((v - 0.5 * x.cos()).abs() < 1e-14);
        }
    }
}
