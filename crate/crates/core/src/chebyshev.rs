//! Chebyshev–Lobatto nodes, differentiation and interpolation matrices, and quadrature on `[-h, 0]`.

use nalgebra::DMatrix;
use std::f64::consts::PI;

/// Vertical discretisation with `n + 1` nodes ordered from the surface (`z = 0`) to the bottom (`z = -h`).
#[derive(Debug, Clone)]
pub struct ChebyshevColumn {
    pub depth: f64,
    pub nodes: Vec<f64>,
    /// `d/dz` on the nodes.
    pub diff: DMatrix<f64>,
    /// Clenshaw–Curtis weights on the nodes.
    pub weights: Vec<f64>,
    /// Gauss–Legendre points used to integrate products of nodal polynomials exactly.
    pub quad_nodes: Vec<f64>,
    pub quad_weights: Vec<f64>,
    /// Interpolation from the nodes to the quadrature points.
    pub interp: DMatrix<f64>,
    /// `interp · diff`.
    pub quad_diff: DMatrix<f64>,
}

impl ChebyshevColumn {
    pub fn new(n: usize, depth: f64) -> Self {
        assert!(n >= 2, "need at least three Chebyshev nodes");
        let s: Vec<f64> = (0..=n).map(|k| (PI * k as f64 / n as f64).cos()).collect();
        let d = cheb_diff(&s);
        let scale = 2.0 / depth;
        let nodes = s.iter().map(|&x| 0.5 * depth * (x - 1.0)).collect();
        let weights = clenshaw_curtis(n).into_iter().map(|w| 0.5 * depth * w).collect();
        // n + 2 points integrate degree 2n + 3 exactly, enough for the flattened energy.
        let (gx, gw) = gauss_legendre(n + 2);
        let interp = barycentric_matrix(&s, &gx);
        let diff = d * scale;
        let quad_diff = &interp * &diff;
        Self {
            depth,
            nodes,
            diff,
            weights,
            quad_nodes: gx.iter().map(|&x| 0.5 * depth * (x - 1.0)).collect(),
            quad_weights: gw.iter().map(|&w| 0.5 * depth * w).collect(),
            interp,
            quad_diff,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn cheb_diff(s: &[f64]) -> DMatrix<f64> {
    let n = s.len() - 1;
    let c = |i: usize| -> f64 {
        let edge = if i == 0 || i == n { 2.0 } else { 1.0 };
        edge * if i.is_multiple_of(2) { 1.0 } else { -1.0 }
    };
    let mut d = DMatrix::zeros(n + 1, n + 1);
    for i in 0..=n {
        for j in 0..=n {
            if i != j {
                d[(i, j)] = c(i) / c(j) / (s[i] - s[j]);
            }
        }
    }
    // Negative-sum trick: exact annihilation of constants.
    for i in 0..=n {
        let row: f64 = (0..=n).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
        d[(i, i)] = -row;
    }
    d
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m {
        let mut t = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre(m, t);
            let step = p / d;
            t -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(m, t);
        x[i] = t;
        w[i] = 2.0 / ((1.0 - t * t) * d * d);
    }
    (x, w)
}

/// `(P_m(t), P_m'(t))`.
fn legendre(m: usize, t: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, t);
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, d)
}

/// Lagrange interpolation matrix from Chebyshev–Lobatto points `s` to `targets`.
fn barycentric_matrix(s: &[f64], targets: &[f64]) -> DMatrix<f64> {
    let n = s.len() - 1;
    let bw: Vec<f64> = (0..=n)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n { 0.5 * sign } else { sign }
        })
        .collect();
    let mut m = DMatrix::zeros(targets.len(), n + 1);
    for (i, &t) in targets.iter().enumerate() {
        if let Some(j) = s.iter().position(|&sj| sj == t) {
            m[(i, j)] = 1.0;
            continue;
        }
        let terms: Vec<f64> = (0..=n).map(|j| bw[j] / (t - s[j])).collect();
        let total: f64 = terms.iter().sum();
        for j in 0..=n {
            m[(i, j)] = terms[j] / total;
        }
    }
    m
}

fn clenshaw_curtis(n: usize) -> Vec<f64> {
    let theta: Vec<f64> = (0..=n).map(|k| PI * k as f64 / n as f64).collect();
    let nf = n as f64;
    let mut w = vec![0.0; n + 1];
    let mut v = vec![1.0; n.saturating_sub(1)];
    if n.is_multiple_of(2) {
        w[0] = 1.0 / (nf * nf - 1.0);
        w[n] = w[0];
        for k in 1..n / 2 {
            let kf = k as f64;
            for (i, vi) in v.iter_mut().enumerate() {
                *vi -= 2.0 * (2.0 * kf * theta[i + 1]).cos() / (4.0 * kf * kf - 1.0);
            }
        }
        for (i, vi) in v.iter_mut().enumerate() {
            *vi -= (nf * theta[i + 1]).cos() / (nf * nf - 1.0);
        }
    } else {
        w[0] = 1.0 / (nf * nf);
        w[n] = w[0];
        for k in 1..=(n - 1) / 2 {
            let kf = k as f64;
            for (i, vi) in v.iter_mut().enumerate() {
                *vi -= 2.0 * (2.0 * kf * theta[i + 1]).cos() / (4.0 * kf * kf - 1.0);
            }
        }
    }
    for (i, vi) in v.iter().enumerate() {
        w[i + 1] = 2.0 * vi / nf;
    }
    w
}
