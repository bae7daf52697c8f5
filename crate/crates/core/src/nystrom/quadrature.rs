use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ApertureSpec, PlanePoint};

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
///
/// Roots are found by Newton iteration on the three-term Legendre recurrence,
/// starting from the Tricomi estimate; the rule is symmetrized about zero.
pub fn gauss_legendre_rule(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::domain("Gauss-Legendre rule needs at least one node"));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let step = p / dp;
            x -= step;
            if step.abs() <= 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // x decreases with i, so fill from both ends
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok((nodes, weights))
}

/// `(P_n(x), P_n'(x))`.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut prev, mut cur) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0) * x * cur - (kf - 1.0) * prev) / kf;
        prev = cur;
        cur = next;
    }
    if n == 1 {
        prev = 1.0;
    }
    let deriv = n as f64 * (x * cur - prev) / (x * x - 1.0);
    (cur, deriv)
}

/// Tensor-product Gauss-Legendre rule over a rectangular aperture centered at
/// the origin.
///
/// Tensor nodes are ordered with the `z` index varying fastest: point
/// `ix * nz + iz` is `(nodes_x[ix], nodes_z[iz])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub aperture: ApertureSpec,
    pub nodes_x: Vec<f64>,
    pub weights_x: Vec<f64>,
    pub nodes_z: Vec<f64>,
    pub weights_z: Vec<f64>,
    points: Vec<PlanePoint>,
    weights: Vec<f64>,
}

impl QuadratureGrid {
    /// Placeholder grid for spectra that were not computed from quadrature.
    pub(crate) fn empty() -> Self {
        QuadratureGrid {
            aperture: ApertureSpec { lx: 0.0, lz: 0.0 },
            nodes_x: Vec::new(),
            weights_x: Vec::new(),
            nodes_z: Vec::new(),
            weights_z: Vec::new(),
            points: Vec::new(),
            weights: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn n_per_dim(&self) -> usize {
        self.nodes_x.len()
    }

    pub fn points(&self) -> &[PlanePoint] {
        &self.points
    }

    /// Tensor weights in m^2.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Sum over the grid of `f(point) * weight`.
    pub fn integrate(&self, f: impl Fn(PlanePoint) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| f(p) * w)
            .sum()
    }
}

fn scaled_rule(len: f64, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (x, w) = gauss_legendre_rule(n)?;
    let half = 0.5 * len;
    Ok((
        x.into_iter().map(|v| v * half).collect(),
        w.into_iter().map(|v| v * half).collect(),
    ))
}

/// Tensor Gauss-Legendre grid with `n_per_dim` nodes along each side.
pub fn gauss_legendre_grid(aperture: &ApertureSpec, n_per_dim: usize) -> Result<QuadratureGrid> {
    if n_per_dim == 0 {
        return Err(Error::domain("n_per_dim must be at least 1"));
    }
    let (nodes_x, weights_x) = scaled_rule(aperture.lx, n_per_dim)?;
    let (nodes_z, weights_z) = scaled_rule(aperture.lz, n_per_dim)?;
    let mut points = Vec::with_capacity(n_per_dim * n_per_dim);
    let mut weights = Vec::with_capacity(n_per_dim * n_per_dim);
    for (&x, &wx) in nodes_x.iter().zip(&weights_x) {
        for (&z, &wz) in nodes_z.iter().zip(&weights_z) {
            points.push([x, z]);
            weights.push(wx * wz);
        }
    }
    Ok(QuadratureGrid {
        aperture: *aperture,
        nodes_x,
        weights_x,
        nodes_z,
        weights_z,
        points,
        weights,
    })
}
