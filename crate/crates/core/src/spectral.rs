//! Chebyshev collocation: grids, differentiation matrices, Clenshaw–Curtis
//! weights and boundary reductions.

use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::linalg::{Lu, Matrix};

/// Chebyshev–Lobatto points on `[0, L]`, ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct ChebyshevGrid1D {
    length: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl ChebyshevGrid1D {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 8 {
            return Err(invalid(format!("grid needs at least 8 points, got {n}")));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(invalid(format!("grid length must be positive, got {length}")));
        }
        Ok(Self::unchecked(n, length))
    }

    // Shared by `build_grid` and the tiny grids used in doc examples.
    fn unchecked(n: usize, length: f64) -> Self {
        let m = (n - 1) as f64;
        // L(1 - cos θ)/2 = L sin²(θ/2) avoids cancellation near r = 0.
        let nodes = (0..n)
            .map(|j| {
                let s = (j as f64 * PI / (2.0 * m)).sin();
                length * s * s
            })
            .collect();
        let weights = clenshaw_curtis(n).into_iter().map(|w| w * length / 2.0).collect();
        Self { length, nodes, weights }
    }

    pub fn n_points(&self) -> usize {
        self.nodes.len()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        assert_eq!(f.len(), self.nodes.len());
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    pub fn diff_matrix(&self, order: usize) -> Result<Matrix> {
        diff_matrix(self, order)
    }

    /// Interior node indices `1..n-1`.
    pub fn interior(&self) -> std::ops::Range<usize> {
        1..self.nodes.len() - 1
    }

    /// Barycentric interpolation of nodal values at `x`; returns 0 outside `[0, L]`.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        let n = self.nodes.len();
        assert_eq!(values.len(), n);
        if x < 0.0 || x > self.length {
            return 0.0;
        }
        let (mut num, mut den) = (0.0, 0.0);
        for j in 0..n {
            let d = x - self.nodes[j];
            if d == 0.0 {
                return values[j];
            }
            let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n - 1 {
                w *= 0.5;
            }
            num += w * values[j] / d;
            den += w / d;
        }
        num / den
    }
}

pub fn build_grid(n: usize, length: f64) -> Result<ChebyshevGrid1D> {
    ChebyshevGrid1D::new(n, length)
}

/// Clenshaw–Curtis weights on `[-1, 1]` for `n` Lobatto points.
fn clenshaw_curtis(n: usize) -> Vec<f64> {
    let big_n = n - 1;
    let nf = big_n as f64;
    let mut w = vec![0.0; n];
    let mut v = vec![1.0; big_n.saturating_sub(1)];
    let theta = |k: usize| k as f64 * PI / nf;
    if big_n % 2 == 0 {
        w[0] = 1.0 / (nf * nf - 1.0);
        w[big_n] = w[0];
        for k in 1..big_n / 2 {
            let kf = k as f64;
            for (i, vi) in v.iter_mut().enumerate() {
                *vi -= 2.0 * (2.0 * kf * theta(i + 1)).cos() / (4.0 * kf * kf - 1.0);
            }
        }
        for (i, vi) in v.iter_mut().enumerate() {
            *vi -= (nf * theta(i + 1)).cos() / (nf * nf - 1.0);
        }
    } else {
        w[0] = 1.0 / (nf * nf);
        w[big_n] = w[0];
        for k in 1..=(big_n - 1) / 2 {
            let kf = k as f64;
            for (i, vi) in v.iter_mut().enumerate() {
                *vi -= 2.0 * (2.0 * kf * theta(i + 1)).cos() / (4.0 * kf * kf - 1.0);
            }
        }
    }
    for (i, vi) in v.into_iter().enumerate() {
        w[i + 1] = 2.0 * vi / nf;
    }
    w
}

/// First- or second-derivative collocation matrix on the grid.
///
/// The second derivative comes from the barycentric recursion rather than
/// squaring `D¹`.
pub fn diff_matrix(grid: &ChebyshevGrid1D, order: usize) -> Result<Matrix> {
    if order != 1 && order != 2 {
        return Err(invalid(format!("derivative order must be 1 or 2, got {order}")));
    }
    let n = grid.n_points();
    let m = (n - 1) as f64;
    let c = |j: usize| {
        let base = if j == 0 || j == n - 1 { 2.0 } else { 1.0 };
        if j % 2 == 0 {
            base
        } else {
            -base
        }
    };
    // x_i - x_j on the reference interval, via a product of sines.
    let dx = |i: usize, j: usize| {
        2.0 * ((i + j) as f64 * PI / (2.0 * m)).sin() * ((i as f64 - j as f64) * PI / (2.0 * m)).sin()
    };
    let mut d1 = Matrix::zeros(n, n);
    for i in 0..n {
        let mut sum = 0.0;
        for j in 0..n {
            if i != j {
                let v = c(i) / c(j) / dx(i, j);
                d1.set(i, j, v);
                sum += v;
            }
        }
        d1.set(i, i, -sum);
    }
    let scale = 2.0 / grid.length();
    if order == 1 {
        return Ok(d1.scaled(scale));
    }
    let mut d2 = Matrix::zeros(n, n);
    for i in 0..n {
        let mut sum = 0.0;
        for j in 0..n {
            if i != j {
                let v = 2.0 * (c(i) / c(j) * d1.get(i, i) - d1.get(i, j)) / dx(i, j);
                d2.set(i, j, v);
                sum += v;
            }
        }
        d2.set(i, i, -sum);
    }
    Ok(d2.scaled(scale * scale))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ends {
    Left,
    Right,
    Both,
}

/// Drops the rows and columns of the chosen boundary nodes.
pub fn reduce_dirichlet(matrix: &Matrix, ends: Ends) -> Result<Matrix> {
    if !matrix.is_square() || matrix.rows() < 3 {
        return Err(invalid(format!(
            "expected a square matrix of size at least 3, got {}x{}",
            matrix.rows(),
            matrix.cols()
        )));
    }
    let n = matrix.rows();
    let keep: Vec<usize> = match ends {
        Ends::Left => (1..n).collect(),
        Ends::Right => (0..n - 1).collect(),
        Ends::Both => (1..n - 1).collect(),
    };
    Ok(matrix.submatrix(&keep, &keep))
}

/// Elimination of the two end values under homogeneous Neumann conditions.
///
/// `extension` maps the `n-2` interior values to all `n` nodal values such that
/// the collocated first derivative vanishes at both ends.
#[derive(Clone, Debug)]
pub struct NeumannReduction {
    pub extension: Matrix,
}

impl NeumannReduction {
    pub fn new(d1: &Matrix) -> Result<Self> {
        let n = d1.rows();
        let last = n - 1;
        let interior: Vec<usize> = (1..last).collect();
        let b = d1.submatrix(&[0, last], &[0, last]);
        let c = d1.submatrix(&[0, last], &interior);
        let lu = Lu::from_matrix(&b)?;
        let mut ext = Matrix::zeros(n, n - 2);
        for (k, _) in interior.iter().enumerate() {
            let mut col = vec![-c.get(0, k), -c.get(1, k)];
            lu.solve_in_place(&mut col);
            ext.set(0, k, col[0]);
            ext.set(last, k, col[1]);
            ext.set(k + 1, k, 1.0);
        }
        Ok(Self { extension: ext })
    }

    pub fn extend<T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>>(
        &self,
        interior: &[T],
    ) -> Vec<T> {
        let n = self.extension.rows();
        let mut out = vec![T::default(); n];
        out[1..n - 1].copy_from_slice(interior);
        for &end in &[0, n - 1] {
            let mut acc = T::default();
            for (k, &v) in interior.iter().enumerate() {
                acc = acc + v * self.extension.get(end, k);
            }
            out[end] = acc;
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TensorRole {
    AxisymmetricPolar,
    PlanarCartesian,
}

/// Tensor product of two Chebyshev grids. Values are stored with the second
/// coordinate varying fastest: index `i * n_b + j`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorGrid2D {
    pub grid_a: ChebyshevGrid1D,
    pub grid_b: ChebyshevGrid1D,
    pub role: TensorRole,
}

impl TensorGrid2D {
    /// `r ∈ [0, L]` by `θ ∈ [0, π]`.
    pub fn axisymmetric(n_r: usize, length: f64, n_theta: usize) -> Result<Self> {
        Ok(Self {
            grid_a: ChebyshevGrid1D::new(n_r, length)?,
            grid_b: ChebyshevGrid1D::new(n_theta, PI)?,
            role: TensorRole::AxisymmetricPolar,
        })
    }

    /// Square box of side `side` with physical coordinates centred on the origin.
    pub fn planar(n: usize, side: f64) -> Result<Self> {
        Ok(Self {
            grid_a: ChebyshevGrid1D::new(n, side)?,
            grid_b: ChebyshevGrid1D::new(n, side)?,
            role: TensorRole::PlanarCartesian,
        })
    }

    pub fn n_a(&self) -> usize {
        self.grid_a.n_points()
    }

    pub fn n_b(&self) -> usize {
        self.grid_b.n_points()
    }

    pub fn len(&self) -> usize {
        self.n_a() * self.n_b()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n_b() + j
    }

    /// Physical coordinates of node `(i, j)`; planar grids are shifted to be centred.
    pub fn coords(&self, i: usize, j: usize) -> (f64, f64) {
        let (a, b) = (self.grid_a.nodes()[i], self.grid_b.nodes()[j]);
        match self.role {
            TensorRole::AxisymmetricPolar => (a, b),
            TensorRole::PlanarCartesian => {
                (a - self.grid_a.length() / 2.0, b - self.grid_b.length() / 2.0)
            }
        }
    }

    /// Plain tensor quadrature weights (no geometric measure applied).
    pub fn quad_weights(&self) -> Vec<f64> {
        let wa = self.grid_a.quad_weights();
        let wb = self.grid_b.quad_weights();
        let mut w = Vec::with_capacity(self.len());
        for &x in wa {
            for &y in wb {
                w.push(x * y);
            }
        }
        w
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        assert_eq!(f.len(), self.len());
        self.quad_weights().iter().zip(f).map(|(w, v)| w * v).sum()
    }
}

/// `∂²/∂θ² + cot θ ∂/∂θ` acting on interior θ values, with the pole values
/// eliminated through the Neumann conditions.
#[derive(Clone, Debug)]
pub struct AngularOperator {
    pub neumann: NeumannReduction,
    pub op: Matrix,
    pub d1: Matrix,
}

impl AngularOperator {
    pub fn new(theta: &ChebyshevGrid1D) -> Result<Self> {
        let d1 = diff_matrix(theta, 1)?;
        let d2 = diff_matrix(theta, 2)?;
        let neumann = NeumannReduction::new(&d1)?;
        let n = theta.n_points();
        let interior: Vec<usize> = (1..n - 1).collect();
        let all: Vec<usize> = (0..n).collect();
        let mut rows = d2.submatrix(&interior, &all);
        let d1_int = d1.submatrix(&interior, &all);
        for (k, &i) in interior.iter().enumerate() {
            let cot = 1.0 / theta.nodes()[i].tan();
            for j in 0..n {
                rows.set(k, j, rows.get(k, j) + cot * d1_int.get(k, j));
            }
        }
        let op = rows.matmul(&neumann.extension);
        Ok(Self { neumann, op, d1 })
    }

    pub fn n_interior(&self) -> usize {
        self.op.rows()
    }
}
