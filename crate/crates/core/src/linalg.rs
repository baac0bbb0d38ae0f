//! Small dense-matrix layer over `faer`.
//!
//! Matrices here are row-major so that matvecs stream through memory; anything
//! that needs a factorisation or a spectrum is handed to `faer`.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::traits::ComplexField;
use faer::{Mat, MatMut};

use crate::error::{Error, Result};
use crate::C64;

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn diag(d: &[f64]) -> Self {
        Self::from_fn(d.len(), d.len(), |i, j| if i == j { d[i] } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        Matrix::from_fn(rows.len(), cols.len(), |i, j| self.get(rows[i], cols[j]))
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn add_diag(&mut self, d: &[f64]) {
        assert!(self.is_square() && d.len() == self.rows);
        for (i, v) in d.iter().enumerate() {
            self.data[i * self.cols + i] += v;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.cols);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn mul_cvec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.rows];
        self.mul_cvec_into(x, &mut y);
        y
    }

    pub fn mul_cvec_into(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.cols);
        for (i, yi) in y.iter_mut().enumerate() {
            let (mut re, mut im) = (0.0, 0.0);
            for (a, b) in self.row(i).iter().zip(x) {
                re += a * b.re;
                im += a * b.im;
            }
            *yi = C64::new(re, im);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_faer(&self) -> Mat<f64> {
        Mat::from_fn(self.rows, self.cols, |i, j| self.get(i, j))
    }

    pub fn to_faer_complex(&self) -> Mat<C64> {
        Mat::from_fn(self.rows, self.cols, |i, j| C64::new(self.get(i, j), 0.0))
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Matrix) -> Matrix {
        let (p, q) = (other.rows, other.cols);
        Matrix::from_fn(self.rows * p, self.cols * q, |i, j| {
            self.get(i / p, j / q) * other.get(i % p, j % q)
        })
    }
}

/// LU factorisation with partial pivoting, reusable for many right-hand sides.
pub struct Lu<T: ComplexField> {
    n: usize,
    lu: PartialPivLu<T>,
}

impl<T: ComplexField> Lu<T> {
    pub fn new(m: &Mat<T>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidArgument("LU of a non-square matrix".into()));
        }
        Ok(Self { n: m.nrows(), lu: m.partial_piv_lu() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        assert_eq!(b.len(), self.n);
        let rhs = MatMut::from_column_major_slice_mut(b, self.n, 1);
        self.lu.solve_in_place(rhs);
    }
}

impl Lu<f64> {
    pub fn from_matrix(m: &Matrix) -> Result<Self> {
        let lu = Self::new(&m.to_faer())?;
        lu.check_finite()?;
        Ok(lu)
    }

    fn check_finite(&self) -> Result<()> {
        let mut probe = vec![1.0; self.n];
        self.solve_in_place(&mut probe);
        if probe.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NumericalFailure("singular matrix".into()))
        }
    }

    /// Solves with a complex right-hand side by splitting real and imaginary parts.
    pub fn solve_complex_in_place(&self, b: &mut [C64]) {
        let mut re: Vec<f64> = b.iter().map(|z| z.re).collect();
        let mut im: Vec<f64> = b.iter().map(|z| z.im).collect();
        self.solve_in_place(&mut re);
        self.solve_in_place(&mut im);
        for (z, (r, i)) in b.iter_mut().zip(re.into_iter().zip(im)) {
            *z = C64::new(r, i);
        }
    }
}

impl Lu<C64> {
    pub fn from_complex(m: &Mat<C64>) -> Result<Self> {
        let lu = Self::new(m)?;
        let mut probe = vec![C64::new(1.0, 0.0); lu.n];
        lu.solve_in_place(&mut probe);
        if probe.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            Ok(lu)
        } else {
            Err(Error::NumericalFailure("singular matrix".into()))
        }
    }
}

/// Eigenpairs of a general real matrix, sorted by ascending real part of the eigenvalue.
pub fn eig_real(m: &Matrix) -> Result<Vec<(C64, Vec<C64>)>> {
    let a = m.to_faer();
    let e = a.eigen().map_err(|e| Error::NumericalFailure(format!("eigen decomposition: {e:?}")))?;
    Ok(collect_pairs(e.S().column_vector().iter().copied().collect(), e.U().as_ref()))
}

/// Eigenpairs of a general complex matrix, sorted by ascending real part.
pub fn eig_complex(m: &Mat<C64>) -> Result<Vec<(C64, Vec<C64>)>> {
    let e = m.eigen().map_err(|e| Error::NumericalFailure(format!("eigen decomposition: {e:?}")))?;
    Ok(collect_pairs(e.S().column_vector().iter().copied().collect(), e.U().as_ref()))
}

fn collect_pairs(vals: Vec<C64>, vecs: faer::MatRef<'_, C64>) -> Vec<(C64, Vec<C64>)> {
    let mut pairs: Vec<(C64, Vec<C64>)> = vals
        .into_iter()
        .enumerate()
        .map(|(j, lam)| (lam, (0..vecs.nrows()).map(|i| vecs[(i, j)]).collect()))
        .collect();
    pairs.sort_by(|a, b| a.0.re.total_cmp(&b.0.re));
    pairs
}

/// Real eigenvalues of a real matrix whose spectrum is known to be real.
pub fn real_spectrum(m: &Matrix) -> Result<Vec<f64>> {
    let vals = m
        .to_faer()
        .eigenvalues()
        .map_err(|e| Error::NumericalFailure(format!("eigenvalues: {e:?}")))?;
    let mut out: Vec<f64> = vals.iter().map(|z| z.re).collect();
    out.sort_by(f64::total_cmp);
    Ok(out)
}

pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn csup_norm(v: &[C64]) -> f64 {
    v.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn csup_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}
