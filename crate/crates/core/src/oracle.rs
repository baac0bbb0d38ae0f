//! Independent reference solutions: the analytic free Gaussian, numerical
//! normalisation, and brute-force finite-difference solvers.

use crate::error::{invalid, Result};
use crate::spectral::ChebyshevGrid1D;
use crate::C64;

/// Free radial Gaussian `u = rψ` launched from `r = a` with velocity `v`.
///
/// The mirrored term keeps `u(0, t) = 0`.
pub fn free_gaussian(r: f64, t: f64, sigma: f64, a: f64, v: f64, c: f64) -> C64 {
    let i = C64::new(0.0, 1.0);
    let s = C64::new(sigma * sigma, 2.0 * t);
    let pre = c * sigma.sqrt() / s.sqrt();
    let phase = -i * (v * v * t / 4.0);
    let out = (-(r - v * t - a).powi(2) / (2.0 * s) + i * (v * r / 2.0) + phase).exp();
    let back = (-(r + v * t + a).powi(2) / (2.0 * s) - i * (v * r / 2.0) + phase).exp();
    pre * (out - back)
}

/// Free 1D Gaussian centred at `x0` with velocity `v`, unit `L²` norm at `t = 0`.
pub fn free_gaussian_line(x: f64, t: f64, sigma: f64, x0: f64, v: f64) -> C64 {
    let i = C64::new(0.0, 1.0);
    let s = C64::new(sigma * sigma, 2.0 * t);
    let norm = (sigma * std::f64::consts::PI.sqrt()).sqrt().recip();
    norm * sigma / s.sqrt() * (-(x - x0 - v * t).powi(2) / (2.0 * s) + i * (v * x / 2.0 - v * v * t / 4.0)).exp()
}

/// Product of two line Gaussians: a free planar blob with unit probability.
pub fn free_gaussian_planar(x: f64, y: f64, t: f64, sigma: f64, centre: (f64, f64), velocity: (f64, f64)) -> C64 {
    free_gaussian_line(x, t, sigma, centre.0, velocity.0) * free_gaussian_line(y, t, sigma, centre.1, velocity.1)
}

/// `C` making the `t = 0` profile have unit probability under the grid quadrature.
pub fn normalize_gaussian(sigma: f64, a: f64, v: f64, grid: &ChebyshevGrid1D) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(invalid("sigma must be positive"));
    }
    let dens: Vec<f64> = grid.nodes().iter().map(|&r| free_gaussian(r, 0.0, sigma, a, v, 1.0).norm_sqr()).collect();
    let p = grid.integrate(&dens);
    if !(p > 0.0) || !p.is_finite() {
        return Err(invalid("Gaussian profile vanishes on the grid"));
    }
    Ok(1.0 / p.sqrt())
}

/// Solves a tridiagonal system in place (Thomas algorithm).
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = diag[0];
    c[0] = upper.first().copied().unwrap_or(0.0) / d;
    rhs[0] /= d;
    for i in 1..n {
        d = diag[i] - lower[i - 1] * c[i - 1];
        if i < n - 1 {
            c[i] = upper[i] / d;
        }
        rhs[i] = (rhs[i] - lower[i - 1] * rhs[i - 1]) / d;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

/// Cubic Lagrange interpolation on a uniform grid `x_k = k h`.
fn cubic_uniform(values: &[f64], h: f64, x: f64) -> f64 {
    let n = values.len();
    let s = x / h;
    let k = (s.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let mut acc = 0.0;
    for a in 0..4 {
        let mut l = 1.0;
        for b in 0..4 {
            if a != b {
                l *= (s - (k + b) as f64) / (a as f64 - b as f64);
            }
        }
        acc += l * values[k + a];
    }
    acc
}

/// Second-order finite-difference solution of `(rφ)'' = G·ρ(r)/r` on
/// `n_fine` uniform intervals of `[0, L]`, with `rφ = 0` at both ends,
/// evaluated at `points` by cubic interpolation.
pub fn fd_poisson_radial(
    density: impl Fn(f64) -> f64,
    length: f64,
    coupling: f64,
    n_fine: usize,
    points: &[f64],
) -> Result<Vec<f64>> {
    if n_fine < 1000 {
        return Err(invalid("radial oracle needs at least 1000 intervals"));
    }
    let h = length / n_fine as f64;
    let m = n_fine - 1;
    let mut rhs: Vec<f64> = (1..n_fine)
        .map(|k| {
            let r = k as f64 * h;
            coupling * density(r) / r * h * h
        })
        .collect();
    thomas(&vec![1.0; m - 1], &vec![-2.0; m], &vec![1.0; m - 1], &mut rhs);
    let mut v = vec![0.0; n_fine + 1];
    v[1..n_fine].copy_from_slice(&rhs);
    let mut phi: Vec<f64> = (0..=n_fine).map(|k| if k == 0 { 0.0 } else { v[k] / (k as f64 * h) }).collect();
    phi[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
    Ok(points.iter().map(|&r| cubic_uniform(&phi, h, r)).collect())
}

/// Second-order five-point solution of `∇²φ = G·ρ` on a centred square of side
/// `side` with `φ = 0` on the edges. The discrete system is diagonalised by the
/// sine basis, which gives a direct solve in `O(n³)`.
pub fn fd_poisson_planar(
    density: impl Fn(f64, f64) -> f64,
    side: f64,
    coupling: f64,
    n_fine: usize,
    points: &[(f64, f64)],
) -> Result<Vec<f64>> {
    if n_fine < 200 {
        return Err(invalid("planar oracle needs at least 200 intervals per axis"));
    }
    if n_fine > 1024 {
        return Err(invalid("planar oracle refuses more than 1024 intervals per axis"));
    }
    let n = n_fine;
    let m = n - 1;
    let h = side / n as f64;
    let half = side / 2.0;
    let pi = std::f64::consts::PI;
    let s: Vec<f64> = (0..m * m)
        .map(|q| {
            let (j, k) = (q / m + 1, q % m + 1);
            (2.0 / n as f64).sqrt() * (pi * (j * k) as f64 / n as f64).sin()
        })
        .collect();
    let lam: Vec<f64> = (1..=m).map(|k| -4.0 / (h * h) * (pi * k as f64 / (2.0 * n as f64)).sin().powi(2)).collect();
    let mut f = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            f[i * m + j] = coupling * density((i + 1) as f64 * h - half, (j + 1) as f64 * h - half);
        }
    }
    // The sine matrix is symmetric and orthogonal: φ = S (S f S ./ Λ) S.
    let mul = |a: &[f64], b: &[f64]| {
        let mut c = vec![0.0; m * m];
        for i in 0..m {
            for k in 0..m {
                let aik = a[i * m + k];
                let (row, src) = (&mut c[i * m..(i + 1) * m], &b[k * m..(k + 1) * m]);
                for (x, y) in row.iter_mut().zip(src) {
                    *x += aik * y;
                }
            }
        }
        c
    };
    let mut g = mul(&mul(&s, &f), &s);
    for i in 0..m {
        for j in 0..m {
            g[i * m + j] /= lam[i] + lam[j];
        }
    }
    let inner = mul(&mul(&s, &g), &s);
    let mut phi = vec![0.0; (n + 1) * (n + 1)];
    for i in 0..m {
        for j in 0..m {
            phi[(i + 1) * (n + 1) + j + 1] = inner[i * m + j];
        }
    }
    let col = |j: usize| -> Vec<f64> { (0..=n).map(|i| phi[i * (n + 1) + j]).collect() };
    let columns: Vec<Vec<f64>> = (0..=n).map(col).collect();
    Ok(points
        .iter()
        .map(|&(x, y)| {
            let along_x: Vec<f64> = columns.iter().map(|c| cubic_uniform(c, h, x + half)).collect();
            cubic_uniform(&along_x, h, y + half)
        })
        .collect())
}

/// Brute-force free radial evolution `i u_t = −u_rr`: fourth-order central
/// differences on `n_fine` uniform intervals of `[0, L]`, classical RK4 in time,
/// `u = 0` at both ends with odd reflection at the origin.
pub fn fd_free_evolution(
    initial: impl Fn(f64) -> C64,
    length: f64,
    n_fine: usize,
    dt: f64,
    t_end: f64,
) -> Result<FineProfile> {
    if n_fine < 100 || !(dt > 0.0) {
        return Err(invalid("need at least 100 intervals and a positive time step"));
    }
    let h = length / n_fine as f64;
    let n = n_fine + 1;
    let mut u: Vec<C64> = (0..n).map(|k| if k == 0 || k == n - 1 { C64::new(0.0, 0.0) } else { initial(k as f64 * h) }).collect();
    let i = C64::new(0.0, 1.0);
    let at = |u: &[C64], k: isize| -> C64 {
        if k < 0 {
            -u[(-k) as usize]
        } else if k as usize >= n {
            -u[2 * (n - 1) - k as usize]
        } else {
            u[k as usize]
        }
    };
    let rhs = |u: &[C64]| -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); n];
        for k in 1..n - 1 {
            let kk = k as isize;
            let lap = (-at(u, kk - 2) + at(u, kk - 1) * 16.0 - u[k] * 30.0 + at(u, kk + 1) * 16.0 - at(u, kk + 2)) / (12.0 * h * h);
            out[k] = i * lap;
        }
        out
    };
    let steps = (t_end / dt).round() as usize;
    let axpy = |u: &[C64], k: &[C64], s: f64| -> Vec<C64> { u.iter().zip(k).map(|(a, b)| a + b * s).collect() };
    for _ in 0..steps {
        let k1 = rhs(&u);
        let k2 = rhs(&axpy(&u, &k1, dt / 2.0));
        let k3 = rhs(&axpy(&u, &k2, dt / 2.0));
        let k4 = rhs(&axpy(&u, &k3, dt));
        for q in 0..n {
            u[q] += (k1[q] + k2[q] * 2.0 + k3[q] * 2.0 + k4[q]) * (dt / 6.0);
        }
    }
    Ok(FineProfile { h, values: u })
}

/// Complex samples on a uniform grid `x_k = k h`.
#[derive(Clone, Debug)]
pub struct FineProfile {
    pub h: f64,
    pub values: Vec<C64>,
}

impl FineProfile {
    pub fn at(&self, x: f64) -> C64 {
        let re: Vec<f64> = self.values.iter().map(|z| z.re).collect();
        let im: Vec<f64> = self.values.iter().map(|z| z.im).collect();
        C64::new(cubic_uniform(&re, self.h, x), cubic_uniform(&im, self.h, x))
    }
}
