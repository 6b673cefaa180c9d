//! Small numerical building blocks shared by the modules: quadrature rules,
//! periodic splines, a cyclic tridiagonal solver, 2-D FFT helpers and MINRES.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use rustfft::{num_complex::Complex64, FftPlanner};

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    let n = NonZeroUsize::new(n.max(1)).expect("nonzero");
    let rule = GaussLegendre::new(n);
    let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().iter().map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs
}

/// Solve a cyclic tridiagonal system.
///
/// Row `i` reads `lower[i]·x[i-1] + diag[i]·x[i] + upper[i]·x[i+1] = rhs[i]`,
/// indices taken modulo `n`.
pub fn solve_cyclic_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    assert!(lower.len() == n && upper.len() == n && rhs.len() == n);
    if n == 0 {
        return Vec::new();
    }
    if n <= 2 {
        let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            m[(i, i)] += diag[i];
            m[(i, (i + n - 1) % n)] += lower[i];
            m[(i, (i + 1) % n)] += upper[i];
        }
        let b = nalgebra::DVector::from_column_slice(rhs);
        return m.lu().solve(&b).map(|x| x.as_slice().to_vec()).unwrap_or_else(|| vec![f64::NAN; n]);
    }
    // Sherman–Morrison around an ordinary tridiagonal solve.
    let alpha = upper[n - 1];
    let beta = lower[0];
    let gamma = -diag[0];
    let mut bb = diag.to_vec();
    bb[0] -= gamma;
    bb[n - 1] -= alpha * beta / gamma;
    let x = solve_tridiagonal(lower, &bb, upper, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = solve_tridiagonal(lower, &bb, upper, &u);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = if i + 1 < n { upper[i] / m } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Interpolating periodic cubic spline through `(t_i, y_i)` with period `period`.
#[derive(Debug, Clone)]
pub struct PeriodicCubic {
    t: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
    period: f64,
}

impl PeriodicCubic {
    /// `t` must be strictly increasing with `t[n-1] - t[0] < period`.
    pub fn new(t: &[f64], y: &[f64], period: f64) -> Result<Self> {
        let n = t.len();
        if n < 3 || y.len() != n {
            return Err(Error::Degenerate("periodic spline needs at least 3 knots".into()));
        }
        let h: Vec<f64> = (0..n).map(|i| if i + 1 < n { t[i + 1] - t[i] } else { t[0] + period - t[n - 1] }).collect();
        if h.iter().any(|&hi| hi <= 0.0 || !hi.is_finite()) {
            return Err(Error::Degenerate("spline knots not strictly increasing".into()));
        }
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let hp = h[(i + n - 1) % n];
            let hi = h[i];
            lower[i] = hp;
            diag[i] = 2.0 * (hp + hi);
            upper[i] = hi;
            rhs[i] = 6.0 * ((y[(i + 1) % n] - y[i]) / hi - (y[i] - y[(i + n - 1) % n]) / hp);
        }
        let m = solve_cyclic_tridiagonal(&lower, &diag, &upper, &rhs);
        Ok(Self { t: t.to_vec(), y: y.to_vec(), m, period })
    }

    pub fn eval(&self, s: f64) -> f64 {
        let n = self.t.len();
        let t0 = self.t[0];
        let s = t0 + (s - t0).rem_euclid(self.period);
        let i = match self.t.partition_point(|&ti| ti <= s) {
            0 => n - 1,
            k => k - 1,
        };
        let j = (i + 1) % n;
        let tj = if j == 0 { self.t[0] + self.period } else { self.t[j] };
        let h = tj - self.t[i];
        let a = (tj - s) / h;
        let b = (s - self.t[i]) / h;
        a * self.y[i] + b * self.y[j] + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[j]) * h * h / 6.0
    }
}

/// Uniform cubic B-spline basis weights for the four neighbouring coefficients
/// `c[i-1], c[i], c[i+1], c[i+2]` at fractional offset `u` together with the
/// first and second derivatives (per unit of `u`).
#[inline]
fn bspline_weights(u: f64) -> ([f64; 4], [f64; 4], [f64; 4]) {
    let u2 = u * u;
    let u3 = u2 * u;
    let om = 1.0 - u;
    (
        [om * om * om / 6.0, (3.0 * u3 - 6.0 * u2 + 4.0) / 6.0, (-3.0 * u3 + 3.0 * u2 + 3.0 * u + 1.0) / 6.0, u3 / 6.0],
        [-0.5 * om * om, 1.5 * u2 - 2.0 * u, -1.5 * u2 + u + 0.5, 0.5 * u2],
        [om, 3.0 * u - 2.0, 1.0 - 3.0 * u, u],
    )
}

/// Value and first/second partials of a bivariate function.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub dx: f64,
    pub dy: f64,
    pub dxx: f64,
    pub dxy: f64,
    pub dyy: f64,
}

/// Doubly periodic C² interpolant of samples on a uniform grid over
/// `[0, lx) × [0, ly)` (uniform cubic B-spline, prefiltered so that it
/// reproduces the samples exactly at the nodes).
#[derive(Debug, Clone)]
pub struct PeriodicSpline2 {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    coef: Vec<f64>,
}

impl PeriodicSpline2 {
    /// `samples[j * nx + i]` is the value at `(i·lx/nx, j·ly/ny)`.
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64, samples: &[f64]) -> Result<Self> {
        if nx < 4 || ny < 4 || samples.len() != nx * ny {
            return Err(Error::Degenerate(format!("periodic spline grid {nx}x{ny} with {} samples", samples.len())));
        }
        let mut data: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft2(&mut data, nx, ny, false);
        let sym = |k: usize, n: usize| (4.0 + 2.0 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos()) / 6.0;
        for j in 0..ny {
            let sy = sym(j, ny);
            for i in 0..nx {
                data[j * nx + i] /= sym(i, nx) * sy;
            }
        }
        fft2(&mut data, nx, ny, true);
        let coef = data.iter().map(|c| c.re).collect();
        Ok(Self { nx, ny, lx, ly, coef })
    }

    /// Spline with the given B-spline coefficients (same layout as samples).
    pub fn from_coefficients(nx: usize, ny: usize, lx: f64, ly: f64, coef: Vec<f64>) -> Result<Self> {
        if nx < 4 || ny < 4 || coef.len() != nx * ny {
            return Err(Error::Degenerate(format!("periodic spline grid {nx}x{ny} with {} coefficients", coef.len())));
        }
        Ok(Self { nx, ny, lx, ly, coef })
    }

    pub fn periods(&self) -> (f64, f64) {
        (self.lx, self.ly)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.jet(x, y).value
    }

    pub fn jet(&self, x: f64, y: f64) -> Jet2 {
        let hx = self.lx / self.nx as f64;
        let hy = self.ly / self.ny as f64;
        let tx = (x / hx).rem_euclid(self.nx as f64);
        let ty = (y / hy).rem_euclid(self.ny as f64);
        let ix = tx.floor();
        let iy = ty.floor();
        let (wx, dwx, ddwx) = bspline_weights(tx - ix);
        let (wy, dwy, ddwy) = bspline_weights(ty - iy);
        let ix = ix as isize;
        let iy = iy as isize;
        let mut out = Jet2::default();
        for (b, ((wyb, dwyb), ddwyb)) in wy.iter().zip(&dwy).zip(&ddwy).enumerate() {
            let row = (iy + b as isize - 1).rem_euclid(self.ny as isize) as usize * self.nx;
            let (mut v, mut d, mut dd) = (0.0, 0.0, 0.0);
            for a in 0..4 {
                let c = self.coef[row + (ix + a as isize - 1).rem_euclid(self.nx as isize) as usize];
                v += wx[a] * c;
                d += dwx[a] * c;
                dd += ddwx[a] * c;
            }
            out.value += wyb * v;
            out.dx += wyb * d;
            out.dy += dwyb * v;
            out.dxx += wyb * dd;
            out.dxy += dwyb * d;
            out.dyy += ddwyb * v;
        }
        out.dx /= hx;
        out.dy /= hy;
        out.dxx /= hx * hx;
        out.dxy /= hx * hy;
        out.dyy /= hy * hy;
        out
    }
}

/// In-place 2-D FFT of a row-major `nx × ny` array (`data[j * nx + i]`).
/// The inverse transform is normalized.
pub fn fft2(data: &mut [Complex64], nx: usize, ny: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let (fx, fy) = if inverse {
        (planner.plan_fft_inverse(nx), planner.plan_fft_inverse(ny))
    } else {
        (planner.plan_fft_forward(nx), planner.plan_fft_forward(ny))
    };
    for row in data.chunks_mut(nx) {
        fx.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); ny];
    for i in 0..nx {
        for j in 0..ny {
            col[j] = data[j * nx + i];
        }
        fy.process(&mut col);
        for j in 0..ny {
            data[j * nx + i] = col[j];
        }
    }
    if inverse {
        let scale = 1.0 / (nx * ny) as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

/// Signed integer wavenumber of FFT bin `k` on an `n`-point grid; the
/// Nyquist bin of an even grid maps to `None` (it has no real derivative).
pub fn wavenumber(k: usize, n: usize) -> Option<f64> {
    if n.is_multiple_of(2) && k == n / 2 {
        None
    } else if k <= n / 2 {
        Some(k as f64)
    } else {
        Some(k as f64 - n as f64)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned MINRES for a symmetric (possibly indefinite) operator.
///
/// `precond` must apply a symmetric positive definite approximation of the
/// inverse. Returns the solution and the number of iterations used.
pub fn minres<A, P>(apply: A, precond: P, b: &[f64], rtol: f64, max_iter: usize) -> (Vec<f64>, usize)
where
    A: Fn(&[f64]) -> Vec<f64>,
    P: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r1 = b.to_vec();
    let mut y = precond(&r1);
    let beta1 = dot(&r1, &y);
    if beta1 <= 0.0 || !beta1.is_finite() {
        return (x, 0);
    }
    let beta1 = beta1.sqrt();
    let mut r2 = r1.clone();
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut itn = 0;
    while itn < max_iter {
        itn += 1;
        let s = 1.0 / beta;
        let v: Vec<f64> = y.iter().map(|yi| s * yi).collect();
        y = apply(&v);
        if itn >= 2 {
            let f = beta / oldb;
            for (yi, ri) in y.iter_mut().zip(&r1) {
                *yi -= f * ri;
            }
        }
        let alfa = dot(&v, &y);
        let f = alfa / beta;
        for (yi, ri) in y.iter_mut().zip(&r2) {
            *yi -= f * ri;
        }
        r1 = std::mem::replace(&mut r2, y.clone());
        y = precond(&r2);
        oldb = beta;
        let bb = dot(&r2, &y);
        if bb < 0.0 || !bb.is_finite() {
            break;
        }
        beta = bb.sqrt();
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        let w1 = std::mem::replace(&mut w2, w.clone());
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
            x[i] += phi * w[i];
        }
        if phibar <= rtol * beta1 || beta == 0.0 {
            break;
        }
    }
    (x, itn)
}

/// One Fourier mode `a·cos(2π(m x/lx + n y/ly)) + b·sin(…)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrigTerm {
    pub m: i32,
    pub n: i32,
    pub a: f64,
    pub b: f64,
}

/// Doubly periodic trigonometric polynomial on an `lx × ly` torus.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrigSeries {
    pub constant: f64,
    pub terms: Vec<TrigTerm>,
}

impl TrigSeries {
    pub fn constant(c: f64) -> Self {
        Self { constant: c, terms: Vec::new() }
    }

    pub fn jet(&self, x: f64, y: f64, lx: f64, ly: f64) -> Jet2 {
        let tau = 2.0 * std::f64::consts::PI;
        let mut out = Jet2 { value: self.constant, ..Jet2::default() };
        for t in &self.terms {
            let kx = tau * t.m as f64 / lx;
            let ky = tau * t.n as f64 / ly;
            let (s, c) = (kx * x + ky * y).sin_cos();
            let val = t.a * c + t.b * s;
            let der = -t.a * s + t.b * c;
            out.value += val;
            out.dx += kx * der;
            out.dy += ky * der;
            out.dxx -= kx * kx * val;
            out.dxy -= kx * ky * val;
            out.dyy -= ky * ky * val;
        }
        out
    }

    /// Mean over the torus (only the `(0, 0)` modes contribute).
    pub fn mean(&self) -> f64 {
        self.constant + self.terms.iter().filter(|t| t.m == 0 && t.n == 0).map(|t| t.a).sum::<f64>()
    }
}
