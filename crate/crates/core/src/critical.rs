//! Critical values: `c_h` on higher-genus surfaces, the homogeneous Mañé
//! value and an upper bound for `c₀(g, σ) = inf_{dθ=σ} sup|θ|` on flat tori.
//!
//! Energy levels and `c₀` live in different units: `𝒯_k ≥ (√(2k) − sup|θ|)·ℓ`
//! makes `k = ½ sup|θ|²` the threshold, so the bound is reported both as the
//! sup-norm and as the energy `½ sup|θ|²` that is comparable with `τ`.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ChartPoint, SurfaceModel};
use crate::magnetic::{flux_total, local_primitive, LocalPrimitive, MagneticSystem, PrimitiveRegion, DEFAULT_FLUX_RESOLUTION};
use crate::numerics::{fft2, PeriodicSpline2};
use crate::orbitfind::HomogeneousKind;
use crate::Execution;

/// `c_h(g, σ) = −[σ]²/(4π·χ(M)·[μ])` for genus at least two.
pub fn c_h_value(system: &MagneticSystem) -> Result<f64> {
    match system.surface {
        SurfaceModel::HyperbolicPlane { genus: Some(h) } if h >= 2 => {}
        _ => return Err(Error::Unsupported("c_h is defined on surfaces of genus at least two".into())),
    }
    let inv = system.surface.surface_invariants()?;
    let flux = flux_total(system, DEFAULT_FLUX_RESOLUTION, Execution::default())?;
    Ok(-flux * flux / (4.0 * PI * inv.euler_characteristic as f64 * inv.area))
}

/// Mañé critical value of the homogeneous hyperbolic system `σ = μ`.
pub fn homogeneous_mane_value(kind: HomogeneousKind) -> Result<f64> {
    match kind {
        HomogeneousKind::Hyperbolic => Ok(0.5),
        other => Err(Error::Unsupported(format!("closed-form Mañé value only for the hyperbolic plane, not {other:?}"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct C0Params {
    /// Grid for the potential `g` and for the sup.
    pub grid: usize,
    /// Log-sum-exp temperatures, applied to `|θ|²` normalized by its initial maximum.
    pub betas: Vec<f64>,
    /// Iteration cap per temperature.
    pub stage_iters: usize,
    /// Total iteration budget. Runs with a larger budget extend the same
    /// iterate sequence, so the best value found can only improve.
    pub budget: usize,
}

impl Default for C0Params {
    fn default() -> Self {
        Self { grid: 64, betas: vec![10.0, 100.0, 1000.0], stage_iters: 400, budget: 1200 }
    }
}

/// Upper bound for `c₀` with its witness `θ = θ* + dg + c₁dx + c₂dy`.
#[derive(Debug, Clone)]
pub struct C0Bound {
    /// `max |θ|` over the grid nodes.
    pub sup_norm: f64,
    /// `½ sup_norm²`, in energy units.
    pub value: f64,
    pub witness: LocalPrimitive,
    pub harmonic: (f64, f64),
    pub iterations: usize,
    pub grid: usize,
}

struct Stencil {
    n: usize,
    hx: f64,
    hy: f64,
}

const W: [f64; 3] = [1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0];
const DW: [f64; 3] = [-0.5, 0.0, 0.5];

impl Stencil {
    fn idx(&self, i: isize, j: isize) -> usize {
        let n = self.n as isize;
        (j.rem_euclid(n) * n + i.rem_euclid(n)) as usize
    }

    /// Gradient of the B-spline with coefficients `c` at the grid nodes.
    fn grad(&self, c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let mut gx = vec![0.0; n * n];
        let mut gy = vec![0.0; n * n];
        for j in 0..n as isize {
            for i in 0..n as isize {
                let (mut sx, mut sy) = (0.0, 0.0);
                for b in 0..3 {
                    for a in 0..3 {
                        let v = c[self.idx(i + a as isize - 1, j + b as isize - 1)];
                        sx += DW[a] * W[b] * v;
                        sy += W[a] * DW[b] * v;
                    }
                }
                let k = self.idx(i, j);
                gx[k] = sx / self.hx;
                gy[k] = sy / self.hy;
            }
        }
        (gx, gy)
    }

    /// Adjoint of `grad`.
    fn grad_adjoint(&self, rx: &[f64], ry: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for j in 0..n as isize {
            for i in 0..n as isize {
                let k = self.idx(i, j);
                let (ax, ay) = (rx[k] / self.hx, ry[k] / self.hy);
                for b in 0..3 {
                    for a in 0..3 {
                        out[self.idx(i + a as isize - 1, j + b as isize - 1)] += DW[a] * W[b] * ax + W[a] * DW[b] * ay;
                    }
                }
            }
        }
        out
    }

    /// Apply `(GᵀG)⁺` in Fourier space, `G = grad`.
    fn precondition(&self, g: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut hat: Vec<Complex64> = g.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft2(&mut hat, n, n, false);
        for j in 0..n {
            let tj = 2.0 * PI * j as f64 / n as f64;
            for i in 0..n {
                let ti = 2.0 * PI * i as f64 / n as f64;
                let si = (4.0 + 2.0 * ti.cos()) / 6.0;
                let sj = (4.0 + 2.0 * tj.cos()) / 6.0;
                let sym = (ti.sin() * sj / self.hx).powi(2) + (si * tj.sin() / self.hy).powi(2);
                hat[j * n + i] = if sym > 1e-12 * (1.0 / (self.hx * self.hx) + 1.0 / (self.hy * self.hy)) {
                    hat[j * n + i] / sym
                } else {
                    Complex64::new(0.0, 0.0)
                };
            }
        }
        fft2(&mut hat, n, n, true);
        hat.iter().map(|c| c.re).collect()
    }
}

/// Smoothed maximum of `q/q0` and its gradient with respect to `θ`.
fn lse(thx: &[f64], thy: &[f64], q0: f64, beta: f64) -> (f64, Vec<f64>, Vec<f64>) {
    let q: Vec<f64> = thx.iter().zip(thy).map(|(a, b)| (a * a + b * b) / q0).collect();
    let m = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = q.iter().map(|&x| (beta * (x - m)).exp()).collect();
    let z: f64 = w.iter().sum();
    let value = m + z.ln() / beta;
    let gx = thx.iter().zip(&w).map(|(t, wi)| 2.0 * wi / z * t / q0).collect();
    let gy = thy.iter().zip(&w).map(|(t, wi)| 2.0 * wi / z * t / q0).collect();
    (value, gx, gy)
}

fn sup_norm(thx: &[f64], thy: &[f64]) -> f64 {
    thx.iter().zip(thy).fold(0.0f64, |m, (a, b)| m.max(a.hypot(*b)))
}

/// Minimize `sup|θ|` over `θ = θ* + dg + c₁dx + c₂dy` by descent on a
/// log-sum-exp smoothing with an increasing temperature schedule.
pub fn c0_upper_bound(system: &MagneticSystem, params: &C0Params) -> Result<C0Bound> {
    let SurfaceModel::FlatTorus { lx, ly } = system.surface else {
        return Err(Error::Unsupported("c₀ is computed on flat tori only".into()));
    };
    let base = match local_primitive(system, PrimitiveRegion::Torus { c1: 0.0, c2: 0.0 }) {
        Ok(p) => p,
        Err(Error::NoGlobalPrimitive { flux }) => return Err(Error::Unsupported(format!("c₀ needs an exact field, flux is {flux}"))),
        Err(e) => return Err(e),
    };
    let n = params.grid;
    if n < 4 {
        return Err(Error::InvalidParameter("c₀ grid must be at least 4".into()));
    }
    let st = Stencil { n, hx: lx / n as f64, hy: ly / n as f64 };
    let mut bx = vec![0.0; n * n];
    let mut by = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            let t = base.eval(system, &ChartPoint::plane(lx * i as f64 / n as f64, ly * j as f64 / n as f64));
            bx[j * n + i] = t[0];
            by[j * n + i] = t[1];
        }
    }
    let mut coef = vec![0.0; n * n];
    let mut c = (0.0, 0.0);
    let theta = |coef: &[f64], c: (f64, f64)| {
        let (gx, gy) = st.grad(coef);
        let tx: Vec<f64> = bx.iter().zip(&gx).map(|(b, g)| b + g + c.0).collect();
        let ty: Vec<f64> = by.iter().zip(&gy).map(|(b, g)| b + g + c.1).collect();
        (tx, ty)
    };
    let (tx, ty) = theta(&coef, c);
    let q0 = tx.iter().zip(&ty).fold(0.0f64, |m, (a, b)| m.max(a * a + b * b));
    let mut best = (sup_norm(&tx, &ty), coef.clone(), c);
    let mut iterations = 0;
    if q0 > 0.0 {
        let m = (n * n) as f64;
        'stages: for &beta in &params.betas {
            let mut t: f64 = 1.0;
            for _ in 0..params.stage_iters {
                if iterations >= params.budget {
                    break 'stages;
                }
                iterations += 1;
                let (tx, ty) = theta(&coef, c);
                let (j0, gx, gy) = lse(&tx, &ty, q0, beta);
                let gc = st.grad_adjoint(&gx, &gy);
                let g1: f64 = gx.iter().sum();
                let g2: f64 = gy.iter().sum();
                let dc: Vec<f64> = st.precondition(&gc).iter().map(|v| -v).collect();
                let d1 = -g1 / m;
                let d2 = -g2 / m;
                let slope: f64 = gc.iter().zip(&dc).map(|(a, b)| a * b).sum::<f64>() + g1 * d1 + g2 * d2;
                if slope >= 0.0 {
                    break;
                }
                t = (2.0 * t).min(1.0);
                let mut accepted = None;
                while t > 1e-12 {
                    let trial: Vec<f64> = coef.iter().zip(&dc).map(|(a, b)| a + t * b).collect();
                    let tc = (c.0 + t * d1, c.1 + t * d2);
                    let (ux, uy) = theta(&trial, tc);
                    let (jt, _, _) = lse(&ux, &uy, q0, beta);
                    if jt <= j0 + 1e-4 * t * slope {
                        coef = trial;
                        c = tc;
                        let s = sup_norm(&ux, &uy);
                        if s < best.0 {
                            best = (s, coef.clone(), c);
                        }
                        accepted = Some(jt);
                        break;
                    }
                    t *= 0.5;
                }
                match accepted {
                    Some(jt) if j0 - jt > 1e-13 => {}
                    _ => break,
                }
            }
        }
    }
    let (sup, coef, c) = best;
    let base = local_primitive(system, PrimitiveRegion::Torus { c1: c.0, c2: c.1 })?;
    let potential = Arc::new(PeriodicSpline2::from_coefficients(n, n, lx, ly, coef)?);
    let witness = LocalPrimitive::Shifted { base: Box::new(base), potential };
    Ok(C0Bound { sup_norm: sup, value: 0.5 * sup * sup, witness, harmonic: c, iterations, grid: n })
}

/// `max |θ|` of a primitive over an `n × n` torus grid.
pub fn grid_sup(theta: &LocalPrimitive, system: &MagneticSystem, n: usize) -> Result<f64> {
    let (lx, ly) = system.surface.periods().ok_or_else(|| Error::Unsupported("grid sup on a torus only".into()))?;
    let mut m = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            let p = ChartPoint::plane(lx * i as f64 / n as f64, ly * j as f64 / n as f64);
            let t = theta.eval(system, &p);
            m = m.max(system.surface.scale_at(&p)?.recip() * t[0].hypot(t[1]));
        }
    }
    Ok(m)
}

/// Witness primitive on its grid as `x,y,theta_x,theta_y`.
pub fn write_witness_csv(bound: &C0Bound, system: &MagneticSystem, path: &Path) -> Result<()> {
    let (lx, ly) = system.surface.periods().ok_or_else(|| Error::Unsupported("witness grids live on tori".into()))?;
    let n = bound.grid;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "x,y,theta_x,theta_y")?;
    for j in 0..n {
        for i in 0..n {
            let p = ChartPoint::plane(lx * i as f64 / n as f64, ly * j as f64 / n as f64);
            let t = bound.witness.eval(system, &p);
            writeln!(out, "{:.12e},{:.12e},{:.12e},{:.12e}", p.u, p.v, t[0], t[1])?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CriticalReport {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub c_h: Option<f64>,
    /// `½ sup|θ|²` of the best witness (energy units).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub c0_upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub c0_sup_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub homogeneous_c: Option<f64>,
    /// Harmonic part `(c₁, c₂)` of the witness primitive.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness_harmonic: Option<(f64, f64)>,
}

/// Everything computable in closed form or cheaply for `system`; `c₀` and
/// `τ` are filled in by the caller when requested.
pub fn closed_form_report(system: &MagneticSystem) -> CriticalReport {
    let c_h = c_h_value(system).ok();
    let homogeneous_c = match (&system.surface, system.field.constant_value()) {
        (SurfaceModel::HyperbolicPlane { .. }, Some(c)) if (c - 1.0).abs() < 1e-15 => {
            homogeneous_mane_value(HomogeneousKind::Hyperbolic).ok()
        }
        _ => None,
    };
    CriticalReport { c_h, homogeneous_c, ..CriticalReport::default() }
}
