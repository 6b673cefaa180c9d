//! Discrete free-period action
//!
//! `S(x, T) = N/(2T)·Σ λ²(mᵢ)|Δᵢ|² + kT − Φ(x)`, with `Δᵢ = x_{i+1} − xᵢ`,
//! midpoints `mᵢ`, and `Φ` the flux through the loop.

use std::io::Write;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::{ChartPoint, SurfaceModel, Vec2};
use crate::magnetic::{local_primitive, LocalPrimitive, MagneticSystem, PrimitiveRegion};
use crate::numerics::gauss_legendre_unit;

/// Closed polygon with free period. On a torus the vertices are a lift and
/// the loop closes up to the lattice translation `shift`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteLoop {
    pub vertices: Vec<ChartPoint>,
    pub period: f64,
    pub winding: (i64, i64),
    pub shift: Vec2,
}

impl DiscreteLoop {
    pub fn new(vertices: Vec<ChartPoint>, period: f64) -> Result<Self> {
        Self::validate(&vertices, period)?;
        Ok(Self { vertices, period, winding: (0, 0), shift: [0.0, 0.0] })
    }

    /// Loop on a torus lift closing after the lattice translation `(m, n)`.
    pub fn with_winding(vertices: Vec<ChartPoint>, period: f64, surface: &SurfaceModel, m: i64, n: i64) -> Result<Self> {
        Self::validate(&vertices, period)?;
        let (lx, ly) = surface.periods().ok_or_else(|| Error::InvalidParameter("winding loops live on tori".into()))?;
        Ok(Self { vertices, period, winding: (m, n), shift: [m as f64 * lx, n as f64 * ly] })
    }

    fn validate(vertices: &[ChartPoint], period: f64) -> Result<()> {
        if vertices.len() < 3 {
            return Err(Error::InvalidParameter("a loop needs at least 3 vertices".into()));
        }
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::InvalidParameter(format!("period must be positive, got {period}")));
        }
        let chart = vertices[0].chart;
        if vertices.iter().any(|p| p.chart != chart) {
            return Err(Error::InvalidParameter("loop vertices must share one chart".into()));
        }
        Ok(())
    }

    /// Uniformly sampled Euclidean chart circle, traversed counter-clockwise.
    pub fn chart_circle(chart: u8, centre: Vec2, radius: f64, n: usize, period: f64) -> Result<Self> {
        let vertices = (0..n)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                ChartPoint::new(chart, centre[0] + radius * a.cos(), centre[1] + radius * a.sin())
            })
            .collect();
        Self::new(vertices, period)
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn is_contractible(&self) -> bool {
        self.winding == (0, 0)
    }

    pub fn chart(&self) -> u8 {
        self.vertices[0].chart
    }

    /// `(xᵢ, Δᵢ)` for edge `i`.
    #[inline]
    pub fn edge(&self, i: usize) -> (ChartPoint, Vec2) {
        let n = self.len();
        let a = self.vertices[i];
        let b = self.vertices[(i + 1) % n];
        let (sx, sy) = if i + 1 == n { (self.shift[0], self.shift[1]) } else { (0.0, 0.0) };
        (a, [b.u + sx - a.u, b.v + sy - a.v])
    }

    /// Packed parameters `(u₀, v₀, u₁, v₁, …, T)`.
    pub fn to_params(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self.vertices.iter().flat_map(|q| [q.u, q.v]).collect();
        p.push(self.period);
        p
    }

    pub fn from_params(&self, p: &[f64]) -> Self {
        let chart = self.chart();
        let n = self.len();
        Self {
            vertices: (0..n).map(|i| ChartPoint::new(chart, p[2 * i], p[2 * i + 1])).collect(),
            period: p[2 * n],
            winding: self.winding,
            shift: self.shift,
        }
    }

    /// Metric length `Σ λ(mᵢ)|Δᵢ|`.
    pub fn length(&self, surface: &SurfaceModel) -> Result<f64> {
        let mut l = 0.0;
        for i in 0..self.len() {
            let (a, d) = self.edge(i);
            l += surface.scale_at(&a.offset([0.5 * d[0], 0.5 * d[1]]))? * d[0].hypot(d[1]);
        }
        Ok(l)
    }

    /// `e = ∫₀¹|ẋ|² = N·Σ λ²(mᵢ)|Δᵢ|²`.
    pub fn l2_energy(&self, surface: &SurfaceModel) -> Result<f64> {
        let mut e = 0.0;
        for i in 0..self.len() {
            let (a, d) = self.edge(i);
            let l = surface.scale_at(&a.offset([0.5 * d[0], 0.5 * d[1]]))?;
            e += l * l * (d[0] * d[0] + d[1] * d[1]);
        }
        Ok(e * self.len() as f64)
    }

    /// Redistributes the vertices along the polygon so consecutive ones are
    /// equally spaced in metric length; vertex 0 stays put. Chart circles
    /// are only constant-speed where `λ` is constant along them, and a loop
    /// far from constant speed is far from critical.
    pub fn resampled_by_arclength(&self, surface: &SurfaceModel) -> Result<Self> {
        let n = self.len();
        let mut cum = Vec::with_capacity(n + 1);
        cum.push(0.0);
        for i in 0..n {
            let (a, d) = self.edge(i);
            let l = surface.scale_at(&a.offset([0.5 * d[0], 0.5 * d[1]]))? * d[0].hypot(d[1]);
            cum.push(cum[i] + l);
        }
        let total = cum[n];
        if !(total > 0.0) {
            return Err(Error::Degenerate("loop has zero length".into()));
        }
        let mut edge = 0;
        let vertices = (0..n)
            .map(|i| {
                let target = total * i as f64 / n as f64;
                while edge + 1 < n && cum[edge + 1] <= target {
                    edge += 1;
                }
                let (a, d) = self.edge(edge);
                let span = cum[edge + 1] - cum[edge];
                let t = if span > 0.0 { (target - cum[edge]) / span } else { 0.0 };
                a.offset([t * d[0], t * d[1]])
            })
            .collect();
        Ok(Self { vertices, ..self.clone() })
    }

    /// Mean kinetic energy of the loop run with period `T`: `e/(2T²)`.
    pub fn mean_energy(&self, surface: &SurfaceModel) -> Result<f64> {
        Ok(self.l2_energy(surface)? / (2.0 * self.period * self.period))
    }
}

/// How the magnetic term of the action is evaluated.
#[derive(Debug, Clone)]
pub enum FluxModel {
    /// Signed flux of the fan from the barycentre (contractible loops).
    Fan,
    /// `∮θ` for a global primitive (exact torus fields, any winding).
    Primitive(LocalPrimitive),
}

impl FluxModel {
    /// The model appropriate for `lp`: a fan for contractible loops, a
    /// global primitive with harmonic part `(c₁, c₂)` otherwise.
    pub fn for_loop(system: &MagneticSystem, lp: &DiscreteLoop, harmonic: (f64, f64)) -> Result<Self> {
        if lp.is_contractible() {
            return Ok(FluxModel::Fan);
        }
        match local_primitive(system, PrimitiveRegion::Torus { c1: harmonic.0, c2: harmonic.1 }) {
            Ok(p) => Ok(FluxModel::Primitive(p)),
            Err(Error::NoGlobalPrimitive { flux }) => Err(Error::UndefinedAction(format!(
                "loop with winding {:?} in a field of flux {flux}: the magnetic term has no primitive",
                lp.winding
            ))),
            Err(e) => Err(e),
        }
    }
}

fn edge_nodes() -> &'static [(f64, f64)] {
    static N: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    N.get_or_init(|| gauss_legendre_unit(6))
}

fn fan_radial_nodes() -> &'static [(f64, f64)] {
    static N: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    N.get_or_init(|| gauss_legendre_unit(12))
}

/// Barycentre of the vertices (of the lift).
fn barycentre(lp: &DiscreteLoop) -> ChartPoint {
    let n = lp.len() as f64;
    let (su, sv) = lp.vertices.iter().fold((0.0, 0.0), |(a, b), p| (a + p.u, b + p.v));
    ChartPoint::new(lp.chart(), su / n, sv / n)
}

/// Magnetic term `Φ` of the loop.
pub fn loop_flux(lp: &DiscreteLoop, system: &MagneticSystem, model: &FluxModel, exec: Execution) -> Result<f64> {
    let n = lp.len();
    match model {
        FluxModel::Fan => {
            if !lp.is_contractible() {
                return Err(Error::UndefinedAction("fan flux needs a contractible loop".into()));
            }
            let b = barycentre(lp);
            let radial = fan_radial_nodes();
            let across = edge_nodes();
            let v = exec.sum(n, |i| {
                let (a, d) = lp.edge(i);
                let r = [a.u - b.u, a.v - b.v];
                let jac = r[0] * d[1] - r[1] * d[0];
                let mut acc = 0.0;
                for &(u, wu) in radial {
                    for &(w, ww) in across {
                        let p = b.offset([u * (r[0] + w * d[0]), u * (r[1] + w * d[1])]);
                        acc += wu * ww * u * system.sigma_density(&p).unwrap_or(f64::NAN);
                    }
                }
                jac * acc
            });
            finite(v)
        }
        FluxModel::Primitive(theta) => {
            let nodes = edge_nodes();
            let v = exec.sum(n, |i| {
                let (a, d) = lp.edge(i);
                let b = a.offset(d);
                theta.segment_integral(system, &a, &b, nodes)
            });
            finite(v)
        }
    }
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain("loop leaves the chart domain".into()))
    }
}

/// `S_k(loop)`.
pub fn discrete_action(lp: &DiscreteLoop, system: &MagneticSystem, k: f64, model: &FluxModel) -> Result<f64> {
    discrete_action_with(lp, system, k, model, Execution::default())
}

pub fn discrete_action_with(lp: &DiscreteLoop, system: &MagneticSystem, k: f64, model: &FluxModel, exec: Execution) -> Result<f64> {
    for p in &lp.vertices {
        system.surface.check_domain(p)?;
    }
    let n = lp.len();
    let kin = exec.sum(n, |i| {
        let (a, d) = lp.edge(i);
        let l = system.surface.scale_at(&a.offset([0.5 * d[0], 0.5 * d[1]])).unwrap_or(f64::NAN);
        l * l * (d[0] * d[0] + d[1] * d[1])
    });
    let kin = finite(kin)? * n as f64 / (2.0 * lp.period);
    Ok(kin + k * lp.period - loop_flux(lp, system, model, exec)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionGradient {
    pub vertices: Vec<Vec2>,
    pub period: f64,
}

impl ActionGradient {
    pub fn to_params(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self.vertices.iter().flat_map(|g| *g).collect();
        p.push(self.period);
        p
    }
}

/// Exact gradient of [`discrete_action`].
///
/// The magnetic part uses the transport formula for the flux of a moving
/// polygon: vertex `j` drags the points of its two edges with weights
/// `1 − t` and `t`, and the swept flux is `f̃·(δp · ν)` with `ν = (Δ_y, −Δ_x)`.
pub fn discrete_action_gradient(lp: &DiscreteLoop, system: &MagneticSystem, k: f64, model: &FluxModel) -> Result<ActionGradient> {
    discrete_action_gradient_with(lp, system, k, model, Execution::default())
}

pub fn discrete_action_gradient_with(
    lp: &DiscreteLoop,
    system: &MagneticSystem,
    k: f64,
    model: &FluxModel,
    exec: Execution,
) -> Result<ActionGradient> {
    for p in &lp.vertices {
        system.surface.check_domain(p)?;
    }
    if matches!(model, FluxModel::Fan) && !lp.is_contractible() {
        return Err(Error::UndefinedAction("fan flux needs a contractible loop".into()));
    }
    let n = lp.len();
    let t = lp.period;
    let c = n as f64 / (2.0 * t);
    let nodes = edge_nodes();
    // per edge: contribution to its start vertex, to its end vertex, and |Δ|²λ²
    let per_edge: Vec<(Vec2, Vec2, f64)> = exec.map(n, |i| {
        let (a, d) = lp.edge(i);
        let m = a.offset([0.5 * d[0], 0.5 * d[1]]);
        let phi = system.surface.conformal_at(&m).unwrap_or_default();
        let l2 = (2.0 * phi.value).exp();
        let d2 = d[0] * d[0] + d[1] * d[1];
        // ∇λ² = 2λ²∇φ, half of it reaches each endpoint through the midpoint
        let gx = l2 * phi.dx * d2;
        let gy = l2 * phi.dy * d2;
        let mut start = [c * (gx - 2.0 * l2 * d[0]), c * (gy - 2.0 * l2 * d[1])];
        let mut end = [c * (gx + 2.0 * l2 * d[0]), c * (gy + 2.0 * l2 * d[1])];
        let (mut f0, mut f1) = (0.0, 0.0);
        for &(s, w) in nodes {
            let ft = system.sigma_density(&a.offset([s * d[0], s * d[1]])).unwrap_or(f64::NAN);
            f0 += w * (1.0 - s) * ft;
            f1 += w * s * ft;
        }
        let nu = [d[1], -d[0]];
        start[0] -= f0 * nu[0];
        start[1] -= f0 * nu[1];
        end[0] -= f1 * nu[0];
        end[1] -= f1 * nu[1];
        (start, end, l2 * d2)
    });
    let mut grad = vec![[0.0; 2]; n];
    let mut kin = 0.0;
    for (i, (start, end, e)) in per_edge.iter().enumerate() {
        let j = (i + 1) % n;
        grad[i][0] += start[0];
        grad[i][1] += start[1];
        grad[j][0] += end[0];
        grad[j][1] += end[1];
        kin += e;
    }
    if grad.iter().flatten().any(|g| !g.is_finite()) {
        return Err(Error::Domain("loop leaves the chart domain".into()));
    }
    let mean_energy = kin * n as f64 / (2.0 * t * t);
    Ok(ActionGradient { vertices: grad, period: k - mean_energy })
}

/// Loop vertices as `vertex,chart,u,v`, with the closing vertex (shifted by
/// the lattice translation) repeated at the end.
pub fn write_loop_csv(lp: &DiscreteLoop, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "vertex,chart,u,v")?;
    let first = lp.vertices[0];
    let closing = ChartPoint::new(first.chart, first.u + lp.shift[0], first.v + lp.shift[1]);
    for (i, p) in lp.vertices.iter().chain(std::iter::once(&closing)).enumerate() {
        writeln!(out, "{i},{},{:.15e},{:.15e}", p.chart, p.u, p.v)?;
    }
    out.flush()?;
    Ok(())
}
