//! Taimanov functional `𝒯_k(Π) = √(2k)·ℓ(∂Π) − ∫_Π σ` on regions bounded by
//! polygons, its curvature-driven gradient flow and the threshold `τ(g, σ)`.
//!
//! A region is a sheet (nothing, `M` or `M̄`) plus discs: a counter-clockwise
//! curve adds the disc it bounds, a clockwise one the disc with the reversed
//! orientation. Curves are stored in one chart and are contractible.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::{rotate90, ChartPoint, SurfaceModel, Vec2};
use crate::magnetic::{s_of_energy, MagneticSystem};
use crate::numerics::PeriodicCubic;
use crate::orbitfind::action::{loop_flux, DiscreteLoop, FluxModel};
use crate::orbitfind::descent::loop_to_orbit;
use crate::orbitfind::shooting::{Orbit, ShootingParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionCurve {
    pub vertices: Vec<ChartPoint>,
}

impl RegionCurve {
    pub fn new(vertices: Vec<ChartPoint>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidRegion("a boundary curve needs at least 3 vertices".into()));
        }
        let chart = vertices[0].chart;
        if vertices.iter().any(|p| p.chart != chart) {
            return Err(Error::InvalidRegion("boundary vertices must share one chart".into()));
        }
        Ok(Self { vertices })
    }

    /// Euclidean chart circle with `n` vertices.
    pub fn circle(chart: u8, centre: Vec2, radius: f64, n: usize, clockwise: bool) -> Result<Self> {
        let sign = if clockwise { -1.0 } else { 1.0 };
        Self::new(
            (0..n)
                .map(|i| {
                    let a = sign * 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                    ChartPoint::new(chart, centre[0] + radius * a.cos(), centre[1] + radius * a.sin())
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn chart(&self) -> u8 {
        self.vertices[0].chart
    }

    fn at(&self, i: isize) -> ChartPoint {
        self.vertices[i.rem_euclid(self.len() as isize) as usize]
    }

    /// Signed Euclidean chart area (positive for counter-clockwise curves).
    pub fn signed_area(&self) -> f64 {
        let n = self.len();
        0.5 * (0..n)
            .map(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                a.u * b.v - b.u * a.v
            })
            .sum::<f64>()
    }

    pub fn is_counter_clockwise(&self) -> bool {
        self.signed_area() > 0.0
    }

    pub fn reversed(&self) -> Self {
        let mut v = self.vertices.clone();
        v.reverse();
        Self { vertices: v }
    }

    pub(crate) fn edge_lengths(&self, surface: &SurfaceModel) -> Result<Vec<f64>> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                let d = [b.u - a.u, b.v - a.v];
                Ok(surface.scale_at(&a.offset([0.5 * d[0], 0.5 * d[1]]))? * d[0].hypot(d[1]))
            })
            .collect()
    }

    /// Metric length with midpoint scale.
    pub fn length(&self, surface: &SurfaceModel) -> Result<f64> {
        Ok(self.edge_lengths(surface)?.iter().sum())
    }

    /// Geodesic curvature at each vertex, signed against the left normal:
    /// Menger curvature of the chart polygon corrected by the conformal factor,
    /// `κ = e^{−φ}(κ_E − ∂_ν φ)`.
    pub fn curvatures(&self, surface: &SurfaceModel) -> Result<Vec<f64>> {
        (0..self.len() as isize).map(|i| vertex_curvature(surface, self.at(i - 1), self.at(i), self.at(i + 1))).collect()
    }

    /// Unit Euclidean left normal at each vertex.
    fn normals(&self) -> Vec<Vec2> {
        (0..self.len() as isize)
            .map(|i| {
                let a = self.at(i - 1);
                let b = self.at(i + 1);
                let t = [b.u - a.u, b.v - a.v];
                let l = t[0].hypot(t[1]);
                rotate90([t[0] / l, t[1] / l])
            })
            .collect()
    }

    /// Whether no two non-adjacent edges meet.
    pub fn is_simple(&self) -> bool {
        let n = self.len();
        for i in 0..n {
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                if segments_cross(self.at(i as isize), self.at(i as isize + 1), self.at(j as isize), self.at(j as isize + 1)) {
                    return false;
                }
            }
        }
        true
    }

    fn crosses(&self, other: &RegionCurve) -> bool {
        if self.chart() != other.chart() {
            return false;
        }
        for i in 0..self.len() as isize {
            for j in 0..other.len() as isize {
                if segments_cross(self.at(i), self.at(i + 1), other.at(j), other.at(j + 1)) {
                    return true;
                }
            }
        }
        false
    }

    /// Resample to `n` vertices uniformly spaced in metric arclength along the
    /// periodic cubic through the current vertices.
    pub fn resample(&self, surface: &SurfaceModel, n: usize) -> Result<Self> {
        let m = self.len();
        let mut t = Vec::with_capacity(m);
        let mut acc = 0.0;
        for i in 0..m {
            t.push(acc);
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % m];
            acc += (b.u - a.u).hypot(b.v - a.v);
        }
        let period = acc;
        let us: Vec<f64> = self.vertices.iter().map(|p| p.u).collect();
        let vs: Vec<f64> = self.vertices.iter().map(|p| p.v).collect();
        let su = PeriodicCubic::new(&t, &us, period)?;
        let sv = PeriodicCubic::new(&t, &vs, period)?;
        let chart = self.chart();
        let fine = 8 * n.max(m);
        let pts: Vec<ChartPoint> =
            (0..=fine).map(|i| i as f64 * period / fine as f64).map(|s| ChartPoint::new(chart, su.eval(s), sv.eval(s))).collect();
        let mut cum = vec![0.0; fine + 1];
        for i in 0..fine {
            let (a, b) = (pts[i], pts[i + 1]);
            let d = [b.u - a.u, b.v - a.v];
            cum[i + 1] = cum[i] + surface.scale_at(&a.offset([0.5 * d[0], 0.5 * d[1]]))? * d[0].hypot(d[1]);
        }
        let total = cum[fine];
        let mut out = Vec::with_capacity(n);
        let mut j = 0;
        for i in 0..n {
            let target = total * i as f64 / n as f64;
            while j + 1 < fine && cum[j + 1] < target {
                j += 1;
            }
            let w = if cum[j + 1] > cum[j] { (target - cum[j]) / (cum[j + 1] - cum[j]) } else { 0.0 };
            let s = period * (j as f64 + w) / fine as f64;
            out.push(ChartPoint::new(chart, su.eval(s), sv.eval(s)));
        }
        Self::new(out)
    }

    fn as_loop(&self) -> Result<DiscreteLoop> {
        DiscreteLoop::new(self.vertices.clone(), 1.0)
    }
}

fn vertex_curvature(surface: &SurfaceModel, a: ChartPoint, b: ChartPoint, c: ChartPoint) -> Result<f64> {
    let e1 = [b.u - a.u, b.v - a.v];
    let e2 = [c.u - b.u, c.v - b.v];
    let chord = [c.u - a.u, c.v - a.v];
    let (l1, l2, l3) = (e1[0].hypot(e1[1]), e2[0].hypot(e2[1]), chord[0].hypot(chord[1]));
    if l1 == 0.0 || l2 == 0.0 || l3 == 0.0 {
        return Err(Error::Degenerate("coincident boundary vertices".into()));
    }
    let kappa_e = 2.0 * (e1[0] * e2[1] - e1[1] * e2[0]) / (l1 * l2 * l3);
    let nu = rotate90([chord[0] / l3, chord[1] / l3]);
    let phi = surface.conformal_at(&b)?;
    Ok((kappa_e - phi.dx * nu[0] - phi.dy * nu[1]) / phi.value.exp())
}

fn segments_cross(p1: ChartPoint, p2: ChartPoint, q1: ChartPoint, q2: ChartPoint) -> bool {
    let orient = |a: ChartPoint, b: ChartPoint, c: ChartPoint| (b.u - a.u) * (c.v - a.v) - (b.v - a.v) * (c.u - a.u);
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    (d1 > 0.0) != (d2 > 0.0) && (d3 > 0.0) != (d4 > 0.0) && d1 != 0.0 && d2 != 0.0 && d3 != 0.0 && d4 != 0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sheet {
    #[default]
    Empty,
    /// `M` with its own orientation.
    Whole,
    /// `M̄`.
    WholeReversed,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Region {
    pub sheet: Sheet,
    pub curves: Vec<RegionCurve>,
}

impl Region {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn discs(curves: Vec<RegionCurve>) -> Self {
        Self { sheet: Sheet::Empty, curves }
    }

    /// `M ∖ Π̊` with the orientation opposite to `Π`'s; the boundary curves
    /// are shared, only the sheet changes.
    pub fn complement(&self) -> Self {
        let sheet = match self.sheet {
            Sheet::Empty if self.curves.iter().all(|c| c.is_counter_clockwise()) => Sheet::WholeReversed,
            Sheet::Empty => Sheet::Whole,
            Sheet::Whole | Sheet::WholeReversed => Sheet::Empty,
        };
        Self { sheet, curves: self.curves.clone() }
    }

    /// Checks that every curve is simple and that curves are disjoint.
    pub fn validate(&self) -> Result<()> {
        for (i, c) in self.curves.iter().enumerate() {
            if !c.is_simple() {
                return Err(Error::InvalidRegion(format!("boundary curve {i} intersects itself")));
            }
            for (j, d) in self.curves.iter().enumerate().skip(i + 1) {
                if c.crosses(d) {
                    return Err(Error::InvalidRegion(format!("boundary curves {i} and {j} intersect")));
                }
            }
        }
        Ok(())
    }

    pub fn boundary_length(&self, surface: &SurfaceModel) -> Result<f64> {
        self.curves.iter().map(|c| c.length(surface)).sum()
    }

    /// `∫_Π σ`, signed by orientation.
    pub fn enclosed_flux(&self, system: &MagneticSystem, exec: Execution) -> Result<f64> {
        let sheet = match self.sheet {
            Sheet::Empty => 0.0,
            Sheet::Whole => system.flux()?,
            Sheet::WholeReversed => -system.flux()?,
        };
        let mut discs = 0.0;
        for c in &self.curves {
            discs += loop_flux(&c.as_loop()?, system, &FluxModel::Fan, exec)?;
        }
        Ok(sheet + discs)
    }
}

/// `𝒯_k(Π)`.
pub fn taimanov_value(region: &Region, system: &MagneticSystem, k: f64) -> Result<f64> {
    taimanov_value_with(region, system, k, Execution::default())
}

pub fn taimanov_value_with(region: &Region, system: &MagneticSystem, k: f64, exec: Execution) -> Result<f64> {
    if !(k >= 0.0) {
        return Err(Error::Domain(format!("energy must be non-negative, got {k}")));
    }
    region.validate()?;
    Ok((2.0 * k).sqrt() * region.boundary_length(&system.surface)? - region.enclosed_flux(system, exec)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaimanovParams {
    /// Stop once `max |κ − s·f| < tol`.
    pub tol: f64,
    /// Curves shorter than this vanish.
    pub l_min: f64,
    pub max_iter: usize,
    /// Explicit step `cfl·h²/√(2k)`.
    pub cfl: f64,
    /// Target metric vertex spacing; `None` keeps the seed's mean spacing.
    pub spacing: Option<f64>,
    /// Newton polishing of the stationarity equation once the residual is
    /// below this (`None` disables it and keeps the flow a pure descent).
    pub newton_threshold: Option<f64>,
    /// Record a snapshot of the curves every this many iterations.
    pub snapshot_every: Option<usize>,
    pub exec: Execution,
}

impl Default for TaimanovParams {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            l_min: 1e-3,
            max_iter: 200_000,
            cfl: 0.25,
            spacing: None,
            newton_threshold: Some(0.5),
            snapshot_every: None,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaimanovOutcome {
    Stationary,
    /// Every boundary curve shrank away; the region is its sheet.
    Vanished,
    /// The evolution was halted at a self-intersection (no surgery).
    SelfIntersection,
    MaxIterations,
    /// Pure-descent runs stop as soon as the value drops below the requested bound.
    BelowBound,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    pub iteration: usize,
    pub curves: Vec<RegionCurve>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaimanovResult {
    pub value: f64,
    pub region: Region,
    /// `max |κ − s·f|` over the surviving vertices (0 when none survive).
    pub residual: f64,
    pub outcome: TaimanovOutcome,
    pub iterations: usize,
    pub newton_steps: usize,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub history: Vec<Snapshot>,
}

/// Stationarity residual `κᵢ − s·f(qᵢ)` at every vertex.
pub fn stationarity_residuals(curve: &RegionCurve, system: &MagneticSystem, s: f64) -> Result<Vec<f64>> {
    let kappa = curve.curvatures(&system.surface)?;
    curve.vertices.iter().zip(kappa).map(|(q, k)| Ok(k - s * system.f_at(q)?)).collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Gradient flow of `𝒯_k` from `seed`: each vertex moves along the left
/// normal by `step·(√(2k)·κ − f)`, which for counter-clockwise curves is
/// `−(√(2k)κ − f)·n` with `n` the outward normal.
pub fn evolve_minimize(seed: &Region, system: &MagneticSystem, k: f64, params: &TaimanovParams) -> Result<TaimanovResult> {
    evolve(seed, system, k, params, None)
}

/// The periodic orbit of energy `k` near a stationary boundary curve, by
/// shooting from the curve traversed at constant speed `√(2k)`.
pub fn refine_to_orbit(curve: &RegionCurve, system: &MagneticSystem, k: f64, params: &ShootingParams) -> Result<Orbit> {
    let mut lp = DiscreteLoop::new(curve.vertices.clone(), 1.0)?.resampled_by_arclength(&system.surface)?;
    lp.period = lp.length(&system.surface)? / (2.0 * k).sqrt();
    loop_to_orbit(system, k, &lp, params)
}

fn evolve(seed: &Region, system: &MagneticSystem, k: f64, params: &TaimanovParams, stop_below: Option<f64>) -> Result<TaimanovResult> {
    let s = s_of_energy(k)?;
    let c = (2.0 * k).sqrt();
    seed.validate()?;
    let surface = &system.surface;
    let mut curves = seed.curves.clone();
    let mut spacing = Vec::with_capacity(curves.len());
    for cv in &curves {
        spacing.push(params.spacing.unwrap_or(cv.length(surface)? / cv.len() as f64));
    }
    let sup_f = system.sup_abs_f().max(1e-12);
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut newton_steps = 0;
    let mut outcome = TaimanovOutcome::MaxIterations;
    loop {
        // drop curves that have shrunk away
        let mut keep = Vec::with_capacity(curves.len());
        for (cv, h) in curves.drain(..).zip(spacing.drain(..)) {
            if cv.length(surface)? >= params.l_min && cv.len() >= 3 {
                keep.push((cv, h));
            }
        }
        (curves, spacing) = keep.into_iter().unzip();
        if curves.is_empty() {
            outcome = TaimanovOutcome::Vanished;
            break;
        }
        if let Some(every) = params.snapshot_every {
            if iterations % every.max(1) == 0 {
                history.push(Snapshot { iteration: iterations, curves: curves.clone() });
            }
        }
        let residuals: Vec<Vec<f64>> = curves.iter().map(|cv| stationarity_residuals(cv, system, s)).collect::<Result<_>>()?;
        let worst = residuals.iter().map(|r| max_abs(r)).fold(0.0, f64::max);
        if worst < params.tol {
            outcome = TaimanovOutcome::Stationary;
            break;
        }
        if iterations >= params.max_iter {
            break;
        }
        if let Some(bound) = stop_below {
            if iterations % 10 == 0 {
                let region = Region { sheet: seed.sheet, curves: curves.clone() };
                if taimanov_value_with(&region, system, k, params.exec)? < bound {
                    outcome = TaimanovOutcome::BelowBound;
                    break;
                }
            }
        }
        iterations += 1;
        if params.newton_threshold.is_some_and(|t| worst < t) {
            if let Some(polished) = newton_polish(&curves, system, s, worst)? {
                curves = polished;
                newton_steps += 1;
                continue;
            }
        }
        for (cv, res) in curves.iter_mut().zip(&residuals) {
            let lengths = cv.edge_lengths(surface)?;
            let hmin = lengths.iter().cloned().fold(f64::INFINITY, f64::min);
            let step = (params.cfl * hmin * hmin / c.max(1e-300)).min(0.25 * hmin / sup_f);
            let normals = cv.normals();
            let mut moved = Vec::with_capacity(cv.len());
            for ((q, nu), r) in cv.vertices.iter().zip(&normals).zip(res) {
                // √(2k)κ − f = √(2k)(κ − s f)
                let w = step * c * r / surface.scale_at(q)?;
                moved.push(q.offset([w * nu[0], w * nu[1]]));
            }
            cv.vertices = moved;
        }
        for (cv, h) in curves.iter_mut().zip(&spacing) {
            let lengths = cv.edge_lengths(surface)?;
            let (lo, hi) = lengths.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &l| (a.min(l), b.max(l)));
            if lo < 0.5 * h || hi > 2.0 * h {
                let total: f64 = lengths.iter().sum();
                let n = ((total / h).round() as usize).max(8);
                *cv = cv.resample(surface, n)?;
            }
        }
        if iterations % 20 == 0 && (Region { sheet: seed.sheet, curves: curves.clone() }).validate().is_err() {
            outcome = TaimanovOutcome::SelfIntersection;
            break;
        }
    }
    let region = Region { sheet: seed.sheet, curves };
    if outcome != TaimanovOutcome::SelfIntersection && region.validate().is_err() {
        outcome = TaimanovOutcome::SelfIntersection;
    }
    let residual = region
        .curves
        .iter()
        .map(|cv| stationarity_residuals(cv, system, s).map(|r| max_abs(&r)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let value = (2.0 * k).sqrt() * region.boundary_length(surface)? - region.enclosed_flux(system, params.exec)?;
    Ok(TaimanovResult { value, region, residual, outcome, iterations, newton_steps, history })
}

/// One Newton step on `κ(x + w·ν/λ) = s·f` for the normal displacements `w`,
/// kept only if it lowers the worst residual. Near-singular directions
/// (translations in homogeneous fields) are cut by the SVD pseudo-inverse.
fn newton_polish(curves: &[RegionCurve], system: &MagneticSystem, s: f64, worst: f64) -> Result<Option<Vec<RegionCurve>>> {
    let surface = &system.surface;
    let mut out = Vec::with_capacity(curves.len());
    for cv in curves {
        let n = cv.len();
        let normals = cv.normals();
        let scales: Vec<f64> = cv.vertices.iter().map(|q| surface.scale_at(q)).collect::<Result<_>>()?;
        let displaced = |w: &[f64]| -> RegionCurve {
            RegionCurve {
                vertices: (0..n)
                    .map(|i| cv.vertices[i].offset([w[i] * normals[i][0] / scales[i], w[i] * normals[i][1] / scales[i]]))
                    .collect(),
            }
        };
        let base = stationarity_residuals(cv, system, s)?;
        let lengths = cv.edge_lengths(surface)?;
        let eps = 1e-7 * lengths.iter().sum::<f64>() / n as f64;
        let mut jac = DMatrix::<f64>::zeros(n, n);
        let mut w = vec![0.0; n];
        for j in 0..n {
            w[j] = eps;
            let moved = displaced(&w);
            w[j] = 0.0;
            for di in [-1isize, 0, 1] {
                let i = (j as isize + di).rem_euclid(n as isize) as usize;
                let ii = i as isize;
                let r =
                    vertex_curvature(surface, moved.at(ii - 1), moved.at(ii), moved.at(ii + 1))? - s * system.f_at(&moved.vertices[i])?;
                jac[(i, j)] = (r - base[i]) / eps;
            }
        }
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        let Ok(pinv) = svd.pseudo_inverse(1e-8 * smax) else { return Ok(None) };
        let rhs = nalgebra::DVector::from_vec(base.iter().map(|x| -x).collect());
        let dw = pinv * rhs;
        let candidate = displaced(dw.as_slice());
        if !candidate.is_simple() {
            return Ok(None);
        }
        out.push(candidate);
    }
    let mut new_worst = 0.0f64;
    for cv in &out {
        match stationarity_residuals(cv, system, s) {
            Ok(r) => new_worst = new_worst.max(max_abs(&r)),
            Err(_) => return Ok(None),
        }
    }
    Ok((new_worst < worst).then_some(out))
}

/// Seeds for `inf 𝒯_k` on `𝓔₋`: clockwise circles of the given chart radii
/// about the `count` lowest grid minima of `f` on a torus.
pub fn minimum_seeds(system: &MagneticSystem, radii: &[f64], vertices: usize, count: usize) -> Result<Vec<Region>> {
    let (lx, ly) = system.surface.periods().ok_or_else(|| Error::Unsupported("extremum seeds are generated on tori".into()))?;
    let n = 64;
    let val = |i: usize, j: usize| system.f_at(&ChartPoint::plane(lx * i as f64 / n as f64, ly * j as f64 / n as f64));
    let mut minima = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let v = val(i, j)?;
            let mut is_min = true;
            for (di, dj) in [(1, 0), (n - 1, 0), (0, 1), (0, n - 1)] {
                if val((i + di) % n, (j + dj) % n)? < v {
                    is_min = false;
                }
            }
            if is_min && v < 0.0 {
                minima.push((v, [lx * i as f64 / n as f64, ly * j as f64 / n as f64]));
            }
        }
    }
    minima.sort_by(|a, b| a.0.total_cmp(&b.0));
    minima.truncate(count);
    let mut seeds = Vec::new();
    for (_, centre) in minima {
        for &r in radii {
            seeds.push(Region::discs(vec![RegionCurve::circle(0, centre, r, vertices, true)?]));
        }
    }
    Ok(seeds)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauEstimate {
    pub tau: f64,
    /// Final bracket `[k_lo, k_hi]`.
    pub bracket: (f64, f64),
    pub bisections: usize,
}

pub const DEFAULT_BISECTIONS: usize = 20;

/// Upper bound for `inf 𝒯_k` over the seed family: the best value reached by
/// pure descent, stopping early once it is negative.
pub fn best_value(system: &MagneticSystem, seeds: &[Region], k: f64, params: &TaimanovParams) -> Result<f64> {
    let mut p = *params;
    p.newton_threshold = None;
    let results = params.exec.map(seeds.len(), |i| evolve(&seeds[i], system, k, &p, Some(0.0)));
    let mut best = 0.0f64; // the empty region
    for r in results {
        best = best.min(r?.value);
    }
    Ok(best)
}

/// `τ(g, σ) = inf{k | inf_{𝓔₋} 𝒯_k = 0}` by bisection on the sign of the
/// best descended value.
pub fn tau_estimate(system: &MagneticSystem, seeds: &[Region], k_range: (f64, f64), params: &TaimanovParams) -> Result<TauEstimate> {
    tau_estimate_with(system, seeds, k_range, params, DEFAULT_BISECTIONS)
}

pub fn tau_estimate_with(
    system: &MagneticSystem,
    seeds: &[Region],
    k_range: (f64, f64),
    params: &TaimanovParams,
    bisections: usize,
) -> Result<TauEstimate> {
    if field_is_nonnegative(system)? {
        return Ok(TauEstimate { tau: 0.0, bracket: (0.0, 0.0), bisections: 0 });
    }
    let (mut lo, mut hi) = k_range;
    if !(0.0 < lo && lo < hi) {
        return Err(Error::NoBracket(format!("need 0 < k_lo < k_hi, got [{lo}, {hi}]")));
    }
    if best_value(system, seeds, lo, params)? >= 0.0 {
        return Err(Error::NoBracket(format!("inf 𝒯 is already non-negative at k_lo = {lo}")));
    }
    if best_value(system, seeds, hi, params)? < 0.0 {
        return Err(Error::NoBracket(format!("inf 𝒯 is still negative at k_hi = {hi}")));
    }
    for _ in 0..bisections {
        let mid = 0.5 * (lo + hi);
        if best_value(system, seeds, mid, params)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(TauEstimate { tau: 0.5 * (lo + hi), bracket: (lo, hi), bisections })
}

/// `f ≥ 0` on a sampling of the surface (then `τ = 0`).
fn field_is_nonnegative(system: &MagneticSystem) -> Result<bool> {
    if let Some(c) = system.field.constant_value() {
        return Ok(c >= 0.0);
    }
    if let Some((lx, ly)) = system.surface.periods() {
        let n = 128;
        for j in 0..n {
            for i in 0..n {
                if system.f_at(&ChartPoint::plane(lx * i as f64 / n as f64, ly * j as f64 / n as f64))? < 0.0 {
                    return Ok(false);
                }
            }
        }
        return Ok(true);
    }
    let rule = system.surface.area_rule(64)?;
    for p in &rule.points {
        if system.f_at(p)? < 0.0 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Curve snapshots as `iter,vertex,u,v`; vertices are numbered across curves.
pub fn write_snapshots_csv(history: &[Snapshot], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "iter,vertex,u,v")?;
    for snap in history {
        let mut idx = 0;
        for cv in &snap.curves {
            for p in &cv.vertices {
                writeln!(out, "{},{},{:.12e},{:.12e}", snap.iteration, idx, p.u, p.v)?;
                idx += 1;
            }
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::magnetic::{Bump, MagneticField};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn bump_torus() -> MagneticSystem {
        let width = 1.0 / (4.0 * PI).sqrt();
        MagneticSystem::new(
            SurfaceModel::unit_torus(),
            MagneticField::TorusBumps { base: 1.0, bumps: vec![Bump { x0: 0.5, y0: 0.5, amplitude: -2.0, width }] },
        )
        .unwrap()
    }

    #[test]
    fn empty_and_whole_regions() {
        let sys = MagneticSystem::homogeneous(SurfaceModel::unit_torus(), 0.7);
        assert_eq!(taimanov_value(&Region::empty(), &sys, 0.3).unwrap(), 0.0);
        let whole_rev = Region { sheet: Sheet::WholeReversed, curves: vec![] };
        assert_relative_eq!(taimanov_value(&whole_rev, &sys, 0.3).unwrap(), 0.7, epsilon = 1e-12);
    }

    #[test]
    fn flat_circle_value() {
        let c = 1.3;
        let sys = MagneticSystem::homogeneous(SurfaceModel::unit_torus(), c);
        let (k, r): (f64, f64) = (0.2, 0.3);
        let n = 2048;
        let region = Region::discs(vec![RegionCurve::circle(0, [0.5, 0.5], r, n, false).unwrap()]);
        let exact = (2.0 * k).sqrt() * 2.0 * PI * r - c * PI * r * r;
        // inscribed polygon: length and area are low by O(1/n²)
        assert_relative_eq!(taimanov_value(&region, &sys, k).unwrap(), exact, epsilon = 1e-5);
    }

    #[test]
    fn complement_identity() {
        let sys = bump_torus();
        let k = 0.01;
        let region = Region::discs(vec![RegionCurve::circle(0, [0.4, 0.6], 0.2, 256, false).unwrap()]);
        let a = taimanov_value(&region, &sys, k).unwrap();
        let b = taimanov_value(&region.complement(), &sys, k).unwrap();
        assert_relative_eq!(b, a + sys.flux().unwrap(), epsilon = 1e-9);
    }

    #[test]
    fn self_intersection_is_rejected() {
        let sys = bump_torus();
        let bow = RegionCurve::new(vec![
            ChartPoint::plane(0.0, 0.0),
            ChartPoint::plane(1.0, 1.0),
            ChartPoint::plane(1.0, 0.0),
            ChartPoint::plane(0.0, 1.0),
        ])
        .unwrap();
        assert!(matches!(taimanov_value(&Region::discs(vec![bow]), &sys, 0.1), Err(Error::InvalidRegion(_))));
    }

    #[test]
    fn flat_torus_stationary_circle() {
        let sys = MagneticSystem::homogeneous(SurfaceModel::unit_torus(), 1.0);
        let k = 0.125; // s = 2
        let seed = Region::discs(vec![RegionCurve::circle(0, [0.5, 0.5], 0.45, 96, false).unwrap()]);
        let res = evolve_minimize(&seed, &sys, k, &TaimanovParams::default()).unwrap();
        assert_eq!(res.outcome, TaimanovOutcome::Stationary);
        let cv = &res.region.curves[0];
        let radius = cv.length(&sys.surface).unwrap() / (2.0 * PI);
        assert!((radius - 0.5).abs() < 1e-3, "radius {radius}");
    }

    #[test]
    fn nonpositive_field_vanishes() {
        let sys = MagneticSystem::homogeneous(SurfaceModel::unit_torus(), -1.0);
        let seed = Region::discs(vec![RegionCurve::circle(0, [0.5, 0.5], 0.2, 48, false).unwrap()]);
        let p = TaimanovParams { newton_threshold: None, ..TaimanovParams::default() };
        let res = evolve_minimize(&seed, &sys, 0.01, &p).unwrap();
        assert_eq!(res.outcome, TaimanovOutcome::Vanished);
        assert_eq!(res.value, 0.0);
    }

    #[test]
    fn negative_minimizer_around_the_dip() {
        let sys = bump_torus();
        let k = 0.0015;
        let seed = Region::discs(vec![RegionCurve::circle(0, [0.5, 0.5], 0.2, 64, true).unwrap()]);
        let res = evolve_minimize(&seed, &sys, k, &TaimanovParams::default()).unwrap();
        assert_eq!(res.outcome, TaimanovOutcome::Stationary, "{:?}", (res.residual, res.iterations));
        assert!(res.residual < 1e-3);
        assert!(res.value < 0.0);
        let lb = -sys.sup_abs_f() * 1.0;
        assert!(res.value >= lb);
        assert_relative_eq!(res.value, taimanov_value(&res.region, &sys, k).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn nonnegative_field_has_zero_tau() {
        let sys = MagneticSystem::homogeneous(SurfaceModel::unit_torus(), 1.0);
        let t = tau_estimate(&sys, &[], (0.01, 1.0), &TaimanovParams::default()).unwrap();
        assert_eq!(t.tau, 0.0);
    }
}
