//! The unit tangent bundle `SM` in coordinates `(x, y, a)`, with
//! `v = (cos a, sin a)/λ` measured counter-clockwise from the first chart
//! direction and `λ = e^φ` the conformal scale.
//!
//! Coframe: `α = λ(cos a dx + sin a dy)`, `β = λ(−sin a dx + cos a dy)`,
//! `ψ = da − φ_y dx + φ_x dy`. The magnetic flow at strength `s` is
//! `X_s = X + s f V` and the twisted form is `ω_s = dα − s π*σ`.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::{ChartPoint, SurfaceModel, Vec2};
use crate::magnetic::{energy_of_s, local_primitive, torus_samples, LocalPrimitive, MagneticField, MagneticSystem, PrimitiveRegion};
use crate::numerics::{gauss_legendre_unit, PeriodicSpline2};
use crate::orbitfind::Orbit;
use crate::taimanov::{taimanov_value_with, Region, RegionCurve};

/// Components against `(dx, dy, da)`.
pub type Form1 = [f64; 3];
/// Components along `(∂x, ∂y, ∂a)`.
pub type Tangent3 = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SMPoint {
    pub q: ChartPoint,
    pub phi: f64,
}

impl SMPoint {
    pub fn new(q: ChartPoint, phi: f64) -> Self {
        Self { q, phi }
    }

    /// The point of `SM` over `q` in the direction of `v`.
    pub fn along(q: ChartPoint, v: Vec2) -> Self {
        Self { q, phi: v[1].atan2(v[0]) }
    }

    /// The unit vector in chart components.
    pub fn velocity(&self, surface: &SurfaceModel) -> Result<Vec2> {
        let l = surface.scale_at(&self.q)?;
        Ok([self.phi.cos() / l, self.phi.sin() / l])
    }

    fn offset(&self, d: Tangent3) -> Self {
        Self { q: self.q.offset([d[0], d[1]]), phi: self.phi + d[2] }
    }
}

/// `τ = a·α + p·ψ + b·β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoframeValue {
    pub a: f64,
    pub p: f64,
    pub b: f64,
}

impl CoframeValue {
    /// Coefficients of `τ` read off by evaluation on the frame.
    pub fn of(tau: Form1, frame: &Frame) -> Self {
        Self { a: pair(tau, frame.x), p: pair(tau, frame.v), b: pair(tau, frame.h) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coframe {
    pub alpha: Form1,
    pub psi: Form1,
    pub beta: Form1,
}

impl Coframe {
    pub fn at(surface: &SurfaceModel, pt: &SMPoint) -> Result<Self> {
        let phi = surface.conformal_at(&pt.q)?;
        let l = phi.value.exp();
        let (sn, cs) = pt.phi.sin_cos();
        Ok(Self { alpha: [l * cs, l * sn, 0.0], psi: [-phi.dy, phi.dx, 1.0], beta: [-l * sn, l * cs, 0.0] })
    }

    /// `α∧ψ∧β = α∧dα` against `dx∧dy∧da`. It is `−λ²`: with a
    /// counter-clockwise fiber angle the contact volume is negatively
    /// oriented, so the Liouville measure is `|α∧dα|`.
    pub fn volume_density(&self) -> f64 {
        let (a, p, b) = (self.alpha, self.psi, self.beta);
        a[0] * (p[1] * b[2] - p[2] * b[1]) - a[1] * (p[0] * b[2] - p[2] * b[0]) + a[2] * (p[0] * b[1] - p[1] * b[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub x: Tangent3,
    pub v: Tangent3,
    pub h: Tangent3,
}

impl Frame {
    pub fn at(surface: &SurfaceModel, pt: &SMPoint) -> Result<Self> {
        let phi = surface.conformal_at(&pt.q)?;
        let l = phi.value.exp();
        let (sn, cs) = pt.phi.sin_cos();
        Ok(Self {
            x: [cs / l, sn / l, (phi.dy * cs - phi.dx * sn) / l],
            v: [0.0, 0.0, 1.0],
            h: [-sn / l, cs / l, -(phi.dy * sn + phi.dx * cs) / l],
        })
    }
}

fn pair(tau: Form1, w: Tangent3) -> f64 {
    tau[0] * w[0] + tau[1] * w[1] + tau[2] * w[2]
}

fn wedge(u: Form1, w: Form1, a: Tangent3, b: Tangent3) -> f64 {
    pair(u, a) * pair(w, b) - pair(u, b) * pair(w, a)
}

fn scaled(a: Tangent3, h: f64) -> Tangent3 {
    [a[0] * h, a[1] * h, a[2] * h]
}

/// `X_s` in the coframe: `α(X_s) = 1`, `ψ(X_s) = s·f(q)`, `β(X_s) = 0`.
pub fn xs_coefficients(system: &MagneticSystem, s: f64, pt: &SMPoint) -> Result<CoframeValue> {
    Ok(CoframeValue { a: 1.0, p: s * system.f_at(&pt.q)?, b: 0.0 })
}

/// `X_s` in coordinates.
pub fn xs_vector(system: &MagneticSystem, s: f64, pt: &SMPoint) -> Result<Tangent3> {
    let x = Frame::at(&system.surface, pt)?.x;
    Ok([x[0], x[1], x[2] + s * system.f_at(&pt.q)?])
}

/// Worst discrete-Stokes mismatch per unit coordinate area for each
/// structure equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuralResiduals {
    /// `dα = ψ∧β`
    pub d_alpha: f64,
    /// `dψ = K β∧α`
    pub d_psi: f64,
    /// `dβ = α∧ψ`
    pub d_beta: f64,
}

impl StructuralResiduals {
    pub fn max(&self) -> f64 {
        self.d_alpha.max(self.d_psi).max(self.d_beta)
    }
}

pub const STRUCTURAL_SAMPLES: usize = 64;
const STRUCTURAL_SEED: u64 = 0x5eed;

pub fn structural_relations_check(surface: &SurfaceModel, h: f64) -> Result<StructuralResiduals> {
    structural_relations_check_with(surface, h, STRUCTURAL_SAMPLES, STRUCTURAL_SEED)
}

/// Circulation of each coframe element around random parallelograms of side
/// `h` (midpoint rule per edge) against the claimed derivative evaluated at
/// the base corner. The corner evaluation makes the mismatch first order in
/// `h`.
pub fn structural_relations_check_with(surface: &SurfaceModel, h: f64, samples: usize, seed: u64) -> Result<StructuralResiduals> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("parallelogram side must be positive, got {h}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = StructuralResiduals { d_alpha: 0.0, d_psi: 0.0, d_beta: 0.0 };
    for _ in 0..samples {
        let base = random_sm_point(surface, &mut rng);
        let (da, db) = (scaled(random_direction(&mut rng), h), scaled(random_direction(&mut rng), h));
        let at = |s: f64, t: f64| Coframe::at(surface, &base.offset([s * da[0] + t * db[0], s * da[1] + t * db[1], s * da[2] + t * db[2]]));
        let (m0, m1, m2, m3) = (at(0.5, 0.0)?, at(1.0, 0.5)?, at(0.5, 1.0)?, at(0.0, 0.5)?);
        // opposite edges paired so that a constant form circulates to exactly zero
        let circulation = |f: fn(&Coframe) -> Form1| {
            let d = |x: Form1, y: Form1| [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
            pair(d(f(&m0), f(&m2)), da) + pair(d(f(&m1), f(&m3)), db)
        };
        let c = Coframe::at(surface, &base)?;
        let k = surface.metric_at(&base.q)?.curvature;
        let area = h * h;
        let r_alpha = (circulation(|c| c.alpha) - wedge(c.psi, c.beta, da, db)).abs() / area;
        let r_psi = (circulation(|c| c.psi) - k * wedge(c.beta, c.alpha, da, db)).abs() / area;
        let r_beta = (circulation(|c| c.beta) - wedge(c.alpha, c.psi, da, db)).abs() / area;
        out.d_alpha = out.d_alpha.max(r_alpha);
        out.d_psi = out.d_psi.max(r_psi);
        out.d_beta = out.d_beta.max(r_beta);
    }
    Ok(out)
}

fn random_direction(rng: &mut ChaCha8Rng) -> Tangent3 {
    loop {
        let d: Tangent3 = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        if n > 0.2 {
            return [d[0] / n, d[1] / n, d[2] / n];
        }
    }
}

fn random_sm_point(surface: &SurfaceModel, rng: &mut ChaCha8Rng) -> SMPoint {
    let q = match surface {
        SurfaceModel::FlatTorus { lx, ly } | SurfaceModel::ConformalTorus { lx, ly, .. } => {
            ChartPoint::plane(rng.random_range(0.0..*lx), rng.random_range(0.0..*ly))
        }
        SurfaceModel::RoundSphere => ChartPoint::new(0, rng.random_range(-0.8..0.8), rng.random_range(-0.8..0.8)),
        SurfaceModel::HyperbolicPlane { .. } => ChartPoint::plane(rng.random_range(-1.0..1.0), rng.random_range(0.5..2.0)),
    };
    SMPoint::new(q, rng.random_range(0.0..2.0 * PI))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    PositiveContact,
    NegativeContact,
    Indeterminate,
}

/// Values within this distance of zero do not decide a sign.
pub const VERDICT_MARGIN: f64 = 1e-10;

impl Verdict {
    pub fn from_range(min: f64, max: f64) -> Self {
        if min > VERDICT_MARGIN {
            Verdict::PositiveContact
        } else if max < -VERDICT_MARGIN {
            Verdict::NegativeContact
        } else {
            Verdict::Indeterminate
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactCertificate {
    pub verdict: Verdict,
    pub min_value: f64,
    pub max_value: f64,
    pub witness: String,
    pub s: f64,
}

/// A 1-form on `SM` to test against `X_s`.
#[derive(Debug, Clone)]
pub enum Candidate {
    /// `α + sign·s·ψ`, closed-form primitives of `ω_s` on the homogeneous
    /// sphere (`+`) and hyperbolic surfaces (`−`).
    Homogeneous { sign: f64 },
    /// `α − s π*ζ` with `dζ = σ`.
    Exact { zeta: LocalPrimitive },
    /// `α − s π*ζ + s[σ]/(2πχ) ψ` with `dζ = σ − [σ]/(2πχ) K μ`.
    Nonexact { zeta: LocalPrimitive },
    /// `ψ + c₁dx + c₂dy`, closed on the flat torus.
    ClosedTorus { c1: f64, c2: f64 },
}

impl Candidate {
    pub fn describe(&self, s: f64) -> String {
        match self {
            Candidate::Homogeneous { sign } => format!("alpha {} {}*psi", if *sign >= 0.0 { "+" } else { "-" }, s),
            Candidate::Exact { .. } => format!("alpha - {s}*pi^*zeta"),
            Candidate::Nonexact { .. } => format!("alpha - {s}*pi^*zeta + {s}*[sigma]/(2 pi chi)*psi"),
            Candidate::ClosedTorus { c1, c2 } => format!("psi + {c1}*dx + {c2}*dy"),
        }
    }
}

/// Evaluation grid on `SM`: the surface's area rule at `base` times `fiber`
/// equally spaced angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmGrid {
    pub base: usize,
    pub fiber: usize,
    pub exec: Execution,
}

impl Default for SmGrid {
    fn default() -> Self {
        Self { base: 128, fiber: 64, exec: Execution::default() }
    }
}

impl SmGrid {
    fn angle(&self, j: usize) -> f64 {
        2.0 * PI * (j as f64 + 0.5) / self.fiber as f64
    }
}

/// `ζ = 0` solves `dζ = σ − [σ]/(2πχ)Kμ` whenever `f` and `K` are both
/// constant.
pub fn homogeneous_zeta(system: &MagneticSystem) -> Option<LocalPrimitive> {
    let constant_curvature = matches!(system.surface, SurfaceModel::RoundSphere | SurfaceModel::HyperbolicPlane { genus: Some(_) });
    (constant_curvature && system.field.constant_value().is_some()).then_some(LocalPrimitive::Zero { c1: 0.0, c2: 0.0 })
}

struct Prepared<'a> {
    system: &'a MagneticSystem,
    s: f64,
    candidate: &'a Candidate,
    /// `[σ]/(2πχ)` for the nonexact correction.
    psi_weight: f64,
}

impl Prepared<'_> {
    fn new<'a>(system: &'a MagneticSystem, s: f64, candidate: &'a Candidate) -> Result<Prepared<'a>> {
        let psi_weight = match candidate {
            Candidate::Nonexact { .. } => nonexact_weight(system)?,
            Candidate::ClosedTorus { .. } if !system.surface.is_torus() => {
                return Err(Error::Unsupported("closed fiber forms are built on the torus only".into()))
            }
            _ => 0.0,
        };
        Ok(Prepared { system, s, candidate, psi_weight })
    }

    fn form(&self, pt: &SMPoint, c: &Coframe) -> Form1 {
        let s = self.s;
        let shift = |zeta: &LocalPrimitive| {
            let z = zeta.eval(self.system, &pt.q);
            [c.alpha[0] - s * z[0], c.alpha[1] - s * z[1], c.alpha[2]]
        };
        match self.candidate {
            Candidate::Homogeneous { sign } => {
                let w = sign * s;
                [c.alpha[0] + w * c.psi[0], c.alpha[1] + w * c.psi[1], c.alpha[2] + w * c.psi[2]]
            }
            Candidate::Exact { zeta } => shift(zeta),
            Candidate::Nonexact { zeta } => {
                let t = shift(zeta);
                let w = s * self.psi_weight;
                [t[0] + w * c.psi[0], t[1] + w * c.psi[1], t[2] + w * c.psi[2]]
            }
            Candidate::ClosedTorus { c1, c2 } => [c.psi[0] + c1, c.psi[1] + c2, c.psi[2]],
        }
    }

    fn at(&self, pt: &SMPoint) -> Result<Form1> {
        Ok(self.form(pt, &Coframe::at(&self.system.surface, pt)?))
    }

    fn value(&self, pt: &SMPoint) -> Result<f64> {
        Ok(pair(self.at(pt)?, xs_vector(self.system, self.s, pt)?))
    }

    /// `ω_s(a, b) = (ψ∧β)(a, b) − s·σ(a, b)`.
    fn omega(&self, pt: &SMPoint, a: Tangent3, b: Tangent3) -> Result<f64> {
        let c = Coframe::at(&self.system.surface, pt)?;
        let sigma = self.system.sigma_density(&pt.q)? * (a[0] * b[1] - a[1] * b[0]);
        Ok(wedge(c.psi, c.beta, a, b) - self.s * sigma)
    }

    /// Spot check of `dτ = ω_s` (or `dτ = 0` for closed forms) by Stokes on
    /// small parallelograms.
    fn check_consistency(&self) -> Result<()> {
        const H: f64 = 1e-3;
        const TOL: f64 = 1e-3;
        let nodes = gauss_legendre_unit(3);
        let mut rng = ChaCha8Rng::seed_from_u64(STRUCTURAL_SEED + 1);
        let closed = matches!(self.candidate, Candidate::ClosedTorus { .. });
        for _ in 0..12 {
            let base = random_sm_point(&self.system.surface, &mut rng);
            let (da, db) = (scaled(random_direction(&mut rng), H), scaled(random_direction(&mut rng), H));
            let point = |s: f64, t: f64| base.offset([s * da[0] + t * db[0], s * da[1] + t * db[1], s * da[2] + t * db[2]]);
            let edges = [
                ((0.0, 0.0), (1.0, 0.0), da),
                ((1.0, 0.0), (0.0, 1.0), db),
                ((1.0, 1.0), (-1.0, 0.0), scaled(da, -1.0)),
                ((0.0, 1.0), (0.0, -1.0), scaled(db, -1.0)),
            ];
            let mut circulation = 0.0;
            for (start, dir, e) in edges {
                for &(t, w) in &nodes {
                    circulation += w * pair(self.at(&point(start.0 + t * dir.0, start.1 + t * dir.1))?, e);
                }
            }
            let mut face = 0.0;
            for &(u, wu) in &nodes {
                for &(v, wv) in &nodes {
                    face += wu * wv * self.omega(&point(u, v), da, db)?;
                }
            }
            let target = if closed { 0.0 } else { face };
            let scale = 1.0 + face.abs() / (H * H);
            let residual = (circulation - target).abs() / (H * H);
            if residual > TOL * scale {
                return Err(Error::InvalidCandidate(format!(
                    "d(tau) differs from {} by {residual:.3e} per unit area at ({}, {}, {})",
                    if closed { "0" } else { "omega_s" },
                    base.q.u,
                    base.q.v,
                    base.phi
                )));
            }
        }
        Ok(())
    }
}

fn nonexact_weight(system: &MagneticSystem) -> Result<f64> {
    let inv = system.surface.surface_invariants()?;
    if inv.euler_characteristic == 0 {
        return Err(Error::Unsupported("omega_s is not exact on a torus with non-zero flux".into()));
    }
    Ok(system.flux()? / (2.0 * PI * inv.euler_characteristic as f64))
}

pub fn contact_candidate_min(system: &MagneticSystem, s: f64, candidate: &Candidate) -> Result<ContactCertificate> {
    contact_candidate_min_with(system, s, candidate, &SmGrid::default())
}

/// Range of `τ(X_s)` over the grid and the resulting sign verdict.
pub fn contact_candidate_min_with(system: &MagneticSystem, s: f64, candidate: &Candidate, grid: &SmGrid) -> Result<ContactCertificate> {
    if !s.is_finite() {
        return Err(Error::InvalidParameter(format!("s must be finite, got {s}")));
    }
    let prepared = Prepared::new(system, s, candidate)?;
    prepared.check_consistency()?;
    let rule = system.surface.area_rule(grid.base)?;
    let m = grid.fiber.max(1);
    let (min_value, max_value) = grid.exec.min_max(rule.len() * m, |i| {
        let pt = SMPoint::new(rule.points[i / m], grid.angle(i % m));
        prepared.value(&pt).unwrap_or(f64::NAN)
    });
    if !min_value.is_finite() || !max_value.is_finite() {
        return Err(Error::Degenerate("candidate evaluation produced a non-finite value".into()));
    }
    Ok(ContactCertificate { verdict: Verdict::from_range(min_value, max_value), min_value, max_value, witness: candidate.describe(s), s })
}

/// `τ(X_s)` on an `n × n` torus grid (or the area-rule points) at a fixed
/// fiber angle, as `x,y,value` rows.
pub fn write_slice_csv(system: &MagneticSystem, s: f64, candidate: &Candidate, angle: f64, n: usize, path: &Path) -> Result<()> {
    let prepared = Prepared::new(system, s, candidate)?;
    let rule = system.surface.area_rule(n)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    w.write_record(["x", "y", "value"]).map_err(|e| Error::Io(e.to_string()))?;
    for q in &rule.points {
        let v = prepared.value(&SMPoint::new(*q, angle))?;
        w.write_record([q.u.to_string(), q.v.to_string(), v.to_string()]).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiouvilleReport {
    /// `ξ_SM(SM)` by quadrature of `|α∧dα|`.
    pub volume: f64,
    pub closed_form_action: f64,
    pub quadrature_action: f64,
    /// `∫ ζ(v) dξ_SM`; the flip `v ↦ −v` preserves `ξ_SM` and odd `ζ`.
    pub flip_integral: f64,
    /// `∫ f dξ_SM` by quadrature …
    pub field_integral: f64,
    /// … and its closed form `2π[σ]`.
    pub field_integral_expected: f64,
}

pub fn liouville_action(system: &MagneticSystem, s: f64, zeta: Option<&LocalPrimitive>) -> Result<LiouvilleReport> {
    liouville_action_with(system, s, zeta, &SmGrid::default())
}

/// Action of the Liouville measure, `∫ τ_s(X_s) dξ_SM`, for the primitive
/// `τ_s` built from `ζ`. Without a supplied `ζ` the torus uses its global
/// primitive and homogeneous surfaces use `ζ = 0`.
pub fn liouville_action_with(system: &MagneticSystem, s: f64, zeta: Option<&LocalPrimitive>, grid: &SmGrid) -> Result<LiouvilleReport> {
    let inv = system.surface.surface_invariants()?;
    let flux = system.flux()?;
    let exact = flux.abs() <= 1e-9 * (1.0 + inv.area);
    let zeta = match zeta {
        Some(z) => z.clone(),
        None if exact && system.field.is_identically_zero() => LocalPrimitive::Zero { c1: 0.0, c2: 0.0 },
        None if exact && system.surface.is_torus() => local_primitive(system, PrimitiveRegion::Torus { c1: 0.0, c2: 0.0 })?,
        None if !exact => homogeneous_zeta(system)
            .ok_or_else(|| Error::Unsupported("supply zeta with d(zeta) = sigma - [sigma]/(2 pi chi) K mu".into()))?,
        None => return Err(Error::Unsupported("supply a global primitive of sigma".into())),
    };
    let (weight, closed_form_action) = if exact {
        (0.0, 2.0 * PI * inv.area)
    } else {
        let chi = inv.euler_characteristic as f64;
        (nonexact_weight(system)?, 2.0 * PI * inv.area + s * s * flux * flux / chi)
    };
    let rule = system.surface.area_rule(grid.base)?;
    let m = grid.fiber.max(1);
    let dphi = 2.0 * PI / m as f64;
    let [volume, action, flip, field] = grid.exec.sum_n(rule.len(), |i| {
        let q = rule.points[i];
        let eval = || -> Result<[f64; 4]> {
            let vol = Coframe::at(&system.surface, &SMPoint::new(q, 0.0))?.volume_density().abs();
            let w = rule.weights[i] * vol * dphi;
            let f = system.f_at(&q)?;
            let mut z_sum = 0.0;
            for j in 0..m {
                let pt = SMPoint::new(q, grid.angle(j));
                z_sum += zeta.apply(system, &q, pt.velocity(&system.surface)?);
            }
            let n = m as f64;
            Ok([w * n, w * (n - s * z_sum + n * s * s * weight * f), w * z_sum, w * n * f])
        };
        eval().unwrap_or([f64::NAN; 4])
    });
    if !volume.is_finite() || !action.is_finite() {
        return Err(Error::Degenerate("Liouville quadrature produced a non-finite value".into()));
    }
    Ok(LiouvilleReport {
        volume,
        closed_form_action,
        quadrature_action: action,
        flip_integral: flip,
        field_integral: field,
        field_integral_expected: 2.0 * PI * flux,
    })
}

/// Homology class of an invariant measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RotationVector {
    /// Pairings with `[dx/l_x]`, `[dy/l_y]` and the fiber class `[da/2π]`
    /// of `S(T²) ≅ T³`.
    Torus { m: f64, n: f64, fiber: f64 },
    /// `π_*ρ ∈ H₁(M; ℝ)` in a basis of `2·genus` cycles.
    Projected { class: Vec<f64> },
}

fn projected_zero(surface: &SurfaceModel) -> Result<RotationVector> {
    let chi = surface.surface_invariants().map(|i| i.euler_characteristic).unwrap_or(2);
    Ok(RotationVector::Projected { class: vec![0.0; (2 - chi).max(0) as usize] })
}

/// Rotation vector of the arclength measure on one period of `orbit`.
/// Off the torus a chart-closed orbit is null-homologous.
pub fn orbit_rotation_vector(system: &MagneticSystem, orbit: &Orbit) -> Result<RotationVector> {
    let Some((lx, ly)) = system.surface.periods() else {
        return projected_zero(&system.surface);
    };
    let samples = &orbit.trajectory.samples;
    let (a, b) = (samples[0].state.q, orbit.trajectory.last().state.q);
    let mut turning = 0.0;
    for w in samples.windows(2) {
        let (u, v) = (w[0].state.v, w[1].state.v);
        turning += (u[0] * v[1] - u[1] * v[0]).atan2(u[0] * v[0] + u[1] * v[1]);
    }
    Ok(RotationVector::Torus { m: (b.u - a.u) / lx, n: (b.v - a.v) / ly, fiber: turning / (2.0 * PI) })
}

/// Rotation vector of the Liouville measure; on the torus each component is
/// integrated against its closed dual form.
pub fn liouville_rotation_vector(system: &MagneticSystem, s: f64, grid: &SmGrid) -> Result<RotationVector> {
    let Some((lx, ly)) = system.surface.periods() else {
        return projected_zero(&system.surface);
    };
    let rule = system.surface.area_rule(grid.base)?;
    let m = grid.fiber.max(1);
    let dphi = 2.0 * PI / m as f64;
    let [x, y, a] = grid.exec.sum_n(rule.len(), |i| {
        let q = rule.points[i];
        let eval = || -> Result<[f64; 3]> {
            let w = rule.weights[i] * system.surface.metric_at(&q)?.mu_density * dphi;
            let mut acc = [0.0; 3];
            for j in 0..m {
                let xs = xs_vector(system, s, &SMPoint::new(q, grid.angle(j)))?;
                for (c, x) in acc.iter_mut().zip(xs) {
                    *c += w * x;
                }
            }
            Ok(acc)
        };
        eval().unwrap_or([f64::NAN; 3])
    });
    Ok(RotationVector::Torus { m: x / lx, n: y / ly, fiber: a / (2.0 * PI) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussBonnetReport {
    /// `S_s(ξ_∂Π)/s` from the orbit-measure line integral.
    pub lhs: f64,
    /// `𝒯_k(Π) + 𝔬(Π)χ(Π)[σ]/χ(M)`.
    pub rhs: f64,
    pub residual: f64,
    pub taimanov: f64,
    pub correction: f64,
    /// `Σ 𝔬 (∫_Π K μ + ∮ κ)` over the boundary discs …
    pub gauss_bonnet: f64,
    /// … which should be `2π·𝔬(Π)χ(Π)`.
    pub gauss_bonnet_expected: f64,
}

/// Compares the action of the orbit measures of the boundary of `Π` with
/// the Taimanov value of `Π`. Each orbit bounds a disc; a counter-clockwise
/// orbit contributes its disc, a clockwise one the reversed disc.
pub fn gauss_bonnet_action_check(system: &MagneticSystem, s: f64, orbits: &[Orbit]) -> Result<GaussBonnetReport> {
    if orbits.is_empty() {
        return Ok(GaussBonnetReport {
            lhs: 0.0,
            rhs: 0.0,
            residual: 0.0,
            taimanov: 0.0,
            correction: 0.0,
            gauss_bonnet: 0.0,
            gauss_bonnet_expected: 0.0,
        });
    }
    let k = energy_of_s(s)?;
    let inv = system.surface.surface_invariants()?;
    let flux = system.flux()?;
    let (zeta, weight) = if system.surface.is_torus() {
        if flux.abs() > 1e-9 * (1.0 + inv.area) {
            return Err(Error::Unsupported("the orbit action on a torus needs an exact field".into()));
        }
        let z = if system.field.is_identically_zero() {
            LocalPrimitive::Zero { c1: 0.0, c2: 0.0 }
        } else {
            local_primitive(system, PrimitiveRegion::Torus { c1: 0.0, c2: 0.0 })?
        };
        (z, 0.0)
    } else {
        let z = homogeneous_zeta(system)
            .ok_or_else(|| Error::Unsupported("the orbit action off the torus is built for homogeneous fields".into()))?;
        (z, nonexact_weight(system)?)
    };
    let curvature = curvature_system(&system.surface)?;
    let speed = (2.0 * k).sqrt();
    let mut action = 0.0;
    let mut curves = Vec::with_capacity(orbits.len());
    let mut orientation = 0.0;
    let mut gauss_bonnet = 0.0;
    for orbit in orbits {
        if (orbit.energy - k).abs() > 1e-9 * k.max(1.0) {
            return Err(Error::InvalidParameter(format!("orbit energy {} does not match k = {k}", orbit.energy)));
        }
        let samples = &orbit.trajectory.samples;
        let chart = samples[0].state.q.chart;
        if samples.iter().any(|x| x.state.q.chart != chart) {
            return Err(Error::Unsupported("orbit crosses a chart boundary".into()));
        }
        let integrand = |i: usize| -> Result<f64> {
            let st = samples[i].state;
            let pt = SMPoint::along(st.q, st.v);
            let v = pt.velocity(&system.surface)?;
            Ok(1.0 - s * zeta.apply(system, &st.q, v) + s * s * weight * system.f_at(&st.q)?)
        };
        for i in 0..samples.len() - 1 {
            let dt = samples[i + 1].t - samples[i].t;
            action += 0.5 * dt * speed * (integrand(i)? + integrand(i + 1)?);
        }
        let curve = RegionCurve::new(samples[..samples.len() - 1].iter().map(|x| x.state.q).collect())?;
        let o = if curve.is_counter_clockwise() { 1.0 } else { -1.0 };
        let kappa = curve.curvatures(&system.surface)?;
        let lengths = curve.edge_lengths(&system.surface)?;
        let n = curve.len();
        let turning: f64 = (0..n).map(|i| kappa[i] * 0.5 * (lengths[i] + lengths[(i + n - 1) % n])).sum();
        let total_curvature = match &curvature {
            Some(c) => Region::discs(vec![curve.clone()]).enclosed_flux(c, Execution::default())?,
            None => 0.0,
        };
        gauss_bonnet += total_curvature + turning;
        orientation += o;
        curves.push(curve);
    }
    let taimanov = taimanov_value_with(&Region::discs(curves), system, k, Execution::default())?;
    let correction = if inv.euler_characteristic != 0 { orientation * flux / inv.euler_characteristic as f64 } else { 0.0 };
    let lhs = action / s;
    let rhs = taimanov + correction;
    Ok(GaussBonnetReport {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        taimanov,
        correction,
        gauss_bonnet,
        gauss_bonnet_expected: 2.0 * PI * orientation,
    })
}

/// A system whose "field" is the Gaussian curvature, so that its flux over a
/// region is `∫ K μ`; `None` when `K ≡ 0`.
fn curvature_system(surface: &SurfaceModel) -> Result<Option<MagneticSystem>> {
    Ok(match surface {
        SurfaceModel::FlatTorus { .. } => None,
        SurfaceModel::RoundSphere => Some(MagneticSystem::homogeneous(surface.clone(), 1.0)),
        SurfaceModel::HyperbolicPlane { .. } => Some(MagneticSystem::homogeneous(surface.clone(), -1.0)),
        SurfaceModel::ConformalTorus { lx, ly, .. } => {
            let n = 128;
            let samples = torus_samples(n, *lx, *ly, |p| surface.metric_at(p).map(|m| m.curvature).unwrap_or(f64::NAN));
            let spline = PeriodicSpline2::new(n, n, *lx, *ly, &samples)?;
            Some(MagneticSystem::new(surface.clone(), MagneticField::Grid(spline.into()))?)
        }
    })
}

/// Certificate or report as pretty JSON.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::Io(e.to_string()))?;
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(f).map_err(|e| Error::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::TangentState;
    use crate::numerics::{TrigSeries, TrigTerm};
    use crate::orbitfind::{oracle_circle, section_through, shoot_periodic, HomogeneousKind, ShootingParams};
    use approx::assert_relative_eq;

    fn genus2(c: f64) -> MagneticSystem {
        MagneticSystem::homogeneous(SurfaceModel::hyperbolic_genus(2), c)
    }

    fn small_grid() -> SmGrid {
        SmGrid { base: 32, fiber: 16, exec: Execution::default() }
    }

    fn surfaces() -> Vec<SurfaceModel> {
        vec![
            SurfaceModel::RoundSphere,
            SurfaceModel::unit_torus(),
            SurfaceModel::hyperbolic_genus(2),
            SurfaceModel::ConformalTorus {
                lx: 1.0,
                ly: 1.0,
                factor: crate::geometry::ConformalFactor::Series(TrigSeries {
                    constant: 0.0,
                    terms: vec![TrigTerm { m: 1, n: 1, a: 0.2, b: 0.1 }],
                }),
            },
        ]
    }

    #[test]
    fn coframe_is_dual_to_frame() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for surface in surfaces() {
            for _ in 0..20 {
                let pt = random_sm_point(&surface, &mut rng);
                let (c, f) = (Coframe::at(&surface, &pt).unwrap(), Frame::at(&surface, &pt).unwrap());
                let rows = [c.alpha, c.psi, c.beta];
                let cols = [f.x, f.v, f.h];
                for (i, r) in rows.iter().enumerate() {
                    for (j, w) in cols.iter().enumerate() {
                        assert!((pair(*r, *w) - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
                    }
                }
                let v = pt.velocity(&surface).unwrap();
                assert!((surface.norm(&pt.q, v).unwrap() - 1.0).abs() < 1e-12);
                let l2 = surface.metric_at(&pt.q).unwrap().mu_density;
                assert_relative_eq!(c.volume_density(), -l2, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn xs_examples() {
        let pt = SMPoint::new(ChartPoint::plane(0.3, 0.4), 1.0);
        let torus = SurfaceModel::unit_torus();
        let one = MagneticSystem::homogeneous(torus.clone(), 1.0);
        assert_eq!(xs_coefficients(&one, 1.0, &pt).unwrap(), CoframeValue { a: 1.0, p: 1.0, b: 0.0 });
        assert_eq!(xs_coefficients(&one, 0.0, &pt).unwrap(), CoframeValue { a: 1.0, p: 0.0, b: 0.0 });
        let minus_two = MagneticSystem::homogeneous(torus, -2.0);
        assert_eq!(xs_coefficients(&minus_two, 0.5, &pt).unwrap(), CoframeValue { a: 1.0, p: -1.0, b: 0.0 });
        let sys = genus2(1.0);
        let pt = SMPoint::new(ChartPoint::plane(0.2, 1.3), 2.0);
        let c = CoframeValue::of(Coframe::at(&sys.surface, &pt).unwrap().psi, &Frame::at(&sys.surface, &pt).unwrap());
        assert_eq!((c.a, c.p, c.b), (0.0, 1.0, 0.0));
        let xs = xs_vector(&sys, 0.7, &pt).unwrap();
        let c = Coframe::at(&sys.surface, &pt).unwrap();
        assert!((pair(c.alpha, xs) - 1.0).abs() < 1e-14 && (pair(c.psi, xs) - 0.7).abs() < 1e-14 && pair(c.beta, xs).abs() < 1e-14);
    }

    #[test]
    fn structural_relations_converge_linearly() {
        let flat = structural_relations_check(&SurfaceModel::unit_torus(), 1e-2).unwrap();
        assert_eq!(flat.d_psi, 0.0);
        let coarse = structural_relations_check(&SurfaceModel::RoundSphere, 1e-2).unwrap();
        let fine = structural_relations_check(&SurfaceModel::RoundSphere, 5e-3).unwrap();
        let ratio = coarse.max() / fine.max();
        assert!((1.8..2.2).contains(&ratio), "ratio {ratio}");
        let hyp = structural_relations_check(&SurfaceModel::HyperbolicPlane { genus: None }, 1e-3).unwrap();
        assert!(hyp.d_psi < 1e-2, "{hyp:?}");
    }

    #[test]
    fn homogeneous_candidates() {
        let sphere = MagneticSystem::homogeneous(SurfaceModel::RoundSphere, 1.0);
        let cert = contact_candidate_min_with(&sphere, 1.0, &Candidate::Homogeneous { sign: 1.0 }, &small_grid()).unwrap();
        assert_eq!(cert.verdict, Verdict::PositiveContact);
        assert!((cert.min_value - 2.0).abs() < 1e-12 && (cert.max_value - 2.0).abs() < 1e-12);

        let hyp = genus2(1.0);
        let minus = Candidate::Homogeneous { sign: -1.0 };
        let cert = contact_candidate_min_with(&hyp, 2.0, &minus, &small_grid()).unwrap();
        assert_eq!(cert.verdict, Verdict::NegativeContact);
        assert!((cert.min_value + 3.0).abs() < 1e-12 && (cert.max_value + 3.0).abs() < 1e-12);
        let cert = contact_candidate_min_with(&hyp, 1.0, &minus, &small_grid()).unwrap();
        assert_eq!(cert.verdict, Verdict::Indeterminate);
        assert!(cert.min_value.abs() < 1e-12 && cert.max_value.abs() < 1e-12);

        let wrong = contact_candidate_min_with(&hyp, 0.5, &Candidate::Homogeneous { sign: 1.0 }, &small_grid());
        assert!(matches!(wrong, Err(Error::InvalidCandidate(_))));
    }

    #[test]
    fn exact_torus_candidate_and_closed_form() {
        let sys = MagneticSystem::new(
            SurfaceModel::unit_torus(),
            MagneticField::TorusSeries(TrigSeries { constant: 0.0, terms: vec![TrigTerm { m: 1, n: 0, a: 1.0, b: 0.0 }] }),
        )
        .unwrap();
        let zeta = local_primitive(&sys, PrimitiveRegion::Torus { c1: 0.0, c2: 0.0 }).unwrap();
        // |ζ| ≤ 1/2π, so for s < 2π the exact candidate is positive
        let cert = contact_candidate_min_with(&sys, 1.0, &Candidate::Exact { zeta: zeta.clone() }, &small_grid()).unwrap();
        assert_eq!(cert.verdict, Verdict::PositiveContact);
        assert!(cert.min_value > 1.0 - 1.0 / (2.0 * PI) - 1e-9);
        let bad = Candidate::Exact { zeta: LocalPrimitive::Zero { c1: 0.0, c2: 0.0 } };
        assert!(matches!(contact_candidate_min_with(&sys, 1.0, &bad, &small_grid()), Err(Error::InvalidCandidate(_))));

        let flat = MagneticSystem::homogeneous(SurfaceModel::unit_torus(), 1.0);
        let cert = contact_candidate_min_with(&flat, 0.5, &Candidate::ClosedTorus { c1: 0.0, c2: 0.0 }, &small_grid()).unwrap();
        assert_eq!(cert.verdict, Verdict::PositiveContact);
        assert_relative_eq!(cert.min_value, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn liouville_on_homogeneous_surfaces() {
        let s = 0.6;
        let g2 = liouville_action_with(&genus2(1.0), s, None, &SmGrid::default()).unwrap();
        assert_relative_eq!(g2.closed_form_action, 8.0 * PI * PI * (1.0 - s * s), max_relative = 1e-9);
        assert_relative_eq!(g2.quadrature_action, g2.closed_form_action, max_relative = 1e-6);
        assert!(g2.flip_integral.abs() < 1e-9);
        assert_relative_eq!(g2.field_integral, g2.field_integral_expected, max_relative = 1e-6);

        let sphere = MagneticSystem::homogeneous(SurfaceModel::RoundSphere, 1.0);
        let sp = liouville_action_with(&sphere, s, None, &SmGrid::default()).unwrap();
        assert_relative_eq!(sp.volume, 8.0 * PI * PI, max_relative = 1e-6);
        assert_relative_eq!(sp.quadrature_action, 8.0 * PI * PI * (1.0 + s * s), max_relative = 1e-6);
        assert_relative_eq!(sp.quadrature_action, sp.closed_form_action, max_relative = 1e-6);

        let flat = MagneticSystem::homogeneous(SurfaceModel::unit_torus(), 1.0);
        assert!(matches!(liouville_action_with(&flat, s, None, &small_grid()), Err(Error::Unsupported(_))));
    }

    #[test]
    fn liouville_on_exact_torus() {
        let sys = MagneticSystem::new(
            SurfaceModel::unit_torus(),
            MagneticField::TorusSeries(TrigSeries {
                constant: 0.0,
                terms: vec![TrigTerm { m: 1, n: 0, a: 1.0, b: 0.0 }, TrigTerm { m: 1, n: 2, a: 0.0, b: 0.5 }],
            }),
        )
        .unwrap();
        let r = liouville_action(&sys, 2.0, None).unwrap();
        assert!(r.flip_integral.abs() < 1e-9, "{r:?}");
        assert_relative_eq!(r.quadrature_action, 2.0 * PI, max_relative = 1e-6);
        assert_relative_eq!(r.closed_form_action, 2.0 * PI, max_relative = 1e-12);
    }

    #[test]
    fn rotation_vectors() {
        let flat = MagneticSystem::homogeneous(SurfaceModel::unit_torus(), 1.0);
        match liouville_rotation_vector(&flat, 0.5, &small_grid()).unwrap() {
            RotationVector::Torus { m, n, fiber } => {
                assert!(m.abs() < 1e-12 && n.abs() < 1e-12);
                assert_relative_eq!(fiber, 0.5, max_relative = 1e-12);
            }
            other => panic!("{other:?}"),
        }
        let sphere = MagneticSystem::homogeneous(SurfaceModel::RoundSphere, 1.0);
        assert_eq!(liouville_rotation_vector(&sphere, 0.5, &small_grid()).unwrap(), RotationVector::Projected { class: vec![] });

        let seed = oracle_circle(HomogeneousKind::Torus, 0.2).unwrap().state(0.3);
        let orbit = shoot_periodic(&flat, 12.5, seed, &section_through(&seed), &ShootingParams::default()).unwrap();
        match orbit_rotation_vector(&flat, &orbit).unwrap() {
            RotationVector::Torus { m, n, fiber } => {
                assert!(m.abs() < 1e-8 && n.abs() < 1e-8);
                assert!((fiber - 1.0).abs() < 1e-8, "fiber {fiber}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn gauss_bonnet_identity_on_genus_two() {
        let sys = genus2(1.0);
        let s = 2.0;
        let seed = oracle_circle(HomogeneousKind::Hyperbolic, s).unwrap().state(1.0);
        let orbit = shoot_periodic(&sys, energy_of_s(s).unwrap(), seed, &section_through(&seed), &ShootingParams::default()).unwrap();
        let r = gauss_bonnet_action_check(&sys, s, &[orbit]).unwrap();
        assert_relative_eq!(r.correction, -2.0 * PI, max_relative = 1e-9);
        assert!(r.residual < 1e-3, "{r:?}");
        assert!((r.gauss_bonnet - r.gauss_bonnet_expected).abs() < 1e-3, "{r:?}");
    }

    #[test]
    fn gauss_bonnet_identity_on_exact_torus() {
        let sys = MagneticSystem::new(
            SurfaceModel::unit_torus(),
            MagneticField::TorusSeries(TrigSeries { constant: 0.0, terms: vec![TrigTerm { m: 1, n: 0, a: 1.0, b: 0.0 }] }),
        )
        .unwrap();
        let s = 10.0;
        let k = energy_of_s(s).unwrap();
        let seed = TangentState::new(ChartPoint::plane(0.1, 0.3), [0.0, 0.1]);
        let orbit = shoot_periodic(&sys, k, seed, &section_through(&seed), &ShootingParams::default()).unwrap();
        let r = gauss_bonnet_action_check(&sys, s, &[orbit]).unwrap();
        assert_eq!(r.correction, 0.0);
        assert!(r.residual < 1e-4, "{r:?}");
        assert!((r.gauss_bonnet - 2.0 * PI).abs() < 1e-3, "{r:?}");
        let empty = gauss_bonnet_action_check(&sys, s, &[]).unwrap();
        assert_eq!((empty.lhs, empty.rhs), (0.0, 0.0));
    }
}
