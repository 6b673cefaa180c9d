//! Magnetic systems `σ = f·μ`: field evaluation, flux, primitives of `σ`
//! and the energy ↔ strength rescaling.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::{sphere_embed, ChartPoint, SurfaceModel, Vec2};
use crate::numerics::{fft2, gauss_legendre_unit, wavenumber, PeriodicSpline2, TrigSeries};

pub const DEFAULT_FLUX_RESOLUTION: usize = 512;
pub const DEFAULT_SPECTRAL_GRID: usize = 256;

/// Periodized isotropic Gaussian `amplitude·exp(−|q − centre|²/(2 width²))`
/// on a torus lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub x0: f64,
    pub y0: f64,
    pub amplitude: f64,
    pub width: f64,
}

impl Bump {
    pub fn value(&self, x: f64, y: f64, lx: f64, ly: f64) -> f64 {
        self.amplitude * periodic_gaussian(x - self.x0, self.width, lx) * periodic_gaussian(y - self.y0, self.width, ly)
    }

    /// Integral over one lattice cell.
    pub fn mass(&self) -> f64 {
        self.amplitude * 2.0 * PI * self.width * self.width
    }
}

fn periodic_gaussian(d: f64, w: f64, l: f64) -> f64 {
    let d = d - l * (d / l).round();
    let reach = (8.0 * w / l).ceil() as i32 + 1;
    (-reach..=reach)
        .map(|m| {
            let e = d - m as f64 * l;
            (-e * e / (2.0 * w * w)).exp()
        })
        .sum()
}

/// Scalar field `f` with `σ = f·μ`.
#[derive(Debug, Clone)]
pub enum MagneticField {
    Constant(f64),
    /// Trigonometric polynomial on the torus lattice.
    TorusSeries(TrigSeries),
    /// `base + Σ bumps` on the torus lattice.
    TorusBumps {
        base: f64,
        bumps: Vec<Bump>,
    },
    /// `constant + height·Z` on the round sphere, `Z` the embedded height.
    SphereAffine {
        constant: f64,
        height: f64,
    },
    /// Bicubic interpolant of torus grid samples.
    Grid(Arc<PeriodicSpline2>),
}

impl MagneticField {
    pub fn zero() -> Self {
        MagneticField::Constant(0.0)
    }

    pub fn is_identically_zero(&self) -> bool {
        match self {
            MagneticField::Constant(c) => *c == 0.0,
            MagneticField::TorusSeries(s) => s.constant == 0.0 && s.terms.iter().all(|t| t.a == 0.0 && t.b == 0.0),
            MagneticField::TorusBumps { base, bumps } => *base == 0.0 && bumps.iter().all(|b| b.amplitude == 0.0),
            MagneticField::SphereAffine { constant, height } => *constant == 0.0 && *height == 0.0,
            MagneticField::Grid(_) => false,
        }
    }

    pub fn constant_value(&self) -> Option<f64> {
        match self {
            MagneticField::Constant(c) => Some(*c),
            MagneticField::TorusSeries(s) if s.terms.is_empty() => Some(s.constant),
            MagneticField::TorusBumps { base, bumps } if bumps.is_empty() => Some(*base),
            MagneticField::SphereAffine { constant, height } if *height == 0.0 => Some(*constant),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MagneticSystem {
    pub surface: SurfaceModel,
    pub field: MagneticField,
    flux: OnceLock<std::result::Result<f64, Error>>,
}

impl MagneticSystem {
    pub fn new(surface: SurfaceModel, field: MagneticField) -> Result<Self> {
        let compatible = match (&field, &surface) {
            (MagneticField::Constant(_), _) => true,
            (MagneticField::TorusSeries(_) | MagneticField::TorusBumps { .. }, s) => s.is_torus(),
            (MagneticField::Grid(g), s) => s.periods() == Some(g.periods()),
            (MagneticField::SphereAffine { .. }, SurfaceModel::RoundSphere) => true,
            _ => false,
        };
        if !compatible {
            return Err(Error::InvalidParameter(format!("field {:?} is not defined on {:?}", field_name(&field), surface.kind())));
        }
        Ok(Self { surface, field, flux: OnceLock::new() })
    }

    /// Homogeneous system `σ = c·μ`.
    pub fn homogeneous(surface: SurfaceModel, c: f64) -> Self {
        Self { surface, field: MagneticField::Constant(c), flux: OnceLock::new() }
    }

    pub fn f_at(&self, p: &ChartPoint) -> Result<f64> {
        self.surface.check_domain(p)?;
        Ok(self.f_unchecked(p))
    }

    pub(crate) fn f_unchecked(&self, p: &ChartPoint) -> f64 {
        match &self.field {
            MagneticField::Constant(c) => *c,
            MagneticField::TorusSeries(s) => {
                let (lx, ly) = self.surface.periods().unwrap_or((1.0, 1.0));
                s.jet(p.u, p.v, lx, ly).value
            }
            MagneticField::TorusBumps { base, bumps } => {
                let (lx, ly) = self.surface.periods().unwrap_or((1.0, 1.0));
                base + bumps.iter().map(|b| b.value(p.u, p.v, lx, ly)).sum::<f64>()
            }
            MagneticField::SphereAffine { constant, height } => constant + height * sphere_embed(p)[2],
            MagneticField::Grid(g) => g.eval(p.u, p.v),
        }
    }

    /// `f·√det g` — the density of `σ` against `du dv`.
    pub fn sigma_density(&self, p: &ChartPoint) -> Result<f64> {
        let l = self.surface.scale_at(p)?;
        Ok(self.f_unchecked(p) * l * l)
    }

    /// `[σ] = ∫_M f μ`, cached at the default resolution.
    pub fn flux(&self) -> Result<f64> {
        self.flux.get_or_init(|| flux_total(self, DEFAULT_FLUX_RESOLUTION, Execution::default())).clone()
    }

    pub fn sup_abs_f(&self) -> f64 {
        match &self.field {
            MagneticField::Constant(c) => c.abs(),
            MagneticField::SphereAffine { constant, height } => constant.abs() + height.abs(),
            _ => {
                let Some((lx, ly)) = self.surface.periods() else { return f64::NAN };
                let n = 256;
                let mut m: f64 = 0.0;
                for j in 0..n {
                    for i in 0..n {
                        let p = ChartPoint::plane(lx * i as f64 / n as f64, ly * j as f64 / n as f64);
                        m = m.max(self.f_unchecked(&p).abs());
                    }
                }
                m
            }
        }
    }
}

fn field_name(f: &MagneticField) -> &'static str {
    match f {
        MagneticField::Constant(_) => "constant",
        MagneticField::TorusSeries(_) => "torus series",
        MagneticField::TorusBumps { .. } => "torus bumps",
        MagneticField::SphereAffine { .. } => "sphere affine",
        MagneticField::Grid(_) => "grid",
    }
}

/// `∫_M f μ` on the fundamental-domain quadrature of the surface at
/// `resolution`.
pub fn flux_total(system: &MagneticSystem, resolution: usize, exec: Execution) -> Result<f64> {
    if let (Some(c), Ok(inv)) = (system.field.constant_value(), system.surface.surface_invariants()) {
        if !matches!(system.surface, SurfaceModel::ConformalTorus { .. }) {
            return Ok(c * inv.area);
        }
    }
    let rule = system.surface.area_rule(resolution)?;
    Ok(exec.sum(rule.len(), |i| {
        let p = &rule.points[i];
        rule.weights[i] * system.sigma_density(p).unwrap_or(f64::NAN)
    }))
}

/// Where a primitive is requested.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrimitiveRegion {
    /// A simply connected piece of one chart.
    Chart { chart: u8 },
    /// The whole torus (exact fields only), with harmonic part `c₁dx + c₂dy`.
    Torus { c1: f64, c2: f64 },
}

/// A 1-form `θ` with `dθ = σ` on its region.
#[derive(Debug, Clone)]
pub enum LocalPrimitive {
    Zero {
        c1: f64,
        c2: f64,
    },
    /// `θ = −(∫_{v₀}^{v} f̃(u, t) dt) du`, `f̃ = f·√det g`.
    ChartLine {
        chart: u8,
        v0: f64,
    },
    /// `θ = 2c(−v du + u dv)/(1 + u² + v²)` for `σ = c·μ` on a sphere chart.
    SphereConstant {
        c: f64,
    },
    /// `θ = c du / v` for `σ = c·μ` on the half-plane.
    HyperbolicConstant {
        c: f64,
    },
    /// Co-gradient of the Poisson potential of a trigonometric field.
    TorusSeries {
        series: TrigSeries,
        lx: f64,
        ly: f64,
        c1: f64,
        c2: f64,
    },
    /// Spectral primitive sampled on a grid and interpolated.
    TorusSpectral {
        theta_x: Arc<PeriodicSpline2>,
        theta_y: Arc<PeriodicSpline2>,
        c1: f64,
        c2: f64,
    },
    /// `base + dg` for a periodic spline potential `g`.
    Shifted {
        base: Box<LocalPrimitive>,
        potential: Arc<PeriodicSpline2>,
    },
}

impl LocalPrimitive {
    /// Components `(θ_u, θ_v)` at `p`.
    pub fn eval(&self, system: &MagneticSystem, p: &ChartPoint) -> Vec2 {
        match self {
            LocalPrimitive::Zero { c1, c2 } => [*c1, *c2],
            LocalPrimitive::ChartLine { chart, v0 } => {
                let q = ChartPoint::new(*chart, p.u, p.v);
                [-line_integral_v(system, q, *v0), 0.0]
            }
            LocalPrimitive::SphereConstant { c } => {
                let q = 2.0 * c / (1.0 + p.u * p.u + p.v * p.v);
                [-q * p.v, q * p.u]
            }
            LocalPrimitive::HyperbolicConstant { c } => [c / p.v, 0.0],
            LocalPrimitive::TorusSeries { series, lx, ly, c1, c2 } => {
                let mut th = [*c1, *c2];
                let tau = 2.0 * PI;
                for t in &series.terms {
                    if t.m == 0 && t.n == 0 {
                        continue;
                    }
                    let kx = tau * t.m as f64 / lx;
                    let ky = tau * t.n as f64 / ly;
                    let k2 = kx * kx + ky * ky;
                    let (s, c) = (kx * p.u + ky * p.v).sin_cos();
                    // potential u = −(a cos + b sin)/|k|², θ = (−u_y, u_x)
                    let du = (t.a * s - t.b * c) / k2;
                    th[0] -= ky * du;
                    th[1] += kx * du;
                }
                th
            }
            LocalPrimitive::TorusSpectral { theta_x, theta_y, c1, c2 } => [theta_x.eval(p.u, p.v) + c1, theta_y.eval(p.u, p.v) + c2],
            LocalPrimitive::Shifted { base, potential } => {
                let b = base.eval(system, p);
                let g = potential.jet(p.u, p.v);
                [b[0] + g.dx, b[1] + g.dy]
            }
        }
    }

    /// `θ(w)` at `p`.
    pub fn apply(&self, system: &MagneticSystem, p: &ChartPoint, w: Vec2) -> f64 {
        let th = self.eval(system, p);
        th[0] * w[0] + th[1] * w[1]
    }

    /// `∫_a^b θ` along the chart segment from `a` to `b` (Gauss–Legendre).
    pub fn segment_integral(&self, system: &MagneticSystem, a: &ChartPoint, b: &ChartPoint, nodes: &[(f64, f64)]) -> f64 {
        let d = [b.u - a.u, b.v - a.v];
        nodes.iter().map(|&(t, w)| w * self.apply(system, &a.offset([t * d[0], t * d[1]]), d)).sum()
    }

    pub fn harmonic_part(&self) -> (f64, f64) {
        match self {
            LocalPrimitive::Zero { c1, c2 } | LocalPrimitive::TorusSeries { c1, c2, .. } | LocalPrimitive::TorusSpectral { c1, c2, .. } => {
                (*c1, *c2)
            }
            LocalPrimitive::Shifted { base, .. } => base.harmonic_part(),
            _ => (0.0, 0.0),
        }
    }
}

fn line_integral_v(system: &MagneticSystem, p: ChartPoint, v0: f64) -> f64 {
    let span = p.v - v0;
    if span == 0.0 {
        return 0.0;
    }
    let pieces = (span.abs() / 0.25).ceil().max(1.0) as usize;
    let nodes = line_nodes();
    let h = span / pieces as f64;
    let mut acc = 0.0;
    for k in 0..pieces {
        let start = v0 + k as f64 * h;
        for &(t, w) in nodes {
            let q = ChartPoint::new(p.chart, p.u, start + t * h);
            acc += w * h * system.sigma_density(&q).unwrap_or(f64::NAN);
        }
    }
    acc
}

fn line_nodes() -> &'static [(f64, f64)] {
    static NODES: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    NODES.get_or_init(|| gauss_legendre_unit(16))
}

/// Build a primitive of `σ` on `region`.
pub fn local_primitive(system: &MagneticSystem, region: PrimitiveRegion) -> Result<LocalPrimitive> {
    local_primitive_with_grid(system, region, DEFAULT_SPECTRAL_GRID)
}

pub fn local_primitive_with_grid(system: &MagneticSystem, region: PrimitiveRegion, grid: usize) -> Result<LocalPrimitive> {
    match region {
        PrimitiveRegion::Chart { chart } => {
            if system.field.is_identically_zero() {
                return Ok(LocalPrimitive::Zero { c1: 0.0, c2: 0.0 });
            }
            match (&system.surface, system.field.constant_value()) {
                (SurfaceModel::RoundSphere, Some(c)) => Ok(LocalPrimitive::SphereConstant { c }),
                (SurfaceModel::HyperbolicPlane { .. }, Some(c)) => Ok(LocalPrimitive::HyperbolicConstant { c }),
                (SurfaceModel::HyperbolicPlane { .. }, None) => Ok(LocalPrimitive::ChartLine { chart, v0: 1.0 }),
                _ => Ok(LocalPrimitive::ChartLine { chart, v0: 0.0 }),
            }
        }
        PrimitiveRegion::Torus { c1, c2 } => {
            let Some((lx, ly)) = system.surface.periods() else {
                return Err(Error::Unsupported("global primitives are built on tori only".into()));
            };
            let flux = system.flux()?;
            let scale = system.sup_abs_f().max(1.0) * lx * ly;
            if flux.abs() > 1e-9 * scale {
                return Err(Error::NoGlobalPrimitive { flux });
            }
            if system.field.is_identically_zero() {
                return Ok(LocalPrimitive::Zero { c1, c2 });
            }
            match (&system.field, &system.surface) {
                (MagneticField::TorusSeries(series), SurfaceModel::FlatTorus { .. }) => {
                    Ok(LocalPrimitive::TorusSeries { series: series.clone(), lx, ly, c1, c2 })
                }
                _ => {
                    let (tx, ty) = spectral_primitive(system, grid)?;
                    Ok(LocalPrimitive::TorusSpectral { theta_x: Arc::new(tx), theta_y: Arc::new(ty), c1, c2 })
                }
            }
        }
    }
}

/// Samples `f̃` on an `n × n` torus grid, solves `Δu = f̃` spectrally and
/// returns interpolants of `θ = (−u_y, u_x)`.
fn spectral_primitive(system: &MagneticSystem, n: usize) -> Result<(PeriodicSpline2, PeriodicSpline2)> {
    let (lx, ly) = system.surface.periods().expect("torus");
    let samples = torus_samples(n, lx, ly, |p| system.sigma_density(p).unwrap_or(f64::NAN));
    let (tx, ty) = spectral_cogradient(&samples, n, lx, ly);
    Ok((PeriodicSpline2::new(n, n, lx, ly, &tx)?, PeriodicSpline2::new(n, n, lx, ly, &ty)?))
}

/// Row-major grid samples `h(i·lx/n, j·ly/n)`.
pub fn torus_samples<F: Fn(&ChartPoint) -> f64>(n: usize, lx: f64, ly: f64, h: F) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            out.push(h(&ChartPoint::plane(lx * i as f64 / n as f64, ly * j as f64 / n as f64)));
        }
    }
    out
}

/// Given grid samples of a mean-zero density `ρ`, return `(−u_y, u_x)`
/// sampled on the same grid, where `Δu = ρ`.
pub fn spectral_cogradient(rho: &[f64], n: usize, lx: f64, ly: f64) -> (Vec<f64>, Vec<f64>) {
    let mut hat: Vec<Complex64> = rho.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2(&mut hat, n, n, false);
    let mut gx = vec![Complex64::new(0.0, 0.0); n * n];
    let mut gy = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        for i in 0..n {
            let (Some(mi), Some(nj)) = (wavenumber(i, n), wavenumber(j, n)) else { continue };
            if mi == 0.0 && nj == 0.0 {
                continue;
            }
            let kx = 2.0 * PI * mi / lx;
            let ky = 2.0 * PI * nj / ly;
            let uhat = -hat[j * n + i] / (kx * kx + ky * ky);
            let ik = Complex64::new(0.0, 1.0);
            gx[j * n + i] = -ik * ky * uhat;
            gy[j * n + i] = ik * kx * uhat;
        }
    }
    fft2(&mut gx, n, n, true);
    fft2(&mut gy, n, n, true);
    (gx.iter().map(|c| c.re).collect(), gy.iter().map(|c| c.re).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StokesRule {
    /// One midpoint per edge, one centre value for the face: `O(h²)` error.
    Midpoint,
    /// Gauss–Legendre with the given number of nodes per direction.
    Gauss(usize),
}

/// `|∮_{∂Q} θ − ∫_Q σ| / area(Q)` over the coordinate square of side `h`
/// centred at `centre`.
pub fn stokes_residual(primitive: &LocalPrimitive, system: &MagneticSystem, centre: &ChartPoint, h: f64, rule: StokesRule) -> Result<f64> {
    let nodes = match rule {
        StokesRule::Midpoint => vec![(0.5, 1.0)],
        StokesRule::Gauss(n) => gauss_legendre_unit(n),
    };
    let c = |du: f64, dv: f64| centre.offset([du * h, dv * h]);
    let corners = [c(-0.5, -0.5), c(0.5, -0.5), c(0.5, 0.5), c(-0.5, 0.5)];
    let mut circulation = 0.0;
    for k in 0..4 {
        circulation += primitive.segment_integral(system, &corners[k], &corners[(k + 1) % 4], &nodes);
    }
    let mut face = 0.0;
    for &(a, wa) in &nodes {
        for &(b, wb) in &nodes {
            face += wa * wb * system.sigma_density(&c(a - 0.5, b - 0.5))?;
        }
    }
    face *= h * h;
    Ok((circulation - face).abs() / (h * h))
}

/// `s = 1/√(2k)`.
pub fn s_of_energy(k: f64) -> Result<f64> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::Domain(format!("energy must be positive, got {k}")));
    }
    Ok(1.0 / (2.0 * k).sqrt())
}

/// `k = 1/(2s²)`.
pub fn energy_of_s(s: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Domain(format!("strength must be positive, got {s}")));
    }
    Ok(0.5 / (s * s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::TrigTerm;
    use approx::assert_relative_eq;

    fn cos_field(amp: f64) -> MagneticSystem {
        MagneticSystem::new(
            SurfaceModel::unit_torus(),
            MagneticField::TorusSeries(TrigSeries { constant: 0.0, terms: vec![TrigTerm { m: 1, n: 0, a: amp, b: 0.0 }] }),
        )
        .unwrap()
    }

    #[test]
    fn flux_examples() {
        let sph = MagneticSystem::homogeneous(SurfaceModel::RoundSphere, 1.0);
        assert_relative_eq!(sph.flux().unwrap(), 4.0 * PI, max_relative = 1e-12);
        assert!(cos_field(1.0).flux().unwrap().abs() < 1e-14);
        let c = MagneticSystem::homogeneous(SurfaceModel::unit_torus(), 0.7);
        assert_relative_eq!(c.flux().unwrap(), 0.7);
        let bare = MagneticSystem::homogeneous(SurfaceModel::HyperbolicPlane { genus: None }, 1.0);
        assert!(matches!(bare.flux(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn sphere_affine_flux_by_quadrature() {
        // ∫(1 + 2Z)μ = 4π; the height term integrates to zero
        let s = MagneticSystem::new(SurfaceModel::RoundSphere, MagneticField::SphereAffine { constant: 1.0, height: 2.0 }).unwrap();
        assert_relative_eq!(s.flux().unwrap(), 4.0 * PI, max_relative = 1e-10);
    }

    #[test]
    fn bump_field_flux_is_refinement_stable() {
        let w = 1.0 / (4.0 * PI).sqrt();
        let s = MagneticSystem::new(
            SurfaceModel::unit_torus(),
            MagneticField::TorusBumps { base: 1.0, bumps: vec![Bump { x0: 0.5, y0: 0.5, amplitude: -2.0, width: w }] },
        )
        .unwrap();
        let a = flux_total(&s, 256, Execution::Sequential).unwrap();
        let b = flux_total(&s, 512, Execution::Parallel).unwrap();
        assert!((a - b).abs() < 1e-9);
        assert!(b.abs() < 1e-12, "mean-zero bump field flux {b}");
    }

    #[test]
    fn series_primitive_matches_closed_form() {
        let sys = cos_field(2.0 * PI);
        let th = local_primitive(&sys, PrimitiveRegion::Torus { c1: 0.0, c2: 0.0 }).unwrap();
        for &x in &[0.1, 0.37, 0.8] {
            let v = th.eval(&sys, &ChartPoint::plane(x, 0.3));
            assert!(v[0].abs() < 1e-15);
            assert_relative_eq!(v[1], (2.0 * PI * x).sin(), epsilon = 1e-14);
        }
    }

    #[test]
    fn zero_field_primitive_is_zero() {
        let sys = MagneticSystem::homogeneous(SurfaceModel::unit_torus(), 0.0);
        let th = local_primitive(&sys, PrimitiveRegion::Chart { chart: 0 }).unwrap();
        assert_eq!(th.eval(&sys, &ChartPoint::plane(0.2, 0.1)), [0.0, 0.0]);
    }

    #[test]
    fn nonexact_torus_has_no_global_primitive() {
        let sys = MagneticSystem::homogeneous(SurfaceModel::unit_torus(), 1.0);
        assert!(matches!(local_primitive(&sys, PrimitiveRegion::Torus { c1: 0.0, c2: 0.0 }), Err(Error::NoGlobalPrimitive { .. })));
    }

    #[test]
    fn sphere_chart_primitives_pass_stokes() {
        let sys = MagneticSystem::homogeneous(SurfaceModel::RoundSphere, 1.0);
        let closed = local_primitive(&sys, PrimitiveRegion::Chart { chart: 0 }).unwrap();
        let line = LocalPrimitive::ChartLine { chart: 0, v0: 0.0 };
        for centre in [ChartPoint::new(0, 0.3, -0.4), ChartPoint::new(0, -1.1, 0.9)] {
            for prim in [&closed, &line] {
                let r = stokes_residual(prim, &sys, &centre, 0.05, StokesRule::Gauss(8)).unwrap();
                assert!(r < 1e-8, "residual {r}");
            }
        }
    }

    #[test]
    fn midpoint_stokes_residual_is_second_order() {
        let sys = MagneticSystem::new(SurfaceModel::RoundSphere, MagneticField::SphereAffine { constant: 1.0, height: 0.5 }).unwrap();
        let prim = LocalPrimitive::ChartLine { chart: 0, v0: 0.0 };
        let c = ChartPoint::new(0, 0.4, 0.2);
        let r1 = stokes_residual(&prim, &sys, &c, 0.1, StokesRule::Midpoint).unwrap();
        let r2 = stokes_residual(&prim, &sys, &c, 0.05, StokesRule::Midpoint).unwrap();
        let ratio = r1 / r2;
        assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
    }

    #[test]
    fn spectral_primitive_of_bump_field() {
        let w = 1.0 / (4.0 * PI).sqrt();
        let sys = MagneticSystem::new(
            SurfaceModel::unit_torus(),
            MagneticField::TorusBumps { base: 1.0, bumps: vec![Bump { x0: 0.5, y0: 0.5, amplitude: -2.0, width: w }] },
        )
        .unwrap();
        let th = local_primitive(&sys, PrimitiveRegion::Torus { c1: 0.1, c2: -0.2 }).unwrap();
        for centre in [ChartPoint::plane(0.5, 0.5), ChartPoint::plane(0.1, 0.77)] {
            let r = stokes_residual(&th, &sys, &centre, 0.02, StokesRule::Gauss(8)).unwrap();
            assert!(r < 1e-6, "residual {r}");
        }
    }

    #[test]
    fn hyperbolic_constant_primitive() {
        let sys = MagneticSystem::homogeneous(SurfaceModel::HyperbolicPlane { genus: None }, 1.0);
        let th = local_primitive(&sys, PrimitiveRegion::Chart { chart: 0 }).unwrap();
        let r = stokes_residual(&th, &sys, &ChartPoint::plane(0.3, 0.6), 0.05, StokesRule::Gauss(10)).unwrap();
        assert!(r < 1e-10);
    }

    #[test]
    fn rescaling_examples() {
        assert_eq!(s_of_energy(0.5).unwrap(), 1.0);
        assert_relative_eq!(s_of_energy(0.125).unwrap(), 2.0);
        assert_eq!(energy_of_s(1.0).unwrap(), 0.5);
        assert!(s_of_energy(0.0).is_err());
        assert!(energy_of_s(-1.0).is_err());
    }

    #[test]
    fn incompatible_fields_are_rejected() {
        assert!(MagneticSystem::new(SurfaceModel::RoundSphere, MagneticField::TorusSeries(TrigSeries::constant(1.0))).is_err());
    }
}
