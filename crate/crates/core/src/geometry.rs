//! Surface models. Every supported metric is conformal to the chart
//! coordinates, `g = e^{2φ}(du² + dv²)`, which keeps the connection, the
//! curvature and the complex structure in closed form.

use std::f64::consts::{LN_2, PI};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{gauss_legendre_unit, Jet2, PeriodicSpline2, TrigSeries};

pub type Vec2 = [f64; 2];

/// Smallest admissible height in the hyperbolic upper half-plane.
pub const HYPERBOLIC_FLOOR: f64 = 1e-12;

/// Radius beyond which a sphere state is re-expressed in the opposite chart.
pub const SPHERE_CHART_SWITCH: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChartPoint {
    pub chart: u8,
    pub u: f64,
    pub v: f64,
}

impl ChartPoint {
    pub fn new(chart: u8, u: f64, v: f64) -> Self {
        Self { chart, u, v }
    }

    pub fn plane(u: f64, v: f64) -> Self {
        Self { chart: 0, u, v }
    }

    pub fn coords(&self) -> Vec2 {
        [self.u, self.v]
    }

    pub fn offset(&self, d: Vec2) -> Self {
        Self { chart: self.chart, u: self.u + d[0], v: self.v + d[1] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SurfaceKind {
    RoundSphere,
    FlatTorus,
    HyperbolicPlane,
    ConformalTorus,
}

/// Log-conformal factor `φ` of a conformal torus, `g = e^{2φ}δ`.
#[derive(Debug, Clone)]
pub enum ConformalFactor {
    Series(TrigSeries),
    Grid(Arc<PeriodicSpline2>),
}

#[derive(Debug, Clone)]
pub enum SurfaceModel {
    RoundSphere,
    FlatTorus {
        lx: f64,
        ly: f64,
    },
    /// Upper half-plane; `genus` declares a compact quotient for area and
    /// Euler-characteristic bookkeeping only.
    HyperbolicPlane {
        genus: Option<u32>,
    },
    ConformalTorus {
        lx: f64,
        ly: f64,
        factor: ConformalFactor,
    },
}

/// Pointwise metric data in chart coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricData {
    pub g: [[f64; 2]; 2],
    /// `christoffel[k][i][j] = Γ^k_{ij}`
    pub christoffel: [[[f64; 2]; 2]; 2],
    pub curvature: f64,
    pub mu_density: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceInvariants {
    pub area: f64,
    pub euler_characteristic: i32,
}

/// Quadrature rule over a fundamental domain: `∫_M h μ ≈ Σ wᵢ·h(pᵢ)·μ(pᵢ)`,
/// with `wᵢ` coordinate (Lebesgue) weights.
#[derive(Debug, Clone, Default)]
pub struct AreaRule {
    pub points: Vec<ChartPoint>,
    pub weights: Vec<f64>,
}

impl AreaRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl SurfaceModel {
    pub fn unit_torus() -> Self {
        SurfaceModel::FlatTorus { lx: 1.0, ly: 1.0 }
    }

    pub fn hyperbolic_genus(h: u32) -> Self {
        SurfaceModel::HyperbolicPlane { genus: Some(h) }
    }

    pub fn kind(&self) -> SurfaceKind {
        match self {
            SurfaceModel::RoundSphere => SurfaceKind::RoundSphere,
            SurfaceModel::FlatTorus { .. } => SurfaceKind::FlatTorus,
            SurfaceModel::HyperbolicPlane { .. } => SurfaceKind::HyperbolicPlane,
            SurfaceModel::ConformalTorus { .. } => SurfaceKind::ConformalTorus,
        }
    }

    /// Lattice periods of torus models.
    pub fn periods(&self) -> Option<(f64, f64)> {
        match self {
            SurfaceModel::FlatTorus { lx, ly } | SurfaceModel::ConformalTorus { lx, ly, .. } => Some((*lx, *ly)),
            _ => None,
        }
    }

    pub fn is_torus(&self) -> bool {
        self.periods().is_some()
    }

    pub fn check_domain(&self, p: &ChartPoint) -> Result<()> {
        if !p.u.is_finite() || !p.v.is_finite() {
            return Err(Error::Domain(format!("non-finite chart point ({}, {})", p.u, p.v)));
        }
        match self {
            SurfaceModel::RoundSphere if p.chart > 1 => Err(Error::Domain(format!("sphere has charts 0 and 1, got {}", p.chart))),
            SurfaceModel::HyperbolicPlane { .. } if p.v < HYPERBOLIC_FLOOR => {
                Err(Error::Domain(format!("hyperbolic point below the floor: y = {}", p.v)))
            }
            _ => Ok(()),
        }
    }

    /// Jet of the log-conformal factor `φ` at `p`.
    pub fn conformal_at(&self, p: &ChartPoint) -> Result<Jet2> {
        self.check_domain(p)?;
        Ok(match self {
            SurfaceModel::RoundSphere => {
                let q = 1.0 + p.u * p.u + p.v * p.v;
                let (u, v) = (p.u, p.v);
                Jet2 {
                    value: LN_2 - q.ln(),
                    dx: -2.0 * u / q,
                    dy: -2.0 * v / q,
                    dxx: -2.0 / q + 4.0 * u * u / (q * q),
                    dxy: 4.0 * u * v / (q * q),
                    dyy: -2.0 / q + 4.0 * v * v / (q * q),
                }
            }
            SurfaceModel::FlatTorus { .. } => Jet2::default(),
            SurfaceModel::HyperbolicPlane { .. } => Jet2 { value: -p.v.ln(), dy: -1.0 / p.v, dyy: 1.0 / (p.v * p.v), ..Jet2::default() },
            SurfaceModel::ConformalTorus { lx, ly, factor } => match factor {
                ConformalFactor::Series(s) => s.jet(p.u, p.v, *lx, *ly),
                ConformalFactor::Grid(g) => g.jet(p.u, p.v),
            },
        })
    }

    /// Conformal scale `λ = e^φ`, so `|w|_g = λ·|w|`.
    pub fn scale_at(&self, p: &ChartPoint) -> Result<f64> {
        match self {
            SurfaceModel::RoundSphere => {
                self.check_domain(p)?;
                Ok(2.0 / (1.0 + p.u * p.u + p.v * p.v))
            }
            SurfaceModel::FlatTorus { .. } => {
                self.check_domain(p)?;
                Ok(1.0)
            }
            SurfaceModel::HyperbolicPlane { .. } => {
                self.check_domain(p)?;
                Ok(1.0 / p.v)
            }
            SurfaceModel::ConformalTorus { .. } => Ok(self.conformal_at(p)?.value.exp()),
        }
    }

    pub fn metric_at(&self, p: &ChartPoint) -> Result<MetricData> {
        let phi = self.conformal_at(p)?;
        let l2 = (2.0 * phi.value).exp();
        let (px, py) = (phi.dx, phi.dy);
        let curvature = match self {
            SurfaceModel::RoundSphere => 1.0,
            SurfaceModel::FlatTorus { .. } => 0.0,
            SurfaceModel::HyperbolicPlane { .. } => -1.0,
            SurfaceModel::ConformalTorus { .. } => -(phi.dxx + phi.dyy) / l2,
        };
        Ok(MetricData { g: [[l2, 0.0], [0.0, l2]], christoffel: [[[px, py], [py, -px]], [[-py, px], [px, py]]], curvature, mu_density: l2 })
    }

    /// Metric inner product at `p`.
    pub fn inner(&self, p: &ChartPoint, a: Vec2, b: Vec2) -> Result<f64> {
        let l = self.scale_at(p)?;
        Ok(l * l * (a[0] * b[0] + a[1] * b[1]))
    }

    pub fn norm(&self, p: &ChartPoint, w: Vec2) -> Result<f64> {
        Ok(self.scale_at(p)? * w[0].hypot(w[1]))
    }

    /// Fibrewise rotation by a quarter turn. In conformal charts this is the
    /// Euclidean rotation.
    pub fn rotate90(&self, p: &ChartPoint, w: Vec2) -> Result<Vec2> {
        self.check_domain(p)?;
        Ok(rotate90(w))
    }

    /// `κ = g(∇_γ̇γ̇, ıγ̇)/|γ̇|³` from chart derivatives of a curve.
    pub fn geodesic_curvature_of(&self, q: &ChartPoint, qdot: Vec2, qddot: Vec2) -> Result<f64> {
        let speed = qdot[0].hypot(qdot[1]);
        if speed == 0.0 || !speed.is_finite() {
            return Err(Error::Degenerate("zero velocity has no curvature".into()));
        }
        let phi = self.conformal_at(q)?;
        let acc = covariant_acceleration(&phi, qdot, qddot);
        let j = rotate90(qdot);
        Ok((acc[0] * j[0] + acc[1] * j[1]) / (phi.value.exp() * speed.powi(3)))
    }

    /// Re-express a sphere state in the chart where it sits comfortably; a
    /// no-op for every other model.
    pub fn normalize_chart(&self, p: ChartPoint, w: Vec2) -> (ChartPoint, Vec2) {
        if let SurfaceModel::RoundSphere = self {
            if p.u.hypot(p.v) > SPHERE_CHART_SWITCH {
                return sphere_switch_chart(p, w);
            }
        }
        (p, w)
    }

    pub fn surface_invariants(&self) -> Result<SurfaceInvariants> {
        let euler_characteristic = match self {
            SurfaceModel::RoundSphere => 2,
            SurfaceModel::FlatTorus { .. } | SurfaceModel::ConformalTorus { .. } => 0,
            SurfaceModel::HyperbolicPlane { genus: Some(h) } if *h >= 2 => 2 - 2 * *h as i32,
            SurfaceModel::HyperbolicPlane { .. } => {
                return Err(Error::Unsupported("area of the bare hyperbolic plane; declare a quotient genus >= 2".into()))
            }
        };
        let area = match self {
            SurfaceModel::FlatTorus { lx, ly } => lx * ly,
            _ => {
                let rule = self.area_rule(DEFAULT_AREA_RESOLUTION)?;
                let mut area = 0.0;
                for (p, w) in rule.points.iter().zip(&rule.weights) {
                    area += w * self.metric_at(p)?.mu_density;
                }
                area
            }
        };
        Ok(SurfaceInvariants { area, euler_characteristic })
    }

    /// Quadrature rule over a fundamental domain at the given resolution.
    ///
    /// * torus models: `n × n` composite midpoint grid over the lattice cell;
    /// * sphere: the unit disc of each stereographic chart, Gauss–Legendre in
    ///   the radius and midpoint in the angle (`n/2` × `n` nodes per disc);
    /// * genus-`h` hyperbolic quotient: the regular `4h`-gon with interior
    ///   angles `π/2h` centred at `i`, in geodesic polar coordinates.
    pub fn area_rule(&self, n: usize) -> Result<AreaRule> {
        let n = n.max(4);
        match self {
            SurfaceModel::FlatTorus { lx, ly } | SurfaceModel::ConformalTorus { lx, ly, .. } => {
                let (hx, hy) = (lx / n as f64, ly / n as f64);
                let mut rule = AreaRule::default();
                for j in 0..n {
                    for i in 0..n {
                        rule.points.push(ChartPoint::plane((i as f64 + 0.5) * hx, (j as f64 + 0.5) * hy));
                        rule.weights.push(hx * hy);
                    }
                }
                Ok(rule)
            }
            SurfaceModel::RoundSphere => {
                let radial = gauss_legendre_unit(n / 2);
                let mut rule = AreaRule::default();
                for chart in 0..2u8 {
                    for &(r, wr) in &radial {
                        for k in 0..n {
                            let a = 2.0 * PI * (k as f64 + 0.5) / n as f64;
                            rule.points.push(ChartPoint::new(chart, r * a.cos(), r * a.sin()));
                            rule.weights.push(wr * r * 2.0 * PI / n as f64);
                        }
                    }
                }
                Ok(rule)
            }
            SurfaceModel::HyperbolicPlane { genus: Some(h) } if *h >= 2 => Ok(hyperbolic_polygon_rule(*h, n)),
            SurfaceModel::HyperbolicPlane { .. } => {
                Err(Error::Unsupported("quadrature on the bare hyperbolic plane; declare a quotient genus >= 2".into()))
            }
        }
    }

    /// Riemannian distance for the homogeneous models (lifted on the torus).
    pub fn distance(&self, p: &ChartPoint, q: &ChartPoint) -> Result<f64> {
        self.check_domain(p)?;
        self.check_domain(q)?;
        match self {
            SurfaceModel::RoundSphere => {
                let a = sphere_embed(p);
                let b = sphere_embed(q);
                let cross = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
                let s = (cross[0].powi(2) + cross[1].powi(2) + cross[2].powi(2)).sqrt();
                Ok(s.atan2(a[0] * b[0] + a[1] * b[1] + a[2] * b[2]))
            }
            SurfaceModel::FlatTorus { .. } => Ok((p.u - q.u).hypot(p.v - q.v)),
            SurfaceModel::HyperbolicPlane { .. } => {
                let d2 = (p.u - q.u).powi(2) + (p.v - q.v).powi(2);
                Ok((1.0 + d2 / (2.0 * p.v * q.v)).acosh())
            }
            SurfaceModel::ConformalTorus { .. } => Err(Error::Unsupported("closed-form distance on a conformal torus".into())),
        }
    }
}

pub const DEFAULT_AREA_RESOLUTION: usize = 256;

/// Euclidean quarter turn `(w₁, w₂) ↦ (−w₂, w₁)`.
#[inline]
pub fn rotate90(w: Vec2) -> Vec2 {
    [-w[1], w[0]]
}

/// `q̈ + Γ(q̇, q̇)` for a conformal metric with log factor jet `phi`.
#[inline]
pub fn covariant_acceleration(phi: &Jet2, qdot: Vec2, qddot: Vec2) -> Vec2 {
    let (px, py) = (phi.dx, phi.dy);
    let (a, b) = (qdot[0], qdot[1]);
    [qddot[0] + px * a * a + 2.0 * py * a * b - px * b * b, qddot[1] - py * a * a + 2.0 * px * a * b + py * b * b]
}

/// Point of the unit sphere in ℝ³ for a stereographic chart point.
/// Chart 0 projects from the north pole, chart 1 from the south pole with
/// the orientation-preserving coordinate `z' = 1/z`.
pub fn sphere_embed(p: &ChartPoint) -> [f64; 3] {
    let r2 = p.u * p.u + p.v * p.v;
    let q = 1.0 + r2;
    if p.chart == 0 {
        [2.0 * p.u / q, 2.0 * p.v / q, (r2 - 1.0) / q]
    } else {
        [2.0 * p.u / q, -2.0 * p.v / q, (1.0 - r2) / q]
    }
}

/// Inverse of [`sphere_embed`] in the requested chart.
pub fn sphere_chart_of(x: [f64; 3], chart: u8) -> ChartPoint {
    if chart == 0 {
        let d = 1.0 - x[2];
        ChartPoint::new(0, x[0] / d, x[1] / d)
    } else {
        let d = 1.0 + x[2];
        ChartPoint::new(1, x[0] / d, -x[1] / d)
    }
}

/// Chart of the sphere better suited for an embedded point (the one whose
/// projection pole is farther away).
pub fn sphere_best_chart(x: [f64; 3]) -> ChartPoint {
    sphere_chart_of(x, if x[2] <= 0.0 { 0 } else { 1 })
}

/// Transition `z ↦ 1/z`, velocity `w ↦ −w/z²`.
pub fn sphere_switch_chart(p: ChartPoint, w: Vec2) -> (ChartPoint, Vec2) {
    let r2 = p.u * p.u + p.v * p.v;
    let q = ChartPoint::new(1 - p.chart.min(1), p.u / r2, -p.v / r2);
    // z² = (u² − v²) + 2iuv ; −w/z² = −w·conj(z²)/|z|⁴
    let (zr, zi) = (p.u * p.u - p.v * p.v, 2.0 * p.u * p.v);
    let d = r2 * r2;
    let wr = -(w[0] * zr + w[1] * zi) / d;
    let wi = -(w[1] * zr - w[0] * zi) / d;
    (q, [wr, wi])
}

/// Regular `4h`-gon quadrature in geodesic polar coordinates about the
/// centre, mapped to the upper half-plane by the Cayley transform.
fn hyperbolic_polygon_rule(h: u32, n: usize) -> AreaRule {
    let sides = 4 * h as usize;
    let interior = PI / (2.0 * h as f64);
    let apothem = ((interior / 2.0).cos() / (PI / sides as f64).sin()).acosh();
    let tanh_d = apothem.tanh();
    let nodes = gauss_legendre_unit((n / 4).max(8));
    let half = PI / sides as f64;
    let mut rule = AreaRule::default();
    for side in 0..sides {
        let mid = 2.0 * half * side as f64;
        // split each sector at its midpoint so the edge profile stays smooth per piece
        for (lo, hi) in [(mid - half, mid), (mid, mid + half)] {
            for &(ta, wa) in &nodes {
                let ang = lo + (hi - lo) * ta;
                let rho_edge = (tanh_d / (ang - mid).cos()).atanh();
                for &(tr, wr) in &nodes {
                    let rho = rho_edge * tr;
                    let hyper_weight = (hi - lo) * wa * rho_edge * wr * rho.sinh();
                    let rr = (rho / 2.0).tanh();
                    let (wx, wy) = (rr * ang.cos(), rr * ang.sin());
                    // z = i(1 + w)/(1 − w)
                    let den = (1.0 - wx).powi(2) + wy * wy;
                    let x = -2.0 * wy / den;
                    let y = (1.0 - wx * wx - wy * wy) / den;
                    rule.points.push(ChartPoint::plane(x, y));
                    rule.weights.push(hyper_weight * y * y);
                }
            }
        }
    }
    rule
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn conformal_torus() -> SurfaceModel {
        SurfaceModel::ConformalTorus {
            lx: 1.0,
            ly: 1.0,
            factor: ConformalFactor::Series(TrigSeries {
                constant: 0.0,
                terms: vec![
                    crate::numerics::TrigTerm { m: 1, n: 0, a: 0.2, b: 0.0 },
                    crate::numerics::TrigTerm { m: 1, n: 1, a: 0.0, b: 0.1 },
                ],
            }),
        }
    }

    #[test]
    fn flat_torus_metric_is_euclidean() {
        let m = SurfaceModel::unit_torus().metric_at(&ChartPoint::plane(0.3, 0.7)).unwrap();
        assert_eq!(m.g, [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(m.curvature, 0.0);
        assert!(m.christoffel.iter().flatten().flatten().all(|&c| c == 0.0));
    }

    #[test]
    fn hyperbolic_christoffels_at_height_two() {
        let m = SurfaceModel::HyperbolicPlane { genus: None }.metric_at(&ChartPoint::plane(0.0, 2.0)).unwrap();
        assert_relative_eq!(m.g[0][0], 0.25);
        assert_relative_eq!(m.christoffel[0][0][1], -0.5);
        assert_relative_eq!(m.christoffel[1][0][0], 0.5);
        assert_relative_eq!(m.christoffel[1][1][1], -0.5);
        assert_eq!(m.curvature, -1.0);
    }

    #[test]
    fn hyperbolic_floor_is_a_domain_error() {
        let s = SurfaceModel::HyperbolicPlane { genus: None };
        assert!(matches!(s.metric_at(&ChartPoint::plane(0.0, 1e-13)), Err(Error::Domain(_))));
        assert!(matches!(s.metric_at(&ChartPoint::plane(0.0, -1.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn rotation_examples() {
        let t = SurfaceModel::unit_torus();
        assert_eq!(t.rotate90(&ChartPoint::plane(0.0, 0.0), [1.0, 0.0]).unwrap(), [0.0, 1.0]);
        let h = SurfaceModel::HyperbolicPlane { genus: None };
        assert_eq!(h.rotate90(&ChartPoint::plane(0.0, 1.0), [1.0, 0.0]).unwrap(), [0.0, 1.0]);
        assert_eq!(rotate90([0.0, 0.0]), [-0.0, 0.0]);
    }

    #[test]
    fn sphere_curvature_is_one_and_charts_agree() {
        let s = SurfaceModel::RoundSphere;
        for &(u, v) in &[(0.0, 0.0), (0.7, -1.3), (1.9, 0.2)] {
            let p = ChartPoint::new(0, u, v);
            let phi = s.conformal_at(&p).unwrap();
            let k = -(phi.dxx + phi.dyy) / (2.0 * phi.value).exp();
            assert_relative_eq!(k, 1.0, epsilon = 1e-13);
            let (q, _) = sphere_switch_chart(p, [1.0, 0.0]);
            let a = sphere_embed(&p);
            let b = sphere_embed(&q);
            if u != 0.0 || v != 0.0 {
                for i in 0..3 {
                    assert_relative_eq!(a[i], b[i], epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn chart_switch_preserves_metric_speed_and_round_trips() {
        let s = SurfaceModel::RoundSphere;
        let p = ChartPoint::new(0, 1.7, -1.2);
        let w = [0.3, 0.8];
        let (q, w2) = sphere_switch_chart(p, w);
        assert_relative_eq!(s.norm(&p, w).unwrap(), s.norm(&q, w2).unwrap(), epsilon = 1e-14);
        let (p2, w3) = sphere_switch_chart(q, w2);
        assert_eq!(p2.chart, 0);
        assert_relative_eq!(p2.u, p.u, epsilon = 1e-14);
        assert_relative_eq!(w3[1], w[1], epsilon = 1e-14);
        // pushforward of the velocity: compare with finite differences of the embedding
        let eps = 1e-7;
        let a = sphere_embed(&p.offset([eps * w[0], eps * w[1]]));
        let b = sphere_embed(&q.offset([eps * w2[0], eps * w2[1]]));
        for i in 0..3 {
            assert!((a[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn geodesic_curvature_of_circles() {
        // sphere: geodesic circle of radius r about the south pole is |z| = tan(r/2)
        let s = SurfaceModel::RoundSphere;
        let r = 0.9_f64;
        let rho = (r / 2.0).tan();
        let t = 0.4_f64;
        let q = ChartPoint::new(0, rho * t.cos(), rho * t.sin());
        let k = s.geodesic_curvature_of(&q, [-rho * t.sin(), rho * t.cos()], [-rho * t.cos(), -rho * t.sin()]).unwrap();
        assert_relative_eq!(k, 1.0 / r.tan(), epsilon = 1e-12);
        // hyperbolic: circle about i of radius r has Euclidean centre i·cosh r, radius sinh r
        let h = SurfaceModel::HyperbolicPlane { genus: None };
        let (c, rad) = (r.cosh(), r.sinh());
        let q = ChartPoint::plane(rad * t.cos(), c + rad * t.sin());
        let k = h.geodesic_curvature_of(&q, [-rad * t.sin(), rad * t.cos()], [-rad * t.cos(), -rad * t.sin()]).unwrap();
        assert_relative_eq!(k, 1.0 / r.tanh(), epsilon = 1e-12);
        // torus
        let f = SurfaceModel::unit_torus();
        let k = f.geodesic_curvature_of(&ChartPoint::plane(0.5, 0.0), [0.0, 0.5], [-0.5, 0.0]).unwrap();
        assert_relative_eq!(k, 2.0, epsilon = 1e-14);
        assert!(f.geodesic_curvature_of(&ChartPoint::plane(0.0, 0.0), [0.0, 0.0], [1.0, 0.0]).is_err());
    }

    #[test]
    fn invariants_and_gauss_bonnet() {
        let sph = SurfaceModel::RoundSphere.surface_invariants().unwrap();
        assert_relative_eq!(sph.area, 4.0 * PI, max_relative = 1e-12);
        assert_eq!(sph.euler_characteristic, 2);
        let tor = SurfaceModel::unit_torus().surface_invariants().unwrap();
        assert_eq!((tor.area, tor.euler_characteristic), (1.0, 0));
        let g2 = SurfaceModel::hyperbolic_genus(2).surface_invariants().unwrap();
        assert_relative_eq!(g2.area, 4.0 * PI, max_relative = 1e-10);
        assert_eq!(g2.euler_characteristic, -2);
        let g3 = SurfaceModel::hyperbolic_genus(3).surface_invariants().unwrap();
        assert_relative_eq!(g3.area, 8.0 * PI, max_relative = 1e-10);
        assert!(matches!(SurfaceModel::HyperbolicPlane { genus: None }.surface_invariants(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn conformal_torus_total_curvature_vanishes() {
        let s = conformal_torus();
        let rule = s.area_rule(128).unwrap();
        let mut total = 0.0;
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let m = s.metric_at(p).unwrap();
            total += w * m.curvature * m.mu_density;
        }
        assert!(total.abs() < 1e-12);
    }

    #[test]
    fn sphere_distance_matches_embedding_angle() {
        let s = SurfaceModel::RoundSphere;
        let south = ChartPoint::new(0, 0.0, 0.0);
        let north = ChartPoint::new(1, 0.0, 0.0);
        assert_relative_eq!(s.distance(&south, &north).unwrap(), PI, epsilon = 1e-15);
    }
}
