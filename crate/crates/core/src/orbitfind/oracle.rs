use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::TangentState;
use crate::error::{Error, Result};
use crate::geometry::{ChartPoint, SurfaceModel};
use crate::magnetic::energy_of_s;
use crate::orbitfind::action::DiscreteLoop;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HomogeneousKind {
    Sphere,
    Torus,
    Hyperbolic,
}

impl HomogeneousKind {
    pub fn of(surface: &SurfaceModel) -> Option<Self> {
        match surface {
            SurfaceModel::RoundSphere => Some(HomogeneousKind::Sphere),
            SurfaceModel::FlatTorus { .. } => Some(HomogeneousKind::Torus),
            SurfaceModel::HyperbolicPlane { .. } => Some(HomogeneousKind::Hyperbolic),
            SurfaceModel::ConformalTorus { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleAnswer {
    pub exists_contractible: bool,
    pub radius: Option<f64>,
    pub period: Option<f64>,
}

/// Closed-form contractible orbits of `σ = μ` on the constant-curvature models.
pub fn homogeneous_oracle(kind: HomogeneousKind, s: f64) -> Result<OracleAnswer> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Domain(format!("strength must be positive, got {s}")));
    }
    Ok(match kind {
        HomogeneousKind::Sphere => {
            OracleAnswer { exists_contractible: true, radius: Some((1.0 / s).atan()), period: Some(2.0 * PI * s / (s * s + 1.0).sqrt()) }
        }
        HomogeneousKind::Torus => OracleAnswer { exists_contractible: true, radius: Some(1.0 / s), period: Some(2.0 * PI) },
        HomogeneousKind::Hyperbolic if s > 1.0 => {
            OracleAnswer { exists_contractible: true, radius: Some((1.0 / s).atanh()), period: Some(2.0 * PI * s / (s * s - 1.0).sqrt()) }
        }
        HomogeneousKind::Hyperbolic => OracleAnswer { exists_contractible: false, radius: None, period: None },
    })
}

/// Chart description of the oracle circle: its Euclidean centre and radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleCircle {
    pub kind: HomogeneousKind,
    pub chart: u8,
    pub centre: [f64; 2],
    pub radius: f64,
    /// Metric speed `√(2k)`.
    pub speed: f64,
}

impl OracleCircle {
    pub fn point(&self, angle: f64) -> ChartPoint {
        ChartPoint::new(self.chart, self.centre[0] + self.radius * angle.cos(), self.centre[1] + self.radius * angle.sin())
    }

    /// Counter-clockwise state at `angle` with energy `k = 1/(2s²)`.
    pub fn state(&self, angle: f64) -> TangentState {
        let p = self.point(angle);
        let scale = match self.kind {
            HomogeneousKind::Sphere => 2.0 / (1.0 + p.u * p.u + p.v * p.v),
            HomogeneousKind::Torus => 1.0,
            HomogeneousKind::Hyperbolic => 1.0 / p.v,
        };
        let c = self.speed / scale;
        TangentState::new(p, [-c * angle.sin(), c * angle.cos()])
    }

    /// Geodesic radius of the circle.
    pub fn metric_radius(&self) -> f64 {
        match self.kind {
            HomogeneousKind::Sphere => 2.0 * self.radius.atan(),
            HomogeneousKind::Torus => self.radius,
            HomogeneousKind::Hyperbolic => self.radius.asinh(),
        }
    }

    /// `n` vertices at constant metric speed on the concentric circle of
    /// geodesic radius `radius_scale·r`, with period `length/speed`.
    ///
    /// Off-centre chart circles of the half-plane are not constant speed in
    /// the Euclidean angle, so there the points come from the disc model
    /// through the Cayley map.
    pub fn discrete_loop(&self, n: usize, radius_scale: f64) -> Result<DiscreteLoop> {
        let rho = radius_scale * self.metric_radius();
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::InvalidParameter(format!("radius scale must be positive, got {radius_scale}")));
        }
        let vertices = (0..n)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / n as f64;
                match self.kind {
                    HomogeneousKind::Sphere => {
                        let r = (rho / 2.0).tan();
                        ChartPoint::new(self.chart, r * a.cos(), r * a.sin())
                    }
                    HomogeneousKind::Torus => ChartPoint::new(self.chart, self.centre[0] + rho * a.cos(), self.centre[1] + rho * a.sin()),
                    HomogeneousKind::Hyperbolic => {
                        // z = i(1 + w)/(1 − w), w = t·e^{i(a − π/2)}
                        let t = (rho / 2.0).tanh();
                        let b = a - PI / 2.0;
                        let d = 1.0 - 2.0 * t * b.cos() + t * t;
                        ChartPoint::new(self.chart, -2.0 * t * b.sin() / d, (1.0 - t * t) / d)
                    }
                }
            })
            .collect();
        let mut lp = DiscreteLoop::new(vertices, 1.0)?;
        let surface = match self.kind {
            HomogeneousKind::Sphere => SurfaceModel::RoundSphere,
            HomogeneousKind::Torus => SurfaceModel::FlatTorus { lx: 1.0, ly: 1.0 },
            HomogeneousKind::Hyperbolic => SurfaceModel::HyperbolicPlane { genus: None },
        };
        lp.period = lp.length(&surface)? / self.speed;
        Ok(lp)
    }
}

/// The oracle circle of strength `s` for `σ = μ`, centred at the chart
/// origin (sphere), at `(0.5, 0.5)` (torus) or at `i` (hyperbolic).
///
/// Geodesic circles of all three models are Euclidean circles in the chart.
pub fn oracle_circle(kind: HomogeneousKind, s: f64) -> Result<OracleCircle> {
    let r = homogeneous_oracle(kind, s)?.radius.ok_or_else(|| Error::Domain(format!("no contractible orbit at s = {s}")))?;
    let speed = (2.0 * energy_of_s(s)?).sqrt();
    Ok(match kind {
        HomogeneousKind::Sphere => OracleCircle { kind, chart: 0, centre: [0.0, 0.0], radius: (r / 2.0).tan(), speed },
        HomogeneousKind::Torus => OracleCircle { kind, chart: 0, centre: [0.5, 0.5], radius: r, speed },
        // about i: Euclidean centre i·cosh r, radius sinh r
        HomogeneousKind::Hyperbolic => OracleCircle { kind, chart: 0, centre: [0.0, r.cosh()], radius: r.sinh(), speed },
    })
}
