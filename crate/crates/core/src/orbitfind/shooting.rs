use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    curvature_residual, energy_of, integrate, poincare_return, with_energy, Section, TangentState, Trajectory, DEFAULT_RETURN_DT,
};
use crate::error::{Error, Result};
use crate::geometry::{sphere_embed, sphere_switch_chart, ChartPoint, SurfaceModel, Vec2};
use crate::magnetic::{s_of_energy, MagneticSystem};

/// Free homotopy data of a closed orbit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Homotopy {
    Contractible,
    /// Lattice winding of a torus orbit.
    Winding(i64, i64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Orbit {
    pub trajectory: Trajectory,
    pub period: f64,
    pub energy: f64,
    pub s: f64,
    pub homotopy: Homotopy,
    /// `max |κ − s·f|` along the trajectory.
    pub curvature_residual: f64,
    /// Distance between the initial and the final state after one period.
    pub closure_gap: f64,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingParams {
    /// Newton stops once the update (or the residual) is below this.
    pub tol: f64,
    pub max_iter: usize,
    pub max_time: f64,
    pub dt: f64,
    /// Central-difference step for the Jacobian of the return map.
    pub fd_step: f64,
    /// Lattice translation expected after one period (torus lifts).
    pub shift: Vec2,
    /// Segment count for multiple shooting.
    pub segments: usize,
}

impl Default for ShootingParams {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 50, max_time: 100.0, dt: DEFAULT_RETURN_DT, fd_step: 1e-7, shift: [0.0, 0.0], segments: 16 }
    }
}

/// A section through `state`, transverse to its velocity.
pub fn section_through(state: &TangentState) -> Section {
    let axis = if state.v[0].abs() >= state.v[1].abs() { 0 } else { 1 };
    let value = if axis == 0 { state.q.u } else { state.q.v };
    Section { chart: state.q.chart, axis, value, direction: if state.v[axis] >= 0.0 { 1 } else { -1 } }
}

struct Reduced<'a> {
    system: &'a MagneticSystem,
    section: Section,
    k: f64,
}

impl Reduced<'_> {
    /// State on the section from `(other coordinate, velocity angle)`.
    fn state(&self, z: [f64; 2]) -> Result<TangentState> {
        let q = if self.section.axis == 0 {
            ChartPoint::new(self.section.chart, self.section.value, z[0])
        } else {
            ChartPoint::new(self.section.chart, z[0], self.section.value)
        };
        let c = (2.0 * self.k).sqrt() / self.system.surface.scale_at(&q)?;
        Ok(TangentState::new(q, [c * z[1].cos(), c * z[1].sin()]))
    }

    fn coords(&self, s: &TangentState) -> [f64; 2] {
        let other = if self.section.axis == 0 { s.q.v } else { s.q.u };
        [other, s.v[1].atan2(s.v[0])]
    }

    /// `P(z) − z − shift`, angle difference wrapped into `(−π, π]`.
    fn residual(&self, z: [f64; 2], params: &ShootingParams) -> Result<([f64; 2], f64)> {
        let start = self.state(z)?;
        let mut target = self.section;
        target.value += params.shift[self.section.axis];
        let crossing = poincare_return(self.system, &target, start, params.max_time, params.dt)?;
        let w = self.coords(&crossing.state);
        let other_shift = params.shift[1 - self.section.axis];
        Ok(([w[0] - z[0] - other_shift, wrap_angle(w[1] - z[1])], crossing.time))
    }
}

fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Newton iteration on the reduced return map at energy `k`.
pub fn shoot_periodic(system: &MagneticSystem, k: f64, seed: TangentState, section: &Section, params: &ShootingParams) -> Result<Orbit> {
    let s = s_of_energy(k)?;
    let seed = if (energy_of(system, &seed)? - k).abs() > 1e-9 { with_energy(system, seed, k)? } else { seed };
    let seed = TangentState::new(section.express(&system.surface, &seed).q, section.express(&system.surface, &seed).v);
    let red = Reduced { system, section: *section, k };
    let mut z = red.coords(&seed);
    let mut iterations = 0;
    let mut last_norm = f64::INFINITY;
    loop {
        let (r, _) = red.residual(z, params)?;
        let rnorm = r[0].hypot(r[1]);
        last_norm = last_norm.min(rnorm);
        if rnorm < params.tol {
            break;
        }
        if iterations >= params.max_iter {
            return Err(Error::NoConvergence { iterations, residual: rnorm });
        }
        iterations += 1;
        let h = params.fd_step;
        let mut jac = Matrix2::zeros();
        for c in 0..2 {
            let mut zp = z;
            let mut zm = z;
            zp[c] += h;
            zm[c] -= h;
            let (rp, _) = red.residual(zp, params)?;
            let (rm, _) = red.residual(zm, params)?;
            jac[(0, c)] = (rp[0] - rm[0]) / (2.0 * h);
            jac[(1, c)] = (rp[1] - rm[1]) / (2.0 * h);
        }
        let rhs = nalgebra::Vector2::new(r[0], r[1]);
        let step = jac.svd(true, true).pseudo_inverse(1e-10).map_err(|e| Error::Degenerate(e.to_string()))? * rhs;
        let dz = [-step[0], -step[1]];
        let dnorm = dz[0].hypot(dz[1]);
        if dnorm == 0.0 {
            return Err(Error::NoConvergence { iterations, residual: rnorm });
        }
        z = [z[0] + dz[0], z[1] + dz[1]];
        if dnorm < params.tol {
            break;
        }
    }
    finish_orbit(system, &red, z, s, iterations, params)
}

fn in_chart(surface: &SurfaceModel, chart: u8, state: TangentState) -> TangentState {
    if matches!(surface, SurfaceModel::RoundSphere) && state.q.chart != chart {
        let (q, v) = sphere_switch_chart(state.q, state.v);
        TangentState::new(q, v)
    } else {
        state
    }
}

/// Nodes of a multiple-shooting problem: node 0 lives on the section and
/// contributes `(other coordinate, angle)`, later nodes `(u, v, angle)`,
/// and the common segment duration comes last.
struct Segments<'a> {
    red: Reduced<'a>,
    charts: Vec<u8>,
    /// Integration step, refitted so each segment is a whole number of steps.
    dt: f64,
}

impl Segments<'_> {
    fn m(&self) -> usize {
        self.charts.len()
    }

    fn node(&self, x: &[f64], j: usize) -> Result<TangentState> {
        if j == 0 {
            return self.red.state([x[0], x[1]]);
        }
        let i = 3 * j - 1;
        let q = ChartPoint::new(self.charts[j], x[i], x[i + 1]);
        let c = (2.0 * self.red.k).sqrt() / self.red.system.surface.scale_at(&q)?;
        Ok(TangentState::new(q, [c * x[i + 2].cos(), c * x[i + 2].sin()]))
    }

    fn steps(&self, tau: f64) -> Result<(usize, f64)> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::Degenerate(format!("segment duration {tau}")));
        }
        let n = (tau / self.dt).ceil().max(1.0) as usize;
        Ok((n, tau / n as f64))
    }

    fn flow(&self, x: &[f64], j: usize, tau: f64) -> Result<Trajectory> {
        let (_, h) = self.steps(tau)?;
        let traj = integrate(self.red.system, self.node(x, j)?, tau, h)?;
        if traj.truncated {
            return Err(Error::Domain("segment left the domain".into()));
        }
        Ok(traj)
    }

    /// Mismatch of segment `j`'s end against node `j + 1`, as `(u, v, angle)`.
    fn mismatch(&self, end: TangentState, x: &[f64], j: usize, shift: Vec2) -> Result<[f64; 3]> {
        let next = (j + 1) % self.m();
        let target = self.node(x, next)?;
        let end = in_chart(&self.red.system.surface, target.q.chart, end);
        let sh = if next == 0 { shift } else { [0.0, 0.0] };
        Ok([
            end.q.u - target.q.u - sh[0],
            end.q.v - target.q.v - sh[1],
            wrap_angle(end.v[1].atan2(end.v[0]) - target.v[1].atan2(target.v[0])),
        ])
    }

    fn residual(&self, x: &[f64], shift: Vec2) -> Result<Vec<f64>> {
        let tau = x[x.len() - 1];
        let mut r = Vec::with_capacity(3 * self.m());
        for j in 0..self.m() {
            let end = self.flow(x, j, tau)?.last().state;
            r.extend(self.mismatch(end, x, j, shift)?);
        }
        Ok(r)
    }

    /// Columns of node `j`'s own unknowns.
    fn columns(&self, j: usize) -> std::ops::Range<usize> {
        if j == 0 {
            0..2
        } else {
            3 * j - 1..3 * j + 2
        }
    }

    fn jacobian(&self, x: &[f64], shift: Vec2, h: f64) -> Result<DMatrix<f64>> {
        let m = self.m();
        let dim = 3 * m;
        let mut jac = DMatrix::zeros(dim, dim);
        for j in 0..m {
            let rows = 3 * j;
            // start of segment j and, by the chain through the target, node j + 1
            for c in self.columns(j).chain([dim - 1]).chain(self.columns((j + 1) % m)) {
                let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
                xp[c] += h;
                xm[c] -= h;
                let tp = xp[dim - 1];
                let tm = xm[dim - 1];
                let rp = self.mismatch(self.flow(&xp, j, tp)?.last().state, &xp, j, shift)?;
                let rm = self.mismatch(self.flow(&xm, j, tm)?.last().state, &xm, j, shift)?;
                for r in 0..3 {
                    jac[(rows + r, c)] = (rp[r] - rm[r]) / (2.0 * h);
                }
            }
        }
        Ok(jac)
    }
}

/// Multiple shooting through `nodes`, consecutive states `period/m` apart
/// along an approximate closed orbit; the first node stays on the section
/// through itself.
///
/// Single shooting integrates a whole period, so an orbit that expands
/// errors by `e^{λT}` needs a seed accurate to about `e^{−λT}`; here each
/// flow spans one segment only.
pub fn shoot_periodic_multiple(
    system: &MagneticSystem,
    k: f64,
    nodes: &[TangentState],
    period: f64,
    params: &ShootingParams,
) -> Result<Orbit> {
    let m = nodes.len();
    if m < 2 {
        return Err(Error::InvalidParameter(format!("multiple shooting needs at least 2 nodes, got {m}")));
    }
    let s = s_of_energy(k)?;
    let surface = &system.surface;
    let nodes: Vec<TangentState> = nodes
        .iter()
        .map(|n| {
            let (q, v) = surface.normalize_chart(n.q, n.v);
            Ok(TangentState::new(q, v))
        })
        .collect::<Result<_>>()?;
    let section = section_through(&nodes[0]);
    let seg = Segments { red: Reduced { system, section, k }, charts: nodes.iter().map(|n| n.q.chart).collect(), dt: params.dt };
    let mut x: Vec<f64> = seg.red.coords(&nodes[0]).to_vec();
    for n in &nodes[1..] {
        x.extend([n.q.u, n.q.v, n.v[1].atan2(n.v[0])]);
    }
    x.push(period / m as f64);
    let norm = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut r = seg.residual(&x, params.shift)?;
    let mut iterations = 0;
    while norm(&r) >= params.tol {
        if iterations >= params.max_iter {
            return Err(Error::NoConvergence { iterations, residual: norm(&r) });
        }
        iterations += 1;
        let jac = seg.jacobian(&x, params.shift, params.fd_step)?;
        // minimum-norm step: orbits of homogeneous systems come in families
        let svd = jac.svd(true, true);
        let cutoff = 1e-10 * svd.singular_values.max();
        let dx = svd.solve(&DVector::from_column_slice(&r), cutoff).map_err(|e| Error::Degenerate(e.to_string()))?;
        // damped Newton: halve until the mismatch shrinks
        let mut lambda = 1.0;
        let accepted = loop {
            let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a - lambda * d).collect();
            if let Ok(rt) = seg.residual(&trial, params.shift) {
                if norm(&rt) < norm(&r) {
                    break Some((trial, rt));
                }
            }
            lambda *= 0.5;
            if lambda < 1e-4 {
                break None;
            }
        };
        let Some((trial, rt)) = accepted else {
            return Err(Error::NoConvergence { iterations, residual: norm(&r) });
        };
        x = trial;
        r = rt;
        if lambda * dx.norm() < params.tol {
            break;
        }
    }

    // the orbit is the concatenation of the segments
    let tau = x[x.len() - 1];
    let (_, h) = seg.steps(tau)?;
    let mut trajectory = Trajectory { samples: Vec::new(), dt: h, truncated: false, max_energy_drift: 0.0 };
    for j in 0..m {
        let piece = seg.flow(&x, j, tau)?;
        let offset = j as f64 * tau;
        let skip = if j == 0 { 0 } else { 1 };
        trajectory.max_energy_drift = trajectory.max_energy_drift.max(piece.max_energy_drift);
        trajectory.samples.extend(piece.samples.into_iter().skip(skip).map(|mut p| {
            p.t += offset;
            p
        }));
    }
    let start = seg.node(&x, 0)?;
    let end = in_chart(surface, start.q.chart, trajectory.last().state);
    let gap = closure_gap(surface, &start, &end, params.shift);
    let homotopy = match trajectory.lattice_winding(surface) {
        Some((0, 0)) | None => Homotopy::Contractible,
        Some((a, b)) => Homotopy::Winding(a, b),
    };
    let curvature_residual = curvature_residual(system, &trajectory, k)?;
    Ok(Orbit {
        trajectory,
        period: m as f64 * tau,
        energy: k,
        s,
        homotopy,
        curvature_residual,
        closure_gap: gap,
        newton_iterations: iterations,
    })
}

fn finish_orbit(system: &MagneticSystem, red: &Reduced, z: [f64; 2], s: f64, iterations: usize, params: &ShootingParams) -> Result<Orbit> {
    let start = red.state(z)?;
    let (_, period) = red.residual(z, params)?;
    let trajectory = integrate(system, start, period, params.dt)?;
    let end = red.section.express(&system.surface, &trajectory.last().state);
    let gap = closure_gap(&system.surface, &start, &end, params.shift);
    let homotopy = match trajectory.lattice_winding(&system.surface) {
        Some((0, 0)) | None => Homotopy::Contractible,
        Some((m, n)) => Homotopy::Winding(m, n),
    };
    let curvature_residual = curvature_residual(system, &trajectory, red.k)?;
    Ok(Orbit { trajectory, period, energy: red.k, s, homotopy, curvature_residual, closure_gap: gap, newton_iterations: iterations })
}

fn closure_gap(surface: &SurfaceModel, a: &TangentState, b: &TangentState, shift: Vec2) -> f64 {
    let dq = (b.q.u - a.q.u - shift[0]).hypot(b.q.v - a.q.v - shift[1]);
    let dv = (b.v[0] - a.v[0]).hypot(b.v[1] - a.v[1]);
    let _ = surface;
    dq + dv
}

/// Geodesic radius of a closed orbit from three samples at `0`, `T/3` and
/// `2T/3`: the circle through them, read in the model's geometry.
pub fn orbit_radius(system: &MagneticSystem, orbit: &Orbit) -> Result<f64> {
    let start = orbit.trajectory.samples[0].state;
    let dt = orbit.trajectory.dt;
    let p0 = start.q;
    let p1 = integrate(system, start, orbit.period / 3.0, dt)?.last().state.q;
    let p2 = integrate(system, start, 2.0 * orbit.period / 3.0, dt)?.last().state.q;
    radius_through(&system.surface, [p0, p1, p2])
}

/// Radius of the geodesic circle through three points traversed in order.
pub fn radius_through(surface: &SurfaceModel, pts: [ChartPoint; 3]) -> Result<f64> {
    match surface {
        SurfaceModel::RoundSphere => {
            let [a, b, c] = pts.map(|p| sphere_embed(&p));
            let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
            let v = [c[0] - b[0], c[1] - b[1], c[2] - b[2]];
            let n = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
            let nn = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
            if nn == 0.0 {
                return Err(Error::Degenerate("collinear samples".into()));
            }
            let d = (n[0] * a[0] + n[1] * a[1] + n[2] * a[2]) / nn;
            // a circle about p is also one about −p; report the smaller radius
            Ok(d.abs().min(1.0).acos())
        }
        SurfaceModel::FlatTorus { .. } => Ok(circumcircle(pts)?.1),
        SurfaceModel::HyperbolicPlane { .. } => {
            let (centre, rho) = circumcircle(pts)?;
            Ok((rho / centre[1]).atanh())
        }
        SurfaceModel::ConformalTorus { .. } => Err(Error::Unsupported("orbit radius on a conformal torus".into())),
    }
}

/// Euclidean circle through three chart points.
pub fn circumcircle(pts: [ChartPoint; 3]) -> Result<([f64; 2], f64)> {
    let [a, b, c] = pts.map(|p| [p.u, p.v]);
    let d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
    if d == 0.0 {
        return Err(Error::Degenerate("collinear samples".into()));
    }
    let n = |p: [f64; 2]| p[0] * p[0] + p[1] * p[1];
    let ux = (n(a) * (b[1] - c[1]) + n(b) * (c[1] - a[1]) + n(c) * (a[1] - b[1])) / d;
    let uy = (n(a) * (c[0] - b[0]) + n(b) * (a[0] - c[0]) + n(c) * (b[0] - a[0])) / d;
    Ok(([ux, uy], (a[0] - ux).hypot(a[1] - uy)))
}

/// Least-squares Euclidean circle fit (algebraic fit refined by Gauss–Newton).
pub fn fit_circle(points: &[[f64; 2]]) -> Result<([f64; 2], f64)> {
    if points.len() < 3 {
        return Err(Error::Degenerate("circle fit needs three points".into()));
    }
    let n = points.len() as f64;
    let mean = points.iter().fold([0.0, 0.0], |m, p| [m[0] + p[0] / n, m[1] + p[1] / n]);
    // algebraic fit: x² + y² + D x + E y + F = 0 in centred coordinates
    let mut a = nalgebra::Matrix3::<f64>::zeros();
    let mut b = nalgebra::Vector3::<f64>::zeros();
    for p in points {
        let (x, y) = (p[0] - mean[0], p[1] - mean[1]);
        let row = nalgebra::Vector3::new(x, y, 1.0);
        a += row * row.transpose();
        b -= row * (x * x + y * y);
    }
    let sol = a.lu().solve(&b).ok_or_else(|| Error::Degenerate("circle fit is singular".into()))?;
    let mut c = [-sol[0] / 2.0, -sol[1] / 2.0];
    let mut r = (c[0] * c[0] + c[1] * c[1] - sol[2]).max(0.0).sqrt();
    for _ in 0..20 {
        let mut jtj = nalgebra::Matrix3::<f64>::zeros();
        let mut jtr = nalgebra::Vector3::<f64>::zeros();
        for p in points {
            let (x, y) = (p[0] - mean[0] - c[0], p[1] - mean[1] - c[1]);
            let d = x.hypot(y);
            if d == 0.0 {
                continue;
            }
            let jrow = nalgebra::Vector3::new(-x / d, -y / d, -1.0);
            jtj += jrow * jrow.transpose();
            jtr += jrow * (d - r);
        }
        let Some(step) = jtj.lu().solve(&(-jtr)) else { break };
        c[0] += step[0];
        c[1] += step[1];
        r += step[2];
        if step.norm() < 1e-15 * (1.0 + r) {
            break;
        }
    }
    Ok(([c[0] + mean[0], c[1] + mean[1]], r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbitfind::oracle::{homogeneous_oracle, oracle_circle, HomogeneousKind};
    use approx::assert_relative_eq;

    #[test]
    fn circumcircle_of_unit_circle_points() {
        let pts = [0.1f64, 2.0, 4.0].map(|a| ChartPoint::plane(1.0 + 2.0 * a.cos(), -1.0 + 2.0 * a.sin()));
        let (c, r) = circumcircle(pts).unwrap();
        assert_relative_eq!(c[0], 1.0, epsilon = 1e-13);
        assert_relative_eq!(c[1], -1.0, epsilon = 1e-13);
        assert_relative_eq!(r, 2.0, epsilon = 1e-13);
    }

    #[test]
    fn fit_circle_on_short_arc() {
        let pts: Vec<[f64; 2]> = (0..50).map(|i| 0.3 + 0.01 * i as f64).map(|a: f64| [3.0 + 5.0 * a.cos(), 2.0 + 5.0 * a.sin()]).collect();
        let (c, r) = fit_circle(&pts).unwrap();
        assert!((c[0] - 3.0).abs() < 1e-9 && (c[1] - 2.0).abs() < 1e-9 && (r - 5.0).abs() < 1e-9);
    }

    #[test]
    fn sphere_shooting_recovers_oracle() {
        let sys = MagneticSystem::homogeneous(SurfaceModel::RoundSphere, 1.0);
        let s = 2.0;
        let k = 0.5 / (s * s);
        let c = oracle_circle(HomogeneousKind::Sphere, s).unwrap();
        let seed = c.state(0.3);
        let orbit = shoot_periodic(&sys, k, seed, &section_through(&seed), &ShootingParams::default()).unwrap();
        let o = homogeneous_oracle(HomogeneousKind::Sphere, s).unwrap();
        assert!((orbit.period - o.period.unwrap()).abs() < 1e-6);
        assert!((orbit_radius(&sys, &orbit).unwrap() - o.radius.unwrap()).abs() < 1e-6);
        assert_eq!(orbit.homotopy, Homotopy::Contractible);
        assert!(orbit.curvature_residual < 1e-6);
    }

    #[test]
    fn torus_shooting_from_off_circle_seed() {
        let sys = MagneticSystem::homogeneous(SurfaceModel::unit_torus(), 1.0);
        let seed = TangentState::new(ChartPoint::plane(0.2, 0.7), [0.3, 0.9]);
        let k = 0.5;
        let orbit = shoot_periodic(&sys, k, seed, &section_through(&seed), &ShootingParams::default()).unwrap();
        assert!((orbit.period - 2.0 * PI).abs() < 1e-8);
        assert_eq!(orbit.homotopy, Homotopy::Contractible);
    }

    #[test]
    fn hyperbolic_shooting_at_s_two() {
        let sys = MagneticSystem::homogeneous(SurfaceModel::HyperbolicPlane { genus: None }, 1.0);
        let seed = oracle_circle(HomogeneousKind::Hyperbolic, 2.0).unwrap().state(1.0);
        let orbit = shoot_periodic(&sys, 0.125, seed, &section_through(&seed), &ShootingParams::default()).unwrap();
        assert!((orbit.period - 4.0 * PI / 3f64.sqrt()).abs() < 1e-6);
        assert!((orbit_radius(&sys, &orbit).unwrap() - 0.5f64.atanh()).abs() < 1e-6);
    }

    #[test]
    fn nonhomogeneous_torus_orbit_by_newton() {
        use crate::magnetic::MagneticField;
        use crate::numerics::{TrigSeries, TrigTerm};
        let sys = MagneticSystem::new(
            SurfaceModel::unit_torus(),
            MagneticField::TorusSeries(TrigSeries { constant: 1.0, terms: vec![TrigTerm { m: 1, n: 0, a: 0.3, b: 0.0 }] }),
        )
        .unwrap();
        let k = 0.02; // s = 5
                      // guiding centres drift along level sets of f; the drift vanishes on x = 1/2
        let seed = TangentState::new(ChartPoint::plane(0.78, 0.3), [0.0, 0.2]);
        let orbit = shoot_periodic(&sys, k, seed, &section_through(&seed), &ShootingParams::default()).unwrap();
        assert!(orbit.closure_gap < 1e-8, "gap {}", orbit.closure_gap);
        assert!(orbit.curvature_residual < 1e-6);
    }

    #[test]
    fn multiple_shooting_from_a_displaced_circle() {
        let sys = MagneticSystem::homogeneous(SurfaceModel::HyperbolicPlane { genus: None }, 1.0);
        let c = oracle_circle(HomogeneousKind::Hyperbolic, 2.0).unwrap();
        let m = 6;
        let nodes: Vec<TangentState> = (0..m)
            .map(|j| {
                let st = c.state(2.0 * PI * j as f64 / m as f64);
                TangentState::new(st.q.offset([1e-3 * j as f64, -5e-4]), st.v)
            })
            .collect();
        let orbit = shoot_periodic_multiple(&sys, 0.125, &nodes, 7.0, &ShootingParams::default()).unwrap();
        assert!((orbit.period - 4.0 * PI / 3f64.sqrt()).abs() < 1e-8, "{}", orbit.period);
        assert!(orbit.closure_gap < 1e-9 && orbit.curvature_residual < 1e-6);
        assert!((orbit_radius(&sys, &orbit).unwrap() - 0.5f64.atanh()).abs() < 1e-8);
    }

    #[test]
    fn wrap_angle_range() {
        assert_relative_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0);
        assert_relative_eq!(wrap_angle(-0.1), -0.1, epsilon = 1e-12);
    }
}
