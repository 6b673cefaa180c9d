//! Integration of the magnetic geodesic equation `∇_γ̇γ̇ = f(γ)·ıγ̇`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rotate90, sphere_switch_chart, ChartPoint, SurfaceModel, Vec2};
use crate::magnetic::{s_of_energy, MagneticSystem};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TangentState {
    pub q: ChartPoint,
    pub v: Vec2,
}

impl TangentState {
    pub fn new(q: ChartPoint, v: Vec2) -> Self {
        Self { q, v }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub state: TangentState,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub dt: f64,
    /// Set when integration stopped early at the edge of the domain.
    pub truncated: bool,
    /// `max |E(t) − E(0)| / E(0)` (absolute when `E(0) = 0`).
    pub max_energy_drift: f64,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has at least the initial sample")
    }

    pub fn duration(&self) -> f64 {
        self.last().t - self.samples[0].t
    }

    /// Integer lattice translation between the first and last sample of a torus lift.
    pub fn lattice_winding(&self, surface: &SurfaceModel) -> Option<(i64, i64)> {
        let (lx, ly) = surface.periods()?;
        let a = self.samples[0].state.q;
        let b = self.last().state.q;
        Some((((b.u - a.u) / lx).round() as i64, ((b.v - a.v) / ly).round() as i64))
    }
}

/// `(q̇, v̇)` with `v̇ᵏ = −Γᵏᵢⱼvⁱvʲ + f(q)(ıv)ᵏ`.
pub fn vector_field_eval(system: &MagneticSystem, state: &TangentState) -> Result<(Vec2, Vec2)> {
    let phi = system.surface.conformal_at(&state.q)?;
    let f = system.f_unchecked(&state.q);
    let [a, b] = state.v;
    let (px, py) = (phi.dx, phi.dy);
    let j = rotate90(state.v);
    let dv = [-(px * a * a + 2.0 * py * a * b - px * b * b) + f * j[0], -(-py * a * a + 2.0 * px * a * b + py * b * b) + f * j[1]];
    Ok((state.v, dv))
}

/// `E = ½ g(v, v)`.
pub fn energy_of(system: &MagneticSystem, state: &TangentState) -> Result<f64> {
    let l = system.surface.scale_at(&state.q)?;
    Ok(0.5 * l * l * (state.v[0] * state.v[0] + state.v[1] * state.v[1]))
}

/// Scale the velocity so that the state has energy `k`.
pub fn with_energy(system: &MagneticSystem, state: TangentState, k: f64) -> Result<TangentState> {
    let e = energy_of(system, &state)?;
    if e <= 0.0 {
        return Err(Error::Degenerate("cannot rescale a zero velocity".into()));
    }
    let c = (k / e).sqrt();
    Ok(TangentState::new(state.q, [state.v[0] * c, state.v[1] * c]))
}

/// One classical Runge–Kutta step of length `h` in the chart of `s`.
pub fn rk4_step(system: &MagneticSystem, s: &TangentState, h: f64) -> Result<TangentState> {
    let shift =
        |dq: Vec2, dv: Vec2, c: f64| TangentState::new(s.q.offset([c * dq[0], c * dq[1]]), [s.v[0] + c * dv[0], s.v[1] + c * dv[1]]);
    let (q1, v1) = vector_field_eval(system, s)?;
    let (q2, v2) = vector_field_eval(system, &shift(q1, v1, 0.5 * h))?;
    let (q3, v3) = vector_field_eval(system, &shift(q2, v2, 0.5 * h))?;
    let (q4, v4) = vector_field_eval(system, &shift(q3, v3, h))?;
    let c = h / 6.0;
    let out = TangentState::new(
        s.q.offset([c * (q1[0] + 2.0 * q2[0] + 2.0 * q3[0] + q4[0]), c * (q1[1] + 2.0 * q2[1] + 2.0 * q3[1] + q4[1])]),
        [s.v[0] + c * (v1[0] + 2.0 * v2[0] + 2.0 * v3[0] + v4[0]), s.v[1] + c * (v1[1] + 2.0 * v2[1] + 2.0 * v3[1] + v4[1])],
    );
    system.surface.check_domain(&out.q)?;
    let (q, v) = system.surface.normalize_chart(out.q, out.v);
    Ok(TangentState::new(q, v))
}

/// Fixed-step RK4 from `state0` over `[0, t_end]`; the last step may be shorter.
pub fn integrate(system: &MagneticSystem, state0: TangentState, t_end: f64, dt: f64) -> Result<Trajectory> {
    if !(t_end > 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("t_end = {t_end}, dt = {dt} must be positive")));
    }
    let (q, v) = system.surface.normalize_chart(state0.q, state0.v);
    let state0 = TangentState::new(q, v);
    let e0 = energy_of(system, &state0)?;
    let steps = (t_end / dt - 1e-9).ceil().max(1.0) as usize;
    let mut traj = Trajectory { samples: Vec::with_capacity(steps + 1), dt, truncated: false, max_energy_drift: 0.0 };
    traj.samples.push(Sample { t: 0.0, state: state0 });
    let mut state = state0;
    for i in 0..steps {
        let t0 = i as f64 * dt;
        let h = if i + 1 == steps { t_end - t0 } else { dt };
        match rk4_step(system, &state, h) {
            Ok(next) => state = next,
            Err(Error::Domain(_)) => {
                traj.truncated = true;
                break;
            }
            Err(e) => return Err(e),
        }
        let e = energy_of(system, &state)?;
        let drift = if e0 > 0.0 { (e - e0).abs() / e0 } else { (e - e0).abs() };
        traj.max_energy_drift = traj.max_energy_drift.max(drift);
        traj.samples.push(Sample { t: t0 + h, state });
    }
    Ok(traj)
}

/// Codimension-one chart section `{coordinate[axis] = value}`, crossed in
/// the direction of increasing (`direction > 0`) or decreasing coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub chart: u8,
    pub axis: usize,
    pub value: f64,
    pub direction: i8,
}

impl Section {
    /// Signed distance of `state` to the section, in the section's chart.
    pub fn residual(&self, surface: &SurfaceModel, state: &TangentState) -> f64 {
        let s = self.express(surface, state);
        let c = if self.axis == 0 { s.q.u } else { s.q.v };
        c - self.value
    }

    /// `state` re-expressed in the section's chart.
    pub fn express(&self, surface: &SurfaceModel, state: &TangentState) -> TangentState {
        if matches!(surface, SurfaceModel::RoundSphere) && state.q.chart != self.chart {
            let (q, v) = sphere_switch_chart(state.q, state.v);
            TangentState::new(q, v)
        } else {
            *state
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub state: TangentState,
    pub time: f64,
}

pub const DEFAULT_RETURN_DT: f64 = 1e-3;

/// Integrate from `state0` (on the section) to its next directed crossing.
pub fn poincare_return(system: &MagneticSystem, section: &Section, state0: TangentState, max_time: f64, dt: f64) -> Result<Crossing> {
    let surface = &system.surface;
    let dir = if section.direction >= 0 { 1.0 } else { -1.0 };
    let (q, v) = surface.normalize_chart(state0.q, state0.v);
    let mut state = TangentState::new(q, v);
    let mut t = 0.0;
    let mut r_prev = dir * section.residual(surface, &state);
    let mut first = true;
    while t < max_time {
        let next = match rk4_step(system, &state, dt) {
            Ok(n) => n,
            Err(Error::Domain(_)) => return Err(Error::NoReturn { max_time }),
            Err(e) => return Err(e),
        };
        let r_next = dir * section.residual(surface, &next);
        if !first && r_prev < 0.0 && r_next >= 0.0 {
            return refine_crossing(system, section, &state, t, dt, dir);
        }
        first = false;
        state = next;
        r_prev = r_next;
        t += dt;
    }
    Err(Error::NoReturn { max_time })
}

fn refine_crossing(system: &MagneticSystem, section: &Section, start: &TangentState, t0: f64, dt: f64, dir: f64) -> Result<Crossing> {
    let surface = &system.surface;
    let (mut lo, mut hi) = (0.0, dt);
    let mut best = rk4_step(system, start, dt)?;
    let mut best_tau = dt;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let s = rk4_step(system, start, mid)?;
        let r = dir * section.residual(surface, &s);
        best = s;
        best_tau = mid;
        if r.abs() < 1e-12 {
            break;
        }
        if r < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-17 {
            break;
        }
    }
    Ok(Crossing { state: section.express(surface, &best), time: t0 + best_tau })
}

/// Geodesic curvature along a trajectory: velocities come from the states,
/// accelerations from fourth-order central differences of the velocity.
/// Entries are `None` near the ends, near the (possibly shorter) last step
/// and where the stencil straddles a chart switch.
pub fn curvature_profile(system: &MagneticSystem, traj: &Trajectory) -> Vec<Option<f64>> {
    let n = traj.samples.len();
    let dt = traj.dt;
    let mut out = vec![None; n];
    if n < 6 {
        return out;
    }
    // the last window would end on the shorter final step
    for (start, win) in traj.samples.windows(5).enumerate().take(n - 5) {
        if win.iter().any(|s| s.state.q.chart != win[2].state.q.chart) {
            continue;
        }
        let v = |k: usize| win[k].state.v;
        let acc = [
            (v(0)[0] - 8.0 * v(1)[0] + 8.0 * v(3)[0] - v(4)[0]) / (12.0 * dt),
            (v(0)[1] - 8.0 * v(1)[1] + 8.0 * v(3)[1] - v(4)[1]) / (12.0 * dt),
        ];
        out[start + 2] = system.surface.geodesic_curvature_of(&win[2].state.q, v(2), acc).ok();
    }
    out
}

/// `max |κ(t) − s·f(γ(t))|` along a trajectory of energy `k`.
pub fn curvature_residual(system: &MagneticSystem, traj: &Trajectory, k: f64) -> Result<f64> {
    let s = s_of_energy(k)?;
    let kappa = curvature_profile(system, traj);
    let mut worst: f64 = 0.0;
    let mut any = false;
    for (sample, kap) in traj.samples.iter().zip(kappa) {
        if let Some(kap) = kap {
            any = true;
            worst = worst.max((kap - s * system.f_unchecked(&sample.state.q)).abs());
        }
    }
    if !any {
        return Err(Error::Degenerate("trajectory too short for curvature extraction".into()));
    }
    Ok(worst)
}

/// CSV with columns `t,chart,u,v,du,dv,energy,kappa` (`kappa` empty where
/// it cannot be extracted).
pub fn write_trajectory_csv(system: &MagneticSystem, traj: &Trajectory, path: &Path) -> Result<()> {
    let kappa = curvature_profile(system, traj);
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "t,chart,u,v,du,dv,energy,kappa")?;
    for (s, k) in traj.samples.iter().zip(kappa) {
        let e = energy_of(system, &s.state)?;
        let k = k.map(|k| format!("{k:.15e}")).unwrap_or_default();
        writeln!(
            w,
            "{:.15e},{},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{}",
            s.t, s.state.q.chart, s.state.q.u, s.state.q.v, s.state.v[0], s.state.v[1], e, k
        )?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::magnetic::{energy_of_s, MagneticField};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn sphere() -> MagneticSystem {
        MagneticSystem::homogeneous(SurfaceModel::RoundSphere, 1.0)
    }

    #[test]
    fn zero_field_torus_moves_straight() {
        let sys = MagneticSystem::homogeneous(SurfaceModel::unit_torus(), 0.0);
        let s0 = TangentState::new(ChartPoint::plane(0.2, 0.3), [1.0, 0.0]);
        let (dq, dv) = vector_field_eval(&sys, &s0).unwrap();
        assert_eq!((dq, dv), ([1.0, 0.0], [0.0, 0.0]));
        let tr = integrate(&sys, s0, 1.0, 1e-2).unwrap();
        assert_relative_eq!(tr.last().state.q.u, 1.2, epsilon = 1e-13);
        assert_eq!(tr.lattice_winding(&sys.surface), Some((1, 0)));
    }

    #[test]
    fn sphere_force_is_rotated_velocity() {
        let sys = sphere();
        let q = ChartPoint::new(0, 0.0, 0.0);
        // unit speed at the south pole: λ = 2
        let s0 = TangentState::new(q, [0.5, 0.0]);
        let (_, dv) = vector_field_eval(&sys, &s0).unwrap();
        assert_relative_eq!(sys.surface.norm(&q, dv).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(dv[0] * 0.5, 0.0);
        let rest = TangentState::new(q, [0.0, 0.0]);
        assert_eq!(vector_field_eval(&sys, &rest).unwrap(), ([0.0, 0.0], [0.0, 0.0]));
    }

    #[test]
    fn energy_examples() {
        let torus = MagneticSystem::homogeneous(SurfaceModel::unit_torus(), 1.0);
        assert_eq!(energy_of(&torus, &TangentState::new(ChartPoint::plane(0.0, 0.0), [1.0, 0.0])).unwrap(), 0.5);
        let hyp = MagneticSystem::homogeneous(SurfaceModel::HyperbolicPlane { genus: None }, 1.0);
        assert_eq!(energy_of(&hyp, &TangentState::new(ChartPoint::plane(0.0, 2.0), [2.0, 0.0])).unwrap(), 0.5);
        assert_eq!(energy_of(&hyp, &TangentState::new(ChartPoint::plane(0.0, 2.0), [0.0, 0.0])).unwrap(), 0.0);
    }

    #[test]
    fn sphere_orbit_closes_after_one_period() {
        let sys = sphere();
        let k = energy_of_s(1.0).unwrap();
        let s0 = with_energy(&sys, TangentState::new(ChartPoint::new(0, 0.4, 0.1), [0.3, -0.7]), k).unwrap();
        let tr = integrate(&sys, s0, PI * 2f64.sqrt(), 1e-3).unwrap();
        let end = tr.last().state;
        assert!((end.q.u - s0.q.u).abs() < 1e-8 && (end.q.v - s0.q.v).abs() < 1e-8);
        assert!((end.v[0] - s0.v[0]).abs() < 1e-8 && (end.v[1] - s0.v[1]).abs() < 1e-8);
    }

    #[test]
    fn sphere_energy_drift_over_long_horizon() {
        let sys = sphere();
        let s0 = with_energy(&sys, TangentState::new(ChartPoint::new(0, 0.9, 0.0), [0.0, 1.0]), 0.5).unwrap();
        let tr = integrate(&sys, s0, 100.0, 1e-3).unwrap();
        assert!(tr.max_energy_drift < 1e-9, "drift {}", tr.max_energy_drift);
        assert!(!tr.truncated);
    }

    #[test]
    fn chart_switches_keep_trajectories_continuous() {
        // a geodesic (f = 0) through both poles crosses chart boundaries repeatedly
        let sys = MagneticSystem::homogeneous(SurfaceModel::RoundSphere, 0.0);
        let s0 = with_energy(&sys, TangentState::new(ChartPoint::new(0, 0.0, 0.0), [1.0, 0.0]), 0.5).unwrap();
        let tr = integrate(&sys, s0, 2.0 * PI, 1e-3).unwrap();
        assert!(tr.samples.iter().any(|s| s.state.q.chart == 1));
        let end = crate::geometry::sphere_embed(&tr.last().state.q);
        assert!(end[0].abs() < 1e-9 && (end[2] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn hyperbolic_floor_truncates() {
        let sys = MagneticSystem::homogeneous(SurfaceModel::HyperbolicPlane { genus: None }, 0.0);
        // vertical geodesic heading down reaches y ~ e^{-30} only after t = 30
        let s0 = TangentState::new(ChartPoint::plane(0.0, 1.0), [0.0, -1.0]);
        let tr = integrate(&sys, s0, 40.0, 1e-2).unwrap();
        assert!(tr.truncated);
    }

    #[test]
    fn return_time_on_flat_torus_is_two_pi() {
        for s in [0.5, 2.0] {
            let sys = MagneticSystem::homogeneous(SurfaceModel::unit_torus(), 1.0);
            let k = energy_of_s(s).unwrap();
            let speed = (2.0 * k).sqrt();
            let s0 = TangentState::new(ChartPoint::plane(0.3, 0.2), [0.0, speed]);
            let sec = Section { chart: 0, axis: 1, value: 0.2, direction: 1 };
            let c = poincare_return(&sys, &sec, s0, 20.0, 1e-3).unwrap();
            assert!((c.time - 2.0 * PI).abs() < 1e-6, "{}", c.time);
        }
    }

    #[test]
    fn straight_line_returns_after_lattice_traversal() {
        let sys = MagneticSystem::homogeneous(SurfaceModel::unit_torus(), 0.0);
        let s0 = TangentState::new(ChartPoint::plane(0.0, 0.0), [0.5, 0.0]);
        let sec = Section { chart: 0, axis: 0, value: 0.0, direction: 1 };
        // the section is a single line of the lift: a straight line moving right never returns
        assert!(matches!(poincare_return(&sys, &sec, s0, 5.0, 1e-2), Err(Error::NoReturn { .. })));
        let sec = Section { chart: 0, axis: 0, value: 1.0, direction: 1 };
        let s0 = TangentState::new(ChartPoint::plane(0.0, 0.0), [0.5, 0.0]);
        let c = poincare_return(&sys, &sec, s0, 5.0, 1e-2).unwrap();
        assert_relative_eq!(c.time, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn prescribed_curvature_along_trajectory() {
        let sys = MagneticSystem::new(SurfaceModel::RoundSphere, MagneticField::SphereAffine { constant: 1.0, height: 0.5 }).unwrap();
        let k = 0.3;
        let s0 = with_energy(&sys, TangentState::new(ChartPoint::new(0, 0.2, 0.5), [1.0, 0.3]), k).unwrap();
        let tr = integrate(&sys, s0, 20.0, 1e-3).unwrap();
        assert!(curvature_residual(&sys, &tr, k).unwrap() < 1e-6);
    }

    #[test]
    fn rescaling_lemma() {
        // (g, σ) at energy k, time-reparametrized by t = s·t', equals (g, sσ) at energy ½
        let k = 0.18;
        let s = s_of_energy(k).unwrap();
        let base = MagneticSystem::new(SurfaceModel::RoundSphere, MagneticField::SphereAffine { constant: 0.4, height: 0.7 }).unwrap();
        let scaled =
            MagneticSystem::new(SurfaceModel::RoundSphere, MagneticField::SphereAffine { constant: 0.4 * s, height: 0.7 * s }).unwrap();
        let start = TangentState::new(ChartPoint::new(0, 0.3, -0.2), [0.4, 0.9]);
        let a0 = with_energy(&base, start, k).unwrap();
        let b0 = with_energy(&scaled, start, 0.5).unwrap();
        let ta = integrate(&base, a0, 3.0 * s, 1e-3 * s).unwrap();
        let tb = integrate(&scaled, b0, 3.0, 1e-3).unwrap();
        let (pa, pb) = (ta.last().state.q, tb.last().state.q);
        let (xa, xb) = (crate::geometry::sphere_embed(&pa), crate::geometry::sphere_embed(&pb));
        for i in 0..3 {
            assert!((xa[i] - xb[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn trajectory_csv_has_header_and_rows() {
        let sys = sphere();
        let s0 = with_energy(&sys, TangentState::new(ChartPoint::new(0, 0.1, 0.0), [0.0, 1.0]), 0.5).unwrap();
        let tr = integrate(&sys, s0, 0.1, 1e-2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("traj.csv");
        write_trajectory_csv(&sys, &tr, &p).unwrap();
        let text = std::fs::read_to_string(p).unwrap();
        assert!(text.starts_with("t,chart,u,v,du,dv,energy,kappa\n"));
        assert_eq!(text.lines().count(), tr.samples.len() + 1);
    }
}
