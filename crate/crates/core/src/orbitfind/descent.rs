//! Critical points of the discrete action.
//!
//! Far from a critical point the loop follows the normalized Sobolev
//! steepest-descent field `−♯η/√(1 + |η|²)` with a backtracking line search.
//! Closed orbits are saddle points of the free-period action, which plain
//! descent moves away from, so once `|η|` is small a Newton step (MINRES on
//! the Hessian, preconditioned by the `W^{1,2} × ℝ` Gram matrix) is tried and
//! kept whenever it reduces `|η|`.

use serde::{Deserialize, Serialize};

use super::action::{discrete_action_gradient_with, discrete_action_with, DiscreteLoop, FluxModel};
use super::shooting::{section_through, shoot_periodic, shoot_periodic_multiple, Orbit, ShootingParams};
use crate::dynamics::TangentState;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::magnetic::MagneticSystem;
use crate::numerics::{dot, minres, solve_cyclic_tridiagonal};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentParams {
    /// Convergence threshold on the dual norm `|η|`.
    pub tol: f64,
    /// Periods below this count as collapse to a point.
    pub t_min: f64,
    pub max_iter: usize,
    /// Initial trial step of the line search.
    pub step: f64,
    /// Newton steps are attempted once `|η|` drops below this.
    pub newton_threshold: f64,
    pub minres_tol: f64,
    pub minres_max_iter: usize,
    /// Harmonic part `(c₁, c₂)` of the torus primitive for winding loops.
    pub harmonic: (f64, f64),
    pub exec: Execution,
}

impl Default for DescentParams {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            t_min: 1e-4,
            max_iter: 5000,
            step: 0.5,
            newton_threshold: 0.05,
            minres_tol: 1e-10,
            minres_max_iter: 400,
            harmonic: (0.0, 0.0),
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescentStatus {
    Converged,
    /// The period fell below `t_min`: the flow line vanishes into a point.
    Collapsed,
    MaxIterations,
    /// The line search could not make progress.
    Stalled,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DescentResult {
    pub status: DescentStatus,
    #[serde(rename = "loop")]
    pub result: DiscreteLoop,
    pub iterations: usize,
    pub newton_steps: usize,
    pub gradient_norm: f64,
    pub action: f64,
}

/// Gram matrix of `W^{1,2}(𝕋, M) × ℝ` at a loop, per coordinate:
/// `h λ²(xᵢ)ξᵢ² + (1/h) λ²(mᵢ)|ξ_{i+1} − ξᵢ|²` plus `ξ_T²`.
struct Gram {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl Gram {
    fn at(lp: &DiscreteLoop, system: &MagneticSystem) -> Result<Self> {
        let n = lp.len();
        let h = 1.0 / n as f64;
        let mut mid = Vec::with_capacity(n);
        for i in 0..n {
            let (a, d) = lp.edge(i);
            let l = system.surface.scale_at(&a.offset([0.5 * d[0], 0.5 * d[1]]))?;
            mid.push(l * l);
        }
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for i in 0..n {
            let l = system.surface.scale_at(&lp.vertices[i])?;
            let prev = mid[(i + n - 1) % n];
            lower[i] = -prev / h;
            upper[i] = -mid[i] / h;
            diag[i] = h * l * l + (prev + mid[i]) / h;
        }
        Ok(Self { lower, diag, upper })
    }

    fn n(&self) -> usize {
        self.diag.len()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut out = Vec::with_capacity(2 * n + 1);
        for i in 0..n {
            let (prev, next) = ((i + n - 1) % n, (i + 1) % n);
            for c in 0..2 {
                out.push(self.lower[i] * x[2 * prev + c] + self.diag[i] * x[2 * i + c] + self.upper[i] * x[2 * next + c]);
            }
        }
        out.push(x[2 * n]);
        out
    }

    fn solve(&self, g: &[f64]) -> Vec<f64> {
        let n = self.n();
        let gu: Vec<f64> = (0..n).map(|i| g[2 * i]).collect();
        let gv: Vec<f64> = (0..n).map(|i| g[2 * i + 1]).collect();
        let xu = solve_cyclic_tridiagonal(&self.lower, &self.diag, &self.upper, &gu);
        let xv = solve_cyclic_tridiagonal(&self.lower, &self.diag, &self.upper, &gv);
        let mut out = Vec::with_capacity(2 * n + 1);
        for i in 0..n {
            out.push(xu[i]);
            out.push(xv[i]);
        }
        out.push(g[2 * n]);
        out
    }
}

struct Problem<'a> {
    system: &'a MagneticSystem,
    k: f64,
    model: FluxModel,
    template: DiscreteLoop,
    exec: Execution,
}

impl Problem<'_> {
    fn action(&self, p: &[f64]) -> Result<f64> {
        discrete_action_with(&self.template.from_params(p), self.system, self.k, &self.model, self.exec)
    }

    fn gradient(&self, p: &[f64]) -> Result<Vec<f64>> {
        Ok(discrete_action_gradient_with(&self.template.from_params(p), self.system, self.k, &self.model, self.exec)?.to_params())
    }

    /// `|η|` and the Riesz representative `G⁻¹∇S`.
    fn dual(&self, p: &[f64], g: &[f64]) -> Result<(f64, Vec<f64>)> {
        let gram = Gram::at(&self.template.from_params(p), self.system)?;
        let d = gram.solve(g);
        Ok((dot(g, &d).max(0.0).sqrt(), d))
    }
}

/// Run the hybrid descent/Newton iteration from `loop0`.
pub fn descend_to_critical(loop0: &DiscreteLoop, system: &MagneticSystem, k: f64, params: &DescentParams) -> Result<DescentResult> {
    let model = FluxModel::for_loop(system, loop0, params.harmonic)?;
    let prob = Problem { system, k, model, template: loop0.clone(), exec: params.exec };
    let mut p = loop0.to_params();
    let tn = p.len() - 1;
    let mut s = prob.action(&p)?;
    let mut g = prob.gradient(&p)?;
    let (mut eta, mut d) = prob.dual(&p, &g)?;
    let mut newton_steps = 0;
    let mut status = DescentStatus::MaxIterations;
    let mut iterations = 0;
    while iterations < params.max_iter {
        if eta < params.tol {
            status = DescentStatus::Converged;
            break;
        }
        if p[tn] < params.t_min {
            status = DescentStatus::Collapsed;
            break;
        }
        iterations += 1;
        if eta < params.newton_threshold {
            if let Some((pn, gn, etan, dn)) = newton_step(&prob, &p, &g, eta, params)? {
                if etan < eta {
                    p = pn;
                    g = gn;
                    eta = etan;
                    d = dn;
                    s = prob.action(&p)?;
                    newton_steps += 1;
                    continue;
                }
            }
        }
        // normalized Sobolev descent with Armijo backtracking
        let scale = 1.0 / (1.0 + eta * eta).sqrt();
        let mut tau = params.step;
        let mut accepted = false;
        while tau > 1e-14 {
            let trial: Vec<f64> = p.iter().zip(&d).map(|(x, di)| x - tau * scale * di).collect();
            if trial[tn] > 0.0 {
                if let Ok(st) = prob.action(&trial) {
                    if st <= s - 1e-4 * tau * scale * eta * eta {
                        p = trial;
                        s = st;
                        accepted = true;
                        break;
                    }
                }
            }
            tau *= 0.5;
        }
        if !accepted {
            status = if p[tn] < params.t_min { DescentStatus::Collapsed } else { DescentStatus::Stalled };
            break;
        }
        g = prob.gradient(&p)?;
        let (e, dd) = prob.dual(&p, &g)?;
        eta = e;
        d = dd;
    }
    if status == DescentStatus::MaxIterations && eta < params.tol {
        status = DescentStatus::Converged;
    }
    if p[tn] < params.t_min && status != DescentStatus::Converged {
        status = DescentStatus::Collapsed;
    }
    Ok(DescentResult { status, result: prob.template.from_params(&p), iterations, newton_steps, gradient_norm: eta, action: s })
}

type NewtonTrial = (Vec<f64>, Vec<f64>, f64, Vec<f64>);

/// Levenberg–Marquardt step `(H + μG)δ = −∇S` with `μ = |η|`. Isometries and
/// reparametrizations leave the action nearly invariant, so `H` has tiny
/// eigenvalues whose directions the discretization error still excites; the
/// shift keeps the step bounded without slowing local convergence.
fn newton_step(prob: &Problem, p: &[f64], g: &[f64], eta: f64, params: &DescentParams) -> Result<Option<NewtonTrial>> {
    let gram = Gram::at(&prob.template.from_params(p), prob.system)?;
    let pnorm = dot(p, p).sqrt();
    let hess = |v: &[f64]| -> Vec<f64> {
        let vn = dot(v, v).sqrt();
        if vn == 0.0 {
            return vec![0.0; v.len()];
        }
        let eps = 1e-6 * (1.0 + pnorm) / vn;
        let plus: Vec<f64> = p.iter().zip(v).map(|(x, y)| x + eps * y).collect();
        let minus: Vec<f64> = p.iter().zip(v).map(|(x, y)| x - eps * y).collect();
        match (prob.gradient(&plus), prob.gradient(&minus)) {
            (Ok(a), Ok(b)) => {
                let shift = gram.apply(v);
                a.iter().zip(&b).zip(&shift).map(|((x, y), gv)| (x - y) / (2.0 * eps) + eta * gv).collect()
            }
            _ => vec![f64::NAN; v.len()],
        }
    };
    let rhs: Vec<f64> = g.iter().map(|x| -x).collect();
    let (delta, _) = minres(hess, |r| gram.solve(r), &rhs, params.minres_tol, params.minres_max_iter);
    if delta.iter().any(|x| !x.is_finite()) {
        return Ok(None);
    }
    let trial: Vec<f64> = p.iter().zip(&delta).map(|(x, d)| x + d).collect();
    if trial[trial.len() - 1] <= 0.0 {
        return Ok(None);
    }
    let Ok(gt) = prob.gradient(&trial) else { return Ok(None) };
    let Ok((eta, d)) = prob.dual(&trial, &gt) else { return Ok(None) };
    Ok(Some((trial, gt, eta, d)))
}

/// Velocity at vertex `i` by a fourth-order central difference in the loop
/// parameter; unstable orbits amplify a second-order error past the return
/// window of the shooter.
fn vertex_state(lp: &DiscreteLoop, i: usize) -> TangentState {
    let n = lp.len();
    let e = [lp.edge((i + n - 2) % n).1, lp.edge((i + n - 1) % n).1, lp.edge(i).1, lp.edge((i + 1) % n).1];
    let c = n as f64 / (12.0 * lp.period);
    let v: [f64; 2] = std::array::from_fn(|j| c * (7.0 * (e[1][j] + e[2][j]) - (e[0][j] + e[3][j])));
    TangentState::new(lp.vertices[i], v)
}

/// Shoot from the first vertex of a converged loop to a genuine orbit.
///
/// Falls back to multiple shooting from `params.segments` points of the
/// loop when single shooting fails, which is the usual outcome for
/// strongly unstable orbits.
pub fn loop_to_orbit(system: &MagneticSystem, k: f64, lp: &DiscreteLoop, params: &ShootingParams) -> Result<Orbit> {
    let n = lp.len();
    if n < 4 {
        return Err(Error::InvalidParameter(format!("need at least 4 vertices, got {n}")));
    }
    let seed = vertex_state(lp, 0);
    let mut sp = *params;
    sp.shift = lp.shift;
    let single = shoot_periodic(system, k, seed, &section_through(&seed), &sp);
    if single.is_ok() || params.segments < 2 {
        return single;
    }
    let m = params.segments.min(n);
    let nodes: Vec<TangentState> = (0..m)
        .map(|j| {
            let x = (j * n) as f64 / m as f64;
            let i = x.floor() as usize;
            let f = x - i as f64;
            let (a, b) = (vertex_state(lp, i), vertex_state(lp, (i + 1) % n));
            let (_, d) = lp.edge(i);
            TangentState::new(a.q.offset([f * d[0], f * d[1]]), std::array::from_fn(|c| (1.0 - f) * a.v[c] + f * b.v[c]))
        })
        .collect();
    shoot_periodic_multiple(system, k, &nodes, lp.period, &sp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ChartPoint, SurfaceModel};
    use crate::magnetic::energy_of_s;
    use crate::orbitfind::oracle::{oracle_circle, HomogeneousKind};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn oracle_circle_is_nearly_stationary() {
        let sys = MagneticSystem::homogeneous(SurfaceModel::RoundSphere, 1.0);
        let c = oracle_circle(HomogeneousKind::Sphere, 1.0).unwrap();
        let lp = DiscreteLoop::chart_circle(0, c.centre, c.radius, 512, PI * 2f64.sqrt()).unwrap();
        let prob = Problem { system: &sys, k: 0.5, model: FluxModel::Fan, template: lp.clone(), exec: Execution::default() };
        let p = lp.to_params();
        let g = prob.gradient(&p).unwrap();
        let (eta, _) = prob.dual(&p, &g).unwrap();
        assert!(eta < 1e-4, "|η| = {eta}");
    }

    #[test]
    fn perturbed_sphere_circle_converges() {
        let sys = MagneticSystem::homogeneous(SurfaceModel::RoundSphere, 1.0);
        let c = oracle_circle(HomogeneousKind::Sphere, 1.0).unwrap();
        let n = 512;
        let v: Vec<ChartPoint> = (0..n)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / n as f64;
                let r = c.radius * (1.0 + 0.01 * (3.0 * a).cos());
                ChartPoint::new(0, r * a.cos() + 0.01, r * a.sin())
            })
            .collect();
        let lp = DiscreteLoop::new(v, 4.3).unwrap();
        let res = descend_to_critical(&lp, &sys, 0.5, &DescentParams::default()).unwrap();
        assert_eq!(res.status, DescentStatus::Converged, "{res:?}");
        assert!((res.result.period - PI * 2f64.sqrt()).abs() < 1e-4);
        assert_relative_eq!(res.result.mean_energy(&sys.surface).unwrap(), 0.5, epsilon = 1e-8);
    }

    #[test]
    fn flat_geodesic_with_winding() {
        let sys = MagneticSystem::homogeneous(SurfaceModel::unit_torus(), 0.0);
        let k = energy_of_s(2.0).unwrap();
        let n = 64;
        let v: Vec<ChartPoint> = (0..n)
            .map(|i| {
                let t = i as f64 / n as f64;
                ChartPoint::plane(t, 0.5 + 0.05 * (2.0 * PI * t).sin())
            })
            .collect();
        let lp = DiscreteLoop::with_winding(v, 1.0, &sys.surface, 1, 0).unwrap();
        let res = descend_to_critical(&lp, &sys, k, &DescentParams::default()).unwrap();
        assert_eq!(res.status, DescentStatus::Converged);
        assert_relative_eq!(res.result.length(&sys.surface).unwrap(), 1.0, epsilon = 1e-8);
        assert_relative_eq!(res.result.period, 1.0 / (2.0 * k).sqrt(), epsilon = 1e-8);
    }

    #[test]
    fn tiny_loop_collapses() {
        let sys = MagneticSystem::homogeneous(SurfaceModel::unit_torus(), 0.01);
        let lp = DiscreteLoop::chart_circle(0, [0.5, 0.5], 1e-3, 32, 0.01).unwrap();
        let res = descend_to_critical(&lp, &sys, 0.5, &DescentParams::default()).unwrap();
        assert_eq!(res.status, DescentStatus::Collapsed, "{res:?}");
    }
}
