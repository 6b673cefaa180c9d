//! Subcommand pipelines. Each writes its artifacts into the output directory
//! and returns a JSON summary plus whether the solver succeeded.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};

use magflow::contact::{
    contact_candidate_min_with, homogeneous_zeta, liouville_action_with, write_json, write_slice_csv, Candidate, SmGrid,
};
use magflow::critical::{c0_upper_bound, closed_form_report, write_witness_csv, C0Params};
use magflow::dynamics::{integrate, with_energy, write_trajectory_csv, TangentState};
use magflow::magnetic::{local_primitive, PrimitiveRegion};
use magflow::orbitfind::{
    descend_to_critical, homogeneous_oracle, oracle_circle, orbit_radius, section_through, shoot_periodic, write_loop_csv, DescentParams,
    DescentStatus, DiscreteLoop, HomogeneousKind, Orbit, ShootingParams,
};
use magflow::taimanov::{
    evolve_minimize, minimum_seeds, refine_to_orbit, tau_estimate, write_snapshots_csv, Region, RegionCurve, TaimanovOutcome, TaimanovParams,
};
use magflow::{ChartPoint, Error, Execution, MagneticSystem, SurfaceModel};

use crate::config::{Energy, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Subcommand {
    Simulate,
    OrbitShoot,
    OrbitDescend,
    Oracle,
    Taimanov,
    Critical,
    ContactCheck,
    Sweep,
}

pub struct Outcome {
    pub summary: Value,
    /// `false` for solver non-convergence (exit code 1).
    pub converged: bool,
}

impl Outcome {
    fn ok(summary: Value) -> Self {
        Self { summary, converged: true }
    }

    fn failed(summary: Value) -> Self {
        Self { summary, converged: false }
    }
}

/// Runs `cmd`; solver failures that the pipeline can name become a failed
/// outcome, everything else is returned as an error.
pub fn execute(cfg: &RunConfig, cmd: Subcommand) -> Result<Outcome> {
    let out = cfg.base_dir.join(&cfg.output);
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let outcome = match cmd {
        Subcommand::Simulate => simulate(cfg, &out),
        Subcommand::OrbitShoot => orbit_shoot(cfg, &out),
        Subcommand::OrbitDescend => orbit_descend(cfg, &out),
        Subcommand::Oracle => oracle(cfg, &out),
        Subcommand::Taimanov => taimanov(cfg, &out),
        Subcommand::Critical => critical(cfg, &out),
        Subcommand::ContactCheck => contact_check(cfg, &out),
        Subcommand::Sweep => sweep(cfg, &out),
    };
    let outcome = match outcome {
        Err(e) => match e.downcast_ref::<Error>().and_then(solver_failure) {
            Some(summary) => Outcome::failed(summary),
            None => return Err(e),
        },
        ok => ok?,
    };
    let summary = round_json(&outcome.summary);
    fs::write(out.join("summary.json"), format!("{summary}\n"))?;
    Ok(Outcome { summary, converged: outcome.converged })
}

fn solver_failure(e: &Error) -> Option<Value> {
    match e {
        Error::NoReturn { max_time } => Some(json!({ "outcome": "no_return", "max_time": max_time })),
        Error::NoConvergence { iterations, residual } => {
            Some(json!({ "outcome": "no_convergence", "iterations": iterations, "residual": residual }))
        }
        Error::NoBracket(m) => Some(json!({ "outcome": "no_bracket", "message": m })),
        Error::Degenerate(m) => Some(json!({ "outcome": "degenerate", "message": m })),
        _ => None,
    }
}

/// Rounds every float to 8 decimals.
pub fn round_json(v: &Value) -> Value {
    match v {
        Value::Number(n) if !n.is_i64() && !n.is_u64() => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            let r = (x * 1e8).round() / 1e8;
            serde_json::Number::from_f64(if r == 0.0 { 0.0 } else { r }).map(Value::Number).unwrap_or(Value::Null)
        }
        Value::Array(a) => Value::Array(a.iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.iter().map(|(k, v)| (k.clone(), round_json(v))).collect()),
        other => other.clone(),
    }
}

fn write_plot(out: &Path, body: &str) -> Result<()> {
    let mut script = String::from("set datafile separator ','\nset key autotitle columnhead\nset size ratio -1\n");
    script.push_str(body);
    fs::write(out.join("plot.gp"), script)?;
    Ok(())
}

fn default_point(surface: &SurfaceModel) -> ChartPoint {
    match surface {
        SurfaceModel::RoundSphere => ChartPoint::new(0, 0.0, 0.0),
        SurfaceModel::HyperbolicPlane { .. } => ChartPoint::plane(0.0, 1.0),
        SurfaceModel::FlatTorus { lx, ly } | SurfaceModel::ConformalTorus { lx, ly, .. } => ChartPoint::plane(lx / 2.0, ly / 2.0),
    }
}

fn shooting_params(cfg: &RunConfig) -> ShootingParams {
    ShootingParams {
        tol: cfg.solver.tol,
        max_iter: cfg.solver.max_iter,
        max_time: cfg.solver.t_max,
        dt: cfg.solver.dt,
        ..ShootingParams::default()
    }
}

/// The configured seed state, or the oracle circle of a homogeneous system
/// with positive field.
fn seed_state(cfg: &RunConfig, system: &MagneticSystem, e: Energy) -> Result<TangentState> {
    if let Some(p) = cfg.seed.position {
        let v = cfg.seed.velocity.unwrap_or([1.0, 0.0]);
        return Ok(with_energy(system, TangentState::new(ChartPoint::new(cfg.seed.chart, p[0], p[1]), v), e.k)?);
    }
    if let (Some(kind), Some(c)) = (HomogeneousKind::of(&system.surface), system.field.constant_value()) {
        if c > 0.0 {
            if let Ok(circle) = oracle_circle(kind, e.s * c) {
                return Ok(with_energy(system, circle.state(0.0), e.k)?);
            }
        }
    }
    bail!("no default seed for this system; set run.seed_x and run.seed_y")
}

fn orbit_summary(system: &MagneticSystem, e: Energy, orbit: &Orbit) -> Value {
    let mut s = json!({
        "k": e.k,
        "s": e.s,
        "period": orbit.period,
        "closure_gap": orbit.closure_gap,
        "curvature_residual": orbit.curvature_residual,
        "energy_drift": orbit.trajectory.max_energy_drift,
    });
    if system.field.constant_value().is_some() && !matches!(system.surface, SurfaceModel::ConformalTorus { .. }) {
        if let Ok(r) = orbit_radius(system, orbit) {
            s["radius"] = json!(r);
        }
    }
    s
}

const TRAJECTORY_PLOT: &str = "plot 'trajectory.csv' using 3:4 with lines title 'orbit'\n";

fn simulate(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let system = cfg.system()?;
    let e = cfg.energy()?;
    let seed = match cfg.seed.position {
        Some(_) => seed_state(cfg, &system, e)?,
        None => with_energy(&system, TangentState::new(default_point(&system.surface), cfg.seed.velocity.unwrap_or([1.0, 0.0])), e.k)?,
    };
    let traj = integrate(&system, seed, cfg.solver.t_max, cfg.solver.dt)?;
    write_trajectory_csv(&system, &traj, &out.join("trajectory.csv"))?;
    write_plot(out, TRAJECTORY_PLOT)?;
    Ok(Outcome::ok(json!({
        "samples": traj.samples.len(),
        "duration": traj.duration(),
        "energy_drift": traj.max_energy_drift,
        "truncated": traj.truncated,
    })))
}

fn orbit_shoot(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let system = cfg.system()?;
    let e = cfg.energy()?;
    let seed = seed_state(cfg, &system, e)?;
    let orbit = shoot_periodic(&system, e.k, seed, &section_through(&seed), &shooting_params(cfg))?;
    write_trajectory_csv(&system, &orbit.trajectory, &out.join("trajectory.csv"))?;
    write_plot(out, TRAJECTORY_PLOT)?;
    Ok(Outcome::ok(orbit_summary(&system, e, &orbit)))
}

fn orbit_descend(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let system = cfg.system()?;
    let e = cfg.energy()?;
    // homogeneous systems start from a slightly enlarged oracle circle
    let oracle = match (HomogeneousKind::of(&system.surface), system.field.constant_value()) {
        (Some(kind), Some(c)) if c > 0.0 => oracle_circle(kind, e.s * c).ok(),
        _ => None,
    };
    let mut lp = match oracle {
        Some(o) if cfg.seed.centre.is_none() && cfg.seed.radius.is_none() => o.discrete_loop(cfg.solver.n, 1.01)?,
        _ => {
            let centre = cfg.seed.centre.unwrap_or_else(|| default_point(&system.surface).coords());
            let radius = cfg.seed.radius.unwrap_or(0.1);
            DiscreteLoop::chart_circle(cfg.seed.chart, centre, radius, cfg.solver.n, 1.0)?.resampled_by_arclength(&system.surface)?
        }
    };
    lp.period = cfg.seed.period.unwrap_or(lp.length(&system.surface)? / (2.0 * e.k).sqrt());
    let params = DescentParams {
        tol: cfg.solver.descent_tol,
        max_iter: cfg.solver.descent_max_iter,
        newton_threshold: cfg.solver.newton_threshold,
        harmonic: cfg.harmonic,
        ..DescentParams::default()
    };
    let res = descend_to_critical(&lp, &system, e.k, &params)?;
    write_loop_csv(&res.result, &out.join("loop.csv"))?;
    write_plot(out, "plot 'loop.csv' using 3:4 with linespoints pt 7 ps 0.3 title 'loop'\n")?;
    let detail = json!({
        "period": res.result.period,
        "action": res.action,
        "gradient_norm": res.gradient_norm,
        "iterations": res.iterations,
        "newton_steps": res.newton_steps,
    });
    fs::write(out.join("descent.json"), format!("{}\n", round_json(&detail)))?;
    Ok(match res.status {
        DescentStatus::Converged => {
            let mut s = detail;
            s["outcome"] = json!("converged");
            Outcome::ok(s)
        }
        DescentStatus::Collapsed => Outcome::failed(json!({ "outcome": "collapse" })),
        DescentStatus::MaxIterations => Outcome::failed(json!({ "outcome": "max_iterations", "gradient_norm": res.gradient_norm })),
        DescentStatus::Stalled => Outcome::failed(json!({ "outcome": "stalled", "gradient_norm": res.gradient_norm })),
    })
}

fn oracle(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let system = cfg.system()?;
    let e = cfg.energy()?;
    let Some(kind) = HomogeneousKind::of(&system.surface) else {
        bail!("the oracle covers the sphere, the flat torus and the hyperbolic plane");
    };
    if system.field.constant_value() != Some(1.0) {
        bail!("the oracle answers for the field f = 1");
    }
    let answer = homogeneous_oracle(kind, e.s)?;
    let mut rows = String::from("angle,u,v\n");
    if answer.exists_contractible {
        let circle = oracle_circle(kind, e.s)?;
        for i in 0..=256 {
            let a = 2.0 * std::f64::consts::PI * i as f64 / 256.0;
            let p = circle.point(a);
            writeln!(rows, "{a:.15e},{:.15e},{:.15e}", p.u, p.v)?;
        }
    }
    fs::write(out.join("circle.csv"), rows)?;
    write_plot(out, "plot 'circle.csv' using 2:3 with lines title 'oracle circle'\n")?;
    Ok(Outcome::ok(json!({ "radius": answer.radius, "period": answer.period })))
}

fn taimanov(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let system = cfg.system()?;
    let e = cfg.energy()?;
    let seed = match (cfg.seed.radius, cfg.seed.centre) {
        (Some(r), centre) => {
            let centre = centre.unwrap_or_else(|| default_point(&system.surface).coords());
            Region::discs(vec![RegionCurve::circle(cfg.seed.chart, centre, r, 96, cfg.seed.clockwise)?])
        }
        (None, _) => minimum_seeds(&system, &cfg.seed.radii, 48, 1)?
            .into_iter()
            .next()
            .context("f has no negative minimum to seed from; set run.seed_radius")?,
    };
    let params = TaimanovParams {
        tol: cfg.solver.taimanov_tol,
        max_iter: cfg.solver.taimanov_max_iter,
        snapshot_every: Some(cfg.solver.snapshot_every),
        ..TaimanovParams::default()
    };
    let res = evolve_minimize(&seed, &system, e.k, &params)?;
    write_snapshots_csv(&res.history, &out.join("snapshots.csv"))?;
    write_json(&res.region, &out.join("region.json"))?;
    // stationary boundaries are periodic orbits; refinement failures are
    // reported per curve and do not fail the run
    let mut orbits = Vec::new();
    if res.outcome == TaimanovOutcome::Stationary {
        for (i, curve) in res.region.curves.iter().enumerate() {
            orbits.push(match refine_to_orbit(curve, &system, e.k, &shooting_params(cfg)) {
                Ok(orbit) => {
                    write_trajectory_csv(&system, &orbit.trajectory, &out.join(format!("orbit_{i}.csv")))?;
                    json!({
                        "period": orbit.period,
                        "curvature_residual": orbit.curvature_residual,
                        "closure_gap": orbit.closure_gap,
                    })
                }
                Err(err) => json!({ "error": err.to_string() }),
            });
        }
    }
    let mut plot = String::from("plot 'snapshots.csv' using 3:4:1 with points pt 7 ps 0.3 palette title 'curve snapshots'");
    for i in 0..orbits.len() {
        write!(plot, ", 'orbit_{i}.csv' using 3:4 with lines title 'orbit {i}'")?;
    }
    plot.push('\n');
    write_plot(out, &plot)?;
    let summary = json!({
        "outcome": res.outcome,
        "value": res.value,
        "residual": res.residual,
        "iterations": res.iterations,
        "newton_steps": res.newton_steps,
        "orbits": orbits,
    });
    Ok(match res.outcome {
        TaimanovOutcome::Stationary | TaimanovOutcome::Vanished | TaimanovOutcome::BelowBound => Outcome::ok(summary),
        TaimanovOutcome::SelfIntersection | TaimanovOutcome::MaxIterations => Outcome::failed(summary),
    })
}

fn critical(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let system = cfg.system()?;
    let mut report = closed_form_report(&system);
    let mut plot = String::new();
    if matches!(system.surface, SurfaceModel::FlatTorus { .. }) && system.flux()?.abs() < 1e-9 {
        let bound = c0_upper_bound(&system, &C0Params { grid: cfg.solver.c0_grid, budget: cfg.solver.c0_budget, ..C0Params::default() })?;
        write_witness_csv(&bound, &system, &out.join("witness.csv"))?;
        plot.push_str("plot 'witness.csv' using 1:2:($3/50):($4/50) with vectors title 'witness primitive'\n");
        report.c0_upper = Some(bound.value);
        report.c0_sup_norm = Some(bound.sup_norm);
        report.witness_harmonic = Some(bound.harmonic);
        if cfg.tau {
            let seeds = minimum_seeds(&system, &cfg.seed.radii, 48, 1)?;
            let range = cfg.tau_range.unwrap_or((0.1 * bound.value.max(1e-6), 2.0 * bound.value.max(1e-6)));
            report.tau = Some(tau_estimate(&system, &seeds, range, &TaimanovParams::default())?.tau);
        }
    }
    if plot.is_empty() {
        plot.push_str("# closed-form values only; see summary.json\n");
    }
    write_plot(out, &plot)?;
    Ok(Outcome::ok(serde_json::to_value(report)?))
}

fn candidate(cfg: &RunConfig, system: &MagneticSystem) -> Result<Candidate> {
    let exact_zeta = || -> Result<Candidate> {
        let (c1, c2) = cfg.harmonic;
        Ok(Candidate::Exact { zeta: local_primitive(system, PrimitiveRegion::Torus { c1, c2 })? })
    };
    let name = match cfg.candidate.as_deref() {
        Some(n) => n.to_string(),
        None => match &system.surface {
            SurfaceModel::RoundSphere => "alpha_plus_psi".into(),
            SurfaceModel::HyperbolicPlane { .. } => "alpha_minus_psi".into(),
            _ if system.flux()?.abs() < 1e-9 => "exact".into(),
            _ => "closed_torus".into(),
        },
    };
    Ok(match name.as_str() {
        "alpha_plus_psi" => Candidate::Homogeneous { sign: 1.0 },
        "alpha_minus_psi" => Candidate::Homogeneous { sign: -1.0 },
        "exact" => exact_zeta()?,
        "nonexact" => {
            Candidate::Nonexact { zeta: homogeneous_zeta(system).context("the nonexact candidate is built for homogeneous fields")? }
        }
        "closed_torus" => Candidate::ClosedTorus { c1: cfg.harmonic.0, c2: cfg.harmonic.1 },
        other => bail!("run.candidate {other:?} is not one of alpha_plus_psi, alpha_minus_psi, exact, nonexact, closed_torus"),
    })
}

fn contact_check(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let system = cfg.system()?;
    let e = cfg.energy()?;
    let cand = candidate(cfg, &system)?;
    let grid = SmGrid { base: cfg.solver.sm_grid, fiber: cfg.solver.fiber_grid, exec: Execution::default() };
    let cert = contact_candidate_min_with(&system, e.s, &cand, &grid)?;
    write_json(&cert, &out.join("certificate.json"))?;
    write_slice_csv(&system, e.s, &cand, 0.0, cfg.solver.sm_grid.min(64), &out.join("slice.csv"))?;
    write_plot(out, "set view map\nsplot 'slice.csv' using 1:2:3 with points pt 5 ps 0.5 palette title 'tau(X_s) at angle 0'\n")?;
    let mut summary = serde_json::to_value(&cert)?;
    if let Ok(lv) = liouville_action_with(&system, e.s, None, &grid) {
        write_json(&lv, &out.join("liouville.json"))?;
        summary["liouville_action"] = json!(lv.quadrature_action);
    }
    Ok(Outcome::ok(summary))
}

fn sweep(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let system = cfg.system()?;
    if cfg.sweep.is_empty() {
        bail!("sweep needs run.sweep_k or run.sweep_s");
    }
    let params = shooting_params(cfg);
    let runs: Vec<(Value, bool)> = Execution::default().map(cfg.sweep.len(), |i| {
        let e = cfg.sweep[i];
        let result = seed_state(cfg, &system, e).and_then(|seed| Ok(shoot_periodic(&system, e.k, seed, &section_through(&seed), &params)?));
        match result {
            Ok(orbit) => (orbit_summary(&system, e, &orbit), true),
            Err(err) => {
                let mut v = err
                    .downcast_ref::<Error>()
                    .and_then(solver_failure)
                    .unwrap_or_else(|| json!({ "outcome": "error", "message": err.to_string() }));
                v["k"] = json!(e.k);
                v["s"] = json!(e.s);
                (v, false)
            }
        }
    });
    let mut csv = String::from("k,s,period\n");
    for (v, ok) in &runs {
        let period = if *ok { v["period"].as_f64().map(|p| format!("{p:.15e}")).unwrap_or_default() } else { String::new() };
        writeln!(csv, "{},{},{period}", v["k"], v["s"])?;
    }
    fs::write(out.join("sweep.csv"), csv)?;
    write_plot(out, "set size noratio\nplot 'sweep.csv' using 2:3 with linespoints title 'period against s'\n")?;
    let all = runs.iter().all(|(_, ok)| *ok);
    let summary = json!({ "runs": runs.into_iter().map(|(v, _)| v).collect::<Vec<_>>() });
    Ok(if all { Outcome::ok(summary) } else { Outcome::failed(summary) })
}
