//! INI run configuration with the sections `[surface]`, `[field]`,
//! `[solver]` and `[run]`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use ini::Ini;
use magflow::geometry::ConformalFactor;
use magflow::io::read_grid_csv;
use magflow::magnetic::{energy_of_s, s_of_energy, Bump};
use magflow::numerics::{TrigSeries, TrigTerm};
use magflow::{MagneticField, MagneticSystem, SurfaceModel};

const SURFACE_KEYS: &[&str] = &["kind", "lx", "ly", "genus", "factor_constant", "factor_terms", "factor_path"];
const FIELD_KEYS: &[&str] = &["kind", "value", "constant", "terms", "base", "bumps", "height", "path"];
const SOLVER_KEYS: &[&str] = &[
    "n",
    "dt",
    "t_max",
    "tol",
    "max_iter",
    "descent_tol",
    "descent_max_iter",
    "newton_threshold",
    "taimanov_tol",
    "taimanov_max_iter",
    "snapshot_every",
    "c0_grid",
    "c0_budget",
    "sm_grid",
    "fiber_grid",
    "bisections",
];
const RUN_KEYS: &[&str] = &[
    "k",
    "s",
    "output",
    "seed_x",
    "seed_y",
    "seed_vx",
    "seed_vy",
    "seed_chart",
    "seed_centre_x",
    "seed_centre_y",
    "seed_radius",
    "seed_period",
    "seed_clockwise",
    "seed_radii",
    "candidate",
    "harmonic_c1",
    "harmonic_c2",
    "tau",
    "tau_k_min",
    "tau_k_max",
    "sweep_k",
    "sweep_s",
];

#[derive(Debug, Clone, PartialEq)]
pub enum SurfaceSpec {
    Sphere,
    FlatTorus { lx: f64, ly: f64 },
    Hyperbolic { genus: Option<u32> },
    ConformalSeries { lx: f64, ly: f64, series: TrigSeries },
    ConformalGrid { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldSpec {
    Constant(f64),
    Series(TrigSeries),
    Bumps { base: f64, bumps: Vec<Bump> },
    SphereAffine { constant: f64, height: f64 },
    Grid { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Vertices of discrete loops.
    pub n: usize,
    pub dt: f64,
    /// Integration horizon of `simulate` and the return-time cap of shooting.
    pub t_max: f64,
    /// Shooting tolerance.
    pub tol: f64,
    pub max_iter: usize,
    pub descent_tol: f64,
    pub descent_max_iter: usize,
    pub newton_threshold: f64,
    pub taimanov_tol: f64,
    pub taimanov_max_iter: usize,
    pub snapshot_every: usize,
    pub c0_grid: usize,
    pub c0_budget: usize,
    pub sm_grid: usize,
    pub fiber_grid: usize,
    pub bisections: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n: 2048,
            dt: 1e-3,
            t_max: 100.0,
            tol: 1e-10,
            max_iter: 50,
            descent_tol: 1e-8,
            descent_max_iter: 5000,
            newton_threshold: 0.05,
            taimanov_tol: 1e-3,
            taimanov_max_iter: 200_000,
            snapshot_every: 500,
            c0_grid: 64,
            c0_budget: 1200,
            sm_grid: 128,
            fiber_grid: 64,
            bisections: 20,
        }
    }
}

/// Initial data; every entry is optional and each subcommand picks a
/// default from the surface when it is missing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SeedConfig {
    pub chart: u8,
    pub position: Option<[f64; 2]>,
    pub velocity: Option<[f64; 2]>,
    pub centre: Option<[f64; 2]>,
    pub radius: Option<f64>,
    pub period: Option<f64>,
    pub clockwise: bool,
    pub radii: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energy {
    pub k: f64,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub surface: SurfaceSpec,
    pub field: FieldSpec,
    pub energy: Option<Energy>,
    pub solver: SolverConfig,
    pub seed: SeedConfig,
    pub output: PathBuf,
    pub candidate: Option<String>,
    pub harmonic: (f64, f64),
    pub tau: bool,
    pub tau_range: Option<(f64, f64)>,
    /// Energies for `sweep`.
    pub sweep: Vec<Energy>,
    /// Relative paths in the file are resolved against this directory.
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn energy(&self) -> Result<Energy> {
        self.energy.ok_or_else(|| anyhow!("[run] needs one of k or s"))
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn surface_model(&self) -> Result<SurfaceModel> {
        Ok(match &self.surface {
            SurfaceSpec::Sphere => SurfaceModel::RoundSphere,
            SurfaceSpec::FlatTorus { lx, ly } => SurfaceModel::FlatTorus { lx: *lx, ly: *ly },
            SurfaceSpec::Hyperbolic { genus } => SurfaceModel::HyperbolicPlane { genus: *genus },
            SurfaceSpec::ConformalSeries { lx, ly, series } => {
                SurfaceModel::ConformalTorus { lx: *lx, ly: *ly, factor: ConformalFactor::Series(series.clone()) }
            }
            SurfaceSpec::ConformalGrid { path } => {
                let path = self.resolve(path);
                let grid = read_grid_csv(&path, "u").with_context(|| format!("reading {}", path.display()))?;
                SurfaceModel::ConformalTorus { lx: grid.lx, ly: grid.ly, factor: ConformalFactor::Grid(Arc::new(grid.spline()?)) }
            }
        })
    }

    pub fn system(&self) -> Result<MagneticSystem> {
        let surface = self.surface_model()?;
        let field = match &self.field {
            FieldSpec::Constant(c) => MagneticField::Constant(*c),
            FieldSpec::Series(s) => MagneticField::TorusSeries(s.clone()),
            FieldSpec::Bumps { base, bumps } => MagneticField::TorusBumps { base: *base, bumps: bumps.clone() },
            FieldSpec::SphereAffine { constant, height } => MagneticField::SphereAffine { constant: *constant, height: *height },
            FieldSpec::Grid { path } => {
                let path = self.resolve(path);
                let grid = read_grid_csv(&path, "f").with_context(|| format!("reading {}", path.display()))?;
                MagneticField::Grid(Arc::new(grid.spline()?))
            }
        };
        Ok(MagneticSystem::new(surface, field)?)
    }
}

/// Reads a config file; relative paths inside it are taken relative to the
/// file's directory.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = parse_config(&text)?;
    cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(cfg)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    // the ini parser only notices an unclosed header at end of input
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.starts_with('[') && !line.ends_with(']') {
            bail!("config parse error at line {}: unclosed section header {line:?}", i + 1);
        }
    }
    let ini = Ini::load_from_str(text).map_err(|e| anyhow!("config parse error at line {}: {}", e.line, e.msg))?;
    for (section, props) in ini.iter() {
        let (name, allowed) = match section {
            Some("surface") => ("surface", SURFACE_KEYS),
            Some("field") => ("field", FIELD_KEYS),
            Some("solver") => ("solver", SOLVER_KEYS),
            Some("run") => ("run", RUN_KEYS),
            Some(other) => bail!("unknown section [{other}]"),
            None if props.is_empty() => continue,
            None => bail!("key {:?} appears before any section", props.iter().next().map(|(k, _)| k).unwrap_or_default()),
        };
        for (key, _) in props.iter() {
            if !allowed.contains(&key) {
                bail!("unknown key {key:?} in [{name}]");
            }
            if props.get_all(key).count() > 1 {
                bail!("key {key:?} is repeated in [{name}]");
            }
        }
        if ini.section_all(Some(name)).count() > 1 {
            bail!("section [{name}] appears more than once");
        }
    }
    let get = |section: &str, key: &str| lookup(&ini, section, key);

    let surface = parse_surface(&|k| get("surface", k))?;
    let field = parse_field(&|k| get("field", k))?;

    let mut solver = SolverConfig::default();
    {
        let sol = |k: &str| get("solver", k);
        set_usize(&mut solver.n, sol("n"), "solver.n", 3)?;
        set_pos(&mut solver.dt, sol("dt"), "solver.dt")?;
        set_pos(&mut solver.t_max, sol("t_max"), "solver.t_max")?;
        set_pos(&mut solver.tol, sol("tol"), "solver.tol")?;
        set_usize(&mut solver.max_iter, sol("max_iter"), "solver.max_iter", 1)?;
        set_pos(&mut solver.descent_tol, sol("descent_tol"), "solver.descent_tol")?;
        set_usize(&mut solver.descent_max_iter, sol("descent_max_iter"), "solver.descent_max_iter", 1)?;
        set_pos(&mut solver.newton_threshold, sol("newton_threshold"), "solver.newton_threshold")?;
        set_pos(&mut solver.taimanov_tol, sol("taimanov_tol"), "solver.taimanov_tol")?;
        set_usize(&mut solver.taimanov_max_iter, sol("taimanov_max_iter"), "solver.taimanov_max_iter", 1)?;
        set_usize(&mut solver.snapshot_every, sol("snapshot_every"), "solver.snapshot_every", 1)?;
        set_usize(&mut solver.c0_grid, sol("c0_grid"), "solver.c0_grid", 8)?;
        set_usize(&mut solver.c0_budget, sol("c0_budget"), "solver.c0_budget", 1)?;
        set_usize(&mut solver.sm_grid, sol("sm_grid"), "solver.sm_grid", 4)?;
        set_usize(&mut solver.fiber_grid, sol("fiber_grid"), "solver.fiber_grid", 2)?;
        set_usize(&mut solver.bisections, sol("bisections"), "solver.bisections", 1)?;
    }

    let run = |k: &str| get("run", k);
    let energy = match (run("k"), run("s")) {
        (Some(_), Some(_)) => bail!("give only one of run.k and run.s"),
        (Some(k), None) => {
            let k = pos(k, "run.k")?;
            Some(Energy { k, s: s_of_energy(k)? })
        }
        (None, Some(s)) => {
            let s = pos(s, "run.s")?;
            Some(Energy { k: energy_of_s(s)?, s })
        }
        (None, None) => None,
    };
    let pair = |a: &str, b: &str| -> Result<Option<[f64; 2]>> {
        match (run(a), run(b)) {
            (Some(x), Some(y)) => Ok(Some([num(x, &format!("run.{a}"))?, num(y, &format!("run.{b}"))?])),
            (None, None) => Ok(None),
            _ => bail!("run.{a} and run.{b} must be given together"),
        }
    };
    let seed = SeedConfig {
        chart: run("seed_chart").map(|c| parse_usize(c, "run.seed_chart")).transpose()?.unwrap_or(0).min(255) as u8,
        position: pair("seed_x", "seed_y")?,
        velocity: pair("seed_vx", "seed_vy")?,
        centre: pair("seed_centre_x", "seed_centre_y")?,
        radius: run("seed_radius").map(|r| pos(r, "run.seed_radius")).transpose()?,
        period: run("seed_period").map(|r| pos(r, "run.seed_period")).transpose()?,
        clockwise: run("seed_clockwise").map(|b| parse_bool(b, "run.seed_clockwise")).transpose()?.unwrap_or(false),
        radii: match run("seed_radii") {
            Some(list) => list_of(list, "run.seed_radii")?,
            None => vec![0.1, 0.2, 0.3],
        },
    };
    if seed.radii.iter().any(|r| !(*r > 0.0)) {
        bail!("run.seed_radii must be positive");
    }
    let sweep = match (run("sweep_k"), run("sweep_s")) {
        (Some(_), Some(_)) => bail!("give only one of run.sweep_k and run.sweep_s"),
        (Some(list), None) => list_of(list, "run.sweep_k")?
            .into_iter()
            .map(|k| Ok(Energy { k, s: s_of_energy(k).context("run.sweep_k")? }))
            .collect::<Result<_>>()?,
        (None, Some(list)) => list_of(list, "run.sweep_s")?
            .into_iter()
            .map(|s| Ok(Energy { k: energy_of_s(s).context("run.sweep_s")?, s }))
            .collect::<Result<_>>()?,
        (None, None) => Vec::new(),
    };
    let tau_range = match (run("tau_k_min"), run("tau_k_max")) {
        (Some(a), Some(b)) => {
            let (a, b) = (pos(a, "run.tau_k_min")?, pos(b, "run.tau_k_max")?);
            if a >= b {
                bail!("run.tau_k_min must be below run.tau_k_max");
            }
            Some((a, b))
        }
        (None, None) => None,
        _ => bail!("run.tau_k_min and run.tau_k_max must be given together"),
    };
    Ok(RunConfig {
        surface,
        field,
        energy,
        solver,
        seed,
        output: PathBuf::from(run("output").unwrap_or("out")),
        candidate: run("candidate").map(str::to_string),
        harmonic: (
            run("harmonic_c1").map(|x| num(x, "run.harmonic_c1")).transpose()?.unwrap_or(0.0),
            run("harmonic_c2").map(|x| num(x, "run.harmonic_c2")).transpose()?.unwrap_or(0.0),
        ),
        tau: run("tau").map(|b| parse_bool(b, "run.tau")).transpose()?.unwrap_or(false),
        tau_range,
        sweep,
        base_dir: PathBuf::new(),
    })
}

fn lookup<'a>(ini: &'a Ini, section: &str, key: &str) -> Option<&'a str> {
    ini.section(Some(section)).and_then(|s| s.get(key)).map(str::trim)
}

fn parse_surface<'a>(get: &dyn Fn(&str) -> Option<&'a str>) -> Result<SurfaceSpec> {
    let kind = get("kind").ok_or_else(|| anyhow!("surface.kind is required"))?;
    let periods = || -> Result<(f64, f64)> {
        Ok((
            get("lx").map(|x| pos(x, "surface.lx")).transpose()?.unwrap_or(1.0),
            get("ly").map(|x| pos(x, "surface.ly")).transpose()?.unwrap_or(1.0),
        ))
    };
    let only = |allowed: &[&str]| -> Result<()> {
        for key in SURFACE_KEYS {
            if *key != "kind" && !allowed.contains(key) && get(key).is_some() {
                bail!("surface.{key} does not apply to kind = {kind}");
            }
        }
        Ok(())
    };
    Ok(match kind {
        "sphere" => {
            only(&[])?;
            SurfaceSpec::Sphere
        }
        "torus" | "flat_torus" => {
            only(&["lx", "ly"])?;
            let (lx, ly) = periods()?;
            SurfaceSpec::FlatTorus { lx, ly }
        }
        "hyperbolic" => {
            only(&["genus"])?;
            let genus = get("genus").map(|g| parse_usize(g, "surface.genus")).transpose()?;
            if let Some(g) = genus {
                if g < 2 {
                    bail!("surface.genus must be at least 2, got {g}");
                }
            }
            SurfaceSpec::Hyperbolic { genus: genus.map(|g| g as u32) }
        }
        "conformal_torus" => {
            if let Some(path) = get("factor_path") {
                only(&["factor_path"])?;
                SurfaceSpec::ConformalGrid { path: PathBuf::from(path) }
            } else {
                only(&["lx", "ly", "factor_constant", "factor_terms"])?;
                let (lx, ly) = periods()?;
                let series = TrigSeries {
                    constant: get("factor_constant").map(|c| num(c, "surface.factor_constant")).transpose()?.unwrap_or(0.0),
                    terms: get("factor_terms").map(|t| terms(t, "surface.factor_terms")).transpose()?.unwrap_or_default(),
                };
                SurfaceSpec::ConformalSeries { lx, ly, series }
            }
        }
        other => bail!("surface.kind {other:?} is not one of sphere, torus, hyperbolic, conformal_torus"),
    })
}

fn parse_field<'a>(get: &dyn Fn(&str) -> Option<&'a str>) -> Result<FieldSpec> {
    let kind = match get("kind") {
        Some(k) => k,
        None if get("path").is_some() => "grid",
        None if get("bumps").is_some() => "bumps",
        None if get("terms").is_some() => "series",
        None if get("height").is_some() => "sphere_affine",
        None => "constant",
    };
    let only = |allowed: &[&str]| -> Result<()> {
        for key in FIELD_KEYS {
            if *key != "kind" && !allowed.contains(key) && get(key).is_some() {
                bail!("field.{key} does not apply to kind = {kind}");
            }
        }
        Ok(())
    };
    let opt = |key: &str, default: f64| get(key).map(|x| num(x, &format!("field.{key}"))).transpose().map(|x| x.unwrap_or(default));
    Ok(match kind {
        "constant" => {
            only(&["value", "constant"])?;
            match (get("value"), get("constant")) {
                (Some(_), Some(_)) => bail!("give only one of field.value and field.constant"),
                (Some(v), None) | (None, Some(v)) => FieldSpec::Constant(num(v, "field.value")?),
                (None, None) => FieldSpec::Constant(1.0),
            }
        }
        "series" => {
            only(&["constant", "terms"])?;
            FieldSpec::Series(TrigSeries {
                constant: opt("constant", 0.0)?,
                terms: get("terms").map(|t| terms(t, "field.terms")).transpose()?.unwrap_or_default(),
            })
        }
        "bumps" => {
            only(&["base", "bumps"])?;
            let list = get("bumps").ok_or_else(|| anyhow!("field.bumps is required for kind = bumps"))?;
            let bumps = rows(list, 4, "field.bumps")?
                .into_iter()
                .map(|r| {
                    if !(r[3] > 0.0) {
                        bail!("field.bumps: width must be positive");
                    }
                    Ok(Bump { x0: r[0], y0: r[1], amplitude: r[2], width: r[3] })
                })
                .collect::<Result<_>>()?;
            FieldSpec::Bumps { base: opt("base", 0.0)?, bumps }
        }
        "sphere_affine" => {
            only(&["constant", "height"])?;
            FieldSpec::SphereAffine { constant: opt("constant", 0.0)?, height: opt("height", 0.0)? }
        }
        "grid" => {
            only(&["path"])?;
            FieldSpec::Grid { path: PathBuf::from(get("path").ok_or_else(|| anyhow!("field.path is required for kind = grid"))?) }
        }
        other => bail!("field.kind {other:?} is not one of constant, series, bumps, sphere_affine, grid"),
    })
}

fn num(text: &str, key: &str) -> Result<f64> {
    text.trim().parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| anyhow!("{key}: {text:?} is not a finite number"))
}

fn pos(text: &str, key: &str) -> Result<f64> {
    let x = num(text, key)?;
    if x > 0.0 {
        Ok(x)
    } else {
        bail!("{key} must be positive, got {x}")
    }
}

fn parse_usize(text: &str, key: &str) -> Result<usize> {
    text.trim().parse::<usize>().map_err(|_| anyhow!("{key}: {text:?} is not a non-negative integer"))
}

fn parse_bool(text: &str, key: &str) -> Result<bool> {
    match text.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => bail!("{key}: {other:?} is not a boolean"),
    }
}

fn set_pos(slot: &mut f64, text: Option<&str>, key: &str) -> Result<()> {
    if let Some(t) = text {
        *slot = pos(t, key)?;
    }
    Ok(())
}

fn set_usize(slot: &mut usize, text: Option<&str>, key: &str, min: usize) -> Result<()> {
    if let Some(t) = text {
        let v = parse_usize(t, key)?;
        if v < min {
            bail!("{key} must be at least {min}, got {v}");
        }
        *slot = v;
    }
    Ok(())
}

fn list_of(text: &str, key: &str) -> Result<Vec<f64>> {
    text.split(',').filter(|t| !t.trim().is_empty()).map(|t| num(t, key)).collect()
}

/// `;`-separated rows of whitespace-separated numbers.
fn rows(text: &str, width: usize, key: &str) -> Result<Vec<Vec<f64>>> {
    text.split(';')
        .filter(|r| !r.trim().is_empty())
        .map(|r| {
            let v: Vec<f64> = r.split_whitespace().map(|t| num(t, key)).collect::<Result<_>>()?;
            if v.len() != width {
                bail!("{key}: each entry needs {width} numbers, got {r:?}");
            }
            Ok(v)
        })
        .collect()
}

/// Trigonometric terms `m n a b; …` for `a cos(k·q) + b sin(k·q)`.
fn terms(text: &str, key: &str) -> Result<Vec<TrigTerm>> {
    rows(text, 4, key)?
        .into_iter()
        .map(|r| {
            if r[0].fract() != 0.0 || r[1].fract() != 0.0 {
                bail!("{key}: wave numbers must be integers");
            }
            Ok(TrigTerm { m: r[0] as i32, n: r[1] as i32, a: r[2], b: r[3] })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_from_strength() {
        let cfg = parse_config("[surface]\nkind=sphere\n[run]\ns=1.0\n").unwrap();
        assert_eq!(cfg.surface, SurfaceSpec::Sphere);
        assert_eq!(cfg.field, FieldSpec::Constant(1.0));
        let e = cfg.energy.unwrap();
        assert_eq!((e.k, e.s), (0.5, 1.0));
        assert_eq!(cfg.solver, SolverConfig::default());
    }

    #[test]
    fn k_and_s_are_exclusive() {
        let err = parse_config("[surface]\nkind=sphere\n[run]\nk=0.5\ns=1\n").unwrap_err();
        assert!(err.to_string().contains("only one of run.k and run.s"));
    }

    #[test]
    fn genus_two_homogeneous() {
        let cfg = parse_config("[surface]\nkind=hyperbolic\ngenus=2\n[field]\nconstant=1\n").unwrap();
        let sys = cfg.system().unwrap();
        assert!(matches!(sys.surface, SurfaceModel::HyperbolicPlane { genus: Some(2) }));
        assert_eq!(sys.field.constant_value(), Some(1.0));
    }

    #[test]
    fn unknown_keys_and_sections_are_rejected() {
        let err = parse_config("[surface]\nkind=sphere\nradius=2\n").unwrap_err();
        assert!(err.to_string().contains("\"radius\""), "{err}");
        assert!(parse_config("[surface]\nkind=sphere\n[plot]\nx=1\n").is_err());
        assert!(parse_config("[surface]\nkind=sphere\ngenus=2\n").is_err());
        assert!(parse_config("[surface]\nkind=sphere\n[solver]\ndt=-1\n").unwrap_err().to_string().contains("solver.dt"));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_config("[surface]\nkind=sphere\n[run\ns=1\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn series_bumps_and_sweeps() {
        let cfg =
            parse_config("[surface]\nkind=torus\n[field]\nterms=1 0 0.3 0; 0 1 0 0.1\nconstant=1\n[run]\nsweep_s=0.5, 1, 2\n").unwrap();
        match &cfg.field {
            FieldSpec::Series(s) => assert_eq!(s.terms.len(), 2),
            other => panic!("{other:?}"),
        }
        assert_eq!(cfg.sweep.iter().map(|e| e.s).collect::<Vec<_>>(), vec![0.5, 1.0, 2.0]);
        let cfg = parse_config("[surface]\nkind=torus\n[field]\nbase=1\nbumps=0.5 0.5 -2 0.28\n").unwrap();
        assert!(matches!(cfg.field, FieldSpec::Bumps { base, ref bumps } if base == 1.0 && bumps.len() == 1));
        assert!(parse_config("[surface]\nkind=torus\n[field]\nbumps=0.5 0.5 -2\n").is_err());
    }

    proptest::proptest! {
        #[test]
        fn strength_round_trips(s in 1e-3..1e3f64, t_max in 0.1..500.0f64) {
            let cfg = parse_config(&format!("[surface]\nkind=torus\n[run]\ns={s}\n[solver]\nt_max={t_max}\n")).unwrap();
            let e = cfg.energy.unwrap();
            proptest::prop_assert_eq!(e.s, s);
            proptest::prop_assert!((e.k - 0.5 / (s * s)).abs() <= 1e-15 * e.k);
            proptest::prop_assert_eq!(cfg.solver.t_max, t_max);
        }

        #[test]
        fn unknown_keys_never_pass(key in "[a-z]{3,10}") {
            proptest::prop_assume!(!RUN_KEYS.contains(&key.as_str()));
            let text = format!("[surface]\nkind=sphere\n[run]\n{key}=1\n");
            proptest::prop_assert!(parse_config(&text).is_err());
        }
    }
}
