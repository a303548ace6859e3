//! Run configuration in a line-oriented `key = value` format.
//!
//! ```text
//! # comments run from '#' to the end of the line
//! [kernel]
//! alpha = 0.6666666666666666
//! tau = 1
//! gamma = 0.5
//!
//! [material]
//! mu = 1
//! lambda = 1
//! rho = 3000
//!
//! [mesh]
//! nx = 16
//! ny = 16
//! lx = 1
//! ly = 1
//!
//! [time]
//! end = 40
//! step = 0.03125        # or: steps = 1280
//! grading = 1           # t_n = end (n/N)^grading; 1 is uniform
//!
//! [loads]
//! volume = 0, 0
//! traction.right = 0, -1
//!
//! [initial]
//! shape = rest          # rest | static
//! traction.right = 0, -1
//!
//! [probes]
//! probe = 1, 1, y       # repeatable: x, y, component
//!
//! [solver]
//! weights = closed_form # closed_form | midpoint
//! mass = consistent     # consistent | lumped
//! solver = auto         # auto | direct | cg
//! cg_tol = 1e-12
//! residual_tol = 1e-10
//!
//! [output]
//! dir = output
//! ```
//!
//! Every key is optional. Sections may appear in any order and more than once,
//! but a key may be set only once (except `probe`). The side `left` (`x = 0`) is
//! clamped, so it takes no traction. Velocity starts at zero. With
//! `shape = static` the initial displacement is the relaxed static response
//! `(1 - γ) a(u, v) = ⟨loads of [initial], v⟩`.

use std::fmt;
use std::str::FromStr;

use crate::error::Result;
use crate::fem::{
    assemble_with, build_rect_mesh, quasi_static_solve, AssembledSystem, ElasticParams, Loads,
    MassKind, Mesh, Side, SolverKind,
};
use crate::mlf::KernelParams;
use crate::stepper::StepperOptions;
use crate::weights::{build_weights, TimeGrid, WeightMode, WeightTable};

/// Probe points farther than this from every vertex are snapped with a warning.
pub const SNAP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ConfigIssue {
    pub line: usize,
    pub message: String,
}

/// Every problem found in a configuration, in line order.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshSpec {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSpec {
    pub end: f64,
    pub steps: usize,
    pub grading: f64,
}

/// Constant body force and per-side constant tractions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadSpec {
    pub volume: [f64; 2],
    /// Nonzero entries only, at most one per side, ordered as [`Side::ALL`].
    pub traction: Vec<(Side, [f64; 2])>,
}

impl LoadSpec {
    pub fn to_loads(&self) -> Loads {
        Loads::constant(self.volume, &self.traction)
    }

    pub fn is_zero(&self) -> bool {
        self.volume == [0.0, 0.0] && self.traction.iter().all(|(_, g)| *g == [0.0, 0.0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialShape {
    #[default]
    Rest,
    Static,
}

impl FromStr for InitialShape {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "rest" => Ok(Self::Rest),
            "static" => Ok(Self::Static),
            _ => Err(format!(
                "unknown initial shape '{s}' (expected rest or static)"
            )),
        }
    }
}

impl fmt::Display for InitialShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Rest => "rest",
            Self::Static => "static",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InitialSpec {
    pub shape: InitialShape,
    pub loads: LoadSpec,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub point: [f64; 2],
    /// 0 for `x`, 1 for `y`.
    pub component: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSpec {
    pub weights: WeightMode,
    pub mass: MassKind,
    pub solver: SolverKind,
    pub residual_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kernel: KernelParams,
    pub elastic: ElasticParams,
    pub mesh: MeshSpec,
    pub time: TimeSpec,
    pub loads: LoadSpec,
    pub initial: InitialSpec,
    pub probes: Vec<Probe>,
    pub solver: SolverSpec,
    pub output_dir: String,
}

/// A parsed configuration with the fields that fell back to defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConfig {
    pub config: RunConfig,
    /// `section.key` names in the order they are documented.
    pub defaulted: Vec<String>,
    pub warnings: Vec<String>,
}

const DEFAULT_STEP: f64 = 1.0 / 32.0;
const DEFAULT_CG_TOL: f64 = 1e-12;

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            kernel: KernelParams::standard(),
            elastic: ElasticParams {
                mu: 1.0,
                lambda: 1.0,
                rho: 3000.0,
            },
            mesh: MeshSpec {
                nx: 16,
                ny: 16,
                lx: 1.0,
                ly: 1.0,
            },
            time: TimeSpec {
                end: 40.0,
                steps: 1280,
                grading: 1.0,
            },
            loads: LoadSpec {
                volume: [0.0, 0.0],
                traction: vec![(Side::Right, [0.0, -1.0])],
            },
            initial: InitialSpec::default(),
            probes: vec![Probe {
                point: [1.0, 1.0],
                component: 1,
            }],
            solver: SolverSpec {
                weights: WeightMode::ClosedForm,
                mass: MassKind::Consistent,
                solver: SolverKind::Auto,
                residual_tol: 1e-10,
            },
            output_dir: "output".into(),
        }
    }
}

const SECTIONS: [&str; 9] = [
    "kernel", "material", "mesh", "time", "loads", "initial", "probes", "solver", "output",
];

/// Documented keys per section, in serialization order.
const KEYS: [(&str, &[&str]); 9] = [
    ("kernel", &["alpha", "tau", "gamma"]),
    ("material", &["mu", "lambda", "rho"]),
    ("mesh", &["nx", "ny", "lx", "ly"]),
    ("time", &["end", "steps", "step", "grading"]),
    (
        "loads",
        &[
            "volume",
            "traction.left",
            "traction.right",
            "traction.bottom",
            "traction.top",
        ],
    ),
    (
        "initial",
        &[
            "shape",
            "volume",
            "traction.left",
            "traction.right",
            "traction.bottom",
            "traction.top",
        ],
    ),
    ("probes", &["probe"]),
    (
        "solver",
        &["weights", "mass", "solver", "cg_tol", "residual_tol"],
    ),
    ("output", &["dir"]),
];

/// One `key = value` occurrence.
#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: String,
}

#[derive(Default)]
struct Reader {
    /// `(section.key, entry)` in file order.
    entries: Vec<(String, Entry)>,
    issues: Vec<ConfigIssue>,
}

impl Reader {
    fn issue(&mut self, line: usize, message: impl Into<String>) {
        self.issues.push(ConfigIssue {
            line,
            message: message.into(),
        });
    }

    fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, e)| e)
    }

    fn all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a Entry> + 'a {
        self.entries
            .iter()
            .filter(move |(k, _)| k == key)
            .map(|(_, e)| e)
    }

    /// Parse `key` with `f`, recording a type error on failure.
    fn value<T>(
        &mut self,
        key: &str,
        f: impl Fn(&str) -> std::result::Result<T, String>,
    ) -> Option<(T, usize)> {
        let e = self.get(key)?.clone();
        match f(&e.value) {
            Ok(v) => Some((v, e.line)),
            Err(msg) => {
                self.issue(e.line, format!("{key}: {msg}"));
                None
            }
        }
    }
}

fn real(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("expected a finite number, got '{s}'")),
    }
}

fn count(s: &str) -> std::result::Result<usize, String> {
    s.parse::<usize>()
        .map_err(|_| format!("expected a non-negative integer, got '{s}'"))
}

fn pair(s: &str) -> std::result::Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(format!("expected two comma-separated numbers, got '{s}'"));
    }
    Ok([real(parts[0])?, real(parts[1])?])
}

fn component(s: &str) -> std::result::Result<usize, String> {
    match s {
        "x" => Ok(0),
        "y" => Ok(1),
        _ => Err(format!("expected component x or y, got '{s}'")),
    }
}

fn probe(s: &str) -> std::result::Result<Probe, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected 'x, y, component', got '{s}'"));
    }
    Ok(Probe {
        point: [real(parts[0])?, real(parts[1])?],
        component: component(parts[2])?,
    })
}

fn via_from_str<T: FromStr>(s: &str) -> std::result::Result<T, String>
where
    T::Err: fmt::Display,
{
    s.parse::<T>().map_err(|e| e.to_string())
}

enum Section {
    Before,
    Known(&'static str),
    Unknown,
}

fn tokenize(text: &str) -> Reader {
    let mut r = Reader::default();
    let mut section = Section::Before;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            section = match rest.strip_suffix(']').map(str::trim) {
                Some(name) => match SECTIONS.iter().find(|s| **s == name) {
                    Some(s) => Section::Known(s),
                    None => {
                        r.issue(line, format!("unknown section [{name}]"));
                        Section::Unknown
                    }
                },
                None => {
                    r.issue(line, format!("malformed section header '{content}'"));
                    Section::Unknown
                }
            };
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            r.issue(line, format!("expected 'key = value', got '{content}'"));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        let sec = match section {
            Section::Known(s) => s,
            // keys of a rejected section were reported with its header
            Section::Unknown => continue,
            Section::Before => {
                r.issue(
                    line,
                    format!("key '{key}' appears before any section header"),
                );
                continue;
            }
        };
        let known = KEYS
            .iter()
            .find(|(s, _)| *s == sec)
            .map(|(_, k)| *k)
            .unwrap_or(&[]);
        if !known.contains(&key) {
            r.issue(line, format!("unknown key '{key}' in [{sec}]"));
            continue;
        }
        let full = format!("{sec}.{key}");
        if key != "probe" {
            if let Some(first) = r.get(&full).map(|e| e.line) {
                r.issue(line, format!("{full} already set on line {first}"));
                continue;
            }
        }
        r.entries.push((
            full,
            Entry {
                line,
                value: value.to_string(),
            },
        ));
    }
    r
}

fn loads_section(r: &mut Reader, sec: &str, base: &LoadSpec) -> LoadSpec {
    let mut out = base.clone();
    if let Some((v, _)) = r.value(&format!("{sec}.volume"), pair) {
        out.volume = v;
    }
    let mut traction: Vec<(Side, [f64; 2])> = Vec::new();
    let mut any = false;
    for side in Side::ALL {
        let key = format!("{sec}.traction.{side}");
        if let Some((g, line)) = r.value(&key, pair) {
            any = true;
            if side == Side::Left {
                r.issue(
                    line,
                    format!("{key}: the side x = 0 is clamped and takes no traction"),
                );
                continue;
            }
            if g != [0.0, 0.0] {
                traction.push((side, g));
            }
        }
    }
    if any {
        out.traction = traction;
    }
    out
}

/// Parse configuration text. All problems are collected before returning.
pub fn parse_config(text: &str) -> std::result::Result<ParsedConfig, ConfigErrors> {
    let mut r = tokenize(text);
    let d = RunConfig::default();
    let mut c = d.clone();

    let checked = |r: &mut Reader, key: &str, ok: fn(f64) -> bool, rule: &str, slot: &mut f64| {
        if let Some((v, line)) = r.value(key, real) {
            if ok(v) {
                *slot = v;
            } else {
                r.issue(line, format!("{key} = {v} violates the constraint {rule}"));
            }
        }
    };
    checked(
        &mut r,
        "kernel.alpha",
        |v| v > 0.0 && v <= 1.0,
        "alpha in (0, 1]",
        &mut c.kernel.alpha,
    );
    checked(
        &mut r,
        "kernel.tau",
        |v| v > 0.0,
        "tau > 0",
        &mut c.kernel.tau,
    );
    checked(
        &mut r,
        "kernel.gamma",
        |v| (0.0..1.0).contains(&v),
        "gamma in [0, 1)",
        &mut c.kernel.gamma,
    );
    checked(
        &mut r,
        "material.mu",
        |v| v > 0.0,
        "mu > 0",
        &mut c.elastic.mu,
    );
    checked(
        &mut r,
        "material.lambda",
        |v| v > 0.0,
        "lambda > 0",
        &mut c.elastic.lambda,
    );
    checked(
        &mut r,
        "material.rho",
        |v| v > 0.0,
        "rho > 0",
        &mut c.elastic.rho,
    );
    checked(&mut r, "mesh.lx", |v| v > 0.0, "lx > 0", &mut c.mesh.lx);
    checked(&mut r, "mesh.ly", |v| v > 0.0, "ly > 0", &mut c.mesh.ly);
    for (key, slot) in [("mesh.nx", &mut c.mesh.nx), ("mesh.ny", &mut c.mesh.ny)] {
        if let Some((v, line)) = r.value(key, count) {
            if v >= 1 {
                *slot = v;
            } else {
                r.issue(
                    line,
                    format!("{key} = {v} violates the constraint {key} >= 1"),
                );
            }
        }
    }
    checked(&mut r, "time.end", |v| v > 0.0, "end > 0", &mut c.time.end);
    checked(
        &mut r,
        "time.grading",
        |v| v >= 1.0,
        "grading >= 1",
        &mut c.time.grading,
    );

    let steps = r.value("time.steps", count);
    let step = r.value("time.step", real);
    match (steps, step) {
        (Some(_), Some((_, line))) => {
            r.issue(line, "time.step and time.steps are mutually exclusive")
        }
        (Some((n, line)), None) => {
            if n >= 1 {
                c.time.steps = n;
            } else {
                r.issue(
                    line,
                    format!("time.steps = {n} violates the constraint steps >= 1"),
                );
            }
        }
        (None, Some((k, line))) => {
            let n = c.time.end / k;
            if !(k > 0.0) {
                r.issue(
                    line,
                    format!("time.step = {k} violates the constraint step > 0"),
                );
            } else if (n - n.round()).abs() <= 1e-9 * n && n.round() >= 1.0 {
                c.time.steps = n.round() as usize;
            } else {
                r.issue(
                    line,
                    format!("time.step = {k} does not divide time.end = {}", c.time.end),
                );
            }
        }
        (None, None) => c.time.steps = ((c.time.end / DEFAULT_STEP).round() as usize).max(1),
    }

    c.loads = loads_section(&mut r, "loads", &d.loads);
    c.initial.loads = loads_section(&mut r, "initial", &d.initial.loads);
    if let Some((s, _)) = r.value("initial.shape", via_from_str::<InitialShape>) {
        c.initial.shape = s;
    }

    let probe_entries: Vec<Entry> = r.all("probes.probe").cloned().collect();
    if !probe_entries.is_empty() {
        c.probes.clear();
        for e in probe_entries {
            match probe(&e.value) {
                Ok(p) => c.probes.push(p),
                Err(msg) => r.issue(e.line, format!("probes.probe: {msg}")),
            }
        }
    } else {
        c.probes[0].point = [c.mesh.lx, c.mesh.ly];
    }

    if let Some((m, _)) = r.value("solver.weights", via_from_str::<WeightMode>) {
        c.solver.weights = m;
    }
    if let Some((m, _)) = r.value("solver.mass", via_from_str::<MassKind>) {
        c.solver.mass = m;
    }
    if let Some((s, _)) = r.value("solver.solver", via_from_str::<SolverKind>) {
        c.solver.solver = s;
    }
    let mut cg_tol = DEFAULT_CG_TOL;
    checked(
        &mut r,
        "solver.cg_tol",
        |v| v > 0.0 && v < 1.0,
        "cg_tol in (0, 1)",
        &mut cg_tol,
    );
    if let Some(e) = r.get("solver.cg_tol") {
        if !matches!(c.solver.solver, SolverKind::Cg { .. }) {
            let line = e.line;
            r.issue(line, "solver.cg_tol requires solver = cg");
        }
    }
    if let SolverKind::Cg { .. } = c.solver.solver {
        c.solver.solver = SolverKind::cg(cg_tol);
    }
    checked(
        &mut r,
        "solver.residual_tol",
        |v| v > 0.0 && v < 1.0,
        "residual_tol in (0, 1)",
        &mut c.solver.residual_tol,
    );
    if let Some((dir, line)) = r.value("output.dir", |s| Ok::<_, String>(s.to_string())) {
        if dir.is_empty() {
            r.issue(line, "output.dir must not be empty");
        } else {
            c.output_dir = dir;
        }
    }

    let mut warnings = Vec::new();
    if let Ok(mesh) = c.build_mesh() {
        for p in &mut c.probes {
            let (v, dist) = mesh.nearest_vertex(p.point);
            if dist > SNAP_TOLERANCE {
                warnings.push(format!(
                    "probe ({}, {}) snapped to vertex {v} at ({}, {}), distance {dist:.3e}",
                    p.point[0], p.point[1], mesh.vertices[v][0], mesh.vertices[v][1]
                ));
            }
            p.point = mesh.vertices[v];
        }
    }

    if !r.issues.is_empty() {
        r.issues.sort_by_key(|i| i.line);
        return Err(ConfigErrors(r.issues));
    }

    let mut defaulted: Vec<String> = Vec::new();
    for (sec, keys) in KEYS {
        for key in keys {
            let full = format!("{sec}.{key}");
            let name = match *key {
                "steps" | "cg_tol" => continue,
                "step" => {
                    if r.get("time.steps").is_some() {
                        continue;
                    }
                    full.clone()
                }
                k if k.starts_with("traction.") => {
                    // any traction key replaces the whole default set
                    let group = format!("{sec}.traction");
                    if defaulted.contains(&group)
                        || r.entries.iter().any(|(e, _)| e.starts_with(&group))
                    {
                        continue;
                    }
                    defaulted.push(group);
                    continue;
                }
                _ => full.clone(),
            };
            if r.get(&full).is_none() {
                defaulted.push(name);
            }
        }
    }
    if !defaulted.is_empty() {
        warnings.insert(0, format!("defaults used for: {}", defaulted.join(", ")));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(ParsedConfig {
        config: c,
        defaulted,
        warnings,
    })
}

fn fmt_pair(v: [f64; 2]) -> String {
    format!("{}, {}", v[0], v[1])
}

fn write_loads(out: &mut String, loads: &LoadSpec) {
    out.push_str(&format!("volume = {}\n", fmt_pair(loads.volume)));
    for (side, g) in &loads.traction {
        out.push_str(&format!("traction.{side} = {}\n", fmt_pair(*g)));
    }
    if loads.traction.is_empty() {
        // overrides the default traction
        out.push_str("traction.right = 0, 0\n");
    }
}

impl RunConfig {
    /// Canonical text form; parsing it yields `self` again.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let k = &self.kernel;
        s.push_str(&format!(
            "[kernel]\nalpha = {}\ntau = {}\ngamma = {}\n\n",
            k.alpha, k.tau, k.gamma
        ));
        let e = &self.elastic;
        s.push_str(&format!(
            "[material]\nmu = {}\nlambda = {}\nrho = {}\n\n",
            e.mu, e.lambda, e.rho
        ));
        let m = &self.mesh;
        s.push_str(&format!(
            "[mesh]\nnx = {}\nny = {}\nlx = {}\nly = {}\n\n",
            m.nx, m.ny, m.lx, m.ly
        ));
        let t = &self.time;
        s.push_str(&format!(
            "[time]\nend = {}\nsteps = {}\ngrading = {}\n\n",
            t.end, t.steps, t.grading
        ));
        s.push_str("[loads]\n");
        write_loads(&mut s, &self.loads);
        s.push_str(&format!("\n[initial]\nshape = {}\n", self.initial.shape));
        write_loads(&mut s, &self.initial.loads);
        s.push_str("\n[probes]\n");
        for p in &self.probes {
            s.push_str(&format!(
                "probe = {}, {}\n",
                fmt_pair(p.point),
                ["x", "y"][p.component]
            ));
        }
        let o = &self.solver;
        s.push_str(&format!(
            "\n[solver]\nweights = {}\nmass = {}\nsolver = {}\n",
            o.weights, o.mass, o.solver
        ));
        if let SolverKind::Cg { tol, .. } = o.solver {
            s.push_str(&format!("cg_tol = {tol}\n"));
        }
        s.push_str(&format!(
            "residual_tol = {}\n\n[output]\ndir = {}\n",
            o.residual_tol, self.output_dir
        ));
        s
    }

    pub fn build_mesh(&self) -> Result<Mesh> {
        build_rect_mesh(self.mesh.nx, self.mesh.ny, self.mesh.lx, self.mesh.ly)
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::graded(self.time.end, self.time.steps, self.time.grading)
    }

    pub fn weights(&self, grid: &TimeGrid) -> Result<WeightTable> {
        build_weights(grid, &self.kernel, self.solver.weights)
    }

    pub fn system(&self, mesh: &Mesh) -> Result<AssembledSystem> {
        assemble_with(mesh, self.elastic, self.solver.mass, self.loads.to_loads())
    }

    /// `(u0, v0)`: zero, or the relaxed static response to the `[initial]`
    /// loads with zero velocity.
    pub fn initial_state(&self, mesh: &Mesh) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = mesh.n_dofs();
        let u0 = match self.initial.shape {
            InitialShape::Rest => vec![0.0; n],
            InitialShape::Static => {
                let sys = assemble_with(
                    mesh,
                    self.elastic,
                    self.solver.mass,
                    self.initial.loads.to_loads(),
                )?;
                quasi_static_solve(&sys, 1.0 - self.kernel.gamma, 0.0, self.solver.solver)?
            }
        };
        Ok((u0, vec![0.0; n]))
    }

    pub fn probe_vertices(&self, mesh: &Mesh) -> Vec<usize> {
        self.probes
            .iter()
            .map(|p| mesh.nearest_vertex(p.point).0)
            .collect()
    }

    pub fn stepper_options(&self, mesh: &Mesh) -> StepperOptions {
        StepperOptions {
            solver: self.solver.solver,
            residual_tol: self.solver.residual_tol,
            probes: self.probe_vertices(mesh),
        }
    }
}
