//! TOML problem configuration.
//!
//! Every section and key is listed in `CONFIG.md` at the repository root with
//! its default. Unknown keys are rejected. [`parse_config`] reports every
//! semantic violation it finds, not just the first.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use fictop_core::elasticity::{LoadCase, MaterialParams, Support, Traction};
use fictop_core::fem::SolverOptions;
use fictop_core::fictitious::{characteristic_length, FictitiousParams};
use fictop_core::geometry::Region;
use fictop_core::levelset::LevelSetParams;
use fictop_core::mesh::{generate_rect_mesh_at, Mesh, NonDesignKind, OUTER};
use fictop_core::optimizer::{AugmentedLagrangian, Convergence, FeatureSpec, ProblemSpec, SensitivityScaling, DEFAULT_ITERATIONS};
use serde::{Deserialize, Serialize};

use crate::import;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid configuration:\n{}", .0.iter().map(|v| format!("  - {v}")).collect::<Vec<_>>().join("\n"))]
    Validation(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub domain: Domain,
    pub material: Material,
    pub load: Load,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub boundaries: Vec<Boundary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nondesign: Vec<NonDesign>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shielding: Option<Feature>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penetrating: Option<Feature>,
    #[serde(default)]
    pub levelset: LevelSet,
    pub volume: Volume,
    #[serde(default)]
    pub optimizer: Optimizer,
    #[serde(default)]
    pub run: Run,
}

/// Either a generated rectangle (`width`, `height`) or an imported `mesh` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
    #[serde(default = "default_nx")]
    pub nx: usize,
    #[serde(default = "default_ny")]
    pub ny: usize,
    #[serde(default)]
    pub origin: [f64; 2],
    /// Path of a mesh in the plain-text import format, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<PathBuf>,
}

fn default_nx() -> usize {
    96
}
fn default_ny() -> usize {
    48
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    #[serde(rename = "E")]
    pub e: f64,
    pub nu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Load {
    pub supports: Vec<SupportEntry>,
    pub tractions: Vec<TractionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportEntry {
    pub boundary: String,
    /// `"xy"`, `"x"` or `"y"`.
    #[serde(default = "default_fix")]
    pub fix: String,
}

fn default_fix() -> String {
    "xy".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TractionEntry {
    pub boundary: String,
    pub vector: [f64; 2],
}

/// A single predicate or a list whose union is taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Copy> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// A named selection. Exactly one predicate kind must be given:
/// `edges = [x0, x1, y0, y1]` tags boundary edges by midpoint,
/// `nodes = [x0, x1, y0, y1]` tags nodes in the box,
/// `perimeter = [cx, cy, r]` tags the nodes within half a cell of a circle.
/// Each also accepts a list, e.g. `edges = [[...], [...]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Boundary {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<OneOrMany<[f64; 4]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<OneOrMany<[f64; 4]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perimeter: Option<OneOrMany<[f64; 3]>>,
}

/// `kind` is `"solid"` or `"void"`; one of `rect = [x0, x1, y0, y1]` or
/// `circle = [cx, cy, r]` selects elements by centroid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonDesign {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rect: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circle: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Feature {
    pub out: String,
    #[serde(rename = "in")]
    pub inner: String,
    #[serde(default = "default_kappa_solid")]
    pub kappa_solid: f64,
    #[serde(default = "default_kappa_void")]
    pub kappa_void: f64,
    /// Defaults to the distance between the centroids of `out` and `in`.
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(default)]
    pub omega: f64,
}

fn default_kappa_solid() -> f64 {
    1.0
}
fn default_kappa_void() -> f64 {
    100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelSet {
    #[serde(default = "LevelSet::default_delta")]
    pub delta: f64,
    #[serde(default = "LevelSet::default_tau")]
    pub tau: f64,
    #[serde(rename = "K_coef", default = "LevelSet::default_k")]
    pub k_coef: f64,
    #[serde(default = "LevelSet::default_dt")]
    pub dt: f64,
    #[serde(rename = "dDm", default, skip_serializing_if = "Option::is_none")]
    pub fixed_solid: Option<String>,
}

impl LevelSet {
    fn default_delta() -> f64 {
        LevelSetParams::default().delta
    }
    fn default_tau() -> f64 {
        LevelSetParams::default().tau
    }
    fn default_k() -> f64 {
        LevelSetParams::default().k_coef
    }
    fn default_dt() -> f64 {
        LevelSetParams::default().dt
    }
}

impl Default for LevelSet {
    fn default() -> Self {
        let p = LevelSetParams::default();
        LevelSet {
            delta: p.delta,
            tau: p.tau,
            k_coef: p.k_coef,
            dt: p.dt,
            fixed_solid: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Volume {
    pub vmax: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Optimizer {
    pub lambda0: f64,
    pub mu0_factor: f64,
    pub mu_growth: f64,
    pub mu_max_factor: f64,
    pub rel_tol: f64,
    pub window: usize,
    pub volume_tol: f64,
    pub solver_tol: f64,
    /// `"combined"` or `"per-term"`.
    pub scaling: String,
}

impl Default for Optimizer {
    fn default() -> Self {
        let al = AugmentedLagrangian::default();
        let c = Convergence::default();
        Optimizer {
            lambda0: al.lambda0,
            mu0_factor: al.mu0_factor,
            mu_growth: al.growth,
            mu_max_factor: al.mu_max_factor,
            rel_tol: c.rel_tol,
            window: c.window,
            volume_tol: c.volume_tol,
            solver_tol: SolverOptions::default().tol,
            scaling: "combined".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Run {
    pub iterations: usize,
    pub output_dir: PathBuf,
    /// Snapshot interval; 0 disables snapshots.
    pub vtk_every: usize,
}

impl Default for Run {
    fn default() -> Self {
        Run {
            iterations: DEFAULT_ITERATIONS,
            output_dir: PathBuf::from("out"),
            vtk_every: 0,
        }
    }
}

/// A parsed configuration together with the directory relative paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: Config,
    pub base_dir: PathBuf,
    pub spec: ProblemSpec,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(1, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            ConfigError::Parse {
                line,
                message: e.message().to_string(),
            }
        })
    }

    /// Canonical emitter: `Config::from_toml(&c.to_toml()) == c`.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    /// Builds and validates the problem. Mesh files resolve against `base_dir`.
    pub fn to_spec(&self, base_dir: &Path) -> Result<ProblemSpec, ConfigError> {
        let mut errs = Violations::default();
        let mut mesh = self.build_mesh(base_dir, &mut errs);

        let material = MaterialParams { e: self.material.e, nu: self.material.nu };
        errs.check(material.validate());

        let params = LevelSetParams {
            delta: self.levelset.delta,
            tau: self.levelset.tau,
            k_coef: self.levelset.k_coef,
            dt: self.levelset.dt,
        };
        errs.check(params.validate());
        if !(self.volume.vmax > 0.0 && self.volume.vmax <= 1.0) {
            errs.push(format!("volume.vmax must lie in (0, 1], got {}", self.volume.vmax));
        }
        let o = &self.optimizer;
        if !(o.lambda0 >= 0.0) {
            errs.push(format!("optimizer.lambda0 must be >= 0, got {}", o.lambda0));
        }
        if !(o.mu0_factor > 0.0) {
            errs.push(format!("optimizer.mu0_factor must be > 0, got {}", o.mu0_factor));
        }
        if !(o.mu_growth >= 1.0) {
            errs.push(format!("optimizer.mu_growth must be >= 1, got {}", o.mu_growth));
        }
        if !(o.mu_max_factor >= 1.0) {
            errs.push(format!("optimizer.mu_max_factor must be >= 1, got {}", o.mu_max_factor));
        }
        if !(o.rel_tol >= 0.0) || o.window == 0 || !(o.volume_tol >= 0.0) {
            errs.push("optimizer.rel_tol and volume_tol must be >= 0 and window >= 1".into());
        }
        if !(o.solver_tol > 0.0 && o.solver_tol < 1.0) {
            errs.push(format!("optimizer.solver_tol must lie in (0, 1), got {}", o.solver_tol));
        }
        let scaling = match o.scaling.as_str() {
            "combined" => SensitivityScaling::Combined,
            "per-term" => SensitivityScaling::PerTerm,
            s => {
                errs.push(format!("optimizer.scaling must be \"combined\" or \"per-term\", got \"{s}\""));
                SensitivityScaling::Combined
            }
        };
        let ws = self.shielding.as_ref().map_or(0.0, |f| f.omega);
        let wp = self.penetrating.as_ref().map_or(0.0, |f| f.omega);
        if !(ws >= 0.0 && wp >= 0.0) || ws + wp >= 1.0 {
            errs.push(format!("weights must be non-negative with omega_s + omega_p < 1, got {ws} + {wp}"));
        }

        if let Some(mesh) = mesh.as_mut() {
            self.tag(mesh, &mut errs);
        }

        let mut load = LoadCase { supports: Vec::new(), tractions: Vec::new() };
        for s in &self.load.supports {
            let (fix_x, fix_y) = match s.fix.as_str() {
                "xy" => (true, true),
                "x" => (true, false),
                "y" => (false, true),
                f => {
                    errs.push(format!("support on `{}`: fix must be \"xy\", \"x\" or \"y\", got \"{f}\"", s.boundary));
                    (true, true)
                }
            };
            load.supports.push(Support { boundary: s.boundary.clone(), fix_x, fix_y });
        }
        for t in &self.load.tractions {
            load.tractions.push(Traction { boundary: t.boundary.clone(), vector: t.vector });
        }
        if self.load.supports.is_empty() {
            errs.push("load.supports must not be empty".into());
        }
        if self.load.tractions.is_empty() {
            errs.push("load.tractions must not be empty".into());
        }

        let mut features = [None, None];
        if let Some(mesh) = mesh.as_ref() {
            for s in &self.load.supports {
                errs.require(mesh, &s.boundary, "load.supports");
            }
            for t in &self.load.tractions {
                errs.require_edges(mesh, &t.boundary, "load.tractions");
            }
            if let Some(n) = &self.levelset.fixed_solid {
                errs.require(mesh, n, "levelset.dDm");
            }
            for (slot, (section, f)) in features.iter_mut().zip([("shielding", &self.shielding), ("penetrating", &self.penetrating)]) {
                if let Some(f) = f {
                    *slot = feature_spec(mesh, section, f, &mut errs);
                }
            }
        }

        let Some(mesh) = mesh else {
            return Err(ConfigError::Validation(errs.0));
        };
        if !errs.0.is_empty() {
            return Err(ConfigError::Validation(errs.0));
        }
        let [shielding, penetrating] = features;
        let mut spec = ProblemSpec::new(mesh, material, load, self.volume.vmax);
        spec.shielding = shielding;
        spec.penetrating = penetrating;
        spec.iterations = self.run.iterations;
        spec.levelset = params;
        spec.fixed_solid = self.levelset.fixed_solid.clone();
        spec.al = AugmentedLagrangian {
            lambda0: o.lambda0,
            mu0_factor: o.mu0_factor,
            growth: o.mu_growth,
            mu_max_factor: o.mu_max_factor,
        };
        spec.convergence = Convergence {
            rel_tol: o.rel_tol,
            window: o.window,
            volume_tol: o.volume_tol,
        };
        spec.solver = SolverOptions { tol: o.solver_tol, ..SolverOptions::default() };
        spec.scaling = scaling;
        spec.validate().map_err(|e| ConfigError::Validation(vec![e.to_string()]))?;
        Ok(spec)
    }

    fn build_mesh(&self, base_dir: &Path, errs: &mut Violations) -> Option<Mesh> {
        let d = &self.domain;
        match (&d.mesh, d.width, d.height) {
            (Some(path), None, None) => {
                let path = base_dir.join(path);
                match import::read_mesh(&path) {
                    Ok(m) => Some(m),
                    Err(e) => {
                        errs.push(format!("domain.mesh: {e}"));
                        None
                    }
                }
            }
            (Some(_), _, _) => {
                errs.push("domain: give either mesh or width/height, not both".into());
                None
            }
            (None, Some(w), Some(h)) => match generate_rect_mesh_at(d.origin, w, h, d.nx, d.ny) {
                Ok(m) => Some(m),
                Err(e) => {
                    errs.push(format!("domain: {e}"));
                    None
                }
            },
            (None, _, _) => {
                errs.push("domain: width and height are required without a mesh file".into());
                None
            }
        }
    }

    fn tag(&self, mesh: &mut Mesh, errs: &mut Violations) {
        for b in &self.boundaries {
            if b.name == OUTER {
                errs.push(format!("boundary name `{OUTER}` is reserved"));
                continue;
            }
            let boxes = |v: &OneOrMany<[f64; 4]>| v.to_vec().iter().map(|&[x0, x1, y0, y1]| Region::rect(x0, x1, y0, y1)).collect::<Vec<_>>();
            let r = match (&b.edges, &b.nodes, &b.perimeter) {
                (Some(e), None, None) => mesh.tag_boundary_any(&b.name, &boxes(e)),
                (None, Some(n), None) => mesh.tag_nodes_any(&b.name, &boxes(n)),
                (None, None, Some(c)) => {
                    let circles: Vec<_> = c.to_vec().iter().map(|&[cx, cy, r]| ([cx, cy], r)).collect();
                    mesh.tag_circle_perimeters(&b.name, &circles)
                }
                _ => {
                    errs.push(format!("boundary `{}` needs exactly one of edges, nodes, perimeter", b.name));
                    continue;
                }
            };
            if let Err(e) = r {
                errs.push(format!("boundary `{}`: {e}", b.name));
            }
        }
        for (i, n) in self.nondesign.iter().enumerate() {
            let kind = match n.kind.as_str() {
                "solid" => NonDesignKind::Solid,
                "void" => NonDesignKind::Void,
                k => {
                    errs.push(format!("nondesign[{i}]: kind must be \"solid\" or \"void\", got \"{k}\""));
                    continue;
                }
            };
            let region = match (n.rect, n.circle) {
                (Some([x0, x1, y0, y1]), None) => Region::rect(x0, x1, y0, y1),
                (None, Some([cx, cy, r])) => Region::circle(cx, cy, r),
                _ => {
                    errs.push(format!("nondesign[{i}] needs exactly one of rect, circle"));
                    continue;
                }
            };
            if let Err(e) = mesh.mark_nondesign(&region, kind) {
                errs.push(format!("nondesign[{i}]: {e}"));
            }
        }
    }
}

fn feature_spec(mesh: &Mesh, section: &str, f: &Feature, errs: &mut Violations) -> Option<FeatureSpec> {
    let out = errs.require(mesh, &f.out, &format!("{section}.out"));
    let inner = errs.require(mesh, &f.inner, &format!("{section}.in"));
    if section == "penetrating" && mesh.edge_set(&f.out).is_none() && out.is_some() {
        errs.push(format!("penetrating.out: `{}` must be an edge set (it carries the flux)", f.out));
    }
    let length = match (f.length, out, inner) {
        (Some(l), _, _) => l,
        (None, Some(a), Some(b)) => match characteristic_length(mesh, &a, &b) {
            Ok(l) => l,
            Err(e) => {
                errs.push(format!("{section}.L: {e}"));
                return None;
            }
        },
        _ => return None,
    };
    let params = FictitiousParams {
        kappa_solid: f.kappa_solid,
        kappa_void: f.kappa_void,
        length,
        weight: f.omega,
    };
    if let Err(e) = params.validate() {
        errs.push(format!("{section}: {e}"));
        return None;
    }
    Some(FeatureSpec {
        params,
        out_boundary: f.out.clone(),
        in_boundary: f.inner.clone(),
    })
}

#[derive(Default)]
struct Violations(Vec<String>);

impl Violations {
    fn push(&mut self, msg: String) {
        self.0.push(msg);
    }

    fn check<E: fmt::Display>(&mut self, r: Result<(), E>) {
        if let Err(e) = r {
            self.push(e.to_string());
        }
    }

    fn require(&mut self, mesh: &Mesh, name: &str, key: &str) -> Option<Vec<usize>> {
        let nodes = mesh.selection_nodes(name);
        if nodes.is_none() {
            self.push(format!("{key}: unknown boundary `{name}`"));
        }
        nodes
    }

    fn require_edges(&mut self, mesh: &Mesh, name: &str, key: &str) {
        if !mesh.has_selection(name) {
            self.push(format!("{key}: unknown boundary `{name}`"));
        } else if mesh.edge_set(name).is_none() {
            self.push(format!("{key}: `{name}` is a node set, an edge set is required"));
        }
    }
}

pub fn parse_config(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    let config = Config::from_toml(&text)?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let spec = config.to_spec(&base_dir)?;
    Ok(LoadedConfig { config, base_dir, spec })
}
