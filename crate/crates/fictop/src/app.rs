//! The `optimize`, `evaluate` and `structure` commands.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use fictop_core::fem::Assembler;
use fictop_core::levelset::{volume_fraction_elements, CharacteristicField};
use fictop_core::optimizer::{self, evaluate_design, IterationState, ProblemSpec, Termination};
use fictop_core::study::{self, cross_section_profile, CrossSection, Source};
use fictop_core::topology::{check_void_connectivity, DEFAULT_THRESHOLD};
use fictop_core::{fictitious, Error as CoreError, LevelSetField};

use crate::config::{parse_config, ConfigError, LoadedConfig};
use crate::exec::Threads;
use crate::import::{self, ImportError};
use crate::output::{write_profile, HistoryWriter};
use crate::vtk::VtkFile;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("structure file: {0}")]
    Structure(ImportError),
    #[error(transparent)]
    Numerical(CoreError),
}

impl AppError {
    /// 2 for numerical breakdown during a solve, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Numerical(e) => match e.root() {
                CoreError::Divergence { .. } | CoreError::Solver { .. } => 2,
                _ => 1,
            },
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AppError + '_ {
    move |source| AppError::Io { path: path.to_path_buf(), source }
}

/// Overrides applied on top of the config's `[run]` section.
#[derive(Debug, Clone, Default)]
pub struct OptimizeFlags {
    pub output_dir: Option<PathBuf>,
    pub max_iters: Option<usize>,
    pub vtk_every: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub iterations: usize,
    pub converged: bool,
    pub ju: f64,
    pub js: Option<f64>,
    pub jp: Option<f64>,
    pub volume: f64,
    pub vmax: f64,
    pub shielded: Option<bool>,
    pub penetrated: Option<bool>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |v| format!("{v:.6e}"))
}

fn yes_no(v: Option<bool>) -> &'static str {
    match v {
        Some(true) => "yes",
        Some(false) => "no",
        None => "n/a",
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "iterations={} termination={} Ju={:.6e} Js={} Jp={} volume={:.4} shielded={} penetrated={}",
            self.iterations,
            if self.converged { "converged" } else { "budget" },
            self.ju,
            opt(self.js),
            opt(self.jp),
            self.volume,
            yes_no(self.shielded),
            yes_no(self.penetrated),
        )
    }
}

pub fn resolve_dir(cfg: &LoadedConfig, flag: Option<&Path>) -> PathBuf {
    match flag {
        Some(d) => d.to_path_buf(),
        None => cfg.base_dir.join(&cfg.config.run.output_dir),
    }
}

/// Final measures of a design: objectives, volume and the feature checks for every
/// configured feature, whatever its weight.
pub fn summarize(spec: &ProblemSpec, chi: &CharacteristicField, iterations: usize, converged: bool) -> Result<Summary, AppError> {
    let eval = evaluate_design(spec, chi).map_err(AppError::Numerical)?;
    let mesh = &spec.mesh;
    let connected = |out: &str, inner: &str| -> Result<bool, AppError> {
        let a = mesh.selection_nodes(out).unwrap_or_default();
        let b = mesh.selection_nodes(inner).unwrap_or_default();
        check_void_connectivity(chi, mesh, &a, &b, DEFAULT_THRESHOLD).map_err(AppError::Numerical)
    };
    let shielded = spec.shielding.as_ref().map(|f| connected(&f.out_boundary, &f.in_boundary).map(|c| !c)).transpose()?;
    let penetrated = spec.penetrating.as_ref().map(|f| connected(&f.out_boundary, &f.in_boundary)).transpose()?;
    Ok(Summary {
        iterations,
        converged,
        ju: eval.ju,
        js: eval.js,
        jp: eval.jp,
        volume: eval.volume_fraction,
        vmax: spec.vmax,
        shielded,
        penetrated,
    })
}

fn write_vtk(path: &Path, file: VtkFile) -> Result<(), AppError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    file.write(&mut w).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

fn snapshot(path: &Path, spec: &ProblemSpec, state: &IterationState, field: &LevelSetField) -> Result<(), AppError> {
    let mesh = &spec.mesh;
    let zeros = optimizer::zeros_like(mesh);
    let umag = state.u.magnitude();
    let s = state.shielding.as_ref().map_or(zeros.as_slice(), |r| r.field.values());
    let p = state.penetrating.as_ref().map_or(zeros.as_slice(), |r| r.field.values());
    let file = VtkFile::new(mesh, &format!("fictop iteration {}", state.record.iter))
        .point_scalars("phi", field.phi())
        .point_scalars("chi", state.chi.values())
        .point_scalars("u_magnitude", &umag)
        .point_vectors("u", state.u.values())
        .point_scalars("s", s)
        .point_scalars("p", p)
        .point_scalars("sensitivity", &state.descent);
    write_vtk(path, file)
}

pub fn optimize(config: &Path, flags: &OptimizeFlags, threads: Threads, mut log: impl FnMut(&str)) -> Result<Summary, AppError> {
    let cfg = parse_config(config)?;
    let mut spec = cfg.spec.clone();
    if let Some(n) = flags.max_iters {
        spec.iterations = n;
    }
    let vtk_every = flags.vtk_every.unwrap_or(cfg.config.run.vtk_every);
    let dir = resolve_dir(&cfg, flags.output_dir.as_deref());
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;

    let hist_path = dir.join("history.csv");
    let mut history = HistoryWriter::create(&hist_path).map_err(io_err(&hist_path))?;
    let mut pending: Option<AppError> = None;
    let result = optimizer::run_with(&spec, &threads, &mut |state, field| {
        let r = &state.record;
        let res = history.push(r).map_err(io_err(&hist_path)).and_then(|_| {
            if vtk_every > 0 && r.iter % vtk_every == 0 {
                snapshot(&dir.join(format!("fields_{:04}.vtk", r.iter)), &spec, state, field)
            } else {
                Ok(())
            }
        });
        if r.iter % 10 == 0 {
            log(&format!(
                "iter {:4}  volume {:.4}  Ju {:.4e}  Js {:.4e}  Jp {:.4e}  J {:.4e}",
                r.iter, r.volume_fraction, r.ju, r.js, r.jp, r.j_combined
            ));
        }
        res.map_err(|e| {
            pending = Some(e);
            CoreError::Internal("artifact write failed".into())
        })
    });
    let result = match (result, pending) {
        (_, Some(e)) => return Err(e),
        (r, None) => r.map_err(AppError::Numerical)?,
    };

    let mesh = &spec.mesh;
    let chi = result.field.chi(mesh);
    let summary = summarize(&spec, &chi, result.history.len(), result.termination == Termination::Converged)?;
    let final_path = dir.join("final_design.vtk");
    let chi_e = chi.element_values(mesh);
    let mut file = VtkFile::new(mesh, "fictop final design")
        .point_scalars("phi", result.field.phi())
        .point_scalars("chi", chi.values())
        .cell_scalars("chi_element", &chi_e);
    if let Some(state) = &result.last {
        file = file.point_vectors("u", state.u.values()).point_scalars("sensitivity", &state.descent);
    }
    write_vtk(&final_path, file)?;
    let text_path = dir.join("summary.txt");
    fs::write(&text_path, format!("{summary}\n")).map_err(io_err(&text_path))?;
    let structure_path = dir.join("final_design.chi");
    fs::write(&structure_path, import::format_chi(chi.values())).map_err(io_err(&structure_path))?;
    if summary.volume > spec.vmax + 0.01 {
        log(&format!("warning: final volume {:.4} exceeds vmax {:.4}", summary.volume, spec.vmax));
    }
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    S,
    P,
    TDirichlet,
    TNeumann,
}

impl std::str::FromStr for FieldKind {
    type Err = AppError;
    fn from_str(s: &str) -> Result<Self, AppError> {
        match s {
            "s" => Ok(FieldKind::S),
            "p" => Ok(FieldKind::P),
            "T-dirichlet" => Ok(FieldKind::TDirichlet),
            "T-neumann" => Ok(FieldKind::TNeumann),
            _ => Err(AppError::Usage(format!("unknown field `{s}`; expected one of s, p, T-dirichlet, T-neumann"))),
        }
    }
}

impl FieldKind {
    pub fn name(self) -> &'static str {
        match self {
            FieldKind::S => "s",
            FieldKind::P => "p",
            FieldKind::TDirichlet => "T-dirichlet",
            FieldKind::TNeumann => "T-neumann",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub field: FieldKind,
    /// `J_s` for `s` and `T-dirichlet`, `J_p` for `p` and `T-neumann`.
    pub j: f64,
    pub volume: f64,
    /// `(section, |∇| at its midpoint)` for sections inside the mesh.
    pub midpoints: Vec<(String, f64)>,
}

impl fmt::Display for Evaluation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let label = match self.field {
            FieldKind::S | FieldKind::TDirichlet => "Js",
            _ => "Jp",
        };
        write!(f, "field={} {label}={:.6e} volume={:.4}", self.field.name(), self.j, self.volume)?;
        for (n, g) in &self.midpoints {
            write!(f, " grad[{n}]={g:.6e}")?;
        }
        Ok(())
    }
}

/// Solves one field on a fixed structure. `s` and `T-dirichlet` use the
/// `[shielding]` boundaries, `p` and `T-neumann` the `[penetrating]` ones.
pub fn evaluate(config: &Path, field: FieldKind, structure: &Path, output_dir: Option<&Path>) -> Result<Evaluation, AppError> {
    let cfg = parse_config(config)?;
    let spec = &cfg.spec;
    let mesh = &spec.mesh;
    let chi = import::read_structure(structure, mesh, spec.levelset).map_err(AppError::Structure)?.chi(mesh);
    let chi_e = chi.element_values(mesh);
    let opts = spec.solver;
    let asm = Assembler::new(mesh);
    let need = |f: Option<&optimizer::FeatureSpec>, section: &str| {
        f.cloned().ok_or_else(|| ConfigError::Validation(vec![format!("field {} needs a [{section}] section", field.name())]))
    };
    let (values, adjoint, j, density, sensitivity) = match field {
        FieldKind::S => {
            let f = need(spec.shielding.as_ref(), "shielding")?;
            let m = fictitious::ShieldingModel::new(mesh, f.params, &f.out_boundary, &f.in_boundary).map_err(AppError::Numerical)?;
            let r = m.analyze(&asm, mesh, &chi_e, opts, None).map_err(AppError::Numerical)?;
            (r.field.into_inner(), Some(r.adjoint.into_inner()), r.j, r.density, Some(r.sensitivity))
        }
        FieldKind::P => {
            let f = need(spec.penetrating.as_ref(), "penetrating")?;
            let m = fictitious::PenetratingModel::new(mesh, f.params, &f.out_boundary, &f.in_boundary).map_err(AppError::Numerical)?;
            let r = m.analyze(&asm, mesh, &chi_e, opts, None).map_err(AppError::Numerical)?;
            (r.field.into_inner(), Some(r.adjoint.into_inner()), r.j, r.density, Some(r.sensitivity))
        }
        FieldKind::TDirichlet | FieldKind::TNeumann => {
            let (source, f) = if field == FieldKind::TDirichlet {
                (Source::Dirichlet, need(spec.shielding.as_ref(), "shielding")?)
            } else {
                (Source::Neumann, need(spec.penetrating.as_ref(), "penetrating")?)
            };
            let t = study::solve_temperature(mesh, &chi, source, &f.params, &f.out_boundary, &f.in_boundary).map_err(AppError::Numerical)?;
            let (j, density) = match source {
                Source::Dirichlet => fictitious::eval_js(mesh, &chi_e, &t),
                Source::Neumann => fictitious::eval_jp(mesh, &chi_e, &t),
            };
            (t.into_inner(), None, j, density, None)
        }
    };

    let dir = resolve_dir(&cfg, output_dir);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let name = field.name();
    let mut file = VtkFile::new(mesh, &format!("fictop evaluate {name}"))
        .point_scalars("chi", chi.values())
        .point_scalars(name, &values)
        .cell_scalars("density", &density);
    if let Some(a) = &adjoint {
        file = file.point_scalars("adjoint", a);
    }
    if let Some(s) = &sensitivity {
        file = file.point_scalars("sensitivity", s);
    }
    write_vtk(&dir.join(format!("field_{name}.vtk")), file)?;

    let mut midpoints = Vec::new();
    for section in CrossSection::ALL {
        let Ok(profile) = cross_section_profile(mesh, &values, section, 41) else { continue };
        let path = dir.join(format!("profile_{name}_{}.csv", section.name()));
        write_profile(&path, &profile).map_err(io_err(&path))?;
        midpoints.push((section.name().to_string(), profile.midpoint_gradient));
    }
    let eval = Evaluation {
        field,
        j,
        volume: volume_fraction_elements(&chi_e, mesh),
        midpoints,
    };
    let path = dir.join(format!("evaluate_{name}.txt"));
    fs::write(&path, format!("{eval}\n")).map_err(io_err(&path))?;
    Ok(eval)
}

/// Writes the shielded or penetrated two-wall structure for the config's mesh.
pub fn write_structure(config: &Path, kind: study::Structure, out: &Path) -> Result<(), AppError> {
    let cfg = parse_config(config)?;
    let chi = study::two_wall_structure(&cfg.spec.mesh, kind);
    fs::write(out, import::format_chi(chi.values())).map_err(io_err(out))
}
