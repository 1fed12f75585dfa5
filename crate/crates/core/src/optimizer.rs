//! Optimization loop: state and fictitious solves, weighted objective,
//! augmented-Lagrangian volume control and level-set advance.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::elasticity::{self, LoadCase, MaterialParams};
use crate::error::{Error, Result};
use crate::fem::{Assembler, SolverOptions};
use crate::fictitious::{FeatureResult, FictitiousParams, PenetratingModel, ShieldingModel};
use crate::field::VectorField;
use crate::levelset::{volume_fraction_elements, CharacteristicField, LevelSetField, LevelSetParams, LevelSetUpdater};
use crate::mesh::Mesh;
use crate::parallel::{Executor, Sequential};

/// Fictitious-field model attached to two named boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpec {
    pub params: FictitiousParams,
    pub out_boundary: String,
    pub in_boundary: String,
}

/// `μ₀ = mu0_factor · mean|J_u′|` at the first iteration and
/// `μ_max = mu_max_factor · μ₀`; `λ₀` is in the same units as `J_u′`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentedLagrangian {
    pub lambda0: f64,
    pub mu0_factor: f64,
    pub growth: f64,
    pub mu_max_factor: f64,
}

impl Default for AugmentedLagrangian {
    fn default() -> Self {
        AugmentedLagrangian {
            lambda0: 0.0,
            mu0_factor: 0.2,
            growth: 1.05,
            mu_max_factor: 1e3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Convergence {
    pub rel_tol: f64,
    pub window: usize,
    pub volume_tol: f64,
}

impl Default for Convergence {
    fn default() -> Self {
        Convergence {
            rel_tol: 1e-4,
            window: 10,
            volume_tol: 0.005,
        }
    }
}

pub const DEFAULT_ITERATIONS: usize = 300;

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    /// Mesh with every referenced boundary tagged and non-design regions marked.
    pub mesh: Mesh,
    pub material: MaterialParams,
    pub load: LoadCase,
    pub shielding: Option<FeatureSpec>,
    pub penetrating: Option<FeatureSpec>,
    pub vmax: f64,
    pub iterations: usize,
    pub levelset: LevelSetParams,
    /// Node set held solid during the update (∂D_m).
    pub fixed_solid: Option<String>,
    pub al: AugmentedLagrangian,
    pub convergence: Convergence,
    pub solver: SolverOptions,
    pub scaling: SensitivityScaling,
}

impl ProblemSpec {
    pub fn new(mesh: Mesh, material: MaterialParams, load: LoadCase, vmax: f64) -> Self {
        ProblemSpec {
            mesh,
            material,
            load,
            shielding: None,
            penetrating: None,
            vmax,
            iterations: DEFAULT_ITERATIONS,
            levelset: LevelSetParams::default(),
            fixed_solid: None,
            al: AugmentedLagrangian::default(),
            convergence: Convergence::default(),
            solver: SolverOptions::default(),
            scaling: SensitivityScaling::default(),
        }
    }

    pub fn weights(&self) -> Weights {
        Weights {
            shielding: self.shielding.as_ref().map_or(0.0, |f| f.params.weight),
            penetrating: self.penetrating.as_ref().map_or(0.0, |f| f.params.weight),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        self.load.validate(&self.mesh)?;
        self.levelset.validate()?;
        self.weights().validate()?;
        if !(self.vmax > 0.0 && self.vmax <= 1.0) {
            return Err(Error::Configuration(format!("vmax must lie in (0, 1], got {}", self.vmax)));
        }
        let al = &self.al;
        if !(al.lambda0 >= 0.0 && al.mu0_factor > 0.0 && al.growth >= 1.0 && al.mu_max_factor >= 1.0) {
            return Err(Error::Configuration("augmented-Lagrangian parameters out of range".into()));
        }
        if let Some(name) = &self.fixed_solid {
            if self.mesh.selection_nodes(name).is_none() {
                return Err(Error::Configuration(format!("fixed-solid set `{name}` is not tagged")));
            }
        }
        self.models()?;
        Ok(())
    }

    fn models(&self) -> Result<(Option<ShieldingModel>, Option<PenetratingModel>)> {
        let s = match &self.shielding {
            Some(f) => Some(ShieldingModel::new(&self.mesh, f.params, &f.out_boundary, &f.in_boundary)?),
            None => None,
        };
        let p = match &self.penetrating {
            Some(f) => Some(PenetratingModel::new(&self.mesh, f.params, &f.out_boundary, &f.in_boundary)?),
            None => None,
        };
        Ok((s, p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub shielding: f64,
    pub penetrating: f64,
}

impl Weights {
    pub fn validate(&self) -> Result<()> {
        let (s, p) = (self.shielding, self.penetrating);
        if !(s >= 0.0 && p >= 0.0) {
            return Err(Error::Configuration(format!("weights must be non-negative, got {s} and {p}")));
        }
        if s + p >= 1.0 {
            return Err(Error::Configuration(format!("weights must satisfy omega_s + omega_p < 1, got {}", s + p)));
        }
        Ok(())
    }

    pub fn compliance(&self) -> f64 {
        1.0 - self.shielding - self.penetrating
    }
}

/// `(1 − ω_s − ω_p) J_u + ω_s J_s + ω_p J_p`.
pub fn combined_objective(ju: f64, js: f64, jp: f64, weights: Weights) -> Result<f64> {
    weights.validate()?;
    Ok(weights.compliance() * ju + weights.shielding * js + weights.penetrating * jp)
}

/// Mean of `|x|` over the domain, with the lumped mass as quadrature.
fn mean_abs(x: &[f64], lumped: &[f64], area: f64) -> f64 {
    x.iter().zip(lumped).map(|(v, m)| v.abs() * m).sum::<f64>() / area
}

/// How the individual topological derivatives are brought to a common scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SensitivityScaling {
    /// Plain weighted sum; the level-set update normalizes the total.
    #[default]
    Combined,
    /// Each derivative is first divided by its own domain mean magnitude, so
    /// the physical scale of the fictitious fields drops out. The volume term
    /// is divided by the compliance scale.
    PerTerm,
}

/// Descent field for the level-set update (positive removes material).
pub fn combined_sensitivity(
    mesh: &Mesh,
    ju: &[f64],
    js: Option<&[f64]>,
    jp: Option<&[f64]>,
    weights: Weights,
    volume_term: f64,
    scaling: SensitivityScaling,
) -> Result<Vec<f64>> {
    weights.validate()?;
    let n = mesh.num_nodes();
    if ju.len() != n || js.is_some_and(|v| v.len() != n) || jp.is_some_and(|v| v.len() != n) {
        return Err(Error::Internal("sensitivity fields differ in size".into()));
    }
    let lumped = mesh.lumped_mass();
    let area = mesh.total_area();
    let scale = |x: &[f64]| match scaling {
        SensitivityScaling::Combined => 1.0,
        SensitivityScaling::PerTerm => {
            let m = mean_abs(x, &lumped, area);
            if m > 0.0 {
                m
            } else {
                1.0
            }
        }
    };
    let ref_u = scale(ju);
    let mut g: Vec<f64> = ju.iter().map(|v| (volume_term - weights.compliance() * v) / ref_u).collect();
    for (field, w) in [(js, weights.shielding), (jp, weights.penetrating)] {
        let Some(field) = field else { continue };
        if w > 0.0 {
            let s = scale(field);
            for (gi, v) in g.iter_mut().zip(field) {
                *gi -= w * v / s;
            }
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub volume_fraction: f64,
    pub ju: f64,
    pub js: f64,
    pub jp: f64,
    pub j_combined: f64,
    pub lambda: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub records: Vec<IterationRecord>,
}

impl History {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    /// First iteration after which the volume fraction never exceeds `bound`.
    pub fn feasible_from(&self, bound: f64) -> Option<usize> {
        let last_bad = self.records.iter().rposition(|r| r.volume_fraction > bound);
        match last_bad {
            None if self.records.is_empty() => None,
            None => Some(self.records[0].iter),
            Some(i) => self.records.get(i + 1).map(|r| r.iter),
        }
    }

    fn stalled(&self, c: &Convergence) -> bool {
        let n = self.records.len();
        if c.window == 0 || n <= c.window {
            return false;
        }
        let last = self.records[n - 1].j_combined;
        let bound = c.rel_tol * last.abs();
        self.records[n - 1 - c.window..n - 1]
            .iter()
            .all(|r| (r.j_combined - last).abs() <= bound)
    }
}

/// Everything computed in one iteration, for observers and final reporting.
#[derive(Debug, Clone)]
pub struct IterationState {
    pub record: IterationRecord,
    pub chi: CharacteristicField,
    pub u: VectorField,
    pub shielding: Option<FeatureResult>,
    pub penetrating: Option<FeatureResult>,
    /// Nodal topological derivative of the compliance.
    pub ju_sensitivity: Vec<f64>,
    /// Descent field passed to the level-set update.
    pub descent: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Budget,
    Converged,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub field: LevelSetField,
    pub history: History,
    pub termination: Termination,
    /// State of the final recorded iteration; `None` for a zero budget.
    pub last: Option<IterationState>,
}

/// Objective values of a fixed design, including features whose weight is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignEvaluation {
    pub volume_fraction: f64,
    pub ju: f64,
    pub js: Option<f64>,
    pub jp: Option<f64>,
}

pub fn evaluate_design(spec: &ProblemSpec, chi: &CharacteristicField) -> Result<DesignEvaluation> {
    spec.validate()?;
    let mesh = &spec.mesh;
    let asm = Assembler::new(mesh);
    let chi_e = chi.element_values(mesh);
    let u = elasticity::solve_state(&asm, mesh, &chi_e, &spec.material, &spec.load, spec.solver, None)?;
    let (sm, pm) = spec.models()?;
    let js = match sm {
        Some(m) => Some(crate::fictitious::eval_js(mesh, &chi_e, &m.solve(&asm, mesh, &chi_e, spec.solver, None)?).0),
        None => None,
    };
    let jp = match pm {
        Some(m) => Some(crate::fictitious::eval_jp(mesh, &chi_e, &m.solve(&asm, mesh, &chi_e, spec.solver, None)?).0),
        None => None,
    };
    Ok(DesignEvaluation {
        volume_fraction: volume_fraction_elements(&chi_e, mesh),
        ju: elasticity::eval_ju(mesh, &spec.load, &u)?,
        js,
        jp,
    })
}

pub fn run(spec: &ProblemSpec) -> Result<RunResult> {
    run_with(spec, &Sequential, &mut |_, _| Ok(()))
}

/// Runs the loop; `observer` sees each iteration's state and the field it was
/// computed from, before the update.
pub fn run_with<E: Executor>(
    spec: &ProblemSpec,
    exec: &E,
    observer: &mut dyn FnMut(&IterationState, &LevelSetField) -> Result<()>,
) -> Result<RunResult> {
    spec.validate()?;
    let mesh = &spec.mesh;
    let weights = spec.weights();
    let (sm, pm) = spec.models()?;
    let sm = sm.filter(|m| m.params.weight > 0.0);
    let pm = pm.filter(|m| m.params.weight > 0.0);
    let fixed = match &spec.fixed_solid {
        Some(name) => mesh.selection_nodes(name).unwrap_or_default(),
        None => Vec::new(),
    };
    let updater = LevelSetUpdater::new(mesh, spec.levelset, &fixed)?;
    let asm = Assembler::new(mesh);
    let pins = mesh.node_pins();
    let lumped = mesh.lumped_mass();
    let area = mesh.total_area();

    let mut field = LevelSetField::initial(mesh, spec.levelset)?;
    let mut history = History::default();
    let mut last: Option<IterationState> = None;
    let mut lambda = spec.al.lambda0;
    let mut mu = 0.0;
    let mut mu_max = 0.0;
    let mut warm_u: Option<Vec<f64>> = None;
    let mut warm_s: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut warm_p: Option<(Vec<f64>, Vec<f64>)> = None;

    for iter in 0..spec.iterations {
        let chi = field.chi(mesh);
        let chi_e = chi.element_values(mesh);
        let opts = spec.solver;
        let (u, s, p) = exec.join3(
            || elasticity::solve_state(&asm, mesh, &chi_e, &spec.material, &spec.load, opts, warm_u.as_deref()),
            || {
                sm.as_ref()
                    .map(|m| m.analyze(&asm, mesh, &chi_e, opts, warm_s.as_ref().map(|(a, b)| (a.as_slice(), b.as_slice()))))
                    .transpose()
            },
            || {
                pm.as_ref()
                    .map(|m| m.analyze(&asm, mesh, &chi_e, opts, warm_p.as_ref().map(|(a, b)| (a.as_slice(), b.as_slice()))))
                    .transpose()
            },
        );
        let u = u.map_err(|e| e.at_iteration(iter))?;
        let s = s.map_err(|e| e.at_iteration(iter))?;
        let p = p.map_err(|e| e.at_iteration(iter))?;

        let ju = elasticity::eval_ju(mesh, &spec.load, &u)?;
        let js = s.as_ref().map_or(0.0, |r| r.j);
        let jp = p.as_ref().map_or(0.0, |r| r.j);
        let j = combined_objective(ju, js, jp, weights)?;
        if !j.is_finite() {
            return Err(Error::Divergence { iteration: iter });
        }
        let ju_sens = elasticity::sensitivity_ju(mesh, &chi_e, &u, &spec.material);
        if iter == 0 {
            let m = mean_abs(&ju_sens, &lumped, area);
            let base = if m > 0.0 { m } else { 1.0 };
            mu = spec.al.mu0_factor * base;
            mu_max = spec.al.mu_max_factor * mu;
        }
        let vol = volume_fraction_elements(&chi_e, mesh);
        let g = vol - spec.vmax;
        let record = IterationRecord {
            iter,
            volume_fraction: vol,
            ju,
            js,
            jp,
            j_combined: j,
            lambda,
            mu,
        };
        history.records.push(record);

        let volume_term = lambda + mu * g.max(0.0);
        let mut descent = combined_sensitivity(
            mesh,
            &ju_sens,
            s.as_ref().map(|r| r.sensitivity.as_slice()),
            p.as_ref().map(|r| r.sensitivity.as_slice()),
            weights,
            volume_term,
            spec.scaling,
        )?;
        for (d, pin) in descent.iter_mut().zip(&pins) {
            if pin.is_some() {
                *d = 0.0;
            }
        }
        lambda = (lambda + mu * g).max(0.0);
        mu = (mu * spec.al.growth).min(mu_max);

        let state = IterationState {
            record,
            chi,
            u,
            shielding: s,
            penetrating: p,
            ju_sensitivity: ju_sens,
            descent,
        };
        observer(&state, &field)?;
        warm_u = Some(state.u.values().to_vec());
        warm_s = state.shielding.as_ref().map(|r| (r.field.values().to_vec(), r.adjoint.values().to_vec()));
        warm_p = state.penetrating.as_ref().map(|r| (r.field.values().to_vec(), r.adjoint.values().to_vec()));

        let converged = g <= spec.convergence.volume_tol && history.stalled(&spec.convergence);
        if converged {
            return Ok(RunResult {
                field,
                history,
                termination: Termination::Converged,
                last: Some(state),
            });
        }
        if iter + 1 < spec.iterations {
            field = updater.update(&field, &state.descent).map_err(|e| e.at_iteration(iter))?;
        }
        last = Some(state);
    }
    Ok(RunResult {
        field,
        history,
        termination: Termination::Budget,
        last,
    })
}

/// Zero vector of the right length for an absent feature.
pub fn zeros_like(mesh: &Mesh) -> Vec<f64> {
    vec![0.0; mesh.num_nodes()]
}
