//! Fictitious diffusion fields measuring shielding (`s`) and penetrating (`p`)
//! features, their adjoints and sensitivities.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fem::{Assembler, SolverOptions, SparseSystem};
use crate::field::ScalarField;
use crate::geometry::{dist, Point};
use crate::mesh::Mesh;

/// Exponent of `χ` in the diffusion coefficient and the functionals.
pub const EXPONENT: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FictitiousParams {
    pub kappa_solid: f64,
    pub kappa_void: f64,
    /// Typical length between the source and sink boundaries.
    pub length: f64,
    pub weight: f64,
}

impl FictitiousParams {
    pub fn new(kappa_solid: f64, kappa_void: f64, length: f64, weight: f64) -> Result<Self> {
        let p = FictitiousParams { kappa_solid, kappa_void, length, weight };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa_solid > 0.0 && self.kappa_solid < self.kappa_void && self.kappa_void.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "diffusivities must satisfy 0 < kappa_solid < kappa_void, got {} and {}",
                self.kappa_solid, self.kappa_void
            )));
        }
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::InvalidArgument(format!("characteristic length must be positive, got {}", self.length)));
        }
        if !(self.weight.is_finite() && self.weight >= 0.0) {
            return Err(Error::InvalidArgument(format!("weight must be non-negative, got {}", self.weight)));
        }
        Ok(())
    }

    /// `{κ_solid χ³ + κ_void (1 − χ³)} L²`.
    pub fn coefficient(&self, chi: f64) -> f64 {
        let c3 = chi * chi * chi;
        (self.kappa_solid * c3 + self.kappa_void * (1.0 - c3)) * self.length * self.length
    }

    /// `∂a/∂χ = 3χ² (κ_solid − κ_void) L²`.
    pub fn coefficient_derivative(&self, chi: f64) -> f64 {
        3.0 * chi * chi * (self.kappa_solid - self.kappa_void) * self.length * self.length
    }
}

/// Per-element diffusion coefficient; identical for the `s` and `p` models.
pub fn coeff_s(chi_elem: &[f64], params: &FictitiousParams) -> Vec<f64> {
    chi_elem.iter().map(|&c| params.coefficient(c)).collect()
}

pub fn coeff_p(chi_elem: &[f64], params: &FictitiousParams) -> Vec<f64> {
    coeff_s(chi_elem, params)
}

/// Distance between the centroids of two node sets.
pub fn characteristic_length(mesh: &Mesh, a: &[usize], b: &[usize]) -> Result<f64> {
    let centroid = |set: &[usize]| -> Result<Point> {
        if set.is_empty() {
            return Err(Error::Configuration("empty node set".into()));
        }
        let mut c = [0.0, 0.0];
        for &n in set {
            let p = mesh.nodes()[n];
            c[0] += p[0];
            c[1] += p[1];
        }
        let k = set.len() as f64;
        Ok([c[0] / k, c[1] / k])
    };
    let l = dist(centroid(a)?, centroid(b)?);
    if l > 0.0 {
        Ok(l)
    } else {
        Err(Error::Configuration("boundary sets share a centroid; set L explicitly".into()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureResult {
    pub field: ScalarField,
    pub adjoint: ScalarField,
    pub j: f64,
    /// Nodal sensitivity.
    pub sensitivity: Vec<f64>,
    pub element_sensitivity: Vec<f64>,
    /// Per-element integrand of `J`.
    pub density: Vec<f64>,
}

fn lookup_nodes(mesh: &Mesh, name: &str) -> Result<Vec<usize>> {
    match mesh.selection_nodes(name) {
        Some(n) if !n.is_empty() => Ok(n),
        _ => Err(Error::Configuration(format!("boundary `{name}` is not tagged"))),
    }
}

/// `b_i = −∫ 2 w ∇f·∇N_i dΩ` for per-element weights `w`.
fn gradient_source(mesh: &Mesh, weight: &[f64], f: &[f64]) -> Vec<f64> {
    let mut b = vec![0.0; mesh.num_nodes()];
    for (e, tri) in mesh.triangles().iter().enumerate() {
        let g = mesh.gradient(e, f);
        let grads = mesh.shape_gradients(e);
        let w = 2.0 * weight[e] * mesh.area(e);
        for k in 0..3 {
            b[tri[k]] -= w * (g[0] * grads[k][0] + g[1] * grads[k][1]);
        }
    }
    b
}

fn grad_sq(g: [f64; 2]) -> f64 {
    g[0] * g[0] + g[1] * g[1]
}

/// Integral and per-element density `(1 − χ̄)³ |∇s|²`.
pub fn eval_js(mesh: &Mesh, chi_elem: &[f64], s: &[f64]) -> (f64, Vec<f64>) {
    let density: Vec<f64> = (0..mesh.num_triangles())
        .map(|e| {
            let v = 1.0 - chi_elem[e];
            v * v * v * grad_sq(mesh.gradient(e, s))
        })
        .collect();
    (integrate(mesh, &density), density)
}

/// Integral and per-element density `χ̄³ |∇p|²`.
pub fn eval_jp(mesh: &Mesh, chi_elem: &[f64], p: &[f64]) -> (f64, Vec<f64>) {
    let density: Vec<f64> = (0..mesh.num_triangles())
        .map(|e| {
            let c = chi_elem[e];
            c * c * c * grad_sq(mesh.gradient(e, p))
        })
        .collect();
    (integrate(mesh, &density), density)
}

fn integrate(mesh: &Mesh, density: &[f64]) -> f64 {
    density.iter().zip(mesh.areas()).map(|(d, a)| d * a).sum()
}

/// Element values `3(1−χ̄)²|∇s|² − a′ ∇s·∇ŝ`.
pub fn sensitivity_js_elements(mesh: &Mesh, chi_elem: &[f64], s: &[f64], s_hat: &[f64], params: &FictitiousParams) -> Vec<f64> {
    (0..mesh.num_triangles())
        .map(|e| {
            let c = chi_elem[e];
            let gs = mesh.gradient(e, s);
            let gh = mesh.gradient(e, s_hat);
            3.0 * (1.0 - c) * (1.0 - c) * grad_sq(gs) - params.coefficient_derivative(c) * (gs[0] * gh[0] + gs[1] * gh[1])
        })
        .collect()
}

/// Element values `−3χ̄²|∇p|² − a′ ∇p·∇p̂`.
pub fn sensitivity_jp_elements(mesh: &Mesh, chi_elem: &[f64], p: &[f64], p_hat: &[f64], params: &FictitiousParams) -> Vec<f64> {
    (0..mesh.num_triangles())
        .map(|e| {
            let c = chi_elem[e];
            let gp = mesh.gradient(e, p);
            let gh = mesh.gradient(e, p_hat);
            -3.0 * c * c * grad_sq(gp) - params.coefficient_derivative(c) * (gp[0] * gh[0] + gp[1] * gh[1])
        })
        .collect()
}

pub fn sensitivity_js(mesh: &Mesh, chi_elem: &[f64], s: &[f64], s_hat: &[f64], params: &FictitiousParams) -> Vec<f64> {
    mesh.element_to_nodes(&sensitivity_js_elements(mesh, chi_elem, s, s_hat, params))
}

pub fn sensitivity_jp(mesh: &Mesh, chi_elem: &[f64], p: &[f64], p_hat: &[f64], params: &FictitiousParams) -> Vec<f64> {
    mesh.element_to_nodes(&sensitivity_jp_elements(mesh, chi_elem, p, p_hat, params))
}

/// Shielding model: `s = 1` on the outer set, `s = 0` on the inner set.
#[derive(Debug, Clone, PartialEq)]
pub struct ShieldingModel {
    pub params: FictitiousParams,
    pub out_name: String,
    pub in_name: String,
    out_nodes: Vec<usize>,
    in_nodes: Vec<usize>,
}

impl ShieldingModel {
    pub fn new(mesh: &Mesh, params: FictitiousParams, out_name: &str, in_name: &str) -> Result<Self> {
        params.validate()?;
        let out_nodes = lookup_nodes(mesh, out_name)?;
        let in_nodes = lookup_nodes(mesh, in_name)?;
        if out_nodes.iter().any(|n| in_nodes.binary_search(n).is_ok()) {
            return Err(Error::Configuration(format!("boundaries `{out_name}` and `{in_name}` overlap")));
        }
        Ok(ShieldingModel {
            params,
            out_name: out_name.into(),
            in_name: in_name.into(),
            out_nodes,
            in_nodes,
        })
    }

    pub fn out_nodes(&self) -> &[usize] {
        &self.out_nodes
    }

    pub fn in_nodes(&self) -> &[usize] {
        &self.in_nodes
    }

    fn system(&self, asm: &Assembler, mesh: &Mesh, chi_elem: &[f64]) -> Result<SparseSystem> {
        Ok(SparseSystem::new(asm.diffusion(mesh, &coeff_s(chi_elem, &self.params))?))
    }

    pub fn solve(&self, asm: &Assembler, mesh: &Mesh, chi_elem: &[f64], opts: SolverOptions, guess: Option<&[f64]>) -> Result<ScalarField> {
        let mut sys = self.system(asm, mesh, chi_elem)?;
        sys.apply_dirichlet_uniform(&self.out_nodes, 1.0)?;
        sys.apply_dirichlet_uniform(&self.in_nodes, 0.0)?;
        ScalarField::new(sys.solve(opts, guess)?.0)
    }

    /// Weak adjoint `∫ a∇ŝ·∇v = −∫ 2(1−χ̄)³ ∇s·∇v` with `ŝ = 0` on both sets.
    pub fn adjoint(&self, asm: &Assembler, mesh: &Mesh, chi_elem: &[f64], s: &[f64], opts: SolverOptions, guess: Option<&[f64]>) -> Result<ScalarField> {
        let mut sys = self.system(asm, mesh, chi_elem)?;
        let w: Vec<f64> = chi_elem.iter().map(|c| (1.0 - c) * (1.0 - c) * (1.0 - c)).collect();
        sys.rhs = gradient_source(mesh, &w, s);
        sys.apply_dirichlet_uniform(&self.out_nodes, 0.0)?;
        sys.apply_dirichlet_uniform(&self.in_nodes, 0.0)?;
        ScalarField::new(sys.solve(opts, guess)?.0)
    }

    /// Field, adjoint, `J_s` and its sensitivity in one pass.
    pub fn analyze(&self, asm: &Assembler, mesh: &Mesh, chi_elem: &[f64], opts: SolverOptions, guess: Option<(&[f64], &[f64])>) -> Result<FeatureResult> {
        let s = self.solve(asm, mesh, chi_elem, opts, guess.map(|g| g.0))?;
        let s_hat = self.adjoint(asm, mesh, chi_elem, &s, opts, guess.map(|g| g.1))?;
        let (j, density) = eval_js(mesh, chi_elem, &s);
        let element_sensitivity = sensitivity_js_elements(mesh, chi_elem, &s, &s_hat, &self.params);
        Ok(FeatureResult {
            sensitivity: mesh.element_to_nodes(&element_sensitivity),
            field: s,
            adjoint: s_hat,
            j,
            element_sensitivity,
            density,
        })
    }
}

/// Penetrating model: unit inward flux on the outer edges, `p = 0` on the inner set.
#[derive(Debug, Clone, PartialEq)]
pub struct PenetratingModel {
    pub params: FictitiousParams,
    pub out_name: String,
    pub in_name: String,
    out_edges: Vec<usize>,
    in_nodes: Vec<usize>,
}

impl PenetratingModel {
    pub fn new(mesh: &Mesh, params: FictitiousParams, out_name: &str, in_name: &str) -> Result<Self> {
        params.validate()?;
        let out_edges = match mesh.edge_set(out_name) {
            Some(e) if !e.is_empty() => e.to_vec(),
            _ => return Err(Error::Configuration(format!("boundary `{out_name}` is not a tagged edge set"))),
        };
        let in_nodes = lookup_nodes(mesh, in_name)?;
        Ok(PenetratingModel {
            params,
            out_name: out_name.into(),
            in_name: in_name.into(),
            out_edges,
            in_nodes,
        })
    }

    pub fn out_nodes(&self, mesh: &Mesh) -> Vec<usize> {
        mesh.selection_nodes(&self.out_name).unwrap_or_default()
    }

    pub fn in_nodes(&self) -> &[usize] {
        &self.in_nodes
    }

    fn system(&self, asm: &Assembler, mesh: &Mesh, chi_elem: &[f64]) -> Result<SparseSystem> {
        Ok(SparseSystem::new(asm.diffusion(mesh, &coeff_p(chi_elem, &self.params))?))
    }

    pub fn solve(&self, asm: &Assembler, mesh: &Mesh, chi_elem: &[f64], opts: SolverOptions, guess: Option<&[f64]>) -> Result<ScalarField> {
        let mut sys = self.system(asm, mesh, chi_elem)?;
        sys.apply_dirichlet_uniform(&self.in_nodes, 0.0)?;
        sys.apply_neumann(mesh, &self.out_edges, 1.0)?;
        ScalarField::new(sys.solve(opts, guess)?.0)
    }

    /// Weak adjoint `∫ a∇p̂·∇v = −∫ 2χ̄³ ∇p·∇v` with `p̂ = 0` on the inner set only.
    pub fn adjoint(&self, asm: &Assembler, mesh: &Mesh, chi_elem: &[f64], p: &[f64], opts: SolverOptions, guess: Option<&[f64]>) -> Result<ScalarField> {
        let mut sys = self.system(asm, mesh, chi_elem)?;
        let w: Vec<f64> = chi_elem.iter().map(|c| c * c * c).collect();
        sys.rhs = gradient_source(mesh, &w, p);
        sys.apply_dirichlet_uniform(&self.in_nodes, 0.0)?;
        ScalarField::new(sys.solve(opts, guess)?.0)
    }

    pub fn analyze(&self, asm: &Assembler, mesh: &Mesh, chi_elem: &[f64], opts: SolverOptions, guess: Option<(&[f64], &[f64])>) -> Result<FeatureResult> {
        let p = self.solve(asm, mesh, chi_elem, opts, guess.map(|g| g.0))?;
        let p_hat = self.adjoint(asm, mesh, chi_elem, &p, opts, guess.map(|g| g.1))?;
        let (j, density) = eval_jp(mesh, chi_elem, &p);
        let element_sensitivity = sensitivity_jp_elements(mesh, chi_elem, &p, &p_hat, &self.params);
        Ok(FeatureResult {
            sensitivity: mesh.element_to_nodes(&element_sensitivity),
            field: p,
            adjoint: p_hat,
            j,
            element_sensitivity,
            density,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Region;
    use crate::mesh::generate_rect_mesh;

    fn square(n: usize) -> Mesh {
        let mut m = generate_rect_mesh(1.0, 1.0, n, n).unwrap();
        m.tag_boundary("left", &Region::rect(0.0, 0.0, 0.0, 1.0)).unwrap();
        m.tag_boundary("right", &Region::rect(1.0, 1.0, 0.0, 1.0)).unwrap();
        m
    }

    fn params(ks: f64, kv: f64) -> FictitiousParams {
        FictitiousParams::new(ks, kv, 1.0, 0.1).unwrap()
    }

    #[test]
    fn coefficient_values() {
        let p = FictitiousParams::new(1.0, 100.0, 1.0, 0.0).unwrap();
        assert_eq!(p.coefficient(1.0), 1.0);
        assert_eq!(p.coefficient(0.0), 100.0);
        let p2 = FictitiousParams::new(1.0, 100.0, 2.0, 0.0).unwrap();
        assert_eq!(p2.coefficient(0.5), 350.5);
        assert!(FictitiousParams::new(100.0, 1.0, 1.0, 0.0).is_err());
        assert!(FictitiousParams::new(1.0, 100.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn shielding_linear_profile_void_and_solid() {
        let m = square(8);
        let asm = Assembler::new(&m);
        let model = ShieldingModel::new(&m, params(1.0, 100.0), "left", "right").unwrap();
        for chi in [0.0, 1.0] {
            let ce = vec![chi; m.num_triangles()];
            let s = model.solve(&asm, &m, &ce, SolverOptions::default(), None).unwrap();
            for (i, p) in m.nodes().iter().enumerate() {
                assert!((s[i] - (1.0 - p[0])).abs() < 1e-9);
            }
            let (j, density) = eval_js(&m, &ce, &s);
            let expected = if chi == 0.0 { 1.0 } else { 0.0 };
            assert!((j - expected).abs() < 1e-9);
            let sum: f64 = density.iter().zip(m.areas()).map(|(d, a)| d * a).sum();
            assert!((sum - j).abs() <= 1e-10 * j.max(1e-300));
        }
    }

    #[test]
    fn shielding_adjoint_vanishes_in_solid() {
        let m = square(6);
        let asm = Assembler::new(&m);
        let model = ShieldingModel::new(&m, params(1.0, 100.0), "left", "right").unwrap();
        let ce = vec![1.0; m.num_triangles()];
        let r = model.analyze(&asm, &m, &ce, SolverOptions::default(), None).unwrap();
        assert!(r.adjoint.iter().all(|&v| v == 0.0));
        assert!(r.sensitivity.iter().all(|&v| v.abs() < 1e-12));
        assert_eq!(r.j, 0.0);
    }

    #[test]
    fn shielding_void_first_term() {
        let m = square(6);
        let asm = Assembler::new(&m);
        let model = ShieldingModel::new(&m, params(1.0, 100.0), "left", "right").unwrap();
        let ce = vec![0.0; m.num_triangles()];
        let r = model.analyze(&asm, &m, &ce, SolverOptions::default(), None).unwrap();
        // χ̄ = 0 kills the coefficient-derivative term, leaving 3·|∇s|²
        for v in &r.element_sensitivity {
            assert!((v - 3.0).abs() < 1e-8);
        }
        // a uniform source on a linear s is divergence free: ŝ vanishes
        assert!(r.adjoint.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn penetrating_flux_solution() {
        let m = square(8);
        let asm = Assembler::new(&m);
        let model = PenetratingModel::new(&m, params(1.0, 100.0), "left", "right").unwrap();
        let void = vec![0.0; m.num_triangles()];
        let p = model.solve(&asm, &m, &void, SolverOptions::default(), None).unwrap();
        for (i, pt) in m.nodes().iter().enumerate() {
            assert!((p[i] - (1.0 - pt[0]) / 100.0).abs() < 1e-9);
        }
        assert_eq!(eval_jp(&m, &void, &p).0, 0.0);

        let solid = vec![1.0; m.num_triangles()];
        let p1 = model.solve(&asm, &m, &solid, SolverOptions::default(), None).unwrap();
        for (i, pt) in m.nodes().iter().enumerate() {
            assert!((p1[i] - (1.0 - pt[0])).abs() < 1e-9);
        }
        assert!((eval_jp(&m, &solid, &p1).0 - 1.0).abs() < 1e-9);

        let model2 = PenetratingModel::new(&m, params(1.0, 200.0), "left", "right").unwrap();
        let p2 = model2.solve(&asm, &m, &void, SolverOptions::default(), None).unwrap();
        for (a, b) in p.iter().zip(p2.iter()) {
            assert!((a - 2.0 * b).abs() < 1e-11);
        }
    }

    #[test]
    fn penetrating_adjoint_void_and_solid() {
        let m = square(8);
        let asm = Assembler::new(&m);
        let model = PenetratingModel::new(&m, params(1.0, 100.0), "left", "right").unwrap();
        let void = vec![0.0; m.num_triangles()];
        let r = model.analyze(&asm, &m, &void, SolverOptions::default(), None).unwrap();
        assert!(r.adjoint.iter().all(|&v| v == 0.0));
        assert!(r.sensitivity.iter().all(|&v| v == 0.0));

        // fully solid 1D reduction: a = 1, p = 1 − x, source −2 p′ v′ gives p̂ = −2(1 − x)
        let solid = vec![1.0; m.num_triangles()];
        let r = model.analyze(&asm, &m, &solid, SolverOptions::default(), None).unwrap();
        for (i, pt) in m.nodes().iter().enumerate() {
            assert!((r.adjoint[i] + 2.0 * (1.0 - pt[0])).abs() < 1e-8);
        }
        // −3·1 − 3(1 − 100)·(−1)(2) = −3 − 594
        for v in &r.element_sensitivity {
            assert!((v + 597.0).abs() < 1e-6, "{v}");
        }
    }

    #[test]
    fn missing_tags_and_overlap() {
        let m = square(4);
        assert!(matches!(ShieldingModel::new(&m, params(1.0, 10.0), "left", "nope"), Err(Error::Configuration(_))));
        assert!(matches!(PenetratingModel::new(&m, params(1.0, 10.0), "nope", "right"), Err(Error::Configuration(_))));
        assert!(matches!(ShieldingModel::new(&m, params(1.0, 10.0), "left", "outer"), Err(Error::Configuration(_))));
    }

    #[test]
    fn characteristic_length_between_edges() {
        let m = square(4);
        let l = characteristic_length(&m, &m.selection_nodes("left").unwrap(), &m.selection_nodes("right").unwrap()).unwrap();
        assert!((l - 1.0).abs() < 1e-12);
    }
}
