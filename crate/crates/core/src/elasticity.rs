//! Linear elastic state problem, mean compliance and its topological derivative.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fem::{element_strain, Assembler, SolverOptions, SparseSystem};
use crate::field::VectorField;
use crate::mesh::Mesh;

/// Stiffness floor applied to void elements.
pub const ERSATZ_MIN: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    /// Young's modulus.
    pub e: f64,
    /// Poisson ratio.
    pub nu: f64,
}

impl MaterialParams {
    pub fn new(e: f64, nu: f64) -> Result<Self> {
        let m = MaterialParams { e, nu };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.e.is_finite() && self.e > 0.0) {
            return Err(Error::InvalidArgument(format!("Young's modulus must be positive, got {}", self.e)));
        }
        if !(self.nu > -1.0 && self.nu < 0.5) {
            return Err(Error::InvalidArgument(format!("Poisson ratio must lie in (-1, 0.5), got {}", self.nu)));
        }
        Ok(())
    }

    /// Plane-stress constitutive matrix in Voigt form `[ε_xx, ε_yy, γ_xy]`.
    pub fn plane_stress_matrix(&self) -> [[f64; 3]; 3] {
        let c = self.e / (1.0 - self.nu * self.nu);
        [
            [c, c * self.nu, 0.0],
            [c * self.nu, c, 0.0],
            [0.0, 0.0, c * 0.5 * (1.0 - self.nu)],
        ]
    }
}

/// Displacement constraint on a named boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Support {
    pub boundary: String,
    pub fix_x: bool,
    pub fix_y: bool,
}

/// Uniform traction on a named boundary edge set.
#[derive(Debug, Clone, PartialEq)]
pub struct Traction {
    pub boundary: String,
    pub vector: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadCase {
    pub supports: Vec<Support>,
    pub tractions: Vec<Traction>,
}

impl LoadCase {
    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        if self.supports.is_empty() || self.supports.iter().all(|s| !s.fix_x && !s.fix_y) {
            return Err(Error::Configuration("load case has no displacement support".into()));
        }
        for s in &self.supports {
            if mesh.selection_nodes(&s.boundary).is_none() {
                return Err(Error::Configuration(format!("support boundary `{}` is not tagged", s.boundary)));
            }
        }
        for t in &self.tractions {
            if mesh.edge_set(&t.boundary).is_none() {
                return Err(Error::Configuration(format!("traction boundary `{}` is not an edge set", t.boundary)));
            }
            if !(t.vector[0].is_finite() && t.vector[1].is_finite()) {
                return Err(Error::Configuration("traction must be finite".into()));
            }
        }
        Ok(())
    }

    fn load_vector_system(&self, mesh: &Mesh, sys: &mut SparseSystem) -> Result<()> {
        for t in &self.tractions {
            let edges = mesh
                .edge_set(&t.boundary)
                .ok_or_else(|| Error::Configuration(format!("traction boundary `{}` is not an edge set", t.boundary)))?;
            sys.apply_traction(mesh, edges, t.vector)?;
        }
        for s in &self.supports {
            let nodes = mesh
                .selection_nodes(&s.boundary)
                .ok_or_else(|| Error::Configuration(format!("support boundary `{}` is not tagged", s.boundary)))?;
            for n in nodes {
                if s.fix_x {
                    sys.constrain(2 * n, 0.0)?;
                }
                if s.fix_y {
                    sys.constrain(2 * n + 1, 0.0)?;
                }
            }
        }
        Ok(())
    }
}

/// Element stiffness multipliers: χ̄ floored at [`ERSATZ_MIN`].
pub fn stiffness_scale(chi_elem: &[f64]) -> Vec<f64> {
    chi_elem.iter().map(|&c| c.clamp(ERSATZ_MIN, 1.0)).collect()
}

/// Equilibrium displacement for the ersatz-floored material distribution.
pub fn solve_state(
    assembler: &Assembler,
    mesh: &Mesh,
    chi_elem: &[f64],
    material: &MaterialParams,
    load: &LoadCase,
    opts: SolverOptions,
    guess: Option<&[f64]>,
) -> Result<VectorField> {
    load.validate(mesh)?;
    let k = assembler.elasticity(mesh, &stiffness_scale(chi_elem), material)?;
    let mut sys = SparseSystem::new(k);
    load.load_vector_system(mesh, &mut sys)?;
    let (u, _) = sys.solve(opts, guess)?;
    VectorField::new(u)
}

/// Mean compliance `∫_Γt t·u dΓ`, integrated exactly for P1 displacements.
pub fn eval_ju(mesh: &Mesh, load: &LoadCase, u: &VectorField) -> Result<f64> {
    let mut ju = 0.0;
    for t in &load.tractions {
        let edges = mesh
            .edge_set(&t.boundary)
            .ok_or_else(|| Error::Configuration(format!("traction boundary `{}` is not an edge set", t.boundary)))?;
        for &e in edges {
            let [a, b] = mesh.boundary_edges()[e];
            let (ua, ub) = (u.at(a), u.at(b));
            let avg = [0.5 * (ua[0] + ub[0]), 0.5 * (ua[1] + ub[1])];
            ju += mesh.edge_length(e) * (t.vector[0] * avg[0] + t.vector[1] * avg[1]);
        }
    }
    Ok(ju)
}

/// Rank-4 tensor over the in-plane indices, `a[i][j][k][l]`.
pub type Tensor4 = [[[[f64; 2]; 2]; 2]; 2];

/// Prefactor `3(1−ν) / (2(1+ν)(7−5ν))` of the topological-derivative tensor.
pub fn tensor_a_prefactor(nu: f64) -> f64 {
    3.0 * (1.0 - nu) / (2.0 * (1.0 + nu) * (7.0 - 5.0 * nu))
}

/// Coefficient of `δ_ij δ_kl` inside the bracket: `−(1 − 14ν + 15ν²) E / (1 − 2ν)²`.
pub fn tensor_a_trace_coefficient(material: &MaterialParams) -> f64 {
    let nu = material.nu;
    -(1.0 - 14.0 * nu + 15.0 * nu * nu) * material.e / ((1.0 - 2.0 * nu) * (1.0 - 2.0 * nu))
}

/// Topological-derivative tensor of the mean compliance, restricted to in-plane indices.
pub fn tensor_a(material: &MaterialParams) -> Tensor4 {
    let pre = tensor_a_prefactor(material.nu);
    let tr = tensor_a_trace_coefficient(material);
    let delta = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    let mut a = [[[[0.0; 2]; 2]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    a[i][j][k][l] = pre
                        * (tr * delta(i, j) * delta(k, l)
                            + 5.0 * material.e * (delta(i, k) * delta(j, l) + delta(i, l) * delta(j, k)));
                }
            }
        }
    }
    a
}

/// Double contraction `ε : 𝔸 : ε`.
pub fn contract(a: &Tensor4, eps: &[[f64; 2]; 2]) -> f64 {
    let mut s = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    s += eps[i][j] * a[i][j][k][l] * eps[k][l];
                }
            }
        }
    }
    s
}

/// Per-element `χ̄ ε(u):𝔸:ε(u)`.
pub fn sensitivity_ju_elements(mesh: &Mesh, chi_elem: &[f64], u: &VectorField, material: &MaterialParams) -> Vec<f64> {
    let a = tensor_a(material);
    (0..mesh.num_triangles())
        .map(|e| chi_elem[e] * contract(&a, &element_strain(mesh, e, u)))
        .collect()
}

/// Nodal topological derivative of the mean compliance.
pub fn sensitivity_ju(mesh: &Mesh, chi_elem: &[f64], u: &VectorField, material: &MaterialParams) -> Vec<f64> {
    mesh.element_to_nodes(&sensitivity_ju_elements(mesh, chi_elem, u, material))
}
