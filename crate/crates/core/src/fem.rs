//! P1 finite elements: scalar diffusion, consistent mass and plane-stress elasticity.
//!
//! Systems are assembled into a [`SparseSystem`]; Dirichlet conditions are
//! eliminated symmetrically so the constrained matrix stays SPD and can be
//! handed to the conjugate gradient solver.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::elasticity::MaterialParams;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::sparse::{pcg, AssemblyPattern, CsrMatrix, SolveStats};

/// Default relative residual target of the iterative solver.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    /// `None` means ten times the number of unknowns.
    pub max_iter: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: DEFAULT_TOL,
            max_iter: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    prescribed: Vec<Option<f64>>,
}

impl SparseSystem {
    pub fn new(matrix: CsrMatrix) -> Self {
        let n = matrix.dim();
        SparseSystem {
            matrix,
            rhs: vec![0.0; n],
            prescribed: vec![None; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn prescribed(&self) -> &[Option<f64>] {
        &self.prescribed
    }

    /// Prescribes `value` at `dof`, moving the known column to the right-hand side.
    pub fn constrain(&mut self, dof: usize, value: f64) -> Result<()> {
        let n = self.dim();
        if dof >= n {
            return Err(Error::Index { index: dof, len: n });
        }
        if let Some(first) = self.prescribed[dof] {
            if first == value {
                return Ok(());
            }
            return Err(Error::Constraint {
                dof,
                first,
                second: value,
            });
        }
        let (cols, vals) = self.matrix.row(dof);
        let updates: Vec<(usize, f64)> = cols.iter().copied().zip(vals.iter().copied()).collect();
        for (i, kij) in updates {
            if i != dof && self.prescribed[i].is_none() {
                self.rhs[i] -= kij * value;
            }
        }
        self.matrix.eliminate(dof);
        self.rhs[dof] = value;
        self.prescribed[dof] = Some(value);
        Ok(())
    }

    /// Prescribes `values[k]` at `dofs[k]`.
    pub fn apply_dirichlet(&mut self, dofs: &[usize], values: &[f64]) -> Result<()> {
        if dofs.is_empty() {
            return Err(Error::Boundary("empty Dirichlet node set".into()));
        }
        if dofs.len() != values.len() {
            return Err(Error::Internal("Dirichlet dofs and values differ in length".into()));
        }
        for (&d, &v) in dofs.iter().zip(values) {
            self.constrain(d, v)?;
        }
        Ok(())
    }

    pub fn apply_dirichlet_uniform(&mut self, dofs: &[usize], value: f64) -> Result<()> {
        if dofs.is_empty() {
            return Err(Error::Boundary("empty Dirichlet node set".into()));
        }
        for &d in dofs {
            self.constrain(d, value)?;
        }
        Ok(())
    }

    /// Adds a uniform inward boundary flux on scalar systems, lumped half per edge end.
    pub fn apply_neumann(&mut self, mesh: &Mesh, edges: &[usize], flux: f64) -> Result<()> {
        if edges.is_empty() {
            return Err(Error::Boundary("empty Neumann edge set".into()));
        }
        for &e in edges {
            let half = 0.5 * flux * mesh.edge_length(e);
            for n in mesh.boundary_edges()[e] {
                self.add_load(n, half);
            }
        }
        Ok(())
    }

    /// Adds a uniform traction (force per length) on vector systems.
    pub fn apply_traction(&mut self, mesh: &Mesh, edges: &[usize], traction: [f64; 2]) -> Result<()> {
        if edges.is_empty() {
            return Err(Error::Boundary("empty traction edge set".into()));
        }
        for &e in edges {
            let len = mesh.edge_length(e);
            for n in mesh.boundary_edges()[e] {
                self.add_load(2 * n, 0.5 * len * traction[0]);
                self.add_load(2 * n + 1, 0.5 * len * traction[1]);
            }
        }
        Ok(())
    }

    fn add_load(&mut self, dof: usize, value: f64) {
        if self.prescribed[dof].is_none() {
            self.rhs[dof] += value;
        }
    }

    /// Solves the constrained system; `guess` seeds the iteration.
    pub fn solve(&self, opts: SolverOptions, guess: Option<&[f64]>) -> Result<(Vec<f64>, SolveStats)> {
        let n = self.dim();
        let mut x = match guess {
            Some(g) if g.len() == n => g.to_vec(),
            Some(_) => return Err(Error::Internal("initial guess has wrong length".into())),
            None => vec![0.0; n],
        };
        for (xi, p) in x.iter_mut().zip(&self.prescribed) {
            if let Some(v) = p {
                *xi = *v;
            }
        }
        let max_iter = opts.max_iter.unwrap_or(10 * n.max(1));
        let stats = pcg(&self.matrix, &self.rhs, &mut x, opts.tol, max_iter)?;
        Ok((x, stats))
    }
}

/// Cached sparsity patterns for scalar and vector P1 problems on one mesh.
#[derive(Debug, Clone)]
pub struct Assembler {
    scalar: AssemblyPattern,
    vector: AssemblyPattern,
}

impl Assembler {
    pub fn new(mesh: &Mesh) -> Self {
        let sdofs: Vec<usize> = mesh.triangles().iter().flat_map(|t| t.iter().copied()).collect();
        let vdofs: Vec<usize> = mesh
            .triangles()
            .iter()
            .flat_map(|t| t.iter().flat_map(|&v| [2 * v, 2 * v + 1]))
            .collect();
        Assembler {
            scalar: AssemblyPattern::new(mesh.num_nodes(), 3, &sdofs),
            vector: AssemblyPattern::new(2 * mesh.num_nodes(), 6, &vdofs),
        }
    }

    /// Stiffness of `−∇·(a ∇T)` with a per-element coefficient.
    pub fn diffusion(&self, mesh: &Mesh, coeff: &[f64]) -> Result<CsrMatrix> {
        if coeff.len() != mesh.num_triangles() {
            return Err(Error::Internal("coefficient length differs from element count".into()));
        }
        if let Some((element, &value)) = coeff.iter().enumerate().find(|(_, c)| !(**c > 0.0 && c.is_finite())) {
            return Err(Error::Assembly { element, value });
        }
        Ok(self.scalar.assemble(|e, out| {
            let g = mesh.shape_gradients(e);
            let w = coeff[e] * mesh.area(e);
            for a in 0..3 {
                for b in 0..3 {
                    out[3 * a + b] = w * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                }
            }
        }))
    }

    /// Consistent P1 mass matrix.
    pub fn mass(&self, mesh: &Mesh) -> CsrMatrix {
        self.scalar.assemble(|e, out| {
            let w = mesh.area(e) / 12.0;
            for a in 0..3 {
                for b in 0..3 {
                    out[3 * a + b] = if a == b { 2.0 * w } else { w };
                }
            }
        })
    }

    /// Plane-stress stiffness with `scale[e] · 𝔻` on each element.
    pub fn elasticity(&self, mesh: &Mesh, scale: &[f64], material: &MaterialParams) -> Result<CsrMatrix> {
        material.validate()?;
        if scale.len() != mesh.num_triangles() {
            return Err(Error::Internal("stiffness scale length differs from element count".into()));
        }
        if let Some((e, s)) = scale.iter().enumerate().find(|(_, s)| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument(format!("stiffness scale {s} of element {e} must be positive")));
        }
        let d = material.plane_stress_matrix();
        Ok(self.vector.assemble(|e, out| {
            let b = strain_displacement(mesh, e);
            let w = scale[e] * mesh.area(e);
            // out = w Bᵀ D B
            let mut db = [[0.0; 6]; 3];
            for i in 0..3 {
                for j in 0..6 {
                    db[i][j] = (0..3).map(|k| d[i][k] * b[k][j]).sum();
                }
            }
            for i in 0..6 {
                for j in 0..6 {
                    out[6 * i + j] = w * (0..3).map(|k| b[k][i] * db[k][j]).sum::<f64>();
                }
            }
        }))
    }
}

/// Strain-displacement matrix mapping element dofs `[u0x, u0y, u1x, u1y, u2x, u2y]`
/// to engineering strain `[ε_xx, ε_yy, γ_xy]`.
pub fn strain_displacement(mesh: &Mesh, element: usize) -> [[f64; 6]; 3] {
    let g = mesh.shape_gradients(element);
    let mut b = [[0.0; 6]; 3];
    for k in 0..3 {
        b[0][2 * k] = g[k][0];
        b[1][2 * k + 1] = g[k][1];
        b[2][2 * k] = g[k][1];
        b[2][2 * k + 1] = g[k][0];
    }
    b
}

/// Symmetric strain tensor of a displacement field on one element.
pub fn element_strain(mesh: &Mesh, element: usize, u: &[f64]) -> [[f64; 2]; 2] {
    let b = strain_displacement(mesh, element);
    let tri = mesh.triangles()[element];
    let mut eps = [0.0; 3];
    for (i, row) in b.iter().enumerate() {
        for k in 0..3 {
            eps[i] += row[2 * k] * u[2 * tri[k]] + row[2 * k + 1] * u[2 * tri[k] + 1];
        }
    }
    [[eps[0], 0.5 * eps[2]], [0.5 * eps[2], eps[1]]]
}

/// Diffusion system with a per-element coefficient and no boundary conditions yet.
pub fn assemble_diffusion(mesh: &Mesh, coeff: &[f64]) -> Result<SparseSystem> {
    Ok(SparseSystem::new(Assembler::new(mesh).diffusion(mesh, coeff)?))
}

/// Plane-stress elasticity system with no boundary conditions yet.
pub fn assemble_elasticity(mesh: &Mesh, stiffness_scale: &[f64], material: &MaterialParams) -> Result<SparseSystem> {
    Ok(SparseSystem::new(
        Assembler::new(mesh).elasticity(mesh, stiffness_scale, material)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Region;
    use crate::mesh::generate_rect_mesh;
    use crate::sparse::{dot, norm};

    fn unit(nx: usize, ny: usize) -> Mesh {
        generate_rect_mesh(1.0, 1.0, nx, ny).unwrap()
    }

    #[test]
    fn diffusion_rows_sum_to_zero() {
        let m = unit(1, 1);
        let sys = assemble_diffusion(&m, &[1.0, 1.0]).unwrap();
        assert_eq!(sys.dim(), 4);
        let r = sys.matrix.apply(&[1.0; 4]);
        assert!(r.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn diffusion_is_linear_in_coefficient() {
        let m = unit(3, 2);
        let n = m.num_triangles();
        let k1 = assemble_diffusion(&m, &vec![1.0; n]).unwrap().matrix;
        let k2 = assemble_diffusion(&m, &vec![2.0; n]).unwrap().matrix;
        for i in 0..k1.dim() {
            let (cols, vals) = k1.row(i);
            for (j, v) in cols.iter().zip(vals) {
                assert_eq!(k2.get(i, *j), 2.0 * v);
            }
        }
    }

    #[test]
    fn diffusion_symmetry_random_coefficients() {
        let m = unit(8, 8);
        // deterministic pseudo-random positive coefficients
        let mut state = 0x2545_f491_u64;
        let coeff: Vec<f64> = (0..m.num_triangles())
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                0.1 + (state % 1000) as f64 / 100.0
            })
            .collect();
        let k = assemble_diffusion(&m, &coeff).unwrap().matrix;
        // transpose-difference oracle, entry by entry
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..k.dim() {
            for j in 0..k.dim() {
                worst = worst.max((k.get(i, j) - k.get(j, i)).abs());
                scale = scale.max(k.get(i, j).abs());
            }
        }
        assert!(worst / scale < 1e-12);
        assert!(k.symmetry_residual() < 1e-12);
    }

    #[test]
    fn nonpositive_coefficient_names_element() {
        let m = unit(2, 2);
        let mut c = vec![1.0; m.num_triangles()];
        c[5] = 0.0;
        assert!(matches!(
            assemble_diffusion(&m, &c),
            Err(Error::Assembly { element: 5, .. })
        ));
    }

    #[test]
    fn elasticity_rigid_modes() {
        let m = unit(1, 1);
        let mat = MaterialParams::new(1.0, 0.3).unwrap();
        let k = assemble_elasticity(&m, &[1.0, 1.0], &mat).unwrap().matrix;
        let tx: Vec<f64> = (0..4).flat_map(|_| [1.0, 0.0]).collect();
        let ty: Vec<f64> = (0..4).flat_map(|_| [0.0, 1.0]).collect();
        let rot: Vec<f64> = m.nodes().iter().flat_map(|p| [-p[1], p[0]]).collect();
        for v in [tx, ty, rot] {
            let r = k.apply(&v);
            assert!(norm(&r) < 1e-12, "rigid body residual {}", norm(&r));
        }
    }

    #[test]
    fn elasticity_linear_in_modulus() {
        let m = unit(2, 2);
        let s = vec![1.0; m.num_triangles()];
        let k1 = assemble_elasticity(&m, &s, &MaterialParams::new(1.0, 0.3).unwrap()).unwrap().matrix;
        let k2 = assemble_elasticity(&m, &s, &MaterialParams::new(2.0, 0.3).unwrap()).unwrap().matrix;
        for i in 0..k1.dim() {
            let (cols, vals) = k1.row(i);
            for (j, v) in cols.iter().zip(vals) {
                assert!((k2.get(i, *j) - 2.0 * v).abs() <= 1e-15 * v.abs().max(1.0));
            }
        }
        assert!(assemble_elasticity(&m, &s, &MaterialParams { e: 1.0, nu: 0.5 }).is_err());
    }

    #[test]
    fn dirichlet_zero_everywhere() {
        let m = unit(3, 3);
        let mut sys = assemble_diffusion(&m, &vec![1.0; m.num_triangles()]).unwrap();
        let all: Vec<usize> = (0..m.num_nodes()).collect();
        sys.apply_dirichlet_uniform(&all, 0.0).unwrap();
        let (x, _) = sys.solve(SolverOptions::default(), None).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dirichlet_conflict_and_range() {
        let m = unit(2, 2);
        let mut sys = assemble_diffusion(&m, &vec![1.0; m.num_triangles()]).unwrap();
        sys.constrain(0, 1.0).unwrap();
        sys.constrain(0, 1.0).unwrap();
        assert!(matches!(sys.constrain(0, 2.0), Err(Error::Constraint { dof: 0, .. })));
        assert!(matches!(sys.constrain(99, 0.0), Err(Error::Index { index: 99, .. })));
    }

    #[test]
    fn strip_interpolates_linearly() {
        let mut m = generate_rect_mesh(4.0, 0.5, 16, 2).unwrap();
        m.tag_boundary("l", &Region::rect(0.0, 0.0, 0.0, 0.5)).unwrap();
        m.tag_boundary("r", &Region::rect(4.0, 4.0, 0.0, 0.5)).unwrap();
        let mut sys = assemble_diffusion(&m, &vec![1.0; m.num_triangles()]).unwrap();
        sys.apply_dirichlet_uniform(&m.selection_nodes("l").unwrap(), 1.0).unwrap();
        sys.apply_dirichlet_uniform(&m.selection_nodes("r").unwrap(), 0.0).unwrap();
        let (x, _) = sys.solve(SolverOptions::default(), None).unwrap();
        for (i, p) in m.nodes().iter().enumerate() {
            assert!((x[i] - (1.0 - p[0] / 4.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn neumann_load_sums() {
        let mut m = unit(4, 4);
        m.tag_boundary("left", &Region::rect(0.0, 0.0, 0.0, 1.0)).unwrap();
        let mut sys = assemble_diffusion(&m, &vec![1.0; m.num_triangles()]).unwrap();
        sys.apply_neumann(&m, m.edge_set("left").unwrap(), 1.0).unwrap();
        assert!((sys.rhs.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let mut sys = assemble_diffusion(&m, &vec![1.0; m.num_triangles()]).unwrap();
        sys.apply_neumann(&m, m.edge_set("left").unwrap(), 0.0).unwrap();
        assert!(sys.rhs.iter().all(|&v| v == 0.0));

        // perimeter oracle: sum of boundary edge lengths
        let perimeter: f64 = (0..m.boundary_edges().len()).map(|e| m.edge_length(e)).sum();
        let mut sys = assemble_diffusion(&m, &vec![1.0; m.num_triangles()]).unwrap();
        sys.apply_neumann(&m, m.edge_set(crate::mesh::OUTER).unwrap(), 1.0).unwrap();
        assert!((sys.rhs.iter().sum::<f64>() - perimeter).abs() < 1e-12);
        assert!((perimeter - 4.0).abs() < 1e-12);
        assert!(matches!(sys.apply_neumann(&m, &[], 1.0), Err(Error::Boundary(_))));
    }

    #[test]
    fn linear_diffusion_solution() {
        let mut m = unit(16, 16);
        m.tag_boundary("l", &Region::rect(0.0, 0.0, 0.0, 1.0)).unwrap();
        m.tag_boundary("r", &Region::rect(1.0, 1.0, 0.0, 1.0)).unwrap();
        let mut sys = assemble_diffusion(&m, &vec![1.0; m.num_triangles()]).unwrap();
        sys.apply_dirichlet_uniform(&m.selection_nodes("l").unwrap(), 1.0).unwrap();
        sys.apply_dirichlet_uniform(&m.selection_nodes("r").unwrap(), 0.0).unwrap();
        let (x, _) = sys.solve(SolverOptions::default(), None).unwrap();
        let err = m
            .nodes()
            .iter()
            .zip(&x)
            .map(|(p, v)| (v - (1.0 - p[0])).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "max error {err}");
        // Galerkin orthogonality on the solved system
        let r: Vec<f64> = sys.matrix.apply(&x).iter().zip(&sys.rhs).map(|(a, b)| a - b).collect();
        assert!(dot(&x, &r).abs() <= 1e-9 * norm(&sys.rhs) * norm(&x));
    }

    #[test]
    fn pure_neumann_is_rejected() {
        let mut m = unit(4, 4);
        m.tag_boundary("l", &Region::rect(0.0, 0.0, 0.0, 1.0)).unwrap();
        let mut sys = assemble_diffusion(&m, &vec![1.0; m.num_triangles()]).unwrap();
        sys.apply_neumann(&m, m.edge_set("l").unwrap(), 1.0).unwrap();
        assert!(matches!(
            sys.solve(SolverOptions::default(), None),
            Err(Error::Solver { .. })
        ));
    }
}
