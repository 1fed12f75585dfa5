//! Level-set design field, smoothed characteristic function and the
//! reaction-diffusion update.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Deref;

use crate::error::{Error, Result};
use crate::fem::{Assembler, SolverOptions, SparseSystem};
use crate::mesh::Mesh;
use crate::sparse::CsrMatrix;

/// Quintic smoothed Heaviside with transition half-width `delta`.
pub fn heaviside(phi: f64, delta: f64) -> f64 {
    if phi >= delta {
        return 1.0;
    }
    if phi <= -delta {
        return 0.0;
    }
    let r = phi / delta;
    let r2 = r * r;
    0.5 + r * (15.0 / 16.0 - r2 * (5.0 / 8.0 - r2 * (3.0 / 16.0)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSetParams {
    pub delta: f64,
    pub tau: f64,
    pub k_coef: f64,
    pub dt: f64,
}

impl Default for LevelSetParams {
    fn default() -> Self {
        LevelSetParams {
            delta: 1e-3,
            tau: 1e-4,
            k_coef: 1.0,
            dt: 0.1,
        }
    }
}

impl LevelSetParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("delta", self.delta), ("tau", self.tau), ("K_coef", self.k_coef), ("dt", self.dt)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("level-set parameter {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Nodal level-set values in `[-1, 1]` together with the update parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetField {
    phi: Vec<f64>,
    pub params: LevelSetParams,
}

impl LevelSetField {
    pub fn new(phi: Vec<f64>, params: LevelSetParams) -> Result<Self> {
        params.validate()?;
        if let Some(i) = phi.iter().position(|v| !(v.is_finite() && (-1.0..=1.0).contains(v))) {
            return Err(Error::InvalidArgument(format!("phi[{i}] = {} outside [-1, 1]", phi[i])));
        }
        Ok(LevelSetField { phi, params })
    }

    /// `φ ≡ 1` with non-design nodes pinned.
    pub fn initial(mesh: &Mesh, params: LevelSetParams) -> Result<Self> {
        let phi = mesh
            .node_pins()
            .iter()
            .map(|p| match p {
                Some(c) if *c < 0.5 => -1.0,
                _ => 1.0,
            })
            .collect();
        Self::new(phi, params)
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn chi(&self, mesh: &Mesh) -> CharacteristicField {
        CharacteristicField::from_phi(mesh, &self.phi, self.params.delta)
    }
}

/// Nodal material indicator in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicField(Vec<f64>);

impl CharacteristicField {
    pub fn new(chi: Vec<f64>) -> Result<Self> {
        if let Some(i) = chi.iter().position(|v| !(v.is_finite() && (0.0..=1.0).contains(v))) {
            return Err(Error::InvalidArgument(format!("chi[{i}] = {} outside [0, 1]", chi[i])));
        }
        Ok(CharacteristicField(chi))
    }

    pub fn uniform(n: usize, value: f64) -> Result<Self> {
        Self::new(alloc::vec![value; n])
    }

    /// Heaviside of `φ`, then pinned to 1/0 on non-design solid/void nodes.
    pub fn from_phi(mesh: &Mesh, phi: &[f64], delta: f64) -> Self {
        let mut chi: Vec<f64> = phi.iter().map(|&p| heaviside(p, delta)).collect();
        for (c, pin) in chi.iter_mut().zip(mesh.node_pins()) {
            if let Some(v) = pin {
                *c = v;
            }
        }
        CharacteristicField(chi)
    }

    /// Centroid values `χ̄_e`.
    pub fn element_values(&self, mesh: &Mesh) -> Vec<f64> {
        mesh.element_average(&self.0)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for CharacteristicField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// `∫χ dΩ / |D|` with centroid element values.
pub fn volume_fraction(chi: &CharacteristicField, mesh: &Mesh) -> f64 {
    volume_fraction_elements(&chi.element_values(mesh), mesh)
}

pub fn volume_fraction_elements(chi_elem: &[f64], mesh: &Mesh) -> f64 {
    let v: f64 = chi_elem.iter().zip(mesh.areas()).map(|(c, a)| c * a).sum();
    v / mesh.total_area()
}

/// `G·|D| / ∫|G| dΩ` using the lumped mass for the integral.
pub fn normalize_sensitivity(sensitivity: &[f64], lumped_mass: &[f64], domain_area: f64) -> Result<Vec<f64>> {
    if let Some(i) = sensitivity.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite sensitivity at node {i}")));
    }
    let total: f64 = sensitivity.iter().zip(lumped_mass).map(|(g, m)| g.abs() * m).sum();
    if total == 0.0 {
        return Err(Error::DegenerateSensitivity);
    }
    let scale = total / domain_area;
    Ok(sensitivity.iter().map(|g| g / scale).collect())
}

/// Reusable operators for repeated level-set updates on one mesh.
#[derive(Debug, Clone)]
pub struct LevelSetUpdater {
    mass: CsrMatrix,
    system: SparseSystem,
    lumped: Vec<f64>,
    area: f64,
    params: LevelSetParams,
    phi_pins: Vec<Option<f64>>,
}

const UPDATE_TOL: f64 = 1e-12;

impl LevelSetUpdater {
    /// `fixed_solid` lists the ∂D_m nodes held at `φ = 1`.
    pub fn new(mesh: &Mesh, params: LevelSetParams, fixed_solid: &[usize]) -> Result<Self> {
        params.validate()?;
        let asm = Assembler::new(mesh);
        let mass = asm.mass(mesh);
        let ones = alloc::vec![1.0; mesh.num_triangles()];
        let stiff = asm.diffusion(mesh, &ones)?;
        let mut lhs = mass.clone();
        lhs.scale(1.0 / params.dt);
        let lhs = lhs.add_scaled(params.k_coef * params.tau, &stiff)?;
        let mut system = SparseSystem::new(lhs);
        for &n in fixed_solid {
            system.constrain(n, 1.0)?;
        }
        let phi_pins = mesh
            .node_pins()
            .iter()
            .map(|p| p.map(|c| if c < 0.5 { -1.0 } else { 1.0 }))
            .collect();
        Ok(LevelSetUpdater {
            mass,
            system,
            lumped: mesh.lumped_mass(),
            area: mesh.total_area(),
            params,
            phi_pins,
        })
    }

    pub fn params(&self) -> &LevelSetParams {
        &self.params
    }

    /// One semi-implicit step driven by `sensitivity` (positive lowers φ).
    pub fn update(&self, field: &LevelSetField, sensitivity: &[f64]) -> Result<LevelSetField> {
        let n = self.lumped.len();
        if field.phi.len() != n || sensitivity.len() != n {
            return Err(Error::Internal("level-set update size mismatch".into()));
        }
        let g = normalize_sensitivity(sensitivity, &self.lumped, self.area)?;
        self.step(field, &g)
    }

    /// Step with an already normalized reaction term `ĝ`.
    pub fn step(&self, field: &LevelSetField, g_hat: &[f64]) -> Result<LevelSetField> {
        let p = &self.params;
        let src: Vec<f64> = field
            .phi
            .iter()
            .zip(g_hat)
            .map(|(phi, g)| phi / p.dt - p.k_coef * g)
            .collect();
        let load = self.mass.apply(&src);
        let mut sys = self.system.clone();
        for (i, (r, l)) in sys.rhs.iter_mut().zip(&load).enumerate() {
            if sys_free(&self.system, i) {
                *r += l;
            }
        }
        let opts = SolverOptions {
            tol: UPDATE_TOL,
            max_iter: None,
        };
        let (mut phi, _) = sys.solve(opts, Some(&field.phi))?;
        for (v, pin) in phi.iter_mut().zip(&self.phi_pins) {
            *v = v.clamp(-1.0, 1.0);
            if let Some(x) = pin {
                *v = *x;
            }
        }
        Ok(LevelSetField { phi, params: field.params })
    }
}

fn sys_free(sys: &SparseSystem, dof: usize) -> bool {
    sys.prescribed()[dof].is_none()
}

/// Convenience single update building the operators on the fly.
pub fn update(field: &LevelSetField, sensitivity: &[f64], mesh: &Mesh, fixed_solid: &[usize]) -> Result<LevelSetField> {
    LevelSetUpdater::new(mesh, field.params, fixed_solid)?.update(field, sensitivity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Region;
    use crate::mesh::{generate_rect_mesh, NonDesignKind};

    #[test]
    fn heaviside_values() {
        let d = 1e-3;
        assert_eq!(heaviside(0.0, d), 0.5);
        assert_eq!(heaviside(d, d), 1.0);
        assert_eq!(heaviside(-d, d), 0.0);
        assert_eq!(heaviside(0.5, 1.0), 0.896484375);
        assert_eq!(heaviside(-0.5, 1.0), 1.0 - 0.896484375);
        assert_eq!(heaviside(5.0, 1.0), 1.0);
    }

    #[test]
    fn volume_fraction_half() {
        let m = generate_rect_mesh(1.0, 1.0, 8, 8).unwrap();
        let phi: Vec<f64> = m.nodes().iter().map(|p| if p[0] < 0.5 { 1.0 } else if p[0] > 0.5 { -1.0 } else { 0.0 }).collect();
        let f = LevelSetField::new(phi, LevelSetParams::default()).unwrap();
        let v = volume_fraction(&f.chi(&m), &m);
        assert!((v - 0.5).abs() < 1e-12);
        assert_eq!(volume_fraction(&CharacteristicField::uniform(81, 1.0).unwrap(), &m), 1.0);
        assert_eq!(volume_fraction(&CharacteristicField::uniform(81, 0.0).unwrap(), &m), 0.0);
    }

    #[test]
    fn uniform_sensitivity_lowers_phi_uniformly() {
        let m = generate_rect_mesh(2.0, 1.0, 6, 3).unwrap();
        let params = LevelSetParams { dt: 0.1, k_coef: 1.0, ..Default::default() };
        let f = LevelSetField::new(alloc::vec![0.5; m.num_nodes()], params).unwrap();
        let out = update(&f, &alloc::vec![3.0; m.num_nodes()], &m, &[]).unwrap();
        for v in out.phi() {
            assert!((v - 0.4).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_reaction_keeps_uniform_phi() {
        let m = generate_rect_mesh(1.0, 1.0, 4, 4).unwrap();
        let f = LevelSetField::new(alloc::vec![0.3; m.num_nodes()], LevelSetParams::default()).unwrap();
        let up = LevelSetUpdater::new(&m, f.params, &[]).unwrap();
        let out = up.step(&f, &alloc::vec![0.0; m.num_nodes()]).unwrap();
        for v in out.phi() {
            assert!((v - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_sensitivity_rejected() {
        let m = generate_rect_mesh(1.0, 1.0, 2, 2).unwrap();
        let f = LevelSetField::initial(&m, LevelSetParams::default()).unwrap();
        let err = update(&f, &alloc::vec![0.0; m.num_nodes()], &m, &[]).unwrap_err();
        assert_eq!(err, Error::DegenerateSensitivity);
    }

    #[test]
    fn power_of_two_scaling_is_bit_identical() {
        let m = generate_rect_mesh(1.0, 1.0, 8, 8).unwrap();
        let f = LevelSetField::initial(&m, LevelSetParams::default()).unwrap();
        let g: Vec<f64> = m.nodes().iter().map(|p| libm::sin(7.0 * p[0]) + p[1] - 0.3).collect();
        let up = LevelSetUpdater::new(&m, f.params, &[]).unwrap();
        let a = up.update(&f, &g).unwrap();
        let g2: Vec<f64> = g.iter().map(|v| v * 1024.0).collect();
        assert_eq!(a, up.update(&f, &g2).unwrap());
        let g3: Vec<f64> = g.iter().map(|v| v * 1000.0).collect();
        let c = up.update(&f, &g3).unwrap();
        for (x, y) in a.phi().iter().zip(c.phi()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn nondesign_and_fixed_nodes_are_pinned() {
        let mut m = generate_rect_mesh(1.0, 1.0, 8, 8).unwrap();
        m.mark_nondesign(&Region::circle(0.5, 0.5, 0.2), NonDesignKind::Void).unwrap();
        m.tag_nodes("dm", &Region::rect(0.0, 1.0, 0.0, 0.0)).unwrap();
        let fixed = m.selection_nodes("dm").unwrap();
        let f = LevelSetField::initial(&m, LevelSetParams::default()).unwrap();
        let pins = m.node_pins();
        let up = LevelSetUpdater::new(&m, f.params, &fixed).unwrap();
        let out = up.update(&f, &alloc::vec![1.0; m.num_nodes()]).unwrap();
        for (i, v) in out.phi().iter().enumerate() {
            if pins[i] == Some(0.0) {
                assert_eq!(*v, -1.0);
            } else if fixed.contains(&i) {
                assert_eq!(*v, 1.0);
            } else {
                assert!((v - 0.9).abs() < 0.05, "{v}");
            }
        }
        let chi = out.chi(&m);
        assert!(chi.iter().enumerate().all(|(i, c)| pins[i] != Some(0.0) || *c == 0.0));
    }

    #[test]
    fn invalid_inputs() {
        assert!(LevelSetField::new(alloc::vec![1.5], LevelSetParams::default()).is_err());
        let bad = LevelSetParams { tau: 0.0, ..Default::default() };
        assert!(LevelSetField::new(alloc::vec![0.0], bad).is_err());
        assert!(CharacteristicField::new(alloc::vec![-0.1]).is_err());
    }
}
