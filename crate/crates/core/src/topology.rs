//! Geometric measures of optimized layouts: void connectivity and wall thickness.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;

use crate::error::{Error, Result};
use crate::levelset::CharacteristicField;
use crate::mesh::{Mesh, PointLocator};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Whether void elements (`χ̄ < threshold`) link `set_a` to `set_b` through
/// edge-adjacent neighbours.
pub fn check_void_connectivity(chi: &CharacteristicField, mesh: &Mesh, set_a: &[usize], set_b: &[usize], threshold: f64) -> Result<bool> {
    if set_a.is_empty() || set_b.is_empty() {
        return Err(Error::InvalidArgument("connectivity needs two non-empty node sets".into()));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!("threshold must lie in (0, 1), got {threshold}")));
    }
    if chi.len() != mesh.num_nodes() {
        return Err(Error::Internal("characteristic field does not match the mesh".into()));
    }
    let chi_e = chi.element_values(mesh);
    let void: alloc::vec::Vec<bool> = chi_e.iter().map(|&c| c < threshold).collect();
    let mut target = vec![false; mesh.num_triangles()];
    for e in mesh.elements_touching(set_b) {
        target[e] = true;
    }
    let mut seen = vec![false; mesh.num_triangles()];
    let mut queue = VecDeque::new();
    for e in mesh.elements_touching(set_a) {
        if void[e] && !seen[e] {
            seen[e] = true;
            queue.push_back(e);
        }
    }
    while let Some(e) = queue.pop_front() {
        if target[e] {
            return Ok(true);
        }
        for n in mesh.neighbors(e).into_iter().flatten() {
            if void[n] && !seen[n] {
                seen[n] = true;
                queue.push_back(n);
            }
        }
    }
    Ok(false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Sample lines run parallel to x; thickness is measured horizontally.
    X,
    Y,
}

/// Minimum over sample lines parallel to `axis` of the total solid length
/// (`χ ≥ 0.5`, interpolated) met along the line.
pub fn wall_thickness(chi: &CharacteristicField, mesh: &Mesh, axis: Axis) -> Result<f64> {
    if chi.len() != mesh.num_nodes() {
        return Err(Error::Internal("characteristic field does not match the mesh".into()));
    }
    let (lo, hi) = mesh.bounding_box();
    let (along, across) = match axis {
        Axis::X => (0, 1),
        Axis::Y => (1, 0),
    };
    let h = mesh.cell_size();
    let span_across = hi[across] - lo[across];
    let span_along = hi[along] - lo[along];
    let lines = libm::ceil(span_across / (0.5 * h)).max(1.0) as usize;
    let steps = libm::ceil(span_along / (0.05 * h)).max(1.0) as usize;
    let ds = span_along / steps as f64;
    let locator = PointLocator::new(mesh);
    let mut best = f64::INFINITY;
    for l in 0..lines {
        let c = lo[across] + (l as f64 + 0.5) * span_across / lines as f64;
        let mut solid = 0usize;
        let mut inside = 0usize;
        for k in 0..steps {
            let mut p = [0.0; 2];
            p[along] = lo[along] + (k as f64 + 0.5) * ds;
            p[across] = c;
            if let Some(v) = locator.interpolate(p, chi) {
                inside += 1;
                if v >= 0.5 {
                    solid += 1;
                }
            }
        }
        if inside == 0 {
            continue;
        }
        if solid == 0 {
            return Err(Error::Measurement(format!("sample line at {c} crosses no solid: layout is not shielded")));
        }
        best = best.min(solid as f64 * ds);
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::Measurement("no sample line intersects the mesh".into()))
    }
}
