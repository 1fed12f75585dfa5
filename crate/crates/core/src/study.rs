//! Boundary-condition study on two-wall test structures: steady diffusion with a
//! Dirichlet or Neumann heat source, sampled along fixed cross-sections.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::fem::{Assembler, SolverOptions, SparseSystem};
use crate::field::ScalarField;
use crate::fictitious::FictitiousParams;
use crate::geometry::{Point, Region};
use crate::levelset::CharacteristicField;
use crate::mesh::{generate_rect_mesh, Mesh, PointLocator};

pub const STUDY_OUT: &str = "study_out";
pub const STUDY_IN: &str = "study_in";

/// Wall bands in unit-square coordinates.
const WALLS: [(f64, f64); 2] = [(0.3, 0.4), (0.6, 0.7)];
const GAP: (f64, f64) = (0.4, 0.6);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    /// Two full-height walls between the source and sink edges.
    Shielded,
    /// The same walls, each opened by a central gap.
    Penetrated,
}

impl FromStr for Structure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shielded" => Ok(Structure::Shielded),
            "penetrated" => Ok(Structure::Penetrated),
            _ => Err(Error::InvalidArgument(format!("unknown structure `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Dirichlet,
    Neumann,
}

impl FromStr for Source {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dirichlet" => Ok(Source::Dirichlet),
            "neumann" => Ok(Source::Neumann),
            _ => Err(Error::InvalidArgument(format!("unknown source `{s}`"))),
        }
    }
}

/// Named sample segments: 1-x cross the void between the walls, 2-x run inside
/// the first wall.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossSection {
    S11,
    S12,
    S21,
    S22,
}

impl CrossSection {
    pub const ALL: [CrossSection; 4] = [CrossSection::S11, CrossSection::S12, CrossSection::S21, CrossSection::S22];

    pub fn name(self) -> &'static str {
        match self {
            CrossSection::S11 => "1-1",
            CrossSection::S12 => "1-2",
            CrossSection::S21 => "2-1",
            CrossSection::S22 => "2-2",
        }
    }

    /// Structure the section belongs to.
    pub fn structure(self) -> Structure {
        match self {
            CrossSection::S11 | CrossSection::S21 => Structure::Penetrated,
            CrossSection::S12 | CrossSection::S22 => Structure::Shielded,
        }
    }

    /// End points in unit-square coordinates.
    pub fn segment(self) -> (Point, Point) {
        match self {
            CrossSection::S11 | CrossSection::S12 => ([0.4, 0.5], [0.6, 0.5]),
            CrossSection::S21 | CrossSection::S22 => ([0.35, 0.05], [0.35, 0.35]),
        }
    }

    pub fn midpoint(self) -> Point {
        let (a, b) = self.segment();
        [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
    }
}

impl FromStr for CrossSection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        CrossSection::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown cross-section `{s}`")))
    }
}

fn to_domain(mesh: &Mesh, p: Point) -> Point {
    let (lo, hi) = mesh.bounding_box();
    [lo[0] + p[0] * (hi[0] - lo[0]), lo[1] + p[1] * (hi[1] - lo[1])]
}

fn to_unit(mesh: &Mesh, p: Point) -> Point {
    let (lo, hi) = mesh.bounding_box();
    [(p[0] - lo[0]) / (hi[0] - lo[0]), (p[1] - lo[1]) / (hi[1] - lo[1])]
}

/// Nodal characteristic field of a two-wall structure scaled to the mesh bounds.
pub fn two_wall_structure(mesh: &Mesh, structure: Structure) -> CharacteristicField {
    let eps = 1e-9;
    let chi = mesh
        .nodes()
        .iter()
        .map(|&p| {
            let [x, y] = to_unit(mesh, p);
            let in_wall = WALLS.iter().any(|&(a, b)| x >= a - eps && x <= b + eps);
            let in_gap = structure == Structure::Penetrated && y > GAP.0 + eps && y < GAP.1 - eps;
            if in_wall && !in_gap {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    CharacteristicField::new(chi).expect("values are 0 or 1")
}

/// Unit square with the left edge tagged as source and the right edge as sink.
pub fn study_mesh(n: usize) -> Result<Mesh> {
    let mut m = generate_rect_mesh(1.0, 1.0, n, n)?;
    m.tag_boundary(STUDY_OUT, &Region::rect(0.0, 0.0, 0.0, 1.0))?;
    m.tag_boundary(STUDY_IN, &Region::rect(1.0, 1.0, 0.0, 1.0))?;
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub name: String,
    /// `(arc length, x, y, |∇T|)` samples.
    pub samples: Vec<(f64, f64, f64, f64)>,
    pub midpoint_gradient: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub temperature: ScalarField,
    pub profiles: Vec<Profile>,
}

/// Magnitude of the piecewise-constant gradient at `p`.
pub fn gradient_at(mesh: &Mesh, locator: &PointLocator, field: &[f64], p: Point) -> Result<f64> {
    let (e, _) = locator
        .locate(p)
        .ok_or_else(|| Error::InvalidArgument(format!("point ({}, {}) lies outside the mesh", p[0], p[1])))?;
    let g = mesh.gradient(e, field);
    Ok(libm::hypot(g[0], g[1]))
}

/// `|∇field|` sampled at `samples` points along a cross-section.
pub fn cross_section_profile(mesh: &Mesh, field: &[f64], section: CrossSection, samples: usize) -> Result<Profile> {
    let locator = PointLocator::new(mesh);
    let (a, b) = section.segment();
    let (a, b) = (to_domain(mesh, a), to_domain(mesh, b));
    let len = libm::hypot(b[0] - a[0], b[1] - a[1]);
    let n = samples.max(2);
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 / (n - 1) as f64;
        let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
        out.push((t * len, p[0], p[1], gradient_at(mesh, &locator, field, p)?));
    }
    Ok(Profile {
        name: section.name().into(),
        samples: out,
        midpoint_gradient: gradient_at(mesh, &locator, field, to_domain(mesh, section.midpoint()))?,
    })
}

/// Steady diffusion with coefficient `a(χ)`, `T = 0` on the sink and either
/// `T = 1` or unit inward flux on the source.
pub fn solve_temperature(mesh: &Mesh, chi: &CharacteristicField, source: Source, coefficient: &FictitiousParams, out_name: &str, in_name: &str) -> Result<ScalarField> {
    let chi_e = chi.element_values(mesh);
    let coeff: Vec<f64> = chi_e.iter().map(|&c| coefficient.coefficient(c)).collect();
    let asm = Assembler::new(mesh);
    let mut sys = SparseSystem::new(asm.diffusion(mesh, &coeff)?);
    let sink = mesh
        .selection_nodes(in_name)
        .ok_or_else(|| Error::Configuration(format!("boundary `{in_name}` is not tagged")))?;
    sys.apply_dirichlet_uniform(&sink, 0.0)?;
    match source {
        Source::Dirichlet => {
            let nodes = mesh
                .selection_nodes(out_name)
                .ok_or_else(|| Error::Configuration(format!("boundary `{out_name}` is not tagged")))?;
            sys.apply_dirichlet_uniform(&nodes, 1.0)?;
        }
        Source::Neumann => {
            let edges = mesh
                .edge_set(out_name)
                .ok_or_else(|| Error::Configuration(format!("boundary `{out_name}` is not an edge set")))?;
            sys.apply_neumann(mesh, edges, 1.0)?;
        }
    }
    ScalarField::new(sys.solve(SolverOptions::default(), None)?.0)
}

/// Temperature on `structure` plus the profiles of the cross-sections that lie
/// in it. The mesh must carry [`STUDY_OUT`] and [`STUDY_IN`].
pub fn boundary_study(mesh: &Mesh, structure: Structure, source: Source, coefficient: &FictitiousParams) -> Result<StudyResult> {
    let chi = two_wall_structure(mesh, structure);
    let t = solve_temperature(mesh, &chi, source, coefficient, STUDY_OUT, STUDY_IN)?;
    let profiles = CrossSection::ALL
        .into_iter()
        .filter(|c| c.structure() == structure)
        .map(|c| cross_section_profile(mesh, &t, c, 41))
        .collect::<Result<Vec<_>>>()?;
    Ok(StudyResult { temperature: t, profiles })
}

/// The reference contrast `a = 1` in solid and `a = 100` in void.
pub fn default_study_coefficient() -> FictitiousParams {
    FictitiousParams {
        kappa_solid: 1.0,
        kappa_void: 100.0,
        length: 1.0,
        weight: 0.0,
    }
}
