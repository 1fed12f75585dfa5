//! Triangular meshes over the fixed design domain.
//!
//! A [`Mesh`] owns node coordinates, counter-clockwise triangles, the list of
//! outer boundary edges and named selections on top of them:
//!
//! * edge sets: named subsets of the boundary edges (`Γ_u`, `Γ_t`, flux inlets, ...),
//! * node sets: named sets of nodes, used for interior Dirichlet boundaries such
//!   as the perimeter of a circular non-design region,
//! * element regions: design, non-design solid or non-design void.
//!
//! Edge and node set names share one namespace.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{dist, midpoint, signed_area2, Point, Region};

/// Name of the edge set holding every outer boundary edge.
pub const OUTER: &str = "outer";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ElementRegion {
    Design,
    Solid,
    Void,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonDesignKind {
    Solid,
    Void,
}

#[derive(Debug, Clone, PartialEq)]
enum Selection {
    Edges { edges: Vec<usize>, source: Vec<Region> },
    Nodes { nodes: Vec<usize>, source: Vec<Region> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<[usize; 2]>,
    /// Triangle owning each boundary edge.
    edge_owner: Vec<usize>,
    /// Edge-adjacent neighbour of each triangle across the edge opposite to local vertex k.
    neighbors: Vec<[Option<usize>; 3]>,
    areas: Vec<f64>,
    selections: BTreeMap<String, Selection>,
    regions: Vec<ElementRegion>,
}

impl Mesh {
    /// Builds a mesh from raw nodes and triangles. Triangles given clockwise are
    /// reoriented; degenerate triangles are rejected. All boundary edges are
    /// collected into the [`OUTER`] edge set.
    pub fn from_parts(nodes: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if nodes.is_empty() || triangles.is_empty() {
            return Err(Error::InvalidArgument("mesh needs at least one node and one triangle".into()));
        }
        if let Some(p) = nodes.iter().find(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(Error::InvalidArgument(format!("non-finite node coordinate {p:?}")));
        }
        let n = nodes.len();
        let mut triangles = triangles;
        let mut areas = Vec::with_capacity(triangles.len());
        for (e, tri) in triangles.iter_mut().enumerate() {
            for &v in tri.iter() {
                if v >= n {
                    return Err(Error::Index { index: v, len: n });
                }
            }
            let a2 = signed_area2(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
            if a2 == 0.0 || !a2.is_finite() {
                return Err(Error::InvalidArgument(format!("triangle {e} is degenerate")));
            }
            if a2 < 0.0 {
                tri.swap(1, 2);
            }
            areas.push(0.5 * libm::fabs(a2));
        }

        // edge -> (triangle, local opposite vertex); BTreeMap keeps the result deterministic
        let mut edge_map: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
        for (e, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let a = tri[(k + 1) % 3];
                let b = tri[(k + 2) % 3];
                edge_map.entry((a.min(b), a.max(b))).or_default().push((e, k));
            }
        }
        let mut neighbors = vec![[None; 3]; triangles.len()];
        let mut boundary = Vec::new();
        for (_, owners) in edge_map.iter() {
            match owners.as_slice() {
                [(e, k)] => {
                    let tri = triangles[*e];
                    boundary.push(([tri[(k + 1) % 3], tri[(k + 2) % 3]], *e));
                }
                [(e1, k1), (e2, k2)] => {
                    neighbors[*e1][*k1] = Some(*e2);
                    neighbors[*e2][*k2] = Some(*e1);
                }
                _ => {
                    return Err(Error::InvalidArgument("non-manifold edge shared by more than two triangles".into()));
                }
            }
        }
        // order boundary edges by owning triangle so structured meshes enumerate predictably
        boundary.sort_by_key(|&(edge, owner)| (owner, edge));
        let boundary_edges: Vec<[usize; 2]> = boundary.iter().map(|b| b.0).collect();
        let edge_owner: Vec<usize> = boundary.iter().map(|b| b.1).collect();

        let mut selections = BTreeMap::new();
        selections.insert(
            OUTER.to_string(),
            Selection::Edges {
                edges: (0..boundary_edges.len()).collect(),
                source: Vec::new(),
            },
        );
        let regions = vec![ElementRegion::Design; triangles.len()];
        Ok(Mesh {
            nodes,
            triangles,
            boundary_edges,
            edge_owner,
            neighbors,
            areas,
            selections,
            regions,
        })
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn boundary_edges(&self) -> &[[usize; 2]] {
        &self.boundary_edges
    }

    pub fn edge_owner(&self, edge: usize) -> usize {
        self.edge_owner[edge]
    }

    pub fn neighbors(&self, element: usize) -> [Option<usize>; 3] {
        self.neighbors[element]
    }

    pub fn area(&self, element: usize) -> f64 {
        self.areas[element]
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn regions(&self) -> &[ElementRegion] {
        &self.regions
    }

    pub fn centroid(&self, element: usize) -> Point {
        let [a, b, c] = self.triangles[element];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        [(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0]
    }

    /// Gradients of the three P1 shape functions, constant over the element.
    pub fn shape_gradients(&self, element: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[element];
        let (p0, p1, p2) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        let a2 = 2.0 * self.areas[element];
        [
            [(p1[1] - p2[1]) / a2, (p2[0] - p1[0]) / a2],
            [(p2[1] - p0[1]) / a2, (p0[0] - p2[0]) / a2],
            [(p0[1] - p1[1]) / a2, (p1[0] - p0[0]) / a2],
        ]
    }

    /// Gradient of a nodal scalar field on one element.
    pub fn gradient(&self, element: usize, values: &[f64]) -> [f64; 2] {
        let g = self.shape_gradients(element);
        let tri = self.triangles[element];
        let mut out = [0.0; 2];
        for k in 0..3 {
            out[0] += g[k][0] * values[tri[k]];
            out[1] += g[k][1] * values[tri[k]];
        }
        out
    }

    pub fn edge_length(&self, edge: usize) -> f64 {
        let [a, b] = self.boundary_edges[edge];
        dist(self.nodes[a], self.nodes[b])
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.nodes {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        (lo, hi)
    }

    /// Mean boundary edge length; on structured grids this is the cell width.
    pub fn cell_size(&self) -> f64 {
        let total: f64 = (0..self.boundary_edges.len()).map(|e| self.edge_length(e)).sum();
        total / self.boundary_edges.len() as f64
    }

    /// Number of unique (interior + boundary) edges.
    pub fn num_edges(&self) -> usize {
        (3 * self.triangles.len() + self.boundary_edges.len()) / 2
    }

    pub fn has_selection(&self, name: &str) -> bool {
        self.selections.contains_key(name)
    }

    pub fn selection_names(&self) -> impl Iterator<Item = &str> {
        self.selections.keys().map(String::as_str)
    }

    /// Boundary edge indices of a named edge set.
    pub fn edge_set(&self, name: &str) -> Option<&[usize]> {
        match self.selections.get(name)? {
            Selection::Edges { edges, .. } => Some(edges),
            Selection::Nodes { .. } => None,
        }
    }

    /// Nodes of a named selection: the endpoints of an edge set, or a node set.
    /// Sorted and deduplicated.
    pub fn selection_nodes(&self, name: &str) -> Option<Vec<usize>> {
        match self.selections.get(name)? {
            Selection::Edges { edges, .. } => {
                let mut nodes: Vec<usize> = edges.iter().flat_map(|&e| self.boundary_edges[e]).collect();
                nodes.sort_unstable();
                nodes.dedup();
                Some(nodes)
            }
            Selection::Nodes { nodes, .. } => Some(nodes.clone()),
        }
    }

    fn check_name(&self, name: &str, proposed: &Selection) -> Result<bool> {
        if name.is_empty() {
            return Err(Error::Tagging("empty tag name".into()));
        }
        match self.selections.get(name) {
            None => Ok(false),
            // identical re-tagging is a no-op
            Some(existing) if existing == proposed => Ok(true),
            Some(_) => Err(Error::Tagging(format!("tag `{name}` is already used"))),
        }
    }

    /// Tags every boundary edge whose midpoint lies in `region`.
    /// Returns the number of tagged edges.
    pub fn tag_boundary(&mut self, name: &str, region: &Region) -> Result<usize> {
        self.tag_boundary_any(name, core::slice::from_ref(region))
    }

    /// Tags every boundary edge whose midpoint lies in at least one of `regions`.
    pub fn tag_boundary_any(&mut self, name: &str, regions: &[Region]) -> Result<usize> {
        check_predicates(regions)?;
        let edges: Vec<usize> = (0..self.boundary_edges.len())
            .filter(|&e| {
                let [a, b] = self.boundary_edges[e];
                let m = midpoint(self.nodes[a], self.nodes[b]);
                regions.iter().any(|r| r.contains(m))
            })
            .collect();
        if edges.is_empty() {
            return Err(Error::Tagging(format!("no boundary edge midpoint in {}", describe(regions))));
        }
        let count = edges.len();
        let sel = Selection::Edges {
            edges,
            source: regions.to_vec(),
        };
        if !self.check_name(name, &sel)? {
            self.selections.insert(name.to_string(), sel);
        }
        Ok(count)
    }

    /// Tags every node (boundary or interior) lying in `region` as a node set.
    pub fn tag_nodes(&mut self, name: &str, region: &Region) -> Result<usize> {
        self.tag_nodes_any(name, core::slice::from_ref(region))
    }

    /// Tags every node lying in at least one of `regions`.
    pub fn tag_nodes_any(&mut self, name: &str, regions: &[Region]) -> Result<usize> {
        check_predicates(regions)?;
        let nodes: Vec<usize> = (0..self.nodes.len())
            .filter(|&i| regions.iter().any(|r| r.contains(self.nodes[i])))
            .collect();
        if nodes.is_empty() {
            return Err(Error::Tagging(format!("no node in {}", describe(regions))));
        }
        let count = nodes.len();
        let sel = Selection::Nodes {
            nodes,
            source: regions.to_vec(),
        };
        if !self.check_name(name, &sel)? {
            self.selections.insert(name.to_string(), sel);
        }
        Ok(count)
    }

    /// Tags the nodes within half a cell width of the circle of `radius`.
    pub fn tag_circle_perimeter(&mut self, name: &str, center: Point, radius: f64) -> Result<usize> {
        self.tag_circle_perimeters(name, &[(center, radius)])
    }

    pub fn tag_circle_perimeters(&mut self, name: &str, circles: &[(Point, f64)]) -> Result<usize> {
        let half_width = 0.5 * self.cell_size();
        let bands: Vec<Region> = circles
            .iter()
            .map(|&(center, radius)| Region::CircleBand {
                center,
                radius,
                half_width,
            })
            .collect();
        self.tag_nodes_any(name, &bands)
    }

    /// Adds an explicit edge set given as node pairs, each of which must be a boundary edge.
    pub fn add_edge_set(&mut self, name: &str, pairs: &[[usize; 2]]) -> Result<usize> {
        let lookup: BTreeMap<(usize, usize), usize> = self
            .boundary_edges
            .iter()
            .enumerate()
            .map(|(i, &[a, b])| ((a.min(b), a.max(b)), i))
            .collect();
        let mut edges = Vec::with_capacity(pairs.len());
        for &[a, b] in pairs {
            match lookup.get(&(a.min(b), a.max(b))) {
                Some(&i) => edges.push(i),
                None => return Err(Error::Tagging(format!("edge ({a}, {b}) of set `{name}` is not a boundary edge"))),
            }
        }
        if edges.is_empty() {
            return Err(Error::Tagging(format!("edge set `{name}` is empty")));
        }
        edges.sort_unstable();
        edges.dedup();
        let count = edges.len();
        let sel = Selection::Edges { edges, source: Vec::new() };
        if !self.check_name(name, &sel)? {
            self.selections.insert(name.to_string(), sel);
        }
        Ok(count)
    }

    /// Labels every element whose centroid lies in `region` as non-design.
    /// Returns the number of labeled elements.
    pub fn mark_nondesign(&mut self, region: &Region, kind: NonDesignKind) -> Result<usize> {
        if !region.is_valid() {
            return Err(Error::Region(format!("invalid region {region}")));
        }
        let label = match kind {
            NonDesignKind::Solid => ElementRegion::Solid,
            NonDesignKind::Void => ElementRegion::Void,
        };
        let mut count = 0;
        for e in 0..self.triangles.len() {
            if region.contains(self.centroid(e)) {
                self.regions[e] = label;
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::Region(format!("no element centroid in {region}")));
        }
        Ok(count)
    }

    /// Per-node pin: `Some(1.0)` for nodes of non-design solid elements,
    /// `Some(0.0)` for non-design void nodes, `None` for free design nodes.
    /// A node touching both kinds is pinned solid.
    pub fn node_pins(&self) -> Vec<Option<f64>> {
        let mut pins = vec![None; self.nodes.len()];
        for (e, tri) in self.triangles.iter().enumerate() {
            if self.regions[e] == ElementRegion::Void {
                for &v in tri {
                    pins[v] = Some(0.0);
                }
            }
        }
        for (e, tri) in self.triangles.iter().enumerate() {
            if self.regions[e] == ElementRegion::Solid {
                for &v in tri {
                    pins[v] = Some(1.0);
                }
            }
        }
        pins
    }

    /// Lumped (row-sum) mass of each node: one third of the adjacent element areas.
    pub fn lumped_mass(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.nodes.len()];
        for (e, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                m[v] += self.areas[e] / 3.0;
            }
        }
        m
    }

    /// Element average of a nodal field.
    pub fn element_average(&self, nodal: &[f64]) -> Vec<f64> {
        self.triangles
            .iter()
            .map(|t| (nodal[t[0]] + nodal[t[1]] + nodal[t[2]]) / 3.0)
            .collect()
    }

    /// Area-weighted average of element values onto the nodes.
    pub fn element_to_nodes(&self, element_values: &[f64]) -> Vec<f64> {
        let mut num = vec![0.0; self.nodes.len()];
        let mut den = vec![0.0; self.nodes.len()];
        for (e, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                num[v] += self.areas[e] * element_values[e];
                den[v] += self.areas[e];
            }
        }
        num.iter().zip(&den).map(|(n, d)| if *d > 0.0 { n / d } else { 0.0 }).collect()
    }

    /// Elements containing at least one of `nodes`.
    pub fn elements_touching(&self, nodes: &[usize]) -> Vec<usize> {
        let mut mark = vec![false; self.nodes.len()];
        for &n in nodes {
            if n < mark.len() {
                mark[n] = true;
            }
        }
        (0..self.triangles.len())
            .filter(|&e| self.triangles[e].iter().any(|&v| mark[v]))
            .collect()
    }
}

/// Structured `nx × ny` grid over `[0, width] × [0, height]`, each cell split
/// into two triangles with the diagonal direction alternating in a checkerboard
/// pattern.
fn check_predicates(regions: &[Region]) -> Result<()> {
    if regions.is_empty() {
        return Err(Error::Tagging("no predicate given".into()));
    }
    match regions.iter().find(|r| !r.is_valid()) {
        Some(r) => Err(Error::Tagging(format!("invalid predicate {r}"))),
        None => Ok(()),
    }
}

fn describe(regions: &[Region]) -> String {
    regions.iter().map(|r| format!("{r}")).collect::<Vec<_>>().join(" or ")
}

pub fn generate_rect_mesh(width: f64, height: f64, nx: usize, ny: usize) -> Result<Mesh> {
    generate_rect_mesh_at([0.0, 0.0], width, height, nx, ny)
}

pub fn generate_rect_mesh_at(origin: Point, width: f64, height: f64, nx: usize, ny: usize) -> Result<Mesh> {
    if !(width.is_finite() && width > 0.0 && height.is_finite() && height > 0.0) {
        return Err(Error::InvalidArgument(format!("domain size must be positive, got {width} x {height}")));
    }
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidArgument(format!("grid needs nx, ny >= 1, got {nx} x {ny}")));
    }
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([
                origin[0] + width * i as f64 / nx as f64,
                origin[1] + height * j as f64 / ny as f64,
            ]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if (i + j) % 2 == 0 {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }
    Mesh::from_parts(nodes, triangles)
}

/// Bucket grid for locating the triangle containing a point.
pub struct PointLocator<'m> {
    mesh: &'m Mesh,
    lo: Point,
    cell: [f64; 2],
    dims: [usize; 2],
    buckets: Vec<Vec<usize>>,
}

impl<'m> PointLocator<'m> {
    pub fn new(mesh: &'m Mesh) -> Self {
        let (lo, hi) = mesh.bounding_box();
        let side = libm::ceil(libm::sqrt(mesh.num_triangles() as f64 / 2.0)).max(1.0) as usize;
        let dims = [side, side];
        let cell = [
            ((hi[0] - lo[0]) / side as f64).max(f64::MIN_POSITIVE),
            ((hi[1] - lo[1]) / side as f64).max(f64::MIN_POSITIVE),
        ];
        let mut loc = PointLocator {
            mesh,
            lo,
            cell,
            dims,
            buckets: vec![Vec::new(); side * side],
        };
        for (e, tri) in mesh.triangles().iter().enumerate() {
            let mut bmin = [usize::MAX; 2];
            let mut bmax = [0usize; 2];
            for &v in tri {
                let b = loc.bucket_of(mesh.nodes()[v]);
                for d in 0..2 {
                    bmin[d] = bmin[d].min(b[d]);
                    bmax[d] = bmax[d].max(b[d]);
                }
            }
            for by in bmin[1]..=bmax[1] {
                for bx in bmin[0]..=bmax[0] {
                    loc.buckets[by * dims[0] + bx].push(e);
                }
            }
        }
        loc
    }

    fn bucket_of(&self, p: Point) -> [usize; 2] {
        let mut b = [0; 2];
        for d in 0..2 {
            let t = libm::floor((p[d] - self.lo[d]) / self.cell[d]);
            b[d] = if t < 0.0 { 0 } else { (t as usize).min(self.dims[d] - 1) };
        }
        b
    }

    /// The first element (lowest index) containing `p`, with barycentric coordinates.
    pub fn locate(&self, p: Point) -> Option<(usize, [f64; 3])> {
        let b = self.bucket_of(p);
        let tol = 1e-12;
        for &e in &self.buckets[b[1] * self.dims[0] + b[0]] {
            let [i, j, k] = self.mesh.triangles()[e];
            let nodes = self.mesh.nodes();
            let a2 = signed_area2(nodes[i], nodes[j], nodes[k]);
            let l0 = signed_area2(p, nodes[j], nodes[k]) / a2;
            let l1 = signed_area2(nodes[i], p, nodes[k]) / a2;
            let l2 = 1.0 - l0 - l1;
            if l0 >= -tol && l1 >= -tol && l2 >= -tol {
                return Some((e, [l0, l1, l2]));
            }
        }
        None
    }

    /// P1 interpolation of a nodal field at `p`.
    pub fn interpolate(&self, p: Point, nodal: &[f64]) -> Option<f64> {
        let (e, l) = self.locate(p)?;
        let t = self.mesh.triangles()[e];
        Some(l[0] * nodal[t[0]] + l[1] * nodal[t[1]] + l[2] * nodal[t[2]])
    }
}
