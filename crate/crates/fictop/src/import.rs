//! Plain-text mesh and structure files.
//!
//! Mesh format, `#` starts a comment:
//!
//! ```text
//! nodes N
//! x y            (N lines)
//! triangles M
//! a b c          (M lines, 0-based node indices)
//! edgeset NAME K
//! a b            (K lines, boundary edges)
//! ```
//!
//! Structure format: a first line `chi` or `phi`, then one value per node.

use std::fs;
use std::path::Path;

use fictop_core::levelset::{CharacteristicField, LevelSetField, LevelSetParams};
use fictop_core::mesh::Mesh;

#[derive(Debug, thiserror::Error)]
pub enum ImportError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error(transparent)]
    Core(#[from] fictop_core::Error),
}

struct Lines<'a> {
    inner: std::iter::Peekable<Box<dyn Iterator<Item = (usize, Vec<&'a str>)> + 'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let it: Box<dyn Iterator<Item = (usize, Vec<&'a str>)>> = Box::new(text.lines().enumerate().filter_map(|(i, l)| {
            let l = l.split('#').next().unwrap_or("");
            let toks: Vec<&str> = l.split_whitespace().collect();
            (!toks.is_empty()).then_some((i + 1, toks))
        }));
        Lines { inner: it.peekable() }
    }

    fn next(&mut self, what: &str) -> Result<(usize, Vec<&'a str>), ImportError> {
        self.inner.next().ok_or_else(|| ImportError::Syntax {
            line: 0,
            message: format!("unexpected end of file, expected {what}"),
        })
    }

    fn header(&mut self, keyword: &str) -> Result<(usize, usize), ImportError> {
        let (line, toks) = self.next(keyword)?;
        match toks.as_slice() {
            [k, n] if *k == keyword => Ok((line, parse(line, n)?)),
            _ => Err(ImportError::Syntax {
                line,
                message: format!("expected `{keyword} <count>`"),
            }),
        }
    }

    fn row<T: std::str::FromStr, const K: usize>(&mut self, what: &str) -> Result<[T; K], ImportError> {
        let (line, toks) = self.next(what)?;
        if toks.len() != K {
            return Err(ImportError::Syntax {
                line,
                message: format!("expected {K} values for {what}, got {}", toks.len()),
            });
        }
        let v: Vec<T> = toks.iter().map(|t| parse(line, t)).collect::<Result<_, _>>()?;
        Ok(v.try_into().unwrap_or_else(|_| unreachable!()))
    }
}

fn parse<T: std::str::FromStr>(line: usize, tok: &str) -> Result<T, ImportError> {
    tok.parse().map_err(|_| ImportError::Syntax {
        line,
        message: format!("cannot parse `{tok}`"),
    })
}

fn read(path: &Path) -> Result<String, ImportError> {
    fs::read_to_string(path).map_err(|source| ImportError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn parse_mesh(text: &str) -> Result<Mesh, ImportError> {
    let mut lines = Lines::new(text);
    let (_, n) = lines.header("nodes")?;
    let nodes = (0..n).map(|_| lines.row::<f64, 2>("a node")).collect::<Result<Vec<_>, _>>()?;
    let (_, m) = lines.header("triangles")?;
    let tris = (0..m).map(|_| lines.row::<usize, 3>("a triangle")).collect::<Result<Vec<_>, _>>()?;
    let mut mesh = Mesh::from_parts(nodes, tris)?;
    while lines.inner.peek().is_some() {
        let (line, toks) = lines.next("edgeset")?;
        let (name, k) = match toks.as_slice() {
            ["edgeset", name, k] => (name.to_string(), parse::<usize>(line, k)?),
            _ => {
                return Err(ImportError::Syntax {
                    line,
                    message: "expected `edgeset <name> <count>`".into(),
                })
            }
        };
        let pairs = (0..k).map(|_| lines.row::<usize, 2>("an edge")).collect::<Result<Vec<_>, _>>()?;
        mesh.add_edge_set(&name, &pairs)?;
    }
    Ok(mesh)
}

pub fn read_mesh(path: &Path) -> Result<Mesh, ImportError> {
    parse_mesh(&read(path)?)
}

/// Writes `mesh` in the import format, including its edge sets.
pub fn format_mesh(mesh: &Mesh) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    let _ = writeln!(s, "nodes {}", mesh.num_nodes());
    for p in mesh.nodes() {
        let _ = writeln!(s, "{} {}", p[0], p[1]);
    }
    let _ = writeln!(s, "triangles {}", mesh.num_triangles());
    for t in mesh.triangles() {
        let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
    }
    for name in mesh.selection_names() {
        let Some(edges) = mesh.edge_set(name) else { continue };
        if name == fictop_core::mesh::OUTER {
            continue;
        }
        let _ = writeln!(s, "edgeset {name} {}", edges.len());
        for &e in edges {
            let [a, b] = mesh.boundary_edges()[e];
            let _ = writeln!(s, "{a} {b}");
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub enum Structure {
    Chi(CharacteristicField),
    Phi(LevelSetField),
}

impl Structure {
    pub fn chi(&self, mesh: &Mesh) -> CharacteristicField {
        match self {
            Structure::Chi(c) => c.clone(),
            Structure::Phi(f) => f.chi(mesh),
        }
    }
}

pub fn parse_structure(text: &str, mesh: &Mesh, params: LevelSetParams) -> Result<Structure, ImportError> {
    let mut lines = Lines::new(text);
    let (line, toks) = lines.next("`chi` or `phi`")?;
    let kind = match toks.as_slice() {
        ["chi"] => "chi",
        ["phi"] => "phi",
        _ => {
            return Err(ImportError::Syntax {
                line,
                message: "first line must be `chi` or `phi`".into(),
            })
        }
    };
    let mut values = Vec::with_capacity(mesh.num_nodes());
    while lines.inner.peek().is_some() {
        let [v] = lines.row::<f64, 1>("a nodal value")?;
        values.push(v);
    }
    if values.len() != mesh.num_nodes() {
        return Err(ImportError::Syntax {
            line: 0,
            message: format!("{} values given, mesh has {} nodes", values.len(), mesh.num_nodes()),
        });
    }
    Ok(match kind {
        "chi" => Structure::Chi(CharacteristicField::new(values)?),
        _ => Structure::Phi(LevelSetField::new(values, params)?),
    })
}

pub fn read_structure(path: &Path, mesh: &Mesh, params: LevelSetParams) -> Result<Structure, ImportError> {
    parse_structure(&read(path)?, mesh, params)
}

pub fn format_chi(chi: &[f64]) -> String {
    let mut s = String::from("chi\n");
    for v in chi {
        s.push_str(&format!("{v}\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use fictop_core::geometry::Region;
    use fictop_core::mesh::generate_rect_mesh;

    #[test]
    fn mesh_round_trip() {
        let mut m = generate_rect_mesh(2.0, 1.0, 4, 2).unwrap();
        m.tag_boundary("left", &Region::rect(0.0, 0.0, 0.0, 1.0)).unwrap();
        let text = format_mesh(&m);
        let back = parse_mesh(&text).unwrap();
        assert_eq!(back.nodes(), m.nodes());
        assert_eq!(back.num_triangles(), m.num_triangles());
        assert_eq!(back.selection_nodes("left"), m.selection_nodes("left"));
    }

    #[test]
    fn syntax_errors_report_lines() {
        let e = parse_mesh("nodes 3\n0 0\n1 0\n0 x\n").unwrap_err();
        assert!(matches!(e, ImportError::Syntax { line: 4, .. }), "{e}");
        assert!(parse_mesh("triangles 1\n").is_err());
        let e = parse_mesh("nodes 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 2\nedgeset a 1\n0 4\n").unwrap_err();
        assert!(matches!(e, ImportError::Core(_)));
    }

    #[test]
    fn structure_kinds() {
        let m = generate_rect_mesh(1.0, 1.0, 1, 1).unwrap();
        let n = m.num_nodes();
        let chi = parse_structure(&format_chi(&vec![1.0; n]), &m, LevelSetParams::default()).unwrap();
        assert!(chi.chi(&m).iter().all(|&v| v == 1.0));
        let phi = format!("phi\n{}", "-1\n".repeat(n));
        let s = parse_structure(&phi, &m, LevelSetParams::default()).unwrap();
        assert!(s.chi(&m).iter().all(|&v| v == 0.0));
        assert!(parse_structure("rho\n1\n", &m, LevelSetParams::default()).is_err());
        assert!(parse_structure("chi\n1\n", &m, LevelSetParams::default()).is_err());
    }
}
