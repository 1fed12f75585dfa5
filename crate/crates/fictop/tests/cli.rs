use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bench(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("benchmarks").join(format!("{name}.toml"))
}

fn fictop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fictop")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Minimal strict reader for legacy ASCII unstructured grids: checks section
/// order, counts and that every numeric token parses.
fn check_vtk(path: &Path) -> (usize, usize, Vec<String>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# vtk DataFile Version 3.0"));
    assert!(lines.next().is_some_and(|t| !t.is_empty()));
    assert_eq!(lines.next(), Some("ASCII"));
    assert_eq!(lines.next(), Some("DATASET UNSTRUCTURED_GRID"));
    let header = |l: Option<&str>, key: &str| -> Vec<String> {
        let l = l.unwrap_or_else(|| panic!("missing {key}"));
        let t: Vec<String> = l.split_whitespace().map(String::from).collect();
        assert_eq!(t[0], key, "{l}");
        t
    };
    let nums = |l: &str, k: usize| {
        let v: Vec<f64> = l.split_whitespace().map(|t| t.parse::<f64>().unwrap()).collect();
        assert_eq!(v.len(), k, "{l}");
        v
    };
    let p = header(lines.next(), "POINTS");
    let n: usize = p[1].parse().unwrap();
    for _ in 0..n {
        nums(lines.next().unwrap(), 3);
    }
    let c = header(lines.next(), "CELLS");
    let m: usize = c[1].parse().unwrap();
    assert_eq!(c[2].parse::<usize>().unwrap(), 4 * m);
    for _ in 0..m {
        let v = nums(lines.next().unwrap(), 4);
        assert_eq!(v[0], 3.0);
        assert!(v[1..].iter().all(|&i| (i as usize) < n));
    }
    header(lines.next(), "CELL_TYPES");
    for _ in 0..m {
        assert_eq!(lines.next(), Some("5"));
    }
    let mut arrays = Vec::new();
    let mut count = 0;
    while let Some(l) = lines.next() {
        let t: Vec<&str> = l.split_whitespace().collect();
        match t[0] {
            "POINT_DATA" => count = n,
            "CELL_DATA" => count = m,
            "SCALARS" => {
                assert_eq!(lines.next(), Some("LOOKUP_TABLE default"));
                for _ in 0..count {
                    assert!(nums(lines.next().unwrap(), 1)[0].is_finite());
                }
                arrays.push(t[1].to_string());
            }
            "VECTORS" => {
                for _ in 0..count {
                    nums(lines.next().unwrap(), 3);
                }
                arrays.push(t[1].to_string());
            }
            _ => panic!("unexpected line `{l}`"),
        }
    }
    (n, m, arrays)
}

#[test]
fn broken_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[domain]\nwidth = 1.0\nheight = \n").unwrap();
    let out = fictop(&["optimize", s(&cfg), "--output-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
    let out = fictop(&["optimize", s(&dir.path().join("absent.toml"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn max_iters_limits_history_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = fictop(&["optimize", s(&bench("minimal")), "--output-dir", s(dir.path()), "--max-iters", "5", "--vtk-every", "2", "-q"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let hist = fs::read_to_string(dir.path().join("history.csv")).unwrap();
    let rows: Vec<&str> = hist.lines().collect();
    assert_eq!(rows[0], "iter,volume_fraction,Ju,Js,Jp,J_combined,lambda,mu");
    assert_eq!(rows.len(), 6);
    for (i, r) in rows[1..].iter().enumerate() {
        assert!(r.starts_with(&format!("{i},")));
    }
    for k in [0, 2, 4] {
        let (_, _, arrays) = check_vtk(&dir.path().join(format!("fields_{k:04}.vtk")));
        for a in ["phi", "chi", "u_magnitude", "s", "p", "sensitivity"] {
            assert!(arrays.iter().any(|x| x == a), "{a} missing from {arrays:?}");
        }
    }
    assert!(!dir.path().join("fields_0001.vtk").exists());
    check_vtk(&dir.path().join("final_design.vtk"));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("iterations=5") && stdout.contains("volume="), "{stdout}");
}

#[test]
fn history_is_identical_across_runs_and_thread_counts() {
    let mut streams = Vec::new();
    for threads in ["1", "3", "1"] {
        let dir = tempfile::tempdir().unwrap();
        let out = Command::new(env!("CARGO_BIN_EXE_fictop"))
            .args(["optimize", s(&bench("cantilever_circles")), "--output-dir", s(dir.path()), "--max-iters", "4", "-q"])
            .env("FICTOP_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        streams.push(fs::read(dir.path().join("history.csv")).unwrap());
    }
    assert_eq!(streams[0], streams[1]);
    assert_eq!(streams[0], streams[2]);
}

#[test]
fn bad_thread_count_is_rejected() {
    let out = Command::new(env!("CARGO_BIN_EXE_fictop"))
        .args(["optimize", s(&bench("minimal")), "--max-iters", "0"])
        .env("FICTOP_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

const WALLS: &str = r#"
[domain]
width = 1.0
height = 1.0
nx = 40
ny = 40

[material]
E = 1.0
nu = 0.3

[load]
supports = [{ boundary = "bottom" }]
tractions = [{ boundary = "top", vector = [0.0, -1.0] }]

[[boundaries]]
name = "bottom"
edges = [0.0, 1.0, 0.0, 0.0]

[[boundaries]]
name = "top"
edges = [0.0, 1.0, 1.0, 1.0]

[[boundaries]]
name = "left"
edges = [0.0, 0.0, 0.0, 1.0]

[[boundaries]]
name = "right"
edges = [1.0, 1.0, 0.0, 1.0]

[shielding]
out = "left"
in = "right"
kappa_void = 1000.0

[penetrating]
out = "left"
in = "right"
kappa_void = 1000.0

[volume]
vmax = 0.5
"#;

fn evaluate(cfg: &Path, field: &str, structure: &Path, dir: &Path) -> (Output, f64) {
    let out = fictop(&["evaluate", s(cfg), "--field", field, "--structure", s(structure), "--output-dir", s(dir)]);
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    let j = text
        .split_whitespace()
        .find_map(|t| t.strip_prefix("Js=").or_else(|| t.strip_prefix("Jp=")))
        .map_or(f64::NAN, |v| v.parse().unwrap());
    (out, j)
}

#[test]
fn evaluate_contrasts_shielded_and_penetrated_walls() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("walls.toml");
    fs::write(&cfg, WALLS).unwrap();
    let mut j = std::collections::HashMap::new();
    for kind in ["shielded", "penetrated"] {
        let st = dir.path().join(format!("{kind}.chi"));
        let out = fictop(&["structure", s(&cfg), "--kind", kind, "--output", s(&st)]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        for field in ["s", "p"] {
            let od = dir.path().join(format!("{kind}_{field}"));
            let (out, v) = evaluate(&cfg, field, &st, &od);
            assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
            let (_, _, arrays) = check_vtk(&od.join(format!("field_{field}.vtk")));
            assert!(arrays.contains(&"density".to_string()));
            assert!(od.join(format!("profile_{field}_1-1.csv")).exists());
            j.insert((kind, field), v);
        }
    }
    assert!(j[&("penetrated", "s")] > 10.0 * j[&("shielded", "s")], "{j:?}");
    assert!(j[&("shielded", "p")] > 10.0 * j[&("penetrated", "p")], "{j:?}");
}

#[test]
fn evaluate_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("walls.toml");
    fs::write(&cfg, WALLS).unwrap();
    let void = dir.path().join("void.chi");
    fs::write(&void, format!("chi\n{}", "0\n".repeat(41 * 41))).unwrap();
    let (out, jp) = evaluate(&cfg, "p", &void, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(jp, 0.0);
    let (out, _) = evaluate(&cfg, "heat", &void, dir.path());
    assert_eq!(out.status.code(), Some(1));
    let (out, _) = evaluate(&cfg, "s", &dir.path().join("none.chi"), dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("none.chi"));
    for field in ["T-dirichlet", "T-neumann"] {
        let (out, _) = evaluate(&cfg, field, &void, dir.path());
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
