//! The `emsh 1` line-oriented ASCII mesh format.
//!
//! ```text
//! emsh 1
//! # optional; only consulted when periodic sides exist
//! symmetry antiperiodic
//! nodes <n>
//! x y
//! triangles <m>
//! i j k region
//! edges <b>
//! i j tag
//! regions <r>
//! id role [params]
//! boundaries <s>
//! tag role
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{BoundaryEdge, BoundaryRole, Mesh, Phase, RegionRole, Symmetry, Triangle};
use crate::error::{Error, Result};

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    let text = std::fs::read_to_string(path)?;
    parse_emsh(&text)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    /// Next non-empty line with comments stripped, split into tokens.
    fn next_tokens(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (i, raw) in self.inner.by_ref() {
            self.last = i + 1;
            let line = raw.split('#').next().unwrap_or("");
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if !tokens.is_empty() {
                return Some((i + 1, tokens));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        self.next_tokens().ok_or_else(|| Error::Parse {
            line: self.last + 1,
            msg: format!("unexpected end of file, expected {what}"),
        })
    }
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn num<T: std::str::FromStr>(line: usize, tok: &str) -> Result<T> {
    tok.parse().map_err(|_| perr(line, format!("cannot parse '{tok}'")))
}

fn header(lines: &mut Lines<'_>, keyword: &str) -> Result<usize> {
    let (line, toks) = lines.expect(keyword)?;
    if toks.len() != 2 || toks[0] != keyword {
        return Err(perr(line, format!("expected '{keyword} <count>'")));
    }
    num(line, toks[1])
}

fn fields<'a>(lines: &mut Lines<'a>, what: &str, count: usize) -> Result<(usize, Vec<&'a str>)> {
    let (line, toks) = lines.expect(what)?;
    if toks.len() != count {
        return Err(perr(line, format!("expected {count} fields for {what}, found {}", toks.len())));
    }
    Ok((line, toks))
}

fn parse_region_role(line: usize, toks: &[&str]) -> Result<RegionRole> {
    let simple = |role| {
        if toks.len() != 1 {
            return Err(perr(line, format!("role '{}' takes no parameters", toks[0])));
        }
        Ok(role)
    };
    match toks[0] {
        "iron_rotor" => simple(RegionRole::IronRotor),
        "iron_stator" => simple(RegionRole::IronStator),
        "air_rotor" => simple(RegionRole::AirRotor),
        "air_stator" => simple(RegionRole::AirStator),
        "airgap_rotor" => simple(RegionRole::AirgapRotor),
        "airgap_stator" => simple(RegionRole::AirgapStator),
        "magnet" => {
            if toks.len() != 2 {
                return Err(perr(line, "magnet role expects 'magnet <k>'"));
            }
            Ok(RegionRole::Magnet(num(line, toks[1])?))
        }
        "coil" => {
            if toks.len() != 4 {
                return Err(perr(line, "coil role expects 'coil <k> <phase> <+1|-1>'"));
            }
            let phase = match toks[2] {
                "A" => Phase::A,
                "B" => Phase::B,
                "C" => Phase::C,
                other => return Err(perr(line, format!("unknown phase '{other}'"))),
            };
            let polarity = match toks[3] {
                "+1" | "1" => 1,
                "-1" => -1,
                other => return Err(perr(line, format!("polarity must be +1 or -1, found '{other}'"))),
            };
            Ok(RegionRole::Coil { index: num(line, toks[1])?, phase, polarity })
        }
        other => Err(perr(line, format!("unknown region role '{other}'"))),
    }
}

fn parse_boundary_role(line: usize, tok: &str) -> Result<BoundaryRole> {
    Ok(match tok {
        "outer" => BoundaryRole::Outer,
        "shaft" => BoundaryRole::Shaft,
        "periodic_a" => BoundaryRole::PeriodicA,
        "periodic_b" => BoundaryRole::PeriodicB,
        "interface_rotor" => BoundaryRole::InterfaceRotor,
        "interface_stator" => BoundaryRole::InterfaceStator,
        other => return Err(perr(line, format!("unknown boundary role '{other}'"))),
    })
}

pub fn parse_emsh(text: &str) -> Result<Mesh> {
    let mut lines = Lines { inner: text.lines().enumerate(), last: 0 };
    let (line, toks) = lines.expect("'emsh 1'")?;
    if toks != ["emsh", "1"] {
        return Err(perr(line, "first line must be 'emsh 1'"));
    }

    let mut antiperiodic = None;
    let (line, toks) = lines.expect("'nodes <n>'")?;
    let n_nodes = if toks[0] == "symmetry" {
        antiperiodic = Some(match toks.get(1).copied() {
            Some("antiperiodic") if toks.len() == 2 => true,
            Some("periodic") if toks.len() == 2 => false,
            _ => return Err(perr(line, "expected 'symmetry periodic' or 'symmetry antiperiodic'")),
        });
        header(&mut lines, "nodes")?
    } else {
        if toks.len() != 2 || toks[0] != "nodes" {
            return Err(perr(line, "expected 'nodes <count>'"));
        }
        num(line, toks[1])?
    };

    let mut nodes = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let (line, t) = fields(&mut lines, "node", 2)?;
        let x: f64 = num(line, t[0])?;
        let y: f64 = num(line, t[1])?;
        if !x.is_finite() || !y.is_finite() {
            return Err(perr(line, "non-finite coordinate"));
        }
        nodes.push([x, y]);
    }

    let n_tri = header(&mut lines, "triangles")?;
    let mut triangles = Vec::with_capacity(n_tri);
    for _ in 0..n_tri {
        let (line, t) = fields(&mut lines, "triangle", 4)?;
        triangles
            .push(Triangle { nodes: [num(line, t[0])?, num(line, t[1])?, num(line, t[2])?], region: num(line, t[3])? });
    }

    let n_edges = header(&mut lines, "edges")?;
    let mut edges = Vec::with_capacity(n_edges);
    for _ in 0..n_edges {
        let (line, t) = fields(&mut lines, "edge", 3)?;
        edges.push(BoundaryEdge { nodes: [num(line, t[0])?, num(line, t[1])?], tag: num(line, t[2])? });
    }

    let n_regions = header(&mut lines, "regions")?;
    let mut regions = BTreeMap::new();
    for _ in 0..n_regions {
        let (line, t) = lines.expect("region")?;
        if t.len() < 2 {
            return Err(perr(line, "expected 'id role [params]'"));
        }
        let id: u32 = num(line, t[0])?;
        let role = parse_region_role(line, &t[1..])?;
        if regions.insert(id, role).is_some() {
            return Err(perr(line, format!("duplicate region id {id}")));
        }
    }

    let n_bnd = header(&mut lines, "boundaries")?;
    let mut boundaries = BTreeMap::new();
    for _ in 0..n_bnd {
        let (line, t) = fields(&mut lines, "boundary", 2)?;
        let tag: u32 = num(line, t[0])?;
        if boundaries.insert(tag, parse_boundary_role(line, t[1])?).is_some() {
            return Err(perr(line, format!("duplicate boundary tag {tag}")));
        }
    }

    if let Some((line, _)) = lines.next_tokens() {
        return Err(perr(line, "trailing content after boundaries section"));
    }

    Mesh::new(nodes, triangles, edges, regions, boundaries, antiperiodic)
}

fn region_role_text(role: RegionRole) -> String {
    match role {
        RegionRole::IronRotor => "iron_rotor".into(),
        RegionRole::IronStator => "iron_stator".into(),
        RegionRole::AirRotor => "air_rotor".into(),
        RegionRole::AirStator => "air_stator".into(),
        RegionRole::AirgapRotor => "airgap_rotor".into(),
        RegionRole::AirgapStator => "airgap_stator".into(),
        RegionRole::Magnet(k) => format!("magnet {k}"),
        RegionRole::Coil { index, phase, polarity } => {
            format!("coil {index} {phase} {}", if polarity > 0 { "+1" } else { "-1" })
        }
    }
}

fn boundary_role_text(role: BoundaryRole) -> &'static str {
    match role {
        BoundaryRole::Outer => "outer",
        BoundaryRole::Shaft => "shaft",
        BoundaryRole::PeriodicA => "periodic_a",
        BoundaryRole::PeriodicB => "periodic_b",
        BoundaryRole::InterfaceRotor => "interface_rotor",
        BoundaryRole::InterfaceStator => "interface_stator",
    }
}

/// Serializes a mesh; coordinates use shortest round-trip formatting so a
/// write/read cycle is lossless.
pub fn write_emsh(mesh: &Mesh) -> String {
    let mut out = String::from("emsh 1\n");
    if let Symmetry::Sector { antiperiodic, .. } = mesh.symmetry() {
        let kind = if antiperiodic { "antiperiodic" } else { "periodic" };
        let _ = writeln!(out, "symmetry {kind}");
    }
    let _ = writeln!(out, "nodes {}", mesh.node_count());
    for [x, y] in mesh.nodes() {
        let _ = writeln!(out, "{x:?} {y:?}");
    }
    let _ = writeln!(out, "triangles {}", mesh.triangles().len());
    for t in mesh.triangles() {
        let [a, b, c] = t.nodes;
        let _ = writeln!(out, "{a} {b} {c} {}", t.region);
    }
    let _ = writeln!(out, "edges {}", mesh.edges().len());
    for e in mesh.edges() {
        let _ = writeln!(out, "{} {} {}", e.nodes[0], e.nodes[1], e.tag);
    }
    let _ = writeln!(out, "regions {}", mesh.regions().len());
    for (id, role) in mesh.regions() {
        let _ = writeln!(out, "{id} {}", region_role_text(*role));
    }
    let _ = writeln!(out, "boundaries {}", mesh.boundaries().len());
    for (tag, role) in mesh.boundaries() {
        let _ = writeln!(out, "{tag} {}", boundary_role_text(*role));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALLEST: &str =
        "emsh 1\nnodes 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 2 1\nedges 0\nregions 1\n1 iron_rotor\nboundaries 0\n";

    #[test]
    fn smallest_valid_mesh() {
        let m = parse_emsh(SMALLEST).unwrap();
        assert_eq!(m.triangles().len(), 1);
        assert!(m.signed_area(0) > 0.0);
    }

    #[test]
    fn clockwise_listing_gives_same_mesh() {
        let cw = SMALLEST.replace("0 1 2 1", "0 2 1 1");
        let a = parse_emsh(SMALLEST).unwrap();
        let b = parse_emsh(&cw).unwrap();
        assert!(b.signed_area(0) > 0.0);
        assert!((a.signed_area(0) - b.signed_area(0)).abs() == 0.0);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# header\nemsh 1\n\nnodes 3 # three\n0 0\n1 0\n0 1\ntriangles 1\n0 1 2 1\nedges 0\nregions 1\n1 iron_rotor\nboundaries 0\n";
        assert!(parse_emsh(text).is_ok());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = SMALLEST.replace("1 0\n", "1 zero\n");
        match parse_emsh(&bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_roles_are_rejected() {
        let bad = SMALLEST.replace("iron_rotor", "copper");
        assert!(matches!(parse_emsh(&bad), Err(Error::Parse { line: 10, .. })));
        let bad = SMALLEST.replace("boundaries 0\n", "boundaries 1\n4 sliding\n");
        assert!(matches!(parse_emsh(&bad), Err(Error::Parse { .. })));
    }

    #[test]
    fn undeclared_region_is_a_validation_error() {
        let bad = SMALLEST.replace("0 1 2 1", "0 1 2 7");
        assert!(matches!(parse_emsh(&bad), Err(Error::Validation(_))));
    }

    #[test]
    fn interface_count_mismatch_is_reported() {
        // Rotor ring of 12 vertices at r = 1, stator ring of 16 at r = 1
        // (full circles), no triangles needed for the ring check.
        let mut text = String::from("emsh 1\n");
        let ring = |n: usize| -> Vec<String> {
            (0..n)
                .map(|i| {
                    let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                    format!("{:?} {:?}", a.cos(), a.sin())
                })
                .collect()
        };
        let mut nodes = ring(12);
        nodes.extend(ring(16));
        text += &format!("nodes {}\n{}\n", nodes.len(), nodes.join("\n"));
        text += "triangles 0\n";
        let mut edges = vec![];
        for i in 0..12 {
            edges.push(format!("{} {} 1", i, (i + 1) % 12));
        }
        for i in 0..16 {
            edges.push(format!("{} {} 2", 12 + i, 12 + (i + 1) % 16));
        }
        text += &format!("edges {}\n{}\n", edges.len(), edges.join("\n"));
        text += "regions 0\nboundaries 2\n1 interface_rotor\n2 interface_stator\n";
        match parse_emsh(&text) {
            Err(Error::Validation(msg)) => assert!(msg.contains("interface vertex counts differ"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
