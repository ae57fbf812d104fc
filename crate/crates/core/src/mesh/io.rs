use std::io::{BufRead, Write};

use super::TriangleMesh;
use crate::error::{Error, Result};

/// Writes `V T E`, then one `x y` line per vertex and one `v0 v1 v2` line per
/// triangle. Edges are not stored; `E` lets a reader check its derivation.
pub fn write_mesh<W: Write>(mesh: &TriangleMesh, mut w: W) -> Result<()> {
    writeln!(w, "{} {} {}", mesh.n_vertices(), mesh.n_triangles(), mesh.n_edges())?;
    for p in mesh.vertices() {
        writeln!(w, "{:.16e} {:.16e}", p[0], p[1])?;
    }
    for t in mesh.triangles() {
        writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
    }
    Ok(())
}

pub fn read_mesh<R: BufRead>(r: R) -> Result<TriangleMesh> {
    let mut lines = r.lines().filter(|l| match l {
        Ok(s) => !s.trim().is_empty(),
        Err(_) => true,
    });
    let mut next = |what: &str| -> Result<String> {
        lines
            .next()
            .ok_or_else(|| Error::Parse(format!("unexpected end of input, expected {what}")))?
            .map_err(Error::from)
    };
    let header = next("header")?;
    let counts = parse_fields::<usize>(&header, 3, "header")?;
    let (nv, nt, ne) = (counts[0], counts[1], counts[2]);
    let mut vertices = Vec::with_capacity(nv);
    for i in 0..nv {
        let f = parse_fields::<f64>(&next("vertex")?, 2, &format!("vertex {i}"))?;
        vertices.push([f[0], f[1]]);
    }
    let mut triangles = Vec::with_capacity(nt);
    for i in 0..nt {
        let f = parse_fields::<usize>(&next("triangle")?, 3, &format!("triangle {i}"))?;
        triangles.push([f[0], f[1], f[2]]);
    }
    let mesh = TriangleMesh::new(vertices, triangles)?;
    if mesh.n_edges() != ne {
        return Err(Error::Parse(format!(
            "header declares {ne} edges but the triangles define {}",
            mesh.n_edges()
        )));
    }
    Ok(mesh)
}

fn parse_fields<T: std::str::FromStr>(line: &str, n: usize, what: &str) -> Result<Vec<T>> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != n {
        return Err(Error::Parse(format!(
            "{what}: expected {n} fields, found {}",
            fields.len()
        )));
    }
    fields
        .iter()
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| Error::Parse(format!("{what}: cannot parse '{s}'")))
        })
        .collect()
}
