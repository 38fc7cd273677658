//! Plain-text mesh dump.
//!
//! ```text
//! <dim>
//! <n_vertices>
//! <x> <y> [<z>]            one line per vertex
//! <n_cells>
//! <v0> <v1> <v2> [<v3>]    one line per cell
//! <n_boundary_facets>
//! <v0> <v1> [<v2>] <kind> <region>
//! ```
//!
//! `kind` is `dirichlet` or `neumann`. Coordinates use 17 significant digits.

use std::io::{BufRead, Write};

use super::{FacetKind, FacetTag, Mesh};
use crate::error::{Error, Result};

impl Mesh {
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let d = self.dim;
        writeln!(out, "{d}")?;
        writeln!(out, "{}", self.n_vertices())?;
        for p in &self.points {
            let coords: Vec<String> = p[..d].iter().map(|x| format!("{x:.16e}")).collect();
            writeln!(out, "{}", coords.join(" "))?;
        }
        writeln!(out, "{}", self.n_cells())?;
        for c in 0..self.n_cells() {
            let verts: Vec<String> = self.cell(c).iter().map(usize::to_string).collect();
            writeln!(out, "{}", verts.join(" "))?;
        }
        writeln!(out, "{}", self.boundary_facets().count())?;
        for f in self.boundary_facets() {
            let tag = self.facet_tag(f);
            let kind = match tag.kind {
                FacetKind::Dirichlet => "dirichlet",
                FacetKind::Neumann => "neumann",
                FacetKind::Interior => unreachable!("boundary facet tagged interior"),
            };
            let verts: Vec<String> = self.facet(f).iter().map(usize::to_string).collect();
            writeln!(out, "{} {kind} {}", verts.join(" "), tag.region)?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Mesh> {
        let bad = |msg: &str| Error::InvalidParameter(format!("mesh text: {msg}"));
        let mut lines = input.lines().map_while(std::result::Result::ok);
        let mut next = || lines.next().ok_or_else(|| bad("unexpected end of input"));
        let parse_usize = |s: &str| s.trim().parse::<usize>().map_err(|_| bad(s));

        let dim = parse_usize(&next()?)?;
        let nv = parse_usize(&next()?)?;
        let mut points = Vec::with_capacity(nv);
        for _ in 0..nv {
            let line = next()?;
            let mut p = [0.0; 3];
            for (k, tok) in line.split_whitespace().enumerate().take(3) {
                p[k] = tok.parse().map_err(|_| bad(tok))?;
            }
            points.push(p);
        }
        let nc = parse_usize(&next()?)?;
        let mut cells = Vec::with_capacity(nc * (dim + 1));
        for _ in 0..nc {
            for tok in next()?.split_whitespace() {
                cells.push(parse_usize(tok)?);
            }
        }
        let nb = parse_usize(&next()?)?;
        let mut tags = std::collections::HashMap::with_capacity(nb);
        for _ in 0..nb {
            let line = next()?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != dim + 2 {
                return Err(bad(&line));
            }
            let mut key: Vec<usize> = toks[..dim].iter().map(|t| parse_usize(t)).collect::<Result<_>>()?;
            key.sort_unstable();
            let region = toks[dim + 1].parse::<u32>().map_err(|_| bad(&line))?;
            let tag = match toks[dim] {
                "dirichlet" => FacetTag::dirichlet(region),
                "neumann" => FacetTag::neumann(region),
                other => return Err(bad(other)),
            };
            tags.insert(key, tag);
        }
        let mut missing = false;
        let mesh = Mesh::from_cells(dim, points, cells, 0.0, |facet, _| {
            tags.get(facet).copied().unwrap_or_else(|| {
                missing = true;
                FacetTag::dirichlet(0)
            })
        })?;
        if missing {
            return Err(bad("boundary facet without tag line"));
        }
        let h = mesh.h();
        Ok(Mesh { nominal_h: h, ..mesh })
    }
}
