//! Simplicial meshes with globally oriented facets and boundary tags.
//!
//! Local facet `i` of a cell is the facet opposite local vertex `i`. Every
//! facet carries one global unit normal `n_e`: the outward normal of its
//! lowest-indexed adjacent cell. A cell sees facet `e` with outward normal
//! `sign(T, e) * n_e`, where the sign is exactly `+1` or `-1`.

mod generators;
mod io;

use std::collections::HashMap;

pub use generators::{
    cook_logical, cook_membrane, lshape, refine_red, unit_cube, unit_square, COOK_CLAMPED,
    COOK_FREE, COOK_LOAD,
};

use crate::error::{Error, Result};
use crate::geometry::{cross, dot, norm, scale, sub, Point, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FacetKind {
    Interior,
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FacetTag {
    pub kind: FacetKind,
    /// Application-defined boundary region; zero for interior facets.
    pub region: u32,
}

impl FacetTag {
    pub const INTERIOR: FacetTag = FacetTag {
        kind: FacetKind::Interior,
        region: 0,
    };

    pub fn dirichlet(region: u32) -> Self {
        FacetTag {
            kind: FacetKind::Dirichlet,
            region,
        }
    }

    pub fn neumann(region: u32) -> Self {
        FacetTag {
            kind: FacetKind::Neumann,
            region,
        }
    }
}

const NO_CELL: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    points: Vec<Point>,
    cells: Vec<usize>,
    cell_facets: Vec<usize>,
    cell_facet_signs: Vec<f64>,
    cell_volumes: Vec<f64>,
    cell_diameters: Vec<f64>,
    facets: Vec<usize>,
    facet_cells: Vec<[usize; 2]>,
    facet_tags: Vec<FacetTag>,
    facet_normals: Vec<Vector>,
    facet_areas: Vec<f64>,
    nominal_h: f64,
}

impl Mesh {
    /// Builds the facet structure and geometric caches from raw cells.
    ///
    /// `cells` is flat with stride `dim + 1`; negatively oriented cells are
    /// reordered. `tag_boundary` is called once per boundary facet with its
    /// (sorted) vertex indices.
    pub fn from_cells(
        dim: usize,
        points: Vec<Point>,
        mut cells: Vec<usize>,
        nominal_h: f64,
        mut tag_boundary: impl FnMut(&[usize], &[Point]) -> FacetTag,
    ) -> Result<Mesh> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidParameter(format!("dimension {dim} not in {{2, 3}}")));
        }
        let nv = dim + 1;
        if cells.is_empty() || cells.len() % nv != 0 {
            return Err(Error::InvalidParameter(format!(
                "cell array of length {} is not a nonempty multiple of {nv}",
                cells.len()
            )));
        }
        if let Some(&bad) = cells.iter().find(|&&v| v >= points.len()) {
            return Err(Error::InvalidParameter(format!("vertex index {bad} out of range")));
        }
        let n_cells = cells.len() / nv;

        let mut cell_volumes = Vec::with_capacity(n_cells);
        let mut cell_diameters = Vec::with_capacity(n_cells);
        for c in 0..n_cells {
            let cell = &mut cells[c * nv..(c + 1) * nv];
            let mut vol = signed_volume(dim, &points, cell);
            if vol < 0.0 {
                cell.swap(0, 1);
                vol = -vol;
            }
            if vol <= 0.0 {
                return Err(Error::InvalidParameter(format!("cell {c} is degenerate")));
            }
            cell_volumes.push(vol);
            let mut diam: f64 = 0.0;
            for i in 0..nv {
                for j in i + 1..nv {
                    diam = diam.max(norm(&sub(&points[cell[i]], &points[cell[j]])));
                }
            }
            cell_diameters.push(diam);
        }

        let mut lookup: HashMap<[usize; 3], usize> = HashMap::with_capacity(n_cells * nv);
        let mut facets = Vec::new();
        let mut facet_cells: Vec<[usize; 2]> = Vec::new();
        let mut cell_facets = Vec::with_capacity(n_cells * nv);
        for c in 0..n_cells {
            let cell = &cells[c * nv..(c + 1) * nv];
            for i in 0..nv {
                let mut key = [usize::MAX; 3];
                let mut k = 0;
                for (j, &v) in cell.iter().enumerate() {
                    if j != i {
                        key[k] = v;
                        k += 1;
                    }
                }
                key[..dim].sort_unstable();
                let f = *lookup.entry(key).or_insert_with(|| {
                    facets.extend_from_slice(&key[..dim]);
                    facet_cells.push([c, NO_CELL]);
                    facet_cells.len() - 1
                });
                if facet_cells[f][0] != c {
                    if facet_cells[f][1] != NO_CELL {
                        return Err(Error::InvalidParameter(format!(
                            "facet {:?} shared by more than two cells",
                            &key[..dim]
                        )));
                    }
                    facet_cells[f][1] = c;
                }
                cell_facets.push(f);
            }
        }
        let n_facets = facet_cells.len();

        let mut facet_normals = vec![[0.0; 3]; n_facets];
        let mut facet_areas = vec![0.0; n_facets];
        let mut cell_facet_signs = vec![0.0; n_cells * nv];
        for c in 0..n_cells {
            let cell = &cells[c * nv..(c + 1) * nv];
            for i in 0..nv {
                let f = cell_facets[c * nv + i];
                let (normal, area) = outward_normal(dim, &points, cell, i);
                if facet_cells[f][0] == c {
                    facet_normals[f] = normal;
                    facet_areas[f] = area;
                    cell_facet_signs[c * nv + i] = 1.0;
                } else {
                    let s = dot(&normal, &facet_normals[f]);
                    cell_facet_signs[c * nv + i] = if s >= 0.0 { 1.0 } else { -1.0 };
                }
            }
        }

        let mut facet_tags = Vec::with_capacity(n_facets);
        for f in 0..n_facets {
            if facet_cells[f][1] == NO_CELL {
                let tag = tag_boundary(&facets[f * dim..(f + 1) * dim], &points);
                if tag.kind == FacetKind::Interior {
                    return Err(Error::InvalidParameter(format!(
                        "boundary facet {f} tagged interior"
                    )));
                }
                facet_tags.push(tag);
            } else {
                facet_tags.push(FacetTag::INTERIOR);
            }
        }

        Ok(Mesh {
            dim,
            points,
            cells,
            cell_facets,
            cell_facet_signs,
            cell_volumes,
            cell_diameters,
            facets,
            facet_cells,
            facet_tags,
            facet_normals,
            facet_areas,
            nominal_h,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_vertices(&self) -> usize {
        self.points.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cell_volumes.len()
    }

    pub fn n_facets(&self) -> usize {
        self.facet_cells.len()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, v: usize) -> &Point {
        &self.points[v]
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let nv = self.dim + 1;
        &self.cells[c * nv..(c + 1) * nv]
    }

    /// Global facet indices of a cell, local facet `i` opposite local vertex `i`.
    pub fn cell_facets(&self, c: usize) -> &[usize] {
        let nv = self.dim + 1;
        &self.cell_facets[c * nv..(c + 1) * nv]
    }

    /// `n_T · n_e` for local facet `local` of cell `c`; exactly ±1.
    pub fn cell_facet_sign(&self, c: usize, local: usize) -> f64 {
        self.cell_facet_signs[c * (self.dim + 1) + local]
    }

    pub fn outward_normal(&self, c: usize, local: usize) -> Vector {
        let f = self.cell_facets(c)[local];
        scale(&self.facet_normals[f], self.cell_facet_sign(c, local))
    }

    pub fn cell_volume(&self, c: usize) -> f64 {
        self.cell_volumes[c]
    }

    /// Longest edge of the cell.
    pub fn cell_diameter(&self, c: usize) -> f64 {
        self.cell_diameters[c]
    }

    pub fn facet(&self, f: usize) -> &[usize] {
        &self.facets[f * self.dim..(f + 1) * self.dim]
    }

    pub fn facet_cells(&self, f: usize) -> (usize, Option<usize>) {
        let [a, b] = self.facet_cells[f];
        (a, (b != NO_CELL).then_some(b))
    }

    pub fn is_boundary(&self, f: usize) -> bool {
        self.facet_cells[f][1] == NO_CELL
    }

    pub fn facet_tag(&self, f: usize) -> FacetTag {
        self.facet_tags[f]
    }

    pub fn facet_normal(&self, f: usize) -> &Vector {
        &self.facet_normals[f]
    }

    pub fn facet_area(&self, f: usize) -> f64 {
        self.facet_areas[f]
    }

    /// Maximum cell diameter.
    pub fn h(&self) -> f64 {
        self.cell_diameters.iter().copied().fold(0.0, f64::max)
    }

    /// Mesh size parameter of the generator (grid spacing).
    pub fn nominal_h(&self) -> f64 {
        self.nominal_h
    }

    pub fn boundary_facets(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_facets()).filter(|&f| self.is_boundary(f))
    }

    pub fn facet_centroid(&self, f: usize) -> Point {
        let verts = self.facet(f);
        let mut c = [0.0; 3];
        for &v in verts {
            for k in 0..3 {
                c[k] += self.points[v][k];
            }
        }
        scale(&c, 1.0 / verts.len() as f64)
    }

    pub fn cell_centroid(&self, c: usize) -> Point {
        let mut bary = [0.0; 4];
        bary[..=self.dim].fill(1.0 / (self.dim + 1) as f64);
        self.cell_point(c, &bary)
    }

    /// Physical point of a cell from barycentric coordinates.
    pub fn cell_point(&self, c: usize, bary: &[f64; 4]) -> Point {
        let mut x = [0.0; 3];
        for (&v, &l) in self.cell(c).iter().zip(bary) {
            for k in 0..3 {
                x[k] += l * self.points[v][k];
            }
        }
        x
    }

    /// Physical point of a facet from barycentric coordinates over its vertices.
    pub fn facet_point(&self, f: usize, bary: &[f64; 4]) -> Point {
        let mut x = [0.0; 3];
        for (&v, &l) in self.facet(f).iter().zip(bary) {
            for k in 0..3 {
                x[k] += l * self.points[v][k];
            }
        }
        x
    }

    /// Copy of the mesh with the assigned normal of facet `f` reversed.
    pub fn with_flipped_normal(&self, f: usize) -> Mesh {
        let mut m = self.clone();
        m.facet_normals[f] = scale(&m.facet_normals[f], -1.0);
        let nv = m.dim + 1;
        for c in m.facet_cells[f] {
            if c == NO_CELL {
                continue;
            }
            for i in 0..nv {
                if m.cell_facets[c * nv + i] == f {
                    m.cell_facet_signs[c * nv + i] *= -1.0;
                }
            }
        }
        m
    }
}

fn signed_volume(dim: usize, points: &[Point], cell: &[usize]) -> f64 {
    let p0 = points[cell[0]];
    let e1 = sub(&points[cell[1]], &p0);
    let e2 = sub(&points[cell[2]], &p0);
    if dim == 2 {
        0.5 * (e1[0] * e2[1] - e1[1] * e2[0])
    } else {
        let e3 = sub(&points[cell[3]], &p0);
        dot(&cross(&e1, &e2), &e3) / 6.0
    }
}

/// Outward unit normal and measure of the facet opposite local vertex `opposite`.
fn outward_normal(dim: usize, points: &[Point], cell: &[usize], opposite: usize) -> (Vector, f64) {
    let verts: Vec<usize> = cell
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != opposite)
        .map(|(_, &v)| v)
        .collect();
    let a = points[verts[0]];
    let (mut n, area) = if dim == 2 {
        let t = sub(&points[verts[1]], &a);
        let len = norm(&t);
        ([t[1] / len, -t[0] / len, 0.0], len)
    } else {
        let c = cross(&sub(&points[verts[1]], &a), &sub(&points[verts[2]], &a));
        let len = norm(&c);
        (scale(&c, 1.0 / len), 0.5 * len)
    };
    if dot(&n, &sub(&points[cell[opposite]], &a)) > 0.0 {
        n = scale(&n, -1.0);
    }
    (n, area)
}
