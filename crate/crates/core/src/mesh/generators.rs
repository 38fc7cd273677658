//! Structured mesh generators and uniform red refinement.

use super::{FacetKind, FacetTag, Mesh};
use crate::error::{Error, Result};
use crate::geometry::Point;

/// Boundary region of the clamped left edge of the Cook panel.
pub const COOK_CLAMPED: u32 = 0;
/// Boundary region of the loaded right edge of the Cook panel.
pub const COOK_LOAD: u32 = 1;
/// Traction-free top and bottom edges of the Cook panel.
pub const COOK_FREE: u32 = 2;

const COOK_CORNERS: [[f64; 2]; 4] = [[0.0, 0.0], [48.0, 44.0], [48.0, 60.0], [0.0, 44.0]];

/// `nx × ny` grid of squares, each split along its lower-left to upper-right
/// diagonal. `keep(i, j)` selects squares; unused vertices are dropped.
fn split_square_grid(
    nx: usize,
    ny: usize,
    map: impl Fn(usize, usize) -> Point,
    keep: impl Fn(usize, usize) -> bool,
) -> (Vec<Point>, Vec<usize>) {
    let grid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut cells = Vec::with_capacity(6 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            if !keep(i, j) {
                continue;
            }
            let (v00, v10, v01, v11) = (grid(i, j), grid(i + 1, j), grid(i, j + 1), grid(i + 1, j + 1));
            cells.extend_from_slice(&[v00, v10, v11, v00, v11, v01]);
        }
    }
    let mut renumber = vec![usize::MAX; (nx + 1) * (ny + 1)];
    let mut points = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            renumber[grid(i, j)] = points.len();
            points.push(map(i, j));
        }
    }
    let mut used = vec![false; points.len()];
    for &v in &cells {
        used[v] = true;
    }
    if used.iter().any(|u| !u) {
        let mut compact = Vec::new();
        for (v, p) in points.iter().enumerate() {
            if used[v] {
                renumber[v] = compact.len();
                compact.push(*p);
            }
        }
        points = compact;
    }
    for v in &mut cells {
        *v = renumber[*v];
    }
    (points, cells)
}

fn all_dirichlet(_: &[usize], _: &[Point]) -> FacetTag {
    FacetTag::dirichlet(0)
}

/// Unit square split into `n × n` squares of two triangles each.
pub fn unit_square(n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidParameter("unit square needs n >= 1".into()));
    }
    let h = 1.0 / n as f64;
    let (points, cells) = split_square_grid(
        n,
        n,
        |i, j| [i as f64 * h, j as f64 * h, 0.0],
        |_, _| true,
    );
    Mesh::from_cells(2, points, cells, h, all_dirichlet)
}

/// Unit cube split into `n³` cubes of six Kuhn tetrahedra each.
pub fn unit_cube(n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidParameter("unit cube needs n >= 1".into()));
    }
    let h = 1.0 / n as f64;
    let idx = |i: usize, j: usize, k: usize| (k * (n + 1) + j) * (n + 1) + i;
    let mut points = Vec::with_capacity((n + 1).pow(3));
    for k in 0..=n {
        for j in 0..=n {
            for i in 0..=n {
                points.push([i as f64 * h, j as f64 * h, k as f64 * h]);
            }
        }
    }
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut cells = Vec::with_capacity(24 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for perm in PERMS {
                    let mut pos = [i, j, k];
                    cells.push(idx(pos[0], pos[1], pos[2]));
                    for axis in perm {
                        pos[axis] += 1;
                        cells.push(idx(pos[0], pos[1], pos[2]));
                    }
                }
            }
        }
    }
    Mesh::from_cells(3, points, cells, h, all_dirichlet)
}

/// L-shaped domain `(-1,1)² \ [0,1]×[-1,0]`.
///
/// Level 0 splits each of the three unit squares into a 4×4 grid (96 cells);
/// each further level is one red refinement.
pub fn lshape(level: u32) -> Result<Mesh> {
    if level > 12 {
        return Err(Error::InvalidParameter(format!("L-shape level {level} too large")));
    }
    let per_unit = 4usize << level;
    let n = 2 * per_unit;
    let h = 1.0 / per_unit as f64;
    let (points, cells) = split_square_grid(
        n,
        n,
        |i, j| [-1.0 + i as f64 * h, -1.0 + j as f64 * h, 0.0],
        |i, j| !(i >= per_unit && j < per_unit),
    );
    Mesh::from_cells(2, points, cells, h, all_dirichlet)
}

/// Cook's tapered panel with corners (0,0), (48,44), (48,60), (0,44),
/// meshed by a bilinearly mapped `2^(level+2)` square grid.
///
/// Left edge: Dirichlet [`COOK_CLAMPED`]; right edge: Neumann [`COOK_LOAD`];
/// top and bottom: Neumann [`COOK_FREE`].
pub fn cook_membrane(level: u32) -> Result<Mesh> {
    if level > 12 {
        return Err(Error::InvalidParameter(format!("Cook level {level} too large")));
    }
    let n = 4usize << level;
    let (points, cells) = split_square_grid(
        n,
        n,
        |i, j| cook_map(i as f64 / n as f64, j as f64 / n as f64),
        |_, _| true,
    );
    // Edge length along x is 48/n; the left edge is the longest vertical side.
    let h = 48.0 / n as f64;
    Mesh::from_cells(2, points, cells, h, |facet, pts| {
        let x0 = pts[facet[0]][0];
        let x1 = pts[facet[1]][0];
        if x0.abs() < 1e-9 && x1.abs() < 1e-9 {
            FacetTag::dirichlet(COOK_CLAMPED)
        } else if (x0 - 48.0).abs() < 1e-9 && (x1 - 48.0).abs() < 1e-9 {
            FacetTag::neumann(COOK_LOAD)
        } else {
            FacetTag::neumann(COOK_FREE)
        }
    })
}

/// Bilinear map of the unit square onto the Cook panel.
pub(crate) fn cook_map(xi: f64, eta: f64) -> Point {
    let c = COOK_CORNERS;
    let w = [(1.0 - xi) * (1.0 - eta), xi * (1.0 - eta), xi * eta, (1.0 - xi) * eta];
    let mut p = [0.0; 3];
    for (wk, ck) in w.iter().zip(&c) {
        p[0] += wk * ck[0];
        p[1] += wk * ck[1];
    }
    p
}

/// Logical coordinates (ξ, η) of a point of the Cook panel.
pub fn cook_logical(p: &Point) -> (f64, f64) {
    let xi = p[0] / 48.0;
    let bottom = 44.0 * xi;
    let top = 44.0 + 16.0 * xi;
    (xi, (p[1] - bottom) / (top - bottom))
}

/// Splits every triangle into four by connecting edge midpoints.
pub fn refine_red(mesh: &Mesh) -> Result<Mesh> {
    if mesh.dim() != 2 {
        return Err(Error::Unsupported(
            "red refinement is only implemented for triangles".into(),
        ));
    }
    let n_old = mesh.n_vertices();
    let mut points = mesh.points().to_vec();
    for f in 0..mesh.n_facets() {
        let e = mesh.facet(f);
        let (a, b) = (mesh.point(e[0]), mesh.point(e[1]));
        points.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.0]);
    }
    let mut cells = Vec::with_capacity(12 * mesh.n_cells());
    for c in 0..mesh.n_cells() {
        let [a, b, cc] = [mesh.cell(c)[0], mesh.cell(c)[1], mesh.cell(c)[2]];
        let fs = mesh.cell_facets(c);
        let (m_bc, m_ca, m_ab) = (n_old + fs[0], n_old + fs[1], n_old + fs[2]);
        cells.extend_from_slice(&[
            a, m_ab, m_ca, //
            m_ab, b, m_bc, //
            m_ca, m_bc, cc, //
            m_ab, m_bc, m_ca,
        ]);
    }
    Mesh::from_cells(2, points, cells, 0.5 * mesh.nominal_h(), |facet, _| {
        // a boundary child edge joins one old vertex and one parent-edge midpoint
        let mid = facet.iter().copied().find(|&v| v >= n_old).expect("child edge has a midpoint");
        let tag = mesh.facet_tag(mid - n_old);
        debug_assert_ne!(tag.kind, FacetKind::Interior);
        tag
    })
}
