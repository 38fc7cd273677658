//! The enriched space: vector P1 continuous functions plus one scalar
//! constant per facet that corrects the normal component along `n_e`.
//!
//! Global layout is vertex-major for the continuous block
//! (`vertex * dim + component`) followed by one DoF per facet. The local
//! layout on a cell mirrors it: `a * dim + k` for local vertex `a`, then
//! `dim * (dim + 1) + i` for local facet `i`.

use crate::error::{Error, Result};
use crate::geometry::{dot, scale, Point, Tensor, Vector, ZERO, ZERO_TENSOR};
use crate::mesh::{FacetKind, Mesh};
use crate::quadrature::{simplex_rule, QuadratureRule};

/// Default degree of the facet rules used for interpolation and boundary data.
pub const DEFAULT_FACET_DEGREE: usize = 4;

/// Largest local DoF count (tetrahedron: 12 + 4).
pub const MAX_LOCAL_DOFS: usize = 16;

#[inline]
pub fn local_cg(vertex: usize, comp: usize, dim: usize) -> usize {
    vertex * dim + comp
}

#[inline]
pub fn local_facet(facet: usize, dim: usize) -> usize {
    dim * (dim + 1) + facet
}

#[inline]
pub fn local_dof_count(dim: usize) -> usize {
    (dim + 1) * (dim + 1)
}

#[derive(Debug, Clone)]
pub struct DofMap {
    dim: usize,
    n_vertices: usize,
    n_facets: usize,
    constrained: Vec<bool>,
}

impl DofMap {
    /// Numbers the DoFs of `mesh` and marks everything touching a Dirichlet
    /// facet as constrained.
    pub fn new(mesh: &Mesh) -> DofMap {
        let dim = mesh.dim();
        let n_cg = dim * mesh.n_vertices();
        let mut constrained = vec![false; n_cg + mesh.n_facets()];
        for f in mesh.boundary_facets() {
            if mesh.facet_tag(f).kind != FacetKind::Dirichlet {
                continue;
            }
            constrained[n_cg + f] = true;
            for &v in mesh.facet(f) {
                for k in 0..dim {
                    constrained[v * dim + k] = true;
                }
            }
        }
        DofMap {
            dim,
            n_vertices: mesh.n_vertices(),
            n_facets: mesh.n_facets(),
            constrained,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_cg(&self) -> usize {
        self.dim * self.n_vertices
    }

    pub fn n_eg(&self) -> usize {
        self.n_facets
    }

    pub fn total(&self) -> usize {
        self.n_cg() + self.n_eg()
    }

    pub fn cg_dof(&self, vertex: usize, comp: usize) -> usize {
        vertex * self.dim + comp
    }

    pub fn facet_dof(&self, facet: usize) -> usize {
        self.n_cg() + facet
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.constrained[dof]
    }

    pub fn constrained_dofs(&self) -> impl Iterator<Item = usize> + '_ {
        self.constrained.iter().enumerate().filter(|(_, &c)| c).map(|(i, _)| i)
    }

    pub fn free_dofs(&self) -> impl Iterator<Item = usize> + '_ {
        self.constrained.iter().enumerate().filter(|(_, &c)| !c).map(|(i, _)| i)
    }

    pub fn n_constrained(&self) -> usize {
        self.constrained.iter().filter(|&&c| c).count()
    }

    /// Global indices of the local DoFs of cell `c`.
    pub fn cell_dofs(&self, mesh: &Mesh, c: usize) -> ([usize; MAX_LOCAL_DOFS], usize) {
        let d = self.dim;
        let mut dofs = [0; MAX_LOCAL_DOFS];
        for (a, &v) in mesh.cell(c).iter().enumerate() {
            for k in 0..d {
                dofs[local_cg(a, k, d)] = self.cg_dof(v, k);
            }
        }
        for (i, &f) in mesh.cell_facets(c).iter().enumerate() {
            dofs[local_facet(i, d)] = self.facet_dof(f);
        }
        (dofs, local_dof_count(d))
    }
}

/// One discrete field `{u_0, u_b}` stored as a coefficient vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EgFunction {
    dim: usize,
    n_vertices: usize,
    coeffs: Vec<f64>,
}

impl EgFunction {
    pub fn zeros(dofs: &DofMap) -> Self {
        EgFunction {
            dim: dofs.dim,
            n_vertices: dofs.n_vertices,
            coeffs: vec![0.0; dofs.total()],
        }
    }

    pub fn from_coefficients(dofs: &DofMap, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != dofs.total() {
            return Err(Error::LengthMismatch {
                expected: dofs.total(),
                actual: coeffs.len(),
            });
        }
        Ok(EgFunction {
            dim: dofs.dim,
            n_vertices: dofs.n_vertices,
            coeffs,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coefficients_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coeffs
    }

    /// Value of `u_0` at a vertex.
    pub fn vertex_value(&self, v: usize) -> Vector {
        let mut u = ZERO;
        u[..self.dim].copy_from_slice(&self.coeffs[v * self.dim..(v + 1) * self.dim]);
        u
    }

    pub fn nodal_values(&self) -> Vec<Vector> {
        (0..self.n_vertices).map(|v| self.vertex_value(v)).collect()
    }

    /// Enrichment coefficient `u_b` on facet `f`.
    pub fn enrichment(&self, f: usize) -> f64 {
        self.coeffs[self.dim * self.n_vertices + f]
    }

    /// Local coefficient vector of cell `c` in local DoF order.
    pub fn local_coefficients(&self, mesh: &Mesh, c: usize) -> [f64; MAX_LOCAL_DOFS] {
        let d = self.dim;
        let mut out = [0.0; MAX_LOCAL_DOFS];
        for (a, &v) in mesh.cell(c).iter().enumerate() {
            for k in 0..d {
                out[local_cg(a, k, d)] = self.coeffs[v * d + k];
            }
        }
        for (i, &f) in mesh.cell_facets(c).iter().enumerate() {
            out[local_facet(i, d)] = self.enrichment(f);
        }
        out
    }

    /// `u_0` at barycentric coordinates of cell `c`.
    pub fn cg_at(&self, mesh: &Mesh, c: usize, bary: &[f64; 4]) -> Vector {
        let mut u = ZERO;
        for (&v, &l) in mesh.cell(c).iter().zip(bary) {
            let uv = self.vertex_value(v);
            for k in 0..self.dim {
                u[k] += l * uv[k];
            }
        }
        u
    }

    /// Classical gradient of `u_0` on cell `c`, entry `[i][j] = ∂u_i/∂x_j`.
    pub fn cg_gradient(&self, mesh: &Mesh, c: usize) -> Tensor {
        let grads = barycentric_gradients(mesh, c);
        let mut g = ZERO_TENSOR;
        for (a, &v) in mesh.cell(c).iter().enumerate() {
            let uv = self.vertex_value(v);
            for i in 0..self.dim {
                for j in 0..self.dim {
                    g[i][j] += uv[i] * grads[a][j];
                }
            }
        }
        g
    }
}

/// Gradients of the barycentric coordinates of cell `c`:
/// `∇λ_a = -|e_a| n_a / (d |T|)` with `e_a` the facet opposite vertex `a`.
pub fn barycentric_gradients(mesh: &Mesh, c: usize) -> [Vector; 4] {
    let d = mesh.dim();
    let vol = mesh.cell_volume(c);
    let mut out = [ZERO; 4];
    for (a, &f) in mesh.cell_facets(c).iter().enumerate() {
        out[a] = scale(&mesh.outward_normal(c, a), -mesh.facet_area(f) / (d as f64 * vol));
    }
    out
}

/// Lifts a continuous P1 field: `u_b|_e` is the exact facet mean of `v_0 · n_e`.
pub fn lift_cg(nodal_values: &[Vector], mesh: &Mesh) -> Result<EgFunction> {
    if nodal_values.len() != mesh.n_vertices() {
        return Err(Error::LengthMismatch {
            expected: mesh.n_vertices(),
            actual: nodal_values.len(),
        });
    }
    let d = mesh.dim();
    let dofs = DofMap::new(mesh);
    let mut coeffs = vec![0.0; dofs.total()];
    for (v, val) in nodal_values.iter().enumerate() {
        coeffs[v * d..(v + 1) * d].copy_from_slice(&val[..d]);
    }
    for f in 0..mesh.n_facets() {
        let verts = mesh.facet(f);
        let mut mean = ZERO;
        for &v in verts {
            for k in 0..d {
                mean[k] += nodal_values[v][k];
            }
        }
        coeffs[dofs.facet_dof(f)] = dot(&mean, mesh.facet_normal(f)) / verts.len() as f64;
    }
    EgFunction::from_coefficients(&dofs, coeffs)
}

/// Facet rule of the given degree for the facets of `mesh`.
pub fn facet_rule(mesh: &Mesh, degree: usize) -> QuadratureRule {
    simplex_rule(mesh.dim() - 1, degree).expect("facet dimension is 1 or 2")
}

/// `(1/|e|) ∫_e u · n_e ds` by quadrature.
pub fn facet_normal_mean(
    mesh: &Mesh,
    f: usize,
    rule: &QuadratureRule,
    u: &dyn Fn(&Point) -> Vector,
) -> f64 {
    let n = mesh.facet_normal(f);
    rule.iter()
        .map(|(bary, w)| w * dot(&u(&mesh.facet_point(f, bary)), n))
        .sum()
}

/// Interpolates a displacement field: vertex values for `u_0` and facet
/// means of `u · n_e` for `u_b`.
pub fn interpolate_exact(
    u: &dyn Fn(&Point) -> Vector,
    mesh: &Mesh,
    facet_degree: usize,
) -> EgFunction {
    let d = mesh.dim();
    let dofs = DofMap::new(mesh);
    let rule = facet_rule(mesh, facet_degree);
    let mut coeffs = vec![0.0; dofs.total()];
    for (v, p) in mesh.points().iter().enumerate() {
        let val = u(p);
        coeffs[v * d..(v + 1) * d].copy_from_slice(&val[..d]);
    }
    for f in 0..mesh.n_facets() {
        coeffs[dofs.facet_dof(f)] = facet_normal_mean(mesh, f, &rule, u);
    }
    EgFunction::from_coefficients(&dofs, coeffs).expect("length matches dof map")
}
