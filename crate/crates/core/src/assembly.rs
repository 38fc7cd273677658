//! Global sparse system: stiffness matrix, load vector and Dirichlet
//! elimination.
//!
//! Local kernels are computed in parallel chunks but always scattered in cell
//! order, so the assembled values do not depend on the thread count.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{dot, trace, Point, Tensor, Vector, ZERO};
use crate::mesh::{FacetKind, Mesh};
use crate::quadrature::simplex_rule;
use crate::space::{facet_normal_mean, facet_rule, DofMap, MAX_LOCAL_DOFS};
use crate::sparse::CsrMatrix;
use crate::weakops::{local_system, ElementKernel};

pub type VectorField = Arc<dyn Fn(&Point) -> Vector + Send + Sync>;
pub type TensorField = Arc<dyn Fn(&Point) -> Tensor + Send + Sync>;
/// Traction on the Neumann boundary; the second argument is the facet region.
pub type TractionField = Arc<dyn Fn(&Point, u32) -> Vector + Send + Sync>;

pub const DEFAULT_CELL_DEGREE: usize = 4;

/// Closed-form displacement and gradient, `grad[p][q] = ∂u_p/∂x_q`.
#[derive(Clone)]
pub struct ExactSolution {
    pub displacement: VectorField,
    pub gradient: TensorField,
}

impl ExactSolution {
    pub fn divergence(&self, p: &Point, dim: usize) -> f64 {
        trace(&(self.gradient)(p), dim)
    }
}

/// `(μ, λ)` from Young's modulus and Poisson ratio.
pub fn lame_from_young_poisson(young: f64, poisson: f64) -> Result<(f64, f64)> {
    if !(young > 0.0) || !(poisson > 0.0 && poisson < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "need E > 0 and 0 < ν < 1/2, got E = {young}, ν = {poisson}"
        )));
    }
    let mu = young / (2.0 * (1.0 + poisson));
    let lambda = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
    Ok((mu, lambda))
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub mu: f64,
    pub lambda: f64,
    pub body_force: VectorField,
    pub dirichlet: Option<VectorField>,
    pub neumann: Option<TractionField>,
    pub exact: Option<ExactSolution>,
    pub cell_degree: usize,
    pub facet_degree: usize,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("mu", &self.mu)
            .field("lambda", &self.lambda)
            .field("dirichlet", &self.dirichlet.is_some())
            .field("neumann", &self.neumann.is_some())
            .field("exact", &self.exact.is_some())
            .field("cell_degree", &self.cell_degree)
            .field("facet_degree", &self.facet_degree)
            .finish()
    }
}

impl ProblemSpec {
    /// Zero body force, no boundary data, default quadrature degrees.
    pub fn new(mu: f64, lambda: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) || !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Lamé parameters must be positive, got μ = {mu}, λ = {lambda}"
            )));
        }
        Ok(ProblemSpec {
            mu,
            lambda,
            body_force: Arc::new(|_| ZERO),
            dirichlet: None,
            neumann: None,
            exact: None,
            cell_degree: DEFAULT_CELL_DEGREE,
            facet_degree: crate::space::DEFAULT_FACET_DEGREE,
        })
    }

    pub fn from_young_poisson(young: f64, poisson: f64) -> Result<Self> {
        let (mu, lambda) = lame_from_young_poisson(young, poisson)?;
        ProblemSpec::new(mu, lambda)
    }

    pub fn with_body_force(mut self, f: impl Fn(&Point) -> Vector + Send + Sync + 'static) -> Self {
        self.body_force = Arc::new(f);
        self
    }

    pub fn with_dirichlet(mut self, u: impl Fn(&Point) -> Vector + Send + Sync + 'static) -> Self {
        self.dirichlet = Some(Arc::new(u));
        self
    }

    pub fn with_neumann(mut self, g: impl Fn(&Point, u32) -> Vector + Send + Sync + 'static) -> Self {
        self.neumann = Some(Arc::new(g));
        self
    }

    /// Uses the exact displacement as Dirichlet data as well.
    pub fn with_exact(mut self, exact: ExactSolution) -> Self {
        self.dirichlet = Some(exact.displacement.clone());
        self.exact = Some(exact);
        self
    }

    pub fn with_degrees(mut self, cell_degree: usize, facet_degree: usize) -> Self {
        self.cell_degree = cell_degree;
        self.facet_degree = facet_degree;
        self
    }
}

/// Sparsity pattern of the global operator: all DoF pairs sharing a cell.
pub fn sparsity_pattern(mesh: &Mesh, dofs: &DofMap) -> CsrMatrix {
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); dofs.total()];
    for c in 0..mesh.n_cells() {
        let (local, n) = dofs.cell_dofs(mesh, c);
        for &i in &local[..n] {
            rows[i].extend_from_slice(&local[..n]);
        }
    }
    for r in &mut rows {
        r.sort_unstable();
        r.dedup();
    }
    CsrMatrix::from_pattern(&rows)
}

const CHUNK: usize = 2048;

fn assemble_with(
    mesh: &Mesh,
    dofs: &DofMap,
    mu: f64,
    lambda: f64,
    local: impl Fn(&ElementKernel) -> DMatrix<f64> + Sync,
) -> CsrMatrix {
    let mut a = sparsity_pattern(mesh, dofs);
    let cells: Vec<usize> = (0..mesh.n_cells()).collect();
    for chunk in cells.chunks(CHUNK) {
        let blocks: Vec<([usize; MAX_LOCAL_DOFS], DMatrix<f64>)> = chunk
            .par_iter()
            .map(|&c| {
                let k = local_system(mesh, dofs, c, mu, lambda);
                (k.dofs, local(&k))
            })
            .collect();
        for (ids, block) in &blocks {
            let n = block.nrows();
            for i in 0..n {
                for j in 0..n {
                    a.add(ids[i], ids[j], block[(i, j)]);
                }
            }
        }
    }
    a
}

/// Global matrix of `a(·,·)` over all DoFs (constraints not applied).
pub fn assemble_matrix(mesh: &Mesh, dofs: &DofMap, spec: &ProblemSpec) -> CsrMatrix {
    assemble_with(mesh, dofs, spec.mu, spec.lambda, |k| k.matrix.clone())
}

/// The λ-independent part: the matrix assembled from `|T| D Dᵀ` alone, so that
/// `A(μ, λ) = A(μ, 0) + λ A_div`.
pub fn assemble_divergence_matrix(mesh: &Mesh, dofs: &DofMap) -> CsrMatrix {
    assemble_with(mesh, dofs, 1.0, 0.0, ElementKernel::divergence_part)
}

/// Load vector `F(v) = (f, v_0) + ⟨g·n_e, v_b⟩ + ⟨n×g, n×v_0⟩` over the
/// Neumann facets.
pub fn assemble_load(mesh: &Mesh, dofs: &DofMap, spec: &ProblemSpec) -> Result<Vec<f64>> {
    let d = mesh.dim();
    let mut b = vec![0.0; dofs.total()];

    let rule = simplex_rule(d, spec.cell_degree)?;
    for c in 0..mesh.n_cells() {
        let vol = mesh.cell_volume(c);
        let verts = mesh.cell(c);
        for (bary, w) in rule.iter() {
            let f = (spec.body_force)(&mesh.cell_point(c, bary));
            for (a, &v) in verts.iter().enumerate() {
                let phi = vol * w * bary[a];
                for k in 0..d {
                    b[dofs.cg_dof(v, k)] += phi * f[k];
                }
            }
        }
    }

    let frule = facet_rule(mesh, spec.facet_degree);
    for f in mesh.boundary_facets() {
        let tag = mesh.facet_tag(f);
        if tag.kind != FacetKind::Neumann {
            continue;
        }
        let g = spec.neumann.as_ref().ok_or_else(|| {
            Error::Configuration(format!("Neumann facet {f} (region {}) has no traction data", tag.region))
        })?;
        let n = mesh.facet_normal(f);
        let area = mesh.facet_area(f);
        let verts = mesh.facet(f);
        let mut normal_mean = 0.0;
        for (bary, w) in frule.iter() {
            let gq = g(&mesh.facet_point(f, bary), tag.region);
            let gn = dot(&gq, n);
            normal_mean += w * gn;
            for (a, &v) in verts.iter().enumerate() {
                let phi = area * w * bary[a];
                for k in 0..d {
                    b[dofs.cg_dof(v, k)] += phi * (gq[k] - gn * n[k]);
                }
            }
        }
        b[dofs.facet_dof(f)] += area * normal_mean;
    }
    Ok(b)
}

/// Values of the constrained DoFs: vertex values of `u_D` and facet means of
/// `u_D · n_e`. Free entries are zero.
pub fn dirichlet_values(mesh: &Mesh, dofs: &DofMap, spec: &ProblemSpec) -> Result<Vec<f64>> {
    let mut values = vec![0.0; dofs.total()];
    if dofs.n_constrained() == 0 {
        return Ok(values);
    }
    let u = spec
        .dirichlet
        .as_ref()
        .ok_or_else(|| Error::Configuration("Dirichlet facets present but no boundary data given".into()))?;
    let d = mesh.dim();
    for v in 0..mesh.n_vertices() {
        if (0..d).any(|k| dofs.is_constrained(dofs.cg_dof(v, k))) {
            let val = u(mesh.point(v));
            for k in 0..d {
                values[dofs.cg_dof(v, k)] = val[k];
            }
        }
    }
    let rule = facet_rule(mesh, spec.facet_degree);
    for f in mesh.boundary_facets() {
        if dofs.is_constrained(dofs.facet_dof(f)) {
            values[dofs.facet_dof(f)] = facet_normal_mean(mesh, f, &rule, &|p| u(p));
        }
    }
    Ok(values)
}

/// The system restricted to the free DoFs after symmetric elimination of
/// the constrained ones.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Global index of each free unknown.
    pub free: Vec<usize>,
    /// Full-length vector holding the prescribed values (zero on free DoFs).
    pub prescribed: Vec<f64>,
}

impl SparseSystem {
    /// Full coefficient vector from a solution of the reduced system.
    pub fn expand(&self, reduced: &[f64]) -> Result<Vec<f64>> {
        if reduced.len() != self.free.len() {
            return Err(Error::LengthMismatch {
                expected: self.free.len(),
                actual: reduced.len(),
            });
        }
        let mut full = self.prescribed.clone();
        for (&g, &x) in self.free.iter().zip(reduced) {
            full[g] = x;
        }
        Ok(full)
    }
}

/// Eliminates constrained DoFs: `b_free −= A_free,constrained · values`, and
/// keeps only the free rows and columns.
pub fn apply_dirichlet(
    a: &CsrMatrix,
    b: &[f64],
    mesh: &Mesh,
    dofs: &DofMap,
    spec: &ProblemSpec,
) -> Result<SparseSystem> {
    if a.n() != dofs.total() || b.len() != dofs.total() {
        return Err(Error::LengthMismatch {
            expected: dofs.total(),
            actual: if a.n() != dofs.total() { a.n() } else { b.len() },
        });
    }
    let prescribed = dirichlet_values(mesh, dofs, spec)?;
    let free: Vec<usize> = dofs.free_dofs().collect();
    let mut reduced_index = vec![usize::MAX; dofs.total()];
    for (r, &g) in free.iter().enumerate() {
        reduced_index[g] = r;
    }
    let mut rows = Vec::with_capacity(free.len());
    let mut rhs = Vec::with_capacity(free.len());
    for &g in &free {
        let mut cols = Vec::new();
        let mut bi = b[g];
        for (j, v) in a.row(g) {
            if dofs.is_constrained(j) {
                bi -= v * prescribed[j];
            } else {
                cols.push(reduced_index[j]);
            }
        }
        rows.push(cols);
        rhs.push(bi);
    }
    let mut matrix = CsrMatrix::from_pattern(&rows);
    let mut k = 0;
    {
        let vals = matrix.values_mut();
        for &g in &free {
            for (j, v) in a.row(g) {
                if !dofs.is_constrained(j) {
                    vals[k] = v;
                    k += 1;
                }
            }
        }
    }
    Ok(SparseSystem {
        matrix,
        rhs,
        free,
        prescribed,
    })
}
