//! Element kernels for the weak gradient, weak divergence, weak strain and
//! stress, and the facet-jump stabilization.
//!
//! On a cell `T` with local facets `e` (outward normal `n`, assigned normal
//! `n_e = sign * n`) the weak gradient tested against all constant tensors
//! reduces to
//!
//! ```text
//! ∇_w v = (1/|T|) Σ_e |e| [ v̄_0 ⊗ n + (v_b sign − v̄_0·n) n ⊗ n ]
//! ∇_w·v = (1/|T|) Σ_e |e| v_b sign
//! ```
//!
//! where `v̄_0` is the facet mean of the P1 trace (mean of the facet vertex
//! values). The tangential pairing `(n×a)·(n×b) = a·b − (a·n)(b·n)` gives 2D
//! and 3D one code path.

use nalgebra::{DMatrix, DVector};

use crate::geometry::{dot, hooke, sym, trace, Tensor, Vector, ZERO, ZERO_TENSOR};
use crate::mesh::Mesh;
use crate::space::{local_cg, local_dof_count, local_facet, DofMap, EgFunction, MAX_LOCAL_DOFS};

/// Mean over facet `f` of the P1 trace of `v_0`.
fn facet_cg_mean(mesh: &Mesh, v: &EgFunction, f: usize) -> Vector {
    let verts = mesh.facet(f);
    let mut mean = ZERO;
    for &p in verts {
        let val = v.vertex_value(p);
        for k in 0..3 {
            mean[k] += val[k];
        }
    }
    let inv = 1.0 / verts.len() as f64;
    [mean[0] * inv, mean[1] * inv, mean[2] * inv]
}

/// Facet jump `Q_b(v_0 · n_e) − v_b` on facet `f`.
pub fn facet_jump(mesh: &Mesh, v: &EgFunction, f: usize) -> f64 {
    dot(&facet_cg_mean(mesh, v, f), mesh.facet_normal(f)) - v.enrichment(f)
}

pub fn weak_gradient(mesh: &Mesh, v: &EgFunction, c: usize) -> Tensor {
    let d = mesh.dim();
    let mut g = ZERO_TENSOR;
    for (i, &f) in mesh.cell_facets(c).iter().enumerate() {
        let n = mesh.outward_normal(c, i);
        let area = mesh.facet_area(f);
        let mean = facet_cg_mean(mesh, v, f);
        let normal_part = v.enrichment(f) * mesh.cell_facet_sign(c, i) - dot(&mean, &n);
        for p in 0..d {
            for q in 0..d {
                g[p][q] += area * (mean[p] * n[q] + normal_part * n[p] * n[q]);
            }
        }
    }
    let inv = 1.0 / mesh.cell_volume(c);
    for row in g.iter_mut() {
        for x in row.iter_mut() {
            *x *= inv;
        }
    }
    g
}

pub fn weak_divergence(mesh: &Mesh, v: &EgFunction, c: usize) -> f64 {
    let sum: f64 = mesh
        .cell_facets(c)
        .iter()
        .enumerate()
        .map(|(i, &f)| mesh.facet_area(f) * v.enrichment(f) * mesh.cell_facet_sign(c, i))
        .sum();
    sum / mesh.cell_volume(c)
}

pub fn weak_strain(mesh: &Mesh, v: &EgFunction, c: usize) -> Tensor {
    sym(&weak_gradient(mesh, v, c))
}

/// `2μ ε_w(v) + λ (∇_w·v) I`.
pub fn weak_stress(mesh: &Mesh, v: &EgFunction, c: usize, mu: f64, lambda: f64) -> Tensor {
    let g = weak_gradient(mesh, v, c);
    let div = weak_divergence(mesh, v, c);
    let d = mesh.dim();
    let mut s = hooke(&g, d, mu, 0.0);
    for (i, row) in s.iter_mut().enumerate().take(d) {
        row[i] += lambda * div;
    }
    s
}

/// Local operators of one cell in local DoF order.
#[derive(Debug, Clone)]
pub struct ElementKernel {
    pub cell: usize,
    pub dofs: [usize; MAX_LOCAL_DOFS],
    pub n_dofs: usize,
    /// `d² × n`; row `p * d + q` gives entry `(p, q)` of `∇_w v`.
    pub gradient: DMatrix<f64>,
    /// `∇_w·v` as a row of weights.
    pub divergence: DVector<f64>,
    /// `(d+1) × n`; row `i` is the jump on local facet `i` (oriented by `n_e`).
    pub jumps: DMatrix<f64>,
    /// `|e_i| / h_T` per local facet.
    pub jump_weights: DVector<f64>,
    pub stabilization: DMatrix<f64>,
    /// Full local matrix of `a(·,·)` on the cell.
    pub matrix: DMatrix<f64>,
    pub volume: f64,
}

impl ElementKernel {
    /// Symmetrized gradient rows: row `p * d + q` gives `ε_w(v)_{pq}`.
    pub fn strain(&self, dim: usize) -> DMatrix<f64> {
        let mut e = self.gradient.clone();
        for p in 0..dim {
            for q in 0..dim {
                let row = 0.5 * (self.gradient.row(p * dim + q) + self.gradient.row(q * dim + p));
                e.set_row(p * dim + q, &row);
            }
        }
        e
    }

    /// `λ |T| D Dᵀ`, the part of the local matrix that scales with λ.
    pub fn divergence_part(&self) -> DMatrix<f64> {
        &self.divergence * self.divergence.transpose() * self.volume
    }
}

/// Assembles the local kernel of cell `c` for Lamé parameters `mu`, `lambda`.
pub fn local_system(mesh: &Mesh, dofs: &DofMap, c: usize, mu: f64, lambda: f64) -> ElementKernel {
    let d = mesh.dim();
    let n = local_dof_count(d);
    let vol = mesh.cell_volume(c);
    let h = mesh.cell_diameter(c);
    let df = d as f64;

    let mut gradient = DMatrix::zeros(d * d, n);
    let mut divergence = DVector::zeros(n);
    let mut jumps = DMatrix::zeros(d + 1, n);
    let mut jump_weights = DVector::zeros(d + 1);

    for (i, &f) in mesh.cell_facets(c).iter().enumerate() {
        let nrm = mesh.outward_normal(c, i);
        let ne = mesh.facet_normal(f);
        let area = mesh.facet_area(f);
        let sign = mesh.cell_facet_sign(c, i);
        let w = area / (df * vol);
        for a in (0..=d).filter(|&a| a != i) {
            for k in 0..d {
                let col = local_cg(a, k, d);
                for p in 0..d {
                    for q in 0..d {
                        let delta = if p == k { 1.0 } else { 0.0 };
                        gradient[(p * d + q, col)] += w * (delta * nrm[q] - nrm[k] * nrm[p] * nrm[q]);
                    }
                }
                jumps[(i, col)] = ne[k] / df;
            }
        }
        let col = local_facet(i, d);
        for p in 0..d {
            for q in 0..d {
                gradient[(p * d + q, col)] += area * sign / vol * nrm[p] * nrm[q];
            }
        }
        divergence[col] = area * sign / vol;
        jumps[(i, col)] = -1.0;
        jump_weights[i] = area / h;
    }

    let mut kernel = ElementKernel {
        cell: c,
        dofs: dofs.cell_dofs(mesh, c).0,
        n_dofs: n,
        gradient,
        divergence,
        jumps,
        jump_weights,
        stabilization: DMatrix::zeros(n, n),
        matrix: DMatrix::zeros(n, n),
        volume: vol,
    };
    let weighted_jumps = DMatrix::from_diagonal(&kernel.jump_weights) * &kernel.jumps;
    kernel.stabilization = kernel.jumps.transpose() * weighted_jumps;
    let strain = kernel.strain(d);
    kernel.matrix = strain.transpose() * &strain * (2.0 * mu * vol)
        + kernel.divergence_part() * lambda
        + &kernel.stabilization;
    kernel
}

/// Trace of a tensor-valued weak gradient; equals the weak divergence.
pub fn weak_gradient_trace(mesh: &Mesh, v: &EgFunction, c: usize) -> f64 {
    trace(&weak_gradient(mesh, v, c), mesh.dim())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{cross, identity, Point};
    use crate::mesh::{unit_cube, unit_square, FacetTag};
    use crate::quadrature::simplex_rule;
    use crate::space::{lift_cg, DofMap};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_cell(dim: usize, pts: Vec<Point>) -> Mesh {
        let cells = (0..=dim).collect();
        Mesh::from_cells(dim, pts, cells, 1.0, |_, _| FacetTag::dirichlet(0)).unwrap()
    }

    fn random_cell(rng: &mut ChaCha8Rng, dim: usize) -> Mesh {
        loop {
            let pts: Vec<Point> = (0..=dim)
                .map(|_| {
                    let mut p = [0.0; 3];
                    for x in p.iter_mut().take(dim) {
                        *x = rng.gen_range(-2.0..2.0);
                    }
                    p
                })
                .collect();
            if let Ok(m) = Mesh::from_cells(dim, pts, (0..=dim).collect(), 1.0, |_, _| {
                FacetTag::dirichlet(0)
            }) {
                // reject slivers so the oracle comparison stays well scaled
                if m.cell_volume(0) > 0.05 * m.cell_diameter(0).powi(dim as i32) {
                    return m;
                }
            }
        }
    }

    fn random_function(rng: &mut ChaCha8Rng, mesh: &Mesh) -> EgFunction {
        let dofs = DofMap::new(mesh);
        let coeffs = (0..dofs.total()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        EgFunction::from_coefficients(&dofs, coeffs).unwrap()
    }

    /// Evaluates the defining equation against every basis tensor `e_p e_qᵀ`
    /// with explicit cross products and quadrature of the P1 trace.
    fn weak_gradient_oracle(mesh: &Mesh, v: &EgFunction, c: usize) -> Tensor {
        let d = mesh.dim();
        let rule = simplex_rule(d - 1, 2).unwrap();
        let mut g = ZERO_TENSOR;
        for p in 0..d {
            for q in 0..d {
                let mut tau = ZERO_TENSOR;
                tau[p][q] = 1.0;
                let mut rhs = 0.0;
                for (i, &f) in mesh.cell_facets(c).iter().enumerate() {
                    let n = mesh.outward_normal(c, i);
                    let ne = mesh.facet_normal(f);
                    let tau_n = crate::geometry::mat_vec(&tau, &n);
                    let n_tau_n = dot(&n, &tau_n);
                    for (bary, w) in rule.iter() {
                        let mut v0 = ZERO;
                        for (&vert, &l) in mesh.facet(f).iter().zip(bary) {
                            let val = v.vertex_value(vert);
                            for k in 0..d {
                                v0[k] += l * val[k];
                            }
                        }
                        let normal_term = v.enrichment(f) * dot(ne, &n) * n_tau_n;
                        let tangential = if d == 2 {
                            let cr = |a: &Vector, b: &Vector| a[0] * b[1] - a[1] * b[0];
                            cr(&n, &v0) * cr(&n, &tau_n)
                        } else {
                            dot(&cross(&n, &v0), &cross(&n, &tau_n))
                        };
                        rhs += w * mesh.facet_area(f) * (normal_term + tangential);
                    }
                }
                g[p][q] = rhs / mesh.cell_volume(c);
            }
        }
        g
    }

    fn max_abs_diff(a: &Tensor, b: &Tensor) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                m = m.max((a[i][j] - b[i][j]).abs());
            }
        }
        m
    }

    #[test]
    fn constant_and_identity_lifts() {
        let m = unit_square(2).unwrap();
        let c = lift_cg(&vec![[0.7, -1.3, 0.0]; m.n_vertices()], &m).unwrap();
        let id = lift_cg(m.points(), &m).unwrap();
        for t in 0..m.n_cells() {
            assert!(max_abs_diff(&weak_gradient(&m, &c, t), &ZERO_TENSOR) < 1e-13);
            assert!(max_abs_diff(&weak_gradient(&m, &id, t), &identity(2)) < 1e-13);
            assert!((weak_divergence(&m, &id, t) - 2.0).abs() < 1e-13);
            let s = weak_stress(&m, &id, t, 1.0, 1.0);
            let mut four = identity(2);
            four[0][0] = 4.0;
            four[1][1] = 4.0;
            assert!(max_abs_diff(&s, &four) < 1e-12);
        }
    }

    #[test]
    fn reference_triangle_matches_oracle() {
        let m = single_cell(2, vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        let dofs = DofMap::new(&m);
        // single cell: every normal is outward, so n_e = n
        let mut coeffs = vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let opposite = |v: usize| m.cell_facets(0)[m.cell(0).iter().position(|&x| x == v).unwrap()];
        // v_b = (0.3, -0.2, 0.1) on the facets opposite vertices 0, 1, 2
        for (v, val) in [(0, 0.3), (1, -0.2), (2, 0.1)] {
            coeffs[dofs.facet_dof(opposite(v))] = val;
        }
        let v = EgFunction::from_coefficients(&dofs, coeffs).unwrap();
        let closed = weak_gradient(&m, &v, 0);
        let oracle = weak_gradient_oracle(&m, &v, 0);
        assert!(max_abs_diff(&closed, &oracle) < 1e-13);
        assert!((trace(&closed, 2) - weak_divergence(&m, &v, 0)).abs() < 1e-14);
    }

    #[test]
    fn zero_enrichment_gives_zero_divergence() {
        let m = unit_square(2).unwrap();
        let mut v = lift_cg(m.points(), &m).unwrap();
        let n_cg = 2 * m.n_vertices();
        v.coefficients_mut()[n_cg..].fill(0.0);
        for c in 0..m.n_cells() {
            assert_eq!(weak_divergence(&m, &v, c), 0.0);
        }
    }

    #[test]
    fn rigid_rotation_has_zero_strain_and_stress() {
        for mesh in [unit_square(2).unwrap(), unit_cube(1).unwrap()] {
            let rot: Vec<Vector> = mesh.points().iter().map(|p| [-p[1], p[0], 0.0]).collect();
            let v = lift_cg(&rot, &mesh).unwrap();
            for c in 0..mesh.n_cells() {
                assert!(max_abs_diff(&weak_strain(&mesh, &v, c), &ZERO_TENSOR) < 1e-13);
                assert!(max_abs_diff(&weak_stress(&mesh, &v, c, 1.0, 1.0), &ZERO_TENSOR) < 1e-12);
            }
        }
        let m = unit_square(1).unwrap();
        let z = EgFunction::zeros(&DofMap::new(&m));
        assert_eq!(weak_stress(&m, &z, 0, 1.0, 1.0), ZERO_TENSOR);
    }

    #[test]
    fn kernel_operators_agree_with_pointwise_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for dim in [2, 3] {
            for _ in 0..10 {
                let m = random_cell(&mut rng, dim);
                let v = random_function(&mut rng, &m);
                let dofs = DofMap::new(&m);
                let k = local_system(&m, &dofs, 0, 1.0, 1.0);
                let x = DVector::from_column_slice(&v.local_coefficients(&m, 0)[..k.n_dofs]);
                let gx = &k.gradient * &x;
                let g = weak_gradient(&m, &v, 0);
                for p in 0..dim {
                    for q in 0..dim {
                        assert!((gx[p * dim + q] - g[p][q]).abs() < 1e-12);
                    }
                }
                assert!((k.divergence.dot(&x) - weak_divergence(&m, &v, 0)).abs() < 1e-12);
                let jx = &k.jumps * &x;
                for (i, &f) in m.cell_facets(0).iter().enumerate() {
                    assert!((jx[i] - facet_jump(&m, &v, f)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn local_quadratic_form_matches_term_by_term_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = single_cell(2, vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        let dofs = DofMap::new(&m);
        let (mu, lambda) = (1.0, 1.0);
        let k = local_system(&m, &dofs, 0, mu, lambda);
        for _ in 0..20 {
            let v = random_function(&mut rng, &m);
            let x = DVector::from_column_slice(&v.local_coefficients(&m, 0)[..k.n_dofs]);
            let quad = x.dot(&(&k.matrix * &x));
            let eps = sym(&weak_gradient_oracle(&m, &v, 0));
            let div = trace(&weak_gradient_oracle(&m, &v, 0), 2);
            let eps_sq: f64 = eps.iter().flatten().map(|e| e * e).sum();
            let h = m.cell_diameter(0);
            let jumps: f64 = (0..m.n_facets())
                .map(|f| m.facet_area(f) * facet_jump(&m, &v, f).powi(2))
                .sum();
            let vol = m.cell_volume(0);
            let oracle = 2.0 * mu * vol * eps_sq + lambda * vol * div * div + jumps / h;
            assert!((quad - oracle).abs() <= 1e-12 * oracle.max(1.0));
        }
    }

    #[test]
    fn local_matrix_is_symmetric_psd_with_rigid_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (dim, rigid) in [(2usize, 3usize), (3, 6)] {
            for _ in 0..5 {
                let m = random_cell(&mut rng, dim);
                let dofs = DofMap::new(&m);
                let k = local_system(&m, &dofs, 0, 1.3, 7.0);
                let asym = (&k.matrix - k.matrix.transpose()).amax();
                assert!(asym <= 1e-12 * k.matrix.amax());
                let eig = k.matrix.clone().symmetric_eigen().eigenvalues;
                let max = eig.amax();
                assert!(eig.iter().all(|&e| e > -1e-12 * max));
                let null = eig.iter().filter(|&&e| e.abs() < 1e-10 * max).count();
                assert_eq!(null, rigid, "dim {dim}");
            }
        }
    }

    #[test]
    fn lifted_fields_kill_jumps_and_rigid_motions_cost_nothing() {
        let m = unit_square(2).unwrap();
        let dofs = DofMap::new(&m);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let nodal: Vec<Vector> =
            (0..m.n_vertices()).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0]).collect();
        let w = lift_cg(&nodal, &m).unwrap();
        let rigid: Vec<Vector> = m.points().iter().map(|p| [0.3 - p[1], 0.1 + p[0], 0.0]).collect();
        let r = lift_cg(&rigid, &m).unwrap();
        for c in 0..m.n_cells() {
            let k = local_system(&m, &dofs, c, 1.0, 1.0);
            let x = DVector::from_column_slice(&w.local_coefficients(&m, c)[..k.n_dofs]);
            assert!((&k.jumps * &x).amax() < 1e-14);
            assert!(x.dot(&(&k.stabilization * &x)).abs() < 1e-13);
            let y = DVector::from_column_slice(&r.local_coefficients(&m, c)[..k.n_dofs]);
            assert!(y.dot(&(&k.matrix * &y)).abs() < 1e-12);
        }
    }
}
