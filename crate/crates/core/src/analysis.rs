//! Error norms, discrete norms, convergence rates, manufactured solutions
//! and derived stress quantities.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::assembly::{ExactSolution, ProblemSpec, VectorField};
use crate::error::{Error, Result};
use crate::geometry::{frobenius_sq, hooke, sub, sym, tensor_sub, trace, Point, Tensor, Vector};
use crate::mesh::Mesh;
use crate::quadrature::simplex_rule;
use crate::solver::solve_problem;
use crate::space::{interpolate_exact, DofMap, EgFunction};
use crate::weakops::{facet_jump, weak_divergence, weak_strain, weak_stress};

pub const DEFAULT_ERROR_DEGREE: usize = 4;

/// `‖u − u_0‖`, `|u − u_0|₁` and `‖σ(u) − σ_w(u_h)‖` over the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub l2: f64,
    pub h1: f64,
    pub stress: f64,
}

/// One row of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub h: f64,
    pub dofs: usize,
    pub norms: ErrorNorms,
    /// Discrete energy and broken H1 norms of `interpolant − u_h`.
    pub triple: f64,
    pub one_h: f64,
    pub solve_seconds: f64,
}

pub fn error_norms(mesh: &Mesh, u_h: &EgFunction, spec: &ProblemSpec, quad_degree: usize) -> Result<ErrorNorms> {
    let exact = spec
        .exact
        .as_ref()
        .ok_or_else(|| Error::Configuration("error norms need an exact solution".into()))?;
    if quad_degree < DEFAULT_ERROR_DEGREE {
        return Err(Error::InvalidParameter(format!(
            "error quadrature degree {quad_degree} below {DEFAULT_ERROR_DEGREE}"
        )));
    }
    let d = mesh.dim();
    let rule = simplex_rule(d, quad_degree)?;
    let (mut l2, mut h1, mut stress) = (0.0, 0.0, 0.0);
    for c in 0..mesh.n_cells() {
        let vol = mesh.cell_volume(c);
        let grad_h = u_h.cg_gradient(mesh, c);
        let sigma_h = weak_stress(mesh, u_h, c, spec.mu, spec.lambda);
        for (bary, w) in rule.iter() {
            let x = mesh.cell_point(c, bary);
            let u = (exact.displacement)(&x);
            let grad = in_plane((exact.gradient)(&x), d);
            if u.iter().chain(grad.iter().flatten()).any(|v| !v.is_finite()) {
                return Err(Error::SingularPoint { x: x[0], y: x[1] });
            }
            let e = sub(&u, &u_h.cg_at(mesh, c, bary));
            l2 += vol * w * e[..d].iter().map(|v| v * v).sum::<f64>();
            h1 += vol * w * frobenius_sq(&tensor_sub(&grad, &grad_h));
            let sigma = hooke(&grad, d, spec.mu, spec.lambda);
            stress += vol * w * frobenius_sq(&tensor_sub(&sigma, &sigma_h));
        }
    }
    Ok(ErrorNorms {
        l2: l2.sqrt(),
        h1: h1.sqrt(),
        stress: stress.sqrt(),
    })
}

// drops out-of-plane entries so 2D fields may carry arbitrary z components
fn in_plane(mut t: Tensor, dim: usize) -> Tensor {
    for (p, row) in t.iter_mut().enumerate() {
        for (q, x) in row.iter_mut().enumerate() {
            if p >= dim || q >= dim {
                *x = 0.0;
            }
        }
    }
    t
}

/// `(|||v|||, ‖v‖_{1,h})`: the weak or classical strain plus the scaled
/// facet jumps `h_T⁻¹ Σ_e |e| j_e²`.
pub fn discrete_norms(mesh: &Mesh, v: &EgFunction) -> (f64, f64) {
    let jumps: Vec<f64> = (0..mesh.n_facets()).map(|f| facet_jump(mesh, v, f)).collect();
    let (mut triple, mut one_h) = (0.0, 0.0);
    for c in 0..mesh.n_cells() {
        let vol = mesh.cell_volume(c);
        let jump: f64 = mesh
            .cell_facets(c)
            .iter()
            .map(|&f| mesh.facet_area(f) * jumps[f] * jumps[f])
            .sum::<f64>()
            / mesh.cell_diameter(c);
        triple += vol * frobenius_sq(&weak_strain(mesh, v, c)) + jump;
        one_h += vol * frobenius_sq(&sym(&v.cg_gradient(mesh, c))) + jump;
    }
    (triple.sqrt(), one_h.sqrt())
}

/// `rate_k = ln(e_{k−1}/e_k) / ln(h_{k−1}/h_k)`; the first entry, and any
/// entry touching a zero error, is `None`.
pub fn convergence_rates(rows: &[(f64, f64)]) -> Result<Vec<Option<f64>>> {
    if rows.len() < 2 {
        return Err(Error::InvalidParameter("rates need at least two rows".into()));
    }
    if rows.windows(2).any(|w| !(w[1].0 < w[0].0)) {
        return Err(Error::InvalidParameter("mesh sizes must strictly decrease".into()));
    }
    let mut rates = vec![None];
    for w in rows.windows(2) {
        let ((h0, e0), (h1, e1)) = (w[0], w[1]);
        rates.push((e0 > 0.0 && e1 > 0.0).then(|| (e0 / e1).ln() / (h0 / h1).ln()));
    }
    Ok(rates)
}

/// Solves on `mesh` and measures the errors against `spec.exact`.
pub fn run_level(mesh: &Mesh, spec: &ProblemSpec, tol: f64, quad_degree: usize) -> Result<ErrorReport> {
    let solution = solve_problem(mesh, spec, tol)?;
    let norms = error_norms(mesh, &solution.u, spec, quad_degree)?;
    let exact = spec.exact.as_ref().expect("checked by error_norms");
    let u = exact.displacement.clone();
    let interp = interpolate_exact(&move |p| u(p), mesh, spec.facet_degree);
    let diff: Vec<f64> = interp
        .coefficients()
        .iter()
        .zip(solution.u.coefficients())
        .map(|(a, b)| a - b)
        .collect();
    let (triple, one_h) = discrete_norms(mesh, &EgFunction::from_coefficients(&solution.dofs, diff)?);
    Ok(ErrorReport {
        h: mesh.nominal_h(),
        dofs: solution.dofs.total(),
        norms,
        triple,
        one_h,
        solve_seconds: solution.report.seconds,
    })
}

/// Exact field together with the body force that produces it.
#[derive(Clone)]
pub struct Manufactured {
    pub exact: ExactSolution,
    pub body_force: VectorField,
}

impl Manufactured {
    /// Pure Dirichlet problem driven by this solution.
    pub fn spec(&self, mu: f64, lambda: f64) -> Result<ProblemSpec> {
        let f = self.body_force.clone();
        Ok(ProblemSpec::new(mu, lambda)?
            .with_body_force(move |p| f(p))
            .with_exact(self.exact.clone()))
    }
}

/// `u = (sin x sin y + x/λ, cos x cos y + y/λ)` with `∇·u = 2/λ`.
pub fn smooth2d_solution(mu: f64, lambda: f64) -> Manufactured {
    let il = 1.0 / lambda;
    Manufactured {
        exact: ExactSolution {
            displacement: Arc::new(move |p| {
                let (x, y) = (p[0], p[1]);
                [x.sin() * y.sin() + x * il, x.cos() * y.cos() + y * il, 0.0]
            }),
            gradient: Arc::new(move |p| {
                let (sx, cx, sy, cy) = (p[0].sin(), p[0].cos(), p[1].sin(), p[1].cos());
                [[cx * sy + il, sx * cy, 0.0], [-sx * cy, -cx * sy + il, 0.0], [0.0; 3]]
            }),
        },
        body_force: Arc::new(move |p| {
            let (sx, cx, sy, cy) = (p[0].sin(), p[0].cos(), p[1].sin(), p[1].cos());
            [2.0 * mu * sx * sy, 2.0 * mu * cx * cy, 0.0]
        }),
    }
}

/// `u = (2 sin x sin y sin z + x/λ, cos x cos y sin z + y/λ, cos x sin y cos z + z/λ)`
/// with `∇·u = 3/λ`.
pub fn smooth3d_solution(mu: f64, lambda: f64) -> Manufactured {
    let il = 1.0 / lambda;
    let trig = |p: &Point| {
        let (sx, cx) = p[0].sin_cos();
        let (sy, cy) = p[1].sin_cos();
        let (sz, cz) = p[2].sin_cos();
        (sx, cx, sy, cy, sz, cz)
    };
    Manufactured {
        exact: ExactSolution {
            displacement: Arc::new(move |p| {
                let (sx, cx, sy, cy, sz, cz) = trig(p);
                [
                    2.0 * sx * sy * sz + p[0] * il,
                    cx * cy * sz + p[1] * il,
                    cx * sy * cz + p[2] * il,
                ]
            }),
            gradient: Arc::new(move |p| {
                let (sx, cx, sy, cy, sz, cz) = trig(p);
                [
                    [2.0 * cx * sy * sz + il, 2.0 * sx * cy * sz, 2.0 * sx * sy * cz],
                    [-sx * cy * sz, -cx * sy * sz + il, cx * cy * cz],
                    [-sx * sy * cz, cx * cy * cz, -cx * sy * sz + il],
                ]
            }),
        },
        body_force: Arc::new(move |p| {
            let (sx, cx, sy, cy, sz, cz) = trig(p);
            [6.0 * mu * sx * sy * sz, 3.0 * mu * cx * cy * sz, 3.0 * mu * cx * sy * cz]
        }),
    }
}

/// Corner singularity parameters of the L-shaped domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LShapeParams {
    pub gamma: f64,
    pub q: f64,
    pub k: f64,
    pub nu: f64,
}

pub const LSHAPE_GAMMA: f64 = 0.5444837367;
pub const LSHAPE_Q: f64 = 0.5430755688;

impl LShapeParams {
    pub fn new(mu: f64, lambda: f64) -> Self {
        let nu = lambda / (2.0 * (lambda + mu));
        LShapeParams {
            gamma: LSHAPE_GAMMA,
            q: LSHAPE_Q,
            k: 3.0 - 4.0 * nu,
            nu,
        }
    }

    /// `sin(3πγ/2) + γ sin(3π/2)`.
    pub fn gamma_residual(gamma: f64) -> f64 {
        (1.5 * PI * gamma).sin() + gamma * (1.5 * PI).sin()
    }

    /// Root of [`Self::gamma_residual`] in `[0.5, 0.6]` by bisection.
    pub fn solve_gamma() -> f64 {
        let (mut lo, mut hi) = (0.5, 0.6);
        let f_lo = Self::gamma_residual(lo);
        while hi - lo > 1e-15 {
            let mid = 0.5 * (lo + hi);
            if Self::gamma_residual(mid).signum() == f_lo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// `−cos((γ−1)3π/4) / cos((γ+1)3π/4)`, the orientation that reproduces
    /// the magnitude of [`LSHAPE_Q`]; the reciprocal is about 1.84.
    pub fn q_from_gamma(gamma: f64) -> f64 {
        -((gamma - 1.0) * 0.75 * PI).cos() / ((gamma + 1.0) * 0.75 * PI).cos()
    }

    fn polar(p: &Point) -> (f64, f64) {
        let r = p[0].hypot(p[1]);
        let mut theta = p[1].atan2(p[0]);
        if theta < 0.0 {
            theta += 2.0 * PI;
        }
        (r, theta)
    }

    // angular factors A, B and their θ-derivatives
    fn angular(&self, theta: f64) -> [f64; 4] {
        let (g, q, k) = (self.gamma, self.q, self.k);
        let (p, m) = ((1.0 + g) * theta, (1.0 - g) * theta);
        let a = -(1.0 + g) * p.cos() + (k - g) * q * m.cos();
        let b = (1.0 + g) * p.sin() - (k + g) * q * m.sin();
        let da = (1.0 + g).powi(2) * p.sin() - (k - g) * q * (1.0 - g) * m.sin();
        let db = (1.0 + g).powi(2) * p.cos() - (k + g) * q * (1.0 - g) * m.cos();
        [a, b, da, db]
    }

    /// Displacement; the corner value is the continuous limit zero.
    pub fn displacement(&self, p: &Point, mu: f64) -> Vector {
        let (r, theta) = Self::polar(p);
        if r == 0.0 {
            return [0.0; 3];
        }
        let [a, b, _, _] = self.angular(theta);
        let (s, c) = theta.sin_cos();
        let amp = r.powf(self.gamma) / (2.0 * mu);
        [amp * (c * a - s * b), amp * (s * a + c * b), 0.0]
    }

    /// Cartesian gradient by the polar chain rule.
    pub fn gradient(&self, p: &Point, mu: f64) -> Result<Tensor> {
        let (r, theta) = Self::polar(p);
        if r == 0.0 {
            return Err(Error::SingularPoint { x: p[0], y: p[1] });
        }
        let [a, b, da, db] = self.angular(theta);
        let (s, c) = theta.sin_cos();
        let amp = r.powf(self.gamma) / (2.0 * mu);
        let f = [c * a - s * b, s * a + c * b];
        let df = [-s * a + c * da - c * b - s * db, c * a + s * da - s * b + c * db];
        let mut g = [[0.0; 3]; 3];
        for i in 0..2 {
            let dr = self.gamma / r * amp * f[i];
            let dt = amp * df[i];
            g[i][0] = c * dr - s / r * dt;
            g[i][1] = s * dr + c / r * dt;
        }
        Ok(g)
    }
}

/// Exact singular solution on the L-shaped domain (zero body force).
pub fn lshape_solution(mu: f64, lambda: f64) -> (LShapeParams, Manufactured) {
    let params = LShapeParams::new(mu, lambda);
    let manufactured = Manufactured {
        exact: ExactSolution {
            displacement: Arc::new(move |p| params.displacement(p, mu)),
            // NaN at the corner; error_norms turns that into a singular-point error
            gradient: Arc::new(move |p| params.gradient(p, mu).unwrap_or([[f64::NAN; 3]; 3])),
        },
        body_force: Arc::new(|_| [0.0; 3]),
    };
    (params, manufactured)
}

/// `sqrt(½(σ11−σ22)² + ½(σ33−σ22)² + ½(σ11−σ33)² + 3σ12²)`.
pub fn von_mises_plane_strain(s11: f64, s22: f64, s33: f64, s12: f64) -> f64 {
    (0.5 * (s11 - s22).powi(2) + 0.5 * (s33 - s22).powi(2) + 0.5 * (s11 - s33).powi(2) + 3.0 * s12 * s12).sqrt()
}

/// Per-cell Von Mises stress of `σ_w(u_h)` with `σ33 = λ ∇_w·u_h`.
pub fn von_mises(mesh: &Mesh, u_h: &EgFunction, mu: f64, lambda: f64) -> Result<Vec<f64>> {
    if mesh.dim() != 2 {
        return Err(Error::Unsupported("Von Mises stress is defined for plane strain only".into()));
    }
    Ok((0..mesh.n_cells())
        .map(|c| {
            let s = weak_stress(mesh, u_h, c, mu, lambda);
            let s33 = lambda * weak_divergence(mesh, u_h, c);
            von_mises_plane_strain(s[0][0], s[1][1], s33, s[0][1])
        })
        .collect())
}

/// `max_T |∇_w·{·, Q_b(w·n_e)} − mean_T(∇·w)|`: facet means of `w·n_e` use a
/// rule of `facet_degree`, cell means of `div` a rule of `cell_degree`.
pub fn commutativity_residual(
    mesh: &Mesh,
    w: &dyn Fn(&Point) -> Vector,
    div: &dyn Fn(&Point) -> f64,
    facet_degree: usize,
    cell_degree: usize,
) -> Result<f64> {
    let v = interpolate_exact(w, mesh, facet_degree);
    let rule = simplex_rule(mesh.dim(), cell_degree)?;
    let mut worst: f64 = 0.0;
    for c in 0..mesh.n_cells() {
        let mean: f64 = rule.iter().map(|(b, wq)| wq * div(&mesh.cell_point(c, b))).sum();
        worst = worst.max((weak_divergence(mesh, &v, c) - mean).abs());
    }
    Ok(worst)
}

/// Divergence of an exact field, for use with [`commutativity_residual`].
pub fn exact_divergence(exact: &ExactSolution, dim: usize) -> impl Fn(&Point) -> f64 + '_ {
    move |p| trace(&(exact.gradient)(p), dim)
}

/// Number of DoFs of the discrete space on `mesh`.
pub fn dof_count(mesh: &Mesh) -> usize {
    DofMap::new(mesh).total()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{apply_dirichlet, assemble_load, assemble_matrix};
    use crate::geometry::ZERO;
    use crate::mesh::{cook_membrane, lshape, unit_cube, unit_square, COOK_LOAD};
    use crate::solver::{solve_system, DEFAULT_TOLERANCE};
    use crate::space::lift_cg;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // central differences of a vector field: column q is ∂u/∂x_q
    fn fd_gradient(u: &dyn Fn(&Point) -> Vector, p: &Point, dim: usize, h: f64) -> Tensor {
        let mut g = [[0.0; 3]; 3];
        for q in 0..dim {
            let (mut a, mut b) = (*p, *p);
            a[q] += h;
            b[q] -= h;
            let (ua, ub) = (u(&a), u(&b));
            for i in 0..dim {
                g[i][q] = (ua[i] - ub[i]) / (2.0 * h);
            }
        }
        g
    }

    // −∇·σ(u) by central differences of the analytic stress
    fn fd_body_force(exact: &ExactSolution, p: &Point, dim: usize, mu: f64, lambda: f64, h: f64) -> Vector {
        let mut f = [0.0; 3];
        for q in 0..dim {
            let (mut a, mut b) = (*p, *p);
            a[q] += h;
            b[q] -= h;
            let sa = hooke(&(exact.gradient)(&a), dim, mu, lambda);
            let sb = hooke(&(exact.gradient)(&b), dim, mu, lambda);
            for i in 0..dim {
                f[i] -= (sa[i][q] - sb[i][q]) / (2.0 * h);
            }
        }
        f
    }

    #[test]
    fn smooth2d_values_and_divergence() {
        let m = smooth2d_solution(1.0, 1.0);
        assert_eq!((m.exact.displacement)(&[0.0; 3]), [0.0, 1.0, 0.0]);
        let m6 = smooth2d_solution(1.0, 1e6);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let p = [rng.gen::<f64>(), rng.gen::<f64>(), 0.0];
            assert!((m6.exact.divergence(&p, 2) - 2e-6).abs() < 1e-15);
            let fd = fd_gradient(&*m6.exact.displacement, &p, 2, 1e-5);
            assert!((fd[0][0] + fd[1][1] - 2e-6).abs() < 1e-6);
        }
    }

    #[test]
    fn manufactured_gradients_and_forces_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (dim, make) in [(2, smooth2d_solution as fn(f64, f64) -> Manufactured), (3, smooth3d_solution)] {
            for (mu, lambda) in [(1.0, 1.0), (1.3, 1e6)] {
                let m = make(mu, lambda);
                for _ in 0..20 {
                    let mut p = [0.0; 3];
                    for x in p.iter_mut().take(dim) {
                        *x = rng.gen();
                    }
                    let fd = fd_gradient(&*m.exact.displacement, &p, dim, 1e-5);
                    let g = (m.exact.gradient)(&p);
                    for i in 0..dim {
                        for q in 0..dim {
                            assert!((fd[i][q] - g[i][q]).abs() < 1e-6);
                        }
                    }
                    let f = (m.body_force)(&p);
                    let f_fd = fd_body_force(&m.exact, &p, dim, mu, lambda, 1e-4);
                    for i in 0..dim {
                        assert!((f[i] - f_fd[i]).abs() < 1e-6, "dim {dim} λ {lambda}: {f:?} vs {f_fd:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn lshape_parameters_match_published_constants() {
        assert!(LShapeParams::gamma_residual(LSHAPE_GAMMA).abs() <= 1e-8);
        let gamma = LShapeParams::solve_gamma();
        assert!((gamma - LSHAPE_GAMMA).abs() < 1e-9);
        // the published Q agrees with the closed form to eight digits only
        let q = LShapeParams::q_from_gamma(gamma);
        assert!((q - LSHAPE_Q).abs() < 2e-8, "{q}");
        assert!((1.0 / q - 1.8413643311).abs() < 1e-9);
        let p = LShapeParams::new(1.0, 1e6);
        assert!((p.nu - 0.5).abs() < 1e-6 && (p.k - 1.0).abs() < 1e-5);
    }

    #[test]
    fn lshape_solution_gradient_and_equilibrium() {
        let (params, m) = lshape_solution(1.0, 1e6);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut checked = 0;
        while checked < 20 {
            let p: Point = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0];
            if (p[0] > 0.0 && p[1] < 0.0) || p[0].hypot(p[1]) < 0.1 {
                continue;
            }
            // keep the stencil off the θ = 0 / 2π branch cut
            if p[0] > 0.0 && p[1].abs() < 1e-3 {
                continue;
            }
            checked += 1;
            let fd = fd_gradient(&*m.exact.displacement, &p, 2, 1e-6);
            let g = params.gradient(&p, 1.0).unwrap();
            for i in 0..2 {
                for q in 0..2 {
                    assert!((fd[i][q] - g[i][q]).abs() < 1e-6, "{p:?}");
                }
            }
            // zero body force: −∇·σ vanishes up to the difference error
            let (mu, lambda) = (1.0, 10.0);
            let (_, soft) = lshape_solution(mu, lambda);
            let f = fd_body_force(&soft.exact, &p, 2, mu, lambda, 1e-4);
            assert!(f[0].abs() < 1e-5 && f[1].abs() < 1e-5, "{p:?}: {f:?}");
        }
        assert!(matches!(params.gradient(&[0.0; 3], 1.0), Err(Error::SingularPoint { .. })));
        assert_eq!(params.displacement(&[0.0; 3], 1.0), [0.0; 3]);
    }

    #[test]
    fn rates() {
        let r = convergence_rates(&[(1.0 / 8.0, 1.665e-3), (1.0 / 16.0, 3.882e-4)]).unwrap();
        assert!((r[1].unwrap() - 2.1010).abs() < 5e-4);
        let r = convergence_rates(&[(1.0, 4e-2), (0.5, 1e-2), (0.25, 5e-3), (0.125, 0.0)]).unwrap();
        assert_eq!(r[0], None);
        assert!((r[1].unwrap() - 2.0).abs() < 1e-14);
        assert!((r[2].unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(r[3], None);
        assert!(convergence_rates(&[(1.0, 1.0)]).is_err());
        assert!(convergence_rates(&[(0.5, 1.0), (0.5, 1.0)]).is_err());
    }

    #[test]
    fn von_mises_formula() {
        assert!(von_mises_plane_strain(2.0, 2.0, 2.0, 0.0).abs() < 1e-15);
        assert!((von_mises_plane_strain(0.0, 0.0, 0.0, 1.5) - 3f64.sqrt() * 1.5).abs() < 1e-15);
        assert!((von_mises_plane_strain(-4.0, 0.0, 0.0, 0.0) - 4.0).abs() < 1e-15);
        let mesh = unit_cube(1).unwrap();
        let u = EgFunction::zeros(&DofMap::new(&mesh));
        assert!(matches!(von_mises(&mesh, &u, 1.0, 1.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn zero_fields_have_zero_errors() {
        let mesh = unit_square(3).unwrap();
        let dofs = DofMap::new(&mesh);
        let spec = ProblemSpec::new(1.0, 1.0).unwrap().with_exact(ExactSolution {
            displacement: Arc::new(|_| ZERO),
            gradient: Arc::new(|_| [[0.0; 3]; 3]),
        });
        let u = EgFunction::zeros(&dofs);
        assert_eq!(
            error_norms(&mesh, &u, &spec, 4).unwrap(),
            ErrorNorms { l2: 0.0, h1: 0.0, stress: 0.0 }
        );
        assert_eq!(discrete_norms(&mesh, &u), (0.0, 0.0));
        assert!(matches!(
            error_norms(&mesh, &u, &ProblemSpec::new(1.0, 1.0).unwrap(), 4),
            Err(Error::Configuration(_))
        ));
        assert!(error_norms(&mesh, &u, &spec, 2).is_err());
    }

    #[test]
    fn discrete_norms_match_term_by_term_oracle() {
        let mesh = unit_square(4).unwrap();
        let dofs = DofMap::new(&mesh);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let coeffs: Vec<f64> = (0..dofs.total()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v = EgFunction::from_coefficients(&dofs, coeffs).unwrap();
        let (triple, one_h) = discrete_norms(&mesh, &v);
        // oracle: walk cells, recompute jumps from vertex values and normals
        let (mut t2, mut o2) = (0.0, 0.0);
        for c in 0..mesh.n_cells() {
            let mut jump = 0.0;
            for &f in mesh.cell_facets(c) {
                let [a, b] = [mesh.facet(f)[0], mesh.facet(f)[1]];
                let n = mesh.facet_normal(f);
                let (va, vb) = (v.vertex_value(a), v.vertex_value(b));
                let j = 0.5 * ((va[0] + vb[0]) * n[0] + (va[1] + vb[1]) * n[1]) - v.enrichment(f);
                jump += mesh.facet_area(f) * j * j;
            }
            jump /= mesh.cell_diameter(c);
            let ew = weak_strain(&mesh, &v, c);
            let g = v.cg_gradient(&mesh, c);
            let e0 = [g[0][0], 0.5 * (g[0][1] + g[1][0]), g[1][1]];
            t2 += mesh.cell_volume(c) * (ew[0][0].powi(2) + 2.0 * ew[0][1].powi(2) + ew[1][1].powi(2)) + jump;
            o2 += mesh.cell_volume(c) * (e0[0] * e0[0] + 2.0 * e0[1] * e0[1] + e0[2] * e0[2]) + jump;
        }
        assert!((triple - t2.sqrt()).abs() < 1e-12 * triple);
        assert!((one_h - o2.sqrt()).abs() < 1e-12 * one_h);
    }

    #[test]
    fn rigid_motions_have_zero_discrete_norms() {
        let mesh = unit_square(3).unwrap();
        let nodal: Vec<Vector> = mesh.points().iter().map(|p| [0.3 - p[1], -1.0 + p[0], 0.0]).collect();
        let v = lift_cg(&nodal, &mesh).unwrap();
        let (t, o) = discrete_norms(&mesh, &v);
        assert!(t < 1e-13 && o < 1e-13);
    }

    #[test]
    fn patch_test_reproduces_linear_fields() {
        let linear = ExactSolution {
            displacement: Arc::new(|p| [0.1 + 0.5 * p[0] - 0.3 * p[1] + 0.2 * p[2], -0.4 + 0.2 * p[0] + 0.7 * p[1], 0.3 * p[0] - 0.1 * p[2]]),
            gradient: Arc::new(|_| [[0.5, -0.3, 0.2], [0.2, 0.7, 0.0], [0.3, 0.0, -0.1]]),
        };
        for mesh in [unit_square(3).unwrap(), lshape(0).unwrap(), unit_cube(2).unwrap()] {
            for lambda in [1.0, 1e6] {
                let spec = ProblemSpec::new(1.0, lambda).unwrap().with_exact(linear.clone());
                let sol = solve_problem(&mesh, &spec, DEFAULT_TOLERANCE).unwrap();
                let e = error_norms(&mesh, &sol.u, &spec, 4).unwrap();
                assert!(e.l2 < 1e-9 && e.h1 < 1e-9 && e.stress < 1e-9 * lambda.max(1.0), "{e:?}");
                let u = linear.displacement.clone();
                let interp = interpolate_exact(&move |p| u(p), &mesh, 4);
                for (a, b) in interp.coefficients().iter().zip(sol.u.coefficients()) {
                    assert!((a - b).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn energy_identity_on_cook() {
        let mesh = cook_membrane(1).unwrap();
        let dofs = DofMap::new(&mesh);
        let spec = ProblemSpec::from_young_poisson(1.0, 1.0 / 3.0)
            .unwrap()
            .with_dirichlet(|_| ZERO)
            .with_neumann(|_, region| if region == COOK_LOAD { [0.0, 1.0 / 16.0, 0.0] } else { ZERO });
        let a = assemble_matrix(&mesh, &dofs, &spec);
        let b = assemble_load(&mesh, &dofs, &spec).unwrap();
        let sys = apply_dirichlet(&a, &b, &mesh, &dofs, &spec).unwrap();
        let (u, _) = solve_system(&sys, 1e-12).unwrap();
        let energy = a.quadratic_form(&u);
        let work: f64 = b.iter().zip(&u).map(|(b, u)| b * u).sum();
        assert!(energy > 0.0);
        assert!((energy - work).abs() <= 1e-10 * work);
    }

    #[test]
    fn commutativity_is_exact_for_polynomials() {
        let mesh = unit_square(4).unwrap();
        let r = commutativity_residual(&mesh, &|p| [p[0] * p[0], p[0] * p[1], 0.0], &|p| 3.0 * p[0], 2, 2).unwrap();
        assert!(r <= 1e-12);
        let r = commutativity_residual(&mesh, &|_| [1.0, -2.0, 0.0], &|_| 0.0, 1, 1).unwrap();
        assert!(r <= 1e-13);
    }

    #[test]
    fn commutativity_defect_shrinks_with_quadrature_degree() {
        let mesh = unit_square(16).unwrap();
        let m = smooth2d_solution(1.0, 1.0);
        let u = m.exact.displacement.clone();
        let div = exact_divergence(&m.exact, 2);
        let coarse = commutativity_residual(&mesh, &|p| u(p), &div, 1, 4).unwrap();
        let fine = commutativity_residual(&mesh, &|p| u(p), &div, 4, 4).unwrap();
        assert!(fine < coarse && fine < 1e-8, "{coarse} {fine}");
    }
}
