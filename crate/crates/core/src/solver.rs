//! Solution of the reduced symmetric positive definite system.
//!
//! The default path is a sparse Cholesky factorization followed by a few
//! steps of iterative refinement. Jacobi-preconditioned conjugate gradients
//! serve as the fallback when the factorization fails.
//!
//! A solve succeeds when `‖b − Ax‖ ≤ tol ‖b‖`, or when the componentwise
//! backward error `max_i |b − Ax|_i / (|A||x| + |b|)_i` is at rounding level.
//! The second test matters for nearly incompressible problems driven by
//! tractions: there `|A||x|` exceeds `|b|` by many orders of magnitude and
//! even the exactly rounded solution has a relative residual far above 1e-10.

use std::fmt;
use std::time::Instant;

use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Col, Side};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{apply_dirichlet, assemble_load, assemble_matrix, ProblemSpec, SparseSystem};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::space::{DofMap, EgFunction};
use crate::sparse::CsrMatrix;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
const MAX_REFINEMENT_STEPS: usize = 10;
/// Componentwise backward error accepted as converged.
pub const BACKWARD_ERROR_FLOOR: f64 = 1e3 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Direct,
    Iterative,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Direct => "direct",
            Method::Iterative => "iterative",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub method: Method,
    /// CG iterations, or refinement steps after a direct solve.
    pub iterations: usize,
    /// `‖b − Ax‖ / ‖b‖`.
    pub relative_residual: f64,
    /// `max_i |b − Ax|_i / (|A||x| + |b|)_i`.
    pub backward_error: f64,
    pub seconds: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    let ax = a.mul_vec(x);
    b.iter().zip(&ax).map(|(b, ax)| b - ax).collect()
}

/// Componentwise backward error of `x`.
pub fn backward_error(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, &bi) in b.iter().enumerate() {
        let (mut ax, mut scale) = (0.0, bi.abs());
        for (j, v) in a.row(i) {
            ax += v * x[j];
            scale += (v * x[j]).abs();
        }
        let r = (bi - ax).abs();
        if r > 0.0 {
            worst = worst.max(if scale > 0.0 { r / scale } else { f64::INFINITY });
        }
    }
    worst
}

struct Attempt {
    x: Vec<f64>,
    iterations: usize,
    relative_residual: f64,
    backward_error: f64,
}

impl Attempt {
    fn converged(&self, tol: f64) -> bool {
        self.relative_residual <= tol || self.backward_error <= BACKWARD_ERROR_FLOOR
    }

    fn report(self, method: Method, start: Instant) -> (Vec<f64>, SolveReport) {
        (
            self.x,
            SolveReport {
                method,
                iterations: self.iterations,
                relative_residual: self.relative_residual,
                backward_error: self.backward_error,
                seconds: start.elapsed().as_secs_f64(),
            },
        )
    }
}

fn check_inputs(a: &CsrMatrix, b: &[f64], tol: f64) -> Result<()> {
    if b.len() != a.n() {
        return Err(Error::LengthMismatch {
            expected: a.n(),
            actual: b.len(),
        });
    }
    if !(tol > 0.0 && tol <= 1e-6) {
        return Err(Error::InvalidParameter(format!("solver tolerance {tol} outside (0, 1e-6]")));
    }
    Ok(())
}

/// Solves `A x = b` to relative residual `tol`: Cholesky first, then PCG.
pub fn solve_spd(a: &CsrMatrix, b: &[f64], tol: f64) -> Result<(Vec<f64>, SolveReport)> {
    check_inputs(a, b, tol)?;
    let start = Instant::now();
    if a.n() == 0 || norm(b) == 0.0 {
        let zero = Attempt {
            x: vec![0.0; a.n()],
            iterations: 0,
            relative_residual: 0.0,
            backward_error: 0.0,
        };
        return Ok(zero.report(Method::Direct, start));
    }
    let direct = cholesky(a, b, tol);
    if let Ok(attempt) = &direct {
        if attempt.converged(tol) {
            return Ok(direct.expect("checked").report(Method::Direct, start));
        }
    }
    let (x0, stalled) = match &direct {
        Ok(attempt) => (Some(attempt.x.as_slice()), Some(attempt.relative_residual)),
        Err(_) => (None, None),
    };
    let attempt = pcg_attempt(a, b, x0, tol).map_err(|e| match (e, stalled) {
        (Error::SolverFailure { reason, best_residual }, Some(rel)) => Error::SolverFailure {
            reason: format!("{reason}; direct solve stalled at {rel:.3e}"),
            best_residual: best_residual.min(rel),
        },
        (e, _) => e,
    })?;
    Ok(attempt.report(Method::Iterative, start))
}

/// Solves the reduced system and returns the full coefficient vector.
pub fn solve_system(system: &SparseSystem, tol: f64) -> Result<(Vec<f64>, SolveReport)> {
    let (x, report) = solve_spd(&system.matrix, &system.rhs, tol)?;
    Ok((system.expand(&x)?, report))
}

/// A solved discrete problem.
#[derive(Debug, Clone)]
pub struct Solution {
    pub dofs: DofMap,
    pub u: EgFunction,
    pub report: SolveReport,
}

/// Assembles, eliminates the Dirichlet data and solves.
pub fn solve_problem(mesh: &Mesh, spec: &ProblemSpec, tol: f64) -> Result<Solution> {
    let dofs = DofMap::new(mesh);
    let a = assemble_matrix(mesh, &dofs, spec);
    let b = assemble_load(mesh, &dofs, spec)?;
    let system = apply_dirichlet(&a, &b, mesh, &dofs, spec)?;
    let (coeffs, report) = solve_system(&system, tol)?;
    let u = EgFunction::from_coefficients(&dofs, coeffs)?;
    Ok(Solution { dofs, u, report })
}

/// Sparse Cholesky with iterative refinement until the residual meets
/// `tol`, the backward error reaches rounding level, or refinement stalls.
fn cholesky(a: &CsrMatrix, b: &[f64], tol: f64) -> Result<Attempt> {
    let n = a.n();
    let mut triplets = Vec::with_capacity(a.nnz() / 2 + n);
    for i in 0..n {
        for (j, v) in a.row(i) {
            if j <= i {
                triplets.push(Triplet::new(i, j, v));
            }
        }
    }
    let failure = |reason: String| Error::SolverFailure {
        reason,
        best_residual: 1.0,
    };
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| failure(format!("sparse matrix construction failed: {e:?}")))?;
    let llt = mat
        .sp_cholesky(Side::Lower)
        .map_err(|e| failure(format!("Cholesky factorization failed: {e:?}")))?;

    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut best: Option<Attempt> = None;
    for step in 0..=MAX_REFINEMENT_STEPS {
        let rhs = Col::from_fn(n, |i| r[i]);
        let dx = llt.solve(&rhs);
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += dx[i];
        }
        r = residual(a, &x, b);
        let rel = norm(&r) / bnorm;
        if !rel.is_finite() {
            return Err(failure("non-finite residual after Cholesky solve".into()));
        }
        let attempt = Attempt {
            x: x.clone(),
            iterations: step,
            relative_residual: rel,
            backward_error: backward_error(a, &x, b),
        };
        if attempt.converged(tol) {
            return Ok(attempt);
        }
        match &best {
            // refinement no longer helps
            Some(prev) if prev.relative_residual <= rel => break,
            _ => best = Some(attempt),
        }
    }
    Ok(best.expect("at least one refinement step"))
}

fn pcg_attempt(a: &CsrMatrix, b: &[f64], x0: Option<&[f64]>, tol: f64) -> Result<Attempt> {
    let (x, iterations, relative_residual) = pcg(a, b, x0, tol)?;
    let backward_error = backward_error(a, &x, b);
    Ok(Attempt {
        x,
        iterations,
        relative_residual,
        backward_error,
    })
}

/// Jacobi-preconditioned conjugate gradients with iteration cap `20 √n`.
/// Stops on relative residual `tol` or rounding-level backward error.
pub fn pcg(a: &CsrMatrix, b: &[f64], x0: Option<&[f64]>, tol: f64) -> Result<(Vec<f64>, usize, f64)> {
    let n = a.n();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], 0, 0.0));
    }
    let diag = a.diagonal();
    if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::SolverFailure {
            reason: format!("non-positive diagonal entry at row {i}"),
            best_residual: 1.0,
        });
    }
    let cap = (20.0 * (n as f64).sqrt()).ceil() as usize;
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = residual(a, &x, b);
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(r, z)| r * z).sum();
    let mut ap = vec![0.0; n];
    let mut best = norm(&r) / bnorm;
    if best <= tol {
        return Ok((x, 0, best));
    }
    for it in 1..=cap {
        a.mul_vec_into(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(p, q)| p * q).sum();
        if !(pap > 0.0) {
            return Err(Error::SolverFailure {
                reason: format!("conjugate gradients broke down (pᵀAp = {pap:e}) at iteration {it}"),
                best_residual: best,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = norm(&r) / bnorm;
        best = best.min(rel);
        if rel <= tol || it % 16 == 0 {
            // confirm with the true residual
            let true_rel = norm(&residual(a, &x, b)) / bnorm;
            if true_rel <= tol || backward_error(a, &x, b) <= BACKWARD_ERROR_FLOOR {
                return Ok((x, it, true_rel));
            }
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(r, z)| r * z).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::SolverFailure {
        reason: format!("conjugate gradients hit the iteration cap {cap}"),
        best_residual: best,
    })
}

/// Extreme Ritz values of `A` after `steps` Lanczos iterations with full
/// reorthogonalization, started from a seeded random vector.
pub fn lanczos_extremes(a: &CsrMatrix, steps: usize, seed: u64) -> (f64, f64) {
    let n = a.n();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let m = steps.min(n).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let qn = norm(&q);
    q.iter_mut().for_each(|x| *x /= qn);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alpha = Vec::with_capacity(m);
    let mut beta: Vec<f64> = Vec::with_capacity(m);
    for k in 0..m {
        let mut w = a.mul_vec(&basis[k]);
        let ak: f64 = w.iter().zip(&basis[k]).map(|(w, q)| w * q).sum();
        alpha.push(ak);
        // two passes of Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for qj in &basis {
                let c: f64 = w.iter().zip(qj).map(|(w, q)| w * q).sum();
                w.iter_mut().zip(qj).for_each(|(w, q)| *w -= c * q);
            }
        }
        let bk = norm(&w);
        if k + 1 == m || bk <= 1e-14 * ak.abs().max(1.0) {
            break;
        }
        beta.push(bk);
        basis.push(w.into_iter().map(|x| x / bk).collect());
    }
    let k = alpha.len();
    let t = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t).eigenvalues;
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}
