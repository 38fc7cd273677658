//! Quadrature rules on the reference simplices.
//!
//! Points are stored in barycentric coordinates (padded to four entries) and
//! weights are normalized to sum to one, so an integral over a physical
//! simplex `S` is `|S| * Σ w_q f(x_q)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    /// Dimension of the simplex (1 = segment, 2 = triangle, 3 = tetrahedron).
    pub simplex_dim: usize,
    pub points: Vec<[f64; 4]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; 4], f64)> + '_ {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

/// Gauss-Legendre nodes and weights on [0, 1]; weights sum to one.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess, refined by Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1, 1] -> [0, 1]
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A rule on the `simplex_dim`-simplex exact for polynomials up to `degree`.
pub fn simplex_rule(simplex_dim: usize, degree: usize) -> Result<QuadratureRule> {
    match simplex_dim {
        1 => Ok(segment_rule(degree)),
        2 => Ok(triangle_rule(degree)),
        3 => Ok(tetrahedron_rule(degree)),
        _ => Err(Error::InvalidParameter(format!(
            "no quadrature for simplex dimension {simplex_dim}"
        ))),
    }
}

fn segment_rule(degree: usize) -> QuadratureRule {
    let n = (degree + 2) / 2;
    let (t, w) = gauss_legendre(n.max(1));
    QuadratureRule {
        simplex_dim: 1,
        points: t.iter().map(|&t| [1.0 - t, t, 0.0, 0.0]).collect(),
        weights: w,
    }
}

fn triangle_rule(degree: usize) -> QuadratureRule {
    let sym3 = |a: f64| {
        let b = 1.0 - 2.0 * a;
        [[a, a, b, 0.0], [a, b, a, 0.0], [b, a, a, 0.0]]
    };
    match degree {
        0 | 1 => QuadratureRule {
            simplex_dim: 2,
            points: vec![[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0]],
            weights: vec![1.0],
        },
        2 => QuadratureRule {
            simplex_dim: 2,
            points: sym3(1.0 / 6.0).to_vec(),
            weights: vec![1.0 / 3.0; 3],
        },
        // Dunavant, 6 points, degree 4
        3 | 4 => {
            let mut points = sym3(0.445_948_490_915_964_886_32).to_vec();
            points.extend(sym3(0.091_576_213_509_770_743_46));
            let mut weights = vec![0.223_381_589_678_011_465_70; 3];
            weights.extend([0.109_951_743_655_321_867_64; 3]);
            QuadratureRule {
                simplex_dim: 2,
                points,
                weights,
            }
        }
        // Radon, 7 points, degree 5
        5 => {
            let s15 = 15f64.sqrt();
            let mut points = vec![[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0]];
            points.extend(sym3((6.0 - s15) / 21.0));
            points.extend(sym3((6.0 + s15) / 21.0));
            let mut weights = vec![9.0 / 40.0];
            weights.extend([(155.0 - s15) / 1200.0; 3]);
            weights.extend([(155.0 + s15) / 1200.0; 3]);
            QuadratureRule {
                simplex_dim: 2,
                points,
                weights,
            }
        }
        _ => collapsed_triangle(degree),
    }
}

/// Duffy-collapsed tensor Gauss rule on the triangle.
fn collapsed_triangle(degree: usize) -> QuadratureRule {
    let n = (degree + 3) / 2;
    let (g, w) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (s, ws) in g.iter().zip(&w) {
        for (t, wt) in g.iter().zip(&w) {
            let xi = *s;
            let eta = (1.0 - s) * t;
            points.push([1.0 - xi - eta, xi, eta, 0.0]);
            weights.push(2.0 * ws * wt * (1.0 - s));
        }
    }
    QuadratureRule {
        simplex_dim: 2,
        points,
        weights,
    }
}

fn tetrahedron_rule(degree: usize) -> QuadratureRule {
    match degree {
        0 | 1 => QuadratureRule {
            simplex_dim: 3,
            points: vec![[0.25; 4]],
            weights: vec![1.0],
        },
        2 => {
            let a = (5.0 + 3.0 * 5f64.sqrt()) / 20.0;
            let b = (5.0 - 5f64.sqrt()) / 20.0;
            QuadratureRule {
                simplex_dim: 3,
                points: vec![[a, b, b, b], [b, a, b, b], [b, b, a, b], [b, b, b, a]],
                weights: vec![0.25; 4],
            }
        }
        _ => collapsed_tetrahedron(degree),
    }
}

fn collapsed_tetrahedron(degree: usize) -> QuadratureRule {
    let n = (degree + 4) / 2;
    let (g, w) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n * n);
    let mut weights = Vec::with_capacity(n * n * n);
    for (s, ws) in g.iter().zip(&w) {
        for (t, wt) in g.iter().zip(&w) {
            for (u, wu) in g.iter().zip(&w) {
                let xi = *s;
                let eta = (1.0 - s) * t;
                let zeta = (1.0 - s) * (1.0 - t) * u;
                points.push([1.0 - xi - eta - zeta, xi, eta, zeta]);
                weights.push(6.0 * ws * wt * wu * (1.0 - s) * (1.0 - s) * (1.0 - t));
            }
        }
    }
    QuadratureRule {
        simplex_dim: 3,
        points,
        weights,
    }
}
