//! Fixed-size vector helpers shared by the 2D and 3D code paths.
//!
//! Points and vectors always carry three components; in 2D the third one is
//! zero. Tensors are 3×3 with only the leading `dim × dim` block in use.

pub type Point = [f64; 3];
pub type Vector = [f64; 3];
pub type Tensor = [[f64; 3]; 3];

pub const ZERO: Vector = [0.0; 3];
pub const ZERO_TENSOR: Tensor = [[0.0; 3]; 3];

#[inline]
pub fn add(a: &Vector, b: &Vector) -> Vector {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: &Vector, b: &Vector) -> Vector {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: &Vector, s: f64) -> Vector {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: &Vector, b: &Vector) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: &Vector, b: &Vector) -> Vector {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: &Vector) -> f64 {
    dot(a, a).sqrt()
}

pub fn identity(dim: usize) -> Tensor {
    let mut t = ZERO_TENSOR;
    for (i, row) in t.iter_mut().enumerate().take(dim) {
        row[i] = 1.0;
    }
    t
}

pub fn trace(t: &Tensor, dim: usize) -> f64 {
    (0..dim).map(|i| t[i][i]).sum()
}

pub fn sym(t: &Tensor) -> Tensor {
    let mut s = ZERO_TENSOR;
    for i in 0..3 {
        for j in 0..3 {
            s[i][j] = 0.5 * (t[i][j] + t[j][i]);
        }
    }
    s
}

/// `2 μ sym(grad) + λ tr(grad) I` restricted to the leading `dim` block.
pub fn hooke(grad: &Tensor, dim: usize, mu: f64, lambda: f64) -> Tensor {
    let eps = sym(grad);
    let div = trace(grad, dim);
    let mut s = ZERO_TENSOR;
    for i in 0..dim {
        for j in 0..dim {
            s[i][j] = 2.0 * mu * eps[i][j];
        }
        s[i][i] += lambda * div;
    }
    s
}

pub fn frobenius_sq(t: &Tensor) -> f64 {
    t.iter().flatten().map(|v| v * v).sum()
}

pub fn tensor_sub(a: &Tensor, b: &Tensor) -> Tensor {
    let mut c = ZERO_TENSOR;
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = a[i][j] - b[i][j];
        }
    }
    c
}

pub fn mat_vec(t: &Tensor, v: &Vector) -> Vector {
    [dot(&t[0], v), dot(&t[1], v), dot(&t[2], v)]
}
