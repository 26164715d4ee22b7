//! Fixed-capacity vectors and matrices for points in dimension 2 or 3.
//!
//! The physical dimension `n` is 2 or 3 at runtime. Vectors are stored as
//! `[f64; 3]` with unused trailing components kept at exactly zero, so the
//! arithmetic helpers below are dimension-agnostic: they always run over the
//! full three components and padding zeros drop out.

/// Point or vector in `ℝⁿ`, `n ≤ 3`, zero-padded.
pub type Vec3 = [f64; 3];

/// Row-major `3×3` matrix, zero-padded outside the active `n×n` block.
pub type Mat3 = [[f64; 3]; 3];

pub const ZERO: Vec3 = [0.0; 3];
pub const ZERO_MAT: Mat3 = [[0.0; 3]; 3];

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: Vec3, c: f64) -> Vec3 {
    [a[0] * c, a[1] * c, a[2] * c]
}

/// `a + c·b`
#[inline]
pub fn axpy(a: Vec3, c: f64, b: Vec3) -> Vec3 {
    [a[0] + c * b[0], a[1] + c * b[1], a[2] + c * b[2]]
}

#[inline]
pub fn matvec(m: &Mat3, v: Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

#[inline]
pub fn norm_inf(a: Vec3) -> f64 {
    a[0].abs().max(a[1].abs()).max(a[2].abs())
}

pub fn is_finite(a: Vec3) -> bool {
    a.iter().all(|c| c.is_finite())
}

/// Unit vector along `a`; returns `None` for the zero vector.
pub fn normalize(a: Vec3) -> Option<Vec3> {
    let n = norm(a);
    if n == 0.0 {
        None
    } else {
        Some(scale(a, 1.0 / n))
    }
}

/// Angle in radians between two nonzero vectors.
pub fn angle_between(a: Vec3, b: Vec3) -> f64 {
    let c = dot(a, b) / (norm(a) * norm(b));
    c.clamp(-1.0, 1.0).acos()
}

/// Projects `x` onto the orthogonal complement of `v` (`v ≠ 0`).
pub fn reject_from(x: Vec3, v: Vec3) -> Vec3 {
    let c = dot(x, v) / dot(v, v);
    sub(x, scale(v, c))
}

/// Embeds the first `n` coordinates of a slice, padding with zeros.
pub fn from_slice(s: &[f64]) -> Vec3 {
    let mut out = ZERO;
    for (o, v) in out.iter_mut().zip(s.iter()) {
        *o = *v;
    }
    out
}
