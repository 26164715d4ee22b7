//! Quadrature primitives shared by the integral-operator and asymptotics
//! pipelines: one-dimensional grids with fourth-order cumulative integration,
//! adaptive Simpson quadrature, Gauss–Legendre nodes and small fitting
//! helpers.

use crate::vec3::{self, Vec3};

/// A strictly increasing one-dimensional grid with precomputed per-interval
/// integration weights.
///
/// Cumulative integrals are formed interval by interval from the cubic
/// through a four-point stencil around each interval, which is exact for
/// cubics and fourth-order accurate on smooth integrands, on uniform and
/// graded grids alike.
#[derive(Debug, Clone)]
pub struct Grid1 {
    pub ts: Vec<f64>,
    /// Index of the node at `t = 0` when the grid straddles zero.
    pub zero_index: usize,
    /// Per-interval weights for the stencil `[i-1, i, i+1, i+2]` (clamped).
    weights: Vec<[f64; 4]>,
}

impl Grid1 {
    pub fn new(ts: Vec<f64>) -> Self {
        assert!(ts.len() >= 4, "grid needs at least 4 nodes");
        assert!(ts.windows(2).all(|w| w[1] > w[0]), "grid must increase");
        let zero_index = ts
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let weights = interval_weights(&ts);
        Grid1 {
            ts,
            zero_index,
            weights,
        }
    }

    /// Uniform grid of `n` nodes (made odd so that 0 is a node) over
    /// `[-half, half]`.
    pub fn symmetric(half: f64, n: usize) -> Self {
        let n = if n % 2 == 0 { n + 1 } else { n.max(5) };
        let h = 2.0 * half / (n - 1) as f64;
        let mid = (n - 1) / 2;
        let ts = (0..n).map(|i| (i as i64 - mid as i64) as f64 * h).collect();
        Self::new(ts)
    }

    /// Graded grid over `[t_lo, t_hi]` (both signs allowed) whose node
    /// spacing grows away from zero as `h0 · (1 + rate·|t|/scale)`.
    ///
    /// The spacing is smallest where integrands concentrate their mass and
    /// grows linearly with distance, so power-law tails cost only a
    /// logarithmic number of nodes.
    pub fn graded(t_lo: f64, t_hi: f64, h0: f64, scale: f64, rate: f64) -> Self {
        assert!(t_lo < 0.0 && t_hi > 0.0 && h0 > 0.0 && scale > 0.0);
        let spacing = |t: f64| h0 * (1.0 + rate * t.abs() / scale);
        let mut neg = vec![0.0f64];
        while *neg.last().unwrap() > t_lo {
            let t = *neg.last().unwrap();
            neg.push((t - spacing(t)).max(t_lo));
        }
        let mut ts: Vec<f64> = neg.into_iter().rev().collect();
        while *ts.last().unwrap() < t_hi {
            let t = *ts.last().unwrap();
            ts.push((t + spacing(t)).min(t_hi));
        }
        Self::new(ts)
    }

    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }

    /// Cumulative integral `F(t_j) = ∫_{t_0}^{t_j} f`, `F(t_0) = 0`.
    pub fn cumulative(&self, vals: &[Vec3]) -> Vec<Vec3> {
        assert_eq!(vals.len(), self.ts.len());
        let mut out = Vec::with_capacity(vals.len());
        let mut acc = vec3::ZERO;
        out.push(acc);
        for (i, w) in self.weights.iter().enumerate() {
            let s = stencil(i, vals.len());
            for (wj, &j) in w.iter().zip(s.iter()) {
                acc = vec3::axpy(acc, *wj, vals[j]);
            }
            out.push(acc);
        }
        out
    }

    /// Integral over the whole grid.
    pub fn integral(&self, vals: &[Vec3]) -> Vec3 {
        *self.cumulative(vals).last().unwrap()
    }

    /// Integral over the node subrange `[i0, i1]`.
    pub fn integral_range(&self, vals: &[Vec3], i0: usize, i1: usize) -> Vec3 {
        assert!(i0 <= i1 && i1 < self.ts.len());
        let mut acc = vec3::ZERO;
        for i in i0..i1 {
            let s = stencil(i, vals.len());
            for (wj, &j) in self.weights[i].iter().zip(s.iter()) {
                acc = vec3::axpy(acc, *wj, vals[j]);
            }
        }
        acc
    }

    /// Antisymmetric double integral of `m`:
    /// `∫_{-∞}^0 M(τ) dτ − ∫_0^{+∞} (M_tot − M(τ)) dτ` with `M = ∫_{-∞}^· m`,
    /// truncated to the grid.
    pub fn split_double(&self, m: &[Vec3]) -> Vec3 {
        let cum = self.cumulative(m);
        let total = *cum.last().unwrap();
        let left = self.integral_range(&cum, 0, self.zero_index);
        let right_vals: Vec<Vec3> = cum.iter().map(|c| vec3::sub(total, *c)).collect();
        let right = self.integral_range(&right_vals, self.zero_index, self.ts.len() - 1);
        vec3::sub(left, right)
    }
}

fn stencil(i: usize, n: usize) -> [usize; 4] {
    let lo = i.saturating_sub(1).min(n - 4);
    [lo, lo + 1, lo + 2, lo + 3]
}

/// Weights so that `∫_{t_i}^{t_{i+1}} p = Σ_j w_j f(t_{s_j})` exactly for the
/// cubic `p` through the stencil nodes. Two-point Gauss–Legendre integrates a
/// cubic exactly, so the weights are the Lagrange basis values there.
fn interval_weights(ts: &[f64]) -> Vec<[f64; 4]> {
    let n = ts.len();
    let gl = 1.0 / 3.0f64.sqrt();
    let mut weights = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        let s = stencil(i, n);
        let (a, b) = (ts[i], ts[i + 1]);
        let hw = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut w = [0.0; 4];
        for &g in &[mid - hw * gl, mid + hw * gl] {
            for j in 0..4 {
                let mut l = 1.0;
                for k in 0..4 {
                    if k != j {
                        l *= (g - ts[s[k]]) / (ts[s[j]] - ts[s[k]]);
                    }
                }
                w[j] += hw * l;
            }
        }
        weights.push(w);
    }
    weights
}

/// Collapsed per-node weights of the piecewise-cubic rule on a uniform grid
/// of `n` unit-spaced nodes: `∫ f ≈ h · Σ w[i] f(x₀ + i·h)`.
pub fn uniform_unit_weights(n: usize) -> Vec<f64> {
    let ts: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let per_interval = interval_weights(&ts);
    let mut w = vec![0.0; n];
    for (i, iw) in per_interval.iter().enumerate() {
        let s = stencil(i, n);
        for (wj, &j) in iw.iter().zip(s.iter()) {
            w[j] += *wj;
        }
    }
    w
}

/// Adaptive Simpson quadrature of a vector-valued integrand.
///
/// The first `min_depth` bisection levels are unconditional, so an integrand
/// supported on small subintervals (which the coarse samples may all miss)
/// cannot be skipped by a spuriously zero error estimate.
pub fn adaptive_simpson<F: Fn(f64) -> Vec3>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: u32,
    min_depth: u32,
) -> Vec3 {
    fn simpson(fa: Vec3, fm: Vec3, fb: Vec3, h: f64) -> Vec3 {
        vec3::scale(
            vec3::add(vec3::add(fa, fb), vec3::scale(fm, 4.0)),
            h / 6.0,
        )
    }
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> Vec3>(
        f: &F,
        a: f64,
        b: f64,
        fa: Vec3,
        fm: Vec3,
        fb: Vec3,
        whole: Vec3,
        tol: f64,
        depth: u32,
        force: u32,
    ) -> Vec3 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let sum = vec3::add(left, right);
        let err = vec3::norm(vec3::sub(sum, whole));
        if depth == 0 || (force == 0 && err <= 15.0 * tol) {
            // two-level Richardson correction
            return vec3::axpy(sum, 1.0 / 15.0, vec3::sub(sum, whole));
        }
        let nf = force.saturating_sub(1);
        let l = rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, nf);
        let r = rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, nf);
        vec3::add(l, r)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, b - a);
    rec(f, a, b, fa, fm, fb, whole, tol, max_depth, min_depth)
}

/// Scalar adaptive Simpson.
pub fn adaptive_simpson_scalar<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: u32,
    min_depth: u32,
) -> f64 {
    adaptive_simpson(&|t| [f(t), 0.0, 0.0], a, b, tol, max_depth, min_depth)[0]
}

/// Eight-point Gauss–Legendre nodes and weights on `[0, 1]`.
pub const GL8_01: [(f64, f64); 8] = [
    (0.019855071751231856, 0.05061426814518813),
    (0.10166676129318664, 0.11119051722668724),
    (0.2372337950418355, 0.15685332293894363),
    (0.40828267875217505, 0.18134189168918097),
    (0.591717321247825, 0.18134189168918097),
    (0.7627662049581645, 0.15685332293894363),
    (0.8983332387068134, 0.11119051722668724),
    (0.9801449282487682, 0.05061426814518813),
];

/// Four-point Lagrange basis weights at local coordinate `t ∈ [0, 1]`
/// between the two middle nodes of a uniform stencil.
pub fn lagrange4(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t - 1.0) * (t + 1.0) * (t - 2.0) / 2.0,
        -t * (t + 1.0) * (t - 2.0) / 2.0,
        t * (t - 1.0) * (t + 1.0) / 6.0,
    ]
}

/// Derivatives of the four-point Lagrange basis (per unit spacing).
pub fn lagrange4_deriv(t: f64) -> [f64; 4] {
    [
        -(3.0 * t * t - 6.0 * t + 2.0) / 6.0,
        (3.0 * t * t - 4.0 * t - 1.0) / 2.0,
        -(3.0 * t * t - 2.0 * t - 2.0) / 2.0,
        (3.0 * t * t - 1.0) / 6.0,
    ]
}

/// Cubic Hermite value on `[t0, t1]` from endpoint values and derivatives.
pub fn hermite(t: f64, t0: f64, y0: f64, d0: f64, t1: f64, y1: f64, d1: f64) -> f64 {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    y0 * (2.0 * s3 - 3.0 * s2 + 1.0)
        + d0 * h * (s3 - 2.0 * s2 + s)
        + y1 * (-2.0 * s3 + 3.0 * s2)
        + d1 * h * (s3 - s2)
}

/// Least-squares line `y ≈ intercept + slope·x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    (intercept, slope)
}

/// Slope of `log y` against `log x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    linear_fit(&lx, &ly).1
}
