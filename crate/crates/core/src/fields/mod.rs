//! Electromagnetic field models.
//!
//! A field is a potential `V: ℝⁿ → ℝ` together with an antisymmetric magnetic
//! matrix `B(x)`, both with exact (never finite-differenced) derivatives, a
//! power-law decay envelope, and an effective support radius beyond which the
//! field is numerically negligible. The magnetic matrix is stored through its
//! strictly upper-triangular components so antisymmetry holds by construction.

mod families;

pub use families::{BumpField, GaussianField, PotentialField3, ScaledField, ZeroField};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::vec3::{self, Mat3, Vec3};

/// Declared decay envelope: `|∂^j V| ≤ β_{|j|} (1+|x|)^{-α-|j|}` for
/// `|j| ≤ 2` and `|∂^j B_{i,k}| ≤ β_{|j|+1} (1+|x|)^{-α-1-|j|}` for `|j| ≤ 1`.
#[derive(Debug, Clone, Copy)]
pub struct Envelope {
    pub alpha: f64,
    /// `[β₀, β₁, β₂]`
    pub beta: [f64; 3],
}

impl Envelope {
    /// Bound on the force magnitude scale at distance `d` from the origin,
    /// used for asymptote entry/exit tests and quadrature tail reports.
    pub fn force_bound(&self, d: f64, speed: f64) -> f64 {
        self.beta[1] * (1.0 + speed) * (1.0 + d).powf(-self.alpha - 1.0)
    }

    /// Bound on the discarded mass of `∫_L^∞ (1+σ)^{-α-1} dσ` scaled by `β₁`.
    pub fn tail_mass(&self, cutoff: f64) -> f64 {
        self.beta[1] * (1.0 + cutoff).powf(-self.alpha) / self.alpha
    }
}

/// Evaluatable field model. All methods are pure; implementors are immutable
/// after construction and safe to share across threads.
pub trait FieldModel: Send + Sync {
    fn dim(&self) -> usize;
    fn potential(&self, x: Vec3) -> f64;
    fn grad_v(&self, x: Vec3) -> Vec3;
    fn hess_v(&self, x: Vec3) -> Mat3;
    /// Strictly upper components `[B₀₁, B₀₂, B₁₂]` (only `B₀₁` for `n = 2`).
    fn b_upper(&self, x: Vec3) -> [f64; 3];
    /// Gradient of the component `B_{i,k}`; antisymmetric in `(i, k)`.
    fn grad_b(&self, x: Vec3, i: usize, k: usize) -> Vec3;
    fn envelope(&self) -> Envelope;
    /// Radius beyond which every field quantity is numerically negligible.
    fn support_radius(&self) -> f64;
}

/// Shared, immutable handle to a field model.
#[derive(Clone)]
pub struct Field {
    model: Arc<dyn FieldModel>,
}

/// All field quantities at one point.
#[derive(Debug, Clone)]
pub struct FieldSample {
    pub x: Vec3,
    pub v: f64,
    pub grad_v: Vec3,
    pub b: Mat3,
    /// `grad_b[i][k] = ∇B_{i,k}`; antisymmetric in `(i, k)`, zero diagonal.
    pub grad_b: [[Vec3; 3]; 3],
}

impl Field {
    pub fn new(model: impl FieldModel + 'static) -> Self {
        Field {
            model: Arc::new(model),
        }
    }

    pub fn zero(n: usize) -> Self {
        Field::new(ZeroField { n })
    }

    /// Radial Gaussian potential and (for `n = 2`) radial Gaussian `B₁,₂`.
    pub fn gaussian(n: usize, amp_v: f64, amp_b: f64) -> Self {
        Field::new(GaussianField::new(n, amp_v, amp_b))
    }

    /// Compactly supported smooth bump potential and (for `n = 2`) bump
    /// `B₁,₂`, supported in the ball of the given radius.
    pub fn bump(n: usize, amp_v: f64, amp_b: f64, radius: f64) -> Self {
        Field::new(BumpField::new(n, amp_v, amp_b, radius))
    }

    /// `n = 3` field with `B` built from the Gaussian vector potential
    /// `A_k(x) = c_k e^{-|x|²}`, so the closure identity holds structurally.
    pub fn potential3(amp_v: f64, coef: Vec3) -> Self {
        Field::new(PotentialField3::new(amp_v, coef))
    }

    /// The same field with `V` and `B` multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Field::new(ScaledField::new(self.model.clone(), factor))
    }

    /// The same field with the potential removed (`V ≡ 0`, `B` unchanged).
    pub fn magnetic_only(&self) -> Self {
        Field::new(families::MagneticOnly::new(self.model.clone()))
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn potential(&self, x: Vec3) -> f64 {
        self.model.potential(x)
    }

    pub fn grad_v(&self, x: Vec3) -> Vec3 {
        self.model.grad_v(x)
    }

    pub fn hess_v(&self, x: Vec3) -> Mat3 {
        self.model.hess_v(x)
    }

    pub fn envelope(&self) -> Envelope {
        self.model.envelope()
    }

    pub fn support_radius(&self) -> f64 {
        self.model.support_radius()
    }

    pub fn grad_b(&self, x: Vec3, i: usize, k: usize) -> Vec3 {
        self.model.grad_b(x, i, k)
    }

    /// Full antisymmetric matrix assembled from the upper components.
    pub fn b_matrix(&self, x: Vec3) -> Mat3 {
        let u = self.model.b_upper(x);
        let mut m = vec3::ZERO_MAT;
        m[0][1] = u[0];
        m[1][0] = -u[0];
        if self.dim() == 3 {
            m[0][2] = u[1];
            m[2][0] = -u[1];
            m[1][2] = u[2];
            m[2][1] = -u[2];
        }
        m
    }

    /// `B(x)·θ` without materializing the matrix.
    pub fn b_apply(&self, x: Vec3, theta: Vec3) -> Vec3 {
        let u = self.model.b_upper(x);
        if self.dim() == 2 {
            [u[0] * theta[1], -u[0] * theta[0], 0.0]
        } else {
            [
                u[0] * theta[1] + u[1] * theta[2],
                -u[0] * theta[0] + u[2] * theta[2],
                -u[1] * theta[0] - u[2] * theta[1],
            ]
        }
    }

    /// Newton force `F(x, v) = -∇V(x) + B(x)v`.
    pub fn force(&self, x: Vec3, v: Vec3) -> Vec3 {
        vec3::sub(self.b_apply(x, v), self.grad_v(x))
    }

    /// Evaluates every field quantity at `x`. Rejects non-finite input.
    pub fn sample(&self, x: Vec3) -> Result<FieldSample> {
        if !vec3::is_finite(x) {
            return Err(Error::NonFinite("field evaluation point"));
        }
        let n = self.dim();
        let mut grad_b = [[vec3::ZERO; 3]; 3];
        for i in 0..n {
            for k in (i + 1)..n {
                let g = self.model.grad_b(x, i, k);
                grad_b[i][k] = g;
                grad_b[k][i] = vec3::scale(g, -1.0);
            }
        }
        Ok(FieldSample {
            x,
            v: self.potential(x),
            grad_v: self.grad_v(x),
            b: self.b_matrix(x),
            grad_b,
        })
    }
}

/// Residual report of the closure identity
/// `∂_l B_{i,k} + ∂_k B_{l,i} + ∂_i B_{k,l} = 0` over a sample set.
#[derive(Debug, Clone)]
pub struct ClosureReport {
    pub max_residual: f64,
    pub worst_point: Vec3,
    pub tolerance: f64,
    pub pass: bool,
}

/// Maximum cyclic-sum residual over all points and index triples `(l, i, k)`.
pub fn check_closure(field: &Field, points: &[Vec3]) -> Result<ClosureReport> {
    if points.is_empty() {
        return Err(Error::Domain("closure check needs sample points".into()));
    }
    let n = field.dim();
    if n < 2 {
        return Err(Error::Domain("closure check needs n ≥ 2".into()));
    }
    let tolerance = 1e-10;
    let mut max_residual: f64 = 0.0;
    let mut worst_point = points[0];
    for &x in points {
        let s = field.sample(x)?;
        for l in 0..n {
            for i in 0..n {
                for k in 0..n {
                    let r = (s.grad_b[i][k][l] + s.grad_b[l][i][k] + s.grad_b[k][l][i]).abs();
                    if r > max_residual {
                        max_residual = r;
                        worst_point = x;
                    }
                }
            }
        }
    }
    Ok(ClosureReport {
        max_residual,
        worst_point,
        tolerance,
        pass: max_residual <= tolerance,
    })
}

/// Outcome of validating the declared decay envelope on a sample grid.
#[derive(Debug, Clone)]
pub struct DecayReport {
    /// Tightest constants observed on the grid: `[β̂₀, β̂₁, β̂₂]`.
    pub observed: [f64; 3],
    pub declared: [f64; 3],
    pub alpha: f64,
    pub radius: f64,
    pub pass: bool,
    /// Worst sample point per constant.
    pub worst: [Vec3; 3],
}

/// Scans a Cartesian grid of `density^n` points over `[-radius, radius]^n`
/// and reports the tightest envelope constants observed; passes when the
/// field's declared constants dominate them.
pub fn estimate_decay(field: &Field, alpha: f64, radius: f64, density: usize) -> Result<DecayReport> {
    if alpha <= 1.0 {
        return Err(Error::Domain(format!("decay exponent α = {alpha} must exceed 1")));
    }
    if radius <= 0.0 || density < 2 {
        return Err(Error::Domain("decay scan needs radius > 0, density ≥ 2".into()));
    }
    let n = field.dim();
    let mut observed = [0.0f64; 3];
    let mut worst = [vec3::ZERO; 3];
    let coord = |i: usize| -radius + 2.0 * radius * i as f64 / (density - 1) as f64;
    let total = density.pow(n as u32);
    for flat in 0..total {
        let mut x = vec3::ZERO;
        let mut rem = flat;
        for a in 0..n {
            x[a] = coord(rem % density);
            rem /= density;
        }
        let s = field.sample(x)?;
        let hess = field.hess_v(x);
        let d = 1.0 + vec3::norm(x);
        let w0 = s.v.abs() * d.powf(alpha);
        let mut w1 = vec3::norm_inf(s.grad_v);
        let mut w2 = 0.0f64;
        for i in 0..n {
            for k in 0..n {
                w2 = w2.max(hess[i][k].abs());
                if i < k {
                    w1 = w1.max(s.b[i][k].abs());
                    w2 = w2.max(vec3::norm_inf(s.grad_b[i][k]));
                }
            }
        }
        let w1 = w1 * d.powf(alpha + 1.0);
        let w2 = w2 * d.powf(alpha + 2.0);
        for (slot, w) in [w0, w1, w2].iter().enumerate() {
            if *w > observed[slot] {
                observed[slot] = *w;
                worst[slot] = x;
            }
        }
    }
    let declared = field.envelope().beta;
    let slack = 1.0 + 1e-9;
    let pass = (0..3).all(|i| declared[i] * slack >= observed[i]);
    Ok(DecayReport {
        observed,
        declared,
        alpha,
        radius,
        pass,
        worst,
    })
}
