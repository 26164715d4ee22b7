//! Built-in analytic field families.
//!
//! Every derivative is written out in closed form; the decay-envelope
//! constants are declared at construction by maximizing the corresponding
//! radial profile, so `estimate_decay` acts as an independent validator
//! rather than the source of the constants.

use std::sync::Arc;

use super::{Envelope, FieldModel};
use crate::vec3::{self, Mat3, Vec3};

/// Maximum of a nonnegative radial profile on `[0, hi]`: coarse scan plus
/// golden-section refinement around the best cell.
fn radial_max(f: impl Fn(f64) -> f64, hi: f64) -> f64 {
    let n = 512usize;
    let mut best_i = 0usize;
    let mut best = f64::MIN;
    for i in 0..=n {
        let r = hi * i as f64 / n as f64;
        let v = f(r);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let mut a = hi * best_i.saturating_sub(1) as f64 / n as f64;
    let mut b = hi * (best_i + 1).min(n) as f64 / n as f64;
    let phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - phi * (b - a), a + phi * (b - a));
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc < fd {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        } else {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        }
    }
    best.max(fc).max(fd)
}

/// Envelope for a family whose radial magnitude profiles are known:
/// `v_mag(r) ≥ |V|`, `dv_mag ≥ |∂V|`, `ddv_mag ≥ |∂²V|`, `b_mag ≥ |B_{i,k}|`,
/// `db_mag ≥ |∂B_{i,k}|` per component.
#[allow(clippy::too_many_arguments)]
fn envelope_from_profiles(
    alpha: f64,
    hi: f64,
    v_mag: impl Fn(f64) -> f64,
    dv_mag: impl Fn(f64) -> f64,
    ddv_mag: impl Fn(f64) -> f64,
    b_mag: impl Fn(f64) -> f64,
    db_mag: impl Fn(f64) -> f64,
) -> Envelope {
    let pad = 1.0 + 1e-9;
    let b0 = radial_max(|r| v_mag(r) * (1.0 + r).powf(alpha), hi);
    let b1 = radial_max(|r| dv_mag(r).max(b_mag(r)) * (1.0 + r).powf(alpha + 1.0), hi);
    let b2 = radial_max(
        |r| ddv_mag(r).max(db_mag(r)) * (1.0 + r).powf(alpha + 2.0),
        hi,
    );
    Envelope {
        alpha,
        beta: [b0 * pad, b1 * pad, b2 * pad],
    }
}

/// The trivial field `V ≡ 0`, `B ≡ 0`.
pub struct ZeroField {
    pub n: usize,
}

impl FieldModel for ZeroField {
    fn dim(&self) -> usize {
        self.n
    }
    fn potential(&self, _x: Vec3) -> f64 {
        0.0
    }
    fn grad_v(&self, _x: Vec3) -> Vec3 {
        vec3::ZERO
    }
    fn hess_v(&self, _x: Vec3) -> Mat3 {
        vec3::ZERO_MAT
    }
    fn b_upper(&self, _x: Vec3) -> [f64; 3] {
        [0.0; 3]
    }
    fn grad_b(&self, _x: Vec3, _i: usize, _k: usize) -> Vec3 {
        vec3::ZERO
    }
    fn envelope(&self) -> Envelope {
        Envelope {
            alpha: 2.0,
            beta: [0.0; 3],
        }
    }
    fn support_radius(&self) -> f64 {
        1.0
    }
}

/// Radial Gaussian potential `V = a_V e^{-|x|²}` and, in the plane, the
/// radial Gaussian magnetic component `B₁,₂ = a_B e^{-|x|²}`.
pub struct GaussianField {
    n: usize,
    amp_v: f64,
    amp_b: f64,
    envelope: Envelope,
}

impl GaussianField {
    pub fn new(n: usize, amp_v: f64, amp_b: f64) -> Self {
        assert!(n == 2 || n == 3, "dimension must be 2 or 3");
        assert!(
            n == 2 || amp_b == 0.0,
            "a nontrivial radial B exists only for n = 2"
        );
        let alpha = 2.0;
        let (av, ab) = (amp_v.abs(), amp_b.abs());
        let envelope = envelope_from_profiles(
            alpha,
            12.0,
            |r| av * (-r * r).exp(),
            |r| av * 2.0 * r * (-r * r).exp(),
            |r| av * (4.0 * r * r + 2.0) * (-r * r).exp(),
            |r| ab * (-r * r).exp(),
            |r| ab * 2.0 * r * (-r * r).exp(),
        );
        GaussianField {
            n,
            amp_v,
            amp_b,
            envelope,
        }
    }
}

impl FieldModel for GaussianField {
    fn dim(&self) -> usize {
        self.n
    }
    fn potential(&self, x: Vec3) -> f64 {
        self.amp_v * (-vec3::dot(x, x)).exp()
    }
    fn grad_v(&self, x: Vec3) -> Vec3 {
        vec3::scale(x, -2.0 * self.amp_v * (-vec3::dot(x, x)).exp())
    }
    fn hess_v(&self, x: Vec3) -> Mat3 {
        let e = self.amp_v * (-vec3::dot(x, x)).exp();
        let mut m = vec3::ZERO_MAT;
        for i in 0..self.n {
            for k in 0..self.n {
                m[i][k] = e * (4.0 * x[i] * x[k] - if i == k { 2.0 } else { 0.0 });
            }
        }
        m
    }
    fn b_upper(&self, x: Vec3) -> [f64; 3] {
        [self.amp_b * (-vec3::dot(x, x)).exp(), 0.0, 0.0]
    }
    fn grad_b(&self, x: Vec3, i: usize, k: usize) -> Vec3 {
        let sign = match (i, k) {
            (0, 1) => 1.0,
            (1, 0) => -1.0,
            _ => return vec3::ZERO,
        };
        vec3::scale(x, -2.0 * sign * self.amp_b * (-vec3::dot(x, x)).exp())
    }
    fn envelope(&self) -> Envelope {
        self.envelope
    }
    fn support_radius(&self) -> f64 {
        8.5
    }
}

/// Compactly supported bump `u(s) = e^{-1/(1-s)}` of the scaled square radius
/// `s = |x|²/ρ²`: `V = a_V u`, and in the plane `B₁,₂ = a_B u`.
pub struct BumpField {
    n: usize,
    amp_v: f64,
    amp_b: f64,
    radius: f64,
    envelope: Envelope,
}

/// `(u, du/ds, d²u/ds²)` at the scaled square radius `s`.
fn bump_u(s: f64) -> (f64, f64, f64) {
    if s >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let g = 1.0 - s;
    let u = (-1.0 / g).exp();
    let u1 = -u / (g * g);
    let u2 = u / g.powi(4) - 2.0 * u / g.powi(3);
    (u, u1, u2)
}

impl BumpField {
    pub fn new(n: usize, amp_v: f64, amp_b: f64, radius: f64) -> Self {
        assert!(n == 2 || n == 3, "dimension must be 2 or 3");
        assert!(n == 2 || amp_b == 0.0);
        assert!(radius > 0.0);
        let alpha = 2.0;
        let (av, ab) = (amp_v.abs(), amp_b.abs());
        let r2 = radius * radius;
        let prof = move |r: f64| bump_u((r * r) / r2);
        let envelope = envelope_from_profiles(
            alpha,
            radius,
            move |r| av * prof(r).0,
            move |r| av * prof(r).1.abs() * 2.0 * r / r2,
            move |r| {
                let (_, u1, u2) = prof(r);
                av * (2.0 * u1.abs() / r2 + 4.0 * r * r * u2.abs() / (r2 * r2))
            },
            move |r| ab * prof(r).0,
            move |r| ab * prof(r).1.abs() * 2.0 * r / r2,
        );
        BumpField {
            n,
            amp_v,
            amp_b,
            radius,
            envelope,
        }
    }

    fn s(&self, x: Vec3) -> f64 {
        vec3::dot(x, x) / (self.radius * self.radius)
    }
}

impl FieldModel for BumpField {
    fn dim(&self) -> usize {
        self.n
    }
    fn potential(&self, x: Vec3) -> f64 {
        self.amp_v * bump_u(self.s(x)).0
    }
    fn grad_v(&self, x: Vec3) -> Vec3 {
        let (_, u1, _) = bump_u(self.s(x));
        vec3::scale(x, self.amp_v * u1 * 2.0 / (self.radius * self.radius))
    }
    fn hess_v(&self, x: Vec3) -> Mat3 {
        let (_, u1, u2) = bump_u(self.s(x));
        let r2 = self.radius * self.radius;
        let mut m = vec3::ZERO_MAT;
        for i in 0..self.n {
            for k in 0..self.n {
                m[i][k] = self.amp_v
                    * (4.0 * x[i] * x[k] * u2 / (r2 * r2)
                        + if i == k { 2.0 * u1 / r2 } else { 0.0 });
            }
        }
        m
    }
    fn b_upper(&self, x: Vec3) -> [f64; 3] {
        [self.amp_b * bump_u(self.s(x)).0, 0.0, 0.0]
    }
    fn grad_b(&self, x: Vec3, i: usize, k: usize) -> Vec3 {
        let sign = match (i, k) {
            (0, 1) => 1.0,
            (1, 0) => -1.0,
            _ => return vec3::ZERO,
        };
        let (_, u1, _) = bump_u(self.s(x));
        vec3::scale(
            x,
            sign * self.amp_b * u1 * 2.0 / (self.radius * self.radius),
        )
    }
    fn envelope(&self) -> Envelope {
        self.envelope
    }
    fn support_radius(&self) -> f64 {
        self.radius
    }
}

/// Three-dimensional field whose magnetic matrix derives from the Gaussian
/// vector potential `A_k(x) = c_k e^{-|x|²}`:
/// `B_{i,k} = ∂_i A_k − ∂_k A_i = -2 e^{-|x|²} (x_i c_k − x_k c_i)`,
/// so the closure identity holds analytically. `V = a_V e^{-|x|²}`.
pub struct PotentialField3 {
    amp_v: f64,
    coef: Vec3,
    envelope: Envelope,
}

impl PotentialField3 {
    pub fn new(amp_v: f64, coef: Vec3) -> Self {
        let alpha = 2.0;
        let av = amp_v.abs();
        let cm = vec3::norm_inf(coef);
        let envelope = envelope_from_profiles(
            alpha,
            12.0,
            |r| av * (-r * r).exp(),
            |r| av * 2.0 * r * (-r * r).exp(),
            |r| av * (4.0 * r * r + 2.0) * (-r * r).exp(),
            |r| cm * 4.0 * r * (-r * r).exp(),
            |r| cm * (8.0 * r * r + 4.0) * (-r * r).exp(),
        );
        PotentialField3 {
            amp_v,
            coef,
            envelope,
        }
    }

    fn b_component(&self, x: Vec3, i: usize, k: usize) -> f64 {
        -2.0 * (-vec3::dot(x, x)).exp() * (x[i] * self.coef[k] - x[k] * self.coef[i])
    }
}

impl FieldModel for PotentialField3 {
    fn dim(&self) -> usize {
        3
    }
    fn potential(&self, x: Vec3) -> f64 {
        self.amp_v * (-vec3::dot(x, x)).exp()
    }
    fn grad_v(&self, x: Vec3) -> Vec3 {
        vec3::scale(x, -2.0 * self.amp_v * (-vec3::dot(x, x)).exp())
    }
    fn hess_v(&self, x: Vec3) -> Mat3 {
        let e = self.amp_v * (-vec3::dot(x, x)).exp();
        let mut m = vec3::ZERO_MAT;
        for i in 0..3 {
            for k in 0..3 {
                m[i][k] = e * (4.0 * x[i] * x[k] - if i == k { 2.0 } else { 0.0 });
            }
        }
        m
    }
    fn b_upper(&self, x: Vec3) -> [f64; 3] {
        [
            self.b_component(x, 0, 1),
            self.b_component(x, 0, 2),
            self.b_component(x, 1, 2),
        ]
    }
    fn grad_b(&self, x: Vec3, i: usize, k: usize) -> Vec3 {
        if i == k {
            return vec3::ZERO;
        }
        let e = (-vec3::dot(x, x)).exp();
        let cross = x[i] * self.coef[k] - x[k] * self.coef[i];
        let mut g = vec3::ZERO;
        for l in 0..3 {
            let kron = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
            g[l] = e
                * (4.0 * x[l] * cross
                    - 2.0 * (kron(i, l) * self.coef[k] - kron(k, l) * self.coef[i]));
        }
        g
    }
    fn envelope(&self) -> Envelope {
        self.envelope
    }
    fn support_radius(&self) -> f64 {
        8.5
    }
}

/// Wrapper removing the potential of an inner model (`V ≡ 0`).
pub struct MagneticOnly {
    inner: Arc<dyn FieldModel>,
    envelope: Envelope,
}

impl MagneticOnly {
    pub fn new(inner: Arc<dyn FieldModel>) -> Self {
        let e = inner.envelope();
        let envelope = Envelope {
            alpha: e.alpha,
            beta: [0.0, e.beta[1], e.beta[2]],
        };
        MagneticOnly { inner, envelope }
    }
}

impl FieldModel for MagneticOnly {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn potential(&self, _x: Vec3) -> f64 {
        0.0
    }
    fn grad_v(&self, _x: Vec3) -> Vec3 {
        vec3::ZERO
    }
    fn hess_v(&self, _x: Vec3) -> Mat3 {
        vec3::ZERO_MAT
    }
    fn b_upper(&self, x: Vec3) -> [f64; 3] {
        self.inner.b_upper(x)
    }
    fn grad_b(&self, x: Vec3, i: usize, k: usize) -> Vec3 {
        self.inner.grad_b(x, i, k)
    }
    fn envelope(&self) -> Envelope {
        self.envelope
    }
    fn support_radius(&self) -> f64 {
        self.inner.support_radius()
    }
}

/// Wrapper multiplying `V` and `B` of an inner model by a constant factor.
pub struct ScaledField {
    inner: Arc<dyn FieldModel>,
    factor: f64,
    envelope: Envelope,
}

impl ScaledField {
    pub fn new(inner: Arc<dyn FieldModel>, factor: f64) -> Self {
        let e = inner.envelope();
        let envelope = Envelope {
            alpha: e.alpha,
            beta: [
                e.beta[0] * factor.abs(),
                e.beta[1] * factor.abs(),
                e.beta[2] * factor.abs(),
            ],
        };
        ScaledField {
            inner,
            factor,
            envelope,
        }
    }
}

impl FieldModel for ScaledField {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn potential(&self, x: Vec3) -> f64 {
        self.factor * self.inner.potential(x)
    }
    fn grad_v(&self, x: Vec3) -> Vec3 {
        vec3::scale(self.inner.grad_v(x), self.factor)
    }
    fn hess_v(&self, x: Vec3) -> Mat3 {
        let mut m = self.inner.hess_v(x);
        for row in m.iter_mut() {
            for e in row.iter_mut() {
                *e *= self.factor;
            }
        }
        m
    }
    fn b_upper(&self, x: Vec3) -> [f64; 3] {
        let u = self.inner.b_upper(x);
        [u[0] * self.factor, u[1] * self.factor, u[2] * self.factor]
    }
    fn grad_b(&self, x: Vec3, i: usize, k: usize) -> Vec3 {
        vec3::scale(self.inner.grad_b(x, i, k), self.factor)
    }
    fn envelope(&self) -> Envelope {
        self.envelope
    }
    fn support_radius(&self) -> f64 {
        self.inner.support_radius()
    }
}
