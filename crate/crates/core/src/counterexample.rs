//! Two distinct radial plane magnetic fields with identical second-order
//! position scattering data.
//!
//! The construction pairs the disjoint-support bump combinations
//!
//! ```text
//! f̃_i(q) = χ(q) + χ(−q) + ε_i χ(q−4) + ε_i χ(−4−q),   ε₁ = 1, ε₂ = −1,
//! ```
//!
//! whose squares coincide, with the radial fields `B_i(x) = f_i(|x|²)·J`
//! (`J` the plane rotation generator) obtained by Abel inversion of
//! `P B_i(θ, qθ⊥) = f̃_i(q)`, and a radial potential `V` defined through its
//! X-ray transform so that the full second-order position functional of
//! `(V, B₁)` equals that of `(0, B₂)` on every plane line — while `B₁ ≢ B₂`
//! and `V ≢ 0`. All radial profiles are tabulated from closed-form bump
//! derivatives through smooth-substitution quadratures and evaluated by
//! four-point Lagrange interpolation, so the fields plug into the ordinary
//! `Field` interface.

use crate::error::{Error, Result};
use crate::fields::{Envelope, Field, FieldModel};
use crate::quad::{adaptive_simpson_scalar, Grid1};
use crate::vec3::{self, Mat3, Vec3};
use crate::xray::{invert_fbp, Apodization, GridFunction, GridSpec, Sinogram};

/// The analytic bump `χ(q) = exp(−1/(q(1−q)))` on `]0,1[`, zero elsewhere.
pub fn bump_chi(q: f64) -> f64 {
    chi_derivatives(q).0
}

/// `(χ, χ′, χ″, χ‴)` in closed form.
///
/// With `u = q(1−q)` and `w = u′/u²`: `χ′ = χw`, `χ″ = χ(w² + w′)`,
/// `χ‴ = χ(w³ + 3ww′ + w″)`.
pub fn chi_derivatives(q: f64) -> (f64, f64, f64, f64) {
    if q <= 0.0 || q >= 1.0 {
        return (0.0, 0.0, 0.0, 0.0);
    }
    let u = q * (1.0 - q);
    let chi = (-1.0 / u).exp();
    if chi == 0.0 {
        return (0.0, 0.0, 0.0, 0.0);
    }
    let up = 1.0 - 2.0 * q;
    let w = up / (u * u);
    let wp = (-2.0 * u - 2.0 * up * up) / (u * u * u);
    let wpp = 6.0 * up * (2.0 * u + up * up) / (u * u * u * u);
    (
        chi,
        chi * w,
        chi * (w * w + wp),
        chi * (w * w * w + 3.0 * w * wp + wpp),
    )
}

/// Sign of the far bump pair: `+1` for the first profile, `−1` for the
/// second.
fn epsilon(index: usize) -> f64 {
    match index {
        1 => 1.0,
        2 => -1.0,
        _ => panic!("profile index must be 1 or 2"),
    }
}

/// Unnormalized even profile `f̃_i(q)`.
pub fn f_tilde(index: usize, q: f64) -> f64 {
    f_tilde_derivatives(index, q).0
}

/// `(f̃, f̃′, f̃″, f̃‴)` of the unnormalized profile.
pub fn f_tilde_derivatives(index: usize, q: f64) -> (f64, f64, f64, f64) {
    let eps = epsilon(index);
    let a = chi_derivatives(q);
    let b = chi_derivatives(-q);
    let c = chi_derivatives(q - 4.0);
    let d = chi_derivatives(-4.0 - q);
    (
        a.0 + b.0 + eps * (c.0 + d.0),
        a.1 - b.1 + eps * (c.1 - d.1),
        a.2 + b.2 + eps * (c.2 + d.2),
        a.3 - b.3 + eps * (c.3 - d.3),
    )
}

/// Largest `|q|` carrying support of the profiles.
const Q_SUPPORT: f64 = 5.0;

/// Uniformly sampled table with four-point Lagrange interpolation; zero
/// outside its range (the tabulated functions are compactly supported).
#[derive(Debug, Clone)]
pub struct UniformTable {
    pub x0: f64,
    pub dx: f64,
    pub vals: Vec<f64>,
}

impl UniformTable {
    pub fn build(x0: f64, x1: f64, n: usize, f: impl Fn(f64) -> f64) -> UniformTable {
        assert!(n >= 8 && x1 > x0);
        let dx = (x1 - x0) / (n - 1) as f64;
        let vals = (0..n).map(|j| f(x0 + dx * j as f64)).collect();
        UniformTable { x0, dx, vals }
    }

    fn stencil(&self, x: f64) -> Option<(usize, f64)> {
        let n = self.vals.len();
        let pos = (x - self.x0) / self.dx;
        if pos < 0.0 || pos > (n - 1) as f64 {
            return None;
        }
        let j = (pos.floor() as usize).clamp(1, n - 3);
        Some((j, pos - j as f64))
    }

    pub fn interp(&self, x: f64) -> f64 {
        let Some((j, t)) = self.stencil(x) else {
            return 0.0;
        };
        let w = crate::quad::lagrange4(t);
        w[0] * self.vals[j - 1] + w[1] * self.vals[j] + w[2] * self.vals[j + 1]
            + w[3] * self.vals[j + 2]
    }

    /// Derivative of the interpolating cubic.
    pub fn deriv(&self, x: f64) -> f64 {
        let Some((j, t)) = self.stencil(x) else {
            return 0.0;
        };
        let d = crate::quad::lagrange4_deriv(t);
        (d[0] * self.vals[j - 1] + d[1] * self.vals[j] + d[2] * self.vals[j + 1]
            + d[3] * self.vals[j + 2])
            / self.dx
    }

    pub fn x_max(&self) -> f64 {
        self.x0 + self.dx * (self.vals.len() - 1) as f64
    }
}

/// Radial profile `f` (as a function of the square radius `s = |x|²`)
/// recovered from an even plane sinogram profile, with the derivative and
/// cumulative tables the pipelines need.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    /// Square-radius domain bound; `f ≡ 0` for `s ≥ smax`.
    pub smax: f64,
    /// `r ↦ f(r²)`. All tables are keyed by the radius `r = √s`: the
    /// profiles are steep in the square radius near the origin but smooth
    /// in `r`, so a uniform radius grid interpolates far more accurately.
    pub f: UniformTable,
    /// `r ↦ df/ds (r²)`
    pub fp: UniformTable,
    /// `r ↦ d²f/ds² (r²)`
    pub fpp: UniformTable,
    /// `r ↦ F(r²)`, `F(s) = −∫_s^∞ f(t) dt`
    pub big_f: UniformTable,
    /// Sup-norm residual of the forward check `P(radial f) = f̃`.
    pub forward_residual: f64,
}

impl RadialProfile {
    /// `f` at the square radius `s`.
    pub fn f_at(&self, s: f64) -> f64 {
        self.f.interp(s.max(0.0).sqrt())
    }

    pub fn fp_at(&self, s: f64) -> f64 {
        self.fp.interp(s.max(0.0).sqrt())
    }

    pub fn fpp_at(&self, s: f64) -> f64 {
        self.fpp.interp(s.max(0.0).sqrt())
    }

    pub fn big_f_at(&self, s: f64) -> f64 {
        self.big_f.interp(s.max(0.0).sqrt())
    }
}

/// Inverse of the radial plane X-ray (Abel-type) equation
/// `2∫_{|q|}^∞ f(r²) r (r²−q²)^{-1/2} dr = f̃(q)`.
///
/// The inversion formula `f(s) = −(1/π)∫_{√s}^∞ f̃′(q)(q²−s)^{-1/2} dq` is
/// evaluated after the substitution `w² = q² − s`, which removes the
/// square-root singularity:
///
/// ```text
/// f(s)  = −(1/π) ∫₀^∞ g(s+w²) dw,      g(y) = f̃′(√y)/√y,
/// F(s)  = −(2/π) ∫₀^∞ f̃(√(s+w²)) dw,
/// ```
///
/// and the `s`-derivatives use the closed-form derivatives of `g`.
pub fn radial_from_sinogram(
    profile: impl Fn(f64) -> (f64, f64, f64, f64),
    q_support: f64,
    nodes: usize,
) -> Result<RadialProfile> {
    let smax = q_support * q_support;
    // One fixed composite-cubic pass per radius node accumulates all four
    // integrals from shared profile evaluations. Clamping q away from zero
    // realizes the smooth even-profile limits (f̃′(q)/q → f̃″(0) and so on)
    // without special cases.
    let nquad = 4097usize;
    let unit_w = crate::quad::uniform_unit_weights(nquad);
    let pi = std::f64::consts::PI;
    let dr = q_support / (nodes - 1) as f64;
    let mut f_vals = vec![0.0; nodes];
    let mut fp_vals = vec![0.0; nodes];
    let mut fpp_vals = vec![0.0; nodes];
    let mut big_f_vals = vec![0.0; nodes];
    for j in 0..nodes {
        let r = dr * j as f64;
        let s = r * r;
        let wmax = (smax - s).max(0.0).sqrt();
        if wmax == 0.0 {
            continue;
        }
        let h = wmax / (nquad - 1) as f64;
        let mut acc = [0.0f64; 4];
        for (i, uw) in unit_w.iter().enumerate() {
            let w = h * i as f64;
            let y = s + w * w;
            let q = y.sqrt();
            // the even-profile limits f̃′(q)/q → f̃″(0) etc. are realized by
            // evaluating at a clamped q, away from the removable singularity
            if q >= 1e-4 {
                let (d0, d1, d2, d3) = profile(q);
                acc[0] += uw * d1 / q;
                acc[1] += uw * (q * d2 - d1) / (2.0 * q * q * q);
                acc[2] += uw
                    * (d3 / (2.0 * q * q) - 1.5 * d2 / (q * q * q)
                        + 1.5 * d1 / (q * q * q * q))
                    / (2.0 * q);
                acc[3] += uw * d0;
            } else {
                let qg = q.max(1e-8);
                let q1 = q.max(1e-6);
                let q2 = 1e-4;
                acc[0] += uw * profile(qg).1 / qg;
                let (_, e1, e2, _) = profile(q1);
                acc[1] += uw * (q1 * e2 - e1) / (2.0 * q1 * q1 * q1);
                let (_, c1, c2, c3) = profile(q2);
                acc[2] += uw
                    * (c3 / (2.0 * q2 * q2) - 1.5 * c2 / (q2 * q2 * q2)
                        + 1.5 * c1 / (q2 * q2 * q2 * q2))
                    / (2.0 * q2);
                acc[3] += uw * profile(q).0;
            }
        }
        f_vals[j] = -h * acc[0] / pi;
        fp_vals[j] = -h * acc[1] / pi;
        fpp_vals[j] = -h * acc[2] / pi;
        big_f_vals[j] = -2.0 * h * acc[3] / pi;
    }
    let table = |vals: Vec<f64>| UniformTable {
        x0: 0.0,
        dx: dr,
        vals,
    };
    let f = table(f_vals);
    let fp = table(fp_vals);
    let fpp = table(fpp_vals);
    let big_f = table(big_f_vals);

    // forward check: the plane X-ray of the recovered radial profile must
    // reproduce the sinogram profile
    let mut forward_residual: f64 = 0.0;
    let probe = 257;
    for j in 0..probe {
        let q = q_support * 1.02 * j as f64 / (probe - 1) as f64;
        let wmax = (smax - q * q).max(0.0).sqrt();
        let forward = if wmax == 0.0 {
            0.0
        } else {
            2.0 * adaptive_simpson_scalar(
                &|w| f.interp((q * q + w * w).sqrt()),
                0.0,
                wmax,
                1e-12,
                30,
                8,
            )
        };
        forward_residual = forward_residual.max((forward - profile(q).0).abs());
    }
    if forward_residual > 1e-6 {
        return Err(Error::Quadrature(format!(
            "radial inversion forward check failed: residual {forward_residual:.3e}"
        )));
    }
    Ok(RadialProfile {
        smax,
        f,
        fp,
        fpp,
        big_f,
        forward_residual,
    })
}

/// Radial plane field `V(x) = v(|x|²)`, `B₀₁(x) = b(|x|²)` backed by
/// radius-keyed profile tables.
pub struct RadialPairField {
    /// `(r ↦ v(r²), r ↦ dv/ds(r²))`
    v: Option<(UniformTable, UniformTable)>,
    /// `(r ↦ b(r²), r ↦ db/ds(r²))`
    b: (UniformTable, UniformTable),
    envelope: Envelope,
    support: f64,
}

impl RadialPairField {
    pub fn new(
        v: Option<(UniformTable, UniformTable)>,
        b: (UniformTable, UniformTable),
        support: f64,
    ) -> RadialPairField {
        let alpha = 2.0;
        let mut beta = [0.0f64; 3];
        let probe = 4096;
        for j in 0..=probe {
            let r = support * 1.05 * j as f64 / probe as f64;
            let d = 1.0 + r;
            if let Some((vt, vp)) = &v {
                beta[0] = beta[0].max(vt.interp(r).abs() * d.powf(alpha));
                beta[1] = beta[1].max((2.0 * r * vp.interp(r)).abs() * d.powf(alpha + 1.0));
                let d2 = vp.deriv(r) / (2.0 * r.max(1e-9));
                let hess_scale = 2.0 * vp.interp(r).abs() + 4.0 * r * r * d2.abs();
                beta[2] = beta[2].max(hess_scale * d.powf(alpha + 2.0));
            }
            beta[1] = beta[1].max(b.0.interp(r).abs() * d.powf(alpha + 1.0));
            beta[2] = beta[2].max((2.0 * r * b.1.interp(r)).abs() * d.powf(alpha + 2.0));
        }
        let envelope = Envelope {
            alpha,
            beta: [beta[0] * 1.0001, beta[1] * 1.0001, beta[2] * 1.0001],
        };
        RadialPairField {
            v,
            b,
            envelope,
            support,
        }
    }
}

impl FieldModel for RadialPairField {
    fn dim(&self) -> usize {
        2
    }
    fn potential(&self, x: Vec3) -> f64 {
        match &self.v {
            Some((vt, _)) => vt.interp(vec3::norm(x)),
            None => 0.0,
        }
    }
    fn grad_v(&self, x: Vec3) -> Vec3 {
        match &self.v {
            Some((_, vp)) => vec3::scale(x, 2.0 * vp.interp(vec3::norm(x))),
            None => vec3::ZERO,
        }
    }
    fn hess_v(&self, x: Vec3) -> Mat3 {
        let mut m = vec3::ZERO_MAT;
        if let Some((_, vp)) = &self.v {
            let r = vec3::norm(x);
            let d1 = vp.interp(r);
            // d²v/ds² from the radius-keyed slope table
            let d2 = vp.deriv(r) / (2.0 * r.max(1e-9));
            for i in 0..2 {
                for k in 0..2 {
                    m[i][k] = 4.0 * x[i] * x[k] * d2 + if i == k { 2.0 * d1 } else { 0.0 };
                }
            }
        }
        m
    }
    fn b_upper(&self, x: Vec3) -> [f64; 3] {
        [self.b.0.interp(vec3::norm(x)), 0.0, 0.0]
    }
    fn grad_b(&self, x: Vec3, i: usize, k: usize) -> Vec3 {
        let sign = match (i, k) {
            (0, 1) => 1.0,
            (1, 0) => -1.0,
            _ => return vec3::ZERO,
        };
        vec3::scale(x, 2.0 * sign * self.b.1.interp(vec3::norm(x)))
    }
    fn envelope(&self) -> Envelope {
        self.envelope
    }
    fn support_radius(&self) -> f64 {
        self.support
    }
}

/// The assembled construction.
pub struct Bundle {
    /// Normalization making the peak of the first sinogram profile equal 1.
    pub scale: f64,
    pub profile1: RadialProfile,
    pub profile2: RadialProfile,
    /// `(V, B₁)`
    pub field_with_v: Field,
    /// `(0, B₂)`
    pub field_no_v: Field,
    /// `PV(q)` on `q ∈ [0, qmax]`.
    pub pv: UniformTable,
    /// `V` reconstructed on a grid from its sinogram by backprojection.
    pub v_grid: GridFunction,
    /// Radius-keyed potential profile `r ↦ v(r²)` and its `s`-derivative
    /// (the same `V` as an exact evaluator).
    pub v_profile: (UniformTable, UniformTable),
    /// `sup |B₁ − B₂|` over the profile tables.
    pub b_gap_sup: f64,
    /// `sup |B₁|`.
    pub b1_sup: f64,
    /// `∫₀^∞ F_i f_i (τ²) dτ` for `i = 1, 2`; their difference is `PV(0)`
    /// and certifies `V ≢ 0`.
    pub v_certificate: (f64, f64),
}

/// Normalized sinogram profile of the bundle: `scale · f̃_i`.
pub fn bundle_f_tilde(scale: f64, index: usize, q: f64) -> f64 {
    scale * f_tilde(index, q)
}

/// Builds the whole construction: radial profiles by Abel inversion, the
/// potential from its sinogram, and the certificates.
pub fn build_bundle(nodes: usize, grid_spec: GridSpec) -> Result<Bundle> {
    // normalize so the sinogram profile peaks at 1
    let scale = 1.0 / bump_chi(0.5);
    let prof = |index: usize| {
        move |q: f64| {
            let (a, b, c, d) = f_tilde_derivatives(index, q);
            (scale * a, scale * b, scale * c, scale * d)
        }
    };
    let profile1 = radial_from_sinogram(prof(1), Q_SUPPORT, nodes)?;
    let profile2 = radial_from_sinogram(prof(2), Q_SUPPORT, nodes)?;

    // inner integrals over τ of table-valued integrands, reused below
    let smax = profile1.smax;
    let tau_grid = Grid1::symmetric(smax.sqrt() + 0.5, 2049);
    let half_integral = |f: &dyn Fn(f64) -> f64, y: f64| -> f64 {
        // ∫₀^∞ f(τ² + y) dτ over the support
        let vals: Vec<Vec3> = tau_grid
            .ts
            .iter()
            .map(|&t| [f(t * t + y), 0.0, 0.0])
            .collect();
        0.5 * tau_grid.integral(&vals)[0]
    };

    // S_i(q²) = ∫₀^∞ F_i f_i(τ² + q²) dτ; the certificate is at q = 0
    let s_at = |p: &RadialProfile, q2: f64| -> f64 {
        half_integral(&|y| p.big_f_at(y) * p.f_at(y), q2)
    };
    let v_certificate = (s_at(&profile1, 0.0), s_at(&profile2, 0.0));

    // PV(q) = −S₁(q) + S₂(q)
    let q_hi = Q_SUPPORT + 0.4;
    let pv = UniformTable::build(0.0, q_hi, nodes, |q| {
        -s_at(&profile1, q * q) + s_at(&profile2, q * q)
    });

    // derivative profile g_V(y) = PV′(√y)/√y = −2h₁(y) + 2h₂(y) with
    // h_i(y) = ∫₀^∞ (f_i² + F_i f_i′)(τ²+y) dτ, tabulated against ρ = √y
    let gv = UniformTable::build(0.0, q_hi, 2 * nodes, |rho| {
        let y = rho * rho;
        let h = |p: &RadialProfile| {
            half_integral(
                &|t| {
                    let f = p.f_at(t);
                    f * f + p.big_f_at(t) * p.fp_at(t)
                },
                y,
            )
        };
        -2.0 * h(&profile1) + 2.0 * h(&profile2)
    });
    let gv1 = UniformTable::build(0.0, q_hi, 2 * nodes, |rho| {
        let y = rho * rho;
        let h = |p: &RadialProfile| {
            half_integral(
                &|t| 3.0 * p.f_at(t) * p.fp_at(t) + p.big_f_at(t) * p.fpp_at(t),
                y,
            )
        };
        -2.0 * h(&profile1) + 2.0 * h(&profile2)
    });

    // Abel inversion of PV: v(s) = −(1/π) ∫ g_V(s+w²) dw, tables in r = √s
    let pi = std::f64::consts::PI;
    let y_hi = q_hi * q_hi;
    let abel = |tab: &UniformTable, s: f64| -> f64 {
        let wmax = (y_hi - s).max(0.0).sqrt();
        if wmax == 0.0 {
            return 0.0;
        }
        -adaptive_simpson_scalar(&|w| tab.interp((s + w * w).sqrt()), 0.0, wmax, 1e-13, 30, 8)
            / pi
    };
    let v_tab = UniformTable::build(0.0, q_hi, nodes, |r| abel(&gv, r * r));
    let vp_tab = UniformTable::build(0.0, q_hi, nodes, |r| abel(&gv1, r * r));

    // certificates on the magnetic pair
    let mut b_gap_sup: f64 = 0.0;
    let mut b1_sup: f64 = 0.0;
    for j in 0..profile1.f.vals.len() {
        b_gap_sup = b_gap_sup.max((profile1.f.vals[j] - profile2.f.vals[j]).abs());
        b1_sup = b1_sup.max(profile1.f.vals[j].abs());
    }
    if v_certificate.0 == v_certificate.1 {
        return Err(Error::Quadrature(
            "potential certificate degenerate: the construction would give V ≡ 0".into(),
        ));
    }

    let support = Q_SUPPORT + 0.3;
    let field_with_v = Field::new(RadialPairField::new(
        Some((v_tab.clone(), vp_tab.clone())),
        (profile1.f.clone(), profile1.fp.clone()),
        support,
    ));
    let field_no_v = Field::new(RadialPairField::new(
        None,
        (profile2.f.clone(), profile2.fp.clone()),
        support,
    ));

    // V on a grid by backprojection of its (radial) sinogram
    let angles = 64;
    let offsets = 513;
    let mut sino = Sinogram::empty(angles, offsets, q_hi, 1)?;
    for j in 0..angles {
        for i in 0..offsets {
            let q = sino.offset(i).abs();
            sino.at_mut(j, i)[0] = pv.interp(q);
        }
    }
    let v_grid = invert_fbp(&sino, grid_spec, Apodization::Hann)?;

    Ok(Bundle {
        scale,
        profile1,
        profile2,
        field_with_v,
        field_no_v,
        pv,
        v_grid,
        v_profile: (v_tab, vp_tab),
        b_gap_sup,
        b1_sup,
        v_certificate,
    })
}

/// Residual report of the headline equality over a line grid.
#[derive(Debug, Clone)]
pub struct EqualityReport {
    /// `max |b₁(V,B₁) − b₁(0,B₂)|` componentwise over the grid.
    pub max_residual: f64,
    /// Residual of the direction component alone.
    pub theta_component: f64,
    /// Residual of the normal component alone.
    pub perp_component: f64,
    /// Max error of the closed form `b₁(V,B₁)·θ⊥ = (q/2)·f̃₁(q)²`.
    pub closed_form_residual: f64,
    /// `max (|b₀(B₁)|, |b₀(B₂)|)`: the zeroth position terms, expected 0.
    pub position_limit_residual: f64,
}

/// Evaluates both second-order position functionals over an
/// `angles × offsets` grid of plane lines and reports the residuals.
pub fn verify_equality(
    bundle: &Bundle,
    angles: usize,
    offsets: usize,
    q_max: f64,
    points: usize,
) -> Result<EqualityReport> {
    use crate::asymptotics::{perp, Line, LineWorkspace};
    use rayon::prelude::*;

    let cells: Vec<(usize, usize)> = (0..angles)
        .flat_map(|j| (0..offsets).map(move |i| (j, i)))
        .collect();
    let rows: Vec<Result<[f64; 5]>> = cells
        .par_iter()
        .map(|&(j, i)| {
            let ang = std::f64::consts::TAU * j as f64 / angles as f64;
            let q = -q_max + 2.0 * q_max * i as f64 / (offsets - 1) as f64;
            let line = Line::plane(ang, q);
            let ws1 = LineWorkspace::new(&bundle.field_with_v, line, points)?;
            let ws2 = LineWorkspace::new(&bundle.field_no_v, line, points)?;
            let (b0_1, b1_1) = ws1.position_terms();
            let (b0_2, b1_2) = ws2.position_terms();
            let diff = vec3::sub(b1_1, b1_2);
            let theta = line.theta();
            let closed = q / 2.0 * bundle_f_tilde(bundle.scale, 1, q).powi(2);
            let along_perp = vec3::dot(b1_1, perp(theta));
            Ok([
                vec3::norm_inf(diff),
                vec3::dot(diff, theta).abs(),
                vec3::dot(diff, perp(theta)).abs(),
                (along_perp - closed).abs(),
                vec3::norm(b0_1).max(vec3::norm(b0_2)),
            ])
        })
        .collect();

    let mut rep = EqualityReport {
        max_residual: 0.0,
        theta_component: 0.0,
        perp_component: 0.0,
        closed_form_residual: 0.0,
        position_limit_residual: 0.0,
    };
    for row in rows {
        let [m, th, pp, cl, pl] = row?;
        rep.max_residual = rep.max_residual.max(m);
        rep.theta_component = rep.theta_component.max(th);
        rep.perp_component = rep.perp_component.max(pp);
        rep.closed_form_residual = rep.closed_form_residual.max(cl);
        rep.position_limit_residual = rep.position_limit_residual.max(pl);
    }
    Ok(rep)
}
