//! High-energy expansion functionals of the scattering data on oriented
//! lines.
//!
//! For a line `(θ, x)` with `θ·x = 0` the scattering data admit the
//! expansions
//!
//! ```text
//! a_sc(sθ, x)   = a₀(θ,x) + a₁(θ,x)/s + O(1/s²)
//! s·b_sc(sθ, x) = b₀(θ,x) + b₁(θ,x)/s + O(1/s²)
//! ```
//!
//! whose coefficients are explicit nested line integrals of `B`, `∇B` and
//! `∇V`. This module evaluates them, together with the finite-energy vectors
//! (the explicit approximations of `a_sc`, `b_sc` at finite speed) and the
//! weak-field Born leading terms, all on one shared quadrature grid per line:
//! the inner cumulative integrals are computed once as prefix arrays and
//! reused by every functional.

use crate::error::{Error, Result};
use crate::fields::Field;
use crate::quad::{Grid1, GL8_01};
use crate::vec3::{self, Vec3};

/// Oriented line `(θ, x)` on the tangent bundle of the sphere: unit
/// direction `θ` and offset `x ⊥ θ`.
#[derive(Debug, Clone, Copy)]
pub struct Line {
    theta: Vec3,
    offset: Vec3,
}

impl Line {
    /// Validates `|θ| = 1` and `|θ·x| ≤ 1e-12·(1+|x|)`; the offset is then
    /// projected exactly onto the orthogonal complement.
    pub fn new(theta: Vec3, offset: Vec3) -> Result<Line> {
        if !vec3::is_finite(theta) || !vec3::is_finite(offset) {
            return Err(Error::NonFinite("line parameters"));
        }
        let norm = vec3::norm(theta);
        if (norm - 1.0).abs() > 1e-6 {
            return Err(Error::Domain(format!("direction norm {norm} too far from 1")));
        }
        let theta = vec3::scale(theta, 1.0 / norm);
        if vec3::dot(theta, offset).abs() > 1e-12 * (1.0 + vec3::norm(offset)) {
            return Err(Error::Domain(
                "offset is not orthogonal to the direction".into(),
            ));
        }
        Ok(Line {
            theta,
            offset: vec3::reject_from(offset, theta),
        })
    }

    /// Plane line from a polar angle and signed offset: `θ = (cos φ, sin φ)`,
    /// `x = q·θ⊥` with `θ⊥ = (θ₂, −θ₁)`.
    pub fn plane(angle: f64, q: f64) -> Line {
        let theta = [angle.cos(), angle.sin(), 0.0];
        Line {
            theta,
            offset: vec3::scale(perp(theta), q),
        }
    }

    /// Line in the coordinate plane spanned by axes `i` and `k`, shifted by
    /// `z` along the remaining axis.
    pub fn coordinate_plane(i: usize, k: usize, angle: f64, q: f64, z: f64) -> Line {
        assert!(i < 3 && k < 3 && i != k);
        let mut theta = vec3::ZERO;
        theta[i] = angle.cos();
        theta[k] = angle.sin();
        let mut offset = vec3::ZERO;
        offset[i] = angle.sin() * q;
        offset[k] = -angle.cos() * q;
        let m = 3 - i - k;
        offset[m] = z;
        Line { theta, offset }
    }

    pub fn theta(&self) -> Vec3 {
        self.theta
    }

    pub fn offset(&self) -> Vec3 {
        self.offset
    }

    /// The same line traversed in the opposite direction.
    pub fn flipped(&self) -> Line {
        Line {
            theta: vec3::scale(self.theta, -1.0),
            offset: self.offset,
        }
    }

    pub fn point(&self, tau: f64) -> Vec3 {
        vec3::axpy(self.offset, tau, self.theta)
    }
}

/// `θ⊥ = (θ₂, −θ₁)` in the plane.
pub fn perp(theta: Vec3) -> Vec3 {
    [theta[1], -theta[0], 0.0]
}

/// Zeroth- and first-order expansion coefficients on one line.
#[derive(Debug, Clone, Copy)]
pub struct AsymptoticTerms {
    /// `lim a_sc`: the magnetic line integral.
    pub a_zeroth: Vec3,
    /// `lim s(a_sc − a_zeroth)`.
    pub a_first: Vec3,
    /// `lim s·b_sc`.
    pub b_zeroth: Vec3,
    /// `lim s(s·b_sc − b_zeroth)`.
    pub b_first: Vec3,
}

/// Finite-energy approximation vectors at speed `s`.
#[derive(Debug, Clone, Copy)]
pub struct FiniteEnergyTerms {
    pub speed: f64,
    /// Approximates `a_sc`.
    pub a_est: Vec3,
    /// Approximates `b_sc`.
    pub b_est: Vec3,
}

/// Weak-field (Born) leading terms at speed `s`.
#[derive(Debug, Clone, Copy)]
pub struct BornTerms {
    pub speed: f64,
    pub a_born: Vec3,
    pub b_born: Vec3,
}

/// Per-line quadrature workspace with the shared prefix arrays.
pub struct LineWorkspace<'a> {
    field: &'a Field,
    line: Line,
    grid: Grid1,
    /// `g(τ) = B(x+τθ)θ`
    g: Vec<Vec3>,
    /// `C(τ) = ∫_{-∞}^τ g`
    c: Vec<Vec3>,
    /// `D(τ) = ∫_{-∞}^τ C`
    d: Vec<Vec3>,
    /// `∇V(x+τθ)`
    gv: Vec<Vec3>,
    /// `m(τ) = B(x+τθ)·C(τ)`
    m: Vec<Vec3>,
    /// `[∇B₀₁·D, ∇B₀₂·D, ∇B₁₂·D](τ)` packed per node
    o_pairs: Vec<Vec3>,
}

/// Upper-pair index map used by the packed `∇B·D` arrays.
const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

fn pair_signed(pairs: Vec3, i: usize, k: usize) -> f64 {
    for (idx, &(a, b)) in PAIRS.iter().enumerate() {
        if (a, b) == (i, k) {
            return pairs[idx];
        }
        if (a, b) == (k, i) {
            return -pairs[idx];
        }
    }
    0.0
}

/// `out_i = Σ_k θ_k Ω_{i,k}` from packed upper-pair values.
fn omega_contract(theta: Vec3, pairs: Vec3, n: usize) -> Vec3 {
    let mut out = vec3::ZERO;
    for i in 0..n {
        for k in 0..n {
            out[i] += theta[k] * pair_signed(pairs, i, k);
        }
    }
    out
}

impl<'a> LineWorkspace<'a> {
    /// Builds the workspace on a uniform grid of `points` nodes covering the
    /// segment of the line within the field's support. Errors when the
    /// truncation-tail estimate exceeds `1e-9` of the force scale.
    pub fn new(field: &'a Field, line: Line, points: usize) -> Result<LineWorkspace<'a>> {
        let q = vec3::norm(line.offset);
        let rr = field.support_radius() + 1.0;
        let half = ((rr * rr - q * q).max(1.0)).sqrt();
        let grid = Grid1::symmetric(half, points.max(65));

        let env = field.envelope();
        let cut = (half * half + q * q).sqrt();
        let envelope_tail = env.tail_mass(cut);
        let edge = vec3::norm(field.force(line.point(-half), line.theta))
            .max(vec3::norm(field.force(line.point(half), line.theta)));
        let tail = envelope_tail.min(edge * cut * 10.0);
        if tail > 1e-9 * (1.0 + env.beta[1]) {
            return Err(Error::Quadrature(format!(
                "line quadrature tail {tail:.3e} too large; field support exceeds grid"
            )));
        }

        let npts = grid.len();
        let mut g = Vec::with_capacity(npts);
        let mut gv = Vec::with_capacity(npts);
        for &t in &grid.ts {
            let p = line.point(t);
            g.push(field.b_apply(p, line.theta));
            gv.push(field.grad_v(p));
        }
        let c = grid.cumulative(&g);
        let d = grid.cumulative(&c);
        let n = field.dim();
        let mut m = Vec::with_capacity(npts);
        let mut o_pairs = Vec::with_capacity(npts);
        for (j, &t) in grid.ts.iter().enumerate() {
            let p = line.point(t);
            m.push(field.b_apply(p, c[j]));
            let mut packed = vec3::ZERO;
            for (idx, &(a, b)) in PAIRS.iter().enumerate() {
                if b < n {
                    packed[idx] = vec3::dot(field.grad_b(p, a, b), d[j]);
                }
            }
            o_pairs.push(packed);
        }
        Ok(LineWorkspace {
            field,
            line,
            grid,
            g,
            c,
            d,
            gv,
            m,
            o_pairs,
        })
    }

    /// X-ray transform of `∇V` along the line.
    pub fn p_grad_v(&self) -> Vec3 {
        self.grid.integral(&self.gv)
    }

    /// X-ray transform of `V` along the line.
    pub fn p_potential(&self) -> f64 {
        let vals: Vec<Vec3> = self
            .grid
            .ts
            .iter()
            .map(|&t| [self.field.potential(self.line.point(t)), 0.0, 0.0])
            .collect();
        self.grid.integral(&vals)[0]
    }

    /// The magnetic line integral `∫ B(x+τθ)θ dτ` (the `a_sc` limit).
    pub fn b_line_integral(&self) -> Vec3 {
        *self.c.last().unwrap()
    }

    /// Antisymmetric double integral of `Bθ` (the `s·b_sc` limit).
    pub fn b_split(&self) -> Vec3 {
        self.grid.split_double(&self.g)
    }

    /// Antisymmetric double integral of `−∇V`.
    pub fn grad_v_split(&self) -> Vec3 {
        let neg: Vec<Vec3> = self.gv.iter().map(|v| vec3::scale(*v, -1.0)).collect();
        self.grid.split_double(&neg)
    }

    /// `(a₀, a₁)`: the `a_sc` limit and the coefficient of its `1/s`
    /// correction.
    pub fn velocity_terms(&self) -> (Vec3, Vec3) {
        let a0 = self.b_line_integral();
        let quad = self.grid.integral(&self.m);
        let omega = self.grid.integral(&self.o_pairs);
        let a1 = vec3::add(
            vec3::sub(quad, self.p_grad_v()),
            omega_contract(self.line.theta, omega, self.field.dim()),
        );
        (a0, a1)
    }

    /// `(b₀, b₁)`: the `s·b_sc` limit and the coefficient of its `1/s`
    /// correction.
    pub fn position_terms(&self) -> (Vec3, Vec3) {
        let b0 = self.b_split();
        let quad = self.grid.split_double(&self.m);
        let omega = self.grid.split_double(&self.o_pairs);
        let b1 = vec3::add(
            vec3::add(self.grad_v_split(), quad),
            omega_contract(self.line.theta, omega, self.field.dim()),
        );
        (b0, b1)
    }

    pub fn all_terms(&self) -> AsymptoticTerms {
        let (a_zeroth, a_first) = self.velocity_terms();
        let (b_zeroth, b_first) = self.position_terms();
        AsymptoticTerms {
            a_zeroth,
            a_first,
            b_zeroth,
            b_first,
        }
    }

    /// Packed `∫₀¹ ∇B_{i,k}(x+τθ + (ε/s)·D(τ)) dε ∘ D(τ)` per node: the
    /// finite-energy analogue of the `∇B·D` array, with the displacement
    /// averaged over `ε` by 8-point Gauss–Legendre.
    fn o_pairs_displaced(&self, s: f64) -> Vec<Vec3> {
        let n = self.field.dim();
        self.grid
            .ts
            .iter()
            .enumerate()
            .map(|(j, &t)| {
                let base = self.line.point(t);
                let disp = self.d[j];
                let mut packed = vec3::ZERO;
                for &(eps, w) in GL8_01.iter() {
                    let p = vec3::axpy(base, eps / s, disp);
                    for (idx, &(a, b)) in PAIRS.iter().enumerate() {
                        if b < n {
                            packed[idx] += w * vec3::dot(self.field.grad_b(p, a, b), disp);
                        }
                    }
                }
                packed
            })
            .collect()
    }

    /// Finite-energy approximation vectors at speed `s` (direction `θ`).
    pub fn finite_energy(&self, s: f64) -> FiniteEnergyTerms {
        let theta = self.line.theta;
        let n = self.field.dim();
        let o3 = self.o_pairs_displaced(s);
        let omega3 = self.grid.integral(&o3);
        let omega4 = self.grid.split_double(&o3);
        let quad = self.grid.integral(&self.m);
        let a_est = vec3::add(
            self.b_line_integral(),
            vec3::scale(
                vec3::add(
                    vec3::sub(quad, self.p_grad_v()),
                    omega_contract(theta, omega3, n),
                ),
                1.0 / s,
            ),
        );
        let quad_split = self.grid.split_double(&self.m);
        let second = vec3::add(
            vec3::add(quad_split, self.grad_v_split()),
            omega_contract(theta, omega4, n),
        );
        let b_est = vec3::add(
            vec3::scale(self.b_split(), 1.0 / s),
            vec3::scale(second, 1.0 / (s * s)),
        );
        FiniteEnergyTerms {
            speed: s,
            a_est,
            b_est,
        }
    }

    /// Born (weak-field) leading terms at speed `s`.
    pub fn born(&self, s: f64) -> BornTerms {
        let a_born = vec3::axpy(self.b_line_integral(), -1.0 / s, self.p_grad_v());
        let b_born = vec3::add(
            vec3::scale(self.b_split(), 1.0 / s),
            vec3::scale(self.grad_v_split(), 1.0 / (s * s)),
        );
        BornTerms {
            speed: s,
            a_born,
            b_born,
        }
    }
}

/// Default node count for single-line evaluations.
pub const DEFAULT_POINTS: usize = 4097;

/// `(a₀, a₁)` on a line.
pub fn limit_terms_velocity(field: &Field, line: &Line, points: usize) -> Result<(Vec3, Vec3)> {
    Ok(LineWorkspace::new(field, *line, points)?.velocity_terms())
}

/// `(b₀, b₁)` on a line.
pub fn limit_terms_position(field: &Field, line: &Line, points: usize) -> Result<(Vec3, Vec3)> {
    Ok(LineWorkspace::new(field, *line, points)?.position_terms())
}

/// Finite-energy vectors for an incoming condition `(v₋, x₋)`.
pub fn finite_energy_terms(
    field: &Field,
    v_minus: Vec3,
    x_minus: Vec3,
    points: usize,
) -> Result<FiniteEnergyTerms> {
    let s = vec3::norm(v_minus);
    if s == 0.0 {
        return Err(Error::Domain("velocity must be nonzero".into()));
    }
    let line = Line::new(vec3::scale(v_minus, 1.0 / s), x_minus)?;
    Ok(LineWorkspace::new(field, line, points)?.finite_energy(s))
}

/// Born leading terms at speed `s` on a line.
pub fn born_leading(field: &Field, s: f64, line: &Line, points: usize) -> Result<BornTerms> {
    if s <= 0.0 {
        return Err(Error::Domain("speed must be positive".into()));
    }
    Ok(LineWorkspace::new(field, *line, points)?.born(s))
}

/// Even/odd recombination of the Born terms from the two orientations of one
/// line, isolating the four underlying field integrals.
#[derive(Debug, Clone, Copy)]
pub struct Symmetrized {
    /// `P(∇V)(θ, x)`
    pub p_grad_v: Vec3,
    /// `∫ B(x+τθ)θ dτ`
    pub b_line_integral: Vec3,
    /// Antisymmetric double integral of `Bθ`.
    pub b_split: Vec3,
    /// Antisymmetric double integral of `−∇V`.
    pub grad_v_split: Vec3,
}

/// Recombines Born terms evaluated at `(s, θ, x)` and `(s, −θ, x)`.
pub fn symmetrize(plus: &BornTerms, minus: &BornTerms) -> Result<Symmetrized> {
    if plus.speed != minus.speed {
        return Err(Error::Domain(format!(
            "orientations evaluated at different speeds: {} vs {}",
            plus.speed, minus.speed
        )));
    }
    let s = plus.speed;
    Ok(Symmetrized {
        p_grad_v: vec3::scale(vec3::add(plus.a_born, minus.a_born), -s / 2.0),
        b_line_integral: vec3::scale(vec3::sub(plus.a_born, minus.a_born), 0.5),
        b_split: vec3::scale(vec3::add(plus.b_born, minus.b_born), s / 2.0),
        grad_v_split: vec3::scale(vec3::sub(plus.b_born, minus.b_born), s * s / 2.0),
    })
}
