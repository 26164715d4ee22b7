//! Trajectory integration and scattering-data extraction.
//!
//! The Newton equation is integrated in deflection form: with the incoming
//! free asymptote `x(t) = v₋t + x₋`, the unknown is `y(t) = x(t) − v₋t − x₋`
//! and
//!
//! ```text
//! ÿ = F(x₋ + v₋t + y, v₋ + ẏ),   y, ẏ → 0  as  t → −∞.
//! ```
//!
//! Working on `y` instead of `x` keeps the state small compared to `|x| ~ s·t`
//! and so avoids the catastrophic cancellation that extracting `O(1/s²)`
//! scattering data from absolute positions would suffer. The integrator is an
//! embedded Dormand–Prince 5(4) pair with adaptive steps; outgoing data are
//! obtained by a linear least-squares fit of `y(t) ≈ a_sc·t + b_sc` over the
//! tail window of the integration span.

use crate::error::{Error, Result};
use crate::fields::Field;
use crate::quad::{hermite, linear_fit};
use crate::vec3::{self, Vec3};

/// Integration controls.
#[derive(Debug, Clone, Copy)]
pub struct Controls {
    pub rtol: f64,
    pub atol: f64,
    /// Envelope threshold (relative to the β₁ scale) that defines the
    /// asymptote entry and exit times.
    pub eps_start: f64,
    /// Fraction of the span used for the outgoing-asymptote fit.
    pub tail_fraction: f64,
    pub max_steps: usize,
}

impl Default for Controls {
    fn default() -> Self {
        Controls {
            rtol: 1e-10,
            atol: 1e-12,
            eps_start: 1e-12,
            tail_fraction: 0.2,
            max_steps: 2_000_000,
        }
    }
}

/// One accepted integrator node of the deflection and its derivatives.
#[derive(Debug, Clone, Copy)]
pub struct Node {
    pub t: f64,
    /// Deflection `y(t)`.
    pub y: Vec3,
    /// `ẏ(t)`.
    pub u: Vec3,
    /// `ÿ(t)` (the force along the trajectory), kept for dense interpolation.
    pub a: Vec3,
}

/// An integrated scattering trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub v_minus: Vec3,
    pub x_minus: Vec3,
    pub nodes: Vec<Node>,
    pub controls: Controls,
    /// Relative energy drift over the whole span.
    pub energy_drift: f64,
}

/// Scattering datum on one incoming condition.
#[derive(Debug, Clone)]
pub struct ScatteringDatum {
    pub v_minus: Vec3,
    pub x_minus: Vec3,
    /// `a_sc = v₊ − v₋`.
    pub a_sc: Vec3,
    /// `b_sc = x₊ − x₋`.
    pub b_sc: Vec3,
    pub v_plus: Vec3,
    pub x_plus: Vec3,
    pub energy_drift: f64,
    /// Max deviation of the tail from the fitted line, absolute.
    pub fit_residual: f64,
    pub max_angle: f64,
    /// A-priori estimate of the numerical error in `a_sc`, `b_sc`.
    pub error_estimate: f64,
    /// Set when the asymptote fit did not converge (candidate
    /// non-scattering orbit); flagged data are excluded from statistics.
    pub flagged: bool,
}

/// Total energy `E = ½|v|² + V(x)`; independent of the magnetic part.
pub fn energy(field: &Field, x: Vec3, v: Vec3) -> f64 {
    0.5 * vec3::dot(v, v) + field.potential(x)
}

/// Entry/exit horizon: the first time at which the declared envelope along
/// the free asymptote falls below `eps_start`, hard-capped at
/// `10⁴ (1 + |x₋|) / |v₋|`.
fn horizon(field: &Field, v_minus: Vec3, x_minus: Vec3, eps_start: f64) -> f64 {
    let env = field.envelope();
    let s = vec3::norm(v_minus);
    let q = vec3::norm(x_minus);
    // (1 + d)^{α+1} = 1/eps  along  d(t) = √(q² + s²t²)
    let d_env = eps_start.powf(-1.0 / (env.alpha + 1.0)) - 1.0;
    let t_env = (d_env * d_env - q * q).max(1.0).sqrt() / s;
    let cap = 1.0e4 * (1.0 + q) / s;
    t_env.min(cap)
}

/// Half-width of the time window over which the field along the asymptote is
/// non-negligible.
fn active_halfwidth(field: &Field, v_minus: Vec3, x_minus: Vec3) -> f64 {
    let s = vec3::norm(v_minus);
    let q = vec3::norm(x_minus);
    let rr = field.support_radius();
    ((rr * rr - q * q).max(0.0).sqrt() + 1.0) / s
}

const STAGES: usize = 7;

/// Dormand–Prince 5(4) coefficients.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
/// Difference between the 5th- and 4th-order solutions.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Clone, Copy)]
struct State {
    y: Vec3,
    u: Vec3,
}

/// Integrates the deflection equation from the incoming asymptote.
///
/// `x₋` is projected onto the orthogonal complement of `v₋`; a relative
/// correction above `1e-9` is rejected.
pub fn integrate_trajectory(
    field: &Field,
    v_minus: Vec3,
    x_minus: Vec3,
    controls: &Controls,
) -> Result<Trajectory> {
    if !vec3::is_finite(v_minus) || !vec3::is_finite(x_minus) {
        return Err(Error::NonFinite("incoming condition"));
    }
    let s = vec3::norm(v_minus);
    if s == 0.0 {
        return Err(Error::Domain("incoming velocity must be nonzero".into()));
    }
    let x_minus = project_offset(v_minus, x_minus)?;

    let t_h = horizon(field, v_minus, x_minus, controls.eps_start);
    let t_act = active_halfwidth(field, v_minus, x_minus).min(t_h);

    // Checkpoints force the solver to land inside the interaction window so
    // an adaptive step cannot jump across a compactly supported field.
    let mut checkpoints = vec![-t_h];
    let n_act = 64;
    for i in 0..=n_act {
        let t = -t_act + 2.0 * t_act * i as f64 / n_act as f64;
        if t > -t_h && t < t_h {
            checkpoints.push(t);
        }
    }
    checkpoints.push(t_h);

    let rhs = |t: f64, st: &State| -> Vec3 {
        let x = vec3::add(vec3::add(vec3::scale(v_minus, t), x_minus), st.y);
        let v = vec3::add(v_minus, st.u);
        field.force(x, v)
    };

    let mut t = checkpoints[0];
    let mut st = State {
        y: vec3::ZERO,
        u: vec3::ZERO,
    };
    let mut acc = rhs(t, &st);
    let mut nodes = vec![Node {
        t,
        y: st.y,
        u: st.u,
        a: acc,
    }];
    let mut h = (t_act / 64.0).min(t_h / 8.0);
    let mut steps = 0usize;

    let snap = (4.0 * f64::EPSILON * t_h).max(1e-15);
    for target in checkpoints.iter().skip(1) {
        while t < *target - snap {
            h = h.min(target - t);
            if h < 1e-13 * t_h && h < 1e-6 * t_act {
                return Err(Error::Convergence(format!(
                    "step size underflow at t = {t} (near-singular dynamics)"
                )));
            }
            let mut k: [(Vec3, Vec3); STAGES] = [(vec3::ZERO, vec3::ZERO); STAGES];
            k[0] = (st.u, acc);
            for stage in 0..6 {
                let mut dy = vec3::ZERO;
                let mut du = vec3::ZERO;
                for j in 0..=stage {
                    dy = vec3::axpy(dy, A[stage][j], k[j].0);
                    du = vec3::axpy(du, A[stage][j], k[j].1);
                }
                let trial = State {
                    y: vec3::axpy(st.y, h, dy),
                    u: vec3::axpy(st.u, h, du),
                };
                let tt = t + C[stage] * h;
                k[stage + 1] = (trial.u, rhs(tt, &trial));
            }
            // the 6th stage row is the 5th-order solution (FSAL pair)
            let mut dy = vec3::ZERO;
            let mut du = vec3::ZERO;
            for j in 0..6 {
                dy = vec3::axpy(dy, A[5][j], k[j].0);
                du = vec3::axpy(du, A[5][j], k[j].1);
            }
            let y5 = vec3::axpy(st.y, h, dy);
            let u5 = vec3::axpy(st.u, h, du);
            let mut ey = vec3::ZERO;
            let mut eu = vec3::ZERO;
            for j in 0..STAGES {
                ey = vec3::axpy(ey, E[j], k[j].0);
                eu = vec3::axpy(eu, E[j], k[j].1);
            }
            let mut err: f64 = 0.0;
            for c in 0..3 {
                let sy = controls.atol + controls.rtol * st.y[c].abs().max(y5[c].abs());
                let su = controls.atol + controls.rtol * st.u[c].abs().max(u5[c].abs());
                err = err.max((h * ey[c] / sy).abs()).max((h * eu[c] / su).abs());
            }
            steps += 1;
            if steps > controls.max_steps {
                return Err(Error::Convergence(
                    "integrator step budget exhausted".into(),
                ));
            }
            if err <= 1.0 {
                t += h;
                st = State { y: y5, u: u5 };
                acc = k[6].1; // FSAL
                nodes.push(Node {
                    t,
                    y: st.y,
                    u: st.u,
                    a: acc,
                });
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= factor;
        }
    }

    let e0 = energy(
        field,
        vec3::add(vec3::scale(v_minus, nodes[0].t), x_minus),
        v_minus,
    );
    let mut drift: f64 = 0.0;
    for n in &nodes {
        let x = vec3::add(vec3::add(vec3::scale(v_minus, n.t), x_minus), n.y);
        let v = vec3::add(v_minus, n.u);
        drift = drift.max((energy(field, x, v) - e0).abs());
    }
    let energy_drift = drift / e0.abs().max(f64::MIN_POSITIVE);

    Ok(Trajectory {
        v_minus,
        x_minus,
        nodes,
        controls: *controls,
        energy_drift,
    })
}

fn project_offset(v_minus: Vec3, x_minus: Vec3) -> Result<Vec3> {
    let corrected = vec3::reject_from(x_minus, v_minus);
    let shift = vec3::norm(vec3::sub(corrected, x_minus));
    if shift > 1e-9 * (1.0 + vec3::norm(x_minus)) {
        return Err(Error::Domain(format!(
            "offset is not orthogonal to the incoming velocity (correction {shift:.3e})"
        )));
    }
    Ok(corrected)
}

impl Trajectory {
    pub fn t_start(&self) -> f64 {
        self.nodes[0].t
    }

    pub fn t_end(&self) -> f64 {
        self.nodes.last().unwrap().t
    }

    /// Deflection and its derivative at an arbitrary time via piecewise cubic
    /// Hermite interpolation of the stored nodes.
    pub fn deflection_at(&self, t: f64) -> (Vec3, Vec3) {
        let idx = match self
            .nodes
            .binary_search_by(|n| n.t.partial_cmp(&t).unwrap())
        {
            Ok(i) => return (self.nodes[i].y, self.nodes[i].u),
            Err(i) => i.clamp(1, self.nodes.len() - 1),
        };
        let (l, r) = (&self.nodes[idx - 1], &self.nodes[idx]);
        let mut y = vec3::ZERO;
        let mut u = vec3::ZERO;
        for c in 0..3 {
            y[c] = hermite(t, l.t, l.y[c], l.u[c], r.t, r.y[c], r.u[c]);
            u[c] = hermite(t, l.t, l.u[c], l.a[c], r.t, r.u[c], r.a[c]);
        }
        (y, u)
    }

    /// Position `x(t) = v₋t + x₋ + y(t)`.
    pub fn position_at(&self, t: f64) -> Vec3 {
        let (y, _) = self.deflection_at(t);
        vec3::add(vec3::add(vec3::scale(self.v_minus, t), self.x_minus), y)
    }

    /// Sup over the grid of the angle between `ẋ(t)` and `v₋`.
    pub fn max_deflection_angle(&self) -> f64 {
        self.nodes
            .iter()
            .map(|n| vec3::angle_between(vec3::add(self.v_minus, n.u), self.v_minus))
            .fold(0.0, f64::max)
    }
}

/// Sup deflection angle of an integrated trajectory.
pub fn max_deflection_angle(traj: &Trajectory) -> f64 {
    traj.max_deflection_angle()
}

/// Threshold on the tail-fit residual (relative to the deflection scale)
/// above which a datum is flagged.
const FIT_RESIDUAL_FLAG: f64 = 1e-6;

/// Integrates and extracts the scattering datum by fitting the outgoing
/// asymptote `y(t) ≈ a_sc t + b_sc` over the tail window.
pub fn scattering_datum(
    field: &Field,
    v_minus: Vec3,
    x_minus: Vec3,
    controls: &Controls,
) -> Result<ScatteringDatum> {
    let traj = integrate_trajectory(field, v_minus, x_minus, controls)?;
    datum_from_trajectory(&traj)
}

/// Extracts the scattering datum from an existing trajectory.
pub fn datum_from_trajectory(traj: &Trajectory) -> Result<ScatteringDatum> {
    let (t0, t1) = (traj.t_start(), traj.t_end());
    let w0 = t1 - traj.controls.tail_fraction * (t1 - t0);
    let samples = 200;
    let mut ts = Vec::with_capacity(samples);
    let mut ys: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for i in 0..samples {
        let t = w0 + (t1 - w0) * i as f64 / (samples - 1) as f64;
        let (y, _) = traj.deflection_at(t);
        ts.push(t);
        for c in 0..3 {
            ys[c].push(y[c]);
        }
    }
    let mut a_sc = vec3::ZERO;
    let mut b_sc = vec3::ZERO;
    for c in 0..3 {
        let (intercept, slope) = linear_fit(&ts, &ys[c]);
        a_sc[c] = slope;
        b_sc[c] = intercept;
    }
    let mut fit_residual: f64 = 0.0;
    for (i, &t) in ts.iter().enumerate() {
        for c in 0..3 {
            fit_residual = fit_residual.max((ys[c][i] - (a_sc[c] * t + b_sc[c])).abs());
        }
    }
    let y_scale = traj
        .nodes
        .iter()
        .map(|n| vec3::norm_inf(n.y))
        .fold(0.0, f64::max);
    let error_estimate =
        100.0 * (traj.controls.atol + traj.controls.rtol * (1.0 + y_scale)) + 10.0 * fit_residual;
    let flagged = fit_residual > FIT_RESIDUAL_FLAG * (1.0 + y_scale)
        || traj.energy_drift > 100.0 * traj.controls.rtol;

    Ok(ScatteringDatum {
        v_minus: traj.v_minus,
        x_minus: traj.x_minus,
        a_sc,
        b_sc,
        v_plus: vec3::add(traj.v_minus, a_sc),
        x_plus: vec3::add(traj.x_minus, b_sc),
        energy_drift: traj.energy_drift,
        fit_residual,
        max_angle: traj.max_deflection_angle(),
        error_estimate,
        flagged,
    })
}
