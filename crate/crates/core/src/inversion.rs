//! End-to-end reconstruction pipelines: sample scattering data over line
//! sets and a geometric energy ladder, extrapolate the expansion
//! coefficients, and recover the magnetic components and the potential
//! gradient by transform inversion, with error reports against ground truth.

use rayon::prelude::*;

use crate::asymptotics::{AsymptoticTerms, Line, LineWorkspace};
use crate::dynamics::{self, Controls};
use crate::error::{Error, Result};
use crate::fields::{Envelope, Field, FieldModel};
use crate::quad::{lagrange4, lagrange4_deriv};
use crate::vec3::{self, Mat3, Vec3};
use crate::xray::{
    invert_fbp, recover_b_plane, recover_b_slices, recover_v, Apodization, GridFunction,
    GridSpec, GridStack, Sinogram,
};

/// Plane fan of lines: `angles × offsets` on the sinogram parametrization.
#[derive(Debug, Clone, Copy)]
pub struct LineSet {
    angles: usize,
    offsets: usize,
    q_max: f64,
}

impl LineSet {
    pub fn new(angles: usize, offsets: usize, q_max: f64) -> Result<LineSet> {
        if angles < 4 || offsets < 4 || !(q_max > 0.0) {
            return Err(Error::Domain("line set needs ≥4 angles/offsets, Q > 0".into()));
        }
        Ok(LineSet {
            angles,
            offsets,
            q_max,
        })
    }

    pub fn angles(&self) -> usize {
        self.angles
    }

    pub fn offsets(&self) -> usize {
        self.offsets
    }

    pub fn q_max(&self) -> f64 {
        self.q_max
    }

    pub fn len(&self) -> usize {
        self.angles * self.offsets
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn line(&self, idx: usize) -> Line {
        let (j, i) = (idx / self.offsets, idx % self.offsets);
        Line::plane(
            std::f64::consts::PI * j as f64 / self.angles as f64,
            -self.q_max + 2.0 * self.q_max * i as f64 / (self.offsets - 1) as f64,
        )
    }

    /// Empty sinogram with this geometry.
    pub fn sinogram(&self, arity: usize) -> Result<Sinogram> {
        Sinogram::empty(self.angles, self.offsets, self.q_max, arity)
    }
}

/// Geometric energy ladder `s₀, s₀·factor, s₀·factor², …`.
pub fn geometric_ladder(base: f64, factor: f64, count: usize) -> Result<Vec<f64>> {
    if !(base > 0.0) || !(factor > 1.0) || count == 0 {
        return Err(Error::Domain(
            "ladder needs base > 0, factor > 1, count ≥ 1".into(),
        ));
    }
    Ok((0..count).map(|k| base * factor.powi(k as i32)).collect())
}

/// Scattering data sampled over `lines × ladder`.
pub struct EnergySweep {
    pub lines: LineSet,
    pub ladder: Vec<f64>,
    /// `a_sc`, indexed `[rung · nlines + line]`.
    pub a: Vec<Vec3>,
    /// `b_sc`, same indexing.
    pub b: Vec<Vec3>,
    pub flagged: Vec<bool>,
}

impl EnergySweep {
    pub fn from_parts(
        lines: LineSet,
        ladder: Vec<f64>,
        a: Vec<Vec3>,
        b: Vec<Vec3>,
        flagged: Vec<bool>,
    ) -> Result<EnergySweep> {
        let n = ladder.len() * lines.len();
        if a.len() != n || b.len() != n || flagged.len() != n {
            return Err(Error::GridMismatch("sweep arrays do not match geometry".into()));
        }
        for w in ladder.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Domain("ladder must increase".into()));
            }
        }
        Ok(EnergySweep {
            lines,
            ladder,
            a,
            b,
            flagged,
        })
    }
}

/// Integrates the whole sweep. Trajectories are independent; they run in
/// parallel and land in a deterministic order.
pub fn generate_sweep(
    field: &Field,
    lines: LineSet,
    ladder: Vec<f64>,
    controls: &Controls,
) -> Result<EnergySweep> {
    let nlines = lines.len();
    let jobs: Vec<(usize, usize)> = (0..ladder.len())
        .flat_map(|si| (0..nlines).map(move |li| (si, li)))
        .collect();
    let rows: Vec<Result<(Vec3, Vec3, bool)>> = jobs
        .par_iter()
        .map(|&(si, li)| {
            let line = lines.line(li);
            let v = vec3::scale(line.theta(), ladder[si]);
            let d = dynamics::scattering_datum(field, v, line.offset(), controls)?;
            Ok((d.a_sc, d.b_sc, d.flagged))
        })
        .collect();
    let mut a = Vec::with_capacity(rows.len());
    let mut b = Vec::with_capacity(rows.len());
    let mut flagged = Vec::with_capacity(rows.len());
    for row in rows {
        let (ra, rb, fl) = row?;
        a.push(ra);
        b.push(rb);
        flagged.push(fl);
    }
    EnergySweep::from_parts(lines, ladder, a, b, flagged)
}

/// Per-line extrapolated expansion coefficients with their consistency
/// residuals.
pub struct LimitEstimates {
    pub lines: LineSet,
    pub terms: Vec<AsymptoticTerms>,
    /// Spread between consecutive-pair estimates, normalized.
    pub residual: Vec<f64>,
    pub flagged: Vec<bool>,
}

/// Two-point solve of the two-term model `y(s) = c₀ + c₁/s` from `(s₁, s₂)`.
fn two_point(s1: f64, y1: Vec3, s2: f64, y2: Vec3) -> (Vec3, Vec3) {
    let c0 = vec3::scale(
        vec3::sub(vec3::scale(y2, s2), vec3::scale(y1, s1)),
        1.0 / (s2 - s1),
    );
    let c1 = vec3::scale(vec3::sub(y1, y2), s1 * s2 / (s2 - s1));
    (c0, c1)
}

/// Extrapolates the expansion coefficients line by line from the ladder:
/// consecutive rung pairs each solve the two-term model; the topmost pair is
/// the estimate and the spread across pairs is the reported residual.
pub fn extract_limits(sweep: &EnergySweep, residual_tol: f64) -> Result<LimitEstimates> {
    if sweep.ladder.len() < 3 {
        return Err(Error::Domain(format!(
            "extrapolation needs a ladder of ≥ 3 energies, got {}",
            sweep.ladder.len()
        )));
    }
    let nlines = sweep.lines.len();
    let nr = sweep.ladder.len();
    let mut terms = Vec::with_capacity(nlines);
    let mut residual = Vec::with_capacity(nlines);
    let mut flagged = Vec::with_capacity(nlines);
    for li in 0..nlines {
        let mut any_flag = false;
        let mut pairs_a: Vec<(Vec3, Vec3)> = Vec::new();
        let mut pairs_b: Vec<(Vec3, Vec3)> = Vec::new();
        for si in 0..nr - 1 {
            let (s1, s2) = (sweep.ladder[si], sweep.ladder[si + 1]);
            let a1 = sweep.a[si * nlines + li];
            let a2 = sweep.a[(si + 1) * nlines + li];
            pairs_a.push(two_point(s1, a1, s2, a2));
            let t1 = vec3::scale(sweep.b[si * nlines + li], s1);
            let t2 = vec3::scale(sweep.b[(si + 1) * nlines + li], s2);
            pairs_b.push(two_point(s1, t1, s2, t2));
            any_flag |= sweep.flagged[si * nlines + li] || sweep.flagged[(si + 1) * nlines + li];
        }
        let (a_zeroth, a_first) = *pairs_a.last().unwrap();
        let (b_zeroth, b_first) = *pairs_b.last().unwrap();
        let mut spread: f64 = 0.0;
        for window in [&pairs_a, &pairs_b] {
            for w in window.windows(2) {
                let d0 = vec3::norm(vec3::sub(w[1].0, w[0].0)) / (1.0 + vec3::norm(w[1].0));
                let d1 = vec3::norm(vec3::sub(w[1].1, w[0].1)) / (1.0 + vec3::norm(w[1].1));
                spread = spread.max(d0).max(d1);
            }
        }
        terms.push(AsymptoticTerms {
            a_zeroth,
            a_first,
            b_zeroth,
            b_first,
        });
        residual.push(spread);
        flagged.push(any_flag || spread > residual_tol);
    }
    Ok(LimitEstimates {
        lines: sweep.lines,
        terms,
        residual,
        flagged,
    })
}

/// Oracle variant: the expansion coefficients straight from line quadrature,
/// isolating tomography error from extrapolation error.
pub fn limits_from_field(field: &Field, lines: LineSet, points: usize) -> Result<LimitEstimates> {
    let rows: Vec<Result<AsymptoticTerms>> = (0..lines.len())
        .into_par_iter()
        .map(|li| Ok(LineWorkspace::new(field, lines.line(li), points)?.all_terms()))
        .collect();
    let mut terms = Vec::with_capacity(lines.len());
    for r in rows {
        terms.push(r?);
    }
    Ok(LimitEstimates {
        lines,
        terms,
        residual: vec![0.0; lines.len()],
        flagged: vec![false; lines.len()],
    })
}

/// Plane field backed by a reconstructed magnetic grid (`V ≡ 0`), evaluated
/// by separable four-point Lagrange interpolation; zero outside the grid.
pub struct GridField2 {
    grid: GridFunction,
    envelope: Envelope,
}

impl GridField2 {
    pub fn new(grid: GridFunction) -> Result<GridField2> {
        if grid.arity != 1 {
            return Err(Error::Domain("magnetic grid field needs a scalar grid".into()));
        }
        if grid.res < 8 {
            return Err(Error::Domain("magnetic grid too coarse".into()));
        }
        let mut sup: f64 = 0.0;
        for v in &grid.data {
            sup = sup.max(v.abs());
        }
        let alpha = 2.0;
        let l = grid.half_width;
        // grid-maxima envelope: the grid function vanishes outside [-L, L]²
        let beta1 = sup * (1.0 + l * std::f64::consts::SQRT_2).powf(alpha + 1.0);
        let grad_scale = sup / (2.0 * l / grid.res as f64);
        let beta2 = grad_scale * (1.0 + l * std::f64::consts::SQRT_2).powf(alpha + 2.0);
        Ok(GridField2 {
            grid,
            envelope: Envelope {
                alpha,
                beta: [0.0, beta1, beta2],
            },
        })
    }

    /// `(value, gradient)` of the interpolant.
    fn interp(&self, x: Vec3) -> (f64, Vec3) {
        let g = &self.grid;
        let n = g.res;
        let h = 2.0 * g.half_width / (n - 1) as f64;
        let px = (x[0] + g.half_width) / h;
        let py = (x[1] + g.half_width) / h;
        if px < 0.0 || py < 0.0 || px > (n - 1) as f64 || py > (n - 1) as f64 {
            return (0.0, vec3::ZERO);
        }
        let jx = (px.floor() as usize).clamp(1, n - 3);
        let jy = (py.floor() as usize).clamp(1, n - 3);
        let (tx, ty) = (px - jx as f64, py - jy as f64);
        let wx = lagrange4(tx);
        let wy = lagrange4(ty);
        let dx = lagrange4_deriv(tx);
        let dy = lagrange4_deriv(ty);
        let mut val = 0.0;
        let mut gx = 0.0;
        let mut gy = 0.0;
        for (b, wyb) in wy.iter().enumerate() {
            let iy = jy + b - 1;
            for (a, wxa) in wx.iter().enumerate() {
                let ix = jx + a - 1;
                let v = g.at(iy, ix)[0];
                val += wxa * wyb * v;
                gx += dx[a] * wyb * v;
                gy += wxa * dy[b] * v;
            }
        }
        (val, [gx / h, gy / h, 0.0])
    }
}

impl FieldModel for GridField2 {
    fn dim(&self) -> usize {
        2
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
        [self.interp(x).0, 0.0, 0.0]
    }
    fn grad_b(&self, x: Vec3, i: usize, k: usize) -> Vec3 {
        let sign = match (i, k) {
            (0, 1) => 1.0,
            (1, 0) => -1.0,
            _ => return vec3::ZERO,
        };
        vec3::scale(self.interp(x).1, sign)
    }
    fn envelope(&self) -> Envelope {
        self.envelope
    }
    fn support_radius(&self) -> f64 {
        self.grid.half_width * std::f64::consts::SQRT_2 + 0.5
    }
}

/// Relative error norms of one reconstructed component.
#[derive(Debug, Clone, Copy)]
pub struct Norms {
    pub rel_l2: f64,
    pub rel_max: f64,
}

/// Relative L² and sup errors per component; grids must match.
pub fn error_report(truth: &GridFunction, recon: &GridFunction) -> Result<Vec<Norms>> {
    Ok(crate::xray::grid_errors(truth, recon)?
        .into_iter()
        .map(|(rel_l2, rel_max)| Norms { rel_l2, rel_max })
        .collect())
}

/// Reconstruction controls.
#[derive(Debug, Clone, Copy)]
pub struct ReconConfig {
    pub grid: GridSpec,
    pub apod: Apodization,
    /// Quadrature nodes for the per-line magnetic second-order terms.
    pub points: usize,
    /// Fraction of flagged lines above which reconstruction aborts.
    pub flagged_quota: f64,
}

impl Default for ReconConfig {
    fn default() -> Self {
        ReconConfig {
            grid: GridSpec {
                half_width: 4.0,
                res: 96,
            },
            apod: Apodization::Hann,
            points: 2049,
            flagged_quota: 0.05,
        }
    }
}

/// Full plane reconstruction report.
pub struct ReconstructionReport {
    pub b_recon: GridFunction,
    /// `∇V` components (arity 2).
    pub grad_v_recon: GridFunction,
    pub v_recon: Option<GridFunction>,
    pub b_errors: Option<Vec<Norms>>,
    pub grad_v_errors: Option<Vec<Norms>>,
    pub v_errors: Option<Vec<Norms>>,
    pub extraction_residual_max: f64,
    pub flagged_lines: usize,
    pub caveats: Vec<String>,
}

fn check_quota(limits: &LimitEstimates, quota: f64) -> Result<usize> {
    let flagged = limits.flagged.iter().filter(|f| **f).count();
    if flagged as f64 > quota * limits.lines.len() as f64 {
        return Err(Error::Coverage(format!(
            "{flagged} of {} lines flagged (quota {:.0}%)",
            limits.lines.len(),
            quota * 100.0
        )));
    }
    Ok(flagged)
}

/// Plane pipeline from velocity data: magnetic grid from the zeroth-order
/// coefficients, then the potential gradient from the first-order ones with
/// the magnetic second-order terms subtracted.
pub fn reconstruct_from_a(
    limits: &LimitEstimates,
    cfg: &ReconConfig,
    truth: Option<&Field>,
) -> Result<ReconstructionReport> {
    let flagged_lines = check_quota(limits, cfg.flagged_quota)?;
    let lines = limits.lines;

    // (1) zeroth-order coefficients → magnetic transform → B grid
    let mut w11 = lines.sinogram(2)?;
    for li in 0..lines.len() {
        let (j, i) = (li / lines.offsets(), li % lines.offsets());
        let t = limits.terms[li].a_zeroth;
        w11.at_mut(j, i).copy_from_slice(&t[..2]);
    }
    let b_recon = recover_b_plane(&w11, cfg.grid, cfg.apod)?;

    // (2) magnetic part of the first-order coefficient from the
    // reconstructed grid
    let bhat = Field::new(GridField2::new(b_recon.clone())?);
    let rows: Vec<Result<Vec3>> = (0..lines.len())
        .into_par_iter()
        .map(|li| {
            let (_, a1) = LineWorkspace::new(&bhat, lines.line(li), cfg.points)?.velocity_terms();
            Ok(a1)
        })
        .collect();

    // (3) subtract to isolate the potential-gradient transform
    let mut pgv = lines.sinogram(2)?;
    for (li, row) in rows.into_iter().enumerate() {
        let b_part = row?;
        let (j, i) = (li / lines.offsets(), li % lines.offsets());
        let minus_pgrad = vec3::sub(limits.terms[li].a_first, b_part);
        // a₁ = −P∇V + magnetic terms  ⇒  P(∂ᵢV) = −(a₁ − magnetic)ᵢ
        pgv.at_mut(j, i)
            .copy_from_slice(&[-minus_pgrad[0], -minus_pgrad[1]]);
    }

    // (4) componentwise inversion
    let grad_v_recon = invert_fbp(&pgv, cfg.grid, cfg.apod)?;

    let (b_errors, grad_v_errors) = match truth {
        Some(field) => {
            let b_truth = GridFunction::from_fn(cfg.grid, 1, |p| {
                [field.b_matrix(p)[0][1], 0.0, 0.0]
            });
            let gv_truth = GridFunction::from_fn(cfg.grid, 2, |p| field.grad_v(p));
            (
                Some(error_report(&b_truth, &b_recon)?),
                Some(error_report(&gv_truth, &grad_v_recon)?),
            )
        }
        None => (None, None),
    };

    Ok(ReconstructionReport {
        b_recon,
        grad_v_recon,
        v_recon: None,
        b_errors,
        grad_v_errors,
        v_errors: None,
        extraction_residual_max: limits
            .residual
            .iter()
            .cloned()
            .fold(0.0, f64::max),
        flagged_lines,
        caveats: Vec::new(),
    })
}

/// Plane pipeline from position data with the magnetic field known:
/// subtracts the magnetic parts of the first-order position coefficient and
/// inverts the remaining potential transform.
pub fn reconstruct_v_from_b(
    limits: &LimitEstimates,
    known_b: &Field,
    cfg: &ReconConfig,
    truth: Option<&Field>,
) -> Result<ReconstructionReport> {
    let flagged_lines = check_quota(limits, cfg.flagged_quota)?;
    let lines = limits.lines;
    let magnetic = known_b.magnetic_only();

    let rows: Vec<Result<Vec3>> = (0..lines.len())
        .into_par_iter()
        .map(|li| {
            let (_, b1) = LineWorkspace::new(&magnetic, lines.line(li), cfg.points)?
                .position_terms();
            Ok(b1)
        })
        .collect();
    let mut minus_pv = lines.sinogram(1)?;
    for (li, row) in rows.into_iter().enumerate() {
        let b_part = row?;
        let (j, i) = (li / lines.offsets(), li % lines.offsets());
        let line = lines.line(li);
        let v_part = vec3::sub(limits.terms[li].b_first, b_part);
        minus_pv.at_mut(j, i)[0] = vec3::dot(v_part, line.theta());
    }
    let v_recon = recover_v(&minus_pv, cfg.grid, cfg.apod)?;

    let v_errors = match truth {
        Some(field) => {
            let v_truth =
                GridFunction::from_fn(cfg.grid, 1, |p| [field.potential(p), 0.0, 0.0]);
            Some(error_report(&v_truth, &v_recon)?)
        }
        None => None,
    };

    let mut caveats = Vec::new();
    if known_b.dim() == 2 {
        caveats.push(
            "plane position data do not determine (V, B) uniquely; \
             V is recovered only because B was supplied"
                .to_string(),
        );
    }
    Ok(ReconstructionReport {
        b_recon: GridFunction::zeros(cfg.grid, 1),
        grad_v_recon: GridFunction::zeros(cfg.grid, 2),
        v_recon: Some(v_recon),
        b_errors: None,
        grad_v_errors: None,
        v_errors,
        extraction_residual_max: limits.residual.iter().cloned().fold(0.0, f64::max),
        flagged_lines,
        caveats,
    })
}

/// Line family on the coordinate plane pair `(i, k)`, translated along the
/// remaining axis.
#[derive(Debug, Clone)]
pub struct PlaneFamily {
    pub pair: (usize, usize),
    pub slice_coords: Vec<f64>,
    pub angles: usize,
    pub offsets: usize,
    pub q_max: f64,
}

impl PlaneFamily {
    pub fn uniform_slices(
        pair: (usize, usize),
        half_depth: f64,
        slices: usize,
        angles: usize,
        offsets: usize,
        q_max: f64,
    ) -> PlaneFamily {
        let slice_coords = (0..slices)
            .map(|m| -half_depth + 2.0 * half_depth * m as f64 / (slices - 1) as f64)
            .collect();
        PlaneFamily {
            pair,
            slice_coords,
            angles,
            offsets,
            q_max,
        }
    }

    pub fn line(&self, slice: usize, j: usize, i: usize) -> Line {
        Line::coordinate_plane(
            self.pair.0,
            self.pair.1,
            std::f64::consts::PI * j as f64 / self.angles as f64,
            -self.q_max + 2.0 * self.q_max * i as f64 / (self.offsets - 1) as f64,
            self.slice_coords[slice],
        )
    }
}

/// Expansion coefficients sampled on one plane family: per slice, sinograms
/// of the zeroth- and first-order velocity coefficients (3 components each).
pub struct FamilyLimits {
    pub family: PlaneFamily,
    pub a_zeroth: Vec<(f64, Sinogram)>,
    pub a_first: Vec<(f64, Sinogram)>,
}

/// Samples a family's coefficients by line quadrature.
pub fn family_limits_from_field(
    field: &Field,
    family: &PlaneFamily,
    points: usize,
) -> Result<FamilyLimits> {
    let mut a_zeroth = Vec::new();
    let mut a_first = Vec::new();
    for (m, &z) in family.slice_coords.iter().enumerate() {
        let cells: Vec<(usize, usize)> = (0..family.angles)
            .flat_map(|j| (0..family.offsets).map(move |i| (j, i)))
            .collect();
        let rows: Vec<Result<(Vec3, Vec3)>> = cells
            .par_iter()
            .map(|&(j, i)| {
                let line = family.line(m, j, i);
                Ok(LineWorkspace::new(field, line, points)?.velocity_terms())
            })
            .collect();
        let mut s0 = Sinogram::empty(family.angles, family.offsets, family.q_max, 3)?;
        let mut s1 = Sinogram::empty(family.angles, family.offsets, family.q_max, 3)?;
        for (idx, row) in rows.into_iter().enumerate() {
            let (a0, a1) = row?;
            let (j, i) = cells[idx];
            s0.at_mut(j, i).copy_from_slice(&a0);
            s1.at_mut(j, i).copy_from_slice(&a1);
        }
        a_zeroth.push((z, s0));
        a_first.push((z, s1));
    }
    Ok(FamilyLimits {
        family: family.clone(),
        a_zeroth,
        a_first,
    })
}

/// Samples a family's coefficients from trajectory data over an energy
/// ladder (two-term extrapolation per line, as in the plane sweep).
pub fn family_limits_from_dynamics(
    field: &Field,
    family: &PlaneFamily,
    ladder: &[f64],
    controls: &Controls,
) -> Result<FamilyLimits> {
    if ladder.len() < 3 {
        return Err(Error::Domain("extrapolation needs a ladder of ≥ 3".into()));
    }
    let mut a_zeroth = Vec::new();
    let mut a_first = Vec::new();
    for (m, &z) in family.slice_coords.iter().enumerate() {
        let cells: Vec<(usize, usize)> = (0..family.angles)
            .flat_map(|j| (0..family.offsets).map(move |i| (j, i)))
            .collect();
        let rows: Vec<Result<(Vec3, Vec3)>> = cells
            .par_iter()
            .map(|&(j, i)| {
                let line = family.line(m, j, i);
                let mut data = Vec::with_capacity(ladder.len());
                for &s in ladder {
                    let v = vec3::scale(line.theta(), s);
                    let d = dynamics::scattering_datum(field, v, line.offset(), controls)?;
                    data.push((s, d.a_sc));
                }
                let k = data.len();
                let (s1, y1) = data[k - 2];
                let (s2, y2) = data[k - 1];
                Ok(two_point(s1, y1, s2, y2))
            })
            .collect();
        let mut s0 = Sinogram::empty(family.angles, family.offsets, family.q_max, 3)?;
        let mut s1g = Sinogram::empty(family.angles, family.offsets, family.q_max, 3)?;
        for (idx, row) in rows.into_iter().enumerate() {
            let (a0, a1) = row?;
            let (j, i) = cells[idx];
            s0.at_mut(j, i).copy_from_slice(&a0);
            s1g.at_mut(j, i).copy_from_slice(&a1);
        }
        a_zeroth.push((z, s0));
        a_first.push((z, s1g));
    }
    Ok(FamilyLimits {
        family: family.clone(),
        a_zeroth,
        a_first,
    })
}

/// Magnetic field on `ℝ³` interpolated from the three per-pair slice stacks
/// (`V ≡ 0`), with separable four-point Lagrange interpolation per axis.
pub struct GridField3 {
    stacks: [GridStack; 3],
    envelope: Envelope,
    support: f64,
}

/// Pair order used by the three-dimensional stacks.
const PAIRS3: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

impl GridField3 {
    pub fn new(stacks: [GridStack; 3]) -> Result<GridField3> {
        for (idx, st) in stacks.iter().enumerate() {
            if st.plane_axes != PAIRS3[idx] {
                return Err(Error::Domain("stacks must come in pair order".into()));
            }
            if st.slices.len() < 4 {
                return Err(Error::Coverage("stacks need at least 4 slices".into()));
            }
        }
        let mut sup: f64 = 0.0;
        let mut l: f64 = 0.0;
        for st in &stacks {
            for g in &st.slices {
                l = l.max(g.half_width);
                for v in &g.data {
                    sup = sup.max(v.abs());
                }
            }
            l = l.max(st.slice_coords.last().unwrap().abs());
        }
        let alpha = 2.0;
        let reach = l * 3.0f64.sqrt();
        let res = stacks[0].slices[0].res;
        let beta1 = sup * (1.0 + reach).powf(alpha + 1.0);
        let beta2 = sup / (2.0 * l / res as f64) * (1.0 + reach).powf(alpha + 2.0);
        Ok(GridField3 {
            stacks,
            envelope: Envelope {
                alpha,
                beta: [0.0, beta1, beta2],
            },
            support: reach + 0.5,
        })
    }

    /// `(value, gradient)` of one pair component at a spatial point.
    fn interp_pair(&self, idx: usize, x: Vec3) -> (f64, Vec3) {
        let st = &self.stacks[idx];
        let (pi, pk) = st.plane_axes;
        let axis = st.axis;
        let g0 = &st.slices[0];
        let n = g0.res;
        let h = 2.0 * g0.half_width / (n - 1) as f64;
        let zs = &st.slice_coords;
        let hz = zs[1] - zs[0];
        let pa = (x[pi] + g0.half_width) / h;
        let pb = (x[pk] + g0.half_width) / h;
        let pz = (x[axis] - zs[0]) / hz;
        let nz = zs.len();
        if pa < 0.0
            || pb < 0.0
            || pz < 0.0
            || pa > (n - 1) as f64
            || pb > (n - 1) as f64
            || pz > (nz - 1) as f64
        {
            return (0.0, vec3::ZERO);
        }
        let ja = (pa.floor() as usize).clamp(1, n - 3);
        let jb = (pb.floor() as usize).clamp(1, n - 3);
        let jz = (pz.floor() as usize).clamp(1, nz - 3);
        let (ta, tb, tz) = (pa - ja as f64, pb - jb as f64, pz - jz as f64);
        let (wa, wb, wz) = (lagrange4(ta), lagrange4(tb), lagrange4(tz));
        let (da, db, dz) = (
            lagrange4_deriv(ta),
            lagrange4_deriv(tb),
            lagrange4_deriv(tz),
        );
        let mut val = 0.0;
        let mut ga = 0.0;
        let mut gb = 0.0;
        let mut gz = 0.0;
        for (c, wzc) in wz.iter().enumerate() {
            let grid = &st.slices[jz + c - 1];
            for (b, wbb) in wb.iter().enumerate() {
                let iy = jb + b - 1;
                for (a, waa) in wa.iter().enumerate() {
                    let ix = ja + a - 1;
                    let v = grid.at(iy, ix)[0];
                    val += waa * wbb * wzc * v;
                    ga += da[a] * wbb * wzc * v;
                    gb += waa * db[b] * wzc * v;
                    gz += waa * wbb * dz[c] * v;
                }
            }
        }
        let mut grad = vec3::ZERO;
        grad[pi] = ga / h;
        grad[pk] = gb / h;
        grad[axis] = gz / hz;
        (val, grad)
    }
}

impl FieldModel for GridField3 {
    fn dim(&self) -> usize {
        3
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
        [
            self.interp_pair(0, x).0,
            self.interp_pair(1, x).0,
            self.interp_pair(2, x).0,
        ]
    }
    fn grad_b(&self, x: Vec3, i: usize, k: usize) -> Vec3 {
        for (idx, &(a, b)) in PAIRS3.iter().enumerate() {
            if (a, b) == (i, k) {
                return self.interp_pair(idx, x).1;
            }
            if (a, b) == (k, i) {
                return vec3::scale(self.interp_pair(idx, x).1, -1.0);
            }
        }
        vec3::ZERO
    }
    fn envelope(&self) -> Envelope {
        self.envelope
    }
    fn support_radius(&self) -> f64 {
        self.support
    }
}

/// Three-dimensional reconstruction output: per-pair magnetic stacks and a
/// potential-gradient stack on the first family's planes.
pub struct Reconstruction3 {
    pub b_stacks: [GridStack; 3],
    /// `∇V` slices (arity 3) on the planes of the first family.
    pub grad_v_stack: Vec<(f64, GridFunction)>,
    /// Max relative L² error per pair against truth, when supplied.
    pub b_errors: Option<[f64; 3]>,
    pub grad_v_error: Option<f64>,
}

/// Full three-dimensional pipeline from velocity data on the three
/// coordinate-plane families.
pub fn reconstruct3_from_a(
    families: &[FamilyLimits; 3],
    cfg: &ReconConfig,
    truth: Option<&Field>,
) -> Result<Reconstruction3> {
    let mut stacks = Vec::new();
    for (idx, fam) in families.iter().enumerate() {
        if fam.family.pair != PAIRS3[idx] {
            return Err(Error::Domain("families must come in pair order".into()));
        }
        stacks.push(recover_b_slices(
            fam.family.pair.0,
            fam.family.pair.1,
            &fam.a_zeroth,
            cfg.grid,
            cfg.apod,
        )?);
    }
    let b_stacks: [GridStack; 3] = [
        stacks[0].clone(),
        stacks[1].clone(),
        stacks[2].clone(),
    ];
    let bhat = Field::new(GridField3::new(b_stacks.clone())?);

    // potential gradient on the first family's planes
    let fam = &families[0];
    let mut grad_v_stack = Vec::new();
    for (m, (z, a1_sino)) in fam.a_first.iter().enumerate() {
        let cells: Vec<(usize, usize)> = (0..fam.family.angles)
            .flat_map(|j| (0..fam.family.offsets).map(move |i| (j, i)))
            .collect();
        let rows: Vec<Result<Vec3>> = cells
            .par_iter()
            .map(|&(j, i)| {
                let line = fam.family.line(m, j, i);
                let (_, a1) = LineWorkspace::new(&bhat, line, cfg.points)?.velocity_terms();
                Ok(a1)
            })
            .collect();
        let mut pgv = Sinogram::empty(fam.family.angles, fam.family.offsets, fam.family.q_max, 3)?;
        for (idx, row) in rows.into_iter().enumerate() {
            let b_part = row?;
            let (j, i) = cells[idx];
            let a1 = vec3::from_slice(a1_sino.at(j, i));
            let minus_pgrad = vec3::sub(a1, b_part);
            pgv.at_mut(j, i)
                .copy_from_slice(&[-minus_pgrad[0], -minus_pgrad[1], -minus_pgrad[2]]);
        }
        grad_v_stack.push((*z, invert_fbp(&pgv, cfg.grid, cfg.apod)?));
    }

    // relative L² pooled over the whole stack: per-slice or per-component
    // relative errors degenerate on planes where a component is nearly zero
    let (b_errors, grad_v_error) = match truth {
        Some(field) => {
            let mut pair_errs = [0.0f64; 3];
            for (idx, st) in b_stacks.iter().enumerate() {
                let (i, k) = st.plane_axes;
                let mut num2 = 0.0;
                let mut den2 = 0.0;
                for (m, g) in st.slices.iter().enumerate() {
                    let z = st.slice_coords[m];
                    let truth_grid = GridFunction::from_fn(cfg.grid, 1, |p| {
                        let mut x = vec3::ZERO;
                        x[i] = p[0];
                        x[k] = p[1];
                        x[st.axis] = z;
                        [field.b_matrix(x)[i][k], 0.0, 0.0]
                    });
                    for (t, r) in truth_grid.data.iter().zip(&g.data) {
                        num2 += (t - r) * (t - r);
                        den2 += t * t;
                    }
                }
                pair_errs[idx] = (num2 / den2.max(f64::MIN_POSITIVE)).sqrt();
            }
            let fam0 = &families[0];
            let (i, k) = fam0.family.pair;
            let axis = 3 - i - k;
            let mut num2 = 0.0;
            let mut den2 = 0.0;
            for (z, g) in &grad_v_stack {
                let truth_grid = GridFunction::from_fn(cfg.grid, 3, |p| {
                    let mut x = vec3::ZERO;
                    x[i] = p[0];
                    x[k] = p[1];
                    x[axis] = *z;
                    field.grad_v(x)
                });
                for (t, r) in truth_grid.data.iter().zip(&g.data) {
                    num2 += (t - r) * (t - r);
                    den2 += t * t;
                }
            }
            let gv = (num2 / den2.max(f64::MIN_POSITIVE)).sqrt();
            (Some(pair_errs), Some(gv))
        }
        None => (None, None),
    };

    Ok(Reconstruction3 {
        b_stacks,
        grad_v_stack,
        b_errors,
        grad_v_error,
    })
}

#[cfg(test)]
mod tests;
