//! Forward X-ray transform on oriented lines, sinogram sampling, and
//! filtered-backprojection inversion in the plane.
//!
//! The sinogram parametrization matches the rest of the crate: angles
//! `φ_j = jπ/J` on `[0, π)`, direction `θ = (cos φ, sin φ)`, offsets
//! `x = q·θ⊥` with `θ⊥ = (θ₂, −θ₁)` and `q` uniform on `[−Q, Q]`.
//! Inversion applies a ramp filter in the offset-frequency domain (with
//! optional Hann apodization, the default) followed by linearly interpolated
//! backprojection.

use rayon::prelude::*;

use crate::asymptotics::{perp, Line};
use crate::error::{Error, Result};
use crate::quad::adaptive_simpson;
use crate::vec3::{self, Vec3};

/// A function `ℝⁿ → ℝᵐ` (`m ≤ 3`) integrable along lines.
pub struct LineTarget<'a> {
    pub arity: usize,
    /// Radius beyond which the function is numerically negligible.
    pub support_radius: f64,
    /// Declared decay exponent `β` with `|f| = O(|x|^{-β})`; must exceed 1.
    pub decay_exponent: f64,
    pub eval: Box<dyn Fn(Vec3) -> Vec3 + Sync + 'a>,
}

impl<'a> LineTarget<'a> {
    pub fn scalar(
        support_radius: f64,
        decay_exponent: f64,
        f: impl Fn(Vec3) -> f64 + Sync + 'a,
    ) -> Self {
        LineTarget {
            arity: 1,
            support_radius,
            decay_exponent,
            eval: Box::new(move |x| [f(x), 0.0, 0.0]),
        }
    }
}

/// Integral of `f` along the line by adaptive quadrature, truncated where
/// the support ends.
pub fn xray_forward(f: &LineTarget, line: &Line, tol: f64) -> Result<Vec3> {
    if f.decay_exponent <= 1.0 {
        return Err(Error::Domain(format!(
            "line integral needs decay exponent > 1, got {}",
            f.decay_exponent
        )));
    }
    let q = vec3::norm(line.offset());
    let rr = f.support_radius + 1.0;
    let half = ((rr * rr - q * q).max(1.0)).sqrt();
    Ok(adaptive_simpson(
        &|t| (f.eval)(line.point(t)),
        -half,
        half,
        tol,
        40,
        6,
    ))
}

/// Sampled X-ray transform over the `(angle, offset)` grid.
#[derive(Debug, Clone)]
pub struct Sinogram {
    pub angles: usize,
    pub offsets: usize,
    pub q_max: f64,
    pub arity: usize,
    /// Row-major `[angle][offset][component]`.
    pub data: Vec<f64>,
}

impl Sinogram {
    pub fn empty(angles: usize, offsets: usize, q_max: f64, arity: usize) -> Result<Sinogram> {
        if angles < 4 || offsets < 4 {
            return Err(Error::Domain(
                "sinogram needs at least 4 angles and 4 offsets".into(),
            ));
        }
        if !(q_max > 0.0) || arity == 0 || arity > 3 {
            return Err(Error::Domain("bad sinogram geometry".into()));
        }
        Ok(Sinogram {
            angles,
            offsets,
            q_max,
            arity,
            data: vec![0.0; angles * offsets * arity],
        })
    }

    pub fn angle(&self, j: usize) -> f64 {
        std::f64::consts::PI * j as f64 / self.angles as f64
    }

    pub fn offset(&self, i: usize) -> f64 {
        -self.q_max + 2.0 * self.q_max * i as f64 / (self.offsets - 1) as f64
    }

    pub fn line(&self, j: usize, i: usize) -> Line {
        Line::plane(self.angle(j), self.offset(i))
    }

    pub fn at(&self, j: usize, i: usize) -> &[f64] {
        let base = (j * self.offsets + i) * self.arity;
        &self.data[base..base + self.arity]
    }

    pub fn at_mut(&mut self, j: usize, i: usize) -> &mut [f64] {
        let base = (j * self.offsets + i) * self.arity;
        &mut self.data[base..base + self.arity]
    }

    /// Maps every cell into a new sinogram of a possibly different arity.
    pub fn map_cells(
        &self,
        arity: usize,
        f: impl Fn(f64, f64, &[f64], &mut [f64]),
    ) -> Result<Sinogram> {
        let mut out = Sinogram::empty(self.angles, self.offsets, self.q_max, arity)?;
        for j in 0..self.angles {
            let ang = self.angle(j);
            for i in 0..self.offsets {
                let q = self.offset(i);
                let mut cell = [0.0; 3];
                f(ang, q, self.at(j, i), &mut cell[..arity]);
                out.at_mut(j, i).copy_from_slice(&cell[..arity]);
            }
        }
        Ok(out)
    }
}

/// Dense forward sampling of a target over a sinogram grid. Deterministic;
/// rows are computed in parallel.
pub fn build_sinogram(
    f: &LineTarget,
    angles: usize,
    offsets: usize,
    q_max: f64,
) -> Result<Sinogram> {
    let mut sino = Sinogram::empty(angles, offsets, q_max, f.arity)?;
    let arity = f.arity;
    let rows: Vec<Result<Vec<f64>>> = (0..angles)
        .into_par_iter()
        .map(|j| {
            let mut row = vec![0.0; offsets * arity];
            for i in 0..offsets {
                let line = Line::plane(
                    std::f64::consts::PI * j as f64 / angles as f64,
                    -q_max + 2.0 * q_max * i as f64 / (offsets - 1) as f64,
                );
                let v = xray_forward(f, &line, 1e-12)?;
                row[i * arity..(i + 1) * arity].copy_from_slice(&v[..arity]);
            }
            Ok(row)
        })
        .collect();
    for (j, row) in rows.into_iter().enumerate() {
        let row = row?;
        sino.data[j * offsets * arity..(j + 1) * offsets * arity].copy_from_slice(&row);
    }
    Ok(sino)
}

/// Ramp-filter apodization window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Apodization {
    None,
    #[default]
    Hann,
}

/// Output grid specification: nodes uniform over `[-L, L]²`.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub half_width: f64,
    pub res: usize,
}

/// Function values on a uniform Cartesian grid over `[-L, L]²`
/// (node-centered, `res` nodes per axis).
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub half_width: f64,
    pub res: usize,
    pub arity: usize,
    /// Row-major `[iy][ix][component]`.
    pub data: Vec<f64>,
    /// Set when the sinogram sampling cannot resolve the requested grid.
    pub undersampled: bool,
}

impl GridFunction {
    pub fn zeros(spec: GridSpec, arity: usize) -> GridFunction {
        GridFunction {
            half_width: spec.half_width,
            res: spec.res,
            arity,
            data: vec![0.0; spec.res * spec.res * arity],
            undersampled: false,
        }
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + 2.0 * self.half_width * i as f64 / (self.res - 1) as f64
    }

    pub fn at(&self, iy: usize, ix: usize) -> &[f64] {
        let base = (iy * self.res + ix) * self.arity;
        &self.data[base..base + self.arity]
    }

    pub fn at_mut(&mut self, iy: usize, ix: usize) -> &mut [f64] {
        let base = (iy * self.res + ix) * self.arity;
        &mut self.data[base..base + self.arity]
    }

    /// Samples an analytic function on the grid (for truth comparisons).
    pub fn from_fn(spec: GridSpec, arity: usize, f: impl Fn(Vec3) -> Vec3) -> GridFunction {
        let mut g = GridFunction::zeros(spec, arity);
        for iy in 0..spec.res {
            let y = g.coord(iy);
            for ix in 0..spec.res {
                let x = g.coord(ix);
                let v = f([x, y, 0.0]);
                g.at_mut(iy, ix).copy_from_slice(&v[..arity]);
            }
        }
        g
    }
}

/// In-place iterative radix-2 complex FFT (`inverse` divides by the length).
fn fft(re: &mut [f64], im: &mut [f64], inverse: bool) {
    let n = re.len();
    debug_assert!(n.is_power_of_two());
    // bit-reversal permutation
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            re.swap(i, j);
            im.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let ang = sign * std::f64::consts::TAU / len as f64;
        let (wr, wi) = (ang.cos(), ang.sin());
        for start in (0..n).step_by(len) {
            let (mut cr, mut ci) = (1.0f64, 0.0f64);
            for k in 0..len / 2 {
                let (ur, ui) = (re[start + k], im[start + k]);
                let (vr0, vi0) = (re[start + k + len / 2], im[start + k + len / 2]);
                let vr = vr0 * cr - vi0 * ci;
                let vi = vr0 * ci + vi0 * cr;
                re[start + k] = ur + vr;
                im[start + k] = ui + vi;
                re[start + k + len / 2] = ur - vr;
                im[start + k + len / 2] = ui - vi;
                let (ncr, nci) = (cr * wr - ci * wi, cr * wi + ci * wr);
                cr = ncr;
                ci = nci;
            }
        }
        len <<= 1;
    }
    if inverse {
        let inv = 1.0 / n as f64;
        for v in re.iter_mut() {
            *v *= inv;
        }
        for v in im.iter_mut() {
            *v *= inv;
        }
    }
}

/// Ramp-filters one offset row (values at uniform spacing `dq`).
fn ramp_filter_row(row: &[f64], dq: f64, apod: Apodization) -> Vec<f64> {
    let n = row.len();
    let padded = (2 * n).next_power_of_two();
    let mut re = vec![0.0; padded];
    let mut im = vec![0.0; padded];
    re[..n].copy_from_slice(row);
    fft(&mut re, &mut im, false);
    let nyquist = 1.0 / (2.0 * dq);
    for k in 0..padded {
        let freq = if k <= padded / 2 { k } else { padded - k } as f64 / (padded as f64 * dq);
        let window = match apod {
            Apodization::None => 1.0,
            Apodization::Hann => {
                if freq <= nyquist {
                    0.5 * (1.0 + (std::f64::consts::PI * freq / nyquist).cos())
                } else {
                    0.0
                }
            }
        };
        let gain = freq * window;
        re[k] *= gain;
        im[k] *= gain;
    }
    fft(&mut re, &mut im, true);
    re.truncate(n);
    re
}

/// Filtered backprojection of a (possibly vector-valued) plane sinogram.
pub fn invert_fbp(sino: &Sinogram, spec: GridSpec, apod: Apodization) -> Result<GridFunction> {
    if spec.res < 2 {
        return Err(Error::Domain("output grid needs at least 2 nodes".into()));
    }
    let undersampled =
        sino.offsets < spec.res || sino.q_max < spec.half_width * std::f64::consts::SQRT_2;
    let dq = 2.0 * sino.q_max / (sino.offsets - 1) as f64;
    let arity = sino.arity;

    // filter all rows per component
    let mut filtered = vec![0.0; sino.angles * sino.offsets * arity];
    let rows: Vec<Vec<f64>> = (0..sino.angles * arity)
        .into_par_iter()
        .map(|idx| {
            let (j, comp) = (idx / arity, idx % arity);
            let row: Vec<f64> = (0..sino.offsets)
                .map(|i| sino.at(j, i)[comp])
                .collect();
            ramp_filter_row(&row, dq, apod)
        })
        .collect();
    for (idx, row) in rows.into_iter().enumerate() {
        let (j, comp) = (idx / arity, idx % arity);
        for (i, v) in row.into_iter().enumerate() {
            filtered[(j * sino.offsets + i) * arity + comp] = v;
        }
    }

    let mut out = GridFunction::zeros(spec, arity);
    out.undersampled = undersampled;
    let res = spec.res;
    let weight = std::f64::consts::PI / sino.angles as f64;
    let values: Vec<Vec<f64>> = (0..res)
        .into_par_iter()
        .map(|iy| {
            let y = -spec.half_width + 2.0 * spec.half_width * iy as f64 / (res - 1) as f64;
            let mut rowvals = vec![0.0; res * arity];
            for j in 0..sino.angles {
                let ang = sino.angle(j);
                let theta = [ang.cos(), ang.sin(), 0.0];
                let pp = perp(theta);
                for ix in 0..res {
                    let x =
                        -spec.half_width + 2.0 * spec.half_width * ix as f64 / (res - 1) as f64;
                    let q = x * pp[0] + y * pp[1];
                    // linear interpolation in offset
                    let pos = (q + sino.q_max) / dq;
                    if pos < 0.0 || pos > (sino.offsets - 1) as f64 {
                        continue;
                    }
                    let i0 = (pos.floor() as usize).min(sino.offsets - 2);
                    let w = pos - i0 as f64;
                    for comp in 0..arity {
                        let f0 = filtered[(j * sino.offsets + i0) * arity + comp];
                        let f1 = filtered[(j * sino.offsets + i0 + 1) * arity + comp];
                        rowvals[ix * arity + comp] += weight * ((1.0 - w) * f0 + w * f1);
                    }
                }
            }
            rowvals
        })
        .collect();
    for (iy, rowvals) in values.into_iter().enumerate() {
        let base = iy * res * arity;
        out.data[base..base + res * arity].copy_from_slice(&rowvals);
    }
    Ok(out)
}

/// Per-line magnetic transform values from sampled `a_sc` limits:
/// `PB_{i,k}(θ, x) = θ_k·w_i − θ_i·w_k` specialized to the plane pair
/// `(0, 1)`, producing a scalar sinogram of `B₀₁`.
pub fn magnetic_sinogram_from_limits(w_limits: &Sinogram) -> Result<Sinogram> {
    if w_limits.arity < 2 {
        return Err(Error::Domain(
            "per-line limit values must carry at least 2 components".into(),
        ));
    }
    w_limits.map_cells(1, |ang, _q, w, out| {
        let theta = [ang.cos(), ang.sin()];
        out[0] = theta[1] * w[0] - theta[0] * w[1];
    })
}

/// Recovers the plane magnetic component `B₀₁` from per-line `a_sc` limits.
pub fn recover_b_plane(
    w_limits: &Sinogram,
    spec: GridSpec,
    apod: Apodization,
) -> Result<GridFunction> {
    let pb = magnetic_sinogram_from_limits(w_limits)?;
    invert_fbp(&pb, spec, apod)
}

/// A stack of parallel plane reconstructions along one coordinate axis
/// (the three-dimensional slice-by-slice output).
#[derive(Debug, Clone)]
pub struct GridStack {
    /// Axis normal to the reconstruction planes.
    pub axis: usize,
    /// In-plane axes, in (abscissa, ordinate) order.
    pub plane_axes: (usize, usize),
    pub slice_coords: Vec<f64>,
    pub slices: Vec<GridFunction>,
}

impl GridStack {
    /// Trilinear-ready accessor: nearest slice index for a coordinate.
    pub fn slice_below(&self, z: f64) -> usize {
        match self
            .slice_coords
            .binary_search_by(|a| a.partial_cmp(&z).unwrap())
        {
            Ok(i) => i.min(self.slice_coords.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.slice_coords.len() - 2),
        }
    }
}

/// Recovers one magnetic component `B_{i,k}` from per-line limits sampled on
/// the coordinate-plane family `(i, k)` translated along the normal axis:
/// one sinogram per slice, each carrying the full limit vector.
pub fn recover_b_slices(
    i: usize,
    k: usize,
    slices: &[(f64, Sinogram)],
    spec: GridSpec,
    apod: Apodization,
) -> Result<GridStack> {
    if slices.len() < 2 {
        return Err(Error::Coverage(
            "slice-by-slice reconstruction needs at least 2 planes".into(),
        ));
    }
    let mut coords = Vec::with_capacity(slices.len());
    let mut grids = Vec::with_capacity(slices.len());
    for (z, sino) in slices {
        if sino.arity < 3 {
            return Err(Error::Domain(
                "three-dimensional limit sinograms need 3 components".into(),
            ));
        }
        let pb = sino.map_cells(1, |ang, _q, w, out| {
            // θ = cos·e_i + sin·e_k within the (i,k) plane
            let (ti, tk) = (ang.cos(), ang.sin());
            out[0] = tk * w[i] - ti * w[k];
        })?;
        coords.push(*z);
        grids.push(invert_fbp(&pb, spec, apod)?);
    }
    Ok(GridStack {
        axis: 3 - i - k,
        plane_axes: (i, k),
        slice_coords: coords,
        slices: grids,
    })
}

/// Recovers `V` from per-line values of `−PV`.
pub fn recover_v(minus_pv: &Sinogram, spec: GridSpec, apod: Apodization) -> Result<GridFunction> {
    if minus_pv.arity != 1 {
        return Err(Error::Domain("potential sinogram must be scalar".into()));
    }
    let pv = minus_pv.map_cells(1, |_a, _q, v, out| out[0] = -v[0])?;
    invert_fbp(&pv, spec, apod)
}

/// Relative L² and sup errors between two grids of identical layout.
pub fn grid_errors(truth: &GridFunction, recon: &GridFunction) -> Result<Vec<(f64, f64)>> {
    if truth.res != recon.res
        || truth.arity != recon.arity
        || (truth.half_width - recon.half_width).abs() > 1e-12
    {
        return Err(Error::GridMismatch(format!(
            "truth {}×{} L={} vs recon {}×{} L={}",
            truth.res, truth.arity, truth.half_width, recon.res, recon.arity, recon.half_width
        )));
    }
    let mut out = Vec::with_capacity(truth.arity);
    for comp in 0..truth.arity {
        let mut num2 = 0.0;
        let mut den2 = 0.0;
        let mut nmax: f64 = 0.0;
        let mut dmax: f64 = 0.0;
        for iy in 0..truth.res {
            for ix in 0..truth.res {
                let t = truth.at(iy, ix)[comp];
                let r = recon.at(iy, ix)[comp];
                num2 += (t - r) * (t - r);
                den2 += t * t;
                nmax = nmax.max((t - r).abs());
                dmax = dmax.max(t.abs());
            }
        }
        let l2 = if den2 > 0.0 {
            (num2 / den2).sqrt()
        } else {
            num2.sqrt()
        };
        let sup = if dmax > 0.0 { nmax / dmax } else { nmax };
        out.push((l2, sup));
    }
    Ok(out)
}
