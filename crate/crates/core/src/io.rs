//! CSV wire formats for sinograms, grids, scattering batches and cached
//! energy sweeps.
//!
//! Every writer emits an optional `#`-prefixed metadata line first (the
//! driver embeds its config hash and seed there), then a header of the
//! geometry, then the rows. Floats are written with Rust's shortest
//! round-trippable formatting, so identical inputs produce byte-identical
//! files.

use std::io::{BufRead, Write};

use crate::dynamics::ScatteringDatum;
use crate::error::{Error, Result};
use crate::inversion::{EnergySweep, LineSet};
use crate::vec3;
use crate::xray::{GridFunction, Sinogram};

/// FNV-1a 64-bit hash, used to fingerprint run configurations in artifact
/// headers.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn write_meta(w: &mut impl Write, meta: &str) -> Result<()> {
    if !meta.is_empty() {
        writeln!(w, "# {meta}")?;
    }
    Ok(())
}

fn content_lines<R: BufRead>(r: R) -> impl Iterator<Item = std::io::Result<String>> {
    r.lines().filter(|l| match l {
        Ok(s) => !s.starts_with('#') && !s.trim().is_empty(),
        Err(_) => true,
    })
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::Format(format!("bad float {s:?}: {e}")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim()
        .parse::<usize>()
        .map_err(|e| Error::Format(format!("bad count {s:?}: {e}")))
}

/// `J,I,Q,m` header then `j,i,components…` rows.
pub fn write_sinogram(w: &mut impl Write, s: &Sinogram, meta: &str) -> Result<()> {
    write_meta(w, meta)?;
    writeln!(w, "{},{},{},{}", s.angles, s.offsets, s.q_max, s.arity)?;
    for j in 0..s.angles {
        for i in 0..s.offsets {
            write!(w, "{j},{i}")?;
            for v in s.at(j, i) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

pub fn read_sinogram(r: impl BufRead) -> Result<Sinogram> {
    let mut lines = content_lines(r);
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty sinogram file".into()))??;
    let parts: Vec<&str> = header.split(',').collect();
    if parts.len() != 4 {
        return Err(Error::Format("sinogram header needs J,I,Q,m".into()));
    }
    let (angles, offsets) = (parse_usize(parts[0])?, parse_usize(parts[1])?);
    let (q_max, arity) = (parse_f64(parts[2])?, parse_usize(parts[3])?);
    let mut sino = Sinogram::empty(angles, offsets, q_max, arity)?;
    for line in lines {
        let line = line?;
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 2 + arity {
            return Err(Error::Format(format!("bad sinogram row: {line}")));
        }
        let (j, i) = (parse_usize(parts[0])?, parse_usize(parts[1])?);
        if j >= angles || i >= offsets {
            return Err(Error::Format(format!("sinogram index out of range: {line}")));
        }
        for (c, p) in parts[2..].iter().enumerate() {
            sino.at_mut(j, i)[c] = parse_f64(p)?;
        }
    }
    Ok(sino)
}

/// `L,res,m` header then row-major `components…` rows.
pub fn write_grid(w: &mut impl Write, g: &GridFunction, meta: &str) -> Result<()> {
    write_meta(w, meta)?;
    writeln!(w, "{},{},{}", g.half_width, g.res, g.arity)?;
    for iy in 0..g.res {
        for ix in 0..g.res {
            let cell = g.at(iy, ix);
            let row: Vec<String> = cell.iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{}", row.join(","))?;
        }
    }
    Ok(())
}

pub fn read_grid(r: impl BufRead) -> Result<GridFunction> {
    let mut lines = content_lines(r);
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty grid file".into()))??;
    let parts: Vec<&str> = header.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::Format("grid header needs L,res,m".into()));
    }
    let half_width = parse_f64(parts[0])?;
    let res = parse_usize(parts[1])?;
    let arity = parse_usize(parts[2])?;
    let mut g = GridFunction {
        half_width,
        res,
        arity,
        data: Vec::with_capacity(res * res * arity),
        undersampled: false,
    };
    for line in lines {
        let line = line?;
        for p in line.split(',') {
            g.data.push(parse_f64(p)?);
        }
    }
    if g.data.len() != res * res * arity {
        return Err(Error::Format(format!(
            "grid has {} values, expected {}",
            g.data.len(),
            res * res * arity
        )));
    }
    Ok(g)
}

/// Batch scattering output: one row per datum.
pub fn write_scattering_csv(
    w: &mut impl Write,
    data: &[ScatteringDatum],
    meta: &str,
) -> Result<()> {
    write_meta(w, meta)?;
    writeln!(
        w,
        "s,theta0,theta1,theta2,x0,x1,x2,a0,a1,a2,b0,b1,b2,energy_drift,fit_residual,max_angle,flagged"
    )?;
    for d in data {
        let s = vec3::norm(d.v_minus);
        let theta = vec3::scale(d.v_minus, 1.0 / s);
        let cols: Vec<String> = [
            s, theta[0], theta[1], theta[2], d.x_minus[0], d.x_minus[1], d.x_minus[2],
            d.a_sc[0], d.a_sc[1], d.a_sc[2], d.b_sc[0], d.b_sc[1], d.b_sc[2],
            d.energy_drift, d.fit_residual, d.max_angle,
        ]
        .iter()
        .map(|v| format!("{v}"))
        .collect();
        writeln!(w, "{},{}", cols.join(","), u8::from(d.flagged))?;
    }
    Ok(())
}

/// Cached energy sweep: geometry header, then one row per `(rung, line)`.
pub fn write_sweep(w: &mut impl Write, sweep: &EnergySweep, meta: &str) -> Result<()> {
    write_meta(w, meta)?;
    writeln!(
        w,
        "sweep,{},{},{},{}",
        sweep.lines.angles(),
        sweep.lines.offsets(),
        sweep.lines.q_max(),
        sweep.ladder.len()
    )?;
    writeln!(w, "s,line,a0,a1,a2,b0,b1,b2,flagged")?;
    for (si, &s) in sweep.ladder.iter().enumerate() {
        for li in 0..sweep.lines.len() {
            let a = sweep.a[si * sweep.lines.len() + li];
            let b = sweep.b[si * sweep.lines.len() + li];
            let flagged = sweep.flagged[si * sweep.lines.len() + li];
            writeln!(
                w,
                "{s},{li},{},{},{},{},{},{},{}",
                a[0],
                a[1],
                a[2],
                b[0],
                b[1],
                b[2],
                u8::from(flagged)
            )?;
        }
    }
    Ok(())
}

pub fn read_sweep(r: impl BufRead) -> Result<EnergySweep> {
    let mut lines = content_lines(r);
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty sweep file".into()))??;
    let parts: Vec<&str> = header.split(',').collect();
    if parts.len() != 5 || parts[0] != "sweep" {
        return Err(Error::Format("sweep header needs sweep,J,I,Q,len".into()));
    }
    let geometry = LineSet::new(
        parse_usize(parts[1])?,
        parse_usize(parts[2])?,
        parse_f64(parts[3])?,
    )?;
    let ladder_len = parse_usize(parts[4])?;
    let nlines = geometry.len();
    let _column_header = lines.next();
    let mut ladder: Vec<f64> = Vec::new();
    let mut a = vec![vec3::ZERO; ladder_len * nlines];
    let mut b = vec![vec3::ZERO; ladder_len * nlines];
    let mut flagged = vec![false; ladder_len * nlines];
    let mut row = 0usize;
    for line in lines {
        let line = line?;
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 9 {
            return Err(Error::Format(format!("bad sweep row: {line}")));
        }
        let s = parse_f64(parts[0])?;
        let li = parse_usize(parts[1])?;
        let si = row / nlines;
        if li != row % nlines || si >= ladder_len {
            return Err(Error::Format("sweep rows out of order".into()));
        }
        if li == 0 {
            ladder.push(s);
        } else if (ladder[si] - s).abs() > 1e-12 * s {
            return Err(Error::Format("inconsistent rung speed".into()));
        }
        let mut va = vec3::ZERO;
        let mut vb = vec3::ZERO;
        for c in 0..3 {
            va[c] = parse_f64(parts[2 + c])?;
            vb[c] = parse_f64(parts[5 + c])?;
        }
        a[si * nlines + li] = va;
        b[si * nlines + li] = vb;
        flagged[si * nlines + li] = parts[8].trim() == "1";
        row += 1;
    }
    if row != ladder_len * nlines {
        return Err(Error::Format(format!(
            "sweep has {row} rows, expected {}",
            ladder_len * nlines
        )));
    }
    EnergySweep::from_parts(geometry, ladder, a, b, flagged)
}

/// Scalar profile samples as `x,value` rows.
pub fn write_profile(
    w: &mut impl Write,
    xs: &[f64],
    vals: &[f64],
    meta: &str,
) -> Result<()> {
    write_meta(w, meta)?;
    writeln!(w, "x,value")?;
    for (x, v) in xs.iter().zip(vals) {
        writeln!(w, "{x},{v}")?;
    }
    Ok(())
}

/// Round-trippable float formatting used across all artifacts.
pub fn format_float(v: f64) -> String {
    format!("{v}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xray::GridSpec;

    #[test]
    fn fnv_is_stable() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
        assert_ne!(fnv1a(b"config1"), fnv1a(b"config2"));
    }

    #[test]
    fn float_formatting_round_trips() {
        for &v in &[0.1, 1.0 / 3.0, 6.02e23, -1e-300, 0.0, 12345.6789e-7] {
            let s = format_float(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
    }

    #[test]
    fn sinogram_round_trip() {
        let mut s = Sinogram::empty(6, 5, 3.5, 2).unwrap();
        for j in 0..6 {
            for i in 0..5 {
                s.at_mut(j, i)
                    .copy_from_slice(&[j as f64 + 0.1 * i as f64, -(i as f64) / 3.0]);
            }
        }
        let mut buf = Vec::new();
        write_sinogram(&mut buf, &s, "config=deadbeef seed=7").unwrap();
        let back = read_sinogram(&buf[..]).unwrap();
        assert_eq!(back.angles, 6);
        assert_eq!(back.offsets, 5);
        assert_eq!(back.q_max, 3.5);
        assert_eq!(back.data, s.data);
    }

    #[test]
    fn grid_round_trip() {
        let g = GridFunction::from_fn(
            GridSpec {
                half_width: 2.0,
                res: 7,
            },
            2,
            |x| [x[0] * x[1], x[0] - x[1], 0.0],
        );
        let mut buf = Vec::new();
        write_grid(&mut buf, &g, "").unwrap();
        let back = read_grid(&buf[..]).unwrap();
        assert_eq!(back.data, g.data);
        assert_eq!(back.res, 7);
    }

    #[test]
    fn malformed_files_rejected() {
        assert!(read_sinogram(&b"not,a,header"[..]).is_err());
        assert!(read_grid(&b"2.0,4"[..]).is_err());
        let mut buf = Vec::new();
        let g = GridFunction::zeros(
            GridSpec {
                half_width: 1.0,
                res: 4,
            },
            1,
        );
        write_grid(&mut buf, &g, "").unwrap();
        buf.truncate(buf.len() - 4); // drop values
        assert!(read_grid(&buf[..]).is_err());
    }
}
