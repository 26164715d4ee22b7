//! Command-line driver: run configuration, dataset caching and report
//! emission for the scattering pipelines.
//!
//! Exit codes: `0` success, `2` configuration error, `3` numeric failure,
//! `4` coverage or precondition failure.

pub mod config;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use emscat_core::asymptotics::{self, LineWorkspace};
use emscat_core::counterexample;
use emscat_core::dynamics::{self, Controls};
use emscat_core::error::Error as CoreError;
use emscat_core::fields::Field;
use emscat_core::inversion::{self, LineSet, PlaneFamily, ReconConfig};
use emscat_core::io as cio;
use emscat_core::picard;
use emscat_core::vec3::{self, Vec3};
use emscat_core::xray::GridSpec;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "emscat", about = "charged-particle scattering workbench", version)]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, default_value = "emscat.toml")]
    pub config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads for batch stages (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed override.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Clone, Copy)]
pub enum Command {
    /// Integrate scattering data over the line fan at the configured speeds.
    Simulate,
    /// Evaluate the expansion functionals, finite-energy and Born terms per line.
    Asymptotics,
    /// Tabulate the contraction-bound constants and threshold roots.
    Bounds,
    /// Reconstruct the field from synthetic scattering data.
    Invert,
    /// Build the plane non-uniqueness pair and verify the data equality.
    Counterexample,
    /// Check the certified inequality suite on sampled configurations.
    #[command(name = "verify-theorem31")]
    VerifyTheorem31,
}

/// Failure with its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn config(msg: impl Into<String>) -> Failure {
        Failure {
            code: 2,
            message: msg.into(),
        }
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Failure {
        let code = match &e {
            CoreError::Format(_) => 2,
            CoreError::Convergence(_) | CoreError::Quadrature(_) | CoreError::Io(_) => 3,
            CoreError::Domain(_)
            | CoreError::NonFinite(_)
            | CoreError::Coverage(_)
            | CoreError::GridMismatch(_) => 4,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure {
            code: 3,
            message: e.to_string(),
        }
    }
}

pub fn run() -> i32 {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

/// Loaded configuration plus the artifact header material.
pub struct Context {
    pub cfg: RunConfig,
    pub meta: String,
    pub out: PathBuf,
}

pub fn load_context(cli: &Cli) -> Result<Context, Failure> {
    let raw = fs::read(&cli.config)
        .map_err(|e| Failure::config(format!("cannot read {}: {e}", cli.config.display())))?;
    let mut cfg: RunConfig = toml::from_str(
        std::str::from_utf8(&raw).map_err(|e| Failure::config(format!("config not UTF-8: {e}")))?,
    )
    .map_err(|e| Failure::config(format!("config parse error: {e}")))?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    config::validate(&cfg).map_err(Failure::config)?;
    if let Some(n) = cli.threads {
        // ignore failure when a pool already exists (tests call this twice)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    fs::create_dir_all(&cli.out)?;
    let meta = format!(
        "config={:016x} seed={}",
        cio::fnv1a(&raw),
        cfg.seed
    );
    Ok(Context {
        cfg,
        meta,
        out: cli.out.clone(),
    })
}

pub fn execute(cli: &Cli) -> Result<(), Failure> {
    let ctx = load_context(cli)?;
    match cli.command {
        Command::Simulate => simulate(&ctx),
        Command::Asymptotics => asymptotics_cmd(&ctx),
        Command::Bounds => bounds_cmd(&ctx),
        Command::Invert => invert(&ctx),
        Command::Counterexample => counterexample_cmd(&ctx),
        Command::VerifyTheorem31 => verify_theorem(&ctx),
    }
}

fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>, Failure> {
    Ok(std::io::BufWriter::new(fs::File::create(path)?))
}

fn line_set(cfg: &RunConfig) -> Result<LineSet, Failure> {
    Ok(LineSet::new(
        cfg.lines.angles,
        cfg.lines.offsets,
        cfg.lines.q_max,
    )?)
}

fn simulate(ctx: &Context) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    let field = cfg.field.build().map_err(Failure::config)?;
    let controls = cfg.integration.controls().map_err(Failure::config)?;
    let lines = line_set(cfg)?;
    use rayon::prelude::*;
    let jobs: Vec<(f64, usize)> = cfg
        .simulate
        .speeds
        .iter()
        .flat_map(|&s| (0..lines.len()).map(move |li| (s, li)))
        .collect();
    let rows: Vec<Result<dynamics::ScatteringDatum, CoreError>> = jobs
        .par_iter()
        .map(|&(s, li)| {
            let line = lines.line(li);
            dynamics::scattering_datum(
                &field,
                vec3::scale(line.theta(), s),
                line.offset(),
                &controls,
            )
        })
        .collect();
    let mut data = Vec::with_capacity(rows.len());
    for r in rows {
        data.push(r?);
    }
    let mut w = create(&ctx.out.join("scattering.csv"))?;
    cio::write_scattering_csv(&mut w, &data, &ctx.meta)?;
    w.flush()?;
    println!(
        "simulate: {} data ({} flagged) -> scattering.csv",
        data.len(),
        data.iter().filter(|d| d.flagged).count()
    );
    Ok(())
}

fn asymptotics_cmd(ctx: &Context) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    let field = cfg.field.build().map_err(Failure::config)?;
    let lines = line_set(cfg)?;
    let s = cfg.ladder.base;
    let points = cfg.quadrature.points;
    use rayon::prelude::*;
    let rows: Vec<Result<String, CoreError>> = (0..lines.len())
        .into_par_iter()
        .map(|li| {
            let line = lines.line(li);
            let ws = LineWorkspace::new(&field, line, points)?;
            let t = ws.all_terms();
            let fe = ws.finite_energy(s);
            let born = ws.born(s);
            let th = line.theta();
            let x = line.offset();
            let mut cols: Vec<String> = Vec::with_capacity(30);
            for v in [
                [th[0], th[1], th[2]],
                [x[0], x[1], x[2]],
                t.a_zeroth,
                t.a_first,
                t.b_zeroth,
                t.b_first,
                fe.a_est,
                fe.b_est,
                born.a_born,
                born.b_born,
            ] {
                for c in v {
                    cols.push(format!("{c}"));
                }
            }
            Ok(cols.join(","))
        })
        .collect();
    let mut w = create(&ctx.out.join("w_terms.csv"))?;
    writeln!(w, "# {}", ctx.meta)?;
    writeln!(
        w,
        "theta0,theta1,theta2,x0,x1,x2,\
         a0_0,a0_1,a0_2,a1_0,a1_1,a1_2,b0_0,b0_1,b0_2,b1_0,b1_1,b1_2,\
         w1_0,w1_1,w1_2,w2_0,w2_1,w2_2,born1_0,born1_1,born1_2,born2_0,born2_1,born2_2"
    )?;
    for r in rows {
        writeln!(w, "{}", r?)?;
    }
    w.flush()?;
    println!("asymptotics: {} lines -> w_terms.csv", lines.len());
    Ok(())
}

fn bounds_cmd(ctx: &Context) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    let field = cfg.field.build().map_err(Failure::config)?;
    let env = field.envelope();
    let n = field.dim();
    let mut bw = create(&ctx.out.join("bounds.csv"))?;
    writeln!(bw, "# {}", ctx.meta)?;
    writeln!(
        bw,
        "offset,speed,rho1,rho2,lam1,lam2,lam3,lam4,lambda,\
         delta_slope_fix,delta_slope_model,delta_intercept_fix,delta_intercept_model"
    )?;
    let mut tw = create(&ctx.out.join("thresholds.csv"))?;
    writeln!(tw, "# {}", ctx.meta)?;
    writeln!(tw, "offset,big_r,small_r,z1,z2,z3")?;
    for &offset in &cfg.bounds.offsets {
        let (big_r, small_r) = if cfg.bounds.big_r > 0.0 {
            (cfg.bounds.big_r, cfg.bounds.small_r)
        } else {
            picard::default_ball(&field, offset)
        };
        let th = picard::thresholds(
            n,
            env.alpha,
            env.beta[1],
            env.beta[2],
            big_r,
            small_r,
            offset,
        )?;
        writeln!(
            tw,
            "{offset},{big_r},{small_r},{},{},{}",
            th.z1, th.z2, th.z3
        )?;
        let speeds: Vec<f64> = if cfg.bounds.speeds.is_empty() {
            let lo = th.max().max(2.0f64.sqrt() * big_r * 1.05);
            (0..20).map(|k| lo * 1.3f64.powi(k)).collect()
        } else {
            cfg.bounds.speeds.clone()
        };
        for s in speeds {
            if s <= 2.0f64.sqrt() * big_r {
                continue;
            }
            let b = picard::bounds(picard::BoundInputs {
                n,
                alpha: env.alpha,
                beta1: env.beta[1],
                beta2: env.beta[2],
                speed: s,
                offset,
                big_r,
                small_r,
            })?;
            writeln!(
                bw,
                "{offset},{s},{},{},{},{},{},{},{},{},{},{},{}",
                b.rho1,
                b.rho2,
                b.lam[0],
                b.lam[1],
                b.lam[2],
                b.lam[3],
                b.lambda,
                b.delta_slope_fix,
                b.delta_slope_model,
                b.delta_intercept_fix,
                b.delta_intercept_model
            )?;
        }
    }
    bw.flush()?;
    tw.flush()?;
    println!("bounds: tables -> bounds.csv, thresholds.csv");
    Ok(())
}

/// First header line of a cached artifact, when present.
fn cached_meta(path: &Path) -> Option<String> {
    let text = fs::read_to_string(path).ok()?;
    let first = text.lines().next()?;
    first.strip_prefix("# ").map(str::to_string)
}

fn invert(ctx: &Context) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    if cfg.ladder.count < 3 {
        return Err(Failure::config(format!(
            "inversion needs an energy ladder of at least 3 rungs, got {}",
            cfg.ladder.count
        )));
    }
    let field = cfg.field.build().map_err(Failure::config)?;
    let controls = cfg.integration.controls().map_err(Failure::config)?;
    let ladder = inversion::geometric_ladder(cfg.ladder.base, cfg.ladder.factor, cfg.ladder.count)?;
    let recon_cfg = ReconConfig {
        grid: cfg.output.grid(),
        apod: cfg.output.apod().map_err(Failure::config)?,
        points: cfg.quadrature.points,
        ..ReconConfig::default()
    };

    if field.dim() == 3 {
        return invert3(ctx, &field, &ladder, &recon_cfg, &controls);
    }

    let lines = line_set(cfg)?;
    let cache = ctx.out.join("sweep.csv");
    let sweep = if cached_meta(&cache).as_deref() == Some(ctx.meta.as_str()) {
        println!("invert: reusing cached sweep.csv");
        cio::read_sweep(std::io::BufReader::new(fs::File::open(&cache)?))?
    } else {
        let sweep = inversion::generate_sweep(&field, lines, ladder, &controls)?;
        let mut w = create(&cache)?;
        cio::write_sweep(&mut w, &sweep, &ctx.meta)?;
        w.flush()?;
        sweep
    };
    let limits = inversion::extract_limits(&sweep, cfg.extrapolation.residual_tol)?;
    let report = inversion::reconstruct_from_a(&limits, &recon_cfg, Some(&field))?;

    let mut w = create(&ctx.out.join("recon_b.csv"))?;
    cio::write_grid(&mut w, &report.b_recon, &ctx.meta)?;
    w.flush()?;
    let mut w = create(&ctx.out.join("recon_grad_v.csv"))?;
    cio::write_grid(&mut w, &report.grad_v_recon, &ctx.meta)?;
    w.flush()?;

    let b_err = report.b_errors.as_ref().map(|e| e[0]);
    let gv_err = report.grad_v_errors.as_ref();
    let summary = serde_json::json!({
        "meta": ctx.meta,
        "ladder": sweep.ladder,
        "lines": {"angles": sweep.lines.angles(), "offsets": sweep.lines.offsets(), "q_max": sweep.lines.q_max()},
        "extraction_residual_max": report.extraction_residual_max,
        "flagged_lines": report.flagged_lines,
        "b_rel_l2": b_err.map(|n| n.rel_l2),
        "b_rel_max": b_err.map(|n| n.rel_max),
        "grad_v_rel_l2": gv_err.map(|e| e.iter().map(|n| n.rel_l2).collect::<Vec<_>>()),
        "artifacts": ["sweep.csv", "recon_b.csv", "recon_grad_v.csv"],
        "caveats": report.caveats,
    });
    fs::write(
        ctx.out.join("report.json"),
        serde_json::to_string_pretty(&summary).unwrap(),
    )?;
    println!(
        "invert: B rel L2 {:.4}, grad V rel L2 {:?} -> report.json",
        b_err.map(|n| n.rel_l2).unwrap_or(f64::NAN),
        gv_err
            .map(|e| e.iter().map(|n| n.rel_l2).collect::<Vec<_>>())
            .unwrap_or_default()
    );
    Ok(())
}

fn invert3(
    ctx: &Context,
    field: &Field,
    ladder: &[f64],
    recon_cfg: &ReconConfig,
    controls: &Controls,
) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    let slices = cfg.lines.offsets.min(33) | 1;
    let mk = |pair| {
        PlaneFamily::uniform_slices(
            pair,
            cfg.output.grid_half_width,
            slices,
            cfg.lines.angles,
            cfg.lines.offsets,
            cfg.lines.q_max,
        )
    };
    let fams = [
        inversion::family_limits_from_dynamics(field, &mk((0, 1)), ladder, controls)?,
        inversion::family_limits_from_dynamics(field, &mk((0, 2)), ladder, controls)?,
        inversion::family_limits_from_dynamics(field, &mk((1, 2)), ladder, controls)?,
    ];
    let rep = inversion::reconstruct3_from_a(&fams, recon_cfg, Some(field))?;
    for (idx, st) in rep.b_stacks.iter().enumerate() {
        for (m, g) in st.slices.iter().enumerate() {
            let name = format!("recon_b{}{}_slice{m}.csv", st.plane_axes.0, st.plane_axes.1);
            let mut w = create(&ctx.out.join(name))?;
            cio::write_grid(&mut w, g, &ctx.meta)?;
            w.flush()?;
        }
        let _ = idx;
    }
    let summary = serde_json::json!({
        "meta": ctx.meta,
        "b_stack_rel_l2": rep.b_errors,
        "grad_v_stack_rel_l2": rep.grad_v_error,
        "slices": slices,
    });
    fs::write(
        ctx.out.join("report.json"),
        serde_json::to_string_pretty(&summary).unwrap(),
    )?;
    println!(
        "invert (3-D): B stacks rel L2 {:?}, grad V {:?} -> report.json",
        rep.b_errors, rep.grad_v_error
    );
    Ok(())
}

fn counterexample_cmd(ctx: &Context) -> Result<(), Failure> {
    let cfg = &ctx.cfg.counterexample;
    let bundle = counterexample::build_bundle(
        cfg.nodes,
        GridSpec {
            half_width: ctx.cfg.output.grid_half_width.max(5.3),
            res: ctx.cfg.output.grid_res,
        },
    )?;
    // profiles over the offset range
    let qs: Vec<f64> = (0..=512)
        .map(|i| cfg.q_max * i as f64 / 512.0)
        .collect();
    for (name, vals) in [
        (
            "profile_sinogram_1.csv",
            qs.iter()
                .map(|&q| counterexample::bundle_f_tilde(bundle.scale, 1, q))
                .collect::<Vec<_>>(),
        ),
        (
            "profile_sinogram_2.csv",
            qs.iter()
                .map(|&q| counterexample::bundle_f_tilde(bundle.scale, 2, q))
                .collect::<Vec<_>>(),
        ),
        (
            "profile_radial_1.csv",
            qs.iter()
                .map(|&q| bundle.profile1.f_at(q * q))
                .collect::<Vec<_>>(),
        ),
        (
            "profile_radial_2.csv",
            qs.iter()
                .map(|&q| bundle.profile2.f_at(q * q))
                .collect::<Vec<_>>(),
        ),
        (
            "profile_cumulative_1.csv",
            qs.iter()
                .map(|&q| bundle.profile1.big_f_at(q * q))
                .collect::<Vec<_>>(),
        ),
        (
            "profile_cumulative_2.csv",
            qs.iter()
                .map(|&q| bundle.profile2.big_f_at(q * q))
                .collect::<Vec<_>>(),
        ),
    ] {
        let mut w = create(&ctx.out.join(name))?;
        cio::write_profile(&mut w, &qs, &vals, &ctx.meta)?;
        w.flush()?;
    }
    let mut w = create(&ctx.out.join("counterexample_v.csv"))?;
    cio::write_grid(&mut w, &bundle.v_grid, &ctx.meta)?;
    w.flush()?;

    let rep = counterexample::verify_equality(
        &bundle,
        cfg.angles,
        cfg.offsets,
        cfg.q_max,
        cfg.points,
    )?;
    let summary = serde_json::json!({
        "meta": ctx.meta,
        "b_gap_sup": bundle.b_gap_sup,
        "b1_sup": bundle.b1_sup,
        "v_certificate": [bundle.v_certificate.0, bundle.v_certificate.1],
        "forward_residuals": [bundle.profile1.forward_residual, bundle.profile2.forward_residual],
        "equality_max_residual": rep.max_residual,
        "equality_theta_component": rep.theta_component,
        "equality_perp_component": rep.perp_component,
        "closed_form_residual": rep.closed_form_residual,
        "position_limit_residual": rep.position_limit_residual,
    });
    fs::write(
        ctx.out.join("counterexample.json"),
        serde_json::to_string_pretty(&summary).unwrap(),
    )?;
    println!(
        "counterexample: equality residual {:.3e}, closed form {:.3e} -> counterexample.json",
        rep.max_residual, rep.closed_form_residual
    );
    Ok(())
}

fn verify_theorem(ctx: &Context) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    let field = cfg.field.build().map_err(Failure::config)?;
    let controls = cfg.integration.controls().map_err(Failure::config)?;
    let env = field.envelope();
    let mut rng = StdRng::seed_from_u64(cfg.seed);
    let mut data: Vec<(f64, Vec3, Vec3)> = Vec::new();
    if cfg.theorem.data.is_empty() {
        for _ in 0..cfg.theorem.count {
            let q = rng.random_range(cfg.theorem.offset_min..cfg.theorem.offset_max);
            let ang = rng.random_range(0.0..std::f64::consts::TAU);
            let theta = [ang.cos(), ang.sin(), 0.0];
            let x = vec3::scale(asymptotics::perp(theta), q);
            let (big_r, small_r) = picard::default_ball(&field, q);
            let th = picard::thresholds(
                field.dim(),
                env.alpha,
                env.beta[1],
                env.beta[2],
                big_r,
                small_r,
                q,
            )?;
            data.push((cfg.theorem.margin * th.max(), theta, x));
        }
    } else {
        for row in &cfg.theorem.data {
            let (s, q) = (row[0], row[1]);
            let ang = rng.random_range(0.0..std::f64::consts::TAU);
            let theta = [ang.cos(), ang.sin(), 0.0];
            data.push((s, theta, vec3::scale(asymptotics::perp(theta), q)));
        }
    }

    let mut w = create(&ctx.out.join("theorem31.csv"))?;
    writeln!(w, "# {}", ctx.meta)?;
    writeln!(w, "s,offset,admissible,check,lhs,rhs,pass")?;
    let mut all_pass = true;
    for (s, theta, x) in data {
        let row = picard::inequality_suite(
            &field,
            vec3::scale(theta, s),
            x,
            &controls,
            cfg.quadrature.points,
        )?;
        all_pass &= row.pass;
        for c in &row.checks {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                row.speed,
                row.offset,
                u8::from(row.admissible),
                c.name,
                c.lhs,
                c.rhs,
                u8::from(c.pass)
            )?;
        }
    }
    w.flush()?;
    if !all_pass {
        return Err(Failure {
            code: 3,
            message: "an inequality of the certified suite failed".into(),
        });
    }
    println!("verify-theorem31: all inequalities hold -> theorem31.csv");
    Ok(())
}
