#![allow(clippy::neg_cmp_op_on_partial_ord)]

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use heis_core::sampling::rng_for;
use heis_core::{
    cc_distance, geodesic_point, integrate_flow, rho, rho_prime, sphere_point, GeodesicParams, HeisError, Point,
    Potential, SpherePoint,
};
use heis_experiments::{
    appendix_inequality_check, check_cartozzo_b, check_sesto, run_theorem_a, run_theorem_b, run_theorem_c,
    run_theorem_d, run_theorem_e, EpsGrid, ExpError, ExperimentReport, HarnessConfig, MapFamily, SestoConfig,
};
use rand::Rng;
use std::f64::consts::PI;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

/// Sub-Riemannian geometry of the first Heisenberg group: distances,
/// geodesics, spheres, contact flows and quantitative stability experiments.
#[derive(Parser, Debug)]
#[command(name = "heis", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Carnot-Carathéodory distance between two points, printed with 12
    /// decimals. Points are written `x,y,t`.
    Dist {
        #[arg(allow_hyphen_values = true, value_parser = parse_point)]
        p: Point,
        #[arg(allow_hyphen_values = true, value_parser = parse_point)]
        q: Point,
    },
    /// Trace a geodesic of curvature `phi` and initial heading `alpha` as CSV
    /// (`s,x,y,t,distance`), distance measured from the base point.
    Geodesic(GeodesicArgs),
    /// Sample the CC sphere of radius `r` through its `(alpha, phi)`
    /// parametrization; CSV `alpha,phi,x,y,t`.
    Sphere(SphereArgs),
    /// Table of the chord function rho and its derivative rho' on a uniform
    /// grid of angles; CSV `theta,rho,rho_prime`.
    Rho(RhoArgs),
    /// Integrate the contact flow generated by a potential from a point with
    /// RK4 and print the end point (or a CSV trace with --trace).
    Flow(FlowArgs),
    /// Run a stability experiment over an eps grid and report PASS/FAIL with
    /// the fitted log-log slope. Exit code 0 on pass, 1 on fail.
    Experiment(ExperimentArgs),
}

#[derive(Args, Debug)]
struct GeodesicArgs {
    #[arg(long, allow_hyphen_values = true)]
    phi: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    alpha: f64,
    /// Base point `x,y,t`.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_point, default_value = "0,0,0")]
    base: Point,
    /// Arc length traced, defaults to the lifetime 2π/|phi|.
    #[arg(long, allow_hyphen_values = true)]
    length: Option<f64>,
    #[arg(long, default_value_t = 200)]
    points: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SphereArgs {
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RhoArgs {
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.05)]
    from: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = PI - 0.3)]
    to: f64,
    #[arg(long, default_value_t = 50)]
    points: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FlowArgs {
    /// Potential: const, x, sin_x or xy_bump.
    #[arg(long, default_value = "sin_x")]
    potential: String,
    /// Constant for `const`.
    #[arg(long, allow_hyphen_values = true)]
    c: Option<f64>,
    /// Flow time.
    #[arg(long, allow_hyphen_values = true)]
    s: f64,
    /// RK4 step.
    #[arg(long, allow_hyphen_values = true, default_value_t = heis_core::maps::DEFAULT_FLOW_STEP)]
    h: f64,
    #[arg(long, allow_hyphen_values = true, value_parser = parse_point)]
    point: Point,
    /// Write `s,x,y,t` at this many evenly spaced times instead.
    #[arg(long)]
    trace: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Theorem {
    /// Almost-geodesic lines: chord defect, vertical drift, cone avoidance.
    A,
    /// Maps of the horizontal plane close to a linear isometry.
    B,
    /// Vertical axis close to its isometric image.
    C,
    /// Ball close to an isometry of the whole group.
    D,
    /// Pansu differential close to a constant orthogonal matrix in mean.
    E,
    /// Sphere cap lemma for the lifted geodesic family.
    Sesto,
    /// Long-lifetime geodesics against straight-line distance.
    CartozzoB,
    /// Distances of (0,1,1) and (0,1,3) from the origin differ.
    Appendix,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[arg(long, value_enum)]
    theorem: Theorem,
    /// Map family for a-e: dilation, spiral, isometry or krflow.
    #[arg(long, value_parser = parse_family, default_value = "dilation")]
    family: MapFamily,
    /// Comma-separated, strictly decreasing eps values in (0, 1).
    #[arg(long, value_parser = parse_grid)]
    grid: Option<EpsGrid>,
    /// Required for every sampling experiment (a-e, sesto).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Constant C in the bounds C·eps^a.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    /// Comma-separated sigma values for the sphere cap lemma.
    #[arg(long, value_delimiter = ',')]
    sigma: Option<Vec<f64>>,
    /// Comma-separated radii for the long-lifetime check.
    #[arg(long, value_delimiter = ',', default_value = "10,100,1000")]
    r_grid: Vec<f64>,
}

fn parse_point(s: &str) -> std::result::Result<Point, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|c| c.trim().parse::<f64>().map_err(|e| format!("bad coordinate {c:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match v[..] {
        [x, y, t] => Point::try_new(x, y, t).map_err(|e| e.to_string()),
        _ => Err(format!("expected x,y,t, got {s:?}")),
    }
}

fn parse_family(s: &str) -> std::result::Result<MapFamily, String> {
    s.parse::<MapFamily>().map_err(|e| e.to_string())
}

fn parse_grid(s: &str) -> std::result::Result<EpsGrid, String> {
    EpsGrid::parse(s).map_err(|e| e.to_string())
}

/// Fixed notation with 12 digits after the point.
fn fmt12(d: f64) -> String {
    format!("{d:.12}")
}

fn output(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn write_rows<I: IntoIterator<Item = Vec<String>>>(out: &Option<PathBuf>, header: &[&str], rows: I) -> Result<()> {
    let mut w = csv::Writer::from_writer(output(out)?);
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn f(v: f64) -> String {
    format!("{v:e}")
}

fn cmd_geodesic(a: &GeodesicArgs) -> Result<()> {
    if a.points < 2 {
        bail!(usage("--points must be at least 2"));
    }
    let g = GeodesicParams { phi: a.phi, alpha: a.alpha, base: a.base };
    let len = a.length.unwrap_or_else(|| g.lifetime());
    if !len.is_finite() {
        bail!(usage("--length is required for a straight line (phi = 0)"));
    }
    let rows = (0..a.points).map(|i| {
        let s = len * i as f64 / (a.points - 1) as f64;
        let p = geodesic_point(&g, s);
        vec![f(s), f(p.x), f(p.y), f(p.t), f(cc_distance(&a.base, &p))]
    });
    write_rows(&a.out, &["s", "x", "y", "t", "distance"], rows)
}

fn cmd_sphere(a: &SphereArgs) -> Result<()> {
    if !(a.radius > 0.0) {
        bail!(usage("--radius must be positive"));
    }
    let mut rows = Vec::with_capacity(a.n);
    for i in 0..a.n {
        let mut rng = rng_for(a.seed, i as u64);
        let alpha = rng.gen_range(0.0..2.0 * PI);
        let phi = rng.gen_range(-2.0 * PI..=2.0 * PI) / a.radius;
        let p = sphere_point(&SpherePoint { r: a.radius, phi, alpha })?;
        rows.push(vec![f(alpha), f(phi), f(p.x), f(p.y), f(p.t)]);
    }
    write_rows(&a.out, &["alpha", "phi", "x", "y", "t"], rows)
}

fn cmd_rho(a: &RhoArgs) -> Result<()> {
    if a.points < 2 || !(a.from < a.to) {
        bail!(usage("need --points >= 2 and --from < --to"));
    }
    let mut rows = Vec::with_capacity(a.points);
    for i in 0..a.points {
        let th = a.from + (a.to - a.from) * i as f64 / (a.points - 1) as f64;
        rows.push(vec![f(th), f(rho(th)?), f(rho_prime(th)?)]);
    }
    write_rows(&a.out, &["theta", "rho", "rho_prime"], rows)
}

fn cmd_flow(a: &FlowArgs) -> Result<()> {
    let pot = Potential::parse(&a.potential, a.c)?;
    heis_core::maps::KrFlow::new(pot, a.s, a.h)?;
    match a.trace {
        None => {
            let end = integrate_flow(&pot, a.s, &a.point, a.h)?;
            let mut w = output(&a.out)?;
            writeln!(w, "{},{},{}", fmt12(end.x), fmt12(end.y), fmt12(end.t))?;
            writeln!(w, "displacement {}", fmt12(cc_distance(&a.point, &end)))?;
            w.flush()?;
            Ok(())
        }
        Some(n) if n >= 2 => {
            let mut rows = Vec::with_capacity(n);
            for i in 0..n {
                let s = a.s * i as f64 / (n - 1) as f64;
                let p = integrate_flow(&pot, s, &a.point, a.h)?;
                rows.push(vec![f(s), f(p.x), f(p.y), f(p.t)]);
            }
            write_rows(&a.out, &["s", "x", "y", "t"], rows)
        }
        Some(_) => bail!(usage("--trace needs at least 2 points")),
    }
}

fn run_experiment(a: &ExperimentArgs) -> Result<ExperimentReport> {
    let seed = || a.seed.ok_or_else(|| anyhow::Error::new(usage("--seed is required for sampling experiments")));
    let rep = match a.theorem {
        Theorem::Appendix => appendix_inequality_check()?,
        Theorem::CartozzoB => check_cartozzo_b(&a.r_grid)?,
        Theorem::Sesto => {
            let d = SestoConfig::default();
            check_sesto(&SestoConfig {
                q: a.q.unwrap_or(d.q),
                s: a.s.unwrap_or(d.s),
                sigmas: a.sigma.clone().unwrap_or(d.sigmas),
                samples: a.samples.unwrap_or(d.samples),
                seed: seed()?,
                ..d
            })?
        }
        t => {
            let mut cfg = HarnessConfig::with_seed(seed()?);
            if let Some(g) = &a.grid {
                cfg.grid = g.clone();
            }
            if let Some(c) = a.c {
                cfg.c = c;
            }
            if let Some(n) = a.samples {
                cfg.samples = n;
            }
            if let Some(n) = a.mc_samples {
                cfg.mc_samples = n;
            }
            if let Some(r) = a.radius {
                cfg.radius = r;
            }
            let run = match t {
                Theorem::A => run_theorem_a,
                Theorem::B => run_theorem_b,
                Theorem::C => run_theorem_c,
                Theorem::D => run_theorem_d,
                _ => run_theorem_e,
            };
            run(a.family, &cfg)?
        }
    };
    Ok(rep)
}

fn cmd_experiment(a: &ExperimentArgs) -> Result<bool> {
    let rep = run_experiment(a)?;
    if let Some(path) = &a.out {
        let w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
        match a.format {
            Format::Json => rep.write_json(w)?,
            Format::Csv => rep.write_csv(w)?,
        }
    }
    println!("{}", rep.summary_line());
    Ok(rep.pass)
}

#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: &str) -> Usage {
    Usage(msg.to_string())
}

/// Invalid user input is a usage error; anything else is a failure.
fn exit_code(e: &anyhow::Error) -> u8 {
    let bad_input = e.chain().any(|c| {
        c.is::<Usage>()
            || matches!(c.downcast_ref::<HeisError>(), Some(HeisError::InvalidArgument(_)))
            || matches!(c.downcast_ref::<ExpError>(), Some(ExpError::Core(HeisError::InvalidArgument(_))))
    });
    if bad_input {
        2
    } else {
        1
    }
}

fn threads_from_env() -> Result<()> {
    if let Ok(v) = std::env::var("HEIS_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| usage("HEIS_THREADS must be a positive integer"))?;
        if n == 0 {
            bail!(usage("HEIS_THREADS must be a positive integer"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = threads_from_env().and_then(|_| match &cli.cmd {
        Cmd::Dist { p, q } => {
            println!("{}", fmt12(cc_distance(p, q)));
            Ok(true)
        }
        Cmd::Geodesic(a) => cmd_geodesic(a).map(|_| true),
        Cmd::Sphere(a) => cmd_sphere(a).map(|_| true),
        Cmd::Rho(a) => cmd_rho(a).map(|_| true),
        Cmd::Flow(a) => cmd_flow(a).map(|_| true),
        Cmd::Experiment(a) => cmd_experiment(a),
    });
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
