//! Command-line front end: config loading, subcommand dispatch, CSV output and
//! a JSON manifest beside every output file.

pub mod config;
pub mod manifest;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::asymptotics_lab::{decay_sweep, fit_constant, normalizer, ray_scan, sample_v};
use crate::cplane_quadrature::{integrate, RadialGrid};
use crate::error::{NvError, Result};
use crate::linearized_flow::{decompose_integral, Field, LinearData, LinearNodes};
use crate::phase_geometry::{classify_region, phase_dzeta, phase_dzeta_product, solve_cubic, RegionClass};
use crate::scattering_data::Family;

pub use config::RunConfig;
pub use manifest::RunManifest;

#[derive(Parser, Debug)]
#[command(name = "nvlab", version, about = "Transparent Novikov–Veselov potentials: roots, linearized flow, d-bar reconstruction and decay sweeps")]
struct Cli {
    /// JSON run configuration; flags below override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Cap on worker threads.
    #[arg(long, global = true, env = "NV_THREADS")]
    threads: Option<usize>,
    /// Scattering amplitude c.
    #[arg(long, global = true)]
    c: Option<f64>,
    #[arg(long, global = true)]
    family: Option<Family>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    oversample: Option<f64>,
    #[arg(long, global = true)]
    tol_mu: Option<f64>,
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    #[arg(long, global = true)]
    stencil_h: Option<f64>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug, Clone)]
struct OutArg {
    /// Output CSV; defaults to <out_dir>/<subcommand>.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone)]
enum Command {
    /// Roots of the stationary-point cubic and the region class of u.
    #[command(allow_negative_numbers = true)]
    Roots {
        #[arg(long)]
        u_re: f64,
        #[arg(long)]
        u_im: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Classify a square lattice of velocities.
    Region {
        #[arg(long, default_value_t = 41)]
        grid: usize,
        #[arg(long, default_value_t = 25.0)]
        radius: f64,
        /// Monte Carlo samples for the area oracle.
        #[arg(long, default_value_t = 200_000)]
        samples: usize,
        #[command(flatten)]
        out: OutArg,
    },
    /// I(t,u) and J(t,u) on a square u-lattice.
    #[command(allow_negative_numbers = true)]
    Linearized {
        #[arg(long, value_delimiter = ',', default_value = "5,10,20")]
        t_list: Vec<f64>,
        #[arg(long, default_value_t = 40)]
        u_grid: usize,
        #[arg(long, default_value_t = 25.0)]
        u_radius: f64,
        /// Use the Born-matched profile instead of f = b.
        #[arg(long)]
        born: bool,
        #[command(flatten)]
        out: OutArg,
    },
    /// Stationary-phase decomposition of I at one (t, u).
    #[command(allow_negative_numbers = true)]
    Decompose {
        #[arg(long)]
        t: f64,
        #[arg(long)]
        u_re: f64,
        #[arg(long)]
        u_im: f64,
        /// Disk radius; defaults to 1/t.
        #[arg(long)]
        eps: Option<f64>,
        #[command(flatten)]
        out: OutArg,
    },
    /// v(z, t) on a square z-lattice given as xmin,xmax,n.
    #[command(allow_negative_numbers = true)]
    Reconstruct {
        #[arg(long, default_value = "-10,10,5", allow_hyphen_values = true)]
        z_grid: String,
        #[arg(long)]
        t: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// sup |v| over |z| ≤ window·t for each t.
    #[command(allow_negative_numbers = true)]
    DecaySweep {
        #[arg(long, value_delimiter = ',')]
        t: Option<Vec<f64>>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        window_factor: Option<f64>,
        #[command(flatten)]
        out: OutArg,
    },
    /// |v(ut, t)| along one ray.
    #[command(allow_negative_numbers = true)]
    RayScan {
        #[arg(long)]
        u_re: f64,
        #[arg(long)]
        u_im: f64,
        #[arg(long, value_delimiter = ',')]
        t_list: Option<Vec<f64>>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Quick consistency checks on the configured data.
    Selftest {
        #[command(flatten)]
        out: OutArg,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Roots { .. } => "roots",
            Command::Region { .. } => "region",
            Command::Linearized { .. } => "linearized",
            Command::Decompose { .. } => "decompose",
            Command::Reconstruct { .. } => "reconstruct",
            Command::DecaySweep { .. } => "decay-sweep",
            Command::RayScan { .. } => "ray-scan",
            Command::Selftest { .. } => "selftest",
        }
    }

    fn out(&self) -> &OutArg {
        match self {
            Command::Roots { out, .. }
            | Command::Region { out, .. }
            | Command::Linearized { out, .. }
            | Command::Decompose { out, .. }
            | Command::Reconstruct { out, .. }
            | Command::DecaySweep { out, .. }
            | Command::RayScan { out, .. }
            | Command::Selftest { out } => out,
        }
    }
}

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    // −0 prints as 0
    format!("{:.16e}", x + 0.0)
}

struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn write(&self, path: &Path) -> Result<()> {
        let io = |e: csv::Error| NvError::Config(format!("cannot write {}: {e}", path.display()));
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| NvError::Config(format!("cannot create {}: {e}", dir.display())))?;
        }
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        w.flush().map_err(|e| NvError::Config(format!("cannot write {}: {e}", path.display())))
    }
}

struct Outcome {
    table: Table,
    summary: serde_json::Value,
    failures: usize,
    /// Written outputs are still kept, but the exit code reports a numerical failure.
    error: Option<NvError>,
}

impl Outcome {
    fn ok(table: Table, summary: serde_json::Value) -> Self {
        Outcome { table, summary, failures: 0, error: None }
    }
}

fn apply_overrides(cli: &Cli, cfg: &mut RunConfig) {
    if let Some(c) = cli.c {
        cfg.scattering.c = c;
    }
    if let Some(f) = cli.family {
        cfg.scattering.family = f;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(d) = &cli.out_dir {
        cfg.output.dir = d.clone();
    }
    if let Some(o) = cli.oversample {
        cfg.quadrature.oversample = o;
    }
    if let Some(t) = cli.tol_mu {
        cfg.solver.tol_mu = t;
    }
    if let Some(m) = cli.max_iter {
        cfg.solver.max_iter = m;
    }
    if let Some(h) = cli.stencil_h {
        cfg.solver.stencil_h = h;
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    match &cli.cmd {
        Command::DecaySweep { t, n, window_factor, .. } => {
            if let Some(t) = t {
                cfg.sweep.t_list = t.clone();
            }
            if let Some(n) = n {
                cfg.sweep.lattice = *n;
            }
            if let Some(w) = window_factor {
                cfg.sweep.window_factor = *w;
            }
        }
        Command::RayScan { t_list: Some(t), .. } => cfg.sweep.ray_t_list = t.clone(),
        _ => {}
    }
}

/// Parse argv, run the subcommand and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let mut cfg = match &cli.config {
        Some(p) => match RunConfig::load(p) {
            Ok(c) => c,
            Err(e) => return report(&e),
        },
        None => RunConfig::default(),
    };
    apply_overrides(&cli, &mut cfg);
    if let Err(e) = cfg.validate() {
        return report(&e);
    }
    let name = cli.cmd.name();
    let out_path = cli.cmd.out().out.clone().unwrap_or_else(|| cfg.output.dir.join(format!("{name}.csv")));
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => return report(&NvError::Config(format!("thread pool: {e}"))),
    };
    let start = Instant::now();
    let result = pool.install(|| execute(&cli.cmd, &cfg));
    let outcome = match result {
        Ok(o) => o,
        Err(e) => return report(&e),
    };
    if let Err(e) = outcome.table.write(&out_path) {
        return report(&e);
    }
    let argv_s = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut m = RunManifest::new(name, argv_s, cfg.clone(), pool.current_num_threads());
    m.wall_time_s = start.elapsed().as_secs_f64();
    m.failures = outcome.failures;
    m.outputs = vec![out_path.clone()];
    m.summary = outcome.summary.clone();
    if let Err(e) = m.write(&RunManifest::path_for(&out_path)) {
        return report(&e);
    }
    println!("{name}: wrote {}", out_path.display());
    println!("{}", serde_json::to_string_pretty(&outcome.summary).unwrap_or_default());
    match outcome.error {
        Some(e) => report(&e),
        None => 0,
    }
}

fn report(e: &NvError) -> i32 {
    eprintln!("error: {e}");
    if e.is_numerical() {
        3
    } else {
        2
    }
}

fn execute(cmd: &Command, cfg: &RunConfig) -> Result<Outcome> {
    match cmd {
        Command::Roots { u_re, u_im, .. } => roots(Complex64::new(*u_re, *u_im)),
        Command::Region { grid, radius, samples, .. } => region(*grid, *radius, *samples, cfg.seed),
        Command::Linearized { t_list, u_grid, u_radius, born, .. } => linearized(cfg, t_list, *u_grid, *u_radius, *born),
        Command::Decompose { t, u_re, u_im, eps, .. } => {
            let f = LinearData::plain(cfg.data());
            let eps = eps.unwrap_or(1.0 / t.abs());
            let d = decompose_integral(&f, *t, Complex64::new(*u_re, *u_im), eps, &cfg.policy())?;
            let mut table = Table::new(&[
                "t", "u_re", "u_im", "eps", "i_re", "i_im", "i_int_re", "i_int_im", "i_ext_re", "i_ext_im", "i1_re",
                "i1_im", "i2_re", "i2_im", "i3_re", "i3_im", "rel_error",
            ]);
            let mut row = vec![fmt_f64(d.t), fmt_f64(d.u.re), fmt_f64(d.u.im), fmt_f64(d.eps)];
            for v in [d.i_direct, d.i_int, d.i_ext, d.i1, d.i2, d.i3] {
                row.push(fmt_f64(v.re));
                row.push(fmt_f64(v.im));
            }
            row.push(fmt_f64(d.rel_error));
            table.push(row);
            Ok(Outcome::ok(table, json!({ "rel_error": d.rel_error, "abs_i": d.i_direct.norm() })))
        }
        Command::Reconstruct { z_grid, t, .. } => reconstruct(cfg, z_grid, *t),
        Command::DecaySweep { .. } => {
            let curve = decay_sweep(&cfg.data(), &cfg.sweep.t_list, &cfg.sweep_config())?;
            let mut table =
                Table::new(&["t", "sup_v", "argmax_re", "argmax_im", "normalizer", "ratio", "failed", "points"]);
            let mut failures = 0;
            for e in &curve.entries {
                failures += e.failed;
                table.push(vec![
                    fmt_f64(e.t),
                    fmt_f64(e.sup_v),
                    fmt_f64(e.argmax_z.re),
                    fmt_f64(e.argmax_z.im),
                    fmt_f64(e.normalizer),
                    fmt_f64(e.ratio),
                    e.failed.to_string(),
                    e.points.to_string(),
                ]);
            }
            let fit = fit_constant(&curve).ok();
            Ok(Outcome { table, summary: json!({ "fit": fit, "entries": curve.entries.len() }), failures, error: None })
        }
        Command::RayScan { u_re, u_im, .. } => {
            let u = Complex64::new(*u_re, *u_im);
            let scan = ray_scan(&cfg.data(), u, &cfg.sweep.ray_t_list, &cfg.sweep_config())?;
            let mut table = Table::new(&["u_re", "u_im", "t", "abs_v"]);
            for &(t, a) in &scan.samples {
                table.push(vec![fmt_f64(u.re), fmt_f64(u.im), fmt_f64(t), fmt_f64(a)]);
            }
            Ok(Outcome::ok(table, json!({ "strictly_decreasing": scan.strictly_decreasing() })))
        }
        Command::Selftest { .. } => selftest(cfg),
    }
}

fn roots(u: Complex64) -> Result<Outcome> {
    let r = solve_cubic(u);
    let class = classify_region(u);
    let mut table = Table::new(&[
        "u_re", "u_im", "xi0_re", "xi0_im", "xi1_re", "xi1_im", "xi2_re", "xi2_im", "mult0", "mult1", "mult2", "class",
    ]);
    let mut row = vec![fmt_f64(u.re), fmt_f64(u.im)];
    for x in r.xi {
        row.push(fmt_f64(x.re));
        row.push(fmt_f64(x.im));
    }
    row.extend(r.multiplicity.iter().map(|m| m.to_string()));
    let name = match &class {
        Ok(c) => c.name().to_string(),
        Err(_) => "Ambiguous".to_string(),
    };
    row.push(name.clone());
    table.push(row);
    Ok(Outcome::ok(table, json!({ "class": class.ok(), "residuals": r.residuals() })))
}

fn region(grid: usize, radius: f64, samples: usize, seed: u64) -> Result<Outcome> {
    if grid < 2 || !(radius > 0.0) {
        return Err(NvError::Config("region needs grid ≥ 2 and radius > 0".into()));
    }
    let step = 2.0 * radius / (grid - 1) as f64;
    let us: Vec<Complex64> =
        (0..grid * grid).map(|i| Complex64::new(-radius + (i / grid) as f64 * step, -radius + (i % grid) as f64 * step)).collect();
    let classes: Vec<Result<RegionClass>> = us.par_iter().map(|&u| classify_region(u)).collect();
    let mut table = Table::new(&["u_re", "u_im", "class"]);
    let mut counts = std::collections::BTreeMap::<&str, usize>::new();
    let mut inside = 0;
    for (u, c) in us.iter().zip(&classes) {
        let name = match c {
            Ok(c) => {
                if c.in_closed_region() {
                    inside += 1;
                }
                c.name()
            }
            Err(_) => "Ambiguous",
        };
        *counts.entry(name).or_default() += 1;
        table.push(vec![fmt_f64(u.re), fmt_f64(u.im), name.to_string()]);
    }
    let square = (2.0 * radius).powi(2);
    let area_grid = inside as f64 / us.len() as f64 * square;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Complex64> =
        (0..samples).map(|_| Complex64::new(rng.gen_range(-radius..radius), rng.gen_range(-radius..radius))).collect();
    let hits = pts.par_iter().filter(|&&u| classify_region(u).map(|c| c.in_closed_region()).unwrap_or(false)).count();
    let area_mc = hits as f64 / samples.max(1) as f64 * square;
    Ok(Outcome::ok(
        table,
        json!({
            "counts": counts,
            "area_grid": area_grid,
            "area_monte_carlo": area_mc,
            "area_relative_difference": (area_grid - area_mc).abs() / area_mc,
        }),
    ))
}

fn linearized(cfg: &RunConfig, t_list: &[f64], n: usize, radius: f64, born: bool) -> Result<Outcome> {
    if n < 1 || !(radius > 0.0) {
        return Err(NvError::Config("linearized needs u_grid ≥ 1 and u_radius > 0".into()));
    }
    let data = cfg.data();
    let f = if born { LinearData::born(data) } else { LinearData::plain(data) };
    let step = if n > 1 { 2.0 * radius / (n - 1) as f64 } else { 0.0 };
    let us: Vec<f64> = (0..n).map(|a| if n > 1 { -radius + a as f64 * step } else { 0.0 }).collect();
    let mut table = Table::new(&["t", "u_re", "u_im", "i_re", "i_im", "j_re", "j_im"]);
    let mut maxima = Vec::new();
    for &t in t_list {
        let nodes = LinearNodes::resolved(&f, &cfg.policy(), cfg.s_max(), radius * std::f64::consts::SQRT_2 * t.abs(), t)?;
        let xs: Vec<f64> = us.iter().map(|u| u * t).collect();
        let iv = nodes.lattice(Field::I, t, &xs, &xs);
        let jv = nodes.lattice(Field::J, t, &xs, &xs);
        let mut m = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                let (i, j) = (iv[a * n + b], jv[a * n + b]);
                m = m.max(i.norm());
                table.push(vec![
                    fmt_f64(t),
                    fmt_f64(us[a]),
                    fmt_f64(us[b]),
                    fmt_f64(i.re),
                    fmt_f64(i.im),
                    fmt_f64(j.re),
                    fmt_f64(j.im),
                ]);
            }
        }
        maxima.push(json!({ "t": t, "max_abs_i": m, "normalized": m / normalizer(t) }));
    }
    Ok(Outcome::ok(table, json!({ "per_t": maxima })))
}

fn parse_z_grid(s: &str) -> Result<(f64, f64, usize)> {
    let bad = || NvError::Config(format!("z-grid '{s}' must be xmin,xmax,n"));
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    if n == 0 || !(hi >= lo) {
        return Err(bad());
    }
    Ok((lo, hi, n))
}

fn reconstruct(cfg: &RunConfig, z_grid: &str, t: f64) -> Result<Outcome> {
    let (lo, hi, n) = parse_z_grid(z_grid)?;
    let step = if n > 1 { (hi - lo) / (n - 1) as f64 } else { 0.0 };
    let zs: Vec<Complex64> =
        (0..n * n).map(|i| Complex64::new(lo + (i / n) as f64 * step, lo + (i % n) as f64 * step)).collect();
    let sweep = cfg.sweep_config();
    let data = cfg.data();
    let results: Vec<Result<_>> = zs.par_iter().map(|&z| sample_v(&data, z, t, &sweep)).collect();
    let mut table = Table::new(&["x1", "x2", "t", "v_re", "v_im", "iterations", "residual"]);
    let mut failures = 0;
    let mut first_err = None;
    let mut max_leak = 0.0f64;
    for (z, r) in zs.iter().zip(results) {
        match r {
            Ok(p) => {
                max_leak = max_leak.max(p.imag_leak / (1.0 + p.v.norm()));
                table.push(vec![
                    fmt_f64(z.re),
                    fmt_f64(z.im),
                    fmt_f64(t),
                    fmt_f64(p.v.re),
                    fmt_f64(p.v.im),
                    p.iterations.to_string(),
                    fmt_f64(p.residual),
                ]);
            }
            Err(e @ NvError::NoConvergence { .. }) => {
                failures += 1;
                let nan = fmt_f64(f64::NAN);
                table.push(vec![fmt_f64(z.re), fmt_f64(z.im), fmt_f64(t), nan.clone(), nan.clone(), "0".into(), nan]);
                first_err.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Outcome {
        table,
        summary: json!({ "points": zs.len(), "failed": failures, "max_relative_imag_leak": max_leak }),
        failures,
        error: first_err,
    })
}

fn selftest(cfg: &RunConfig) -> Result<Outcome> {
    let mut table = Table::new(&["check", "value", "pass"]);
    let mut all = true;
    let mut record = |name: &str, value: f64, pass: bool| {
        all &= pass;
        table.push(vec![name.to_string(), fmt_f64(value), pass.to_string()]);
    };
    let anchors = [(0.0, "Interior"), (18.0, "BoundaryCusp"), (-6.0, "BoundaryRegular"), (30.0, "Exterior")];
    for (u, expect) in anchors {
        let ok = classify_region(Complex64::new(u, 0.0)).map(|c| c.name() == expect).unwrap_or(false);
        record(&format!("class_u_{u}"), u, ok);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let u = Complex64::new(rng.gen_range(-40.0..40.0), rng.gen_range(-40.0..40.0));
        let zeta = Complex64::from_polar(rng.gen_range(0.3..3.0), rng.gen_range(0.0..std::f64::consts::TAU));
        let roots = solve_cubic(u);
        let a = phase_dzeta(u, zeta)?;
        let b = phase_dzeta_product(&roots, zeta)?;
        worst = worst.max((a - b).norm() / a.norm().max(1e-300));
    }
    record("factorization_max_rel", worst, worst < 1e-9);

    let data = cfg.data();
    let f = LinearData::plain(data);
    let s_max = cfg.s_max();
    let nodes = LinearNodes::resolved(&f, &cfg.policy(), s_max, 5.0, 0.0)?;
    let i0 = nodes.point(Field::I, 0.0, Complex64::new(0.0, 0.0));
    let fine = RadialGrid::new(s_max, 2048, 8)?;
    let mass = integrate(&fine, |z| f.f(z), false)?.value;
    let mass_err = (i0 - mass).norm() / mass.norm().max(1e-300);
    record("linear_mass_t0", i0.norm(), data.c == 0.0 && i0.norm() == 0.0 || mass_err < 1e-6);

    let sweep = cfg.sweep_config();
    let p = sample_v(&data, Complex64::new(1.0, 0.5), 0.5, &sweep)?;
    record("v_abs", p.v.norm(), data.c != 0.0 || p.v.norm() == 0.0);
    record("v_imag_leak", p.imag_leak, p.imag_leak <= 1e-3 * (1.0 + p.v.norm()));
    let zero = data.c == 0.0 && i0.norm() == 0.0 && p.v.norm() == 0.0;
    let total = table.rows.len();
    let failed = table.rows.iter().filter(|r| r[2] == "false").count();
    Ok(Outcome {
        table,
        summary: json!({ "all_pass": all, "all_zero_fields": zero }),
        failures: failed,
        error: (!all).then_some(NvError::TooManyFailures { failed, total }),
    })
}
