use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use landau_hydro::burgers::{
    decay_report, riemann_gap, write_decay_csv, write_gap_csv, SmoothWave,
};
use landau_hydro::burnett::{
    burnett_property_check, burnett_solve, load_or_build_table, TransportTable, DEFAULT_THETAS,
};
use landau_hydro::euler::{GasState, RiemannData};
use landau_hydro::fluid::DiffusionMode;
use landau_hydro::harness::{self, parse_eps_list, SweepConfig};
use landau_hydro::landau::KernelParams;
use landau_hydro::velocity::VelocityGrid;

#[derive(Parser)]
#[command(
    name = "landau-hydro",
    version,
    about = "Vanishing-Knudsen rarefaction experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Knudsen-number sweep and fit the convergence rate.
    Sweep(SweepArgs),
    /// Build (or reuse) the viscosity/heat-conductivity table.
    TransportTable(TableArgs),
    /// Derivative decay and Riemann-fan distance of the smooth wave.
    WaveReport(WaveArgs),
    /// Solve the Burnett problems at one state and check their identities.
    BurnettCheck(BurnettArgs),
}

#[derive(Args, Clone)]
struct GridArgs {
    /// Velocity nodes per axis.
    #[arg(long, default_value_t = 32)]
    n: usize,
    /// Half width of the velocity box.
    #[arg(long, default_value_t = 8.0)]
    l: f64,
    /// Relative tolerance of the linearized inverse.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Args)]
struct SweepArgs {
    /// Flat `key = value` file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    /// Comma separated, strictly decreasing (`2^-4` is accepted).
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    t_eval: Option<f64>,
    #[arg(long)]
    rho_plus: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    diffusion: Option<DiffusionMode>,
    #[arg(long)]
    fan_cells: Option<f64>,
    #[arg(long)]
    cells_per_layer: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Output directory for rows.csv, summary.txt and plot.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Transport table CSV; built and cached there when missing.
    #[arg(long, default_value = "transport.csv")]
    table: PathBuf,
    /// Use constant `mu,kappa` instead of a table.
    #[arg(long, value_parser = parse_pair, conflicts_with = "table")]
    constant_transport: Option<(f64, f64)>,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args)]
struct TableArgs {
    #[arg(long, default_value = "transport.csv")]
    out: PathBuf,
    /// Comma separated increasing temperatures.
    #[arg(long)]
    thetas: Option<String>,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args)]
struct WaveArgs {
    #[arg(long, default_value_t = 1.1)]
    rho_plus: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Comma separated positive times.
    #[arg(long, default_value = "0.01,0.1,1,10")]
    times: String,
    /// Directory for decay_omega.csv, decay_wave.csv and gap.csv; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BurnettArgs {
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, default_value_t = 0.0)]
    u1: f64,
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
    #[command(flatten)]
    grid: GridArgs,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected mu,kappa")?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok((p(a)?, p(b)?))
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .with_context(|| format!("bad number {v:?}"))
        })
        .collect()
}

fn sweep_config(args: &SweepArgs) -> Result<SweepConfig> {
    let mut cfg = match &args.config {
        Some(p) => SweepConfig::from_file(p)?,
        None => SweepConfig::default(),
    };
    if let Some(v) = args.a {
        cfg.a = v;
    }
    if let Some(v) = args.k {
        cfg.k = v;
    }
    if let Some(v) = &args.eps {
        cfg.eps_list = parse_eps_list(v)?;
    }
    if let Some(v) = args.t_eval {
        cfg.t_eval = v;
    }
    if let Some(v) = args.rho_plus {
        cfg.rho_plus = v;
    }
    if let Some(v) = args.threads {
        cfg.threads = v;
    }
    if let Some(v) = args.diffusion {
        cfg.solver.diffusion = v;
    }
    if let Some(v) = args.fan_cells {
        cfg.solver.fan_cells = v;
    }
    if let Some(v) = args.cells_per_layer {
        cfg.solver.cells_per_layer = v;
    }
    if let Some(v) = args.samples {
        cfg.solver.samples = v;
    }
    if let Some(v) = &args.out {
        cfg.out = Some(v.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn table(path: &Path, thetas: &[f64], grid: &GridArgs) -> Result<TransportTable> {
    let g = VelocityGrid::new(grid.l, grid.n)?;
    let t = load_or_build_table(path, thetas, &g, &KernelParams::default(), grid.tol)
        .with_context(|| format!("transport table {}", path.display()))?;
    Ok(t)
}

fn sweep(args: SweepArgs) -> Result<()> {
    let cfg = sweep_config(&args)?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("sweep"));
    let tab = match args.constant_transport {
        Some((mu, kappa)) => TransportTable::constant(mu, kappa),
        None => table(&args.table, &DEFAULT_THETAS, &args.grid)?,
    };
    let result = harness::run_sweep(&cfg, &tab)?;
    harness::report(&result, &out)?;
    for r in &result.rows {
        match &r.failure {
            None => log::info!("eps={:e} done in {:.1?}", r.eps, r.runtime),
            Some(m) => log::warn!("eps={:e} failed: {m}", r.eps),
        }
    }
    print!("{}", harness::summary_text(&result));
    Ok(())
}

fn transport_table(args: TableArgs) -> Result<()> {
    let thetas = match &args.thetas {
        Some(s) => parse_list(s)?,
        None => DEFAULT_THETAS.to_vec(),
    };
    let t = table(&args.out, &thetas, &args.grid)?;
    let mut out = io::stdout().lock();
    writeln!(out, "theta,mu,kappa")?;
    for r in &t.rows {
        writeln!(out, "{},{},{}", r.theta, r.mu, r.kappa)?;
    }
    Ok(())
}

fn wave_report(args: WaveArgs) -> Result<()> {
    let times = parse_list(&args.times)?;
    let data = RiemannData::on_curve(GasState::reference(), args.rho_plus)?;
    let w = SmoothWave::new(&data, args.delta)?;
    let report = decay_report(&w, &times, &[1.0, 2.0, f64::INFINITY])?;
    let mut gaps = vec![];
    for &t in &times {
        let (gap, shape) = riemann_gap(&w, t)?;
        gaps.push((t, args.delta, gap, shape));
    }
    match &args.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            write_decay_csv(
                fs::File::create(dir.join("decay_omega.csv"))?,
                &report.omega,
            )?;
            write_decay_csv(fs::File::create(dir.join("decay_wave.csv"))?, &report.wave)?;
            write_gap_csv(fs::File::create(dir.join("gap.csv"))?, &gaps)?;
        }
        None => {
            let out = io::stdout();
            write_decay_csv(out.lock(), &report.wave)?;
            write_gap_csv(out.lock(), &gaps)?;
        }
    }
    Ok(())
}

fn burnett_check(args: BurnettArgs) -> Result<()> {
    let s = GasState::new(args.rho, [args.u1, 0.0, 0.0], args.theta)?;
    let g = VelocityGrid::new(args.grid.l, args.grid.n)?;
    let sol = burnett_solve(&s, &g, &KernelParams::default(), args.grid.tol)?;
    let report = burnett_property_check(&sol);
    print!("{}", report.to_text());
    if !report.all_pass() {
        bail!("max defect {:e}", report.max_defect());
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Sweep(a) => sweep(a),
        Command::TransportTable(a) => transport_table(a),
        Command::WaveReport(a) => wave_report(a),
        Command::BurnettCheck(a) => burnett_check(a),
    }
}
