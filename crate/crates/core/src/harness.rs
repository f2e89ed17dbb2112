//! Knudsen-number sweeps, convergence-rate fits and their reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::burgers::SmoothWave;
use crate::burnett::TransportTable;
use crate::error::{Error, Result};
use crate::euler::{GasState, RiemannData};
use crate::fluid::{self, delta_for, DiffusionMode, SolverConfig};
use crate::fmt17;
use crate::numerics::linear_fit;

/// Target rate exponent `3/5 - 2a/5`.
pub fn target_exponent(a: f64) -> f64 {
    0.6 - 0.4 * a
}

/// Energy exponent `6/5 - 4a/5`.
pub fn energy_exponent(a: f64) -> f64 {
    1.2 - 0.8 * a
}

/// Per-run solver settings shared by all rows of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOverrides {
    pub cfl_hyp: f64,
    pub cfl_diff: f64,
    pub cells_per_layer: f64,
    pub fan_cells: f64,
    pub diffusion: DiffusionMode,
    /// Diagnostic sample times per run.
    pub samples: usize,
}

impl Default for SolverOverrides {
    fn default() -> Self {
        SolverOverrides {
            cfl_hyp: 0.45,
            cfl_diff: 0.4,
            cells_per_layer: 10.0,
            fan_cells: 400.0,
            diffusion: DiffusionMode::Auto,
            samples: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub a: f64,
    pub k: f64,
    /// Strictly decreasing Knudsen numbers.
    pub eps_list: Vec<f64>,
    pub t_eval: f64,
    /// Right density of the 3-rarefaction from the reference left state.
    pub rho_plus: f64,
    /// Every `eps` must lie below this.
    pub eps0: f64,
    pub threads: usize,
    pub solver: SolverOverrides,
    pub out: Option<PathBuf>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            a: 2.0 / 3.0,
            k: 0.5,
            eps_list: (4..=9).map(|j| 2f64.powi(-j)).collect(),
            t_eval: 1.0,
            rho_plus: 1.1,
            eps0: 1.0,
            threads: 1,
            solver: SolverOverrides::default(),
            out: None,
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let v = v.trim();
    // allow 2^-4 style powers of two next to plain decimals
    if let Some(e) = v.strip_prefix("2^") {
        return e
            .parse::<i32>()
            .map(|e| 2f64.powi(e))
            .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")));
    }
    v.parse::<f64>()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

/// Parses a comma separated list of Knudsen numbers.
pub fn parse_eps_list(v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_f64("eps", s))
        .collect()
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.a >= 2.0 / 3.0 - 1e-12 && self.a <= 1.0 + 1e-12) {
            return bad(format!("a must lie in [2/3, 1], got {}", self.a));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return bad(format!("k must be positive, got {}", self.k));
        }
        if self.eps_list.is_empty() {
            return bad("eps list is empty".into());
        }
        if self.eps_list.windows(2).any(|w| !(w[1] < w[0])) {
            return bad("eps list must be strictly decreasing".into());
        }
        if let Some(e) = self.eps_list.iter().find(|&&e| !(e > 0.0 && e < self.eps0)) {
            return bad(format!("eps={e} outside (0, eps0={})", self.eps0));
        }
        if !(self.t_eval > 0.0) {
            return bad(format!("t_eval must be positive, got {}", self.t_eval));
        }
        if !(self.rho_plus > 1.0) {
            return bad(format!(
                "rho_plus must exceed the left density 1, got {}",
                self.rho_plus
            ));
        }
        if self.threads == 0 {
            return bad("threads must be at least 1".into());
        }
        self.solver_config(self.eps_list[0]).map(|_| ())
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "a" => self.a = parse_f64(key, v)?,
            "k" => self.k = parse_f64(key, v)?,
            "eps" => self.eps_list = parse_eps_list(v)?,
            "t_eval" => self.t_eval = parse_f64(key, v)?,
            "rho_plus" => self.rho_plus = parse_f64(key, v)?,
            "eps0" => self.eps0 = parse_f64(key, v)?,
            "threads" => {
                self.threads = v
                    .parse()
                    .map_err(|_| Error::Config(format!("threads: cannot parse {v:?}")))?
            }
            "out" => self.out = Some(PathBuf::from(v)),
            "cfl_hyp" => self.solver.cfl_hyp = parse_f64(key, v)?,
            "cfl_diff" => self.solver.cfl_diff = parse_f64(key, v)?,
            "cells_per_layer" => self.solver.cells_per_layer = parse_f64(key, v)?,
            "fan_cells" => self.solver.fan_cells = parse_f64(key, v)?,
            "diffusion" => self.solver.diffusion = v.parse()?,
            "samples" => {
                self.solver.samples = v
                    .parse()
                    .map_err(|_| Error::Config(format!("samples: cannot parse {v:?}")))?
            }
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Reads a flat `key = value` file over the defaults. `#` starts a comment.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut cfg = SweepConfig::default();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                msg: format!("line {}: expected key = value", no + 1),
            })?;
            cfg.set(k, v).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                msg: format!("line {}: {e}", no + 1),
            })?;
        }
        Ok(cfg)
    }

    pub fn riemann_data(&self) -> Result<RiemannData> {
        RiemannData::on_curve(GasState::reference(), self.rho_plus)
    }

    pub fn solver_config(&self, eps: f64) -> Result<SolverConfig> {
        let mut c = SolverConfig::new(eps, self.a, self.k, self.t_eval)?;
        c.cfl_hyp = self.solver.cfl_hyp;
        c.cfl_diff = self.solver.cfl_diff;
        c.cells_per_layer = self.solver.cells_per_layer;
        c.fan_cells = self.solver.fan_cells;
        c.diffusion = self.solver.diffusion;
        c.validate()?;
        Ok(c)
    }
}

/// Outcome of one Knudsen number.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub eps: f64,
    pub delta: f64,
    /// `None` on success, the error text otherwise.
    pub failure: Option<String>,
    pub fluid_sup: f64,
    pub maxwellian_sup: f64,
    pub e2_sup: f64,
    pub d2_integral: f64,
    pub entropy_c1: f64,
    pub steps: usize,
    pub cells: usize,
    /// Wall time; kept out of the CSV so that reruns compare equal.
    pub runtime: Duration,
}

impl SweepRow {
    pub fn ok(&self) -> bool {
        self.failure.is_none()
    }

    fn failed(eps: f64, delta: f64, e: &Error, runtime: Duration) -> Self {
        SweepRow {
            eps,
            delta,
            failure: Some(e.to_string()),
            fluid_sup: f64::NAN,
            maxwellian_sup: f64::NAN,
            e2_sup: f64::NAN,
            d2_integral: f64::NAN,
            entropy_c1: f64::NAN,
            steps: 0,
            cells: 0,
            runtime,
        }
    }
}

/// Fitted rate `err ~ C eps^p |ln eps|` plus the plain power law.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub p_hat: f64,
    pub c_hat: f64,
    /// RMS residual of the log-log regression.
    pub residual: f64,
    pub p_plain: f64,
    pub c_plain: f64,
    pub residual_plain: f64,
    /// `err / (eps^target |ln eps|)` per row, in row order.
    pub bound_ratios: Vec<f64>,
    pub rows_used: usize,
}

impl RateFit {
    pub fn bound_max(&self) -> f64 {
        self.bound_ratios
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// True when the bound ratio never grows as `eps` decreases.
    pub fn bound_nonincreasing(&self) -> bool {
        self.bound_ratios.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Regresses `ln(err / |ln eps|)` on `ln eps`. Needs at least four points
/// spanning two octaves of `eps`.
pub fn rate_fit(points: &[(f64, f64)], a: f64) -> Result<RateFit> {
    if points.len() < 4 {
        return Err(Error::Fit(format!(
            "{} rows, need at least 4",
            points.len()
        )));
    }
    if let Some(p) = points
        .iter()
        .find(|(e, err)| !(*e > 0.0 && *e < 1.0 && *err > 0.0 && err.is_finite()))
    {
        return Err(Error::Fit(format!("unusable point {p:?}")));
    }
    let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.0).fold(0.0, f64::max);
    if hi / lo < 4.0 * (1.0 - 1e-12) {
        return Err(Error::Fit(format!(
            "eps spans {:.3} octaves, need 2",
            (hi / lo).log2()
        )));
    }
    let x: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| (p.1 / p.0.ln().abs()).ln()).collect();
    let y_plain: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let degenerate = || Error::Fit("degenerate spread of eps".into());
    let (p_hat, b, residual) = linear_fit(&x, &y).ok_or_else(degenerate)?;
    let (p_plain, b_plain, residual_plain) = linear_fit(&x, &y_plain).ok_or_else(degenerate)?;
    let target = target_exponent(a);
    Ok(RateFit {
        p_hat,
        c_hat: b.exp(),
        residual,
        p_plain,
        c_plain: b_plain.exp(),
        residual_plain,
        bound_ratios: points
            .iter()
            .map(|(e, err)| err / (e.powf(target) * e.ln().abs()))
            .collect(),
        rows_used: points.len(),
    })
}

/// Which error column a fit uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Maxwellian,
    Fluid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub config: SweepConfig,
    /// Rows in config order, that is by decreasing `eps`.
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    fn points(&self, kind: ErrorKind) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.ok())
            .map(|r| {
                let e = match kind {
                    ErrorKind::Maxwellian => r.maxwellian_sup,
                    ErrorKind::Fluid => r.fluid_sup,
                };
                (r.eps, e)
            })
            .collect()
    }

    pub fn fit(&self, kind: ErrorKind) -> Result<RateFit> {
        rate_fit(&self.points(kind), self.config.a)
    }

    /// Power-law slope of the sup-over-time `E2` against `eps`.
    pub fn energy_fit(&self) -> Result<(f64, f64, f64)> {
        let ok: Vec<&SweepRow> = self.rows.iter().filter(|r| r.ok()).collect();
        if ok.len() < 4 {
            return Err(Error::Fit(format!("{} rows, need at least 4", ok.len())));
        }
        let x: Vec<f64> = ok.iter().map(|r| r.eps.ln()).collect();
        let y: Vec<f64> = ok.iter().map(|r| r.e2_sup.ln()).collect();
        linear_fit(&x, &y).ok_or_else(|| Error::Fit("degenerate spread of eps".into()))
    }
}

fn run_one(cfg: &SweepConfig, data: &RiemannData, table: &TransportTable, eps: f64) -> SweepRow {
    let start = Instant::now();
    let delta = delta_for(eps, cfg.a, cfg.k);
    let attempt = || -> Result<SweepRow> {
        let sc = cfg.solver_config(eps)?;
        let w = SmoothWave::new(data, sc.delta)?;
        let out = fluid::run(&sc, &w, table, cfg.solver.samples)?;
        let last = out.last();
        Ok(SweepRow {
            eps,
            delta,
            failure: None,
            fluid_sup: last.fluid_sup,
            maxwellian_sup: last.maxwellian_sup,
            e2_sup: out.e2_sup,
            d2_integral: out.d2_integral,
            entropy_c1: out.entropy.c1().unwrap_or(f64::NAN),
            steps: out.steps,
            cells: out.field.len(),
            runtime: start.elapsed(),
        })
    };
    match attempt() {
        Ok(row) => {
            log::info!(
                "eps={eps:.6e} err={:.4e} steps={} in {:.1?}",
                row.maxwellian_sup,
                row.steps,
                row.runtime
            );
            row
        }
        Err(e) => {
            log::warn!("eps={eps:.6e} failed: {e}");
            SweepRow::failed(eps, delta, &e, start.elapsed())
        }
    }
}

/// Runs every Knudsen number of `cfg` on a pool of `cfg.threads` workers.
/// A failing run becomes a failed row; the rows keep the config order.
pub fn run_sweep(cfg: &SweepConfig, table: &TransportTable) -> Result<SweepResult> {
    cfg.validate()?;
    let data = cfg.riemann_data()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let rows = pool.install(|| {
        cfg.eps_list
            .par_iter()
            .map(|&eps| run_one(cfg, &data, table, eps))
            .collect()
    });
    Ok(SweepResult {
        config: cfg.clone(),
        rows,
    })
}

pub const ROWS_HEADER: [&str; 11] = [
    "eps",
    "delta",
    "status",
    "fluid_sup",
    "maxwellian_sup",
    "E2_sup",
    "D2_integral",
    "entropy_c1",
    "steps",
    "cells",
    "message",
];

/// Writes the rows with 17 significant digits and a status column.
pub fn write_rows_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(ROWS_HEADER)?;
    for r in rows {
        w.write_record([
            fmt17(r.eps),
            fmt17(r.delta),
            if r.ok() { "ok".into() } else { "failed".into() },
            fmt17(r.fluid_sup),
            fmt17(r.maxwellian_sup),
            fmt17(r.e2_sup),
            fmt17(r.d2_integral),
            fmt17(r.entropy_c1),
            r.steps.to_string(),
            r.cells.to_string(),
            r.failure.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a rows CSV written by [`write_rows_csv`]; runtimes read as zero.
pub fn read_rows_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let parse_err = |msg: String| Error::Parse {
        path: path.to_path_buf(),
        msg,
    };
    let mut rdr = csv::Reader::from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != ROWS_HEADER {
        return Err(parse_err(format!("unexpected header {header:?}")));
    }
    let mut rows = vec![];
    for rec in rdr.records() {
        let rec = rec?;
        let f = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|_| parse_err(format!("bad number {:?}", &rec[i])))
        };
        let u = |i: usize| -> Result<usize> {
            rec[i]
                .parse::<usize>()
                .map_err(|_| parse_err(format!("bad count {:?}", &rec[i])))
        };
        let failure = match &rec[2] {
            "ok" => None,
            "failed" => Some(rec[10].to_string()),
            s => return Err(parse_err(format!("bad status {s:?}"))),
        };
        rows.push(SweepRow {
            eps: f(0)?,
            delta: f(1)?,
            failure,
            fluid_sup: f(3)?,
            maxwellian_sup: f(4)?,
            e2_sup: f(5)?,
            d2_integral: f(6)?,
            entropy_c1: f(7)?,
            steps: u(8)?,
            cells: u(9)?,
            runtime: Duration::ZERO,
        });
    }
    Ok(rows)
}

fn fit_block(out: &mut String, name: &str, fit: &Result<RateFit>, target: f64) {
    match fit {
        Ok(f) => {
            let _ = writeln!(out, "[{name}]");
            let _ = writeln!(out, "rows_used = {}", f.rows_used);
            let _ = writeln!(out, "target_exponent = {}", fmt17(target));
            let _ = writeln!(out, "p_hat = {}", fmt17(f.p_hat));
            let _ = writeln!(out, "C_hat = {}", fmt17(f.c_hat));
            let _ = writeln!(out, "residual = {}", fmt17(f.residual));
            let _ = writeln!(out, "p_plain = {}", fmt17(f.p_plain));
            let _ = writeln!(out, "C_plain = {}", fmt17(f.c_plain));
            let _ = writeln!(out, "residual_plain = {}", fmt17(f.residual_plain));
            let _ = writeln!(out, "bound_ratio_max = {}", fmt17(f.bound_max()));
            let _ = writeln!(
                out,
                "bound_ratio_nonincreasing = {}",
                f.bound_nonincreasing()
            );
        }
        Err(e) => {
            let _ = writeln!(out, "[{name}]");
            let _ = writeln!(out, "status = insufficient rows ({e})");
        }
    }
}

/// Structured text summary of a sweep and its fits.
pub fn summary_text(result: &SweepResult) -> String {
    let c = &result.config;
    let mut s = String::new();
    let _ = writeln!(s, "[sweep]");
    let _ = writeln!(s, "a = {}", fmt17(c.a));
    let _ = writeln!(s, "k = {}", fmt17(c.k));
    let _ = writeln!(s, "t_eval = {}", fmt17(c.t_eval));
    let _ = writeln!(s, "rho_plus = {}", fmt17(c.rho_plus));
    let _ = writeln!(s, "rows = {}", result.rows.len());
    let _ = writeln!(
        s,
        "failed = {}",
        result.rows.iter().filter(|r| !r.ok()).count()
    );
    let target = target_exponent(c.a);
    fit_block(
        &mut s,
        "fit.maxwellian",
        &result.fit(ErrorKind::Maxwellian),
        target,
    );
    fit_block(&mut s, "fit.fluid", &result.fit(ErrorKind::Fluid), target);
    let _ = writeln!(s, "[fit.energy]");
    match result.energy_fit() {
        Ok((p, _, res)) => {
            let _ = writeln!(s, "target_exponent = {}", fmt17(energy_exponent(c.a)));
            let _ = writeln!(s, "p_hat = {}", fmt17(p));
            let _ = writeln!(s, "residual = {}", fmt17(res));
        }
        Err(e) => {
            let _ = writeln!(s, "status = insufficient rows ({e})");
        }
    }
    s
}

/// Plot data: `eps, maxwellian_sup, fluid_sup, bound` with the bound shape
/// `C_hat eps^p |ln eps|` at the target exponent through the largest ratio.
pub fn write_plot_data(path: &Path, result: &SweepResult) -> Result<()> {
    let target = target_exponent(result.config.a);
    let scale = result
        .fit(ErrorKind::Maxwellian)
        .map(|f| f.bound_max())
        .unwrap_or(f64::NAN);
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["eps", "maxwellian_sup", "fluid_sup", "bound_shape"])?;
    for r in result.rows.iter().filter(|r| r.ok()) {
        w.write_record([
            fmt17(r.eps),
            fmt17(r.maxwellian_sup),
            fmt17(r.fluid_sup),
            fmt17(scale * r.eps.powf(target) * r.eps.ln().abs()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `rows.csv`, `summary.txt` and `plot.csv` into `dir`.
pub fn report(result: &SweepResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_rows_csv(&dir.join("rows.csv"), &result.rows)?;
    fs::write(dir.join("summary.txt"), summary_text(result))?;
    write_plot_data(&dir.join("plot.csv"), result)?;
    Ok(())
}
