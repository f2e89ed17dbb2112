//! One-dimensional compressible Navier-Stokes system with the Landau
//! transport coefficients `mu(theta)`, `kappa(theta)`, plus the entropy and
//! energy diagnostics measured against the smooth rarefaction wave.
//!
//! The remainder terms of the fluid-type system that involve the evolving
//! microscopic part (`L_M^{-1} Theta`) are dropped. What is integrated is
//!
//! ```text
//! rho_t + (rho u1)_x = 0
//! (rho u1)_t + (rho u1^2 + p)_x = 4/3 eps (mu u1_x)_x
//! (rho ui)_t + (rho u1 ui)_x = eps (mu ui_x)_x,                    i = 2, 3
//! E_t + (u1 (E + p))_x = eps (kappa theta_x)_x + 4/3 eps (mu u1 u1_x)_x
//!                        + eps (mu u2 u2_x)_x + eps (mu u3 u3_x)_x
//! ```
//!
//! with `E = rho (theta + |u|^2 / 2)` and `p = R rho theta`, in physical
//! `(t, x)`. The smooth wave passed to the diagnostics lives in the scaled
//! variables `(tau, y) = (t, x) / eps^a`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::burgers::SmoothWave;
use crate::burnett::TransportTable;
use crate::error::{Error, Result};
use crate::euler::{riemann_rarefaction, sound_speed_squared, GasState, RiemannData, R_GAS};
use crate::fmt17;
use crate::velocity::maxwellian_l2mu_distance;

/// Ratio of specific heats.
pub const GAMMA: f64 = 5.0 / 3.0;
/// Specific heat at constant volume; the internal energy is `CV theta`.
pub const CV: f64 = 1.0;

/// Conservative variables `(rho, rho u1, rho u2, rho u3, E)`.
pub type Cons = [f64; 5];
/// Primitive variables `(rho, u1, u2, u3, theta)`.
pub type Prim = [f64; 5];

pub fn to_cons(s: &GasState) -> Cons {
    let k = 0.5 * (s.u[0] * s.u[0] + s.u[1] * s.u[1] + s.u[2] * s.u[2]);
    [
        s.rho,
        s.rho * s.u[0],
        s.rho * s.u[1],
        s.rho * s.u[2],
        s.rho * (CV * s.theta + k),
    ]
}

pub fn to_prim(c: &Cons) -> Prim {
    let rho = c[0];
    let u = [c[1] / rho, c[2] / rho, c[3] / rho];
    let k = 0.5 * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
    [rho, u[0], u[1], u[2], (c[4] / rho - k) / CV]
}

fn prim_state(w: &Prim) -> GasState {
    GasState {
        rho: w[0],
        u: [w[1], w[2], w[3]],
        theta: w[4],
    }
}

fn state_prim(s: &GasState) -> Prim {
    [s.rho, s.u[0], s.u[1], s.u[2], s.theta]
}

/// How the viscous and heat-conduction terms are advanced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffusionMode {
    /// Explicit midpoint for everything; needs the diffusive CFL.
    Explicit,
    /// Second-order IMEX (ARS(2,2,2)) with implicit diffusion.
    Imex,
    /// Explicit when the diffusive limit is not the binding one, IMEX otherwise.
    Auto,
}

impl std::str::FromStr for DiffusionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "explicit" => Ok(DiffusionMode::Explicit),
            "imex" => Ok(DiffusionMode::Imex),
            "auto" => Ok(DiffusionMode::Auto),
            _ => Err(Error::Config(format!("unknown diffusion mode {s:?}"))),
        }
    }
}

/// Run parameters of one fluid computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub eps: f64,
    pub a: f64,
    pub k: f64,
    /// `eps^{3/5 - 2a/5} / k`, set by [`SolverConfig::new`].
    pub delta: f64,
    pub cfl_hyp: f64,
    pub cfl_diff: f64,
    pub t_end: f64,
    /// Cells across the initial layer `eps^a delta`.
    pub cells_per_layer: f64,
    /// Cells across the fan at `t_end`.
    pub fan_cells: f64,
    /// Multiplies the cell size; powers of two give nested grids.
    pub dx_scale: f64,
    pub max_cells: usize,
    pub diffusion: DiffusionMode,
}

/// Width parameter `delta = eps^{3/5 - 2a/5} / k`.
pub fn delta_for(eps: f64, a: f64, k: f64) -> f64 {
    eps.powf(0.6 - 0.4 * a) / k
}

impl SolverConfig {
    pub fn new(eps: f64, a: f64, k: f64, t_end: f64) -> Result<Self> {
        let cfg = SolverConfig {
            eps,
            a,
            k,
            delta: delta_for(eps, a, k),
            cfl_hyp: 0.45,
            cfl_diff: 0.4,
            t_end,
            cells_per_layer: 10.0,
            fan_cells: 400.0,
            dx_scale: 1.0,
            max_cells: 400_000,
            diffusion: DiffusionMode::Auto,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return bad(format!("eps must lie in (0, 1), got {}", self.eps));
        }
        if !(self.a >= 2.0 / 3.0 - 1e-12 && self.a <= 1.0 + 1e-12) {
            return bad(format!("a must lie in [2/3, 1], got {}", self.a));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return bad(format!("k must be positive, got {}", self.k));
        }
        if self.delta != delta_for(self.eps, self.a, self.k) {
            return bad("delta is not eps^{3/5-2a/5}/k".into());
        }
        if !(self.t_end > 0.0) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        for (name, v) in [("cfl_hyp", self.cfl_hyp), ("cfl_diff", self.cfl_diff)] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(format!("{name} must lie in (0, 1], got {v}"));
            }
        }
        if !(self.cells_per_layer > 0.0 && self.fan_cells > 0.0 && self.dx_scale > 0.0) {
            return bad("grid sizing factors must be positive".into());
        }
        Ok(())
    }

    /// `eps^a`, the scale between physical and scaled variables.
    pub fn eps_a(&self) -> f64 {
        self.eps.powf(self.a)
    }

    /// Physical width `eps^a delta` of the initial layer.
    pub fn layer_width(&self) -> f64 {
        self.eps_a() * self.delta
    }

    /// Initial uniform grid. It covers `[lambda1(left) t_end, lambda3(right) t_end]`
    /// plus diffusion and layer margins. The cell size starts at
    /// `min(eps^a delta / cells_per_layer, fan / fan_cells)` and may be doubled
    /// `coarsenings` times as the layers widen, never beyond `fan / fan_cells`.
    pub fn grid(&self, data: &RiemannData) -> Result<FluidGrid> {
        self.validate()?;
        let (lm, lp) = data.fan_edges();
        let l1 = data.left.u[0] - sound_speed_squared(&data.left).sqrt();
        let margin = 10.0 * (self.eps * self.t_end).sqrt() + 10.0 * self.layer_width();
        let lo = (l1 * self.t_end).min(0.0) - margin;
        let hi = (lp * self.t_end).max(0.0) + margin;
        let dx_fan = (lp - lm) * self.t_end / self.fan_cells;
        let dx_layer = self.layer_width() / self.cells_per_layer;
        let levels = (dx_fan / dx_layer).log2().ceil().max(0.0) as u32;
        // a multiple of 16 cells at unit scale keeps power-of-two scales nested
        let n_unit = ((hi - lo) / dx_fan / 16.0).ceil() * 16.0;
        let n_coarse = (n_unit / self.dx_scale).ceil();
        let dx_coarse = dx_fan * self.dx_scale;
        let n = n_coarse * f64::from(1u32 << levels);
        if !(n_coarse >= 4.0) || n > self.max_cells as f64 {
            return Err(Error::Config(format!(
                "grid of {n} cells outside [{}, {}]",
                4 << levels,
                self.max_cells
            )));
        }
        Ok(FluidGrid {
            x_lo: lo,
            dx: dx_coarse / f64::from(1u32 << levels),
            n: n as usize,
            coarsenings: levels,
        })
    }

    /// Largest cell size that still resolves the layers at time `t`: the
    /// initial layer or the viscous width `sqrt(eps t)`, whichever is wider.
    pub fn resolved_dx(&self, t: f64) -> f64 {
        self.layer_width().max((self.eps * t).sqrt()) / self.cells_per_layer * self.dx_scale
    }
}

/// Uniform cell-centered grid on `[x_lo, x_lo + n dx]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidGrid {
    pub x_lo: f64,
    pub dx: f64,
    pub n: usize,
    /// Remaining 2:1 coarsenings.
    pub coarsenings: u32,
}

impl FluidGrid {
    pub fn x(&self, i: usize) -> f64 {
        self.x_lo + (i as f64 + 0.5) * self.dx
    }

    pub fn x_hi(&self) -> f64 {
        self.x_lo + self.n as f64 * self.dx
    }
}

/// Fluid state on the grid. The two ghost cells at each end are pinned to
/// the far-field states.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidField {
    pub grid: FluidGrid,
    pub cells: Vec<Cons>,
    pub t: f64,
    pub left: GasState,
    pub right: GasState,
    /// `eps^a` of the run, used to evaluate the scaled wave.
    pub eps_a: f64,
    /// Time integral of the net flux entering through the two ends.
    pub inflow: Cons,
    pub initial_total: Cons,
    out_of_table: bool,
}

impl FluidField {
    /// Field from primitive states, one per cell.
    pub fn from_states(
        grid: FluidGrid,
        states: &[GasState],
        left: GasState,
        right: GasState,
        eps_a: f64,
    ) -> Result<Self> {
        if states.len() != grid.n {
            return Err(Error::ShapeMismatch {
                expected: grid.n,
                found: states.len(),
            });
        }
        let cells: Vec<Cons> = states.iter().map(to_cons).collect();
        let mut f = FluidField {
            grid,
            cells,
            t: 0.0,
            left,
            right,
            eps_a,
            inflow: [0.0; 5],
            initial_total: [0.0; 5],
            out_of_table: false,
        };
        f.initial_total = f.totals();
        f.check_positive()?;
        Ok(f)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn state(&self, i: usize) -> GasState {
        prim_state(&to_prim(&self.cells[i]))
    }

    pub fn states(&self) -> Vec<GasState> {
        (0..self.len()).map(|i| self.state(i)).collect()
    }

    /// `sum_i U_i dx`.
    pub fn totals(&self) -> Cons {
        let mut s = [0.0; 5];
        for c in &self.cells {
            for k in 0..5 {
                s[k] += c[k];
            }
        }
        s.map(|v| v * self.grid.dx)
    }

    /// `|total - initial - inflow|` per component, relative to `max(|initial|, 1)`.
    pub fn conservation_defect(&self) -> Cons {
        let tot = self.totals();
        std::array::from_fn(|k| {
            (tot[k] - self.initial_total[k] - self.inflow[k]).abs()
                / self.initial_total[k].abs().max(1.0)
        })
    }

    /// Merges neighbouring cell pairs, doubling the cell size. Cell averages
    /// merge exactly, so the totals are unchanged up to rounding.
    pub fn coarsen(&mut self) -> Result<()> {
        if self.grid.coarsenings == 0 || self.len() % 2 != 0 {
            return Err(Error::Config("grid cannot be coarsened further".into()));
        }
        self.cells = self
            .cells
            .chunks_exact(2)
            .map(|p| std::array::from_fn(|k| 0.5 * (p[0][k] + p[1][k])))
            .collect();
        self.grid.n /= 2;
        self.grid.dx *= 2.0;
        self.grid.coarsenings -= 1;
        Ok(())
    }

    /// True once a face temperature fell outside the transport table.
    pub fn left_table_range(&self) -> bool {
        self.out_of_table
    }

    fn check_positive(&self) -> Result<()> {
        for (i, c) in self.cells.iter().enumerate() {
            let w = to_prim(c);
            if !(w[0] > 0.0 && w[4] > 0.0 && w.iter().all(|v| v.is_finite())) {
                return Err(Error::BlowUp {
                    t: self.t,
                    cell: i,
                    rho: w[0],
                    theta: w[4],
                });
            }
        }
        Ok(())
    }

    /// Writes `x, rho, u1, u2, u3, theta` with 17 significant digits.
    pub fn write_snapshot(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "# t={}", fmt17(self.t))?;
        writeln!(w, "x,rho,u1,u2,u3,theta")?;
        for i in 0..self.len() {
            let p = to_prim(&self.cells[i]);
            writeln!(
                w,
                "{},{},{},{},{},{}",
                fmt17(self.grid.x(i)),
                fmt17(p[0]),
                fmt17(p[1]),
                fmt17(p[2]),
                fmt17(p[3]),
                fmt17(p[4])
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Initial field: the scaled wave `w` at `(0, x / eps^a)` in every cell.
pub fn initial_data(cfg: &SolverConfig, w: &SmoothWave) -> Result<FluidField> {
    let grid = cfg.grid(&w.data)?;
    if w.params.delta != cfg.delta {
        return Err(Error::Config(format!(
            "wave width {} differs from the configured delta {}",
            w.params.delta, cfg.delta
        )));
    }
    let per_layer = cfg.layer_width() / grid.dx;
    if per_layer < 8.0 {
        return Err(Error::Config(format!(
            "grid resolves the initial layer with {per_layer:.2} cells, need at least 8"
        )));
    }
    let ea = cfg.eps_a();
    let states = (0..grid.n)
        .map(|i| w.eval(0.0, grid.x(i) / ea))
        .collect::<Result<Vec<_>>>()?;
    FluidField::from_states(grid, &states, *w.left(), *w.right(), ea)
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

fn euler_flux(w: &Prim) -> Cons {
    let (rho, u, th) = (w[0], w[1], w[4]);
    let p = R_GAS * rho * th;
    let e = rho * (CV * th + 0.5 * (w[1] * w[1] + w[2] * w[2] + w[3] * w[3]));
    [
        rho * u,
        rho * u * u + p,
        rho * u * w[2],
        rho * u * w[3],
        u * (e + p),
    ]
}

/// Roe flux with Harten's entropy fix on the acoustic fields.
fn roe_flux(wl: &Prim, wr: &Prim) -> Cons {
    let fl = euler_flux(wl);
    let fr = euler_flux(wr);
    let (sl, sr) = (wl[0].sqrt(), wr[0].sqrt());
    let avg = |a: f64, b: f64| (sl * a + sr * b) / (sl + sr);
    let h = |w: &Prim| (CV * w[4] + 0.5 * (w[1] * w[1] + w[2] * w[2] + w[3] * w[3])) + R_GAS * w[4];
    let (u, v, ww) = (avg(wl[1], wr[1]), avg(wl[2], wr[2]), avg(wl[3], wr[3]));
    let hh = avg(h(wl), h(wr));
    let q2 = u * u + v * v + ww * ww;
    let c2 = (GAMMA - 1.0) * (hh - 0.5 * q2);
    let c = c2.max(1e-300).sqrt();
    let ul = to_cons(&prim_state(wl));
    let ur = to_cons(&prim_state(wr));
    let d: Cons = std::array::from_fn(|k| ur[k] - ul[k]);
    let a3 = d[2] - v * d[0];
    let a4 = d[3] - ww * d[0];
    let de = d[4] - a3 * v - a4 * ww;
    let a2 = (GAMMA - 1.0) / c2 * (d[0] * (hh - u * u) + u * d[1] - de);
    let a1 = (d[0] * (u + c) - d[1] - c * a2) / (2.0 * c);
    let a5 = d[0] - (a1 + a2);
    let fix = |l: f64| {
        let e = 0.1 * c;
        let al = l.abs();
        if al < e {
            0.5 * (l * l + e * e) / e
        } else {
            al
        }
    };
    let (l1, l2, l5) = (fix(u - c), u.abs(), fix(u + c));
    let k1 = [1.0, u - c, v, ww, hh - u * c];
    let k2 = [1.0, u, v, ww, 0.5 * q2];
    let k5 = [1.0, u + c, v, ww, hh + u * c];
    std::array::from_fn(|k| {
        let k3 = [0.0, 0.0, 1.0, 0.0, v][k];
        let k4 = [0.0, 0.0, 0.0, 1.0, ww][k];
        let diss = l1 * a1 * k1[k] + l2 * (a2 * k2[k] + a3 * k3 + a4 * k4) + l5 * a5 * k5[k];
        0.5 * (fl[k] + fr[k] - diss)
    })
}

/// Primitive values with two ghost cells on each side.
fn extended(f: &FluidField, cells: &[Cons]) -> Vec<Prim> {
    let (l, r) = (state_prim(&f.left), state_prim(&f.right));
    let mut ext = Vec::with_capacity(cells.len() + 4);
    ext.push(l);
    ext.push(l);
    ext.extend(cells.iter().map(to_prim));
    ext.push(r);
    ext.push(r);
    ext
}

/// Transport coefficients `(mu, kappa)` at the `n + 1` faces, the mean of
/// the two neighbouring cell values.
fn face_coefficients(
    ext: &[Prim],
    table: &TransportTable,
    out_of_range: &mut bool,
) -> Vec<(f64, f64)> {
    let (lo, hi) = table.theta_range();
    let cell: Vec<(f64, f64)> = ext[1..ext.len() - 1]
        .iter()
        .map(|w| {
            if w[4] < lo || w[4] > hi {
                *out_of_range = true;
            }
            table.eval_clamped(w[4])
        })
        .collect();
    cell.windows(2)
        .map(|p| (0.5 * (p[0].0 + p[1].0), 0.5 * (p[0].1 + p[1].1)))
        .collect()
}

/// Viscous and heat fluxes at the faces (positive means transport toward +x
/// of the diffusive right-hand side, i.e. `D U = (F_{i+1/2} - F_{i-1/2}) / dx`).
fn viscous_fluxes(ext: &[Prim], coef: &[(f64, f64)], eps: f64, dx: f64) -> Vec<Cons> {
    coef.iter()
        .enumerate()
        .map(|(f, &(mu, kappa))| {
            let (a, b) = (&ext[f + 1], &ext[f + 2]);
            let s = eps / dx;
            let du: [f64; 3] = std::array::from_fn(|j| b[j + 1] - a[j + 1]);
            let dk: [f64; 3] =
                std::array::from_fn(|j| 0.5 * (b[j + 1] * b[j + 1] - a[j + 1] * a[j + 1]));
            [
                0.0,
                s * 4.0 / 3.0 * mu * du[0],
                s * mu * du[1],
                s * mu * du[2],
                s * (kappa * (b[4] - a[4]) + mu * (4.0 / 3.0 * dk[0] + dk[1] + dk[2])),
            ]
        })
        .collect()
}

/// Hyperbolic face fluxes from minmod-limited primitive reconstruction.
fn hyperbolic_fluxes(ext: &[Prim]) -> Vec<Cons> {
    let m = ext.len();
    let mut slope = vec![[0.0; 5]; m];
    for j in 1..m - 1 {
        for k in 0..5 {
            slope[j][k] = minmod(ext[j][k] - ext[j - 1][k], ext[j + 1][k] - ext[j][k]);
        }
    }
    (0..m - 3)
        .map(|f| {
            let (j, jr) = (f + 1, f + 2);
            let wl: Prim = std::array::from_fn(|k| ext[j][k] + 0.5 * slope[j][k]);
            let wr: Prim = std::array::from_fn(|k| ext[jr][k] - 0.5 * slope[jr][k]);
            roe_flux(&wl, &wr)
        })
        .collect()
}

/// Face-flux divergence `(F_{i+1/2} - F_{i-1/2}) / dx` scaled by `sign`.
fn divergence(flux: &[Cons], dx: f64, sign: f64) -> Vec<Cons> {
    (0..flux.len() - 1)
        .map(|i| std::array::from_fn(|k| sign * (flux[i + 1][k] - flux[i][k]) / dx))
        .collect()
}

/// Rate of change of the totals due to the end faces of `sign * F_x`.
fn net_inflow(flux: &[Cons], sign: f64) -> Cons {
    let last = flux.len() - 1;
    std::array::from_fn(|k| sign * (flux[last][k] - flux[0][k]))
}

/// Stable step sizes `(hyperbolic, explicit diffusion)`.
pub fn stable_dt(f: &FluidField, cfg: &SolverConfig, table: &TransportTable) -> (f64, f64) {
    let mut smax: f64 = 0.0;
    let mut rho_min = f64::INFINITY;
    let (mut th_lo, mut th_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for c in &f.cells {
        let w = to_prim(c);
        let cs = (GAMMA * R_GAS * w[4]).sqrt();
        smax = smax.max(w[1].abs() + cs);
        rho_min = rho_min.min(w[0]);
        th_lo = th_lo.min(w[4]);
        th_hi = th_hi.max(w[4]);
    }
    let (mu, kappa) = table.max_on(th_lo, th_hi);
    let dmax = (4.0 / 3.0 * mu).max(kappa / CV);
    let dx = f.grid.dx;
    let hyp = cfg.cfl_hyp * dx / smax;
    let diff = if dmax > 0.0 {
        cfg.cfl_diff * dx * dx * rho_min / (cfg.eps * dmax)
    } else {
        f64::INFINITY
    };
    (hyp, diff)
}

fn axpy(u: &[Cons], terms: &[(f64, &[Cons])]) -> Vec<Cons> {
    u.iter()
        .enumerate()
        .map(|(i, c)| {
            std::array::from_fn(|k| {
                let mut v = c[k];
                for (a, x) in terms {
                    v += a * x[i][k];
                }
                v
            })
        })
        .collect()
}

fn add_assign(acc: &mut Cons, a: f64, x: &Cons) {
    for k in 0..5 {
        acc[k] += a * x[k];
    }
}

/// LU factors of a tridiagonal matrix `a_i x_{i-1} + b_i x_i + c_i x_{i+1}`
/// for repeated Thomas solves.
struct Tridiag {
    a: Vec<f64>,
    cp: Vec<f64>,
    inv: Vec<f64>,
}

impl Tridiag {
    fn new(a: Vec<f64>, b: &[f64], c: &[f64]) -> Self {
        let n = b.len();
        let mut cp = vec![0.0; n];
        let mut inv = vec![0.0; n];
        inv[0] = 1.0 / b[0];
        cp[0] = c[0] * inv[0];
        for i in 1..n {
            inv[i] = 1.0 / (b[i] - a[i] * cp[i - 1]);
            cp[i] = c[i] * inv[i];
        }
        Tridiag { a, cp, inv }
    }

    fn solve(&self, d: &mut [f64]) {
        let n = d.len();
        d[0] *= self.inv[0];
        for i in 1..n {
            d[i] = (d[i] - self.a[i] * d[i - 1]) * self.inv[i];
        }
        for i in (0..n - 1).rev() {
            d[i] -= self.cp[i] * d[i + 1];
        }
    }
}

/// Evaluates the semi-discrete operators at a state.
struct Rhs<'a> {
    f: &'a FluidField,
    cfg: &'a SolverConfig,
    table: &'a TransportTable,
}

impl Rhs<'_> {
    /// `-(F_hyp)_x` and its net boundary inflow.
    fn hyperbolic(&self, cells: &[Cons]) -> (Vec<Cons>, Cons) {
        let ext = extended(self.f, cells);
        let flux = hyperbolic_fluxes(&ext);
        (
            divergence(&flux, self.f.grid.dx, -1.0),
            net_inflow(&flux, -1.0),
        )
    }

    /// Diffusive right-hand side and its net boundary inflow.
    fn diffusive(&self, cells: &[Cons], oor: &mut bool) -> (Vec<Cons>, Cons) {
        let ext = extended(self.f, cells);
        let coef = face_coefficients(&ext, self.table, oor);
        let flux = viscous_fluxes(&ext, &coef, self.cfg.eps, self.f.grid.dx);
        (
            divergence(&flux, self.f.grid.dx, 1.0),
            net_inflow(&flux, 1.0),
        )
    }

    /// Solves `U = R + c D(U)` for the velocities and then the temperature,
    /// with one Picard update of the coefficients. Returns the solution and
    /// the boundary inflow of `D(U)` as discretized in the last pass.
    fn implicit(&self, r: &[Cons], c: f64, oor: &mut bool) -> Result<(Vec<Cons>, Cons)> {
        let n = r.len();
        let dx = self.f.grid.dx;
        let eps = self.cfg.eps;
        let s = c * eps / (dx * dx);
        let g = eps / dx;
        let (pl, pr) = (state_prim(&self.f.left), state_prim(&self.f.right));
        let rho: Vec<f64> = r.iter().map(|c| c[0]).collect();
        let mut u: Vec<Cons> = r.to_vec();
        let mut inflow = [0.0; 5];
        // velocities and temperature padded with the pinned ghost values
        let pad = |v: &mut Vec<f64>, k: usize| {
            v[0] = pl[k];
            v[n + 1] = pr[k];
        };
        let mut vel = [vec![0.0; n + 2], vec![0.0; n + 2], vec![0.0; n + 2]];
        for (j, v) in vel.iter_mut().enumerate() {
            pad(v, j + 1);
            for i in 0..n {
                v[i + 1] = r[i][j + 1] / rho[i];
            }
        }
        let mut theta = vec![0.0; n + 2];
        pad(&mut theta, 4);
        for _pass in 0..2 {
            let ext = extended(self.f, &u);
            if let Some(i) = ext[2..n + 2]
                .iter()
                .position(|w| !(w[0] > 0.0 && w[4] > 0.0 && w[4].is_finite()))
            {
                return Err(Error::BlowUp {
                    t: self.f.t,
                    cell: i,
                    rho: ext[i + 2][0],
                    theta: ext[i + 2][4],
                });
            }
            let coef = face_coefficients(&ext, self.table, oor);
            // Each unknown is written as the explicit value plus an increment,
            // so that constant states are reproduced exactly.
            let lo: Vec<f64> = (0..n).map(|i| -s * coef[i].0).collect();
            let up: Vec<f64> = (0..n).map(|i| -s * coef[i + 1].0).collect();
            let diag =
                |f: f64| -> Vec<f64> { (0..n).map(|i| rho[i] - f * (lo[i] + up[i])).collect() };
            let scaled = |f: f64, v: &[f64]| -> Vec<f64> { v.iter().map(|x| f * x).collect() };
            let normal = Tridiag::new(
                scaled(4.0 / 3.0, &lo),
                &diag(4.0 / 3.0),
                &scaled(4.0 / 3.0, &up),
            );
            let transverse = Tridiag::new(lo.clone(), &diag(1.0), &up);
            let mut new_vel = vel.clone();
            for j in 0..3 {
                let (tri, fac) = if j == 0 {
                    (&normal, 4.0 / 3.0)
                } else {
                    (&transverse, 1.0)
                };
                let base: Vec<f64> = (0..n).map(|i| r[i][j + 1] / rho[i]).collect();
                let at = |i: usize| {
                    if i == 0 {
                        pl[j + 1]
                    } else if i == n + 1 {
                        pr[j + 1]
                    } else {
                        base[i - 1]
                    }
                };
                let mut d: Vec<f64> = (0..n)
                    .map(|i| {
                        let (a, b, cc) = (at(i), at(i + 1), at(i + 2));
                        s * fac * (coef[i + 1].0 * (cc - b) - coef[i].0 * (b - a))
                    })
                    .collect();
                tri.solve(&mut d);
                for i in 0..n {
                    new_vel[j][i + 1] = base[i] + d[i];
                }
            }
            vel = new_vel;
            let work: Vec<f64> = (0..=n)
                .map(|f| {
                    let dk =
                        |j: usize| 0.5 * (vel[j][f + 1] * vel[j][f + 1] - vel[j][f] * vel[j][f]);
                    coef[f].0 * (4.0 / 3.0 * dk(0) + dk(1) + dk(2))
                })
                .collect();
            let base: Vec<f64> = (0..n)
                .map(|i| {
                    let k = 0.5 * (0..3).map(|j| vel[j][i + 1] * vel[j][i + 1]).sum::<f64>();
                    (r[i][4] - rho[i] * k) / (rho[i] * CV)
                })
                .collect();
            let at = |i: usize| {
                if i == 0 {
                    pl[4]
                } else if i == n + 1 {
                    pr[4]
                } else {
                    base[i - 1]
                }
            };
            let lo: Vec<f64> = (0..n).map(|i| -s * coef[i].1).collect();
            let up: Vec<f64> = (0..n).map(|i| -s * coef[i + 1].1).collect();
            let di: Vec<f64> = (0..n).map(|i| rho[i] * CV - lo[i] - up[i]).collect();
            let heat = Tridiag::new(lo.clone(), &di, &up);
            let mut d: Vec<f64> = (0..n)
                .map(|i| {
                    let (a, b, cc) = (at(i), at(i + 1), at(i + 2));
                    s * (coef[i + 1].1 * (cc - b) - coef[i].1 * (b - a) + work[i + 1] - work[i])
                })
                .collect();
            heat.solve(&mut d);
            for i in 0..n {
                theta[i + 1] = base[i] + d[i];
            }
            let flux: Vec<Cons> = (0..=n)
                .map(|f| {
                    let (mu, kappa) = coef[f];
                    let dv = |j: usize| vel[j][f + 1] - vel[j][f];
                    [
                        0.0,
                        g * 4.0 / 3.0 * mu * dv(0),
                        g * mu * dv(1),
                        g * mu * dv(2),
                        g * (kappa * (theta[f + 1] - theta[f]) + work[f]),
                    ]
                })
                .collect();
            let div = divergence(&flux, dx, 1.0);
            u = axpy(r, &[(c, &div)]);
            inflow = net_inflow(&flux, 1.0);
        }
        Ok((u, inflow))
    }
}

/// Advances `f` by `dt`. Fails with [`Error::Cfl`] when `dt` exceeds the
/// stable step of the selected scheme and with [`Error::BlowUp`] when a
/// density or temperature turns nonpositive. Returns whether the step was
/// taken with implicit diffusion.
pub fn step(
    f: &mut FluidField,
    cfg: &SolverConfig,
    table: &TransportTable,
    dt: f64,
) -> Result<bool> {
    let (hyp, diff) = stable_dt(f, cfg, table);
    let imex = match cfg.diffusion {
        DiffusionMode::Explicit => false,
        DiffusionMode::Imex => true,
        DiffusionMode::Auto => diff < hyp,
    };
    let limit = if imex { hyp } else { hyp.min(diff) };
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::Cfl { dt, limit });
    }
    let rhs = Rhs { f, cfg, table };
    let mut oor = false;
    let mut inflow = [0.0; 5];
    let u0 = &f.cells;
    let new = if imex {
        let g = 1.0 - 1.0 / 2f64.sqrt();
        let d = 1.0 - 1.0 / (2.0 * g);
        let (h1, bh1) = rhs.hyperbolic(u0);
        let r2 = axpy(u0, &[(dt * g, &h1)]);
        let (u2, _) = rhs.implicit(&r2, g * dt, &mut oor)?;
        let (h2, bh2) = rhs.hyperbolic(&u2);
        let (d2, bd2) = rhs.diffusive(&u2, &mut oor);
        let r3 = axpy(
            u0,
            &[(dt * d, &h1), (dt * (1.0 - d), &h2), (dt * (1.0 - g), &d2)],
        );
        let (u3, bd3) = rhs.implicit(&r3, g * dt, &mut oor)?;
        add_assign(&mut inflow, dt * d, &bh1);
        add_assign(&mut inflow, dt * (1.0 - d), &bh2);
        add_assign(&mut inflow, dt * (1.0 - g), &bd2);
        add_assign(&mut inflow, dt * g, &bd3);
        u3
    } else {
        let (h1, _) = rhs.hyperbolic(u0);
        let (d1, _) = rhs.diffusive(u0, &mut oor);
        let um = axpy(u0, &[(0.5 * dt, &h1), (0.5 * dt, &d1)]);
        for (i, c) in um.iter().enumerate() {
            if !(c[0] > 0.0) {
                return Err(Error::BlowUp {
                    t: f.t + 0.5 * dt,
                    cell: i,
                    rho: c[0],
                    theta: to_prim(c)[4],
                });
            }
        }
        let (h2, bh2) = rhs.hyperbolic(&um);
        let (d2, bd2) = rhs.diffusive(&um, &mut oor);
        add_assign(&mut inflow, dt, &bh2);
        add_assign(&mut inflow, dt, &bd2);
        axpy(u0, &[(dt, &h2), (dt, &d2)])
    };
    f.cells = new;
    f.t += dt;
    for k in 0..5 {
        f.inflow[k] += inflow[k];
    }
    if oor && !f.out_of_table {
        log::warn!("face temperature left the transport table at t={}", f.t);
        f.out_of_table = true;
    }
    f.check_positive()?;
    Ok(imex)
}

/// `dU/dt` with centered Euler fluxes in place of the limited upwind ones,
/// so that it is smooth in `U` and can be differenced again.
fn time_derivative(
    f: &FluidField,
    cfg: &SolverConfig,
    table: &TransportTable,
    cells: &[Cons],
) -> Vec<Cons> {
    let rhs = Rhs { f, cfg, table };
    let mut oor = false;
    let ext = extended(f, cells);
    let flux: Vec<Cons> = ext.iter().map(euler_flux).collect();
    let dx = f.grid.dx;
    let h: Vec<Cons> = (0..cells.len())
        .map(|i| std::array::from_fn(|k| -(flux[i + 3][k] - flux[i + 1][k]) / (2.0 * dx)))
        .collect();
    let (d, _) = rhs.diffusive(cells, &mut oor);
    axpy(&h, &[(1.0, &d)])
}

fn prim_rate(c: &Cons, dc: &Cons) -> Prim {
    let w = to_prim(c);
    let rho_t = dc[0];
    let u_t: [f64; 3] = std::array::from_fn(|j| (dc[j + 1] - w[j + 1] * rho_t) / w[0]);
    let k = 0.5 * (w[1] * w[1] + w[2] * w[2] + w[3] * w[3]);
    let ku = w[1] * u_t[0] + w[2] * u_t[1] + w[3] * u_t[2];
    let th_t = (dc[4] - rho_t * (CV * w[4] + k) - w[0] * ku) / (w[0] * CV);
    [rho_t, u_t[0], u_t[1], u_t[2], th_t]
}

fn phi(s: f64) -> f64 {
    s - s.ln() - 1.0
}

/// Pointwise entropy `eta` and entropy flux `q` relative to the wave state `bar`.
pub fn entropy_pair(s: &GasState, bar: &GasState) -> (f64, f64) {
    let du: [f64; 3] = std::array::from_fn(|j| s.u[j] - bar.u[j]);
    let eta = s.rho * bar.theta * phi(bar.rho / s.rho)
        + 1.5 * s.rho * bar.theta * phi(s.theta / bar.theta)
        + 0.75 * s.rho * (du[0] * du[0] + du[1] * du[1] + du[2] * du[2]);
    let q = s.u[0] * eta + du[0] * (s.rho * s.theta - bar.rho * bar.theta);
    (eta, q)
}

/// `(eta, q)` at every cell against the scaled wave `w`.
pub fn entropy_fields(f: &FluidField, w: &SmoothWave) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut eta = Vec::with_capacity(f.len());
    let mut q = Vec::with_capacity(f.len());
    for i in 0..f.len() {
        let bar = w.eval(f.t / f.eps_a, f.grid.x(i) / f.eps_a)?;
        let (e, qq) = entropy_pair(&f.state(i), &bar);
        eta.push(e);
        q.push(qq);
    }
    Ok((eta, q))
}

/// One entry of the entropy record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyRow {
    pub t: f64,
    /// `int eta dx`.
    pub eta_integral: f64,
    /// `||(rho~, u~, theta~)||^2` in `L^2_x`.
    pub perturbation: f64,
    /// `eta_integral / perturbation`, when the perturbation is not negligible.
    pub ratio: Option<f64>,
    pub eta_min: f64,
}

/// Entropy record along a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EntropyDiag {
    pub rows: Vec<EntropyRow>,
}

impl EntropyDiag {
    pub fn push(&mut self, row: EntropyRow) {
        self.rows.push(row);
    }

    /// Smallest and largest recorded ratio.
    pub fn ratio_range(&self) -> Option<(f64, f64)> {
        let r: Vec<f64> = self.rows.iter().filter_map(|r| r.ratio).collect();
        if r.is_empty() {
            return None;
        }
        Some((
            r.iter().copied().fold(f64::INFINITY, f64::min),
            r.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ))
    }

    /// Smallest `c1 >= 1` with every recorded ratio in `[1/c1, c1]`.
    pub fn c1(&self) -> Option<f64> {
        self.ratio_range()
            .map(|(lo, hi)| (1.0 / lo).max(hi).max(1.0))
    }
}

/// Perturbations below this squared norm give no ratio.
const RATIO_FLOOR: f64 = 1e-20;

/// Entropy and perturbation integrals of `f` against the scaled wave `w`.
pub fn entropy_monitor(f: &FluidField, w: &SmoothWave) -> Result<EntropyRow> {
    let dx = f.grid.dx;
    let mut eta_int = 0.0;
    let mut pert = 0.0;
    let mut eta_min = f64::INFINITY;
    for i in 0..f.len() {
        let bar = w.eval(f.t / f.eps_a, f.grid.x(i) / f.eps_a)?;
        let s = f.state(i);
        let (e, _) = entropy_pair(&s, &bar);
        eta_int += e * dx;
        eta_min = eta_min.min(e);
        let d = [
            s.rho - bar.rho,
            s.u[0] - bar.u[0],
            s.u[1] - bar.u[1],
            s.u[2] - bar.u[2],
            s.theta - bar.theta,
        ];
        pert += d.iter().map(|v| v * v).sum::<f64>() * dx;
    }
    Ok(EntropyRow {
        t: f.t,
        eta_integral: eta_int,
        perturbation: pert,
        ratio: (pert > RATIO_FLOOR).then(|| eta_int / pert),
        eta_min,
    })
}

/// Fluid parts `(E2, D2)` of the energy and dissipation functionals in the
/// scaled variables, for the perturbation of `f` around the scaled wave `w`.
/// Time derivatives of the fluid come from the equations with centered
/// differences; the second one by a centered directional difference.
pub fn energy_diagnostics(
    f: &FluidField,
    w: &SmoothWave,
    cfg: &SolverConfig,
    table: &TransportTable,
) -> Result<(f64, f64)> {
    let n = f.len();
    let ea = f.eps_a;
    let dx = f.grid.dx;
    let ut = time_derivative(f, cfg, table, &f.cells);
    let (hyp, _) = stable_dt(f, cfg, table);
    let h = 1e-3 * hyp;
    let plus = axpy(&f.cells, &[(h, &ut)]);
    let minus = axpy(&f.cells, &[(-h, &ut)]);
    let ut_p = time_derivative(f, cfg, table, &plus);
    let ut_m = time_derivative(f, cfg, table, &minus);
    let wt: Vec<Prim> = (0..n).map(|i| prim_rate(&f.cells[i], &ut[i])).collect();
    let wtt: Vec<Prim> = (0..n)
        .map(|i| {
            let a = prim_rate(&plus[i], &ut_p[i]);
            let b = prim_rate(&minus[i], &ut_m[i]);
            std::array::from_fn(|k| (a[k] - b[k]) / (2.0 * h))
        })
        .collect();
    let ext = extended(f, &f.cells);
    let ext_t = |i: isize| -> Prim {
        if i < 0 || i as usize >= n {
            [0.0; 5]
        } else {
            wt[i as usize]
        }
    };

    let (mut e0, mut e1, mut e2) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let s = w.sample(f.t / ea, f.grid.x(i) / ea)?;
        let jets = [Some(&s.rho), Some(&s.u1), None, None, Some(&s.theta)];
        let (wm, wc, wp) = (ext[i + 1], ext[i + 2], ext[i + 3]);
        let (tm, tp) = (ext_t(i as isize - 1), ext_t(i as isize + 1));
        for k in 0..5 {
            let j = jets[k];
            let bar = |g: fn(&crate::burgers::Jet) -> f64| j.map_or(0.0, g);
            let p0 = wc[k] - bar(|j| j.v);
            let py = ea * (wp[k] - wm[k]) / (2.0 * dx) - bar(|j| j.x);
            let pt = ea * wt[i][k] - bar(|j| j.t);
            let pyy = ea * ea * (wp[k] - 2.0 * wc[k] + wm[k]) / (dx * dx) - bar(|j| j.xx);
            let pty = ea * ea * (tp[k] - tm[k]) / (2.0 * dx) - bar(|j| j.xt);
            let ptt = ea * ea * wtt[i][k] - bar(|j| j.tt);
            e0 += p0 * p0;
            e1 += py * py + pt * pt;
            e2 += pyy * pyy + pty * pty + ptt * ptt;
        }
    }
    let dy = dx / ea;
    let (e0, e1, e2) = (e0 * dy, e1 * dy, e2 * dy);
    let eps = cfg.eps;
    let energy = e0 + e1 + eps.powf(2.0 - 2.0 * cfg.a) * e2;
    let dissipation = eps.powf(1.0 - cfg.a) * (e1 + e2);
    Ok((energy, dissipation))
}

/// `(fluid_sup, maxwellian_sup)` between `f` and the Riemann solution at time `t`.
pub fn distance_to_riemann(f: &FluidField, data: &RiemannData, t: f64) -> Result<(f64, f64)> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("distance needs t > 0, got {t:e}")));
    }
    let mut fluid: f64 = 0.0;
    let mut maxw: f64 = 0.0;
    for i in 0..f.len() {
        let s = f.state(i);
        let r = riemann_rarefaction(data, f.grid.x(i) / t);
        let d = [
            s.rho - r.rho,
            s.u[0] - r.u[0],
            s.u[1] - r.u[1],
            s.u[2] - r.u[2],
            s.theta - r.theta,
        ];
        fluid = fluid.max(d.iter().fold(0.0, |m, v| m.max(v.abs())));
        maxw = maxw.max(maxwellian_l2mu_distance(&s, &r)?);
    }
    Ok((fluid, maxw))
}

/// One line of the run time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeRow {
    pub t: f64,
    pub fluid_sup: f64,
    pub maxwellian_sup: f64,
    pub eta_integral: f64,
    pub entropy_ratio: Option<f64>,
    pub e2: f64,
    pub d2: f64,
    /// Largest relative conservation defect over the five components.
    pub conservation: f64,
}

/// Result of [`run`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub field: FluidField,
    pub rows: Vec<TimeRow>,
    pub entropy: EntropyDiag,
    pub steps: usize,
    pub imex_steps: usize,
    /// `sup` of `E2` over the sample times, including `t = 0`.
    pub e2_sup: f64,
    /// Trapezoid approximation of `int D2 dtau` over the sample times.
    pub d2_integral: f64,
}

impl RunOutput {
    pub fn last(&self) -> &TimeRow {
        self.rows.last().expect("at least one sample")
    }
}

/// Sample times: geometric from the layer time scale plus uniform, up to `t_end`.
pub fn sample_times(cfg: &SolverConfig, count: usize) -> Vec<f64> {
    let count = count.max(2);
    let t0 = (cfg.layer_width() / 4.0).min(cfg.t_end / count as f64);
    let half = count / 2;
    let mut t: Vec<f64> = (0..half)
        .map(|k| t0 * (cfg.t_end / t0).powf(k as f64 / half as f64))
        .chain((1..=count - half).map(|k| cfg.t_end * k as f64 / (count - half) as f64))
        .collect();
    t.sort_by(|a, b| a.partial_cmp(b).unwrap());
    t.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * cfg.t_end);
    *t.last_mut().unwrap() = cfg.t_end;
    t
}

/// Integrates from the wave's initial data to `cfg.t_end`, recording the
/// diagnostics at [`sample_times`].
pub fn run(
    cfg: &SolverConfig,
    w: &SmoothWave,
    table: &TransportTable,
    samples: usize,
) -> Result<RunOutput> {
    let mut f = initial_data(cfg, w)?;
    let times = sample_times(cfg, samples);
    let mut rows = Vec::with_capacity(times.len());
    let mut entropy = EntropyDiag::default();
    let (e2_0, d2_0) = energy_diagnostics(&f, w, cfg, table)?;
    let (mut e2_sup, mut d2_int) = (e2_0, 0.0);
    let (mut t_prev, mut d2_prev) = (0.0, d2_0);
    let (mut steps, mut imex_steps) = (0, 0);
    for &ts in &times {
        while f.t < ts {
            while f.grid.coarsenings > 0 && 2.0 * f.grid.dx <= cfg.resolved_dx(f.t) {
                f.coarsen()?;
            }
            let (hyp, diff) = stable_dt(&f, cfg, table);
            let limit = match cfg.diffusion {
                DiffusionMode::Explicit => hyp.min(diff),
                DiffusionMode::Imex => hyp,
                DiffusionMode::Auto => hyp,
            };
            let remaining = ts - f.t;
            let dt = remaining.min(limit);
            if step(&mut f, cfg, table, dt)? {
                imex_steps += 1;
            }
            steps += 1;
            if (ts - f.t).abs() <= 1e-12 * ts {
                f.t = ts;
            }
        }
        let (fluid_sup, maxwellian_sup) = distance_to_riemann(&f, &w.data, f.t)?;
        let ent = entropy_monitor(&f, w)?;
        entropy.push(ent);
        let (e2, d2) = energy_diagnostics(&f, w, cfg, table)?;
        e2_sup = e2_sup.max(e2);
        d2_int += 0.5 * (d2 + d2_prev) * (f.t - t_prev) / cfg.eps_a();
        t_prev = f.t;
        d2_prev = d2;
        let cons = f.conservation_defect().iter().copied().fold(0.0, f64::max);
        rows.push(TimeRow {
            t: f.t,
            fluid_sup,
            maxwellian_sup,
            eta_integral: ent.eta_integral,
            entropy_ratio: ent.ratio,
            e2,
            d2,
            conservation: cons,
        });
    }
    Ok(RunOutput {
        field: f,
        rows,
        entropy,
        steps,
        imex_steps,
        e2_sup,
        d2_integral: d2_int,
    })
}

/// Three-grid self-convergence of the conserved variables in `L^1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfConvergence {
    /// Cell counts of the final grids, coarse to fine.
    pub cells: [usize; 3],
    /// `||U_4h - U_2h||_1` and `||U_2h - U_h||_1`, both on the coarse grid.
    pub differences: [f64; 2],
    pub order: f64,
}

/// Runs `cfg` with cell sizes `4h, 2h, h` and measures the observed order.
/// Finer solutions are averaged onto the coarse grid before differencing.
pub fn self_convergence(
    cfg: &SolverConfig,
    w: &SmoothWave,
    table: &TransportTable,
) -> Result<SelfConvergence> {
    let mut fields = Vec::with_capacity(3);
    for scale in [4.0, 2.0, 1.0] {
        let mut c = *cfg;
        c.dx_scale = cfg.dx_scale * scale;
        fields.push(run(&c, w, table, 2)?.field);
    }
    let restrict = |f: &FluidField, factor: usize| -> Vec<Cons> {
        f.cells
            .chunks_exact(factor)
            .map(|chunk| {
                std::array::from_fn(|k| chunk.iter().map(|c| c[k]).sum::<f64>() / factor as f64)
            })
            .collect()
    };
    let coarse = &fields[0];
    for (f, factor) in fields.iter().zip([1usize, 2, 4]) {
        if f.len() != coarse.len() * factor {
            return Err(Error::ShapeMismatch {
                expected: coarse.len() * factor,
                found: f.len(),
            });
        }
    }
    let l1 = |a: &[Cons], b: &[Cons]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (0..5).map(|k| (x[k] - y[k]).abs()).sum::<f64>())
            .sum::<f64>()
            * coarse.grid.dx
    };
    let (u4, u2, u1) = (
        &coarse.cells,
        restrict(&fields[1], 2),
        restrict(&fields[2], 4),
    );
    let differences = [l1(u4, &u2), l1(&u2, &u1)];
    Ok(SelfConvergence {
        cells: [fields[0].len(), fields[1].len(), fields[2].len()],
        differences,
        order: (differences[0] / differences[1]).log2(),
    })
}

/// Writes the time series `t, fluid_sup, maxwellian_sup, eta_integral,
/// entropy_ratio, E2_fluid, D2_fluid, conservation`.
pub fn write_time_series(path: &Path, rows: &[TimeRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "t",
        "fluid_sup",
        "maxwellian_sup",
        "eta_integral",
        "entropy_ratio",
        "E2_fluid",
        "D2_fluid",
        "conservation",
    ])?;
    for r in rows {
        w.write_record([
            fmt17(r.t),
            fmt17(r.fluid_sup),
            fmt17(r.maxwellian_sup),
            fmt17(r.eta_integral),
            r.entropy_ratio.map(fmt17).unwrap_or_default(),
            fmt17(r.e2),
            fmt17(r.d2),
            fmt17(r.conservation),
        ])?;
    }
    w.flush()?;
    Ok(())
}
