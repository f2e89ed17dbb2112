//! Velocity lattice, grid functions, Maxwellians, moments and the
//! macro/micro projections.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::ops::{Index, IndexMut};
use std::path::Path;

use crate::error::{Error, Result};
use crate::euler::{GasState, R_GAS};
use crate::numerics::solve_dense;

/// Uniform tensor lattice on `[-L, L]^3` with `N` nodes per axis, endpoints
/// included, and trapezoid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityGrid {
    l: f64,
    n: usize,
    h: f64,
    axis: Vec<f64>,
    axis_w: Vec<f64>,
    order: usize,
}

impl VelocityGrid {
    pub const DEFAULT_HALF_WIDTH: f64 = 8.0;
    pub const DEFAULT_NODES: usize = 32;

    pub fn new(half_width: f64, n_per_axis: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::Config(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        if n_per_axis < 4 || n_per_axis % 2 != 0 {
            return Err(Error::Config(format!(
                "nodes per axis must be even and at least 4, got {n_per_axis}"
            )));
        }
        let h = 2.0 * half_width / (n_per_axis - 1) as f64;
        // symmetric construction so that v -> -v maps nodes onto nodes exactly
        let axis: Vec<f64> = (0..n_per_axis)
            .map(|i| {
                let k = 2.0 * i as f64 - (n_per_axis - 1) as f64;
                0.5 * k * h
            })
            .collect();
        let mut axis_w = vec![h; n_per_axis];
        axis_w[0] = 0.5 * h;
        axis_w[n_per_axis - 1] = 0.5 * h;
        Ok(VelocityGrid {
            l: half_width,
            n: n_per_axis,
            h,
            axis,
            axis_w,
            order: 4,
        })
    }

    /// Same lattice with the interior derivative stencil of the given order (2 or 4).
    pub fn with_derivative_order(mut self, order: usize) -> Result<Self> {
        if order != 2 && order != 4 {
            return Err(Error::Config(format!(
                "derivative order must be 2 or 4, got {order}"
            )));
        }
        self.order = order;
        Ok(self)
    }

    pub fn derivative_order(&self) -> usize {
        self.order
    }

    pub fn half_width(&self) -> f64 {
        self.l
    }

    pub fn n_per_axis(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    pub fn axis_weights(&self) -> &[f64] {
        &self.axis_w
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    pub fn unindex(&self, idx: usize) -> (usize, usize, usize) {
        (
            idx / (self.n * self.n),
            (idx / self.n) % self.n,
            idx % self.n,
        )
    }

    pub fn node(&self, idx: usize) -> [f64; 3] {
        let (i, j, k) = self.unindex(idx);
        [self.axis[i], self.axis[j], self.axis[k]]
    }

    pub fn weight(&self, idx: usize) -> f64 {
        let (i, j, k) = self.unindex(idx);
        self.axis_w[i] * self.axis_w[j] * self.axis_w[k]
    }

    /// Memory stride of axis `a` (0, 1 or 2).
    pub fn stride(&self, a: usize) -> usize {
        match a {
            0 => self.n * self.n,
            1 => self.n,
            _ => 1,
        }
    }

    pub fn total_weight(&self) -> f64 {
        let s: f64 = self.axis_w.iter().sum();
        s * s * s
    }

    /// Index of the node `-v`.
    pub fn mirror(&self, idx: usize) -> usize {
        let (i, j, k) = self.unindex(idx);
        self.index(self.n - 1 - i, self.n - 1 - j, self.n - 1 - k)
    }

    pub fn integrate(&self, f: &GridFunction) -> f64 {
        self.check(f).expect("grid function does not match grid");
        let n = self.n;
        let mut total = 0.0;
        for i in 0..n {
            let mut si = 0.0;
            for j in 0..n {
                let base = (i * n + j) * n;
                let mut sj = 0.0;
                for k in 0..n {
                    sj += self.axis_w[k] * f.data[base + k];
                }
                si += self.axis_w[j] * sj;
            }
            total += self.axis_w[i] * si;
        }
        total
    }

    /// `sum_v w(v) f(v) g(v)`.
    pub fn dot(&self, f: &GridFunction, g: &GridFunction) -> f64 {
        self.integrate_with(|idx| f.data[idx] * g.data[idx])
    }

    /// Quadrature of a pointwise expression given by node index.
    pub fn integrate_with<F: Fn(usize) -> f64>(&self, f: F) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        for i in 0..n {
            let mut si = 0.0;
            for j in 0..n {
                let base = (i * n + j) * n;
                let mut sj = 0.0;
                for k in 0..n {
                    sj += self.axis_w[k] * f(base + k);
                }
                si += self.axis_w[j] * sj;
            }
            total += self.axis_w[i] * si;
        }
        total
    }

    pub fn check(&self, f: &GridFunction) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::ShapeMismatch {
                expected: self.len(),
                found: f.len(),
            });
        }
        Ok(())
    }

    /// Evaluates a function of velocity at every node.
    pub fn sample<F: Fn([f64; 3]) -> f64>(&self, f: F) -> GridFunction {
        let mut data = Vec::with_capacity(self.len());
        for &a in &self.axis {
            for &b in &self.axis {
                for &c in &self.axis {
                    data.push(f([a, b, c]));
                }
            }
        }
        GridFunction { data }
    }

    /// Derivative along axis `a`: centered (fourth order in the interior,
    /// second order next to the edge) with second-order one-sided rows at the
    /// two boundary nodes. Every row is exact on quadratics.
    pub fn derivative(&self, f: &GridFunction, a: usize) -> GridFunction {
        let mut out = GridFunction::zeros(self.len());
        self.derivative_into(&f.data, a, &mut out.data);
        out
    }

    pub(crate) fn derivative_into(&self, f: &[f64], a: usize, out: &mut [f64]) {
        let n = self.n;
        let s = self.stride(a) as isize;
        let inv = 1.0 / self.h;
        for_each_line(n, a, |start| {
            for m in 0..n {
                let mut acc = 0.0;
                for &(o, c) in stencil(m, n, self.order) {
                    acc += c * f[(start as isize + (m as isize + o) * s) as usize];
                }
                out[start + m * s as usize] = acc * inv;
            }
        });
    }

    pub fn gradient(&self, f: &GridFunction) -> [GridFunction; 3] {
        [
            self.derivative(f, 0),
            self.derivative(f, 1),
            self.derivative(f, 2),
        ]
    }

    /// Adds the weighted adjoint `-W^{-1} D_a^T W j` of the derivative along
    /// axis `a` to `out`. With this divergence, `sum W psi div(J) =
    /// -sum W J . D psi` holds exactly on the grid.
    pub(crate) fn add_divergence(&self, j: &[f64], a: usize, out: &mut [f64]) {
        let n = self.n;
        let s = self.stride(a);
        let inv = 1.0 / self.h;
        let w = &self.axis_w;
        let mut dty = vec![0.0; n];
        for_each_line(n, a, |start| {
            dty.iter_mut().for_each(|v| *v = 0.0);
            for m in 0..n {
                let y = w[m] * j[start + m * s] * inv;
                for &(o, c) in stencil(m, n, self.order) {
                    dty[(m as isize + o) as usize] += c * y;
                }
            }
            for k in 0..n {
                out[start + k * s] -= dty[k] / w[k];
            }
        });
    }

    /// Identifier used for cache files.
    pub fn key(&self, gamma: f64) -> String {
        format!("L{}_N{}_g{}", self.l, self.n, gamma)
    }
}

const ONE_SIDED_LO: [(isize, f64); 3] = [(0, -1.5), (1, 2.0), (2, -0.5)];
const ONE_SIDED_HI: [(isize, f64); 3] = [(0, 1.5), (-1, -2.0), (-2, 0.5)];
const CENTERED_2: [(isize, f64); 2] = [(-1, -0.5), (1, 0.5)];
const CENTERED_4: [(isize, f64); 4] = [
    (-2, 1.0 / 12.0),
    (-1, -2.0 / 3.0),
    (1, 2.0 / 3.0),
    (2, -1.0 / 12.0),
];

/// Derivative row for node `m` of a line of `n` nodes (coefficients in units of `1/h`).
fn stencil(m: usize, n: usize, order: usize) -> &'static [(isize, f64)] {
    if m == 0 {
        &ONE_SIDED_LO
    } else if m == n - 1 {
        &ONE_SIDED_HI
    } else if order >= 4 && m >= 2 && m + 2 < n {
        &CENTERED_4
    } else {
        &CENTERED_2
    }
}

fn for_each_line<F: FnMut(usize)>(n: usize, a: usize, mut f: F) {
    for p in 0..n {
        for q in 0..n {
            let start = match a {
                0 => p * n + q,
                1 => p * n * n + q,
                _ => (p * n + q) * n,
            };
            f(start);
        }
    }
}

/// Real values at the nodes of a velocity grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    data: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(len: usize) -> Self {
        GridFunction {
            data: vec![0.0; len],
        }
    }

    pub fn from_vec(data: Vec<f64>) -> Result<Self> {
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value at node {i}")));
        }
        Ok(GridFunction { data })
    }

    pub(crate) fn from_vec_unchecked(data: Vec<f64>) -> Self {
        GridFunction { data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        GridFunction {
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map<F: Fn(f64, f64) -> f64>(&self, other: &Self, f: F) -> Self {
        assert_eq!(self.len(), other.len());
        GridFunction {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    /// `self += c * x`.
    pub fn axpy(&mut self, c: f64, x: &Self) {
        assert_eq!(self.len(), x.len());
        for (a, b) in self.data.iter_mut().zip(&x.data) {
            *a += c * b;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Writes a binary fixture: magic, `L`, `N`, `gamma`, then little-endian values.
    pub fn write_binary(&self, path: &Path, g: &VelocityGrid, gamma: f64) -> Result<()> {
        g.check(self)?;
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&g.half_width().to_le_bytes())?;
        w.write_all(&(g.n_per_axis() as u64).to_le_bytes())?;
        w.write_all(&gamma.to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a binary fixture, returning the grid and `gamma` from its header.
    pub fn read_binary(path: &Path) -> Result<(GridFunction, VelocityGrid, f64)> {
        let parse_err = |msg: &str| Error::Parse {
            path: path.to_path_buf(),
            msg: msg.to_string(),
        };
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(parse_err("bad magic"));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let l = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let gamma = f64::from_le_bytes(b8);
        let g = VelocityGrid::new(l, n).map_err(|e| parse_err(&e.to_string()))?;
        let mut data = Vec::with_capacity(g.len());
        for _ in 0..g.len() {
            r.read_exact(&mut b8)?;
            data.push(f64::from_le_bytes(b8));
        }
        if r.read(&mut b8)? != 0 {
            return Err(parse_err("trailing bytes"));
        }
        let f = GridFunction::from_vec(data).map_err(|e| parse_err(&e.to_string()))?;
        Ok((f, g, gamma))
    }

    /// Writes a CSV fixture: a `# L=..,N=..,gamma=..` line, a `value` header and one node per line.
    pub fn write_csv(&self, path: &Path, g: &VelocityGrid, gamma: f64) -> Result<()> {
        g.check(self)?;
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(
            w,
            "# L={},N={},gamma={}",
            crate::fmt17(g.half_width()),
            g.n_per_axis(),
            crate::fmt17(gamma)
        )?;
        writeln!(w, "value")?;
        for v in &self.data {
            writeln!(w, "{}", crate::fmt17(*v))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<(GridFunction, VelocityGrid, f64)> {
        let parse_err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            msg,
        };
        let mut lines = BufReader::new(File::open(path)?).lines();
        let header = lines
            .next()
            .ok_or_else(|| parse_err("empty file".into()))??;
        let header = header
            .strip_prefix("# ")
            .ok_or_else(|| parse_err("missing grid header".into()))?;
        let (mut l, mut n, mut gamma) = (None, None, None);
        for kv in header.split(',') {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| parse_err(format!("bad header field {kv:?}")))?;
            match k.trim() {
                "L" => l = v.trim().parse::<f64>().ok(),
                "N" => n = v.trim().parse::<usize>().ok(),
                "gamma" => gamma = v.trim().parse::<f64>().ok(),
                other => return Err(parse_err(format!("unknown header key {other}"))),
            }
        }
        let (l, n, gamma) = match (l, n, gamma) {
            (Some(l), Some(n), Some(g)) => (l, n, g),
            _ => return Err(parse_err("incomplete grid header".into())),
        };
        let g = VelocityGrid::new(l, n).map_err(|e| parse_err(e.to_string()))?;
        match lines.next() {
            Some(Ok(h)) if h.trim() == "value" => {}
            _ => return Err(parse_err("missing value column header".into())),
        }
        let mut data = Vec::with_capacity(g.len());
        for (i, line) in lines.enumerate() {
            let line = line?;
            let v = line
                .trim()
                .parse::<f64>()
                .map_err(|e| parse_err(format!("line {}: {e}", i + 3)))?;
            data.push(v);
        }
        if data.len() != g.len() {
            return Err(Error::ShapeMismatch {
                expected: g.len(),
                found: data.len(),
            });
        }
        let f = GridFunction::from_vec(data).map_err(|e| parse_err(e.to_string()))?;
        Ok((f, g, gamma))
    }
}

const BINARY_MAGIC: &[u8; 8] = b"LHGRID01";

impl Index<usize> for GridFunction {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl IndexMut<usize> for GridFunction {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

/// Pointwise local Maxwellian with `R = 2/3`.
pub fn maxwellian_at(s: &GasState, v: [f64; 3]) -> f64 {
    let rt = R_GAS * s.theta;
    let d2 = (v[0] - s.u[0]).powi(2) + (v[1] - s.u[1]).powi(2) + (v[2] - s.u[2]).powi(2);
    s.rho / (2.0 * PI * rt).powf(1.5) * (-d2 / (2.0 * rt)).exp()
}

/// True when the box does not contain six thermal radii around the bulk velocity.
pub fn truncation_warning(s: &GasState, g: &VelocityGrid) -> bool {
    let umax = s.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    g.half_width() < umax + 6.0 * (R_GAS * s.theta).sqrt()
}

/// Local Maxwellian sampled on the grid. Logs a warning when the box is too
/// small for the state (see [`truncation_warning`]).
pub fn maxwellian(s: &GasState, g: &VelocityGrid) -> GridFunction {
    if truncation_warning(s, g) {
        log::warn!(
            "velocity box L={} truncates the Maxwellian of rho={}, u={:?}, theta={}",
            g.half_width(),
            s.rho,
            s.u,
            s.theta
        );
    }
    g.sample(|v| maxwellian_at(s, v))
}

/// The global Maxwellian `mu = M_[1,0,3/2]`.
pub fn global_maxwellian(g: &VelocityGrid) -> GridFunction {
    maxwellian(&GasState::reference(), g)
}

/// Fluid moments `(rho, u, theta)` of a distribution.
pub fn moments(f: &GridFunction, g: &VelocityGrid) -> Result<GasState> {
    g.check(f)?;
    let mut acc = [0.0f64; 5];
    let n = g.n_per_axis();
    let (ax, w) = (g.axis(), g.axis_weights());
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let wf = w[i] * w[j] * w[k] * f[g.index(i, j, k)];
                acc[0] += wf;
                acc[1] += wf * ax[i];
                acc[2] += wf * ax[j];
                acc[3] += wf * ax[k];
                acc[4] += wf * 0.5 * (ax[i] * ax[i] + ax[j] * ax[j] + ax[k] * ax[k]);
            }
        }
    }
    let rho = acc[0];
    if !(rho > 0.0) {
        return Err(Error::DegenerateMoments {
            rho,
            theta: f64::NAN,
        });
    }
    let u = [acc[1] / rho, acc[2] / rho, acc[3] / rho];
    let theta = acc[4] / rho - 0.5 * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
    if !(theta > 0.0) {
        return Err(Error::DegenerateMoments { rho, theta });
    }
    Ok(GasState { rho, u, theta })
}

/// The five macroscopic basis functions of a local Maxwellian together with
/// the polynomials `chi_i / M` and the inverse of the discrete Gram matrix.
#[derive(Debug, Clone)]
pub struct MacroBasis {
    pub state: GasState,
    pub chi: [GridFunction; 5],
    /// `chi_i / M`, evaluated as polynomials (no division on the grid).
    pub poly: [GridFunction; 5],
    gram: [f64; 25],
    gram_inv: [f64; 25],
}

impl MacroBasis {
    pub fn new(s: &GasState, g: &VelocityGrid) -> Result<Self> {
        s.validate()?;
        let m = maxwellian(s, g);
        let rt = R_GAS * s.theta;
        let sr = s.rho.sqrt();
        let srt = (s.rho * rt).sqrt();
        let s6 = (6.0 * s.rho).sqrt();
        let u = s.u;
        let poly: [GridFunction; 5] = [
            g.sample(|_| 1.0 / sr),
            g.sample(|v| (v[0] - u[0]) / srt),
            g.sample(|v| (v[1] - u[1]) / srt),
            g.sample(|v| (v[2] - u[2]) / srt),
            g.sample(|v| {
                let d2 = (v[0] - u[0]).powi(2) + (v[1] - u[1]).powi(2) + (v[2] - u[2]).powi(2);
                (d2 / rt - 3.0) / s6
            }),
        ];
        let chi = std::array::from_fn(|i| poly[i].mul(&m));
        let mut gram = [0.0; 25];
        for i in 0..5 {
            for j in i..5 {
                let v = g.dot(&chi[i], &poly[j]);
                gram[i * 5 + j] = v;
                gram[j * 5 + i] = v;
            }
        }
        let mut gram_inv = [0.0; 25];
        for c in 0..5 {
            let mut e = [0.0; 5];
            e[c] = 1.0;
            let col = solve_dense(&gram, &e).ok_or_else(|| Error::DegenerateMoments {
                rho: s.rho,
                theta: s.theta,
            })?;
            for r in 0..5 {
                gram_inv[r * 5 + c] = col[r];
            }
        }
        Ok(MacroBasis {
            state: *s,
            chi,
            poly,
            gram,
            gram_inv,
        })
    }

    /// Discrete Gram matrix `<chi_i, chi_j / M>` (row-major).
    pub fn gram(&self) -> [f64; 25] {
        self.gram
    }

    /// Coefficients `c` with `P0 h = sum_i c_i chi_i`.
    pub fn coefficients(&self, h: &GridFunction, g: &VelocityGrid) -> [f64; 5] {
        let b: [f64; 5] = std::array::from_fn(|j| g.dot(h, &self.poly[j]));
        std::array::from_fn(|i| (0..5).map(|j| self.gram_inv[i * 5 + j] * b[j]).sum())
    }

    /// Macroscopic projection. Uses the discrete Gram inverse so that `P0` is
    /// an exact projection on the grid.
    pub fn project_p0(&self, h: &GridFunction, g: &VelocityGrid) -> GridFunction {
        let c = self.coefficients(h, g);
        let mut out = GridFunction::zeros(h.len());
        for (ci, chi) in c.iter().zip(&self.chi) {
            out.axpy(*ci, chi);
        }
        out
    }

    pub fn project_p1(&self, h: &GridFunction, g: &VelocityGrid) -> GridFunction {
        h.sub(&self.project_p0(h, g))
    }

    /// Size of the macroscopic part of `h` relative to `h` in the `M^{-1}`-weighted norm.
    pub fn macro_fraction(&self, h: &GridFunction, g: &VelocityGrid) -> f64 {
        let b: [f64; 5] = std::array::from_fn(|j| g.dot(h, &self.poly[j]));
        let c = self.coefficients(h, g);
        let p0_sq: f64 = c.iter().zip(&b).map(|(x, y)| x * y).sum();
        let h_sq = self.weighted_dot(h, h, g);
        if h_sq == 0.0 {
            0.0
        } else {
            (p0_sq.max(0.0) / h_sq).sqrt()
        }
    }

    /// `<f, g / M>` with `M` the basis Maxwellian.
    pub fn weighted_dot(&self, f: &GridFunction, k: &GridFunction, g: &VelocityGrid) -> f64 {
        // chi_0 = M / sqrt(rho), so 1/M = poly_0 / (sqrt(rho) chi_0)
        let m = self.chi[0].scaled(self.state.rho.sqrt());
        g.integrate_with(|i| f[i] * k[i] / m[i])
    }
}

/// Convenience wrapper for [`MacroBasis::new`].
pub fn macro_basis(s: &GasState, g: &VelocityGrid) -> Result<MacroBasis> {
    MacroBasis::new(s, g)
}

pub fn project_p0(h: &GridFunction, b: &MacroBasis, g: &VelocityGrid) -> GridFunction {
    b.project_p0(h, g)
}

pub fn project_p1(h: &GridFunction, b: &MacroBasis, g: &VelocityGrid) -> GridFunction {
    b.project_p1(h, g)
}

/// Velocity weight `<v>^{gamma+2}`.
pub fn weight_w(v: [f64; 3], gamma: f64) -> f64 {
    (1.0 + v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).powf(0.5 * (gamma + 2.0))
}

/// Weighted dissipation norm `|h|_{sigma,l}` with centered velocity gradients.
pub fn sigma_norm(
    h: &GridFunction,
    sigma: &crate::landau::CollisionCoeffs,
    g: &VelocityGrid,
    ell: f64,
) -> f64 {
    let gamma = sigma.gamma();
    let dh = g.gradient(h);
    let s = sigma.matrices();
    let total = g.integrate_with(|idx| {
        let v = g.node(idx);
        let w2l = weight_w(v, gamma).powf(2.0 * ell);
        let m = &s[idx];
        let grad = [dh[0][idx], dh[1][idx], dh[2][idx]];
        let mut q = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                q += m[i][j] * (grad[i] * grad[j] + 0.25 * v[i] * v[j] * h[idx] * h[idx]);
            }
        }
        w2l * q
    });
    total.max(0.0).sqrt()
}

/// Sum of the three weighted `L^2` norms that are equivalent to `|h|_sigma`:
/// the weighted function, its radial derivative and its angular gradient.
pub fn sigma_norm_equivalent(h: &GridFunction, g: &VelocityGrid, gamma: f64) -> f64 {
    let dh = g.gradient(h);
    let mut parts = [0.0f64; 3];
    for (k, part) in parts.iter_mut().enumerate() {
        *part = g
            .integrate_with(|idx| {
                let v = g.node(idx);
                let r2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
                let r = r2.sqrt();
                let bracket = 1.0 + r2;
                let grad = [dh[0][idx], dh[1][idx], dh[2][idx]];
                match k {
                    0 => bracket.powf(0.5 * (gamma + 2.0)) * h[idx] * h[idx],
                    1 => {
                        let radial = (grad[0] * v[0] + grad[1] * v[1] + grad[2] * v[2]) / r;
                        bracket.powf(0.5 * gamma) * radial * radial
                    }
                    _ => {
                        let c = [
                            grad[1] * v[2] - grad[2] * v[1],
                            grad[2] * v[0] - grad[0] * v[2],
                            grad[0] * v[1] - grad[1] * v[0],
                        ];
                        bracket.powf(0.5 * (gamma + 2.0))
                            * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2])
                            / r2
                    }
                }
            })
            .sqrt();
    }
    parts.iter().sum()
}

/// Closed-form `|| (M1 - M2) / sqrt(mu) ||_{L^2_v}` with `mu = M_[1,0,3/2]`.
pub fn maxwellian_l2mu_distance(s1: &GasState, s2: &GasState) -> Result<f64> {
    let i11 = gaussian_overlap(s1, s1)?;
    let i12 = gaussian_overlap(s1, s2)?;
    let i22 = gaussian_overlap(s2, s2)?;
    Ok((i11 - 2.0 * i12 + i22).max(0.0).sqrt())
}

/// `int M_1 M_2 / mu dv`.
fn gaussian_overlap(s1: &GasState, s2: &GasState) -> Result<f64> {
    let a1 = 1.0 / (2.0 * R_GAS * s1.theta);
    let a2 = 1.0 / (2.0 * R_GAS * s2.theta);
    let a = a1 + a2 - 0.5;
    if !(a > 0.0) {
        return Err(Error::OutOfRegime(format!(
            "theta pair ({}, {}) makes M1 M2 / mu non-integrable",
            s1.theta, s2.theta
        )));
    }
    let b: [f64; 3] = std::array::from_fn(|i| a1 * s1.u[i] + a2 * s2.u[i]);
    let b2 = b.iter().map(|x| x * x).sum::<f64>();
    let c =
        a1 * s1.u.iter().map(|x| x * x).sum::<f64>() + a2 * s2.u.iter().map(|x| x * x).sum::<f64>();
    let pref = s1.rho * s2.rho * (2.0 * PI).powf(1.5)
        / ((2.0 * PI * R_GAS * s1.theta).powf(1.5) * (2.0 * PI * R_GAS * s2.theta).powf(1.5));
    Ok(pref * (PI / a).powf(1.5) * (b2 / a - c).exp())
}
