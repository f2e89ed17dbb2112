//! Burnett functions, their preimages under `L_M`, the transport
//! coefficients `mu(theta)`, `kappa(theta)` and the correction field `Gbar`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use crate::burgers::SmoothWave;
use crate::error::{Error, Result};
use crate::euler::{GasState, R_GAS};
use crate::fmt17;
use crate::landau::{
    grid_defect, CollisionOperator, InverseOptions, KernelParams, LinearizedOperator, SolverKind,
};
use crate::numerics::MonotoneCubic;
use crate::velocity::{global_maxwellian, maxwellian, GridFunction, MacroBasis, VelocityGrid};

/// Default temperatures of the transport table.
pub const DEFAULT_THETAS: [f64; 7] = [0.8, 1.0, 1.25, 1.5, 1.75, 2.0, 2.5];

/// Burnett polynomials at `xi = (v - u) / sqrt(R theta)` and the sources
/// `P1(poly * M)` handed to the inverse.
#[derive(Debug, Clone)]
pub struct BurnettHats {
    pub a_poly: [GridFunction; 3],
    pub b_poly: [[GridFunction; 3]; 3],
    pub a_src: [GridFunction; 3],
    pub b_src: [[GridFunction; 3]; 3],
    /// Largest macroscopic fraction removed from a source by `P1`; zero in
    /// the continuum, nonzero here only through truncation at the box edge.
    pub macro_fraction: f64,
}

fn xi_of(s: &GasState, v: [f64; 3]) -> [f64; 3] {
    let c = (R_GAS * s.theta).sqrt();
    std::array::from_fn(|a| (v[a] - s.u[a]) / c)
}

fn hats_with(s: &GasState, lin: &LinearizedOperator) -> BurnettHats {
    hats_from(s, lin.grid(), lin.maxwellian(), lin.basis())
}

fn hats_from(s: &GasState, g: &VelocityGrid, m: &GridFunction, basis: &MacroBasis) -> BurnettHats {
    let a_poly: [GridFunction; 3] = std::array::from_fn(|j| {
        g.sample(|v| {
            let x = xi_of(s, v);
            0.5 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2] - 5.0) * x[j]
        })
    });
    let b_poly: [[GridFunction; 3]; 3] = std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            g.sample(|v| {
                let x = xi_of(s, v);
                let d = if i == j {
                    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 3.0
                } else {
                    0.0
                };
                x[i] * x[j] - d
            })
        })
    });
    let mut frac: f64 = 0.0;
    let mut src = |p: &GridFunction| {
        let raw = p.mul(m);
        frac = frac.max(basis.macro_fraction(&raw, g));
        basis.project_p1(&raw, g)
    };
    let a_src = std::array::from_fn(|j| src(&a_poly[j]));
    let b_src = std::array::from_fn(|i| std::array::from_fn(|j| src(&b_poly[i][j])));
    BurnettHats {
        a_poly,
        b_poly,
        a_src,
        b_src,
        macro_fraction: frac,
    }
}

/// Burnett polynomials and sources for state `s`.
pub fn burnett_hats(s: &GasState, g: &VelocityGrid) -> Result<BurnettHats> {
    s.validate()?;
    let m = maxwellian(s, g);
    let basis = MacroBasis::new(s, g)?;
    Ok(hats_from(s, g, &m, &basis))
}

/// `out(v) = f(w)` with `w_a = v_{perm[a]}`; maps component `j` to `perm[j]`.
pub fn permute_axes(g: &VelocityGrid, f: &GridFunction, perm: [usize; 3]) -> GridFunction {
    let out = (0..g.len())
        .map(|idx| {
            let (i, j, k) = g.unindex(idx);
            let c = [i, j, k];
            f[g.index(c[perm[0]], c[perm[1]], c[perm[2]])]
        })
        .collect();
    GridFunction::from_vec_unchecked(out)
}

const PERMS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// How one Burnett component was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentRecord {
    pub name: String,
    /// `None` when the component was solved, otherwise the axis permutation
    /// applied to an earlier component.
    pub permuted_from: Option<String>,
    pub iterations: usize,
    /// `||L_M X - Xhat M|| / ||Xhat M||`, recomputed for every component.
    pub residual: f64,
}

/// Solved Burnett functions at one state.
#[derive(Debug, Clone)]
pub struct BurnettSolution {
    pub state: GasState,
    pub grid: VelocityGrid,
    pub hats: BurnettHats,
    pub a: [GridFunction; 3],
    pub b: [[GridFunction; 3]; 3],
    pub mu: f64,
    pub kappa: f64,
    pub records: Vec<ComponentRecord>,
    pub tol: f64,
    /// `sup |Q(M, M)|` at this state and grid.
    pub grid_defect: f64,
}

impl BurnettSolution {
    /// `<Ahat_i, A_j>`.
    pub fn aa(&self, i: usize, j: usize) -> f64 {
        self.grid.dot(&self.hats.a_poly[i], &self.a[j])
    }

    /// `<Ahat_i, B_jk>`.
    pub fn ab(&self, i: usize, j: usize, k: usize) -> f64 {
        self.grid.dot(&self.hats.a_poly[i], &self.b[j][k])
    }

    /// `<Bhat_ij, B_kl>`.
    pub fn bb(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.grid.dot(&self.hats.b_poly[i][j], &self.b[k][l])
    }

    pub fn max_residual(&self) -> f64 {
        self.records.iter().map(|r| r.residual).fold(0.0, f64::max)
    }

    /// `mu` and `kappa` from the given component indices.
    pub fn coefficients_from(&self, i: usize, j: usize, aj: usize) -> (f64, f64) {
        let rt = R_GAS * self.state.theta;
        (-rt * self.bb(i, j, i, j), -R_GAS * rt * self.aa(aj, aj))
    }
}

fn a_name(j: usize) -> String {
    format!("A{}", j + 1)
}

fn b_name(i: usize, j: usize) -> String {
    format!("B{}{}", i + 1, j + 1)
}

/// Solves for all `A_j`, `B_ij` at state `s`. Components related by an axis
/// permutation that fixes `u` are produced by permuting, then checked.
pub fn burnett_solve_with(
    lin: &LinearizedOperator,
    opts: &InverseOptions,
) -> Result<BurnettSolution> {
    let s = *lin.state();
    let g = lin.grid().clone();
    let hats = hats_with(&s, lin);
    let perms: Vec<[usize; 3]> = PERMS
        .iter()
        .copied()
        .filter(|p| (0..3).all(|a| s.u[p[a]] == s.u[a]))
        .collect();
    let mut records = Vec::new();
    let mut a: [Option<GridFunction>; 3] = Default::default();
    for j in 0..3 {
        let mut found = None;
        'search: for src in 0..j {
            for p in &perms {
                if p[src] == j {
                    found = Some((src, *p));
                    break 'search;
                }
            }
        }
        let (x, from, it) = match found {
            Some((src, p)) => (
                permute_axes(&g, a[src].as_ref().unwrap(), p),
                Some(a_name(src)),
                0,
            ),
            None => {
                let sol = lin.invert_micro(&hats.a_src[j], opts)?;
                (sol.g, None, sol.iterations)
            }
        };
        records.push(ComponentRecord {
            name: a_name(j),
            permuted_from: from,
            iterations: it,
            residual: 0.0,
        });
        a[j] = Some(x);
    }
    let mut b: [[Option<GridFunction>; 3]; 3] = Default::default();
    let mut done: Vec<(usize, usize)> = Vec::new();
    for i in 0..3 {
        for j in i..3 {
            let mut found = None;
            'search: for &(si, sj) in &done {
                for p in &perms {
                    let (ti, tj) = (p[si], p[sj]);
                    if (ti, tj) == (i, j) || (tj, ti) == (i, j) {
                        found = Some((si, sj, *p));
                        break 'search;
                    }
                }
            }
            let (x, from, it) = match found {
                Some((si, sj, p)) => (
                    permute_axes(&g, b[si][sj].as_ref().unwrap(), p),
                    Some(b_name(si, sj)),
                    0,
                ),
                None => {
                    let sol = lin.invert_micro(&hats.b_src[i][j], opts)?;
                    (sol.g, None, sol.iterations)
                }
            };
            records.push(ComponentRecord {
                name: b_name(i, j),
                permuted_from: from,
                iterations: it,
                residual: 0.0,
            });
            if i != j {
                b[j][i] = Some(x.clone());
            }
            b[i][j] = Some(x);
            done.push((i, j));
        }
    }
    let a = a.map(|x| x.unwrap());
    let b = b.map(|row| row.map(|x| x.unwrap()));
    let round_trip = |x: &GridFunction, src: &GridFunction| -> Result<f64> {
        let d = lin.apply(x)?.sub(src);
        let n = lin.weighted_dot(src, src).sqrt();
        Ok(lin.weighted_dot(&d, &d).sqrt() / n.max(f64::MIN_POSITIVE))
    };
    for r in records.iter_mut() {
        let digits: Vec<usize> = r.name[1..].bytes().map(|c| (c - b'1') as usize).collect();
        r.residual = if r.name.starts_with('A') {
            round_trip(&a[digits[0]], &hats.a_src[digits[0]])?
        } else {
            round_trip(&b[digits[0]][digits[1]], &hats.b_src[digits[0]][digits[1]])?
        };
    }
    let defect = grid_defect(lin.operator(), &s)?;
    let mut sol = BurnettSolution {
        state: s,
        grid: g,
        hats,
        a,
        b,
        mu: 0.0,
        kappa: 0.0,
        records,
        tol: opts.tol,
        grid_defect: defect,
    };
    let (mu, kappa) = sol.coefficients_from(0, 1, 0);
    sol.mu = mu;
    sol.kappa = kappa;
    if !(mu > 0.0 && kappa > 0.0) {
        log::warn!(
            "nonpositive transport coefficient at theta={}: mu={mu}, kappa={kappa}",
            s.theta
        );
    }
    Ok(sol)
}

/// Builds the operator for `(g, p)` and calls [`burnett_solve_with`].
pub fn burnett_solve(
    s: &GasState,
    g: &VelocityGrid,
    p: &KernelParams,
    tol: f64,
) -> Result<BurnettSolution> {
    let op = Arc::new(CollisionOperator::new(g, *p)?);
    let lin = LinearizedOperator::new(op, s)?;
    let opts = InverseOptions {
        tol,
        ..InverseOptions::default()
    };
    burnett_solve_with(&lin, &opts)
}

/// One bullet of the Burnett property list, evaluated numerically.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyLine {
    pub name: String,
    /// Representative value (a pairing, or the common value of a family).
    pub value: f64,
    /// Violation relative to the family scale; zero means exact.
    pub defect: f64,
    pub tolerance: f64,
}

impl PropertyLine {
    pub fn pass(&self) -> bool {
        self.defect <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyReport {
    pub lines: Vec<PropertyLine>,
    pub tolerance: f64,
}

impl PropertyReport {
    pub fn all_pass(&self) -> bool {
        self.lines.iter().all(PropertyLine::pass)
    }

    pub fn max_defect(&self) -> f64 {
        self.lines.iter().map(|l| l.defect).fold(0.0, f64::max)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for l in &self.lines {
            let _ = writeln!(
                s,
                "{:<44} value={} defect={} tol={} {}",
                l.name,
                fmt17(l.value),
                fmt17(l.defect),
                fmt17(l.tolerance),
                if l.pass() { "ok" } else { "FAIL" }
            );
        }
        s
    }
}

fn spread(values: &[f64], scale: f64) -> f64 {
    let hi = values.iter().copied().fold(f64::MIN, f64::max);
    let lo = values.iter().copied().fold(f64::MAX, f64::min);
    (hi - lo) / scale
}

/// Evaluates every bullet of the Burnett property list. Defects are
/// relative to `|<Ahat_1, A_1>|` for pairings involving `A` and to
/// `|<Bhat_12, B_12>|` for the rest; the tolerance is the solver tolerance
/// plus the grid defect `sup |Q(M, M)|`.
pub fn burnett_property_check(sol: &BurnettSolution) -> PropertyReport {
    let tol = sol.tol + sol.grid_defect;
    let sa = sol.aa(0, 0).abs().max(f64::MIN_POSITIVE);
    let sb = sol.bb(0, 1, 0, 1).abs().max(f64::MIN_POSITIVE);
    let mut lines = Vec::new();
    let mut push = |name: &str, value: f64, defect: f64| {
        lines.push(PropertyLine {
            name: name.to_string(),
            value,
            defect,
            tolerance: tol,
        })
    };
    let pos = |v: f64, scale: f64| (-v).max(0.0) / scale;

    let aii: Vec<f64> = (0..3).map(|i| -sol.aa(i, i)).collect();
    push(
        "-<Ahat_i,A_i> > 0",
        aii[0],
        aii.iter().map(|&v| pos(v, sa)).fold(0.0, f64::max),
    );
    push("-<Ahat_i,A_i> independent of i", aii[0], spread(&aii, sa));

    let mut off = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                off = off.max(sol.aa(i, j).abs() / sa);
            }
        }
    }
    push("<Ahat_i,A_j> = 0 (i != j)", 0.0, off);
    let mut ab = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                ab = ab.max(sol.ab(i, j, k).abs() / sa.max(sb));
            }
        }
    }
    push("<Ahat_i,B_jk> = 0", 0.0, ab);

    // <Bhat_ij, B_kl> = <Bhat_kl, B_ij> = <Bhat_ji, B_kl>
    let mut sym = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    let x = sol.bb(i, j, k, l);
                    sym = sym.max((x - sol.bb(k, l, i, j)).abs() / sb);
                    sym = sym.max((x - sol.bb(j, i, k, l)).abs() / sb);
                }
            }
        }
    }
    push(
        "<Bhat_ij,B_kl> = <Bhat_kl,B_ij> = <Bhat_ji,B_kl>",
        sol.bb(0, 1, 0, 1),
        sym,
    );

    let pairs = [(0, 1), (0, 2), (1, 2), (1, 0), (2, 0), (2, 1)];
    let bij: Vec<f64> = pairs.iter().map(|&(i, j)| -sol.bb(i, j, i, j)).collect();
    push(
        "-<Bhat_ij,B_ij> > 0 (i != j)",
        bij[0],
        bij.iter().map(|&v| pos(v, sb)).fold(0.0, f64::max),
    );
    push(
        "-<Bhat_ij,B_ij> independent of i != j",
        bij[0],
        spread(&bij, sb),
    );

    let biijj: Vec<f64> = pairs.iter().map(|&(i, j)| sol.bb(i, i, j, j)).collect();
    push(
        "<Bhat_ii,B_jj> > 0 (i != j)",
        biijj[0],
        biijj.iter().map(|&v| pos(v, sb)).fold(0.0, f64::max),
    );
    push(
        "<Bhat_ii,B_jj> independent of i != j",
        biijj[0],
        spread(&biijj, sb),
    );

    let bii: Vec<f64> = (0..3).map(|i| -sol.bb(i, i, i, i)).collect();
    push(
        "-<Bhat_ii,B_ii> > 0",
        bii[0],
        bii.iter().map(|&v| pos(v, sb)).fold(0.0, f64::max),
    );
    push("-<Bhat_ii,B_ii> independent of i", bii[0], spread(&bii, sb));

    let mut zero = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    let allowed = (i, j) == (k, l) || (i, j) == (l, k) || (i == j && k == l);
                    if !allowed {
                        zero = zero.max(sol.bb(i, j, k, l).abs() / sb);
                    }
                }
            }
        }
    }
    push("<Bhat_ij,B_kl> = 0 otherwise", 0.0, zero);

    let mut ident = 0.0f64;
    for &(i, j) in &pairs {
        let lhs = sol.bb(i, i, i, i) - sol.bb(i, i, j, j);
        let rhs = 2.0 * sol.bb(i, j, i, j);
        ident = ident.max((lhs - rhs).abs() / sb);
    }
    push(
        "<Bhat_ii,B_ii> - <Bhat_ii,B_jj> = 2<Bhat_ij,B_ij>",
        sol.bb(0, 0, 0, 0) - sol.bb(0, 0, 1, 1),
        ident,
    );

    let res = sol.max_residual();
    push(
        "round trip ||L_M X - Xhat M|| <= 2 tol",
        res,
        (res - 2.0 * sol.tol).max(0.0),
    );

    PropertyReport {
        lines,
        tolerance: tol,
    }
}

/// One temperature of the transport table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportRow {
    pub theta: f64,
    pub mu: f64,
    pub kappa: f64,
    pub residual_mu: f64,
    pub residual_kappa: f64,
}

/// `mu(theta)`, `kappa(theta)` on a temperature grid with monotone-cubic
/// interpolation. Evaluation outside the table clamps and logs a warning.
#[derive(Debug, Clone)]
pub struct TransportTable {
    pub rows: Vec<TransportRow>,
    pub grid_key: String,
    mu: MonotoneCubic,
    kappa: MonotoneCubic,
}

impl TransportTable {
    pub fn from_rows(rows: Vec<TransportRow>, grid_key: String) -> Result<Self> {
        let x: Vec<f64> = rows.iter().map(|r| r.theta).collect();
        let mu = MonotoneCubic::new(x.clone(), rows.iter().map(|r| r.mu).collect())?;
        let kappa = MonotoneCubic::new(x, rows.iter().map(|r| r.kappa).collect())?;
        Ok(TransportTable {
            rows,
            grid_key,
            mu,
            kappa,
        })
    }

    pub fn theta_range(&self) -> (f64, f64) {
        self.mu.domain()
    }

    /// Largest `(mu, kappa)` over temperatures in `[lo, hi]`, clamped to the table.
    pub fn max_on(&self, lo: f64, hi: f64) -> (f64, f64) {
        let (a, b) = self.theta_range();
        let (lo, hi) = (lo.clamp(a, b), hi.clamp(a, b));
        (self.mu.max_on(lo, hi), self.kappa.max_on(lo, hi))
    }

    /// `(mu, kappa)` at `theta`.
    pub fn eval(&self, theta: f64) -> (f64, f64) {
        let (lo, hi) = self.theta_range();
        if theta < lo || theta > hi {
            log::warn!("theta={theta} outside transport table [{lo}, {hi}], clamping");
        }
        let t = theta.clamp(lo, hi);
        (self.mu.eval(t), self.kappa.eval(t))
    }

    /// Same as [`eval`](Self::eval) without the warning; for hot loops that
    /// check the range themselves.
    pub fn eval_clamped(&self, theta: f64) -> (f64, f64) {
        let (lo, hi) = self.theta_range();
        let t = theta.clamp(lo, hi);
        (self.mu.eval(t), self.kappa.eval(t))
    }

    /// Table with constant coefficients, for tests and inviscid-like runs.
    pub fn constant(mu: f64, kappa: f64) -> Self {
        let rows = vec![
            TransportRow {
                theta: 0.0,
                mu,
                kappa,
                residual_mu: 0.0,
                residual_kappa: 0.0,
            },
            TransportRow {
                theta: f64::MAX,
                mu,
                kappa,
                residual_mu: 0.0,
                residual_kappa: 0.0,
            },
        ];
        Self::from_rows(rows, "constant".into()).expect("two increasing nodes")
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "theta",
            "mu",
            "kappa",
            "residual_mu",
            "residual_kappa",
            "grid_key",
        ])?;
        for r in &self.rows {
            w.write_record([
                fmt17(r.theta),
                fmt17(r.mu),
                fmt17(r.kappa),
                fmt17(r.residual_mu),
                fmt17(r.residual_kappa),
                self.grid_key.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let parse_err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            msg,
        };
        let mut r = csv::Reader::from_path(path)?;
        let mut rows = Vec::new();
        let mut key = String::new();
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != 6 {
                return Err(parse_err(format!("expected 6 fields, found {}", rec.len())));
            }
            let f = |i: usize| -> Result<f64> {
                rec[i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| parse_err(format!("field {i}: {e}")))
            };
            rows.push(TransportRow {
                theta: f(0)?,
                mu: f(1)?,
                kappa: f(2)?,
                residual_mu: f(3)?,
                residual_kappa: f(4)?,
            });
            key = rec[5].to_string();
        }
        if rows.len() < 2 {
            return Err(parse_err("need at least two rows".into()));
        }
        Self::from_rows(rows, key)
    }
}

/// `mu` and `kappa` at `(1, u, theta)` from the two solves `B_12`, `A_1`.
pub fn transport_at(
    op: &Arc<CollisionOperator>,
    s: &GasState,
    opts: &InverseOptions,
) -> Result<TransportRow> {
    let lin = LinearizedOperator::new(op.clone(), s)?;
    let hats = hats_with(s, &lin);
    let a1 = lin.invert_micro(&hats.a_src[0], opts)?;
    let b12 = lin.invert_micro(&hats.b_src[0][1], opts)?;
    let g = lin.grid();
    let rt = R_GAS * s.theta;
    Ok(TransportRow {
        theta: s.theta,
        mu: -rt * g.dot(&hats.b_poly[0][1], &b12.g),
        kappa: -R_GAS * rt * g.dot(&hats.a_poly[0], &a1.g),
        residual_mu: b12.residual,
        residual_kappa: a1.residual,
    })
}

/// Builds the transport table at `rho = 1`, `u = 0`, in parallel over `theta`.
pub fn transport_table(
    thetas: &[f64],
    g: &VelocityGrid,
    p: &KernelParams,
    tol: f64,
) -> Result<TransportTable> {
    if thetas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("transport temperatures must increase".into()));
    }
    for &t in thetas {
        if !(t > 0.75 && t < 3.0) {
            log::warn!("theta={t} lies outside (3/4, 3)");
        }
    }
    let op = Arc::new(CollisionOperator::new(g, *p)?);
    let opts = InverseOptions {
        tol,
        max_iter: 2000,
        kind: SolverKind::Cg,
    };
    let rows = thetas
        .par_iter()
        .map(|&t| transport_at(&op, &GasState::new(1.0, [0.0; 3], t)?, &opts))
        .collect::<Result<Vec<_>>>()?;
    for r in &rows {
        if !(r.mu > 0.0 && r.kappa > 0.0) {
            log::warn!("nonpositive transport coefficient at theta={}", r.theta);
        }
    }
    TransportTable::from_rows(rows, g.key(p.gamma))
}

/// Loads `path` if it exists and matches the grid key, otherwise builds and stores the table.
pub fn load_or_build_table(
    path: &Path,
    thetas: &[f64],
    g: &VelocityGrid,
    p: &KernelParams,
    tol: f64,
) -> Result<TransportTable> {
    if path.exists() {
        match TransportTable::read_csv(path) {
            Ok(t)
                if t.grid_key == g.key(p.gamma)
                    && t.rows.iter().map(|r| r.theta).eq(thetas.iter().copied()) =>
            {
                return Ok(t)
            }
            Ok(_) => log::info!(
                "transport table {} is for another grid, rebuilding",
                path.display()
            ),
            Err(e) => log::warn!(
                "ignoring unreadable transport table {}: {e}",
                path.display()
            ),
        }
    }
    let t = transport_table(thetas, g, p, tol)?;
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    t.write_csv(path)?;
    Ok(t)
}

/// Smallest `C` with `|X(v)| <= C M(v)^{1-eps}` over all components and nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRow {
    pub eps: f64,
    pub constant: f64,
    /// `|xi|` of the node that fixes the constant.
    pub xi_at_max: f64,
}

pub fn decay_check(sol: &BurnettSolution, eps: &[f64]) -> Vec<DecayRow> {
    let g = &sol.grid;
    let m = maxwellian(&sol.state, g);
    let mut comps: Vec<&GridFunction> = sol.a.iter().collect();
    for row in &sol.b {
        comps.extend(row.iter());
    }
    eps.iter()
        .map(|&e| {
            let mut best = (0.0, 0.0);
            for n in 0..g.len() {
                let bound = m[n].powf(1.0 - e);
                let x = comps.iter().map(|c| c[n].abs()).fold(0.0, f64::max);
                let r = x / bound;
                if r > best.0 {
                    let xi = xi_of(&sol.state, g.node(n));
                    best = (r, (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt());
                }
            }
            DecayRow {
                eps: e,
                constant: best.0,
                xi_at_max: best.1,
            }
        })
        .collect()
}

/// `Gbar = eps^{1-a} [ sqrt(R) thetabar_y / sqrt(theta) A_1 + ubar_1y B_11 ]`
/// at physical `(t, x)`. `w` is the wave in the scaled variables
/// `(tau, y) = (t, x) / eps^a`, so its own derivatives are the `y`-derivatives.
pub fn gbar_construct(
    w: &SmoothWave,
    t: f64,
    x: f64,
    s: &GasState,
    eps: f64,
    a: f64,
    sol: &BurnettSolution,
) -> Result<GridFunction> {
    if s.max_abs_diff(&sol.state) > 1e-12 * (1.0 + s.theta) {
        return Err(Error::InvalidState(format!(
            "Burnett solution was computed at {:?}, not {:?}",
            sol.state, s
        )));
    }
    let ea = eps.powf(a);
    let ws = w.sample(t / ea, x / ea)?;
    let (theta_y, u_y) = (ws.theta.x, ws.u1.x);
    let c = eps.powf(1.0 - a);
    let ca = c * R_GAS.sqrt() * theta_y / s.theta.sqrt();
    let cb = c * u_y;
    Ok(sol.a[0].scaled(ca).add(&sol.b[0][0].scaled(cb)))
}

/// `|| f / sqrt(mu) ||_{L^2_v}`.
pub fn l2_over_sqrt_mu(f: &GridFunction, g: &VelocityGrid) -> f64 {
    let mu = global_maxwellian(g);
    g.integrate_with(|n| f[n] * f[n] / mu[n]).sqrt()
}
