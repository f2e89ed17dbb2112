//! Discrete Landau collision operator, collision frequency, linearized
//! operators and the constrained inverse of `L_M`.
//!
//! `Q(F1, F2) = div J` with `J = (phi * F1) D F2 - (phi * D F1) F2`, where `D` is
//! the grid derivative and `div = -W^{-1} D^T W` its weighted adjoint. With
//! this pairing mass is conserved exactly, and momentum and energy are
//! conserved exactly for `Q(F, F)` and for `L_M` because the double sums are
//! antisymmetric in `(v, v*)` and `phi(z) z = 0`.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::conv::{kernel_entries, sym_index, ConvolutionEngine};
use crate::error::{Error, Result};
use crate::euler::GasState;
use crate::krylov::{gmres, pcg, KrylovResult};
use crate::velocity::{global_maxwellian, maxwellian, GridFunction, MacroBasis, VelocityGrid};

/// Kernel exponent and treatment of the coincident node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub gamma: f64,
    /// Regularization length of `|v - v*|` in units of the grid spacing;
    /// zero drops the coincident-node term.
    pub diag_regularization: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams {
            gamma: -3.0,
            diag_regularization: 0.0,
        }
    }
}

impl KernelParams {
    pub fn new(gamma: f64, diag_regularization: f64) -> Result<Self> {
        let p = KernelParams {
            gamma,
            diag_regularization,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(-3.0..-2.0).contains(&self.gamma) {
            return Err(Error::Config(format!(
                "gamma must lie in [-3, -2), got {}",
                self.gamma
            )));
        }
        if !(self.diag_regularization >= 0.0 && self.diag_regularization.is_finite()) {
            return Err(Error::Config(format!(
                "diagonal regularization must be nonnegative, got {}",
                self.diag_regularization
            )));
        }
        Ok(())
    }
}

/// `phi(v) = (I - v v^T / |v|^2) |v|^{gamma+2}`; zero at `v = 0`.
pub fn phi_kernel(v: [f64; 3], p: &KernelParams) -> [[f64; 3]; 3] {
    let e = kernel_entries(v, p.gamma, 0.0);
    std::array::from_fn(|i| std::array::from_fn(|j| e[sym_index(i, j)]))
}

/// The collision operator on one grid. Holds the kernel spectra.
#[derive(Debug)]
pub struct CollisionOperator {
    grid: VelocityGrid,
    params: KernelParams,
    engine: ConvolutionEngine,
}

impl CollisionOperator {
    pub fn new(grid: &VelocityGrid, params: KernelParams) -> Result<Self> {
        params.validate()?;
        let reg = params.diag_regularization * grid.spacing();
        Ok(CollisionOperator {
            grid: grid.clone(),
            params,
            engine: ConvolutionEngine::new(grid, params.gamma, reg),
        })
    }

    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn engine(&self) -> &ConvolutionEngine {
        &self.engine
    }

    fn gradient_vecs(&self, f: &[f64]) -> [Vec<f64>; 3] {
        std::array::from_fn(|a| {
            let mut out = vec![0.0; f.len()];
            self.grid.derivative_into(f, a, &mut out);
            out
        })
    }

    /// `Q(F1, F2)`.
    pub fn q(&self, f1: &GridFunction, f2: &GridFunction) -> Result<GridFunction> {
        self.grid.check(f1)?;
        self.grid.check(f2)?;
        let d1 = self.gradient_vecs(f1.values());
        let (a, b) = self
            .engine
            .tensor_and_vector(f1.values(), [&d1[0], &d1[1], &d1[2]]);
        let d2 = self.gradient_vecs(f2.values());
        let len = self.grid.len();
        let mut flux: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; len]);
        add_flux(&mut flux, &a, &d2, &b, f2.values(), 1.0);
        Ok(self.divergence(&flux))
    }

    fn divergence(&self, flux: &[Vec<f64>; 3]) -> GridFunction {
        let mut out = vec![0.0; self.grid.len()];
        for (a, j) in flux.iter().enumerate() {
            self.grid.add_divergence(j, a, &mut out);
        }
        GridFunction::from_vec_unchecked(out)
    }

    /// `Gamma(h, k) = Q(sqrt(mu) h, sqrt(mu) k) / sqrt(mu)`.
    pub fn gamma_bilinear(&self, h: &GridFunction, k: &GridFunction) -> Result<GridFunction> {
        let sm = global_maxwellian(&self.grid).map(f64::sqrt);
        let q = self.q(&sm.mul(h), &sm.mul(k))?;
        Ok(q.zip_map(&sm, |a, b| a / b))
    }

    /// `script_L f = Gamma(f, sqrt(mu)) + Gamma(sqrt(mu), f)`.
    pub fn script_l(&self, f: &GridFunction) -> Result<GridFunction> {
        let sm = global_maxwellian(&self.grid).map(f64::sqrt);
        Ok(self
            .gamma_bilinear(f, &sm)?
            .add(&self.gamma_bilinear(&sm, f)?))
    }
}

/// `J_i += s (sum_j a_ij d_j - b_i f)`.
fn add_flux(
    flux: &mut [Vec<f64>; 3],
    a: &[Vec<f64>; 6],
    d: &[Vec<f64>; 3],
    b: &[Vec<f64>; 3],
    f: &[f64],
    s: f64,
) {
    for (i, ji) in flux.iter_mut().enumerate() {
        let (c0, c1, c2) = (sym_index(i, 0), sym_index(i, 1), sym_index(i, 2));
        for n in 0..ji.len() {
            ji[n] +=
                s * (a[c0][n] * d[0][n] + a[c1][n] * d[1][n] + a[c2][n] * d[2][n] - b[i][n] * f[n]);
        }
    }
}

/// Convenience form of [`CollisionOperator::q`] that builds the kernel spectra on the fly.
pub fn collision_q(
    f1: &GridFunction,
    f2: &GridFunction,
    g: &VelocityGrid,
    p: &KernelParams,
) -> Result<GridFunction> {
    CollisionOperator::new(g, *p)?.q(f1, f2)
}

/// Collision frequency `sigma_ij = phi_ij * mu` at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionCoeffs {
    gamma: f64,
    sigma: [GridFunction; 6],
}

impl CollisionCoeffs {
    pub fn compute(op: &CollisionOperator) -> Self {
        let mu = global_maxwellian(op.grid());
        let a = op.engine().tensor(mu.values());
        CollisionCoeffs {
            gamma: op.params().gamma,
            sigma: a.map(GridFunction::from_vec_unchecked),
        }
    }

    /// Loads the coefficients for `(L, N, gamma)` from `dir`, computing and
    /// storing them on a miss.
    pub fn load_or_compute(dir: &Path, op: &CollisionOperator) -> Result<Self> {
        let g = op.grid();
        let key = g.key(op.params().gamma);
        let path = dir.join(format!(
            "sigma_{key}_r{}.bin",
            op.params().diag_regularization
        ));
        if path.exists() {
            match Self::read(&path, g) {
                Ok(c) => return Ok(c),
                Err(e) => log::warn!(
                    "ignoring unreadable coefficient cache {}: {e}",
                    path.display()
                ),
            }
        }
        let c = Self::compute(op);
        fs::create_dir_all(dir)?;
        let tmp = path.with_extension("tmp");
        let mut bytes = Vec::with_capacity(8 * (1 + 6 * g.len()));
        bytes.extend_from_slice(&c.gamma.to_le_bytes());
        for s in &c.sigma {
            for v in s.values() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, &path)?;
        Ok(c)
    }

    fn read(path: &Path, g: &VelocityGrid) -> Result<Self> {
        let bytes = fs::read(path)?;
        if bytes.len() != 8 * (1 + 6 * g.len()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                msg: "size does not match grid".into(),
            });
        }
        let mut it = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let gamma = it.next().unwrap();
        let sigma = std::array::from_fn(|_| {
            GridFunction::from_vec_unchecked(it.by_ref().take(g.len()).collect())
        });
        Ok(CollisionCoeffs { gamma, sigma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn get(&self, i: usize, j: usize) -> &GridFunction {
        &self.sigma[sym_index(i, j)]
    }

    /// The 3x3 matrix at every node.
    pub fn matrices(&self) -> Vec<[[f64; 3]; 3]> {
        (0..self.sigma[0].len())
            .map(|n| std::array::from_fn(|i| std::array::from_fn(|j| self.get(i, j)[n])))
            .collect()
    }
}

pub fn collision_frequency(g: &VelocityGrid, p: &KernelParams) -> Result<CollisionCoeffs> {
    Ok(CollisionCoeffs::compute(&CollisionOperator::new(g, *p)?))
}

/// Which Krylov method the inverse uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Cg,
    Gmres { restart: usize },
}

/// Options of [`LinearizedOperator::invert_micro`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub kind: SolverKind,
}

impl Default for InverseOptions {
    fn default() -> Self {
        InverseOptions {
            tol: 1e-6,
            max_iter: 400,
            kind: SolverKind::Cg,
        }
    }
}

/// Microscopic solution of `L_M g = h` with its solver record.
#[derive(Debug, Clone)]
pub struct MicroSolution {
    pub g: GridFunction,
    pub iterations: usize,
    /// `||L_M g - h|| / ||h||` in the `M^{-1}`-weighted norm, recomputed after the solve.
    pub residual: f64,
    pub history: Vec<f64>,
}

const REFINEMENT_PASSES: usize = 8;

/// One-sided differences, forward along axis `a` when `fwd[a]`, restricted
/// to the nodes that have the needed neighbor along every axis.
struct OneSided {
    h: f64,
    stride: [usize; 3],
    fwd: [bool; 3],
    mask: Vec<bool>,
}

impl OneSided {
    fn new(g: &VelocityGrid, fwd: [bool; 3]) -> Self {
        let n = g.n_per_axis();
        let mask = (0..g.len())
            .map(|idx| {
                let (i, j, k) = g.unindex(idx);
                [i, j, k]
                    .iter()
                    .zip(&fwd)
                    .all(|(&c, &f)| if f { c + 1 < n } else { c > 0 })
            })
            .collect();
        OneSided {
            h: g.spacing(),
            stride: [g.stride(0), g.stride(1), g.stride(2)],
            fwd,
            mask,
        }
    }

    fn gradient(&self, q: &[f64]) -> [Vec<f64>; 3] {
        std::array::from_fn(|a| {
            let st = self.stride[a];
            (0..q.len())
                .map(|idx| {
                    if !self.mask[idx] {
                        0.0
                    } else if self.fwd[a] {
                        (q[idx + st] - q[idx]) / self.h
                    } else {
                        (q[idx] - q[idx - st]) / self.h
                    }
                })
                .collect()
        })
    }

    /// `out += D^T j` for a field supported on the mask.
    fn add_transpose(&self, j: &[Vec<f64>; 3], out: &mut [f64]) {
        for (a, ja) in j.iter().enumerate() {
            let st = self.stride[a];
            for idx in 0..out.len() {
                if !self.mask[idx] {
                    continue;
                }
                let c = ja[idx] / self.h;
                if self.fwd[a] {
                    out[idx] -= c;
                    out[idx + st] += c;
                } else {
                    out[idx] += c;
                    out[idx - st] -= c;
                }
            }
        }
    }
}

/// The linearized operator `L_M h = Q(h, M) + Q(M, h)` around a fixed local
/// Maxwellian, with the Maxwellian-side convolutions cached.
///
/// [`apply`](Self::apply) discretizes the weak form
/// `<L_M h, k/M> = -1/2 sum sum M M* (Dq - Dq*) . phi(v - v*) (Dp - Dp*)`,
/// `q = h/M`, `p = k/M`, averaged over the eight choices of forward or
/// backward differences per axis. It is
/// exactly symmetric and nonpositive in the `M^{-1}`-weighted pairing and its
/// null space is exactly the span of the collision invariants times `M`.
/// The strong form built from two `Q` evaluations has neither property on
/// the grid (it satisfies `L_M M = 2 Q(M, M)`, and centered differences
/// leave checkerboard modes nearly null); [`apply_strong`](Self::apply_strong)
/// keeps it for comparison.
#[derive(Debug, Clone)]
pub struct LinearizedOperator {
    op: Arc<CollisionOperator>,
    state: GasState,
    m: GridFunction,
    dm: [Vec<f64>; 3],
    a_m: [Vec<f64>; 6],
    b_m: [Vec<f64>; 3],
    sides: Vec<Arc<OneSidedForm>>,
    basis: MacroBasis,
    diag: Vec<f64>,
}

#[derive(Debug)]
struct OneSidedForm {
    diff: OneSided,
    /// `phi * (M 1_mask)`.
    a: [Vec<f64>; 6],
    /// `M 1_mask`.
    mm: Vec<f64>,
}

impl std::fmt::Debug for OneSided {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OneSided").field("fwd", &self.fwd).finish()
    }
}

impl LinearizedOperator {
    pub fn new(op: Arc<CollisionOperator>, s: &GasState) -> Result<Self> {
        let g = op.grid().clone();
        let m = maxwellian(s, &g);
        let dm = op.gradient_vecs(m.values());
        let (a_m, b_m) = op
            .engine()
            .tensor_and_vector(m.values(), [&dm[0], &dm[1], &dm[2]]);
        let basis = MacroBasis::new(s, &g)?;
        let sides = (0..8)
            .map(|code: usize| {
                let diff = OneSided::new(&g, std::array::from_fn(|a| code >> a & 1 == 0));
                let mm: Vec<f64> = (0..g.len())
                    .map(|n| if diff.mask[n] { m[n] } else { 0.0 })
                    .collect();
                let a = op.engine().tensor(&mm);
                Arc::new(OneSidedForm { diff, a, mm })
            })
            .collect();
        let h2 = g.spacing() * g.spacing();
        let rt = crate::euler::R_GAS * s.theta;
        // diagonal of the diffusion part plus the drift-like zeroth-order part
        let diag = (0..g.len())
            .map(|n| {
                let v = g.node(n);
                let mut d = 0.0;
                for (i, c) in [0usize, 3, 5].into_iter().enumerate() {
                    let xi = (v[i] - s.u[i]) / rt;
                    d += a_m[c][n] * (0.9 / h2 + 0.25 * xi * xi);
                }
                d.max(1e-300)
            })
            .collect();
        Ok(LinearizedOperator {
            op,
            state: *s,
            m,
            dm,
            a_m,
            b_m,
            sides,
            basis,
            diag,
        })
    }

    pub fn grid(&self) -> &VelocityGrid {
        self.op.grid()
    }

    pub fn operator(&self) -> &Arc<CollisionOperator> {
        &self.op
    }

    pub fn state(&self) -> &GasState {
        &self.state
    }

    pub fn maxwellian(&self) -> &GridFunction {
        &self.m
    }

    pub fn basis(&self) -> &MacroBasis {
        &self.basis
    }

    /// Strong form `Q(h, M) + Q(M, h)` from two collision-operator applications.
    pub fn apply_strong(&self, h: &GridFunction) -> Result<GridFunction> {
        self.grid().check(h)?;
        Ok(self.apply_strong_slice(h.values()))
    }

    fn apply_strong_slice(&self, h: &[f64]) -> GridFunction {
        let dh = self.op.gradient_vecs(h);
        let (a_h, b_h) = self
            .op
            .engine()
            .tensor_and_vector(h, [&dh[0], &dh[1], &dh[2]]);
        let len = h.len();
        let mut flux: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; len]);
        add_flux(&mut flux, &a_h, &self.dm, &b_h, self.m.values(), 1.0);
        add_flux(&mut flux, &self.a_m, &dh, &self.b_m, h, 1.0);
        self.op.divergence(&flux)
    }

    /// `L_M h` in the weak form: exactly symmetric and nonpositive in the
    /// `M^{-1}`-weighted pairing, and zero on the macroscopic basis.
    pub fn apply(&self, h: &GridFunction) -> Result<GridFunction> {
        self.grid().check(h)?;
        Ok(self.apply_slice(h.values()))
    }

    /// `sup |L_M h - (Q(h, M) + Q(M, h))|` relative to `sup |L_M h|`.
    pub fn form_gap(&self, h: &GridFunction) -> Result<f64> {
        let w = self.apply(h)?;
        let s = self.apply_strong(h)?;
        Ok(w.sub(&s).max_abs() / w.max_abs().max(f64::MIN_POSITIVE))
    }

    fn apply_slice(&self, h: &[f64]) -> GridFunction {
        let g = self.grid();
        let m = self.m.values();
        let q: Vec<f64> = h.iter().zip(m).map(|(a, b)| a / b).collect();
        let mut out = vec![0.0; h.len()];
        for side in &self.sides {
            let dq = side.diff.gradient(&q);
            let mdq: [Vec<f64>; 3] =
                std::array::from_fn(|a| dq[a].iter().zip(&side.mm).map(|(x, y)| x * y).collect());
            let c = self.op.engine().vector([&mdq[0], &mdq[1], &mdq[2]]);
            let flux: [Vec<f64>; 3] = std::array::from_fn(|i| {
                let (c0, c1, c2) = (sym_index(i, 0), sym_index(i, 1), sym_index(i, 2));
                (0..h.len())
                    .map(|n| {
                        g.weight(n)
                            * side.mm[n]
                            * (side.a[c0][n] * dq[0][n]
                                + side.a[c1][n] * dq[1][n]
                                + side.a[c2][n] * dq[2][n]
                                - c[i][n])
                    })
                    .collect()
            });
            side.diff.add_transpose(&flux, &mut out);
        }
        for (n, o) in out.iter_mut().enumerate() {
            *o *= -0.125 / g.weight(n);
        }
        GridFunction::from_vec_unchecked(out)
    }

    /// `<f, k / M>`.
    pub fn weighted_dot(&self, f: &GridFunction, k: &GridFunction) -> f64 {
        self.basis.weighted_dot(f, k, self.grid())
    }

    /// Solves `L_M g = h` for microscopic `g`, in the `M^{-1}`-weighted inner
    /// product. Every iterate is projected off the macroscopic basis.
    pub fn invert_micro(&self, h: &GridFunction, opts: &InverseOptions) -> Result<MicroSolution> {
        let g = self.grid();
        g.check(h)?;
        let frac = self.basis.macro_fraction(h, g);
        if frac > 1e-8 {
            return Err(Error::NotMicroscopic(frac));
        }
        let len = g.len();
        let w: Vec<f64> = (0..len).map(|n| g.weight(n) / self.m[n]).collect();
        let dot = |a: &[f64], b: &[f64]| -> f64 {
            let mut s = 0.0;
            for n in 0..a.len() {
                s += w[n] * a[n] * b[n];
            }
            s
        };
        let proj = |v: Vec<f64>| {
            self.basis
                .project_p1(&GridFunction::from_vec_unchecked(v), g)
                .into_vec()
        };
        // (-L_M) is symmetric positive on the microscopic complement
        let apply = |x: &[f64]| -> Vec<f64> {
            let y = self.apply_slice(&proj(x.to_vec())).into_vec();
            proj(y.into_iter().map(|v| -v).collect())
        };
        let precond = |r: &[f64]| -> Vec<f64> {
            proj(r.iter().zip(&self.diag).map(|(a, d)| a / d).collect())
        };
        let rhs: Vec<f64> = proj(h.values().iter().map(|v| -v).collect());
        let rhs_norm = dot(&rhs, &rhs).sqrt();
        // Krylov recurrences drift from the true residual on these badly scaled
        // systems, so the solve is wrapped in iterative refinement.
        let mut x = vec![0.0; len];
        let mut r = rhs.clone();
        let mut iterations = 0;
        let mut history = Vec::new();
        for _ in 0..REFINEMENT_PASSES {
            let rn = dot(&r, &r).sqrt();
            if rn <= opts.tol * rhs_norm || iterations >= opts.max_iter {
                break;
            }
            let inner_tol = (opts.tol * rhs_norm / rn).min(0.5);
            let budget = opts.max_iter - iterations;
            let res: KrylovResult = match opts.kind {
                SolverKind::Cg => pcg(&apply, &precond, dot, &r, inner_tol, budget),
                SolverKind::Gmres { restart } => {
                    gmres(&apply, &precond, dot, &r, inner_tol, budget, restart)
                }
            }
            .map_err(|e| match e {
                Error::NonConvergence {
                    iterations: it,
                    residual,
                    history: h,
                } => {
                    history.extend(h.iter().map(|v| v * rn / rhs_norm));
                    Error::NonConvergence {
                        iterations: iterations + it,
                        residual: residual * rn / rhs_norm,
                        history: std::mem::take(&mut history),
                    }
                }
                other => other,
            })?;
            iterations += res.iterations;
            history.extend(res.history.iter().map(|v| v * rn / rhs_norm));
            for (xi, di) in x.iter_mut().zip(&res.x) {
                *xi += di;
            }
            let ax = apply(&x);
            r = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        }
        let res = KrylovResult {
            x,
            iterations,
            residual: dot(&r, &r).sqrt() / rhs_norm.max(f64::MIN_POSITIVE),
            history,
        };
        let sol = GridFunction::from_vec_unchecked(proj(res.x));
        let lg = self.apply(&sol)?;
        let hn = self.weighted_dot(h, h).sqrt();
        let diff = lg.sub(h);
        let residual = if hn == 0.0 {
            0.0
        } else {
            self.weighted_dot(&diff, &diff).sqrt() / hn
        };
        if residual > opts.tol.max(1e-12) * 10.0 {
            return Err(Error::NonConvergence {
                iterations: res.iterations,
                residual,
                history: res.history,
            });
        }
        Ok(MicroSolution {
            g: sol,
            iterations: res.iterations,
            residual,
            history: res.history,
        })
    }
}

/// Convenience form of [`LinearizedOperator::apply`].
pub fn linearized_lm(
    h: &GridFunction,
    s: &GasState,
    g: &VelocityGrid,
    p: &KernelParams,
) -> Result<GridFunction> {
    LinearizedOperator::new(Arc::new(CollisionOperator::new(g, *p)?), s)?.apply(h)
}

/// Convenience form of [`LinearizedOperator::invert_micro`].
pub fn invert_lm_micro(
    h: &GridFunction,
    s: &GasState,
    g: &VelocityGrid,
    p: &KernelParams,
    tol: f64,
    max_iter: usize,
) -> Result<GridFunction> {
    let lin = LinearizedOperator::new(Arc::new(CollisionOperator::new(g, *p)?), s)?;
    let opts = InverseOptions {
        tol,
        max_iter,
        ..InverseOptions::default()
    };
    Ok(lin.invert_micro(h, &opts)?.g)
}

/// Intrinsic defect of a grid: `sup |Q(M, M)|` for the given state.
pub fn grid_defect(op: &CollisionOperator, s: &GasState) -> Result<f64> {
    let m = maxwellian(s, op.grid());
    Ok(op.q(&m, &m)?.max_abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conv::direct_tensor;

    #[test]
    fn gamma_range() {
        assert!(KernelParams::new(-3.0, 0.0).is_ok());
        assert!(KernelParams::new(-2.5, 1.0).is_ok());
        assert!(KernelParams::new(-2.0, 0.0).is_err());
        assert!(KernelParams::new(-3.1, 0.0).is_err());
        assert!(KernelParams::new(-3.0, -1.0).is_err());
    }

    #[test]
    fn phi_annihilates_its_argument() {
        let v = [0.4, 0.1, -2.0];
        let m = phi_kernel(v, &KernelParams::default());
        for row in &m {
            assert!((row[0] * v[0] + row[1] * v[1] + row[2] * v[2]).abs() < 1e-15);
        }
        assert_eq!(
            phi_kernel([0.0; 3], &KernelParams::default()),
            [[0.0; 3]; 3]
        );
    }

    /// Q from direct sums, following the same discrete formula.
    fn q_direct(
        g: &VelocityGrid,
        p: &KernelParams,
        f1: &GridFunction,
        f2: &GridFunction,
    ) -> GridFunction {
        let d1 = g.gradient(f1);
        let d2 = g.gradient(f2);
        let a = direct_tensor(g, f1.values(), p.gamma, 0.0);
        let ad: Vec<[Vec<f64>; 6]> = d1
            .iter()
            .map(|d| direct_tensor(g, d.values(), p.gamma, 0.0))
            .collect();
        let mut out = vec![0.0; g.len()];
        for i in 0..3 {
            let j: Vec<f64> = (0..g.len())
                .map(|n| {
                    (0..3)
                        .map(|k| {
                            a[sym_index(i, k)][n] * d2[k][n] - ad[k][sym_index(i, k)][n] * f2[n]
                        })
                        .sum()
                })
                .collect();
            g.add_divergence(&j, i, &mut out);
        }
        GridFunction::from_vec(out).unwrap()
    }

    #[test]
    fn fast_q_matches_direct_oracle() {
        let g = VelocityGrid::new(5.0, 8).unwrap();
        let p = KernelParams::default();
        let f1 = maxwellian(&GasState::new(1.0, [0.3, 0.0, -0.1], 1.2).unwrap(), &g);
        let f2 = maxwellian(&GasState::new(0.8, [0.0, 0.2, 0.0], 1.7).unwrap(), &g);
        let fast = collision_q(&f1, &f2, &g, &p).unwrap();
        let slow = q_direct(&g, &p, &f1, &f2);
        assert!(fast.sub(&slow).max_abs() < 1e-12 * slow.max_abs().max(1e-3));
    }

    #[test]
    fn mass_momentum_energy_conserved() {
        let g = VelocityGrid::new(6.0, 12).unwrap();
        let p = KernelParams::default();
        let s1 = GasState::new(1.0, [0.3, 0.0, -0.1], 1.2).unwrap();
        let s2 = GasState::new(0.8, [0.0, 0.2, 0.0], 1.7).unwrap();
        let f = maxwellian(&s1, &g).add(&maxwellian(&s2, &g));
        let q = collision_q(&f, &f, &g, &p).unwrap();
        let scale = g.integrate_with(|i| q[i].abs());
        for psi in [
            |_: [f64; 3]| 1.0,
            |v: [f64; 3]| v[0],
            |v: [f64; 3]| v[1],
            |v: [f64; 3]| v[2],
            |v: [f64; 3]| v[0] * v[0] + v[1] * v[1] + v[2] * v[2],
        ] {
            let m = g.integrate_with(|i| psi(g.node(i)) * q[i]);
            assert!(m.abs() < 1e-13 * scale.max(1.0), "{m} vs {scale}");
        }
    }

    #[test]
    fn sigma_symmetric_psd() {
        let g = VelocityGrid::new(8.0, 12).unwrap();
        let c = collision_frequency(&g, &KernelParams::default()).unwrap();
        for m in c.matrices().iter().step_by(7) {
            // Sylvester-style check through the characteristic polynomial coefficients
            let tr = m[0][0] + m[1][1] + m[2][2];
            let minors = m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2]
                - m[0][2] * m[2][0]
                + m[1][1] * m[2][2]
                - m[1][2] * m[2][1];
            let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
            assert!(tr > 0.0 && minors > -1e-12 && det > -1e-12);
        }
    }

    fn smooth_micro(lin: &LinearizedOperator, c: &[f64]) -> GridFunction {
        let g = lin.grid();
        let h = g
            .sample(|v| {
                c[0] * v[0] * v[1] + c[1] * v[2] * v[2] * v[0] + c[2] * v[1].powi(4) + c[3] * v[2]
            })
            .mul(lin.maxwellian());
        lin.basis().project_p1(&h, g)
    }

    #[test]
    fn weak_form_structure() {
        let g = VelocityGrid::new(7.0, 12).unwrap();
        let op = Arc::new(CollisionOperator::new(&g, KernelParams::default()).unwrap());
        let s = GasState::new(1.1, [0.2, 0.0, 0.0], 1.4).unwrap();
        let lin = LinearizedOperator::new(op, &s).unwrap();
        for chi in &lin.basis().chi {
            assert!(lin.apply(chi).unwrap().max_abs() < 1e-14);
        }
        let h1 = smooth_micro(&lin, &[1.0, -0.5, 0.3, 0.2]);
        let h2 = smooth_micro(&lin, &[-0.2, 0.7, 0.1, -1.0]);
        let a = lin.weighted_dot(&lin.apply(&h1).unwrap(), &h2);
        let b = lin.weighted_dot(&lin.apply(&h2).unwrap(), &h1);
        assert!((a - b).abs() < 1e-12 * a.abs().max(b.abs()));
        assert!(lin.weighted_dot(&lin.apply(&h1).unwrap(), &h1) < 0.0);
        // conserves all five invariants
        let l1 = lin.apply(&h1).unwrap();
        let scale = g.integrate_with(|i| l1[i].abs());
        for poly in &lin.basis().poly {
            assert!(g.dot(&l1, poly).abs() < 1e-13 * scale);
        }
    }

    #[test]
    fn inverse_recovers_manufactured_solution() {
        let g = VelocityGrid::new(7.0, 12).unwrap();
        let op = Arc::new(CollisionOperator::new(&g, KernelParams::default()).unwrap());
        let lin = LinearizedOperator::new(op, &GasState::reference()).unwrap();
        let g0 = smooth_micro(&lin, &[0.4, 1.0, -0.3, 0.5]);
        let h = lin.apply(&g0).unwrap();
        let opts = InverseOptions {
            tol: 1e-10,
            ..InverseOptions::default()
        };
        let sol = lin.invert_micro(&h, &opts).unwrap();
        let d = sol.g.sub(&g0);
        assert!(lin.weighted_dot(&d, &d).sqrt() < 1e-7 * lin.weighted_dot(&g0, &g0).sqrt());
        assert!(sol.residual < 1e-9);
        let zero = lin
            .invert_micro(&GridFunction::zeros(g.len()), &opts)
            .unwrap();
        assert_eq!(zero.g.max_abs(), 0.0);
        assert!(matches!(
            lin.invert_micro(lin.maxwellian(), &opts),
            Err(Error::NotMicroscopic(_))
        ));
    }
}
