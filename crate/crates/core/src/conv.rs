//! Discrete convolutions with the Landau kernel.
//!
//! The sums `sum_b phi(v_a - v_b) f(v_b) w_b` over node pairs are evaluated
//! exactly (up to round-off) as zero-padded cyclic convolutions of size `2N`
//! per axis. The kernel is even, so its spectrum is real and two real fields
//! can share one complex transform.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::velocity::VelocityGrid;

/// Storage order of the six independent entries of a symmetric 3x3 tensor.
pub const SYM_PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

/// Position of `(i, j)` in [`SYM_PAIRS`].
pub fn sym_index(i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    match (a, b) {
        (0, 0) => 0,
        (0, 1) => 1,
        (0, 2) => 2,
        (1, 1) => 3,
        (1, 2) => 4,
        _ => 5,
    }
}

/// `(I - z z^T / |z|^2) |z|^{gamma+2}`; the coincident point `z = 0` gets
/// `(2/3) I reg^{gamma+2}` when `reg > 0` and zero otherwise.
pub fn kernel_entries(z: [f64; 3], gamma: f64, reg: f64) -> [f64; 6] {
    let r2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
    if r2 == 0.0 {
        if reg > 0.0 {
            let d = 2.0 / 3.0 * reg.powf(gamma + 2.0);
            return [d, 0.0, 0.0, d, 0.0, d];
        }
        return [0.0; 6];
    }
    let mag = if reg > 0.0 {
        (r2 + reg * reg).powf(0.5 * (gamma + 2.0))
    } else {
        r2.powf(0.5 * (gamma + 2.0))
    };
    SYM_PAIRS.map(|(i, j)| {
        let delta = if i == j { 1.0 } else { 0.0 };
        (delta - z[i] * z[j] / r2) * mag
    })
}

/// In-place 3-D FFT on a `P^3` cube, skipping lines that are known to be
/// zero (forward) or whose output is discarded (inverse).
struct Fft3 {
    p: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft3 {
    fn new(p: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft3 {
            p,
            fwd: planner.plan_fft_forward(p),
            inv: planner.plan_fft_inverse(p),
        }
    }

    /// Forward transform of data supported on `[0, n)^3`.
    fn forward(&self, buf: &mut [Complex<f64>], n: usize) {
        let p = self.p;
        // axis 2: contiguous lines
        for i in 0..n {
            for j in 0..n {
                let s = (i * p + j) * p;
                self.fwd.process(&mut buf[s..s + p]);
            }
        }
        // axis 1
        let mut tmp = vec![Complex::default(); p * p];
        for i in 0..n {
            self.strided(buf, &mut tmp, i, 1, &*self.fwd);
        }
        // axis 0
        for j in 0..p {
            self.strided(buf, &mut tmp, j, 0, &*self.fwd);
        }
    }

    /// Inverse transform (unnormalized) whose output is only read on `[0, n)^3`.
    fn inverse(&self, buf: &mut [Complex<f64>], n: usize) {
        let p = self.p;
        let mut tmp = vec![Complex::default(); p * p];
        for j in 0..p {
            self.strided(buf, &mut tmp, j, 0, &*self.inv);
        }
        for i in 0..n {
            self.strided(buf, &mut tmp, i, 1, &*self.inv);
        }
        for i in 0..n {
            for j in 0..n {
                let s = (i * p + j) * p;
                self.inv.process(&mut buf[s..s + p]);
            }
        }
    }

    /// Transforms the `p` lines along `axis` (0 or 1) that share the fixed
    /// index `fixed` on the other leading axis.
    fn strided(
        &self,
        buf: &mut [Complex<f64>],
        tmp: &mut [Complex<f64>],
        fixed: usize,
        axis: usize,
        fft: &dyn Fft<f64>,
    ) {
        let p = self.p;
        let at = |m: usize, k: usize| match axis {
            0 => (m * p + fixed) * p + k,
            _ => (fixed * p + m) * p + k,
        };
        for k in 0..p {
            for m in 0..p {
                tmp[k * p + m] = buf[at(m, k)];
            }
        }
        fft.process(tmp);
        for k in 0..p {
            for m in 0..p {
                buf[at(m, k)] = tmp[k * p + m];
            }
        }
    }
}

/// Precomputed kernel spectra for one grid and kernel.
pub struct ConvolutionEngine {
    n: usize,
    p: usize,
    fft: Fft3,
    weights: Vec<f64>,
    spectra: [Vec<f64>; 6],
}

impl std::fmt::Debug for ConvolutionEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConvolutionEngine")
            .field("n", &self.n)
            .field("p", &self.p)
            .finish()
    }
}

impl ConvolutionEngine {
    /// `reg` is the absolute regularization length of the coincident point.
    pub fn new(g: &VelocityGrid, gamma: f64, reg: f64) -> Self {
        let n = g.n_per_axis();
        let p = 2 * n;
        let h = g.spacing();
        let fft = Fft3::new(p);
        let offset = |m: usize| -> Option<f64> {
            if m < n {
                Some(m as f64 * h)
            } else if m > n {
                Some((m as f64 - p as f64) * h)
            } else {
                None
            }
        };
        let mut cubes: Vec<Vec<Complex<f64>>> = (0..6)
            .map(|_| vec![Complex::default(); p * p * p])
            .collect();
        for m0 in 0..p {
            for m1 in 0..p {
                for m2 in 0..p {
                    let (Some(z0), Some(z1), Some(z2)) = (offset(m0), offset(m1), offset(m2))
                    else {
                        continue;
                    };
                    let e = kernel_entries([z0, z1, z2], gamma, reg);
                    let idx = (m0 * p + m1) * p + m2;
                    for c in 0..6 {
                        cubes[c][idx] = Complex::new(e[c], 0.0);
                    }
                }
            }
        }
        let spectra: Vec<Vec<f64>> = cubes
            .into_iter()
            .map(|mut c| {
                fft.forward(&mut c, p);
                c.iter().map(|z| z.re).collect()
            })
            .collect();
        let weights = (0..g.len()).map(|i| g.weight(i)).collect();
        ConvolutionEngine {
            n,
            p,
            fft,
            weights,
            spectra: spectra.try_into().expect("six spectra"),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn pack(&self, a: &[f64], b: Option<&[f64]>) -> Vec<Complex<f64>> {
        let (n, p) = (self.n, self.p);
        let mut buf = vec![Complex::default(); p * p * p];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let src = (i * n + j) * n + k;
                    let w = self.weights[src];
                    let im = b.map_or(0.0, |b| b[src] * w);
                    buf[(i * p + j) * p + k] = Complex::new(a[src] * w, im);
                }
            }
        }
        self.fft.forward(&mut buf, n);
        buf
    }

    /// Splits the transform of `x + i y` (x, y real) into the two spectra.
    fn split(&self, z: &[Complex<f64>]) -> (Vec<Complex<f64>>, Vec<Complex<f64>>) {
        let p = self.p;
        let neg = |m: usize| if m == 0 { 0 } else { p - m };
        let mut xs = vec![Complex::default(); z.len()];
        let mut ys = vec![Complex::default(); z.len()];
        for a in 0..p {
            for b in 0..p {
                for c in 0..p {
                    let i = (a * p + b) * p + c;
                    let j = (neg(a) * p + neg(b)) * p + neg(c);
                    let zc = z[j].conj();
                    xs[i] = (z[i] + zc) * 0.5;
                    let d = z[i] - zc;
                    // (z - conj z(-k)) / (2i)
                    ys[i] = Complex::new(d.im * 0.5, -d.re * 0.5);
                }
            }
        }
        (xs, ys)
    }

    /// Inverts a spectrum `X + iY` of two real fields and writes both.
    fn unpack(&self, mut buf: Vec<Complex<f64>>, x: &mut [f64], y: Option<&mut [f64]>) {
        let (n, p) = (self.n, self.p);
        self.fft.inverse(&mut buf, n);
        let scale = 1.0 / (p * p * p) as f64;
        let mut y = y;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let v = buf[(i * p + j) * p + k];
                    let dst = (i * n + j) * n + k;
                    x[dst] = v.re * scale;
                    if let Some(y) = y.as_deref_mut() {
                        y[dst] = v.im * scale;
                    }
                }
            }
        }
    }

    fn combine<F>(&self, f: F) -> Vec<Complex<f64>>
    where
        F: Fn(usize) -> Complex<f64> + Sync + Send,
    {
        (0..self.p * self.p * self.p)
            .into_par_iter()
            .map(f)
            .collect()
    }

    /// Tensor convolution `a_ij = phi_ij * f` in [`SYM_PAIRS`] order.
    pub fn tensor(&self, f: &[f64]) -> [Vec<f64>; 6] {
        let len = self.n * self.n * self.n;
        let fh = self.pack(f, None);
        let mut out: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; len]);
        let s = &self.spectra;
        for pair in 0..3 {
            let (c0, c1) = (2 * pair, 2 * pair + 1);
            let buf = self.combine(|i| {
                let z = fh[i];
                Complex::new(
                    z.re * s[c0][i] - z.im * s[c1][i],
                    z.im * s[c0][i] + z.re * s[c1][i],
                )
            });
            let (lo, hi) = out.split_at_mut(c1);
            self.unpack(buf, &mut lo[c0], Some(&mut hi[0]));
        }
        out
    }

    /// Tensor convolution of `f` together with the contracted vector
    /// `b_i = sum_j phi_ij * d_j`.
    pub fn tensor_and_vector(&self, f: &[f64], d: [&[f64]; 3]) -> ([Vec<f64>; 6], [Vec<f64>; 3]) {
        let len = self.n * self.n * self.n;
        let (fh, d0h) = self.split(&self.pack(f, Some(d[0])));
        let (d1h, d2h) = self.split(&self.pack(d[1], Some(d[2])));
        let s = &self.spectra;
        let mut a: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; len]);
        for pair in 0..3 {
            let (c0, c1) = (2 * pair, 2 * pair + 1);
            let buf = self.combine(|i| fh[i] * s[c0][i] + fh[i] * s[c1][i] * Complex::i());
            let (lo, hi) = a.split_at_mut(c1);
            self.unpack(buf, &mut lo[c0], Some(&mut hi[0]));
        }
        let bhat = |row: usize, i: usize| {
            d0h[i] * s[sym_index(row, 0)][i]
                + d1h[i] * s[sym_index(row, 1)][i]
                + d2h[i] * s[sym_index(row, 2)][i]
        };
        let mut b: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; len]);
        {
            let buf = self.combine(|i| bhat(0, i) + bhat(1, i) * Complex::i());
            let (lo, hi) = b.split_at_mut(1);
            self.unpack(buf, &mut lo[0], Some(&mut hi[0]));
        }
        let buf = self.combine(|i| bhat(2, i));
        self.unpack(buf, &mut b[2], None);
        (a, b)
    }

    /// Contracted vector convolution `b_i = sum_j phi_ij * d_j`.
    pub fn vector(&self, d: [&[f64]; 3]) -> [Vec<f64>; 3] {
        let len = self.n * self.n * self.n;
        let (d0h, d1h) = self.split(&self.pack(d[0], Some(d[1])));
        let d2h = self.pack(d[2], None);
        let s = &self.spectra;
        let bhat = |row: usize, i: usize| {
            d0h[i] * s[sym_index(row, 0)][i]
                + d1h[i] * s[sym_index(row, 1)][i]
                + d2h[i] * s[sym_index(row, 2)][i]
        };
        let mut b: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; len]);
        {
            let buf = self.combine(|i| bhat(0, i) + bhat(1, i) * Complex::i());
            let (lo, hi) = b.split_at_mut(1);
            self.unpack(buf, &mut lo[0], Some(&mut hi[0]));
        }
        let buf = self.combine(|i| bhat(2, i));
        self.unpack(buf, &mut b[2], None);
        b
    }
}

/// Reference `O(N^6)` evaluation of `phi_ij * f` by direct summation over node pairs.
pub fn direct_tensor(g: &VelocityGrid, f: &[f64], gamma: f64, reg: f64) -> [Vec<f64>; 6] {
    let len = g.len();
    let rows: Vec<[f64; 6]> = (0..len)
        .into_par_iter()
        .map(|a| {
            let va = g.node(a);
            let mut acc = [0.0; 6];
            for b in 0..len {
                let vb = g.node(b);
                let e = kernel_entries([va[0] - vb[0], va[1] - vb[1], va[2] - vb[2]], gamma, reg);
                let wf = g.weight(b) * f[b];
                for c in 0..6 {
                    acc[c] += e[c] * wf;
                }
            }
            acc
        })
        .collect();
    std::array::from_fn(|c| rows.iter().map(|r| r[c]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kernel_projector_properties() {
        let z = [0.3, -1.2, 0.7];
        let e = kernel_entries(z, -3.0, 0.0);
        let m = |i: usize, j: usize| e[sym_index(i, j)];
        let r = (z[0] * z[0] + z[1] * z[1] + z[2] * z[2]).sqrt();
        for i in 0..3 {
            let row: f64 = (0..3).map(|j| m(i, j) * z[j]).sum();
            assert!(row.abs() < 1e-15);
        }
        assert!((m(0, 0) + m(1, 1) + m(2, 2) - 2.0 / r).abs() < 1e-15);
        assert_eq!(kernel_entries([0.0; 3], -3.0, 0.0), [0.0; 6]);
        let reg = kernel_entries([0.0; 3], -3.0, 0.5);
        assert!((reg[0] - 2.0 / 3.0 * 2.0).abs() < 1e-15 && reg[1] == 0.0);
    }

    #[test]
    fn fft_matches_direct_sum() {
        let g = VelocityGrid::new(4.0, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f: Vec<f64> = (0..g.len()).map(|_| rng.gen::<f64>()).collect();
        for reg in [0.0, 0.3] {
            let eng = ConvolutionEngine::new(&g, -3.0, reg);
            let fast = eng.tensor(&f);
            let slow = direct_tensor(&g, &f, -3.0, reg);
            for c in 0..6 {
                for i in 0..g.len() {
                    assert!((fast[c][i] - slow[c][i]).abs() < 1e-11 * (1.0 + slow[c][i].abs()));
                }
            }
        }
    }

    #[test]
    fn packed_vector_matches_direct_sum() {
        let g = VelocityGrid::new(3.0, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut field = || -> Vec<f64> { (0..g.len()).map(|_| rng.gen::<f64>() - 0.5).collect() };
        let (f, d0, d1, d2) = (field(), field(), field(), field());
        let eng = ConvolutionEngine::new(&g, -2.5, 0.0);
        let (a, b) = eng.tensor_and_vector(&f, [&d0, &d1, &d2]);
        let b2 = eng.vector([&d0, &d1, &d2]);
        let af = direct_tensor(&g, &f, -2.5, 0.0);
        let ad: Vec<[Vec<f64>; 6]> = [&d0, &d1, &d2]
            .iter()
            .map(|d| direct_tensor(&g, d, -2.5, 0.0))
            .collect();
        for i in 0..g.len() {
            for c in 0..6 {
                assert!((a[c][i] - af[c][i]).abs() < 1e-12);
            }
            for row in 0..3 {
                let e: f64 = (0..3).map(|j| ad[j][sym_index(row, j)][i]).sum();
                assert!((b[row][i] - e).abs() < 1e-12);
                assert!((b2[row][i] - e).abs() < 1e-12);
            }
        }
    }
}
