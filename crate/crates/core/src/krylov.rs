//! Matrix-free Krylov solvers in a caller-supplied inner product.

use crate::error::{Error, Result};

/// Outcome of an iterative solve.
#[derive(Debug, Clone)]
pub struct KrylovResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final relative residual `||b - A x|| / ||b||`.
    pub residual: f64,
    /// Relative residual after every iteration.
    pub history: Vec<f64>,
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Preconditioned conjugate gradients for an operator that is symmetric
/// positive definite in the inner product `dot`.
pub fn pcg<A, P, D>(
    mut apply: A,
    mut precond: P,
    dot: D,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<KrylovResult>
where
    A: FnMut(&[f64]) -> Vec<f64>,
    P: FnMut(&[f64]) -> Vec<f64>,
    D: Fn(&[f64], &[f64]) -> f64,
{
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; b.len()];
    if bnorm == 0.0 {
        return Ok(KrylovResult {
            x,
            iterations: 0,
            residual: 0.0,
            history: vec![],
        });
    }
    let mut r = b.to_vec();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut history = Vec::new();
    for it in 1..=max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NonConvergence {
                iterations: it,
                residual: history.last().copied().unwrap_or(1.0),
                history,
            });
        }
        let alpha = rz / pap;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &ap);
        let rel = dot(&r, &r).sqrt() / bnorm;
        history.push(rel);
        if rel <= tol {
            return Ok(KrylovResult {
                x,
                iterations: it,
                residual: rel,
                history,
            });
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: history.last().copied().unwrap_or(1.0),
        history,
    })
}

/// Restarted GMRES with right preconditioning. The residual is measured in
/// the norm induced by `dot`; `iterations` counts operator applications.
pub fn gmres<A, P, D>(
    mut apply: A,
    mut precond: P,
    dot: D,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    restart: usize,
) -> Result<KrylovResult>
where
    A: FnMut(&[f64]) -> Vec<f64>,
    P: FnMut(&[f64]) -> Vec<f64>,
    D: Fn(&[f64], &[f64]) -> f64,
{
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(KrylovResult {
            x,
            iterations: 0,
            residual: 0.0,
            history: vec![],
        });
    }
    let m = restart.max(1);
    let mut history = Vec::new();
    let mut total = 0usize;
    let mut r = b.to_vec();
    loop {
        let beta = dot(&r, &r).sqrt();
        if beta / bnorm <= tol {
            return Ok(KrylovResult {
                x,
                iterations: total,
                residual: beta / bnorm,
                history,
            });
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut hcol: Vec<Vec<f64>> = Vec::with_capacity(m);
        let (mut cs, mut sn): (Vec<f64>, Vec<f64>) = (Vec::with_capacity(m), Vec::with_capacity(m));
        let mut g = vec![beta];
        let mut k_used = 0;
        for k in 0..m {
            if total >= max_iter {
                break;
            }
            let z = precond(&v[k]);
            let mut w = apply(&z);
            total += 1;
            // modified Gram-Schmidt with one reorthogonalization pass
            let mut h = vec![0.0; k + 2];
            for _ in 0..2 {
                for (i, vi) in v.iter().enumerate() {
                    let c = dot(&w, vi);
                    h[i] += c;
                    axpy(&mut w, -c, vi);
                }
            }
            let hn = dot(&w, &w).sqrt();
            h[k + 1] = hn;
            for i in 0..k {
                let t = cs[i] * h[i] + sn[i] * h[i + 1];
                h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
                h[i] = t;
            }
            let rho = (h[k] * h[k] + h[k + 1] * h[k + 1]).sqrt();
            let (c, s) = if rho == 0.0 {
                (1.0, 0.0)
            } else {
                (h[k] / rho, h[k + 1] / rho)
            };
            cs.push(c);
            sn.push(s);
            h[k] = rho;
            h[k + 1] = 0.0;
            g.push(-s * g[k]);
            g[k] *= c;
            hcol.push(h);
            zs.push(z);
            k_used = k + 1;
            let rel = g[k + 1].abs() / bnorm;
            history.push(rel);
            if rel <= tol || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|wi| wi / hn).collect());
        }
        // back substitution for the least-squares coefficients
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= hcol[j][i] * y[j];
            }
            y[i] = s / hcol[i][i];
        }
        for (yi, zi) in y.iter().zip(&zs) {
            axpy(&mut x, *yi, zi);
        }
        // true residual at restart
        let ax = apply(&x);
        r = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let rel = dot(&r, &r).sqrt() / bnorm;
        if rel <= tol {
            return Ok(KrylovResult {
                x,
                iterations: total,
                residual: rel,
                history,
            });
        }
        if total >= max_iter || k_used == 0 {
            return Err(Error::NonConvergence {
                iterations: total,
                residual: rel,
                history,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| {
                let l = if i > 0 { x[i - 1] } else { 0.0 };
                let r = if i + 1 < n { x[i + 1] } else { 0.0 };
                2.0 * x[i] - l - r + 0.01 * x[i]
            })
            .collect()
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn cg_solves_spd_system() {
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let r = pcg(laplacian, |r| r.to_vec(), dot, &b, 1e-10, 500).unwrap();
        let ax = laplacian(&r.x);
        let err = ax
            .iter()
            .zip(&b)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-8);
    }

    #[test]
    fn gmres_solves_nonsymmetric_system() {
        let apply = |x: &[f64]| {
            let mut y = laplacian(x);
            for i in 1..x.len() {
                y[i] += 0.3 * x[i - 1];
            }
            y
        };
        let b: Vec<f64> = (0..60).map(|i| 1.0 + (i % 7) as f64).collect();
        let r = gmres(
            apply,
            |r| r.iter().map(|v| v / 2.01).collect(),
            dot,
            &b,
            1e-10,
            600,
            20,
        )
        .unwrap();
        let ax = apply(&r.x);
        let err = ax
            .iter()
            .zip(&b)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
        assert!(r.residual <= 1e-10);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let r = gmres(laplacian, |r| r.to_vec(), dot, &[0.0; 5], 1e-8, 10, 5).unwrap();
        assert_eq!(r.x, vec![0.0; 5]);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn stall_reports_history() {
        let b = vec![1.0; 40];
        match gmres(laplacian, |r| r.to_vec(), dot, &b, 1e-14, 3, 3) {
            Err(Error::NonConvergence {
                iterations,
                history,
                ..
            }) => {
                assert_eq!(iterations, 3);
                assert_eq!(history.len(), 3);
            }
            other => panic!("{other:?}"),
        }
    }
}
