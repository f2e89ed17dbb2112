//! Smooth approximate 3-rarefaction waves.
//!
//! The inviscid Burgers equation with `tanh` data of width `delta` is solved
//! exactly by characteristics, and the solution is lifted onto the
//! 3-rarefaction curve by requiring `lambda3(rho, u1, S*) = omega`.
//! All derivatives are analytic (implicit differentiation through the foot
//! point of the characteristic).

use std::io::Write;

use crate::error::{Error, Result};
use crate::euler::{riemann_rarefaction, GasState, RarefactionCurve, RiemannData, R_GAS};
use crate::numerics::{newton_bisect, simpson};

/// Burgers data: transition width and the two far-field speeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveParams {
    pub delta: f64,
    pub omega_minus: f64,
    pub omega_plus: f64,
}

impl WaveParams {
    pub fn new(delta: f64, omega_minus: f64, omega_plus: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Config(format!(
                "wave width must be positive, got {delta:e}"
            )));
        }
        if !(omega_minus < omega_plus) {
            return Err(Error::Config(format!(
                "need omega- < omega+, got {omega_minus} and {omega_plus}"
            )));
        }
        Ok(WaveParams {
            delta,
            omega_minus,
            omega_plus,
        })
    }

    fn mid(&self) -> f64 {
        0.5 * (self.omega_plus + self.omega_minus)
    }

    fn half(&self) -> f64 {
        0.5 * (self.omega_plus - self.omega_minus)
    }

    /// Initial profile and its first two derivatives at `x`.
    fn init_jet(&self, x: f64) -> (f64, f64, f64) {
        let z = x / self.delta;
        let th = z.tanh();
        let ch = z.cosh();
        let sech2 = if ch.is_finite() { 1.0 / (ch * ch) } else { 0.0 };
        let a = self.half();
        (
            self.mid() + a * th,
            a / self.delta * sech2,
            -2.0 * a / (self.delta * self.delta) * sech2 * th,
        )
    }
}

/// Initial Burgers profile `(w+ + w-)/2 + (w+ - w-)/2 tanh(x / delta)`.
pub fn burgers_init(p: &WaveParams, x: f64) -> f64 {
    p.init_jet(x).0
}

/// Value of the Burgers solution with first and second derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurgersValue {
    pub value: f64,
    pub dx: f64,
    pub dt: f64,
    pub dxx: f64,
    pub dxt: f64,
    pub dtt: f64,
    /// Foot point of the characteristic through `(t, x)`.
    pub foot: f64,
}

impl BurgersValue {
    fn from_foot(p: &WaveParams, t: f64, x0: f64) -> Self {
        let (w, w1, w2) = p.init_jet(x0);
        let jac = 1.0 + t * w1;
        let dx = w1 / jac;
        let dxx = w2 / (jac * jac * jac);
        let dt = -w * dx;
        let dxt = -dx * dx - w * dxx;
        let dtt = -dt * dx - w * dxt;
        BurgersValue {
            value: w,
            dx,
            dt,
            dxx,
            dxt,
            dtt,
            foot: x0,
        }
    }
}

/// Solves the Burgers problem at `(t, x)` by locating the characteristic foot point.
pub fn burgers_eval(p: &WaveParams, t: f64, x: f64) -> Result<BurgersValue> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("negative time {t:e}")));
    }
    if t == 0.0 {
        return Ok(BurgersValue::from_foot(p, 0.0, x));
    }
    // small margin so rounding at the saturated ends cannot break the bracket
    let margin = 1e-9 * (1.0 + x.abs() + t * p.omega_plus.abs().max(p.omega_minus.abs()));
    let lo = x - p.omega_plus * t - margin;
    let hi = x - p.omega_minus * t + margin;
    let tol = 1e-13 * (1.0 + x.abs());
    let x0 = newton_bisect(
        "characteristic foot point",
        |x0| {
            let (w, w1, _) = p.init_jet(x0);
            (x0 + t * w - x, 1.0 + t * w1)
        },
        lo,
        hi,
        tol,
    )?;
    Ok(BurgersValue::from_foot(p, t, x0))
}

/// A scalar field with derivatives up to second order in `(t, x)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub x: f64,
    pub t: f64,
    pub xx: f64,
    pub xt: f64,
    pub tt: f64,
}

/// Smooth wave state with derivatives of `(rho, u1, theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveSample {
    pub state: GasState,
    pub rho: Jet,
    pub u1: Jet,
    pub theta: Jet,
    pub omega: BurgersValue,
}

/// The smooth approximate 3-rarefaction wave for given Riemann data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothWave {
    pub params: WaveParams,
    pub data: RiemannData,
    curve: RarefactionCurve,
    s_minus: f64,
    s_plus: f64,
}

impl SmoothWave {
    pub fn new(data: &RiemannData, delta: f64) -> Result<Self> {
        let (wm, wp) = data.fan_edges();
        let params = WaveParams::new(delta, wm, wp)?;
        let curve = *data.curve();
        Ok(SmoothWave {
            params,
            data: *data,
            curve,
            s_minus: data.left.rho.cbrt(),
            s_plus: data.right.rho.cbrt(),
        })
    }

    /// Same far-field data with a different transition width.
    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::new(&self.data, delta)
    }

    pub fn left(&self) -> &GasState {
        &self.data.left
    }

    pub fn right(&self) -> &GasState {
        &self.data.right
    }

    /// Frozen entropy `S*`.
    pub fn s_star(&self) -> f64 {
        self.curve.s_star()
    }

    pub fn curve(&self) -> &RarefactionCurve {
        &self.curve
    }

    /// Lifts a Burgers value onto the rarefaction curve.
    pub fn lift(&self, om: BurgersValue) -> WaveSample {
        let c = self.curve.scale();
        let alpha = 1.0 / (4.0 / 3.0 * 15f64.sqrt() * c);
        let mut s = self.curve.cbrt_for_speed(om.value);
        let slack = 1e-12 * (1.0 + self.s_plus);
        if s < self.s_minus - slack || s > self.s_plus + slack {
            log::warn!("Burgers value {} outside the fan, clamping", om.value);
        }
        s = s.clamp(self.s_minus, self.s_plus);
        let (sx, st) = (alpha * om.dx, alpha * om.dt);
        let (sxx, sxt, stt) = (alpha * om.dxx, alpha * om.dxt, alpha * om.dtt);

        let rho = Jet {
            v: s * s * s,
            x: 3.0 * s * s * sx,
            t: 3.0 * s * s * st,
            xx: 6.0 * s * sx * sx + 3.0 * s * s * sxx,
            xt: 6.0 * s * sx * st + 3.0 * s * s * sxt,
            tt: 6.0 * s * st * st + 3.0 * s * s * stt,
        };
        let k = 15f64.sqrt() * c;
        let u1 = Jet {
            v: self.curve.invariant() + k * s,
            x: k * sx,
            t: k * st,
            xx: k * sxx,
            xt: k * sxt,
            tt: k * stt,
        };
        let q = 1.5 * c * c;
        let theta = Jet {
            v: q * s * s,
            x: 2.0 * q * s * sx,
            t: 2.0 * q * s * st,
            xx: 2.0 * q * (sx * sx + s * sxx),
            xt: 2.0 * q * (sx * st + s * sxt),
            tt: 2.0 * q * (st * st + s * stt),
        };
        let state = if s == self.s_minus {
            self.data.left
        } else if s == self.s_plus {
            self.data.right
        } else {
            GasState {
                rho: rho.v,
                u: [u1.v, 0.0, 0.0],
                theta: theta.v,
            }
        };
        WaveSample {
            state,
            rho,
            u1,
            theta,
            omega: om,
        }
    }

    /// Wave state with analytic derivatives at `(t, x)`.
    pub fn sample(&self, t: f64, x: f64) -> Result<WaveSample> {
        Ok(self.lift(burgers_eval(&self.params, t, x)?))
    }

    /// Wave state at `(t, x)`.
    pub fn eval(&self, t: f64, x: f64) -> Result<GasState> {
        Ok(self.sample(t, x)?.state)
    }

    /// Sample along the characteristic with foot point `x0`.
    pub fn sample_foot(&self, t: f64, x0: f64) -> WaveSample {
        self.lift(BurgersValue::from_foot(&self.params, t, x0))
    }

    /// Position reached at time `t` by the characteristic from `x0`.
    pub fn characteristic(&self, t: f64, x0: f64) -> f64 {
        x0 + t * burgers_init(&self.params, x0)
    }
}

/// Finite-difference residuals of the four smooth-Euler equations
/// (mass, normal momentum, transverse momentum, internal energy).
pub fn euler_residual(w: &SmoothWave, t: f64, x: f64, h: f64) -> Result<[f64; 4]> {
    let fields = |s: &GasState| {
        let p = R_GAS * s.rho * s.theta;
        let m = s.rho * s.u[0];
        (
            [s.rho, m, s.rho * s.u[1], s.rho * s.theta],
            [m, m * s.u[0] + p, m * s.u[1], m * s.theta],
            p,
            s.u[0],
        )
    };
    let c = fields(&w.eval(t, x)?);
    let xp = fields(&w.eval(t, x + h)?);
    let xm = fields(&w.eval(t, x - h)?);
    let dt: [f64; 4] = if t >= h {
        let tp = fields(&w.eval(t + h, x)?).0;
        let tm = fields(&w.eval(t - h, x)?).0;
        std::array::from_fn(|k| (tp[k] - tm[k]) / (2.0 * h))
    } else {
        let t1 = fields(&w.eval(t + h, x)?).0;
        let t2 = fields(&w.eval(t + 2.0 * h, x)?).0;
        std::array::from_fn(|k| (-3.0 * c.0[k] + 4.0 * t1[k] - t2[k]) / (2.0 * h))
    };
    let dx: [f64; 4] = std::array::from_fn(|k| (xp.1[k] - xm.1[k]) / (2.0 * h));
    let ux = (xp.3 - xm.3) / (2.0 * h);
    Ok([
        dt[0] + dx[0],
        dt[1] + dx[1],
        dt[2] + dx[2],
        dt[3] + dx[3] + c.2 * ux,
    ])
}

/// Which field a decay row refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayField {
    /// The Burgers solution itself.
    Omega,
    /// The lifted fluid vector `(rho, u1, theta)`.
    Wave,
}

/// One row of a derivative-decay table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRow {
    pub t: f64,
    /// Exponent of the norm; `f64::INFINITY` for the sup norm.
    pub p: f64,
    /// Derivative order (1 or 2).
    pub j: u32,
    pub value: f64,
    pub bound_shape: f64,
    pub ratio: f64,
}

/// Derivative norms of the Burgers solution and of the lifted wave.
#[derive(Debug, Clone, Default)]
pub struct DecayReport {
    pub omega: Vec<DecayRow>,
    pub wave: Vec<DecayRow>,
}

impl DecayReport {
    pub fn rows(&self, field: DecayField) -> &[DecayRow] {
        match field {
            DecayField::Omega => &self.omega,
            DecayField::Wave => &self.wave,
        }
    }

    /// Largest implied constant (computed / bound shape) for a field, order and exponent.
    pub fn implied_constant(&self, field: DecayField, j: u32, p: f64) -> f64 {
        self.rows(field)
            .iter()
            .filter(|r| r.j == j && r.p == p)
            .map(|r| r.ratio)
            .fold(0.0, f64::max)
    }
}

const FOOT_SAMPLES: usize = 40_001;
const FOOT_HALF_WIDTH: f64 = 40.0;

fn lp_over_feet<F>(w: &SmoothWave, t: f64, p: f64, mut integrand: F) -> f64
where
    F: FnMut(&WaveSample) -> f64,
{
    let span = FOOT_HALF_WIDTH * w.params.delta;
    let h = 2.0 * span / (FOOT_SAMPLES - 1) as f64;
    if p.is_infinite() {
        (0..FOOT_SAMPLES)
            .map(|i| integrand(&w.sample_foot(t, -span + i as f64 * h)).abs())
            .fold(0.0, f64::max)
    } else {
        // x = x0 + t omega0(x0), so dx = (1 + t omega0'(x0)) dx0
        let vals: Vec<f64> = (0..FOOT_SAMPLES)
            .map(|i| {
                let x0 = -span + i as f64 * h;
                let s = w.sample_foot(t, x0);
                let (_, w1, _) = w.params.init_jet(x0);
                integrand(&s).abs().powf(p) * (1.0 + t * w1)
            })
            .collect();
        simpson(&vals, h).powf(1.0 / p)
    }
}

fn decay_bound(w: &SmoothWave, t: f64, p: f64, j: u32) -> f64 {
    let d = w.params.delta;
    let ip = if p.is_infinite() { 0.0 } else { 1.0 / p };
    if j == 1 {
        (w.params.omega_plus - w.params.omega_minus).powf(ip) * (d + t).powf(-1.0 + ip)
    } else {
        d.powf(-(j as f64) + 1.0 + ip) / (d + t)
    }
}

/// `L^p` norms of first and second spatial derivatives at the requested
/// times, alongside the decay shapes `(w+ - w-)^{1/p} (delta+t)^{-1+1/p}` and
/// `delta^{-j+1+1/p} (delta+t)^{-1}`.
pub fn decay_report(w: &SmoothWave, times: &[f64], p_exponents: &[f64]) -> Result<DecayReport> {
    let mut report = DecayReport::default();
    for &t in times {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("decay report needs t > 0, got {t}")));
        }
        for &p in p_exponents {
            if !(p >= 1.0) {
                return Err(Error::Domain(format!(
                    "norm exponent must be >= 1, got {p}"
                )));
            }
            for j in 1..=2u32 {
                let om = lp_over_feet(w, t, p, |s| if j == 1 { s.omega.dx } else { s.omega.dxx });
                let wave = lp_over_feet(w, t, p, |s| {
                    if j == 1 {
                        (s.rho.x.powi(2) + s.u1.x.powi(2) + s.theta.x.powi(2)).sqrt()
                    } else {
                        (s.rho.xx.powi(2) + s.u1.xx.powi(2) + s.theta.xx.powi(2)).sqrt()
                    }
                });
                let b = decay_bound(w, t, p, j);
                report.omega.push(DecayRow {
                    t,
                    p,
                    j,
                    value: om,
                    bound_shape: b,
                    ratio: om / b,
                });
                report.wave.push(DecayRow {
                    t,
                    p,
                    j,
                    value: wave,
                    bound_shape: b,
                    ratio: wave / b,
                });
            }
        }
    }
    Ok(report)
}

/// Sup-distance between the smooth wave and the Riemann fan at time `t`,
/// together with the shape `delta t^{-1} (ln(1+t) + |ln delta|)`.
pub fn riemann_gap(w: &SmoothWave, t: f64) -> Result<(f64, f64)> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("gap needs t > 0, got {t}")));
    }
    let d = w.params.delta;
    let gap_at = |x0: f64| {
        let s = w.sample_foot(t, x0);
        let x = w.characteristic(t, x0);
        s.state.max_abs_diff(&riemann_rarefaction(&w.data, x / t))
    };
    let span = FOOT_HALF_WIDTH * d;
    let n = FOOT_SAMPLES;
    let h = 2.0 * span / (n - 1) as f64;
    let mut best = (0.0, 0usize);
    for i in 0..n {
        let g = gap_at(-span + i as f64 * h);
        if g > best.0 {
            best = (g, i);
        }
    }
    // local ternary refinement around the best sample
    let (mut a, mut b) = (
        -span + (best.1.saturating_sub(1)) as f64 * h,
        -span + ((best.1 + 1).min(n - 1)) as f64 * h,
    );
    for _ in 0..80 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if gap_at(m1) < gap_at(m2) {
            a = m1;
        } else {
            b = m2;
        }
    }
    let gap = best.0.max(gap_at(0.5 * (a + b)));
    let shape = d / t * ((1.0 + t).ln() + d.ln().abs());
    Ok((gap, shape))
}

/// Writes decay rows as CSV with columns `t,p,j,value,bound_shape,ratio`.
pub fn write_decay_csv<W: Write>(out: W, rows: &[DecayRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["t", "p", "j", "value", "bound_shape", "ratio"])?;
    for r in rows {
        wtr.write_record([
            crate::fmt17(r.t),
            crate::fmt17(r.p),
            r.j.to_string(),
            crate::fmt17(r.value),
            crate::fmt17(r.bound_shape),
            crate::fmt17(r.ratio),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes gap rows `(t, delta, gap, bound_shape, ratio)` in the same CSV layout
/// (`p` holds `delta`, `j` is 0).
pub fn write_gap_csv<W: Write>(out: W, rows: &[(f64, f64, f64, f64)]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["t", "delta", "gap", "bound_shape", "ratio"])?;
    for &(t, delta, gap, shape) in rows {
        wtr.write_record([
            crate::fmt17(t),
            crate::fmt17(delta),
            crate::fmt17(gap),
            crate::fmt17(shape),
            crate::fmt17(gap / shape),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
