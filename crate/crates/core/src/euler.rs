//! Exact structure of the 1-D compressible Euler system for a monatomic gas
//! with `p = R rho theta`, `R = 2/3` and internal energy `e = theta`.
//!
//! Only the 3-rarefaction family is provided. Along the 3-rarefaction curve
//! through a left state the entropy is frozen at `S*` and
//! `u1 - sqrt(15 k0) e^{S*/2} rho^{1/3}` is constant; with
//! `c = sqrt(k0 e^{S*})` this gives
//!
//! ```text
//! u1     = u1- + sqrt(15) c (rho^{1/3} - rho-^{1/3})
//! theta  = 3/2 c^2 rho^{2/3}
//! lambda3 = u1- - sqrt(15) c rho-^{1/3} + (4/3) sqrt(15) c rho^{1/3}
//! ```
//!
//! so the characteristic speed is affine in `rho^{1/3}` and the fan can be
//! inverted in closed form.

use std::f64::consts::{E, PI};

use crate::error::{Error, Result};

/// Gas constant, `p = R rho theta`.
pub const R_GAS: f64 = 2.0 / 3.0;

/// Entropy constant in `p = k0 rho^{5/3} exp(S)`.
pub const K0: f64 = 1.0 / (2.0 * PI * E);

/// The fixed constants of the model gas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasConstants {
    pub r: f64,
    pub k0: f64,
}

impl GasConstants {
    pub const STANDARD: GasConstants = GasConstants { r: R_GAS, k0: K0 };
}

impl Default for GasConstants {
    fn default() -> Self {
        Self::STANDARD
    }
}

/// Pointwise fluid state `(rho, u, theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasState {
    pub rho: f64,
    pub u: [f64; 3],
    pub theta: f64,
}

impl GasState {
    pub fn new(rho: f64, u: [f64; 3], theta: f64) -> Result<Self> {
        let s = GasState { rho, u, theta };
        s.validate()?;
        Ok(s)
    }

    /// State with only a normal velocity component.
    pub fn planar(rho: f64, u1: f64, theta: f64) -> Result<Self> {
        Self::new(rho, [u1, 0.0, 0.0], theta)
    }

    /// The reference state `(1, 0, 3/2)` whose Maxwellian is the global `mu`.
    pub fn reference() -> Self {
        GasState {
            rho: 1.0,
            u: [0.0; 3],
            theta: 1.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite =
            self.rho.is_finite() && self.theta.is_finite() && self.u.iter().all(|c| c.is_finite());
        if !finite || self.rho <= 0.0 || self.theta <= 0.0 {
            return Err(Error::InvalidState(format!(
                "rho={:e}, u={:?}, theta={:e}",
                self.rho, self.u, self.theta
            )));
        }
        Ok(())
    }

    pub fn pressure(&self) -> f64 {
        pressure(self)
    }

    pub fn entropy(&self) -> f64 {
        entropy(self)
    }

    pub fn lambda3(&self) -> f64 {
        lambda3(self)
    }

    /// Largest absolute difference over the components `(rho, u1, u2, u3, theta)`.
    pub fn max_abs_diff(&self, other: &GasState) -> f64 {
        let mut d = (self.rho - other.rho)
            .abs()
            .max((self.theta - other.theta).abs());
        for i in 0..3 {
            d = d.max((self.u[i] - other.u[i]).abs());
        }
        d
    }
}

pub fn pressure(s: &GasState) -> f64 {
    R_GAS * s.rho * s.theta
}

/// Macroscopic entropy `S = -2/3 ln rho + ln(4/3 pi theta) + 1`.
pub fn entropy(s: &GasState) -> f64 {
    -2.0 / 3.0 * s.rho.ln() + (4.0 / 3.0 * PI * s.theta).ln() + 1.0
}

/// `p_rho` at fixed entropy, `5/3 k0 rho^{2/3} e^S = 5/3 p / rho`.
pub fn sound_speed_squared(s: &GasState) -> f64 {
    5.0 / 3.0 * R_GAS * s.theta
}

/// Largest characteristic speed `u1 + sqrt(p_rho)`.
pub fn lambda3(s: &GasState) -> f64 {
    s.u[0] + sound_speed_squared(s).sqrt()
}

/// The 3-rarefaction curve through a left state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RarefactionCurve {
    left: GasState,
    s_star: f64,
    /// `sqrt(k0 e^{S*})`
    c: f64,
    /// `u1- - sqrt(15) c rho-^{1/3}`, the constant Riemann invariant.
    invariant: f64,
}

impl RarefactionCurve {
    pub fn through(left: &GasState) -> Result<Self> {
        left.validate()?;
        let s_star = entropy(left);
        let c = (K0 * s_star.exp()).sqrt();
        let invariant = left.u[0] - 15f64.sqrt() * c * left.rho.cbrt();
        Ok(RarefactionCurve {
            left: *left,
            s_star,
            c,
            invariant,
        })
    }

    pub fn left(&self) -> &GasState {
        &self.left
    }

    /// Frozen entropy `S*` of the left state.
    pub fn s_star(&self) -> f64 {
        self.s_star
    }

    /// The constant `u1 - sqrt(15 k0) e^{S/2} rho^{1/3}` along the curve.
    pub fn invariant(&self) -> f64 {
        self.invariant
    }

    /// `sqrt(k0 e^{S*})`.
    pub fn scale(&self) -> f64 {
        self.c
    }

    /// State on the curve parameterised by `s = rho^{1/3}`; no domain check.
    pub(crate) fn state_at_cbrt(&self, s: f64) -> GasState {
        let c = self.c;
        GasState {
            rho: s * s * s,
            u: [self.invariant + 15f64.sqrt() * c * s, 0.0, 0.0],
            theta: 1.5 * c * c * s * s,
        }
    }

    /// `rho^{1/3}` for which `lambda3` equals `speed`; no domain check.
    pub(crate) fn cbrt_for_speed(&self, speed: f64) -> f64 {
        (speed - self.invariant) / (4.0 / 3.0 * 15f64.sqrt() * self.c)
    }

    /// State on the curve with density `rho >= rho-`.
    pub fn state_at(&self, rho: f64) -> Result<GasState> {
        if !(rho >= self.left.rho) || !rho.is_finite() {
            return Err(Error::Domain(format!(
                "density {rho:e} below left density {:e} is not on the 3-rarefaction branch",
                self.left.rho
            )));
        }
        if rho == self.left.rho {
            return Ok(GasState {
                u: [self.left.u[0], 0.0, 0.0],
                ..self.left
            });
        }
        Ok(self.state_at_cbrt(rho.cbrt()))
    }

    /// `lambda3` of the curve state with density `rho`.
    pub fn speed_at(&self, rho: f64) -> f64 {
        self.invariant + 4.0 / 3.0 * 15f64.sqrt() * self.c * rho.cbrt()
    }

    /// Relative defects of both Riemann invariants for `s` against this curve.
    pub fn invariant_defects(&self, s: &GasState) -> (f64, f64) {
        let ds = (entropy(s) - self.s_star).abs() / self.s_star.abs().max(1.0);
        let w = s.u[0] - 15f64.sqrt() * (K0 * entropy(s).exp()).sqrt() * s.rho.cbrt();
        let dw = (w - self.invariant).abs() / self.invariant.abs().max(1.0);
        (ds, dw)
    }
}

/// State on `R3(left)` with density `rho`.
pub fn r3_state(left: &GasState, rho: f64) -> Result<GasState> {
    RarefactionCurve::through(left)?.state_at(rho)
}

/// Relative tolerance for accepting a right state as lying on `R3(left)`.
pub const CURVE_MEMBERSHIP_TOL: f64 = 1e-10;

/// Far-field data of a single 3-rarefaction wave.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiemannData {
    pub left: GasState,
    pub right: GasState,
    pub wave_strength: f64,
    curve: RarefactionCurve,
}

impl RiemannData {
    pub fn new(left: GasState, right: GasState) -> Result<Self> {
        left.validate()?;
        right.validate()?;
        if left.u[1] != 0.0 || left.u[2] != 0.0 || right.u[1] != 0.0 || right.u[2] != 0.0 {
            return Err(Error::Domain("transverse velocities must vanish".into()));
        }
        if !(right.rho > left.rho && right.u[0] > left.u[0]) {
            return Err(Error::Domain(
                "a 3-rarefaction needs rho+ > rho- and u1+ > u1-".into(),
            ));
        }
        let curve = RarefactionCurve::through(&left)?;
        let (ds, dw) = curve.invariant_defects(&right);
        if ds > CURVE_MEMBERSHIP_TOL || dw > CURVE_MEMBERSHIP_TOL {
            return Err(Error::Domain(format!(
                "right state is off the 3-rarefaction curve (entropy defect {ds:e}, invariant defect {dw:e})"
            )));
        }
        let wave_strength = (right.rho - left.rho).abs()
            + (0..3)
                .map(|i| (right.u[i] - left.u[i]).powi(2))
                .sum::<f64>()
                .sqrt()
            + (right.theta - left.theta).abs();
        Ok(RiemannData {
            left,
            right,
            wave_strength,
            curve,
        })
    }

    /// Builds the data with the right state projected onto `R3(left)` at `rho_plus`.
    pub fn on_curve(left: GasState, rho_plus: f64) -> Result<Self> {
        let right = r3_state(&left, rho_plus)?;
        Self::new(left, right)
    }

    pub fn curve(&self) -> &RarefactionCurve {
        &self.curve
    }

    /// `lambda3` of the left and right states.
    pub fn fan_edges(&self) -> (f64, f64) {
        (lambda3(&self.left), lambda3(&self.right))
    }
}

/// Centered 3-rarefaction solution at `xi = x / t`.
pub fn riemann_rarefaction(data: &RiemannData, xi: f64) -> GasState {
    let (lo, hi) = data.fan_edges();
    if xi <= lo {
        data.left
    } else if xi > hi {
        data.right
    } else {
        let curve = data.curve();
        curve.state_at_cbrt(curve.cbrt_for_speed(xi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn left() -> GasState {
        GasState::reference()
    }

    #[test]
    fn pressure_values() {
        assert_relative_eq!(pressure(&GasState::planar(1.0, 0.0, 1.5).unwrap()), 1.0);
        assert_relative_eq!(pressure(&GasState::planar(2.0, 0.0, 1.5).unwrap()), 2.0);
        let p = pressure(&GasState::planar(1.1, 0.0, 1.5984032).unwrap());
        // the tabulated digits are truncated, not rounded
        assert!((p - 1.1721624).abs() < 2e-7, "{p}");
    }

    #[test]
    fn entropy_values() {
        let s = entropy(&GasState::reference());
        assert!((s - (1.0 + (2.0 * PI).ln())).abs() < 1e-14);
        assert!((s - 2.8378771).abs() < 1e-7);
        let s2 = entropy(&GasState::planar(1.5f64.exp(), 0.0, 1.5).unwrap());
        assert!((s2 - (2.0 * PI).ln()).abs() < 1e-14);
    }

    #[test]
    fn lambda3_values() {
        assert!((lambda3(&left()) - (5f64 / 3.0).sqrt()).abs() < 1e-15);
        let s = GasState::planar(1.1, 0.1250203, 1.5984032).unwrap();
        assert!((lambda3(&s) - 1.4576882).abs() < 2e-7);
        let shifted = GasState::planar(1.1, 0.1250203 + 0.7, 1.5984032).unwrap();
        assert!((lambda3(&shifted) - lambda3(&s) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn curve_passes_through_left_state() {
        assert_eq!(r3_state(&left(), 1.0).unwrap(), left());
    }

    #[test]
    fn curve_sample_point() {
        let s = r3_state(&left(), 1.1).unwrap();
        assert!((s.u[0] - 0.1250203).abs() < 1e-7);
        assert!((s.theta - 1.5984032).abs() < 2e-7);
        assert!((s.theta - 1.5 * 1.1f64.powf(2.0 / 3.0)).abs() < 1e-14);
        // k0 e^{S*} = 1 for the reference state
        let c = RarefactionCurve::through(&left()).unwrap();
        assert!((c.scale() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn density_below_left_is_rejected() {
        assert!(matches!(r3_state(&left(), 0.9), Err(Error::Domain(_))));
    }

    #[test]
    fn riemann_data_rejects_off_curve_and_wrong_branch() {
        let l = left();
        let r = r3_state(&l, 1.1).unwrap();
        let mut off = r;
        off.theta *= 1.0 + 1e-6;
        assert!(RiemannData::new(l, off).is_err());
        assert!(RiemannData::new(r, l).is_err());
        let d = RiemannData::new(l, r).unwrap();
        let expected = 0.1 + r.u[0] + (r.theta - 1.5);
        assert!((d.wave_strength - expected).abs() < 1e-14);
    }

    #[test]
    fn fan_outer_branches() {
        let d = RiemannData::on_curve(left(), 1.1).unwrap();
        let (lo, hi) = d.fan_edges();
        assert_eq!(riemann_rarefaction(&d, lo - 1.0), d.left);
        assert_eq!(riemann_rarefaction(&d, hi + 1.0), d.right);
    }

    #[test]
    fn fan_interior_against_bisection() {
        let d = RiemannData::on_curve(left(), 1.1).unwrap();
        let (lo, hi) = d.fan_edges();
        let xi = 0.5 * (lo + hi);
        let s = riemann_rarefaction(&d, xi);
        // independent bisection on rho -> lambda3(r3_state(left, rho))
        let (mut a, mut b) = (1.0, 1.1);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if lambda3(&r3_state(&left(), m).unwrap()) < xi {
                a = m;
            } else {
                b = m;
            }
        }
        assert!((s.rho - 0.5 * (a + b)).abs() < 1e-12);
        assert!((lambda3(&s) - xi).abs() < 1e-13);
        let (ds, dw) = d.curve().invariant_defects(&s);
        assert!(ds < 1e-10 && dw < 1e-10);
    }
}
