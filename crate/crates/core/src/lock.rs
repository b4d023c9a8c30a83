//! Homodyne phase lock from a weighted sum of DC and RF error signals.
//!
//! `S(phi) = b * s_dc * DC(phi) + (1 - b) * s_rf * RF(phi)` with sign flips
//! `s_dc, s_rf = +-1`. Locks use the zero crossing with negative slope.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, TAU};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, numerical, Result};

/// Which error signal follows `cos(phi)`; the other follows `sin(phi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalAssignment {
    /// DC vanishes at the phase quadrature (pi/2), RF at the amplitude quadrature.
    #[default]
    DcCosine,
    DcSine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSignalModel {
    pub a_dc: f64,
    pub a_rf: f64,
    pub phase_offset_dc: f64,
    pub phase_offset_rf: f64,
    #[serde(default)]
    pub assignment: SignalAssignment,
}

impl Default for ErrorSignalModel {
    fn default() -> Self {
        ErrorSignalModel {
            a_dc: 1.0,
            a_rf: 1.0,
            phase_offset_dc: 0.0,
            phase_offset_rf: 0.0,
            assignment: SignalAssignment::DcCosine,
        }
    }
}

impl ErrorSignalModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.a_dc > 0.0 && self.a_rf > 0.0) {
            return Err(invalid("error-signal amplitudes must be > 0"));
        }
        if !(self.phase_offset_dc.abs() < FRAC_PI_4 && self.phase_offset_rf.abs() < FRAC_PI_4) {
            return Err(invalid("error-signal phase offsets must be smaller than pi/4"));
        }
        Ok(())
    }

    pub fn dc(&self, phi: f64) -> f64 {
        let arg = phi + self.phase_offset_dc;
        match self.assignment {
            SignalAssignment::DcCosine => self.a_dc * arg.cos(),
            SignalAssignment::DcSine => self.a_dc * arg.sin(),
        }
    }

    pub fn rf(&self, phi: f64) -> f64 {
        let arg = phi + self.phase_offset_rf;
        match self.assignment {
            SignalAssignment::DcCosine => self.a_rf * arg.sin(),
            SignalAssignment::DcSine => self.a_rf * arg.cos(),
        }
    }

    fn cos_sin_amplitudes(&self) -> (f64, f64) {
        match self.assignment {
            SignalAssignment::DcCosine => (self.a_dc, self.a_rf),
            SignalAssignment::DcSine => (self.a_rf, self.a_dc),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LockPlan {
    pub b: f64,
    pub invert_dc: i8,
    pub invert_rf: i8,
    pub target_theta: f64,
}

impl LockPlan {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.b) {
            return Err(invalid(format!("lock parameter b must lie in [0, 1], got {}", self.b)));
        }
        if self.invert_dc.abs() != 1 || self.invert_rf.abs() != 1 {
            return Err(invalid("signal inversions must be +1 or -1"));
        }
        Ok(())
    }

    /// Quadrant index `n` with `target in [n pi/2, (n+1) pi/2)`.
    pub fn quadrant(&self) -> usize {
        quadrant_of(wrap_turn(self.target_theta))
    }
}

fn wrap_turn(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

fn quadrant_of(theta: f64) -> usize {
    ((theta / FRAC_PI_2).floor() as usize).min(3)
}

pub fn error_signal(m: &ErrorSignalModel, p: &LockPlan, phi: f64) -> f64 {
    p.b * f64::from(p.invert_dc) * m.dc(phi) + (1.0 - p.b) * f64::from(p.invert_rf) * m.rf(phi)
}

/// Plan for unit amplitudes.
pub fn plan_for_angle(theta: f64) -> LockPlan {
    plan_for_angle_with(&ErrorSignalModel::default(), theta)
}

/// Chooses the quadrant signs and solves the zero-crossing condition for `b`,
/// taking the signal amplitudes into account (offsets are unknown to the controller).
pub fn plan_for_angle_with(m: &ErrorSignalModel, theta: f64) -> LockPlan {
    let theta = wrap_turn(theta);
    // Signs of the cos and sin coefficients giving a negative-slope zero in each quadrant.
    let (sc, ss): (i8, i8) = match quadrant_of(theta) {
        0 => (1, -1),
        1 => (1, 1),
        2 => (-1, 1),
        _ => (-1, -1),
    };
    let (a_c, a_s) = m.cos_sin_amplitudes();
    let (c, s) = (theta.cos().abs(), theta.sin().abs());
    // Weight on the cosine signal.
    let p = a_s * s / (a_c * c + a_s * s);
    match m.assignment {
        SignalAssignment::DcCosine => LockPlan { b: p, invert_dc: sc, invert_rf: ss, target_theta: theta },
        SignalAssignment::DcSine => LockPlan { b: 1.0 - p, invert_dc: ss, invert_rf: sc, target_theta: theta },
    }
}

/// Negative-slope zero of the error signal, found by bisection on a bracket
/// of width pi centred on the plan's quadrant.
pub fn lock_point(p: &LockPlan, m: &ErrorSignalModel) -> Result<f64> {
    p.validate()?;
    let center = (p.quadrant() as f64 + 0.5) * FRAC_PI_2;
    let (mut lo, mut hi) = (center - FRAC_PI_2, center + FRAC_PI_2);
    let (s_lo, s_hi) = (error_signal(m, p, lo), error_signal(m, p, hi));
    if !(s_lo > 0.0 && s_hi < 0.0) {
        return Err(numerical(format!("no locking zero crossing in [{lo:.4}, {hi:.4}] (S = {s_lo:.3e}, {s_hi:.3e})")));
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if error_signal(m, p, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Random lock error: Gaussian with standard deviation `sigma`, redrawn
/// until it lies within `+-max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LockJitter {
    pub sigma: f64,
    pub max: f64,
}

impl Default for LockJitter {
    fn default() -> Self {
        LockJitter { sigma: 0.5f64.to_radians(), max: 1f64.to_radians() }
    }
}

impl LockJitter {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.sigma <= 0.0 || self.max <= 0.0 {
            return 0.0;
        }
        let normal = Normal::new(0.0, self.sigma).expect("sigma > 0");
        loop {
            let e = normal.sample(rng);
            if e.abs() <= self.max {
                return e;
            }
        }
    }
}

/// Signed angular difference wrapped to `(-pi, pi]`.
pub fn angle_error(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > std::f64::consts::PI {
        d - TAU
    } else {
        d
    }
}
