//! Single-mode Gaussian quadrature states.
//!
//! Covariances are normalized so that the vacuum has identity covariance
//! (shot-noise variance 1). The quadrature at angle `theta` is
//! `x cos(theta) + y sin(theta)`, with `x` the amplitude and `y` the phase
//! quadrature. Converting to the quarter-variance convention of the bare
//! ladder-operator amplitudes divides every covariance entry by 4.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, numerical, Result};

/// Slack allowed on the uncertainty bound `det(cov) >= 1`.
pub const UNCERTAINTY_SLACK: f64 = 1e-9;

/// Symmetric 2x2 covariance stored as its three free entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Covariance {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Covariance {
    pub const IDENTITY: Covariance = Covariance { xx: 1.0, xy: 0.0, yy: 1.0 };

    pub fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Covariance { xx, xy, yy }
    }

    pub fn diag(xx: f64, yy: f64) -> Self {
        Covariance { xx, xy: 0.0, yy }
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    /// `u^T C u` with `u = (cos theta, sin theta)`.
    pub fn quadratic_form(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        self.xx * c * c + 2.0 * self.xy * c * s + self.yy * s * s
    }

    /// `R(delta) C R(delta)^T`.
    pub fn rotated(&self, delta: f64) -> Self {
        let (s, c) = delta.sin_cos();
        let (c2, s2, cs) = (c * c, s * s, c * s);
        Covariance {
            xx: c2 * self.xx - 2.0 * cs * self.xy + s2 * self.yy,
            xy: cs * (self.xx - self.yy) + (c2 - s2) * self.xy,
            yy: s2 * self.xx + 2.0 * cs * self.xy + c2 * self.yy,
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Covariance { xx: k * self.xx, xy: k * self.xy, yy: k * self.yy }
    }

    pub fn add(&self, other: &Covariance) -> Self {
        Covariance { xx: self.xx + other.xx, xy: self.xy + other.xy, yy: self.yy + other.yy }
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let m = 0.5 * self.trace();
        let d = (0.25 * (self.xx - self.yy).powi(2) + self.xy * self.xy).sqrt();
        (m + d, m - d)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.xx > 0.0 && self.det() > 0.0
    }

    pub fn inverse(&self) -> Result<Covariance> {
        let det = self.det();
        if !(det > 0.0) || !det.is_finite() {
            return Err(numerical(format!("singular covariance (det = {det})")));
        }
        Ok(Covariance { xx: self.yy / det, xy: -self.xy / det, yy: self.xx / det })
    }
}

/// Squeeze factor and the angle of the squeezed quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezeParams {
    pub r_s: f64,
    pub theta: f64,
}

impl SqueezeParams {
    pub fn new(r_s: f64, theta: f64) -> Result<Self> {
        if !(r_s >= 0.0) || !r_s.is_finite() {
            return Err(invalid(format!("squeeze factor r_s must be >= 0, got {r_s}")));
        }
        Ok(SqueezeParams { r_s, theta })
    }

    /// Closed-form quadrature variance of the pure squeezed state.
    pub fn variance_at(&self, theta: f64) -> f64 {
        let two_r = 2.0 * self.r_s;
        two_r.cosh() - two_r.sinh() * (2.0 * (theta - self.theta)).cos()
    }
}

/// Gaussian state of one sideband mode: mean displacement and covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureState {
    pub mean: [f64; 2],
    pub cov: Covariance,
}

/// Geometry of the one-standard-deviation ellipse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    /// Orientation of the major (anti-squeezed) axis in `[0, pi)`.
    pub theta_major: f64,
    pub sd_major: f64,
    pub sd_minor: f64,
    /// `sqrt(det cov)`; 1 for the vacuum and for every pure state.
    pub area_norm: f64,
}

impl Ellipse {
    /// Orientation of the minor (squeezed) axis in `[0, pi)`.
    pub fn squeeze_angle(&self) -> f64 {
        wrap_half_turn(self.theta_major + std::f64::consts::FRAC_PI_2)
    }
}

/// Wraps an angle into `[0, pi)`.
pub fn wrap_half_turn(theta: f64) -> f64 {
    let w = theta.rem_euclid(std::f64::consts::PI);
    if w >= std::f64::consts::PI {
        0.0
    } else {
        w
    }
}

/// Signed difference between two axis orientations, in `(-pi/2, pi/2]`.
pub fn axis_difference(a: f64, b: f64) -> f64 {
    let half = std::f64::consts::FRAC_PI_2;
    let d = (a - b + half).rem_euclid(std::f64::consts::PI) - half;
    if d <= -half {
        d + std::f64::consts::PI
    } else {
        d
    }
}

pub fn vacuum_state() -> QuadratureState {
    QuadratureState { mean: [0.0, 0.0], cov: Covariance::IDENTITY }
}

/// Pure squeezed state: `R(theta) diag(e^{-2r}, e^{2r}) R(theta)^T`.
pub fn squeezed_state(p: SqueezeParams, mean: [f64; 2]) -> Result<QuadratureState> {
    let p = SqueezeParams::new(p.r_s, p.theta)?;
    let two_r = 2.0 * p.r_s;
    let cov = Covariance::diag((-two_r).exp(), two_r.exp()).rotated(p.theta);
    Ok(QuadratureState { mean, cov })
}

/// Applies the squeezing transformation `S = R(theta) diag(e^{-r}, e^{r}) R(theta)^T`.
pub fn squeeze_state(s: &QuadratureState, p: SqueezeParams) -> Result<QuadratureState> {
    let p = SqueezeParams::new(p.r_s, p.theta)?;
    let (a, b) = ((-p.r_s).exp(), p.r_s.exp());
    let local = rotate_state(s, -p.theta);
    let c = local.cov;
    let squeezed = QuadratureState {
        mean: [a * local.mean[0], b * local.mean[1]],
        cov: Covariance { xx: a * a * c.xx, xy: c.xy, yy: b * b * c.yy },
    };
    Ok(rotate_state(&squeezed, p.theta))
}

pub fn rotate_state(s: &QuadratureState, delta: f64) -> QuadratureState {
    let (sn, c) = delta.sin_cos();
    let [x, y] = s.mean;
    QuadratureState { mean: [c * x - sn * y, sn * x + c * y], cov: s.cov.rotated(delta) }
}

/// Beam-splitter loss: transmits a fraction `eta` of the power and admixes vacuum.
pub fn apply_loss(s: &QuadratureState, eta: f64) -> Result<QuadratureState> {
    check_unit("efficiency", eta)?;
    let cov = s.cov.scaled(eta).add(&Covariance::IDENTITY.scaled(1.0 - eta));
    let k = eta.sqrt();
    Ok(QuadratureState { mean: [k * s.mean[0], k * s.mean[1]], cov })
}

/// Noise variance of the quadrature at `theta`; the mean does not contribute.
pub fn variance_at_angle(s: &QuadratureState, theta: f64) -> f64 {
    s.cov.quadratic_form(theta)
}

pub fn ellipse_params(s: &QuadratureState) -> Result<Ellipse> {
    ellipse_of(&s.cov)
}

pub fn ellipse_of(cov: &Covariance) -> Result<Ellipse> {
    if !cov.is_positive_definite() {
        return Err(numerical(format!("covariance is not positive definite: {cov:?}")));
    }
    let (major, minor) = cov.eigenvalues();
    let theta = 0.5 * (2.0 * cov.xy).atan2(cov.xx - cov.yy);
    Ok(Ellipse {
        theta_major: wrap_half_turn(theta),
        sd_major: major.sqrt(),
        sd_minor: minor.max(0.0).sqrt(),
        area_norm: cov.det().sqrt(),
    })
}

/// Incoherent power-weighted mixture of two modes (no cross terms).
pub fn mix_incoherent(a: &QuadratureState, b: &QuadratureState, w: f64) -> Result<QuadratureState> {
    check_unit("mixing weight", w)?;
    let cov = a.cov.scaled(w).add(&b.cov.scaled(1.0 - w));
    let (ka, kb) = (w.sqrt(), (1.0 - w).sqrt());
    Ok(QuadratureState { mean: [ka * a.mean[0] + kb * b.mean[0], ka * a.mean[1] + kb * b.mean[1]], cov })
}

/// Averages the covariance over Gaussian jitter of the quadrature angle with
/// RMS `sigma`. The traceless part of the covariance rotates at twice the
/// jitter angle, so it is damped by `exp(-2 sigma^2)`.
pub fn dephase(s: &QuadratureState, sigma: f64) -> Result<QuadratureState> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(invalid(format!("phase noise must be >= 0, got {sigma}")));
    }
    let m = 0.5 * s.cov.trace();
    let k = (-2.0 * sigma * sigma).exp();
    let cov = Covariance { xx: m + k * (s.cov.xx - m), xy: k * s.cov.xy, yy: m + k * (s.cov.yy - m) };
    let km = (-0.5 * sigma * sigma).exp();
    Ok(QuadratureState { mean: [km * s.mean[0], km * s.mean[1]], cov })
}

impl QuadratureState {
    pub fn new(mean: [f64; 2], cov: Covariance) -> Result<Self> {
        let s = QuadratureState { mean, cov };
        s.validate()?;
        Ok(s)
    }

    /// Checks positive definiteness and the uncertainty bound.
    pub fn validate(&self) -> Result<()> {
        if !self.cov.is_positive_definite() {
            return Err(invalid("covariance must be positive definite"));
        }
        let det = self.cov.det();
        if det < 1.0 - UNCERTAINTY_SLACK {
            return Err(invalid(format!("det(cov) = {det} violates the uncertainty bound det >= 1")));
        }
        Ok(())
    }

    pub fn variance_at(&self, theta: f64) -> f64 {
        variance_at_angle(self, theta)
    }

    pub fn rotated(&self, delta: f64) -> Self {
        rotate_state(self, delta)
    }
}

pub(crate) fn check_unit(what: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(invalid(format!("{what} must lie in [0, 1], got {v}")));
    }
    Ok(())
}

/// Power ratio in decibels.
pub fn to_db(v: f64) -> f64 {
    10.0 * v.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
