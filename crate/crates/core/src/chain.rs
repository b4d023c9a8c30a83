//! The optical chain from the parametric amplifier to the homodyne detector.
//!
//! OPA -> input-coupler loss -> filter-cavity reflection (matched fraction)
//! mixed with the unmatched bypass -> detection loss -> optional phase jitter.

use serde::{Deserialize, Serialize};

use crate::cavity::{reflect_state, CavityParams, TransferMode};
use crate::error::{invalid, Result};
use crate::gaussian::{
    apply_loss, check_unit, dephase, mix_incoherent, rotate_state, to_db, variance_at_angle, Covariance,
    QuadratureState,
};

/// Below-threshold optical parametric amplifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpaParams {
    /// Bandwidth parameter of the Lorentzian squeezing spectrum (Hz).
    pub gamma_hz: f64,
    /// Normalized pump parameter, 0 <= x < 1 (1 is threshold).
    pub pump: f64,
    pub eta_escape: f64,
    /// Angle of the squeezed quadrature; 0 is amplitude squeezing.
    pub theta_opa: f64,
}

impl Default for OpaParams {
    /// Classical gain 5, 15 MHz bandwidth, amplitude squeezing.
    fn default() -> Self {
        OpaParams {
            gamma_hz: 15e6,
            pump: pump_from_gain(5.0).expect("gain 5 is valid"),
            eta_escape: 1.0,
            theta_opa: 0.0,
        }
    }
}

impl OpaParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.pump) {
            return Err(invalid(format!("OPA pump parameter must lie in [0, 1), got {}", self.pump)));
        }
        if !(self.gamma_hz > 0.0) || !self.gamma_hz.is_finite() {
            return Err(invalid(format!("OPA bandwidth must be > 0, got {}", self.gamma_hz)));
        }
        if !(self.eta_escape > 0.0 && self.eta_escape <= 1.0) {
            return Err(invalid(format!("OPA escape efficiency must lie in (0, 1], got {}", self.eta_escape)));
        }
        Ok(())
    }
}

/// Classical parametric gain `1 / (1 - x)^2`.
pub fn gain_from_pump(x: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&x) {
        return Err(invalid(format!("pump parameter must lie in [0, 1), got {x}")));
    }
    Ok(1.0 / (1.0 - x).powi(2))
}

pub fn pump_from_gain(gain: f64) -> Result<f64> {
    if !(gain >= 1.0) || !gain.is_finite() {
        return Err(invalid(format!("classical gain must be >= 1, got {gain}")));
    }
    Ok(1.0 - 1.0 / gain.sqrt())
}

/// OPA output at sideband `f_hz` after the escape efficiency.
pub fn opa_state(opa: &OpaParams, f_hz: f64) -> Result<QuadratureState> {
    opa.validate()?;
    let x = opa.pump;
    let w2 = (f_hz / opa.gamma_hz).powi(2);
    let squeezed = 1.0 - 4.0 * x / ((1.0 + x).powi(2) + w2);
    let anti = 1.0 + 4.0 * x / ((1.0 - x).powi(2) + w2);
    let s = QuadratureState { mean: [0.0, 0.0], cov: Covariance::diag(squeezed, anti) };
    apply_loss(&rotate_state(&s, opa.theta_opa), opa.eta_escape)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub opa: OpaParams,
    /// Power loss at the filter-cavity input coupler.
    pub coupler_loss: f64,
    pub cavity: CavityParams,
    /// Fraction of the power mode-matched into the filter cavity.
    pub eta_mm: f64,
    /// Remaining detection efficiency (photodiodes, visibility, propagation).
    pub eta_det: f64,
    /// `false` models a beam dump inside the cavity: no reflection, coupler loss kept.
    pub cavity_enabled: bool,
    pub mode: TransferMode,
    /// RMS jitter of the quadrature angle (radians).
    pub phase_noise_rad: f64,
}

/// Total power loss on the squeezed beam.
pub const TOTAL_LOSS: f64 = 0.42;
pub const COUPLER_LOSS: f64 = 0.03;
pub const MODE_MATCHING: f64 = 0.94;

impl Default for ChainConfig {
    /// Loss budget: 3 % coupler, 94 % mode matching, detection efficiency
    /// chosen so the three together transmit 58 % (42 % total loss).
    fn default() -> Self {
        ChainConfig {
            opa: OpaParams::default(),
            coupler_loss: COUPLER_LOSS,
            cavity: CavityParams::default(),
            eta_mm: MODE_MATCHING,
            eta_det: (1.0 - TOTAL_LOSS) / ((1.0 - COUPLER_LOSS) * MODE_MATCHING),
            cavity_enabled: true,
            mode: TransferMode::Approx,
            phase_noise_rad: 0.0,
        }
    }
}

impl ChainConfig {
    /// Default budget plus 1 degree RMS quadrature jitter, the scale of the
    /// homodyne lock precision. Reproduces an ellipse area near 1.17 at 14.1 MHz.
    pub fn calibrated() -> Self {
        ChainConfig { phase_noise_rad: 1f64.to_radians(), ..ChainConfig::default() }
    }

    /// No losses anywhere: unit efficiencies, perfect matching, lossless back mirror.
    pub fn lossless() -> Self {
        let d = ChainConfig::default();
        ChainConfig {
            opa: OpaParams { eta_escape: 1.0, ..d.opa },
            coupler_loss: 0.0,
            cavity: CavityParams { r2: 1.0, ..d.cavity },
            eta_mm: 1.0,
            eta_det: 1.0,
            phase_noise_rad: 0.0,
            ..d
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.opa.validate()?;
        self.cavity.validate()?;
        check_unit("coupler loss", self.coupler_loss)?;
        check_unit("mode matching", self.eta_mm)?;
        check_unit("detection efficiency", self.eta_det)?;
        if !(self.phase_noise_rad >= 0.0) || !self.phase_noise_rad.is_finite() {
            return Err(invalid(format!("phase noise must be >= 0, got {}", self.phase_noise_rad)));
        }
        Ok(())
    }
}

/// State arriving at the homodyne detector at sideband `f_hz`.
pub fn chain_state(cfg: &ChainConfig, f_hz: f64) -> Result<QuadratureState> {
    cfg.validate()?;
    let source = opa_state(&cfg.opa, f_hz)?;
    let mut s = apply_loss(&source, 1.0 - cfg.coupler_loss)?;
    if cfg.cavity_enabled {
        let matched = reflect_state(&s, &cfg.cavity, f_hz, cfg.mode);
        // The unmatched fraction is promptly reflected without rotation.
        s = mix_incoherent(&matched, &s, cfg.eta_mm)?;
    }
    s = apply_loss(&s, cfg.eta_det)?;
    if cfg.phase_noise_rad > 0.0 {
        s = dephase(&s, cfg.phase_noise_rad)?;
    }
    Ok(s)
}

fn check_grid(f_grid: &[f64]) -> Result<()> {
    if f_grid.is_empty() {
        return Err(invalid("frequency grid is empty"));
    }
    if f_grid.iter().any(|f| !f.is_finite()) {
        return Err(invalid("frequency grid contains non-finite values"));
    }
    if f_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("frequency grid must be strictly ascending"));
    }
    Ok(())
}

/// Evaluates `chain_state` at every grid point.
pub fn chain_states(cfg: &ChainConfig, f_grid: &[f64]) -> Result<Vec<QuadratureState>> {
    check_grid(f_grid)?;
    cfg.validate()?;
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        f_grid.par_iter().map(|&f| chain_state(cfg, f)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        f_grid.iter().map(|&f| chain_state(cfg, f)).collect()
    }
}

/// Homodyne noise power relative to shot noise (dB) at angle `theta_hom`.
pub fn noise_spectrum(cfg: &ChainConfig, theta_hom: f64, f_grid: &[f64]) -> Result<Vec<f64>> {
    Ok(chain_states(cfg, f_grid)?.iter().map(|s| to_db(variance_at_angle(s, theta_hom))).collect())
}

/// One spectrum per homodyne angle, sharing the chain evaluation.
pub fn noise_spectra(cfg: &ChainConfig, angles: &[f64], f_grid: &[f64]) -> Result<Vec<Vec<f64>>> {
    let states = chain_states(cfg, f_grid)?;
    Ok(angles.iter().map(|&th| states.iter().map(|s| to_db(variance_at_angle(s, th))).collect()).collect())
}

/// `n` evenly spaced points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n).map(|k| start + (stop - start) * k as f64 / (n - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{ellipse_params, from_db, vacuum_state};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn gain_pump_examples() {
        assert_eq!(gain_from_pump(0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(pump_from_gain(5.0).unwrap(), 0.55279, epsilon = 5e-6);
        assert_abs_diff_eq!(gain_from_pump(0.5).unwrap(), 4.0, epsilon = 1e-12);
        assert!(pump_from_gain(0.5).is_err());
        assert!(gain_from_pump(1.0).is_err());
        let x = 0.37;
        assert_abs_diff_eq!(pump_from_gain(gain_from_pump(x).unwrap()).unwrap(), x, epsilon = 1e-12);
    }

    #[test]
    fn opa_examples() {
        let off = OpaParams { pump: 0.0, ..OpaParams::default() };
        for &f in &[0.0, 5e6, 30e6] {
            assert_eq!(opa_state(&off, f).unwrap().cov, Covariance::IDENTITY);
        }
        let opa = OpaParams { pump: 0.55279, ..OpaParams::default() };
        let s = opa_state(&opa, 0.0).unwrap();
        assert_abs_diff_eq!(s.cov.xx, 0.08294, epsilon = 5e-5);
        assert_abs_diff_eq!(to_db(s.cov.xx), -10.8, epsilon = 0.05);
        let far = opa_state(&opa, 1e12).unwrap();
        assert_abs_diff_eq!(far.cov.xx, 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(far.cov.yy, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn opa_uncertainty() {
        for &eta in &[1.0, 0.9, 0.5] {
            for &x in &[0.1, 0.55, 0.95] {
                for &f in &[0.0, 3e6, 15e6, 60e6] {
                    let opa = OpaParams { pump: x, eta_escape: eta, ..OpaParams::default() };
                    let s = opa_state(&opa, f).unwrap();
                    assert!(s.cov.xx > 0.0);
                    assert!(s.cov.det() >= 1.0 - 1e-12, "x {x} f {f}: {}", s.cov.det());
                }
            }
        }
    }

    #[test]
    fn trivial_chain_is_vacuum() {
        let cfg = ChainConfig {
            opa: OpaParams { pump: 0.0, ..OpaParams::default() },
            coupler_loss: 0.0,
            eta_mm: 1.0,
            eta_det: 1.0,
            cavity_enabled: false,
            ..ChainConfig::default()
        };
        assert_eq!(chain_state(&cfg, 14e6).unwrap(), vacuum_state());
    }

    #[test]
    fn beam_dump_loss_budget() {
        // Solve the pump so the source alone gives -4.393 dB at 14 MHz.
        let f = 14e6;
        let target = from_db(-4.393);
        let (mut lo, mut hi) = (0.0, 0.99);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            let opa = OpaParams { pump: mid, ..OpaParams::default() };
            if opa_state(&opa, f).unwrap().cov.xx > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let cfg = ChainConfig {
            opa: OpaParams { pump: 0.5 * (lo + hi), ..OpaParams::default() },
            cavity_enabled: false,
            eta_det: (1.0 - TOTAL_LOSS) / (1.0 - COUPLER_LOSS),
            ..ChainConfig::default()
        };
        let out = chain_state(&cfg, f).unwrap();
        assert_abs_diff_eq!(to_db(out.cov.xx), -2.00, epsilon = 0.01);
    }

    #[test]
    fn resonant_reflection_rotates_to_phase_quadrature() {
        let cfg = ChainConfig::default();
        let f = cfg.cavity.detuning_hz;
        let out = chain_state(&cfg, f).unwrap();
        let e = ellipse_params(&out).unwrap();
        assert_abs_diff_eq!(e.squeeze_angle(), FRAC_PI_2, epsilon = 1e-9);

        // Oracle: mix the two covariances by hand.
        let pre = apply_loss(&opa_state(&cfg.opa, f).unwrap(), 1.0 - cfg.coupler_loss).unwrap();
        let eta = crate::cavity::reflectance(&cfg.cavity, f).norm_sqr();
        let matched = apply_loss(&rotate_state(&pre, FRAC_PI_2), eta).unwrap();
        let yy = cfg.eta_det * (cfg.eta_mm * matched.cov.yy + (1.0 - cfg.eta_mm) * pre.cov.yy) + 1.0 - cfg.eta_det;
        assert_abs_diff_eq!(out.cov.yy, yy, epsilon = 1e-12);
        // The unmatched anti-squeezed admixture costs squeezing.
        let perfect = ChainConfig { eta_mm: 1.0, ..cfg };
        assert!(chain_state(&perfect, f).unwrap().cov.yy < out.cov.yy);
    }

    #[test]
    fn spectrum_matches_chain_state_pointwise() {
        let cfg = ChainConfig::default();
        let grid = linspace(12e6, 18e6, 61);
        let spec = noise_spectrum(&cfg, 0.3, &grid).unwrap();
        for (f, db) in grid.iter().zip(&spec) {
            let v = variance_at_angle(&chain_state(&cfg, *f).unwrap(), 0.3);
            assert_eq!(*db, to_db(v));
        }
        let flat = ChainConfig { opa: OpaParams { pump: 0.0, ..cfg.opa }, ..cfg };
        assert!(noise_spectrum(&flat, 0.0, &grid).unwrap().iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn grid_checks() {
        let cfg = ChainConfig::default();
        assert!(noise_spectrum(&cfg, 0.0, &[]).is_err());
        assert!(noise_spectrum(&cfg, 0.0, &[2.0, 1.0]).is_err());
        assert_eq!(linspace(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn config_validation() {
        let bad = ChainConfig { eta_det: 1.3, ..ChainConfig::default() };
        assert!(chain_state(&bad, 1e6).is_err());
        let bad = ChainConfig { opa: OpaParams { pump: 1.0, ..OpaParams::default() }, ..ChainConfig::default() };
        assert!(bad.validate().is_err());
        let d = ChainConfig::default();
        assert_abs_diff_eq!((1.0 - d.coupler_loss) * d.eta_mm * d.eta_det, 0.58, epsilon = 1e-12);
        assert_abs_diff_eq!(d.eta_det, 0.636, epsilon = 1e-3);
    }
}
