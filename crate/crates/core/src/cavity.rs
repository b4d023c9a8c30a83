//! Reflection from a detuned two-mirror cavity and the resulting rotation of
//! the squeezing ellipse.
//!
//! Frequencies are sideband offsets from the carrier in Hz. The round-trip
//! phase of a sideband at `f` is `2 (2 pi f - 2 pi detuning) L / c`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::gaussian::{apply_loss, rotate_state, QuadratureState};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    /// Amplitude reflectivity of the input coupler.
    pub r1: f64,
    /// Amplitude reflectivity of the back mirror.
    pub r2: f64,
    pub length_m: f64,
    /// Offset of the cavity resonance from the carrier (Hz, signed).
    pub detuning_hz: f64,
}

impl Default for CavityParams {
    /// The over-coupled 50 cm filter cavity detuned by +15.15 MHz.
    fn default() -> Self {
        CavityParams { r1: 0.97f64.sqrt(), r2: 0.9995f64.sqrt(), length_m: 0.5, detuning_hz: 15.15e6 }
    }
}

impl CavityParams {
    pub fn new(r1: f64, r2: f64, length_m: f64, detuning_hz: f64) -> Result<Self> {
        let c = CavityParams { r1, r2, length_m, detuning_hz };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.r1) {
            return Err(invalid(format!("cavity r1 must lie in [0, 1), got {}", self.r1)));
        }
        if !(0.0..=1.0).contains(&self.r2) {
            return Err(invalid(format!("cavity r2 must lie in [0, 1], got {}", self.r2)));
        }
        if !(self.length_m > 0.0) || !self.length_m.is_finite() {
            return Err(invalid(format!("cavity length must be > 0, got {}", self.length_m)));
        }
        if !self.detuning_hz.is_finite() {
            return Err(invalid("cavity detuning must be finite"));
        }
        Ok(())
    }

    pub fn with_detuning(&self, detuning_hz: f64) -> Self {
        CavityParams { detuning_hz, ..*self }
    }

    pub fn fsr_hz(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.length_m)
    }

    /// Round-trip phase `delta` seen by the sideband at `f_hz`.
    pub fn round_trip_phase(&self, f_hz: f64) -> f64 {
        2.0 * (TAU * f_hz - TAU * self.detuning_hz) * self.length_m / SPEED_OF_LIGHT
    }

    fn over_coupled(&self) -> bool {
        self.r2 >= self.r1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityFigures {
    pub fsr_hz: f64,
    pub finesse: f64,
    pub fwhm_hz: f64,
}

pub fn reflectance(cav: &CavityParams, f_hz: f64) -> Complex64 {
    reflectance_at_phase(cav, cav.round_trip_phase(f_hz))
}

fn reflectance_at_phase(cav: &CavityParams, delta: f64) -> Complex64 {
    let z = Complex64::from_polar(1.0, delta);
    (cav.r1 - cav.r2 * z) / (1.0 - cav.r1 * cav.r2 * z)
}

pub fn cavity_figures(cav: &CavityParams) -> Result<CavityFigures> {
    cav.validate()?;
    let rr = cav.r1 * cav.r2;
    if rr <= 0.0 {
        return Err(invalid("finesse is undefined when r1 * r2 = 0"));
    }
    let fsr_hz = cav.fsr_hz();
    let finesse = PI * rr.sqrt() / (1.0 - rr);
    Ok(CavityFigures { fsr_hz, finesse, fwhm_hz: fsr_hz / finesse })
}

/// Quadrature rotation caused by a phase shift `phi` on one sideband only.
pub fn half_arg_rotation(phi: f64) -> f64 {
    0.5 * phi
}

/// Continuous reflection phase as a function of round-trip phase.
///
/// The branch is zero at the anti-resonance `delta = -pi` and, for an
/// over-coupled cavity, winds by `2 pi` per free spectral range (so it is `pi`
/// on resonance). An under-coupled cavity has no winding.
pub fn unwrapped_phase(cav: &CavityParams, delta: f64) -> f64 {
    let turns = (delta / TAU).round();
    let w = delta - TAU * turns;
    let e = Complex64::from_polar(1.0, w);
    let den = (1.0 - cav.r1 * cav.r2 * e).arg();
    if cav.over_coupled() {
        // r1 - r2 e^{iw} = -e^{iw} (r2 - r1 e^{-iw}); the second factor has positive real part.
        let inner = (cav.r2 - cav.r1 * e.conj()).arg();
        PI + w + inner - den + TAU * turns
    } else {
        (cav.r1 - cav.r2 * e).arg() - den
    }
}

/// Reflection phase of the sideband the cavity acts on.
///
/// A cavity detuned to positive frequency resonates with the upper sideband
/// `+f`; one detuned to negative frequency resonates with the lower sideband
/// `-f`, whose reflectance is the complex conjugate of the mirrored cavity's.
/// The branch for negative detuning is the negated mirror branch, so that a
/// pair of oppositely detuned identical cavities cancels exactly.
pub fn resonant_sideband_phase(cav: &CavityParams, f_hz: f64) -> f64 {
    if cav.detuning_hz >= 0.0 {
        unwrapped_phase(cav, cav.round_trip_phase(f_hz))
    } else {
        -unwrapped_phase(cav, -cav.round_trip_phase(-f_hz))
    }
}

/// Power reflectance of the resonant sideband.
pub fn resonant_sideband_efficiency(cav: &CavityParams, f_hz: f64) -> f64 {
    let f = if cav.detuning_hz >= 0.0 { f_hz } else { -f_hz };
    reflectance(cav, f).norm_sqr()
}

/// Squeezing angle after reflection in the narrow-linewidth approximation:
/// `theta_opa + arg(rho) / 2`.
pub fn rotation_angle_approx(cav: &CavityParams, f_hz: f64, theta_opa: f64) -> f64 {
    theta_opa + half_arg_rotation(resonant_sideband_phase(cav, f_hz))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureTransfer {
    /// Rotation of the quadrature frame relative to the reflected carrier.
    pub rotation: f64,
    /// Half-difference of the sideband phases; a time shift, no effect on variances.
    pub common_phase: f64,
    pub magnitude_upper: f64,
    pub magnitude_lower: f64,
}

impl QuadratureTransfer {
    /// Symmetric power efficiency `|rho+| |rho-|` of the sideband pair.
    pub fn efficiency(&self) -> f64 {
        self.magnitude_upper * self.magnitude_lower
    }
}

/// Exact two-sideband transfer: both sidebands and the carrier are reflected.
pub fn quadrature_transfer(cav: &CavityParams, f_hz: f64) -> QuadratureTransfer {
    let phase = |f: f64| unwrapped_phase(cav, cav.round_trip_phase(f));
    let (up, lo, carrier) = (phase(f_hz), phase(-f_hz), phase(0.0));
    QuadratureTransfer {
        rotation: 0.5 * (up + lo) - carrier,
        common_phase: 0.5 * (up - lo),
        magnitude_upper: reflectance(cav, f_hz).norm(),
        magnitude_lower: reflectance(cav, -f_hz).norm(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransferMode {
    /// Single resonant sideband, `theta + arg(rho)/2`, efficiency `|rho|^2`.
    #[default]
    Approx,
    /// Both sidebands referenced to the carrier, efficiency `|rho+||rho-|`.
    Exact,
}

impl TransferMode {
    pub fn rotation(self, cav: &CavityParams, f_hz: f64) -> f64 {
        match self {
            TransferMode::Approx => rotation_angle_approx(cav, f_hz, 0.0),
            TransferMode::Exact => quadrature_transfer(cav, f_hz).rotation,
        }
    }

    pub fn efficiency(self, cav: &CavityParams, f_hz: f64) -> f64 {
        match self {
            TransferMode::Approx => resonant_sideband_efficiency(cav, f_hz),
            TransferMode::Exact => quadrature_transfer(cav, f_hz).efficiency(),
        }
    }
}

pub fn reflect_state(s: &QuadratureState, cav: &CavityParams, f_hz: f64, mode: TransferMode) -> QuadratureState {
    let rotated = rotate_state(s, mode.rotation(cav, f_hz));
    let eta = mode.efficiency(cav, f_hz).clamp(0.0, 1.0);
    apply_loss(&rotated, eta).expect("efficiency clamped to [0, 1]")
}

/// Total squeezing angle after successive reflections (approximate mode).
pub fn cascade_rotation(cavs: &[CavityParams], f_hz: f64, theta_opa: f64) -> f64 {
    cavs.iter().fold(theta_opa, |acc, c| acc + half_arg_rotation(resonant_sideband_phase(c, f_hz)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{squeezed_state, variance_at_angle, SqueezeParams};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn deg(x: f64) -> f64 {
        x.to_degrees()
    }

    #[test]
    fn reflectance_on_resonance() {
        let cav = CavityParams::default();
        let rho = reflectance(&cav, cav.detuning_hz);
        assert_abs_diff_eq!(rho.re, -0.96770, epsilon = 2e-5);
        assert_abs_diff_eq!(rho.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn reflectance_at_anti_resonance() {
        let cav = CavityParams::default();
        let f = cav.detuning_hz + 0.5 * cav.fsr_hz();
        let rho = reflectance(&cav, f);
        assert_abs_diff_eq!(rho.re, 0.999998, epsilon = 2e-6);
        assert_abs_diff_eq!(rho.im, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn absent_back_mirror_is_plain_mirror() {
        let cav = CavityParams::new(0.8, 0.0, 0.5, 15e6).unwrap();
        for &f in &[-40e6, 0.0, 3e6, 15e6, 151e6] {
            let rho = reflectance(&cav, f);
            assert_abs_diff_eq!(rho.re, 0.8, epsilon = 1e-15);
            assert_abs_diff_eq!(rho.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn figures_examples() {
        let f = cavity_figures(&CavityParams::default()).unwrap();
        assert_abs_diff_eq!(f.fsr_hz, 299.792458e6, epsilon = 1.0);
        assert_abs_diff_eq!(f.finesse, 202.95, epsilon = 5e-3);
        assert_abs_diff_eq!(f.fwhm_hz, 1.477e6, epsilon = 1e3);

        let hi = CavityParams::new(0.9995f64.sqrt(), 0.9995f64.sqrt(), 0.5, 0.0).unwrap();
        // pi * sqrt(0.9995) / 0.0005
        assert_abs_diff_eq!(cavity_figures(&hi).unwrap().finesse, 6281.6, epsilon = 0.1);

        let long = CavityParams { length_m: 1.0, ..CavityParams::default() };
        let g = cavity_figures(&long).unwrap();
        assert_abs_diff_eq!(g.fsr_hz, 0.5 * f.fsr_hz, epsilon = 1e-6);
        assert_abs_diff_eq!(g.fwhm_hz, 0.5 * f.fwhm_hz, epsilon = 1e-6);
        assert_abs_diff_eq!(g.finesse, f.finesse, epsilon = 1e-12);

        let open = CavityParams::new(0.9, 0.0, 0.5, 0.0).unwrap();
        assert!(cavity_figures(&open).is_err());
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(CavityParams::new(1.0, 0.5, 0.5, 0.0).is_err());
        assert!(CavityParams::new(0.5, 1.1, 0.5, 0.0).is_err());
        assert!(CavityParams::new(0.5, 0.5, 0.0, 0.0).is_err());
        assert!(CavityParams::new(0.5, 1.0, 0.5, -3e6).is_ok());
    }

    #[test]
    fn half_arg_examples() {
        assert_eq!(half_arg_rotation(0.0), 0.0);
        assert_abs_diff_eq!(half_arg_rotation(PI), FRAC_PI_2, epsilon = 1e-15);
        assert_abs_diff_eq!(half_arg_rotation(-0.6), -0.3, epsilon = 1e-15);
    }

    #[test]
    fn approx_rotation_examples() {
        let cav = CavityParams::default();
        assert_abs_diff_eq!(deg(rotation_angle_approx(&cav, cav.detuning_hz, 0.0)), 90.0, epsilon = 1e-9);
        let near_anti = cav.detuning_hz - 0.5 * cav.fsr_hz() + 1.0;
        assert_abs_diff_eq!(deg(rotation_angle_approx(&cav, near_anti, 0.0)), 0.0, epsilon = 1e-3);
        // Carrier: arg rho(0) from direct complex evaluation.
        let rho0 = reflectance(&cav, 0.0);
        assert_abs_diff_eq!(rotation_angle_approx(&cav, 0.0, 0.0), 0.5 * rho0.arg(), epsilon = 1e-12);
        assert_abs_diff_eq!(deg(rotation_angle_approx(&cav, 0.0, 0.0)), 2.73, epsilon = 0.01);
        assert_abs_diff_eq!(rotation_angle_approx(&cav, 0.0, 0.4), 0.4 + 0.5 * rho0.arg(), epsilon = 1e-12);
    }

    #[test]
    fn unwrapped_phase_agrees_with_principal_arg() {
        for cav in [
            CavityParams::default(),
            CavityParams::new(0.9, 0.6, 0.3, 1e6).unwrap(),
            CavityParams::new(0.5, 1.0, 0.3, 1e6).unwrap(),
        ] {
            for k in 0..200 {
                let delta = -9.0 + 0.09 * k as f64;
                let a = unwrapped_phase(&cav, delta);
                let p = reflectance_at_phase(&cav, delta).arg();
                let diff = (a - p).rem_euclid(TAU);
                assert!(diff < 1e-9 || TAU - diff < 1e-9, "delta {delta}: {a} vs {p}");
            }
        }
    }

    #[test]
    fn unwrapped_phase_is_continuous_and_monotone_for_over_coupled() {
        let cav = CavityParams::default();
        let mut prev = unwrapped_phase(&cav, -7.0);
        for k in 1..=14000 {
            let a = unwrapped_phase(&cav, -7.0 + 1e-3 * k as f64);
            assert!(a > prev && a - prev < 0.2);
            prev = a;
        }
    }

    #[test]
    fn exact_transfer_examples() {
        let cav = CavityParams::default();
        assert_abs_diff_eq!(quadrature_transfer(&cav, 0.0).rotation, 0.0, epsilon = 1e-15);

        let lossless = CavityParams { r2: 1.0, ..cav };
        for &f in &[1e6, 12e6, 15.15e6, 40e6] {
            let t = quadrature_transfer(&lossless, f);
            assert_abs_diff_eq!(t.magnitude_upper, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(t.magnitude_lower, 1.0, epsilon = 1e-12);
        }

        // Brute force from the three complex reflectances.
        let f = 15.15e6;
        let up = reflectance(&cav, f).arg().rem_euclid(TAU);
        let lo = reflectance(&cav, -f).arg();
        let car = reflectance(&cav, 0.0).arg();
        assert_abs_diff_eq!(deg(up), 180.0, epsilon = 1e-9);
        let t = quadrature_transfer(&cav, f);
        assert_abs_diff_eq!(t.rotation, 0.5 * (up + lo) - car, epsilon = 1e-12);
        let gap = t.rotation - rotation_angle_approx(&cav, f, 0.0);
        assert_abs_diff_eq!(gap, 0.5 * lo - car, epsilon = 1e-12);
        // Frozen from the direct evaluation above: arg rho- = 2.6546 deg, arg rho(0) = 5.4458 deg.
        assert_abs_diff_eq!(deg(gap), -4.1185, epsilon = 1e-3);
    }

    #[test]
    fn reflect_state_examples() {
        let amp = squeezed_state(SqueezeParams::new(0.5, 0.0).unwrap(), [0.0; 2]).unwrap();

        let lossless = CavityParams { r2: 1.0, ..CavityParams::default() };
        for mode in [TransferMode::Approx, TransferMode::Exact] {
            let out = reflect_state(&amp, &lossless, lossless.detuning_hz, mode);
            assert_abs_diff_eq!(out.cov.det(), 1.0, epsilon = 1e-12);
        }
        let out = reflect_state(&amp, &lossless, lossless.detuning_hz, TransferMode::Approx);
        assert_abs_diff_eq!(variance_at_angle(&out, FRAC_PI_2), (-1f64).exp(), epsilon = 1e-12);

        let mirror = CavityParams::new(0.9, 0.0, 0.5, 15e6).unwrap();
        for mode in [TransferMode::Approx, TransferMode::Exact] {
            let out = reflect_state(&amp, &mirror, 14e6, mode);
            let expect = apply_loss(&amp, 0.81).unwrap();
            assert_abs_diff_eq!(out.cov.xx, expect.cov.xx, epsilon = 1e-12);
            assert_abs_diff_eq!(out.cov.xy, expect.cov.xy, epsilon = 1e-12);
            assert_abs_diff_eq!(out.cov.yy, expect.cov.yy, epsilon = 1e-12);
        }

        let high_r2 = CavityParams { r2: 0.99999999, ..CavityParams::default() };
        let far = reflect_state(&amp, &high_r2, 140e6, TransferMode::Approx);
        assert_abs_diff_eq!(far.cov.xx, amp.cov.xx, epsilon = 0.02);
        assert_abs_diff_eq!(far.cov.yy, amp.cov.yy, epsilon = 0.1);
    }

    #[test]
    fn cascade_examples() {
        let cav = CavityParams::default();
        assert_eq!(cascade_rotation(&[], 14e6, 0.3), 0.3);
        assert_eq!(cascade_rotation(&[cav], 14e6, 0.3), rotation_angle_approx(&cav, 14e6, 0.3));
        let pair = [cav, cav.with_detuning(-cav.detuning_hz)];
        for k in 0..=60 {
            let f = 12e6 + 1e5 * k as f64;
            assert_abs_diff_eq!(cascade_rotation(&pair, f, 0.0), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn opposite_detunings_give_opposite_exact_rotations() {
        let cav = CavityParams::default();
        let neg = cav.with_detuning(-cav.detuning_hz);
        for k in 0..=60 {
            let f = 12e6 + 1e5 * k as f64;
            let a = quadrature_transfer(&cav, f).rotation;
            let b = quadrature_transfer(&neg, f).rotation;
            assert_abs_diff_eq!(a + b, 0.0, epsilon = 1e-9);
        }
    }
}
