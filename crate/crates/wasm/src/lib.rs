//! Browser bindings for the interactive demo page in `www/`.

use fdsq_core::cavity::{cavity_figures, quadrature_transfer, rotation_angle_approx};
use fdsq_core::chain::{linspace, noise_spectra, pump_from_gain};
use fdsq_core::tomography::{analytic_wigner, tomography_run};
use fdsq_core::{ChainConfig, RunSpec, TransferMode};
use wasm_bindgen::prelude::*;

fn chain(detuning_mhz: f64, gain: f64, exact: bool) -> fdsq_core::Result<ChainConfig> {
    let mut cfg = ChainConfig::default();
    cfg.cavity.detuning_hz = detuning_mhz * 1e6;
    cfg.opa.pump = pump_from_gain(gain)?;
    cfg.mode = if exact { TransferMode::Exact } else { TransferMode::Approx };
    cfg.validate()?;
    Ok(cfg)
}

fn to_js(e: fdsq_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Spectra in dB, one block of `points` values per angle.
pub fn spectra_db(
    detuning_mhz: f64,
    gain: f64,
    exact: bool,
    angles_deg: &[f64],
    f_start_mhz: f64,
    f_stop_mhz: f64,
    points: usize,
) -> fdsq_core::Result<Vec<f64>> {
    let cfg = chain(detuning_mhz, gain, exact)?;
    let grid = linspace(f_start_mhz * 1e6, f_stop_mhz * 1e6, points);
    let rad: Vec<f64> = angles_deg.iter().map(|a| a.to_radians()).collect();
    Ok(noise_spectra(&cfg, &rad, &grid)?.concat())
}

/// Approximate and exact squeezing angles (degrees), interleaved per frequency.
pub fn rotation_deg(
    detuning_mhz: f64,
    f_start_mhz: f64,
    f_stop_mhz: f64,
    points: usize,
) -> fdsq_core::Result<Vec<f64>> {
    let cfg = chain(detuning_mhz, 5.0, false)?;
    cavity_figures(&cfg.cavity)?;
    let mut out = Vec::with_capacity(2 * points);
    for f in linspace(f_start_mhz * 1e6, f_stop_mhz * 1e6, points) {
        out.push(rotation_angle_approx(&cfg.cavity, f, 0.0).to_degrees());
        out.push(quadrature_transfer(&cfg.cavity, f).rotation.to_degrees());
    }
    Ok(out)
}

/// Result of a simulated tomography run.
#[wasm_bindgen]
pub struct Tomogram {
    wigner: Vec<f64>,
    analytic: Vec<f64>,
    grid_n: usize,
    extent: f64,
    orientation_deg: f64,
    truth_orientation_deg: f64,
    area: f64,
    truth_area: f64,
}

#[wasm_bindgen]
impl Tomogram {
    /// Reconstructed Wigner function, row `y`, column `x`.
    pub fn wigner(&self) -> Vec<f64> {
        self.wigner.clone()
    }
    pub fn analytic(&self) -> Vec<f64> {
        self.analytic.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn grid_n(&self) -> usize {
        self.grid_n
    }
    #[wasm_bindgen(getter)]
    pub fn extent(&self) -> f64 {
        self.extent
    }
    #[wasm_bindgen(getter)]
    pub fn orientation_deg(&self) -> f64 {
        self.orientation_deg
    }
    #[wasm_bindgen(getter)]
    pub fn truth_orientation_deg(&self) -> f64 {
        self.truth_orientation_deg
    }
    #[wasm_bindgen(getter)]
    pub fn area(&self) -> f64 {
        self.area
    }
    #[wasm_bindgen(getter)]
    pub fn truth_area(&self) -> f64 {
        self.truth_area
    }
}

pub fn tomogram(
    f_mhz: f64,
    detuning_mhz: f64,
    n_angles: usize,
    n_samples: usize,
    seed: u64,
    grid_n: usize,
) -> fdsq_core::Result<Tomogram> {
    let cfg = chain(detuning_mhz, 5.0, false)?;
    let mut spec = RunSpec { n_angles, n_per_angle: n_samples, seed, ..RunSpec::default() };
    spec.grid.n = grid_n;
    let run = tomography_run(&cfg, f_mhz * 1e6, &spec)?;
    let truth = fdsq_core::gaussian::ellipse_params(&run.truth)?;
    Ok(Tomogram {
        analytic: analytic_wigner(&run.truth, spec.grid)?.values,
        grid_n: run.wigner.n,
        extent: run.wigner.extent,
        orientation_deg: run.estimate.ellipse.squeeze_angle().to_degrees(),
        truth_orientation_deg: truth.squeeze_angle().to_degrees(),
        area: run.estimate.ellipse.area_norm,
        truth_area: truth.area_norm,
        wigner: run.wigner.values,
    })
}

#[wasm_bindgen(js_name = spectra)]
pub fn spectra_js(
    detuning_mhz: f64,
    gain: f64,
    exact: bool,
    angles_deg: Vec<f64>,
    f_start_mhz: f64,
    f_stop_mhz: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    spectra_db(detuning_mhz, gain, exact, &angles_deg, f_start_mhz, f_stop_mhz, points).map_err(to_js)
}

#[wasm_bindgen(js_name = rotation)]
pub fn rotation_js(detuning_mhz: f64, f_start_mhz: f64, f_stop_mhz: f64, points: usize) -> Result<Vec<f64>, JsError> {
    rotation_deg(detuning_mhz, f_start_mhz, f_stop_mhz, points).map_err(to_js)
}

#[wasm_bindgen(js_name = tomography)]
pub fn tomography_js(
    f_mhz: f64,
    detuning_mhz: f64,
    n_angles: usize,
    n_samples: usize,
    seed: u64,
    grid_n: usize,
) -> Result<Tomogram, JsError> {
    tomogram(f_mhz, detuning_mhz, n_angles, n_samples, seed, grid_n).map_err(to_js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectra_layout() {
        let v = spectra_db(15.15, 5.0, false, &[0.0, 90.0], 12.0, 18.0, 61).unwrap();
        assert_eq!(v.len(), 122);
        assert!(v[0] < 0.0 && v[61] > 0.0);
        assert!(spectra_db(15.15, 0.5, false, &[0.0], 12.0, 18.0, 5).is_err());
    }

    #[test]
    fn rotation_layout() {
        let v = rotation_deg(15.15, 12.0, 18.0, 601).unwrap();
        assert_eq!(v.len(), 1202);
        assert!((v[2 * 315] - 90.0).abs() < 1e-6);
    }

    #[test]
    fn tomogram_matches_truth() {
        let t = tomogram(14.1, 15.15, 40, 500, 1, 41).unwrap();
        assert_eq!(t.wigner().len(), 41 * 41);
        assert_eq!(t.analytic().len(), 41 * 41);
        assert!((t.orientation_deg - t.truth_orientation_deg).abs() < 4.0);
        assert!((t.area - t.truth_area).abs() < 0.1);
    }
}
