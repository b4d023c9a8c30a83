use std::fs;
use std::path::{Path, PathBuf};

use fdsq_core::cavity::cavity_figures;
use fdsq_core::chain::{chain_state, linspace, noise_spectra};
use fdsq_core::io::{
    fmt_f64, sinogram_to_csv, wigner_to_csv, write_json, ConfigFile, CsvTable, EstimateReport, RotationTable,
    RunManifest, SpectrumTable,
};
use fdsq_core::lock::{lock_point, plan_for_angle_with};
use fdsq_core::tomography::{analytic_wigner, tomography_run};
use fdsq_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// Resolved parameters of one command, excluding what lives in the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "params", rename_all = "kebab-case")]
pub enum Params {
    Spectrum { angles_deg: Vec<f64>, freq_start: f64, freq_stop: f64, freq_points: usize },
    Rotation { freq_start: f64, freq_stop: f64, freq_points: usize },
    Tomo { f_hz: f64 },
    WignerAnalytic { f_hz: f64 },
    LockPlan { angles_deg: Vec<f64> },
}

impl Params {
    fn split(&self) -> (String, serde_json::Value) {
        let mut v = serde_json::to_value(self).expect("plain data serializes");
        let name = v["command"].as_str().unwrap_or_default().to_string();
        (name, v["params"].take())
    }

    pub fn from_manifest(m: &RunManifest) -> Result<Self> {
        let v = serde_json::json!({ "command": m.command, "params": m.params });
        serde_json::from_value(v).map_err(|e| Error::Validation(format!("manifest command: {e}")))
    }
}

fn freq_grid(start: f64, stop: f64, points: usize) -> Result<Vec<f64>> {
    if points == 0 {
        return Err(Error::Validation("--freq-points must be >= 1".into()));
    }
    if !start.is_finite() || !stop.is_finite() || (points > 1 && stop <= start) {
        return Err(Error::Validation(format!("frequency range must satisfy start < stop, got {start} .. {stop}")));
    }
    Ok(linspace(start, stop, points))
}

fn check_angles(angles: &[f64]) -> Result<()> {
    if angles.is_empty() || angles.iter().any(|a| !a.is_finite()) {
        return Err(Error::Validation("angle list must be non-empty and finite".into()));
    }
    Ok(())
}

fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn header_comments(command: &str, lines: &[String]) -> Vec<String> {
    let mut c = vec![format!("fdsq {} {command}", env!("CARGO_PKG_VERSION"))];
    c.extend(lines.iter().cloned());
    c
}

/// Runs a command and writes its outputs and manifest.
pub fn execute(params: &Params, config: &ConfigFile, out: Option<&Path>) -> Result<()> {
    let cfg = config.chain()?;
    let (name, pvalue) = params.split();
    let mut manifest = RunManifest::new(&name, pvalue, *config);
    match params {
        Params::Spectrum { angles_deg, freq_start, freq_stop, freq_points } => {
            check_angles(angles_deg)?;
            let freqs = freq_grid(*freq_start, *freq_stop, *freq_points)?;
            let rad: Vec<f64> = angles_deg.iter().map(|a| a.to_radians()).collect();
            let table = SpectrumTable {
                db: noise_spectra(&cfg, &rad, &freqs)?,
                freqs_hz: freqs,
                angles_deg: angles_deg.clone(),
            };
            let out = out.expect("spectrum has an output path");
            let comments = header_comments(
                &name,
                &[
                    "homodyne noise power relative to shot noise (dB)".into(),
                    "columns: sideband frequency (Hz), then one column per homodyne angle (deg)".into(),
                ],
            );
            table.to_csv(comments).write_file(out)?;
            manifest.outputs.push(file_name(out));
            write_json(&manifest_path(out), &manifest)?;
            println!("wrote {} ({} frequencies x {} angles)", out.display(), table.freqs_hz.len(), angles_deg.len());
        }
        Params::Rotation { freq_start, freq_stop, freq_points } => {
            let freqs = freq_grid(*freq_start, *freq_stop, *freq_points)?;
            let table = RotationTable::compute(&cfg.cavity, cfg.opa.theta_opa, &freqs)?;
            let fig = cavity_figures(&cfg.cavity)?;
            let out = out.expect("rotation has an output path");
            let comments = header_comments(
                &name,
                &[
                    format!(
                        "detuning +-{} Hz, linewidth (FWHM) {} Hz",
                        fmt_f64(cfg.cavity.detuning_hz.abs()),
                        fmt_f64(fig.fwhm_hz)
                    ),
                    "squeezing angles in degrees; the sum column adds the two approximate rotations".into(),
                ],
            );
            table.to_csv(comments).write_file(out)?;
            manifest.outputs.push(file_name(out));
            write_json(&manifest_path(out), &manifest)?;
            let worst = table.sum_deg.iter().fold(0.0f64, |m, s| m.max(s.abs()));
            println!("wrote {} ({} rows, max |sum| = {worst:e} deg)", out.display(), freqs.len());
        }
        Params::Tomo { f_hz } => {
            let spec = config.run_spec()?;
            let dir = out.expect("tomo has an output directory");
            fs::create_dir_all(dir).map_err(|e| Error::Io(format!("cannot create {}: {e}", dir.display())))?;
            let run = tomography_run(&cfg, *f_hz, &spec)?;
            let sino = dir.join("sinogram.csv");
            let wig = dir.join("wigner.csv");
            let est = dir.join("estimate.json");
            sinogram_to_csv(
                &run.sinogram,
                header_comments(
                    &name,
                    &["rows: quadrature angle (rad) then probability density per bin center".into()],
                ),
            )
            .write_file(&sino)?;
            wigner_to_csv(
                &run.wigner,
                header_comments(&name, &["filtered-backprojection Wigner function, long format".into()]),
            )
            .write_file(&wig)?;
            let report = EstimateReport::from_run(&run);
            write_json(&est, &report)?;
            manifest.record_run(spec.seed, &run);
            manifest.outputs = [&sino, &wig, &est].iter().map(|p| file_name(p)).collect();
            write_json(&dir.join("manifest.json"), &manifest)?;
            println!(
                "wrote {}: squeezing angle {:.2} deg, sd {:.4}/{:.4}, area {:.4}, Wigner integral {:.4}",
                dir.display(),
                report.orientation_deg,
                report.sd_minor,
                report.sd_major,
                report.area_norm,
                report.wigner_integral
            );
        }
        Params::WignerAnalytic { f_hz } => {
            let spec = config.run_spec()?;
            let s = chain_state(&cfg, *f_hz)?;
            let grid = analytic_wigner(&s, spec.grid)?;
            let out = out.expect("wigner-analytic has an output path");
            wigner_to_csv(&grid, header_comments(&name, &["closed-form Wigner function, long format".into()]))
                .write_file(out)?;
            manifest.outputs.push(file_name(out));
            write_json(&manifest_path(out), &manifest)?;
            println!("wrote {} ({}x{} grid, peak {:.5})", out.display(), grid.n, grid.n, grid.peak());
        }
        Params::LockPlan { angles_deg } => {
            check_angles(angles_deg)?;
            let model = config.run_spec()?.lock_model;
            let mut rows = Vec::with_capacity(angles_deg.len());
            for &a in angles_deg {
                let plan = plan_for_angle_with(&model, a.to_radians());
                let phi = lock_point(&plan, &model)?;
                rows.push(vec![a, plan.b, f64::from(plan.invert_dc), f64::from(plan.invert_rf), phi.to_degrees()]);
            }
            let table = CsvTable {
                comments: header_comments(
                    &name,
                    &["lock point is the negative-slope zero of the combined error signal".into()],
                ),
                header: ["theta_deg", "b", "invert_dc", "invert_rf", "lock_point_deg"].map(String::from).to_vec(),
                rows,
            };
            let mut stdout = std::io::stdout().lock();
            table.write_to(&mut stdout)?;
            if let Some(out) = out {
                table.write_file(out)?;
                manifest.outputs.push(file_name(out));
                write_json(&manifest_path(out), &manifest)?;
            }
        }
    }
    Ok(())
}
