//! Configuration files and persistent data formats.
//!
//! Tables are CSV with `#` comment lines, one header row and numbers written
//! with 17 significant digits, so a write-then-read cycle is exact. Configs,
//! estimates and run manifests are JSON. Angles are degrees and frequencies Hz
//! at this boundary.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::cavity::{quadrature_transfer, rotation_angle_approx, CavityParams, TransferMode};
use crate::chain::{ChainConfig, OpaParams};
use crate::error::{invalid, io_error, Error, Result};
use crate::gaussian::Covariance;
use crate::lock::{ErrorSignalModel, LockJitter, SignalAssignment};
use crate::tomography::{Binning, GridSpec, RampFilter, RunSpec, Sinogram, TomographyRun, WignerGrid};

/// Formats a value with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| io_error(format!("line {line}: cannot parse number {field:?}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpaConfig {
    pub gamma_hz: f64,
    /// Normalized pump parameter `x`.
    #[serde(alias = "x")]
    pub pump: f64,
    pub eta_escape: f64,
    pub theta_opa_deg: f64,
}

impl Default for OpaConfig {
    fn default() -> Self {
        let o = OpaParams::default();
        OpaConfig { gamma_hz: o.gamma_hz, pump: o.pump, eta_escape: o.eta_escape, theta_opa_deg: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CavityConfig {
    pub r1: f64,
    pub r2: f64,
    pub length_m: f64,
    pub detuning_hz: f64,
}

impl Default for CavityConfig {
    fn default() -> Self {
        let c = CavityParams::default();
        CavityConfig { r1: c.r1, r2: c.r2, length_m: c.length_m, detuning_hz: c.detuning_hz }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TomographyConfig {
    pub n_angles: usize,
    pub n_per_angle: usize,
    pub bins: usize,
    pub range: f64,
    pub grid_n: usize,
    pub grid_extent: f64,
    /// Hann window cutoff as a fraction of the Nyquist frequency.
    pub filter_cutoff: f64,
    pub seed: u64,
    pub lock_error: bool,
    pub jitter_sigma_deg: f64,
    pub jitter_max_deg: f64,
    pub a_dc: f64,
    pub a_rf: f64,
    pub phase_offset_dc_deg: f64,
    pub phase_offset_rf_deg: f64,
    pub assignment: SignalAssignment,
    pub settle_s: f64,
}

impl Default for TomographyConfig {
    fn default() -> Self {
        let r = RunSpec::default();
        TomographyConfig {
            n_angles: r.n_angles,
            n_per_angle: r.n_per_angle,
            bins: r.binning.bins,
            range: r.binning.range,
            grid_n: r.grid.n,
            grid_extent: r.grid.extent,
            filter_cutoff: r.filter.cutoff,
            seed: r.seed,
            lock_error: r.lock_error,
            jitter_sigma_deg: r.jitter.sigma.to_degrees(),
            jitter_max_deg: r.jitter.max.to_degrees(),
            a_dc: r.lock_model.a_dc,
            a_rf: r.lock_model.a_rf,
            phase_offset_dc_deg: 0.0,
            phase_offset_rf_deg: 0.0,
            assignment: r.lock_model.assignment,
            settle_s: r.settle_s,
        }
    }
}

/// Complete configuration as stored on disk. Missing fields take defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub opa: OpaConfig,
    pub coupler_loss: f64,
    pub cavity: CavityConfig,
    pub eta_mm: f64,
    pub eta_det: f64,
    pub cavity_enabled: bool,
    pub mode: TransferMode,
    pub phase_noise_deg: f64,
    pub tomography: TomographyConfig,
}

impl Default for ConfigFile {
    fn default() -> Self {
        ConfigFile::from_parts(&ChainConfig::default(), &RunSpec::default())
    }
}

impl ConfigFile {
    pub fn from_parts(cfg: &ChainConfig, run: &RunSpec) -> Self {
        let t = TomographyConfig {
            n_angles: run.n_angles,
            n_per_angle: run.n_per_angle,
            bins: run.binning.bins,
            range: run.binning.range,
            grid_n: run.grid.n,
            grid_extent: run.grid.extent,
            filter_cutoff: run.filter.cutoff,
            seed: run.seed,
            lock_error: run.lock_error,
            jitter_sigma_deg: run.jitter.sigma.to_degrees(),
            jitter_max_deg: run.jitter.max.to_degrees(),
            a_dc: run.lock_model.a_dc,
            a_rf: run.lock_model.a_rf,
            phase_offset_dc_deg: run.lock_model.phase_offset_dc.to_degrees(),
            phase_offset_rf_deg: run.lock_model.phase_offset_rf.to_degrees(),
            assignment: run.lock_model.assignment,
            settle_s: run.settle_s,
        };
        ConfigFile {
            opa: OpaConfig {
                gamma_hz: cfg.opa.gamma_hz,
                pump: cfg.opa.pump,
                eta_escape: cfg.opa.eta_escape,
                theta_opa_deg: cfg.opa.theta_opa.to_degrees(),
            },
            coupler_loss: cfg.coupler_loss,
            cavity: CavityConfig {
                r1: cfg.cavity.r1,
                r2: cfg.cavity.r2,
                length_m: cfg.cavity.length_m,
                detuning_hz: cfg.cavity.detuning_hz,
            },
            eta_mm: cfg.eta_mm,
            eta_det: cfg.eta_det,
            cavity_enabled: cfg.cavity_enabled,
            mode: cfg.mode,
            phase_noise_deg: cfg.phase_noise_rad.to_degrees(),
            tomography: t,
        }
    }

    /// Validated chain configuration in internal units.
    pub fn chain(&self) -> Result<ChainConfig> {
        let cfg = ChainConfig {
            opa: OpaParams {
                gamma_hz: self.opa.gamma_hz,
                pump: self.opa.pump,
                eta_escape: self.opa.eta_escape,
                theta_opa: self.opa.theta_opa_deg.to_radians(),
            },
            coupler_loss: self.coupler_loss,
            cavity: CavityParams {
                r1: self.cavity.r1,
                r2: self.cavity.r2,
                length_m: self.cavity.length_m,
                detuning_hz: self.cavity.detuning_hz,
            },
            eta_mm: self.eta_mm,
            eta_det: self.eta_det,
            cavity_enabled: self.cavity_enabled,
            mode: self.mode,
            phase_noise_rad: self.phase_noise_deg.to_radians(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Validated tomography parameters in internal units.
    pub fn run_spec(&self) -> Result<RunSpec> {
        let t = &self.tomography;
        let spec = RunSpec {
            n_angles: t.n_angles,
            n_per_angle: t.n_per_angle,
            binning: Binning { bins: t.bins, range: t.range },
            grid: GridSpec { n: t.grid_n, extent: t.grid_extent },
            filter: RampFilter { cutoff: t.filter_cutoff },
            seed: t.seed,
            lock_error: t.lock_error,
            jitter: LockJitter { sigma: t.jitter_sigma_deg.to_radians(), max: t.jitter_max_deg.to_radians() },
            lock_model: ErrorSignalModel {
                a_dc: t.a_dc,
                a_rf: t.a_rf,
                phase_offset_dc: t.phase_offset_dc_deg.to_radians(),
                phase_offset_rf: t.phase_offset_rf_deg.to_radians(),
                assignment: t.assignment,
            },
            settle_s: t.settle_s,
        };
        spec.binning.validate()?;
        spec.grid.validate()?;
        spec.lock_model.validate()?;
        if !(t.filter_cutoff > 0.0) {
            return Err(invalid("filter cutoff must be > 0"));
        }
        if !(t.jitter_sigma_deg >= 0.0 && t.jitter_max_deg >= 0.0) {
            return Err(invalid("lock jitter parameters must be >= 0"));
        }
        Ok(spec)
    }
}

/// Parses JSON, reporting malformed text as an I/O error and well-formed text
/// with wrong fields or types as a validation error.
pub fn from_json<T: DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => invalid(format!("{what}: {e}")),
        _ => io_error(format!("{what}: {e}")),
    })
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_error(format!("cannot read {}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_error(format!("cannot write {}: {e}", path.display())))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    from_json(&read_text(path)?, &path.display().to_string())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value))
}

/// Reads and validates a configuration file.
pub fn read_config(path: &Path) -> Result<ConfigFile> {
    let c: ConfigFile = read_json(path)?;
    c.chain()?;
    c.run_spec()?;
    Ok(c)
}

/// Header, data rows and comment lines of a CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let mut out = String::new();
        for c in &self.comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            let fields: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        w.write_all(out.as_bytes()).map_err(|e| io_error(format!("write failed: {e}")))
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut comments = Vec::new();
        let mut header: Option<Vec<String>> = None;
        let mut rows = Vec::new();
        for (k, line) in r.lines().enumerate() {
            let line = line.map_err(|e| io_error(format!("read failed: {e}")))?;
            if let Some(c) = line.strip_prefix('#') {
                comments.push(c.strip_prefix(' ').unwrap_or(c).to_string());
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            match &header {
                None => header = Some(line.split(',').map(|s| s.trim().to_string()).collect()),
                Some(h) => {
                    let row = line.split(',').map(|f| parse_f64(f, k + 1)).collect::<Result<Vec<f64>>>()?;
                    if row.len() != h.len() {
                        return Err(io_error(format!(
                            "line {}: expected {} fields, found {}",
                            k + 1,
                            h.len(),
                            row.len()
                        )));
                    }
                    rows.push(row);
                }
            }
        }
        let header = header.ok_or_else(|| io_error("table has no header row"))?;
        Ok(CsvTable { comments, header, rows })
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        let f = fs::File::create(path).map_err(|e| io_error(format!("cannot create {}: {e}", path.display())))?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let f = fs::File::open(path).map_err(|e| io_error(format!("cannot open {}: {e}", path.display())))?;
        Self::read_from(BufReader::new(f))
    }

    fn column(&self, k: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[k]).collect()
    }
}

/// Noise spectra: one dB column per homodyne angle.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTable {
    pub freqs_hz: Vec<f64>,
    pub angles_deg: Vec<f64>,
    /// `db[a][k]`: angle `a`, frequency `k`.
    pub db: Vec<Vec<f64>>,
}

impl SpectrumTable {
    pub fn validate(&self) -> Result<()> {
        if self.freqs_hz.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("spectrum frequencies must be strictly ascending"));
        }
        if self.db.len() != self.angles_deg.len() || self.db.iter().any(|c| c.len() != self.freqs_hz.len()) {
            return Err(invalid("spectrum table is not rectangular"));
        }
        Ok(())
    }

    pub fn to_csv(&self, comments: Vec<String>) -> CsvTable {
        let mut header = vec!["f_hz".to_string()];
        header.extend(self.angles_deg.iter().map(|a| format!("{a}")));
        let rows = (0..self.freqs_hz.len())
            .map(|k| std::iter::once(self.freqs_hz[k]).chain(self.db.iter().map(|c| c[k])).collect())
            .collect();
        CsvTable { comments, header, rows }
    }

    pub fn from_csv(t: &CsvTable) -> Result<Self> {
        if t.header.first().map(String::as_str) != Some("f_hz") {
            return Err(io_error("spectrum table must start with an f_hz column"));
        }
        let angles_deg = t.header[1..]
            .iter()
            .map(|h| h.parse::<f64>().map_err(|_| io_error(format!("bad angle header {h:?}"))))
            .collect::<Result<Vec<f64>>>()?;
        let table =
            SpectrumTable { freqs_hz: t.column(0), db: (1..t.header.len()).map(|k| t.column(k)).collect(), angles_deg };
        table.validate()?;
        Ok(table)
    }
}

/// Ellipse rotation versus frequency for a cavity detuned by `+d` and `-d`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationTable {
    pub freqs_hz: Vec<f64>,
    /// Approximate squeezing angle with detuning `+|d|` (degrees).
    pub approx_pos_deg: Vec<f64>,
    /// Approximate squeezing angle with detuning `-|d|` (degrees).
    pub approx_neg_deg: Vec<f64>,
    /// Two-sideband squeezing angle with detuning `+|d|` (degrees).
    pub exact_pos_deg: Vec<f64>,
    /// Sum of the two approximate rotations (degrees).
    pub sum_deg: Vec<f64>,
}

impl RotationTable {
    pub const HEADER: [&'static str; 5] =
        ["f_hz", "theta_approx_pos_deg", "theta_approx_neg_deg", "theta_exact_pos_deg", "rotation_sum_deg"];

    pub fn compute(cavity: &CavityParams, theta_opa: f64, freqs_hz: &[f64]) -> Result<Self> {
        cavity.validate()?;
        let d = cavity.detuning_hz.abs();
        let (pos, neg) = (cavity.with_detuning(d), cavity.with_detuning(-d));
        let mut t = RotationTable {
            freqs_hz: freqs_hz.to_vec(),
            approx_pos_deg: Vec::with_capacity(freqs_hz.len()),
            approx_neg_deg: Vec::with_capacity(freqs_hz.len()),
            exact_pos_deg: Vec::with_capacity(freqs_hz.len()),
            sum_deg: Vec::with_capacity(freqs_hz.len()),
        };
        for &f in freqs_hz {
            let rp = rotation_angle_approx(&pos, f, 0.0);
            let rn = rotation_angle_approx(&neg, f, 0.0);
            t.approx_pos_deg.push((theta_opa + rp).to_degrees());
            t.approx_neg_deg.push((theta_opa + rn).to_degrees());
            t.exact_pos_deg.push((theta_opa + quadrature_transfer(&pos, f).rotation).to_degrees());
            t.sum_deg.push((rp + rn).to_degrees());
        }
        Ok(t)
    }

    pub fn to_csv(&self, comments: Vec<String>) -> CsvTable {
        let rows = (0..self.freqs_hz.len())
            .map(|k| {
                vec![
                    self.freqs_hz[k],
                    self.approx_pos_deg[k],
                    self.approx_neg_deg[k],
                    self.exact_pos_deg[k],
                    self.sum_deg[k],
                ]
            })
            .collect();
        CsvTable { comments, header: Self::HEADER.iter().map(|s| s.to_string()).collect(), rows }
    }

    pub fn from_csv(t: &CsvTable) -> Result<Self> {
        if t.header != Self::HEADER {
            return Err(io_error(format!("unexpected rotation table header {:?}", t.header)));
        }
        Ok(RotationTable {
            freqs_hz: t.column(0),
            approx_pos_deg: t.column(1),
            approx_neg_deg: t.column(2),
            exact_pos_deg: t.column(3),
            sum_deg: t.column(4),
        })
    }
}

/// Sinogram as a matrix: one row per angle (radians), one column per bin center.
pub fn sinogram_to_csv(sg: &Sinogram, comments: Vec<String>) -> CsvTable {
    let mut header = vec!["angle_rad".to_string()];
    header.extend(sg.bin_centers.iter().map(|&c| fmt_f64(c)));
    let rows = sg
        .angles
        .iter()
        .zip(&sg.densities)
        .map(|(&a, row)| std::iter::once(a).chain(row.iter().copied()).collect())
        .collect();
    CsvTable { comments, header, rows }
}

pub fn sinogram_from_csv(t: &CsvTable) -> Result<Sinogram> {
    if t.header.first().map(String::as_str) != Some("angle_rad") {
        return Err(io_error("sinogram table must start with an angle_rad column"));
    }
    let bin_centers = t.header[1..].iter().map(|h| parse_f64(h, 0)).collect::<Result<Vec<f64>>>()?;
    let sg = Sinogram {
        angles: t.column(0),
        bin_centers,
        densities: t.rows.iter().map(|r| r[1..].to_vec()).collect(),
        seeds: Vec::new(),
    };
    sg.validate()?;
    Ok(sg)
}

/// Wigner grid in long format `x,y,w`, `x` varying fastest.
pub fn wigner_to_csv(w: &WignerGrid, comments: Vec<String>) -> CsvTable {
    let xs = w.spec().coords();
    let mut rows = Vec::with_capacity(w.values.len());
    for (j, &y) in xs.iter().enumerate() {
        for (i, &x) in xs.iter().enumerate() {
            rows.push(vec![x, y, w.at(i, j)]);
        }
    }
    CsvTable { comments, header: vec!["x".into(), "y".into(), "w".into()], rows }
}

pub fn wigner_from_csv(t: &CsvTable) -> Result<WignerGrid> {
    if t.header != ["x", "y", "w"] {
        return Err(io_error(format!("unexpected Wigner table header {:?}", t.header)));
    }
    let n = (t.rows.len() as f64).sqrt().round() as usize;
    if n < 2 || n * n != t.rows.len() {
        return Err(io_error(format!("Wigner table has {} rows, not a square grid", t.rows.len())));
    }
    let extent = t.rows[n - 1][0];
    Ok(WignerGrid { n, extent, values: t.column(2) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl From<Covariance> for CovarianceReport {
    fn from(c: Covariance) -> Self {
        CovarianceReport { xx: c.xx, xy: c.xy, yy: c.yy }
    }
}

/// Fitted ellipse of a tomography run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub f_hz: f64,
    /// Orientation of the squeezed (minor) axis in `[0, 180)`.
    pub orientation_deg: f64,
    /// Orientation of the anti-squeezed (major) axis in `[0, 180)`.
    pub major_axis_deg: f64,
    pub sd_major: f64,
    pub sd_minor: f64,
    pub area_norm: f64,
    pub mean: [f64; 2],
    pub covariance: CovarianceReport,
    pub truth_covariance: CovarianceReport,
    pub wigner_integral: f64,
}

impl EstimateReport {
    pub fn from_run(run: &TomographyRun) -> Self {
        let e = &run.estimate;
        EstimateReport {
            f_hz: run.f_hz,
            orientation_deg: e.ellipse.squeeze_angle().to_degrees(),
            major_axis_deg: e.ellipse.theta_major.to_degrees(),
            sd_major: e.ellipse.sd_major,
            sd_minor: e.ellipse.sd_minor,
            area_norm: e.ellipse.area_norm,
            mean: e.state.mean,
            covariance: e.state.cov.into(),
            truth_covariance: run.truth.cov.into(),
            wigner_integral: run.wigner.integral(),
        }
    }
}

/// Lock settings and outcome at one tomography angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleEntry {
    pub nominal_deg: f64,
    pub b: f64,
    pub invert_dc: i8,
    pub invert_rf: i8,
    pub achieved_deg: f64,
    pub seed: u64,
}

/// Everything needed to rerun a command and reproduce its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// Subcommand name.
    pub command: String,
    /// Resolved command parameters.
    pub params: serde_json::Value,
    pub config: ConfigFile,
    /// Root seed and the derived per-angle seeds.
    pub seeds: Vec<u64>,
    pub angles: Vec<AngleEntry>,
    /// Output file names, relative to the manifest.
    pub outputs: Vec<String>,
    /// Seconds since the Unix epoch; taken from `SOURCE_DATE_EPOCH` when set.
    pub created_unix: u64,
}

impl RunManifest {
    pub fn new(command: &str, params: serde_json::Value, config: ConfigFile) -> Self {
        RunManifest {
            tool: "fdsq".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            params,
            config,
            seeds: Vec::new(),
            angles: Vec::new(),
            outputs: Vec::new(),
            created_unix: timestamp(),
        }
    }

    pub fn record_run(&mut self, root_seed: u64, run: &TomographyRun) {
        self.seeds = std::iter::once(root_seed).chain(run.records.iter().map(|r| r.seed)).collect();
        self.angles = run
            .records
            .iter()
            .map(|r| AngleEntry {
                nominal_deg: r.nominal.to_degrees(),
                b: r.b,
                invert_dc: r.invert_dc,
                invert_rf: r.invert_rf,
                achieved_deg: r.achieved.to_degrees(),
                seed: r.seed,
            })
            .collect();
    }
}

/// Current time, overridden by `SOURCE_DATE_EPOCH` for reproducible output.
pub fn timestamp() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.trim().parse().ok()) {
        return t;
    }
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        io_error(e.to_string())
    }
}
