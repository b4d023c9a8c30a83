//! Simulated homodyne tomography: locked quadrature sampling, histogram
//! sinograms, filtered backprojection and moment-based state estimation.

use std::f64::consts::{PI, SQRT_2};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::chain::{chain_state, ChainConfig};
use crate::error::{invalid, numerical, Result};
use crate::gaussian::{ellipse_of, Covariance, Ellipse, QuadratureState};
use crate::lock::{lock_point, plan_for_angle_with, ErrorSignalModel, LockJitter};

/// SplitMix64 finalizer; mixes a master seed with a stream tag.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const JITTER_STREAM: u64 = 0x6a69_7474_6572;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSamples {
    pub theta: f64,
    pub values: Vec<f64>,
    pub seed: u64,
    pub f_hz: f64,
}

/// Draws `n` homodyne readings of the quadrature at `theta`.
///
/// The generator is keyed on both `seed` and `theta`, so different angles
/// sampled with one seed are independent.
pub fn sample_quadratures(s: &QuadratureState, theta: f64, n: usize, seed: u64) -> Result<QuadratureSamples> {
    if n == 0 {
        return Err(invalid("sample count must be >= 1"));
    }
    let (sn, c) = theta.sin_cos();
    let mean = c * s.mean[0] + sn * s.mean[1];
    let var = s.cov.quadratic_form(theta);
    if !(var > 0.0) || !var.is_finite() {
        return Err(numerical(format!("quadrature variance {var} is not positive")));
    }
    let normal = Normal::new(mean, var.sqrt()).map_err(|e| numerical(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, theta.to_bits()));
    let values = (0..n).map(|_| normal.sample(&mut rng)).collect();
    Ok(QuadratureSamples { theta, values, seed, f_hz: f64::NAN })
}

/// Histogram layout: `bins` equal bins spanning `[-range, range]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub bins: usize,
    pub range: f64,
}

impl Default for Binning {
    fn default() -> Self {
        Binning { bins: 101, range: 6.0 }
    }
}

impl Binning {
    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(invalid(format!("need at least 2 histogram bins, got {}", self.bins)));
        }
        if !(self.range > 0.0) || !self.range.is_finite() {
            return Err(invalid(format!("histogram range must be > 0, got {}", self.range)));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        2.0 * self.range / self.bins as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        let w = self.width();
        (0..self.bins).map(|k| -self.range + (k as f64 + 0.5) * w).collect()
    }

    /// Normalized density of `values`; samples outside the range are dropped.
    pub fn histogram(&self, values: &[f64]) -> Result<Vec<f64>> {
        let w = self.width();
        let mut counts = vec![0u64; self.bins];
        let mut kept = 0u64;
        for &v in values {
            let pos = (v + self.range) / w;
            if pos >= 0.0 && pos < self.bins as f64 {
                counts[pos as usize] += 1;
                kept += 1;
            }
        }
        if kept == 0 {
            return Err(numerical("no samples fall inside the histogram range"));
        }
        let norm = 1.0 / (kept as f64 * w);
        Ok(counts.into_iter().map(|c| c as f64 * norm).collect())
    }
}

/// `n` equidistant angles covering `[0, pi)`.
pub fn equidistant_angles(n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 * PI / n as f64).collect()
}

/// Stack of per-angle quadrature densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sinogram {
    pub angles: Vec<f64>,
    pub bin_centers: Vec<f64>,
    /// One row per angle; each row integrates to 1 over the bins.
    pub densities: Vec<Vec<f64>>,
    /// Sampling seed of each row (empty for noise-free sinograms).
    #[serde(default)]
    pub seeds: Vec<u64>,
}

impl Sinogram {
    pub fn bin_width(&self) -> f64 {
        if self.bin_centers.len() < 2 {
            return 0.0;
        }
        self.bin_centers[1] - self.bin_centers[0]
    }

    /// Half-width of the binned interval.
    pub fn range(&self) -> f64 {
        let w = self.bin_width();
        self.bin_centers.last().copied().unwrap_or(0.0) + 0.5 * w
    }

    pub fn validate(&self) -> Result<()> {
        if self.angles.is_empty() || self.bin_centers.len() < 2 {
            return Err(invalid("sinogram needs at least one angle and two bins"));
        }
        if self.angles.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("sinogram angles must be strictly increasing"));
        }
        if self.densities.len() != self.angles.len() || self.densities.iter().any(|r| r.len() != self.bin_centers.len())
        {
            return Err(invalid("sinogram density matrix does not match its axes"));
        }
        if self.densities.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("sinogram contains non-finite densities"));
        }
        Ok(())
    }

    /// Pointwise `a * self + (1 - a) * other` on identical axes.
    pub fn blend(&self, other: &Sinogram, a: f64) -> Result<Sinogram> {
        if self.angles != other.angles || self.bin_centers != other.bin_centers {
            return Err(invalid("cannot blend sinograms with different axes"));
        }
        let densities = self
            .densities
            .iter()
            .zip(&other.densities)
            .map(|(r1, r2)| r1.iter().zip(r2).map(|(x, y)| a * x + (1.0 - a) * y).collect())
            .collect();
        Ok(Sinogram { densities, seeds: Vec::new(), ..self.clone() })
    }
}

fn binning_of(bins: usize, range: f64) -> Result<Binning> {
    let b = Binning { bins, range };
    b.validate()?;
    Ok(b)
}

/// Samples `n_per_angle` readings at each of `n_angles` equidistant angles
/// and histograms them. Row `k` uses seed `derive_seed(seed, k)`.
pub fn build_sinogram(
    s: &QuadratureState,
    n_angles: usize,
    n_per_angle: usize,
    bins: usize,
    range: f64,
    seed: u64,
) -> Result<Sinogram> {
    let binning = binning_of(bins, range)?;
    if n_angles < 4 {
        return Err(invalid(format!("need at least 4 angles, got {n_angles}")));
    }
    let angles = equidistant_angles(n_angles);
    let seeds: Vec<u64> = (0..n_angles as u64).map(|k| derive_seed(seed, k)).collect();
    let densities = map_indexed(n_angles, |k| {
        let samples = sample_quadratures(s, angles[k], n_per_angle, seeds[k])?;
        binning.histogram(&samples.values)
    })?;
    Ok(Sinogram { angles, bin_centers: binning.centers(), densities, seeds })
}

/// Noise-free sinogram: exact bin-averaged Gaussian marginals.
pub fn exact_sinogram(s: &QuadratureState, angles: &[f64], binning: Binning) -> Result<Sinogram> {
    binning.validate()?;
    let w = binning.width();
    let edges: Vec<f64> = (0..=binning.bins).map(|k| -binning.range + k as f64 * w).collect();
    let mut densities = Vec::with_capacity(angles.len());
    for &th in angles {
        let (sn, c) = th.sin_cos();
        let mean = c * s.mean[0] + sn * s.mean[1];
        let sd = s.cov.quadratic_form(th).sqrt();
        if !(sd > 0.0) {
            return Err(numerical("projection variance is not positive"));
        }
        let cdf = |x: f64| 0.5 * (1.0 + libm::erf((x - mean) / (sd * SQRT_2)));
        let probs: Vec<f64> = edges.windows(2).map(|e| cdf(e[1]) - cdf(e[0])).collect();
        let total: f64 = probs.iter().sum();
        densities.push(probs.into_iter().map(|p| p / (total * w)).collect());
    }
    Ok(Sinogram { angles: angles.to_vec(), bin_centers: binning.centers(), densities, seeds: Vec::new() })
}

/// Noise-free sinogram: Gaussian marginal densities sampled at the bin centers.
pub fn marginal_sinogram(s: &QuadratureState, angles: &[f64], binning: Binning) -> Result<Sinogram> {
    binning.validate()?;
    let centers = binning.centers();
    let mut densities = Vec::with_capacity(angles.len());
    for &th in angles {
        let (sn, c) = th.sin_cos();
        let mean = c * s.mean[0] + sn * s.mean[1];
        let var = s.cov.quadratic_form(th);
        if !(var > 0.0) {
            return Err(numerical("projection variance is not positive"));
        }
        let norm = (2.0 * PI * var).sqrt();
        densities.push(centers.iter().map(|x| (-(x - mean).powi(2) / (2.0 * var)).exp() / norm).collect());
    }
    Ok(Sinogram { angles: angles.to_vec(), bin_centers: centers, densities, seeds: Vec::new() })
}

/// Square reconstruction grid `[-extent, extent]^2` with `n` points per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub extent: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { n: 201, extent: 5.0 }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(invalid("grid needs at least 2 points per axis"));
        }
        if !(self.extent > 0.0) || !self.extent.is_finite() {
            return Err(invalid("grid extent must be > 0"));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        2.0 * self.extent / (self.n - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.extent + i as f64 * self.step()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.coord(i)).collect()
    }
}

/// Wigner function sampled on a square grid; `values[j * n + i]` is at `(x_i, y_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub n: usize,
    pub extent: f64,
    pub values: Vec<f64>,
}

impl WignerGrid {
    pub fn spec(&self) -> GridSpec {
        GridSpec { n: self.n, extent: self.extent }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.n + i]
    }

    pub fn integral(&self) -> f64 {
        let h = self.spec().step();
        self.values.iter().sum::<f64>() * h * h
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs_diff(&self, other: &WignerGrid) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    fn normalized(mut self) -> Result<Self> {
        let total = self.integral();
        if !(total > 0.0) || !total.is_finite() {
            return Err(numerical(format!("reconstruction has non-positive integral {total}")));
        }
        self.values.iter_mut().for_each(|v| *v /= total);
        Ok(self)
    }
}

/// Closed-form Gaussian Wigner function `exp(-v^T C^-1 v / 2) / (2 pi sqrt(det C))`.
pub fn wigner_density(s: &QuadratureState, x: f64, y: f64) -> Result<f64> {
    let inv = s.cov.inverse()?;
    Ok(gaussian_at(&inv, s.cov.det().sqrt(), s.mean, x, y))
}

fn gaussian_at(inv: &Covariance, sqrt_det: f64, mean: [f64; 2], x: f64, y: f64) -> f64 {
    let (dx, dy) = (x - mean[0], y - mean[1]);
    let q = inv.xx * dx * dx + 2.0 * inv.xy * dx * dy + inv.yy * dy * dy;
    (-0.5 * q).exp() / (2.0 * PI * sqrt_det)
}

pub fn analytic_wigner(s: &QuadratureState, grid: GridSpec) -> Result<WignerGrid> {
    grid.validate()?;
    if !s.cov.is_positive_definite() {
        return Err(numerical("covariance is singular or indefinite"));
    }
    let inv = s.cov.inverse()?;
    let sqrt_det = s.cov.det().sqrt();
    let xs = grid.coords();
    let mut values = Vec::with_capacity(grid.n * grid.n);
    for &y in &xs {
        for &x in &xs {
            values.push(gaussian_at(&inv, sqrt_det, s.mean, x, y));
        }
    }
    Ok(WignerGrid { n: grid.n, extent: grid.extent, values })
}

/// Ramp filter apodized by a Hann window reaching zero at `cutoff` x Nyquist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampFilter {
    pub cutoff: f64,
}

impl Default for RampFilter {
    fn default() -> Self {
        RampFilter { cutoff: 1.0 }
    }
}

/// Filtered projections sampled on the bin grid extended by `pad` bins on
/// each side, so rays beyond the histogram range still see the filter tails.
fn filter_rows(sg: &Sinogram, filter: RampFilter, pad: usize) -> Result<Vec<Vec<f64>>> {
    if !(filter.cutoff > 0.0) {
        return Err(invalid("ramp filter cutoff must be > 0"));
    }
    let nb = sg.bin_centers.len();
    let tau = sg.bin_width();
    let out_len = nb + 2 * pad;
    let len = (2 * out_len).next_power_of_two().max(64);
    // Band-limited ramp kernel sampled at the bin spacing, stored circularly.
    let mut kernel = vec![Complex::new(0.0, 0.0); len];
    kernel[0].re = 1.0 / (4.0 * tau * tau);
    for k in (1..len / 2).step_by(2) {
        let v = -1.0 / ((k * k) as f64 * PI * PI * tau * tau);
        kernel[k].re = v;
        kernel[len - k].re = v;
    }
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    fwd.process(&mut kernel);
    for (j, h) in kernel.iter_mut().enumerate() {
        let nu = j.min(len - j) as f64 / len as f64; // cycles per bin, <= 0.5
        let x = nu / (0.5 * filter.cutoff);
        let w = if x < 1.0 { 0.5 * (1.0 + (PI * x).cos()) } else { 0.0 };
        // Convolution step tau; the inverse FFT is unnormalized.
        *h = Complex::new(h.re * w * tau / len as f64, 0.0);
    }
    Ok(sg
        .densities
        .iter()
        .map(|row| {
            let mut buf = vec![Complex::new(0.0, 0.0); len];
            for (b, &v) in buf[pad..pad + nb].iter_mut().zip(row) {
                b.re = v;
            }
            fwd.process(&mut buf);
            buf.iter_mut().zip(&kernel).for_each(|(b, h)| *b *= h);
            inv.process(&mut buf);
            buf[..out_len].iter().map(|c| c.re).collect()
        })
        .collect())
}

/// Unnormalized filtered backprojection; linear in the sinogram.
pub fn backproject(sg: &Sinogram, grid: GridSpec, filter: RampFilter) -> Result<WignerGrid> {
    sg.validate()?;
    grid.validate()?;
    let range = sg.range();
    if grid.extent > range + 1e-12 {
        return Err(invalid(format!(
            "grid extent {} exceeds the histogram range {range}; the grid would reach beyond the measured projections",
            grid.extent
        )));
    }
    let tau = sg.bin_width();
    let reach = grid.extent * SQRT_2;
    let pad = ((reach - range) / tau).ceil().max(0.0) as usize + 2;
    let filtered = filter_rows(sg, filter, pad)?;
    let len = sg.bin_centers.len() + 2 * pad;
    let first = sg.bin_centers[0] - pad as f64 * tau;
    let trig: Vec<(f64, f64)> = sg.angles.iter().map(|a| a.sin_cos()).collect();
    let d_theta = PI / sg.angles.len() as f64;
    let xs = grid.coords();
    let row = |j: usize| -> Vec<f64> {
        let y = xs[j];
        xs.iter()
            .map(|&x| {
                let mut acc = 0.0;
                for (q, &(sn, c)) in filtered.iter().zip(&trig) {
                    let pos = (x * c + y * sn - first) / tau;
                    let k = pos.floor();
                    if k >= 0.0 && (k as usize) + 1 < len {
                        let k = k as usize;
                        let t = pos - k as f64;
                        acc += (1.0 - t) * q[k] + t * q[k + 1];
                    }
                }
                acc * d_theta
            })
            .collect()
    };
    let rows: Vec<Vec<f64>> = map_indexed(grid.n, |j| Ok(row(j)))?;
    Ok(WignerGrid { n: grid.n, extent: grid.extent, values: rows.concat() })
}

/// Filtered backprojection normalized to unit integral. Negative values are kept.
pub fn filtered_backprojection(sg: &Sinogram, grid: GridSpec, filter: RampFilter) -> Result<WignerGrid> {
    backproject(sg, grid, filter)?.normalized()
}

/// Mean and variance of each sinogram row. The variance carries Sheppard's
/// correction `w^2 / 12` for the binning.
pub fn row_moments(sg: &Sinogram) -> Vec<(f64, f64)> {
    let w = sg.bin_width();
    sg.densities
        .iter()
        .map(|row| {
            let mass: f64 = row.iter().sum::<f64>() * w;
            let m1 = row.iter().zip(&sg.bin_centers).map(|(p, c)| p * c).sum::<f64>() * w / mass;
            let m2 = row.iter().zip(&sg.bin_centers).map(|(p, c)| p * (c - m1).powi(2)).sum::<f64>() * w / mass;
            (m1, m2 - w * w / 12.0)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateEstimate {
    pub state: QuadratureState,
    pub ellipse: Ellipse,
}

fn distinct_axes(angles: &[f64]) -> usize {
    let mut axes: Vec<f64> = angles
        .iter()
        .map(|a| {
            let w = a.rem_euclid(PI);
            if PI - w < 1e-9 {
                0.0
            } else {
                w
            }
        })
        .collect();
    axes.sort_by(f64::total_cmp);
    axes.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    axes.len()
}

fn solve3(m: [[f64; 3]; 3], r: [f64; 3]) -> Option<[f64; 3]> {
    let det3 = |a: [[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det3(m);
    let scale = m.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max).powi(3);
    if d.abs() <= 1e-12 * scale {
        return None;
    }
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let mut a = m;
        for row in 0..3 {
            a[row][c] = r[row];
        }
        *o = det3(a) / d;
    }
    Some(out)
}

/// Weighted linear least squares for `var(theta) = u^T V u` and `mean(theta) = u . mu`.
fn fit_moments(angles: &[f64], moments: &[(f64, f64)], weights: &[f64]) -> Result<([f64; 3], [f64; 2])> {
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    let (mut mm, mut mb) = ([[0.0; 2]; 2], [0.0; 2]);
    for ((&th, &(m1, var)), &w) in angles.iter().zip(moments).zip(weights) {
        let (s, c) = th.sin_cos();
        let row = [c * c, 2.0 * c * s, s * s];
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += w * row[i] * row[j];
            }
            atb[i] += w * row[i] * var;
        }
        // The sample mean has variance V/n, the sample variance 2 V^2 / n.
        let wm = w.sqrt();
        let u = [c, s];
        for i in 0..2 {
            for j in 0..2 {
                mm[i][j] += wm * u[i] * u[j];
            }
            mb[i] += wm * u[i] * m1;
        }
    }
    let v = solve3(ata, atb).ok_or_else(|| numerical("angle set is rank deficient"))?;
    let det2 = mm[0][0] * mm[1][1] - mm[0][1] * mm[1][0];
    let mean = if det2.abs() > 1e-12 {
        [(mb[0] * mm[1][1] - mb[1] * mm[0][1]) / det2, (mm[0][0] * mb[1] - mm[1][0] * mb[0]) / det2]
    } else {
        [0.0, 0.0]
    };
    Ok((v, mean))
}

/// Covariance and mean from per-angle `(mean, variance)` pairs.
///
/// An unweighted fit is refined by two passes weighted with the inverse
/// squared fitted variance, the statistical weight of a sample variance.
pub fn estimate_from_moments(angles: &[f64], moments: &[(f64, f64)]) -> Result<StateEstimate> {
    if angles.len() != moments.len() {
        return Err(invalid("angles and moments differ in length"));
    }
    if distinct_axes(angles) < 3 {
        return Err(invalid("need at least 3 distinct quadrature angles (mod pi) to fit a covariance"));
    }
    let mut weights = vec![1.0; angles.len()];
    let (mut v, mut mean) = fit_moments(angles, moments, &weights)?;
    for _ in 0..2 {
        let cov = Covariance::new(v[0], v[1], v[2]);
        if !cov.is_positive_definite() {
            break;
        }
        let floor = 1e-6 * cov.trace();
        for (w, &th) in weights.iter_mut().zip(angles) {
            *w = cov.quadratic_form(th).max(floor).powi(-2);
        }
        (v, mean) = fit_moments(angles, moments, &weights)?;
    }
    let cov = Covariance::new(v[0], v[1], v[2]);
    let ellipse = ellipse_of(&cov)?;
    Ok(StateEstimate { state: QuadratureState { mean, cov }, ellipse })
}

pub fn estimate_state(sg: &Sinogram) -> Result<StateEstimate> {
    sg.validate()?;
    estimate_from_moments(&sg.angles, &row_moments(sg))
}

/// Parameters of one simulated tomography run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub n_angles: usize,
    pub n_per_angle: usize,
    pub binning: Binning,
    pub grid: GridSpec,
    pub filter: RampFilter,
    pub seed: u64,
    /// Apply the random lock error to the sampled angle.
    pub lock_error: bool,
    pub jitter: LockJitter,
    pub lock_model: ErrorSignalModel,
    /// Recorded settle time per angle; not simulated.
    pub settle_s: f64,
}

impl Default for RunSpec {
    /// 100 angles x 1000 readings, 101 bins over +-6, 201 x 201 grid over +-5.
    fn default() -> Self {
        RunSpec {
            n_angles: 100,
            n_per_angle: 1000,
            binning: Binning::default(),
            grid: GridSpec::default(),
            filter: RampFilter::default(),
            seed: 1,
            lock_error: true,
            jitter: LockJitter::default(),
            lock_model: ErrorSignalModel::default(),
            settle_s: 0.5,
        }
    }
}

/// What happened at one quadrature angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleRecord {
    pub nominal: f64,
    pub b: f64,
    pub invert_dc: i8,
    pub invert_rf: i8,
    pub lock_point: f64,
    pub achieved: f64,
    pub seed: u64,
    pub settle_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyRun {
    pub f_hz: f64,
    pub truth: QuadratureState,
    pub sinogram: Sinogram,
    pub wigner: WignerGrid,
    pub estimate: StateEstimate,
    pub records: Vec<AngleRecord>,
}

/// Runs the locked measurement loop at each angle (set `b`, settle, acquire,
/// histogram), then reconstructs and estimates.
pub fn tomography_run(cfg: &ChainConfig, f_hz: f64, spec: &RunSpec) -> Result<TomographyRun> {
    spec.binning.validate()?;
    spec.grid.validate()?;
    spec.lock_model.validate()?;
    if spec.n_angles < 4 {
        return Err(invalid(format!("need at least 4 angles, got {}", spec.n_angles)));
    }
    if spec.n_per_angle == 0 {
        return Err(invalid("sample count must be >= 1"));
    }
    let truth = chain_state(cfg, f_hz)?;
    let angles = equidistant_angles(spec.n_angles);
    let steps = map_indexed(spec.n_angles, |k| {
        let nominal = angles[k];
        let plan = plan_for_angle_with(&spec.lock_model, nominal);
        let locked = lock_point(&plan, &spec.lock_model)?;
        let seed = derive_seed(spec.seed, k as u64);
        let err = if spec.lock_error {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, JITTER_STREAM));
            spec.jitter.sample(&mut rng)
        } else {
            0.0
        };
        let achieved = locked + err;
        let samples = sample_quadratures(&truth, achieved, spec.n_per_angle, seed)?;
        let density = spec.binning.histogram(&samples.values)?;
        let record = AngleRecord {
            nominal,
            b: plan.b,
            invert_dc: plan.invert_dc,
            invert_rf: plan.invert_rf,
            lock_point: locked,
            achieved,
            seed,
            settle_s: spec.settle_s,
        };
        Ok((record, density))
    })?;
    let (records, densities): (Vec<_>, Vec<_>) = steps.into_iter().unzip();
    let seeds = records.iter().map(|r| r.seed).collect();
    let sinogram = Sinogram { angles, bin_centers: spec.binning.centers(), densities, seeds };
    let wigner = filtered_backprojection(&sinogram, spec.grid, spec.filter)?;
    let estimate = estimate_state(&sinogram)?;
    Ok(TomographyRun { f_hz, truth, sinogram, wigner, estimate, records })
}

fn map_indexed<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{rotate_state, squeezed_state, vacuum_state, SqueezeParams};
    use approx::assert_abs_diff_eq;

    fn sq(r: f64, theta: f64) -> QuadratureState {
        squeezed_state(SqueezeParams::new(r, theta).unwrap(), [0.0; 2]).unwrap()
    }

    fn sample_var(v: &[f64]) -> f64 {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    }

    #[test]
    fn sampling_statistics_and_determinism() {
        let s = sample_quadratures(&vacuum_state(), 0.7, 100_000, 11).unwrap();
        assert_abs_diff_eq!(sample_var(&s.values), 1.0, epsilon = 0.02);
        let again = sample_quadratures(&vacuum_state(), 0.7, 100_000, 11).unwrap();
        assert_eq!(s.values, again.values);
        let other = sample_quadratures(&vacuum_state(), 0.8, 10, 11).unwrap();
        assert_ne!(other.values[..], s.values[..10]);

        let sqz = sample_quadratures(&sq(0.5, 0.3), 0.3, 100_000, 5).unwrap();
        assert_abs_diff_eq!(sample_var(&sqz.values), 0.368, epsilon = 0.01);
        assert!(sample_quadratures(&vacuum_state(), 0.0, 0, 1).is_err());
    }

    #[test]
    fn histogram_rows_are_normalized() {
        let sg = build_sinogram(&sq(0.4, 0.2), 8, 500, 41, 6.0, 3).unwrap();
        let w = sg.bin_width();
        for row in &sg.densities {
            assert_abs_diff_eq!(row.iter().sum::<f64>() * w, 1.0, epsilon = 1e-9);
        }
        assert_eq!(sg.seeds.len(), 8);
        assert!(build_sinogram(&vacuum_state(), 8, 10, 1, 6.0, 3).is_err());
        assert!(build_sinogram(&vacuum_state(), 3, 10, 11, 6.0, 3).is_err());
    }

    #[test]
    fn paper_scale_total_count() {
        let spec = RunSpec::default();
        assert_eq!(spec.n_angles * spec.n_per_angle, 100_000);
    }

    #[test]
    fn vacuum_rows_agree() {
        let sg = build_sinogram(&vacuum_state(), 10, 100_000, 101, 6.0, 9).unwrap();
        let w = sg.bin_width();
        for row in &sg.densities[1..] {
            let l1: f64 = row.iter().zip(&sg.densities[0]).map(|(a, b)| (a - b).abs()).sum::<f64>() * w;
            assert!(l1 < 0.05, "l1 {l1}");
        }
    }

    #[test]
    fn squeezed_rows_follow_closed_form() {
        let p = SqueezeParams::new(0.5, 0.6).unwrap();
        let sg = build_sinogram(&sq(p.r_s, p.theta), 20, 20_000, 101, 6.0, 4).unwrap();
        for (th, (_, var)) in sg.angles.iter().zip(row_moments(&sg)) {
            let expect = p.variance_at(*th);
            assert!((var - expect).abs() < 0.05 * expect, "theta {th}: {var} vs {expect}");
        }
    }

    #[test]
    fn analytic_wigner_examples() {
        let g = GridSpec::default();
        let v = analytic_wigner(&vacuum_state(), g).unwrap();
        assert_abs_diff_eq!(v.at(100, 100), 0.15915, epsilon = 5e-6);
        assert_abs_diff_eq!(v.integral(), 1.0, epsilon = 1e-4);
        let pure = QuadratureState { mean: [0.0; 2], cov: Covariance::diag((-1f64).exp(), 1f64.exp()) };
        assert_abs_diff_eq!(analytic_wigner(&pure, g).unwrap().peak(), 0.15915, epsilon = 5e-6);
        let mixed = QuadratureState { mean: [0.0; 2], cov: Covariance::diag(0.8, 1.16f64.powi(2) / 0.8) };
        assert_abs_diff_eq!(analytic_wigner(&mixed, g).unwrap().peak(), 0.13720, epsilon = 5e-6);
        let singular = QuadratureState { mean: [0.0; 2], cov: Covariance::new(1.0, 1.0, 1.0) };
        assert!(analytic_wigner(&singular, g).is_err());
    }

    #[test]
    fn radon_projection_of_analytic_wigner() {
        // Numerical line integrals of the closed form reproduce the marginal densities.
        let s = QuadratureState { mean: [0.2, -0.1], cov: Covariance::new(0.5, 0.3, 2.4) };
        for &th in &[0.0, 0.4, 1.3, 2.9] {
            let (sn, c) = f64::sin_cos(th);
            let var = s.cov.quadratic_form(th);
            let mean = c * s.mean[0] + sn * s.mean[1];
            for &q in &[-1.5, -0.3, 0.0, 0.8, 2.0] {
                let n = 4000;
                let h = 24.0 / n as f64;
                let line: f64 = (0..=n)
                    .map(|k| {
                        let t = -12.0 + k as f64 * h;
                        let wgt = if k == 0 || k == n { 0.5 } else { 1.0 };
                        wgt * wigner_density(&s, q * c - t * sn, q * sn + t * c).unwrap()
                    })
                    .sum::<f64>()
                    * h;
                let expect = (-(q - mean).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt();
                assert_abs_diff_eq!(line, expect, epsilon = 1e-3);
            }
        }
    }

    #[test]
    fn marginal_sinogram_reconstructs_vacuum() {
        let sg = marginal_sinogram(&vacuum_state(), &equidistant_angles(100), Binning::default()).unwrap();
        let g = GridSpec::default();
        let rec = filtered_backprojection(&sg, g, RampFilter::default()).unwrap();
        let truth = analytic_wigner(&vacuum_state(), g).unwrap();
        let err = rec.max_abs_diff(&truth);
        assert!(err < 0.01 * truth.peak(), "max error {err}");
        assert_abs_diff_eq!(rec.integral(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn reconstruction_integrates_to_one() {
        let sg = build_sinogram(&sq(0.7, 1.0), 30, 300, 101, 6.0, 2).unwrap();
        let rec = filtered_backprojection(&sg, GridSpec { n: 81, extent: 5.0 }, RampFilter::default()).unwrap();
        assert_abs_diff_eq!(rec.integral(), 1.0, epsilon = 0.02);
    }

    #[test]
    fn oversized_grid_rejected() {
        let sg = exact_sinogram(&vacuum_state(), &equidistant_angles(8), Binning::default()).unwrap();
        assert!(backproject(&sg, GridSpec { n: 11, extent: 7.0 }, RampFilter::default()).is_err());
    }

    #[test]
    fn backprojection_is_linear() {
        let angles = equidistant_angles(24);
        let b = Binning::default();
        let a = exact_sinogram(&sq(0.5, 0.2), &angles, b).unwrap();
        let c = build_sinogram(&sq(0.3, 1.2), 24, 200, 101, 6.0, 8).unwrap();
        let g = GridSpec { n: 41, extent: 5.0 };
        let f = RampFilter::default();
        let alpha = 0.3;
        let mix = backproject(&a.blend(&c, alpha).unwrap(), g, f).unwrap();
        let fa = backproject(&a, g, f).unwrap();
        let fc = backproject(&c, g, f).unwrap();
        for ((m, x), y) in mix.values.iter().zip(&fa.values).zip(&fc.values) {
            assert_abs_diff_eq!(*m, alpha * x + (1.0 - alpha) * y, epsilon = 1e-9);
        }
    }

    #[test]
    fn estimator_on_exact_moments() {
        let angles = equidistant_angles(12);
        let vac: Vec<(f64, f64)> = angles.iter().map(|_| (0.0, 1.0)).collect();
        let e = estimate_from_moments(&angles, &vac).unwrap();
        assert_abs_diff_eq!(e.state.cov.xx, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.state.cov.xy, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.state.cov.yy, 1.0, epsilon = 1e-12);

        let s = QuadratureState { mean: [0.4, -1.1], cov: Covariance::new(0.7, -0.45, 2.3) };
        let three: Vec<f64> = [0.0f64, 60.0, 120.0].iter().map(|d| d.to_radians()).collect();
        let m: Vec<(f64, f64)> =
            three.iter().map(|&t| (t.cos() * s.mean[0] + t.sin() * s.mean[1], s.cov.quadratic_form(t))).collect();
        let e = estimate_from_moments(&three, &m).unwrap();
        assert_abs_diff_eq!(e.state.cov.xx, 0.7, epsilon = 1e-10);
        assert_abs_diff_eq!(e.state.cov.xy, -0.45, epsilon = 1e-10);
        assert_abs_diff_eq!(e.state.cov.yy, 2.3, epsilon = 1e-10);
        assert_abs_diff_eq!(e.state.mean[0], 0.4, epsilon = 1e-10);
        assert_abs_diff_eq!(e.state.mean[1], -1.1, epsilon = 1e-10);
    }

    #[test]
    fn estimator_rejects_rank_deficient_angles() {
        let angles = [0.0, 0.5, PI, 0.5 + PI];
        let m = [(0.0, 1.0); 4];
        assert!(estimate_from_moments(&angles, &m).is_err());
    }

    #[test]
    fn estimator_on_exact_sinogram() {
        let s = QuadratureState { mean: [0.0; 2], cov: Covariance::new(0.6, 0.35, 2.1) };
        let sg = exact_sinogram(&s, &equidistant_angles(100), Binning::default()).unwrap();
        let e = estimate_state(&sg).unwrap();
        // Residual error comes from truncating the tails at the histogram range.
        assert_abs_diff_eq!(e.state.cov.xx, 0.6, epsilon = 2e-3);
        assert_abs_diff_eq!(e.state.cov.xy, 0.35, epsilon = 2e-3);
        assert_abs_diff_eq!(e.state.cov.yy, 2.1, epsilon = 2e-3);
    }

    #[test]
    fn rotation_shifts_angle_axis() {
        let s = QuadratureState { mean: [0.0; 2], cov: Covariance::new(0.5, 0.4, 2.6) };
        let n = 60;
        let shift = 7;
        let angles = equidistant_angles(n);
        let delta = shift as f64 * PI / n as f64;
        let b = Binning::default();
        let base = exact_sinogram(&s, &angles, b).unwrap();
        let rotated = exact_sinogram(&rotate_state(&s, delta), &angles, b).unwrap();
        for k in 0..n {
            let src = (k + n - shift) % n;
            for (x, y) in rotated.densities[k].iter().zip(&base.densities[src]) {
                assert_abs_diff_eq!(*x, *y, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: Vec<u64> = (0..1000).map(|k| derive_seed(42, k)).collect();
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), seeds.len());
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }
}
