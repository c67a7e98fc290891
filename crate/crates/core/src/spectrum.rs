//! Power spectrum of the detrended photon flux and the spectral test for
//! non-Markovianity.
//!
//! Conventions: `S_k = sum_m r_m e^{-2 pi i m k / N}` (unnormalised
//! forward transform), angular frequencies `omega_k = 2 pi k / (N dt)`.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dynamics::{photon_flux_analytic, FluxSeries};
use crate::error::{invalid, Error, Result};
use crate::io::{num, write_with};
use crate::measure::{BoundaryCurve, GroundTruth};
use crate::params::{ModelParams, TimeGrid, DEFAULT_DT};

/// Default minimum share of the total detrended power in the peak bin.
pub const DEFAULT_MIN_PROMINENCE: f64 = 0.05;

/// Total power below `NO_SIGNAL_FLOOR * N^2` counts as no signal.
pub const NO_SIGNAL_FLOOR: f64 = 1e-30;

/// Local maxima holding less than this share of the total power are
/// treated as rounding noise.
const LINE_FLOOR: f64 = 1e-12;

/// `r(t) = R(t) - mean(R)`.
pub fn detrend(flux: &FluxSeries) -> Vec<f64> {
    let n = flux.values.len();
    if n == 0 {
        return Vec::new();
    }
    let mut mean = flux.values.iter().sum::<f64>() / n as f64;
    // second pass removes the rounding left by the first
    mean += flux.values.iter().map(|r| r - mean).sum::<f64>() / n as f64;
    flux.values.iter().map(|r| r - mean).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    None,
    Hann,
}

impl Window {
    fn apply(self, r: &[f64]) -> Vec<f64> {
        match self {
            Window::None => r.to_vec(),
            Window::Hann => {
                let n = r.len();
                let denom = (n.max(2) - 1) as f64;
                r.iter()
                    .enumerate()
                    .map(|(m, x)| x * (std::f64::consts::PI * m as f64 / denom).sin().powi(2))
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    /// `omega_k` for `k = 0..=N/2`.
    pub omega: Vec<f64>,
    /// All `N` transform values.
    pub s_values: Vec<Complex64>,
    /// `|S_k|^2` for all `N` bins.
    pub power: Vec<f64>,
    pub n: usize,
    pub dt: f64,
}

impl SpectrumResult {
    /// Angular bin spacing `2 pi / (N dt)`.
    pub fn bin_width(&self) -> f64 {
        2.0 * std::f64::consts::PI / (self.n as f64 * self.dt)
    }

    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }

    /// Non-negative frequency half of the power.
    pub fn positive_power(&self) -> &[f64] {
        &self.power[..self.omega.len()]
    }

    /// `omega,power` over the non-negative frequencies, with `omega`
    /// multiplied by `omega_scale`.
    pub fn write_csv(&self, path: &Path, omega_scale: f64) -> Result<()> {
        write_with(path, |w| {
            writeln!(w, "omega,power")?;
            for (o, p) in self.omega.iter().zip(self.positive_power()) {
                writeln!(w, "{},{}", num(o * omega_scale), num(*p))?;
            }
            Ok(())
        })
    }
}

/// Discrete Fourier transform of a real signal sampled every `dt`.
pub fn dft(r: &[f64], dt: f64) -> Result<SpectrumResult> {
    dft_windowed(r, dt, Window::None)
}

pub fn dft_windowed(r: &[f64], dt: f64, window: Window) -> Result<SpectrumResult> {
    let n = r.len();
    if n < 2 {
        return Err(invalid("signal", format!("need at least 2 samples, got {n}")));
    }
    if !(dt > 0.0) {
        return Err(invalid("dt", "must be > 0"));
    }
    let mut buf: Vec<Complex64> = window.apply(r).into_iter().map(|x| Complex64::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let power = buf.iter().map(|s| s.norm_sqr()).collect();
    let step = 2.0 * std::f64::consts::PI / (n as f64 * dt);
    let omega = (0..=n / 2).map(|k| k as f64 * step).collect();
    Ok(SpectrumResult {
        omega,
        s_values: buf,
        power,
        n,
        dt,
    })
}

/// Frequency of the coherent atom-pseudomode exchange, `sqrt(4 V^2 + delta^2)`.
pub fn coherent_frequency(v: f64, delta: f64) -> f64 {
    (4.0 * v * v + delta * delta).sqrt()
}

/// Largest coherent frequency found in the Markovian region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub omega_m: f64,
    pub v_star: f64,
    pub delta_star: f64,
}

impl Threshold {
    fn consider(best: &mut Option<Threshold>, v: f64, delta: f64) {
        let omega = coherent_frequency(v, delta);
        if best.map_or(true, |b| omega > b.omega_m) {
            *best = Some(Threshold {
                omega_m: omega,
                v_star: v,
                delta_star: delta,
            });
        }
    }
}

/// Maximum of the coherent frequency along the Markovian side of the
/// boundary. Columns that are Markovian over the whole search interval
/// contribute their upper coupling; fully non-Markovian columns contribute
/// nothing.
pub fn threshold_frequency(boundary: &BoundaryCurve) -> Result<Threshold> {
    let mut best = None;
    for p in &boundary.points {
        Threshold::consider(&mut best, p.v_markov, p.delta);
    }
    for u in &boundary.unbracketed {
        if !u.lo_nonmarkovian && !u.hi_nonmarkovian {
            Threshold::consider(&mut best, boundary.v_search.1, u.delta);
        }
    }
    best.ok_or(Error::EmptyRegion)
}

/// Ground-truth flags over a `(delta, V)` grid, delta-major, evaluated in
/// parallel.
pub fn nonmarkovian_grid(
    base: &ModelParams,
    v_values: &[f64],
    delta_values: &[f64],
    truth: &GroundTruth,
) -> Result<Vec<bool>> {
    let cells: Vec<(f64, f64)> = delta_values
        .iter()
        .flat_map(|&d| v_values.iter().map(move |&v| (d, v)))
        .collect();
    cells
        .par_iter()
        .map(|&(delta, v)| {
            truth.is_nonmarkovian(&ModelParams {
                v,
                delta,
                c0: Complex64::new(1.0, 0.0),
                ..*base
            })
        })
        .collect()
}

/// Maximum of the coherent frequency over the Markovian cells of a
/// `(delta, V)` grid.
pub fn threshold_on_grid(
    base: &ModelParams,
    v_values: &[f64],
    delta_values: &[f64],
    truth: &GroundTruth,
) -> Result<Threshold> {
    let flags = nonmarkovian_grid(base, v_values, delta_values, truth)?;
    threshold_from_flags(v_values, delta_values, &flags)
}

/// Same as [`threshold_on_grid`] for precomputed delta-major flags.
pub fn threshold_from_flags(v_values: &[f64], delta_values: &[f64], nonmarkovian: &[bool]) -> Result<Threshold> {
    if nonmarkovian.len() != v_values.len() * delta_values.len() {
        return Err(Error::GridMismatch(format!(
            "{} flags for a {}x{} grid",
            nonmarkovian.len(),
            delta_values.len(),
            v_values.len()
        )));
    }
    let mut best = None;
    for (i, &delta) in delta_values.iter().enumerate() {
        for (j, &v) in v_values.iter().enumerate() {
            if !nonmarkovian[i * v_values.len() + j] {
                Threshold::consider(&mut best, v, delta);
            }
        }
    }
    best.ok_or(Error::EmptyRegion)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub omega: f64,
    pub prominence: f64,
    pub bin: usize,
    /// `false` for the fallback bin of a spectrum without any line.
    pub line: bool,
}

/// Strongest spectral line at positive frequency.
///
/// A line is a bin above its lower neighbour and not below its upper one,
/// searched from `k = 2`: the `k = 1` bin is always above the (removed)
/// mean, so a decaying background would otherwise register as a line.
/// Maxima below a `1e-12` share of the total are ignored as rounding
/// noise. When no such bin exists the largest `k >= 1` bin is reported without
/// interpolation. Otherwise the position is refined by a parabola through
/// the bin and its two neighbours. Prominence is the peak-bin power over
/// the total (two-sided) power.
pub fn dominant_peak(spectrum: &SpectrumResult) -> Result<Peak> {
    let total = spectrum.total_power();
    let floor = NO_SIGNAL_FLOOR * (spectrum.n as f64).powi(2);
    if !(total > floor) {
        return Err(Error::NoSignal {
            total_power: total,
            floor,
        });
    }
    let p = spectrum.positive_power();
    let k_max = p.len() - 1;
    let line = (2..k_max)
        .filter(|&k| p[k] > p[k - 1] && p[k] >= p[k + 1] && p[k] >= LINE_FLOOR * total)
        .max_by(|&a, &b| p[a].total_cmp(&p[b]));
    let width = spectrum.bin_width();
    let (bin, omega, is_line) = match line {
        Some(k) => {
            let (a, b, c) = (p[k - 1], p[k], p[k + 1]);
            let curvature = a - 2.0 * b + c;
            let offset = if curvature < 0.0 {
                (0.5 * (a - c) / curvature).clamp(-0.5, 0.5)
            } else {
                0.0
            };
            (k, (k as f64 + offset) * width, true)
        }
        None => {
            let k = (1..=k_max.max(1))
                .max_by(|&a, &b| p[a].total_cmp(&p[b]))
                .unwrap_or(1);
            (k, k as f64 * width, false)
        }
    };
    Ok(Peak {
        omega,
        prominence: spectrum.power[bin] / total,
        bin,
        line: is_line,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictLabel {
    Markovian,
    NonMarkovianUndetectable,
    NonMarkovianDetected,
    MarkovianConsistent,
}

impl VerdictLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictLabel::Markovian => "Markovian",
            VerdictLabel::NonMarkovianUndetectable => "NonMarkovianUndetectable",
            VerdictLabel::NonMarkovianDetected => "NonMarkovianDetected",
            VerdictLabel::MarkovianConsistent => "MarkovianConsistent",
        }
    }
}

impl std::fmt::Display for VerdictLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionVerdict {
    pub label: VerdictLabel,
    /// `None` when the flux carries no signal.
    pub omega_peak: Option<f64>,
    pub omega_threshold: f64,
    pub prominence: f64,
    pub params: ModelParams,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl RegionVerdict {
    pub fn is_detected(&self) -> bool {
        self.label == VerdictLabel::NonMarkovianDetected
    }

    /// Replaces an inconclusive label by the ground truth.
    pub fn refined(mut self, nonmarkovian: bool) -> Self {
        if !self.is_detected() {
            self.label = if nonmarkovian {
                VerdictLabel::NonMarkovianUndetectable
            } else {
                VerdictLabel::Markovian
            };
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    pub min_prominence: f64,
    /// Sampling step of the analytic flux, in units of `1/gamma`.
    pub dt: f64,
    pub window: Window,
    /// When set, non-detections are refined to `Markovian` or
    /// `NonMarkovianUndetectable`.
    pub ground_truth: Option<GroundTruth>,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            min_prominence: DEFAULT_MIN_PROMINENCE,
            dt: DEFAULT_DT,
            window: Window::None,
            ground_truth: None,
        }
    }
}

/// Label of the spectral test alone: a detection needs a spectral line
/// above the threshold holding at least `min_prominence` of the power.
pub fn detector_label(peak: &Peak, omega_threshold: f64, min_prominence: f64) -> VerdictLabel {
    if peak.line && peak.omega > omega_threshold && peak.prominence >= min_prominence {
        VerdictLabel::NonMarkovianDetected
    } else {
        VerdictLabel::MarkovianConsistent
    }
}

/// Spectral verdict from the analytic flux on `[0, params.t_max]`.
pub fn classify(params: &ModelParams, omega_threshold: f64, cfg: &ClassifyConfig) -> Result<RegionVerdict> {
    params.validate()?;
    let grid = TimeGrid::new(params.t_max, cfg.dt / params.gamma)?;
    let flux = photon_flux_analytic(params, grid);
    classify_flux(params, &flux, omega_threshold, cfg)
}

/// Spectral verdict from any flux series (analytic or binned estimate).
pub fn classify_flux(
    params: &ModelParams,
    flux: &FluxSeries,
    omega_threshold: f64,
    cfg: &ClassifyConfig,
) -> Result<RegionVerdict> {
    let r = detrend(flux);
    let spectrum = dft_windowed(&r, flux.dt(), cfg.window)?;
    let mut verdict = match dominant_peak(&spectrum) {
        Ok(peak) => {
            RegionVerdict {
                label: detector_label(&peak, omega_threshold, cfg.min_prominence),
                omega_peak: Some(peak.omega),
                omega_threshold,
                prominence: peak.prominence,
                params: *params,
                note: None,
            }
        }
        Err(Error::NoSignal { .. }) => RegionVerdict {
            label: VerdictLabel::MarkovianConsistent,
            omega_peak: None,
            omega_threshold,
            prominence: 0.0,
            params: *params,
            note: Some("no signal: zero flux".into()),
        },
        Err(e) => return Err(e),
    };
    if let Some(truth) = cfg.ground_truth {
        if !verdict.is_detected() {
            verdict = verdict.refined(truth.is_nonmarkovian(params)?);
        }
    }
    Ok(verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::FluxKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn series(values: Vec<f64>, dt: f64) -> FluxSeries {
        FluxSeries {
            times: (0..values.len()).map(|i| i as f64 * dt).collect(),
            values,
            kind: FluxKind::Analytic,
        }
    }

    #[test]
    fn detrend_constant_and_zero_mean() {
        let r = detrend(&series(vec![0.7; 100], 0.1));
        assert!(r.iter().all(|x| x.abs() < 1e-15));
        let n = 1000;
        let dt = 2.0 * PI * 3.0 / n as f64;
        let s: Vec<f64> = (0..n).map(|i| (i as f64 * dt).sin()).collect();
        let r = detrend(&series(s.clone(), dt));
        assert!(r.iter().zip(&s).all(|(a, b)| (a - b).abs() < 1e-13));
    }

    #[test]
    fn detrended_model_flux_has_zero_mean() {
        let f = photon_flux_analytic(&ModelParams::unit(1.0, 0.0), TimeGrid::new(14.0, 1e-3).unwrap());
        let r = detrend(&f);
        let scale = f.values.iter().cloned().fold(0.0, f64::max);
        assert!((r.iter().sum::<f64>() / r.len() as f64).abs() < 1e-14 * scale);
        assert!(r.iter().any(|x| x.abs() > 0.0));
    }

    #[test]
    fn zero_signal_has_zero_power() {
        let s = dft(&[0.0; 64], 0.1).unwrap();
        assert!(s.power.iter().all(|&p| p == 0.0));
        assert!(matches!(dominant_peak(&s), Err(Error::NoSignal { .. })));
    }

    #[test]
    fn cosine_is_an_eigenvector() {
        let n = 256;
        for &j in &[1usize, 5, 40] {
            let r: Vec<f64> = (0..n).map(|m| (2.0 * PI * (m * j) as f64 / n as f64).cos()).collect();
            let s = dft(&r, 0.05).unwrap();
            let peak = s.power[j];
            for (k, &p) in s.positive_power().iter().enumerate() {
                if k != j {
                    assert!(p <= 1e-20 * peak, "j={j} k={k} p={p}");
                }
            }
            let found = dominant_peak(&s).unwrap();
            let want = 2.0 * PI * j as f64 / (n as f64 * 0.05);
            assert!((found.omega - want).abs() < 1e-12 * want, "{} vs {want}", found.omega);
            assert!((found.prominence - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn frequency_axis_is_angular() {
        let s = dft(&[1.0, 0.0, -1.0, 0.0, 1.0], 0.5).unwrap();
        assert_eq!(s.omega.len(), 3);
        assert!((s.omega[1] - 2.0 * PI / 2.5).abs() < 1e-15);
    }

    #[test]
    fn coherent_frequency_examples() {
        assert!((coherent_frequency(2.0, 2.0) - 20f64.sqrt()).abs() < 1e-15);
        assert!((coherent_frequency(2.0, 2.0) - 4.47).abs() < 0.01);
        assert_eq!(coherent_frequency(1.0, 0.0), 2.0);
        assert_eq!(coherent_frequency(0.0, -1.5), 1.5);
    }

    #[test]
    fn white_noise_has_no_pronounced_peak() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let r: Vec<f64> = (0..14_001).map(|_| rng.random::<f64>() - 0.5).collect();
        let p = dominant_peak(&dft(&r, 1e-3).unwrap()).unwrap();
        assert!(p.prominence < 0.05, "{}", p.prominence);
    }

    #[test]
    fn strong_coupling_peak_sits_at_coherent_frequency() {
        let f = photon_flux_analytic(&ModelParams::unit(2.0, 2.0), TimeGrid::new(14.0, 1e-3).unwrap());
        let s = dft(&detrend(&f), f.dt()).unwrap();
        let p = dominant_peak(&s).unwrap();
        assert!((p.omega - 20f64.sqrt()).abs() <= s.bin_width(), "{p:?}");
    }

    #[test]
    fn zero_coupling_verdict_notes_missing_signal() {
        let v = classify(&ModelParams::unit(0.0, 1.0), 1.8, &ClassifyConfig::default()).unwrap();
        assert_eq!(v.label, VerdictLabel::MarkovianConsistent);
        assert!(v.omega_peak.is_none() && v.note.is_some());
    }

    #[test]
    fn threshold_at_resonance_only() {
        use crate::measure::{markovian_boundary, DEFAULT_TOL_V};
        let b = markovian_boundary(&ModelParams::default(), &[0.0], (0.05, 1.2), DEFAULT_TOL_V, &GroundTruth::default())
            .unwrap();
        let t = threshold_frequency(&b).unwrap();
        assert!((t.omega_m - 0.5).abs() < 2.0 * 1.5e-3, "{t:?}");
        assert_eq!(t.delta_star, 0.0);
    }

    #[test]
    fn threshold_needs_markovian_points() {
        let b = BoundaryCurve {
            v_search: (0.3, 1.0),
            tol_v: 1e-3,
            points: vec![],
            unbracketed: vec![crate::measure::NotBracketed {
                delta: 0.0,
                lo_nonmarkovian: true,
                hi_nonmarkovian: true,
            }],
        };
        assert!(matches!(threshold_frequency(&b), Err(Error::EmptyRegion)));
    }

    #[test]
    fn hann_window_tapers_ends() {
        let w = Window::Hann.apply(&[1.0; 9]);
        assert_eq!(w[0], 0.0);
        assert!((w[4] - 1.0).abs() < 1e-15);
        assert!(w[8].abs() < 1e-15);
    }
}
