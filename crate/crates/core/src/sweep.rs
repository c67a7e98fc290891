//! Parameter-grid sweeps over `(delta, V)` and the datasets behind the
//! four figures.
//!
//! Cells are independent; they are evaluated on a rayon pool and assembled
//! by cell index, so outputs do not depend on the worker count.

use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{amplitudes_exact, flux_from_amplitudes, photon_flux_analytic};
use crate::error::{invalid, Error, Result};
use crate::io::{num, write_json, write_with};
use crate::mcwf::{simulate_record, trajectory_seed, DEFAULT_BIN_WIDTH};
use crate::measure::{markovian_boundary, sign_map, GroundTruth, SignAxis, DEFAULT_TOL_V};
use crate::params::{ModelParams, TimeGrid, DEFAULT_DT, DEFAULT_T_MAX};
use crate::spectrum::{
    classify, coherent_frequency, detector_label, dft_windowed, detrend, dominant_peak, nonmarkovian_grid,
    threshold_from_flags, threshold_frequency, ClassifyConfig, Peak, RegionVerdict, Threshold, VerdictLabel, Window,
    DEFAULT_MIN_PROMINENCE,
};
use crate::ENGINE_VERSION;

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "NM_WORKERS";

/// Coupling range of the threshold figure, in units of gamma.
pub const FIG3_V_RANGE: (f64, f64) = (0.05, 1.2);
/// Detuning range used for the threshold figure.
pub const FIG3_DELTA_RANGE: (f64, f64) = (0.0, 2.0);
pub const FIG3_DEFAULT_POINTS: usize = 200;

/// `count` evenly spaced values from `min` to `max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn new(min: f64, max: f64, count: usize) -> Self {
        Self { min, max, count }
    }

    pub fn validate(&self, field: &'static str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite()) {
            return Err(invalid(field, "bounds must be finite"));
        }
        if self.count == 0 {
            return Err(invalid(field, "count must be >= 1"));
        }
        if self.count > 1 && !(self.max > self.min) {
            return Err(invalid(field, format!("need max > min, got [{}, {}]", self.min, self.max)));
        }
        if self.count == 1 && self.max != self.min {
            return Err(invalid(field, "a single-point grid needs min == max"));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| if i + 1 == self.count { self.max } else { self.min + i as f64 * step })
            .collect()
    }
}

fn default_gamma() -> f64 {
    1.0
}
fn default_t_max() -> f64 {
    DEFAULT_T_MAX
}
fn default_dt() -> f64 {
    DEFAULT_DT
}
fn default_bin_width() -> f64 {
    DEFAULT_BIN_WIDTH
}
fn default_min_prominence() -> f64 {
    DEFAULT_MIN_PROMINENCE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub v_grid: GridSpec,
    pub delta_grid: GridSpec,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Zero selects the analytic flux; otherwise each cell bins this many
    /// trajectories.
    #[serde(default)]
    pub n_traj: u64,
    #[serde(default)]
    pub master_seed: Option<u64>,
    #[serde(default = "default_bin_width")]
    pub bin_width: f64,
    #[serde(default = "default_min_prominence")]
    pub min_prominence: f64,
    #[serde(default)]
    pub window: Window,
    /// When absent the largest coherent frequency among the ground-truth
    /// Markovian cells of this grid is used.
    #[serde(default)]
    pub omega_threshold: Option<f64>,
    #[serde(default)]
    pub ground_truth: GroundTruth,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub workers: Option<usize>,
}

impl SweepConfig {
    pub fn new(v_grid: GridSpec, delta_grid: GridSpec, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            v_grid,
            delta_grid,
            gamma: 1.0,
            t_max: DEFAULT_T_MAX,
            dt: DEFAULT_DT,
            n_traj: 0,
            master_seed: None,
            bin_width: DEFAULT_BIN_WIDTH,
            min_prominence: DEFAULT_MIN_PROMINENCE,
            window: Window::None,
            omega_threshold: None,
            ground_truth: GroundTruth::default(),
            out_dir: out_dir.into(),
            workers: None,
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.v_grid.validate("v_grid")?;
        self.delta_grid.validate("delta_grid")?;
        if self.v_grid.min < 0.0 {
            return Err(invalid("v_grid", "couplings must be >= 0"));
        }
        ModelParams::new(self.gamma, self.v_grid.min, self.delta_grid.min, self.t_max)?;
        TimeGrid::new(self.t_max, self.dt)?;
        if self.n_traj > 0 {
            if self.master_seed.is_none() {
                return Err(invalid("master_seed", "required when n_traj > 0"));
            }
            if !(self.bin_width > 0.0 && self.bin_width <= self.t_max) {
                return Err(Error::InvalidBinning(format!(
                    "bin width {} must lie in (0, T = {}]",
                    self.bin_width, self.t_max
                )));
            }
        }
        if !(self.min_prominence >= 0.0) {
            return Err(invalid("min_prominence", "must be >= 0"));
        }
        if let Some(w) = self.workers {
            if w == 0 {
                return Err(invalid("workers", "must be >= 1"));
            }
        }
        Ok(())
    }

    /// Configured workers, overridden by `NM_WORKERS` when set.
    pub fn effective_workers(&self) -> Result<Option<usize>> {
        resolve_workers(self.workers)
    }

    fn base(&self) -> ModelParams {
        ModelParams {
            gamma: self.gamma,
            v: 0.0,
            delta: 0.0,
            c0: Complex64::new(1.0, 0.0),
            t_max: self.t_max,
        }
    }
}

/// `NM_WORKERS` if set, else `configured`.
pub fn resolve_workers(configured: Option<usize>) -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(invalid("workers", format!("{WORKERS_ENV}={s:?} is not a positive integer"))),
        },
        Err(_) => Ok(configured),
    }
}

/// Runs `f` on a pool with the given number of threads (global pool if
/// `None`).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| invalid("workers", e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub delta: f64,
    pub v: f64,
    pub omega: f64,
    /// Measure over the ground-truth horizon.
    pub n_value: Option<f64>,
    pub omega_peak: Option<f64>,
    pub prominence: Option<f64>,
    pub verdict: Option<VerdictLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub index: usize,
    pub delta: f64,
    pub v: f64,
    pub error: String,
}

/// Everything needed to rerun a sweep, plus what it produced in aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepManifest {
    pub engine_version: String,
    pub gamma: f64,
    pub t_max: f64,
    pub dt: f64,
    pub v_grid: GridSpec,
    pub delta_grid: GridSpec,
    pub n_traj: u64,
    pub master_seed: Option<u64>,
    pub bin_width: f64,
    pub min_prominence: f64,
    pub window: Window,
    pub ground_truth: GroundTruth,
    pub omega_threshold: Option<f64>,
    /// `"config"` or `"markovian-cells"`.
    pub omega_threshold_source: String,
    pub n_cells: usize,
    pub failures: Vec<CellFailure>,
}

/// Sweep results, delta-major: cell `(i, j)` is `delta_i`, `V_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMap {
    pub manifest: SweepManifest,
    pub deltas: Vec<f64>,
    pub vs: Vec<f64>,
    pub cells: Vec<Cell>,
}

impl RegionMap {
    pub fn cell(&self, i_delta: usize, j_v: usize) -> &Cell {
        &self.cells[i_delta * self.vs.len() + j_v]
    }

    pub fn all_ok(&self) -> bool {
        self.manifest.failures.is_empty()
    }

    /// `delta,v,n_value,omega,omega_peak,prominence,verdict`; failed
    /// entries are left empty and the verdict reads `Error`.
    pub fn write_cells_csv(&self, path: &Path) -> Result<()> {
        let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
        write_with(path, |w| {
            writeln!(w, "delta,v,n_value,omega,omega_peak,prominence,verdict")?;
            for c in &self.cells {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    num(c.delta),
                    num(c.v),
                    opt(c.n_value),
                    num(c.omega),
                    opt(c.omega_peak),
                    opt(c.prominence),
                    c.verdict.map_or("Error", VerdictLabel::as_str)
                )?;
            }
            Ok(())
        })
    }

    /// `manifest.json` and `cells.csv` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join("manifest.json"), &self.manifest)?;
        self.write_cells_csv(&dir.join("cells.csv"))
    }
}

struct Partial {
    n_value: f64,
    nonmarkovian: bool,
    peak: Option<Peak>,
}

fn evaluate_cell(cfg: &SweepConfig, index: usize, p: &ModelParams) -> Result<Partial> {
    p.validate()?;
    let nm = cfg.ground_truth.measure(p)?;
    let flux = if cfg.n_traj > 0 {
        let seed = trajectory_seed(cfg.master_seed.unwrap_or_default(), index as u64);
        simulate_record(p, cfg.n_traj, seed)?.binned_flux(cfg.bin_width)?
    } else {
        photon_flux_analytic(p, TimeGrid::new(p.t_max, cfg.dt / p.gamma)?)
    };
    let spectrum = dft_windowed(&detrend(&flux), flux.dt(), cfg.window)?;
    let peak = match dominant_peak(&spectrum) {
        Ok(peak) => Some(peak),
        Err(Error::NoSignal { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(Partial {
        n_value: nm.n_value,
        nonmarkovian: nm.n_value > cfg.ground_truth.eps_n,
        peak,
    })
}

/// Evaluates every cell: long-horizon measure, coherent frequency, and the
/// spectral verdict refined by the ground truth.
pub fn run_sweep(cfg: &SweepConfig) -> Result<RegionMap> {
    cfg.validate()?;
    let deltas = cfg.delta_grid.values();
    let vs = cfg.v_grid.values();
    let base = cfg.base();
    let points: Vec<ModelParams> = deltas
        .iter()
        .flat_map(|&delta| vs.iter().map(move |&v| ModelParams { v, delta, ..base }))
        .collect();
    let partials: Vec<Result<Partial>> = with_workers(cfg.effective_workers()?, || {
        points
            .par_iter()
            .enumerate()
            .map(|(i, p)| evaluate_cell(cfg, i, p))
            .collect()
    })?;

    let (omega_threshold, source) = match cfg.omega_threshold {
        Some(w) => (Some(w), "config"),
        None => {
            let best = points
                .iter()
                .zip(&partials)
                .filter(|(_, r)| matches!(r, Ok(c) if !c.nonmarkovian))
                .map(|(p, _)| coherent_frequency(p.v, p.delta))
                .fold(None, |m: Option<f64>, w| Some(m.map_or(w, |m| m.max(w))));
            (best, "markovian-cells")
        }
    };

    let mut failures = Vec::new();
    let cells = points
        .iter()
        .zip(partials)
        .enumerate()
        .map(|(index, (p, r))| {
            let omega = coherent_frequency(p.v, p.delta);
            match r {
                Ok(c) => {
                    let detected = match (&c.peak, omega_threshold) {
                        (Some(peak), Some(th)) => {
                            detector_label(peak, th, cfg.min_prominence) == VerdictLabel::NonMarkovianDetected
                        }
                        _ => false,
                    };
                    let label = if detected {
                        VerdictLabel::NonMarkovianDetected
                    } else if c.nonmarkovian {
                        VerdictLabel::NonMarkovianUndetectable
                    } else {
                        VerdictLabel::Markovian
                    };
                    Cell {
                        delta: p.delta,
                        v: p.v,
                        omega,
                        n_value: Some(c.n_value),
                        omega_peak: c.peak.map(|x| x.omega),
                        prominence: c.peak.map(|x| x.prominence),
                        verdict: Some(label),
                        error: None,
                    }
                }
                Err(e) => {
                    log::warn!("cell {index} (delta={}, v={}) failed: {e}", p.delta, p.v);
                    failures.push(CellFailure {
                        index,
                        delta: p.delta,
                        v: p.v,
                        error: e.to_string(),
                    });
                    Cell {
                        delta: p.delta,
                        v: p.v,
                        omega,
                        n_value: None,
                        omega_peak: None,
                        prominence: None,
                        verdict: None,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect();

    Ok(RegionMap {
        manifest: SweepManifest {
            engine_version: ENGINE_VERSION.to_string(),
            gamma: cfg.gamma,
            t_max: cfg.t_max,
            dt: cfg.dt,
            v_grid: cfg.v_grid,
            delta_grid: cfg.delta_grid,
            n_traj: cfg.n_traj,
            master_seed: cfg.master_seed,
            bin_width: cfg.bin_width,
            min_prominence: cfg.min_prominence,
            window: cfg.window,
            ground_truth: cfg.ground_truth,
            omega_threshold,
            omega_threshold_source: source.to_string(),
            n_cells: points.len(),
            failures,
        },
        deltas,
        vs,
        cells,
    })
}

/// Runs the sweep and writes it to `cfg.out_dir`.
pub fn run_and_write(cfg: &SweepConfig) -> Result<RegionMap> {
    let map = run_sweep(cfg)?;
    map.write(&cfg.out_dir)?;
    Ok(map)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FigureOptions {
    /// Points per axis of the threshold-figure grid.
    pub grid_points: usize,
    /// Threshold used for the spectra figure; computed on the
    /// threshold-figure grid when absent.
    pub omega_threshold: Option<f64>,
    pub workers: Option<usize>,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self {
            grid_points: FIG3_DEFAULT_POINTS,
            omega_threshold: None,
            workers: None,
        }
    }
}

/// Couplings of the population/flux figure: one Markovian value, then
/// `gamma/2` and `gamma`.
pub const FIG1_COUPLINGS: [f64; 3] = [0.2, 0.5, 1.0];
pub const FIG1_DETUNINGS: [f64; 2] = [0.0, 1.0];
/// `(delta, V)` pairs of the spectra figure.
pub const FIG4_PAIRS: [(f64, f64); 4] = [(2.0, 2.0), (0.0, 0.9), (1.0, 0.7), (1.7, 0.3)];

fn tag(delta: f64, v: f64) -> String {
    format!("d{delta}_v{v}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub threshold: Threshold,
    pub v_range: (f64, f64),
    pub delta_range: (f64, f64),
    pub grid_points: usize,
    pub ground_truth: GroundTruth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub delta: f64,
    pub v: f64,
    /// Label of the spectral test on its own.
    pub detector: VerdictLabel,
    /// Same verdict with inconclusive labels replaced by the ground truth.
    pub verdict: RegionVerdict,
    pub file: String,
}

/// Ground-truth flags and threshold on the default threshold-figure domain.
pub fn fig3_threshold(grid_points: usize) -> Result<(Vec<f64>, Vec<f64>, Vec<bool>, Threshold)> {
    if grid_points < 2 {
        return Err(invalid("grid_points", "must be >= 2"));
    }
    let vs = GridSpec::new(FIG3_V_RANGE.0, FIG3_V_RANGE.1, grid_points).values();
    let deltas = GridSpec::new(FIG3_DELTA_RANGE.0, FIG3_DELTA_RANGE.1, grid_points).values();
    let flags = nonmarkovian_grid(&ModelParams::default(), &vs, &deltas, &GroundTruth::default())?;
    let threshold = threshold_from_flags(&vs, &deltas, &flags)?;
    Ok((vs, deltas, flags, threshold))
}

/// Writes the dataset of figure `id` under `out_dir/fig<id>/` and returns
/// the files written.
pub fn figure_datasets(id: u32, out_dir: &Path, opts: &FigureOptions) -> Result<Vec<PathBuf>> {
    if !(1..=4).contains(&id) {
        return Err(Error::UnknownFigure(id));
    }
    let dir = out_dir.join(format!("fig{id}"));
    with_workers(resolve_workers(opts.workers)?, || match id {
        1 => figure1(&dir),
        2 => figure2(&dir),
        3 => figure3(&dir, opts),
        _ => figure4(&dir, opts),
    })?
}

fn figure1(dir: &Path) -> Result<Vec<PathBuf>> {
    let grid = TimeGrid::new(DEFAULT_T_MAX, DEFAULT_DT)?;
    let mut files = Vec::new();
    for &delta in &FIG1_DETUNINGS {
        for &v in &FIG1_COUPLINGS {
            let series = amplitudes_exact(&ModelParams::unit(v, delta), grid);
            let pop = dir.join(format!("population_{}.csv", tag(delta, v)));
            series.write_population_csv(&pop, 1.0)?;
            let flux = dir.join(format!("flux_{}.csv", tag(delta, v)));
            flux_from_amplitudes(&series).write_csv(&flux)?;
            files.push(pop);
            files.push(flux);
        }
    }
    files.push(plot_stub(dir, FIG1_PLOT)?);
    Ok(files)
}

/// Rows of the sign maps.
pub const FIG2_DELTA_RANGE: (f64, f64, usize) = (0.0, 2.0, 201);
pub const FIG2_V_RANGE: (f64, f64, usize) = (0.05, 1.2, 116);
pub const FIG2_TIMES: usize = 700;

fn figure2(dir: &Path) -> Result<Vec<PathBuf>> {
    let base = ModelParams::default();
    let (d0, d1, dn) = FIG2_DELTA_RANGE;
    let (v0, v1, vn) = FIG2_V_RANGE;
    let top = sign_map(
        &base,
        SignAxis::Detuning { v: 1.0 },
        &GridSpec::new(d0, d1, dn).values(),
        FIG2_TIMES,
    )?;
    let bottom = sign_map(
        &base,
        SignAxis::Coupling { delta: 1.0 },
        &GridSpec::new(v0, v1, vn).values(),
        FIG2_TIMES,
    )?;
    let a = dir.join("sign_map_v1.csv");
    let b = dir.join("sign_map_d1.csv");
    top.write_csv(&a)?;
    bottom.write_csv(&b)?;
    Ok(vec![a, b, plot_stub(dir, FIG2_PLOT)?])
}

fn figure3(dir: &Path, opts: &FigureOptions) -> Result<Vec<PathBuf>> {
    let (vs, deltas, flags, threshold) = fig3_threshold(opts.grid_points)?;
    let curve = markovian_boundary(
        &ModelParams::default(),
        &deltas,
        FIG3_V_RANGE,
        DEFAULT_TOL_V,
        &GroundTruth::default(),
    )?;
    let boundary = dir.join("boundary.csv");
    curve.write_csv(&boundary)?;
    let omega_map = dir.join("omega_map.csv");
    write_with(&omega_map, |w| {
        writeln!(w, "delta,v,omega,markovian")?;
        for (i, &delta) in deltas.iter().enumerate() {
            for (j, &v) in vs.iter().enumerate() {
                let markovian = !flags[i * vs.len() + j];
                writeln!(
                    w,
                    "{},{},{},{}",
                    num(delta),
                    num(v),
                    num(coherent_frequency(v, delta)),
                    u8::from(markovian)
                )?;
            }
        }
        Ok(())
    })?;
    let report = dir.join("threshold.json");
    write_json(
        &report,
        &ThresholdReport {
            threshold,
            v_range: FIG3_V_RANGE,
            delta_range: FIG3_DELTA_RANGE,
            grid_points: opts.grid_points,
            ground_truth: GroundTruth::default(),
        },
    )?;
    // bisection cross-check of the grid value
    if let Ok(t) = threshold_frequency(&curve) {
        log::info!("threshold from grid {:.4}, from boundary {:.4}", threshold.omega_m, t.omega_m);
    }
    Ok(vec![boundary, omega_map, report, plot_stub(dir, FIG3_PLOT)?])
}

fn figure4(dir: &Path, opts: &FigureOptions) -> Result<Vec<PathBuf>> {
    let omega_m = match opts.omega_threshold {
        Some(w) => w,
        None => fig3_threshold(opts.grid_points)?.3.omega_m,
    };
    let cfg = ClassifyConfig::default();
    let mut files = Vec::new();
    let mut entries = Vec::new();
    for &(delta, v) in &FIG4_PAIRS {
        let p = ModelParams::unit(v, delta);
        let flux = photon_flux_analytic(&p, TimeGrid::new(p.t_max, cfg.dt)?);
        let spectrum = dft_windowed(&detrend(&flux), flux.dt(), cfg.window)?;
        let name = format!("spectrum_{}.csv", tag(delta, v));
        let path = dir.join(&name);
        spectrum.write_csv(&path, 1.0)?;
        files.push(path);
        let verdict = classify(&p, omega_m, &cfg)?;
        let detector = verdict.label;
        let nonmarkovian = GroundTruth::default().is_nonmarkovian(&p)?;
        entries.push(SpectrumEntry {
            delta,
            v,
            detector,
            verdict: verdict.refined(nonmarkovian),
            file: name,
        });
    }
    let verdicts = dir.join("verdicts.json");
    write_json(&verdicts, &entries)?;
    files.push(verdicts);
    files.push(plot_stub(dir, FIG4_PLOT)?);
    Ok(files)
}

fn plot_stub(dir: &Path, body: &str) -> Result<PathBuf> {
    let path = dir.join("plot.py");
    write_with(&path, |w| {
        w.write_all(body.as_bytes())?;
        Ok(())
    })?;
    Ok(path)
}

const FIG1_PLOT: &str = r#"import glob
import matplotlib.pyplot as plt
import numpy as np

fig, ax = plt.subplots(2, 2, sharex=True, figsize=(8, 6))
for col, d in enumerate(["0", "1"]):
    for f in sorted(glob.glob(f"population_d{d}_v*.csv")):
        t, p = np.loadtxt(f, delimiter=",", skiprows=1, unpack=True)
        ax[0, col].plot(t, p, label=f.split("_v")[1][:-4])
    for f in sorted(glob.glob(f"flux_d{d}_v*.csv")):
        t, r = np.loadtxt(f, delimiter=",", skiprows=1, unpack=True)
        ax[1, col].plot(t, r)
    ax[1, col].set_xlabel("t")
ax[0, 0].set_ylabel("|c|^2")
ax[1, 0].set_ylabel("R")
ax[0, 0].legend(title="V")
plt.savefig("fig1.png", dpi=150)
"#;

const FIG2_PLOT: &str = r#"import matplotlib.pyplot as plt
import numpy as np

fig, ax = plt.subplots(2, 1, figsize=(6, 7))
for a, f, label in [(ax[0], "sign_map_v1.csv", "delta"), (ax[1], "sign_map_d1.csv", "V")]:
    t, y, c, b = np.loadtxt(f, delimiter=",", skiprows=1, unpack=True)
    a.scatter(t[b > 0], y[b > 0], s=1, c="orange")
    a.scatter(t[c > 0], y[c > 0], s=1, c="darkred")
    a.set_xlabel("t")
    a.set_ylabel(label)
plt.savefig("fig2.png", dpi=150)
"#;

const FIG3_PLOT: &str = r#"import json
import matplotlib.pyplot as plt
import numpy as np

d, v, w, m = np.loadtxt("omega_map.csv", delimiter=",", skiprows=1, unpack=True)
n = len(np.unique(d))
th = json.load(open("threshold.json"))["threshold"]
plt.pcolormesh(d.reshape(n, -1), v.reshape(n, -1), w.reshape(n, -1), shading="auto")
plt.colorbar(label="Omega")
bd, bv = np.loadtxt("boundary.csv", delimiter=",", skiprows=1, unpack=True, ndmin=2)
plt.plot(bd, bv, "k-")
plt.contour(d.reshape(n, -1), v.reshape(n, -1), w.reshape(n, -1), [th["omega_m"]], colors="k", linestyles=":")
plt.plot(th["delta_star"], th["v_star"], "w*", ms=12)
plt.xlabel("delta")
plt.ylabel("V")
plt.savefig("fig3.png", dpi=150)
"#;

const FIG4_PLOT: &str = r#"import json
import matplotlib.pyplot as plt
import numpy as np

for e in json.load(open("verdicts.json")):
    w, p = np.loadtxt(e["file"], delimiter=",", skiprows=1, unpack=True)
    plt.semilogy(w[1:], p[1:], label=f"({e['delta']}, {e['v']}) {e['verdict']['label']}")
    th = e["verdict"]["omega_threshold"]
plt.axvline(th, color="k", ls=":")
plt.xlim(0, 8)
plt.xlabel("omega")
plt.ylabel("|S|^2")
plt.legend()
plt.savefig("fig4.png", dpi=150)
"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_values_hit_both_ends() {
        let g = GridSpec::new(0.05, 1.2, 200).values();
        assert_eq!(g.len(), 200);
        assert_eq!(g[0], 0.05);
        assert_eq!(g[199], 1.2);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(GridSpec::new(0.3, 0.3, 1).values(), vec![0.3]);
    }

    #[test]
    fn bad_grids_are_rejected() {
        assert!(GridSpec::new(0.0, 1.0, 0).validate("v_grid").is_err());
        assert!(GridSpec::new(1.0, 0.0, 5).validate("v_grid").is_err());
        assert!(GridSpec::new(0.0, 1.0, 1).validate("v_grid").is_err());
    }

    #[test]
    fn stochastic_sweep_needs_seed() {
        let mut cfg = SweepConfig::new(GridSpec::new(1.0, 1.0, 1), GridSpec::new(0.0, 0.0, 1), "unused");
        cfg.n_traj = 10;
        assert!(matches!(
            cfg.validate(),
            Err(Error::InvalidParameter { field: "master_seed", .. })
        ));
        cfg.master_seed = Some(1);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = SweepConfig::new(GridSpec::new(0.1, 0.3, 3), GridSpec::new(0.0, 0.0, 1), "out");
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<SweepConfig>(&text).unwrap(), cfg);
        let minimal: SweepConfig = serde_json::from_str(
            r#"{"v_grid":{"min":0.1,"max":0.3,"count":3},"delta_grid":{"min":0,"max":0,"count":1},"out_dir":"x"}"#,
        )
        .unwrap();
        assert_eq!(minimal.t_max, DEFAULT_T_MAX);
        assert_eq!(minimal.n_traj, 0);
    }

    #[test]
    fn unknown_figure() {
        assert!(matches!(
            figure_datasets(9, Path::new("unused"), &FigureOptions::default()),
            Err(Error::UnknownFigure(9))
        ));
    }
}
