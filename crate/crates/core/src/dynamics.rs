//! Atom and pseudomode amplitudes in the single-excitation sector.
//!
//! The unnormalised no-jump state is
//! `c0_ground |0,0> + c(t) |1,0> + b(t) |0,1>` with
//!
//! ```text
//! dc/dt = -i V e^{-i delta t} b
//! db/dt = -(gamma/2) b - i V e^{i delta t} c
//! ```
//!
//! and `b(0) = 0`. The closed forms are written in terms of
//! `shc(z) = sinh(z)/z`, which makes them manifestly even in the splitting
//! parameter `d` and regular at `d = 0`.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::{num, write_with};
use crate::params::{ModelParams, TimeGrid};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Below this `|d t / 4|` the degenerate (`d -> 0`) limit is used.
pub const DEGENERATE_THRESHOLD: f64 = 1e-6;

/// `d = sqrt(-16 V^2 + (gamma + 2 i delta)^2)`, principal branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplittingParameter {
    pub d: Complex64,
}

impl SplittingParameter {
    pub fn new(gamma: f64, v: f64, delta: f64) -> Self {
        Self {
            d: splitting_squared(gamma, v, delta).sqrt(),
        }
    }

    pub fn negated(self) -> Self {
        Self { d: -self.d }
    }
}

/// The radicand `-16 V^2 + (gamma + 2 i delta)^2`.
pub fn splitting_squared(gamma: f64, v: f64, delta: f64) -> Complex64 {
    let a = Complex64::new(gamma, 2.0 * delta);
    a * a - 16.0 * v * v
}

pub fn splitting(params: &ModelParams) -> SplittingParameter {
    SplittingParameter::new(params.gamma, params.v, params.delta)
}

/// Returns `(e^{-w} cosh z, e^{-w} sinh(z)/z)` without intermediate overflow.
fn damped_cosh_shc(z: Complex64, w: Complex64) -> (Complex64, Complex64) {
    let r = z.norm();
    if r < DEGENERATE_THRESHOLD {
        let e = (-w).exp();
        return (e, e);
    }
    let ep = (z - w).exp();
    let em = (-z - w).exp();
    let cosh = 0.5 * (ep + em);
    let shc = if r < 1e-3 {
        let z2 = z * z;
        (-w).exp() * (1.0 + z2 / 6.0 + z2 * z2 / 120.0)
    } else {
        (ep - em) / (2.0 * z)
    };
    (cosh, shc)
}

/// Closed-form `(c(t), b(t))` using the given branch of `d`.
pub fn amplitudes_for_branch(params: &ModelParams, split: SplittingParameter, t: f64) -> (Complex64, Complex64) {
    let a = Complex64::new(params.gamma, 2.0 * params.delta);
    let z = split.d * (0.25 * t);
    let (ch, shc) = damped_cosh_shc(z, a * (0.25 * t));
    let c = params.c0 * (ch + a * (0.25 * t) * shc);
    let phase = Complex64::from_polar(1.0, params.delta * t);
    let b = -I * params.v * params.c0 * t * phase * shc;
    (c, b)
}

/// Closed-form amplitudes `(c(t), b(t))`.
///
/// The sign of `b` is chosen so that `db/dt(0) = -i V c(0)`, as the
/// equation of motion requires.
pub fn amplitudes_analytic(params: &ModelParams, t: f64) -> (Complex64, Complex64) {
    amplitudes_for_branch(params, splitting(params), t)
}

/// Time derivatives `(dc/dt, db/dt)` from the equations of motion.
pub fn amplitude_rates(params: &ModelParams, t: f64, c: Complex64, b: Complex64) -> (Complex64, Complex64) {
    let phase = Complex64::from_polar(1.0, params.delta * t);
    let dc = -I * params.v * phase.conj() * b;
    let db = -0.5 * params.gamma * b - I * params.v * phase * c;
    (dc, db)
}

/// Instantaneous derivatives of the observables at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservableRates {
    /// `d|c|^2/dt`
    pub population: f64,
    /// `d(gamma |b|^2)/dt`
    pub flux: f64,
}

pub fn observable_rates(params: &ModelParams, t: f64) -> ObservableRates {
    let (c, b) = amplitudes_analytic(params, t);
    let (dc, db) = amplitude_rates(params, t, c, b);
    ObservableRates {
        population: 2.0 * (c.conj() * dc).re,
        flux: 2.0 * params.gamma * (b.conj() * db).re,
    }
}

/// Exact one-step propagator in the frame co-rotating with the detuning.
///
/// With `x = e^{i delta t/2} c` and `y = e^{-i delta t/2} b` the equations
/// of motion have constant coefficients, so `exp(M h)` advances the state
/// by `h` exactly. Used wherever long uniform scans are needed.
#[derive(Debug, Clone, Copy)]
pub struct Propagator {
    m: [[Complex64; 2]; 2],
    v: f64,
    gamma: f64,
}

impl Propagator {
    pub fn new(params: &ModelParams, h: f64) -> Self {
        let a = Complex64::new(params.gamma, 2.0 * params.delta);
        let split = splitting(params);
        let (ch, shc) = damped_cosh_shc(split.d * (0.25 * h), Complex64::new(0.25 * params.gamma * h, 0.0));
        let off = -I * params.v * h * shc;
        let diag = a * (0.25 * h) * shc;
        Self {
            m: [[ch + diag, off], [off, ch - diag]],
            v: params.v,
            gamma: params.gamma,
        }
    }

    #[inline]
    pub fn step(&self, state: RotatingState) -> RotatingState {
        let m = &self.m;
        RotatingState {
            x: m[0][0] * state.x + m[0][1] * state.y,
            y: m[1][0] * state.x + m[1][1] * state.y,
        }
    }

    /// `d|c|^2/dt` at the given state.
    #[inline]
    pub fn population_rate(&self, s: RotatingState) -> f64 {
        2.0 * self.v * (s.x.conj() * s.y).im
    }

    /// `d(gamma |b|^2)/dt` at the given state.
    #[inline]
    pub fn flux_rate(&self, s: RotatingState) -> f64 {
        self.gamma * (-self.gamma * s.y.norm_sqr() + 2.0 * self.v * (s.y.conj() * s.x).im)
    }
}

/// Amplitudes in the co-rotating frame; `|x| = |c|`, `|y| = |b|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotatingState {
    pub x: Complex64,
    pub y: Complex64,
}

impl RotatingState {
    pub fn initial(params: &ModelParams) -> Self {
        Self {
            x: params.c0,
            y: Complex64::new(0.0, 0.0),
        }
    }

    pub fn at(params: &ModelParams, t: f64) -> Self {
        let (c, b) = amplitudes_analytic(params, t);
        let half = Complex64::from_polar(1.0, 0.5 * params.delta * t);
        Self { x: c * half, y: b * half.conj() }
    }
}

/// Amplitudes sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeSeries {
    pub grid: TimeGrid,
    pub gamma: f64,
    pub c: Vec<Complex64>,
    pub b: Vec<Complex64>,
    pub c0_ground: Complex64,
}

impl AmplitudeSeries {
    pub fn times(&self) -> Vec<f64> {
        self.grid.times()
    }

    pub fn population(&self) -> Vec<f64> {
        self.c.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn pseudomode_population(&self) -> Vec<f64> {
        self.b.iter().map(|b| b.norm_sqr()).collect()
    }

    /// Squared norm of the unnormalised no-jump state.
    pub fn survival(&self) -> Vec<f64> {
        let g = self.c0_ground.norm_sqr();
        self.c.iter().zip(&self.b).map(|(c, b)| c.norm_sqr() + b.norm_sqr() + g).collect()
    }

    /// Largest deviation from `|c|^2 + |b|^2 + gamma \int |b|^2 = |c(0)|^2`,
    /// with the integral evaluated by the trapezoid rule on the grid.
    pub fn bookkeeping_residual(&self) -> f64 {
        let start = self.c[0].norm_sqr() + self.b[0].norm_sqr();
        let flux: Vec<f64> = self.b.iter().map(|b| self.gamma * b.norm_sqr()).collect();
        let emitted = cumulative_trapezoid(&flux, self.grid.dt());
        self.c
            .iter()
            .zip(&self.b)
            .zip(&emitted)
            .map(|((c, b), e)| (c.norm_sqr() + b.norm_sqr() + e - start).abs())
            .fold(0.0, f64::max)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_with(path, |w| {
            writeln!(w, "t,re_c,im_c,re_b,im_b")?;
            for (i, (c, b)) in self.c.iter().zip(&self.b).enumerate() {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    num(self.grid.time(i)),
                    num(c.re),
                    num(c.im),
                    num(b.re),
                    num(b.im)
                )?;
            }
            Ok(())
        })
    }

    /// `t,population` with `|c(t)|^2`.
    pub fn write_population_csv(&self, path: &Path, time_scale: f64) -> Result<()> {
        write_with(path, |w| {
            writeln!(w, "t,population")?;
            for (i, c) in self.c.iter().enumerate() {
                writeln!(w, "{},{}", num(self.grid.time(i) * time_scale), num(c.norm_sqr()))?;
            }
            Ok(())
        })
    }
}

/// Closed-form amplitudes on every grid point.
pub fn amplitudes_exact(params: &ModelParams, grid: TimeGrid) -> AmplitudeSeries {
    let (c, b) = (0..grid.len()).map(|i| amplitudes_analytic(params, grid.time(i))).unzip();
    AmplitudeSeries {
        grid,
        gamma: params.gamma,
        c,
        b,
        c0_ground: params.c0_ground(),
    }
}

/// Largest step for which the fourth-order integrator is expected to stay
/// well inside `1e-8` of the closed form over `T = 14 / gamma`.
pub fn recommended_dt(params: &ModelParams) -> f64 {
    1e-2 / params.gamma.max(params.v).max(params.delta.abs()).max(1.0)
}

/// Result of the numerical integration.
#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub series: AmplitudeSeries,
    /// Set when the grid step exceeds [`recommended_dt`].
    pub step_too_large: bool,
}

/// Classical fourth-order Runge-Kutta integration of the amplitude
/// equations, one step per grid interval.
pub fn amplitudes_ode(params: &ModelParams, grid: TimeGrid) -> OdeSolution {
    let h = grid.dt();
    let step_too_large = h > recommended_dt(params);
    if step_too_large {
        log::warn!(
            "StepTooLarge: dt = {h:e} exceeds the recommended {:e}",
            recommended_dt(params)
        );
    }
    let f = |t: f64, c: Complex64, b: Complex64| amplitude_rates(params, t, c, b);
    let mut c = params.c0;
    let mut b = Complex64::new(0.0, 0.0);
    let mut cs = Vec::with_capacity(grid.len());
    let mut bs = Vec::with_capacity(grid.len());
    cs.push(c);
    bs.push(b);
    for i in 0..grid.n_steps {
        let t = i as f64 * h;
        let (k1c, k1b) = f(t, c, b);
        let (k2c, k2b) = f(t + 0.5 * h, c + 0.5 * h * k1c, b + 0.5 * h * k1b);
        let (k3c, k3b) = f(t + 0.5 * h, c + 0.5 * h * k2c, b + 0.5 * h * k2b);
        let (k4c, k4b) = f(t + h, c + h * k3c, b + h * k3b);
        c += h / 6.0 * (k1c + 2.0 * k2c + 2.0 * k3c + k4c);
        b += h / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
        cs.push(c);
        bs.push(b);
    }
    OdeSolution {
        series: AmplitudeSeries {
            grid,
            gamma: params.gamma,
            c: cs,
            b: bs,
            c0_ground: params.c0_ground(),
        },
        step_too_large,
    }
}

/// Where a flux series came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FluxKind {
    Analytic,
    McwfEstimate {
        counts: Vec<u64>,
        n_traj: u64,
        bin_width: f64,
    },
}

/// Photon flux `R(t)` out of the pseudomode.
///
/// For analytic series `times` is the sampling grid; for estimates it holds
/// the bin centres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: FluxKind,
}

impl FluxSeries {
    pub fn is_analytic(&self) -> bool {
        matches!(self.kind, FluxKind::Analytic)
    }

    /// Sample spacing (assumes a uniform axis).
    pub fn dt(&self) -> f64 {
        match &self.kind {
            FluxKind::McwfEstimate { bin_width, .. } => *bin_width,
            FluxKind::Analytic if self.times.len() > 1 => self.times[1] - self.times[0],
            FluxKind::Analytic => 0.0,
        }
    }

    /// Trapezoid estimate of the emitted probability for analytic series,
    /// rectangle sum for binned estimates.
    pub fn integral(&self) -> f64 {
        match &self.kind {
            FluxKind::Analytic => cumulative_trapezoid(&self.values, self.dt()).last().copied().unwrap_or(0.0),
            FluxKind::McwfEstimate { bin_width, .. } => self.values.iter().sum::<f64>() * bin_width,
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.write_csv_scaled(path, 1.0)
    }

    /// Writes `t,flux` with the time axis divided and the flux multiplied
    /// by `gamma` (physical units when the series was computed with
    /// `gamma = 1`).
    pub fn write_csv_scaled(&self, path: &Path, gamma: f64) -> Result<()> {
        write_with(path, |w| {
            writeln!(w, "t,flux")?;
            for (t, r) in self.times.iter().zip(&self.values) {
                writeln!(w, "{},{}", num(t / gamma), num(r * gamma))?;
            }
            Ok(())
        })
    }
}

/// `R(t) = gamma |b(t)|^2` on the grid.
pub fn photon_flux_analytic(params: &ModelParams, grid: TimeGrid) -> FluxSeries {
    flux_from_amplitudes(&amplitudes_exact(params, grid))
}

pub fn flux_from_amplitudes(series: &AmplitudeSeries) -> FluxSeries {
    FluxSeries {
        times: series.times(),
        values: series.b.iter().map(|b| series.gamma * b.norm_sqr()).collect(),
        kind: FluxKind::Analytic,
    }
}

/// Running trapezoid integral, starting at zero.
pub fn cumulative_trapezoid(values: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    if let Some(&first) = values.first() {
        out.push(0.0);
        let mut prev = first;
        for &v in &values[1..] {
            acc += 0.5 * dt * (prev + v);
            out.push(acc);
            prev = v;
        }
    }
    out
}
