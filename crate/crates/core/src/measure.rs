//! Trace-distance non-Markovianity of the atom.
//!
//! For the orthogonal pair `|1><1|`, `|0><0|` the trace distance equals the
//! excited-state population, so the measure is the total increase of
//! `|c(t)|^2` over the intervals where it grows. Interval endpoints are
//! located by bisection on the analytic derivative and the increase is
//! telescoped exactly, with no quadrature.

use std::io::Write;
use std::ops::ControlFlow;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{amplitudes_analytic, observable_rates, Propagator, RotatingState};
use crate::error::{invalid, Error, Result};
use crate::io::{num, write_with};
use crate::params::{ModelParams, TimeGrid, DEFAULT_DT};

/// Bisection tolerance for revival endpoints, in units of `1/gamma`.
pub const ENDPOINT_TOL: f64 = 1e-8;
/// Default positivity threshold for [`is_nonmarkovian`].
pub const DEFAULT_EPS_N: f64 = 1e-10;
/// Default bisection tolerance on `V` for the boundary, in units of `gamma`.
pub const DEFAULT_TOL_V: f64 = 1e-3;

/// Propagator drift is reset against the closed form this often.
const REANCHOR_EVERY: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmResult {
    pub n_value: f64,
    /// Disjoint, sorted `(t_start, t_end)` with growing population.
    pub revival_intervals: Vec<(f64, f64)>,
    pub grid: TimeGrid,
}

fn require_excited(params: &ModelParams) -> Result<()> {
    if (params.c0 - Complex64::new(1.0, 0.0)).norm() > 1e-12 {
        return Err(Error::UnsupportedInitialState {
            re: params.c0.re,
            im: params.c0.im,
        });
    }
    Ok(())
}

fn population(params: &ModelParams, t: f64) -> f64 {
    amplitudes_analytic(params, t).0.norm_sqr()
}

fn population_rate(params: &ModelParams, t: f64) -> f64 {
    observable_rates(params, t).population
}

/// Last point where `rate <= 0`, given `rate(lo) <= 0 < rate(hi)` or the
/// reverse; returns the point of the bracket on the non-positive side.
fn sign_change(params: &ModelParams, mut lo: f64, mut hi: f64) -> f64 {
    let lo_pos = population_rate(params, lo) > 0.0;
    while hi - lo > ENDPOINT_TOL {
        let mid = 0.5 * (lo + hi);
        if (population_rate(params, mid) > 0.0) == lo_pos {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo_pos {
        hi
    } else {
        lo
    }
}

/// Walks the grid and reports each revival as `(t_start, t_end, increase)`.
fn scan_revivals<F>(params: &ModelParams, grid: TimeGrid, mut on_revival: F)
where
    F: FnMut(f64, f64, f64) -> ControlFlow<()>,
{
    if params.v == 0.0 {
        return;
    }
    let h = grid.dt();
    let prop = Propagator::new(params, h);
    let mut state = RotatingState::initial(params);
    let mut run_start: Option<usize> = None;
    for i in 0..grid.len() {
        if i > 0 {
            state = if i % REANCHOR_EVERY == 0 {
                RotatingState::at(params, grid.time(i))
            } else {
                prop.step(state)
            };
        }
        let positive = prop.population_rate(state) > 0.0;
        let last = i + 1 == grid.len();
        match (run_start, positive) {
            (None, true) => {
                run_start = Some(i);
                if !last {
                    continue;
                }
            }
            (Some(_), true) if !last => continue,
            (None, false) => continue,
            _ => {}
        }
        let first = run_start.take().expect("open run");
        let t_start = if first == 0 {
            0.0
        } else {
            sign_change(params, grid.time(first - 1), grid.time(first))
        };
        let t_end = if positive && last {
            grid.t_max
        } else {
            sign_change(params, grid.time(i - 1), grid.time(i))
        };
        let increase = population(params, t_end) - population(params, t_start);
        if increase > 0.0 && on_revival(t_start, t_end, increase).is_break() {
            return;
        }
    }
}

/// Measure of non-Markovianity on `[0, grid.t_max]` for `c(0) = 1`.
pub fn nm_measure(params: &ModelParams, grid: TimeGrid) -> Result<NmResult> {
    params.validate()?;
    require_excited(params)?;
    let mut n_value = 0.0;
    let mut revival_intervals = Vec::new();
    scan_revivals(params, grid, |a, b, inc| {
        n_value += inc;
        revival_intervals.push((a, b));
        ControlFlow::Continue(())
    });
    Ok(NmResult {
        n_value,
        revival_intervals,
        grid,
    })
}

/// `true` iff the measure over `[0, params.t_max]` exceeds `eps_n`.
pub fn is_nonmarkovian(params: &ModelParams, eps_n: f64) -> Result<bool> {
    if !(eps_n > 0.0) {
        return Err(invalid("eps_n", format!("must be > 0, got {eps_n}")));
    }
    let grid = TimeGrid::new(params.t_max, DEFAULT_DT / params.gamma)?;
    Ok(nm_measure(params, grid)?.n_value > eps_n)
}

/// Long-horizon classification used as ground truth for the boundary,
/// the threshold frequency and the sweep verdicts.
///
/// Just above `V = gamma/4` at zero detuning the first revival happens
/// late (it diverges as the critical coupling is approached) and is
/// exponentially small, so the observation window of the figures is far
/// too short to resolve the boundary. Revival increases are exact
/// differences of the closed-form population, which carries full relative
/// precision down to the smallest values reached within the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Horizon in units of `1/gamma`.
    pub horizon: f64,
    /// Scan step in units of `1/gamma`.
    pub scan_dt: f64,
    /// Positivity threshold on the measure.
    pub eps_n: f64,
}

impl Default for GroundTruth {
    fn default() -> Self {
        Self {
            horizon: 200.0,
            scan_dt: 1e-2,
            eps_n: 1e-40,
        }
    }
}

impl GroundTruth {
    fn grid(&self, params: &ModelParams) -> Result<TimeGrid> {
        TimeGrid::new(self.horizon / params.gamma, self.scan_dt / params.gamma)
    }

    /// Full measure over the ground-truth horizon.
    pub fn measure(&self, params: &ModelParams) -> Result<NmResult> {
        let p = params.with_t_max(self.horizon / params.gamma);
        nm_measure(&p, self.grid(params)?)
    }

    /// Stops at the first revival above `eps_n`.
    pub fn is_nonmarkovian(&self, params: &ModelParams) -> Result<bool> {
        params.validate()?;
        require_excited(params)?;
        let mut n = 0.0;
        let mut found = false;
        let eps = self.eps_n;
        scan_revivals(params, self.grid(params)?, |_, _, inc| {
            n += inc;
            if n > eps {
                found = true;
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        });
        Ok(found)
    }
}

/// One bracketed point of the Markovian boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub delta: f64,
    /// Smallest non-Markovian coupling found (upper end of the bracket).
    pub v_c: f64,
    /// Largest Markovian coupling found (lower end of the bracket).
    pub v_markov: f64,
}

/// A detuning at which the search interval does not straddle the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NotBracketed {
    pub delta: f64,
    pub lo_nonmarkovian: bool,
    pub hi_nonmarkovian: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurve {
    pub v_search: (f64, f64),
    pub tol_v: f64,
    pub points: Vec<BoundaryPoint>,
    pub unbracketed: Vec<NotBracketed>,
}

impl BoundaryCurve {
    /// `delta,v_c`
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_with(path, |w| {
            writeln!(w, "delta,v_c")?;
            for p in &self.points {
                writeln!(w, "{},{}", num(p.delta), num(p.v_c))?;
            }
            Ok(())
        })
    }
}

enum Bracket {
    Point(BoundaryPoint),
    Missing(NotBracketed),
}

/// Bisects on `V` for each detuning. `base` supplies `gamma`; couplings
/// and detunings are absolute (same units as `base.gamma`).
pub fn markovian_boundary(
    base: &ModelParams,
    delta_values: &[f64],
    v_search: (f64, f64),
    tol_v: f64,
    truth: &GroundTruth,
) -> Result<BoundaryCurve> {
    let (v_lo, v_hi) = v_search;
    if !(v_lo >= 0.0 && v_hi > v_lo) {
        return Err(invalid("v_search", format!("need 0 <= v_lo < v_hi, got ({v_lo}, {v_hi})")));
    }
    if !(tol_v > 0.0) {
        return Err(invalid("tol_v", "must be > 0"));
    }
    let base = ModelParams {
        c0: Complex64::new(1.0, 0.0),
        ..*base
    };
    base.validate()?;
    let results: Vec<Result<Bracket>> = delta_values
        .par_iter()
        .map(|&delta| {
            let at = |v: f64| truth.is_nonmarkovian(&ModelParams { v, delta, ..base });
            let lo_nm = at(v_lo)?;
            let hi_nm = at(v_hi)?;
            if lo_nm || !hi_nm {
                return Ok(Bracket::Missing(NotBracketed {
                    delta,
                    lo_nonmarkovian: lo_nm,
                    hi_nonmarkovian: hi_nm,
                }));
            }
            let (mut lo, mut hi) = (v_lo, v_hi);
            while hi - lo > tol_v {
                let mid = 0.5 * (lo + hi);
                if at(mid)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Ok(Bracket::Point(BoundaryPoint {
                delta,
                v_c: hi,
                v_markov: lo,
            }))
        })
        .collect();
    let mut points = Vec::new();
    let mut unbracketed = Vec::new();
    for r in results {
        match r? {
            Bracket::Point(p) => points.push(p),
            Bracket::Missing(m) => unbracketed.push(m),
        }
    }
    Ok(BoundaryCurve {
        v_search,
        tol_v,
        points,
        unbracketed,
    })
}

/// Which parameter varies along the rows of a [`SignMap`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignAxis {
    /// Rows over detuning at fixed coupling.
    Detuning { v: f64 },
    /// Rows over coupling at fixed detuning.
    Coupling { delta: f64 },
}

/// Signs of `C(t) = d|c|^2/dt` and `B(t) = d(gamma|b|^2)/dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignMap {
    pub axis: SignAxis,
    /// Row parameter values (detunings or couplings).
    pub rows: Vec<f64>,
    /// `t_j = j T / n`, `j = 1..=n`.
    pub times: Vec<f64>,
    pub c_pos: Vec<Vec<bool>>,
    pub b_pos: Vec<Vec<bool>>,
}

/// Evaluates the sign maps; `t = 0` is excluded because both derivatives
/// vanish there.
pub fn sign_map(base: &ModelParams, axis: SignAxis, rows: &[f64], n_times: usize) -> Result<SignMap> {
    base.validate()?;
    if n_times == 0 {
        return Err(invalid("n_times", "must be >= 1"));
    }
    let times: Vec<f64> = (1..=n_times).map(|j| j as f64 * base.t_max / n_times as f64).collect();
    let (c_pos, b_pos) = rows
        .par_iter()
        .map(|&r| {
            let p = match axis {
                SignAxis::Detuning { v } => ModelParams { v, delta: r, ..*base },
                SignAxis::Coupling { delta } => ModelParams { v: r, delta, ..*base },
            };
            times
                .iter()
                .map(|&t| {
                    let rates = observable_rates(&p, t);
                    (rates.population > 0.0, rates.flux > 0.0)
                })
                .unzip::<bool, bool, Vec<bool>, Vec<bool>>()
        })
        .unzip();
    Ok(SignMap {
        axis,
        rows: rows.to_vec(),
        times,
        c_pos,
        b_pos,
    })
}

impl SignMap {
    /// `t,delta,c_pos,b_pos` (or `t,v,...` for coupling rows), flags as 0/1.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let col = match self.axis {
            SignAxis::Detuning { .. } => "delta",
            SignAxis::Coupling { .. } => "v",
        };
        write_with(path, |w| {
            writeln!(w, "t,{col},c_pos,b_pos")?;
            for (r, row) in self.rows.iter().enumerate() {
                for (j, t) in self.times.iter().enumerate() {
                    writeln!(
                        w,
                        "{},{},{},{}",
                        num(*t),
                        num(*row),
                        u8::from(self.c_pos[r][j]),
                        u8::from(self.b_pos[r][j])
                    )?;
                }
            }
            Ok(())
        })
    }
}

/// Maximal runs of `true` as inclusive index pairs.
pub fn true_runs(flags: &[bool]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &f) in flags.iter().enumerate() {
        match (f, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, flags.len() - 1));
    }
    runs
}
