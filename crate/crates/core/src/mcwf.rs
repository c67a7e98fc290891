//! Waiting-time Monte Carlo unravelling of the pseudomode master equation
//! with photon counting on the pseudomode decay channel.
//!
//! Between jumps the unnormalised state follows the deterministic
//! amplitudes of [`crate::dynamics`]; its squared norm `N^2(t)` is the
//! probability that no photon has been emitted by `t`. A trajectory draws
//! `u` uniform in `(0, 1]` and jumps at the first `t` with `N^2(t) <= u`.
//! After the jump the state is `|0>_A |0>_P` for good, so a trajectory
//! emits at most one photon.
//!
//! Random numbers: trajectory `i` uses a ChaCha8 stream seeded with
//! `splitmix64(master_seed ^ splitmix64(i))`, so records do not depend on
//! how the work is scheduled.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{amplitudes_analytic, FluxKind, FluxSeries};
use crate::error::{Error, Result};
use crate::io::{num, write_json, write_with};
use crate::params::{ModelParams, TimeGrid, DEFAULT_DT};
use crate::ENGINE_VERSION;

/// Bisection tolerance on the jump time, in units of `1/gamma`.
pub const JUMP_TIME_TOL: f64 = 1e-10;
/// Default bin width, in units of `1/gamma`.
pub const DEFAULT_BIN_WIDTH: f64 = 0.1;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of trajectory `index` under `master_seed`.
pub fn trajectory_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(index))
}

/// Uniform draw in `(0, 1]` from a trajectory seed.
pub fn uniform_from_seed(seed: u64) -> f64 {
    1.0 - ChaCha8Rng::seed_from_u64(seed).random::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryOutcome {
    /// `None` when no photon is emitted within `[0, T]`.
    pub jump_time: Option<f64>,
    pub seed: u64,
}

/// Survival probability `N^2(t)` tabulated on a uniform grid.
#[derive(Debug, Clone)]
pub struct SurvivalTable {
    params: ModelParams,
    grid: TimeGrid,
    ground: f64,
    values: Vec<f64>,
}

impl SurvivalTable {
    pub fn new(params: &ModelParams) -> Result<Self> {
        params.validate()?;
        let grid = TimeGrid::new(params.t_max, DEFAULT_DT / params.gamma)?;
        let ground = params.c0_ground().norm_sqr();
        let mut values = Vec::with_capacity(grid.len());
        let mut prev = f64::INFINITY;
        for i in 0..grid.len() {
            // clamp rounding wiggles so the table is monotone
            let s = survival_at(params, ground, grid.time(i)).min(prev);
            values.push(s);
            prev = s;
        }
        Ok(Self {
            params: *params,
            grid,
            ground,
            values,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `N^2(t)` from the closed form.
    pub fn survival(&self, t: f64) -> f64 {
        survival_at(&self.params, self.ground, t)
    }

    /// Earliest time with `N^2(t) <= u`, or `None` if `N^2(T) > u`.
    pub fn jump_time(&self, u: f64) -> Option<f64> {
        let last = *self.values.last().expect("non-empty table");
        if last > u {
            return None;
        }
        // values are non-increasing: first index with value <= u
        let i = self.values.partition_point(|&s| s > u);
        if i == 0 {
            return Some(0.0);
        }
        let (mut lo, mut hi) = (self.grid.time(i - 1), self.grid.time(i));
        while hi - lo > JUMP_TIME_TOL / self.params.gamma {
            let mid = 0.5 * (lo + hi);
            if self.survival(mid) > u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(hi)
    }

    pub fn trajectory(&self, seed: u64) -> TrajectoryOutcome {
        TrajectoryOutcome {
            jump_time: self.jump_time(uniform_from_seed(seed)),
            seed,
        }
    }
}

fn survival_at(params: &ModelParams, ground: f64, t: f64) -> f64 {
    let (c, b) = amplitudes_analytic(params, t);
    c.norm_sqr() + b.norm_sqr() + ground
}

/// One trajectory with the given seed.
pub fn simulate_trajectory(params: &ModelParams, seed: u64) -> Result<TrajectoryOutcome> {
    Ok(SurvivalTable::new(params)?.trajectory(seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub params: ModelParams,
    pub master_seed: u64,
    pub n_traj: u64,
    pub outcomes: Vec<TrajectoryOutcome>,
}

/// Runs `n_traj` trajectories in parallel.
pub fn simulate_record(params: &ModelParams, n_traj: u64, master_seed: u64) -> Result<JumpRecord> {
    if n_traj == 0 {
        return Err(crate::error::invalid("n_traj", "must be >= 1"));
    }
    let table = SurvivalTable::new(params)?;
    Ok(record_from_table(&table, n_traj, master_seed))
}

pub fn record_from_table(table: &SurvivalTable, n_traj: u64, master_seed: u64) -> JumpRecord {
    let outcomes = (0..n_traj)
        .into_par_iter()
        .map(|i| table.trajectory(trajectory_seed(master_seed, i)))
        .collect();
    JumpRecord {
        params: *table.params(),
        master_seed,
        n_traj,
        outcomes,
    }
}

/// Provenance written next to a jump record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McwfManifest {
    pub params: ModelParams,
    pub master_seed: u64,
    pub n_traj: u64,
    pub bin_width: f64,
    pub engine_version: String,
}

impl JumpRecord {
    pub fn jump_count(&self) -> u64 {
        self.outcomes.iter().filter(|o| o.jump_time.is_some()).count() as u64
    }

    pub fn jump_fraction(&self) -> f64 {
        self.jump_count() as f64 / self.n_traj as f64
    }

    /// Histogram of the emission times as a flux estimate.
    pub fn binned_flux(&self, bin_width: f64) -> Result<FluxSeries> {
        let t_max = self.params.t_max;
        if !(bin_width > 0.0) || bin_width > t_max {
            return Err(Error::InvalidBinning(format!(
                "bin width {bin_width} must lie in (0, T = {t_max}]"
            )));
        }
        let ratio = t_max / bin_width;
        let n_bins = (ratio + 1e-9).floor() as usize;
        let covered = n_bins as f64 * bin_width;
        if ratio - n_bins as f64 > 1e-9 {
            log::warn!(
                "bin width {bin_width} does not divide T = {t_max}; dropping the partial bin after t = {covered}"
            );
        }
        let mut counts = vec![0u64; n_bins];
        for t in self.outcomes.iter().filter_map(|o| o.jump_time) {
            let k = (t / bin_width).floor() as usize;
            if k < n_bins {
                counts[k] += 1;
            } else if t <= covered * (1.0 + 1e-12) {
                counts[n_bins - 1] += 1;
            }
        }
        let scale = 1.0 / (self.n_traj as f64 * bin_width);
        Ok(FluxSeries {
            times: (0..n_bins).map(|k| (k as f64 + 0.5) * bin_width).collect(),
            values: counts.iter().map(|&c| c as f64 * scale).collect(),
            kind: FluxKind::McwfEstimate {
                counts,
                n_traj: self.n_traj,
                bin_width,
            },
        })
    }

    /// Largest gap between the empirical jump-time CDF and `1 - N^2(t)`.
    pub fn max_cdf_deviation(&self, table: &SurvivalTable) -> f64 {
        let mut times: Vec<f64> = self.outcomes.iter().filter_map(|o| o.jump_time).collect();
        times.sort_by(f64::total_cmp);
        let n = self.n_traj as f64;
        let start = table.survival(0.0);
        let mut worst: f64 = 0.0;
        for (i, &t) in times.iter().enumerate() {
            let cdf = start - table.survival(t);
            worst = worst.max((i as f64 / n - cdf).abs()).max(((i + 1) as f64 / n - cdf).abs());
        }
        let end = start - table.survival(self.params.t_max);
        worst.max((times.len() as f64 / n - end).abs())
    }

    /// `trajectory_index,jump_time`, with an empty field for no jump.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.write_csv_scaled(path, 1.0)
    }

    pub fn write_csv_scaled(&self, path: &Path, gamma: f64) -> Result<()> {
        write_with(path, |w| {
            writeln!(w, "trajectory_index,jump_time")?;
            for (i, o) in self.outcomes.iter().enumerate() {
                match o.jump_time {
                    Some(t) => writeln!(w, "{i},{}", num(t / gamma))?,
                    None => writeln!(w, "{i},")?,
                }
            }
            Ok(())
        })
    }

    pub fn manifest(&self, bin_width: f64) -> McwfManifest {
        McwfManifest {
            params: self.params,
            master_seed: self.master_seed,
            n_traj: self.n_traj,
            bin_width,
            engine_version: ENGINE_VERSION.to_string(),
        }
    }

    pub fn write_manifest(&self, path: &Path, bin_width: f64) -> Result<()> {
        write_json(path, &self.manifest(bin_width))
    }
}

/// Dvoretzky-Kiefer-Wolfowitz half-width at confidence `1 - alpha`.
pub fn dkw_epsilon(n: u64, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

/// Binned flux estimate from `n_traj` trajectories.
pub fn estimate_flux(params: &ModelParams, n_traj: u64, bin_width: f64, master_seed: u64) -> Result<FluxSeries> {
    if !(bin_width > 0.0) || bin_width > params.t_max {
        return Err(Error::InvalidBinning(format!(
            "bin width {bin_width} must lie in (0, T = {}]",
            params.t_max
        )));
    }
    simulate_record(params, n_traj, master_seed)?.binned_flux(bin_width)
}

/// Analytic flux sampled at arbitrary times (e.g. bin centres).
pub fn analytic_flux_at(params: &ModelParams, times: &[f64]) -> FluxSeries {
    FluxSeries {
        times: times.to_vec(),
        values: times
            .iter()
            .map(|&t| params.gamma * amplitudes_analytic(params, t).1.norm_sqr())
            .collect(),
        kind: FluxKind::Analytic,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub n_bins: usize,
    pub rms: f64,
    /// Poisson z-scores need counts; `None` for non-estimate inputs.
    pub max_abs_z: Option<f64>,
    pub k_sigma: f64,
    pub fraction_within: Option<f64>,
}

/// Compares an estimate with analytic values on the same bin centres.
/// The Poisson error of a bin is `sqrt(max(count, 1)) / (n_traj * width)`.
pub fn flux_residual_stats(estimate: &FluxSeries, analytic: &FluxSeries, k_sigma: f64) -> Result<ResidualStats> {
    if estimate.values.len() != analytic.values.len() || estimate.times.len() != analytic.times.len() {
        return Err(Error::GridMismatch(format!(
            "{} estimate bins vs {} analytic samples",
            estimate.values.len(),
            analytic.values.len()
        )));
    }
    let span = estimate.times.last().copied().unwrap_or(1.0).abs().max(1.0);
    if let Some((a, b)) = estimate
        .times
        .iter()
        .zip(&analytic.times)
        .find(|(a, b)| (*a - *b).abs() > 1e-9 * span)
    {
        return Err(Error::GridMismatch(format!("time {a} vs {b}")));
    }
    let n_bins = estimate.values.len();
    let diffs: Vec<f64> = estimate.values.iter().zip(&analytic.values).map(|(e, a)| e - a).collect();
    let rms = if n_bins == 0 {
        0.0
    } else {
        (diffs.iter().map(|d| d * d).sum::<f64>() / n_bins as f64).sqrt()
    };
    let (max_abs_z, fraction_within) = match &estimate.kind {
        FluxKind::McwfEstimate {
            counts,
            n_traj,
            bin_width,
        } => {
            let norm = *n_traj as f64 * bin_width;
            let z: Vec<f64> = diffs
                .iter()
                .zip(counts)
                .map(|(d, &c)| d / ((c.max(1) as f64).sqrt() / norm))
                .collect();
            let max = z.iter().fold(0.0f64, |m, z| m.max(z.abs()));
            let within = z.iter().filter(|z| z.abs() <= k_sigma).count() as f64 / n_bins.max(1) as f64;
            (Some(max), Some(within))
        }
        FluxKind::Analytic => (None, None),
    };
    Ok(ResidualStats {
        n_bins,
        rms,
        max_abs_z,
        k_sigma,
        fraction_within,
    })
}
