//! Model parameters and uniform time grids.
//!
//! Every physical quantity is measured in units of the pseudomode decay
//! rate: times in `1/gamma`, couplings, detunings and rates in `gamma`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Default observation time, `14 / gamma`.
pub const DEFAULT_T_MAX: f64 = 14.0;
/// Default sampling step, `1e-3 / gamma`.
pub const DEFAULT_DT: f64 = 1e-3;

/// Physical parameters of the atom + pseudomode system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Pseudomode decay rate.
    pub gamma: f64,
    /// Atom-pseudomode coupling.
    pub v: f64,
    /// Detuning `omega_P - omega_A`, may be negative.
    pub delta: f64,
    /// Initial excited-state amplitude of the atom.
    pub c0: Complex64,
    /// Observation time.
    pub t_max: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            v: 1.0,
            delta: 0.0,
            c0: Complex64::new(1.0, 0.0),
            t_max: DEFAULT_T_MAX,
        }
    }
}

impl ModelParams {
    /// Validated constructor with `c(0) = 1`.
    pub fn new(gamma: f64, v: f64, delta: f64, t_max: f64) -> Result<Self> {
        let p = Self {
            gamma,
            v,
            delta,
            c0: Complex64::new(1.0, 0.0),
            t_max,
        };
        p.validate()?;
        Ok(p)
    }

    /// Shorthand for `gamma = 1`, `c(0) = 1`, `T = 14`.
    pub fn unit(v: f64, delta: f64) -> Self {
        Self {
            v,
            delta,
            ..Self::default()
        }
    }

    pub fn with_t_max(mut self, t_max: f64) -> Self {
        self.t_max = t_max;
        self
    }

    pub fn with_c0(mut self, c0: Complex64) -> Self {
        self.c0 = c0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(invalid("gamma", format!("must be finite and > 0, got {}", self.gamma)));
        }
        if !(self.v.is_finite() && self.v >= 0.0) {
            return Err(invalid("v", format!("must be finite and >= 0, got {}", self.v)));
        }
        if !self.delta.is_finite() {
            return Err(invalid("delta", "must be finite"));
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(invalid("t_max", format!("must be finite and > 0, got {}", self.t_max)));
        }
        if !(self.c0.re.is_finite() && self.c0.im.is_finite()) || self.c0.norm() > 1.0 + 1e-12 {
            return Err(invalid("c0", format!("|c0| must be <= 1, got {}", self.c0.norm())));
        }
        Ok(())
    }

    /// Amplitude of `|0>_A |0>_P`, fixed so the initial state is normalised.
    pub fn c0_ground(&self) -> Complex64 {
        Complex64::new((1.0 - self.c0.norm_sqr()).max(0.0).sqrt(), 0.0)
    }

    /// The same point expressed with `gamma = 1`.
    pub fn nondimensional(&self) -> Self {
        Self {
            gamma: 1.0,
            v: self.v / self.gamma,
            delta: self.delta / self.gamma,
            c0: self.c0,
            t_max: self.t_max * self.gamma,
        }
    }
}

/// Uniform grid `t_i = i * dt`, `i = 0..=n_steps`, covering `[0, t_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_max: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    /// Grid over `[0, t_max]` whose step is the closest to `dt` that divides
    /// `t_max` evenly.
    pub fn new(t_max: f64, dt: f64) -> Result<Self> {
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(invalid("t_max", format!("must be finite and > 0, got {t_max}")));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid("dt", format!("must be finite and > 0, got {dt}")));
        }
        let n_steps = (t_max / dt).round().max(1.0) as usize;
        Ok(Self { t_max, n_steps })
    }

    pub fn with_steps(t_max: f64, n_steps: usize) -> Self {
        Self {
            t_max,
            n_steps: n_steps.max(1),
        }
    }

    pub fn dt(&self) -> f64 {
        self.t_max / self.n_steps as f64
    }

    /// Number of grid points, `n_steps + 1`.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.t_max
        } else {
            i as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }
}
