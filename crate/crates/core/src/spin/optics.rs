use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

use super::state::{DensityMatrix, DIM};

/// Parameters of one optical repump pulse.
///
/// Illumination does two things at once: it pumps the electron toward
/// mS = 0 (with probability `pump_efficiency` per pulse) and it scrambles
/// the nuclear spin. The nuclear index is redrawn at Poisson rate
/// `nuclear_flip_rate_per_us` from a bias kernel
///
/// w(b) = ((1+b), 1+|b|, (1-b)) / (3+|b|)   over (mI=+1, 0, -1),
///
/// so nuclear populations relax as p -> e^(-kappa*t) * p + (1-e^(-kappa*t)) * w.
/// At zero bias the kernel is uniform and a pulse flips the nuclear spin with
/// probability (2/3)(1 - e^(-kappa*t)); at bias +-1 the disfavored edge state
/// is never populated and the remaining pair flips symmetrically. Coherences
/// do not survive illumination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticalParams {
    /// Pulse duration, microseconds.
    #[serde(default = "default_duration")]
    pub pump_duration_us: f64,
    /// Nuclear redraw rate kappa, 1/microsecond.
    #[serde(default = "default_rate")]
    pub nuclear_flip_rate_per_us: f64,
    /// Up/down weighting of nuclear flips, in [-1, 1]. Positive favors mI = +1.
    #[serde(default)]
    pub flip_bias: f64,
    /// Probability that the pulse resets the electron to mS = 0, in [0, 1].
    #[serde(default = "default_efficiency")]
    pub pump_efficiency: f64,
}

fn default_duration() -> f64 {
    0.25
}
fn default_rate() -> f64 {
    1.43
}
fn default_efficiency() -> f64 {
    1.0
}

impl Default for OpticalParams {
    fn default() -> Self {
        OpticalParams {
            pump_duration_us: default_duration(),
            nuclear_flip_rate_per_us: default_rate(),
            flip_bias: 0.0,
            pump_efficiency: default_efficiency(),
        }
    }
}

impl OpticalParams {
    pub fn new(
        pump_duration_us: f64,
        nuclear_flip_rate_per_us: f64,
        flip_bias: f64,
        pump_efficiency: f64,
    ) -> Result<Self> {
        let p = OpticalParams {
            pump_duration_us,
            nuclear_flip_rate_per_us,
            flip_bias,
            pump_efficiency,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.pump_duration_us.is_finite() || self.pump_duration_us < 0.0 {
            return Err(Error::domain(format!(
                "pump duration must be finite and nonnegative, got {}",
                self.pump_duration_us
            )));
        }
        if !self.nuclear_flip_rate_per_us.is_finite() || self.nuclear_flip_rate_per_us < 0.0 {
            return Err(Error::domain(format!(
                "nuclear flip rate must be finite and nonnegative, got {}",
                self.nuclear_flip_rate_per_us
            )));
        }
        if !self.flip_bias.is_finite() || self.flip_bias.abs() > 1.0 {
            return Err(Error::domain(format!(
                "flip bias must lie in [-1, 1], got {}",
                self.flip_bias
            )));
        }
        if !self.pump_efficiency.is_finite() || !(0.0..=1.0).contains(&self.pump_efficiency) {
            return Err(Error::domain(format!(
                "pump efficiency must lie in [0, 1], got {}",
                self.pump_efficiency
            )));
        }
        Ok(())
    }

    pub fn with_duration(mut self, pump_duration_us: f64) -> Self {
        self.pump_duration_us = pump_duration_us;
        self
    }

    /// Zero-length pulse: pure electron repump, no nuclear scrambling.
    pub fn instant_repump() -> Self {
        OpticalParams {
            pump_duration_us: 0.0,
            nuclear_flip_rate_per_us: 0.0,
            flip_bias: 0.0,
            pump_efficiency: 1.0,
        }
    }

    /// Pulse whose restriction to the {mI=+1, mI=0} pair is a symmetric
    /// binary flip with the given probability (p < 1/2). Used to drive the
    /// engine as an exact two-state pump: at bias +1 the pair is closed and
    /// both flip probabilities equal (1/2)(1 - e^(-kappa*t)).
    pub fn for_pair_flip(flip_probability: f64) -> Result<Self> {
        if !flip_probability.is_finite() || !(0.0..0.5).contains(&flip_probability) {
            return Err(Error::domain(format!(
                "pair flip probability must lie in [0, 0.5), got {flip_probability}"
            )));
        }
        Ok(OpticalParams {
            pump_duration_us: -(1.0 - 2.0 * flip_probability).ln(),
            nuclear_flip_rate_per_us: 1.0,
            flip_bias: 1.0,
            pump_efficiency: 1.0,
        })
    }

    /// Probability that at least one redraw happened during the pulse.
    fn redraw_probability(&self) -> f64 {
        1.0 - (-self.nuclear_flip_rate_per_us * self.pump_duration_us).exp()
    }

    /// The redraw kernel w(b) over (mI=+1, 0, -1).
    pub fn bias_kernel(&self) -> [f64; 3] {
        let b = self.flip_bias;
        let norm = 3.0 + b.abs();
        [(1.0 + b) / norm, (1.0 + b.abs()) / norm, (1.0 - b) / norm]
    }

    /// Flip probability between the two favored states at |bias| = 1.
    pub fn pair_flip_probability(&self) -> f64 {
        0.5 * self.redraw_probability()
    }
}

/// Scalar per-pulse nuclear flip probability used to connect the optics to
/// the two-state pumping model:
///
/// p_b = (2/3) * (1 - exp(-kappa * pump_duration)),
///
/// the unbiased-channel value, saturating toward the fully depolarized
/// nuclear state.
pub fn effective_flip_probability(optics: &OpticalParams) -> f64 {
    (2.0 / 3.0) * (1.0 - (-optics.nuclear_flip_rate_per_us * optics.pump_duration_us).exp())
}

/// Apply one optical pulse.
///
/// Populations of each |mS, mI> move to |0, mI> with probability
/// `pump_efficiency` (and stay otherwise); simultaneously the nuclear index
/// relaxes toward the bias kernel as described on [`OpticalParams`]. All
/// coherences are erased; the output is diagonal with the trace preserved.
pub fn apply_optical_channel(state: &DensityMatrix, optics: &OpticalParams) -> DensityMatrix {
    debug_assert!(optics.validate().is_ok());
    let p = state.populations();
    let eta = optics.pump_efficiency;
    let stay = 1.0 - optics.redraw_probability();
    let w = optics.bias_kernel();

    // Electron repump: block mS -> mS = 0 with probability eta.
    let mut pumped = [0.0; DIM];
    for ms_block in 0..3 {
        for mi in 0..3 {
            let i = ms_block * 3 + mi;
            if ms_block == 1 {
                pumped[3 + mi] += p[i];
            } else {
                pumped[3 + mi] += eta * p[i];
                pumped[i] += (1.0 - eta) * p[i];
            }
        }
    }

    // Nuclear redraw, applied within each electron block.
    let mut out = [0.0; DIM];
    for ms_block in 0..3 {
        let base = ms_block * 3;
        let block_sum: f64 = pumped[base..base + 3].iter().sum();
        for mi in 0..3 {
            out[base + mi] = stay * pumped[base + mi] + (1.0 - stay) * w[mi] * block_sum;
        }
    }

    DensityMatrix::from_populations_unchecked(&out)
}
