//! Two-state recursion for the nuclear pumping cycle.
//!
//! One pumping cycle acts on the depleted-state population P as
//! P -> P*q + p_b with q = (1 - p_a)(1 - 2*p_b): the pulse pair transfers
//! depleted population to the target with probability p_a, then the optical
//! step flips the nuclear state with probability p_b in both directions.
//! The module provides the iteration, its closed form, the asymptotic
//! pumped population, and a trial-by-trial Monte-Carlo cross-check.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Parameters of the two-state pumping recursion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyModelParams {
    /// Probability that one pulse pair moves a depleted spin to the target.
    pub p_a: f64,
    /// Probability that one optical pulse flips the nuclear state.
    pub p_b: f64,
    /// Initial depleted-state population.
    pub p_depleted_0: f64,
}

impl ToyModelParams {
    pub fn new(p_a: f64, p_b: f64, p_depleted_0: f64) -> Result<Self> {
        for (name, v) in [("p_a", p_a), ("p_b", p_b), ("p_depleted_0", p_depleted_0)] {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::domain(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        Ok(ToyModelParams {
            p_a,
            p_b,
            p_depleted_0,
        })
    }

    /// Per-cycle retention factor q = (1 - p_a)(1 - 2*p_b).
    pub fn retention(&self) -> f64 {
        (1.0 - self.p_a) * (1.0 - 2.0 * self.p_b)
    }
}

/// Depleted-state population after each of 0..=n cycles (n + 1 entries).
pub fn iterate_populations(params: &ToyModelParams, n: usize) -> Vec<f64> {
    let q = params.retention();
    let mut series = Vec::with_capacity(n + 1);
    let mut p = params.p_depleted_0;
    series.push(p);
    for _ in 0..n {
        p = p * q + params.p_b;
        series.push(p);
    }
    series
}

/// Closed form of the recursion after n cycles:
/// P(n) = P(0)*q^n + p_b*(1 - q^n)/(1 - q), with the linear-growth branch
/// min(P(0) + n*p_b, 1) when q = 1.
pub fn closed_form_depleted(params: &ToyModelParams, n: usize) -> f64 {
    let q = params.retention();
    if q == 1.0 {
        return (params.p_depleted_0 + n as f64 * params.p_b).min(1.0);
    }
    let qn = q.powi(n as i32);
    params.p_depleted_0 * qn + params.p_b * (1.0 - qn) / (1.0 - q)
}

/// Asymptotic pumped (target) population:
/// P_lim = 1 - p_b / (p_a + 2*p_b*(1 - p_a)).
///
/// Undefined when p_a and p_b are both zero (no contraction).
pub fn limit_population(p_a: f64, p_b: f64) -> Result<f64> {
    let params = ToyModelParams::new(p_a, p_b, 0.0)?;
    if params.retention() == 1.0 {
        return Err(Error::UndefinedLimit);
    }
    Ok(1.0 - p_b / (p_a + 2.0 * p_b * (1.0 - p_a)))
}

/// splitmix64 mix of a per-trial counter into an independent stream seed.
fn trial_seed(master: u64, trial: u64) -> u64 {
    let mut z = master.wrapping_add((trial + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Monte-Carlo estimate of the depleted population after n cycles.
///
/// Each trial simulates the microscopic cycle directly: if depleted, move to
/// the target with probability p_a; then flip the state with probability p_b
/// regardless of where it sits. Trials run in parallel on independent
/// ChaCha8 streams seeded splitmix64-style from (seed, trial index), so the
/// result depends only on the inputs.
pub fn monte_carlo_oracle(
    params: &ToyModelParams,
    n: usize,
    trials: u64,
    seed: u64,
) -> f64 {
    if trials == 0 {
        return f64::NAN;
    }
    let depleted_count: u64 = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, trial));
            let mut depleted = rng.gen::<f64>() < params.p_depleted_0;
            for _ in 0..n {
                if depleted && rng.gen::<f64>() < params.p_a {
                    depleted = false;
                }
                if rng.gen::<f64>() < params.p_b {
                    depleted = !depleted;
                }
            }
            depleted as u64
        })
        .sum();
    depleted_count as f64 / trials as f64
}
