//! Synthetic readout: ESR spectra, Ramsey interferograms and their FFT, and
//! recovery of nuclear populations from either trace.
//!
//! Both readout channels probe the electron mS = 0 -> -1 manifold, whose
//! three hyperfine lines are split by the longitudinal coupling A. Spectra
//! are synthesized from the nuclear fractions of the state (readout is
//! assumed to follow an optical reset, so the electron index carries no
//! extra information). Estimation inverts the synthesis: dip or peak
//! heights are read with a local quadratic fit and, for ESR, unmixed
//! through the known lineshape overlap before normalization.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::Error;
use crate::spin::{DensityMatrix, SpinSystem, Transition};
use crate::Result;

/// Peak-normalized line profile with full width at half maximum `w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineShape {
    Lorentzian,
    Gaussian,
}

impl LineShape {
    /// Profile value at offset `x` from the line center.
    pub fn evaluate(&self, x: f64, fwhm: f64) -> f64 {
        match self {
            LineShape::Lorentzian => {
                let hw = fwhm / 2.0;
                hw * hw / (x * x + hw * hw)
            }
            LineShape::Gaussian => (-4.0 * std::f64::consts::LN_2 * x * x / (fwhm * fwhm)).exp(),
        }
    }
}

/// Which synthesis produced a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumKind {
    /// Swept-frequency spectrum with absorptive dips.
    Esr,
    /// One-sided FFT magnitude of a Ramsey interferogram.
    RamseyFft,
}

/// Everything the estimator needs to invert a trace. Line frequencies are
/// stored in nuclear order (mI = +1, 0, -1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMeta {
    pub kind: SpectrumKind,
    pub line_frequencies_mhz: [f64; 3],
    pub linewidth_mhz: f64,
    pub line_shape: LineShape,
    pub contrast: f64,
    /// Set when the sampled window misses every line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// A sampled spectrum plus the metadata to invert it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTrace {
    pub freq_mhz: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub meta: SpectrumMeta,
}

impl SpectrumTrace {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("freq_mhz,amplitude\n");
        for (f, a) in self.freq_mhz.iter().zip(&self.amplitude) {
            out.push_str(&format!("{f:?},{a:?}\n"));
        }
        out
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("spectrum serialization cannot fail")
    }
}

/// Swept-frequency readout settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EsrConfig {
    /// First sampled frequency, MHz.
    pub start_mhz: f64,
    /// Last sampled frequency, MHz.
    pub stop_mhz: f64,
    #[serde(default = "default_esr_points")]
    pub n_points: usize,
    /// Full width at half maximum of each dip, MHz.
    #[serde(default = "default_linewidth")]
    pub linewidth_mhz: f64,
    /// Depth of a fully populated dip, in (0, 1].
    #[serde(default = "default_contrast")]
    pub contrast: f64,
    #[serde(default = "default_shape")]
    pub line_shape: LineShape,
}

fn default_esr_points() -> usize {
    2001
}
fn default_linewidth() -> f64 {
    0.4
}
fn default_contrast() -> f64 {
    0.3
}
fn default_shape() -> LineShape {
    LineShape::Lorentzian
}

impl EsrConfig {
    /// A window centered on the three mS = 0 -> -1 lines of the system,
    /// extending ten linewidths past the outer ones.
    pub fn around_lines(system: &SpinSystem) -> Self {
        let lines = esr_lines(system);
        let margin = 10.0 * default_linewidth();
        let (lo, hi) = lines
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), f| {
                (lo.min(*f), hi.max(*f))
            });
        EsrConfig {
            start_mhz: lo - margin,
            stop_mhz: hi + margin,
            n_points: default_esr_points(),
            linewidth_mhz: default_linewidth(),
            contrast: default_contrast(),
            line_shape: default_shape(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.start_mhz.is_finite()
            || !self.stop_mhz.is_finite()
            || self.stop_mhz <= self.start_mhz
        {
            return Err(Error::config(format!(
                "frequency window [{}, {}] is empty or not finite",
                self.start_mhz, self.stop_mhz
            )));
        }
        if self.n_points < 16 {
            return Err(Error::config(format!(
                "a spectrum needs at least 16 points, got {}",
                self.n_points
            )));
        }
        if !self.linewidth_mhz.is_finite() || !(self.linewidth_mhz > 0.0) {
            return Err(Error::config(format!(
                "linewidth must be positive, got {}",
                self.linewidth_mhz
            )));
        }
        if !self.contrast.is_finite() || !(0.0 < self.contrast && self.contrast <= 1.0) {
            return Err(Error::config(format!(
                "contrast must lie in (0, 1], got {}",
                self.contrast
            )));
        }
        Ok(())
    }
}

/// The probed mw lines in nuclear order (mI = +1, 0, -1), MHz.
pub fn esr_lines(system: &SpinSystem) -> [f64; 3] {
    let f = |m_i: i8| {
        let t = Transition::mw((0, m_i), (-1, m_i)).expect("selection rule holds");
        system.transition_frequency(&t)
    };
    [f(1), f(0), f(-1)]
}

/// Synthesize a swept-frequency spectrum of the state:
/// S(f) = 1 - contrast * sum_i P_i * shape(f - f_i).
pub fn synthesize_esr(
    system: &SpinSystem,
    state: &DensityMatrix,
    config: &EsrConfig,
) -> Result<SpectrumTrace> {
    system.validate()?;
    config.validate()?;
    let lines = esr_lines(system);
    let warning = if lines
        .iter()
        .all(|f| *f < config.start_mhz || *f > config.stop_mhz)
    {
        Some(format!(
            "no line falls inside the sampled window [{}, {}] MHz; lines sit at {:?}",
            config.start_mhz, config.stop_mhz, lines
        ))
    } else {
        None
    };
    let weights = state.nuclear_fractions();
    let n = config.n_points;
    let h = (config.stop_mhz - config.start_mhz) / (n - 1) as f64;
    let mut freq = Vec::with_capacity(n);
    let mut amplitude = Vec::with_capacity(n);
    for k in 0..n {
        let f = config.start_mhz + k as f64 * h;
        let dip: f64 = lines
            .iter()
            .zip(&weights)
            .map(|(f0, w)| w * config.line_shape.evaluate(f - f0, config.linewidth_mhz))
            .sum();
        freq.push(f);
        amplitude.push(1.0 - config.contrast * dip);
    }
    Ok(SpectrumTrace {
        freq_mhz: freq,
        amplitude,
        meta: SpectrumMeta {
            kind: SpectrumKind::Esr,
            line_frequencies_mhz: lines,
            linewidth_mhz: config.linewidth_mhz,
            line_shape: config.line_shape,
            contrast: config.contrast,
            warning,
        },
    })
}

/// Free-evolution readout settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RamseyConfig {
    /// Carrier detuning from the mI = 0 line, MHz.
    #[serde(default = "default_detuning")]
    pub detuning_mhz: f64,
    /// Coherence decay time T2*, microseconds. May be infinite.
    #[serde(default = "default_dephasing")]
    pub dephasing_time_us: f64,
    /// Sample spacing, microseconds.
    #[serde(default = "default_dwell")]
    pub dwell_us: f64,
    /// Number of samples; must be a power of two.
    #[serde(default = "default_ramsey_points")]
    pub n_points: usize,
}

fn default_detuning() -> f64 {
    5.0
}
fn default_dephasing() -> f64 {
    2.0
}
fn default_dwell() -> f64 {
    0.05
}
fn default_ramsey_points() -> usize {
    4096
}

impl Default for RamseyConfig {
    fn default() -> Self {
        RamseyConfig {
            detuning_mhz: default_detuning(),
            dephasing_time_us: default_dephasing(),
            dwell_us: default_dwell(),
            n_points: default_ramsey_points(),
        }
    }
}

impl RamseyConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.detuning_mhz.is_finite() || self.detuning_mhz < 0.0 {
            return Err(Error::config(format!(
                "detuning must be finite and nonnegative, got {}",
                self.detuning_mhz
            )));
        }
        if self.dephasing_time_us.is_nan() || !(self.dephasing_time_us > 0.0) {
            return Err(Error::config(format!(
                "dephasing time must be positive, got {}",
                self.dephasing_time_us
            )));
        }
        if !self.dwell_us.is_finite() || !(self.dwell_us > 0.0) {
            return Err(Error::config(format!(
                "dwell time must be positive, got {}",
                self.dwell_us
            )));
        }
        if self.n_points < 16 || !self.n_points.is_power_of_two() {
            return Err(Error::config(format!(
                "sample count must be a power of two of at least 16, got {}",
                self.n_points
            )));
        }
        Ok(())
    }

    fn nyquist_mhz(&self) -> f64 {
        0.5 / self.dwell_us
    }

    /// Beat frequencies in nuclear order (mI = +1, 0, -1), MHz.
    fn tones(&self, system: &SpinSystem) -> [f64; 3] {
        let a = system.hyperfine_mhz;
        [
            (self.detuning_mhz + a).abs(),
            self.detuning_mhz.abs(),
            (self.detuning_mhz - a).abs(),
        ]
    }
}

/// Synthesize the free-evolution signal
/// s(t_k) = sum_i P_i * cos(2*pi*(delta + A*mI_i)*t_k) * exp(-t_k/T2*)
/// sampled at t_k = k * dwell. Returns (times, signal).
pub fn synthesize_ramsey(
    system: &SpinSystem,
    state: &DensityMatrix,
    config: &RamseyConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    system.validate()?;
    config.validate()?;
    let a = system.hyperfine_mhz;
    let max_tone = config.detuning_mhz + a;
    if max_tone >= config.nyquist_mhz() {
        return Err(Error::config(format!(
            "highest beat at {max_tone} MHz reaches the Nyquist limit {} MHz; \
             shorten the dwell time",
            config.nyquist_mhz()
        )));
    }
    let weights = state.nuclear_fractions();
    let mut times = Vec::with_capacity(config.n_points);
    let mut signal = Vec::with_capacity(config.n_points);
    for k in 0..config.n_points {
        let t = k as f64 * config.dwell_us;
        let decay = (-t / config.dephasing_time_us).exp();
        let mut s = 0.0;
        for (m_i, w) in [1.0, 0.0, -1.0].into_iter().zip(&weights) {
            s += w * (2.0 * PI * (config.detuning_mhz + a * m_i) * t).cos();
        }
        times.push(t);
        signal.push(s * decay);
    }
    Ok((times, signal))
}

/// One-sided FFT magnitude of a uniformly sampled real signal whose length
/// is a power of two. Returns (frequencies, amplitudes); a bin-centered
/// unit cosine yields amplitude one in its bin. The transform is checked
/// against the time-domain energy and rejected if the two disagree.
pub fn fft_spectrum(signal: &[f64], dwell_us: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = signal.len();
    if n < 16 || !n.is_power_of_two() {
        return Err(Error::config(format!(
            "FFT length must be a power of two of at least 16, got {n}"
        )));
    }
    if !dwell_us.is_finite() || !(dwell_us > 0.0) {
        return Err(Error::config(format!(
            "dwell time must be positive, got {dwell_us}"
        )));
    }
    let mut buffer: Vec<Complex64> = signal.iter().map(|s| Complex64::new(*s, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buffer);

    let time_energy: f64 = signal.iter().map(|s| s * s).sum();
    let freq_energy: f64 = buffer.iter().map(|x| x.norm_sqr()).sum::<f64>() / n as f64;
    if (time_energy - freq_energy).abs() > 1e-9 * (1.0 + time_energy) {
        return Err(Error::Numerics(format!(
            "energy mismatch across the FFT: {time_energy} vs {freq_energy}"
        )));
    }

    let bin = 1.0 / (n as f64 * dwell_us);
    let half = n / 2;
    let mut freq = Vec::with_capacity(half + 1);
    let mut amplitude = Vec::with_capacity(half + 1);
    for k in 0..=half {
        let scale = if k == 0 || k == half { 1.0 } else { 2.0 };
        freq.push(k as f64 * bin);
        amplitude.push(scale * buffer[k].norm() / n as f64);
    }
    Ok((freq, amplitude))
}

/// Ramsey readout in one step: synthesize, transform, and package the
/// one-sided spectrum with the metadata needed for estimation.
pub fn synthesize_ramsey_spectrum(
    system: &SpinSystem,
    state: &DensityMatrix,
    config: &RamseyConfig,
) -> Result<SpectrumTrace> {
    let (_, signal) = synthesize_ramsey(system, state, config)?;
    let (freq, amplitude) = fft_spectrum(&signal, config.dwell_us)?;
    let fwhm = if config.dephasing_time_us.is_finite() {
        1.0 / (PI * config.dephasing_time_us)
    } else {
        0.0
    };
    Ok(SpectrumTrace {
        freq_mhz: freq,
        amplitude,
        meta: SpectrumMeta {
            kind: SpectrumKind::RamseyFft,
            line_frequencies_mhz: config.tones(system),
            linewidth_mhz: fwhm,
            line_shape: LineShape::Lorentzian,
            contrast: 1.0,
            warning: None,
        },
    })
}

/// Quadratic fit through the three samples nearest `x`, evaluated at `x`.
fn quadratic_read(freq: &[f64], amplitude: &[f64], x: f64) -> f64 {
    let n = freq.len();
    let h = freq[1] - freq[0];
    let k = (((x - freq[0]) / h).round() as isize).clamp(1, n as isize - 2) as usize;
    let (x0, x1, x2) = (freq[k - 1], freq[k], freq[k + 1]);
    let (y0, y1, y2) = (amplitude[k - 1], amplitude[k], amplitude[k + 1]);
    y0 * (x - x1) * (x - x2) / ((x0 - x1) * (x0 - x2))
        + y1 * (x - x0) * (x - x2) / ((x1 - x0) * (x1 - x2))
        + y2 * (x - x0) * (x - x1) / ((x2 - x0) * (x2 - x1))
}

/// Recover the nuclear populations (mI = +1, 0, -1) from a spectrum.
///
/// Line heights are read with a local quadratic fit at each stored line
/// frequency. ESR dip depths are then unmixed through the 3x3 lineshape
/// overlap matrix, so neighboring tails do not bias the result; FFT peak
/// heights are used directly. Estimates are clamped to be nonnegative and
/// normalized.
pub fn estimate_populations(trace: &SpectrumTrace) -> Result<[f64; 3]> {
    let n = trace.freq_mhz.len();
    if n < 3 || trace.amplitude.len() != n {
        return Err(Error::estimation(format!(
            "trace needs at least 3 matching samples, got {n} frequencies and {} amplitudes",
            trace.amplitude.len()
        )));
    }
    let (lo, hi) = (trace.freq_mhz[0], trace.freq_mhz[n - 1]);
    let h = (hi - lo) / (n - 1) as f64;
    let lines = trace.meta.line_frequencies_mhz;
    for f in lines {
        if f < lo || f > hi {
            return Err(Error::estimation(format!(
                "line at {f} MHz lies outside the sampled range [{lo}, {hi}]"
            )));
        }
    }
    let mut min_separation = f64::INFINITY;
    for i in 0..3 {
        for j in (i + 1)..3 {
            min_separation = min_separation.min((lines[i] - lines[j]).abs());
        }
    }
    let resolution = trace.meta.linewidth_mhz.max(2.0 * h);
    if min_separation < resolution {
        return Err(Error::estimation(format!(
            "lines are {min_separation:.6} MHz apart but the resolution is only \
             {resolution:.6} MHz; they cannot be told apart"
        )));
    }

    let read: Vec<f64> = lines
        .iter()
        .map(|f| quadratic_read(&trace.freq_mhz, &trace.amplitude, *f))
        .collect();
    let mut estimate = match trace.meta.kind {
        SpectrumKind::Esr => {
            let depths = Vector3::new(1.0 - read[0], 1.0 - read[1], 1.0 - read[2]);
            let overlap = Matrix3::from_fn(|i, j| {
                trace.meta.contrast
                    * trace
                        .meta
                        .line_shape
                        .evaluate(lines[i] - lines[j], trace.meta.linewidth_mhz)
            });
            let weights = overlap.lu().solve(&depths).ok_or_else(|| {
                Error::estimation("lineshape overlap matrix is singular".to_string())
            })?;
            [weights[0], weights[1], weights[2]]
        }
        SpectrumKind::RamseyFft => [read[0], read[1], read[2]],
    };
    for w in &mut estimate {
        if !w.is_finite() {
            return Err(Error::estimation("estimate is not finite".to_string()));
        }
        *w = w.max(0.0);
    }
    let total: f64 = estimate.iter().sum();
    if total <= 1e-12 {
        return Err(Error::estimation(
            "no line carries measurable weight".to_string(),
        ));
    }
    for w in &mut estimate {
        *w /= total;
    }
    Ok(estimate)
}
