//! Experiment configuration loaded from a TOML file.
//!
//! Every field has a default, so `{}` (an empty file) is a valid experiment:
//! one ideal population-trapping cycle on the default system. Unknown keys
//! are rejected so typos fail loudly instead of silently falling back.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use nvpolar::protocol::{BranchOrder, PtBranch, PulseTemplate};
use nvpolar::readout::{EsrConfig, LineShape, RamseyConfig};
use nvpolar::spin::{OpticalParams, SelectivityMode, SpinSystem};
use nvpolar::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Master seed recorded in the manifest. The simulator itself is
    /// deterministic; the seed exists so downstream tooling can key runs.
    pub seed: u64,
    pub system: SpinSystem,
    pub optics: OpticsSection,
    pub protocol: ProtocolSection,
    pub readout: ReadoutSection,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            system: SpinSystem::default(),
            optics: OpticsSection::default(),
            protocol: ProtocolSection::default(),
            readout: ReadoutSection::default(),
            sweep: SweepSection::default(),
            output: OutputSection::default(),
        }
    }
}

/// Laser settings shared by both optical pulses of a cycle, plus the two
/// pulse durations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OpticsSection {
    /// Nuclear spin-flip rate under illumination, 1/us.
    pub nuclear_flip_rate_per_us: f64,
    /// Field-dependent asymmetry of the optically induced flips, in [-1, 1].
    pub flip_bias: f64,
    /// Probability that one pulse returns the electron to mS = 0.
    pub pump_efficiency: f64,
    /// Duration of the laser pulse after the first arm, us.
    pub first_pulse_us: f64,
    /// Duration of the laser pulse after the second arm, us.
    pub second_pulse_us: f64,
}

impl Default for OpticsSection {
    fn default() -> Self {
        OpticsSection {
            nuclear_flip_rate_per_us: 1.43,
            flip_bias: 0.0,
            pump_efficiency: 1.0,
            first_pulse_us: 0.25,
            second_pulse_us: 0.25,
        }
    }
}

impl OpticsSection {
    pub fn laser(&self, pump_duration_us: f64) -> nvpolar::Result<OpticalParams> {
        OpticalParams::new(
            pump_duration_us,
            self.nuclear_flip_rate_per_us,
            self.flip_bias,
            self.pump_efficiency,
        )
    }

    pub fn first_laser(&self) -> nvpolar::Result<OpticalParams> {
        self.laser(self.first_pulse_us)
    }

    pub fn second_laser(&self) -> nvpolar::Result<OpticalParams> {
        self.laser(self.second_pulse_us)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    /// Coherent spin exchange, no optical pulses inside the cycle.
    Se,
    /// Population trapping: two shelving arms, each followed by a laser.
    Pt,
    /// A pulse program read from `seq_path`.
    Seq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    /// Electron pumped to mS = 0, nuclear spin fully mixed.
    OpticallyInitialized,
    /// Maximally mixed over all nine levels.
    FullyMixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolSection {
    pub kind: ProtocolKind,
    /// Pulse program file, required when kind = "seq".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seq_path: Option<PathBuf>,
    /// Electron manifold the trapping arms shelve through.
    pub branch: PtBranch,
    /// Nuclear projection population trapping pumps into.
    pub target_m_i: i8,
    /// Number of protocol cycles to run.
    pub cycles: usize,
    /// Replace the lasers by the exact two-state-pump pair: an instant
    /// repump after the first arm and a closed pair flip with probability
    /// p_b = effective flip probability of the second laser. Requires
    /// kind = "pt" and target_m_i = 0.
    pub emulate_toy: bool,
    /// Initial depleted fraction in |0,+1> when emulating (rest in |0,0>).
    pub initial_depleted: f64,
    pub initial: InitialKind,
    /// Explicit nine-level populations, overriding `initial` when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_populations: Option<Vec<f64>>,
    pub pulses: PulsesSection,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        ProtocolSection {
            kind: ProtocolKind::Pt,
            seq_path: None,
            branch: PtBranch::Minus,
            target_m_i: 0,
            cycles: 1,
            emulate_toy: false,
            initial_depleted: 2.0 / 3.0,
            initial: InitialKind::OpticallyInitialized,
            initial_populations: None,
            pulses: PulsesSection::default(),
        }
    }
}

/// Pulse settings for the built-in program builders. Angles are given in
/// units of pi so `rf_angle_pi = 0.5` is a pi/2 pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulsesSection {
    pub selectivity: SelectivityMode,
    pub mw_angle_pi: f64,
    pub rf_angle_pi: f64,
    pub mw_rabi_mhz: f64,
    pub rf_rabi_mhz: f64,
    pub branch_order: BranchOrder,
}

impl Default for PulsesSection {
    fn default() -> Self {
        let t = PulseTemplate::default();
        PulsesSection {
            selectivity: t.selectivity_mode,
            mw_angle_pi: t.mw_angle / PI,
            rf_angle_pi: t.rf_angle / PI,
            mw_rabi_mhz: t.mw_rabi_mhz,
            rf_rabi_mhz: t.rf_rabi_mhz,
            branch_order: t.branch_order,
        }
    }
}

impl PulsesSection {
    pub fn template(&self) -> PulseTemplate {
        PulseTemplate {
            selectivity_mode: self.selectivity,
            mw_rabi_mhz: self.mw_rabi_mhz,
            rf_rabi_mhz: self.rf_rabi_mhz,
            mw_angle: self.mw_angle_pi * PI,
            rf_angle: self.rf_angle_pi * PI,
            branch_order: self.branch_order,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReadoutSection {
    /// Also synthesize the spectra of the pre-protocol state, as the
    /// experimental reference trace.
    pub reference: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub esr: Option<EsrSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ramsey: Option<RamseyConfig>,
}

impl Default for ReadoutSection {
    fn default() -> Self {
        ReadoutSection {
            reference: false,
            esr: None,
            ramsey: None,
        }
    }
}

/// ESR window settings. Omitted bounds default to a window around the
/// three hyperfine lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EsrSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start_mhz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop_mhz: Option<f64>,
    pub n_points: usize,
    pub linewidth_mhz: f64,
    pub contrast: f64,
    pub line_shape: LineShape,
}

impl Default for EsrSection {
    fn default() -> Self {
        EsrSection {
            start_mhz: None,
            stop_mhz: None,
            n_points: 2001,
            linewidth_mhz: 0.4,
            contrast: 0.3,
            line_shape: LineShape::Lorentzian,
        }
    }
}

impl EsrSection {
    pub fn resolve(&self, system: &SpinSystem) -> EsrConfig {
        let mut config = EsrConfig::around_lines(system);
        config.n_points = self.n_points;
        config.linewidth_mhz = self.linewidth_mhz;
        config.contrast = self.contrast;
        config.line_shape = self.line_shape;
        if let Some(start) = self.start_mhz {
            config.start_mhz = start;
        }
        if let Some(stop) = self.stop_mhz {
            config.stop_mhz = stop;
        }
        config
    }
}

/// Sweep axes. Every axis present is swept; the rest stay at their scalar
/// values. Points are emitted in lexicographic order of
/// (cycles, rf_angle_pi, second_pulse_us, b_field_mt).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycles: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rf_angle_pi: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub second_pulse_us: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_field_mt: Option<Vec<f64>>,
    /// Worker threads for the sweep; 0 means one per logical CPU.
    pub workers: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            cycles: None,
            rf_angle_pi: None,
            second_pulse_us: None,
            b_field_mt: None,
            workers: 0,
        }
    }
}

impl SweepSection {
    pub fn has_axes(&self) -> bool {
        self.cycles.is_some()
            || self.rf_angle_pi.is_some()
            || self.second_pulse_us.is_some()
            || self.b_field_mt.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Prefix of every file written by the run.
    pub stem: String,
    /// Also write JSON mirrors next to the CSV files.
    pub json: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
            stem: "run".into(),
            json: true,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> nvpolar::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(message) => Error::Config(format!("{}: {message}", path.display())),
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> nvpolar::Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> nvpolar::Result<()> {
        self.system.validate()?;
        self.optics.first_laser()?;
        self.optics.second_laser()?;
        self.protocol.pulses.template().validate()?;
        if self.protocol.kind == ProtocolKind::Seq && self.protocol.seq_path.is_none() {
            return Err(Error::Config(
                "protocol.kind = \"seq\" requires protocol.seq_path".into(),
            ));
        }
        if !(-1..=1).contains(&self.protocol.target_m_i) {
            return Err(Error::Config(format!(
                "protocol.target_m_i must be -1, 0 or +1, got {}",
                self.protocol.target_m_i
            )));
        }
        if self.protocol.emulate_toy {
            if self.protocol.kind != ProtocolKind::Pt {
                return Err(Error::Config(
                    "protocol.emulate_toy requires protocol.kind = \"pt\"".into(),
                ));
            }
            if self.protocol.target_m_i != 0 {
                return Err(Error::Config(
                    "protocol.emulate_toy requires protocol.target_m_i = 0".into(),
                ));
            }
        }
        if !self.protocol.initial_depleted.is_finite()
            || !(0.0..=1.0).contains(&self.protocol.initial_depleted)
        {
            return Err(Error::Config(format!(
                "protocol.initial_depleted must lie in [0, 1], got {}",
                self.protocol.initial_depleted
            )));
        }
        if let Some(populations) = &self.protocol.initial_populations {
            if populations.len() != 9 {
                return Err(Error::Config(format!(
                    "protocol.initial_populations needs 9 entries, got {}",
                    populations.len()
                )));
            }
        }
        if let Some(esr) = &self.readout.esr {
            esr.resolve(&self.system).validate()?;
        }
        if let Some(ramsey) = &self.readout.ramsey {
            ramsey.validate()?;
        }
        for (name, axis_is_empty) in [
            ("cycles", self.sweep.cycles.as_deref() == Some(&[])),
            ("rf_angle_pi", self.sweep.rf_angle_pi.as_deref() == Some(&[])),
            (
                "second_pulse_us",
                self.sweep.second_pulse_us.as_deref() == Some(&[]),
            ),
            ("b_field_mt", self.sweep.b_field_mt.as_deref() == Some(&[])),
        ] {
            if axis_is_empty {
                return Err(Error::Config(format!("sweep.{name} must not be empty")));
            }
        }
        if self.output.stem.is_empty()
            || !self
                .output
                .stem
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return Err(Error::Config(format!(
                "output.stem must be a nonempty [A-Za-z0-9_-] name, got {:?}",
                self.output.stem
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_toml_is_the_default_experiment() {
        let config = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(config, ExperimentConfig::default());
        assert_eq!(config.protocol.kind, ProtocolKind::Pt);
        assert_eq!(config.protocol.cycles, 1);
        assert_eq!(config.output.stem, "run");
    }

    #[test]
    fn sections_override_field_by_field() {
        let config = ExperimentConfig::from_toml(
            r#"
            seed = 7

            [system]
            b_field_mt = 77.7

            [optics]
            flip_bias = 0.6
            second_pulse_us = 5.0

            [protocol]
            kind = "pt"
            branch = "plus"
            target_m_i = -1
            cycles = 12

            [protocol.pulses]
            selectivity = "rabi"
            rf_angle_pi = 0.5

            [readout]
            reference = true

            [readout.esr]
            linewidth_mhz = 0.2

            [readout.ramsey]
            detuning_mhz = 4.0
            "#,
        )
        .unwrap();
        assert_eq!(config.seed, 7);
        assert_eq!(config.system.b_field_mt, 77.7);
        assert_eq!(config.system.hyperfine_mhz, 2.16);
        assert_eq!(config.optics.flip_bias, 0.6);
        assert_eq!(config.optics.first_pulse_us, 0.25);
        assert_eq!(config.protocol.branch, PtBranch::Plus);
        assert_eq!(config.protocol.target_m_i, -1);
        assert_eq!(
            config.protocol.pulses.template().selectivity_mode,
            SelectivityMode::Rabi
        );
        assert_eq!(config.protocol.pulses.template().rf_angle, 0.5 * PI);
        assert!(config.readout.reference);
        assert_eq!(config.readout.esr.as_ref().unwrap().linewidth_mhz, 0.2);
        assert_eq!(config.readout.ramsey.as_ref().unwrap().detuning_mhz, 4.0);
        assert_eq!(config.readout.ramsey.as_ref().unwrap().n_points, 4096);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml("[protocol]\nknid = \"pt\"").unwrap_err();
        assert!(err.is_validation(), "{err}");
        assert!(err.to_string().contains("knid"), "{err}");
    }

    #[test]
    fn seq_kind_requires_a_path() {
        let err = ExperimentConfig::from_toml("[protocol]\nkind = \"seq\"").unwrap_err();
        assert!(err.to_string().contains("seq_path"), "{err}");
    }

    #[test]
    fn emulation_is_limited_to_trapping_on_the_central_state() {
        let err = ExperimentConfig::from_toml(
            "[protocol]\nkind = \"se\"\nemulate_toy = true",
        )
        .unwrap_err();
        assert!(err.to_string().contains("kind"), "{err}");
        let err = ExperimentConfig::from_toml(
            "[protocol]\nemulate_toy = true\ntarget_m_i = 1",
        )
        .unwrap_err();
        assert!(err.to_string().contains("target_m_i"), "{err}");
    }

    #[test]
    fn empty_sweep_axes_are_rejected() {
        let err = ExperimentConfig::from_toml("[sweep]\ncycles = []").unwrap_err();
        assert!(err.is_validation());
        assert!(err.to_string().contains("sweep.cycles"), "{err}");
    }

    #[test]
    fn esr_window_falls_back_to_the_line_cluster() {
        let config = ExperimentConfig::from_toml("[readout.esr]\ncontrast = 0.5").unwrap();
        let esr = config.readout.esr.unwrap().resolve(&config.system);
        assert_eq!(esr.contrast, 0.5);
        // The window tracks the mw lines near zfs - ge*B, well below zfs.
        assert!(esr.start_mhz < esr.stop_mhz);
        assert!(esr.stop_mhz < 2870.0);
        let explicit = ExperimentConfig::from_toml(
            "[readout.esr]\nstart_mhz = 2000.0\nstop_mhz = 2050.0",
        )
        .unwrap();
        let esr = explicit.readout.esr.unwrap().resolve(&explicit.system);
        assert_eq!((esr.start_mhz, esr.stop_mhz), (2000.0, 2050.0));
    }

    #[test]
    fn config_round_trips_through_toml() {
        let mut config = ExperimentConfig::default();
        config.seed = 3;
        config.protocol.cycles = 5;
        config.readout.esr = Some(EsrSection::default());
        let text = toml::to_string_pretty(&config).unwrap();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back, config);
    }
}
