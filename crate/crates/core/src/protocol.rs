//! Pulse-sequence construction and execution.
//!
//! A protocol is a flat list of instructions (mw/rf pulses, optical pulses,
//! readout markers) with an optional repeat count. Builders assemble the two
//! polarization schemes on top of a [`SpinSystem`]:
//!
//! * spin exchange: both depleted nuclear states are swapped into the target
//!   through the mS = +1 and mS = -1 manifolds, without optical pulses;
//! * population trapping: depleted states are shelved into one electron
//!   manifold, moved by rf, and reset optically, one arm per depleted state.
//!
//! Builders reject programs whose same-channel lines are closer than the
//! drive can resolve. Execution returns the final state plus a step-by-step
//! trace (nuclear fractions, trace drift, selectivity warnings).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::seqlang::format_statement;
use crate::spin::{
    apply_finite_pulse, apply_ideal_pulse, apply_optical_channel, Channel, DensityMatrix,
    DriveSpec, OpticalParams, SelectivityMode, SelectivityWarning, SpinSystem, Transition,
};
use crate::Result;

/// Frequency resolution attributed to a perfectly selective pulse when
/// checking for degenerate lines, MHz.
const IDEAL_LINEWIDTH_MHZ: f64 = 1e-9;

/// One step of a pulse program.
#[derive(Debug, Clone, PartialEq)]
pub enum PulseInstruction {
    /// A coherent mw or rf rotation. `rabi_mhz = None` means a perfectly
    /// selective rotation; `Some(omega)` drives every same-channel line with
    /// finite selectivity. A carrier offset is only meaningful with a Rabi
    /// frequency.
    Pulse {
        transition: Transition,
        angle_rad: f64,
        rabi_mhz: Option<f64>,
        offset_mhz: f64,
    },
    /// An optical repump pulse.
    Laser(OpticalParams),
    /// Named marker separating the pumped state from subsequent probing; the
    /// state is left untouched.
    Readout(String),
}

/// True when `label` works as a readout marker name: an identifier of
/// letters, digits, `_` or `-` that starts with a letter or `_`.
pub fn is_marker_label(label: &str) -> bool {
    let mut chars = label.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl PulseInstruction {
    pub fn validate(&self) -> Result<()> {
        match self {
            PulseInstruction::Pulse {
                angle_rad,
                rabi_mhz,
                offset_mhz,
                ..
            } => {
                if !angle_rad.is_finite() || !(0.0..=2.0 * PI).contains(angle_rad) {
                    return Err(Error::domain(format!(
                        "pulse angle must lie in [0, 2*pi], got {angle_rad}"
                    )));
                }
                if let Some(omega) = rabi_mhz {
                    if !(*omega > 0.0) || !omega.is_finite() {
                        return Err(Error::domain(format!(
                            "Rabi frequency must be positive, got {omega}"
                        )));
                    }
                    if !offset_mhz.is_finite() {
                        return Err(Error::domain("carrier offset must be finite".to_string()));
                    }
                } else if *offset_mhz != 0.0 {
                    return Err(Error::domain(
                        "a carrier offset requires a Rabi frequency".to_string(),
                    ));
                }
                Ok(())
            }
            PulseInstruction::Laser(optics) => optics.validate(),
            PulseInstruction::Readout(label) => {
                if is_marker_label(label) {
                    Ok(())
                } else {
                    Err(Error::domain(format!(
                        "'{label}' is not a readout marker label"
                    )))
                }
            }
        }
    }
}

/// A validated, executable pulse program.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolProgram {
    steps: Vec<PulseInstruction>,
    repeat_count: usize,
}

impl ProtocolProgram {
    pub fn new(steps: Vec<PulseInstruction>) -> Result<Self> {
        ProtocolProgram::with_repeat(steps, 1)
    }

    pub fn with_repeat(steps: Vec<PulseInstruction>, repeat_count: usize) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::build("a program needs at least one step".to_string()));
        }
        if repeat_count == 0 {
            return Err(Error::build(
                "repeat count must be at least one".to_string(),
            ));
        }
        for step in &steps {
            step.validate()?;
        }
        Ok(ProtocolProgram {
            steps,
            repeat_count,
        })
    }

    pub fn steps(&self) -> &[PulseInstruction] {
        &self.steps
    }

    pub fn repeat_count(&self) -> usize {
        self.repeat_count
    }

    /// Steps executed per run, repeats included.
    pub fn total_steps(&self) -> usize {
        self.steps.len() * self.repeat_count
    }

    /// Replace rate, bias and efficiency of every laser step with the given
    /// settings, keeping each step's own duration. Program text only pins
    /// durations; the remaining optical parameters come from the run
    /// configuration.
    pub fn stamp_laser_settings(&mut self, base: &OpticalParams) -> Result<()> {
        base.validate()?;
        for step in &mut self.steps {
            if let PulseInstruction::Laser(optics) = step {
                *optics = base.with_duration(optics.pump_duration_us);
            }
        }
        Ok(())
    }
}

/// Which electron manifold a population-trapping scheme shelves through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PtBranch {
    /// Shelve through mS = -1.
    Minus,
    /// Shelve through mS = +1.
    Plus,
}

impl PtBranch {
    fn m_s(&self) -> i8 {
        match self {
            PtBranch::Minus => -1,
            PtBranch::Plus => 1,
        }
    }
}

/// Order of the two depletion arms where both orders make sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchOrder {
    /// Deplete mI = +1 first.
    AlphaFirst,
    /// Deplete mI = -1 first.
    GammaFirst,
}

/// Pulse settings shared by the program builders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseTemplate {
    #[serde(default = "default_mode")]
    pub selectivity_mode: SelectivityMode,
    /// Microwave Rabi frequency, MHz (Rabi mode only).
    #[serde(default = "default_mw_rabi")]
    pub mw_rabi_mhz: f64,
    /// Rf Rabi frequency, MHz (Rabi mode only).
    #[serde(default = "default_rf_rabi")]
    pub rf_rabi_mhz: f64,
    /// Rotation angle of every mw pulse, radians.
    #[serde(default = "default_angle")]
    pub mw_angle: f64,
    /// Rotation angle of every rf pulse, radians.
    #[serde(default = "default_angle")]
    pub rf_angle: f64,
    #[serde(default = "default_branch_order")]
    pub branch_order: BranchOrder,
}

fn default_mode() -> SelectivityMode {
    SelectivityMode::Ideal
}
fn default_mw_rabi() -> f64 {
    1.0
}
fn default_rf_rabi() -> f64 {
    0.02
}
fn default_angle() -> f64 {
    PI
}
fn default_branch_order() -> BranchOrder {
    BranchOrder::AlphaFirst
}

impl Default for PulseTemplate {
    fn default() -> Self {
        PulseTemplate {
            selectivity_mode: default_mode(),
            mw_rabi_mhz: default_mw_rabi(),
            rf_rabi_mhz: default_rf_rabi(),
            mw_angle: default_angle(),
            rf_angle: default_angle(),
            branch_order: default_branch_order(),
        }
    }
}

impl PulseTemplate {
    pub fn validate(&self) -> Result<()> {
        for (name, angle) in [("mw_angle", self.mw_angle), ("rf_angle", self.rf_angle)] {
            if !angle.is_finite() || !(0.0..=2.0 * PI).contains(&angle) {
                return Err(Error::domain(format!(
                    "{name} must lie in [0, 2*pi], got {angle}"
                )));
            }
        }
        if self.selectivity_mode == SelectivityMode::Rabi {
            for (name, omega) in [
                ("mw_rabi_mhz", self.mw_rabi_mhz),
                ("rf_rabi_mhz", self.rf_rabi_mhz),
            ] {
                if !omega.is_finite() || !(omega > 0.0) {
                    return Err(Error::domain(format!(
                        "{name} must be positive in Rabi mode, got {omega}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn drive_step(&self, transition: Transition) -> PulseInstruction {
        let (angle, omega) = match transition.channel() {
            Channel::Mw => (self.mw_angle, self.mw_rabi_mhz),
            Channel::Rf => (self.rf_angle, self.rf_rabi_mhz),
        };
        PulseInstruction::Pulse {
            transition,
            angle_rad: angle,
            rabi_mhz: match self.selectivity_mode {
                SelectivityMode::Ideal => None,
                SelectivityMode::Rabi => Some(omega),
            },
            offset_mhz: 0.0,
        }
    }
}

/// Rf angle that transfers a depleted spin with the given probability:
/// beta = 2*asin(sqrt(p)).
pub fn rf_angle_for_flip(transfer_probability: f64) -> Result<f64> {
    if !transfer_probability.is_finite() || !(0.0..=1.0).contains(&transfer_probability) {
        return Err(Error::domain(format!(
            "transfer probability must lie in [0, 1], got {transfer_probability}"
        )));
    }
    Ok(2.0 * transfer_probability.sqrt().asin())
}

/// Optical pulse pair that turns a population-trapping cycle into the exact
/// two-state pump of [`crate::toy`]: an instant repump after the first arm
/// and a closed symmetric pair flip with probability `p_b` after the second.
pub fn toy_emulation_optics(p_b: f64) -> Result<(OpticalParams, OpticalParams)> {
    Ok((OpticalParams::instant_repump(), OpticalParams::for_pair_flip(p_b)?))
}

/// Initial state of the two-state pump: a fraction `p_depleted` in |0,+1>
/// and the rest in the target |0,0>.
pub fn toy_emulation_initial_state(p_depleted: f64) -> Result<DensityMatrix> {
    if !p_depleted.is_finite() || !(0.0..=1.0).contains(&p_depleted) {
        return Err(Error::domain(format!(
            "depleted fraction must lie in [0, 1], got {p_depleted}"
        )));
    }
    let mut populations = [0.0; 9];
    populations[3] = p_depleted;
    populations[4] = 1.0 - p_depleted;
    DensityMatrix::from_populations(&populations)
}

/// Reject programs whose same-channel pulses sit closer in frequency than
/// the wider of the two drives can resolve.
pub fn check_line_collisions(system: &SpinSystem, program: &ProtocolProgram) -> Result<()> {
    struct Line {
        transition: Transition,
        frequency_mhz: f64,
        linewidth_mhz: f64,
        key: (Channel, usize, usize),
    }
    let mut lines: Vec<Line> = Vec::new();
    for step in program.steps() {
        if let PulseInstruction::Pulse {
            transition,
            rabi_mhz,
            ..
        } = step
        {
            let (a, b) = (transition.from().index(), transition.to().index());
            let key = (transition.channel(), a.min(b), a.max(b));
            if lines.iter().any(|l| l.key == key) {
                continue;
            }
            lines.push(Line {
                transition: *transition,
                frequency_mhz: system.transition_frequency(transition),
                linewidth_mhz: rabi_mhz.unwrap_or(IDEAL_LINEWIDTH_MHZ),
                key,
            });
        }
    }
    for i in 0..lines.len() {
        for j in (i + 1)..lines.len() {
            let (a, b) = (&lines[i], &lines[j]);
            if a.key.0 != b.key.0 {
                continue;
            }
            let separation = (a.frequency_mhz - b.frequency_mhz).abs();
            let resolution = a.linewidth_mhz.max(b.linewidth_mhz);
            if separation < resolution {
                return Err(Error::build(format!(
                    "{} at {:.6} MHz and {} at {:.6} MHz are separated by \
                     {separation:.6} MHz, below the drive resolution {resolution:.6} MHz",
                    a.transition, a.frequency_mhz, b.transition, b.frequency_mhz
                )));
            }
        }
    }
    Ok(())
}

/// Spin-exchange program: swap each depleted nuclear state into mI = 0
/// through its own electron manifold. No optical pulses are involved, so
/// coherent errors accumulate over repeats.
pub fn build_spin_exchange_program(
    system: &SpinSystem,
    template: &PulseTemplate,
) -> Result<ProtocolProgram> {
    system.validate()?;
    template.validate()?;
    let alpha = [
        template.drive_step(Transition::mw((0, 1), (1, 1))?),
        template.drive_step(Transition::rf((1, 1), (1, 0))?),
    ];
    let gamma = [
        template.drive_step(Transition::mw((0, -1), (-1, -1))?),
        template.drive_step(Transition::rf((-1, -1), (-1, 0))?),
    ];
    let steps = match template.branch_order {
        BranchOrder::AlphaFirst => [alpha, gamma].concat(),
        BranchOrder::GammaFirst => [gamma, alpha].concat(),
    };
    let program = ProtocolProgram::new(steps)?;
    check_line_collisions(system, &program)?;
    Ok(program)
}

/// Population-trapping program with the same optical settings after both
/// arms.
pub fn build_population_trapping_program(
    system: &SpinSystem,
    branch: PtBranch,
    target_m_i: i8,
    template: &PulseTemplate,
    optics: &OpticalParams,
) -> Result<ProtocolProgram> {
    build_population_trapping_program_with(system, branch, target_m_i, template, *optics, *optics)
}

/// Population-trapping program with separately chosen optical pulses after
/// the first and second arm. Each arm shelves one depleted nuclear state
/// into the chosen electron manifold, moves it by rf, and is followed by a
/// laser pulse that resets the electron:
///
/// * target mI = 0: deplete +1 and -1 (order per the template);
/// * target mI = -1: deplete +1 into 0, then 0 into -1;
/// * target mI = +1: deplete -1 into 0, then 0 into +1.
pub fn build_population_trapping_program_with(
    system: &SpinSystem,
    branch: PtBranch,
    target_m_i: i8,
    template: &PulseTemplate,
    first_laser: OpticalParams,
    second_laser: OpticalParams,
) -> Result<ProtocolProgram> {
    system.validate()?;
    template.validate()?;
    let s = branch.m_s();
    let arm = |from_mi: i8, to_mi: i8| -> Result<[PulseInstruction; 2]> {
        Ok([
            template.drive_step(Transition::mw((0, from_mi), (s, from_mi))?),
            template.drive_step(Transition::rf((s, from_mi), (s, to_mi))?),
        ])
    };
    let (first_arm, second_arm) = match target_m_i {
        0 => {
            let deplete_up = arm(1, 0)?;
            let deplete_down = arm(-1, 0)?;
            match template.branch_order {
                BranchOrder::AlphaFirst => (deplete_up, deplete_down),
                BranchOrder::GammaFirst => (deplete_down, deplete_up),
            }
        }
        -1 => (arm(1, 0)?, arm(0, -1)?),
        1 => (arm(-1, 0)?, arm(0, 1)?),
        other => {
            return Err(Error::domain(format!(
                "target nuclear projection must be -1, 0 or +1, got {other}"
            )))
        }
    };
    let mut steps = Vec::with_capacity(6);
    steps.extend(first_arm);
    steps.push(PulseInstruction::Laser(first_laser));
    steps.extend(second_arm);
    steps.push(PulseInstruction::Laser(second_laser));
    let program = ProtocolProgram::new(steps)?;
    check_line_collisions(system, &program)?;
    Ok(program)
}

/// State of the run after one instruction.
#[derive(Debug, Clone, Serialize)]
pub struct TraceEntry {
    /// Zero-based position in the executed step stream (repeats unrolled).
    pub step: usize,
    /// The instruction in program text form.
    pub label: String,
    /// Populations summed over the electron index, (mI=+1, 0, -1).
    pub nuclear_fractions: [f64; 3],
    /// |tr(rho) - 1| after the step.
    pub trace_drift: f64,
    pub warnings: Vec<SelectivityWarning>,
}

/// Step-by-step record of one program execution.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RunTrace {
    pub entries: Vec<TraceEntry>,
}

impl RunTrace {
    pub fn warning_count(&self) -> usize {
        self.entries.iter().map(|e| e.warnings.len()).sum()
    }
}

fn apply_step(
    state: &DensityMatrix,
    system: &SpinSystem,
    step: &PulseInstruction,
) -> Result<(DensityMatrix, Vec<SelectivityWarning>)> {
    match step {
        PulseInstruction::Pulse {
            transition,
            angle_rad,
            rabi_mhz: None,
            ..
        } => Ok((apply_ideal_pulse(state, transition, *angle_rad)?, Vec::new())),
        PulseInstruction::Pulse {
            transition,
            angle_rad,
            rabi_mhz: Some(omega),
            offset_mhz,
        } => {
            let drive = DriveSpec::rabi(*transition, *angle_rad, *omega, *offset_mhz)?;
            apply_finite_pulse(state, system, &drive)
        }
        PulseInstruction::Laser(optics) => {
            Ok((apply_optical_channel(state, optics), Vec::new()))
        }
        PulseInstruction::Readout(_) => Ok((state.clone(), Vec::new())),
    }
}

/// Execute a program once (honoring its repeat count) and record the state
/// after every step.
pub fn run_program(
    state: &DensityMatrix,
    system: &SpinSystem,
    program: &ProtocolProgram,
) -> Result<(DensityMatrix, RunTrace)> {
    system.validate()?;
    state.validate()?;
    let mut rho = state.clone();
    let mut trace = RunTrace::default();
    let mut step_index = 0usize;
    for _ in 0..program.repeat_count() {
        for step in program.steps() {
            let (next, warnings) = apply_step(&rho, system, step)?;
            rho = next;
            trace.entries.push(TraceEntry {
                step: step_index,
                label: format_statement(step),
                nuclear_fractions: rho.nuclear_fractions(),
                trace_drift: rho.trace_drift(),
                warnings,
            });
            step_index += 1;
        }
    }
    Ok((rho, trace))
}

/// Apply the whole program 0..=n_max times and report the nuclear fractions
/// after each pass; entry 0 is the initial state.
pub fn run_recursive_series(
    state: &DensityMatrix,
    system: &SpinSystem,
    program: &ProtocolProgram,
    n_max: usize,
) -> Result<Vec<[f64; 3]>> {
    system.validate()?;
    state.validate()?;
    let mut series = Vec::with_capacity(n_max + 1);
    series.push(state.nuclear_fractions());
    let mut rho = state.clone();
    for _ in 0..n_max {
        for _ in 0..program.repeat_count() {
            for step in program.steps() {
                let (next, _) = apply_step(&rho, system, step)?;
                rho = next;
            }
        }
        series.push(rho.nuclear_fractions());
    }
    Ok(series)
}
