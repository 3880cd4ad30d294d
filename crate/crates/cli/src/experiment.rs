//! Resolve a configuration into a program + initial state, run it, and
//! write the result files.

use std::path::{Path, PathBuf};

use anyhow::Context;

use nvpolar::protocol::{
    build_population_trapping_program_with, build_spin_exchange_program, check_line_collisions,
    run_program, toy_emulation_initial_state, toy_emulation_optics, ProtocolProgram,
};
use nvpolar::readout::{synthesize_esr, synthesize_ramsey_spectrum, SpectrumTrace};
use nvpolar::seqlang;
use nvpolar::spin::{effective_flip_probability, DensityMatrix, SpinSystem};
use nvpolar::Error;

use crate::config::{ExperimentConfig, InitialKind, ProtocolKind};
use crate::output;

/// The protocol program a configuration resolves to, together with the
/// flip probability its second laser realizes (used for the pumping limit).
pub struct ResolvedProtocol {
    pub program: ProtocolProgram,
    pub second_flip_probability: Option<f64>,
}

pub fn resolve_protocol(config: &ExperimentConfig) -> nvpolar::Result<ResolvedProtocol> {
    let system = &config.system;
    let template = config.protocol.pulses.template();
    match config.protocol.kind {
        ProtocolKind::Se => Ok(ResolvedProtocol {
            program: build_spin_exchange_program(system, &template)?,
            second_flip_probability: None,
        }),
        ProtocolKind::Pt => {
            let (first, second, p_b) = if config.protocol.emulate_toy {
                let p_b = effective_flip_probability(&config.optics.second_laser()?);
                let (first, second) = toy_emulation_optics(p_b)?;
                (first, second, p_b)
            } else {
                let second = config.optics.second_laser()?;
                let p_b = effective_flip_probability(&second);
                (config.optics.first_laser()?, second, p_b)
            };
            Ok(ResolvedProtocol {
                program: build_population_trapping_program_with(
                    system,
                    config.protocol.branch,
                    config.protocol.target_m_i,
                    &template,
                    first,
                    second,
                )?,
                second_flip_probability: Some(p_b),
            })
        }
        ProtocolKind::Seq => {
            let path = config
                .protocol
                .seq_path
                .as_ref()
                .expect("validated: seq kind has a path");
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::Config(format!("cannot read {}: {e}", path.display()))
            })?;
            let mut program = seqlang::parse_program(&text)?;
            // The text carries durations only; fill in the laser physics.
            program.stamp_laser_settings(&config.optics.laser(0.0)?)?;
            check_line_collisions(&config.system, &program)?;
            Ok(ResolvedProtocol {
                program,
                second_flip_probability: None,
            })
        }
    }
}

pub fn initial_state(config: &ExperimentConfig) -> nvpolar::Result<DensityMatrix> {
    if config.protocol.emulate_toy {
        return toy_emulation_initial_state(config.protocol.initial_depleted);
    }
    if let Some(populations) = &config.protocol.initial_populations {
        let mut array = [0.0; 9];
        array.copy_from_slice(populations);
        return DensityMatrix::from_populations(&array);
    }
    Ok(match config.protocol.initial {
        InitialKind::OpticallyInitialized => DensityMatrix::optically_initialized(),
        InitialKind::FullyMixed => DensityMatrix::fully_mixed(),
    })
}

pub struct RunResult {
    /// Nuclear fractions (+1, 0, -1) before any cycle and after each one.
    pub series: Vec<[f64; 3]>,
    pub final_state: DensityMatrix,
    pub selectivity_warnings: usize,
}

/// Run `cycles` passes of the program, recording the fractions after each.
pub fn run_cycles(
    initial: &DensityMatrix,
    system: &SpinSystem,
    program: &ProtocolProgram,
    cycles: usize,
) -> nvpolar::Result<RunResult> {
    let mut state = initial.clone();
    let mut series = Vec::with_capacity(cycles + 1);
    series.push(state.nuclear_fractions());
    let mut warnings = 0;
    for _ in 0..cycles {
        let (next, trace) = run_program(&state, system, program)?;
        warnings += trace.warning_count();
        state = next;
        series.push(state.nuclear_fractions());
    }
    state.validate()?;
    Ok(RunResult {
        series,
        final_state: state,
        selectivity_warnings: warnings,
    })
}

pub struct ExperimentOutcome {
    pub result: RunResult,
    pub written: Vec<PathBuf>,
}

/// Run one experiment end to end and write its files:
/// `<stem>_series.csv`, optional `<stem>_esr.csv` / `<stem>_esr_reference.csv`
/// / `<stem>_ramsey_fft.csv` (with JSON mirrors), and `<stem>_manifest.json`.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_override: Option<&Path>,
) -> anyhow::Result<ExperimentOutcome> {
    config.validate()?;
    let resolved = resolve_protocol(config)?;
    let initial = initial_state(config)?;
    let result = run_cycles(
        &initial,
        &config.system,
        &resolved.program,
        config.protocol.cycles,
    )?;

    let dir = out_override.unwrap_or(&config.output.dir).to_path_buf();
    let stem = &config.output.stem;
    let mut written = Vec::new();
    let emit = |written: &mut Vec<PathBuf>, name: String, csv: String, json: Option<String>| {
        output::write_file(written, &dir, &name, &csv)?;
        if let Some(json) = json {
            let json_name = name.replace(".csv", ".json");
            output::write_file(written, &dir, &json_name, &json)?;
        }
        anyhow::Ok(())
    };

    let rows = output::series_rows(&result.series);
    emit(
        &mut written,
        format!("{stem}_series.csv"),
        output::series_csv(&rows),
        config.output.json.then(|| output::to_json_pretty(&rows)),
    )?;

    let spectrum = |written: &mut Vec<PathBuf>,
                    suffix: &str,
                    trace: SpectrumTrace|
     -> anyhow::Result<()> {
        emit(
            written,
            format!("{stem}_{suffix}.csv"),
            trace.to_csv_string(),
            config.output.json.then(|| trace.to_json_string()),
        )
    };

    if let Some(esr) = &config.readout.esr {
        let esr_config = esr.resolve(&config.system);
        spectrum(
            &mut written,
            "esr",
            synthesize_esr(&config.system, &result.final_state, &esr_config)?,
        )?;
        if config.readout.reference {
            spectrum(
                &mut written,
                "esr_reference",
                synthesize_esr(&config.system, &initial, &esr_config)?,
            )?;
        }
    }
    if let Some(ramsey) = &config.readout.ramsey {
        spectrum(
            &mut written,
            "ramsey_fft",
            synthesize_ramsey_spectrum(&config.system, &result.final_state, ramsey)?,
        )?;
        if config.readout.reference {
            spectrum(
                &mut written,
                "ramsey_fft_reference",
                synthesize_ramsey_spectrum(&config.system, &initial, ramsey)?,
            )?;
        }
    }

    output::write_file(
        &mut written,
        &dir,
        &format!("{stem}_manifest.json"),
        &output::manifest_json(config),
    )
    .context("manifest")?;

    Ok(ExperimentOutcome { result, written })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nvpolar::protocol::PulseInstruction;
    use nvpolar::spin::OpticalParams;

    #[test]
    fn default_config_resolves_to_a_six_step_trapping_cycle() {
        let config = ExperimentConfig::default();
        let resolved = resolve_protocol(&config).unwrap();
        assert_eq!(resolved.program.steps().len(), 6);
        assert!(resolved.second_flip_probability.is_some());
        let lasers = resolved
            .program
            .steps()
            .iter()
            .filter(|s| matches!(s, PulseInstruction::Laser(_)))
            .count();
        assert_eq!(lasers, 2);
    }

    #[test]
    fn emulation_swaps_in_the_two_state_pump_lasers() {
        let mut config = ExperimentConfig::default();
        config.protocol.emulate_toy = true;
        let resolved = resolve_protocol(&config).unwrap();
        let p_b = resolved.second_flip_probability.unwrap();
        // kappa = 1.43, 0.25 us: p_b = (2/3) (1 - exp(-0.3575))
        assert!((p_b - 2.0 / 3.0 * (1.0 - (-0.3575f64).exp())).abs() < 1e-15);
        let lasers: Vec<&OpticalParams> = resolved
            .program
            .steps()
            .iter()
            .filter_map(|s| match s {
                PulseInstruction::Laser(optics) => Some(optics),
                _ => None,
            })
            .collect();
        assert_eq!(lasers[0], &OpticalParams::instant_repump());
        assert_eq!(lasers[1].flip_bias, 1.0);
    }

    #[test]
    fn one_ideal_cycle_traps_everything_in_the_target() {
        let config = ExperimentConfig::default();
        let resolved = resolve_protocol(&config).unwrap();
        let result = run_cycles(
            &DensityMatrix::optically_initialized(),
            &config.system,
            &resolved.program,
            1,
        )
        .unwrap();
        assert_eq!(result.series.len(), 2);
        // Ideal pi pulses trap the nuclear spin in one pass up to the
        // optically induced flips of the two 0.25 us pulses (~0.27 leaks).
        assert!(result.series[1][1] > 0.7, "{:?}", result.series[1]);
        let sum: f64 = result.series[1].iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert_eq!(result.selectivity_warnings, 0);
    }

    #[test]
    fn files_land_in_the_requested_directory() {
        let tmp = tempfile::tempdir().unwrap();
        let mut config = ExperimentConfig::default();
        config.readout.esr = Some(crate::config::EsrSection::default());
        config.readout.reference = true;
        config.output.stem = "t".into();
        let outcome = run_experiment(&config, Some(tmp.path())).unwrap();
        let names: Vec<String> = outcome
            .written
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(
            names,
            [
                "t_series.csv",
                "t_series.json",
                "t_esr.csv",
                "t_esr.json",
                "t_esr_reference.csv",
                "t_esr_reference.json",
                "t_manifest.json",
            ]
        );
        for path in &outcome.written {
            assert!(path.exists());
        }
    }

    #[test]
    fn seq_protocols_parse_stamp_and_run() {
        let tmp = tempfile::tempdir().unwrap();
        let seq = tmp.path().join("cycle.seq");
        std::fs::write(
            &seq,
            "mw (0,+1) -> (-1,+1) 1.0pi\nrf (-1,+1) -> (-1,0) 1.0pi\nlaser 0.25us\nreadout end\n",
        )
        .unwrap();
        let mut config = ExperimentConfig::default();
        config.protocol.kind = ProtocolKind::Seq;
        config.protocol.seq_path = Some(seq);
        config.optics.nuclear_flip_rate_per_us = 0.0;
        let resolved = resolve_protocol(&config).unwrap();
        let result = run_cycles(
            &DensityMatrix::optically_initialized(),
            &config.system,
            &resolved.program,
            1,
        )
        .unwrap();
        // One arm moves the mI = +1 third into the target; no flips occur.
        assert!((result.series[1][1] - 2.0 / 3.0).abs() < 1e-12);
        assert!(result.series[1][0].abs() < 1e-12);
    }
}
