//! Named experiment presets reproducing the headline configurations.
//!
//! The per-field flip rates are plausible guesses, not calibrated values:
//! the relevant anchor is that a 0.25 us pulse at 1.43/us flips the nuclear
//! spin with probability ~0.20.

use nvpolar::protocol::PtBranch;

use crate::config::{EsrSection, ExperimentConfig, ProtocolKind};

pub const NAMES: &[(&str, &str)] = &[
    (
        "fig1c",
        "spin-exchange ODMR, pumped vs unpumped (30.2 mT)",
    ),
    (
        "fig2c_i",
        "population trapping into mI = 0 at 5.7 mT, ODMR",
    ),
    (
        "fig2c_ii",
        "population trapping into mI = 0 at 30.2 mT, ODMR",
    ),
    (
        "fig2c_iii",
        "population trapping into mI = -1 at 77.7 mT (biased flips), ODMR",
    ),
    (
        "fig3b",
        "two-state pump emulation, Ramsey FFT after 8 cycles",
    ),
    (
        "fig4b",
        "pump-up curves: cycles x rf angle sweep of the emulated pump",
    ),
    (
        "fig4c",
        "trapping enhancement vs second laser duration",
    ),
    (
        "fig4d",
        "steady-state sweep: rf angle x second laser duration",
    ),
];

pub fn get(name: &str) -> Option<ExperimentConfig> {
    let mut config = ExperimentConfig::default();
    config.output.dir = format!("out/{name}").into();
    config.output.stem = name.to_string();
    match name {
        "fig1c" => {
            config.system.b_field_mt = 30.2;
            config.protocol.kind = ProtocolKind::Se;
            config.readout.esr = Some(EsrSection::default());
            config.readout.reference = true;
        }
        "fig2c_i" | "fig2c_ii" | "fig2c_iii" => {
            config.protocol.cycles = 20;
            config.readout.esr = Some(EsrSection::default());
            config.readout.reference = true;
            match name {
                "fig2c_i" => {
                    config.system.b_field_mt = 5.7;
                    config.optics.nuclear_flip_rate_per_us = 1.43;
                }
                "fig2c_ii" => {
                    config.system.b_field_mt = 30.2;
                    config.optics.nuclear_flip_rate_per_us = 1.60;
                }
                _ => {
                    config.system.b_field_mt = 77.7;
                    config.optics.nuclear_flip_rate_per_us = 1.88;
                    config.optics.flip_bias = 0.6;
                    config.protocol.target_m_i = -1;
                    config.protocol.branch = PtBranch::Minus;
                }
            }
        }
        "fig3b" => {
            config.system.b_field_mt = 30.2;
            config.optics.nuclear_flip_rate_per_us = 1.60;
            config.protocol.emulate_toy = true;
            config.protocol.pulses.rf_angle_pi = 0.5;
            config.protocol.cycles = 8;
            config.readout.ramsey = Some(Default::default());
            config.readout.reference = true;
        }
        "fig4b" => {
            config.system.b_field_mt = 30.2;
            config.protocol.emulate_toy = true;
            config.sweep.cycles = Some(vec![1, 2, 4, 8, 16, 32]);
            config.sweep.rf_angle_pi = Some(vec![0.25, 0.5, 0.75, 1.0]);
        }
        "fig4c" => {
            config.system.b_field_mt = 30.2;
            config.protocol.cycles = 40;
            config.sweep.second_pulse_us =
                Some(vec![0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0]);
        }
        "fig4d" => {
            config.system.b_field_mt = 30.2;
            config.protocol.cycles = 32;
            config.sweep.rf_angle_pi =
                Some((1..=10).map(|k| f64::from(k) * 0.1).collect());
            config.sweep.second_pulse_us = Some(vec![0.25, 1.0, 2.0, 5.0]);
        }
        _ => return None,
    }
    Some(config)
}
