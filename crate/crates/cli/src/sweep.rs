//! Cartesian parameter sweeps over a base experiment.
//!
//! Axes are expanded in the fixed order (cycles, rf_angle_pi,
//! second_pulse_us, b_field_mt) and rows are emitted in lexicographic order
//! of that tuple regardless of how many workers execute them.

use std::path::{Path, PathBuf};

use anyhow::Context;

use nvpolar::toy::limit_population;
use nvpolar::Error;

use crate::config::{ExperimentConfig, ProtocolKind};
use crate::experiment;
use crate::output::{self, SweepRow};

#[derive(Debug, Clone, Copy)]
struct SweepPoint {
    cycles: usize,
    rf_angle_pi: f64,
    second_pulse_us: f64,
    b_field_mt: f64,
}

fn sweep_points(config: &ExperimentConfig) -> Vec<SweepPoint> {
    let cycles = config
        .sweep
        .cycles
        .clone()
        .unwrap_or_else(|| vec![config.protocol.cycles]);
    let rf_angles = config
        .sweep
        .rf_angle_pi
        .clone()
        .unwrap_or_else(|| vec![config.protocol.pulses.rf_angle_pi]);
    let second_pulses = config
        .sweep
        .second_pulse_us
        .clone()
        .unwrap_or_else(|| vec![config.optics.second_pulse_us]);
    let b_fields = config
        .sweep
        .b_field_mt
        .clone()
        .unwrap_or_else(|| vec![config.system.b_field_mt]);
    let mut points = Vec::with_capacity(
        cycles.len() * rf_angles.len() * second_pulses.len() * b_fields.len(),
    );
    for &n in &cycles {
        for &beta in &rf_angles {
            for &p2 in &second_pulses {
                for &b in &b_fields {
                    points.push(SweepPoint {
                        cycles: n,
                        rf_angle_pi: beta,
                        second_pulse_us: p2,
                        b_field_mt: b,
                    });
                }
            }
        }
    }
    points
}

fn point_config(base: &ExperimentConfig, point: SweepPoint) -> ExperimentConfig {
    let mut config = base.clone();
    config.protocol.cycles = point.cycles;
    config.protocol.pulses.rf_angle_pi = point.rf_angle_pi;
    config.optics.second_pulse_us = point.second_pulse_us;
    config.system.b_field_mt = point.b_field_mt;
    config
}

fn run_point(base: &ExperimentConfig, point: SweepPoint) -> nvpolar::Result<SweepRow> {
    let config = point_config(base, point);
    config.validate()?;
    let resolved = experiment::resolve_protocol(&config)?;
    let initial = experiment::initial_state(&config)?;
    let result = experiment::run_cycles(
        &initial,
        &config.system,
        &resolved.program,
        config.protocol.cycles,
    )?;
    let fractions = result.series[result.series.len() - 1];
    // The closed-form pumping limit for a trapping cycle whose rf pulse
    // transfers with probability sin^2(beta/2); undefined when nothing
    // moves at all.
    let p_target_limit = match (config.protocol.kind, resolved.second_flip_probability) {
        (ProtocolKind::Pt, Some(p_b)) => {
            let rf_angle = config.protocol.pulses.template().rf_angle;
            let p_a = (rf_angle / 2.0).sin().powi(2);
            match limit_population(p_a, p_b) {
                Ok(limit) => Some(limit),
                Err(Error::UndefinedLimit) => None,
                Err(other) => return Err(other),
            }
        }
        _ => None,
    };
    Ok(SweepRow {
        cycles: point.cycles,
        rf_angle_pi: point.rf_angle_pi,
        second_pulse_us: point.second_pulse_us,
        b_field_mt: point.b_field_mt,
        p_plus1: fractions[0],
        p_zero: fractions[1],
        p_minus1: fractions[2],
        p_target_limit,
    })
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub written: Vec<PathBuf>,
}

/// Run every sweep point and write `<stem>_sweep.csv` (plus JSON mirror)
/// and the manifest. Rows keep the point order however the work is split.
pub fn run_sweep(
    config: &ExperimentConfig,
    out_override: Option<&Path>,
) -> anyhow::Result<SweepOutcome> {
    config.validate()?;
    if !config.sweep.has_axes() {
        return Err(Error::Config(
            "sweep requires at least one axis under [sweep]".into(),
        )
        .into());
    }
    let points = sweep_points(config);
    let rows = compute_rows(config, &points)?;

    let dir = out_override.unwrap_or(&config.output.dir).to_path_buf();
    let stem = &config.output.stem;
    let mut written = Vec::new();
    output::write_file(
        &mut written,
        &dir,
        &format!("{stem}_sweep.csv"),
        &output::sweep_csv(&rows),
    )?;
    if config.output.json {
        output::write_file(
            &mut written,
            &dir,
            &format!("{stem}_sweep.json"),
            &output::to_json_pretty(&rows),
        )?;
    }
    output::write_file(
        &mut written,
        &dir,
        &format!("{stem}_manifest.json"),
        &output::manifest_json(config),
    )
    .context("manifest")?;
    Ok(SweepOutcome { rows, written })
}

fn compute_rows(
    config: &ExperimentConfig,
    points: &[SweepPoint],
) -> nvpolar::Result<Vec<SweepRow>> {
    use rayon::prelude::*;
    let compute = || {
        points
            .par_iter()
            .map(|&point| run_point(config, point))
            .collect::<nvpolar::Result<Vec<SweepRow>>>()
    };
    if config.sweep.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.sweep.workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
        pool.install(compute)
    } else {
        compute()
    }
}
