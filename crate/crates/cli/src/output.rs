//! Deterministic result files. Floats are printed with their shortest exact
//! representation so reruns of the same configuration are byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use crate::config::ExperimentConfig;

/// One row of the cycle-by-cycle population table. Row 0 is the state
/// before any cycle.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SeriesRow {
    pub cycle: usize,
    pub p_plus1: f64,
    pub p_zero: f64,
    pub p_minus1: f64,
}

pub fn series_rows(series: &[[f64; 3]]) -> Vec<SeriesRow> {
    series
        .iter()
        .enumerate()
        .map(|(cycle, f)| SeriesRow {
            cycle,
            p_plus1: f[0],
            p_zero: f[1],
            p_minus1: f[2],
        })
        .collect()
}

pub fn series_csv(rows: &[SeriesRow]) -> String {
    let mut out = String::from("cycle,p_plus1,p_zero,p_minus1\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{:?},{:?},{:?}",
            row.cycle, row.p_plus1, row.p_zero, row.p_minus1
        );
    }
    out
}

/// One sweep point with its resolved axis values and final fractions.
/// `p_target_limit` is the closed-form pumping limit where one exists.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepRow {
    pub cycles: usize,
    pub rf_angle_pi: f64,
    pub second_pulse_us: f64,
    pub b_field_mt: f64,
    pub p_plus1: f64,
    pub p_zero: f64,
    pub p_minus1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_target_limit: Option<f64>,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "cycles,rf_angle_pi,second_pulse_us,b_field_mt,p_plus1,p_zero,p_minus1,p_target_limit\n",
    );
    for row in rows {
        let _ = write!(
            out,
            "{},{:?},{:?},{:?},{:?},{:?},{:?},",
            row.cycles,
            row.rf_angle_pi,
            row.second_pulse_us,
            row.b_field_mt,
            row.p_plus1,
            row.p_zero,
            row.p_minus1
        );
        match row.p_target_limit {
            Some(limit) => {
                let _ = writeln!(out, "{limit:?}");
            }
            None => out.push('\n'),
        }
    }
    out
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    seed: u64,
    config: &'a ExperimentConfig,
}

/// Everything needed to reproduce the run: the fully resolved configuration
/// plus the tool version. Deliberately no timestamps or host details.
pub fn manifest_json(config: &ExperimentConfig) -> String {
    let manifest = Manifest {
        tool: "nvpolar",
        version: env!("CARGO_PKG_VERSION"),
        seed: config.seed,
        config,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    text
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("rows serialize");
    text.push('\n');
    text
}

/// Write one file, creating the directory first, and record its path.
pub fn write_file(
    written: &mut Vec<PathBuf>,
    dir: &Path,
    name: &str,
    contents: &str,
) -> anyhow::Result<()> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    written.push(path);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_csv_is_exact_and_ordered() {
        let rows = series_rows(&[[0.25, 0.5, 0.25], [0.1, 0.85, 0.05]]);
        let csv = series_csv(&rows);
        assert_eq!(
            csv,
            "cycle,p_plus1,p_zero,p_minus1\n0,0.25,0.5,0.25\n1,0.1,0.85,0.05\n"
        );
    }

    #[test]
    fn sweep_csv_leaves_missing_limits_blank() {
        let rows = [
            SweepRow {
                cycles: 4,
                rf_angle_pi: 0.5,
                second_pulse_us: 0.25,
                b_field_mt: 30.0,
                p_plus1: 0.1,
                p_zero: 0.8,
                p_minus1: 0.1,
                p_target_limit: Some(0.8125),
            },
            SweepRow {
                cycles: 4,
                rf_angle_pi: 0.5,
                second_pulse_us: 0.25,
                b_field_mt: 77.7,
                p_plus1: 0.2,
                p_zero: 0.6,
                p_minus1: 0.2,
                p_target_limit: None,
            },
        ];
        let csv = sweep_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "cycles,rf_angle_pi,second_pulse_us,b_field_mt,p_plus1,p_zero,p_minus1,p_target_limit"
        );
        assert_eq!(lines.next().unwrap(), "4,0.5,0.25,30.0,0.1,0.8,0.1,0.8125");
        assert_eq!(lines.next().unwrap(), "4,0.5,0.25,77.7,0.2,0.6,0.2,");
        assert_eq!(lines.next(), None);
    }

    #[test]
    fn manifest_carries_version_and_resolved_config() {
        let mut config = ExperimentConfig::default();
        config.seed = 99;
        let text = manifest_json(&config);
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["tool"], "nvpolar");
        assert_eq!(value["version"], env!("CARGO_PKG_VERSION"));
        assert_eq!(value["seed"], 99);
        assert_eq!(value["config"]["protocol"]["cycles"], 1);
        assert!(value.get("timestamp").is_none());
    }
}
