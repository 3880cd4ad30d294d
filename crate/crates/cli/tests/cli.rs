//! End-to-end tests of the binary: exit codes, verb output, file layout,
//! and determinism.

use std::path::Path;
use std::process::{Command, Output};

fn nvpolar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nvpolar"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn assert_exit(output: &Output, code: i32) {
    assert_eq!(
        output.status.code(),
        Some(code),
        "stdout:\n{}\nstderr:\n{}",
        stdout(output),
        stderr(output)
    );
}

#[test]
fn presets_list_names_every_preset() {
    let output = nvpolar(&["presets", "list"]);
    assert_exit(&output, 0);
    let text = stdout(&output);
    for name in [
        "fig1c", "fig2c_i", "fig2c_ii", "fig2c_iii", "fig3b", "fig4b", "fig4c", "fig4d",
    ] {
        assert!(text.contains(name), "missing {name} in:\n{text}");
    }
}

#[test]
fn run_produces_identical_files_on_rerun() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        let output = nvpolar(&["run", "fig2c_i", "--out", dir.path().to_str().unwrap()]);
        assert_exit(&output, 0);
        assert!(stdout(&output).contains("final nuclear fractions"));
    }
    for name in [
        "fig2c_i_series.csv",
        "fig2c_i_series.json",
        "fig2c_i_esr.csv",
        "fig2c_i_esr.json",
        "fig2c_i_esr_reference.csv",
        "fig2c_i_esr_reference.json",
        "fig2c_i_manifest.json",
    ] {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap_or_else(|e| {
            panic!("{name}: {e}");
        });
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between reruns");
        assert!(!a.is_empty());
    }
}

#[test]
fn validation_failures_exit_2_and_runtime_failures_exit_1() {
    let dir = tempfile::tempdir().unwrap();

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[protocol]\nknid = \"pt\"\n").unwrap();
    let output = nvpolar(&["run", bad.to_str().unwrap()]);
    assert_exit(&output, 2);
    assert!(stderr(&output).contains("knid"));

    let output = nvpolar(&["run", "no_such_config_or_preset"]);
    assert_exit(&output, 2);
    assert!(stderr(&output).contains("presets list"));

    // A preset without sweep axes cannot be swept.
    let output = nvpolar(&["sweep", "fig1c"]);
    assert_exit(&output, 2);
    assert!(stderr(&output).contains("axis"));

    // Unwritable output directory: the run itself fails.
    let output = nvpolar(&["run", "fig1c", "--out", "/dev/null/out"]);
    assert_exit(&output, 1);
}

#[test]
fn parse_summarizes_programs_and_locates_errors() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.seq");
    std::fs::write(
        &good,
        "# one trapping arm\nrepeat 3 {\n  mw (0,+1) -> (-1,+1) 1.0pi\n  rf (-1,+1) -> (-1,0) 1.0pi\n  laser 250ns\n}\n",
    )
    .unwrap();
    let output = nvpolar(&["parse", good.to_str().unwrap()]);
    assert_exit(&output, 0);
    assert_eq!(stdout(&output), "ok: 3 steps, repeat count 3\n");

    let bad = dir.path().join("bad.seq");
    std::fs::write(&bad, "laser 0.25us\nmw (0,+1) -> (-1,0) 1.0pi\n").unwrap();
    let output = nvpolar(&["parse", bad.to_str().unwrap()]);
    assert_exit(&output, 2);
    let message = stderr(&output);
    assert!(message.contains("bad.seq:2:1"), "{message}");

    let output = nvpolar(&["parse", dir.path().join("missing.seq").to_str().unwrap()]);
    assert_exit(&output, 2);
}

#[test]
fn fmt_canonicalizes_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let messy = dir.path().join("messy.seq");
    std::fs::write(
        &messy,
        "mw(0,+1)->(-1,+1)pi rabi 1.0   # selective\nlaser 250ns\nrf (-1,+1)->(-1,0) 0.5pi\nreadout probe\n",
    )
    .unwrap();
    let output = nvpolar(&["fmt", messy.to_str().unwrap()]);
    assert_exit(&output, 0);
    let canonical = stdout(&output);
    assert_eq!(
        canonical,
        "mw (0,+1) -> (-1,+1) 1.0pi rabi 1.0\nlaser 0.25us\nrf (-1,+1) -> (-1,0) 0.5pi\nreadout probe\n"
    );

    let formatted = dir.path().join("formatted.seq");
    std::fs::write(&formatted, &canonical).unwrap();
    let output = nvpolar(&["fmt", formatted.to_str().unwrap()]);
    assert_exit(&output, 0);
    assert_eq!(stdout(&output), canonical);
}

#[test]
fn toy_tabulates_the_series_and_limit() {
    let output = nvpolar(&["toy", "--pa", "0.5", "--pb", "0.2", "--n", "1", "--p0", "0.5"]);
    assert_exit(&output, 0);
    let text = stdout(&output);
    assert!(text.starts_with("n,depleted_closed,depleted_iterated\n"), "{text}");
    assert!(text.contains("\n1,0.35,0.35\n"), "{text}");
    assert!(text.contains("limit_target,0.7142857142857142"), "{text}");

    let output = nvpolar(&["toy", "--pa", "1.5", "--pb", "0.2"]);
    assert_exit(&output, 2);

    let output = nvpolar(&["toy", "--pa", "0.0", "--pb", "0.0", "--n", "1"]);
    assert_exit(&output, 0);
    assert!(stdout(&output).contains("limit_target,undefined"));
}

#[test]
fn a_single_point_sweep_agrees_with_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("point.toml");
    std::fs::write(
        &config,
        r#"
[protocol]
emulate_toy = true
cycles = 4

[protocol.pulses]
rf_angle_pi = 0.5

[sweep]
cycles = [4]

[output]
stem = "point"
json = false
"#,
    )
    .unwrap();

    let sweep_dir = tempfile::tempdir().unwrap();
    let output = nvpolar(&[
        "sweep",
        config.to_str().unwrap(),
        "--out",
        sweep_dir.path().to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    let sweep_csv = std::fs::read_to_string(sweep_dir.path().join("point_sweep.csv")).unwrap();
    let sweep_row: Vec<&str> = sweep_csv.lines().nth(1).unwrap().split(',').collect();

    let run_dir = tempfile::tempdir().unwrap();
    let output = nvpolar(&[
        "run",
        config.to_str().unwrap(),
        "--out",
        run_dir.path().to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    let series_csv = std::fs::read_to_string(run_dir.path().join("point_series.csv")).unwrap();
    let series_row: Vec<&str> = series_csv.lines().last().unwrap().split(',').collect();

    // Same engine, same formatting: the fraction cells must match verbatim.
    assert_eq!(series_row[0], "4");
    assert_eq!(&sweep_row[4..7], &series_row[1..4]);
}

#[test]
fn seq_config_runs_a_program_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("arm.seq");
    std::fs::write(
        &seq,
        "mw (0,+1) -> (-1,+1) 1.0pi\nrf (-1,+1) -> (-1,0) 1.0pi\nlaser 0.25us\n",
    )
    .unwrap();
    let config = dir.path().join("seq.toml");
    std::fs::write(
        &config,
        format!(
            "[protocol]\nkind = \"seq\"\nseq_path = {:?}\ncycles = 2\n\n[output]\nstem = \"seq\"\n",
            seq.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = tempfile::tempdir().unwrap();
    let output = nvpolar(&[
        "run",
        config.to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    let series = std::fs::read_to_string(out.path().join("seq_series.csv")).unwrap();
    assert_eq!(series.lines().count(), 4); // header + cycles 0..=2
    assert!(Path::new(&out.path().join("seq_manifest.json")).exists());
}
