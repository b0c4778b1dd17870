//! End-to-end checks of the compiled binary, driven the way a shell script
//! would use it: exit codes, stdout/stderr routing, config validation, and
//! rerun determinism.

use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nanofiber"))
        .args(args)
        .output()
        .expect("the binary launches")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("exited normally")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

/// A small continuous-wave scene, cheap enough to simulate in every test
/// that needs a real stream on disk.
const SCENE: &str = "\
[scene]
excitation = cw
power = 100 uW
duration = 50 ms
seed = 7
";

#[test]
fn help_exits_zero_for_every_subcommand() {
    let top = run(&["--help"]);
    assert_eq!(code(&top), 0, "{}", stderr(&top));
    assert!(stdout(&top).contains("Usage"), "{}", stdout(&top));

    for name in [
        "modes",
        "coupling-sweep",
        "taper",
        "simulate",
        "correlate",
        "fit-lifetime",
        "fit-saturation",
        "fit-cosine",
        "fit-g2",
        "budget",
    ] {
        let output = run(&[name, "--help"]);
        assert_eq!(code(&output), 0, "{name} --help failed: {}", stderr(&output));
        assert!(!stdout(&output).is_empty(), "{name} --help printed nothing");
    }
}

#[test]
fn usage_mistakes_exit_one() {
    // No subcommand, an unknown subcommand, and a missing required value
    // are all caller errors, not domain failures.
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);

    let missing = run(&["modes", "--wavelength", "637nm"]);
    assert_eq!(code(&missing), 1, "{}", stderr(&missing));
    assert!(stderr(&missing).contains("diameter"), "{}", stderr(&missing));
}

#[test]
fn budget_prints_the_worked_example() {
    let args = ["budget", "--beta-side", "0.15", "--fiber-T", "0.10", "--confocal", "0.005"];
    let table = run(&args);
    assert_eq!(code(&table), 0, "{}", stderr(&table));
    let text = stdout(&table);
    assert!(text.contains("1.5%"), "{text}");
    assert!(text.contains("3.0%"), "{text}");
    assert!(text.contains(": 3.0"), "{text}");

    let mut with_json = args.to_vec();
    with_json.push("--json");
    let json = run(&with_json);
    assert_eq!(code(&json), 0, "{}", stderr(&json));
    let record: serde_json::Value =
        serde_json::from_str(&stdout(&json)).expect("budget --json emits JSON");
    assert!((record["end_to_end_two_side"].as_f64().unwrap() - 0.030).abs() < 1e-12);
    assert!((record["fiber_to_confocal_ratio"].as_f64().unwrap() - 3.0).abs() < 1e-12);
}

#[test]
fn modes_lists_the_fundamental_mode() {
    let output = run(&["modes", "--diameter", "450nm", "--wavelength", "637nm"]);
    assert_eq!(code(&output), 0, "{}", stderr(&output));
    let table = stdout(&output);
    assert!(table.starts_with("label,n_eff,beta_rad_per_m,u,w"), "{table}");
    assert!(table.contains("HE11"), "{table}");
    // The data went to stdout, so the human summary lands on stderr.
    assert!(stderr(&output).contains("second-mode cutoff"), "{}", stderr(&output));
}

#[test]
fn coupling_sweep_emits_one_row_per_diameter() {
    let output = run(&[
        "coupling-sweep",
        "--d-min",
        "300nm",
        "--d-max",
        "500nm",
        "--step",
        "100nm",
        "--spectrum",
        "line",
        "--wavelength",
        "637nm",
    ]);
    assert_eq!(code(&output), 0, "{}", stderr(&output));
    let table = stdout(&output);
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("d_m,eta_total,eta_per_side,fundamental_fraction"));
    assert_eq!(lines.count(), 3, "{table}");
    assert!(stderr(&output).contains("best diameter"), "{}", stderr(&output));
}

#[test]
fn simulate_reruns_are_byte_identical_and_the_seed_matters() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("scene.cfg");
    std::fs::write(&config, SCENE).unwrap();
    let first = dir.path().join("first.ttag");
    let second = dir.path().join("second.ttag");
    let reseeded = dir.path().join("reseeded.ttag");

    for (out, seed) in [(&first, None), (&second, None), (&reseeded, Some("8"))] {
        let mut args = vec![
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ];
        if let Some(seed) = seed {
            args.extend(["--seed", seed]);
        }
        let output = run(&args);
        assert_eq!(code(&output), 0, "{}", stderr(&output));
        assert!(stdout(&output).contains("records"), "{}", stdout(&output));
    }

    let first_bytes = std::fs::read(&first).unwrap();
    assert!(!first_bytes.is_empty());
    assert_eq!(first_bytes, std::fs::read(&second).unwrap(), "same seed, different bytes");
    assert_ne!(first_bytes, std::fs::read(&reseeded).unwrap(), "new seed, same bytes");
}

#[test]
fn correlate_pairs_detectors_and_refuses_empty_channels() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("scene.cfg");
    std::fs::write(&config, SCENE).unwrap();
    let stream = dir.path().join("scene.ttag");
    let simulated = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        stream.to_str().unwrap(),
    ]);
    assert_eq!(code(&simulated), 0, "{}", stderr(&simulated));

    let good = run(&[
        "correlate",
        "--input",
        stream.to_str().unwrap(),
        "--bin",
        "2ns",
        "--window",
        "100ns",
    ]);
    assert_eq!(code(&good), 0, "{}", stderr(&good));
    assert!(stdout(&good).starts_with("tau_s,g2,sigma"), "{}", stdout(&good));
    assert!(stderr(&good).contains("raw g2"), "{}", stderr(&good));

    // A continuous-wave stream has no sync records, so channel 0 is empty
    // and correlating against it is a domain failure, not a usage error.
    let empty = run(&[
        "correlate",
        "--input",
        stream.to_str().unwrap(),
        "--channel-a",
        "0",
        "--bin",
        "2ns",
        "--window",
        "100ns",
    ]);
    assert_eq!(code(&empty), 2, "{}", stderr(&empty));
    assert!(stderr(&empty).contains("channel 0"), "{}", stderr(&empty));
}

#[test]
fn config_mistakes_fail_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never.ttag");

    let bad_key = dir.path().join("bad_key.cfg");
    std::fs::write(&bad_key, "[scene]\npowr = 1 uW\n").unwrap();
    let output = run(&[
        "simulate",
        "--config",
        bad_key.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 1, "{}", stderr(&output));
    let text = stderr(&output);
    assert!(text.contains("powr") && text.contains("line 2"), "{text}");

    let bad_unit = dir.path().join("bad_unit.cfg");
    std::fs::write(&bad_unit, "[scene]\nduration = 5 nm\n").unwrap();
    let output = run(&[
        "simulate",
        "--config",
        bad_unit.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 1, "{}", stderr(&output));
    assert!(stderr(&output).contains("duration"), "{}", stderr(&output));

    assert!(!out.exists(), "a bad config still produced output");
}

#[test]
fn fit_cosine_recovers_a_clean_modulation() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("polarization.csv");
    let mut table = String::from("angle_rad,rate_per_s\n");
    for i in 0..36 {
        let theta = i as f64 * std::f64::consts::PI / 36.0;
        let rate = 3000.0 + 1000.0 * (2.0 * (theta - 0.4)).cos();
        table.push_str(&format!("{theta},{rate}\n"));
    }
    std::fs::write(&csv, table).unwrap();

    let output = run(&["fit-cosine", "--input", csv.to_str().unwrap()]);
    assert_eq!(code(&output), 0, "{}", stderr(&output));
    let record: serde_json::Value =
        serde_json::from_str(&stdout(&output)).expect("fit record is JSON");
    assert!((record["mean"].as_f64().unwrap() - 3000.0).abs() < 1.0, "{record}");
    assert!((record["suppression"].as_f64().unwrap() - 2.0).abs() < 0.01, "{record}");
    assert!(stderr(&output).contains("suppression factor"), "{}", stderr(&output));
}

#[test]
fn taper_gates_recipes_on_the_adiabaticity_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let profile = dir.path().join("profile.csv");

    // A gentle pull that lands on a 225 nm waist radius.
    let elongation = 2.0 * 5e-3 * (1.0e-6_f64 / 225e-9).ln();
    let elongation = format!("{elongation}m");
    let pull = run(&[
        "taper",
        "--shape",
        "pull",
        "--initial-radius",
        "1um",
        "--hot-zone",
        "5mm",
        "--elongation",
        &elongation,
        "--wavelength",
        "637nm",
        "--out",
        profile.to_str().unwrap(),
    ]);
    assert_eq!(code(&pull), 0, "{}", stderr(&pull));
    let text = stdout(&pull);
    assert!(text.contains("waist 450.0 nm"), "{text}");
    assert!(text.contains("passes"), "{text}");
    assert!(std::fs::read_to_string(&profile).unwrap().starts_with("z_m,r_m,rho"));

    // A 5 degree cone is far too steep; the CSV is still written so the
    // failure can be inspected, but the exit code gates the recipe.
    let cone = run(&[
        "taper",
        "--shape",
        "cone",
        "--cone-start",
        "500nm",
        "--cone-end",
        "225nm",
        "--cone-angle-deg",
        "5",
        "--wavelength",
        "637nm",
        "--out",
        dir.path().join("cone.csv").to_str().unwrap(),
    ]);
    assert_eq!(code(&cone), 2, "{}", stderr(&cone));
    assert!(stderr(&cone).contains("not adiabatic"), "{}", stderr(&cone));
}
