//! End-to-end tests against the compiled binary: exit codes, artifact
//! layout, byte-identical reruns, and the SVG surface.

use std::fs;
use std::process::{Command, Output};

fn otaform(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_otaform"))
        .args(args)
        .output()
        .expect("binary spawns")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("process exited normally")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("stdout is UTF-8")
}

fn stderr(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).expect("stderr is UTF-8")
}

/// Value of `key = ...` inside `[section]` of a key-value report.
fn section_value(text: &str, section: &str, key: &str) -> String {
    let start = text.find(&format!("[{section}]")).expect("section present");
    for line in text[start..].lines().skip(1) {
        if line.starts_with('[') {
            break;
        }
        if let Some(v) = line.strip_prefix(&format!("{key} = ")) {
            return v.to_string();
        }
    }
    panic!("{key} not found in [{section}]")
}

const MINIMAL_CONFIG: &str = r#"
seed = 7

[agents]
n = 2
gain_a = 1.0
displacements = [[0.0, 0.0], [10.0, 0.0]]
initial_box_half_width = 15.0

[safety]
delta_s = 4.0
delta_c = 8.0

[channel]
fading_lower = 0.0
fading_upper = 1.0

[topology]
kind = "pool"
pool_size = 3
density = 0.5

[integrator]
update_interval = 0.1
integrator_step = 0.001
duration = 1.0
"#;

#[test]
fn preset_runs_exit_by_outcome() {
    let dir = tempfile::tempdir().unwrap();
    let hex = dir.path().join("hex");
    let out = otaform(&[
        "run",
        "--preset",
        "hexagon6",
        "--out",
        hex.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("outcome = formation-reached"));
    for artifact in ["trajectory.csv", "metrics.txt", "manifest.txt"] {
        assert!(hex.join(artifact).exists(), "{artifact} missing");
    }
    assert!(
        !hex.join("plot.svg").exists(),
        "plot.svg written without --plot"
    );
    let metrics = fs::read_to_string(hex.join("metrics.txt")).unwrap();
    assert_eq!(metrics, stdout(&out));

    let out = otaform(&["run", "--preset", "square4-symmetric"]);
    assert_eq!(code(&out), 3);
    assert!(stdout(&out).contains("outcome = local-minimum"));

    let out = otaform(&["run", "--preset", "square4-random"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("outcome = formation-reached"));
}

#[test]
fn reruns_reproduce_artifacts_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = otaform(&[
            "run",
            "--preset",
            "hexagon6",
            "--out",
            d.to_str().unwrap(),
            "--plot",
        ]);
        assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    }
    for f in ["trajectory.csv", "metrics.txt", "manifest.txt", "plot.svg"] {
        let left = fs::read(a.join(f)).unwrap();
        let right = fs::read(b.join(f)).unwrap();
        assert_eq!(left, right, "{f} differs between identical runs");
    }

    // A different seed must change both the data and the manifest digest.
    let c = dir.path().join("c");
    let out = otaform(&[
        "run",
        "--preset",
        "hexagon6",
        "--seed",
        "8",
        "--out",
        c.to_str().unwrap(),
    ]);
    assert!(matches!(code(&out), 0 | 3), "stderr: {}", stderr(&out));
    assert_ne!(
        fs::read(a.join("trajectory.csv")).unwrap(),
        fs::read(c.join("trajectory.csv")).unwrap()
    );
    assert_ne!(
        fs::read(a.join("manifest.txt")).unwrap(),
        fs::read(c.join("manifest.txt")).unwrap()
    );
}

#[test]
fn run_plot_draws_every_agent_marker() {
    let dir = tempfile::tempdir().unwrap();
    let hex = dir.path().join("hex");
    let out = otaform(&[
        "run",
        "--preset",
        "hexagon6",
        "--out",
        hex.to_str().unwrap(),
        "--plot",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let svg = fs::read_to_string(hex.join("plot.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 6);
    assert_eq!(svg.matches("<circle").count(), 6);
    assert_eq!(svg.matches(r#"class="final""#).count(), 6);
    assert_eq!(svg.matches(r#"class="target""#).count(), 6);
    let manifest = fs::read_to_string(hex.join("manifest.txt")).unwrap();
    assert!(manifest.contains("artifact = plot.svg"));
    assert!(manifest.contains("config_sha256 = "));
}

#[test]
fn plot_subcommand_renders_csv_with_and_without_danger() {
    let dir = tempfile::tempdir().unwrap();
    let sq = dir.path().join("sq");
    let out = otaform(&[
        "run",
        "--preset",
        "square4-symmetric",
        "--out",
        sq.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3, "stderr: {}", stderr(&out));
    let csv = sq.join("trajectory.csv");

    let marked = dir.path().join("marked.svg");
    let out = otaform(&[
        "plot",
        "--trajectory",
        csv.to_str().unwrap(),
        "--out",
        marked.to_str().unwrap(),
        "--preset",
        "square4-symmetric",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let svg = fs::read_to_string(&marked).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 4);
    assert_eq!(svg.matches(r#"class="target""#).count(), 4);
    // The jammed square spends most of the run inside the caution radius.
    assert!(svg.matches(r#"class="danger""#).count() > 0);

    let plain = dir.path().join("plain.svg");
    let out = otaform(&[
        "plot",
        "--trajectory",
        csv.to_str().unwrap(),
        "--out",
        plain.to_str().unwrap(),
        "--no-danger-marks",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let svg = fs::read_to_string(&plain).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 4);
    assert_eq!(svg.matches(r#"class="danger""#).count(), 0);
    assert_eq!(svg.matches(r#"class="target""#).count(), 0);
}

#[test]
fn plot_rejects_damaged_trajectories_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("out.svg");

    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let out = otaform(&[
        "plot",
        "--trajectory",
        empty.to_str().unwrap(),
        "--out",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("empty"));
    assert!(!svg.exists(), "no SVG may be written for a rejected input");

    let header_only = dir.path().join("header.csv");
    fs::write(
        &header_only,
        "time_s,agent_id,px,py,theta_x,theta_y,in_danger\n",
    )
    .unwrap();
    let out = otaform(&[
        "plot",
        "--trajectory",
        header_only.to_str().unwrap(),
        "--out",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("no data rows"));
    assert!(!svg.exists());

    let ragged = dir.path().join("ragged.csv");
    fs::write(
        &ragged,
        "time_s,agent_id,px,py,theta_x,theta_y,in_danger\n0,0,0,0,0,0,0\n0,1,0,0,0,0,0\n1,0,0,0,0,0,0\n",
    )
    .unwrap();
    let out = otaform(&[
        "plot",
        "--trajectory",
        ragged.to_str().unwrap(),
        "--out",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    assert!(!svg.exists());

    let missing = dir.path().join("nope.csv");
    let out = otaform(&[
        "plot",
        "--trajectory",
        missing.to_str().unwrap(),
        "--out",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 4);
}

#[test]
fn validate_checks_sources_and_overrides() {
    let out = otaform(&["validate", "--preset", "hexagon6"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("config ok: 6 agents"));

    let out = otaform(&[
        "validate",
        "--preset",
        "hexagon6",
        "--set",
        "integrator.duration=5.0",
    ]);
    assert_eq!(code(&out), 0);

    let out = otaform(&["validate", "--preset", "nonagon9"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("hexagon6"));

    let out = otaform(&["validate"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("--config"));

    let out = otaform(&["validate", "--config", "/nonexistent/x.toml"]);
    assert_eq!(code(&out), 4);

    let out = otaform(&[
        "validate",
        "--config",
        "/nonexistent/x.toml",
        "--preset",
        "hexagon6",
    ]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("not both"));
}

#[test]
fn override_errors_match_file_errors() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.toml");
    fs::write(&good, MINIMAL_CONFIG).unwrap();
    let out = otaform(&["validate", "--config", good.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    let bad = dir.path().join("bad.toml");
    fs::write(
        &bad,
        MINIMAL_CONFIG.replace("gain_a = 1.0", "gain_a = -1.0"),
    )
    .unwrap();
    let from_file = otaform(&["validate", "--config", bad.to_str().unwrap()]);
    assert_eq!(code(&from_file), 1);

    let from_set = otaform(&[
        "validate",
        "--config",
        good.to_str().unwrap(),
        "--set",
        "agents.gain_a=-1.0",
    ]);
    assert_eq!(code(&from_set), 1);
    assert_eq!(stderr(&from_file), stderr(&from_set));
    assert!(stderr(&from_set).contains("agents.gain_a"));

    let typo_file = dir.path().join("typo.toml");
    fs::write(
        &typo_file,
        MINIMAL_CONFIG.replace("gain_a = 1.0", "gain_a = 1.0\ntypo = 1"),
    )
    .unwrap();
    let from_file = otaform(&["validate", "--config", typo_file.to_str().unwrap()]);
    assert_eq!(code(&from_file), 1);
    let from_set = otaform(&[
        "validate",
        "--config",
        good.to_str().unwrap(),
        "--set",
        "agents.typo=1",
    ]);
    assert_eq!(code(&from_set), 1);
    assert_eq!(stderr(&from_file), stderr(&from_set));
}

#[test]
fn compare_reports_costs_for_all_protocols() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("cmp");
    let out = otaform(&[
        "compare",
        "--preset",
        "hexagon6",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(
        text,
        fs::read_to_string(out_dir.join("compare.txt")).unwrap()
    );
    assert!(text.contains("note = "));

    // All three sections agree with the published cost shapes: three slots
    // per step over the air, 2nk for orthogonal frames, and serial unicast
    // for node-to-node.
    let ota_step: usize = section_value(&text, "over_the_air", "agreement_step")
        .parse()
        .unwrap();
    let ota_slots: usize = section_value(&text, "over_the_air", "slots")
        .parse()
        .unwrap();
    assert_eq!(ota_slots, 3 * ota_step);

    let base_step: usize = section_value(&text, "node_to_node", "agreement_step")
        .parse()
        .unwrap();
    let orth_slots: usize = section_value(&text, "orthogonal_broadcast", "slots")
        .parse()
        .unwrap();
    assert_eq!(orth_slots, 2 * 6 * base_step);

    let n2n_slots: usize = section_value(&text, "node_to_node", "slots")
        .parse()
        .unwrap();
    let n2n_messages: usize = section_value(&text, "node_to_node", "individual_messages")
        .parse()
        .unwrap();
    assert_eq!(n2n_slots, n2n_messages);

    let out = otaform(&["compare", "--preset", "hexagon6", "--threshold", "0"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn batch_sweeps_consecutive_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("batch");
    let out = otaform(&[
        "batch",
        "--preset",
        "square4-random",
        "--runs",
        "3",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    // square4-random starts at seed 1.
    for seed in 1..=3 {
        assert!(
            text.contains(&format!("seed={seed} outcome=")),
            "missing seed {seed}:\n{text}"
        );
    }
    assert!(text.contains("summary runs=3"));
    assert_eq!(text, fs::read_to_string(out_dir.join("batch.txt")).unwrap());
}

#[test]
fn cli_surface_behaves() {
    let out = otaform(&["--help"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("run"));

    // --plot depends on --out.
    let out = otaform(&["run", "--preset", "hexagon6", "--plot"]);
    assert_eq!(code(&out), 1);

    let out = otaform(&["frobnicate"]);
    assert_eq!(code(&out), 1);
}
