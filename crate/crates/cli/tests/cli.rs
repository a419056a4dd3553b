use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sbs_tfa_cli::{compare, ScenarioConfig};

const SMALL_TD: &str = r#"
name = "small_td"
seed = 7
sample_rate_hz = 5e9
reference_freq_hz = 0.15e9

[signal]
kind = "lfm"
f_start_hz = 0.3e9
f_end_hz = 0.8e9
period_s = 0.5e-6

[link_config]
noise_rms = 1e-4

[sfcw_plan]
f_step1_hz = 100e6
delta_step_hz = 25e6
step_period_s = 0.5e-6
n_steps = 35

[[assertions]]
kind = "ridge_truth"
tolerance_hz = 25e6
min_coverage = 0.9
present_only = true
"#;

const SMALL_PAR: &str = r#"
name = "small_par"
sample_rate_hz = 5e9
n_periods = 2
link = "parallel"

[signal]
kind = "lfm"
f_start_hz = 0.3e9
f_end_hz = 0.8e9
period_s = 0.5e-6

[branch_plan]
f_base_hz = 0.25e9
delta_f_hz = 50e6
n_branches = 12
direction = "up"
"#;

fn td(extra: &str) -> String {
    SMALL_TD.replacen("reference_freq_hz", &format!("{extra}\nlink = \"time_division\"\nreference_freq_hz"), 1)
}

fn sbs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sbs-tfa")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn simulate(config: &str, out: &Path, seed: Option<&str>) -> Output {
    let mut args = vec!["simulate", "--config", config, "--out", out.to_str().unwrap()];
    if let Some(s) = seed {
        args.extend(["--seed", s]);
    }
    sbs(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_writes_the_default_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", &td(""));
    let out = dir.path().join("out");
    let o = simulate(&cfg, &out, None);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["spectrogram.csv", "heatmap.png", "metadata.json", "ridge.csv"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let png = fs::read(out.join("heatmap.png")).unwrap();
    assert_eq!(&png[1..4], b"PNG");
    let csv = fs::read_to_string(out.join("spectrogram.csv")).unwrap();
    assert!(csv.lines().count() > 30);
}

#[test]
fn same_seed_gives_byte_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", &td(""));
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    assert!(simulate(&cfg, &a, None).status.success());
    assert!(simulate(&cfg, &b, None).status.success());
    assert!(simulate(&cfg, &c, Some("8")).status.success());
    for f in ["spectrogram.csv", "metadata.json", "ridge.csv", "heatmap.png"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_ne!(fs::read(a.join("spectrogram.csv")).unwrap(), fs::read(c.join("spectrogram.csv")).unwrap());
}

#[test]
fn metadata_records_resolved_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", &td(""));
    let out = dir.path().join("out");
    assert!(simulate(&cfg, &out, Some("11")).status.success());
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 11);
    let lc = &m["link_config"];
    for key in ["f_sbs_hz", "f_pump_offset_hz", "gain_fwhm_hz", "peak_gain_db", "modulation_index"] {
        assert!(lc[key].is_number(), "{key}");
    }
    assert_eq!(lc["detector_lpf_hz"], 4.0 * 20e6);
    assert!(lc["output_rate_hz"].is_number());
    assert!(lc["optical_oversampling"].is_number());
    assert_eq!(lc["gain_phase"], "zero_phase");
    let td = &m["time_division"];
    assert_eq!(td["plan"]["period_multiple_m"], 1);
    let measured = td["measured_frequencies_hz"].as_array().unwrap();
    assert_eq!(measured.len(), 35);
    let c = lc["f_pump_offset_hz"].as_f64().unwrap() - lc["f_sbs_hz"].as_f64().unwrap();
    for (n, f) in measured.iter().enumerate() {
        let want = 100e6 + 25e6 * n as f64 + c;
        assert!((f.as_f64().unwrap() - want).abs() < 1e-3, "step {n}");
    }
    assert!(m["pulse_fwhm_s"].as_f64().unwrap() > 0.0);
    assert!(td["min_height_ratio"].is_number());
    assert!(m["ridge_floor"].is_number());
}

#[test]
fn period_mismatch_exits_with_plan_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = td("").replace("step_period_s = 0.5e-6", "step_period_s = 1.4285e-6");
    let cfg = write(dir.path(), "s.toml", &text);
    let o = simulate(&cfg, &dir.path().join("out"), None);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("error[PeriodMismatch]"), "{}", stderr(&o));
}

#[test]
fn malformed_configs_exit_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("unknown key", td("bogus = 1")),
        ("plan for the other link", td("").replace("link = \"time_division\"", "link = \"parallel\"")),
        ("two plans", td("") + "\n[branch_plan]\nf_base_hz = 1e8\ndelta_f_hz = 25e6\nn_branches = 4\ndirection = \"down\"\n"),
        ("empty output path", td("") + "\n[outputs]\nmetadata = \"\"\n"),
        ("oracle output without oracle", td("") + "\n[outputs]\noracle_csv = \"stft.csv\"\n"),
    ];
    for (what, text) in cases {
        let cfg = write(dir.path(), "s.toml", &text);
        let o = simulate(&cfg, &dir.path().join("out"), None);
        assert_eq!(o.status.code(), Some(2), "{what}: {}", stderr(&o));
        assert!(stderr(&o).starts_with("error[ConfigInvalid]"), "{what}: {}", stderr(&o));
    }
    let o = simulate(dir.path().join("missing.toml").to_str().unwrap(), &dir.path().join("out"), None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn nyquist_violation_exits_with_plan_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", &td("").replace("sample_rate_hz = 5e9", "sample_rate_hz = 1e9"));
    let o = simulate(&cfg, &dir.path().join("out"), None);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("error[NyquistViolation]"), "{}", stderr(&o));
}

#[test]
fn failed_assertion_exits_4_and_still_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let text = td("") + "\n[[assertions]]\nkind = \"pulse_fwhm\"\nmax_s = 1e-12\n";
    let cfg = write(dir.path(), "s.toml", &text);
    let out = dir.path().join("out");
    let o = simulate(&cfg, &out, None);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("error[AssertionFailed]"));
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("metadata.json")).unwrap()).unwrap();
    let outcomes = m["assertions"].as_array().unwrap();
    assert_eq!(outcomes.len(), 2);
    assert_eq!(outcomes[0]["passed"], true);
    assert_eq!(outcomes[1]["passed"], false);
}

#[test]
fn parallel_scenario_runs() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL_PAR.to_string() + "\n[[assertions]]\nkind = \"ridge_truth\"\ntolerance_hz = 50e6\nmin_coverage = 0.8\npresent_only = true\n";
    let cfg = write(dir.path(), "p.toml", &text);
    let out = dir.path().join("out");
    let o = simulate(&cfg, &out, None);
    assert!(o.status.success(), "{}", stderr(&o));
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(m["parallel"]["branch_frequencies_hz"].as_array().unwrap().len(), 12);
    assert_eq!(m["rows_hz"].as_array().unwrap().len(), 12);
}

#[test]
fn oracle_verb_writes_stft_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", &td(""));
    let out = dir.path().join("out");
    let o = sbs(&["oracle", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("stft.csv").is_file() && out.join("stft.png").is_file() && out.join("stft_ridge.csv").is_file());
    assert!(!out.join("spectrogram.csv").exists());
}

#[test]
fn compare_of_a_file_with_itself_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", &td(""));
    let out = dir.path().join("out");
    assert!(simulate(&cfg, &out, None).status.success());
    let csv = out.join("spectrogram.csv");
    let c = compare(&csv, &csv, 0.02).unwrap();
    assert_eq!(c.ridge.median_abs_err_hz, 0.0);
    assert_eq!(c.ridge.coverage_fraction, 1.0);
    assert_eq!(c.linf, Some(0.0));

    let o = sbs(&["compare", csv.to_str().unwrap(), csv.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let printed: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(printed["ridge"]["median_abs_err_hz"], 0.0);
    assert_eq!(fs::read(out.join("compare.json")).unwrap(), o.stdout);
}

#[test]
fn suite_reports_in_name_order_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfgs = dir.path().join("cfgs");
    fs::create_dir(&cfgs).unwrap();
    // file order differs from name order
    write(&cfgs, "1.toml", &td("").replace("small_td", "zeta"));
    write(&cfgs, "2.toml", &SMALL_PAR.replace("small_par", "alpha"));
    write(&cfgs, "3.toml", &td("").replace("small_td", "mid").replace("step_period_s = 0.5e-6", "step_period_s = 0.7e-6"));
    fs::write(cfgs.join("notes.txt"), "ignored").unwrap();

    let run = |out: &Path| sbs(&["suite", "--config", cfgs.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "5"]);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let oa = run(&a);
    assert_eq!(oa.status.code(), Some(3), "{}", String::from_utf8_lossy(&oa.stdout));
    assert!(run(&b).status.code() == Some(3));
    let ra = fs::read(a.join("report.json")).unwrap();
    assert_eq!(ra, fs::read(b.join("report.json")).unwrap());

    let report: serde_json::Value = serde_json::from_slice(&ra).unwrap();
    let names: Vec<&str> = report["scenarios"].as_array().unwrap().iter().map(|s| s["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["alpha", "mid", "zeta"]);
    let status: Vec<&str> = report["scenarios"].as_array().unwrap().iter().map(|s| s["status"].as_str().unwrap()).collect();
    assert_eq!(status, ["pass", "error", "pass"]);
    assert_eq!(report["scenarios"][1]["category"], "PeriodMismatch");
    assert_eq!(report["n_passed"], 2);
    assert!(report["scenarios"][2]["metrics"]["truth_coverage_one_bin"].is_number());
    assert!(a.join("zeta/spectrogram.csv").is_file() && a.join("alpha/metadata.json").is_file());
}

#[test]
fn suite_rejects_empty_directory() {
    let dir = tempfile::tempdir().unwrap();
    let o = sbs(&["suite", "--config", dir.path().to_str().unwrap(), "--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[ConfigInvalid]"));
}

#[test]
fn suite_rejects_duplicate_names() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.toml", &td(""));
    write(dir.path(), "b.toml", &td(""));
    let o = sbs(&["suite", "--config", dir.path().to_str().unwrap(), "--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn bundled_examples_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples");
    let files = sbs_tfa_cli::suite::scenario_files(&dir).unwrap();
    assert!(files.len() >= 20);
    for f in files {
        ScenarioConfig::load(&f).unwrap_or_else(|e| panic!("{}: {e}", f.display()));
    }
}
