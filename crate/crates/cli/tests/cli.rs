use std::path::Path;
use std::process::Command;

use purcell_cli::config::{ConfigError, ScenarioConfig};
use purcell_cli::report::compare_report;
use purcell_cli::run::run_scenario;
use purcell_cli::{sweep_to_dir, table, thread_count, THREADS_ENV};

const SMALL: &str = r#"{
  "name": "small",
  "model": { "delta": 1.0, "g": 0.1, "u": 0.01, "kappa_a": 0.0, "kappa_c": 0.01 },
  "sweep": { "variable": "nbar_c0", "grid": [0.0, 0.05, 0.1] },
  "truncation": { "cavity": 4, "qubit": 4, "convergence_check": false }
}"#;

fn with(base: &str, from: &str, to: &str) -> String {
    assert!(base.contains(from), "{from}");
    base.replace(from, to)
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_purcell-lab"))
}

#[test]
fn empty_grid_is_a_schema_error_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("empty.json");
    std::fs::write(&cfg_path, with(SMALL, "[0.0, 0.05, 0.1]", "[]")).unwrap();
    let out = dir.path().join("out");
    let st = bin().args(["sweep", "--config"]).arg(&cfg_path).arg("--out").arg(&out).status().unwrap();
    assert!(!st.success());
    assert!(!out.exists());
    assert!(matches!(ScenarioConfig::load(&cfg_path), Err(ConfigError::Invalid(_))));
}

#[test]
fn malformed_configs_are_rejected() {
    let bad = [
        with(SMALL, "[0.0, 0.05, 0.1]", "[0.0, 0.1, 0.05]"),
        with(SMALL, "[0.0, 0.05, 0.1]", "[0.0, 0.0]"),
        with(SMALL, "[0.0, 0.05, 0.1]", "[-0.1, 0.0]"),
        with(SMALL, "\"nbar_c0\"", "\"drive_photons\""),
        with(SMALL, "\"name\": \"small\"", "\"name\": \"a/b\""),
        with(SMALL, "\"kappa_c\": 0.01 }", "\"kappa_c\": 0.01, \"extra\": 1 }"),
        with(SMALL, "\"delta\": 1.0", "\"delta\": 0.0"),
        with(SMALL, "\"g\": 0.1", "\"g\": 0.6"),
        with(SMALL, "\"variable\": \"nbar_c0\"", "\"variable\": [\"nbar_c0\", \"drive_photons\"]"),
    ];
    for text in &bad {
        assert!(ScenarioConfig::from_json(text).is_err(), "{text}");
    }
    // a coherent drive on top of a thermal cavity is outside the model
    let thermal_drive = with(SMALL, "\"nbar_c0\"", "\"drive_photons\"")
        .replace("\"truncation\"", "\"drive\": { \"omega_d\": -0.1 }, \"truncation\"")
        .replace("\"kappa_c\": 0.01 }", "\"kappa_c\": 0.01, \"nbar_c0\": 0.1 }");
    assert!(ScenarioConfig::from_json(&thermal_drive).is_err());
}

#[test]
fn output_is_deterministic_and_ordered() {
    let cfg = ScenarioConfig::from_json(SMALL).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = sweep_to_dir(&cfg, a.path(), 3).unwrap();
    let rb = sweep_to_dir(&cfg, b.path(), 1).unwrap();
    let (ta, tb) = (std::fs::read(&ra.csv).unwrap(), std::fs::read(&rb.csv).unwrap());
    assert_eq!(ta, tb);
    let idx: Vec<usize> = ra.rows.iter().map(|r| r.index).collect();
    assert_eq!(idx, vec![0, 1, 2]);
    let text = String::from_utf8(ta).unwrap();
    assert!(text.starts_with("#schema="));
    assert!(!text.contains('\r'));
    assert!(ra.summary_path.exists());
}

#[test]
fn compare_reads_back_written_rows() {
    let cfg = ScenarioConfig::from_json(SMALL).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let res = sweep_to_dir(&cfg, dir.path(), 2).unwrap();
    let (var, rows) = table::read_rows(std::fs::File::open(&res.csv).unwrap()).unwrap();
    assert_eq!(var, "nbar_c0");
    let rep = compare_report(&var, &rows).unwrap();
    assert!(rep.first_slope.sign_agrees);
    assert!(compare_report(&var, &rows[..1]).is_err());

    let json = dir.path().join("report.json");
    let st = bin().args(["compare", "--rows"]).arg(&res.csv).arg("--out").arg(&json).status().unwrap();
    assert!(st.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert!(v["first_slope"]["ratio"].is_number());
}

#[test]
fn point_failures_become_error_rows() {
    // Δ = U puts the conversion term on resonance at every point
    let cfg = ScenarioConfig::from_json(&with(SMALL, "\"u\": 0.01", "\"u\": 1.0")).unwrap();
    let (rows, summary) = run_scenario(&cfg);
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.error.is_some()));
    assert!(!summary.ok());
}

#[test]
fn threads_env_overrides_jobs() {
    std::env::set_var(THREADS_ENV, "3");
    assert_eq!(thread_count(Some(7)), 3);
    std::env::set_var(THREADS_ENV, "junk");
    assert_eq!(thread_count(Some(7)), 7);
    std::env::remove_var(THREADS_ENV);
    assert_eq!(thread_count(None), 0);
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        ScenarioConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 5);
}

#[test]
fn drive_rate_direction_follows_detuning_sign() {
    for (delta, rising) in [(1.0, true), (-1.0, false)] {
        let text = format!(
            r#"{{
  "name": "drive",
  "model": {{ "delta": {delta}, "g": 0.1, "u": 0.1, "kappa_a": 0.0, "kappa_c": 0.01 }},
  "sweep": {{ "variable": "drive_photons", "grid": [0.0, 2.5, 5.0, 10.0] }},
  "drive": {{ "omega_d": -0.1 }},
  "truncation": {{ "cavity": 3, "qubit": 5, "convergence_check": false }}
}}"#
        );
        let (rows, summary) = run_scenario(&ScenarioConfig::from_json(&text).unwrap());
        assert!(summary.ok());
        let g: Vec<f64> = rows.iter().map(|r| r.gamma_diag.unwrap()).collect();
        assert!(g.windows(2).all(|w| (w[1] > w[0]) == rising), "Δ={delta}: {g:?}");
    }
}

#[test]
fn spectrum_and_validate_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("small.json");
    std::fs::write(&p, SMALL).unwrap();
    let out = bin().args(["spectrum", "--count", "4", "--config"]).arg(&p).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().next().unwrap().contains("(0,0,0)"));
    let out = bin().args(["validate", "--config"]).arg(&p).output().unwrap();
    assert!(out.status.success());
}

#[test]
fn published_schema_matches_the_parser() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let schema: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("schema/scenario.schema.json")).unwrap()).unwrap();
    // a config using every optional block round-trips through the parser,
    // and its serialized form uses exactly the keys the schema lists
    let full = r#"{
  "name": "full",
  "model": { "delta": 1.0, "g": 0.1, "u": 0.01, "kappa_a": 0.001, "kappa_c": 0.01, "nbar_a0": 0.0, "nbar_c0": 0.0 },
  "physical": { "delta_ghz": 1.0 },
  "sweep": { "variable": "nbar_c0", "grid": [0.0, 0.1] },
  "jc": false,
  "truncation": { "cavity": 4, "qubit": 4, "convergence_check": false },
  "toggles": { "include_crs": true, "include_nc": true, "include_cd": true, "include_drive": true },
  "protocol": { "method": "both", "horizon": 100.0, "window": 0.9, "perturbation": true },
  "output": { "dir": "out" }
}"#;
    let cfg = ScenarioConfig::from_json(full).unwrap();
    let back = serde_json::to_value(&cfg).unwrap();
    let props = &schema["properties"];
    for (key, val) in back.as_object().unwrap() {
        let sub = &props[key];
        assert!(!sub.is_null(), "schema lacks {key}");
        if let (Some(obj), Some(sp)) = (val.as_object(), sub["properties"].as_object()) {
            let mut a: Vec<&String> = obj.keys().collect();
            let mut b: Vec<&String> = sp.keys().collect();
            a.sort();
            b.sort();
            assert_eq!(a, b, "{key}");
        }
    }
    assert!(ScenarioConfig::from_json(&full.replace("\"include_drive\": true", "\"include_drive\": true, \"x\": 1")).is_err());
}
