use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const CONFIG: &str = r#"{
  "cross_section": {"kind": "rectangle", "params": {"a": 1, "b": 1}, "h": 0.125},
  "profile": {"fprime": "1 - 0.8*exp(-x^2)", "gprime": "0", "beta1": 1, "beta2": 0},
  "tube": {"L_list": [6, 8, 10]}
}"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    let cfg = dir.join("config.json");
    if !cfg.exists() {
        fs::write(&cfg, CONFIG).unwrap();
    }
    let out_dir = dir.join("out");
    let out_set = format!("output.directory={}", serde_json::to_string(out_dir.to_str().unwrap()).unwrap());
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_wgspec"));
    cmd.args(args).arg("--config").arg(&cfg).arg("--set").arg(out_set);
    cmd.output().unwrap()
}

fn json(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn section_matches_separable_rectangle() {
    let dir = tempfile::tempdir().unwrap();
    let r = json(&run(dir.path(), &["section", "--set", "profile.beta1=0"]));
    // Untwisted unit square: E₁ = 2π², discretization error O(h²) from above.
    let e1 = r["result"]["ground"]["e1"].as_f64().unwrap();
    let exact = 2.0 * std::f64::consts::PI.powi(2);
    assert!(e1 > exact && (e1 - exact) / exact < 0.05, "{e1}");
    assert_eq!(r["result"]["mesh"]["interior_dofs"], 49);
    let csv = fs::read_to_string(dir.path().join("out/section.csv")).unwrap();
    assert!(csv.starts_with("beta1,beta2,E1,E2,A,B,C,A_tilde\r\n"));
}

#[test]
fn report_embeds_config_and_profile_hash() {
    let dir = tempfile::tempdir().unwrap();
    let r = json(&run(dir.path(), &["section"]));
    assert_eq!(r["command"], "section");
    assert_eq!(r["config"]["profile"]["tail_X"], 10.0);
    assert_eq!(r["config"]["cross_section"]["params"]["a"], 1.0);
    let hash = r["profile_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    // Equivalent spellings of the same profile hash identically.
    let s = json(&run(dir.path(), &["section", "--set", "profile.fprime=\"1-0.8*exp(-(x^2))\""]));
    assert_eq!(s["profile_hash"], r["profile_hash"]);
    let t = json(&run(dir.path(), &["section", "--set", "profile.fprime=\"1-0.7*exp(-x^2)\""]));
    assert_ne!(t["profile_hash"], r["profile_hash"]);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["bands"][..], &["tube"], &["certify", "thm12"], &["thin-sweep"]] {
        let a = run(dir.path(), args);
        let csv_name = format!("out/{}.csv", args.join("-"));
        let csv_a = fs::read(dir.path().join(&csv_name)).ok();
        let b = run(dir.path(), args);
        let csv_b = fs::read(dir.path().join(&csv_name)).ok();
        assert!(a.status.success(), "{args:?}: {}", stderr(&a));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        assert_eq!(csv_a, csv_b, "{args:?}");
    }
}

#[test]
fn bands_are_symmetric_and_bounded_below_by_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let r = json(&run(dir.path(), &["bands", "--set", "bands.p_grid=[-2,-1,0,1,2]"]));
    let t = &r["result"];
    assert!(t["symmetry_defect"].as_f64().unwrap() < 1e-8);
    assert!(t["lower_bound_margin"].as_f64().unwrap() > -1e-8);
    assert_eq!(t["rows"].as_array().unwrap().len(), 5);
    let csv = fs::read_to_string(dir.path().join("out/bands.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn ode_certificate_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let r = json(&run(dir.path(), &["certify", "ode", "--set", "certify.a_tilde=4.934802200544679"]));
    assert_eq!(r["result"]["verdict"], "certified");
    assert_eq!(r["result"]["details"]["classification"], "negative");
}

#[test]
fn tube_finds_candidates_below_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let r = json(&run(dir.path(), &["tube"]));
    let rep = &r["result"]["report"];
    assert!(rep["n_candidates"].as_u64().unwrap() >= 1);
    assert_eq!(rep["monotone"], true);
    let thr = rep["threshold"].as_f64().unwrap();
    assert!(rep["candidates"][0]["value"].as_f64().unwrap() < thr);
}

#[test]
fn unknown_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["section", "--set", "profile.colour=1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour"));
    fs::write(dir.path().join("config.json"), r#"{"epsilon": 1, "mystery": true}"#).unwrap();
    let o = run(dir.path(), &["section"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_expression_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["potential", "--set", "profile.fprime=\"1 - exp(\""]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn tail_failure_exits_3_and_names_slope() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in [&["potential"][..], &["bound1d"], &["tube"], &["certify", "thm12"], &["thin-sweep"]] {
        let mut args = cmd.to_vec();
        args.extend(["--set", "profile.fprime=\"2 - exp(-x^2)\""]);
        let o = run(dir.path(), &args);
        assert_eq!(o.status.code(), Some(3), "{cmd:?}");
        assert!(stderr(&o).contains("tail limit check failed for fprime"), "{}", stderr(&o));
    }
    let o = run(dir.path(), &["potential", "--set", "profile.gprime=\"1/(1+x^2)\""]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("tail limit check failed for gprime"));
}

#[test]
fn unbalanced_profile_fails_perturbed_gate() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["certify", "thm13"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("balance check failed"));
}

#[test]
fn solver_failure_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["tube", "--set", "solver.shift_policy=\"block\"", "--set", "solver.max_iter=2"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("did not converge"));
}
