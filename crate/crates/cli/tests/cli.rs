use std::fs;
use std::path::Path;

use assert_cmd::Command;
use serde_json::Value;
use steerlab::filtering::averaged_output;
use steerlab::lhs::lhs_robustness_with;
use steerlab::metrics::{assemblage_fidelity, singlet_fraction};
use steerlab::{alpha_assemblage, singlet_assemblage, Assemblage, Flavor};
use tempfile::TempDir;

fn steerlab() -> Command {
    let mut cmd = Command::cargo_bin("steerlab").unwrap();
    cmd.env_remove("STEERLAB_SEED");
    cmd
}

fn run_json(args: &[&str]) -> Value {
    let out = steerlab().args(args).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

fn load(p: &str) -> Assemblage {
    Assemblage::from_json(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn make_singlet_round_trips() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "s.json");
    steerlab().args(["make", "singlet", "--out", &out]).assert().success();
    assert_eq!(load(&out), singlet_assemblage());
}

#[test]
fn make_alpha_writes_component_trace() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "a.json");
    steerlab().args(["make", "alpha", "--alpha2", "0.8", "--out", &out]).assert().success();
    let asm = load(&out);
    assert!((asm.component(0, 0).trace() - 0.8).abs() < 1e-15);
    assert_eq!(asm, alpha_assemblage(0.8).unwrap());
}

#[test]
fn make_alpha_outside_domain_exits_2() {
    let out = steerlab().args(["make", "alpha", "--alpha2", "0.4"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let diag: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(diag["error"], "domain");
}

#[test]
fn make_from_state_matches_library() {
    let dir = TempDir::new().unwrap();
    let state = path(&dir, "rho.json");
    // (|00⟩ + |11⟩)/√2
    let mut rows = vec![vec![[0.0, 0.0]; 4]; 4];
    for (i, j) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
        rows[i][j] = [0.5, 0.0];
    }
    fs::write(&state, serde_json::to_string(&serde_json::json!({ "state": rows })).unwrap()).unwrap();
    let out = path(&dir, "s.json");
    steerlab().args(["make", "from-state", "--state", &state, "--out", &out]).assert().success();
    assert!(load(&out).max_abs_diff(&singlet_assemblage()) < 1e-15);
}

#[test]
fn validate_rejects_signalling_file() {
    let dir = TempDir::new().unwrap();
    let good = alpha_assemblage(0.8).unwrap();
    let mut comps = good.components().to_vec();
    comps[2] = comps[2].scale(1.5);
    let bad = Assemblage::new(2, 2, 2, comps).unwrap();
    let p = path(&dir, "bad.json");
    fs::write(&p, bad.to_json()).unwrap();
    let out = steerlab().args(["validate", &p]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let diag: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(diag["error"], "validation");
    assert!(!diag["violations"].as_array().unwrap().is_empty());

    let ok = path(&dir, "ok.json");
    fs::write(&ok, good.to_json()).unwrap();
    assert_eq!(run_json(&["validate", &ok])["valid"], true);
}

#[test]
fn malformed_file_exits_2() {
    let dir = TempDir::new().unwrap();
    let p = path(&dir, "junk.json");
    fs::write(&p, "{\"m\": 2}").unwrap();
    steerlab().args(["validate", &p]).assert().code(2);
    steerlab().args(["validate", &path(&dir, "missing.json")]).assert().code(2);
}

#[test]
fn distill_exact_report() {
    let r = run_json(&["distill", "--alpha2", "0.8", "--copies", "2", "--mode", "exact"]);
    assert!((r["p_success"].as_f64().unwrap() - 0.4).abs() < 1e-12);
    assert!((r["fraction_after"].as_f64().unwrap() - 0.94f64.sqrt()).abs() < 1e-9);
    assert!((r["fraction_before"].as_f64().unwrap() - 0.9f64.sqrt()).abs() < 1e-9);
    assert_eq!(r["branches"].as_array().unwrap().len(), 2);
    let rate = &r["rate_report"];
    assert!((rate["rate"].as_f64().unwrap() - 0.2).abs() < 1e-12);
    assert!((rate["asymptotic_rate"].as_f64().unwrap() - 0.4).abs() < 1e-12);
}

#[test]
fn distill_output_assemblage_matches_library() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "avg.json");
    steerlab()
        .args(["distill", "--alpha2", "0.7", "--copies", "3", "--assemblage-out", &out])
        .assert()
        .success();
    assert_eq!(load(&out), averaged_output(0.7, 3).unwrap());
}

#[test]
fn distill_single_copy_exits_2() {
    steerlab().args(["distill", "--alpha2", "0.8", "--copies", "1"]).assert().code(2);
}

#[test]
fn distill_from_input_file() {
    let dir = TempDir::new().unwrap();
    let a = path(&dir, "a.json");
    fs::write(&a, alpha_assemblage(0.8).unwrap().to_json()).unwrap();
    let r = run_json(&["distill", "--input", &a, "--copies", "2"]);
    assert!((r["fraction_after"].as_f64().unwrap() - 0.94f64.sqrt()).abs() < 1e-9);

    let s = path(&dir, "s.json");
    fs::write(&s, singlet_assemblage().to_json()).unwrap();
    steerlab().args(["distill", "--input", &s, "--copies", "2"]).assert().code(2);
}

#[test]
fn distill_sampled_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (path(&dir, "a.json"), path(&dir, "b.json"));
    let args = ["distill", "--alpha2", "0.8", "--copies", "3", "--mode", "sampled", "--trials", "100000", "--seed", "7"];
    steerlab().args(args).args(["--out", &a]).assert().success();
    steerlab().args(args).args(["--out", &b]).assert().success();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    // the environment supplies the default seed
    let c = path(&dir, "c.json");
    steerlab()
        .env("STEERLAB_SEED", "7")
        .args(&args[..args.len() - 2])
        .args(["--out", &c])
        .assert()
        .success();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn metrics_match_library_exactly() {
    let dir = TempDir::new().unwrap();
    let (a, s) = (path(&dir, "a.json"), path(&dir, "s.json"));
    let alpha = alpha_assemblage(0.75).unwrap();
    fs::write(&a, alpha.to_json()).unwrap();
    fs::write(&s, singlet_assemblage().to_json()).unwrap();
    let one = run_json(&["metrics", "--singlet-fraction", &s])["fraction"].as_f64().unwrap();
    assert_eq!(one, singlet_fraction(&singlet_assemblage()).unwrap());
    assert!((one - 1.0).abs() < 1e-12);
    assert_eq!(
        run_json(&["metrics", "--singlet-fraction", &a])["fraction"].as_f64(),
        Some(singlet_fraction(&alpha).unwrap())
    );
    assert_eq!(
        run_json(&["metrics", &a, &s])["fidelity"].as_f64(),
        Some(assemblage_fidelity(&alpha, &singlet_assemblage()).unwrap())
    );
    steerlab().args(["metrics", &a]).assert().code(2);
}

#[test]
fn filter_then_robustness_of_failure_branch_vanishes() {
    let dir = TempDir::new().unwrap();
    let (a, f) = (path(&dir, "a.json"), path(&dir, "fail.json"));
    fs::write(&a, alpha_assemblage(0.8).unwrap().to_json()).unwrap();
    let r = run_json(&["filter", &a, "--alpha2", "0.8", "--outcome", "1", "--out", &f]);
    let p_fail = r["probability"].as_f64().unwrap();
    assert!((p_fail - 0.6).abs() < 1e-12);
    let t = run_json(&["robustness", &f])["t_star"].as_f64().unwrap();
    assert!(t <= 1e-6, "{t}");
}

#[test]
fn filter_success_gives_singlet() {
    let dir = TempDir::new().unwrap();
    let (a, f) = (path(&dir, "a.json"), path(&dir, "ok.json"));
    fs::write(&a, alpha_assemblage(0.8).unwrap().to_json()).unwrap();
    let r = run_json(&["filter", &a, "--alpha2", "0.8", "--out", &f]);
    assert!((r["probability"].as_f64().unwrap() - 0.4).abs() < 1e-12);
    assert!(load(&f).max_abs_diff(&singlet_assemblage()) < 1e-12);
}

#[test]
fn robustness_matches_library_for_both_flavors() {
    let dir = TempDir::new().unwrap();
    let a = path(&dir, "a.json");
    let alpha = alpha_assemblage(0.8).unwrap();
    fs::write(&a, alpha.to_json()).unwrap();
    for (flag, flavor) in [("lhs", Flavor::LhsRestricted), ("generalized", Flavor::Generalized)] {
        let r = run_json(&["robustness", &a, "--flavor", flag]);
        let expected = lhs_robustness_with(&alpha, flavor).unwrap();
        assert_eq!(r["t_star"].as_f64(), Some(expected.t_star));
        assert_eq!(r["solver_iters"].as_u64(), Some(expected.solver_iters as u64));
    }
    steerlab().args(["robustness", &a, "--flavor", "bogus"]).assert().code(2);
}

fn only_file(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

#[test]
fn fig3_default_grid_orders_exact_curves() {
    let dir = TempDir::new().unwrap();
    let (csv_path, svg_path) = (path(&dir, "fig3.csv"), path(&dir, "fig3.svg"));
    steerlab()
        .args(["fig3", "--shots", "500", "--seeds", "2", "--seed", "3", "--out", &csv_path, "--svg", &svg_path])
        .assert()
        .success();
    // writes are atomic: no temporary files remain
    assert_eq!(only_file(dir.path()), vec!["fig3.csv", "fig3.svg"]);

    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        ["delta", "curve", "metric", "exact", "mean_reconstructed", "stddev_reconstructed", "shots", "seed"]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 10 * 3 * 2);
    let exact = |delta: &str, curve: &str| -> f64 {
        rows.iter()
            .find(|r| &r[0] == delta && &r[1] == curve && &r[2] == "fraction")
            .unwrap()[3]
            .parse()
            .unwrap()
    };
    let deltas: std::collections::BTreeSet<String> = rows.iter().map(|r| r[0].to_string()).collect();
    assert_eq!(deltas.len(), 10);
    for d in &deltas {
        assert!(exact(d, "averaged") > exact(d, "original"), "Δ = {d}");
    }

    let svg = fs::read_to_string(&svg_path).unwrap();
    assert!(svg.starts_with("<svg") && !svg.contains("href"));
}

#[test]
fn fig3_json_and_bad_grid() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "f.json");
    steerlab()
        .args(["fig3", "--grid", "0.8", "--shots", "200", "--seeds", "2", "--out", &out])
        .assert()
        .success();
    let rows: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 6);
    steerlab().args(["fig3", "--grid", "1.2", "--shots", "10"]).assert().code(2);
    steerlab().args(["fig3", "--grid", "0.8", "--shots", "0"]).assert().code(2);
}

#[test]
fn help_lists_examples() {
    let out = steerlab().arg("--help").output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("Examples:") && text.contains("Exit codes"));
    for sub in ["make", "validate", "filter", "distill", "metrics", "robustness", "fig3"] {
        assert!(text.contains(sub), "{sub}");
        let out = steerlab().args([sub, "--help"]).output().unwrap();
        assert!(String::from_utf8(out.stdout).unwrap().contains("Example"), "{sub}");
    }
}
