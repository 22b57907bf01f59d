use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shrinker-audit"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn verify_identities_on_cylinder() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify-identities", "--model", "cylinder:k=2,m=2", "--samples", "100", "--seed", "7"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&dir.path().join("identities.json"));
    assert_eq!(report["reports"].as_array().unwrap().len(), 100 * 13);
}

#[test]
fn gaussian_skips_r_positive_audits_with_notice() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify-identities", "--model", "gaussian:n=3", "--samples", "20"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("skipped"));
}

#[test]
fn malformed_model_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify-identities", "--model", "cylinder:k=1,m=2"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sphere factor dimension must be ≥ 2"));
}

#[test]
fn geodesic_on_cylinder_writes_both_paths() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["geodesic", "--model", "cylinder:k=2,m=2", "--c", "0.1", "--ry", "10"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    for tag in ["shooting", "discrete"] {
        let text = std::fs::read_to_string(dir.path().join(format!("geodesic_c0.1_r10_{tag}.csv"))).unwrap();
        assert_eq!(text.lines().count(), 1 + 257);
    }
    let summary = json(&dir.path().join("geodesic.json"));
    let c = summary["cells"][0]["result"]["shooting"]["c_value"].as_f64().unwrap();
    assert!((0.9..=1.1).contains(&c));
}

#[test]
fn sphere_quarter_arc_has_c_one_minus_c() {
    let dir = tempfile::tempdir().unwrap();
    let quarter = std::f64::consts::FRAC_PI_2 * 2f64.sqrt();
    let o = run(&["geodesic", "--model", "sphere:n=2", "--c", "0.2", "--ry", &quarter.to_string()], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let c = json(&dir.path().join("geodesic.json"))["cells"][0]["result"]["shooting"]["c_value"].as_f64().unwrap();
    assert!((c - 0.8).abs() <= 1e-9, "{c}");
}

#[test]
fn coincident_endpoints_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["geodesic", "--ry", "3", "--x-ry", "3"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("degenerate endpoints"));
}

#[test]
fn audit_chain_on_gaussian_skips_with_notice() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["audit-chain", "--model", "gaussian:n=3", "--ry", "10"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let bundle = json(&dir.path().join("audit_chain.json"));
    assert_eq!(bundle["cells"][0]["result"]["skipped"].as_array().unwrap().len(), 2);
}

#[test]
fn scan_beyond_diameter_is_a_refusal() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["scan", "--model", "sphere:n=2", "--ry", "5"], dir.path());
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn scan_near_c_one_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["scan", "--c", "0.99"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let c_hat = json(&dir.path().join("scan.json"))["empirical_c_hat"].as_f64().unwrap();
    assert!(c_hat.is_finite() && c_hat > 0.0);
}

#[test]
fn audits_reject_c_at_least_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["audit-chain", "--c", "1.0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`c`"));
}
