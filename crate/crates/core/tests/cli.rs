use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run(args: &[&str], scenario: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_extremal"))
        .args(args)
        .arg("--scenario")
        .arg(scenario)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn h_eval_prints_frozen_values() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["h-eval"], &scenario("constant-segment.json"), dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    // h(1/2, [-1, 1]) = sqrt(3/4)
    assert!(text.contains("h = 8.6602540378443860e-1"), "{text}");
    assert!(text.contains("chebyshev radius = 1.0000000000000000e0"), "{text}");
    assert!(dir.path().join("h_eval.json").exists());
}

#[test]
fn h_eval_point_outside_fails() {
    let dir = tempfile::tempdir().unwrap();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_extremal"));
    cmd.args(["h-eval", "--y", "1.5", "--scenario"])
        .arg(scenario("constant-segment.json"))
        .arg("--out")
        .arg(dir.path());
    let o = cmd.output().unwrap();
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("undefined"));
}

#[test]
fn unknown_field_exits_with_parse_code() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(scenario("constant-segment.json"))
        .unwrap()
        .replace("\"bound\": 1.0,", "\"bound\": 1.0,\n  \"bonud\": 2.0,");
    let path = dir.path().join("bad.json");
    fs::write(&path, text).unwrap();
    let o = run(&["build"], &path, dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bonud") && err.contains("line 6"), "{err}");
}

#[test]
fn infeasible_schedule_exits_3_with_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["build"], &scenario("infeasible.json"), dir.path());
    assert_eq!(o.status.code(), Some(3));
    let report = fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(report.contains("schedule infeasible at level 1"), "{report}");
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("iteration.json")).unwrap()).unwrap();
    assert_eq!(json["status"]["kind"], "schedule_infeasible");
}

#[test]
fn build_of_constant_segment_is_green() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["build"], &scenario("constant-segment.json"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("iteration.json")).unwrap()).unwrap();
    let levels = json["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 8);
    assert!(levels[7]["h_integral"].as_f64().unwrap() <= 0.02);
    assert_eq!(levels[0]["max_strips"], 161);
    assert!(dir.path().join("selection.json").exists());
}

#[test]
fn singleton_has_zero_distances() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["build"], &scenario("singleton.json"), dir.path());
    assert_eq!(o.status.code(), Some(0));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("iteration.json")).unwrap()).unwrap();
    for l in json["levels"].as_array().unwrap() {
        assert_eq!(l["picard"]["sup"], 0.0);
        assert_eq!(l["h_integral"], 0.0);
    }
}

#[test]
fn simulations_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = run(&["simulate", "--seed", "11"], &scenario("planar-square.json"), d.path());
        assert_eq!(o.status.code(), Some(0));
    }
    for f in ["trajectory.csv", "relaxed.csv", "trajectory.svg"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn simulate_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate"], &scenario("singleton.json"), dir.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,x1,xdot1"));
    // f ≡ 0.3 from x0 = 0: the endpoint is 0.3 T
    let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((last[0] - 1.0).abs() <= 1e-12 && (last[1] - 0.3).abs() <= 1e-10, "{last:?}");
    let svg = fs::read_to_string(dir.path().join("trajectory.svg")).unwrap();
    assert!(svg.starts_with("<svg") && !svg.contains("href"));
}

#[test]
fn bangbang_emits_only_unit_controls() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["bangbang"], &scenario("bang-bang-scalar.json"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let csv = fs::read_to_string(dir.path().join("controls.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,u1"));
    let mut n = 0;
    for l in lines {
        let u: f64 = l.split(',').nth(1).unwrap().parse().unwrap();
        assert!(u == 1.0 || u == -1.0, "{u}");
        n += 1;
    }
    assert!(n > 10);
}

#[test]
fn verify_reports_understated_bound() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify"], &scenario("understated-bound.json"), dir.path());
    assert_eq!(o.status.code(), Some(3));
    let text = stdout(&o);
    assert!(text.contains("FAIL bound"), "{text}");
}

#[test]
fn verify_reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let oa = run(&["verify", "--seed", "3"], &scenario("constant-segment.json"), a.path());
    let ob = run(&["verify", "--seed", "3"], &scenario("constant-segment.json"), b.path());
    assert_eq!(oa.status.code(), Some(0), "{}", stdout(&oa));
    assert_eq!(oa.stdout, ob.stdout);
    assert_eq!(
        fs::read(a.path().join("verify.json")).unwrap(),
        fs::read(b.path().join("verify.json")).unwrap()
    );
}

#[test]
fn stress_scenario_reports_infeasible_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify"], &scenario("stress-linear-control.json"), dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("FAIL schedule"));
}

#[test]
fn missing_scenario_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["build"], &dir.path().join("nope.json"), dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn builds_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = run(&["build", "--seed", "5"], &scenario("planar-square.json"), d.path());
        assert_eq!(o.status.code(), Some(0));
    }
    for f in ["iteration.json", "selection.json", "report.txt"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f} differs");
    }
}
