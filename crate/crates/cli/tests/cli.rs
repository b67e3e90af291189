use std::path::Path;
use std::process::{Command, Output};

fn pathgame(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pathgame"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn scenarios_lists_four_names() {
    let dir = tempfile::tempdir().unwrap();
    let o = pathgame(&["scenarios"], dir.path());
    assert!(o.status.success());
    let names: Vec<String> = stdout(&o)
        .lines()
        .map(|l| l.split('\t').next().unwrap().to_string())
        .collect();
    assert_eq!(names, ["opposing", "parallel", "intersection2", "intersection3"]);
}

#[test]
fn plan_reports_nine_steps() {
    let dir = tempfile::tempdir().unwrap();
    let o = pathgame(
        &[
            "plan",
            "--scenario",
            "opposing",
            "--agent",
            "0",
            "--lambda",
            "1",
            "--horizon",
            "12",
            "--dump-lp",
            "mp1.lp",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("agent=0 T_goal=9 "), "{}", stdout(&o));
    let lp = std::fs::read_to_string(dir.path().join("mp1.lp")).unwrap();
    assert!(lp.contains("Minimize") || lp.contains("minimize"), "{lp}");
}

#[test]
fn sweep_writes_mean_and_agent_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = pathgame(
        &[
            "sweep",
            "--scenario",
            "parallel",
            "--lambda-grid",
            "0.3,0.7",
            "--trials",
            "50",
            "--out",
            "parallel.csv",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("parallel.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "scenario,lambda,mode,feedback_gain,agent_id,T_goal,G,J,risk_bound,empirical_rate,rounds,solver_status"
    );
    assert_eq!(lines.len(), 1 + 2 * 2 * 3);
    assert_eq!(lines.iter().filter(|l| l.split(',').nth(4) == Some("mean")).count(), 4);
    assert!(lines[1].starts_with("parallel,0.3,equilibrium,0,0,"), "{}", lines[1]);
}

#[test]
fn pipeline_equilibrium_respond_simulate_render() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = pathgame(
        &[
            "equilibrium",
            "--scenario",
            "opposing",
            "--lambda",
            "0.5",
            "--out",
            "eq.json",
        ],
        d,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("converged=true"), "{}", stdout(&o));

    let o = pathgame(
        &["respond", "--agent", "1", "--profile", "eq.json", "--out", "r.json"],
        d,
    );
    assert!(o.status.success(), "{}", stderr(&o));

    let sim = ["simulate", "--profile", "r.json", "--trials", "300", "--seed", "4"];
    let a = pathgame(&sim, d);
    let b = pathgame(&sim, d);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).contains("bound_holds=true"), "{}", stdout(&a));

    let o = pathgame(&["render", "--profile", "r.json", "--out", "r.svg"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    let svg = std::fs::read_to_string(d.join("r.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
}

#[test]
fn social_runs_and_saves() {
    let dir = tempfile::tempdir().unwrap();
    let o = pathgame(
        &[
            "social",
            "--scenario",
            "intersection2",
            "--lambda",
            "0.5",
            "--out",
            "s.json",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("status=optimal"), "{}", stdout(&o));
    assert!(dir.path().join("s.json").exists());
}

fn assert_fails(args: &[&str], code: i32, kind: &str) {
    let dir = tempfile::tempdir().unwrap();
    let o = pathgame(args, dir.path());
    assert_eq!(o.status.code(), Some(code), "{args:?}: {}", stderr(&o));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with(&format!("pathgame: error[{kind}]: ")), "{err}");
}

#[test]
fn usage_errors_exit_2() {
    assert_fails(&["plan", "--bogus"], 2, "usage");
    assert_fails(&["plan", "--scenario", "roundabout"], 2, "usage");
    assert_fails(&["plan"], 2, "usage");
    assert_fails(&["plan", "--scenario", "opposing", "--agent", "5"], 2, "usage");
    assert_fails(&["plan", "--scenario", "opposing", "--lambda", "1.5"], 2, "usage");
    assert_fails(&["plan", "--scenario", "parallel", "--corrected-opposing"], 2, "usage");
    assert_fails(
        &[
            "sweep",
            "--scenario",
            "parallel",
            "--lambda",
            "0.5",
            "--lambda-grid",
            "0.1,0.2",
        ],
        2,
        "usage",
    );
    assert_fails(&["render", "--scenario", "opposing", "--profile", "p.json"], 5, "io");
}

#[test]
fn infeasible_and_limit_codes() {
    assert_fails(&["plan", "--scenario", "opposing", "--horizon", "3"], 3, "infeasible");
    // the box covers the start
    assert_fails(
        &["plan", "--scenario", "opposing", "--obstacle", "0,40,20,60"],
        3,
        "infeasible",
    );
    assert_fails(
        &[
            "plan",
            "--scenario",
            "opposing",
            "--lambda",
            "0.5",
            "--obstacle",
            "40,40,60,60",
            "--node-limit",
            "1",
        ],
        4,
        "limit",
    );
}

#[test]
fn scenario_file_errors_carry_line() {
    let dir = tempfile::tempdir().unwrap();
    let text = "format_version = 1\nname = \"x\"\nlambda_grid = [1.5]\n[workspace]\nmin = [0.0, 0.0]\nmax = [10.0, 10.0]\n[[agents]]\nstart = [1.0, 1.0]\ngoal = [9.0, 9.0]\n";
    std::fs::write(dir.path().join("bad.toml"), text).unwrap();
    let o = pathgame(&["plan", "--scenario", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("scenario line 3: lambda_grid[0]"), "{}", stderr(&o));
}
