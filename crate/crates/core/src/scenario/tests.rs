use super::*;
use crate::planner::plan_mp1;

fn opts() -> BuiltinOptions {
    BuiltinOptions::default()
}

type StartGoal = ([f64; 2], [f64; 2]);

#[test]
fn builtin_coordinates_are_frozen() {
    let expect: [(&str, &[StartGoal]); 4] = [
        ("opposing", &[([10.0, 50.0], [95.0, 50.0]), ([90.0, 50.0], [5.0, 10.0])]),
        (
            "parallel",
            &[([10.0, 70.0], [95.0, 70.0]), ([10.0, 35.0], [95.0, 35.0])],
        ),
        (
            "intersection2",
            &[([10.0, 50.0], [90.0, 50.0]), ([50.0, 10.0], [50.0, 90.0])],
        ),
        (
            "intersection3",
            &[
                ([50.0, 90.0], [50.0, 5.0]),
                ([85.0, 30.0], [11.0, 73.0]),
                ([14.0, 29.0], [90.0, 73.0]),
            ],
        ),
    ];
    for (name, agents) in expect {
        let s = builtin_scenario(name, opts()).unwrap();
        s.validate().unwrap();
        assert_eq!(s.agents.len(), agents.len(), "{name}");
        for (a, &(start, goal)) in s.agents.iter().zip(agents) {
            assert_eq!((a.start, a.goal), (start, goal), "{name}");
            assert_eq!(a.half_extent, [7.5, 7.5]);
            assert_eq!((a.vmax, a.sigma_scale, a.feedback_gain), (10.0, 1.9, 0.0));
        }
        assert_eq!(s.defaults.horizon, 12);
        assert_eq!(s.lambda_grid, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]);
    }
    let fb = builtin_scenario(
        "parallel",
        BuiltinOptions {
            feedback: true,
            ..opts()
        },
    )
    .unwrap();
    assert!(fb.agents.iter().all(|a| a.feedback_gain == 0.5));
    let fixed = builtin_scenario(
        "opposing",
        BuiltinOptions {
            corrected_opposing: true,
            ..opts()
        },
    )
    .unwrap();
    assert_eq!(fixed.agents[1].goal, [5.0, 50.0]);
}

#[test]
fn unknown_builtin_lists_names() {
    let msg = builtin_scenario("roundabout", opts()).unwrap_err().to_string();
    for name in BUILTIN_NAMES {
        assert!(msg.contains(name), "{msg}");
    }
}

#[test]
fn builtins_round_trip_through_text() {
    for name in BUILTIN_NAMES {
        let s = builtin_scenario(name, opts()).unwrap();
        let text = serialize_scenario(&s).unwrap();
        assert_eq!(parse_scenario(&text).unwrap(), s, "{text}");
    }
}

const SMALL: &str = r#"format_version = 1
name = "small"
lambda_grid = [0.25, 0.75]

[workspace]
min = [0.0, 0.0]
max = [100.0, 100.0]

[[agents]]
start = [10.0, 50.0]
goal = [95.0, 50.0]
"#;

#[test]
fn optional_fields_take_defaults() {
    let s = parse_scenario(SMALL).unwrap();
    assert_eq!(s.agents[0].vmax, 10.0);
    assert_eq!(s.agents[0].half_extent, [7.5, 7.5]);
    assert_eq!(s.defaults, Defaults::default());
    assert_eq!(s.lambda_grid, vec![0.25, 0.75]);
}

fn line_error(text: &str) -> (usize, String) {
    match parse_scenario(text).unwrap_err() {
        Error::Scenario { line, message } => (line, message),
        other => panic!("unexpected error {other}"),
    }
}

#[test]
fn lambda_out_of_range_names_field_and_line() {
    let (line, msg) = line_error(&SMALL.replace("0.75]", "1.5]"));
    assert_eq!(line, 3);
    assert!(msg.contains("lambda_grid[1]"), "{msg}");
}

#[test]
fn start_outside_workspace_is_rejected() {
    let (line, msg) = line_error(&SMALL.replace("start = [10.0, 50.0]", "start = [-5.0, 50.0]"));
    assert_eq!(line, 10);
    assert!(msg.contains("agents[0].start"), "{msg}");
}

#[test]
fn missing_field_and_unknown_key_are_distinct() {
    let (line, missing) = line_error(&SMALL.replace("goal = [95.0, 50.0]\n", ""));
    assert!(missing.contains("missing field `goal`"), "{missing}");
    assert!(line >= 9, "line {line}");
    let (line, unknown) = line_error(&SMALL.replace("goal = [95.0, 50.0]", "goal = [95.0, 50.0]\nspeed = 3.0"));
    assert_eq!(line, 12);
    assert!(unknown.contains("speed"), "{unknown}");
    let (_, version) = line_error(&SMALL.replace("format_version = 1", "format_version = 7"));
    assert!(version.contains("format_version"), "{version}");
    let (_, unsorted) = line_error(&SMALL.replace("[0.25, 0.75]", "[0.75, 0.25]"));
    assert!(unsorted.contains("ascending"), "{unsorted}");
}

#[test]
fn number_format_has_nine_significant_digits() {
    let cases = [
        (0.0, "0"),
        (9.0, "9"),
        (0.1, "0.1"),
        (-2.5, "-2.5"),
        (1.0 / 3.0, "0.333333333"),
        (123456789.0, "123456789"),
        (1234567890.0, "1.23456789e+09"),
        (2.0e-6, "2e-06"),
        (0.0001234, "0.0001234"),
        (-4.0 * 0.45, "-1.8"),
    ];
    for (x, s) in cases {
        assert_eq!(format_number(x), s, "{x}");
    }
}

fn straight_profile() -> (ScenarioFile, Profile) {
    let mut s = builtin_scenario("opposing", opts()).unwrap();
    s.agents.truncate(1);
    let params = s.plan_params(1.0);
    let game = s.game(params.clone()).unwrap();
    let plan = plan_mp1(&game.agents[0], &[], &params, &Default::default())
        .unwrap()
        .plan;
    (
        s,
        Profile {
            plans: vec![plan],
            params,
        },
    )
}

#[test]
fn svg_draws_goal_step_plus_one_points() {
    let (s, profile) = straight_profile();
    let svg = svg_string(&s, &profile).unwrap();
    assert!(svg.contains(r#"viewBox="0 0 100 100""#));
    let line = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
    let points = line.split('"').nth(1).unwrap();
    let pts: Vec<&str> = points.split(' ').collect();
    assert_eq!(pts.len(), 10);
    assert_eq!(pts[0], "10,50");
    assert_eq!(pts[9], "95,50");
    assert_eq!(svg.matches("fill-opacity").count(), 10);
    assert_eq!(svg_string(&s, &profile).unwrap(), svg);

    let empty = Profile {
        plans: vec![],
        params: profile.params.clone(),
    };
    assert!(svg_string(&s, &empty).is_err());
}

#[test]
fn profile_json_round_trip() {
    let (s, profile) = straight_profile();
    let boxes = ["40,40,60,60".parse::<ObstacleBox>().unwrap()];
    let text = ProfileFile::new(&s, &boxes, &profile).to_json().unwrap();
    let back = ProfileFile::from_json(&text).unwrap();
    assert_eq!(back.scenario, s);
    assert_eq!(back.profile, profile);
    assert_eq!(back.obstacle_polytopes().unwrap()[0].vertices().len(), 4);
    assert!(ProfileFile::from_json("{").is_err());
    assert!("1,2,3".parse::<ObstacleBox>().is_err());
    assert!("5,5,1,1".parse::<ObstacleBox>().is_err());
}

#[test]
fn sweep_row_count_and_csv_shape() {
    let s = builtin_scenario("opposing", opts()).unwrap();
    let options = SweepOptions {
        trials: 20,
        ..Default::default()
    };
    let rows = run_sweep(&s, &options).unwrap();
    assert_eq!(rows.len(), 9 * 2 * (2 + 1));
    assert_eq!(rows[0].mode, SweepMode::Equilibrium);
    assert_eq!(rows[2].agent_id, "mean");
    assert_eq!(rows[3].mode, SweepMode::Social);
    assert!(rows.iter().all(|r| r.solver_status == "optimal"), "{rows:?}");
    let mut buf = Vec::new();
    write_sweep_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let width = SWEEP_HEADER.split(',').count();
    assert_eq!(width, 12);
    assert!(text.lines().all(|l| l.split(',').count() == width));
    assert_eq!(text.lines().count(), rows.len() + 1);
}

#[test]
fn single_agent_social_matches_equilibrium() {
    let mut s = builtin_scenario("parallel", opts()).unwrap();
    s.agents.truncate(1);
    let options = SweepOptions {
        trials: 0,
        lambdas: Some(vec![0.3, 0.8]),
        ..Default::default()
    };
    let rows = run_sweep(&s, &options).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 2);
    for chunk in rows.chunks(4) {
        assert_eq!(chunk[0].j, chunk[2].j);
        assert!(chunk[0].empirical_rate.is_none());
    }
}

#[test]
fn failed_lambda_is_recorded_and_sweep_continues() {
    let mut s = builtin_scenario("opposing", opts()).unwrap();
    s.agents.truncate(1);
    let options = SweepOptions {
        trials: 0,
        lambdas: Some(vec![0.5]),
        // too short to reach the goal
        horizon: Some(3),
        ..Default::default()
    };
    let rows = run_sweep(&s, &options).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(
        rows.iter().all(|r| r.j.is_none() && r.solver_status != "optimal"),
        "{rows:?}"
    );
}

#[test]
fn render_writes_file_and_reports_io_errors() {
    let (s, profile) = straight_profile();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plan.svg");
    render_svg(&s, &profile, &path).unwrap();
    assert_eq!(
        std::fs::read_to_string(&path).unwrap(),
        svg_string(&s, &profile).unwrap()
    );
    let missing = dir.path().join("no-such-dir").join("plan.svg");
    assert!(matches!(render_svg(&s, &profile, &missing), Err(Error::Io(_))));
}
