use std::process::{Command, Output};

fn proxysync(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_proxysync"))
        .args(args)
        .env_remove("PROXYSYNC_SEED")
        .output()
        .unwrap()
}

#[test]
fn same_inputs_same_trace_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.trace");
    let b = dir.path().join("b.trace");
    for path in [&a, &b] {
        let out = proxysync(&["run", "--scenario", "tic_tac_toe", "--seed", "7", "--out", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn trace_goes_to_stdout_without_out() {
    let out = proxysync(&["run", "--scenario", "city_builder", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("delay=0.000000 dt=0.020000 ev=header scenario=city_builder seed=3"));
    assert!(String::from_utf8(out.stderr).unwrap().contains("grabs: 4"));
}

#[test]
fn seed_falls_back_to_environment() {
    let flag = proxysync(&["run", "--scenario", "clinking_drinks", "--seed", "12"]);
    let env = Command::new(env!("CARGO_BIN_EXE_proxysync"))
        .args(["run", "--scenario", "clinking_drinks"])
        .env("PROXYSYNC_SEED", "12")
        .output()
        .unwrap();
    assert_eq!(flag.stdout, env.stdout);
}

#[test]
fn out_of_range_drop_exits_2() {
    let out = proxysync(&["run", "--scenario", "pass_the_mug", "--drop", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_script_exits_2() {
    let out = proxysync(&["run", "--scenario", "/nonexistent/script.txt"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_delay_control_shows_mask_failures() {
    let out = proxysync(&["run", "--scenario", "pass_the_mug", "--delay", "0", "--summary", "records"]);
    assert_eq!(out.status.code(), Some(0));
    let summary = String::from_utf8(out.stderr).unwrap();
    let rec = proxysync::record::Record::parse(summary.trim()).unwrap();
    assert!(rec.get_int("mask_failures").unwrap() >= 1, "{summary}");
}

#[test]
fn crowded_proxies_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("crowded.txt");
    std::fs::write(
        &path,
        "\
ev=scenario name=city_builder seed=1 delay=0.0 duration=0.5
ev=room id=1 half_width=0.6 half_depth=0.4 seat=south
ev=proxy id=p1 room=1 x=0.0 y=0.0
ev=proxy id=p2 room=1 x=0.03 y=0.0
ev=object id=b1 kind=virtual x=0.3 y=0.2
ev=map policy=one_to_many object=b1 margin=0.05
ev=pool proxy=p1
ev=pool proxy=p2
",
    )
    .unwrap();
    let out = proxysync(&["run", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8(out.stderr).unwrap().contains("ev=safety"));
}

#[test]
fn validate_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.txt");
    std::fs::write(&path, "ev=scenario name=pass_the_mug seed=1 delay=1.0 duration=1.0\nev=wrist t=0.0 room=9 x=0 y=0 palm=0\n").unwrap();
    let out = proxysync(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("line "));
}

#[test]
fn masking_oracle_lands_in_band() {
    let out = proxysync(&["oracle", "masking"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let last = proxysync::record::Record::parse(text.lines().last().unwrap()).unwrap();
    let d = last.get_f64("min_delay").unwrap();
    assert!((1.0..=1.5).contains(&d), "{d}");
}

#[test]
fn builtin_script_round_trips_through_validate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mug.txt");
    let out = proxysync(&["script", "pass_the_mug", "--seed", "4"]);
    std::fs::write(&path, &out.stdout).unwrap();
    assert_eq!(proxysync(&["validate", path.to_str().unwrap()]).status.code(), Some(0));
    let a = proxysync(&["run", "--scenario", path.to_str().unwrap()]);
    let b = proxysync(&["run", "--scenario", "pass_the_mug", "--seed", "4"]);
    assert_eq!(a.stdout, b.stdout);
}
