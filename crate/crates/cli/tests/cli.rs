use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relay-duality"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn generate_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let gen = run(
        &[
            "gen", "--M", "3", "--K", "3", "--seed", "42", "--out", "a.json",
        ],
        dir.path(),
    );
    assert_eq!(code(&gen), 0, "{}", String::from_utf8_lossy(&gen.stderr));
    for case in ["I", "II", "III", "IV"] {
        let v = run(&["verify", "a.json", "0.5", case], dir.path());
        assert_eq!(
            code(&v),
            0,
            "{case}: {}",
            String::from_utf8_lossy(&v.stdout)
        );
        let report: serde_json::Value = serde_json::from_slice(&v.stdout).unwrap();
        assert_eq!(report["pass"], true);
    }
    let listed = run(
        &[
            "verify",
            "a.json",
            "0.5,0.75,1",
            "IV",
            "--tau",
            "3,1,2",
            "--rho",
            "2,3,1",
        ],
        dir.path(),
    );
    assert_eq!(code(&listed), 0);
    std::fs::write(dir.path().join("t.json"), "[0.25, 0.5, 0.25]").unwrap();
    assert_eq!(
        code(&run(&["verify", "a.json", "t.json", "I"], dir.path())),
        0
    );
}

#[test]
fn generated_instances_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    run(
        &[
            "gen", "--M", "2", "--K", "4", "--seed", "9", "--out", "x.json",
        ],
        dir.path(),
    );
    run(
        &[
            "gen", "--M", "2", "--K", "4", "--seed", "9", "--out", "y.json",
        ],
        dir.path(),
    );
    assert_eq!(
        std::fs::read(dir.path().join("x.json")).unwrap(),
        std::fs::read(dir.path().join("y.json")).unwrap()
    );
}

#[test]
fn usage_and_configuration_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&run(
            &["gen", "--M", "3", "--K", "3", "--seed", "1", "--out", "a.json", "--bogus"],
            dir.path()
        )),
        2
    );
    assert_eq!(code(&run(&["frobnicate"], dir.path())), 2);
    assert_eq!(
        code(&run(&["verify", "missing.json", "1", "I"], dir.path())),
        2
    );
    run(
        &[
            "gen", "--M", "2", "--K", "2", "--seed", "1", "--out", "a.json",
        ],
        dir.path(),
    );
    assert_eq!(code(&run(&["verify", "a.json", "1", "V"], dir.path())), 2);
    assert_eq!(
        code(&run(&["verify", "a.json", "1,2,3", "I"], dir.path())),
        2
    );
    std::fs::write(dir.path().join("bad.json"), r#"{"rates": [2.0, 1.0]}"#).unwrap();
    assert_eq!(code(&run(&["sweep", "bad.json"], dir.path())), 2);
}

#[test]
fn infeasible_targets_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    run(
        &[
            "gen", "--M", "2", "--K", "2", "--seed", "1", "--out", "a.json",
        ],
        dir.path(),
    );
    assert_eq!(code(&run(&["verify", "a.json", "9", "III"], dir.path())), 1);
    std::fs::write(
        dir.path().join("c.json"),
        r#"{"M": 2, "K": 2, "seed": 1, "rates": [8, 9, 10]}"#,
    )
    .unwrap();
    let s = run(&["sweep", "c.json"], dir.path());
    assert_eq!(code(&s), 1, "{}", String::from_utf8_lossy(&s.stderr));
    let text = String::from_utf8(s.stdout).unwrap();
    assert_eq!(text.lines().count(), 13);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",,,,,infeasible")));
}

#[test]
fn sweep_output_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.json"),
        r#"{"rates": {"start": 0.5, "stop": 1.5, "step": 0.5}, "output": "a.csv"}"#,
    )
    .unwrap();
    assert_eq!(code(&run(&["sweep", "c.json"], dir.path())), 0);
    assert_eq!(
        code(&run(
            &["sweep", "c.json", "--out", "b.csv", "--sequential"],
            dir.path()
        )),
        0
    );
    let a = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(
        a,
        std::fs::read_to_string(dir.path().join("b.csv")).unwrap()
    );
    assert!(a.starts_with("case,rate_target,ul_power,dl_power,rel_gap,beta_resid,q_resid,status\n"));
    assert_eq!(a.lines().count(), 13);
}
