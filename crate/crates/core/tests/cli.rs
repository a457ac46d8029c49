use std::fs;
use std::process::Command;

fn flagkop(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_flagkop")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

#[test]
fn selftest_without_arguments() {
    let (code, csv, _) = flagkop(&["selftest"]);
    assert_eq!(code, 0);
    assert!(csv.starts_with("# flagkop results, schema version 1\n"));
    assert!(csv.lines().skip(2).all(|l| l.contains(",true,")));
}

#[test]
fn identical_seed_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let (code, _, _) = flagkop(&["chern-form", "--quad", "mc", "--samples", "400", "--order", "8", "--seed", "5", "-o", path.to_str().unwrap()]);
        assert_eq!(code, 0);
        fs::read(path).unwrap()
    };
    assert_eq!(run("a.csv"), run("b.csv"));
    let json: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("a.json")).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
    assert_eq!(json["passed"], true);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "flag = \"1,2,3:3\"\nseed = 1\npairs = 20\n").unwrap();
    let (code, csv, _) = flagkop(&["verify-diagonal", "--config", cfg.to_str().unwrap(), "--flag", "2,4:4"]);
    assert_eq!(code, 0);
    let rows: Vec<&str> = csv.lines().skip(2).collect();
    assert_eq!(rows.len(), 20);
    assert!(rows.iter().all(|r| r.starts_with("\"2,4:4\",verify-diagonal")));
}

#[test]
fn exit_codes() {
    assert_eq!(flagkop(&["chern-form", "--flag", "1,3"]).0, 2);
    assert_eq!(flagkop(&["dbar-solve", "--bundle", "Q:1"]).0, 2);
    assert_eq!(flagkop(&["selftest", "--config", "/nonexistent/run.toml"]).0, 2);
    let (code, _, err) = flagkop(&["verify-diagonal", "--samples", "5", "--tolerance", "1e-12"]);
    assert_eq!(code, 1);
    assert!(err.contains("tolerance failure"));
}
