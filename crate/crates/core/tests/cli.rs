use std::process::Command;

fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_permseries")).args(args).output().expect("binary runs");
    let mut text = String::from_utf8(out.stdout).unwrap();
    text.push_str(&String::from_utf8(out.stderr).unwrap());
    (out.status.code().unwrap_or(-1), text)
}

#[test]
fn sums_alt_harmonic() {
    let (code, out) = run(&["sums", "--series", "alt-harmonic", "--terms", "4"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines, ["n,term,partial_sum", "1,1,1", "2,-1/2,1/2", "3,1/3,5/6", "4,-1/4,7/12"]);
}

#[test]
fn float_column_is_extra() {
    let (code, out) = run(&["sums", "--series", "geometric:-1/2", "--terms", "2", "--float"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().nth(2).unwrap(), "2,1/4,-1/4,-0.25");
}

#[test]
fn sums_to_file() {
    let dir = std::env::temp_dir().join(format!("permseries-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("sums.csv");
    let (code, _) = run(&[
        "sums", "--series", "alt-harmonic", "--terms", "6", "--perm", "two-pos-one-neg",
        "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&path).unwrap();
    let terms: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(terms, ["1", "1/3", "-1/2", "1/5", "1/7", "-1/4"]);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn bracket_odd_first_blocks() {
    let (code, out) = run(&["bracket", "--series", "alt-harmonic", "--f", "odd", "--blocks", "3"]);
    assert_eq!(code, 0);
    let rows: Vec<Vec<&str>> = out.lines().skip(1).take(2).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0][2], "1/2");
    assert_eq!(rows[1][2], "1/12");
    assert!(out.contains("telescoping ok"));
}

#[test]
fn rearrange_logs_switches() {
    let (code, out) = run(&["rearrange", "--series", "alt-harmonic", "--target", "1/2", "--terms", "50"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 51);
    assert!(out.lines().any(|l| l.ends_with(",switch")));
    let (code, out) = run(&["rearrange", "--series", "alt-log", "--target", "-inf", "--terms", "20"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("passed 1"));
}

#[test]
fn oscillate_blocks_and_separation_violation() {
    let args = [
        "oscillate", "--series", "alt-harmonic", "--sigma", "two-pos-one-neg", "--delta", "1/3", "--blocks", "3",
    ];
    let (code, out) = run(&args);
    assert_eq!(code, 0, "{out}");
    assert_eq!(out.lines().filter(|l| l.ends_with(",true")).count(), 3);
    let (code, out) = run(&["oscillate", "--series", "alt-harmonic", "--sigma", "identity", "--delta", "1/3"]);
    assert_eq!(code, 3);
    assert!(out.contains("error"));
}

#[test]
fn oscillate_json() {
    let (code, out) = run(&[
        "--json", "oscillate", "--series", "alt-harmonic", "--sigma", "two-pos-one-neg", "--delta", "1/3",
        "--blocks", "2",
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert!(v[0]["block_sum"].as_str().unwrap().contains('/'));
}

#[test]
fn bdn_commands() {
    let (code, out) = run(&["bdn", "bound", "--set", "finite-sup:1,2,3", "--n", "2", "--range", "10"]);
    assert_eq!((code, out.trim()), (0, "3"));
    let (code, out) = run(&["bdn", "bound", "--set", "identity", "--n", "2", "--range", "10"]);
    assert_eq!(code, 3);
    assert!(out.contains("lambda_2"), "{out}");
    let (code, out) = run(&["bdn", "build", "--set", "custom:1,2,3", "--terms", "4"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().last().unwrap(), "4,1/4,-1/12");
    let (code, out) = run(&[
        "bdn", "bracket", "--set", r#"{"kind":"finite-sup","values":[1,2,3]}"#, "--perm", "shuffle:5", "--blocks", "4",
    ]);
    assert_eq!(code, 0, "{out}");
    assert_eq!(out.lines().count(), 5);
}

#[test]
fn instrument_commands() {
    let (code, out) = run(&["instrument", "s-scan", "--series", "geometric:-1/2", "--eps", "1/10", "--upto", "3"]);
    assert_eq!(code, 0);
    let members: Vec<&str> = out.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(members, ["yes", "unknown", "unknown"]);
    let (code, out) = run(&["instrument", "sigma", "--series", "alt-harmonic", "--eps", "1/2", "--upto", "30"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.starts_with("# sigma: 1 3 5 2 4"), "{out}");
    assert!(out.contains("\n2,5,1,3,8/15"), "{out}");
}

#[test]
fn input_errors_exit_2() {
    assert_eq!(run(&["sums", "--series", "geometric:2", "--terms", "3"]).0, 2);
    assert_eq!(run(&["sums", "--series", "alt-harmonic"]).0, 2);
    assert_eq!(run(&["bracket", "--series", "alt-harmonic", "--f", "squares"]).0, 2);
    assert_eq!(run(&["sums", "--series", "geometric:1/2", "--terms", "3", "--perm", "riemann:0"]).0, 2);
    assert_eq!(run(&["sums", "--series", "alt-harmonic", "--terms", "3", "--perm", "explicit:1,1"]).0, 2);
}
