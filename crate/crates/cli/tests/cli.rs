use std::process::Command;

fn perfsim(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_perfsim")).args(args).output().unwrap()
}

#[test]
fn csv_has_exact_companions() {
    let out = perfsim(&["twostate", "--n", "2000", "--ks", "5,20"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("k,unadjusted,unadjusted_exact,adjusted,adjusted_exact"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn single_simulation_has_undefined_sd() {
    let out = perfsim(&["twostate", "--n", "1", "--ks", "5", "--format", "json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["rows"][0]["sd"].is_null());
}

#[test]
fn bad_arguments_exit_with_two() {
    let out = perfsim(&["survival", "--p", "1.5", "--n", "10"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[argument]"));
    assert_eq!(perfsim(&["normal", "--d", "0"]).status.code(), Some(2));
    assert_eq!(perfsim(&["twostate", "--bogus"]).status.code(), Some(2));
}

#[test]
fn hex_seed_matches_decimal() {
    let a = perfsim(&["survival", "--n", "500", "--seed", "0x10"]);
    let b = perfsim(&["survival", "--n", "500", "--seed", "16"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn plot_is_written() {
    let path = std::env::temp_dir().join(format!("perfsim-plot-{}.svg", std::process::id()));
    let out = perfsim(&["twostate", "--n", "500", "--ks", "0,5,10", "--plot", path.to_str().unwrap()]);
    assert!(out.status.success());
    let svg = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).ok();
    assert!(svg.contains("<polyline"));
}
