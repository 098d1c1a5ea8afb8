//! Command-line behaviour: exit codes and the skipped-validation report.

use std::fs;
use std::path::Path;

use homestop::cli::main_with_args;

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.conf");
    fs::write(
        &path,
        format!("output_dir = {}\n{body}", dir.join("out").display()),
    )
    .unwrap();
    path.display().to_string()
}

fn run(args: &[&str]) -> i32 {
    main_with_args(std::iter::once("homestop").chain(args.iter().copied()))
}

#[test]
fn validate_without_simulation_settings_is_skipped() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "r0 = 0.08\n");
    assert_eq!(run(&["validate", &cfg]), 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("out/validation.json")).unwrap())
            .unwrap();
    assert_eq!(report["status"], "skipped");
}

#[test]
fn bad_configuration_exits_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let unknown = write_config(tmp.path(), "no_such_key = 1\n");
    assert_eq!(run(&["solve", &unknown]), 2);
    let infeasible = write_config(tmp.path(), "chi = 0.3\ngamma = 0.4\n");
    assert_eq!(run(&["solve", &infeasible]), 2);
    assert_eq!(
        run(&[
            "solve",
            &tmp.path().join("missing.conf").display().to_string()
        ]),
        2
    );
    assert_eq!(run(&["frobnicate"]), 2);
}

#[test]
fn sweep_writes_one_row_per_step() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    assert_eq!(
        run(&["sweep", &cfg, "--param", "rho", "--from", "0.005", "--to", "0.02", "--steps", "4"]),
        0
    );
    let text = fs::read_to_string(tmp.path().join("out/sweep_rho.csv")).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",ok")));
}
