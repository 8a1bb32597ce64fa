//! End-to-end runs of the `tsl` binary.

use std::process::{Command, Output};
use tsl::bubbles::Bubble;
use tsl::cli::composition_triples;
use tsl::grid::{write_snapshot, GridField};
use tsl::report::{parse_report, Status};

fn tsl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsl"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8 output")
}

#[test]
fn constants_report_contains_the_sharp_constant() {
    let o = tsl(&["constants"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = stdout(&o);
    assert!(text.contains("3.544907701811"));
    let r = parse_report(&text).unwrap();
    assert_eq!(r.status, Status::Ok);
    assert!((r.derived_f64("reduction_constant").unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn csv_has_one_row_per_series_point() {
    let o = tsl(&["constants", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("label,x,y"));
    assert_eq!(text.lines().count(), 1 + composition_triples().len());
}

#[test]
fn same_seed_gives_byte_identical_reports() {
    let a = tsl(&["reduction", "--seed", "11"]);
    let b = tsl(&["reduction", "--seed", "11", "--threads", "2"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = tsl(&["reduction", "--seed", "12"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn fit_of_an_exact_bubble_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bubble.tslf");
    let b = Bubble::new(vec![0.75, -0.5], 1.5).unwrap();
    let trace = GridField::sample(|x| b.boundary_value(x), 2, 256, 40.0).unwrap();
    write_snapshot(&trace, std::fs::File::create(&path).unwrap()).unwrap();
    // The Neumann density of a bubble is U^p on the boundary.
    let dpath = dir.path().join("density.tslf");
    let density = trace.map(|v| v.powi(3)).unwrap();
    write_snapshot(&density, std::fs::File::create(&dpath).unwrap()).unwrap();
    let out = dir.path().join("fit.json");
    let o = tsl(&[
        "fit",
        "--set",
        &format!("input={}", path.display()),
        "--set",
        &format!("density_input={}", dpath.display()),
        "--set",
        "nu=1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = parse_report(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(r.derived_f64("distance").unwrap() <= 1e-6);
    let fitted = &r.derived["bubbles"][0];
    assert!((fitted["lambda"].as_f64().unwrap() - 1.5).abs() < 1e-6);
    assert!((fitted["z"][0].as_f64().unwrap() - 0.75).abs() < 1e-6);
}

#[test]
fn trace_only_bubble_input_reports_truncation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bubble.tslf");
    let trace = GridField::sample(|x| Bubble::standard(3).boundary_value(x), 2, 64, 10.0).unwrap();
    write_snapshot(&trace, std::fs::File::create(&path).unwrap()).unwrap();
    let o = tsl(&[
        "fit",
        "--set",
        &format!("input={}", path.display()),
        "--set",
        "nu=1",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mean correction"));
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scan.cfg");
    std::fs::write(
        &cfg,
        "# quotient scan\nexperiment = quotient-scan\nn = 3\nepsilons = 0.01, 0.02, 0.04, 0.08\n",
    )
    .unwrap();
    let o = tsl(&[
        "quotient-scan",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "direction=symmetric",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = parse_report(&stdout(&o)).unwrap();
    assert!((r.derived_f64("limit").unwrap() - 0.4).abs() < 1e-3);
    let wrong = tsl(&["fit", "--config", cfg.to_str().unwrap()]);
    assert_eq!(wrong.status.code(), Some(1));
}

#[test]
fn invalid_settings_list_every_violation() {
    let o = tsl(&[
        "dual",
        "--set",
        "grid_n=100",
        "--set",
        "box_l=-1",
        "--set",
        "colour=red",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("grid_n"), "{err}");
    assert!(err.contains("box_l"), "{err}");
    assert!(err.contains("colour"), "{err}");
}

#[test]
fn failing_check_exits_with_two() {
    // An unreachable floor on r/d fails the ratio check.
    let o = tsl(&["fit", "--set", "ratio_floor=1e9"]);
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = parse_report(&stdout(&o)).unwrap();
    assert_eq!(r.status, Status::Inconclusive);
}
