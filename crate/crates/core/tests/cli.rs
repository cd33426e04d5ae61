use std::fs;
use std::process::Command;

use nedelec_mg::experiment::{read_csv, run_table, ExperimentConfig, OutputFormat, CSV_COLUMNS};
use nedelec_mg::{CoefficientField, Domain, SmootherKind};

fn mgnd() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mgnd"));
    c.env("RUST_LOG", "off").stderr(std::process::Stdio::null());
    c
}

#[test]
fn single_cell_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cell.csv");
    let status = mgnd()
        .args(["--max-level", "1", "--steps", "1", "--alpha-black", "1", "--smoother", "vertex"])
        .args(["--format", "csv", "--output"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with(&CSV_COLUMNS.join(",")));
    let rows = read_csv(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 1);
    let r = &rows[0];
    assert_eq!((r.domain, r.smoother, r.k, r.m), (Domain::Cube, SmootherKind::Vertex, 1, 1));
    assert!((r.rho - 64.0 / 81.0).abs() < 1e-6);
    assert!(r.converged);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "domain = fichera\nsmoother = vertex\nmax-level = 1\nsteps = 2\nalpha-black = 10\n").unwrap();
    let out = dir.path().join("out.csv");
    let status = mgnd().arg("--config").arg(&cfg).args(["--smoother", "edge", "--output"]).arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let rows = read_csv(fs::File::open(&out).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!((rows[0].domain, rows[0].smoother, rows[0].m), (Domain::Fichera, SmootherKind::Edge, 2));
    assert_eq!(rows[0].alpha_b, 10.0);
}

#[test]
fn configuration_errors_exit_with_one() {
    for args in [
        vec!["--domain", "torus"],
        vec!["--steps", "0"],
        vec!["--beta-black", "0"],
        vec!["--max-level", "9"],
    ] {
        let status = mgnd().args(&args).status().unwrap();
        assert_eq!(status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn unconverged_cells_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.md");
    let status = mgnd()
        .args(["--max-level", "1", "--steps", "1", "--alpha-black", "1", "--max-iterations", "2"])
        .args(["--format", "markdown", "--output"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(fs::read_to_string(&out).unwrap().contains('*'));
}

#[test]
fn emitting_twice_is_byte_identical() {
    let cfg = ExperimentConfig {
        max_level: 1,
        steps: vec![1, 2],
        coefficient_sets: vec![CoefficientField::new(0.1, 1.0, 1.0, 1.0).unwrap()],
        jobs: 1,
        ..ExperimentConfig::default()
    };
    let report = run_table(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for format in [OutputFormat::Csv, OutputFormat::Markdown, OutputFormat::JsonLines] {
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        report.emit(format, Some(&a)).unwrap();
        report.emit(format, Some(&b)).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    }
}

#[test]
fn same_seed_same_numbers() {
    let cfg = ExperimentConfig {
        domain: Domain::Fichera,
        max_level: 1,
        steps: vec![1],
        coefficient_sets: vec![CoefficientField::new(100.0, 1.0, 1.0, 1.0).unwrap()],
        seed: 11,
        jobs: 1,
        ..ExperimentConfig::default()
    };
    let (a, b) = (run_table(&cfg).unwrap(), run_table(&cfg).unwrap());
    assert_eq!(a.cells[0].rho.to_bits(), b.cells[0].rho.to_bits());
    assert_eq!(a.cells[0].iterations, b.cells[0].iterations);
}
