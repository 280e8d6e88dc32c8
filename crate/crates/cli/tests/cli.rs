use std::path::Path;
use std::process::{Command, Output};

use inopo_cli::config::read_config;

fn inopo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_inopo"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Column header and numeric rows of a CSV output.
fn table(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

#[test]
fn steady_sweep_example() {
    let text = stdout(&inopo(&[
        "steady-sweep",
        "--mu1",
        "0.2",
        "--mu0",
        "0:0.01:3",
    ]));
    let (h, rows) = table(&text);
    assert_eq!(rows.len(), 301);
    for name in ["mu0", "x0s", "x0s_linear", "x0s_quadratic"] {
        col(&h, name);
    }
    let (x0, lin) = (col(&h, "x0s"), col(&h, "x0s_linear"));
    let row = &rows[30];
    assert!((row[0] - 0.3).abs() < 1e-12);
    assert!((row[lin] - row[x0]).abs() / row[x0] < 0.01);
    assert!(rows.iter().all(|r| r[x0] < 2.0));
}

#[test]
fn linear_spectra_example() {
    let text = stdout(&inopo(&["linear-spectra", "--mu0", "0.6", "--mu1", "0.2"]));
    let (h, rows) = table(&text);
    let (w, x, y) = (col(&h, "omega"), col(&h, "s_xminus"), col(&h, "s_yplus"));
    assert_eq!(rows.len(), 1001);
    assert_eq!(rows[0][w], 0.0);
    assert!(rows
        .iter()
        .all(|r| r[x] > 0.0 && r[x] < 1.0 && r[y] > 0.0 && r[y] < 1.0));
    assert!(rows.last().unwrap()[y] > rows[0][y]);
}

#[test]
fn power_example() {
    let text = stdout(&inopo(&[
        "power", "--pth-mw", "20", "--mu0", "0.6", "--mu1", "0.2",
    ]));
    let (h, rows) = table(&text);
    assert_eq!(rows.len(), 1);
    assert!((rows[0][col(&h, "p0_mw")] - 7.2).abs() < 1e-9);
    assert!((rows[0][col(&h, "p1_mw")] - 0.8).abs() < 1e-9);
}

#[test]
fn header_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.csv");
    let args = [
        "criteria",
        "--mu1",
        "0,0.1",
        "--omega",
        "0:0.5:2",
        "-o",
        first.to_str().unwrap(),
    ];
    assert!(inopo(&args).status.success());
    let text = std::fs::read_to_string(&first).unwrap();
    assert!(text.starts_with("# inopo "));
    let cfg = read_config(&text).unwrap();
    assert_eq!(cfg.params.mu1.values(), &[0.0, 0.1]);

    // Re-running from the echoed header reproduces the data exactly.
    let second = dir.path().join("b.csv");
    let out = inopo(&[
        "--config",
        first.to_str().unwrap(),
        "-o",
        second.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let again = std::fs::read_to_string(&second).unwrap();
    assert_eq!(
        read_config(&again).unwrap().output.path.as_deref(),
        Some(Path::new(&second))
    );
    let data = |t: &str| {
        t.lines()
            .filter(|l| !l.starts_with('#'))
            .map(String::from)
            .collect::<Vec<_>>()
    };
    assert_eq!(data(&text), data(&again));
}

#[test]
fn toml_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(
        &path,
        "command = \"power\"\n[params]\nmu0 = 0.5\nmu1 = \"0.1\"\n[power]\npth_mw = 10\n",
    )
    .unwrap();
    let text = stdout(&inopo(&[
        "--config",
        path.to_str().unwrap(),
        "--mu0",
        "0.6",
    ]));
    let (h, rows) = table(&text);
    assert!((rows[0][col(&h, "mu0")] - 0.6).abs() < 1e-15);
    assert!((rows[0][col(&h, "p0_mw")] - 3.6).abs() < 1e-9);
}

#[test]
fn invalid_config_fails_with_field_name() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[sim]\ndtt = 0.1\n").unwrap();
    let out = inopo(&["--config", path.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("dtt"));

    let out = inopo(&["power", "--w1-over-w0", "0.7", "--w2-over-w0", "0.7"]);
    assert!(!out.status.success());

    let out = inopo(&["simulate", "--burn-in", "500"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("burn_in"));
}

#[test]
fn figure_presets_select_commands() {
    let text = stdout(&inopo(&["--figure", "7b", "--x", "1.5:0.1:2.5"]));
    let (h, rows) = table(&text);
    assert_eq!(rows.len(), 11);
    let (p5, approx) = (col(&h, "p5"), col(&h, "approximation"));
    assert!(rows[5][p5].abs() < 1e-12 && rows[5][approx].abs() < 1e-12);
    assert!(text.contains("# figure 7b"));

    let text = stdout(&inopo(&["--figure", "4b"]));
    let (h, rows) = table(&text);
    assert_eq!(rows.len(), 315);
    let (d, e) = (col(&h, "duan_violated"), col(&h, "epr_violated"));
    assert!(rows.iter().any(|r| r[d] == 1.0 && r[e] == 0.0));
}

#[test]
fn small_simulation_in_json() {
    let out = inopo(&[
        "simulate",
        "--trajectories",
        "4",
        "--t-total",
        "30",
        "--burn-in",
        "5",
        "--segment",
        "1024",
        "--threads",
        "1",
        "--format",
        "json",
    ]);
    let doc: serde_json::Value = serde_json::from_slice(&stdout(&out).into_bytes()).unwrap();
    assert_eq!(doc["stats"]["trajectories"], 4);
    assert_eq!(doc["stats"]["diverged"], 0);
    assert_eq!(doc["config"]["sim"]["n_trajectories"], 4);
    let cols = doc["columns"].as_array().unwrap();
    assert!(cols.iter().any(|c| c == "s_yplus_se"));
    assert!(!doc["rows"].as_array().unwrap().is_empty());
}

#[test]
fn runaway_simulation_exits_nonzero_naming_parameters() {
    let out = inopo(&[
        "simulate",
        "--mu0",
        "3",
        "--mu1",
        "0.2",
        "--g",
        "2",
        "--dt",
        "0.05",
        "--t-total",
        "60",
        "--burn-in",
        "5",
        "--trajectories",
        "8",
        "--segment",
        "256",
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("mu0 = 3"), "{err}");
}
