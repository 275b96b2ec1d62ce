use std::path::Path;

use clap::Parser;
use liouv::cli::{self, output::parse_result, Args, Command, Config};

const SMALL: &str = "
[phase_space]
n_nuclei = 1
g_x = 4
h_x = 0.5
d_x = 1
g_p = 4
h_p = 0.5
d_p = 1
charges = 1.0
softening = 2.0
fixed_charges = -1.0
fixed_positions = 0.0

[evolve]
t = 0.0
samples = 3
eps = 1e-4

[alchemy]
n_lambda = 2
t_eq = 0.5
eps = 0.05
estimation = qae
";

fn args(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Args {
    let mut v = vec![
        "liouv".to_string(),
        cmd.to_string(),
        "--config".into(),
        config.display().to_string(),
        "--out".into(),
        out.display().to_string(),
    ];
    v.extend(extra.iter().map(|s| s.to_string()));
    Args::try_parse_from(v).unwrap()
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("run.conf");
    std::fs::write(&p, text).unwrap();
    p
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| {
            rec.unwrap()
                .iter()
                .map(|s| s.parse::<f64>().unwrap())
                .collect()
        })
        .collect();
    (header, rows)
}

#[test]
fn evolve_at_zero_time_writes_the_initial_row() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), SMALL);
    let report = cli::run(&args("evolve", &conf, dir.path(), &[])).unwrap();
    assert!(report.passed);
    let (header, rows) = read_csv(&dir.path().join("trajectory.csv"));
    assert_eq!(
        header,
        ["t", "mean_x0_0", "mean_p0_0", "norm", "success_probability"]
    );
    assert_eq!(rows.len(), 1);
    let spec = Config::parse(SMALL).unwrap().phase_space().unwrap();
    let centers: Vec<f64> = [spec.x, spec.p]
        .iter()
        .map(|g| g.values()[g.g / 2])
        .collect();
    assert!((rows[0][1] - centers[0]).abs() < 0.3 && (rows[0][2] - centers[1]).abs() < 0.3);
    assert_eq!(rows[0][3], 1.0);
}

#[test]
fn evolve_output_is_bit_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), &SMALL.replace("t = 0.0", "t = 0.6"));
    let mut outputs = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("run{run}"));
        cli::run(&args("evolve", &conf, &out, &["--seed", "3"])).unwrap();
        outputs.push(std::fs::read(out.join("trajectory.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let (_, rows) = read_csv(&dir.path().join("run0/trajectory.csv"));
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert!((r[3] - 1.0).abs() <= 1e-4 + 1e-10);
    }
}

#[test]
fn thermo_with_identical_systems_gives_zero() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), SMALL);
    cli::run(&args("thermo", &conf, dir.path(), &[])).unwrap();
    let text = std::fs::read_to_string(dir.path().join("thermo.txt")).unwrap();
    let kv = parse_result(&text);
    let get = |k: &str| {
        kv.iter()
            .find(|(a, _)| a == k)
            .unwrap()
            .1
            .parse::<f64>()
            .unwrap()
    };
    assert!(get("delta_f").abs() <= 0.05, "{text}");
    for key in [
        "ledger.eps_L",
        "ledger.eps_delta",
        "ledger.eps_disc",
        "ledger.eps_qae",
        "p_hat",
        "t_eq",
        "n_lambda",
    ] {
        assert!(kv.iter().any(|(k, _)| k == key), "missing {key}");
    }
    let (header, rows) = read_csv(&dir.path().join("lambdas.csv"));
    assert_eq!(&header[..3], ["lambda", "expectation", "block_fidelity"]);
    assert_eq!(rows.len(), 2);
}

#[test]
fn thermo_reports_a_nonzero_difference_for_distinct_charges() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(
        dir.path(),
        &format!("{SMALL}\n[system_b.phase_space]\ncharges = 2.0\n")
            .replace("estimation = qae", "estimation = ideal"),
    );
    cli::run(&args("thermo", &conf, dir.path(), &["--mode", "semantic"])).unwrap();
    let kv = parse_result(&std::fs::read_to_string(dir.path().join("thermo.txt")).unwrap());
    let df: f64 = kv
        .iter()
        .find(|(k, _)| k == "delta_f")
        .unwrap()
        .1
        .parse()
        .unwrap();
    assert!(df < -0.1, "{df}");
}

#[test]
fn verify_passes_on_the_shipped_default() {
    let dir = tempfile::tempdir().unwrap();
    let a = Args::try_parse_from([
        "liouv",
        "verify",
        "--out",
        &dir.path().display().to_string(),
    ])
    .unwrap();
    assert!(a.config.is_none());
    let report = cli::run(&a).unwrap();
    let text = std::fs::read_to_string(dir.path().join("verify.txt")).unwrap();
    assert!(report.passed, "{text}");
    assert!(text.contains("status: pass"));
}

#[test]
fn strict_parsing_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), &SMALL.replace("softening", "softness"));
    let err = cli::run(&args("evolve", &conf, dir.path(), &[])).unwrap_err();
    assert!(err.to_string().contains("unknown key 'softness'"), "{err}");
}

#[test]
fn dimension_cap_names_the_product() {
    let dir = tempfile::tempdir().unwrap();
    let big = SMALL
        .replace("g_x = 4", "g_x = 300")
        .replace("g_p = 4", "g_p = 300");
    let conf = write_config(dir.path(), &big);
    let err = cli::run(&args("dump", &conf, dir.path(), &[]))
        .unwrap_err()
        .to_string();
    assert!(err.contains("90000"), "{err}");
}

#[test]
fn cost_poly_dump_and_grid_scan_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), cli::DEFAULT_CONFIG);
    for cmd in ["cost", "poly", "dump", "grid-scan"] {
        assert!(cli::run(&args(cmd, &conf, dir.path(), &[])).unwrap().passed);
    }
    let (h, rows) = read_csv(&dir.path().join("cost.csv"));
    assert_eq!(h, ["alpha", "t", "eps", "hamsim", "angleless", "ratio"]);
    assert!(rows
        .iter()
        .any(|r| r[0] == 2.0 && r[1] == 5.0 && r[2] == 1e-6 && r[3] == 207.0));
    assert!(std::fs::read_to_string(dir.path().join("cost.md"))
        .unwrap()
        .contains("scaling_only"));
    let (h, rows) = read_csv(&dir.path().join("poly.csv"));
    assert_eq!(h, ["x", "target_re", "target_im", "poly_re", "poly_im"]);
    assert!(rows
        .iter()
        .all(|r| (r[1] - r[3]).hypot(r[2] - r[4]) <= 1e-6));
    let (h, rows) = read_csv(&dir.path().join("dump.csv"));
    assert_eq!(h, ["row", "col", "re", "im"]);
    assert_eq!(rows.len(), 576 * 576);
    let (_, rows) = read_csv(&dir.path().join("grid_scan.csv"));
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().all(|r| r[3] <= r[4]));
    assert_eq!(
        Command::GridScan,
        args("grid-scan", &conf, dir.path(), &[]).command
    );
}
