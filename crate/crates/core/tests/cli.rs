use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_faraday-edr"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("spawn")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(1).map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

#[test]
fn sweep_g_quarter_turn_row() {
    let o = run(&["sweep-g", "--alpha2", "6", "--start", "0.02", "--stop", "pi", "--steps", "120"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows = rows(&text);
    assert_eq!(rows.len(), 120);
    let nearest = rows
        .iter()
        .min_by(|a, b| {
            let da = (a[1].parse::<f64>().unwrap() - std::f64::consts::FRAC_PI_4).abs();
            let db = (b[1].parse::<f64>().unwrap() - std::f64::consts::FRAC_PI_4).abs();
            da.total_cmp(&db)
        })
        .unwrap();
    let eps2: f64 = nearest[5].parse().unwrap();
    assert!((eps2 - 1.0 / 6.0).abs() < 1e-3, "eps2 {eps2}");
}

#[test]
fn singular_row_is_marked() {
    let o = run(&["sweep-g", "--start", "pi/2", "--stop", "2", "--steps", "2"]);
    assert!(o.status.success());
    let rows = rows(&stdout(&o));
    assert_eq!(rows[0][5], "SINGULAR");
    assert!(rows[0][13].contains("SINGULAR"));
    // eta2 stays finite at the singular point
    assert!(rows[0][7].parse::<f64>().unwrap() > 1.9);
}

#[test]
fn wia_rows_sit_on_the_frontier() {
    let o = run(&["sweep-chi", "--model", "wia", "--start", "0.05", "--stop", "0.25", "--steps", "5"]);
    assert!(o.status.success());
    for row in rows(&stdout(&o)) {
        let hak: f64 = row[9].parse().unwrap();
        assert!((hak - 1.0).abs() <= 1e-12, "hak {hak}");
        assert!(row[13].contains("HAK_BOUNDARY"), "flags {}", row[13]);
    }
}

#[test]
fn tradeoff_writes_csv_and_plot_script() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("curve.csv");
    let o = run(&["tradeoff", "--model", "psa", "--output", csv.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.contains("hak-bound") && text.contains("bot-bound"));
    let script = std::fs::read_to_string(dir.path().join("curve.plot.py")).unwrap();
    assert!(script.contains("curve.csv"));
}

#[test]
fn usage_errors_exit_1() {
    for args in [
        &["sweep-g", "--steps", "1"][..],
        &["sweep-g", "--start", "2", "--stop", "1"],
        &["sweep-g", "--model", "exact-coherent", "--r", "0.3"],
        &["sweep-chi", "--model", "exact-coherent"],
        &["bogus"],
    ] {
        assert_eq!(run(args).status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn resource_errors_exit_2() {
    let o = run(&["sweep-g", "--alpha2", "5000", "--steps", "2"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["sweep-g", "--steps", "2", "--output", "/nonexistent-dir/out.csv"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_passes_and_fails_as_expected() {
    let o = run(&["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("all 5 suites pass"));

    let o = run(&["verify", "--alpha2", "6", "--cutoff", "4"]);
    assert_eq!(o.status.code(), Some(3));
    let all = format!("{}{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
    assert!(all.contains("norm deficit"), "{all}");
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "alpha2 = 2\nsteps = 3\n").unwrap();
    let o = run(&["sweep-g", "--config", cfg.to_str().unwrap(), "--steps", "4"]);
    assert!(o.status.success());
    let rows = rows(&stdout(&o));
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r[3].parse::<f64>().unwrap() == 2.0));
}

#[test]
fn moments_report_squeezed_variances() {
    let o = run(&["moments", "--model", "exact-squeezed", "--alpha2", "9", "--r", "0.3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let col = |name: &str| row[header.iter().position(|h| *h == name).unwrap()].parse::<f64>().unwrap();
    assert!((col("sz_var") - 9.0 * 0.6f64.exp()).abs() < 1e-6);
}
