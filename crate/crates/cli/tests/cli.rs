use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_panelgmrf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SIM: &str = r#"
seed = 11
spatial_max_edge = 0.005

[[windows]]
site = 1
location = [0.04, 0.05]
start_day = 1
days = 7
series = 2

[[windows]]
site = 2
location = [0.06, 0.045]
start_day = 50
days = 7
series = 2

[[windows]]
site = 3
location = [0.05, 0.06]
start_day = 1
days = 40
"#;

fn fit_toml(max_evals: usize) -> String {
    format!(
        "lattice_resolution = 8\n\n[model]\nmax_edge = 0.01\n\n[optimizer]\nschedule = [1e-5]\nmax_evals = {max_evals}\n"
    )
}

fn simulate_into(dir: &Path) -> String {
    let config = dir.join("sim.toml");
    fs::write(&config, SIM).unwrap();
    let data = dir.join("data.csv");
    let truth = dir.join("truth.toml");
    let o = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        data.to_str().unwrap(),
        "--truth",
        truth.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains(&format!("wrote {} rows", (7 * 2 * 2 + 40) * 24)));
    assert!(fs::read_to_string(truth).unwrap().contains("trend"));
    data.to_str().unwrap().to_string()
}

#[test]
fn penalty_prints_lower_triangle() {
    let o = run(&["penalty", "--order", "1", "--n", "4", "--cyclic"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "row,col,value");
    assert!(lines.contains(&"1,1,2") && lines.contains(&"4,1,-1") && lines.contains(&"2,1,-1"));
    assert!(!lines.contains(&"1,4,-1"));
    assert_eq!(lines.len(), 1 + 4 + 4);

    let weekly = run(&["penalty", "--weekly"]);
    assert!(weekly.status.success());
    assert!(stdout(&weekly).lines().any(|l| l == "168,168,12"));
}

#[test]
fn penalty_rejects_bad_order() {
    let o = run(&["penalty", "--order", "3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error: "));
}

#[test]
fn basis_prints_cyclic_columns() {
    let o = run(&["basis", "--points", "11"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,b1,b2,b3,b4,b5,b6,b7"));
    for line in lines.clone() {
        let sum: f64 = line.split(',').skip(1).map(|v| v.parse::<f64>().unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-10);
    }
    assert_eq!(lines.count(), 11);
    let open = run(&["basis", "--open", "--points", "5"]);
    assert_eq!(stdout(&open).lines().next().unwrap().split(',').count(), 11);
}

#[test]
fn fit_plot_and_mesh_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate_into(dir.path());
    let config = dir.path().join("fit.toml");
    fs::write(&config, fit_toml(60)).unwrap();

    let mesh = dir.path().join("mesh.txt");
    let o = run(&["mesh", "--data", &data, "--max-edge", "0.01", "--out", mesh.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("vertices"));
    assert!(mesh.exists());

    let archives: Vec<_> = ["a", "b"].iter().map(|n| dir.path().join(n)).collect();
    for out in &archives {
        let o = run(&["fit", "--data", &data, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        // a 60-evaluation budget is too small to converge
        assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
        assert!(stderr(&o).contains("did not converge"));
        assert!(stdout(&o).contains("log marginal likelihood"));
    }
    let names: Vec<String> = {
        let mut v: Vec<String> = fs::read_dir(&archives[0])
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        v.sort();
        v
    };
    assert!(names.contains(&"metadata.toml".to_string()));
    assert!(names.contains(&"trend_site_3.csv".to_string()));
    for name in &names {
        assert_eq!(
            fs::read(archives[0].join(name)).unwrap(),
            fs::read(archives[1].join(name)).unwrap(),
            "{name} differs between runs"
        );
    }

    let archive = archives[0].to_str().unwrap();
    for (what, files) in [("hrofweek", 1), ("dayofweek", 1), ("annual", 1), ("spatial", 2)] {
        let o = run(&["plot", "--archive", archive, "--what", what]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert_eq!(stdout(&o).lines().count(), files);
    }
    assert!(archives[0].join("plots").join("spatial_sd.svg").exists());

    let o = run(&["plot", "--archive", archive, "--what", "weekly"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error: ") && stderr(&o).contains("weekly"));
}

#[test]
fn fit_converges_with_enough_budget() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate_into(dir.path());
    let config = dir.path().join("fit.toml");
    fs::write(&config, fit_toml(5000)).unwrap();
    let out = dir.path().join("archive");
    let o = run(&["-q", "fit", "--data", &data, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(fs::read_to_string(out.join("metadata.toml")).unwrap().contains("converged = true"));
}

#[test]
fn missing_input_is_a_one_line_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["fit", "--data", "/nonexistent/data.csv", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr(&o).lines().count(), 1);

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "unknown_key = 1\n").unwrap();
    let o = run(&["simulate", "--config", bad.to_str().unwrap(), "--out", dir.path().join("x.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}
