use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_tailselect"));
    c.env_remove("TAILSELECT_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_config(dir: &Path, trials: usize) -> std::path::PathBuf {
    let path = dir.join("cfg.json");
    let text = format!(
        r#"{{
            "scenario": "setup1_pareto",
            "methods": [
                {{"id": "tiro", "policy": "tiro"}},
                {{"id": "gj_nu2s", "policy": "gj", "nu": {{"kind": "mean_plus_sigmas", "c": 2}}}}
            ],
            "budgets": [1000, 1200],
            "trials": {trials},
            "base_seed": 5,
            "parallelism": 2,
            "output": "{}"
        }}"#,
        dir.join("pfs.csv").display()
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn help_lists_every_subcommand() {
    let o = run(&["--help"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for cmd in ["scenarios", "rateopt", "trace", "experiment", "plot"] {
        assert!(text.contains(cmd), "help lacks {cmd}");
    }
    let o = run(&["trace", "--help"]);
    for flag in ["--scenario", "--policy", "--T", "--seed", "--trace-out", "--nu"] {
        assert!(stdout(&o).contains(flag), "trace help lacks {flag}");
    }
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["bogus"]).status.code(), Some(2));
    assert_eq!(run(&["rateopt", "--betas", "1,0"]).status.code(), Some(2));
    assert_eq!(run(&["rateopt", "--betas", "1"]).status.code(), Some(2));
    assert_eq!(run(&["rateopt", "--scenario", "nope"]).status.code(), Some(2));
    assert_eq!(run(&["trace", "--scenario", "setup1_pareto", "--policy", "gj", "--T", "2000"]).status.code(), Some(2));
    assert_eq!(run(&["trace", "--scenario", "setup1_pareto", "--policy", "tiro", "--T", "10"]).status.code(), Some(2));
}

#[test]
fn scenarios_lists_catalog() {
    let o = run(&["scenarios"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 7);
    assert!(text.contains("setup2_frechet") && text.contains("0/9"));
    let o = run(&["scenarios", "--json"]);
    assert!(stdout(&o).trim_start().starts_with('['));
}

fn parse_rateopt(text: &str) -> (Vec<f64>, Vec<f64>, f64) {
    let mut alpha = Vec::new();
    let mut rates = Vec::new();
    let mut g = f64::NAN;
    for line in text.lines() {
        let f: Vec<&str> = line.split_whitespace().collect();
        if let Some(v) = line.strip_prefix("G* = ") {
            g = v.parse().unwrap();
        } else if f.len() == 4 && f[0].parse::<usize>().is_ok() {
            alpha.push(f[2].parse().unwrap());
            if f[3] != "-" {
                rates.push(f[3].parse().unwrap());
            }
        }
    }
    (alpha, rates, g)
}

#[test]
fn rateopt_tie_warns_and_splits_equally() {
    let o = run(&["rateopt", "--betas", "1,1"]);
    assert!(o.status.success());
    let (alpha, _, g) = parse_rateopt(&stdout(&o));
    assert_eq!(alpha, vec![0.5, 0.5]);
    assert_eq!(g, 0.0);
    assert!(stderr(&o).contains("warning"));
}

#[test]
fn rateopt_matches_grid_oracle() {
    let o = run(&["rateopt", "--betas", "1,2"]);
    let (_, _, g) = parse_rateopt(&stdout(&o));
    let kl = |t: f64, v: f64| t / v - (t / v).ln() - 1.0;
    let pair = |a: f64| {
        let th = 1.0 / (a / 1.0 + (1.0 - a) / 2.0);
        a * kl(th, 1.0) + (1.0 - a) * kl(th, 2.0)
    };
    let grid = (0..=10_000).map(|j| pair(j as f64 * 1e-4)).fold(f64::NEG_INFINITY, f64::max);
    assert!((g - grid).abs() < 1e-8, "{g} vs {grid}");
}

#[test]
fn rateopt_balances_pair_rates() {
    let o = run(&["rateopt", "--betas", "0.25,0.5,0.75"]);
    let (alpha, rates, g) = parse_rateopt(&stdout(&o));
    assert!((alpha.iter().sum::<f64>() - 1.0).abs() < 1e-8);
    assert_eq!(rates.len(), 2);
    assert!((rates[0] - rates[1]).abs() < 1e-5);
    assert!((rates[0] - g).abs() < 1e-5);
}

#[test]
fn trace_is_seed_deterministic_and_honours_env_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let base = ["trace", "--scenario", "setup2_pareto", "--policy", "itiro", "--T", "1500", "--nu", "mu+2s"];
    let o1 = bin().args(base).args(["--seed", "11", "--trace-out"]).arg(&a).output().unwrap();
    let o2 = bin().args(base).env("TAILSELECT_SEED", "11").arg("--trace-out").arg(&b).output().unwrap();
    assert!(o1.status.success() && o2.status.success(), "{}", stderr(&o1));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let csv = std::fs::read_to_string(&a).unwrap();
    assert!(csv.starts_with("t,delta,g_hat,alpha_0"));
    assert_eq!(csv.lines().count(), 1 + 5);
    assert_eq!(
        run(&["trace", "--scenario", "setup1_pareto", "--policy", "tiro", "--T", "1000", "--seed", "1"]).status.code(),
        Some(0)
    );
}

#[test]
fn experiment_is_reproducible_and_plottable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 6);
    let mut outputs = Vec::new();
    for (sub, workers) in [("one", "1"), ("two", "3")] {
        let out = dir.path().join(sub);
        std::fs::create_dir(&out).unwrap();
        let o = bin()
            .args(["experiment", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .args(["--workers", workers])
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("gj_nu2s"));
        outputs.push(std::fs::read(out.join("pfs.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let csv = String::from_utf8(outputs[0].clone()).unwrap();
    assert!(csv.starts_with("method,T,trials,false_count,pfs,stderr\n"));
    assert_eq!(csv.lines().count(), 5);

    let svg = dir.path().join("p.svg");
    let o = bin()
        .args(["plot", "--in"])
        .arg(dir.path().join("one/pfs.csv"))
        .arg("--out")
        .arg(&svg)
        .args(["--logy", "--logx"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("<polyline").count(), 2);
}

#[test]
fn invalid_seed_env_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 4);
    let o = bin().args(["experiment", "--config"]).arg(&cfg).env("TAILSELECT_SEED", "not-a-number").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn experiment_rejects_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 0);
    let o = bin().args(["experiment", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("trials"));
    let o = bin().args(["experiment", "--config"]).arg(dir.path().join("missing.json")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    std::fs::write(dir.path().join("broken.json"), "{ not json").unwrap();
    let o = bin().args(["experiment", "--config"]).arg(dir.path().join("broken.json")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn plot_rejects_empty_or_malformed_csv_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("out.svg");
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "method,T,trials,false_count,pfs,stderr\n").unwrap();
    let o = bin().args(["plot", "--in"]).arg(&empty).arg("--out").arg(&svg).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(!svg.exists());
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "a,b,c\n1,2,3\n").unwrap();
    let o = bin().args(["plot", "--in"]).arg(&bad).arg("--out").arg(&svg).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(!svg.exists());
}

#[test]
fn bundled_figure4_config_is_valid() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/figure4_pareto_small.json");
    let cfg = tailselect::ExperimentConfig::load(&path).unwrap();
    let ids: Vec<&str> = cfg.methods.iter().map(|m| m.id.as_str()).collect();
    assert_eq!(ids, ["tiro", "itiro_nu2s", "itiro_nu3s", "gj_nu2s", "gj_nu3s"]);
}
