use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn wiplab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wiplab")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn flowers_rates_table() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "[system]\nkind = \"flowers\"\n[rates]\ntable = [4]\n");
    let out = dir.path().join("out");
    let o = wiplab(&["rates", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("rates.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "system,gamma,r,kappa,kappa_value,kappa_w1,a_star,b_star,prokhorov,degenerate");
    assert!(lines[1].starts_with("flowers,2,1,3/34,"), "{}", lines[1]);
    assert!(lines[2].ends_with(",0,degenerate"), "{}", lines[2]);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("rates.json")).unwrap()).unwrap();
    assert_eq!(json["rows"][0]["kappa"]["exact"], "3/34");
    assert_eq!(json["provenance"]["seed"], 20_240_601);
}

#[test]
fn lsv_third_gives_the_flowers_row() {
    let dir = TempDir::new().unwrap();
    let run = |kind: &str, extra: &str| {
        let cfg = write_config(dir.path(), &format!("[system]\nkind = \"{kind}\"\n{extra}"));
        let out = dir.path().join(kind);
        let o = wiplab(&["rates", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let csv = fs::read_to_string(out.join("rates.csv")).unwrap();
        csv.lines().nth(1).unwrap().split_once(',').unwrap().1.to_string()
    };
    assert_eq!(run("lsv", "alpha = \"1/3\"\n"), run("flowers", ""));
}

#[test]
fn validation_errors_exit_one_with_field_path() {
    let dir = TempDir::new().unwrap();
    for (text, needle) in [
        ("[grid]\nn = [64, 32]\n", "grid.n"),
        ("[grid]\nn = [2]\n", "grid.n[0]"),
        ("[system]\nkind = \"lsv\"\nalpha = 0.7\n", "system.alpha"),
        ("[solver]\nkind = \"sinkhorn\"\neps = -1.0\n", "solver.eps"),
        ("[grid]\nbogus = 1\n", "bogus"),
    ] {
        let cfg = write_config(dir.path(), text);
        let o = wiplab(&["convergence", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(1), "{text}: {}", stderr(&o));
        assert!(stderr(&o).contains(needle), "{text}: {}", stderr(&o));
    }
    let o = wiplab(&["rates", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--config"));
}

#[test]
fn flowers_cannot_be_simulated() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "[system]\nkind = \"flowers\"\n");
    let o = wiplab(&["convergence", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("system.kind"), "{}", stderr(&o));
}

#[test]
fn exact_solver_limit_exits_three() {
    let dir = TempDir::new().unwrap();
    let o = wiplab(&["convergence", "--m", "600", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(!dir.path().join("convergence.csv").exists());
}

#[test]
fn memory_budget_exits_three() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "[grid]\nn = [64, 128, 256]\nm = 64\n[limits]\nmax_values = 1000\n");
    let o = wiplab(&["blocks", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

const SMALL: &str = "[grid]\nn = [16, 32, 64]\nm = 24\nbootstrap = 4\n[sigma]\nn = 64\nm = 400\n[blocks]\nm = 40\nvariance_m = 1000\n";

#[test]
fn convergence_outputs_and_reproducibility() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let run = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec!["convergence", "--config", &cfg, "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        let o = wiplab(&args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        out
    };
    let a = run("a", &[]);
    let b = run("b", &[]);
    for f in ["convergence.csv", "convergence.json", "convergence.svg"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = fs::read_to_string(a.join("convergence.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("n,m,W_path,se,W_marginal,se"));
    assert_eq!(csv.lines().count(), 4);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("convergence.json")).unwrap()).unwrap();
    assert!(json["slope_path"]["slope"].is_number());
    assert_eq!(json["theory"]["kappa"]["exact"], "4851/20098");

    let c = run("c", &["--seed", "99"]);
    assert_ne!(fs::read(a.join("convergence.csv")).unwrap(), fs::read(c.join("convergence.csv")).unwrap());

    let s = run("s", &["--solver", "sinkhorn", "--eps", "0.05"]);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(s.join("convergence.json")).unwrap()).unwrap();
    assert!(json["solver"].as_str().unwrap().starts_with("sinkhorn"));
}

#[test]
fn blocks_outputs() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = wiplab(&["blocks", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(out.join("blocks.csv")).unwrap();
    let header = rdr.headers().unwrap().clone();
    let col = header.iter().position(|h| h == "residual_max").unwrap();
    let rows: Vec<_> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| &r[col] == "0"));
    assert!(fs::read_to_string(out.join("blocks.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(wiplab(&["--help"]).status.code(), Some(0));
    assert_eq!(wiplab(&["--version"]).status.code(), Some(0));
    assert_eq!(wiplab(&[]).status.code(), Some(1));
}

#[test]
fn check_writes_manifest_and_flags_budget_overrun() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "[limits]\ncheck_scale = \"quick\"\ncheck_seconds = 1e-6\n");
    let o = wiplab(&["check", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("check.json")).unwrap()).unwrap();
    assert_eq!(manifest["failed"], 0);
    assert!(manifest["checks"].as_array().unwrap().len() >= 16);
    let runtime: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("check_runtime.json")).unwrap()).unwrap();
    assert_eq!(runtime["within_budget"], false);
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        wiplab::config::ExperimentConfig::from_toml(&text, &wiplab::config::Overrides::default())
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert!(seen >= 4);
}
