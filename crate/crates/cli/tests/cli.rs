use std::path::{Path, PathBuf};
use std::process::Command;

use parisi_cli::commands::{BoundRow, FixedPointRow, PdeRow, ScanRow};
use parisi_cli::report::{parse_csv, sha256_hex, Manifest, MANIFEST};
use parisi_core::simulator::Observation;

fn parisi(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_parisi")).args(args).output().expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into(), String::from_utf8_lossy(&out.stderr).into())
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("parisi-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn only_file(dir: &Path, prefix: &str, ext: &str) -> PathBuf {
    let mut hits: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| {
            let name = p.file_name().unwrap().to_string_lossy();
            name.starts_with(prefix) && name.ends_with(ext)
        })
        .collect();
    assert_eq!(hits.len(), 1, "{prefix}*{ext} in {}", dir.display());
    hits.remove(0)
}

fn dir_digest(dir: &Path) -> Vec<(String, String)> {
    let mut files: Vec<(String, String)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), sha256_hex(&std::fs::read(&p).unwrap()))
        })
        .collect();
    files.sort();
    files
}

const FAST: &[&str] = &["--override", "search_points=257", "--override", "grid_points=1025", "--override", "starts=8"];

fn with_fast<'a>(args: &[&'a str]) -> Vec<&'a str> {
    let mut v = args.to_vec();
    v.extend_from_slice(FAST);
    v
}

#[test]
fn config_errors_exit_with_two() {
    let (code, _, err) = parisi(&["minimize", "--override", "mixture=[]"]);
    assert_eq!(code, 2);
    assert!(err.contains("all coefficients are zero"), "{err}");
    assert_eq!(parisi(&["no-such-command"]).0, 2);
    assert_eq!(parisi(&["minimize", "--override", "h_grid=[2.0, 1.0]"]).0, 2);
    let (code, _, err) = parisi(&["simulate", "chaos", "--override", "n_spins=40"]);
    assert_eq!(code, 2);
    assert!(err.contains("budget"), "{err}");
    assert_eq!(parisi(&["minimize", "--config", "/definitely/not/here.toml"]).0, 2);
}

#[test]
fn help_exits_cleanly() {
    let (code, out, _) = parisi(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("gt-bound"));
}

#[test]
fn solve_pde_is_byte_identical_across_runs() {
    let a = scratch("pde");
    let args = ["solve-pde", "--out", a.to_str().unwrap(), "--override", "gamma=[[0.0, 0.0], [0.5, 2.0]]", "--override", "grid_points=513"];
    assert_eq!(parisi(&args).0, 0);
    let first = dir_digest(&a);
    std::fs::remove_dir_all(&a).unwrap();
    assert_eq!(parisi(&args).0, 0);
    assert_eq!(dir_digest(&a), first);
    let rows: Vec<PdeRow> = parse_csv(&std::fs::read(only_file(&a, "solve-pde-", ".csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 513 * 3);
    let manifest: Manifest = serde_json::from_slice(&std::fs::read(a.join(MANIFEST)).unwrap()).unwrap();
    assert_eq!(manifest.files.len(), 2);
    assert_eq!(manifest.configs.len(), 1);
}

#[test]
fn config_file_and_seeds() {
    let dir = scratch("seeds");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, "n_spins = 8\nsamples = 5\nt = 0.5\nh = 0.0\nseeds = [3, 4]\n").unwrap();
    let out = dir.join("out");
    assert_eq!(parisi(&["simulate", "chaos", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).0, 0);
    let names: Vec<String> = dir_digest(&out).into_iter().map(|(n, _)| n).collect();
    assert_eq!(names.iter().filter(|n| n.ends_with("-3.csv") || n.ends_with("-4.csv")).count(), 2);
    assert!(names.iter().any(|n| n.ends_with("-merged.json")));
    let rows: Vec<Observation> = parse_csv(&std::fs::read(only_file(&out, "simulate-chaos-", "-3.csv")).unwrap()).unwrap();
    assert_eq!(rows.iter().filter(|r| r.quantity == "r12").count(), 5);
}

#[test]
fn fixed_point_without_field_is_zero() {
    let dir = scratch("fp");
    let args = with_fast(&["fixed-point", "--out", dir.to_str().unwrap(), "--override", "h=0.0"]);
    assert_eq!(parisi(&args).0, 0);
    let rows: Vec<FixedPointRow> = parse_csv(&std::fs::read(only_file(&dir, "fixed-point-", ".csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 21);
    assert!(rows.iter().all(|r| r.q_th == 0.0));
}

#[test]
fn scan_h_rows_and_monotone_energy() {
    let dir = scratch("scan");
    assert_eq!(parisi(&with_fast(&["scan-h", "--out", dir.to_str().unwrap()])).0, 0);
    let rows: Vec<ScanRow> = parse_csv(&std::fs::read(only_file(&dir, "scan-h-", ".csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.windows(2).all(|w| w[1].e <= w[0].e + 2e-3), "{rows:?}");
}

#[test]
fn gt_bound_schema() {
    let dir = scratch("gt");
    let mut args = with_fast(&["gt-bound", "--out", dir.to_str().unwrap()]);
    args.extend(["--override", "grid_points_2d=129", "--override", "lambda_points=5", "--override", "q_points=5"]);
    assert_eq!(parisi(&args).0, 0);
    let path = only_file(&dir, "gt-bound-", ".csv");
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), "q,lambda_best,Lambda,margin,candidate_used");
    let rows: Vec<BoundRow> = parse_csv(text.as_bytes()).unwrap();
    assert!(!rows.is_empty() && rows.len() <= 5);
}
