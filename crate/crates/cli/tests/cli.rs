use std::path::Path;
use std::process::{Command, Output};

fn jm3d(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jm3d"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn gen_small(dir: &Path, seed: &str) -> Output {
    jm3d(&[
        "gen-data",
        "--out",
        dir.to_str().unwrap(),
        "--parents",
        "2",
        "--subs",
        "2",
        "--per-sub",
        "5",
        "--points",
        "32",
        "--dim",
        "8",
        "--seed",
        seed,
    ])
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let o = jm3d(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn unknown_flag_is_usage_error() {
    assert_eq!(jm3d(&["gradcheck", "--bogus"]).status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    assert_eq!(jm3d(&["--help"]).status.code(), Some(0));
}

#[test]
fn gradcheck_passes() {
    let o = jm3d(&["gradcheck", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("\"record\":\"header\""));
    let line = out.lines().find(|l| l.contains("\"gradcheck\"")).unwrap();
    let v: serde_json::Value = serde_json::from_str(line).unwrap();
    assert!(v["max_rel_error"].as_f64().unwrap() < 1e-4);
}

#[test]
fn gen_data_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(gen_small(a.path(), "3").status.code(), Some(0));
    assert_eq!(gen_small(b.path(), "3").status.code(), Some(0));
    let (da, db) = (dir_bytes(a.path()), dir_bytes(b.path()));
    assert!(!da.is_empty());
    assert_eq!(da, db);
}

#[test]
fn missing_data_is_data_error() {
    let t = tempfile::tempdir().unwrap();
    let o = jm3d(&[
        "pretrain",
        "--data",
        t.path().join("nope").to_str().unwrap(),
        "--out",
        t.path().join("run").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_config_value_is_data_error() {
    let t = tempfile::tempdir().unwrap();
    let cfg = t.path().join("c.toml");
    std::fs::write(&cfg, "no_such_key = 3\n").unwrap();
    let o = jm3d(&["ablate", "--axis", "jma", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn ablate_jma_emits_two_rows() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(gen_small(t.path(), "1").status.code(), Some(0));
    let o = jm3d(&[
        "ablate", "--axis", "jma", "--data", t.path().to_str().unwrap(), "--epochs", "2", "--batch", "4",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.contains("\"record\":\"ablation\"")).count(), 2);
    assert!(out.lines().any(|l| l.starts_with("axis jma")));
}

#[test]
fn pretrain_eval_retrieve_export_pipeline() {
    let t = tempfile::tempdir().unwrap();
    let data = t.path().join("data");
    let run = t.path().join("run");
    assert_eq!(gen_small(&data, "2").status.code(), Some(0));
    let cfg = t.path().join("c.toml");
    std::fs::write(&cfg, "epochs = 7\nbatch_size = 4\nhidden = 16\n").unwrap();
    let (d, r, c) = (data.to_str().unwrap(), run.to_str().unwrap(), cfg.to_str().unwrap());
    let o = jm3d(&["pretrain", "--data", d, "--out", r, "--config", c, "--epochs", "3", "--seed", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    // Flag overrides the config file.
    assert_eq!(out.lines().filter(|l| l.contains("\"record\":\"epoch\"")).count(), 3);
    let header: serde_json::Value = serde_json::from_str(out.lines().next().unwrap()).unwrap();
    assert_eq!(header["seed"], 5);
    assert!(header["config_hash"].as_str().unwrap().len() == 64);
    assert!(std::fs::read_to_string(run.join("config.toml")).unwrap().contains("hidden = 16"));

    let ck = run.join("model.ckpt");
    let ck = ck.to_str().unwrap();
    let e = jm3d(&["eval-zeroshot", "--checkpoint", ck, "--data", d, "--topk", "2"]);
    assert_eq!(e.status.code(), Some(0), "{}", String::from_utf8_lossy(&e.stderr));
    let eo = stdout(&e);
    assert_eq!(eo.lines().filter(|l| l.contains("\"set\":\"dataset\"")).count(), 2);
    assert_eq!(e.stdout, jm3d(&["eval-zeroshot", "--checkpoint", ck, "--data", d, "--topk", "2"]).stdout);

    let bad = jm3d(&["eval-zeroshot", "--checkpoint", ck, "--data", d, "--set", "medium"]);
    assert_eq!(bad.status.code(), Some(2));

    let q = jm3d(&["retrieve", "--checkpoint", ck, "--data", d, "--held-out", "0", "--query", "airplane0_000"]);
    assert_eq!(q.status.code(), Some(0), "{}", String::from_utf8_lossy(&q.stderr));
    assert!(stdout(&q).contains("\"record\":\"query\""));

    let fx = t.path().join("fx");
    let x = jm3d(&["export-features", "--checkpoint", ck, "--data", d, "--out", fx.to_str().unwrap()]);
    assert_eq!(x.status.code(), Some(0), "{}", String::from_utf8_lossy(&x.stderr));
    assert_eq!(std::fs::read_to_string(fx.join("ids.txt")).unwrap().lines().count(), 20);
}
