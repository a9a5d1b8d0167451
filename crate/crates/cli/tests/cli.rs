use std::path::Path;
use std::process::{Command, Output};

fn qmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmix")).args(args).output().expect("binary runs")
}

fn records(path: &Path) -> Vec<serde_json::Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn without_timestamps(path: &Path) -> Vec<serde_json::Value> {
    records(path)
        .into_iter()
        .map(|mut r| {
            r.as_object_mut().unwrap().remove("timestamp_unix");
            r
        })
        .collect()
}

#[test]
fn theorem1_sweep_has_no_violations() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t1.jsonl");
    let o = qmix(&["geometry", "--n", "3..8", "--samples", "1000", "--seed", "7", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("t1.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "n,N,samples,max_min_distance,theorem1_bound,alpha,lower_bound,violations");
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.ends_with(",0")));
}

#[test]
fn fixed_seed_output_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for p in [&a, &b] {
        let o = qmix(&["mix", "--n", "8,12", "--samples", "4", "--seed", "11", "--out", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    let (ra, rb) = (without_timestamps(&a), without_timestamps(&b));
    assert_eq!(ra, rb);
    assert_eq!(ra.len(), 8);
    let samples: Vec<u64> = ra.iter().map(|r| r["sample"].as_u64().unwrap()).collect();
    assert_eq!(samples, [0, 1, 2, 3, 0, 1, 2, 3]);
    for r in &ra {
        assert!(r["fidelity"].as_f64().unwrap() >= 0.99);
        assert_eq!(r["schema_version"], 1);
        assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
    }
}

#[test]
fn vinv_lemma_residuals_small() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.jsonl");
    let o = qmix(&["geometry", "--experiment", "lemma-vinv-check", "--n", "2..512", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let rs = records(&out);
    assert_eq!(rs.len(), 511);
    let worst = rs.iter().map(|r| r["residual"].as_f64().unwrap()).fold(0.0, f64::max);
    assert!(worst < 1e-9);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let out = dir.path().join("rel.jsonl");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"experiment":"relative_mixing","n_range":[4,5,6],"eta":0.25,"epsilon":0.01,"chain_family":"metropolis_powerlaw","output_path":"{}"}}"#,
            dir.path().join("ignored.jsonl").display()
        ),
    )
    .unwrap();
    let o = qmix(&["classical", "--config", cfg.to_str().unwrap(), "--n", "4,8", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rs = records(&out);
    assert_eq!(rs.len(), 2);
    for r in rs {
        assert_eq!(r["experiment"], "relative_mixing");
        assert!(r["tau_eta"].as_u64() >= r["tau_eps_over_eta"].as_u64());
    }
    assert!(!dir.path().join("ignored.jsonl").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.jsonl");
    let out = out.to_str().unwrap();

    let o = qmix(&["geometry", "--n", "3", "--samples", "0", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("samples"));

    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"experiment":"mixing_run","n_range":[8],"output_path":"x","colour":1}"#).unwrap();
    assert_eq!(qmix(&["mix", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(qmix(&["geometry", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));

    let o = qmix(&["mix", "--mode", "emulated", "--t-bits", "14", "--n", "64", "--out", out]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("67108864"));
    assert!(!Path::new(out).exists());

    let bad_chain = dir.path().join("chain.json");
    std::fs::write(&bad_chain, r#"{"n":2,"p":[[0.5,0.5],[0.5,0.5]],"pi":[0.9,0.1]}"#).unwrap();
    let o = qmix(&["classical", "--family", "custom-file", "--chain-file", bad_chain.to_str().unwrap(), "--n", "2", "--out", out]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn report_groups_experiments() {
    let dir = tempfile::tempdir().unwrap();
    let t1 = dir.path().join("t1.jsonl");
    let lb = dir.path().join("lb.jsonl");
    assert_eq!(qmix(&["geometry", "--n", "2..4", "--samples", "50", "--out", t1.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(
        qmix(&["geometry", "--experiment", "lower-bound-sweep", "--n", "4,64", "--out", lb.to_str().unwrap()]).status.code(),
        Some(0)
    );
    let rep = dir.path().join("rep");
    let o = qmix(&["report", t1.to_str().unwrap(), lb.to_str().unwrap(), "--out", rep.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let md = std::fs::read_to_string(rep.join("report.md")).unwrap();
    assert!(md.contains("## theorem1_sweep") && md.contains("## lower_bound_sweep"));
    assert!(md.contains("| n | bound | observed_max | margin | violations |"));
    let alpha = std::fs::read_to_string(rep.join("alpha.csv")).unwrap();
    assert_eq!(alpha.lines().count(), 3);

    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    assert_ne!(qmix(&["report", empty.to_str().unwrap(), "--out", rep.to_str().unwrap()]).status.code(), Some(0));
}
