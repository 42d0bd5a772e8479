use std::fs;
use std::process::{Command, Output};

fn hubent(args: &[&str], workers: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hubent"))
        .args(args)
        .env("HUBENT_WORKERS", workers)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn eval_prints_header_meta_and_one_row() {
    let o = hubent(&["eval", "--n", "0.5", "--u", "4"], "1");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], "n,U,S,L,w2");
    let meta: serde_json::Value =
        serde_json::from_str(lines[1].strip_prefix("# ").unwrap()).unwrap();
    assert_eq!(meta["command"], "eval");
    assert_eq!(meta["params"]["u"], 4.0);
    assert!(meta["version"].as_str().unwrap().starts_with("hubent "));
    let fields: Vec<f64> = lines[2].split(',').map(|f| f.parse().unwrap()).collect();
    assert_eq!(fields[0], 0.5);
    assert!(fields[2] > 0.0 && fields[2] < 1.0);
    assert!(fields[4] >= 0.0 && fields[4] <= 0.25);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("fig4.json");
    let out = dir.path().join("fig4.csv");
    fs::write(&cfg, r#"{"u_list": [1.0, 2.0], "n_grid": [0.5, 1.0]}"#).unwrap();
    let o = hubent(
        &[
            "fig4",
            "--config",
            cfg.to_str().unwrap(),
            "--u-list",
            "3",
            "--out",
            out.to_str().unwrap(),
        ],
        "1",
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let text = fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(rows.len(), 2);
    for r in rows {
        assert!(r.split(',').nth(1).unwrap().parse::<f64>().unwrap() == 3.0);
    }
}

#[test]
fn fig6_is_byte_identical_across_worker_counts() {
    let args = [
        "fig6",
        "--n-list",
        "0.4",
        "--u-grid",
        "1,4",
        "--v-list",
        "-3",
        "--sites",
        "20",
        "--samples",
        "6",
        "--seed",
        "11",
    ];
    let a = hubent(&args, "1");
    let b = hubent(&args, "3");
    let c = hubent(&args, "0");
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    let other = hubent(&[&args[..12], &["12"]].concat(), "1");
    assert_ne!(a.stdout, other.stdout);
}

#[test]
fn invalid_parameters_exit_2() {
    // below the U floor of the w2 derivative
    let o = hubent(&["eval", "--n", "0.5", "--u", "0.1"], "1");
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    let o = hubent(&["fig2", "--n-grid", "0.5,1.5"], "1");
    assert_eq!(o.status.code(), Some(2));
    let o = hubent(&["eval", "--n", "0.5"], "1");
    assert_eq!(o.status.code(), Some(2));
    let o = hubent(&["eval", "--n", "0.5", "--u", "1"], "lots");
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"u_list": [1.0], "typo": 3}"#).unwrap();
    let o = hubent(&["fig2", "--config", cfg.to_str().unwrap()], "1");
    assert_eq!(o.status.code(), Some(2));
    let o = hubent(
        &[
            "fig2",
            "--config",
            dir.path().join("missing.json").to_str().unwrap(),
        ],
        "1",
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oversized_ed_exits_4_and_suggests_lda() {
    let o = hubent(
        &[
            "superlattice",
            "--structures",
            "2:7",
            "--v-list",
            "1",
            "--u-grid",
            "1",
            "--backend",
            "ed",
        ],
        "1",
    );
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("lda"));
}

#[test]
fn scf_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("fig6.json");
    fs::write(
        &cfg,
        r#"{"n_list": [0.6], "u_grid": [4.0], "v_list": [-3.0], "sites": 30, "samples": 1,
            "scf": {"max_iter": 2}}"#,
    )
    .unwrap();
    let o = hubent(&["fig6", "--config", cfg.to_str().unwrap()], "1");
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn ed_report_and_small_superlattice() {
    let o = hubent(&["ed", "--sites", "4", "--per-spin", "2", "--u", "2"], "1");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 2 + 4);
    assert!(text.starts_with("site,V,n,"));

    let o = hubent(
        &[
            "superlattice",
            "--structures",
            "2:2",
            "--v-list",
            "1",
            "--sites",
            "8",
            "--per-spin",
            "2",
            "--u-grid",
            "1,2",
            "--backend",
            "ed",
        ],
        "1",
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(text.lines().next().unwrap(), "X,Y,V,U,S,L,backend");
    assert!(text.lines().skip(2).all(|l| l.ends_with(",ed")));
}

#[test]
fn fig3_warns_about_incommensurate_densities() {
    let o = hubent(
        &[
            "fig3",
            "--n-list",
            "0.3",
            "--u-grid",
            "1,2",
            "--ed-sites",
            "4",
        ],
        "1",
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    let text = stdout(&o);
    assert!(text.lines().skip(2).all(|l| l.ends_with(",,")));
}
