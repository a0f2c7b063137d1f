use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn cusplab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cusplab"))
        .args(args)
        .arg("--output-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], out: &Path) {
    let o = cusplab(args, out);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string()
}

const SMALL_RUN: &[&str] = &[
    "--n-nodes",
    "512",
    "--t-end",
    "0.02",
    "--snapshot-every",
    "10",
];

#[test]
fn bounds_command_writes_table_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("b");
    ok(
        &["bounds", "--kappa", "zero", "--r-list", "e-10,e-100"],
        &out,
    );
    let csv = fs::read_to_string(out.join("bounds.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "r,xi,m,eta,bound_F,bound_G");
    assert_eq!(lines.len(), 3);
    let first: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first[0], -10.0);
    assert_eq!(first[2], 4.0);

    let m = manifest(&out);
    assert_eq!(m["command"], "bounds");
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    assert!(m["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(m["outputs"], serde_json::json!(["bounds.csv"]));
    assert_eq!(
        m["config"]["bounds"]["r_list"],
        serde_json::json!(["e-10", "e-100"])
    );
    let text = fs::read(out.join("config.toml")).unwrap();
    let hash: String = Sha256::digest(&text)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    assert_eq!(m["config_sha256"], hash.as_str());
}

#[test]
fn effective_command_outputs() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("e");
    ok(
        &["effective", "--b0", "0.3926990817", "--tau-max", "1e4"],
        &out,
    );
    assert_eq!(header(&out.join("trajectory.csv")), "tau,A,B,dA,dB,Q,I");
    assert_eq!(
        header(&out.join("j_integrals.csv")),
        "tau,Js,Jc,endpoint_0,endpoint_1"
    );
    let s = &manifest(&out)["summary"];
    assert!(s["identity_defect"].as_f64().unwrap() < 1e-6);
    assert!((s["a_infinity"].as_f64().unwrap() + 1.4494).abs() < 1e-3);
    assert_eq!(s["tau_end"].as_f64().unwrap(), 1e4);
}

#[test]
fn effective_csvs_are_reproducible() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["effective", "--tau-max", "1e3"], &a);
    ok(&["effective", "--tau-max", "1e3"], &b);
    for f in ["trajectory.csv", "j_integrals.csv"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn collapse_is_independent_of_thread_count() {
    let tmp = TempDir::new().unwrap();
    let run = |threads: &str, dir: &Path| {
        let o = Command::new(env!("CARGO_BIN_EXE_cusplab"))
            .arg("collapse")
            .args(SMALL_RUN)
            .args(["--radii", "1e-2,1e-3", "--output-dir"])
            .arg(dir)
            .env("CUSPLAB_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(
            manifest(dir)["threads"].as_u64().unwrap(),
            threads.parse::<u64>().unwrap()
        );
        fs::read(dir.join("collapse.csv")).unwrap()
    };
    let one = run("1", &tmp.path().join("one"));
    let two = run("2", &tmp.path().join("two"));
    assert_eq!(one, two);
    let text = String::from_utf8(one).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "t,r,log_time,half_angle,bisector,model_half_angle,model_bisector"
    );
    // Snapshots at t = 0, 0.01, 0.02 for two radii.
    assert_eq!(text.lines().count(), 1 + 3 * 2);
}

#[test]
fn small_euler_compare_and_decomp_runs() {
    let tmp = TempDir::new().unwrap();
    let e = tmp.path().join("euler");
    ok(&[&["euler"], SMALL_RUN].concat(), &e);
    let snaps = fs::read_to_string(e.join("snapshots.csv")).unwrap();
    assert_eq!(snaps.lines().next().unwrap(), "t,node_index,x,y");
    let summary = &manifest(&e)["summary"];
    assert_eq!(summary["snapshots"], 3);
    assert_eq!(summary["n_nodes"], 512);
    assert_eq!(summary["symmetrize"], true);
    for key in ["b0", "dt", "t_end", "quad_order", "snapshot_every"] {
        assert!(!summary[key].is_null(), "{key}");
    }
    assert!(manifest(&e)["summary"]["max_area_drift"].as_f64().unwrap() < 1e-6);

    let c = tmp.path().join("compare");
    ok(&[&["compare"], SMALL_RUN].concat(), &c);
    assert_eq!(
        header(&c.join("diagnostics.csv")),
        "t,r,G,F,theta_bar,half_angle,bisector"
    );

    let d = tmp.path().join("decomp");
    ok(&["decomp", "--n-nodes", "512", "--t-end", "0"], &d);
    let csv = fs::read_to_string(d.join("decomposition.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "r,theta,residual_over_r");
    assert_eq!(csv.lines().count(), 1 + 9 * 8);
}

#[test]
fn invalid_configuration_exits_with_code_2_before_writing() {
    let tmp = TempDir::new().unwrap();
    let bad_file = tmp.path().join("bad.toml");
    let cases: Vec<(Vec<&str>, &str)> = vec![
        (vec!["effective", "--b0", "1.0"], ""),
        (vec!["bounds", "--kappa", "cubic"], ""),
        (vec!["bounds", "--r-list", "e-0"], ""),
        (
            vec!["bounds", "--kappa", "power:0.5,0.25", "--r-list", "e-10"],
            "",
        ),
        (vec!["euler", "--n-nodes", "31"], ""),
        (vec!["collapse", "--radii", "2.0"], ""),
        (vec!["effective"], "[model]\nb0 = -0.1\n"),
        (vec!["effective"], "[model]\nunknown_key = 1\n"),
        (vec!["bounds"], "[bounds]\ndelta = 0.0\n"),
        (vec!["bounds", "--config", "/nonexistent/cusplab.toml"], ""),
    ];
    for (i, (args, file)) in cases.into_iter().enumerate() {
        let out = tmp.path().join(format!("case{i}"));
        let mut args = args;
        if !file.is_empty() {
            fs::write(&bad_file, file).unwrap();
            args.extend(["--config", bad_file.to_str().unwrap()]);
        }
        let o = cusplab(&args, &out);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!out.exists(), "{args:?} wrote output");
    }
}

#[test]
fn invariant_violation_exits_with_code_3() {
    let tmp = TempDir::new().unwrap();
    let o = cusplab(
        &["euler", "--n-nodes", "512", "--dt", "0.2", "--t-end", "1"],
        &tmp.path().join("x"),
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("CFL"));
}

#[test]
fn resolved_config_round_trips() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a");
    ok(
        &[
            "bounds",
            "--kappa",
            "power:0.5,0.25",
            "--r-list",
            "e-100,1e-300",
            "--delta",
            "0.3",
        ],
        &a,
    );
    let b = tmp.path().join("b");
    ok(
        &[
            "bounds",
            "--config",
            a.join("config.toml").to_str().unwrap(),
        ],
        &b,
    );
    let ca: toml::Table =
        toml::from_str(&fs::read_to_string(a.join("config.toml")).unwrap()).unwrap();
    let mut cb: toml::Table =
        toml::from_str(&fs::read_to_string(b.join("config.toml")).unwrap()).unwrap();
    assert_eq!(cb["output_dir"].as_str().unwrap(), b.to_str().unwrap());
    cb.insert("output_dir".into(), ca["output_dir"].clone());
    assert_eq!(ca, cb);
    assert_eq!(
        fs::read(a.join("bounds.csv")).unwrap(),
        fs::read(b.join("bounds.csv")).unwrap()
    );
    assert_eq!(ca["bounds"]["kappa"]["kind"].as_str(), Some("power"));
}

fn golden(sub: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../golden")
        .join(sub)
}

fn parse_csv(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let head = lines.next().unwrap().to_string();
    let width = head.split(',').count();
    let rows: Vec<Vec<f64>> = lines
        .map(|l| {
            let row: Vec<f64> = l.split(',').map(|v| v.parse().unwrap()).collect();
            assert_eq!(row.len(), width, "{}", path.display());
            row
        })
        .collect();
    (head, rows)
}

fn assert_close(a: &Path, b: &Path) {
    let (ha, ra) = parse_csv(a);
    let (hb, rb) = parse_csv(b);
    assert_eq!(ha, hb);
    assert_eq!(ra.len(), rb.len(), "{}", a.display());
    for (x, y) in ra.iter().flatten().zip(rb.iter().flatten()) {
        assert!(
            x == y || (x - y).abs() <= 1e-9 * x.abs().max(y.abs()),
            "{}: {x} vs {y}",
            a.display()
        );
    }
}

#[test]
fn golden_outputs_regenerate_from_their_configs() {
    let tmp = TempDir::new().unwrap();
    for (sub, files) in [
        ("effective", &["trajectory.csv", "j_integrals.csv"][..]),
        ("bounds", &["bounds.csv"][..]),
    ] {
        let out = tmp.path().join(sub);
        let cfg = golden(sub).join("config.toml");
        ok(&[sub, "--config", cfg.to_str().unwrap()], &out);
        for f in files {
            assert_close(&golden(sub).join(f), &out.join(f));
        }
    }
}

#[test]
fn golden_run_outputs_have_expected_schema() {
    let (head, rows) = parse_csv(&golden("euler").join("snapshots.csv"));
    assert_eq!(head, "t,node_index,x,y");
    let summary = &manifest(&golden("euler"))["summary"];
    let mut times: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    times.dedup();
    assert_eq!(times.len() as u64, summary["snapshots"].as_u64().unwrap());

    let (head, rows) = parse_csv(&golden("collapse").join("collapse.csv"));
    assert_eq!(
        head,
        "t,r,log_time,half_angle,bisector,model_half_angle,model_bisector"
    );
    let m = manifest(&golden("collapse"));
    let radii = m["config"]["diagnostics"]["radii"]
        .as_array()
        .unwrap()
        .len() as u64;
    assert_eq!(
        rows.len() as u64,
        radii * m["summary"]["snapshots"].as_u64().unwrap()
    );
    for r in &rows {
        assert!(
            (r[3] - r[5]).abs() < 0.05,
            "half-angle off the model: {r:?}"
        );
    }
}
