use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_holonomy"))
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("holonomy-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn decompose_worked_example() {
    let dir = scratch("decompose");
    let o = run(bin().args([
        "--out",
        dir.to_str().unwrap(),
        "decompose",
        "x3 x2 x1 x4 x2 x4^-1",
    ]));
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("x2: x1^-1 x2 x1 x2"), "{text}");
    assert!(text.contains("x4: x2^-1 x4 x2 x4^-1"), "{text}");
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("decompose.json")).unwrap()).unwrap();
    assert_eq!(doc["components"].as_array().unwrap().len(), 4);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(bin().arg("no-such-command")).status.code(), Some(2));
    assert_eq!(
        run(bin().args(["decompose", "x1 y2"])).status.code(),
        Some(2)
    );
    assert_eq!(run(&mut bin()).status.code(), Some(2));
}

#[test]
fn word_of_a_square() {
    let dir = scratch("word");
    let path = dir.join("path.json");
    let punct = dir.join("punct.json");
    fs::write(&path, "[[-1,-1],[1,-1],[1,1],[-1,1],[-1,-1]]").unwrap();
    fs::write(&punct, r#"{"punctures": [[0.2, 0.1], [3, 0]]}"#).unwrap();
    let o = run(bin().args([
        "--out",
        dir.to_str().unwrap(),
        "word",
        "--path",
        path.to_str().unwrap(),
        "--punctures",
        punct.to_str().unwrap(),
    ]));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).trim(), "x1");
    assert_eq!(
        fs::read_to_string(dir.join("word.txt")).unwrap().trim(),
        "x1"
    );
}

#[test]
fn holonomy_writes_report_and_tables() {
    let dir = scratch("holonomy");
    let cfg = dir.join("cfg.json");
    fs::write(
        &cfg,
        r#"{"group": "torus:2", "K": 20, "R": 2, "n_steps": 200, "replicas": 4, "seed": 3, "statistics": true}"#,
    )
    .unwrap();
    let o = run(bin().args([
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
        "holonomy",
    ]));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.join("holonomy.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "replica,class_coord_0,class_coord_1,simpler_class_coord_0,simpler_class_coord_1,e_r,f_r,num_punctures,delta,retries"
    );
    assert_eq!(csv.lines().count(), 5);
    let w = fs::read_to_string(dir.join("windings.csv")).unwrap();
    assert!(w.starts_with("puncture_id,x,y,theta,theta_half,beta1,beta2,S2,S5,class"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["replicas"].as_array().unwrap().len(), 4);
    // missing config is a usage error
    assert_eq!(
        run(bin().args(["--out", dir.to_str().unwrap(), "holonomy"]))
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn verify_is_reproducible() {
    let dir = scratch("verify");
    let go = || {
        run(bin().args([
            "--seed",
            "5",
            "--out",
            dir.to_str().unwrap(),
            "verify",
            "--quick",
            "--only",
            "1,2,3",
        ]))
    };
    let (a, b) = (go(), go());
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
    assert_eq!(stdout(&a), stdout(&b));
    assert_eq!(stdout(&a).lines().count(), 3);
    assert!(stdout(&a).lines().all(|l| l.starts_with("PASS")));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("verify.json")).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 3);
}

#[test]
fn braid_test_detects_the_control() {
    let dir = scratch("braid");
    let d = dir.to_str().unwrap();
    let ok = run(bin().args([
        "--out",
        d,
        "braid-test",
        "--group",
        "su2",
        "--braid",
        "[1, -2]",
        "--strands",
        "3",
        "--samples",
        "4000",
    ]));
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));
    let law = r#"[{"law": "axis", "axis": [1,0,0], "scale": 1.5}, {"law": "axis", "axis": [0,1,0], "scale": 1.5}, {"law": "axis", "axis": [0,0,1], "scale": 1.5}]"#;
    let bad = run(bin().args([
        "--out",
        d,
        "braid-test",
        "--group",
        "su2",
        "--braid",
        "[1]",
        "--strands",
        "3",
        "--samples",
        "4000",
        "--law",
        law,
    ]));
    assert_eq!(bad.status.code(), Some(1), "{}", stdout(&bad));
}

#[test]
fn stable_sample_columns() {
    let dir = scratch("stable");
    let o = run(bin().args([
        "--out",
        dir.to_str().unwrap(),
        "stable-sample",
        "--group",
        "su2",
        "--samples",
        "50",
    ]));
    assert!(o.status.success());
    let csv = fs::read_to_string(dir.join("stable.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "z_0,z_1,z_2");
    assert_eq!(csv.lines().count(), 51);
}
