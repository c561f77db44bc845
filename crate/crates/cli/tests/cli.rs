//! End-to-end checks of the binary surface: subcommands, CSV shapes, exit codes.

use std::process::Command;

fn expconv() -> Command {
    Command::new(env!("CARGO_BIN_EXE_expconv"))
}

#[test]
fn eval_anchors() {
    let out = expconv()
        .args(["eval", "wright", "--rho", "1", "--beta", "0", "--t", "1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("1.590636"), "{text}");

    let out = expconv()
        .args(["eval", "gn1d", "--gamma", "0.5", "--n", "3", "--x", "4"])
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("2.513274"), "{text}");

    let out = expconv()
        .args(["eval", "l1", "--d", "1", "--m", "1", "--gamma", "0"])
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("2.0000"), "{text}");
}

#[test]
fn constants_lists_r0() {
    let out = expconv()
        .args(["constants", "--d", "2", "--gamma", "1", "--m", "1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("r0"));
    assert!(text.contains("6.678"), "{text}"); // 32 e^{2/e} = 66.78
}

#[test]
fn verify_exit_codes() {
    // passing suite -> 0
    let out = expconv()
        .args(["verify", "--suite", "gn1d"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    // unknown suite -> 2
    let out = expconv()
        .args(["verify", "--suite", "does_not_exist"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    // invalid spec -> 2
    let out = expconv()
        .args(["eval", "l1", "--d", "1", "--gamma", "1.5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_writes_record_csv() {
    let dir = std::env::temp_dir().join("expconv_cli_test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("gn1d.csv");
    let out = expconv()
        .args(["verify", "--suite", "gn1d", "--out"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "check_id,d,m,gamma,variant,n,lambda,x,lhs,rhs,margin,pass,runtime_ms"
    );
    assert!(text.lines().count() >= 10);
    assert!(text.contains(",true,"));
}

#[test]
fn verify_reads_config_file() {
    let dir = std::env::temp_dir().join("expconv_cli_test");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"suite":"thm_1d","d":[1],"gamma":[0.0],"m":[1.0]}"#,
    )
    .unwrap();
    let out = expconv()
        .args(["verify", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("suite thm_1d"), "{text}");
}

#[test]
fn sample_csv_shape_and_reproducibility() {
    let args = [
        "sample", "--d", "2", "--m", "1", "--gamma", "0.5", "--lambda", "1", "--count", "200",
        "--seed", "7",
    ];
    let a = expconv().args(args).output().unwrap();
    let b = expconv().args(args).output().unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("# spec d=2"));
    assert!(text.lines().nth(1).unwrap().starts_with("x_1,x_2"));
}

#[test]
fn plot_data_sandwich_columns() {
    let out = expconv()
        .args([
            "plot-data", "sandwich-plambda", "--d", "1", "--m", "1", "--gamma", "0", "--lambda",
            "1", "--xmax", "12", "--points", "8",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x,oracle,lower,upper");
    let mut rows = 0;
    for line in lines {
        let cols: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(cols.len(), 4);
        assert!(cols[2] <= cols[1] * (1.0 + 1e-9), "lower <= oracle in {line}");
        assert!(cols[1] <= cols[3] * (1.0 + 1e-9), "oracle <= upper in {line}");
        rows += 1;
    }
    assert_eq!(rows, 9);
    // empty range -> header only
    let out = expconv()
        .args([
            "plot-data", "nstar", "--d", "1", "--n", "2", "--xmax", "0.5", "--points", "8",
        ])
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.trim(), "x,oracle,lower,upper");
}
