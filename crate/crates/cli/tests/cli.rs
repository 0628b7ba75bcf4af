use std::process::{Command, Output};

fn qmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmc"))
        .args(args)
        .env_remove("QMC_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

const TINY: [&str; 14] = [
    "--dataset",
    "noisy-colors",
    "--classes",
    "2",
    "--train-per-class",
    "6",
    "--test-per-class",
    "3",
    "--stride",
    "4",
    "--hidden",
    "4",
    "--epochs",
    "2",
];

fn with<'a>(head: &[&'a str], out: &'a str) -> Vec<&'a str> {
    let mut v = head.to_vec();
    v.extend(TINY);
    v.extend(["--out", out, "--deterministic"]);
    v
}

#[test]
fn report_prints_widths() {
    for (method, width) in [("co", 5), ("pco", 13), ("pcot", 15), ("wev", 4)] {
        let out = qmc(&["report", "--method", method, "--dataset", "high-channel"]);
        assert!(out.status.success());
        let text = stdout(&out);
        let line = text.lines().find(|l| l.starts_with("width")).unwrap();
        assert_eq!(
            line.split_whitespace().last(),
            Some(width.to_string().as_str())
        );
    }
}

#[test]
fn generate_train_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let run = dir.path().join("run");
    let (data_s, run_s) = (data.to_str().unwrap(), run.to_str().unwrap());

    let out = qmc(&with(&["generate-data"], data_s));
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout(&out).contains("12 train / 6 test"));
    assert!(data.join("train.qmc").exists() && data.join("test.qmc").exists());

    // train from the written files
    let out = qmc(&[
        "train",
        "--dataset",
        data_s,
        "--stride",
        "4",
        "--hidden",
        "4",
        "--epochs",
        "2",
        "--out",
        run_s,
        "--deterministic",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(stdout(&out).contains("final test accuracy"));

    let out = qmc(&["evaluate", "--out", run_s]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    assert!(text.contains("accuracy") && text.contains("/6)"));
    assert!(text.contains("confusion"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "# small run\nmethod = pco\nregisters = 2\n").unwrap();
    let c = conf.to_str().unwrap();
    let out = qmc(&["report", "--config", c]);
    assert!(
        stdout(&out).contains("width            9"),
        "{}",
        stdout(&out)
    );
    let out = qmc(&["report", "--config", c, "--registers", "3"]);
    assert!(stdout(&out).contains("width            13"));
}

#[test]
fn deterministic_train_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let csv = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = qmc(&with(&["train"], out_dir.to_str().unwrap()));
        assert!(out.status.success());
        std::fs::read(out_dir.join("metrics.csv")).unwrap()
    };
    assert_eq!(csv("a"), csv("b"));
}

#[test]
fn gradcheck_passes_and_catches_faults() {
    let base = [
        "gradcheck",
        "--dataset",
        "noisy-colors",
        "--stride",
        "3",
        "--hidden",
        "8",
    ];
    let out = qmc(&base);
    assert!(out.status.success(), "{}", stdout(&out));
    assert!(stdout(&out).contains("PASS"));

    let mut faulty = base.to_vec();
    faulty.extend(["--fault", "f0.u.rx.0", "--sweep"]);
    let out = qmc(&faulty);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(text.contains("FAIL: f0.u.rx.0"), "{text}");
    assert_eq!(text.matches("max_rel_err").count(), 3);
}

#[test]
fn bad_input_is_reported() {
    assert!(!qmc(&["train", "--hidden", "0"]).status.success());
    assert!(!qmc(&["report", "--method", "nope"]).status.success());
    let out = qmc(&["train", "--dataset", "cifar", "--out", "/nonexistent/x"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("QMC_DATA_DIR"));
}
