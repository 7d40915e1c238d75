use std::process::{Command, Output};

use fastconv_bench::report::{read_csv, AccuracyRow, ComplexityRow};

fn fastconv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fastconv")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn complexity_tables_print() {
    let o = fastconv(&["complexity", "winograd"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let row = text.lines().find(|l| l.starts_with("winograd") && l.contains(" 6 ")).expect("tile 6 row");
    let cols: Vec<&str> = row.split_whitespace().collect();
    assert_eq!(&cols[2..6], &["2.25", "4.33", "2.00", "2.78"]);

    let o = fastconv(&["complexity", "fft-fast", "--format", "csv"]);
    let (_, rows) = read_csv::<ComplexityRow>(&stdout(&o)).unwrap();
    let r16 = rows.iter().find(|r| r.tile == 16).unwrap();
    let got: Vec<String> = [r16.alpha, r16.beta, r16.gamma, r16.delta].iter().map(|v| format!("{v:.2}")).collect();
    assert_eq!(got, ["2.20", "6.23", "6.82", "6.82"]);

    let text = stdout(&fastconv(&["complexity", "layer-costs"]));
    assert!(text.lines().last().unwrap().contains("39.02"), "{text}");
}

#[test]
fn gen_prints_and_verifies() {
    let o = fastconv(&["gen", "4", "3", "--trials", "20"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("alpha = 6") && text.contains("verified: 20"), "{text}");
    assert_eq!(fastconv(&["gen", "2", "3", "--points", "0,0,1,inf"]).status.code(), Some(1));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(fastconv(&["accuracy", "--algos", "winograd9"]).status.code(), Some(1));
    assert_eq!(fastconv(&["accuracy", "--scale", "0"]).status.code(), Some(1));
    assert_eq!(fastconv(&["bench", "--suite", "/no/such/file.json"]).status.code(), Some(1));
    assert_eq!(fastconv(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(fastconv(&["--help"]).status.code(), Some(0));
}

#[test]
fn accuracy_csv_is_deterministic_and_round_trips() {
    let args = ["accuracy", "--scale", "0.0625", "--layers", "conv4.2,conv5", "--format", "csv", "--seed", "4", "--threads", "2"];
    let a = stdout(&fastconv(&args));
    let b = stdout(&fastconv(&args));
    assert_eq!(a, b);
    let (seed, rows) = read_csv::<AccuracyRow>(&a).unwrap();
    assert_eq!(seed, Some(4));
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.max_abs_err > 0.0 && r.precision == "fp32"));
}

#[test]
fn zero_filters_and_out_file() {
    let dir = std::env::temp_dir().join(format!("fastconv-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let out = dir.join("acc.csv");
    let o = fastconv(&[
        "accuracy", "--scale", "0.0625", "--layers", "conv5", "--zero-filters", "--precision", "fp16",
        "--format", "csv", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let (_, rows) = read_csv::<AccuracyRow>(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(rows.iter().all(|r| r.max_abs_err == 0.0 && r.precision == "fp16"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn custom_suite_bench() {
    let dir = std::env::temp_dir().join(format!("fastconv-suite-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("tiny.json");
    std::fs::write(
        &path,
        r#"{"name": "tiny", "layers": [{"label": "a", "C": 4, "H": 12, "W": 12, "K": 8, "R": 3, "S": 3, "pad": 1}]}"#,
    )
    .unwrap();
    let o = fastconv(&["bench", "--suite", path.to_str().unwrap(), "--algos", "direct,f4x4,fft", "--repeats", "1", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("# seed=1\nlayer,algo,batch,msec,effective_gflops\n"));
    assert_eq!(text.lines().count(), 2 + 6);
    std::fs::remove_dir_all(&dir).unwrap();
}
