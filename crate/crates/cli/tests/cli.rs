use std::path::Path;
use std::process::{Command, Output};

use tucker_cli::{BoundOutput, DecomposeSummary};
use tucker_core::io::{load_tensor, save_tensor};
use tucker_core::testbed::Recipe;
use tucker_core::{relative_error, DenseTensor};

fn tucker(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tucker")).args(args).output().expect("spawn tucker")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn decompose(dir: &Path, extra: &[&str]) -> DecomposeSummary {
    let out_dir = dir.to_str().unwrap();
    let mut args = vec!["decompose", "--out", out_dir];
    args.extend_from_slice(extra);
    let out = tucker(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

const EXACT: [&str; 6] = ["--recipe", "exact", "--dims", "40,40,40", "--true-ranks", "5,5,5"];

#[test]
fn decompose_exact_rank_and_reload() {
    let dir = tempfile::tempdir().unwrap();
    for alg in ["thosvd", "shifted-sthosvd", "holistic-shifted"] {
        let sub = dir.path().join(alg);
        let mut args = EXACT.to_vec();
        args.extend(["--algorithm", alg, "--ranks", "5", "--oversample", "3", "--seed", "7"]);
        let summary = decompose(&sub, &args);
        assert!(summary.re <= 1e-9, "{alg}: {}", summary.re);
        assert_eq!(summary.order, vec![1, 2, 3]);

        let on_disk: DecomposeSummary =
            serde_json::from_slice(&std::fs::read(sub.join("summary.json")).unwrap()).unwrap();
        assert_eq!(on_disk, summary);
        let f = summary.load_factorization(&sub.join("summary.json")).unwrap();
        let t = summary.recipe.build(summary.tensor_seed).unwrap();
        let re = relative_error(&t, &f).unwrap();
        assert!((re - summary.re).abs() <= 1e-12, "{re} vs {}", summary.re);
    }
}

#[test]
fn decompose_with_pve_reports_realized_powers() {
    let dir = tempfile::tempdir().unwrap();
    let summary = decompose(
        dir.path(),
        &["--recipe", "a", "--algorithm", "shifted-sthosvd", "--ranks", "10", "--pve-tol", "0.5", "--seed", "3"],
    );
    assert_eq!(summary.realized_q.len(), 3);
    assert!(summary.realized_q.iter().all(|&q| q >= 1), "{:?}", summary.realized_q);
    assert_eq!(summary.shift_trace.modes.len(), 3);
}

#[test]
fn processing_order_is_one_based() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = EXACT.to_vec();
    args.extend(["--algorithm", "sthosvd", "--ranks", "5", "--order", "3,1,2", "--seed", "1"]);
    let summary = decompose(dir.path(), &args);
    assert_eq!(summary.order, vec![3, 1, 2]);
    assert_eq!(summary.config.order, Some(vec![2, 0, 1]));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let missing = tucker(&["decompose", "--input", "no/such/file.dtns", "--algorithm", "thosvd", "--ranks", "2"]);
    assert_eq!(code(&missing), 3);
    assert_eq!(String::from_utf8_lossy(&missing.stderr).lines().count(), 2, "seed line plus one diagnostic");

    let both = tucker(&["decompose", "--input", "x.dtns", "--recipe", "a", "--algorithm", "thosvd", "--ranks", "2"]);
    assert_eq!(code(&both), 2);
    let neither = tucker(&["decompose", "--algorithm", "thosvd", "--ranks", "2", "--seed", "1"]);
    assert_eq!(code(&neither), 2);
    let bad_alg = tucker(&["decompose", "--recipe", "a", "--algorithm", "nope", "--ranks", "2"]);
    assert_eq!(code(&bad_alg), 2);

    let mut args = vec!["decompose", "--out", out_dir];
    args.extend(EXACT);
    args.extend(["--algorithm", "rand-thosvd", "--ranks", "41", "--seed", "1"]);
    assert_eq!(code(&tucker(&args)), 2);
    let mut args = vec!["decompose", "--out", out_dir];
    args.extend(EXACT);
    args.extend(["--algorithm", "thosvd", "--ranks", "5", "--order", "1,2,4", "--seed", "1"]);
    assert_eq!(code(&tucker(&args)), 2);

    let nan = dir.path().join("nan.dtns");
    let mut t = DenseTensor::from_fn(vec![4, 4, 4], |i| (i[0] + i[1] + i[2]) as f64).unwrap();
    t.data_mut()[5] = f64::NAN;
    save_tensor(&nan, &t).unwrap();
    let solver = tucker(&["decompose", "--out", out_dir, "--input", nan.to_str().unwrap(), "--algorithm", "thosvd", "--ranks", "2"]);
    assert_eq!(code(&solver), 4);
}

#[test]
fn gen_writes_the_recipe_tensor() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b.dtns");
    let out = tucker(&["gen", "--recipe", "b", "--n", "12", "--decay", "s-shape", "--seed", "4", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let expected = Recipe::B {
        n: 12,
        decay: tucker_core::testbed::Decay::SShape,
    }
    .build(4)
    .unwrap();
    assert_eq!(load_tensor(&path).unwrap(), expected);

    let summary = decompose(
        &dir.path().join("d"),
        &["--input", path.to_str().unwrap(), "--algorithm", "sthosvd", "--ranks", "12", "--seed", "0"],
    );
    assert!(summary.re <= 1e-12);
}

fn data_rows(csv: &[u8]) -> usize {
    String::from_utf8_lossy(csv).lines().count() - 1
}

#[test]
fn bench_row_counts_and_header() {
    let small = ["--recipe", "exact", "--dims", "9,9,9", "--true-ranks", "2,2,2", "--seed", "3", "--no-timing"];
    let mut args = vec!["bench", "--algorithm", "rand-thosvd", "--ranks", "2", "--oversample", "2", "--trials", "1"];
    args.extend(small);
    let out = tucker(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(data_rows(&out.stdout), 1);
    let header = String::from_utf8_lossy(&out.stdout).lines().next().unwrap().to_string();
    assert_eq!(header, tucker_cli::CSV_HEADER.join(","));

    let mut args = vec![
        "bench",
        "--algorithm",
        "rand-sthosvd,shifted-thosvd",
        "--ranks",
        "3",
        "--ranks",
        "4",
        "--oversample",
        "2",
        "--trials",
        "3",
    ];
    args.extend(small);
    let out = tucker(&args);
    assert_eq!(code(&out), 0);
    assert_eq!(data_rows(&out.stdout), 12);
}

#[test]
fn bench_failures_are_flagged_not_fatal() {
    let out = tucker(&[
        "bench", "--recipe", "exact", "--dims", "6,6,6", "--true-ranks", "2,2,2", "--algorithm", "rand-thosvd",
        "--ranks", "2", "--oversample", "9", "--trials", "2", "--seed", "1",
    ]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().skip(1).all(|l| l.contains("invalid configuration")), "{text}");
}

#[test]
fn bench_from_plan_file() {
    let dir = tempfile::tempdir().unwrap();
    let plan = tucker_core::testbed::ExperimentPlan {
        recipe: Recipe::Exact {
            dims: vec![7, 7, 7],
            ranks: vec![2, 2, 2],
        },
        tensor_seed: 2,
        algorithms: vec![tucker_core::Algorithm::Holistic],
        configs: vec![tucker_core::SolverConfig::new(vec![2, 2, 2]).with_oversampling(2)],
        trials: 4,
        master_seed: 9,
    };
    let path = dir.path().join("plan.json");
    std::fs::write(&path, serde_json::to_vec(&plan).unwrap()).unwrap();
    let csv = dir.path().join("out.csv");
    let summary = dir.path().join("summary.json");
    let out = tucker(&[
        "bench",
        "--plan",
        path.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
        "--summary",
        summary.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(data_rows(&std::fs::read(&csv).unwrap()), 4);
    let cells: serde_json::Value = serde_json::from_slice(&std::fs::read(&summary).unwrap()).unwrap();
    assert_eq!(cells[0]["runs"], 4);

    let clash = tucker(&["bench", "--plan", path.to_str().unwrap(), "--recipe", "a"]);
    assert_eq!(code(&clash), 2);
}

fn bound(summary: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["bound", "--summary", summary.to_str().unwrap()];
    args.extend_from_slice(extra);
    tucker(&args)
}

#[test]
fn bound_reports_and_gates() {
    let dir = tempfile::tempdir().unwrap();
    let valid = dir.path().join("valid");
    decompose(
        &valid,
        &["--recipe", "b", "--n", "12", "--algorithm", "shifted-thosvd", "--ranks", "3", "--oversample", "2", "--power", "2", "--seed", "5"],
    );
    let out = bound(&valid.join("summary.json"), &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: BoundOutput = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report.theorem, "thosvd");
    assert!(report.report.probability > 0.0 && report.report.probability < 1.0);
    assert!(report.holds, "{report:?}");

    let strong = bound(&valid.join("summary.json"), &["--beta", "10", "--gamma", "10"]);
    let strong: BoundOutput = serde_json::from_slice(&strong.stdout).unwrap();
    assert!(strong.report.probability > 0.9999 && strong.report.probability > report.report.probability);

    let tiny = dir.path().join("tiny");
    decompose(
        &tiny,
        &["--recipe", "exact", "--dims", "4,4,4", "--true-ranks", "1,1,1", "--algorithm", "shifted-thosvd", "--ranks", "1", "--oversample", "1", "--power", "2", "--seed", "5"],
    );
    let gated = bound(&tiny.join("summary.json"), &["--beta", "1.1", "--gamma", "1.1"]);
    assert_eq!(code(&gated), 5, "{}", String::from_utf8_lossy(&gated.stderr));

    let det = dir.path().join("det");
    decompose(&det, &["--recipe", "b", "--n", "12", "--algorithm", "thosvd", "--ranks", "3", "--seed", "5"]);
    assert_eq!(code(&bound(&det.join("summary.json"), &[])), 2);
}
