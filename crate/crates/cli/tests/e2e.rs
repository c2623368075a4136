//! End-to-end exercise of the CLI pipeline: gen-workload -> build-index ->
//! run (per strategy) -> report, all on a small synthetic fvecs dataset.

use std::path::Path;
use std::process::Command;

use proxigraph::bench;
use proxigraph::io::write_fvecs;
use proxigraph::synthetic::gaussian_blobs;

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_proxigraph"))
}

fn run_ok(cmd: &mut Command) -> String {
    let output = cmd.output().expect("spawn CLI");
    assert!(
        output.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn full_pipeline_runs_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = dir.path().join("data.fvecs");
    write_fvecs(&dataset, &gaussian_blobs(400, 8, 4, 0.08, 11)).unwrap();

    // gen-workload
    let workload = dir.path().join("w.log");
    run_ok(cli().args([
        "gen-workload",
        "--dataset",
        s(&dataset),
        "--pattern",
        "clustered",
        "--base",
        "200",
        "--deletes",
        "20",
        "--inserts",
        "20",
        "--queries",
        "10",
        "--batches",
        "3",
        "--kmeans-k",
        "4",
        "--seed",
        "7",
        "--out",
        s(&workload),
    ]));
    assert!(workload.exists());

    // regenerating with the same seed is byte-identical
    let workload2 = dir.path().join("w2.log");
    run_ok(cli().args([
        "gen-workload",
        "--dataset",
        s(&dataset),
        "--pattern",
        "clustered",
        "--base",
        "200",
        "--deletes",
        "20",
        "--inserts",
        "20",
        "--queries",
        "10",
        "--batches",
        "3",
        "--kmeans-k",
        "4",
        "--seed",
        "7",
        "--out",
        s(&workload2),
    ]));
    assert_eq!(
        std::fs::read(&workload).unwrap(),
        std::fs::read(&workload2).unwrap()
    );

    // build-index
    let index = dir.path().join("base.idx");
    run_ok(cli().args([
        "build-index",
        "--workload",
        s(&workload),
        "--k",
        "16",
        "--d",
        "6",
        "--seed",
        "5",
        "--out",
        s(&index),
    ]));
    assert!(index.exists());

    // run each strategy; rebuild is needed for the merged report
    let mut reports = Vec::new();
    for strategy in ["global", "rebuild"] {
        let report = dir.path().join(format!("{strategy}.csv"));
        let snapshot = dir.path().join(format!("{strategy}.snap"));
        run_ok(cli().args([
            "run",
            "--workload",
            s(&workload),
            "--strategy",
            strategy,
            "--k",
            "16",
            "--d",
            "6",
            "--topk",
            "5",
            "--seed",
            "5",
            "--index",
            s(&index),
            "--snapshot-out",
            s(&snapshot),
            "--deterministic",
            "--out",
            s(&report),
        ]));
        let records = bench::read_report_csv(&report).unwrap();
        assert_eq!(records.len(), 4); // base + 3 batches
        assert!(snapshot.exists());
        reports.push(report);
    }

    // identical deterministic run reproduces recall/cost columns and snapshot
    let rerun = dir.path().join("global_rerun.csv");
    let resnap = dir.path().join("global_rerun.snap");
    run_ok(cli().args([
        "run",
        "--workload",
        s(&workload),
        "--strategy",
        "global",
        "--k",
        "16",
        "--d",
        "6",
        "--topk",
        "5",
        "--seed",
        "5",
        "--snapshot-out",
        s(&resnap),
        "--deterministic",
        "--out",
        s(&rerun),
    ]));
    let a = bench::read_report_csv(&reports[0]).unwrap();
    let b = bench::read_report_csv(&rerun).unwrap();
    for (ra, rb) in a.iter().zip(&b) {
        assert_eq!(ra.recall_at_k, rb.recall_at_k);
        assert_eq!(ra.mean_distance_computations, rb.mean_distance_computations);
    }
    assert_eq!(
        std::fs::read(dir.path().join("global.snap")).unwrap(),
        std::fs::read(&resnap).unwrap()
    );

    // sweep
    let sweep_out = dir.path().join("sweep.csv");
    run_ok(cli().args([
        "sweep",
        "--workload",
        s(&workload),
        "--strategy",
        "global",
        "--k",
        "16",
        "--d",
        "6",
        "--topk",
        "5",
        "--target",
        "0.8",
        "--seed",
        "5",
        "--out",
        s(&sweep_out),
    ]));
    let sweep_text = std::fs::read_to_string(&sweep_out).unwrap();
    assert!(sweep_text.lines().count() >= 4);

    // merged report with relative QPS
    let merged = dir.path().join("merged.csv");
    let inputs = format!("{},{}", s(&reports[0]), s(&reports[1]));
    run_ok(cli().args(["report", "--inputs", &inputs, "--out", s(&merged)]));
    let text = std::fs::read_to_string(&merged).unwrap();
    assert!(text.starts_with('#'));
    assert!(text.contains("relative_qps"));
    // rebuild rows are their own baseline
    for line in text.lines().filter(|l| l.starts_with("rebuild")) {
        let ratio: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!((ratio - 1.0).abs() < 1e-9);
    }
}
