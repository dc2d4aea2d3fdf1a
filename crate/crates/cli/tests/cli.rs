use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use choiforge::fidelity::read_sample_jsonl;
use choiforge::sdp::import_interchange;

fn choiforge(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_choiforge"))
        .args(args)
        .current_dir(dir)
        .env_remove("CHOIFORGE_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn same_seed_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["random-sample-sweep", "--n", "2..3", "--d", "1,2", "--reps", "2", "--seed", "11", "--solver", "both"];
    let a = choiforge(&args, dir.path());
    let b = choiforge(&args, dir.path());
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);

    let other = choiforge(&["random-sample-sweep", "--n", "2..3", "--d", "1,2", "--reps", "2", "--seed", "12", "--solver", "both"], dir.path());
    assert_ne!(a.stdout, other.stdout);

    // the environment default is the same seed
    let env = Command::new(env!("CARGO_BIN_EXE_choiforge"))
        .args(&args[..args.len() - 4])
        .args(["--solver", "both"])
        .env("CHOIFORGE_SEED", "11")
        .output()
        .unwrap();
    assert_eq!(env.stdout, a.stdout);
}

#[test]
fn csv_starts_with_schema_and_header() {
    let dir = tempfile::tempdir().unwrap();
    let o = choiforge(&["random-matrix-sweep", "--n", "2", "--d", "2", "--out", "rm.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("rm.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(choiforge_cli::sweep::SCHEMA_LINE));
    assert_eq!(lines.next().unwrap(), choiforge_cli::sweep::CSV_COLUMNS.join(","));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), choiforge_cli::sweep::CSV_COLUMNS.len());
    assert_eq!(row[4], "sdp");
    // no timing unless asked
    assert_eq!(row[14], "");
}

#[test]
fn timing_fills_wall_ms() {
    let dir = tempfile::tempdir().unwrap();
    let o = choiforge(&["random-matrix-sweep", "--n", "2", "--d", "2", "--timing"], dir.path());
    let out = stdout(&o);
    let row: Vec<&str> = out.lines().nth(2).unwrap().split(',').collect();
    assert!(row[14].parse::<u64>().is_ok());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = choiforge(&["unitary-sweep", "--n", "2..3", "--strict", "--seed", "1"], dir.path());
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));

    // one record cannot pin a unitary
    let strict = choiforge(&["unitary-sweep", "--n", "3", "--m", "1", "--strict"], dir.path());
    assert_eq!(strict.status.code(), Some(2));
    let relaxed = choiforge(&["unitary-sweep", "--n", "3", "--m", "1"], dir.path());
    assert_eq!(relaxed.status.code(), Some(0));

    // N_s = 1 with D = 1 cannot be trace preserving for n = 3
    let hard = choiforge(
        &["random-sample-sweep", "--n", "3", "--d", "1", "--solver", "lowrank", "--ns", "1", "--strict"],
        dir.path(),
    );
    assert_eq!(hard.status.code(), Some(3));
    assert!(stdout(&hard).contains("cannot satisfy"));

    let usage = choiforge(&["random-matrix-sweep", "--n", "4..2"], dir.path());
    assert_eq!(usage.status.code(), Some(1));
    let unknown = choiforge(&["random-matrix-sweep", "--bogus"], dir.path());
    assert_eq!(unknown.status.code(), Some(1));
    let help = choiforge(&["--help"], dir.path());
    assert_eq!(help.status.code(), Some(0));
}

#[test]
fn large_sdp_needs_opt_in() {
    let dir = tempfile::tempdir().unwrap();
    let o = choiforge(&["random-matrix-sweep", "--n", "21", "--d", "20"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--allow-large"));
    // the low-rank solver alone is not guarded
    let cfg = choiforge_cli::sweep::SweepConfig {
        solver: choiforge_cli::sweep::SolverChoice::Lowrank,
        ..choiforge_cli::sweep::SweepConfig::new(choiforge_cli::sweep::SweepKind::RandomMatrix, vec![(21, 20)], 0)
    };
    assert!(cfg.validate().is_ok());
}

#[test]
fn rows_reverify_from_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = choiforge(
        &["channel-sweep", "--n", "2,3", "--d", "2", "--solver", "both", "--seed", "8", "--artifacts", "art", "--out", "c.csv"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(dir.path().join("c.csv"))
        .unwrap();
    let header = rdr.headers().unwrap().clone();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let mut seen = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let (n, d, solver) = (&rec[col("n")], &rec[col("d")], &rec[col("solver")]);
        let stem = format!("art/channel-n{n}-d{d}-r0");
        let v = choiforge(
            &["verify", "--choi", &format!("{stem}-{solver}.choi.json"), "--s", &format!("{stem}.s.json"), "--out", "v.json"],
            dir.path(),
        );
        assert_eq!(v.status.code(), Some(0), "{}", stderr(&v));
        let report = json(&dir.path().join("v.json"));
        assert_eq!(report["rank_j"].as_u64().unwrap().to_string(), rec[col("rank_j")]);
        let f: f64 = rec[col("fidelity")].parse().unwrap();
        assert_eq!(report["fidelity"].as_f64().unwrap(), f);
        assert!(report["constraint_residual"].as_f64().unwrap() < 1e-8);
        seen += 1;
    }
    assert_eq!(seen, 4);
}

#[test]
fn interchange_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let o = choiforge(&["random-matrix-sweep", "--n", "2", "--d", "3", "--seed", "3", "--artifacts", "art"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let s = "art/random-matrix-n2-d3-r0.s.json";
    let a = choiforge(&["solve", "--s", s, "--out", "a", "--export-interchange", "p.dat-s"], dir.path());
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));

    // the export parses as SDPA sparse input
    let text = fs::read_to_string(dir.path().join("p.dat-s")).unwrap();
    let p = import_interchange::<f64, _>(text.as_bytes(), 2, 3).unwrap();
    assert_eq!(p.num_constraints(), 3);

    let b = choiforge(&["solve", "--interchange", "p.dat-s", "--n", "2", "--d", "3", "--out", "b"], dir.path());
    assert_eq!(b.status.code(), Some(0), "{}", stderr(&b));
    let fa = json(&dir.path().join("a/sdp.verify.json"))["objective"].as_f64().unwrap();
    let fb = json(&dir.path().join("b/sdp.verify.json"))["objective"].as_f64().unwrap();
    assert!((fa - fb).abs() <= 1e-9 * fa.abs().max(1.0), "{fa} vs {fb}");

    // full certificate through the stored dual
    let v = choiforge(
        &["verify", "--choi", "a/sdp.choi.json", "--s", s, "--solution", "a/sdp.solution.json", "--strict"],
        dir.path(),
    );
    assert_eq!(v.status.code(), Some(0), "{}", stderr(&v));
    assert!(stdout(&v).contains("\"passes\": true"));
}

#[test]
fn malformed_sample_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let good = r#"{"input":{"kind":"pure","amplitudes":[1.0,0.0]},"output":{"kind":"pure","amplitudes":[0.0,1.0]}}"#;
    fs::write(
        dir.path().join("bad.jsonl"),
        format!("{{\"format\":\"choiforge-sample\",\"version\":1,\"n\":2,\"d\":2}}\n{good}\n{{\"input\": oops}}\n"),
    )
    .unwrap();
    let o = choiforge(&["solve", "--sample", "bad.jsonl", "--out", "x"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn solve_from_sample_with_trace() {
    let dir = tempfile::tempdir().unwrap();
    let lines = [
        r#"{"input":{"kind":"pure","amplitudes":[1.0,0.0]},"output":{"kind":"pure","amplitudes":[0.0,1.0]}}"#,
        r#"{"input":{"kind":"pure","amplitudes":[0.0,1.0]},"output":{"kind":"pure","amplitudes":[1.0,0.0]}}"#,
        r#"{"input":{"kind":"pure","amplitudes":[0.6,0.8]},"output":{"kind":"pure","amplitudes":[0.8,0.6]}}"#,
    ];
    fs::write(dir.path().join("swap.jsonl"), lines.join("\n")).unwrap();
    let o = choiforge(&["solve", "--sample", "swap.jsonl", "--out", "out", "--solver", "both", "--trace"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary = json(&dir.path().join("out/summary.json"));
    for entry in summary.as_array().unwrap() {
        // the swap gate fits every record exactly
        assert!((entry["fidelity"].as_f64().unwrap() - 3.0).abs() < 1e-6, "{entry}");
        assert_eq!(entry["rank_j"], 1);
    }
    let trace = fs::read_to_string(dir.path().join("out/lowrank.trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,fidelity,best_fidelity,constraint_residual,gram_min_eig,pick_offset"));
    assert!(dir.path().join("out/sdp.trace.csv").exists());
}

#[test]
fn transform_writes_readable_sample() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("raw.csv"),
        "# raw classical pairs\nx1,x2,f1,f2\n1.0,0.5,2.0,1.0\n0.2,1.0,0.1,3.0\n-1.0,0.3,0.0,1.0\n",
    )
    .unwrap();
    let o = choiforge(&["transform", "--csv", "raw.csv", "--out", "s.jsonl"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("s.jsonl")).unwrap();
    let sample = read_sample_jsonl::<f64, _>(text.as_bytes()).unwrap();
    assert_eq!((sample.len(), sample.n(), sample.d()), (3, 2, 2));

    let named = choiforge(
        &["transform", "--csv", "raw.csv", "--out", "t.jsonl", "--x-cols", "x1", "--f-cols", "f1,f2", "--canonical"],
        dir.path(),
    );
    assert_eq!(named.status.code(), Some(0), "{}", stderr(&named));
    let t = read_sample_jsonl::<f64, _>(fs::read_to_string(dir.path().join("t.jsonl")).unwrap().as_bytes()).unwrap();
    assert_eq!((t.n(), t.d()), (1, 2));

    fs::write(dir.path().join("bad.csv"), "x1,f1\n1.0,2.0\n1.0,abc\n").unwrap();
    let bad = choiforge(&["transform", "--csv", "bad.csv", "--out", "u.jsonl"], dir.path());
    assert_eq!(bad.status.code(), Some(1));
    assert!(stderr(&bad).contains("line 3"), "{}", stderr(&bad));
}

#[test]
fn projective_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = choiforge(&["projective", "--n", "4", "--d", "2", "--seed", "2", "--solver", "both", "--strict", "--out", "p.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = json(&dir.path().join("p.json"));
    for res in r["results"].as_array().unwrap() {
        assert_eq!(res["rank_j"], 1);
        assert!(res["max_abs_error"].as_f64().unwrap() <= 1e-6);
    }
    let bad = choiforge(&["projective", "--n", "2", "--d", "3"], dir.path());
    assert_eq!(bad.status.code(), Some(1));
}
