use std::fs;
use std::path::Path;

use clap::Parser;
use cpcode_cli::{execute, Cli, CliError};

fn cli(args: &[&str]) -> Result<String, CliError> {
    let mut argv = vec!["cpcode"];
    argv.extend_from_slice(args);
    execute(Cli::try_parse_from(argv).expect("valid command line"))
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small dense test matrix in coordinate Matrix Market form, plus its entries.
fn write_mtx(p: &Path, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    let a: Vec<Vec<f64>> =
        (0..rows).map(|r| (0..cols).map(|c| ((r * 7 + c * 3) % 11) as f64 - 5.0 + 0.25 * c as f64).collect()).collect();
    let mut text = format!("%%MatrixMarket matrix coordinate real general\n{rows} {cols} {}\n", rows * cols);
    for (r, row) in a.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            text += &format!("{} {} {v}\n", r + 1, c + 1);
        }
    }
    fs::write(p, text).unwrap();
    a
}

fn write_vec(p: &Path, v: &[f64]) {
    let mut bytes = (v.len() as u64).to_le_bytes().to_vec();
    v.iter().for_each(|x| bytes.extend_from_slice(&x.to_le_bytes()));
    fs::write(p, bytes).unwrap();
}

fn read_vec(p: &Path) -> Vec<f64> {
    let bytes = fs::read(p).unwrap();
    let len = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
    assert_eq!(bytes.len(), 8 + 8 * len);
    bytes[8..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()
}

#[test]
fn verify_prints_generator() {
    let out = cli(&["verify", "--n", "4", "--k", "2"]).unwrap();
    assert!(out.contains("[            D |       -D - 1 |            1 |            0 ]"), "{out}");
    assert!(out.contains("[      D^2 + D | -D^2 - D - 1 |            0 |            1 ]"), "{out}");
    assert!(out.contains("G H^T = 0: true"));
}

#[test]
fn plan_csv_lists_every_term() {
    let out = cli(&["plan", "--n", "4", "--k", "2", "--gamma", "3/4", "--format", "csv"]).unwrap();
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("worker,slot,block,coefficient"));
    let rows: Vec<Vec<i64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    // 12 + 20 + 4 + 4 terms over tasks of lengths 5, 6, 4, 4
    assert_eq!(rows.len(), 40);
    for (w, len) in [5, 6, 4, 4].into_iter().enumerate() {
        let mut slots: Vec<i64> = rows.iter().filter(|r| r[0] == w as i64).map(|r| r[1]).collect();
        slots.dedup();
        assert_eq!(slots.len(), len, "worker {w}");
    }
    assert!(rows.iter().filter(|r| r[0] == 1).all(|r| r[3] == -1));
}

#[test]
fn simulate_then_decode_recovers_product() {
    let dir = tempfile::tempdir().unwrap();
    let (rows, cols) = (24, 6);
    let a = write_mtx(&dir.path().join("a.mtx"), rows, cols);
    let x: Vec<f64> = (0..cols).map(|i| 1.0 - 0.5 * i as f64).collect();
    write_vec(&dir.path().join("x.bin"), &x);
    let want: Vec<f64> = a.iter().map(|row| row.iter().zip(&x).map(|(a, b)| a * b).sum()).collect();

    for (scheme, extra) in [("cp", vec!["--gamma", "3/4", "--stragglers", "2,3"]), ("rs", vec!["--delta-rs", "2", "--stragglers", "0,3"])] {
        let dump = dir.path().join(scheme);
        let matrix = dir.path().join("a.mtx");
        let vector = dir.path().join("x.bin");
        let mut args = vec!["--scheme", scheme, "--out", path(&dump), "simulate", "--matrix", path(&matrix), "--vector", path(&vector)];
        args.extend(extra);
        cli(&args).unwrap();

        let result = dir.path().join(format!("{scheme}.bin"));
        let trace = dir.path().join(format!("{scheme}_trace.csv"));
        let report = cli(&["--out", path(&result), "decode", "--input", path(&dump), "--trace", path(&trace)]).unwrap();
        assert!(report.contains("error percentage"), "{report}");
        let got = read_vec(&result);
        assert_eq!(got.len(), rows);
        let scale = want.iter().map(|v| v.abs()).fold(1.0, f64::max);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-9 * scale, "{scheme}: {g} vs {w}");
        }
    }
    let trace = fs::read_to_string(dir.path().join("cp_trace.csv")).unwrap();
    assert!(trace.starts_with("step,row,col,slope\n"));
}

#[test]
fn encode_writes_matrix_market_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("a.mtx");
    write_mtx(&src, 16, 4);
    let out = dir.path().join("coded");
    cli(&["--out", path(&out), "encode", "--gamma", "3/4", "--matrix", path(&src)]).unwrap();
    let index = fs::read_to_string(out.join("index.csv")).unwrap();
    assert_eq!(index.lines().count() - 1, 19);
    let first = fs::read_dir(&out).unwrap().filter_map(Result::ok).find(|e| e.path().extension().is_some_and(|x| x == "mtx"));
    let text = fs::read_to_string(first.unwrap().path()).unwrap();
    assert!(text.starts_with("%%MatrixMarket matrix"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "n = 7\nk = 4\ngamma = \"3/10\"\n").unwrap();
    let from_file = cli(&["--config", path(&cfg), "plan"]).unwrap();
    assert!(from_file.starts_with("# CP(7,4) delta=160"), "{from_file}");
    let flagged = cli(&["--config", path(&cfg), "plan", "--k", "5", "--gamma", "1/2"]).unwrap();
    assert!(flagged.starts_with("# CP(7,5)"), "{flagged}");
}

#[test]
fn experiment_reports_echo_their_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("snr.csv");
    cli(&["--out", path(&out), "snr-sweep", "--trials", "2", "--rows", "40", "--cols", "20", "--snr", "inf"]).unwrap();
    let csv = fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("snr_db,err_pct_rs,err_pct_cp\n"));
    let echo = fs::read_to_string(dir.path().join("snr.config.toml")).unwrap();
    assert!(echo.contains("trials = 2"), "{echo}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // infeasible storage fraction
    assert_eq!(cli(&["plan", "--gamma", "1/2"]).unwrap_err().exit_code(), 1);
    // missing dump
    let missing = dir.path().join("nothing");
    assert_eq!(cli(&["decode", "--input", path(&missing)]).unwrap_err().exit_code(), 3);
    // more stragglers than parity columns: the dump is still written
    let dump = dir.path().join("dump");
    let err = cli(&["--out", path(&dump), "simulate", "--rows", "8", "--cols", "3", "--stragglers", "0,1,2"]).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert_eq!(cli(&["decode", "--input", path(&dump)]).unwrap_err().exit_code(), 2);
    let rs = dir.path().join("rs");
    let err = cli(&["--scheme", "rs", "--out", path(&rs), "simulate", "--rows", "8", "--cols", "3", "--stragglers", "0,1,2"]).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}
