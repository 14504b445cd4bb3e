use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use declip_core::wav::{read_wav, write_wav, WavFormat};
use declip_core::Signal;
use tempfile::TempDir;

fn declip(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_declip"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn tone_signal(secs: f64, sr: u32, seed: f64) -> Signal {
    let n = (secs * sr as f64) as usize;
    let v: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / sr as f64;
            0.6 * (2.0 * PI * (220.0 + 30.0 * seed) * t).sin()
                + 0.3 * (2.0 * PI * 547.0 * t + seed).sin()
                + 0.1 * (2.0 * PI * 1230.0 * t).cos()
        })
        .collect();
    Signal::new(v, sr).unwrap()
}

fn normalized(sig: &Signal) -> Signal {
    declip_core::normalize(sig).unwrap()
}

fn write(path: &Path, sig: &Signal) {
    write_wav(path, sig, WavFormat::Float32).unwrap();
}

fn plain_sdr(x: &[f64], y: &[f64]) -> f64 {
    let num: f64 = x.iter().map(|v| v * v).sum();
    let den: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    10.0 * (num / den).log10()
}

fn sidecar(path: &Path) -> BTreeMap<String, String> {
    let text = std::fs::read_to_string(format!("{}.meta", path.display())).unwrap();
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

#[test]
fn help_and_version_succeed_usage_errors_exit_1() {
    assert_eq!(code(&declip(&["--help"])), 0);
    assert_eq!(code(&declip(&["--version"])), 0);
    assert_eq!(code(&declip(&["frobnicate"])), 1);
    assert_eq!(code(&declip(&["clip", "a.wav"])), 1);
    assert_eq!(code(&declip(&["clip", "a.wav", "b.wav", "--tau", "0.5", "--target-sdr", "3"])), 1);
}

#[test]
fn clip_at_unit_tau_is_a_byte_equal_copy() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("in.wav");
    let output = dir.path().join("out.wav");
    write(&input, &normalized(&tone_signal(0.5, 8000, 0.0)));
    let out = declip(&["clip", p(&input), p(&output), "--tau", "1.0"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read(&input).unwrap(), std::fs::read(&output).unwrap());
    assert_eq!(sidecar(&output)["achieved_sdr"], "inf");
}

#[test]
fn clip_to_target_sdr_and_eval_round_trip() {
    let dir = TempDir::new().unwrap();
    let clean = dir.path().join("clean.wav");
    let clipped = dir.path().join("clipped.wav");
    // Not normalized on purpose: clip and eval both rescale to a unit peak.
    let quiet: Vec<f64> = tone_signal(1.0, 8000, 1.0).samples().iter().map(|v| 0.5 * v).collect();
    write(&clean, &Signal::new(quiet, 8000).unwrap());
    let out = declip(&["clip", p(&clean), p(&clipped), "--target-sdr", "3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let meta = sidecar(&clipped);
    let tau: f64 = meta["tau"].parse().unwrap();
    let achieved: f64 = meta["achieved_sdr"].parse().unwrap();
    assert!((achieved - 3.0).abs() <= 0.01, "achieved {achieved}");

    // Re-measure the written pair independently.
    let x = normalized(&read_wav(&clean).unwrap().signal);
    let y = read_wav(&clipped).unwrap().signal;
    let measured = plain_sdr(x.samples(), y.samples());
    assert!((measured - achieved).abs() < 1e-9);
    assert!(y.samples().iter().all(|v| v.abs() <= tau));
    assert!(y.samples().iter().any(|v| v.abs() == tau));

    // restored = degraded: no improvement.
    let out = declip(&["eval", p(&clean), p(&clipped), p(&clipped), "--header", "--runtime", "0.5"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "input_sdr,output_sdr,delta_sdr,clipped_ratio,tau,runtime_ratio");
    let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
    let input_sdr: f64 = fields[0].parse().unwrap();
    assert!((input_sdr - achieved).abs() <= 1e-9);
    assert_eq!(fields[2], "0");
    let ratio: f64 = fields[3].parse().unwrap();
    let expected = 100.0 * y.samples().iter().filter(|v| v.abs() >= tau).count() as f64 / y.len() as f64;
    assert!((ratio - expected).abs() < 1e-12);
    assert_eq!(fields[4].parse::<f64>().unwrap(), tau);
    assert_eq!(fields[5], "0.5");

    // A perfect restoration has infinite output SDR. The float32 copy of the
    // normalized signal has a peak of exactly 1, so it serves as both clean
    // reference and estimate.
    let perfect = dir.path().join("perfect.wav");
    write(&perfect, &x);
    let out = declip(&["eval", p(&perfect), p(&clipped), p(&perfect)]);
    let fields: Vec<String> = stdout(&out).trim().split(',').map(String::from).collect();
    assert_eq!(fields[1], "inf");
    assert_eq!(fields[2], "inf");
    assert_eq!(fields[5], "");
}

#[test]
fn clip_rejects_zero_target() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("in.wav");
    write(&input, &tone_signal(0.2, 8000, 0.0));
    let out = declip(&["clip", p(&input), p(&dir.path().join("o.wav")), "--target-sdr", "0"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn io_and_numerical_failures_have_distinct_codes() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.wav");
    let out = declip(&["clip", p(&missing), p(&dir.path().join("o.wav")), "--tau", "0.5"]);
    assert_eq!(code(&out), 2);

    let silent = dir.path().join("silent.wav");
    write(&silent, &Signal::new(vec![0.0; 100], 8000).unwrap());
    let out = declip(&["clip", p(&silent), p(&dir.path().join("o.wav")), "--target-sdr", "5"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn declip_needs_a_threshold() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("in.wav");
    write(&input, &normalized(&tone_signal(0.2, 8000, 0.0)));
    let out = declip(&["declip", p(&input), p(&dir.path().join("o.wav"))]);
    assert_eq!(code(&out), 1);
    let out = declip(&["declip", p(&input), p(&dir.path().join("o.wav")), "--tau", "0.5", "--variant", "zz"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn declip_passes_unclipped_input_through() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("in.wav");
    let output = dir.path().join("out.wav");
    let x = normalized(&tone_signal(0.5, 8000, 2.0));
    write(&input, &x);
    for variant in ["pa", "ps", "sa", "ss", "asa", "ass"] {
        let out = declip(&[
            "declip", p(&input), p(&output), "--tau", "1.5", "--variant", variant, "--profile", "speech",
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        assert!(stdout(&out).contains("solved=0"));
        let back = read_wav(&output).unwrap().signal;
        let orig = read_wav(&input).unwrap().signal;
        for (a, b) in back.samples().iter().zip(orig.samples()) {
            assert!((a - b).abs() <= 1e-9);
        }
    }
}

#[test]
fn declip_uses_sidecar_and_restores_sinusoids() {
    let dir = TempDir::new().unwrap();
    let clean = dir.path().join("clean.wav");
    let clipped = dir.path().join("clipped.wav");
    let restored = dir.path().join("restored.wav");
    // Three tones on the DFT grid of the 16 kHz music frame (P = 2048).
    let sr = 16_000u32;
    let x: Vec<f64> = (0..2 * sr as usize)
        .map(|n| {
            [(57usize, 1.0, 0.3), (131, 0.6, 1.1), (250, 0.35, 2.0)]
                .iter()
                .map(|(k, a, ph)| a * (2.0 * PI * (*k * n) as f64 / 2048.0 + ph).cos())
                .sum()
        })
        .collect();
    write(&clean, &normalized(&Signal::new(x, sr).unwrap()));
    assert_eq!(code(&declip(&["clip", p(&clean), p(&clipped), "--target-sdr", "10"])), 0);
    let out = declip(&["declip", p(&clipped), p(&restored), "--variant", "pa", "--reference", p(&clean)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let line = stdout(&out);
    let delta: f64 = line
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix("delta_sdr="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(delta >= 20.0, "{line}");
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

const HEADER: [&str; 10] = [
    "file", "genre", "variant", "target_sdr", "input_sdr", "tau", "delta_sdr", "clipped_ratio", "iterations", "rt_ratio",
];

fn bench_job(dir: &Path, out: &str) -> PathBuf {
    let job = dir.join("job.cfg");
    std::fs::write(
        &job,
        format!("profile = speech\nvariants = pa, ps\nsdrs = 5, 10\nframe_len = 64\nworkers = 2\noutput_dir = {out}\n"),
    )
    .unwrap();
    job
}

fn toy_corpus(dir: &Path) -> PathBuf {
    let corpus = dir.join("corpus");
    for (genre, name, seed) in [("rock", "a.wav", 0.5), ("jazz", "b.wav", 1.5)] {
        std::fs::create_dir_all(corpus.join(genre)).unwrap();
        write(&corpus.join(genre).join(name), &tone_signal(0.4, 8000, seed));
    }
    std::fs::write(corpus.join("notes.txt"), "not audio").unwrap();
    corpus
}

fn without_timing(rows: &[Vec<String>]) -> Vec<Vec<String>> {
    rows.iter().map(|r| r[..9].to_vec()).collect()
}

#[test]
fn bench_on_empty_corpus_writes_header_only() {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("empty");
    std::fs::create_dir_all(&corpus).unwrap();
    let job = bench_job(dir.path(), "out");
    let out = declip(&["bench", p(&corpus), p(&job)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("out/results.csv"));
    assert_eq!(header, HEADER);
    assert!(rows.is_empty());
}

#[test]
fn bench_rows_summary_resume_and_determinism() {
    let dir = TempDir::new().unwrap();
    let corpus = toy_corpus(dir.path());
    let job = bench_job(dir.path(), "out");
    let out = declip(&["bench", p(&corpus), p(&job)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let results = dir.path().join("out/results.csv");
    let (header, rows) = read_csv(&results);
    assert_eq!(header, HEADER);
    assert_eq!(rows.len(), 8);

    // Canonical order: file, then SDR, then variant.
    let keys: Vec<(String, String, String)> =
        rows.iter().map(|r| (r[0].clone(), r[3].clone(), r[2].clone())).collect();
    let mut expected = Vec::new();
    for file in ["jazz/b", "rock/a"] {
        for sdr in ["5", "10"] {
            for v in ["pa", "ps"] {
                expected.push((file.to_string(), sdr.to_string(), v.to_string()));
            }
        }
    }
    assert_eq!(keys, expected);
    assert!(rows.iter().all(|r| r[1] == r[0].split('/').next().unwrap()));
    for r in &rows {
        let target: f64 = r[3].parse().unwrap();
        let achieved: f64 = r[4].parse().unwrap();
        assert!((achieved - target).abs() <= 0.01);
    }

    // Summary against an independent aggregation of the rows.
    let (sheader, summary) = read_csv(&dir.path().join("out/summary.csv"));
    assert_eq!(sheader, ["variant", "target_sdr", "n", "mean_delta_sdr", "std_delta_sdr"]);
    assert_eq!(summary.len(), 4);
    for s in &summary {
        let values: Vec<f64> = rows
            .iter()
            .filter(|r| r[2] == s[0] && r[3] == s[1])
            .map(|r| r[6].parse().unwrap())
            .collect();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert_eq!(s[2], "2");
        assert!((s[3].parse::<f64>().unwrap() - mean).abs() < 1e-9);
        assert!((s[4].parse::<f64>().unwrap() - var.sqrt()).abs() < 1e-9);
    }

    // Re-running is a no-op apart from rewriting the same rows.
    let before = std::fs::read_to_string(&results).unwrap();
    let out = declip(&["bench", p(&corpus), p(&job)]);
    assert_eq!(code(&out), 0);
    assert_eq!(std::fs::read_to_string(&results).unwrap(), before);

    // Drop two rows and shuffle the rest: only the missing ones are
    // recomputed and the file comes back in canonical order.
    let mut partial = rows.clone();
    partial.remove(5);
    partial.remove(0);
    partial.reverse();
    let mut w = csv::Writer::from_path(&results).unwrap();
    w.write_record(HEADER).unwrap();
    for r in &partial {
        w.write_record(r).unwrap();
    }
    w.flush().unwrap();
    drop(w);
    let out = declip(&["bench", p(&corpus), p(&job)]);
    assert_eq!(code(&out), 0);
    let (_, resumed) = read_csv(&results);
    assert_eq!(without_timing(&resumed), without_timing(&rows));
    for (i, r) in resumed.iter().enumerate() {
        if i != 0 && i != 5 {
            assert_eq!(r, &rows[i], "kept rows are not recomputed");
        }
    }

    // A fresh run elsewhere gives the same table up to timing.
    let job2 = bench_job(dir.path(), "out2");
    assert_eq!(code(&declip(&["bench", p(&corpus), p(&job2), "--workers", "1"])), 0);
    let (_, again) = read_csv(&dir.path().join("out2/results.csv"));
    assert_eq!(without_timing(&again), without_timing(&rows));
}

#[test]
fn bench_rejects_bad_jobs() {
    let dir = TempDir::new().unwrap();
    let corpus = toy_corpus(dir.path());
    let job = dir.path().join("bad.cfg");
    std::fs::write(&job, "variants = pa, xx\n").unwrap();
    assert_eq!(code(&declip(&["bench", p(&corpus), p(&job)])), 1);
    std::fs::write(&job, "sdrs = 0, 5\n").unwrap();
    assert_eq!(code(&declip(&["bench", p(&corpus), p(&job)])), 1);
    std::fs::write(&job, "colour = blue\n").unwrap();
    assert_eq!(code(&declip(&["bench", p(&corpus), p(&job)])), 1);
    std::fs::write(&job, "variants = pa\n").unwrap();
    assert_eq!(code(&declip(&["bench", p(&dir.path().join("nowhere")), p(&job)])), 2);
}

#[test]
fn bench_subsets_corpus_with_seed() {
    let dir = TempDir::new().unwrap();
    let corpus = toy_corpus(dir.path());
    let job = dir.path().join("job.cfg");
    std::fs::write(&job, "profile = speech\nvariants = pa\nsdrs = 10\nframe_len = 64\nmax_files = 1\nseed = 3\noutput_dir = sub\n").unwrap();
    assert_eq!(code(&declip(&["bench", p(&corpus), p(&job)])), 0);
    let (_, rows) = read_csv(&dir.path().join("sub/results.csv"));
    assert_eq!(rows.len(), 1);
    let job2 = dir.path().join("job2.cfg");
    std::fs::write(&job2, "profile = speech\nvariants = pa\nsdrs = 10\nframe_len = 64\nmax_files = 1\nseed = 3\noutput_dir = sub2\n").unwrap();
    assert_eq!(code(&declip(&["bench", p(&corpus), p(&job2)])), 0);
    let (_, rows2) = read_csv(&dir.path().join("sub2/results.csv"));
    assert_eq!(rows[0][0], rows2[0][0]);
}
