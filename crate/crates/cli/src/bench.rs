//! Batch benchmark over a corpus: every file is clipped to each target input
//! SDR and restored by each declipper, one CSV row per combination.
//!
//! Job file (`key = value`):
//!
//! ```text
//! profile    = music
//! variants   = pa, asa
//! sdrs       = 1, 3, 5, 10, 15, 20
//! i_max      = 1300
//! workers    = 4
//! max_files  = 20
//! seed       = 7
//! output_dir = results
//! ```
//!
//! Solver keys (beta, alpha, i_init, i_max, patterns, frame_len, detect_eps)
//! apply to every variant.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use declip_core::config::{parse_key_values, parse_value, DeclipperKind, PresetConfig};
use declip_core::metrics::{clipped_ratio, delta_db};
use declip_core::signal::DEFAULT_SDR_TOLERANCE_DB;
use declip_core::wav::read_wav;
use declip_core::{clip_to_target_sdr, declip_signal, normalize, sdr, PipelineConfig};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use walkdir::WalkDir;

use crate::commands::thread_pool;
use crate::error::{fmt_num, parse_num, usage};
use crate::BenchArgs;

pub const RESULTS_HEADER: [&str; 10] = [
    "file",
    "genre",
    "variant",
    "target_sdr",
    "input_sdr",
    "tau",
    "delta_sdr",
    "clipped_ratio",
    "iterations",
    "rt_ratio",
];

pub const SUMMARY_HEADER: [&str; 5] = ["variant", "target_sdr", "n", "mean_delta_sdr", "std_delta_sdr"];

pub const DEFAULT_SDRS: [f64; 6] = [1.0, 3.0, 5.0, 10.0, 15.0, 20.0];

const JOB_KEYS: [&str; 16] = [
    "profile",
    "variants",
    "sdrs",
    "beta",
    "alpha",
    "i_init",
    "i_max",
    "patterns",
    "frame_len",
    "detect_eps",
    "workers",
    "seed",
    "max_files",
    "output_dir",
    "tolerance",
    "model",
];

struct Job {
    variants: Vec<(DeclipperKind, PipelineConfig)>,
    sdrs: Vec<f64>,
    workers: Option<usize>,
    seed: u64,
    max_files: Option<usize>,
    output_dir: PathBuf,
    tolerance: f64,
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s).map_err(|e| usage(e.to_string())))
        .collect()
}

fn load_job(path: &Path, args: &BenchArgs) -> Result<Job> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let map = parse_key_values(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if let Some(key) = map.keys().find(|k| !JOB_KEYS.contains(&k.as_str())) {
        return Err(usage(format!("{}: unknown key '{key}'", path.display())));
    }
    let base = path.parent();
    let get = |k: &str| map.get(k).map(String::as_str);

    let codes: Vec<String> = match get("variants") {
        Some(v) => parse_list("variants", v)?,
        None => vec!["pa".into()],
    };
    if codes.is_empty() {
        return Err(usage("job lists no variants"));
    }
    let mut variants = Vec::new();
    for code in &codes {
        let kind = DeclipperKind::from_str(code).map_err(|e| usage(e.to_string()))?;
        if variants.iter().any(|(k, _)| *k == kind) {
            return Err(usage(format!("variant '{code}' listed twice")));
        }
        let mut entry: BTreeMap<String, String> = map.clone();
        entry.remove("model");
        entry.insert("variant".into(), kind.code().into());
        let cfg = PresetConfig::from_map(&entry, base).map_err(|e| usage(e.to_string()))?;
        let pipeline = cfg.pipeline_config().with_context(|| format!("preset for {code}"))?;
        variants.push((kind, pipeline));
    }

    let sdrs = match get("sdrs") {
        Some(v) => parse_list::<f64>("sdrs", v)?,
        None => DEFAULT_SDRS.to_vec(),
    };
    if sdrs.is_empty() || sdrs.iter().any(|s| !(*s > 0.0)) {
        return Err(usage("sdrs must be a non-empty list of positive dB values"));
    }
    let mut seen = HashSet::new();
    if !sdrs.iter().all(|s| seen.insert(fmt_num(*s))) {
        return Err(usage("sdrs contains duplicates"));
    }
    let opt = |k: &str| -> Result<Option<u64>> {
        get(k).map(|v| parse_value::<u64>(k, v).map_err(|e| usage(e.to_string()))).transpose()
    };
    let output_dir = match (&args.out_dir, get("output_dir")) {
        (Some(dir), _) => dir.clone(),
        (None, Some(dir)) => base.unwrap_or(Path::new(".")).join(dir),
        (None, None) => base.unwrap_or(Path::new(".")).join("bench_results"),
    };
    let tolerance = match get("tolerance") {
        Some(v) => parse_value("tolerance", v).map_err(|e| usage(e.to_string()))?,
        None => DEFAULT_SDR_TOLERANCE_DB,
    };
    Ok(Job {
        variants,
        sdrs,
        workers: args.workers.or(opt("workers")?.map(|w| w as usize)),
        seed: args.seed.or(opt("seed")?).unwrap_or(0),
        max_files: opt("max_files")?.map(|m| m as usize),
        output_dir,
        tolerance,
    })
}

struct CorpusFile {
    path: PathBuf,
    id: String,
    genre: String,
}

/// WAV files under `root`, ordered by id. With `max_files`, a seeded random
/// subset is kept, still in id order.
fn scan_corpus(root: &Path, max_files: Option<usize>, seed: u64) -> Result<Vec<CorpusFile>> {
    if !root.is_dir() {
        return Err(anyhow!(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("corpus directory {} not found", root.display()),
        )));
    }
    let mut files = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.with_context(|| format!("scanning {}", root.display()))?;
        let path = entry.path();
        let is_wav = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("wav"));
        if !entry.file_type().is_file() || !is_wav {
            continue;
        }
        let rel = path.strip_prefix(root).unwrap_or(path);
        let parts: Vec<String> = rel
            .with_extension("")
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect();
        let genre = if parts.len() > 1 { parts[parts.len() - 2].clone() } else { String::new() };
        files.push(CorpusFile {
            path: path.to_path_buf(),
            id: parts.join("/"),
            genre,
        });
    }
    files.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(max) = max_files {
        if max < files.len() {
            files.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            files.truncate(max);
            files.sort_by(|a, b| a.id.cmp(&b.id));
        }
    }
    Ok(files)
}

type RowKey = (String, String, String);

fn row_key(row: &[String]) -> RowKey {
    (row[0].clone(), row[2].clone(), row[3].clone())
}

fn read_existing(path: &Path) -> Result<Vec<Vec<String>>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header: Vec<String> = reader.headers()?.iter().map(String::from).collect();
    if header != RESULTS_HEADER {
        return Err(anyhow!(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("{} has an unexpected header; move it away to start over", path.display()),
        )));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.with_context(|| format!("reading {}", path.display()))?;
        rows.push(record.iter().map(String::from).collect());
    }
    Ok(rows)
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    {
        let mut w = csv::Writer::from_path(&tmp).with_context(|| format!("writing {}", tmp.display()))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
    }
    std::fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Runs every pending (variant, SDR) pair for one file, appending rows as
/// they complete.
fn process_file(
    file: &CorpusFile,
    pending: &[(usize, usize)],
    job: &Job,
    sink: &Mutex<csv::Writer<File>>,
) -> Result<Vec<Vec<String>>> {
    let x = normalize(&read_wav(&file.path)?.signal).with_context(|| file.id.clone())?;
    let mut rows = Vec::new();
    for (s_idx, &target) in job.sdrs.iter().enumerate() {
        let variants: Vec<usize> = pending.iter().filter(|(_, s)| *s == s_idx).map(|(v, _)| *v).collect();
        if variants.is_empty() {
            continue;
        }
        let (y, tau) = clip_to_target_sdr(&x, target, job.tolerance)
            .with_context(|| format!("{} at {} dB", file.id, fmt_num(target)))?;
        let input_sdr = sdr(&x, &y)?;
        for v_idx in variants {
            let (kind, cfg) = &job.variants[v_idx];
            let start = Instant::now();
            let out = declip_signal(&y, tau, cfg).with_context(|| format!("{} with {kind}", file.id))?;
            let secs = start.elapsed().as_secs_f64();
            let delta = delta_db(sdr(&x, &out.signal)?, input_sdr);
            let row = vec![
                file.id.clone(),
                file.genre.clone(),
                kind.code().to_string(),
                fmt_num(target),
                fmt_num(input_sdr),
                fmt_num(tau),
                fmt_num(delta),
                fmt_num(clipped_ratio(&y, tau)),
                out.total_iterations().to_string(),
                fmt_num(secs / x.duration_secs()),
            ];
            {
                let mut w = sink.lock().expect("results writer poisoned");
                w.write_record(&row)?;
                w.flush()?;
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

struct Stats {
    n: usize,
    mean: f64,
    std: f64,
}

/// Mean and sample standard deviation (n - 1 denominator, 0 for one value).
fn stats(values: &[f64]) -> Stats {
    let n = values.len();
    if n == 0 {
        return Stats { n, mean: f64::NAN, std: f64::NAN };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if !mean.is_finite() {
        f64::NAN
    } else if n < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    Stats { n, mean, std }
}

pub fn run(args: &BenchArgs) -> Result<()> {
    let job = load_job(&args.job, args)?;
    let files = scan_corpus(&args.corpus, job.max_files, job.seed)?;
    std::fs::create_dir_all(&job.output_dir)
        .with_context(|| format!("creating {}", job.output_dir.display()))?;
    let results_path = job.output_dir.join("results.csv");
    let summary_path = job.output_dir.join("summary.csv");

    let existing = read_existing(&results_path)?;
    // Rows are rewritten in canonical order at the end; until then new rows
    // are appended so an interrupted run keeps its progress.
    write_csv(&results_path, &RESULTS_HEADER, &existing)?;
    let done: HashSet<RowKey> = existing.iter().map(|r| row_key(r)).collect();

    let mut work: Vec<(usize, Vec<(usize, usize)>)> = Vec::new();
    for (f_idx, file) in files.iter().enumerate() {
        let mut pending = Vec::new();
        for (s_idx, target) in job.sdrs.iter().enumerate() {
            for (v_idx, (kind, _)) in job.variants.iter().enumerate() {
                let key = (file.id.clone(), kind.code().to_string(), fmt_num(*target));
                if !done.contains(&key) {
                    pending.push((v_idx, s_idx));
                }
            }
        }
        if !pending.is_empty() {
            work.push((f_idx, pending));
        }
    }

    let sink = Mutex::new(csv::Writer::from_writer(
        OpenOptions::new()
            .append(true)
            .open(&results_path)
            .with_context(|| format!("opening {}", results_path.display()))?,
    ));
    let pool = thread_pool(job.workers)?;
    let outcomes: Vec<Result<Vec<Vec<String>>>> = pool.install(|| {
        work.par_iter()
            .map(|(f_idx, pending)| process_file(&files[*f_idx], pending, &job, &sink))
            .collect()
    });
    drop(sink);

    let mut rows = existing;
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(new_rows) => rows.extend(new_rows),
            Err(e) => {
                eprintln!("error: {e:#}");
                failures.push(e);
            }
        }
    }

    // Canonical order: file, SDR, variant as planned; rows from other jobs
    // keep their relative order at the end.
    let mut rank: HashMap<RowKey, usize> = HashMap::new();
    for (f_idx, file) in files.iter().enumerate() {
        for (s_idx, target) in job.sdrs.iter().enumerate() {
            for (v_idx, (kind, _)) in job.variants.iter().enumerate() {
                let key = (file.id.clone(), kind.code().to_string(), fmt_num(*target));
                rank.insert(key, (f_idx * job.sdrs.len() + s_idx) * job.variants.len() + v_idx);
            }
        }
    }
    rows.sort_by_key(|r| rank.get(&row_key(r)).copied().unwrap_or(usize::MAX));
    write_csv(&results_path, &RESULTS_HEADER, &rows)?;

    let mut summary = Vec::new();
    for (kind, _) in &job.variants {
        for target in &job.sdrs {
            let target = fmt_num(*target);
            let values: Vec<f64> = rows
                .iter()
                .filter(|r| r[2] == kind.code() && r[3] == target && rank.contains_key(&row_key(r)))
                .filter_map(|r| parse_num(&r[6]))
                .collect();
            let s = stats(&values);
            summary.push(vec![
                kind.code().to_string(),
                target,
                s.n.to_string(),
                fmt_num(s.mean),
                fmt_num(s.std),
            ]);
        }
    }
    write_csv(&summary_path, &SUMMARY_HEADER, &summary)?;
    print_table(&job, &summary);

    match failures.into_iter().next() {
        Some(first) => Err(first.context("some files could not be processed")),
        None => Ok(()),
    }
}

/// Mean +- std delta SDR, one line per variant, one column per input SDR.
fn print_table(job: &Job, summary: &[Vec<String>]) {
    let mut header = format!("{:<8}", "variant");
    for target in &job.sdrs {
        header.push_str(&format!("{:>16}", format!("{} dB", fmt_num(*target))));
    }
    println!("{header}");
    for (v_idx, (kind, _)) in job.variants.iter().enumerate() {
        let mut line = format!("{:<8}", kind.code());
        for s_idx in 0..job.sdrs.len() {
            let row = &summary[v_idx * job.sdrs.len() + s_idx];
            let cell = match (parse_num(&row[3]), parse_num(&row[4])) {
                (Some(m), Some(s)) if !m.is_nan() => format!("{m:.2}\u{b1}{s:.2}"),
                _ => "-".into(),
            };
            line.push_str(&format!("{cell:>16}"));
        }
        println!("{line}");
    }
}
