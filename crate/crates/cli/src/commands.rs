//! The clip, declip and eval subcommands.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use anyhow::{Context, Result};
use declip_core::config::{parse_key_values, parse_value, DeclipperKind, PresetConfig};
use declip_core::metrics::{clipped_ratio_samples, delta_db, sdr_samples};
use declip_core::wav::{read_wav, write_wav, WavFormat};
use declip_core::{clip_to_target_sdr, declip_signal, evaluate, hard_clip, normalize, sdr, Profile, Signal};

use crate::error::{fmt_num, usage};
use crate::{ClipArgs, DeclipArgs, EvalArgs};

/// Metadata written next to a clipped file: `<file>.meta`.
pub fn sidecar_path(wav: &Path) -> PathBuf {
    let mut name = wav.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

fn read_sidecar(wav: &Path) -> Result<Option<BTreeMap<String, String>>> {
    let path = sidecar_path(wav);
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Some(parse_key_values(&text).with_context(|| format!("parsing {}", path.display()))?))
}

/// `--tau` if given, else the `tau` entry of the file's sidecar.
fn resolve_tau(flag: Option<f64>, wav: &Path) -> Result<f64> {
    let tau = match flag {
        Some(tau) => tau,
        None => {
            let map = read_sidecar(wav)?.ok_or_else(|| {
                usage(format!(
                    "no --tau given and no sidecar at {}",
                    sidecar_path(wav).display()
                ))
            })?;
            let raw = map
                .get("tau")
                .ok_or_else(|| usage(format!("{} has no tau entry", sidecar_path(wav).display())))?;
            parse_value("tau", raw)?
        }
    };
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(usage(format!("tau must be a positive number, got {tau}")));
    }
    Ok(tau)
}

fn parse_format(s: &str) -> Result<WavFormat> {
    WavFormat::from_str(s).map_err(|e| usage(e.to_string()))
}

fn read(path: &Path) -> Result<declip_core::wav::WavData> {
    read_wav(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, signal: &Signal, format: WavFormat) -> Result<()> {
    write_wav(path, signal, format).with_context(|| format!("writing {}", path.display()))
}

fn format_name(format: WavFormat) -> &'static str {
    match format {
        WavFormat::Pcm16 => "pcm16",
        WavFormat::Float32 => "float32",
    }
}

pub fn clip(args: &ClipArgs) -> Result<()> {
    if let Some(target) = args.target_sdr {
        if !(target > 0.0) {
            return Err(usage(format!(
                "--target-sdr must be positive (0 dB is only reached as tau -> 0), got {target}"
            )));
        }
    }
    if !(args.tol > 0.0) {
        return Err(usage("--tol must be positive"));
    }
    let data = read(&args.input)?;
    let format = match &args.format {
        Some(f) => parse_format(f)?,
        None => data.format,
    };
    let x = normalize(&data.signal)?;

    // The threshold is snapped to a value the output format stores exactly,
    // so that re-reading the file finds every clipped sample at +-tau.
    let tau = match (args.target_sdr, args.tau) {
        (_, Some(tau)) => {
            if !(tau > 0.0) {
                return Err(usage(format!("--tau must be positive, got {tau}")));
            }
            if tau >= 1.0 {
                tau
            } else {
                format.quantize(tau)
            }
        }
        (Some(target), None) => format.quantize(clip_to_target_sdr(&x, target, args.tol)?.1),
        (None, None) => return Err(usage("one of --target-sdr or --tau is required")),
    };
    let y = hard_clip(&x, tau)?;
    write(&args.output, &y, format)?;

    let stored: Vec<f64> = y.samples().iter().map(|v| format.quantize(*v)).collect();
    let achieved = sdr_samples(x.samples(), &stored)?;
    let mut meta = format!(
        "source = {}\nformat = {}\ntau = {}\nachieved_sdr = {}\nclipped_ratio = {}\n",
        args.input.display(),
        format_name(format),
        fmt_num(tau),
        fmt_num(achieved),
        fmt_num(clipped_ratio_samples(&stored, tau)),
    );
    if let Some(target) = args.target_sdr {
        meta.push_str(&format!("target_sdr = {}\n", fmt_num(target)));
    }
    let side = sidecar_path(&args.output);
    std::fs::write(&side, meta).with_context(|| format!("writing {}", side.display()))?;
    println!("tau={} input_sdr={}", fmt_num(tau), fmt_num(achieved));
    Ok(())
}

fn preset_config(args: &DeclipArgs) -> Result<PresetConfig> {
    let mut cfg = match &args.preset {
        Some(path) => PresetConfig::load(path).with_context(|| format!("loading preset {}", path.display()))?,
        None => PresetConfig::new(DeclipperKind::from_str("pa")?, Profile::Music),
    };
    if let Some(v) = &args.variant {
        cfg.kind = DeclipperKind::from_str(v).map_err(|e| usage(e.to_string()))?;
    }
    if let Some(p) = &args.profile {
        cfg.profile = Profile::from_str(p).map_err(|e| usage(e.to_string()))?;
    }
    if args.beta.is_some() {
        cfg.beta = args.beta;
    }
    if args.alpha.is_some() {
        cfg.alpha = args.alpha;
    }
    if let Some(imax) = &args.imax {
        let v: f64 = imax
            .parse()
            .map_err(|_| usage(format!("--imax expects a number, got '{imax}'")))?;
        if !(v >= 1.0) || v.fract() != 0.0 {
            return Err(usage(format!("--imax must be a positive integer, got '{imax}'")));
        }
        cfg.i_max = Some(v as usize);
    }
    if args.i_init.is_some() {
        cfg.i_init = args.i_init;
    }
    if args.patterns.is_some() {
        cfg.patterns = args.patterns.clone();
    }
    if args.frame_len.is_some() {
        cfg.frame_len = args.frame_len;
    }
    Ok(cfg)
}

pub fn thread_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(usage("--workers must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    builder.build().context("starting worker threads")
}

pub fn declip(args: &DeclipArgs) -> Result<()> {
    let cfg = preset_config(args)?;
    let format = parse_format(&args.format)?;
    let tau = resolve_tau(args.tau, &args.input)?;
    let pipeline = cfg.pipeline_config()?;
    let pool = thread_pool(args.workers)?;
    let y = read(&args.input)?.signal;
    let reference = match &args.reference {
        Some(path) => Some(normalize(&read(path)?.signal)?),
        None => None,
    };

    let start = Instant::now();
    let out = pool.install(|| declip_signal(&y, tau, &pipeline))?;
    let secs = start.elapsed().as_secs_f64();
    write(&args.output, &out.signal, format)?;

    let mut line = format!(
        "variant={} profile={} tau={} frames={} solved={} iterations={} seconds={:.3} xrt={:.3}",
        cfg.kind,
        cfg.profile.name(),
        fmt_num(tau),
        out.frame_count,
        out.stats.len(),
        out.total_iterations(),
        secs,
        if y.duration_secs() > 0.0 { secs / y.duration_secs() } else { f64::NAN },
    );
    if let Some(clean) = reference {
        let before = sdr(&clean, &y)?;
        let after = sdr(&clean, &out.signal)?;
        line.push_str(&format!(
            " input_sdr={} output_sdr={} delta_sdr={}",
            fmt_num(before),
            fmt_num(after),
            fmt_num(delta_db(after, before))
        ));
    }
    println!("{line}");
    Ok(())
}

pub const EVAL_HEADER: &str = "input_sdr,output_sdr,delta_sdr,clipped_ratio,tau,runtime_ratio";

pub fn eval(args: &EvalArgs) -> Result<()> {
    let tau = resolve_tau(args.tau, &args.degraded)?;
    let clean = normalize(&read(&args.clean)?.signal)?;
    let degraded = read(&args.degraded)?.signal;
    let restored = read(&args.restored)?.signal;
    let report = evaluate(&clean, &degraded, &restored, tau, args.runtime)?;
    if args.header {
        println!("{EVAL_HEADER}");
    }
    println!(
        "{},{},{},{},{},{}",
        fmt_num(report.input_sdr),
        fmt_num(report.output_sdr),
        fmt_num(report.delta_sdr),
        fmt_num(report.clipped_ratio),
        fmt_num(report.tau),
        fmt_num(report.runtime_ratio)
    );
    Ok(())
}
