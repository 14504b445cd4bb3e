//! Exit-code classification.

use std::fmt;

use declip_core::DeclipError;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_IO: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

/// Bad or missing command-line input that clap cannot catch on its own.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn core_code(e: &DeclipError) -> u8 {
    match e {
        DeclipError::Wav(_) | DeclipError::Io(_) => EXIT_IO,
        DeclipError::Config(_)
        | DeclipError::InvalidPreset(_)
        | DeclipError::InvalidPattern(_)
        | DeclipError::InvalidWindow(_) => EXIT_USAGE,
        DeclipError::DegenerateSignal(_)
        | DeclipError::InvalidThreshold(_)
        | DeclipError::TargetUnreachable { .. }
        | DeclipError::Shape(_) => EXIT_NUMERICAL,
    }
}

/// Maps an error chain to the process exit code.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<DeclipError>() {
            return core_code(e);
        }
        if cause.is::<std::io::Error>() || cause.is::<csv::Error>() {
            return EXIT_IO;
        }
    }
    EXIT_IO
}

/// Locale-independent number formatting for CSV and sidecars: shortest
/// round-trip decimal, `inf`/`-inf` for infinities, empty for NaN.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

pub fn parse_num(s: &str) -> Option<f64> {
    match s.trim() {
        "" => Some(f64::NAN),
        "inf" | "+inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        t => t.parse().ok(),
    }
}
