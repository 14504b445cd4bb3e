use thiserror::Error;

#[derive(Debug, Error)]
pub enum DeclipError {
    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),

    #[error("invalid clipping threshold {0} (must be > 0)")]
    InvalidThreshold(f64),

    #[error(
        "target SDR {target} dB unreachable within tolerance; closest bracket [{low_sdr} dB, {high_sdr} dB] for tau in [{low_tau}, {high_tau}]"
    )]
    TargetUnreachable {
        target: f64,
        low_tau: f64,
        high_tau: f64,
        low_sdr: f64,
        high_sdr: f64,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid preset: {0}")]
    InvalidPreset(String),

    #[error("invalid pattern: {0}")]
    InvalidPattern(String),

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("wav error: {0}")]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DeclipError>;
