//! Declipper selection and `key = value` preset files.
//!
//! ```text
//! # adaptive social cosparse for music
//! variant  = analysis
//! model    = adaptive-social
//! profile  = music
//! beta     = 1e-3
//! alpha    = 0.99
//! i_init   = 10
//! i_max    = 1000000
//! patterns = my_patterns.txt
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{DeclipError, Result};
use crate::pattern::{Pattern, PatternSet, Profile};
use crate::pipeline::PipelineConfig;
use crate::solver::{SolverPreset, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Plain,
    Social,
    AdaptiveSocial,
}

impl FromStr for ModelKind {
    type Err = DeclipError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "plain" => Ok(ModelKind::Plain),
            "social" => Ok(ModelKind::Social),
            "adaptive-social" | "adaptive_social" | "adaptive" => Ok(ModelKind::AdaptiveSocial),
            other => Err(DeclipError::Config(format!("unknown model '{other}'"))),
        }
    }
}

/// One of the six declippers, named by its short code
/// (`pa`, `ps`, `sa`, `ss`, `asa`, `ass`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DeclipperKind {
    pub model: ModelKind,
    pub variant: Variant,
}

impl DeclipperKind {
    pub const ALL: [DeclipperKind; 6] = [
        DeclipperKind::new(ModelKind::Plain, Variant::Analysis),
        DeclipperKind::new(ModelKind::Plain, Variant::Synthesis),
        DeclipperKind::new(ModelKind::Social, Variant::Analysis),
        DeclipperKind::new(ModelKind::Social, Variant::Synthesis),
        DeclipperKind::new(ModelKind::AdaptiveSocial, Variant::Analysis),
        DeclipperKind::new(ModelKind::AdaptiveSocial, Variant::Synthesis),
    ];

    pub const fn new(model: ModelKind, variant: Variant) -> Self {
        Self { model, variant }
    }

    pub fn code(self) -> &'static str {
        match (self.model, self.variant) {
            (ModelKind::Plain, Variant::Analysis) => "pa",
            (ModelKind::Plain, Variant::Synthesis) => "ps",
            (ModelKind::Social, Variant::Analysis) => "sa",
            (ModelKind::Social, Variant::Synthesis) => "ss",
            (ModelKind::AdaptiveSocial, Variant::Analysis) => "asa",
            (ModelKind::AdaptiveSocial, Variant::Synthesis) => "ass",
        }
    }

    /// Preset with default parameters. The fixed social pattern spans time
    /// only (7 frames for music, 3 for speech); adaptive models use
    /// `patterns` or the profile's built-in set.
    pub fn preset(self, profile: Profile, patterns: Option<PatternSet>) -> SolverPreset {
        match self.model {
            ModelKind::Plain => SolverPreset::plain(self.variant),
            ModelKind::Social => {
                let half = match profile {
                    Profile::Music => 3,
                    Profile::Speech => 1,
                };
                SolverPreset::social(self.variant, Pattern::temporal(half))
            }
            ModelKind::AdaptiveSocial => SolverPreset::adaptive_social(
                self.variant,
                patterns.unwrap_or_else(|| PatternSet::builtin(profile)),
            ),
        }
    }
}

impl fmt::Display for DeclipperKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for DeclipperKind {
    type Err = DeclipError;

    fn from_str(s: &str) -> Result<Self> {
        let code = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|k| k.code() == code)
            .ok_or_else(|| DeclipError::Config(format!("unknown variant code '{code}'")))
    }
}

/// Parses `key = value` lines; `#` starts a comment. Later keys override
/// earlier ones.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| {
            DeclipError::Config(format!("line {}: expected 'key = value'", lineno + 1))
        })?;
        let key = key.trim().to_ascii_lowercase();
        if key.is_empty() {
            return Err(DeclipError::Config(format!("line {}: empty key", lineno + 1)));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

pub fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| DeclipError::Config(format!("invalid value '{value}' for '{key}'")))
}

/// Solver and pipeline settings as read from a preset file.
#[derive(Debug, Clone, PartialEq)]
pub struct PresetConfig {
    pub kind: DeclipperKind,
    pub profile: Profile,
    pub beta: Option<f64>,
    pub alpha: Option<f64>,
    pub i_init: Option<usize>,
    pub i_max: Option<usize>,
    pub patterns: Option<PathBuf>,
    pub frame_len: Option<usize>,
    pub detect_eps: Option<f64>,
}

impl PresetConfig {
    pub fn new(kind: DeclipperKind, profile: Profile) -> Self {
        Self {
            kind,
            profile,
            beta: None,
            alpha: None,
            i_init: None,
            i_max: None,
            patterns: None,
            frame_len: None,
            detect_eps: None,
        }
    }

    /// Reads the preset keys from a parsed map, ignoring unrelated keys.
    /// Relative pattern paths resolve against `base_dir`.
    pub fn from_map(map: &BTreeMap<String, String>, base_dir: Option<&Path>) -> Result<Self> {
        let get = |k: &str| map.get(k).map(String::as_str);
        let profile = get("profile").map(Profile::from_str).transpose()?.unwrap_or(Profile::Music);

        let mut variant = Variant::Analysis;
        let mut model = None;
        if let Some(v) = get("variant") {
            match v.trim().to_ascii_lowercase().as_str() {
                "analysis" | "cosparse" => variant = Variant::Analysis,
                "synthesis" | "sparse" => variant = Variant::Synthesis,
                code => {
                    let kind = DeclipperKind::from_str(code)?;
                    variant = kind.variant;
                    model = Some(kind.model);
                }
            }
        }
        if let Some(m) = get("model") {
            model = Some(ModelKind::from_str(m)?);
        }
        let kind = DeclipperKind::new(model.unwrap_or(ModelKind::Plain), variant);

        let opt = |k: &str| -> Result<Option<f64>> { get(k).map(|v| parse_value(k, v)).transpose() };
        let opt_usize = |k: &str| -> Result<Option<usize>> {
            get(k)
                .map(|v| {
                    // Accept scientific notation such as 1e6 for iteration caps.
                    let f: f64 = parse_value(k, v)?;
                    if f < 0.0 || f.fract() != 0.0 {
                        return Err(DeclipError::Config(format!("'{k}' must be a non-negative integer")));
                    }
                    Ok(f as usize)
                })
                .transpose()
        };
        let patterns = get("patterns").filter(|p| !p.is_empty()).map(|p| {
            let path = PathBuf::from(p);
            match base_dir {
                Some(dir) if path.is_relative() => dir.join(path),
                _ => path,
            }
        });
        Ok(Self {
            kind,
            profile,
            beta: opt("beta")?,
            alpha: opt("alpha")?,
            i_init: opt_usize("i_init")?,
            i_max: opt_usize("i_max")?,
            patterns,
            frame_len: opt_usize("frame_len")?,
            detect_eps: opt("detect_eps")?,
        })
    }

    pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        Self::from_map(&parse_key_values(text)?, base_dir)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, path.parent())
    }

    pub fn solver_preset(&self) -> Result<SolverPreset> {
        let patterns = self.patterns.as_deref().map(PatternSet::load).transpose()?;
        let mut preset = self.kind.preset(self.profile, patterns);
        if let Some(beta) = self.beta {
            preset.beta = beta;
        }
        if let Some(alpha) = self.alpha {
            preset = preset.with_alpha(alpha);
        }
        if let Some(i_init) = self.i_init {
            preset.i_init = i_init;
        }
        if let Some(i_max) = self.i_max {
            preset.i_max = i_max;
        }
        preset.validate()?;
        Ok(preset)
    }

    pub fn pipeline_config(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::new(self.profile, self.solver_preset()?);
        cfg.frame_len = self.frame_len;
        if let Some(eps) = self.detect_eps {
            cfg.detect_eps = eps;
        }
        Ok(cfg)
    }
}
