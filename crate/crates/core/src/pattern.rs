//! Binary time-frequency neighborhoods for social shrinkage.
//!
//! Pattern file format: one pattern per block of rows, rows of `0`/`1`
//! separated by whitespace, blank line between patterns, `#` starts a
//! comment. Row 0 is the lowest frequency offset (`-F`), column 0 the
//! earliest frame offset (`-T`).

use std::fmt;
use std::path::Path;

use ndarray::Array2;

use crate::error::{DeclipError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Music,
    Speech,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Music => "music",
            Profile::Speech => "speech",
        }
    }
}

impl std::str::FromStr for Profile {
    type Err = DeclipError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "music" => Ok(Profile::Music),
            "speech" => Ok(Profile::Speech),
            other => Err(DeclipError::Config(format!("unknown profile '{other}'"))),
        }
    }
}

/// `(2F+1) x (2T+1)` binary stencil centered on the coefficient it gates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    grid: Array2<bool>,
}

impl Pattern {
    pub fn new(grid: Array2<bool>) -> Result<Self> {
        let (rows, cols) = grid.dim();
        if rows % 2 == 0 || cols % 2 == 0 {
            return Err(DeclipError::InvalidPattern(format!(
                "pattern dimensions {rows}x{cols} must be odd"
            )));
        }
        if !grid.iter().any(|b| *b) {
            return Err(DeclipError::InvalidPattern("pattern has no active cell".into()));
        }
        Ok(Self { grid })
    }

    pub fn from_rows(rows: &[&[u8]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.is_empty() || rows.iter().any(|r| r.len() != cols) {
            return Err(DeclipError::InvalidPattern("ragged or empty rows".into()));
        }
        let grid = Array2::from_shape_fn((rows.len(), cols), |(i, j)| rows[i][j] != 0);
        Self::new(grid)
    }

    /// `1 x (2T+1)` all-ones pattern spanning time only.
    pub fn temporal(half_extent: usize) -> Self {
        Self {
            grid: Array2::from_elem((1, 2 * half_extent + 1), true),
        }
    }

    pub fn grid(&self) -> &Array2<bool> {
        &self.grid
    }

    /// Frequency half-extent `F`.
    pub fn freq_half(&self) -> usize {
        self.grid.nrows() / 2
    }

    /// Temporal half-extent `T`.
    pub fn time_half(&self) -> usize {
        self.grid.ncols() / 2
    }

    /// Number of active cells.
    pub fn weight(&self) -> usize {
        self.grid.iter().filter(|b| **b).count()
    }

    /// Active `(df, dt)` offsets relative to the center.
    pub fn offsets(&self) -> Vec<(isize, isize)> {
        let (f, t) = (self.freq_half() as isize, self.time_half() as isize);
        self.grid
            .indexed_iter()
            .filter(|(_, b)| **b)
            .map(|((i, j), _)| (i as isize - f, j as isize - t))
            .collect()
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.grid.rows() {
            let cells: Vec<&str> = row.iter().map(|b| if *b { "1" } else { "0" }).collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternSet {
    pub patterns: Vec<Pattern>,
}

const MUSIC_PATTERNS: &str = "\
# tonal
0 0 0 0 0
0 0 0 0 0
1 1 1 1 1
0 0 0 0 0
0 0 0 0 0

# pre-echo
0 0 0 0 0
0 0 1 0 0
0 0 1 1 1
0 0 1 0 0
0 0 0 0 0

# transient
0 0 1 0 0
0 0 1 0 0
0 0 1 0 0
0 0 1 0 0
0 0 1 0 0

# rising
0 0 0 0 1
0 0 0 1 0
0 0 1 0 0
0 1 0 0 0
1 0 0 0 0

# falling
1 0 0 0 0
0 1 0 0 0
0 0 1 0 0
0 0 0 1 0
0 0 0 0 1

# blob
0 0 0 0 0
0 1 1 1 0
0 1 1 1 0
0 1 1 1 0
0 0 0 0 0
";

const SPEECH_PATTERNS: &str = "\
0 0 0
0 0 0
1 1 1
0 0 0
0 0 0

0 0 0
1 0 0
1 1 1
1 0 0
0 0 0

0 1 0
0 1 0
0 1 0
0 1 0
0 1 0

0 0 0
0 0 1
0 1 0
1 0 0
0 0 0

0 0 0
1 0 0
0 1 0
0 0 1
0 0 0

0 0 0
1 1 1
1 1 1
1 1 1
0 0 0
";

impl PatternSet {
    pub fn builtin(profile: Profile) -> Self {
        let text = match profile {
            Profile::Music => MUSIC_PATTERNS,
            Profile::Speech => SPEECH_PATTERNS,
        };
        Self::parse(text).expect("built-in pattern sets are well formed")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut patterns = Vec::new();
        let mut rows: Vec<Vec<u8>> = Vec::new();
        let flush = |rows: &mut Vec<Vec<u8>>, out: &mut Vec<Pattern>| -> Result<()> {
            if rows.is_empty() {
                return Ok(());
            }
            let refs: Vec<&[u8]> = rows.iter().map(|r| r.as_slice()).collect();
            out.push(Pattern::from_rows(&refs)?);
            rows.clear();
            Ok(())
        };
        for (lineno, line) in text.lines().enumerate() {
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                // Comment-only lines do not separate patterns.
                if line.trim().is_empty() {
                    flush(&mut rows, &mut patterns)?;
                }
                continue;
            }
            let row = content
                .split_whitespace()
                .map(|tok| match tok {
                    "0" => Ok(0u8),
                    "1" => Ok(1u8),
                    other => Err(DeclipError::InvalidPattern(format!(
                        "line {}: unexpected token '{other}'",
                        lineno + 1
                    ))),
                })
                .collect::<Result<Vec<u8>>>()?;
            rows.push(row);
        }
        flush(&mut rows, &mut patterns)?;
        if patterns.is_empty() {
            return Err(DeclipError::InvalidPattern("no patterns found".into()));
        }
        Ok(Self { patterns })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }
}

impl fmt::Display for PatternSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.patterns.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}
