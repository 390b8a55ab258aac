//! Latency profiles and the seeded sampler that draws per-request delays.
//!
//! All randomness in the engine comes from [`SessionRng`], a ChaCha8 stream
//! cipher generator (`rand_chacha::ChaCha8Rng`) seeded through
//! `SeedableRng::seed_from_u64`. Independent streams of one session seed
//! are selected with `set_stream`, so adding draws to one stream never
//! shifts another.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type SessionRng = ChaCha8Rng;

/// Stream used for data generation.
pub const DATA_STREAM: u64 = 0;
/// Stream used for latency draws.
pub const LATENCY_STREAM: u64 = 1;

/// Seeded generator on one of the session's streams.
pub fn session_rng(seed: u64, stream: u64) -> SessionRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatencyError {
    #[error("latency trace exhausted after {0} samples")]
    Exhausted(usize),
    #[error("invalid latency profile: {0}")]
    Invalid(String),
    #[error("cannot read latency trace {path}: {detail}")]
    Io { path: String, detail: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatencyProfile {
    None,
    Fixed { d: f64 },
    Uniform { lo: f64, hi: f64 },
    /// Replayed delays, consumed in order.
    Trace { samples: Vec<f64> },
}

impl LatencyProfile {
    pub fn validate(&self) -> Result<(), LatencyError> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        match self {
            LatencyProfile::None => Ok(()),
            LatencyProfile::Fixed { d } if ok(*d) => Ok(()),
            LatencyProfile::Uniform { lo, hi } if ok(*lo) && hi.is_finite() && lo < hi => Ok(()),
            LatencyProfile::Trace { samples } if samples.iter().all(|s| ok(*s)) => Ok(()),
            other => Err(LatencyError::Invalid(format!("{other:?}"))),
        }
    }

    /// Parses the CLI syntax, reading `trace:PATH` files (one float per line).
    pub fn parse(text: &str) -> Result<Self, LatencyError> {
        if let Some(path) = text.strip_prefix("trace:") {
            return Self::from_trace_file(path);
        }
        text.parse()
    }

    pub fn from_trace_file(path: impl AsRef<Path>) -> Result<Self, LatencyError> {
        let path = path.as_ref();
        let io_err = |detail: String| LatencyError::Io {
            path: path.display().to_string(),
            detail,
        };
        let text = std::fs::read_to_string(path).map_err(|e| io_err(e.to_string()))?;
        let samples = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                l.trim()
                    .parse::<f64>()
                    .map_err(|_| io_err(format!("line {}: `{}` is not a number", i + 1, l.trim())))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let profile = LatencyProfile::Trace { samples };
        profile.validate()?;
        Ok(profile)
    }
}

impl FromStr for LatencyProfile {
    type Err = LatencyError;

    /// Parses `none`, `fixed:S` and `uniform:LO,HI`. Trace files go through
    /// [`LatencyProfile::parse`].
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| LatencyError::Invalid(format!("`{t}` is not a number")))
        };
        let profile = if s == "none" {
            LatencyProfile::None
        } else if let Some(d) = s.strip_prefix("fixed:") {
            LatencyProfile::Fixed { d: num(d)? }
        } else if let Some(range) = s.strip_prefix("uniform:") {
            let (lo, hi) = range
                .split_once(',')
                .ok_or_else(|| LatencyError::Invalid(format!("expected uniform:LO,HI, got `{s}`")))?;
            LatencyProfile::Uniform {
                lo: num(lo)?,
                hi: num(hi)?,
            }
        } else {
            return Err(LatencyError::Invalid(format!("unknown latency profile `{s}`")));
        };
        profile.validate()?;
        Ok(profile)
    }
}

impl fmt::Display for LatencyProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LatencyProfile::None => write!(f, "none"),
            LatencyProfile::Fixed { d } => write!(f, "fixed:{d}"),
            LatencyProfile::Uniform { lo, hi } => write!(f, "uniform:{lo},{hi}"),
            LatencyProfile::Trace { samples } => write!(f, "trace[{}]", samples.len()),
        }
    }
}

/// Draws latencies from a profile, keeping the read position of traces.
#[derive(Debug, Clone)]
pub struct LatencySampler {
    profile: LatencyProfile,
    cursor: usize,
    rng: SessionRng,
}

impl LatencySampler {
    pub fn new(profile: LatencyProfile, rng: SessionRng) -> Self {
        Self {
            profile,
            cursor: 0,
            rng,
        }
    }

    pub fn profile(&self) -> &LatencyProfile {
        &self.profile
    }

    pub fn sample(&mut self) -> Result<f64, LatencyError> {
        sample_latency(&self.profile, &mut self.cursor, &mut self.rng)
    }
}

/// One latency draw. `cursor` is the read position for `Trace` profiles.
pub fn sample_latency<R: Rng + ?Sized>(
    profile: &LatencyProfile,
    cursor: &mut usize,
    rng: &mut R,
) -> Result<f64, LatencyError> {
    match profile {
        LatencyProfile::None => Ok(0.0),
        LatencyProfile::Fixed { d } => Ok(*d),
        LatencyProfile::Uniform { lo, hi } => Ok(rng.gen_range(*lo..*hi)),
        LatencyProfile::Trace { samples } => {
            let value = samples.get(*cursor).copied().ok_or(LatencyError::Exhausted(samples.len()))?;
            *cursor += 1;
            Ok(value)
        }
    }
}
