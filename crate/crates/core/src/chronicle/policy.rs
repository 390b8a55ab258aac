use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::types::Scheme;
use super::ChronicleError;

pub const DEFAULT_MIN_DWELL: f64 = 1.0;

/// Declarative rendering policy.
///
/// Text syntax (CLI and config): `blocking`, `naive`, `cumulative`,
/// `multiples:K`, `overlay:K:ordinal`, `overlay:K:categorical`,
/// `animation:DWELL` (append `:unordered` to release in arrival order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicySpec {
    /// New requests supersede and cancel in-flight ones.
    Blocking,
    /// Every response replaces the single view on arrival.
    Naive,
    /// One fixed placeholder per target; capacity equals the facet count.
    Cumulative,
    SmallMultiples { cap: usize, scheme: Scheme },
    Overlay { cap: usize, scheme: Scheme },
    /// Single view whose updates are held back to keep issue order.
    Animation { min_dwell: f64, in_order: bool },
}

impl PolicySpec {
    pub fn multiples(cap: usize) -> Self {
        PolicySpec::SmallMultiples {
            cap,
            scheme: Scheme::Ordinal,
        }
    }

    pub fn overlay(cap: usize, scheme: Scheme) -> Self {
        PolicySpec::Overlay { cap, scheme }
    }

    pub fn animation(min_dwell: f64) -> Self {
        PolicySpec::Animation {
            min_dwell,
            in_order: true,
        }
    }

    /// Buffer capacity. `n_targets` is only consulted by `Cumulative`.
    pub fn capacity(&self, n_targets: usize) -> usize {
        match self {
            PolicySpec::Blocking | PolicySpec::Naive | PolicySpec::Animation { .. } => 1,
            PolicySpec::Cumulative => n_targets,
            PolicySpec::SmallMultiples { cap, .. } | PolicySpec::Overlay { cap, .. } => *cap,
        }
    }

    /// Single-slot policies render in place; the rest keep one slot per entry.
    pub fn is_in_place(&self) -> bool {
        matches!(
            self,
            PolicySpec::Blocking | PolicySpec::Naive | PolicySpec::Animation { .. }
        )
    }

    pub fn scheme(&self) -> Scheme {
        match self {
            PolicySpec::SmallMultiples { scheme, .. } | PolicySpec::Overlay { scheme, .. } => *scheme,
            _ => Scheme::Ordinal,
        }
    }

    pub fn validate(&self) -> Result<(), ChronicleError> {
        match self {
            PolicySpec::SmallMultiples { cap, .. } | PolicySpec::Overlay { cap, .. } if *cap < 1 => Err(
                ChronicleError::Configuration(format!("capacity must be at least 1, got {cap}")),
            ),
            PolicySpec::Animation { min_dwell, .. } if !(min_dwell.is_finite() && *min_dwell >= 0.0) => {
                Err(ChronicleError::Configuration(format!(
                    "min_dwell must be a non-negative number, got {min_dwell}"
                )))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySpec::Blocking => write!(f, "blocking"),
            PolicySpec::Naive => write!(f, "naive"),
            PolicySpec::Cumulative => write!(f, "cumulative"),
            PolicySpec::SmallMultiples { cap, scheme } => match scheme {
                Scheme::Ordinal => write!(f, "multiples:{cap}"),
                Scheme::Categorical => write!(f, "multiples:{cap}:categorical"),
            },
            PolicySpec::Overlay { cap, scheme } => match scheme {
                Scheme::Ordinal => write!(f, "overlay:{cap}:ordinal"),
                Scheme::Categorical => write!(f, "overlay:{cap}:categorical"),
            },
            PolicySpec::Animation { min_dwell, in_order } => {
                write!(f, "animation:{min_dwell}")?;
                if !in_order {
                    write!(f, ":unordered")?;
                }
                Ok(())
            }
        }
    }
}

fn parse_scheme(s: &str) -> Result<Scheme, ChronicleError> {
    match s {
        "ordinal" => Ok(Scheme::Ordinal),
        "categorical" => Ok(Scheme::Categorical),
        other => Err(ChronicleError::Configuration(format!("unknown encoding scheme `{other}`"))),
    }
}

fn parse_cap(s: &str) -> Result<usize, ChronicleError> {
    s.parse()
        .map_err(|_| ChronicleError::Configuration(format!("invalid capacity `{s}`")))
}

impl FromStr for PolicySpec {
    type Err = ChronicleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let policy = match parts.as_slice() {
            ["blocking"] => PolicySpec::Blocking,
            ["naive"] => PolicySpec::Naive,
            ["cumulative"] => PolicySpec::Cumulative,
            ["multiples", k] => PolicySpec::multiples(parse_cap(k)?),
            ["multiples", k, scheme] => PolicySpec::SmallMultiples {
                cap: parse_cap(k)?,
                scheme: parse_scheme(scheme)?,
            },
            ["overlay", k] => PolicySpec::overlay(parse_cap(k)?, Scheme::Ordinal),
            ["overlay", k, scheme] => PolicySpec::overlay(parse_cap(k)?, parse_scheme(scheme)?),
            ["animation"] => PolicySpec::animation(DEFAULT_MIN_DWELL),
            ["animation", dwell, rest @ ..] => {
                let min_dwell: f64 = dwell
                    .parse()
                    .map_err(|_| ChronicleError::Configuration(format!("invalid dwell `{dwell}`")))?;
                let in_order = match rest {
                    [] | ["ordered"] => true,
                    ["unordered"] => false,
                    _ => return Err(ChronicleError::Configuration(format!("invalid policy `{s}`"))),
                };
                PolicySpec::Animation { min_dwell, in_order }
            }
            _ => return Err(ChronicleError::Configuration(format!("invalid policy `{s}`"))),
        };
        policy.validate()?;
        Ok(policy)
    }
}
