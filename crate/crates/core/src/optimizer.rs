//! Scoring IRLs per destination and choosing where new links should go.
//!
//! Each IRL at 1-based position `n` of a record adds `weight(n)` to that
//! page's score `beta`. The cutoff `s_p` is the mean score over the distinct
//! IRL pages of the destination; pages scoring at least `s_p` are
//! recommended as new link sources, and records are cut at their first
//! recommended page.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::pattern::PatternRecord;

#[derive(Debug, Error, PartialEq)]
pub enum OmegaError {
    #[error("omega vector is empty")]
    Empty,
    #[error("omega weight {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("omega weights must be non-increasing")]
    Increasing,
    #[error("invalid omega weight `{0}`")]
    Parse(String),
}

/// What positions past the end of the weight vector receive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Overflow {
    #[default]
    RepeatLast,
    Zero,
}

impl FromStr for Overflow {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "repeat" => Ok(Overflow::RepeatLast),
            "zero" => Ok(Overflow::Zero),
            other => Err(format!(
                "unknown omega overflow `{other}` (expected repeat|zero)"
            )),
        }
    }
}

/// Positional weights for IRLs.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaWeights {
    weights: Vec<f64>,
    pub overflow: Overflow,
}

impl OmegaWeights {
    pub fn new(weights: Vec<f64>, overflow: Overflow) -> Result<Self, OmegaError> {
        if weights.is_empty() {
            return Err(OmegaError::Empty);
        }
        if let Some(&w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(OmegaError::OutOfRange(w));
        }
        if weights.windows(2).any(|w| w[1] > w[0]) {
            return Err(OmegaError::Increasing);
        }
        Ok(OmegaWeights { weights, overflow })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight of 1-based position `n`.
    pub fn weight(&self, n: usize) -> f64 {
        match self.weights.get(n.wrapping_sub(1)) {
            Some(&w) => w,
            None => match self.overflow {
                Overflow::RepeatLast => *self.weights.last().expect("non-empty"),
                Overflow::Zero => 0.0,
            },
        }
    }
}

impl Default for OmegaWeights {
    fn default() -> Self {
        OmegaWeights {
            weights: vec![1.0, 0.75, 0.5, 0.25],
            overflow: Overflow::RepeatLast,
        }
    }
}

impl FromStr for OmegaWeights {
    type Err = OmegaError;

    /// Comma-separated weights, e.g. `1,0.75,0.5,0.25`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let weights = s
            .split(',')
            .map(|w| {
                w.trim()
                    .parse::<f64>()
                    .map_err(|_| OmegaError::Parse(w.trim().to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        OmegaWeights::new(weights, Overflow::default())
    }
}

impl fmt::Display for OmegaWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.weights.iter().map(|w| w.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BetaTable {
    pub destination: String,
    pub beta: BTreeMap<String, f64>,
    /// Pages observed right before the destination.
    pub actual_locations: BTreeSet<String>,
}

/// Accumulate positional weights over records that share one destination.
pub fn compute_beta(records: &[PatternRecord], omega: &OmegaWeights) -> BetaTable {
    let mut table = BetaTable::default();
    if let Some(first) = records.first() {
        table.destination = first.destination.clone();
    }
    for r in records {
        debug_assert_eq!(r.destination, table.destination, "mixed destinations");
        table.actual_locations.insert(r.actual_location.clone());
        for (i, page) in r.irls.iter().enumerate() {
            *table.beta.entry(page.clone()).or_insert(0.0) += omega.weight(i + 1);
        }
    }
    table
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecommendationSet {
    pub destination: String,
    pub s_p: f64,
    pub recommended: BTreeSet<String>,
    /// Highest-scoring page; ties go to the smallest page id.
    pub top_candidate: Option<String>,
    pub actual_locations: BTreeSet<String>,
}

pub fn summarize(b: &BetaTable) -> RecommendationSet {
    let mut out = RecommendationSet {
        destination: b.destination.clone(),
        actual_locations: b.actual_locations.clone(),
        ..RecommendationSet::default()
    };
    if b.beta.is_empty() {
        return out;
    }
    let sum: f64 = b.beta.values().sum();
    let (min, max) = b
        .beta
        .values()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    // keep rounding from pushing the mean outside [min, max]
    out.s_p = (sum / b.beta.len() as f64).clamp(min, max);
    out.recommended = b
        .beta
        .iter()
        .filter(|(_, &v)| v >= out.s_p)
        .map(|(k, _)| k.clone())
        .collect();
    // BTreeMap iterates in page order, so the first maximum wins ties.
    out.top_candidate = b
        .beta
        .iter()
        .fold(None::<(&String, f64)>, |best, (k, &v)| match best {
            Some((_, bv)) if bv >= v => best,
            _ => Some((k, v)),
        })
        .map(|(k, _)| k.clone());
    out
}

/// Cut every record at its first recommended IRL.
pub fn truncate(records: &[PatternRecord], recommended: &BTreeSet<String>) -> Vec<PatternRecord> {
    records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            if let Some(k) = r.irls.iter().position(|p| recommended.contains(p)) {
                r.irls.truncate(k);
            }
            r
        })
        .collect()
}

/// Everything computed for one destination.
#[derive(Debug, Clone, PartialEq)]
pub struct DestinationSummary {
    pub beta: BetaTable,
    pub recommendation: RecommendationSet,
    pub truncated: Vec<PatternRecord>,
    pub record_count: usize,
}

/// Group records by destination (in page order) and score each group.
pub fn optimize(records: &[PatternRecord], omega: &OmegaWeights) -> Vec<DestinationSummary> {
    let mut groups: BTreeMap<&str, Vec<PatternRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(&r.destination).or_default().push(r.clone());
    }
    groups
        .into_values()
        .map(|group| {
            let beta = compute_beta(&group, omega);
            let recommendation = summarize(&beta);
            let truncated = truncate(&group, &recommendation.recommended);
            DestinationSummary {
                beta,
                recommendation,
                record_count: group.len(),
                truncated,
            }
        })
        .collect()
}
