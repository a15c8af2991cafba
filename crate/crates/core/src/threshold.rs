//! Per-page threshold time separating destination visits from reference visits.
//!
//! For a page with dwell samples `t_i` taken after `T_i` seconds on the site,
//! the threshold is
//!
//! ```text
//! T_P = d * (t_1*T_1 + ... + t_n*T_n) / (T_1 + ... + T_n)
//! ```
//!
//! so visits made later in a session weigh more. When every `T_i` is zero
//! the unweighted mean of `t_i` is used instead.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use thiserror::Error;

use crate::session::Session;

#[derive(Debug, Error, PartialEq)]
pub enum ThresholdError {
    #[error("no dwell samples")]
    EmptySamples,
    #[error("damping {0} outside [0.15, 0.85]")]
    DampingOutOfRange(f64),
    #[error("line {0}: expected `page<TAB>damping`")]
    BadDampingLine(usize),
    #[error("reading damping file: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DwellSample {
    pub dwell: f64,
    pub prior_site_time: f64,
    pub estimated: bool,
}

impl DwellSample {
    pub fn new(dwell: f64, prior_site_time: f64) -> Self {
        DwellSample {
            dwell,
            prior_site_time,
            estimated: false,
        }
    }
}

/// Damping factor `d`, always within `[0.15, 0.85]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Damping(f64);

impl Damping {
    pub const MIN: f64 = 0.15;
    pub const MAX: f64 = 0.85;

    pub fn new(d: f64) -> Result<Self, ThresholdError> {
        if (Self::MIN..=Self::MAX).contains(&d) {
            Ok(Damping(d))
        } else {
            Err(ThresholdError::DampingOutOfRange(d))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for Damping {
    fn default() -> Self {
        Damping(0.5)
    }
}

impl FromStr for Damping {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| format!("invalid damping `{s}`"))?;
        Damping::new(v).map_err(|e| e.to_string())
    }
}

impl fmt::Display for Damping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Global damping plus per-page overrides.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DampingConfig {
    pub default: Damping,
    pub per_page: HashMap<String, Damping>,
}

impl DampingConfig {
    pub fn uniform(d: Damping) -> Self {
        DampingConfig {
            default: d,
            per_page: HashMap::new(),
        }
    }

    pub fn for_page(&self, page: &str) -> Damping {
        self.per_page.get(page).copied().unwrap_or(self.default)
    }

    /// Read `page<TAB>d` overrides. Blank lines and `#` comments are skipped.
    pub fn load_overrides<R: BufRead>(&mut self, source: R) -> Result<(), ThresholdError> {
        for (i, line) in source.lines().enumerate() {
            let line = line.map_err(|e| ThresholdError::Io(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (page, d) = line
                .split_once('\t')
                .ok_or(ThresholdError::BadDampingLine(i + 1))?;
            let d: f64 = d
                .trim()
                .parse()
                .map_err(|_| ThresholdError::BadDampingLine(i + 1))?;
            self.per_page
                .insert(page.trim().to_string(), Damping::new(d)?);
        }
        Ok(())
    }
}

/// One sample per visit, keyed by page.
pub fn collect_samples(sessions: &[Session]) -> BTreeMap<String, Vec<DwellSample>> {
    let mut out: BTreeMap<String, Vec<DwellSample>> = BTreeMap::new();
    for v in sessions.iter().flat_map(|s| &s.visits) {
        out.entry(v.page.clone()).or_default().push(DwellSample {
            dwell: v.dwell,
            prior_site_time: v.prior_site_time,
            estimated: v.dwell_estimated,
        });
    }
    out
}

/// Threshold time in seconds for one page.
pub fn compute_threshold(samples: &[DwellSample], d: Damping) -> Result<f64, ThresholdError> {
    if samples.is_empty() {
        return Err(ThresholdError::EmptySamples);
    }
    let (weighted, weight) = samples.iter().fold((0.0, 0.0), |(num, den), s| {
        (num + s.dwell * s.prior_site_time, den + s.prior_site_time)
    });
    let average = if weight > 0.0 {
        weighted / weight
    } else {
        samples.iter().map(|s| s.dwell).sum::<f64>() / samples.len() as f64
    };
    Ok(d.get() * average)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageThreshold {
    pub page: String,
    /// Seconds; infinite when the page has no usable samples.
    pub threshold: f64,
    pub sample_count: usize,
    pub damping: Damping,
}

/// Thresholds for every sampled page. Unknown pages have an infinite threshold.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ThresholdTable {
    pages: BTreeMap<String, PageThreshold>,
}

impl ThresholdTable {
    pub fn get(&self, page: &str) -> f64 {
        self.pages.get(page).map_or(f64::INFINITY, |p| p.threshold)
    }

    pub fn insert(&mut self, page: &str, threshold: f64) {
        self.pages.insert(
            page.to_string(),
            PageThreshold {
                page: page.to_string(),
                threshold,
                sample_count: 0,
                damping: Damping::default(),
            },
        );
    }

    pub fn iter(&self) -> impl Iterator<Item = &PageThreshold> + '_ {
        self.pages.values()
    }

    pub fn len(&self) -> usize {
        self.pages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pages.is_empty()
    }
}

impl FromIterator<(String, f64)> for ThresholdTable {
    fn from_iter<I: IntoIterator<Item = (String, f64)>>(iter: I) -> Self {
        let mut t = ThresholdTable::default();
        for (page, threshold) in iter {
            t.insert(&page, threshold);
        }
        t
    }
}

/// Compute every page's threshold. With `include_estimated == false`,
/// final-visit samples are ignored; a page left with no samples gets an
/// infinite threshold.
pub fn compute_thresholds(
    samples: &BTreeMap<String, Vec<DwellSample>>,
    damping: &DampingConfig,
    include_estimated: bool,
) -> ThresholdTable {
    let pages = samples
        .iter()
        .map(|(page, all)| {
            let used: Vec<DwellSample> = all
                .iter()
                .filter(|s| include_estimated || !s.estimated)
                .copied()
                .collect();
            let d = damping.for_page(page);
            let threshold = compute_threshold(&used, d).unwrap_or(f64::INFINITY);
            let entry = PageThreshold {
                page: page.clone(),
                threshold,
                sample_count: used.len(),
                damping: d,
            };
            (page.clone(), entry)
        })
        .collect();
    ThresholdTable { pages }
}
