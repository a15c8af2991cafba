//! Per-client sessions with dwell time and prior-site time on every visit.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use chrono::{DateTime, Utc};
use rayon::prelude::*;

/// A page view attributed to a client.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Hit {
    pub client_key: String,
    pub timestamp: DateTime<Utc>,
    pub page: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageVisit {
    pub page: String,
    pub arrival: DateTime<Utc>,
    /// Seconds until the next visit (estimated on the final visit).
    pub dwell: f64,
    /// Seconds between session start and `arrival`.
    pub prior_site_time: f64,
    pub dwell_estimated: bool,
    /// Timestamp of the last hit merged into this visit (reloads).
    pub last_hit: DateTime<Utc>,
    /// Number of raw hits merged into this visit.
    pub hits: u32,
}

impl PageVisit {
    /// A single-hit visit arriving at `at`; times are filled in by [`annotate_times`].
    pub fn new(page: String, at: DateTime<Utc>) -> Self {
        PageVisit {
            page,
            arrival: at,
            dwell: 0.0,
            prior_site_time: 0.0,
            dwell_estimated: false,
            last_hit: at,
            hits: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    /// Position of the session in the output of [`sessionize`].
    pub id: usize,
    pub client_key: String,
    pub visits: Vec<PageVisit>,
}

impl Session {
    pub fn pages(&self) -> impl Iterator<Item = &str> + '_ {
        self.visits.iter().map(|v| v.page.as_str())
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.visits[0].arrival
    }
}

/// How to fill in the unobservable dwell of a session's final visit.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum LastDwellPolicy {
    /// Mean of the session's other dwells; [`SINGLE_VISIT_DWELL`] when there are none.
    #[default]
    SessionMean,
    /// Fixed number of seconds.
    Constant(f64),
}

/// Dwell assigned to single-visit sessions under [`LastDwellPolicy::SessionMean`].
pub const SINGLE_VISIT_DWELL: f64 = 30.0;

impl FromStr for LastDwellPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "mean" {
            return Ok(LastDwellPolicy::SessionMean);
        }
        let secs = s.strip_prefix("const:").ok_or_else(|| {
            format!("unknown last-dwell policy `{s}` (expected mean|const:<sec>)")
        })?;
        match secs.parse::<f64>() {
            Ok(v) if v.is_finite() && v >= 0.0 => Ok(LastDwellPolicy::Constant(v)),
            _ => Err(format!("invalid constant dwell `{secs}`")),
        }
    }
}

impl fmt::Display for LastDwellPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LastDwellPolicy::SessionMean => f.write_str("mean"),
            LastDwellPolicy::Constant(v) => write!(f, "const:{v}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionConfig {
    /// Inactivity gap that closes a session.
    pub timeout: Duration,
    pub last_dwell: LastDwellPolicy,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            timeout: Duration::from_secs(30 * 60),
            last_dwell: LastDwellPolicy::SessionMean,
        }
    }
}

fn seconds_between(from: DateTime<Utc>, to: DateTime<Utc>) -> f64 {
    (to - from).num_milliseconds() as f64 / 1000.0
}

/// Group hits into annotated sessions.
///
/// Hits are grouped by client and ordered by timestamp (ties keep input
/// order). A session closes when the gap between two consecutive hits of a
/// client exceeds `cfg.timeout`. Consecutive hits on the same page are merged
/// into one visit that keeps the first arrival.
///
/// Sessions are returned ordered by start time, then client key, and their
/// `id` is their index in that order.
pub fn sessionize(hits: &[Hit], cfg: &SessionConfig) -> Vec<Session> {
    let mut by_client: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, h) in hits.iter().enumerate() {
        by_client.entry(h.client_key.as_str()).or_default().push(i);
    }
    let mut clients: Vec<(&str, Vec<usize>)> = by_client.into_iter().collect();
    clients.sort_unstable_by(|a, b| a.0.cmp(b.0));

    let timeout = chrono::Duration::from_std(cfg.timeout).unwrap_or(chrono::Duration::MAX);
    let mut sessions: Vec<Session> = clients
        .into_par_iter()
        .flat_map_iter(|(client, mut idx)| {
            idx.sort_by_key(|&i| hits[i].timestamp);
            split_client(client, &idx, hits, timeout, cfg.last_dwell)
        })
        .collect();

    sessions.sort_by(|a, b| {
        a.start()
            .cmp(&b.start())
            .then_with(|| a.client_key.cmp(&b.client_key))
    });
    for (id, s) in sessions.iter_mut().enumerate() {
        s.id = id;
    }
    sessions
}

fn split_client(
    client: &str,
    idx: &[usize],
    hits: &[Hit],
    timeout: chrono::Duration,
    policy: LastDwellPolicy,
) -> Vec<Session> {
    let mut out = Vec::new();
    let mut visits: Vec<PageVisit> = Vec::new();
    let mut flush = |visits: &mut Vec<PageVisit>| {
        if !visits.is_empty() {
            let s = Session {
                id: 0,
                client_key: client.to_string(),
                visits: std::mem::take(visits),
            };
            out.push(annotate_times(s, policy));
        }
    };
    for &i in idx {
        let hit = &hits[i];
        match visits.last_mut() {
            Some(last) if hit.timestamp - last.last_hit > timeout => {
                flush(&mut visits);
                visits.push(PageVisit::new(hit.page.clone(), hit.timestamp));
            }
            Some(last) if last.page == hit.page => {
                last.last_hit = hit.timestamp;
                last.hits += 1;
            }
            _ => visits.push(PageVisit::new(hit.page.clone(), hit.timestamp)),
        }
    }
    flush(&mut visits);
    out
}

/// Recompute dwell and prior-site time for every visit of `session`.
pub fn annotate_times(mut session: Session, policy: LastDwellPolicy) -> Session {
    let visits = &mut session.visits;
    let Some(first) = visits.first() else {
        return session;
    };
    let start = first.arrival;
    let n = visits.len();
    for i in 0..n {
        visits[i].prior_site_time = seconds_between(start, visits[i].arrival);
        if i + 1 < n {
            visits[i].dwell = seconds_between(visits[i].arrival, visits[i + 1].arrival);
            visits[i].dwell_estimated = false;
        }
    }
    let last_dwell = match policy {
        LastDwellPolicy::Constant(secs) => secs,
        LastDwellPolicy::SessionMean if n == 1 => SINGLE_VISIT_DWELL,
        LastDwellPolicy::SessionMean => {
            visits[..n - 1].iter().map(|v| v.dwell).sum::<f64>() / (n - 1) as f64
        }
    };
    let last = &mut visits[n - 1];
    last.dwell = last_dwell;
    last.dwell_estimated = true;
    session
}
