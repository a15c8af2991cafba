//! Log text in, pattern records and recommendations out.

use rayon::prelude::*;

use crate::graph::{infer_edges_from_sessions, SiteGraph};
use crate::ingest::{parse_line, FilterConfig, LogFormat};
use crate::optimizer::{optimize, DestinationSummary, OmegaWeights};
use crate::pattern::{extract_records, mark_session, PatternRecord};
use crate::session::{sessionize, Hit, Session, SessionConfig};
use crate::threshold::{collect_samples, compute_thresholds, DampingConfig, ThresholdTable};

const PARSE_CHUNK: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq)]
pub struct MiningConfig {
    pub format: LogFormat,
    pub filter: FilterConfig,
    pub session: SessionConfig,
    pub damping: DampingConfig,
    /// Use estimated final-visit dwells when computing thresholds.
    pub include_estimated: bool,
    pub omega: OmegaWeights,
    /// Support needed for an inferred edge when no site graph is given.
    pub infer_min_support: usize,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            format: LogFormat::Common,
            filter: FilterConfig::default(),
            session: SessionConfig::default(),
            damping: DampingConfig::default(),
            include_estimated: true,
            omega: OmegaWeights::default(),
            infer_min_support: 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MiningReport {
    pub lines: usize,
    /// 1-based line numbers that did not parse.
    pub malformed: Vec<usize>,
    /// Parsed hits that were not page views.
    pub filtered_out: usize,
    pub sessions: Vec<Session>,
    pub thresholds: ThresholdTable,
    pub records: Vec<PatternRecord>,
    /// Sessions whose trailing IRLs never reached a destination.
    pub abandoned_searches: usize,
    pub destinations: Vec<DestinationSummary>,
    /// Whether marking used an edge set inferred from the sessions.
    pub inferred_graph: bool,
}

/// Parse and filter log text. Returns page views, malformed line numbers,
/// and the number of parsed hits that were filtered out.
pub fn ingest_text(
    text: &str,
    format: LogFormat,
    filter: &FilterConfig,
) -> (Vec<Hit>, Vec<usize>, usize) {
    let lines: Vec<&str> = text.lines().collect();
    let chunks: Vec<(Vec<Hit>, Vec<usize>, usize)> = lines
        .par_chunks(PARSE_CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let mut hits = Vec::with_capacity(chunk.len());
            let mut bad = Vec::new();
            let mut dropped = 0;
            for (i, line) in chunk.iter().enumerate() {
                match parse_line(line, format) {
                    Ok(raw) => match filter.apply(&raw) {
                        Some(hit) => hits.push(hit),
                        None => dropped += 1,
                    },
                    Err(_) => bad.push(c * PARSE_CHUNK + i + 1),
                }
            }
            (hits, bad, dropped)
        })
        .collect();
    let mut hits = Vec::with_capacity(lines.len());
    let mut malformed = Vec::new();
    let mut dropped = 0;
    for (h, b, d) in chunks {
        hits.extend(h);
        malformed.extend(b);
        dropped += d;
    }
    (hits, malformed, dropped)
}

/// Thresholds, records and recommendations for already-built sessions.
///
/// `graph` is the declared site map; without one, edges are inferred from
/// the sessions themselves.
pub fn mine_sessions(
    sessions: Vec<Session>,
    graph: Option<&SiteGraph>,
    cfg: &MiningConfig,
) -> MiningReport {
    let inferred_graph = graph.is_none();
    let inferred;
    let graph = match graph {
        Some(g) => g,
        None => {
            inferred = infer_edges_from_sessions(&sessions, cfg.infer_min_support);
            &inferred
        }
    };
    let samples = collect_samples(&sessions);
    let thresholds = compute_thresholds(&samples, &cfg.damping, cfg.include_estimated);
    let per_session: Vec<_> = sessions
        .par_iter()
        .map(|s| extract_records(s, &mark_session(s, graph, &thresholds)))
        .collect();
    let mut records = Vec::new();
    let mut abandoned_searches = 0;
    for ex in per_session {
        abandoned_searches += usize::from(ex.is_abandoned_search());
        records.extend(ex.records);
    }
    let destinations = optimize(&records, &cfg.omega);
    MiningReport {
        sessions,
        thresholds,
        records,
        abandoned_searches,
        destinations,
        inferred_graph,
        ..MiningReport::default()
    }
}

/// Run the whole pipeline over log text.
pub fn mine_text(text: &str, graph: Option<&SiteGraph>, cfg: &MiningConfig) -> MiningReport {
    let (hits, malformed, filtered_out) = ingest_text(text, cfg.format, &cfg.filter);
    let lines = text.lines().count();
    let sessions = sessionize(&hits, &cfg.session);
    drop(hits);
    MiningReport {
        lines,
        malformed,
        filtered_out,
        ..mine_sessions(sessions, graph, cfg)
    }
}

/// [`mine_text`] on a dedicated pool of `threads` workers.
pub fn mine_text_with_threads(
    text: &str,
    graph: Option<&SiteGraph>,
    cfg: &MiningConfig,
    threads: usize,
) -> Result<MiningReport, rayon::ThreadPoolBuildError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()?;
    Ok(pool.install(|| mine_text(text, graph, cfg)))
}
