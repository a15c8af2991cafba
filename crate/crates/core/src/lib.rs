//! Mining web access logs for the pages users were really looking for.
//!
//! The pipeline reads access-log lines ([`ingest`]), groups them into
//! per-client sessions annotated with dwell times ([`session`]), computes a
//! per-page threshold time ([`threshold`]), marks each visit as a
//! destination, an intermediate reference or plain transit ([`pattern`]),
//! and finally scores the reference pages to recommend where new links to
//! each destination belong ([`optimizer`]). [`simulate`] generates synthetic
//! logs with known ground truth for checking the whole chain.

pub mod graph;
pub mod ingest;
pub mod optimizer;
pub mod pattern;
pub mod pipeline;
pub mod report;
pub mod session;
pub mod simulate;
pub mod threshold;

pub use graph::{load_edge_list, SiteGraph};
pub use ingest::{filter_hits, parse_line, FilterConfig, LogFormat, RawHit};
pub use optimizer::{
    compute_beta, summarize, truncate, BetaTable, OmegaWeights, RecommendationSet,
};
pub use pattern::{extract_records, mark_session, Mark, PatternRecord};
pub use pipeline::{mine_sessions, mine_text, MiningConfig, MiningReport};
pub use session::{
    annotate_times, sessionize, Hit, LastDwellPolicy, PageVisit, Session, SessionConfig,
};
pub use threshold::{compute_threshold, Damping, DampingConfig, DwellSample, ThresholdTable};

// The guide's chapters, compiled so their code blocks run as doctests.
#[cfg(doctest)]
pub mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/ingest.md")]
    pub mod ingest {}
    #[doc = include_str!("../../../book/src/sessions.md")]
    pub mod sessions {}
    #[doc = include_str!("../../../book/src/graph.md")]
    pub mod graph {}
    #[doc = include_str!("../../../book/src/thresholds.md")]
    pub mod thresholds {}
    #[doc = include_str!("../../../book/src/marking.md")]
    pub mod marking {}
    #[doc = include_str!("../../../book/src/optimization.md")]
    pub mod optimization {}
    #[doc = include_str!("../../../book/src/simulator.md")]
    pub mod simulator {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    pub mod pipeline {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
