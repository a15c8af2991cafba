//! Marking visits as destination (DL) or intermediate reference (IRL)
//! locations and collecting `(destination, actual location, IRLs)` records.
//!
//! An interior visit is a *candidate* when the user came back to where they
//! were (`prev == next`) or left by a transition the site graph does not
//! explain (no link from the current page to the next). The final visit of
//! a session is always a candidate. A candidate whose dwell reaches the
//! page's threshold is a DL, otherwise an IRL. Everything else is transit.

use std::fmt;

use crate::graph::SiteGraph;
use crate::session::Session;
use crate::threshold::ThresholdTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mark {
    Destination,
    Reference,
    Transit,
}

impl fmt::Display for Mark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mark::Destination => "DL",
            Mark::Reference => "IRL",
            Mark::Transit => "TRANSIT",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PatternRecord {
    pub destination: String,
    /// Page visited right before the destination.
    pub actual_location: String,
    /// IRLs in the order they were tried.
    pub irls: Vec<String>,
    pub session_ref: usize,
}

/// Whether the visit at `i` is a candidate for DL/IRL classification.
pub fn is_candidate(session: &Session, graph: &SiteGraph, i: usize) -> bool {
    let v = &session.visits;
    if i + 1 == v.len() {
        return true;
    }
    if i == 0 {
        return false;
    }
    v[i - 1].page == v[i + 1].page || !graph.is_connected(&v[i].page, &v[i + 1].page)
}

/// One mark per visit.
pub fn mark_session(
    session: &Session,
    graph: &SiteGraph,
    thresholds: &ThresholdTable,
) -> Vec<Mark> {
    session
        .visits
        .iter()
        .enumerate()
        .map(|(i, visit)| {
            if !is_candidate(session, graph, i) {
                Mark::Transit
            } else if visit.dwell >= thresholds.get(&visit.page) {
                Mark::Destination
            } else {
                Mark::Reference
            }
        })
        .collect()
}

/// Records found in one session, plus IRLs left over after the last DL.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Extraction {
    pub records: Vec<PatternRecord>,
    pub abandoned: Vec<String>,
}

impl Extraction {
    pub fn is_abandoned_search(&self) -> bool {
        !self.abandoned.is_empty()
    }
}

/// Walk the marks left to right. IRLs accumulate until a DL closes a record.
///
/// A DL on the first visit has no actual location; it emits nothing but
/// still clears the pending IRLs.
pub fn extract_records(session: &Session, marks: &[Mark]) -> Extraction {
    assert_eq!(
        session.visits.len(),
        marks.len(),
        "marks must align with visits"
    );
    let mut out = Extraction::default();
    let mut pending: Vec<&str> = Vec::new();
    for (j, (visit, mark)) in session.visits.iter().zip(marks).enumerate() {
        match mark {
            Mark::Reference => pending.push(&visit.page),
            Mark::Destination => {
                if j > 0 {
                    let irls = pending
                        .iter()
                        .filter(|p| **p != visit.page)
                        .map(|p| p.to_string())
                        .collect();
                    out.records.push(PatternRecord {
                        destination: visit.page.clone(),
                        actual_location: session.visits[j - 1].page.clone(),
                        irls,
                        session_ref: session.id,
                    });
                }
                pending.clear();
            }
            Mark::Transit => {}
        }
    }
    out.abandoned = pending.into_iter().map(String::from).collect();
    out
}
