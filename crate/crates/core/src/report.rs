//! Report tables: pattern records, recommendations, thresholds, run
//! summaries and per-month entry-path counts.

use std::collections::BTreeMap;
use std::io::{self, Write};

use thiserror::Error;

use crate::optimizer::DestinationSummary;
use crate::pattern::PatternRecord;
use crate::pipeline::MiningReport;
use crate::session::Session;
use crate::threshold::ThresholdTable;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("page `{0}` does not occur in any session")]
    UnknownPage(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().flexible(true).from_writer(w)
}

/// `destination,actual_location,irl_1,...`; rows are as long as their IRL list.
pub fn write_records_csv<W: Write>(records: &[PatternRecord], w: W) -> Result<(), ReportError> {
    let mut out = csv_writer(w);
    let widest = records.iter().map(|r| r.irls.len()).max().unwrap_or(0);
    let mut header = vec!["destination".to_string(), "actual_location".to_string()];
    header.extend((1..=widest).map(|i| format!("irl_{i}")));
    out.write_record(&header)?;
    for r in records {
        let mut row = vec![r.destination.as_str(), r.actual_location.as_str()];
        row.extend(r.irls.iter().map(String::as_str));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Plain-text record table, one record per line.
pub fn write_records_text<W: Write>(
    records: &[PatternRecord],
    mut w: W,
) -> Result<(), ReportError> {
    writeln!(w, "# destination\tactual_location\tirls")?;
    for r in records {
        writeln!(
            w,
            "{}\t{}\t{}",
            r.destination,
            r.actual_location,
            r.irls.join(" ")
        )?;
    }
    Ok(())
}

/// `destination,s_p,page,beta,recommended,is_top`, one row per scored page.
pub fn write_recommendations_csv<W: Write>(
    groups: &[DestinationSummary],
    w: W,
) -> Result<(), ReportError> {
    let mut out = csv_writer(w);
    out.write_record([
        "destination",
        "s_p",
        "page",
        "beta",
        "recommended",
        "is_top",
    ])?;
    for g in groups {
        let rec = &g.recommendation;
        for (page, beta) in &g.beta.beta {
            let top = rec.top_candidate.as_deref() == Some(page.as_str());
            out.write_record([
                rec.destination.as_str(),
                &rec.s_p.to_string(),
                page,
                &beta.to_string(),
                &rec.recommended.contains(page).to_string(),
                &top.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Human-readable recommendation report.
pub fn write_recommendations_text<W: Write>(
    groups: &[DestinationSummary],
    mut w: W,
) -> Result<(), ReportError> {
    for (i, g) in groups.iter().enumerate() {
        let rec = &g.recommendation;
        if i > 0 {
            writeln!(w)?;
        }
        writeln!(w, "destination: {}", rec.destination)?;
        writeln!(w, "records: {}", g.record_count)?;
        writeln!(w, "s_p: {}", rec.s_p)?;
        let als: Vec<&str> = rec.actual_locations.iter().map(String::as_str).collect();
        writeln!(w, "actual locations: {}", als.join(", "))?;
        writeln!(w, "  page\tbeta\trecommended\ttop")?;
        for (page, beta) in &g.beta.beta {
            let yes = |b: bool| if b { "yes" } else { "no" };
            let top = rec.top_candidate.as_deref() == Some(page.as_str());
            writeln!(
                w,
                "  {page}\t{beta}\t{}\t{}",
                yes(rec.recommended.contains(page)),
                yes(top)
            )?;
        }
        for page in &rec.recommended {
            writeln!(w, "add link {page} -> {}", rec.destination)?;
        }
    }
    Ok(())
}

/// `page,threshold_secs,samples,damping`; `inf` for pages with no usable samples.
pub fn write_thresholds_csv<W: Write>(t: &ThresholdTable, w: W) -> Result<(), ReportError> {
    let mut out = csv_writer(w);
    out.write_record(["page", "threshold_secs", "samples", "damping"])?;
    for p in t.iter() {
        out.write_record([
            p.page.as_str(),
            &p.threshold.to_string(),
            &p.sample_count.to_string(),
            &p.damping.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Key/value run summary followed by the threshold table.
pub fn write_summary<W: Write>(report: &MiningReport, mut w: W) -> Result<(), ReportError> {
    writeln!(w, "lines\t{}", report.lines)?;
    writeln!(w, "malformed_lines\t{}", report.malformed.len())?;
    writeln!(w, "filtered_hits\t{}", report.filtered_out)?;
    writeln!(w, "sessions\t{}", report.sessions.len())?;
    writeln!(w, "records\t{}", report.records.len())?;
    writeln!(w, "destinations\t{}", report.destinations.len())?;
    writeln!(w, "abandoned_searches\t{}", report.abandoned_searches)?;
    writeln!(
        w,
        "graph\t{}",
        if report.inferred_graph {
            "inferred"
        } else {
            "declared"
        }
    )?;
    writeln!(w)?;
    writeln!(w, "# page\tthreshold_secs\tsamples\tdamping")?;
    for p in report.thresholds.iter() {
        writeln!(
            w,
            "{}\t{}\t{}\t{}",
            p.page, p.threshold, p.sample_count, p.damping
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathHitCount {
    /// Page visited just before; `None` when the page opened the session.
    pub predecessor: Option<String>,
    /// Calendar month of the arrival, `YYYY-MM` (UTC).
    pub month: String,
    pub count: usize,
}

/// Visits to `page` grouped by the page visited just before it and by month.
///
/// Rows are ordered by predecessor (session entries first), then month.
/// Fails with [`ReportError::UnknownPage`] when there are sessions but none
/// of them visits `page`.
pub fn emit_path_hit_counts(
    sessions: &[Session],
    page: &str,
) -> Result<Vec<PathHitCount>, ReportError> {
    let mut counts: BTreeMap<(Option<&str>, String), usize> = BTreeMap::new();
    for s in sessions {
        for (i, v) in s.visits.iter().enumerate() {
            if v.page != page {
                continue;
            }
            let pred = i.checked_sub(1).map(|j| s.visits[j].page.as_str());
            let month = v.arrival.format("%Y-%m").to_string();
            *counts.entry((pred, month)).or_insert(0) += 1;
        }
    }
    if counts.is_empty() && !sessions.is_empty() {
        return Err(ReportError::UnknownPage(page.to_string()));
    }
    Ok(counts
        .into_iter()
        .map(|((pred, month), count)| PathHitCount {
            predecessor: pred.map(String::from),
            month,
            count,
        })
        .collect())
}

/// `predecessor,month,count`; session entries use `-` as predecessor.
pub fn write_path_hits_csv<W: Write>(rows: &[PathHitCount], w: W) -> Result<(), ReportError> {
    let mut out = csv_writer(w);
    out.write_record(["predecessor", "month", "count"])?;
    for r in rows {
        out.write_record([
            r.predecessor.as_deref().unwrap_or("-"),
            &r.month,
            &r.count.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
