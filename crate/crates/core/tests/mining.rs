use std::collections::{BTreeMap, BTreeSet};

use chrono::{TimeZone, Utc};
use proptest::prelude::*;

use navmine::optimizer::{optimize, Overflow};
use navmine::pattern::is_candidate;
use navmine::{
    annotate_times, compute_beta, extract_records, load_edge_list, mark_session, summarize,
    truncate, LastDwellPolicy, Mark, OmegaWeights, PageVisit, PatternRecord, Session, SiteGraph,
    ThresholdTable,
};

const FIG1: &str = "# root P\nP P1\nP P2\nP1 P3\nP1 P4\nP2 P5\nP2 P6\nP6 P9\n";
const FIG1_PATH: [&str; 10] = ["P", "P1", "P3", "P1", "P4", "P2", "P5", "P2", "P6", "P9"];

fn session(pages: &[&str], dwells: &[f64]) -> Session {
    let base = Utc.with_ymd_and_hms(2005, 7, 10, 0, 0, 0).unwrap();
    let mut at = base;
    let visits = pages
        .iter()
        .zip(dwells)
        .map(|(p, &d)| {
            let v = PageVisit {
                page: p.to_string(),
                arrival: at,
                dwell: d,
                prior_site_time: 0.0,
                dwell_estimated: false,
                last_hit: at,
                hits: 1,
            };
            at += chrono::Duration::seconds(d as i64);
            v
        })
        .collect();
    annotate_times(
        Session {
            id: 0,
            client_key: "c".into(),
            visits,
        },
        LastDwellPolicy::Constant(*dwells.last().unwrap()),
    )
}

fn fig1_thresholds() -> ThresholdTable {
    ["P", "P1", "P2", "P3", "P4", "P5", "P6", "P9"]
        .iter()
        .map(|p| (p.to_string(), 30.0))
        .collect()
}

#[test]
fn fig1_trace() {
    let g = load_edge_list(FIG1.as_bytes()).unwrap();
    let dwells = [8.0, 6.0, 4.0, 7.0, 5.0, 9.0, 3.0, 6.0, 8.0, 200.0];
    let s = session(&FIG1_PATH, &dwells);
    let marks = mark_session(&s, &g, &fig1_thresholds());
    use Mark::*;
    assert_eq!(
        marks,
        [
            Transit,
            Transit,
            Reference,
            Transit,
            Reference,
            Transit,
            Reference,
            Transit,
            Transit,
            Destination
        ]
    );
    let ex = extract_records(&s, &marks);
    assert_eq!(
        ex.records,
        [PatternRecord {
            destination: "P9".into(),
            actual_location: "P6".into(),
            irls: vec!["P3".into(), "P4".into(), "P5".into()],
            session_ref: 0,
        }]
    );
    assert!(ex.abandoned.is_empty());
}

#[test]
fn linked_transitions_only_mark_the_end() {
    let g = load_edge_list(FIG1.as_bytes()).unwrap();
    let s = session(&["P", "P2", "P6", "P9"], &[5.0, 5.0, 5.0, 100.0]);
    let marks = mark_session(&s, &g, &fig1_thresholds());
    assert_eq!(
        marks,
        [
            Mark::Transit,
            Mark::Transit,
            Mark::Transit,
            Mark::Destination
        ]
    );
}

fn random_session() -> impl Strategy<Value = (Vec<&'static str>, Vec<f64>)> {
    prop::collection::vec(
        (
            prop::sample::select(vec!["P", "P1", "P2", "P3", "P4", "P5", "P6", "P9"]),
            1.0f64..100.0,
        ),
        1..14,
    )
    .prop_map(|v| {
        let mut pages: Vec<&str> = Vec::new();
        let mut dwells = Vec::new();
        for (p, d) in v {
            if pages.last() != Some(&p) {
                pages.push(p);
                dwells.push(d.round());
            }
        }
        (pages, dwells)
    })
}

proptest! {
    #[test]
    fn marking_invariants((pages, dwells) in random_session(), th in 1.0f64..100.0) {
        let g = load_edge_list(FIG1.as_bytes()).unwrap();
        let t: ThresholdTable = pages.iter().map(|p| (p.to_string(), th)).collect();
        let s = session(&pages, &dwells);
        let marks = mark_session(&s, &g, &t);
        prop_assert_eq!(marks.len(), pages.len());
        prop_assert_eq!(&mark_session(&s, &g, &t), &marks);

        for i in 1..pages.len().saturating_sub(1) {
            if marks[i] == Mark::Transit {
                prop_assert!(pages[i - 1] != pages[i + 1]);
                prop_assert!(g.is_connected(pages[i], pages[i + 1]));
            } else {
                prop_assert!(is_candidate(&s, &g, i));
            }
        }
        if pages.len() > 1 {
            prop_assert_eq!(marks[0], Mark::Transit);
        }
        prop_assert!(marks.last() != Some(&Mark::Transit));

        let all_linked = pages.windows(2).all(|w| g.is_connected(w[0], w[1]))
            && pages.windows(3).all(|w| w[0] != w[2]);
        if all_linked {
            prop_assert!(marks[..marks.len() - 1].iter().all(|m| *m == Mark::Transit));
        }

        let ex = extract_records(&s, &marks);
        let dl_positions: Vec<usize> =
            (1..marks.len()).filter(|&j| marks[j] == Mark::Destination).collect();
        prop_assert_eq!(ex.records.len(), dl_positions.len());
        for (r, &j) in ex.records.iter().zip(&dl_positions) {
            prop_assert_eq!(&r.destination, pages[j]);
            prop_assert_eq!(&r.actual_location, pages[j - 1]);
            prop_assert!(!r.irls.contains(&r.destination));
            for irl in &r.irls {
                prop_assert!(pages[..j].contains(&irl.as_str()));
            }
        }
    }
}

fn worked_table() -> Vec<PatternRecord> {
    [
        vec!["P3", "P5", "P4", "P1"],
        vec!["P2", "P1"],
        vec!["P1"],
        vec!["P3", "P4", "P2"],
    ]
    .into_iter()
    .map(|irls| PatternRecord {
        destination: "D1".into(),
        actual_location: "A1".into(),
        irls: irls.into_iter().map(String::from).collect(),
        session_ref: 0,
    })
    .collect()
}

/// Double loop over records and positions, no shared code with the optimizer.
fn brute_force_beta(
    records: &[Vec<String>],
    weights: &[f64],
    overflow: Overflow,
) -> BTreeMap<String, f64> {
    let mut out: BTreeMap<String, f64> = BTreeMap::new();
    for r in records {
        for pos in 0..r.len() {
            let w = if pos < weights.len() {
                weights[pos]
            } else if overflow == Overflow::Zero {
                0.0
            } else {
                weights[weights.len() - 1]
            };
            let entry = out.entry(r[pos].clone()).or_insert(0.0);
            *entry += w;
        }
    }
    out
}

fn records_strategy() -> impl Strategy<Value = Vec<PatternRecord>> {
    prop::collection::vec(
        prop::collection::vec(
            prop::sample::select(vec!["A", "B", "C", "D", "E", "F"]),
            0..=5,
        ),
        0..=6,
    )
    .prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, irls)| PatternRecord {
                destination: "D".into(),
                actual_location: format!("al{}", i % 2),
                irls: irls.into_iter().map(String::from).collect(),
                session_ref: i,
            })
            .collect()
    })
}

fn omega_strategy() -> impl Strategy<Value = OmegaWeights> {
    (
        prop::collection::vec(0u8..=4, 1..5),
        prop::sample::select(vec![Overflow::RepeatLast, Overflow::Zero]),
    )
        .prop_map(|(mut quarters, overflow)| {
            quarters.sort_unstable_by(|a, b| b.cmp(a));
            let w = quarters.into_iter().map(|q| q as f64 / 4.0).collect();
            OmegaWeights::new(w, overflow).unwrap()
        })
}

proptest! {
    #[test]
    fn beta_matches_brute_force(records in records_strategy(), omega in omega_strategy()) {
        let b = compute_beta(&records, &omega);
        let rows: Vec<Vec<String>> = records.iter().map(|r| r.irls.clone()).collect();
        prop_assert_eq!(b.beta, brute_force_beta(&rows, omega.weights(), omega.overflow));
    }

    #[test]
    fn scoring_properties(
        records in records_strategy(),
        split in 0usize..7,
        seed in any::<u64>(),
    ) {
        let omega = OmegaWeights::default();
        let b = compute_beta(&records, &omega);
        let rec = summarize(&b);

        // record order does not matter
        let mut shuffled = records.clone();
        let n = shuffled.len();
        if n > 1 {
            shuffled.rotate_left((seed as usize) % n);
            shuffled.swap(0, n - 1);
        }
        let b2 = compute_beta(&shuffled, &omega);
        prop_assert_eq!(&b2.beta, &b.beta);
        prop_assert_eq!(summarize(&b2), rec.clone());

        // additivity over a split
        let k = split.min(records.len());
        let left = compute_beta(&records[..k], &omega);
        let right = compute_beta(&records[k..], &omega);
        let mut sum = left.beta.clone();
        for (p, v) in right.beta {
            *sum.entry(p).or_insert(0.0) += v;
        }
        prop_assert_eq!(&sum, &b.beta);

        if !b.beta.is_empty() {
            let min = b.beta.values().cloned().fold(f64::INFINITY, f64::min);
            let max = b.beta.values().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(min <= rec.s_p && rec.s_p <= max);
            let top = rec.top_candidate.clone().unwrap();
            prop_assert!(rec.recommended.contains(&top));
            prop_assert_eq!(b.beta[&top], max);
            prop_assert!(b.beta.iter().filter(|(_, v)| **v == max).all(|(p, _)| *p >= top));
        } else {
            prop_assert!(rec.recommended.is_empty());
        }

        let cut = truncate(&records, &rec.recommended);
        for r in &cut {
            prop_assert!(r.irls.iter().all(|p| !rec.recommended.contains(p)));
        }
        prop_assert_eq!(truncate(&cut, &rec.recommended), cut.clone());
        for (before, after) in records.iter().zip(&cut) {
            prop_assert!(before.irls.starts_with(&after.irls));
        }
    }
}

#[test]
fn worked_table_scores() {
    let b = compute_beta(&worked_table(), &OmegaWeights::default());
    let got: Vec<(&str, f64)> = b.beta.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    assert_eq!(
        got,
        [
            ("P1", 2.0),
            ("P2", 1.5),
            ("P3", 2.0),
            ("P4", 1.25),
            ("P5", 0.75)
        ]
    );
    let cut = truncate(
        &worked_table(),
        &["P1", "P3"].iter().map(|s| s.to_string()).collect(),
    );
    let rows: Vec<Vec<String>> = cut.into_iter().map(|r| r.irls).collect();
    assert_eq!(rows, [vec![], vec!["P2".to_string()], vec![], vec![]]);
}

#[test]
fn optimize_is_per_destination() {
    let mut records = worked_table();
    for r in worked_table() {
        records.push(PatternRecord {
            destination: "D2".into(),
            ..r
        });
    }
    let groups = optimize(&records, &OmegaWeights::default());
    assert_eq!(groups.len(), 2);
    assert_eq!(groups[0].recommendation, {
        let mut r = groups[1].recommendation.clone();
        r.destination = "D1".into();
        r
    });
    let expected: BTreeSet<String> = ["P1", "P2", "P3"].iter().map(|s| s.to_string()).collect();
    assert_eq!(groups[0].recommendation.recommended, expected);
}

#[test]
fn empty_graph_marks_every_interior_visit() {
    let s = session(&["A", "B", "C"], &[1.0, 50.0, 1.0]);
    let t: ThresholdTable = [("B".to_string(), 10.0), ("C".to_string(), 10.0)]
        .into_iter()
        .collect();
    let marks = mark_session(&s, &SiteGraph::new(), &t);
    assert_eq!(marks, [Mark::Transit, Mark::Destination, Mark::Reference]);
}
