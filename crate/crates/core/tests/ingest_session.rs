use std::collections::HashMap;

use chrono::{DateTime, TimeZone, Utc};
use proptest::prelude::*;

use navmine::ingest::{parse_log, ClientKey};
use navmine::{
    filter_hits, parse_line, sessionize, FilterConfig, Hit, LogFormat, RawHit, SessionConfig,
};

fn base() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2005, 7, 10, 0, 0, 0).unwrap()
}

fn raw_hit(path: String, method: &str, status: u16, offset: i64) -> RawHit {
    RawHit {
        client_addr: "192.168.1.20".into(),
        ident: None,
        authuser: None,
        timestamp: (base() + chrono::Duration::seconds(offset)).fixed_offset(),
        method: method.into(),
        path,
        protocol: "HTTP/1.1".into(),
        status,
        bytes: Some(100),
        referer: None,
        user_agent: None,
    }
}

fn path_strategy() -> impl Strategy<Value = String> {
    (
        prop::sample::select(vec!["/", "/a", "/b/c", "/docs/x"]),
        prop::sample::select(vec!["", ".html", ".gif", ".JPG", ".css", ".php"]),
        prop::sample::select(vec!["", "?id=7", "#frag", "?q=1#f"]),
    )
        .prop_map(|(p, e, q)| format!("{p}{e}{q}"))
}

fn raw_strategy() -> impl Strategy<Value = RawHit> {
    (
        path_strategy(),
        prop::sample::select(vec!["GET", "POST", "HEAD"]),
        prop::sample::select(vec![200u16, 204, 301, 302, 304, 404, 500]),
        0i64..100_000,
    )
        .prop_map(|(p, m, s, t)| raw_hit(p, m, s, t))
}

proptest! {
    #[test]
    fn parse_line_is_total(line in "\\PC{0,120}") {
        // either a full record or an error, never a panic
        let _ = parse_line(&line, LogFormat::Common);
        let _ = parse_line(&line, LogFormat::Combined);
    }

    #[test]
    fn rendered_hits_parse_back(h in raw_strategy(), agent in "[A-Za-z0-9/ .]{1,20}") {
        let line = h.to_line(LogFormat::Common);
        prop_assert_eq!(parse_line(&line, LogFormat::Common).unwrap(), h.clone());
        let combined = RawHit { user_agent: Some(agent), referer: Some("http://r/".into()), ..h };
        let line = combined.to_line(LogFormat::Combined);
        prop_assert_eq!(parse_line(&line, LogFormat::Combined).unwrap(), combined);
    }

    #[test]
    fn filter_keeps_order_and_is_idempotent(hits in prop::collection::vec(raw_strategy(), 0..40)) {
        let cfg = FilterConfig::default();
        let once = filter_hits(&hits, &cfg);
        // survivors are exactly the accepted hits, in source order
        let expected: Vec<Hit> = hits.iter().filter_map(|h| cfg.apply(h)).collect();
        prop_assert_eq!(&once, &expected);
        let again_raw: Vec<RawHit> = once
            .iter()
            .map(|h| raw_hit(h.page.clone(), "GET", 200, (h.timestamp - base()).num_seconds()))
            .collect();
        let twice = filter_hits(&again_raw, &cfg);
        prop_assert_eq!(twice, once);
    }
}

#[test]
fn parse_log_counts_exactly_the_bad_lines() {
    let good = r#"1.2.3.4 - - [10/Jul/2005:12:00:00 +0000] "GET /x.html HTTP/1.0" 200 1"#;
    let mut text = String::new();
    let mut expected_bad = Vec::new();
    for i in 0..200 {
        if i % 20 == 7 {
            text.push_str("1.2.3.4 - - [not a date] \"GET / HTTP/1.0\" 200 1\n");
            expected_bad.push(i + 1);
        } else {
            text.push_str(good);
            text.push('\n');
        }
    }
    let parsed = parse_log(&text, LogFormat::Common);
    assert_eq!(parsed.malformed, expected_bad);
    assert_eq!(parsed.hits.len(), 190);
}

#[test]
fn user_agent_splits_clients_behind_one_address() {
    let line = |agent: &str, secs: u32| {
        format!(
            r#"10.0.0.9 - - [10/Jul/2005:12:00:{secs:02} +0000] "GET /p{secs}.html HTTP/1.0" 200 1 "-" "{agent}""#
        )
    };
    let text = [line("A", 1), line("B", 2), line("A", 3)].join("\n");
    let parsed = parse_log(&text, LogFormat::Combined);
    let by_addr = filter_hits(&parsed.hits, &FilterConfig::default());
    assert_eq!(sessionize(&by_addr, &SessionConfig::default()).len(), 1);
    let cfg = FilterConfig {
        client_key: ClientKey::AddressAndAgent,
        ..FilterConfig::default()
    };
    let by_agent = filter_hits(&parsed.hits, &cfg);
    assert_eq!(sessionize(&by_agent, &SessionConfig::default()).len(), 2);
}

fn hits_strategy() -> impl Strategy<Value = Vec<Hit>> {
    prop::collection::vec(
        (
            prop::sample::select(vec!["c1", "c2", "c3"]),
            0i64..20_000,
            prop::sample::select(vec!["/a", "/b", "/c", "/d"]),
        ),
        0..60,
    )
    .prop_map(|v| {
        v.into_iter()
            .map(|(c, t, p)| Hit {
                client_key: c.into(),
                timestamp: base() + chrono::Duration::seconds(t),
                page: p.into(),
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn sessions_partition_the_hits(hits in hits_strategy(), timeout_min in 1u64..60) {
        let cfg = SessionConfig {
            timeout: std::time::Duration::from_secs(timeout_min * 60),
            ..SessionConfig::default()
        };
        let sessions = sessionize(&hits, &cfg);

        // every hit is accounted for, either as a visit or merged into one
        let merged: u32 = sessions.iter().flat_map(|s| &s.visits).map(|v| v.hits).sum();
        prop_assert_eq!(merged as usize, hits.len());
        let mut per_client: HashMap<&str, usize> = HashMap::new();
        for h in &hits {
            *per_client.entry(&h.client_key).or_default() += 1;
        }
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for s in &sessions {
            *seen.entry(&s.client_key).or_default() +=
                s.visits.iter().map(|v| v.hits as usize).sum::<usize>();
        }
        prop_assert_eq!(seen, per_client);

        let timeout = chrono::Duration::from_std(cfg.timeout).unwrap();
        for (i, s) in sessions.iter().enumerate() {
            prop_assert_eq!(s.id, i);
            prop_assert!(!s.visits.is_empty());
            for w in s.visits.windows(2) {
                prop_assert!(w[0].arrival <= w[1].arrival);
                prop_assert!(w[0].page != w[1].page);
                prop_assert!(w[1].arrival - w[0].last_hit <= timeout);
                prop_assert!(w[0].prior_site_time <= w[1].prior_site_time);
            }
            let non_final: f64 = s.visits[..s.visits.len() - 1].iter().map(|v| v.dwell).sum();
            let span = (s.visits.last().unwrap().arrival - s.visits[0].arrival).num_seconds() as f64;
            prop_assert_eq!(non_final, span);
            let flags: Vec<bool> = s.visits.iter().map(|v| v.dwell_estimated).collect();
            let mut want = vec![false; flags.len()];
            *want.last_mut().unwrap() = true;
            prop_assert_eq!(flags, want);
            for v in &s.visits {
                prop_assert!(hits.iter().any(|h| h.client_key == s.client_key
                    && h.timestamp == v.arrival && h.page == v.page));
            }
        }
        prop_assert_eq!(sessionize(&hits, &cfg), sessions);
    }

    #[test]
    fn without_reloads_visits_are_the_hits(hits in hits_strategy()) {
        // drop hits that would be merged as reloads, then every (client, time, page)
        // must come back exactly once
        let mut sorted = hits.clone();
        sorted.sort_by(|a, b| a.client_key.cmp(&b.client_key).then(a.timestamp.cmp(&b.timestamp)));
        sorted.dedup_by(|b, a| a.client_key == b.client_key && a.page == b.page);
        let cfg = SessionConfig {
            timeout: std::time::Duration::from_secs(u32::MAX as u64),
            ..SessionConfig::default()
        };
        let sessions = sessionize(&sorted, &cfg);
        let mut got: Vec<(String, DateTime<Utc>, String)> = sessions
            .iter()
            .flat_map(|s| s.visits.iter().map(|v| (s.client_key.clone(), v.arrival, v.page.clone())))
            .collect();
        let mut want: Vec<(String, DateTime<Utc>, String)> =
            sorted.into_iter().map(|h| (h.client_key, h.timestamp, h.page)).collect();
        got.sort();
        want.sort();
        prop_assert_eq!(got, want);
    }
}
