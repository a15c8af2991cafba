//! Synthetic browsing over a site graph, with ground truth.
//!
//! A simulated user starts at the site root and looks for each of its
//! destination pages in turn. At every page it follows the out-link closest
//! to the current destination, except that with probability
//! `wrong_choice_prob` it takes some other link instead. When no link gets
//! closer it goes back to the page it came from with probability
//! `backtrack_prob` (re-requesting that page, so the log shows the return
//! trip), otherwise it picks a random out-link, or jumps back to the root
//! from a dead end. After `give_up_steps` moves without success it moves on
//! to the next destination.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use chrono::{DateTime, Duration, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::graph::SiteGraph;
use crate::ingest::{LogFormat, RawHit};
use crate::session::{annotate_times, LastDwellPolicy, PageVisit, Session};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("site graph has no root")]
    NoRoot,
    #[error("page `{0}` is not in the site graph")]
    UnknownPage(String),
    #[error("page `{0}` cannot be written as a log request path")]
    UnloggablePage(String),
    #[error("invalid policy: {0}")]
    Policy(&'static str),
    #[error("malformed ground truth line {0}")]
    GroundTruthLine(usize),
}

/// Uniform whole-second dwell in `[mean - jitter, mean + jitter]`, at least one second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DwellDistribution {
    pub mean: f64,
    pub jitter: f64,
}

impl DwellDistribution {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let raw = if self.jitter > 0.0 {
            rng.gen_range(self.mean - self.jitter..=self.mean + self.jitter)
        } else {
            self.mean
        };
        raw.round().max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserPolicy {
    pub wrong_choice_prob: f64,
    pub backtrack_prob: f64,
    pub give_up_steps: usize,
    pub dwell_at_transit: DwellDistribution,
    pub dwell_at_destination: DwellDistribution,
    pub seed: u64,
}

impl Default for UserPolicy {
    fn default() -> Self {
        UserPolicy {
            wrong_choice_prob: 0.3,
            backtrack_prob: 0.9,
            give_up_steps: 25,
            dwell_at_transit: DwellDistribution {
                mean: 10.0,
                jitter: 5.0,
            },
            dwell_at_destination: DwellDistribution {
                mean: 120.0,
                jitter: 30.0,
            },
            seed: 0,
        }
    }
}

impl UserPolicy {
    pub fn validate(&self) -> Result<(), SimError> {
        let unit = 0.0..=1.0;
        if !unit.contains(&self.wrong_choice_prob) {
            return Err(SimError::Policy("wrong_choice_prob must be in [0, 1]"));
        }
        if !unit.contains(&self.backtrack_prob) {
            return Err(SimError::Policy("backtrack_prob must be in [0, 1]"));
        }
        if self.give_up_steps == 0 {
            return Err(SimError::Policy("give_up_steps must be positive"));
        }
        for d in [&self.dwell_at_transit, &self.dwell_at_destination] {
            if !(d.mean.is_finite() && d.jitter.is_finite() && d.jitter >= 0.0) {
                return Err(SimError::Policy("dwell distributions must be finite"));
            }
        }
        if self.dwell_at_destination.mean <= self.dwell_at_transit.mean {
            return Err(SimError::Policy(
                "destination dwell mean must exceed transit dwell mean",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    pub session_id: usize,
    pub client: String,
    pub destinations: Vec<String>,
    pub reached: Vec<bool>,
    /// Pages the user backed out of, in order.
    pub planted_irls: Vec<String>,
    /// Visit positions of reached destinations.
    pub destination_visits: Vec<usize>,
}

impl GroundTruth {
    pub fn reached_destinations(&self) -> impl Iterator<Item = &str> + '_ {
        self.destinations
            .iter()
            .zip(&self.reached)
            .filter(|(_, r)| **r)
            .map(|(d, _)| d.as_str())
    }
}

struct Walk {
    pages: Vec<String>,
    dwells: Vec<f64>,
    truth: GroundTruth,
}

fn walk<R: Rng>(
    g: &SiteGraph,
    destinations: &[String],
    policy: &UserPolicy,
    rng: &mut R,
) -> Result<Walk, SimError> {
    let root = g.root().ok_or(SimError::NoRoot)?;
    for d in destinations {
        if !g.contains(d) {
            return Err(SimError::UnknownPage(d.clone()));
        }
    }
    let mut pages = vec![root.to_string()];
    let mut stack: Vec<&str> = vec![root];
    let mut truth = GroundTruth {
        destinations: destinations.to_vec(),
        ..GroundTruth::default()
    };
    let mut reached_at: BTreeSet<usize> = BTreeSet::new();

    for dest in destinations {
        let dist = g.distances_to(dest);
        let dist_of = |p: &str| g.node_id(p).and_then(|id| dist[id]);
        let mut current = *stack.last().expect("stack never empty");
        let mut steps = 0;
        while current != dest && steps < policy.give_up_steps {
            steps += 1;
            let links: Vec<&str> = g.links(current).collect();
            let here = dist_of(current);
            let best = links
                .iter()
                .copied()
                .filter_map(|l| dist_of(l).map(|d| (d, l)))
                .filter(|(d, _)| here.is_some_and(|h| *d < h))
                .min_by_key(|(d, _)| *d)
                .map(|(_, l)| l);
            let from_destination = reached_at.contains(&(pages.len() - 1));
            let next = match best {
                Some(best) => {
                    if links.len() > 1 && rng.gen_bool(policy.wrong_choice_prob) {
                        let others: Vec<&str> =
                            links.iter().copied().filter(|l| *l != best).collect();
                        *others.choose(rng).expect("at least one other link")
                    } else {
                        best
                    }
                }
                None if stack.len() > 1 && rng.gen_bool(policy.backtrack_prob) => {
                    if !from_destination {
                        truth.planted_irls.push(current.to_string());
                    }
                    stack.pop();
                    current = *stack.last().expect("parent present");
                    pages.push(current.to_string());
                    continue;
                }
                None if !links.is_empty() => *links.choose(rng).expect("non-empty"),
                None if stack.len() > 1 => {
                    if !from_destination {
                        truth.planted_irls.push(current.to_string());
                    }
                    stack.clear();
                    root
                }
                None => break,
            };
            stack.push(next);
            current = next;
            pages.push(current.to_string());
        }
        let reached = current == dest;
        truth.reached.push(reached);
        if reached {
            reached_at.insert(pages.len() - 1);
        }
    }

    let dwells = (0..pages.len())
        .map(|i| {
            if reached_at.contains(&i) {
                policy.dwell_at_destination.sample(rng)
            } else {
                policy.dwell_at_transit.sample(rng)
            }
        })
        .collect();
    truth.destination_visits = reached_at.into_iter().collect();
    Ok(Walk {
        pages,
        dwells,
        truth,
    })
}

fn to_session(w: &Walk, id: usize, client: &str, start: DateTime<Utc>) -> Session {
    let mut at = start;
    let visits = w
        .pages
        .iter()
        .zip(&w.dwells)
        .map(|(page, &dwell)| {
            let v = PageVisit {
                page: page.clone(),
                arrival: at,
                dwell,
                prior_site_time: 0.0,
                dwell_estimated: false,
                last_hit: at,
                hits: 1,
            };
            at += Duration::seconds(dwell as i64);
            v
        })
        .collect();
    let last = *w.dwells.last().expect("walk is non-empty");
    annotate_times(
        Session {
            id,
            client_key: client.to_string(),
            visits,
        },
        LastDwellPolicy::Constant(last),
    )
}

/// Simulate one user looking for `destinations` in order.
///
/// Arrivals start at the Unix epoch; the final visit's dwell is the drawn
/// value (flagged estimated, as a log could not observe it).
pub fn simulate_session(
    g: &SiteGraph,
    destinations: &[String],
    policy: &UserPolicy,
) -> Result<(Session, GroundTruth), SimError> {
    policy.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    let w = walk(g, destinations, policy, &mut rng)?;
    let session = to_session(&w, 0, "sim", DateTime::UNIX_EPOCH);
    let mut truth = w.truth;
    truth.client = "sim".to_string();
    Ok((session, truth))
}

/// Synthetic client address for session `i`.
pub fn client_address(i: usize) -> String {
    format!("10.{}.{}.{}", (i >> 16) & 0xff, (i >> 8) & 0xff, i & 0xff)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub sessions: usize,
    /// Pages destinations are drawn from; empty means every leaf reachable from the root.
    pub destination_pool: Vec<String>,
    /// Inclusive range for the number of destinations per session.
    pub destinations_per_session: (usize, usize),
    pub clock_start: DateTime<Utc>,
    /// Seconds between consecutive session starts.
    pub session_spacing: i64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            sessions: 100,
            destination_pool: Vec::new(),
            destinations_per_session: (1, 2),
            clock_start: DateTime::from_timestamp(1_120_996_800, 0).expect("valid instant"),
            session_spacing: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub sessions: Vec<Session>,
    pub truth: Vec<GroundTruth>,
}

impl Corpus {
    /// Common Log Format lines, ordered by timestamp then session.
    pub fn log_text(&self) -> String {
        let mut hits: Vec<(DateTime<Utc>, usize, usize)> = self
            .sessions
            .iter()
            .enumerate()
            .flat_map(|(s, sess)| {
                sess.visits
                    .iter()
                    .enumerate()
                    .map(move |(j, v)| (v.arrival, s, j))
            })
            .collect();
        hits.sort_unstable();
        let mut out = String::with_capacity(hits.len() * 80);
        for (_, s, j) in hits {
            let session = &self.sessions[s];
            let visit = &session.visits[j];
            let raw = RawHit {
                client_addr: session.client_key.clone(),
                ident: None,
                authuser: None,
                timestamp: visit.arrival.fixed_offset(),
                method: "GET".into(),
                path: visit.page.clone(),
                protocol: "HTTP/1.1".into(),
                status: 200,
                bytes: Some(512 + 7 * visit.page.len() as u64),
                referer: None,
                user_agent: None,
            };
            out.push_str(&raw.to_line(LogFormat::Common));
            out.push('\n');
        }
        out
    }

    /// One tab-separated line per session:
    /// `id client destinations reached planted-irls`, lists comma-separated, `-` when empty.
    pub fn ground_truth_text(&self) -> String {
        let mut out = String::from("# session\tclient\tdestinations\treached\tplanted_irls\n");
        for t in &self.truth {
            let list = |items: Vec<String>| {
                if items.is_empty() {
                    "-".to_string()
                } else {
                    items.join(",")
                }
            };
            let reached = t
                .reached
                .iter()
                .map(|r| if *r { "1" } else { "0" }.to_string());
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                t.session_id,
                t.client,
                list(t.destinations.clone()),
                list(reached.collect()),
                list(t.planted_irls.clone()),
            );
        }
        out
    }
}

/// Read back a document written by [`Corpus::ground_truth_text`].
pub fn parse_ground_truth(text: &str) -> Result<Vec<GroundTruth>, SimError> {
    let split = |f: &str| -> Vec<String> {
        if f == "-" {
            Vec::new()
        } else {
            f.split(',').map(String::from).collect()
        }
    };
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || SimError::GroundTruthLine(i + 1);
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, client, dests, reached, irls] = fields[..] else {
            return Err(bad());
        };
        let reached = split(reached)
            .iter()
            .map(|r| match r.as_str() {
                "1" => Ok(true),
                "0" => Ok(false),
                _ => Err(bad()),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let destinations = split(dests);
        if reached.len() != destinations.len() {
            return Err(bad());
        }
        out.push(GroundTruth {
            session_id: id.parse().map_err(|_| bad())?,
            client: client.to_string(),
            destinations,
            reached,
            planted_irls: split(irls),
            destination_visits: Vec::new(),
        });
    }
    Ok(out)
}

fn check_loggable(page: &str) -> Result<(), SimError> {
    if page.is_empty()
        || page.contains(|c: char| c.is_whitespace() || c == '?' || c == '#' || c == '"')
    {
        Err(SimError::UnloggablePage(page.to_string()))
    } else {
        Ok(())
    }
}

/// Pages with no out-links that can be reached from the root.
pub fn reachable_leaves(g: &SiteGraph) -> Vec<String> {
    let Some(root) = g.root() else {
        return Vec::new();
    };
    g.nodes()
        .filter(|p| *p != root && g.links(p).next().is_none() && g.distance(root, p).is_some())
        .map(String::from)
        .collect()
}

/// Simulate `spec.sessions` users, one client address each.
///
/// Session `i` draws from its own random stream of `policy.seed`, so the
/// output does not depend on how many threads generate it.
pub fn generate_corpus(
    g: &SiteGraph,
    spec: &CorpusSpec,
    policy: &UserPolicy,
) -> Result<Corpus, SimError> {
    policy.validate()?;
    if g.root().is_none() {
        return Err(SimError::NoRoot);
    }
    for p in g.nodes() {
        check_loggable(p)?;
    }
    let pool = if spec.destination_pool.is_empty() {
        reachable_leaves(g)
    } else {
        spec.destination_pool.clone()
    };
    if let Some(p) = pool.iter().find(|p| !g.contains(p)) {
        return Err(SimError::UnknownPage(p.clone()));
    }
    let (lo, hi) = spec.destinations_per_session;
    let (lo, hi) = (lo.min(pool.len()), hi.max(lo).min(pool.len()));

    let results: Vec<Result<(Session, GroundTruth), SimError>> = (0..spec.sessions)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
            rng.set_stream(i as u64);
            let count = rng.gen_range(lo..=hi);
            let destinations: Vec<String> =
                pool.choose_multiple(&mut rng, count).cloned().collect();
            let w = walk(g, &destinations, policy, &mut rng)?;
            let client = client_address(i);
            let start = spec.clock_start + Duration::seconds(spec.session_spacing * i as i64);
            let session = to_session(&w, i, &client, start);
            let mut truth = w.truth;
            truth.session_id = i;
            truth.client = client;
            Ok((session, truth))
        })
        .collect();
    let mut corpus = Corpus {
        sessions: Vec::with_capacity(spec.sessions),
        truth: Vec::with_capacity(spec.sessions),
    };
    for r in results {
        let (s, t) = r?;
        corpus.sessions.push(s);
        corpus.truth.push(t);
    }
    Ok(corpus)
}

/// Random recursive tree: node `i` links from a uniformly chosen earlier node.
/// Pages are named `/page{i}.html`; `/page0.html` is the root.
pub fn random_tree(nodes: usize, seed: u64) -> SiteGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let name = |i: usize| format!("/page{i}.html");
    let mut g = SiteGraph::new();
    if nodes == 0 {
        return g;
    }
    g.set_root(&name(0));
    for i in 1..nodes {
        let parent = rng.gen_range(0..i);
        g.add_edge(&name(parent), &name(i));
    }
    g
}
