//! Directed page-link graph.
//!
//! Edge-list files hold one `from to` pair per line (tab or space
//! separated). Lines starting with `#` are comments, and `# root <page>`
//! declares the entry page.

use std::collections::{HashMap, HashSet, VecDeque};
use std::io::BufRead;

use thiserror::Error;

use crate::session::Session;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("line {0}: expected `from-page to-page`")]
    BadEdgeLine(usize),
    #[error("reading edge list: {0}")]
    Io(#[from] std::io::Error),
}

type NodeId = usize;

#[derive(Debug, Clone, Default)]
pub struct SiteGraph {
    names: Vec<String>,
    index: HashMap<String, NodeId>,
    /// Out-neighbours in insertion order.
    out: Vec<Vec<NodeId>>,
    edges: HashSet<(NodeId, NodeId)>,
    root: Option<NodeId>,
}

impl SiteGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build a graph from `(from, to)` pairs; duplicates are ignored.
    pub fn from_edges<'a, I>(edges: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut g = SiteGraph::new();
        for (a, b) in edges {
            g.add_edge(a, b);
        }
        g
    }

    pub fn add_node(&mut self, page: &str) -> NodeId {
        if let Some(&id) = self.index.get(page) {
            return id;
        }
        let id = self.names.len();
        self.names.push(page.to_string());
        self.index.insert(page.to_string(), id);
        self.out.push(Vec::new());
        id
    }

    /// Returns false if the edge was already present.
    pub fn add_edge(&mut self, from: &str, to: &str) -> bool {
        let a = self.add_node(from);
        let b = self.add_node(to);
        if self.edges.insert((a, b)) {
            self.out[a].push(b);
            true
        } else {
            false
        }
    }

    pub fn set_root(&mut self, page: &str) {
        let id = self.add_node(page);
        self.root = Some(id);
    }

    pub fn root(&self) -> Option<&str> {
        self.root.map(|id| self.names[id].as_str())
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, page: &str) -> bool {
        self.index.contains_key(page)
    }

    /// Pages in insertion order.
    pub fn nodes(&self) -> impl Iterator<Item = &str> + '_ {
        self.names.iter().map(String::as_str)
    }

    /// Edges grouped by source, each group in insertion order.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.out.iter().enumerate().flat_map(move |(a, outs)| {
            outs.iter()
                .map(move |&b| (self.names[a].as_str(), self.names[b].as_str()))
        })
    }

    /// Out-links of `page` in insertion order; empty for unknown pages.
    pub fn links(&self, page: &str) -> impl Iterator<Item = &str> + '_ {
        let outs: &[NodeId] = match self.index.get(page) {
            Some(&id) => &self.out[id],
            None => &[],
        };
        outs.iter().map(move |&b| self.names[b].as_str())
    }

    /// True iff `a` links directly to `b`.
    pub fn is_connected(&self, a: &str, b: &str) -> bool {
        match (self.index.get(a), self.index.get(b)) {
            (Some(&a), Some(&b)) => self.edges.contains(&(a, b)),
            _ => false,
        }
    }

    /// Shortest directed hop count from `a` to `b`, `None` if unreachable.
    pub fn distance(&self, a: &str, b: &str) -> Option<usize> {
        if a == b {
            return Some(0);
        }
        let (&src, &dst) = (self.index.get(a)?, self.index.get(b)?);
        let mut dist = vec![usize::MAX; self.names.len()];
        dist[src] = 0;
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            for &v in &self.out[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    if v == dst {
                        return Some(dist[v]);
                    }
                    queue.push_back(v);
                }
            }
        }
        None
    }

    /// Hop count from every page to `target`, indexed like [`SiteGraph::nodes`].
    pub fn distances_to(&self, target: &str) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.names.len()];
        let Some(&dst) = self.index.get(target) else {
            return dist;
        };
        let mut incoming: Vec<Vec<NodeId>> = vec![Vec::new(); self.names.len()];
        for (a, outs) in self.out.iter().enumerate() {
            for &b in outs {
                incoming[b].push(a);
            }
        }
        dist[dst] = Some(0);
        let mut queue = VecDeque::from([dst]);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap_or(0);
            for &v in &incoming[u] {
                if dist[v].is_none() {
                    dist[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub(crate) fn node_id(&self, page: &str) -> Option<NodeId> {
        self.index.get(page).copied()
    }
}

/// Read an edge list.
pub fn load_edge_list<R: BufRead>(source: R) -> Result<SiteGraph, GraphError> {
    let mut g = SiteGraph::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            let mut words = comment.split_whitespace();
            if let (Some("root"), Some(page), None) = (words.next(), words.next(), words.next()) {
                g.set_root(page);
            }
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        match (tokens.next(), tokens.next(), tokens.next()) {
            (Some(a), Some(b), None) => {
                g.add_edge(a, b);
            }
            _ => return Err(GraphError::BadEdgeLine(i + 1)),
        }
    }
    Ok(g)
}

/// Edge `a -> b` for every consecutive pair seen in at least `min_support` sessions.
pub fn infer_edges_from_sessions(sessions: &[Session], min_support: usize) -> SiteGraph {
    let min_support = min_support.max(1);
    let mut support: HashMap<(&str, &str), usize> = HashMap::new();
    let mut order: Vec<(&str, &str)> = Vec::new();
    for s in sessions {
        let mut seen = HashSet::new();
        for w in s.visits.windows(2) {
            let pair = (w[0].page.as_str(), w[1].page.as_str());
            if seen.insert(pair) {
                let n = support.entry(pair).or_insert(0);
                if *n == 0 {
                    order.push(pair);
                }
                *n += 1;
            }
        }
    }
    SiteGraph::from_edges(order.into_iter().filter(|p| support[p] >= min_support))
}
