//! Access-log parsing and page filtering.
//!
//! Two line grammars are understood:
//!
//! ```text
//! common:   host ident authuser [dd/Mon/yyyy:HH:MM:SS zzzzz] "METHOD path PROTO" status bytes
//! combined: <common> "referer" "user-agent"
//! ```
//!
//! A `-` in any optional field means the field is absent.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, FixedOffset, Utc};
use thiserror::Error;

use crate::session::Hit;

const TIMESTAMP_FORMAT: &str = "%d/%b/%Y:%H:%M:%S %z";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum LogFormat {
    #[default]
    Common,
    Combined,
}

impl FromStr for LogFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "common" => Ok(LogFormat::Common),
            "combined" => Ok(LogFormat::Combined),
            other => Err(format!(
                "unknown log format `{other}` (expected common|combined)"
            )),
        }
    }
}

impl fmt::Display for LogFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LogFormat::Common => "common",
            LogFormat::Combined => "combined",
        })
    }
}

/// Why a line was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MalformedReason {
    #[error("empty line")]
    Empty,
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("unterminated {0}")]
    Unterminated(&'static str),
    #[error("invalid timestamp")]
    Timestamp,
    #[error("request is not `METHOD path PROTO`")]
    Request,
    #[error("invalid status code")]
    Status,
    #[error("invalid byte count")]
    Bytes,
    #[error("unexpected trailing input")]
    Trailing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("malformed line: {0}")]
pub struct MalformedLine(pub MalformedReason);

/// One access-log record, exactly as written.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawHit {
    pub client_addr: String,
    pub ident: Option<String>,
    pub authuser: Option<String>,
    pub timestamp: DateTime<FixedOffset>,
    pub method: String,
    pub path: String,
    pub protocol: String,
    pub status: u16,
    pub bytes: Option<u64>,
    pub referer: Option<String>,
    pub user_agent: Option<String>,
}

impl RawHit {
    /// Render back into a log line of the given format.
    pub fn to_line(&self, format: LogFormat) -> String {
        fn dash(v: &Option<String>) -> &str {
            v.as_deref().unwrap_or("-")
        }
        let bytes = self
            .bytes
            .map_or_else(|| "-".to_string(), |b| b.to_string());
        let mut line = format!(
            "{} {} {} [{}] \"{} {} {}\" {} {}",
            self.client_addr,
            dash(&self.ident),
            dash(&self.authuser),
            self.timestamp.format(TIMESTAMP_FORMAT),
            self.method,
            self.path,
            self.protocol,
            self.status,
            bytes,
        );
        if format == LogFormat::Combined {
            line.push_str(&format!(
                " \"{}\" \"{}\"",
                dash(&self.referer),
                dash(&self.user_agent)
            ));
        }
        line
    }
}

struct Cursor<'a> {
    rest: &'a str,
}

impl<'a> Cursor<'a> {
    fn token(&mut self, name: &'static str) -> Result<&'a str, MalformedReason> {
        let end = self.rest.find(' ').unwrap_or(self.rest.len());
        if end == 0 {
            return Err(MalformedReason::MissingField(name));
        }
        let (tok, rest) = self.rest.split_at(end);
        self.rest = rest;
        Ok(tok)
    }

    fn space(&mut self, next: &'static str) -> Result<(), MalformedReason> {
        self.rest = self
            .rest
            .strip_prefix(' ')
            .ok_or(MalformedReason::MissingField(next))?;
        Ok(())
    }

    fn bracketed(&mut self) -> Result<&'a str, MalformedReason> {
        let inner = self
            .rest
            .strip_prefix('[')
            .ok_or(MalformedReason::MissingField("timestamp"))?;
        let end = inner
            .find(']')
            .ok_or(MalformedReason::Unterminated("timestamp"))?;
        self.rest = &inner[end + 1..];
        Ok(&inner[..end])
    }

    /// A double-quoted field; backslash escapes are skipped over but kept verbatim.
    fn quoted(&mut self, name: &'static str) -> Result<&'a str, MalformedReason> {
        let inner = self
            .rest
            .strip_prefix('"')
            .ok_or(MalformedReason::MissingField(name))?;
        let bytes = inner.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            match bytes[i] {
                b'\\' => i += 2,
                b'"' => {
                    self.rest = &inner[i + 1..];
                    return Ok(&inner[..i]);
                }
                _ => i += 1,
            }
        }
        Err(MalformedReason::Unterminated(name))
    }
}

fn optional(field: &str) -> Option<String> {
    (field != "-").then(|| field.to_string())
}

/// Parse one log line (no trailing newline) in the given format.
pub fn parse_line(line: &str, format: LogFormat) -> Result<RawHit, MalformedLine> {
    parse_inner(line, format).map_err(MalformedLine)
}

fn parse_inner(line: &str, format: LogFormat) -> Result<RawHit, MalformedReason> {
    let line = line.strip_suffix('\r').unwrap_or(line);
    if line.trim().is_empty() {
        return Err(MalformedReason::Empty);
    }
    let mut cur = Cursor { rest: line };
    let host = cur.token("host")?;
    cur.space("ident")?;
    let ident = cur.token("ident")?;
    cur.space("authuser")?;
    let authuser = cur.token("authuser")?;
    cur.space("timestamp")?;
    let ts = cur.bracketed()?;
    let timestamp =
        DateTime::parse_from_str(ts, TIMESTAMP_FORMAT).map_err(|_| MalformedReason::Timestamp)?;
    cur.space("request")?;
    let request = cur.quoted("request")?;
    let mut parts = request.split(' ');
    let (method, path, protocol) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
        (Some(m), Some(p), Some(v), None) if !m.is_empty() && !p.is_empty() && !v.is_empty() => {
            (m, p, v)
        }
        _ => return Err(MalformedReason::Request),
    };
    cur.space("status")?;
    let status: u16 = cur
        .token("status")?
        .parse()
        .map_err(|_| MalformedReason::Status)?;
    if !(100..=599).contains(&status) {
        return Err(MalformedReason::Status);
    }
    cur.space("bytes")?;
    let bytes = match cur.token("bytes")? {
        "-" => None,
        b => Some(b.parse::<u64>().map_err(|_| MalformedReason::Bytes)?),
    };
    let (referer, user_agent) = match format {
        LogFormat::Common => (None, None),
        LogFormat::Combined => {
            cur.space("referer")?;
            let referer = cur.quoted("referer")?;
            cur.space("user-agent")?;
            let agent = cur.quoted("user-agent")?;
            (optional(referer), optional(agent))
        }
    };
    if !cur.rest.is_empty() {
        return Err(MalformedReason::Trailing);
    }
    Ok(RawHit {
        client_addr: host.to_string(),
        ident: optional(ident),
        authuser: optional(authuser),
        timestamp,
        method: method.to_string(),
        path: path.to_string(),
        protocol: protocol.to_string(),
        status,
        bytes,
        referer,
        user_agent,
    })
}

/// Which fields identify a client.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClientKey {
    #[default]
    Address,
    AddressAndAgent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterConfig {
    /// Lowercase, without the leading dot.
    pub ignored_extensions: HashSet<String>,
    pub accepted_statuses: HashSet<u16>,
    pub accepted_methods: HashSet<String>,
    pub strip_query: bool,
    pub client_key: ClientKey,
}

impl Default for FilterConfig {
    fn default() -> Self {
        let ignored_extensions = [
            "jpg", "jpeg", "gif", "png", "bmp", "ico", "css", "js", "swf",
        ]
        .into_iter()
        .map(String::from)
        .collect();
        let accepted_statuses = (200..=299).chain(std::iter::once(304)).collect();
        FilterConfig {
            ignored_extensions,
            accepted_statuses,
            accepted_methods: std::iter::once("GET".to_string()).collect(),
            strip_query: true,
            client_key: ClientKey::Address,
        }
    }
}

impl FilterConfig {
    /// Normalized page for `path`, or `None` when the hit is not a page view.
    pub fn page_for(&self, path: &str) -> Option<String> {
        let mut page = path.split('#').next().unwrap_or("");
        if self.strip_query {
            page = page.split('?').next().unwrap_or("");
        }
        if page.is_empty() {
            return None;
        }
        let last_segment = page.rsplit('/').next().unwrap_or(page);
        let last_segment = last_segment.split('?').next().unwrap_or(last_segment);
        if let Some((_, ext)) = last_segment.rsplit_once('.') {
            if self.ignored_extensions.contains(&ext.to_ascii_lowercase()) {
                return None;
            }
        }
        Some(page.to_string())
    }

    /// Convert a raw hit into a page view, if it passes the filter.
    pub fn apply(&self, raw: &RawHit) -> Option<Hit> {
        if !self.accepted_statuses.contains(&raw.status)
            || !self.accepted_methods.contains(&raw.method)
        {
            return None;
        }
        let page = self.page_for(&raw.path)?;
        let client_key = match (self.client_key, &raw.user_agent) {
            (ClientKey::AddressAndAgent, Some(agent)) => format!("{} {}", raw.client_addr, agent),
            _ => raw.client_addr.clone(),
        };
        Some(Hit {
            client_key,
            timestamp: raw.timestamp.with_timezone(&Utc),
            page,
        })
    }
}

/// Keep only page views, in input order.
pub fn filter_hits<'a, I>(hits: I, cfg: &FilterConfig) -> Vec<Hit>
where
    I: IntoIterator<Item = &'a RawHit>,
{
    hits.into_iter().filter_map(|h| cfg.apply(h)).collect()
}

/// Result of parsing a block of log text.
#[derive(Debug, Default, Clone)]
pub struct ParsedLog {
    pub hits: Vec<RawHit>,
    /// 1-based line numbers of rejected lines.
    pub malformed: Vec<usize>,
}

/// Parse every line of `text`. Blank lines count as malformed.
pub fn parse_log(text: &str, format: LogFormat) -> ParsedLog {
    let mut out = ParsedLog::default();
    for (i, line) in text.lines().enumerate() {
        match parse_line(line, format) {
            Ok(hit) => out.hits.push(hit),
            Err(_) => out.malformed.push(i + 1),
        }
    }
    out
}
