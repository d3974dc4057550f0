//! Recorded protocol traffic: the line-delimited log format, a human
//! readable trace, and delta-vs-full-render size statistics.
//!
//! One record per line: `<C2S|S2C> <ISO-8601 timestamp> <raw json>`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{self, Write};

use chrono::{DateTime, FixedOffset, SecondsFormat, Utc};

use crate::codec::{
    decode_client, decode_server, encode_server, DeltaClientMessage, DeltaServerMessage,
};
use crate::model::{RepresentationalModel, RepresentationalNode};
use crate::update::DeltaDirective;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ClientToServer,
    ServerToClient,
}

impl Direction {
    pub fn tag(self) -> &'static str {
        match self {
            Direction::ClientToServer => "C2S",
            Direction::ServerToClient => "S2C",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficRecord {
    pub direction: Direction,
    pub timestamp: DateTime<FixedOffset>,
    pub payload: Vec<u8>,
}

impl TrafficRecord {
    pub fn to_line(&self) -> String {
        format!(
            "{} {} {}",
            self.direction.tag(),
            self.timestamp.to_rfc3339_opts(SecondsFormat::Micros, true),
            String::from_utf8_lossy(&self.payload)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {reason}")]
pub struct TrafficError {
    pub line: usize,
    pub reason: String,
}

pub fn parse_line(line: &str) -> Result<TrafficRecord, String> {
    let mut parts = line.splitn(3, ' ');
    let direction = match parts.next() {
        Some("C2S") => Direction::ClientToServer,
        Some("S2C") => Direction::ServerToClient,
        Some(other) => return Err(format!("unknown direction `{other}`")),
        None => return Err("empty record".into()),
    };
    let timestamp = parts.next().ok_or("missing timestamp")?;
    let timestamp = DateTime::parse_from_rfc3339(timestamp)
        .map_err(|e| format!("bad timestamp `{timestamp}`: {e}"))?;
    let payload = parts.next().ok_or("missing payload")?;
    Ok(TrafficRecord {
        direction,
        timestamp,
        payload: payload.as_bytes().to_vec(),
    })
}

/// Appends records with non-decreasing timestamps.
#[derive(Debug)]
pub struct TrafficWriter<W> {
    inner: W,
    last: Option<DateTime<Utc>>,
}

impl<W: Write> TrafficWriter<W> {
    pub fn new(inner: W) -> Self {
        TrafficWriter { inner, last: None }
    }

    pub fn append(&mut self, direction: Direction, payload: &[u8]) -> io::Result<()> {
        let now = Utc::now();
        let stamp = match self.last {
            Some(last) if last > now => last,
            _ => now,
        };
        self.last = Some(stamp);
        let record = TrafficRecord {
            direction,
            timestamp: stamp.fixed_offset(),
            payload: payload.to_vec(),
        };
        writeln!(self.inner, "{}", record.to_line())?;
        self.inner.flush()
    }

    pub fn get_ref(&self) -> &W {
        &self.inner
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

/// A decoded record of a log.
#[derive(Debug, Clone, PartialEq)]
pub enum Exchange {
    Client(DeltaClientMessage),
    Server(DeltaServerMessage),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedRecord {
    pub line: usize,
    pub record: TrafficRecord,
    pub exchange: Exchange,
}

fn decode_record(line_no: usize, line: &str) -> Result<DecodedRecord, TrafficError> {
    let err = |reason: String| TrafficError {
        line: line_no,
        reason,
    };
    let record = parse_line(line).map_err(err)?;
    let exchange = match record.direction {
        Direction::ClientToServer => decode_client(&record.payload).map(Exchange::Client),
        Direction::ServerToClient => decode_server(&record.payload).map(Exchange::Server),
    }
    .map_err(|e| err(e.to_string()))?;
    Ok(DecodedRecord {
        line: line_no,
        record,
        exchange,
    })
}

/// Decodes every non-blank line, keeping per-line failures.
pub fn decode_log(input: &str) -> Vec<Result<DecodedRecord, TrafficError>> {
    let mut last: Option<DateTime<FixedOffset>> = None;
    input
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let rec = decode_record(i + 1, l)?;
            if last.is_some_and(|t| rec.record.timestamp < t) {
                return Err(TrafficError {
                    line: i + 1,
                    reason: "timestamp earlier than the previous record".into(),
                });
            }
            last = Some(rec.record.timestamp);
            Ok(rec)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct InspectSummary {
    pub records: usize,
    pub malformed: usize,
}

/// Writes a readable trace of `input`. Malformed records are reported
/// in place and counted; the rest of the log is still traced.
pub fn inspect(input: &str, out: &mut impl Write) -> io::Result<InspectSummary> {
    let mut summary = InspectSummary::default();
    for entry in decode_log(input) {
        match entry {
            Ok(rec) => {
                summary.records += 1;
                out.write_all(describe(&rec).as_bytes())?;
            }
            Err(e) => {
                summary.malformed += 1;
                writeln!(out, "line {}: MALFORMED {}", e.line, e.reason)?;
            }
        }
    }
    Ok(summary)
}

fn view(fragment: &Option<String>) -> &str {
    fragment.as_deref().unwrap_or("-")
}

fn describe(rec: &DecodedRecord) -> String {
    let mut s = String::new();
    let ts = rec
        .record
        .timestamp
        .to_rfc3339_opts(SecondsFormat::Micros, true);
    match &rec.exchange {
        Exchange::Client(m) => {
            let _ = writeln!(
                s,
                "line {} C2S {ts} session={} seq={} view={}",
                rec.line,
                m.session,
                m.seq,
                view(&m.fragment)
            );
            for w in &m.state_changes {
                let _ = writeln!(s, "    write {}.{} = {}", w.id, w.name, w.value);
            }
            if let Some(a) = &m.action {
                let _ = match &a.payload {
                    Some(p) => writeln!(s, "    action {} {} payload={p}", a.id, a.event),
                    None => writeln!(s, "    action {} {}", a.id, a.event),
                };
            }
        }
        Exchange::Server(m) => {
            let _ = writeln!(
                s,
                "line {} S2C {ts} session={} ack={} view={} directives={}",
                rec.line,
                m.session,
                m.ack,
                view(&m.fragment),
                m.directives.len()
            );
            for d in &m.directives {
                describe_directive(&mut s, d);
            }
        }
    }
    s
}

fn describe_directive(s: &mut String, d: &DeltaDirective) {
    match d {
        DeltaDirective::Create {
            parent,
            index,
            node,
        } => {
            let parent = parent.map_or_else(|| "-".to_owned(), |p| p.to_string());
            let _ = writeln!(
                s,
                "    create {} {} parent={parent} index={index} nodes={}",
                node.id,
                node.widget,
                node.node_count()
            );
            describe_node(s, node, 3);
        }
        DeltaDirective::Remove { id } => {
            let _ = writeln!(s, "    remove {id}");
        }
        DeltaDirective::SetProperty { id, name, value } => {
            let _ = writeln!(s, "    set_property {id}.{name} = {value}");
        }
        DeltaDirective::SetListeners { id, listened } => {
            let events: Vec<_> = listened.iter().map(|e| e.name()).collect();
            let _ = writeln!(s, "    set_listeners {id} [{}]", events.join(", "));
        }
    }
}

fn describe_node(s: &mut String, node: &RepresentationalNode, depth: usize) {
    let props: Vec<_> = node
        .properties
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect();
    let events: Vec<_> = node.listened.iter().map(|e| e.name()).collect();
    let _ = writeln!(
        s,
        "{:indent$}{} {} {{{}}} listens=[{}]",
        "",
        node.id,
        node.widget,
        props.join(", "),
        events.join(", "),
        indent = depth * 2
    );
    for c in &node.children {
        describe_node(s, c, depth + 1);
    }
}

/// Per-session models rebuilt from server messages.
#[derive(Debug, Default)]
struct Replayer {
    sessions: BTreeMap<String, (RepresentationalModel, u64)>,
}

impl Replayer {
    fn apply(&mut self, m: &DeltaServerMessage) -> Result<&RepresentationalModel, String> {
        if m.ack == 0 && !self.sessions.contains_key(&m.session) {
            self.sessions
                .insert(m.session.clone(), (RepresentationalModel::empty(), 0));
            let (model, _) = self.sessions.get_mut(&m.session).expect("just inserted");
            model.apply_all(&m.directives).map_err(|e| e.to_string())?;
            return Ok(model);
        }
        let (model, last_ack) = self
            .sessions
            .get_mut(&m.session)
            .ok_or_else(|| format!("session {} has no bootstrap record", m.session))?;
        // A retried request is answered with the cached response, which
        // repeats a delta that was already applied.
        if m.ack > *last_ack {
            let mut next = model.clone();
            next.apply_all(&m.directives).map_err(|e| e.to_string())?;
            *model = next;
            *last_ack = m.ack;
        }
        Ok(model)
    }

    fn into_models(self) -> BTreeMap<String, RepresentationalModel> {
        self.sessions
            .into_iter()
            .map(|(k, (model, _))| (k, model))
            .collect()
    }
}

/// Replays every server message in order and returns the final model of
/// each session.
pub fn replay(input: &str) -> Result<BTreeMap<String, RepresentationalModel>, TrafficError> {
    let mut replayer = Replayer::default();
    for entry in decode_log(input) {
        let rec = entry?;
        if let Exchange::Server(m) = &rec.exchange {
            replayer.apply(m).map_err(|reason| TrafficError {
                line: rec.line,
                reason,
            })?;
        }
    }
    Ok(replayer.into_models())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsRow {
    pub line: usize,
    pub session: String,
    pub ack: u64,
    pub directives: usize,
    pub delta_bytes: usize,
    pub full_bytes: usize,
}

impl StatsRow {
    pub fn ratio(&self) -> f64 {
        ratio(self.delta_bytes, self.full_bytes)
    }
}

fn ratio(delta: usize, full: usize) -> f64 {
    if full == 0 {
        0.0
    } else {
        delta as f64 / full as f64
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StatsReport {
    pub rows: Vec<StatsRow>,
}

impl StatsReport {
    pub fn total_delta(&self) -> usize {
        self.rows.iter().map(|r| r.delta_bytes).sum()
    }

    pub fn total_full(&self) -> usize {
        self.rows.iter().map(|r| r.full_bytes).sum()
    }

    pub fn total_ratio(&self) -> f64 {
        ratio(self.total_delta(), self.total_full())
    }

    pub fn write_table(&self, out: &mut impl Write) -> io::Result<()> {
        writeln!(
            out,
            "{:>6}  {:<32}  {:>5}  {:>10}  {:>11}  {:>11}  {:>6}",
            "line", "session", "ack", "directives", "delta_bytes", "full_bytes", "ratio"
        )?;
        for r in &self.rows {
            writeln!(
                out,
                "{:>6}  {:<32}  {:>5}  {:>10}  {:>11}  {:>11}  {:>6.3}",
                r.line,
                r.session,
                r.ack,
                r.directives,
                r.delta_bytes,
                r.full_bytes,
                r.ratio()
            )?;
        }
        writeln!(
            out,
            "{:>6}  {:<32}  {:>5}  {:>10}  {:>11}  {:>11}  {:>6.3}",
            "total",
            format!("{} messages", self.rows.len()),
            "",
            self.rows.iter().map(|r| r.directives).sum::<usize>(),
            self.total_delta(),
            self.total_full(),
            self.total_ratio()
        )
    }
}

/// Size of the message that would carry `model` in full: a single create of
/// the root, with the same envelope as `m`.
pub fn full_render_size(m: &DeltaServerMessage, model: &RepresentationalModel) -> usize {
    let full = DeltaServerMessage {
        directives: model
            .root()
            .map(|root| DeltaDirective::Create {
                parent: None,
                index: 0,
                node: root.clone(),
            })
            .into_iter()
            .collect(),
        ..m.clone()
    };
    encode_server(&full).map_or(0, |b| b.len())
}

/// For each server message: its encoded size against the size of a full
/// render of the model reconstructed at that point.
pub fn stats(input: &str) -> Result<StatsReport, TrafficError> {
    let mut replayer = Replayer::default();
    let mut report = StatsReport::default();
    for entry in decode_log(input) {
        let rec = entry?;
        let Exchange::Server(m) = &rec.exchange else {
            continue;
        };
        let model = replayer.apply(m).map_err(|reason| TrafficError {
            line: rec.line,
            reason,
        })?;
        report.rows.push(StatsRow {
            line: rec.line,
            session: m.session.clone(),
            ack: m.ack,
            directives: m.directives.len(),
            delta_bytes: rec.record.payload.len(),
            full_bytes: full_render_size(m, model),
        });
    }
    Ok(report)
}
