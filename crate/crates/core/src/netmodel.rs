//! Topologies, Bernoulli erasure links and broadcast delivery.
//!
//! Topology documents are line oriented:
//!
//! ```text
//! # comment
//! node N1
//! node N2
//! source N1
//! default_erasure 0.2
//! link N1 N2 erasure=0.35
//! ```
//!
//! `link u v` declares both directions `u → v` and `v → u`. A per-link
//! `erasure=` overrides every default; otherwise the document's
//! `default_erasure` applies, and failing that the channel's.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("topology has no source")]
    MissingSource,
    #[error("node `{0}` is unreachable from the source")]
    Unreachable(String),
    #[error("erasure probability {0} outside [0, 1]")]
    InvalidErasure(f64),
    #[error("unknown built-in topology `{0}`")]
    UnknownBuiltin(String),
    #[error("invalid channel configuration: {0}")]
    InvalidChannel(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Directed link to `to`; `erasure` is `None` when the default applies.
#[derive(Clone, Debug, PartialEq)]
pub struct Link {
    pub to: NodeId,
    pub erasure: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    label: String,
    names: Vec<String>,
    source: NodeId,
    out: Vec<Vec<Link>>,
    hop: Vec<u32>,
    distance: Vec<Vec<u32>>,
    default_erasure: Option<f64>,
}

impl Topology {
    /// Builds a topology from named nodes and undirected links.
    pub fn from_links(
        label: impl Into<String>,
        names: Vec<String>,
        source: usize,
        links: &[(usize, usize, Option<f64>)],
        default_erasure: Option<f64>,
    ) -> Result<Self, TopologyError> {
        let n = names.len();
        if source >= n {
            return Err(TopologyError::MissingSource);
        }
        if let Some(e) = default_erasure {
            check_prob(e)?;
        }
        let mut out: Vec<Vec<Link>> = vec![Vec::new(); n];
        for &(u, v, erasure) in links {
            if let Some(e) = erasure {
                check_prob(e)?;
            }
            for (a, b) in [(u, v), (v, u)] {
                if a == b {
                    continue;
                }
                match out[a].iter_mut().find(|l| l.to.0 == b) {
                    Some(l) => l.erasure = erasure.or(l.erasure),
                    None => out[a].push(Link {
                        to: NodeId(b),
                        erasure,
                    }),
                }
            }
        }
        for links in &mut out {
            links.sort_by_key(|l| l.to);
        }
        let hop = bfs(&out, source);
        if let Some(i) = hop.iter().position(|&h| h == u32::MAX) {
            return Err(TopologyError::Unreachable(names[i].clone()));
        }
        let distance = (0..n).map(|s| bfs(&out, s)).collect();
        Ok(Topology {
            label: label.into(),
            names,
            source: NodeId(source),
            out,
            hop,
            distance,
            default_erasure,
        })
    }

    /// Five nodes, two hops: N1 → {N2, N3} → {N4, N5}, with N2↔N3 and N4↔N5
    /// able to overhear each other.
    pub fn fig1() -> Self {
        let names = (1..=5).map(|i| format!("N{i}")).collect();
        let links = [
            (0, 1, None),
            (0, 2, None),
            (1, 2, None),
            (1, 3, None),
            (1, 4, None),
            (2, 3, None),
            (2, 4, None),
            (3, 4, None),
        ];
        Self::from_links("fig1", names, 0, &links, None).expect("fig1 is well formed")
    }

    pub fn line(n: usize) -> Result<Self, TopologyError> {
        if n == 0 {
            return Err(TopologyError::MissingSource);
        }
        let names = (0..n).map(|i| format!("n{i}")).collect();
        let links: Vec<_> = (1..n).map(|i| (i - 1, i, None)).collect();
        Self::from_links(format!("line({n})"), names, 0, &links, None)
    }

    /// `rows × cols` grid with 4-neighbour links, source in a corner.
    pub fn grid(rows: usize, cols: usize) -> Result<Self, TopologyError> {
        if rows == 0 || cols == 0 {
            return Err(TopologyError::MissingSource);
        }
        let idx = |r: usize, c: usize| r * cols + c;
        let names = (0..rows * cols)
            .map(|i| format!("g{}_{}", i / cols, i % cols))
            .collect();
        let mut links = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                if c + 1 < cols {
                    links.push((idx(r, c), idx(r, c + 1), None));
                }
                if r + 1 < rows {
                    links.push((idx(r, c), idx(r + 1, c), None));
                }
            }
        }
        Self::from_links(format!("grid({rows}x{cols})"), names, 0, &links, None)
    }

    /// Resolves `fig1`, `line(N)`, `grid(N)` or `grid(RxC)`.
    pub fn builtin(name: &str) -> Result<Self, TopologyError> {
        let name = name.trim();
        let unknown = || TopologyError::UnknownBuiltin(name.to_string());
        if name == "fig1" {
            return Ok(Self::fig1());
        }
        let args = |prefix: &str| {
            name.strip_prefix(prefix)
                .and_then(|s| s.strip_prefix('('))
                .and_then(|s| s.strip_suffix(')'))
        };
        if let Some(a) = args("line") {
            return Self::line(a.trim().parse().map_err(|_| unknown())?);
        }
        if let Some(a) = args("grid") {
            let (r, c) = match a.split_once(['x', 'X', '×']) {
                Some((r, c)) => (r.trim().parse(), c.trim().parse()),
                None => (a.trim().parse(), a.trim().parse()),
            };
            return match (r, c) {
                (Ok(r), Ok(c)) => Self::grid(r, c),
                _ => Err(unknown()),
            };
        }
        Err(unknown())
    }

    pub fn is_builtin_name(name: &str) -> bool {
        Self::builtin(name).is_ok()
    }

    /// Parses a topology document.
    pub fn parse(label: impl Into<String>, doc: &str) -> Result<Self, TopologyError> {
        let mut names: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut source: Option<String> = None;
        let mut default_erasure = None;
        let mut raw_links: Vec<(usize, String, String, Option<f64>)> = Vec::new();
        for (lineno, raw) in doc.lines().enumerate() {
            let line_no = lineno + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let malformed = |message: &str| TopologyError::Malformed {
                line: line_no,
                message: message.to_string(),
            };
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("node") => {
                    let id = parts.next().ok_or_else(|| malformed("node needs an id"))?;
                    if index.contains_key(id) {
                        return Err(TopologyError::DuplicateNode(id.to_string()));
                    }
                    index.insert(id.to_string(), names.len());
                    names.push(id.to_string());
                }
                Some("source") => {
                    let id = parts
                        .next()
                        .ok_or_else(|| malformed("source needs an id"))?;
                    source = Some(id.to_string());
                }
                Some("default_erasure") => {
                    let v = parts
                        .next()
                        .and_then(|s| s.parse::<f64>().ok())
                        .ok_or_else(|| malformed("default_erasure needs a number"))?;
                    check_prob(v)?;
                    default_erasure = Some(v);
                }
                Some("link") => {
                    let u = parts
                        .next()
                        .ok_or_else(|| malformed("link needs two ids"))?;
                    let v = parts
                        .next()
                        .ok_or_else(|| malformed("link needs two ids"))?;
                    let mut erasure = None;
                    for opt in parts.by_ref() {
                        let value = opt
                            .strip_prefix("erasure=")
                            .and_then(|s| s.parse::<f64>().ok())
                            .ok_or_else(|| malformed(&format!("bad link option `{opt}`")))?;
                        check_prob(value)?;
                        erasure = Some(value);
                    }
                    raw_links.push((line_no, u.to_string(), v.to_string(), erasure));
                }
                Some(other) => return Err(malformed(&format!("unknown directive `{other}`"))),
                None => {}
            }
            if parts.next().is_some() {
                return Err(malformed("trailing tokens"));
            }
        }
        let lookup = |id: &str| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| TopologyError::UnknownNode(id.to_string()))
        };
        let links = raw_links
            .iter()
            .map(|(_, u, v, e)| Ok((lookup(u)?, lookup(v)?, *e)))
            .collect::<Result<Vec<_>, TopologyError>>()?;
        let source = lookup(&source.ok_or(TopologyError::MissingSource)?)?;
        Self::from_links(label, names, source, &links, default_erasure)
    }

    /// A built-in name, or else the text of a topology document.
    pub fn load(description: &str) -> Result<Self, TopologyError> {
        match Self::builtin(description) {
            Ok(t) => Ok(t),
            Err(TopologyError::UnknownBuiltin(_)) if description.contains('\n') => {
                Self::parse("document", description)
            }
            Err(e) => Err(e),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.names.len()).map(NodeId)
    }

    pub fn source(&self) -> NodeId {
        self.source
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.names[id.0]
    }

    pub fn id_of(&self, name: &str) -> Option<NodeId> {
        self.names.iter().position(|n| n == name).map(NodeId)
    }

    pub fn hop(&self, id: NodeId) -> u32 {
        self.hop[id.0]
    }

    pub fn max_hop(&self) -> u32 {
        self.hop.iter().copied().max().unwrap_or(0)
    }

    pub fn nodes_at_hop(&self, h: u32) -> Vec<NodeId> {
        self.nodes().filter(|&n| self.hop(n) == h).collect()
    }

    pub fn neighbors(&self, id: NodeId) -> &[Link] {
        &self.out[id.0]
    }

    pub fn is_neighbor(&self, from: NodeId, to: NodeId) -> bool {
        self.out[from.0].iter().any(|l| l.to == to)
    }

    /// Hop distance between two nodes.
    pub fn distance(&self, a: NodeId, b: NodeId) -> u32 {
        self.distance[a.0][b.0]
    }

    pub fn default_erasure(&self) -> Option<f64> {
        self.default_erasure
    }

    /// Effective erasure on `link` given the channel default.
    pub fn link_erasure(&self, link: &Link, channel_default: f64) -> f64 {
        link.erasure
            .or(self.default_erasure)
            .unwrap_or(channel_default)
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for name in &self.names {
            writeln!(f, "node {name}")?;
        }
        writeln!(f, "source {}", self.names[self.source.0])?;
        if let Some(e) = self.default_erasure {
            writeln!(f, "default_erasure {e}")?;
        }
        for (u, links) in self.out.iter().enumerate() {
            for l in links.iter().filter(|l| l.to.0 > u) {
                write!(f, "link {} {}", self.names[u], self.names[l.to.0])?;
                if let Some(e) = l.erasure {
                    write!(f, " erasure={e}")?;
                }
                writeln!(f)?;
            }
        }
        Ok(())
    }
}

fn bfs(out: &[Vec<Link>], start: usize) -> Vec<u32> {
    let mut dist = vec![u32::MAX; out.len()];
    dist[start] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        for l in &out[u] {
            if dist[l.to.0] == u32::MAX {
                dist[l.to.0] = dist[u] + 1;
                queue.push_back(l.to.0);
            }
        }
    }
    dist
}

fn check_prob(p: f64) -> Result<(), TopologyError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(TopologyError::InvalidErasure(p))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CollisionModel {
    None,
    /// Each concurrent transmitter sharing a receiver erases the reception
    /// with this probability.
    Bernoulli(f64),
}

impl fmt::Display for CollisionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CollisionModel::None => write!(f, "none"),
            CollisionModel::Bernoulli(p) => write!(f, "bernoulli {p}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelConfig {
    pub default_erasure: f64,
    pub collision: CollisionModel,
    /// Abstract time units per packet transmission.
    pub slot_duration: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            default_erasure: 0.0,
            collision: CollisionModel::None,
            slot_duration: 1,
        }
    }
}

impl ChannelConfig {
    pub fn with_erasure(erasure: f64) -> Self {
        ChannelConfig {
            default_erasure: erasure,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), TopologyError> {
        check_prob(self.default_erasure)?;
        if let CollisionModel::Bernoulli(p) = self.collision {
            if !(0.0..=1.0).contains(&p) {
                return Err(TopologyError::InvalidChannel(format!(
                    "collision probability {p} outside [0, 1]"
                )));
            }
        }
        if self.slot_duration == 0 {
            return Err(TopologyError::InvalidChannel(
                "slot_duration must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One packet put on the air by `sender` in `slot`.
#[derive(Clone, Debug, PartialEq)]
pub struct Transmission<P> {
    pub sender: NodeId,
    pub packet: P,
    pub slot: u64,
}

/// Receivers of `tx`. `concurrent` lists every sender active in the same
/// slot (with or without `tx.sender`); it only matters under a collision model.
pub fn broadcast<P, R: Rng + ?Sized>(
    topo: &Topology,
    cfg: &ChannelConfig,
    tx: &Transmission<P>,
    concurrent: &[NodeId],
    rng: &mut R,
) -> Vec<NodeId> {
    let mut received = Vec::new();
    for link in topo.neighbors(tx.sender) {
        let v = link.to;
        let erasure = topo.link_erasure(link, cfg.default_erasure);
        let mut delivered = rng.gen::<f64>() >= erasure;
        if let CollisionModel::Bernoulli(pc) = cfg.collision {
            let others = concurrent
                .iter()
                .filter(|&&s| s != tx.sender && s != v && topo.is_neighbor(s, v))
                .count();
            if others > 0 {
                let survive = (1.0 - pc).powi(others as i32);
                delivered &= rng.gen::<f64>() < survive;
            }
        }
        if delivered {
            received.push(v);
        }
    }
    received
}

/// Erasure probability above which `rounds` rounds of `k` offered codewords
/// are expected to deliver fewer than `k`: 1 − 1/rounds.
pub fn erasure_failure_threshold(rounds: u32) -> f64 {
    assert!(rounds >= 1, "need at least one round");
    1.0 - 1.0 / rounds as f64
}

/// Drops the `nth` (0-based) data frame that `from` sends, at receiver `to`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ScriptedDrop {
    pub from: String,
    pub to: String,
    pub nth: u64,
}

impl fmt::Display for ScriptedDrop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.from, self.to, self.nth)
    }
}

/// Deterministic erasures layered over the random channel.
#[derive(Clone, Debug, Default)]
pub struct ErasureScript {
    drops: Vec<(NodeId, NodeId, u64)>,
}

impl ErasureScript {
    pub fn resolve(topo: &Topology, drops: &[ScriptedDrop]) -> Result<Self, TopologyError> {
        let id = |n: &str| {
            topo.id_of(n)
                .ok_or_else(|| TopologyError::UnknownNode(n.to_string()))
        };
        let drops = drops
            .iter()
            .map(|d| Ok((id(&d.from)?, id(&d.to)?, d.nth)))
            .collect::<Result<_, TopologyError>>()?;
        Ok(ErasureScript { drops })
    }

    pub fn is_empty(&self) -> bool {
        self.drops.is_empty()
    }

    pub fn drops(&self, from: NodeId, to: NodeId, nth: u64) -> bool {
        self.drops.contains(&(from, to, nth))
    }
}
