use std::fmt::{self, Write as _};
use std::path::Path;

use thiserror::Error;

use crate::codec::DegreeDistribution;
use crate::netmodel::{ChannelConfig, CollisionModel, ErasureScript, ScriptedDrop, Topology};
use crate::protocols::{ProtocolConfig, ProtocolKind};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("missing key `{0}`")]
    MissingKey(&'static str),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A sweep over protocols, page sizes and erasure rates on one topology.
///
/// Scenario files are `key = value` lines; `#` starts a comment, lists are
/// comma separated and `drop` may repeat:
///
/// ```text
/// name = fig2
/// topology = fig1
/// erasure = 0.1, 0.3
/// protocols = deluge, coop
/// k = 4, 8
/// replicates = 100
/// drop = N1 N2 1
/// ```
///
/// `topology` is a built-in name (`fig1`, `line(N)`, `grid(N)`, `grid(RxC)`)
/// or a path to a topology document, relative to the scenario file.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub topology: String,
    pub erasures: Vec<f64>,
    pub collision: CollisionModel,
    pub slot_duration: u64,
    pub protocols: Vec<ProtocolKind>,
    pub k: Vec<usize>,
    pub packet_len: usize,
    pub replicates: u64,
    pub root_seed: u64,
    pub max_slots: u64,
    pub lt_c: f64,
    pub lt_delta: f64,
    /// Scripted losses, by DATA frame count of the sender.
    pub drops: Vec<ScriptedDrop>,
    /// Presentation-only scale for reports.
    pub seconds_per_slot: Option<f64>,
}

impl Default for Scenario {
    fn default() -> Self {
        let DegreeDistribution::SparseLt { c, delta } = DegreeDistribution::default_lt() else {
            unreachable!("default LT distribution is sparse")
        };
        Scenario {
            name: "scenario".into(),
            topology: "fig1".into(),
            erasures: vec![0.0],
            collision: CollisionModel::None,
            slot_duration: 1,
            protocols: ProtocolKind::ALL.to_vec(),
            k: vec![4],
            packet_len: 20,
            replicates: 100,
            root_seed: 1,
            max_slots: 20_000,
            lt_c: c,
            lt_delta: delta,
            drops: Vec::new(),
            seconds_per_slot: None,
        }
    }
}

fn list<T>(line: usize, v: &str, f: impl Fn(&str) -> Option<T>) -> Result<Vec<T>, ScenarioError> {
    v.split(',')
        .map(str::trim)
        .map(|x| {
            f(x).ok_or_else(|| ScenarioError::Malformed {
                line,
                message: format!("bad list item `{x}`"),
            })
        })
        .collect()
}

fn one<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T, ScenarioError> {
    v.parse().map_err(|_| ScenarioError::Malformed {
        line,
        message: format!("bad value `{v}` for `{key}`"),
    })
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut s = Scenario::default();
        let mut seen_name = false;
        let mut seen_topology = false;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ScenarioError::Malformed {
                    line,
                    message: format!("expected `key = value`, got `{content}`"),
                });
            };
            let (key, v) = (key.trim(), value.trim());
            match key {
                "name" => {
                    s.name = v.to_string();
                    seen_name = true;
                }
                "topology" => {
                    s.topology = v.to_string();
                    seen_topology = true;
                }
                "erasure" => s.erasures = list(line, v, |x| x.parse().ok())?,
                "collision" => {
                    s.collision = match v.split_whitespace().collect::<Vec<_>>()[..] {
                        ["none"] => CollisionModel::None,
                        ["bernoulli", p] => CollisionModel::Bernoulli(one(line, key, p)?),
                        _ => {
                            return Err(ScenarioError::Malformed {
                                line,
                                message: format!(
                                    "collision must be `none` or `bernoulli P`, got `{v}`"
                                ),
                            })
                        }
                    }
                }
                "slot_duration" => s.slot_duration = one(line, key, v)?,
                "protocols" => s.protocols = list(line, v, |x| x.parse().ok())?,
                "k" => s.k = list(line, v, |x| x.parse().ok())?,
                "packet_len" => s.packet_len = one(line, key, v)?,
                "replicates" => s.replicates = one(line, key, v)?,
                "root_seed" => s.root_seed = one(line, key, v)?,
                "max_slots" => s.max_slots = one(line, key, v)?,
                "lt_c" => s.lt_c = one(line, key, v)?,
                "lt_delta" => s.lt_delta = one(line, key, v)?,
                "seconds_per_slot" => s.seconds_per_slot = Some(one(line, key, v)?),
                "drop" => match v.split_whitespace().collect::<Vec<_>>()[..] {
                    [from, to, nth] => s.drops.push(ScriptedDrop {
                        from: from.into(),
                        to: to.into(),
                        nth: one(line, key, nth)?,
                    }),
                    _ => {
                        return Err(ScenarioError::Malformed {
                            line,
                            message: format!("drop needs `FROM TO NTH`, got `{v}`"),
                        })
                    }
                },
                other => {
                    return Err(ScenarioError::Malformed {
                        line,
                        message: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        if !seen_name {
            return Err(ScenarioError::MissingKey("name"));
        }
        if !seen_topology {
            return Err(ScenarioError::MissingKey("topology"));
        }
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::Invalid(m.to_string()));
        if self.name.is_empty() || self.name.contains(['#', '\n']) {
            return bad("name must be non-empty and free of `#`");
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1");
        }
        if self.protocols.is_empty() {
            return bad("protocol list is empty");
        }
        if self.k.is_empty() || self.k.contains(&0) {
            return bad("k list must be non-empty and positive");
        }
        if self.erasures.is_empty() || self.erasures.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return bad("erasure values must lie in [0, 1]");
        }
        if self.packet_len == 0 || self.slot_duration == 0 || self.max_slots == 0 {
            return bad("packet_len, slot_duration and max_slots must be positive");
        }
        self.channel(0.0)
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        self.protocol_config(ProtocolKind::Synapse, 1)
            .distribution
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))
    }

    /// Resolves the topology, reading documents relative to `base`.
    pub fn resolve_topology(&self, base: Option<&Path>) -> Result<Topology, crate::Error> {
        if Topology::is_builtin_name(&self.topology) {
            return Ok(Topology::builtin(&self.topology)?);
        }
        let path = match base {
            Some(dir) => dir.join(&self.topology),
            None => self.topology.clone().into(),
        };
        let doc = std::fs::read_to_string(&path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Topology::parse(self.topology.clone(), &doc)?)
    }

    pub fn script(&self, topo: &Topology) -> Result<ErasureScript, crate::Error> {
        Ok(ErasureScript::resolve(topo, &self.drops)?)
    }

    pub fn channel(&self, erasure: f64) -> ChannelConfig {
        ChannelConfig {
            default_erasure: erasure,
            collision: self.collision,
            slot_duration: self.slot_duration,
        }
    }

    pub fn protocol_config(&self, kind: ProtocolKind, k: usize) -> ProtocolConfig {
        let mut cfg = ProtocolConfig::new(kind, k, self.packet_len);
        if let DegreeDistribution::SparseLt { .. } = cfg.distribution {
            cfg.distribution = DegreeDistribution::SparseLt {
                c: self.lt_c,
                delta: self.lt_delta,
            };
        }
        cfg
    }
}

fn join<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        let _ = writeln!(out, "name = {}", self.name);
        let _ = writeln!(out, "topology = {}", self.topology);
        let _ = writeln!(out, "erasure = {}", join(&self.erasures));
        let _ = writeln!(out, "collision = {}", self.collision);
        let _ = writeln!(out, "slot_duration = {}", self.slot_duration);
        let _ = writeln!(out, "protocols = {}", join(&self.protocols));
        let _ = writeln!(out, "k = {}", join(&self.k));
        let _ = writeln!(out, "packet_len = {}", self.packet_len);
        let _ = writeln!(out, "replicates = {}", self.replicates);
        let _ = writeln!(out, "root_seed = {}", self.root_seed);
        let _ = writeln!(out, "max_slots = {}", self.max_slots);
        let _ = writeln!(out, "lt_c = {}", self.lt_c);
        let _ = writeln!(out, "lt_delta = {}", self.lt_delta);
        if let Some(s) = self.seconds_per_slot {
            let _ = writeln!(out, "seconds_per_slot = {s}");
        }
        for d in &self.drops {
            let _ = writeln!(out, "drop = {d}");
        }
        f.write_str(&out)
    }
}
