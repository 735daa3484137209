//! Dissemination protocols driven by the engine over the channel model.
//!
//! Five protocols share one slot-based simulation loop ([`Simulation`]):
//!
//! * `flood`: every node rebroadcasts each new packet once.
//! * `deluge`: ADV / NACK / DATA with uncoded packets and bitmap NACKs.
//! * `rateless_deluge`: the same exchange with dense GF(2^8) codewords and
//!   count NACKs.
//! * `synapse`: the same exchange with sparse LT codewords over GF(2).
//! * `coop`: hop-synchronised cooperative rounds of recoded GF(2) codewords,
//!   falling back to count NACKs after the request timer τ.
//!
//! The Deluge family forwards a page only once it has been fully decoded;
//! `coop` forwards whatever it holds after triangularisation.

mod coop;
mod deluge;
mod flood;
mod message;
mod runtime;
mod sim;

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;

use crate::codec::{CodecError, DegreeDistribution, Page};
use crate::engine::SimTime;
use crate::galois::FieldSpec;
use crate::netmodel::NodeId;

pub use message::{DataBody, Message, Missing, TraceDisplay, TraceEntry};
pub use runtime::{Counters, NodeRuntime, Role, Store};
pub use sim::{RunReport, Simulation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProtocolKind {
    Flood,
    Deluge,
    RatelessDeluge,
    Synapse,
    Coop,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 5] = [
        ProtocolKind::Flood,
        ProtocolKind::Deluge,
        ProtocolKind::RatelessDeluge,
        ProtocolKind::Synapse,
        ProtocolKind::Coop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::Flood => "flood",
            ProtocolKind::Deluge => "deluge",
            ProtocolKind::RatelessDeluge => "rateless_deluge",
            ProtocolKind::Synapse => "synapse",
            ProtocolKind::Coop => "coop",
        }
    }

    pub fn is_coded(self) -> bool {
        !matches!(self, ProtocolKind::Flood | ProtocolKind::Deluge)
    }

    /// True for the three protocols that forward only complete pages.
    pub fn is_hop_by_hop(self) -> bool {
        matches!(
            self,
            ProtocolKind::Deluge | ProtocolKind::RatelessDeluge | ProtocolKind::Synapse
        )
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProtocolKind::ALL
            .into_iter()
            .find(|p| p.name() == s.trim())
            .ok_or_else(|| format!("unknown protocol `{s}`"))
    }
}

/// Per-protocol parameters. [`ProtocolConfig::new`] fills in the defaults.
#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolConfig {
    pub kind: ProtocolKind,
    pub k: usize,
    pub packet_len: usize,
    /// Coding field; ignored by the uncoded protocols.
    pub field: FieldSpec,
    pub distribution: DegreeDistribution,
    /// Slots charged per codeword when sizing a transmission round.
    pub slots_per_codeword: u64,
    /// Decode-time estimate is `decode_base + decode_per_packet · k` slots.
    pub decode_base: u64,
    pub decode_per_packet: u64,
    /// Largest count a single NACK may request.
    pub nack_batch: usize,
    pub max_nack_retries: u32,
    /// Deluge advertisement period, in slots.
    pub adv_period: u64,
    /// Upper bound of the uniform REQ backoff, in slots.
    pub backoff_jitter: u64,
    /// Silent slots a requester waits before repeating its NACK.
    pub nack_timeout: u64,
    /// Transmitters sharing a slot must be at least this many hops apart.
    pub reuse_distance: u32,
    /// Extra codewords per coop node on top of ceil(k / hop size).
    pub coop_budget_margin: usize,
}

impl ProtocolConfig {
    pub fn new(kind: ProtocolKind, k: usize, packet_len: usize) -> Self {
        let (field, distribution) = match kind {
            ProtocolKind::RatelessDeluge => (FieldSpec::GF256, DegreeDistribution::UniformRlc),
            ProtocolKind::Synapse => (FieldSpec::GF2, DegreeDistribution::default_lt()),
            _ => (FieldSpec::GF2, DegreeDistribution::UniformRlc),
        };
        ProtocolConfig {
            kind,
            k,
            packet_len,
            field,
            distribution,
            slots_per_codeword: 1,
            decode_base: 2,
            decode_per_packet: 0,
            nack_batch: usize::MAX,
            max_nack_retries: 64,
            adv_period: 2,
            backoff_jitter: 1,
            nack_timeout: 3,
            reuse_distance: 3,
            coop_budget_margin: 1,
        }
    }

    pub fn decode_estimate(&self, k: usize) -> u64 {
        self.decode_base + self.decode_per_packet * k as u64
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        if self.k == 0 || self.packet_len == 0 {
            return Err(CodecError::EmptyPage);
        }
        if self.slots_per_codeword == 0 || self.decode_estimate(self.k) == 0 {
            return Err(CodecError::InvalidDistribution(
                "request timer parameters must be positive".into(),
            ));
        }
        self.distribution.validate()
    }
}

/// Request timer τ: three rounds of `k` codewords plus the decode estimate.
pub fn compute_tau(k: usize, cfg: &ProtocolConfig) -> SimTime {
    3 * k as u64 * cfg.slots_per_codeword + cfg.decode_estimate(k)
}

/// Per-slot services handed to protocol logic.
pub(crate) struct Ctx<'a> {
    pub now: SimTime,
    pub cfg: &'a ProtocolConfig,
    pub page: &'a Page,
    pub rng: &'a mut ChaCha8Rng,
    /// Timer requests: (node, delay, token).
    pub timers: &'a mut Vec<(NodeId, SimTime, u64)>,
}

/// Protocol state machine over all nodes of one run.
pub(crate) trait Dissemination {
    /// Nodes wanting the channel this slot, highest priority first.
    fn contenders(&mut self, nodes: &[NodeRuntime], ctx: &mut Ctx) -> Vec<NodeId>;

    /// Frame sent by a node that won the channel, or `None` to pass.
    fn transmit(&mut self, node: &mut NodeRuntime, ctx: &mut Ctx) -> Option<Message>;

    /// Called after a data frame has been stored (`innovative` tells whether
    /// it added information) or on any control frame.
    fn receive(
        &mut self,
        node: &mut NodeRuntime,
        from: NodeId,
        msg: &Message,
        innovative: bool,
        ctx: &mut Ctx,
    );

    fn timer(&mut self, _node: &mut NodeRuntime, _token: u64, _ctx: &mut Ctx) {}

    /// True once no further transmission can ever happen.
    fn stalled(&self) -> bool {
        false
    }

    /// Keep running after every node completes, until the protocol stalls.
    fn drains(&self) -> bool {
        false
    }

    /// Minimum hop distance between same-slot transmitters, if any.
    fn reuse_distance(&self) -> Option<u32>;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_examples() {
        let cfg = ProtocolConfig::new(ProtocolKind::Coop, 4, 20);
        assert_eq!(compute_tau(4, &cfg), 14);
        let mut last = 0;
        for k in 1..100 {
            let t = compute_tau(k, &cfg);
            assert!(t > last);
            last = t;
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for p in ProtocolKind::ALL {
            assert_eq!(p.name().parse::<ProtocolKind>().unwrap(), p);
        }
        assert!("gossip".parse::<ProtocolKind>().is_err());
    }

    #[test]
    fn field_defaults() {
        assert_eq!(
            ProtocolConfig::new(ProtocolKind::RatelessDeluge, 4, 20).field,
            FieldSpec::GF256
        );
        let syn = ProtocolConfig::new(ProtocolKind::Synapse, 4, 20);
        assert_eq!(syn.field, FieldSpec::GF2);
        assert!(matches!(
            syn.distribution,
            DegreeDistribution::SparseLt { .. }
        ));
        let coop = ProtocolConfig::new(ProtocolKind::Coop, 4, 20);
        assert_eq!(coop.distribution, DegreeDistribution::UniformRlc);
    }
}
