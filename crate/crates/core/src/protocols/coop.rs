use rand::seq::SliceRandom;

use crate::codec::{Codeword, CoefficientVector, DecoderState};
use crate::netmodel::{NodeId, Topology};

use super::message::{DataBody, Message, Missing};
use super::runtime::NodeRuntime;
use super::{compute_tau, Ctx, Dissemination, ProtocolConfig};

const TAU_TOKEN: u64 = 0;
const RECODE_TRIES: usize = 64;

#[derive(Default)]
struct NodeState {
    /// Codewords this node has offered in the current round.
    own: Option<DecoderState>,
    /// Own offers plus those overheard from same-hop peers this round: a
    /// lower bound on what the peers hold.
    shared: Option<DecoderState>,
    budget: usize,
    tau_expired: bool,
    nack_retries: u32,
    /// Slot of the last NACK sent or data heard, once NACKing has started.
    last_activity: Option<u64>,
    /// Codewords owed to next-hop requesters.
    respond: usize,
}

/// Hop-synchronised cooperative rounds.
///
/// Phase `p` belongs to the hop-`p` nodes: each one that holds anything
/// offers a budget of recoded codewords, in a seeded round-robin order.
/// Hop-`h` nodes therefore hear three rounds: phase `h − 1` (previous
/// hop), phase `h` (their own hop) and phase `h + 1` (next hop). Nodes still
/// short once τ has run out and their third round is over (plus the decode
/// estimate) send count NACKs to the previous hop.
pub(crate) struct Coop {
    hop: Vec<u32>,
    max_hop: u32,
    state: Vec<NodeState>,
    phase: Option<u32>,
    rounds_over: bool,
    phase_end: Vec<Option<u64>>,
    order: Vec<NodeId>,
    cursor: usize,
    round_pos: usize,
    reuse_distance: u32,
}

impl Coop {
    pub fn new(topo: &Topology, cfg: &ProtocolConfig) -> Self {
        let n = topo.node_count();
        Coop {
            hop: topo.nodes().map(|v| topo.hop(v)).collect(),
            max_hop: topo.max_hop(),
            state: (0..n).map(|_| NodeState::default()).collect(),
            phase: None,
            rounds_over: false,
            phase_end: vec![None; topo.max_hop() as usize + 1],
            order: Vec::new(),
            cursor: 0,
            round_pos: 0,
            reuse_distance: cfg.reuse_distance,
        }
    }

    fn can_offer(&self, node: &NodeRuntime) -> bool {
        let st = &self.state[node.id.index()];
        let own = st.own.as_ref().map_or(0, |d| d.rank());
        st.budget > 0 && own < node.have()
    }

    fn start_phase(&mut self, p: u32, nodes: &[NodeRuntime], ctx: &mut Ctx) {
        self.phase = Some(p);
        self.cursor = 0;
        self.round_pos = 0;
        let k = ctx.cfg.k;
        let members: Vec<NodeId> = nodes.iter().filter(|n| n.hop == p).map(|n| n.id).collect();
        let holders = members
            .iter()
            .filter(|v| nodes[v.index()].have() > 0)
            .count()
            .max(1);
        let budget = k.div_ceil(holders) + ctx.cfg.coop_budget_margin;
        for &v in &members {
            let st = &mut self.state[v.index()];
            st.budget = budget;
            st.own = nodes[v.index()]
                .decoder()
                .map(|d| DecoderState::new(d.field().clone(), d.page_id(), k, d.packet_len()));
            st.shared = st.own.clone();
        }
        let mut order = members;
        order.shuffle(ctx.rng);
        self.order = order;
        let tau = compute_tau(k, ctx.cfg);
        for n in nodes.iter().filter(|n| n.hop == p + 1) {
            ctx.timers.push((n.id, tau, TAU_TOKEN));
        }
    }

    /// Ends exhausted phases and opens the next one.
    fn advance(&mut self, nodes: &[NodeRuntime], ctx: &mut Ctx) {
        while !self.rounds_over {
            let next = match self.phase {
                None => 0,
                Some(p) => {
                    let busy = self.order.iter().any(|v| self.can_offer(&nodes[v.index()]));
                    if busy {
                        return;
                    }
                    self.phase_end[p as usize] = Some(ctx.now);
                    p + 1
                }
            };
            if next > self.max_hop {
                self.order.clear();
                self.rounds_over = true;
                return;
            }
            self.start_phase(next, nodes, ctx);
        }
    }

    fn may_nack(&self, node: &NodeRuntime, ctx: &Ctx) -> bool {
        let st = &self.state[node.id.index()];
        if node.is_complete() || !st.tau_expired {
            return false;
        }
        if st.nack_retries >= ctx.cfg.max_nack_retries {
            return false;
        }
        let third = (node.hop + 1).min(self.max_hop);
        let Some(end) = self.phase_end[third as usize] else {
            return false;
        };
        if ctx.now < end + ctx.cfg.decode_estimate(ctx.cfg.k) {
            return false;
        }
        st.last_activity
            .is_none_or(|t| ctx.now >= t + ctx.cfg.nack_timeout)
    }

    /// Next codeword for this round. It is never dependent on the node's
    /// earlier offers, and preferably not on anything overheard from its
    /// peers either. Full-rank nodes send systematic packets while the
    /// round's index counter is below `k`.
    fn offer(&mut self, node: &mut NodeRuntime, ctx: &mut Ctx) -> Option<Codeword> {
        let systematic = self.round_pos < ctx.cfg.k && node.holds_page();
        let st = &mut self.state[node.id.index()];
        let own = st.own.as_mut()?;
        let shared = st.shared.as_mut()?;
        let dec = node.decoder_mut()?;
        let mut pick = None;
        for strict in [true, false] {
            let fresh = |c: &CoefficientVector| {
                if strict {
                    shared.is_innovative(c)
                } else {
                    own.is_innovative(c)
                }
            };
            if systematic {
                let unit = CoefficientVector::unit(dec.field().spec(), ctx.cfg.k, self.round_pos);
                if fresh(&unit) {
                    pick = Some(dec.systematic(self.round_pos).ok()?);
                    break;
                }
            }
            for _ in 0..RECODE_TRIES {
                let cw = dec.recode(ctx.rng).ok()?;
                if fresh(&cw.coefficients) {
                    pick = Some(cw);
                    break;
                }
            }
            if pick.is_some() {
                break;
            }
        }
        let Some(cw) = pick else {
            st.budget = 0;
            return None;
        };
        own.absorb(&cw).ok()?;
        shared.absorb(&cw).ok()?;
        st.budget -= 1;
        Some(cw)
    }
}

impl Dissemination for Coop {
    fn contenders(&mut self, nodes: &[NodeRuntime], ctx: &mut Ctx) -> Vec<NodeId> {
        self.advance(nodes, ctx);
        let mut out: Vec<NodeId> = nodes
            .iter()
            .filter(|n| self.state[n.id.index()].respond > 0 && n.have() > 0)
            .map(|n| n.id)
            .collect();
        out.shuffle(ctx.rng);
        let mut nackers: Vec<NodeId> = nodes
            .iter()
            .filter(|n| self.may_nack(n, ctx))
            .map(|n| n.id)
            .collect();
        nackers.shuffle(ctx.rng);
        out.extend(nackers);
        let len = self.order.len();
        for i in 0..len {
            let v = self.order[(self.cursor + i) % len];
            if self.can_offer(&nodes[v.index()]) && !out.contains(&v) {
                out.push(v);
            }
        }
        out
    }

    fn transmit(&mut self, node: &mut NodeRuntime, ctx: &mut Ctx) -> Option<Message> {
        let page_id = ctx.page.page_id();
        let i = node.id.index();
        if self.state[i].respond > 0 && node.have() > 0 {
            self.state[i].respond -= 1;
            let cw = node.decoder()?.recode(ctx.rng).ok()?;
            return Some(Message::Data {
                page_id,
                body: DataBody::Coded(cw),
            });
        }
        if self.may_nack(node, ctx) {
            let st = &mut self.state[i];
            st.nack_retries += 1;
            st.last_activity = Some(ctx.now);
            let count = (node.k() - node.have()).min(ctx.cfg.nack_batch) as u32;
            return Some(Message::Nack {
                page_id,
                target: None,
                missing: Missing::Count(count),
            });
        }
        if let Some(pos) = self.order.iter().position(|&v| v == node.id) {
            let cw = self.offer(node, ctx)?;
            self.cursor = pos + 1;
            self.round_pos += 1;
            return Some(Message::Data {
                page_id,
                body: DataBody::Coded(cw),
            });
        }
        None
    }

    fn receive(
        &mut self,
        node: &mut NodeRuntime,
        from: NodeId,
        msg: &Message,
        innovative: bool,
        ctx: &mut Ctx,
    ) {
        let i = node.id.index();
        match msg {
            Message::Nack {
                target,
                missing: Missing::Count(c),
                ..
            } => {
                let addressed = target.is_none_or(|t| t == node.id);
                if addressed && self.hop[from.index()] == node.hop + 1 {
                    let st = &mut self.state[i];
                    st.respond = st.respond.max(*c as usize);
                }
            }
            Message::Data { body, .. } => {
                let st = &mut self.state[i];
                let peer = self.hop[from.index()] == node.hop && self.phase == Some(node.hop);
                if let (true, Some(shared), DataBody::Coded(cw)) = (peer, st.shared.as_mut(), body)
                {
                    let _ = shared.absorb(cw);
                }
                if st.last_activity.is_some() {
                    st.last_activity = Some(ctx.now);
                }
                if innovative {
                    st.nack_retries = 0;
                }
            }
            _ => {}
        }
    }

    fn timer(&mut self, node: &mut NodeRuntime, token: u64, _ctx: &mut Ctx) {
        if token == TAU_TOKEN {
            self.state[node.id.index()].tau_expired = true;
        }
    }

    fn reuse_distance(&self) -> Option<u32> {
        Some(self.reuse_distance)
    }
}
