use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use crate::codec::{CodecError, Encoder, Page};
use crate::engine::{self, Event, EventKind, Handler, Scheduler, SimTime};
use crate::galois::Field;
use crate::netmodel::{broadcast, ChannelConfig, ErasureScript, NodeId, Topology, Transmission};
use crate::Error;

use super::coop::Coop;
use super::deluge::{DataMode, Deluge};
use super::flood::Flood;
use super::message::{Message, TraceEntry};
use super::runtime::NodeRuntime;
use super::{Ctx, Dissemination, ProtocolConfig, ProtocolKind};

#[derive(Clone, Debug)]
pub(crate) struct Delivery {
    from: NodeId,
    msg: Arc<Message>,
}

/// Outcome of one simulated dissemination.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub protocol: ProtocolKind,
    /// Slot at which the last node completed; `None` on timeout.
    pub completion_slots: Option<u64>,
    pub timed_out: bool,
    pub tx_total: u64,
    pub rx_total: u64,
    pub redundant_rx: u64,
    pub nacks: u64,
    pub decoder_row_ops: u64,
    pub header_bits: u64,
    /// Every completed node reconstructed the page exactly.
    pub all_verified: bool,
    pub nodes: Vec<NodeRuntime>,
    pub trace: Option<Vec<TraceEntry>>,
}

impl RunReport {
    pub fn node(&self, id: NodeId) -> &NodeRuntime {
        &self.nodes[id.index()]
    }

    /// NACK frames sent by `id`.
    pub fn nacks_from(&self, id: NodeId) -> u64 {
        self.nodes[id.index()].counters.nacks_sent
    }
}

/// One protocol run over a topology, channel and page.
pub struct Simulation {
    topo: Topology,
    channel: ChannelConfig,
    cfg: ProtocolConfig,
    page: Page,
    script: ErasureScript,
    nodes: Vec<NodeRuntime>,
    protocol: Box<dyn Dissemination + Send>,
    channel_rng: ChaCha8Rng,
    protocol_rng: ChaCha8Rng,
    timers: Vec<(NodeId, SimTime, u64)>,
    data_sent: Vec<u64>,
    in_flight: usize,
    header_bits: u64,
    trace: Option<Vec<TraceEntry>>,
    error: Option<CodecError>,
}

impl Simulation {
    /// `seed` feeds the channel and protocol streams; the page is supplied
    /// by the caller.
    pub fn new(
        topo: Topology,
        channel: ChannelConfig,
        cfg: ProtocolConfig,
        page: Page,
        seed: u64,
    ) -> Result<Self, Error> {
        channel.validate()?;
        cfg.validate()?;
        if page.k() != cfg.k {
            return Err(CodecError::CoefficientCount {
                expected: cfg.k,
                found: page.k(),
            }
            .into());
        }
        if page.packet_len() != cfg.packet_len {
            return Err(CodecError::PayloadLength {
                expected: cfg.packet_len,
                found: page.packet_len(),
            }
            .into());
        }
        let field = cfg.kind.is_coded().then(|| Field::new(cfg.field));
        let nodes = topo
            .nodes()
            .map(|id| NodeRuntime::new(id, topo.hop(id), &page, field.clone()))
            .collect();
        let protocol: Box<dyn Dissemination + Send> = match cfg.kind {
            ProtocolKind::Flood => Box::new(Flood::new(&topo, cfg.k)),
            ProtocolKind::Deluge => Box::new(Deluge::new(&topo, &cfg, DataMode::Uncoded)),
            ProtocolKind::RatelessDeluge | ProtocolKind::Synapse => {
                let enc = Encoder::new(
                    field.clone().expect("coded"),
                    cfg.distribution.clone(),
                    cfg.k,
                )?;
                Box::new(Deluge::new(&topo, &cfg, DataMode::Coded(enc)))
            }
            ProtocolKind::Coop => Box::new(Coop::new(&topo, &cfg)),
        };
        let n = topo.node_count();
        Ok(Simulation {
            topo,
            channel,
            cfg,
            page,
            script: ErasureScript::default(),
            nodes,
            protocol,
            channel_rng: engine::stream(seed, 0, "channel"),
            protocol_rng: engine::stream(seed, 0, "protocol"),
            timers: Vec::new(),
            data_sent: vec![0; n],
            in_flight: 0,
            header_bits: 0,
            trace: None,
            error: None,
        })
    }

    pub fn with_script(mut self, script: ErasureScript) -> Self {
        self.script = script;
        self
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    fn all_complete(&self) -> bool {
        self.nodes.iter().all(|n| n.is_complete())
    }

    fn finished(&self) -> bool {
        let quiet = self.in_flight == 0 && self.protocol.stalled();
        self.error.is_some() || quiet || (self.all_complete() && !self.protocol.drains())
    }

    /// Runs until every node completes or `max_slots` elapse.
    pub fn run(mut self, max_slots: u64) -> Result<RunReport, Error> {
        let slot = self.channel.slot_duration;
        let mut sched = Scheduler::new(slot);
        sched.schedule(0, None, EventKind::SlotBoundary)?;
        engine::run_until(&mut sched, &mut self, |s| s.finished(), max_slots * slot);
        if let Some(e) = self.error {
            return Err(e.into());
        }
        let done = self.all_complete();
        let completion_slots = done
            .then(|| self.nodes.iter().filter_map(|n| n.completed_at).max())
            .flatten();
        let mut report = RunReport {
            protocol: self.cfg.kind,
            completion_slots,
            timed_out: !done,
            tx_total: 0,
            rx_total: 0,
            redundant_rx: 0,
            nacks: 0,
            decoder_row_ops: 0,
            header_bits: self.header_bits,
            all_verified: true,
            nodes: Vec::new(),
            trace: self.trace,
        };
        for n in &self.nodes {
            report.tx_total += n.counters.tx;
            report.rx_total += n.counters.rx;
            report.redundant_rx += n.counters.redundant_rx;
            report.nacks += n.counters.nacks_sent;
            report.decoder_row_ops += n.decoder().map_or(0, |d| d.row_ops().total());
            if n.verified == Some(false) {
                report.all_verified = false;
            }
        }
        report.nodes = self.nodes;
        Ok(report)
    }

    fn flush_timers(&mut self, sched: &mut Scheduler<Delivery>) {
        let slot = self.channel.slot_duration;
        for (node, delay, token) in self.timers.drain(..) {
            sched
                .schedule_in(delay * slot, Some(node), EventKind::TimerExpiry(token))
                .expect("future timer");
        }
    }

    fn slot_boundary(&mut self, sched: &mut Scheduler<Delivery>) {
        let now = sched.clock().slot_index;
        let mut ctx = Ctx {
            now,
            cfg: &self.cfg,
            page: &self.page,
            rng: &mut self.protocol_rng,
            timers: &mut self.timers,
        };
        let contenders = self.protocol.contenders(&self.nodes, &mut ctx);
        let reuse = self.protocol.reuse_distance();
        let mut winners: Vec<NodeId> = Vec::new();
        for c in contenders {
            if winners.contains(&c) {
                continue;
            }
            let clear =
                reuse.is_none_or(|d| winners.iter().all(|&w| self.topo.distance(w, c) >= d));
            if clear {
                winners.push(c);
            }
        }
        let mut txs = Vec::new();
        for w in winners {
            if let Some(msg) = self.protocol.transmit(&mut self.nodes[w.index()], &mut ctx) {
                txs.push(Transmission {
                    sender: w,
                    packet: Arc::new(msg),
                    slot: now,
                });
            }
        }
        let senders: Vec<NodeId> = txs.iter().map(|t| t.sender).collect();
        for tx in txs {
            let mut receivers = broadcast(
                &self.topo,
                &self.channel,
                &tx,
                &senders,
                &mut self.channel_rng,
            );
            let node = &mut self.nodes[tx.sender.index()];
            node.counters.tx += 1;
            if tx.packet.is_nack() {
                node.counters.nacks_sent += 1;
            }
            if tx.packet.is_data() {
                let nth = self.data_sent[tx.sender.index()];
                self.data_sent[tx.sender.index()] += 1;
                receivers.retain(|&r| !self.script.drops(tx.sender, r, nth));
                self.header_bits += tx.packet.header_bits();
            }
            if let Some(trace) = &mut self.trace {
                trace.push(TraceEntry {
                    slot: now,
                    sender: tx.sender,
                    message: (*tx.packet).clone(),
                    receivers: receivers.clone(),
                });
            }
            self.in_flight += receivers.len();
            for r in receivers {
                let d = Delivery {
                    from: tx.sender,
                    msg: Arc::clone(&tx.packet),
                };
                sched
                    .schedule_in(
                        self.channel.slot_duration,
                        Some(r),
                        EventKind::PacketDelivery(d),
                    )
                    .expect("future delivery");
            }
        }
        self.flush_timers(sched);
        sched
            .schedule_in(self.channel.slot_duration, None, EventKind::SlotBoundary)
            .expect("future slot");
    }

    fn deliver(&mut self, to: NodeId, d: Delivery, sched: &mut Scheduler<Delivery>) {
        let now = sched.clock().slot_index;
        self.in_flight -= 1;
        let node = &mut self.nodes[to.index()];
        node.counters.rx += 1;
        let innovative = match &*d.msg {
            Message::Data { body, .. } => match node.accept(body) {
                Ok(x) => x,
                Err(e) => {
                    self.error = Some(e);
                    return;
                }
            },
            _ => false,
        };
        let mut ctx = Ctx {
            now,
            cfg: &self.cfg,
            page: &self.page,
            rng: &mut self.protocol_rng,
            timers: &mut self.timers,
        };
        self.protocol
            .receive(node, d.from, &d.msg, innovative, &mut ctx);
        if !node.is_complete() && node.holds_page() {
            node.finish(now, &self.page);
        }
        self.flush_timers(sched);
    }

    fn timer(&mut self, to: NodeId, token: u64, sched: &mut Scheduler<Delivery>) {
        let mut ctx = Ctx {
            now: sched.clock().slot_index,
            cfg: &self.cfg,
            page: &self.page,
            rng: &mut self.protocol_rng,
            timers: &mut self.timers,
        };
        self.protocol
            .timer(&mut self.nodes[to.index()], token, &mut ctx);
        self.flush_timers(sched);
    }
}

impl Handler<Delivery> for Simulation {
    fn handle(&mut self, event: Event<Delivery>, sched: &mut Scheduler<Delivery>) {
        match (event.kind, event.target) {
            (EventKind::SlotBoundary, _) => self.slot_boundary(sched),
            (EventKind::PacketDelivery(d), Some(to)) => self.deliver(to, d, sched),
            (EventKind::TimerExpiry(token), Some(to)) => self.timer(to, token, sched),
            _ => {}
        }
    }
}
