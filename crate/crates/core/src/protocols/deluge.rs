use rand::seq::SliceRandom;
use rand::Rng;

use crate::codec::{BitVector, Encoder, Page};
use crate::netmodel::{NodeId, Topology};

use super::message::{DataBody, Message, Missing};
use super::runtime::{NodeRuntime, Store};
use super::{Ctx, Dissemination, ProtocolConfig};

/// What DATA frames carry.
pub(crate) enum DataMode {
    Uncoded,
    /// Fresh codewords from the decoded page; NACKs carry a count.
    Coded(Encoder),
}

#[derive(Default)]
struct NodeState {
    // Serving side, active once the node holds the page.
    next_adv: u64,
    known_complete: Vec<NodeId>,
    serve_bitmap: Option<BitVector>,
    serve_count: usize,
    page: Option<Page>,
    // Requesting side.
    server: Option<NodeId>,
    nack_at: Option<u64>,
    last_activity: u64,
    retries: u32,
    /// Last slot with overheard DATA or NACK traffic; damps ADVs.
    last_busy: Option<u64>,
}

/// ADV / NACK / DATA exchange in which only complete nodes serve.
pub(crate) struct Deluge {
    mode: DataMode,
    state: Vec<NodeState>,
    neighbors: Vec<Vec<NodeId>>,
    reuse_distance: u32,
}

impl Deluge {
    pub fn new(topo: &Topology, cfg: &ProtocolConfig, mode: DataMode) -> Self {
        let n = topo.node_count();
        Deluge {
            mode,
            state: (0..n).map(|_| NodeState::default()).collect(),
            neighbors: topo
                .nodes()
                .map(|v| topo.neighbors(v).iter().map(|l| l.to).collect())
                .collect(),
            reuse_distance: cfg.reuse_distance,
        }
    }

    fn wants_channel(&mut self, node: &NodeRuntime, ctx: &mut Ctx) -> bool {
        let cfg = ctx.cfg;
        let now = ctx.now;
        let st = &mut self.state[node.id.index()];
        if node.is_complete() {
            if st.serve_count > 0 || st.serve_bitmap.as_ref().is_some_and(|b| !b.is_zero()) {
                return true;
            }
            let quiet = st.last_busy.is_none_or(|t| now >= t + cfg.adv_period);
            let someone_waiting = self.neighbors[node.id.index()]
                .iter()
                .any(|v| !st.known_complete.contains(v));
            return someone_waiting && quiet && now >= st.next_adv;
        }
        let Some(_) = st.server else {
            return false;
        };
        if st.nack_at.is_none() && now >= st.last_activity + cfg.nack_timeout {
            if st.retries < cfg.max_nack_retries {
                st.nack_at = Some(now);
            } else {
                st.server = None;
                st.retries = 0;
                return false;
            }
        }
        st.nack_at.is_some_and(|t| now >= t)
    }
}

impl Dissemination for Deluge {
    fn contenders(&mut self, nodes: &[NodeRuntime], ctx: &mut Ctx) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = nodes
            .iter()
            .filter(|n| self.wants_channel(n, ctx))
            .map(|n| n.id)
            .collect();
        out.shuffle(ctx.rng);
        out
    }

    fn transmit(&mut self, node: &mut NodeRuntime, ctx: &mut Ctx) -> Option<Message> {
        let page_id = ctx.page.page_id();
        let k = node.k();
        let st = &mut self.state[node.id.index()];
        if !node.is_complete() {
            st.nack_at = None;
            st.retries += 1;
            st.last_activity = ctx.now;
            let missing = match self.mode {
                DataMode::Uncoded => Missing::Bitmap(node.missing_bitmap()),
                DataMode::Coded(_) => {
                    Missing::Count((k - node.have()).min(ctx.cfg.nack_batch) as u32)
                }
            };
            return Some(Message::Nack {
                page_id,
                target: st.server,
                missing,
            });
        }
        if let Some(bitmap) = &mut st.serve_bitmap {
            if let Some(index) = bitmap.first_one_from(0) {
                bitmap.set(index, false);
                let Store::Packets(held) = &node.store else {
                    return None;
                };
                return Some(Message::Data {
                    page_id,
                    body: DataBody::Indexed {
                        index,
                        payload: held[index].clone()?,
                    },
                });
            }
        }
        if st.serve_count > 0 {
            if let DataMode::Coded(enc) = &self.mode {
                st.serve_count -= 1;
                if st.page.is_none() {
                    st.page = node.decoder_mut()?.decode().ok();
                }
                let cw = enc.encode(st.page.as_ref()?, ctx.rng);
                return Some(Message::Data {
                    page_id,
                    body: DataBody::Coded(cw),
                });
            }
        }
        st.next_adv = ctx.now + ctx.cfg.adv_period;
        Some(Message::Adv {
            page_id,
            rank_or_count: k as u32,
        })
    }

    fn receive(
        &mut self,
        node: &mut NodeRuntime,
        from: NodeId,
        msg: &Message,
        innovative: bool,
        ctx: &mut Ctx,
    ) {
        let k = node.k();
        let complete_now = node.holds_page();
        let st = &mut self.state[node.id.index()];
        match msg {
            Message::Adv { rank_or_count, .. } => {
                if *rank_or_count as usize >= k && !st.known_complete.contains(&from) {
                    st.known_complete.push(from);
                }
                if !complete_now && st.server.is_none() && *rank_or_count as usize >= k {
                    st.server = Some(from);
                    st.retries = 0;
                    st.nack_at = Some(ctx.now + ctx.rng.gen_range(0..=ctx.cfg.backoff_jitter));
                }
            }
            Message::Nack {
                target, missing, ..
            } => {
                st.last_busy = Some(ctx.now);
                if *target != Some(node.id) || !node.is_complete() {
                    return;
                }
                match missing {
                    Missing::Bitmap(b) => match &mut st.serve_bitmap {
                        Some(acc) => {
                            for i in b.iter_ones() {
                                acc.set(i, true);
                            }
                        }
                        None => st.serve_bitmap = Some(b.clone()),
                    },
                    Missing::Count(c) => st.serve_count = st.serve_count.max(*c as usize),
                }
            }
            Message::Data { .. } => {
                st.last_busy = Some(ctx.now);
                st.last_activity = ctx.now;
                if innovative {
                    st.retries = 0;
                }
                if complete_now {
                    st.server = None;
                    st.nack_at = None;
                }
            }
        }
    }

    fn reuse_distance(&self) -> Option<u32> {
        Some(self.reuse_distance)
    }
}
