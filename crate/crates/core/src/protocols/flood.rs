use std::collections::VecDeque;

use crate::netmodel::{NodeId, Topology};

use super::message::{DataBody, Message};
use super::runtime::{NodeRuntime, Store};
use super::{Ctx, Dissemination};

/// Every node rebroadcasts each packet the first time it receives it. No
/// repair and no channel arbitration, so loss can leave nodes incomplete.
pub(crate) struct Flood {
    queues: Vec<VecDeque<usize>>,
}

impl Flood {
    pub fn new(topo: &Topology, k: usize) -> Self {
        let mut queues = vec![VecDeque::new(); topo.node_count()];
        queues[topo.source().index()] = (0..k).collect();
        Flood { queues }
    }
}

impl Dissemination for Flood {
    fn contenders(&mut self, nodes: &[NodeRuntime], _ctx: &mut Ctx) -> Vec<NodeId> {
        nodes
            .iter()
            .filter(|n| !self.queues[n.id.index()].is_empty())
            .map(|n| n.id)
            .collect()
    }

    fn transmit(&mut self, node: &mut NodeRuntime, ctx: &mut Ctx) -> Option<Message> {
        let index = self.queues[node.id.index()].pop_front()?;
        let Store::Packets(held) = &node.store else {
            return None;
        };
        Some(Message::Data {
            page_id: ctx.page.page_id(),
            body: DataBody::Indexed {
                index,
                payload: held[index].clone()?,
            },
        })
    }

    fn receive(
        &mut self,
        node: &mut NodeRuntime,
        _from: NodeId,
        msg: &Message,
        innovative: bool,
        _ctx: &mut Ctx,
    ) {
        if let (
            true,
            Message::Data {
                body: DataBody::Indexed { index, .. },
                ..
            },
        ) = (innovative, msg)
        {
            self.queues[node.id.index()].push_back(*index);
        }
    }

    fn stalled(&self) -> bool {
        self.queues.iter().all(|q| q.is_empty())
    }

    fn drains(&self) -> bool {
        true
    }

    fn reuse_distance(&self) -> Option<u32> {
        None
    }
}
