use crate::codec::{Absorb, BitVector, CodecError, DecoderState, Page};
use crate::engine::SimTime;
use crate::galois::Field;
use crate::netmodel::NodeId;

use super::message::DataBody;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Source,
    RelayOrSink,
}

/// What a node holds of the page.
#[derive(Clone, Debug)]
pub enum Store {
    /// Uncoded protocols: one slot per packet index.
    Packets(Vec<Option<Vec<u8>>>),
    Coded(DecoderState),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    pub tx: u64,
    pub rx: u64,
    pub nacks_sent: u64,
    pub redundant_rx: u64,
}

#[derive(Clone, Debug)]
pub struct NodeRuntime {
    pub id: NodeId,
    pub hop: u32,
    pub role: Role,
    pub store: Store,
    pub counters: Counters,
    pub completed_at: Option<SimTime>,
    /// Set once on completion: whether the reconstructed page matched.
    pub verified: Option<bool>,
}

impl NodeRuntime {
    pub fn new(id: NodeId, hop: u32, page: &Page, coded: Option<Field>) -> Self {
        let role = if hop == 0 {
            Role::Source
        } else {
            Role::RelayOrSink
        };
        let store = match (coded, role) {
            (Some(field), Role::Source) => Store::Coded(DecoderState::full(field, page)),
            (Some(field), Role::RelayOrSink) => Store::Coded(DecoderState::new(
                field,
                page.page_id(),
                page.k(),
                page.packet_len(),
            )),
            (None, Role::Source) => {
                Store::Packets(page.packets().iter().cloned().map(Some).collect())
            }
            (None, Role::RelayOrSink) => Store::Packets(vec![None; page.k()]),
        };
        let done = role == Role::Source;
        NodeRuntime {
            id,
            hop,
            role,
            store,
            counters: Counters::default(),
            completed_at: done.then_some(0),
            verified: done.then_some(true),
        }
    }

    pub fn k(&self) -> usize {
        match &self.store {
            Store::Packets(p) => p.len(),
            Store::Coded(d) => d.k(),
        }
    }

    /// Rank for coded stores, packet count for uncoded ones.
    pub fn have(&self) -> usize {
        match &self.store {
            Store::Packets(p) => p.iter().filter(|x| x.is_some()).count(),
            Store::Coded(d) => d.rank(),
        }
    }

    pub fn holds_page(&self) -> bool {
        self.have() == self.k()
    }

    pub fn is_complete(&self) -> bool {
        self.completed_at.is_some()
    }

    pub fn decoder(&self) -> Option<&DecoderState> {
        match &self.store {
            Store::Coded(d) => Some(d),
            Store::Packets(_) => None,
        }
    }

    pub fn decoder_mut(&mut self) -> Option<&mut DecoderState> {
        match &mut self.store {
            Store::Coded(d) => Some(d),
            Store::Packets(_) => None,
        }
    }

    pub fn has_packet(&self, index: usize) -> bool {
        match &self.store {
            Store::Packets(p) => p[index].is_some(),
            Store::Coded(_) => false,
        }
    }

    pub fn missing_bitmap(&self) -> BitVector {
        let mut b = BitVector::zeros(self.k());
        if let Store::Packets(p) = &self.store {
            for (i, x) in p.iter().enumerate() {
                if x.is_none() {
                    b.set(i, true);
                }
            }
        }
        b
    }

    /// Stores a received data frame; `true` when it added information.
    pub fn accept(&mut self, body: &DataBody) -> Result<bool, CodecError> {
        let k = self.k();
        let innovative = match (&mut self.store, body) {
            (Store::Packets(p), DataBody::Indexed { index, payload }) => {
                let slot = p.get_mut(*index).ok_or(CodecError::CoefficientCount {
                    expected: k,
                    found: *index + 1,
                })?;
                let fresh = slot.is_none();
                if fresh {
                    *slot = Some(payload.clone());
                }
                fresh
            }
            (Store::Coded(d), DataBody::Coded(cw)) => d.absorb(cw)? == Absorb::Innovative,
            (Store::Coded(d), DataBody::Indexed { .. }) => {
                return Err(CodecError::FieldMismatch {
                    expected: d.field().spec(),
                })
            }
            (Store::Packets(_), DataBody::Coded(cw)) => {
                return Err(CodecError::CoefficientCount {
                    expected: 0,
                    found: cw.coefficients.len(),
                })
            }
        };
        if !innovative {
            self.counters.redundant_rx += 1;
        }
        Ok(innovative)
    }

    /// Marks completion at `now` and checks the reconstruction against `page`.
    pub fn finish(&mut self, now: SimTime, page: &Page) {
        if self.completed_at.is_some() {
            return;
        }
        let ok = match &mut self.store {
            Store::Packets(p) => p
                .iter()
                .zip(page.packets())
                .all(|(got, want)| got.as_deref() == Some(want.as_slice())),
            Store::Coded(d) => d.decode().map(|p| &p == page).unwrap_or(false),
        };
        self.completed_at = Some(now);
        self.verified = Some(ok);
    }
}
