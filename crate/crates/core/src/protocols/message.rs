use std::fmt::{self, Write as _};

use crate::codec::{BitVector, Codeword};
use crate::netmodel::{NodeId, Topology};

/// What a NACK asks for: specific packet indices, or a number of codewords.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Missing {
    Bitmap(BitVector),
    Count(u32),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DataBody {
    /// Uncoded packet `index` of the page.
    Indexed {
        index: usize,
        payload: Vec<u8>,
    },
    Coded(Codeword),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Message {
    Adv {
        page_id: u32,
        rank_or_count: u32,
    },
    /// `target: None` addresses every previous-hop neighbour.
    Nack {
        page_id: u32,
        target: Option<NodeId>,
        missing: Missing,
    },
    Data {
        page_id: u32,
        body: DataBody,
    },
}

impl Message {
    pub fn is_data(&self) -> bool {
        matches!(self, Message::Data { .. })
    }

    pub fn is_nack(&self) -> bool {
        matches!(self, Message::Nack { .. })
    }

    /// Coefficient-vector header bits carried by this frame.
    pub fn header_bits(&self) -> u64 {
        match self {
            Message::Data {
                body: DataBody::Coded(cw),
                ..
            } => cw.coefficients.header_bits(),
            _ => 0,
        }
    }

    /// One-line wire rendering, with node names resolved through `topo`.
    pub fn render(&self, topo: &Topology) -> String {
        let mut s = String::new();
        match self {
            Message::Adv {
                page_id,
                rank_or_count,
            } => {
                let _ = write!(s, "ADV page={page_id} rank={rank_or_count}");
            }
            Message::Nack {
                page_id,
                target,
                missing,
            } => {
                let to = target.map_or("*", |t| topo.name(t));
                let _ = write!(s, "NACK page={page_id} to={to} ");
                let _ = match missing {
                    Missing::Bitmap(b) => write!(s, "missing={b}"),
                    Missing::Count(c) => write!(s, "count={c}"),
                };
            }
            Message::Data { page_id, body } => {
                let _ = match body {
                    DataBody::Indexed { index, .. } => write!(s, "DATA page={page_id} idx={index}"),
                    DataBody::Coded(cw) => write!(s, "DATA page={page_id} g={}", cw.coefficients),
                };
            }
        }
        s
    }
}

/// One transmitted frame as it appears in a trace.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceEntry {
    pub slot: u64,
    pub sender: NodeId,
    pub message: Message,
    pub receivers: Vec<NodeId>,
}

impl TraceEntry {
    pub fn render(&self, topo: &Topology) -> String {
        let receivers = if self.receivers.is_empty() {
            "-".to_string()
        } else {
            self.receivers
                .iter()
                .map(|&r| topo.name(r))
                .collect::<Vec<_>>()
                .join(",")
        };
        format!(
            "{:>5} {} {} -> {}",
            self.slot,
            topo.name(self.sender),
            self.message.render(topo),
            receivers
        )
    }
}

/// Renders a trace, one frame per line.
pub struct TraceDisplay<'a> {
    pub topo: &'a Topology,
    pub entries: &'a [TraceEntry],
}

impl fmt::Display for TraceDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in self.entries {
            writeln!(f, "{}", e.render(self.topo))?;
        }
        Ok(())
    }
}
