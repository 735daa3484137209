//! Deterministic discrete-event core.
//!
//! Time is an integer count of slots. Events fire in `(fire_time, sequence)`
//! order, where `sequence` is the insertion counter, so equal-time events fire
//! in the order they were scheduled.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::netmodel::NodeId;

pub type SimTime = u64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("event scheduled at t={at} but the clock reads t={now}")]
    PastEvent { at: SimTime, now: SimTime },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EventKind<P> {
    SlotBoundary,
    PacketDelivery(P),
    TimerExpiry(u64),
    ProtocolWake,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Event<P> {
    pub fire_time: SimTime,
    pub sequence: u64,
    /// `None` for network-wide events such as slot boundaries.
    pub target: Option<NodeId>,
    pub kind: EventKind<P>,
}

struct Queued<P>(Event<P>);

impl<P> PartialEq for Queued<P> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<P> Eq for Queued<P> {}

impl<P> PartialOrd for Queued<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Queued<P> {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.0.fire_time, other.0.sequence).cmp(&(self.0.fire_time, self.0.sequence))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SimClock {
    pub now: SimTime,
    pub slot_index: u64,
}

/// Time-ordered event queue plus the simulation clock.
pub struct Scheduler<P> {
    heap: BinaryHeap<Queued<P>>,
    next_sequence: u64,
    clock: SimClock,
    slot_duration: u64,
}

impl<P> Default for Scheduler<P> {
    fn default() -> Self {
        Self::new(1)
    }
}

impl<P> Scheduler<P> {
    pub fn new(slot_duration: u64) -> Self {
        assert!(slot_duration > 0, "slot_duration must be positive");
        Scheduler {
            heap: BinaryHeap::new(),
            next_sequence: 0,
            clock: SimClock::default(),
            slot_duration,
        }
    }

    pub fn now(&self) -> SimTime {
        self.clock.now
    }

    pub fn clock(&self) -> SimClock {
        self.clock
    }

    pub fn slot_duration(&self) -> u64 {
        self.slot_duration
    }

    pub fn schedule(
        &mut self,
        fire_time: SimTime,
        target: Option<NodeId>,
        kind: EventKind<P>,
    ) -> Result<(), EngineError> {
        if fire_time < self.clock.now {
            return Err(EngineError::PastEvent {
                at: fire_time,
                now: self.clock.now,
            });
        }
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.heap.push(Queued(Event {
            fire_time,
            sequence,
            target,
            kind,
        }));
        Ok(())
    }

    pub fn schedule_in(
        &mut self,
        delay: SimTime,
        target: Option<NodeId>,
        kind: EventKind<P>,
    ) -> Result<(), EngineError> {
        self.schedule(self.clock.now + delay, target, kind)
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|q| q.0.fire_time)
    }

    /// Removes the next event and advances the clock to its fire time.
    pub fn pop(&mut self) -> Option<Event<P>> {
        let ev = self.heap.pop()?.0;
        debug_assert!(ev.fire_time >= self.clock.now);
        self.clock.now = ev.fire_time;
        self.clock.slot_index = ev.fire_time / self.slot_duration;
        Some(ev)
    }
}

/// Receives events from [`run_until`].
pub trait Handler<P> {
    fn handle(&mut self, event: Event<P>, scheduler: &mut Scheduler<P>);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimOutcome {
    /// Clock value when the run stopped.
    pub end_time: SimTime,
    /// Whether the termination predicate held at `end_time`.
    pub completed: bool,
    /// Whether the run stopped because `max_time` was reached.
    pub timed_out: bool,
    pub events_processed: u64,
}

/// Drains events until `done` holds or the next event lies beyond `max_time`.
pub fn run_until<P, H, F>(
    scheduler: &mut Scheduler<P>,
    handler: &mut H,
    mut done: F,
    max_time: SimTime,
) -> SimOutcome
where
    H: Handler<P>,
    F: FnMut(&H) -> bool,
{
    let mut events_processed = 0;
    loop {
        if done(handler) {
            return SimOutcome {
                end_time: scheduler.now(),
                completed: true,
                timed_out: false,
                events_processed,
            };
        }
        match scheduler.peek_time() {
            None => {
                return SimOutcome {
                    end_time: scheduler.now(),
                    completed: false,
                    timed_out: false,
                    events_processed,
                }
            }
            Some(t) if t > max_time => {
                return SimOutcome {
                    end_time: max_time,
                    completed: false,
                    timed_out: true,
                    events_processed,
                }
            }
            Some(_) => {}
        }
        let ev = scheduler.pop().expect("peeked");
        handler.handle(ev, scheduler);
        events_processed += 1;
    }
}

/// Derives an independent random stream from a root seed, a replicate index
/// and a stream label.
///
/// The label is hashed with 64-bit FNV-1a, then combined with the root and
/// index through SplitMix64 finalisers. Streams with different labels never
/// share draws, so adding a new consumer does not shift existing ones.
pub fn derive_seed(root: u64, index: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut x = splitmix(root ^ splitmix(index.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    x = splitmix(x ^ h);
    x
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn stream(root: u64, index: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, index, label))
}
