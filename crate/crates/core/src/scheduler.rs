//! Virtual clock and deterministic event queue.
//!
//! Events are delivered in `(due_at, seq)` order: equal due times come out
//! in the order they were scheduled.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchedulerError {
    #[error("cannot schedule at {due_at}: clock is already at {now}")]
    InPast { due_at: f64, now: f64 },
    #[error("due time must be finite, got {0}")]
    NotFinite(f64),
    #[error("event queue is empty")]
    Empty,
}

/// Monotone virtual time in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VirtualClock {
    now: f64,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self { now: 0.0 }
    }

    pub fn starting_at(now: f64) -> Self {
        Self { now }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    /// Moves the clock forward; earlier times are ignored.
    pub fn advance_to(&mut self, t: f64) {
        if t > self.now {
            self.now = t;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledEvent<T> {
    pub due_at: f64,
    pub seq: u64,
    pub payload: T,
}

impl<T> Eq for ScheduledEvent<T> where T: PartialEq {}

impl<T: PartialEq> Ord for ScheduledEvent<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap
        other
            .due_at
            .total_cmp(&self.due_at)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl<T: PartialEq> PartialOrd for ScheduledEvent<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Min-queue of timed events bound to a virtual clock.
#[derive(Debug, Clone)]
pub struct Scheduler<T> {
    clock: VirtualClock,
    heap: BinaryHeap<ScheduledEvent<T>>,
    next_seq: u64,
}

impl<T: PartialEq> Default for Scheduler<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: PartialEq> Scheduler<T> {
    pub fn new() -> Self {
        Self::with_clock(VirtualClock::new())
    }

    pub fn with_clock(clock: VirtualClock) -> Self {
        Self {
            clock,
            heap: BinaryHeap::new(),
            next_seq: 0,
        }
    }

    pub fn now(&self) -> f64 {
        self.clock.now()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn peek_due(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.due_at)
    }

    /// Enqueues `payload` at `due_at` and returns its `(due_at, seq)` key.
    pub fn schedule(&mut self, payload: T, due_at: f64) -> Result<(f64, u64), SchedulerError> {
        if !due_at.is_finite() {
            return Err(SchedulerError::NotFinite(due_at));
        }
        if due_at < self.clock.now() {
            return Err(SchedulerError::InPast {
                due_at,
                now: self.clock.now(),
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(ScheduledEvent { due_at, seq, payload });
        Ok((due_at, seq))
    }

    /// Pops the earliest event and moves the clock to its due time.
    pub fn advance(&mut self) -> Result<ScheduledEvent<T>, SchedulerError> {
        let event = self.heap.pop().ok_or(SchedulerError::Empty)?;
        self.clock.advance_to(event.due_at);
        Ok(event)
    }

    /// Pops the earliest event only if it is due at or before `t`, moving the
    /// clock to `t` once nothing else is due.
    pub fn advance_until(&mut self, t: f64) -> Option<ScheduledEvent<T>> {
        if self.peek_due().is_some_and(|due| due <= t) {
            return self.advance().ok();
        }
        self.clock.advance_to(t);
        None
    }
}
