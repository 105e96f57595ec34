// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::time::SimTime;

/// Monotone virtual clock.
#[derive(Debug, Clone, Copy, Default)]
pub struct VirtualClock {
    now: SimTime,
}

impl VirtualClock {
    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn advance_to(&mut self, t: SimTime) {
        assert!(t >= self.now, "virtual time moved backwards: {} -> {}", self.now, t);
        self.now = t;
    }
}

struct Scheduled<E> {
    at: SimTime,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Scheduled<E> {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}

impl<E> Eq for Scheduled<E> {}

impl<E> PartialOrd for Scheduled<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Scheduled<E> {
    // Reversed: BinaryHeap is a max-heap and we want the earliest first.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.at, other.seq).cmp(&(self.at, self.seq))
    }
}

/// Events fire in `(fire_time, sequence_no)` order, so two events scheduled
/// for the same instant fire in the order they were scheduled.
pub struct EventQueue<E> {
    heap: BinaryHeap<Scheduled<E>>,
    next_seq: u64,
    clock: VirtualClock,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            next_seq: 0,
            clock: VirtualClock::default(),
        }
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> SimTime {
        self.clock.now()
    }

    /// Schedules `event` at `at`; returns its sequence number.
    ///
    /// Panics if `at` lies in the past.
    pub fn schedule(&mut self, at: SimTime, event: E) -> u64 {
        assert!(at >= self.now(), "event scheduled in the past");
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Scheduled { at, seq, event });
        seq
    }

    pub fn schedule_in(&mut self, delay: SimTime, event: E) -> u64 {
        let at = self.now() + delay;
        self.schedule(at, event)
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|s| s.at)
    }

    pub fn pop(&mut self) -> Option<(SimTime, E)> {
        let s = self.heap.pop()?;
        self.clock.advance_to(s.at);
        Some((s.at, s.event))
    }

    /// Pops the next event only if it fires at or before `horizon`.
    pub fn pop_until(&mut self, horizon: SimTime) -> Option<(SimTime, E)> {
        match self.peek_time() {
            Some(t) if t <= horizon => self.pop(),
            _ => None,
        }
    }

    /// Moves the clock forward without firing anything.
    pub fn advance_to(&mut self, t: SimTime) {
        if t > self.now() {
            self.clock.advance_to(t);
        }
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
