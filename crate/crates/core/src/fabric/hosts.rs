// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

use std::collections::BTreeMap;

use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PingOutcome {
    Rtt(SimTime),
    Lost,
}

impl PingOutcome {
    pub fn rtt(&self) -> Option<SimTime> {
        match self {
            PingOutcome::Rtt(t) => Some(*t),
            PingOutcome::Lost => None,
        }
    }
}

/// Bookkeeping for one `ping -c count` run. Sequence numbers start at 1.
#[derive(Debug, Clone)]
pub struct PingSession {
    pub src_host: usize,
    pub dst_host: usize,
    pub ident: u16,
    pub count: u16,
    pub interval: SimTime,
    pub timeout: SimTime,
    sent: BTreeMap<u16, SimTime>,
    outcomes: BTreeMap<u16, PingOutcome>,
}

impl PingSession {
    pub fn new(src_host: usize, dst_host: usize, ident: u16, count: u16, interval: SimTime, timeout: SimTime) -> Self {
        PingSession {
            src_host,
            dst_host,
            ident,
            count,
            interval,
            timeout,
            sent: BTreeMap::new(),
            outcomes: BTreeMap::new(),
        }
    }

    /// Offset of request `seq` from the session start.
    pub fn send_offset(&self, seq: u16) -> SimTime {
        self.interval * u64::from(seq.saturating_sub(1))
    }

    pub fn record_sent(&mut self, seq: u16, at: SimTime) {
        self.sent.insert(seq, at);
    }

    pub fn sent_at(&self, seq: u16) -> Option<SimTime> {
        self.sent.get(&seq).copied()
    }

    /// Returns the RTT if the reply arrived before the request timed out.
    pub fn record_reply(&mut self, seq: u16, at: SimTime) -> Option<SimTime> {
        let sent = *self.sent.get(&seq)?;
        if self.outcomes.contains_key(&seq) {
            return None;
        }
        let rtt = at - sent;
        self.outcomes.insert(seq, PingOutcome::Rtt(rtt));
        Some(rtt)
    }

    /// Marks `seq` lost unless it has already been answered.
    pub fn record_timeout(&mut self, seq: u16) -> bool {
        if self.outcomes.contains_key(&seq) {
            return false;
        }
        self.outcomes.insert(seq, PingOutcome::Lost);
        true
    }

    pub fn is_done(&self) -> bool {
        self.outcomes.len() == self.count as usize
    }

    /// Outcomes in sequence order; pending requests are omitted.
    pub fn results(&self) -> Vec<PingOutcome> {
        self.outcomes.values().copied().collect()
    }
}
