// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

use std::any::Any;

use crate::controller::{ControllerError, Northbound, SubscriptionRequest};
use crate::netproto::{decode_envelope, PacketEventEnvelope};
use crate::time::SimTime;

pub trait ExternalApp: Send {
    fn app_id(&self) -> &str;

    /// The app's filter is also applied by the runner, so the app sees the
    /// same events whatever the placement.
    fn subscription(&self) -> SubscriptionRequest;

    /// Returns the first timer deadline, if any.
    fn on_start(&mut self, _now: SimTime, _nb: &mut dyn Northbound) -> Option<SimTime> {
        None
    }

    /// Returns the next timer deadline, if any.
    fn on_timer(&mut self, _now: SimTime, _nb: &mut dyn Northbound) -> Option<SimTime> {
        None
    }

    fn on_event(&mut self, env: &PacketEventEnvelope, now: SimTime, nb: &mut dyn Northbound);

    fn as_any(&self) -> &dyn Any;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConsumerStats {
    /// Records handed over by the broker.
    pub delivered: u64,
    /// Records that passed the client-side check and reached the app.
    pub processed: u64,
    pub undecodable: u64,
    pub polls: u64,
}

/// The consumer loop around one external app: poll, check, decode,
/// dispatch, commit.
pub struct AppRunner {
    app: Box<dyn ExternalApp>,
    req: SubscriptionRequest,
    granted: bool,
    busy_until: SimTime,
    stats: ConsumerStats,
    processed: Vec<Vec<u8>>,
}

impl std::fmt::Debug for AppRunner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AppRunner")
            .field("app_id", &self.req.app_id)
            .field("stats", &self.stats)
            .finish_non_exhaustive()
    }
}

const POLL_BATCH: usize = 256;

impl AppRunner {
    pub fn new(app: Box<dyn ExternalApp>) -> Self {
        let req = app.subscription();
        AppRunner {
            app,
            req,
            granted: false,
            busy_until: SimTime::ZERO,
            stats: ConsumerStats::default(),
            processed: Vec::new(),
        }
    }

    pub fn app(&self) -> &dyn ExternalApp {
        self.app.as_ref()
    }

    pub fn app_id(&self) -> &str {
        &self.req.app_id
    }

    pub fn stats(&self) -> ConsumerStats {
        self.stats
    }

    /// Raw envelopes handed to the app, in processing order.
    pub fn processed(&self) -> &[Vec<u8>] {
        &self.processed
    }

    /// Subscribes and starts the app.
    pub fn start(&mut self, now: SimTime, nb: &mut dyn Northbound) -> Result<Option<SimTime>, ControllerError> {
        let conf = nb.subscribe(&self.req);
        if !conf.granted {
            return Err(ControllerError::InvalidRule(format!(
                "subscription of {} refused: {}",
                self.req.app_id,
                conf.error.unwrap_or_default()
            )));
        }
        self.granted = true;
        Ok(self.app.on_start(now, nb))
    }

    pub fn timer(&mut self, now: SimTime, nb: &mut dyn Northbound) -> Option<SimTime> {
        self.app.on_timer(now, nb)
    }

    /// Drains everything visible at `now`. Events are handled one after
    /// another, each taking `processing` of app time. Returns the number of
    /// records delivered.
    pub fn poll(&mut self, now: SimTime, processing: SimTime, nb: &mut dyn Northbound) -> Result<usize, ControllerError> {
        if !self.granted {
            return Ok(0);
        }
        let group = self.req.group_id.clone();
        let me = self.req.app_id.clone();
        let mut total = 0;
        loop {
            let batch = nb.poll(&group, &me, POLL_BATCH, now)?;
            self.stats.polls += 1;
            if batch.is_empty() {
                return Ok(total);
            }
            total += batch.len();
            for r in &batch {
                self.stats.delivered += 1;
                let pass = self.req.filter.as_ref().is_none_or(|f| f.allows_value(&r.value));
                if !pass {
                    continue;
                }
                let Ok(env) = decode_envelope(&r.value) else {
                    self.stats.undecodable += 1;
                    continue;
                };
                self.busy_until = self.busy_until.max(now) + processing;
                self.stats.processed += 1;
                self.processed.push(r.value.clone());
                self.app.on_event(&env, self.busy_until, nb);
            }
            for r in &batch {
                nb.commit(&group, &r.topic_partition(), r.offset + 1)?;
            }
        }
    }
}
