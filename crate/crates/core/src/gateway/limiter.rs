use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use super::Clock;

/// Length of the sliding window both budgets apply to.
pub const WINDOW: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("request needs {needed} tokens but the per-minute budget is {limit}")]
pub struct Unsatisfiable {
    pub needed: u64,
    pub limit: u64,
}

/// A granted request slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permit {
    id: u64,
    pub granted_at: Duration,
    pub tokens: u64,
}

#[derive(Debug, Clone, Copy)]
struct Grant {
    id: u64,
    at: Duration,
    tokens: u64,
}

#[derive(Debug, Default)]
struct Window {
    active: VecDeque<Grant>,
    next_id: u64,
    history: Vec<(Duration, u64)>,
}

/// Sliding-window limiter over requests per minute and tokens per minute.
///
/// A grant at time `t` occupies the budget while `now - t < 60s`. A request
/// is admitted only when fewer than `rpm` grants are active and the active
/// token total plus the request stays within `tpm`.
pub struct RateLimiter {
    rpm: u64,
    tpm: u64,
    clock: Arc<dyn Clock>,
    state: Mutex<Window>,
    record_history: bool,
}

impl RateLimiter {
    pub fn new(rpm: u64, tpm: u64, clock: Arc<dyn Clock>) -> Self {
        assert!(rpm > 0 && tpm > 0, "rate limits must be positive");
        RateLimiter {
            rpm,
            tpm,
            clock,
            state: Mutex::new(Window::default()),
            record_history: false,
        }
    }

    /// Keep a log of every grant, see [`RateLimiter::history`].
    pub fn with_history(mut self) -> Self {
        self.record_history = true;
        self
    }

    /// Block until both budgets admit `tokens`.
    pub fn acquire(&self, tokens: u64) -> Result<Permit, Unsatisfiable> {
        loop {
            match self.try_acquire(tokens)? {
                Ok(permit) => return Ok(permit),
                Err(ready_at) => self.clock.sleep_until(ready_at),
            }
        }
    }

    /// Grant immediately, or return the earliest time a retry can succeed.
    pub fn try_acquire(&self, tokens: u64) -> Result<Result<Permit, Duration>, Unsatisfiable> {
        if tokens > self.tpm {
            return Err(Unsatisfiable {
                needed: tokens,
                limit: self.tpm,
            });
        }
        let mut w = self.state.lock().unwrap();
        let now = self.clock.now();
        while w.active.front().is_some_and(|g| now - g.at >= WINDOW) {
            w.active.pop_front();
        }

        let mut count = w.active.len() as u64;
        let mut used: u64 = w.active.iter().map(|g| g.tokens).sum();
        if count < self.rpm && used + tokens <= self.tpm {
            let id = w.next_id;
            w.next_id += 1;
            w.active.push_back(Grant { id, at: now, tokens });
            if self.record_history {
                w.history.push((now, tokens));
            }
            return Ok(Ok(Permit {
                id,
                granted_at: now,
                tokens,
            }));
        }

        // Expire the oldest grants, in order, until the request fits.
        for g in &w.active {
            count -= 1;
            used -= g.tokens;
            if count < self.rpm && used + tokens <= self.tpm {
                return Ok(Err(g.at + WINDOW));
            }
        }
        unreachable!("an empty window admits any request within tpm")
    }

    /// Replace a permit's estimated token count with the provider-reported one.
    pub fn reconcile(&self, permit: &Permit, actual_tokens: u64) {
        let mut w = self.state.lock().unwrap();
        if let Some(g) = w.active.iter_mut().find(|g| g.id == permit.id) {
            g.tokens = actual_tokens;
        }
    }

    /// Every `(grant time, tokens)` since creation, if history is enabled.
    pub fn history(&self) -> Vec<(Duration, u64)> {
        self.state.lock().unwrap().history.clone()
    }

    pub fn limits(&self) -> (u64, u64) {
        (self.rpm, self.tpm)
    }
}
