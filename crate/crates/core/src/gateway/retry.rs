use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Clock, FailureKind, GatewayError};

/// Exponential backoff with multiplicative jitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    #[serde(with = "secs_f64")]
    pub base_delay: Duration,
    #[serde(with = "secs_f64")]
    pub cap: Duration,
    /// Fraction in `[0, 1)`; a delay `d` becomes `d * (1 + jitter * u)`,
    /// `u` uniform in `[-1, 1)`.
    pub jitter: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            base_delay: Duration::from_secs(1),
            cap: Duration::from_secs(60),
            jitter: 0.25,
        }
    }
}

impl RetryPolicy {
    /// Delay before the retry that follows failed attempt `attempt` (1-based):
    /// `min(cap, base * 2^(attempt-1))`, then jittered.
    pub fn delay<R: Rng + ?Sized>(&self, attempt: u32, rng: &mut R) -> Duration {
        let nominal = self.nominal_delay(attempt);
        let u: f64 = rng.gen::<f64>() * 2.0 - 1.0;
        nominal.mul_f64((1.0 + self.jitter * u).max(0.0))
    }

    pub fn nominal_delay(&self, attempt: u32) -> Duration {
        let factor = 2f64.powi(attempt.saturating_sub(1).min(62) as i32);
        let d = self.base_delay.as_secs_f64() * factor;
        if d >= self.cap.as_secs_f64() {
            self.cap
        } else {
            Duration::from_secs_f64(d)
        }
    }
}

/// Value produced after zero or more retries.
#[derive(Debug, Clone, PartialEq)]
pub struct Retried<T> {
    pub value: T,
    pub attempts: u32,
    pub errors: Vec<FailureKind>,
    pub delays: Vec<Duration>,
}

/// Final failure: a fatal error, or retries exhausted.
#[derive(Debug, Clone, PartialEq)]
pub struct RetryFailure {
    pub error: GatewayError,
    pub attempts: u32,
    pub errors: Vec<FailureKind>,
    pub delays: Vec<Duration>,
}

/// Run `op(attempt)` until it succeeds, fails fatally, or attempts run out.
/// Retryable failures sleep on `clock` for the policy's backoff delay.
pub fn with_retry<T, R, F>(
    policy: &RetryPolicy,
    clock: &dyn Clock,
    rng: &mut R,
    mut op: F,
) -> Result<Retried<T>, RetryFailure>
where
    R: Rng + ?Sized,
    F: FnMut(u32) -> Result<T, GatewayError>,
{
    let mut errors = Vec::new();
    let mut delays = Vec::new();
    let max = policy.max_attempts.max(1);
    for attempt in 1..=max {
        match op(attempt) {
            Ok(value) => {
                return Ok(Retried {
                    value,
                    attempts: attempt,
                    errors,
                    delays,
                })
            }
            Err(e) => {
                errors.push(e.kind);
                if !e.kind.is_retryable() || attempt == max {
                    return Err(RetryFailure {
                        error: e,
                        attempts: attempt,
                        errors,
                        delays,
                    });
                }
                let d = policy.delay(attempt, rng);
                delays.push(d);
                clock.sleep(d);
            }
        }
    }
    unreachable!("loop returns on the last attempt")
}

mod secs_f64 {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::SimClock;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn err(kind: FailureKind) -> GatewayError {
        GatewayError::new(kind, "x")
    }

    #[test]
    fn first_try_success_has_no_delays() {
        let clock = SimClock::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = with_retry(&RetryPolicy::default(), &clock, &mut rng, |_| Ok::<_, GatewayError>(7)).unwrap();
        assert_eq!((r.value, r.attempts), (7, 1));
        assert!(r.delays.is_empty());
        assert_eq!(clock.now(), Duration::ZERO);
    }

    #[test]
    fn jittered_schedule_matches_oracle() {
        let policy = RetryPolicy::default();
        let clock = SimClock::new();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let r = with_retry(&policy, &clock, &mut rng, |a| {
            if a <= 2 { Err(err(FailureKind::RateLimited)) } else { Ok(a) }
        })
        .unwrap();
        assert_eq!(r.attempts, 3);
        assert_eq!(r.errors, vec![FailureKind::RateLimited; 2]);

        // Independent schedule: base 1s doubling, scaled by 1 + 0.25 * (2u - 1).
        let mut oracle_rng = ChaCha8Rng::seed_from_u64(42);
        let expected: Vec<f64> = [1.0, 2.0]
            .iter()
            .map(|base| base * (1.0 + 0.25 * (oracle_rng.gen::<f64>() * 2.0 - 1.0)))
            .collect();
        for (d, e) in r.delays.iter().zip(&expected) {
            assert!((d.as_secs_f64() - e).abs() < 1e-9, "{d:?} vs {e}");
        }
        assert!((r.delays[0].as_secs_f64() - 1.0).abs() <= 0.25);
        assert!((r.delays[1].as_secs_f64() - 2.0).abs() <= 0.5);
        let slept: Duration = r.delays.iter().sum();
        assert_eq!(clock.now(), slept);
    }

    #[test]
    fn fatal_error_is_not_retried() {
        let clock = SimClock::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut calls = 0;
        let f = with_retry(&RetryPolicy::default(), &clock, &mut rng, |_| {
            calls += 1;
            Err::<(), _>(err(FailureKind::AuthFailed))
        })
        .unwrap_err();
        assert_eq!((calls, f.attempts), (1, 1));
        assert!(f.delays.is_empty());
    }

    #[test]
    fn exhaustion_reports_last_kind() {
        let clock = SimClock::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = with_retry(&RetryPolicy::default(), &clock, &mut rng, |a| {
            Err::<(), _>(err(if a == 5 { FailureKind::Timeout } else { FailureKind::ServerError }))
        })
        .unwrap_err();
        assert_eq!(f.attempts, 5);
        assert_eq!(f.error.kind, FailureKind::Timeout);
        assert_eq!(f.delays.len(), 4);
    }

    #[test]
    fn delays_non_decreasing_below_cap() {
        let policy = RetryPolicy { max_attempts: 12, ..Default::default() };
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let delays: Vec<Duration> = (1..=6).map(|a| policy.delay(a, &mut rng)).collect();
            // Nominal delays 1..32s stay below the 60s cap.
            assert!(delays.windows(2).all(|w| w[0] <= w[1]), "{delays:?}");
        }
        assert_eq!(policy.nominal_delay(7), Duration::from_secs(60));
        assert_eq!(policy.nominal_delay(40), Duration::from_secs(60));
    }
}
