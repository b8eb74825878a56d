//! Sliding-window RPM/TPM limiting on a simulated clock.
//!
//! cargo run --example rate_limiter

use std::sync::Arc;
use std::time::Duration;

use llmcoder::gateway::{RateLimiter, SimClock, WINDOW};

fn main() {
    let clock = Arc::new(SimClock::new());
    let limiter = RateLimiter::new(3, 1_000, clock.clone()).with_history();

    // Five requests: the fourth waits for the first to leave the window,
    // the fifth waits until the fourth leaves, as 100 + 950 exceeds the TPM.
    for tokens in [100, 100, 100, 100, 950] {
        let permit = limiter.acquire(tokens).unwrap();
        println!("granted {tokens:>4} tokens at t = {:>5.1}s", permit.granted_at.as_secs_f64());
    }
    clock.advance(Duration::from_secs(1));
    match limiter.acquire(5_000) {
        Ok(_) => unreachable!(),
        Err(e) => println!("5000 tokens: {e}"),
    }

    let history = limiter.history();
    let worst = history
        .iter()
        .map(|(t, _)| history.iter().filter(|(u, _)| *u >= *t && *u < *t + WINDOW).map(|(_, n)| n).sum::<u64>())
        .max()
        .unwrap_or(0);
    println!("largest token count in any 60 s window: {worst} (limit {})", limiter.limits().1);
}
