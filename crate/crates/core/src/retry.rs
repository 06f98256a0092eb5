//! Rate limiting and exponential backoff shared by the HTTP clients.

use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

/// Backoff and pacing settings for one HTTP endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    /// Retries after the first attempt; 5 means up to 6 requests in total.
    pub max_retries: u32,
    /// Delay before the first retry, doubled on each subsequent one.
    pub base_delay: Duration,
    pub max_delay: Duration,
    /// Upper bound on request rate. `None` disables pacing.
    pub requests_per_second: Option<f64>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 5,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
            requests_per_second: Some(5.0),
        }
    }
}

impl RetryPolicy {
    /// No waiting at all; for fixtures and tests.
    pub fn immediate() -> Self {
        Self {
            max_retries: 5,
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
            requests_per_second: None,
        }
    }

    /// Delay before retry number `retry` (1-based).
    pub fn backoff(&self, retry: u32) -> Duration {
        let factor = 1u32.checked_shl(retry.saturating_sub(1)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

/// HTTP statuses worth retrying: throttling and server-side failures.
pub fn is_retryable_status(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

/// Result of one attempt as seen by [`with_retries`].
#[derive(Debug)]
pub enum AttemptError<E> {
    /// Try again after backoff. `retry_after` overrides the computed delay.
    Retryable {
        error: E,
        retry_after: Option<Duration>,
    },
    Fatal(E),
}

/// Successful value plus the number of retries it took.
#[derive(Debug, Clone, PartialEq)]
pub struct Retried<T> {
    pub value: T,
    pub retries: u32,
}

/// Runs `attempt` until it succeeds, fails fatally or exhausts the policy.
/// On exhaustion the last retryable error is returned along with the retry count.
pub fn with_retries<T, E>(
    policy: &RetryPolicy,
    limiter: Option<&RateLimiter>,
    mut attempt: impl FnMut() -> Result<T, AttemptError<E>>,
) -> Result<Retried<T>, (E, u32)> {
    let mut retries = 0;
    loop {
        if let Some(limiter) = limiter {
            limiter.acquire();
        }
        match attempt() {
            Ok(value) => return Ok(Retried { value, retries }),
            Err(AttemptError::Fatal(error)) => return Err((error, retries)),
            Err(AttemptError::Retryable { error, retry_after }) => {
                if retries >= policy.max_retries {
                    return Err((error, retries));
                }
                retries += 1;
                let delay = retry_after
                    .map(|d| d.min(policy.max_delay))
                    .unwrap_or_else(|| policy.backoff(retries));
                log::debug!("retry {retries} after {delay:?}");
                if !delay.is_zero() {
                    thread::sleep(delay);
                }
            }
        }
    }
}

/// Spaces requests at least `1 / requests_per_second` apart.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    last: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn new(requests_per_second: f64) -> Self {
        let interval = if requests_per_second > 0.0 && requests_per_second.is_finite() {
            Duration::from_secs_f64(1.0 / requests_per_second)
        } else {
            Duration::ZERO
        };
        Self {
            interval,
            last: Mutex::new(None),
        }
    }

    pub fn from_policy(policy: &RetryPolicy) -> Option<Self> {
        policy.requests_per_second.map(Self::new)
    }

    /// Blocks until the next request slot is free.
    pub fn acquire(&self) {
        let mut last = self.last.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(prev) = *last {
            let ready = prev + self.interval;
            let now = Instant::now();
            if ready > now {
                thread::sleep(ready - now);
            }
        }
        *last = Some(Instant::now());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles_and_caps() {
        let policy = RetryPolicy {
            base_delay: Duration::from_millis(100),
            max_delay: Duration::from_millis(500),
            ..RetryPolicy::default()
        };
        assert_eq!(policy.backoff(1), Duration::from_millis(100));
        assert_eq!(policy.backoff(2), Duration::from_millis(200));
        assert_eq!(policy.backoff(3), Duration::from_millis(400));
        assert_eq!(policy.backoff(4), Duration::from_millis(500));
        assert_eq!(policy.backoff(60), Duration::from_millis(500));
    }

    #[test]
    fn retryable_statuses() {
        assert!(is_retryable_status(429));
        assert!(is_retryable_status(503));
        assert!(!is_retryable_status(404));
        assert!(!is_retryable_status(200));
    }

    #[test]
    fn gives_up_after_max_retries() {
        let policy = RetryPolicy::immediate();
        let mut calls = 0;
        let out: Result<Retried<()>, _> = with_retries(&policy, None, || {
            calls += 1;
            Err(AttemptError::Retryable {
                error: "busy",
                retry_after: None,
            })
        });
        assert_eq!(out.unwrap_err(), ("busy", 5));
        assert_eq!(calls, 6);
    }

    #[test]
    fn fatal_errors_stop_immediately() {
        let policy = RetryPolicy::immediate();
        let mut calls = 0;
        let out: Result<Retried<()>, _> = with_retries(&policy, None, || {
            calls += 1;
            Err(AttemptError::Fatal("bad request"))
        });
        assert_eq!(out.unwrap_err(), ("bad request", 0));
        assert_eq!(calls, 1);
    }

    #[test]
    fn counts_retries_before_success() {
        let policy = RetryPolicy::immediate();
        let mut calls = 0;
        let out = with_retries(&policy, None, || {
            calls += 1;
            if calls < 3 {
                Err(AttemptError::Retryable {
                    error: (),
                    retry_after: None,
                })
            } else {
                Ok(calls)
            }
        })
        .unwrap();
        assert_eq!(out, Retried { value: 3, retries: 2 });
    }

    #[test]
    fn limiter_spaces_requests() {
        let limiter = RateLimiter::new(50.0);
        let start = Instant::now();
        for _ in 0..3 {
            limiter.acquire();
        }
        assert!(start.elapsed() >= Duration::from_millis(38));
    }
}
