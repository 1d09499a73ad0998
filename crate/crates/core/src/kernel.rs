//! Global tick time base, clock domains and a deterministic event queue.
//!
//! One tick is one picosecond. Every clock domain must have an integral
//! period in ticks, which holds for all frequencies the simulator ships
//! presets for (100 GHz, 4 GHz, 2 GHz, 800 MHz).

use alloc::collections::BinaryHeap;
use alloc::string::String;
use core::cmp::{Ordering, Reverse};
use core::fmt;

/// Picoseconds since simulation start.
pub type Tick = u64;

/// Frequency in hertz.
pub type Hz = u64;

/// Ticks per second.
pub const TICKS_PER_SECOND: u64 = 1_000_000_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KernelError {
    #[error("clock domain '{name}': frequency must be positive")]
    ZeroFrequency { name: String },
    #[error("clock domain '{name}': {frequency} Hz does not divide 10^12 ticks/s")]
    NonIntegralPeriod { name: String, frequency: Hz },
    #[error("cannot schedule at tick {at}, current tick is {now}")]
    SchedulePast { at: Tick, now: Tick },
    #[error("tick arithmetic overflowed the simulation horizon")]
    HorizonExceeded,
}

/// A named clock with an exact integer period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClockDomain {
    name: String,
    frequency: Hz,
    period: Tick,
}

impl ClockDomain {
    pub fn new(name: impl Into<String>, frequency: Hz) -> Result<Self, KernelError> {
        let name = name.into();
        if frequency == 0 {
            return Err(KernelError::ZeroFrequency { name });
        }
        if !TICKS_PER_SECOND.is_multiple_of(frequency) {
            return Err(KernelError::NonIntegralPeriod { name, frequency });
        }
        Ok(Self {
            name,
            frequency,
            period: TICKS_PER_SECOND / frequency,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn frequency(&self) -> Hz {
        self.frequency
    }

    pub fn period(&self) -> Tick {
        self.period
    }

    /// `cycles * period`; overflow means the simulation horizon was exceeded.
    pub fn cycles_to_ticks(&self, cycles: u64) -> Result<Tick, KernelError> {
        cycles.checked_mul(self.period).ok_or(KernelError::HorizonExceeded)
    }

    /// Smallest multiple of the period that is `>= t`.
    #[inline]
    pub fn next_edge(&self, t: Tick) -> Tick {
        next_edge(self.period, t)
    }
}

impl fmt::Display for ClockDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}Hz", self.name, self.frequency)
    }
}

/// Builds a clock domain; fails unless 10^12 is divisible by `frequency`.
pub fn make_domain(name: &str, frequency: Hz) -> Result<ClockDomain, KernelError> {
    ClockDomain::new(name, frequency)
}

/// Smallest multiple of `period` that is `>= t`.
#[inline]
pub fn next_edge(period: Tick, t: Tick) -> Tick {
    debug_assert!(period > 0);
    let rem = t % period;
    if rem == 0 {
        t
    } else {
        t + (period - rem)
    }
}

struct Pending<E> {
    at: Tick,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Pending<E> {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}

impl<E> Eq for Pending<E> {}

impl<E> PartialOrd for Pending<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Pending<E> {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.at, self.seq).cmp(&(other.at, other.seq))
    }
}

/// Min-ordered event queue keyed by `(tick, insertion sequence)`.
///
/// Events at the same tick fire in the order they were scheduled.
pub struct EventQueue<E> {
    heap: BinaryHeap<Reverse<Pending<E>>>,
    now: Tick,
    next_seq: u64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self {
            heap: BinaryHeap::new(),
            now: 0,
            next_seq: 0,
        }
    }

    pub fn now(&self) -> Tick {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn schedule(&mut self, at: Tick, event: E) -> Result<(), KernelError> {
        if at < self.now {
            return Err(KernelError::SchedulePast { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Pending { at, seq, event }));
        Ok(())
    }

    /// Tick of the earliest pending event.
    pub fn peek_tick(&self) -> Option<Tick> {
        self.heap.peek().map(|Reverse(p)| p.at)
    }

    /// Pops the earliest event and moves the current tick to it.
    pub fn advance(&mut self) -> Option<(Tick, E)> {
        let Reverse(p) = self.heap.pop()?;
        debug_assert!(p.at >= self.now);
        self.now = p.at;
        Some((p.at, p.event))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    #[test]
    fn preset_frequencies_have_exact_periods() {
        for (hz, period) in [
            (2_000_000_000, 500),
            (800_000_000, 1250),
            (4_000_000_000, 250),
            (100_000_000_000, 10),
        ] {
            assert_eq!(make_domain("d", hz).unwrap().period(), period);
        }
    }

    #[test]
    fn make_domain_examples() {
        assert_eq!(make_domain("super", 100_000_000_000).unwrap().period(), 10);
        assert_eq!(make_domain("mem", 800_000_000).unwrap().period(), 1250);
        assert!(matches!(
            make_domain("odd", 3),
            Err(KernelError::NonIntegralPeriod { frequency: 3, .. })
        ));
        assert!(matches!(make_domain("zero", 0), Err(KernelError::ZeroFrequency { .. })));
    }

    #[test]
    fn cycles_to_ticks_examples() {
        let cryo = make_domain("cryo", 4_000_000_000).unwrap();
        let sup = make_domain("super", 100_000_000_000).unwrap();
        assert_eq!(cryo.cycles_to_ticks(8), Ok(2000));
        assert_eq!(sup.cycles_to_ticks(21), Ok(210));
        assert_eq!(cryo.cycles_to_ticks(0), Ok(0));
        assert_eq!(cryo.cycles_to_ticks(u64::MAX / 2), Err(KernelError::HorizonExceeded));
    }

    #[test]
    fn next_edge_examples() {
        assert_eq!(next_edge(250, 1001), 1250);
        assert_eq!(next_edge(10, 1000), 1000);
        assert_eq!(next_edge(1250, 1), 1250);
        assert_eq!(next_edge(1250, 0), 0);
    }

    #[test]
    fn queue_orders_by_tick_then_insertion() {
        let mut q = EventQueue::new();
        q.schedule(100, "late").unwrap();
        q.schedule(50, "A").unwrap();
        q.schedule(50, "B").unwrap();
        let order: Vec<_> = core::iter::from_fn(|| q.advance()).collect();
        assert_eq!(order, [(50, "A"), (50, "B"), (100, "late")]);
        assert_eq!(q.now(), 100);
    }

    #[test]
    fn schedule_in_past_is_rejected() {
        let mut q = EventQueue::new();
        q.schedule(20, ()).unwrap();
        q.advance();
        assert_eq!(q.schedule(10, ()), Err(KernelError::SchedulePast { at: 10, now: 20 }));
        // Scheduling at the current tick is fine.
        q.schedule(20, ()).unwrap();
    }

    proptest! {
        #[test]
        fn next_edge_is_idempotent_and_tight(period in 1u64..5000, t in 0u64..1_000_000_000) {
            let e = next_edge(period, t);
            prop_assert!(e >= t);
            prop_assert_eq!(e % period, 0);
            prop_assert!(e - t < period);
            prop_assert_eq!(next_edge(period, e), e);
        }

        #[test]
        fn dispatch_order_is_replayable(ticks in proptest::collection::vec(0u64..100, 0..64)) {
            let run = || {
                let mut q = EventQueue::new();
                for (i, t) in ticks.iter().enumerate() {
                    q.schedule(*t, i).unwrap();
                }
                core::iter::from_fn(|| q.advance()).collect::<Vec<_>>()
            };
            let a = run();
            prop_assert_eq!(&a, &run());
            // Sorted by (tick, insertion index).
            prop_assert!(a.windows(2).all(|w| (w[0].0, w[0].1) < (w[1].0, w[1].1)));
        }
    }
}
