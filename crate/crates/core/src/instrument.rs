//! Multiply counting.
//!
//! [`Counted`] wraps an `f64` and bumps a process-wide counter on every
//! multiplication. [`count_multiplies`] serializes measurements so concurrent
//! tests do not pollute each other's counts.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use crate::scalar::Real;

static MULTIPLIES: AtomicU64 = AtomicU64::new(0);
static MEASURE: Mutex<()> = Mutex::new(());

#[derive(Debug, Clone, Copy, Default, PartialEq, PartialOrd)]
pub struct Counted(pub f64);

impl Add for Counted {
    type Output = Counted;
    #[inline]
    fn add(self, rhs: Counted) -> Counted {
        Counted(self.0 + rhs.0)
    }
}

impl Sub for Counted {
    type Output = Counted;
    #[inline]
    fn sub(self, rhs: Counted) -> Counted {
        Counted(self.0 - rhs.0)
    }
}

impl Mul for Counted {
    type Output = Counted;
    #[inline]
    fn mul(self, rhs: Counted) -> Counted {
        MULTIPLIES.fetch_add(1, Ordering::Relaxed);
        Counted(self.0 * rhs.0)
    }
}

impl Neg for Counted {
    type Output = Counted;
    #[inline]
    fn neg(self) -> Counted {
        Counted(-self.0)
    }
}

impl AddAssign for Counted {
    #[inline]
    fn add_assign(&mut self, rhs: Counted) {
        self.0 += rhs.0;
    }
}

impl num_traits::Zero for Counted {
    fn zero() -> Self {
        Counted(0.0)
    }

    fn is_zero(&self) -> bool {
        self.0 == 0.0
    }
}

impl Real for Counted {
    const NAME: &'static str = "counted";

    fn from_f64(v: f64) -> Self {
        Counted(v)
    }

    fn to_f64(self) -> f64 {
        self.0
    }
}

/// Runs `f` and returns its result together with the number of
/// [`Counted`] multiplications it performed.
pub fn count_multiplies<R>(f: impl FnOnce() -> R) -> (R, u64) {
    let _guard = MEASURE.lock().unwrap_or_else(|e| e.into_inner());
    let before = MULTIPLIES.load(Ordering::SeqCst);
    let out = f();
    let after = MULTIPLIES.load(Ordering::SeqCst);
    (out, after - before)
}
