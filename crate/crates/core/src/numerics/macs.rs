//! Thread-local multiply-accumulate counter.
//!
//! Every matrix product, convolution and attention kernel reports the number
//! of MACs it performs. The complexity analyzer is checked against these
//! counts.

use std::cell::Cell;

thread_local! {
    static MACS: Cell<u64> = const { Cell::new(0) };
}

#[inline]
pub(crate) fn record(n: u64) {
    MACS.with(|m| m.set(m.get() + n));
}

/// Runs `f` and returns its result with the MACs it performed on this thread.
pub fn measure<R>(f: impl FnOnce() -> R) -> (R, u64) {
    let before = MACS.with(Cell::get);
    let out = f();
    let after = MACS.with(Cell::get);
    (out, after - before)
}
