//! Deterministic fan-out over independent work items.
//!
//! Results land in slots indexed by input position, so the output never
//! depends on thread scheduling. Intended for the documented parallel-safe
//! operations: per-environment generation and per-question evaluation.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Apply `f` to each item, on `jobs` threads when `jobs > 1`. Output order
/// matches input order exactly.
pub fn ordered_map<T, R, F>(jobs: usize, items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(usize, T) -> R + Sync,
{
    let n = items.len();
    if jobs <= 1 || n <= 1 {
        return items.into_iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..n).map(|_| None).collect());
    let work: Mutex<std::vec::IntoIter<(usize, T)>> = Mutex::new(
        items.into_iter().enumerate().collect::<Vec<_>>().into_iter(),
    );
    let next_hint = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(n) {
            scope.spawn(|| loop {
                let item = { work.lock().unwrap().next() };
                let Some((i, t)) = item else { break };
                next_hint.fetch_add(1, Ordering::Relaxed);
                let r = f(i, t);
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|o| o.expect("worker dropped a slot"))
        .collect()
}
