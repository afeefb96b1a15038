//! Central finite-difference gradient checking.

use super::store::ParamStore;

/// Compare analytic gradients (already accumulated in the store) against
/// central finite differences of `loss_fn`, coordinate by coordinate.
/// Returns the worst relative error, where the relative error uses
/// `max(|analytic|, |numeric|, floor)` as denominator so that near-zero
/// gradients are compared absolutely.
pub fn grad_check<F>(store: &mut ParamStore, loss_fn: F, h: f64) -> f64
where
    F: Fn(&ParamStore) -> f64,
{
    const FLOOR: f64 = 1e-4;
    let mut max_rel: f64 = 0.0;
    for p in 0..store.len() {
        for k in 0..store.values[p].numel() {
            let orig = store.values[p].data()[k];
            store.values[p].data_mut()[k] = orig + h;
            let up = loss_fn(store);
            store.values[p].data_mut()[k] = orig - h;
            let down = loss_fn(store);
            store.values[p].data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = store.grads[p].data()[k];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR);
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    max_rel
}
