//! Box-consistency narrowing by shaving inconsistent endpoint slices.

use std::cell::Cell;

use super::{Constraint, PruneOperator, PruneResult};
use crate::interval::{FloatBox, FloatInterval};

/// Slices narrower than `width / 2^REL_BITS` are not split further.
const REL_BITS: i32 = 12;
/// Cap on consistency tests per endpoint search.
const EVAL_BUDGET: usize = 400;

pub struct BoxConsistency;

impl PruneOperator for BoxConsistency {
    fn name(&self) -> &str {
        "box"
    }

    fn prune(&self, bx: &FloatBox, c: &Constraint) -> PruneResult {
        let mut cur = bx.clone();
        for &i in c.vars() {
            let r = box_consistency_narrow(&cur, c, i);
            if r.is_empty() {
                return r;
            }
            cur = r.bx;
        }
        PruneResult::from_boxes(bx, cur)
    }
}

/// Replace the `i`-th interval by the hull of its slices whose relaxed
/// enclosure still contains zero, located by depth-first bisection from each
/// end.
pub fn box_consistency_narrow(bx: &FloatBox, c: &Constraint, i: usize) -> PruneResult {
    if bx.is_empty() || !c.consistent(bx) {
        return PruneResult::empty(bx.dim());
    }
    let whole = bx.get(i);
    if !c.vars().contains(&i) || whole.is_point() || !whole.is_bounded() {
        return PruneResult { bx: bx.clone(), changed: false };
    }
    let tol = whole.width() * 2f64.powi(-REL_BITS);
    let test = |slice: FloatInterval| {
        let mut b = bx.clone();
        b.set(i, slice);
        c.consistent(&b)
    };
    let budget = Cell::new(EVAL_BUDGET);
    let lo = search(whole, tol, &test, &budget, true);
    let Some(lo) = lo else {
        return PruneResult::empty(bx.dim());
    };
    budget.set(EVAL_BUDGET);
    let hi = search(FloatInterval::new(lo, whole.hi()), tol, &test, &budget, false).unwrap_or(whole.hi());
    let mut out = bx.clone();
    out.set(i, FloatInterval::checked(lo, hi));
    if out.is_empty() || !c.consistent(&out) {
        return PruneResult::empty(bx.dim());
    }
    PruneResult::from_boxes(bx, out)
}

/// Leftmost (or rightmost) endpoint of a consistent slice of `iv`, or `None`
/// when every slice is inconsistent. Running out of budget answers with the
/// current slice's outer endpoint, which is always safe.
fn search(iv: FloatInterval, tol: f64, test: &dyn Fn(FloatInterval) -> bool, budget: &Cell<usize>, leftmost: bool) -> Option<f64> {
    let outer = if leftmost { iv.lo() } else { iv.hi() };
    if budget.get() == 0 {
        return Some(outer);
    }
    budget.set(budget.get() - 1);
    if !test(iv) {
        return None;
    }
    if iv.width() <= tol {
        return Some(outer);
    }
    let Ok((a, b)) = iv.bisect() else {
        return Some(outer);
    };
    let (first, second) = if leftmost { (a, b) } else { (b, a) };
    search(first, tol, test, budget, leftmost).or_else(|| search(second, tol, test, budget, leftmost))
}
