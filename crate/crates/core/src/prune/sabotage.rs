//! Deliberately broken operators, each violating exactly one of the three
//! well-definedness conditions. They exist to show that the property suites
//! and the solver notice the breakage.

use super::{Constraint, PruneOperator, PruneResult};
use crate::interval::{FloatBox, FloatInterval};

/// Never contracts: returns the input widened by one on each side.
pub struct Inflate;

impl PruneOperator for Inflate {
    fn name(&self) -> &str {
        "inflate"
    }

    fn prune(&self, bx: &FloatBox, _c: &Constraint) -> PruneResult {
        let out = FloatBox::new(bx.intervals().iter().map(|d| d.inflate(1.0)).collect());
        PruneResult { bx: out, changed: true }
    }
}

/// Collapses every interval to its upper endpoint, as in `Prune([-1,1],
/// x^2 + 1) = [1, 1]`.
pub struct CollapseToUpper;

impl PruneOperator for CollapseToUpper {
    fn name(&self) -> &str {
        "collapse-to-upper"
    }

    fn prune(&self, bx: &FloatBox, _c: &Constraint) -> PruneResult {
        let out = FloatBox::new(bx.intervals().iter().map(|d| FloatInterval::point(d.hi())).collect());
        let changed = &out != bx;
        PruneResult { bx: out, changed }
    }
}

/// Prunes everything away.
pub struct PruneToEmpty;

impl PruneOperator for PruneToEmpty {
    fn name(&self) -> &str {
        "prune-to-empty"
    }

    fn prune(&self, bx: &FloatBox, _c: &Constraint) -> PruneResult {
        PruneResult::empty(bx.dim())
    }
}
